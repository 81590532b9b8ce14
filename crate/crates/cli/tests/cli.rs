use std::process::Command;

use convex_ldp_cli::config::ShiftMode;
use convex_ldp_cli::run::{execute, Options};
use convex_ldp_cli::*;

const BASE: &str = r#"
seed = 5
trials = 500
is_samples = 5000
ladder = [10, 100, 1000]
"#;

fn gaussian(cov: &str) -> String {
    format!("[model]\nkind = \"gaussian\"\ncovariance = {cov}\n")
}

const IDENTITY: &str = "[[1.0, 0.0], [0.0, 1.0]]";

fn doc(head: &str, model: &str, set: &str, limit: &str) -> String {
    format!("{BASE}{head}\n{model}\n[set]\n{set}\n\n[limit]\ndiagonal = {limit}\n")
}

fn block(corner: &str) -> String {
    format!("kind = \"block\"\ncorner = {corner}")
}

fn experiment(text: &str) -> Experiment {
    Experiment::new(parse_config(text).unwrap()).unwrap()
}

#[test]
fn minimal_block_config_parses() {
    let c = parse_config(&doc("", &gaussian(IDENTITY), &block("[2.0, 2.0]"), "[1.0, 1.0]")).unwrap();
    assert_eq!(c.normalization_factor, 1.0);
    assert_eq!(c.is_shift, ShiftMode::Dominating);
    assert_eq!(c.outputs, std::path::PathBuf::from("out"));
}

#[test]
fn limit_is_auto_normalized() {
    let c = parse_config(&doc("", &gaussian(IDENTITY), &block("[2.0, 2.0]"), "[2.0, 1.0]")).unwrap();
    assert_eq!(c.limit.diagonal, vec![1.0, 0.5]);
    assert_eq!(c.normalization_factor, 2.0);
}

#[test]
fn config_round_trip() {
    let text = doc(
        "methods = [\"crude_componentwise\", \"exact_block_at_least_one\"]\nis_shift = \"zero\"",
        &gaussian(IDENTITY),
        &block("[2.0, 2.0]"),
        "[4.0, 1.0]",
    );
    let c = parse_config(&text).unwrap();
    assert_eq!(parse_config(&c.to_toml()).unwrap(), c);
    let mix = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/mixture.toml")).unwrap();
    let c = parse_config(&mix).unwrap();
    assert_eq!(parse_config(&c.to_toml()).unwrap(), c);
    assert_eq!(c.digest(), parse_config(&c.to_toml()).unwrap().digest());
}

#[test]
fn validation_errors_name_the_assumption() {
    let err = parse_config(&doc("", &gaussian(IDENTITY), &block("[-1.0, -1.0]"), "[1.0, 1.0]")).unwrap_err();
    assert!(err.to_string().contains("atypical set"), "{err}");
    assert_eq!(err.exit_code(), 2);

    let model = "[model]\nkind = \"mixture\"\n\
        [[model.components]]\nweight = 0.5\nmean = [0.0, 0.0]\ncovariance = [[1.0, 0.0], [0.0, 1.0]]\n\
        [[model.components]]\nweight = 0.5\nmean = [4.0, 4.0]\ncovariance = [[1.0, 0.0], [0.0, 1.0]]\n";
    let err = parse_config(&doc("", model, &block("[3.0, 3.0]"), "[1.0, 1.0]")).unwrap_err();
    assert!(err.to_string().contains("mixture mean inside set"), "{err}");

    let err = parse_config(&doc("", &gaussian("[[1.0, 2.0], [2.0, 1.0]]"), &block("[1.0, 1.0]"), "[1.0, 1.0]")).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let err = parse_config(&BASE.replace("[10, 100, 1000]", "[100, 10]")).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn parse_errors_point_at_the_field() {
    let text = doc("", &gaussian(IDENTITY), &block("[2.0, 2.0]"), "[1.0, 1.0]").replace("trials = 500", "trials = \"many\"");
    let err = parse_config(&text).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("trials") && msg.contains("line"), "{msg}");
    let err = parse_config(&format!("{}\nbogus = 1\n", doc("", &gaussian(IDENTITY), &block("[2.0, 2.0]"), "[1.0, 1.0]"))).unwrap_err();
    assert!(err.to_string().contains("bogus"));
}

#[test]
fn dominate_block_report() {
    let exp = experiment(&doc("", &gaussian(IDENTITY), &block("[2.0, 2.0]"), "[1.0, 1.0]"));
    let r = run_dominate(&exp).unwrap();
    let x: Vec<f64> = serde_json::from_value(r["x_star"].clone()).unwrap();
    assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 2.0).abs() < 1e-9);
    assert!((r["rate_componentwise"].as_f64().unwrap() + 3.5).abs() < 1e-9);
    assert_eq!(r["margin"]["pass"], true);
    assert_eq!(r["margin_warning"], false);
    assert_eq!(r["optimality_certificate"], true);
}

#[test]
fn dominate_polyhedron_reports_corner_discrepancy() {
    let set = "kind = \"polyhedron\"\nmatrix = [[2.0, 1.0], [1.0, 1.0], [1.0, 2.0]]\noffsets = [4.0, 3.0, 4.0]";
    let exp = experiment(&doc("", &gaussian(IDENTITY), set, "[1.0, 1.0]"));
    let r = run_dominate(&exp).unwrap();
    let qp: Vec<f64> = serde_json::from_value(r["qp_point"].clone()).unwrap();
    let corner: Vec<f64> = serde_json::from_value(r["pairwise_corner"].clone()).unwrap();
    assert!((qp[0] - 1.5).abs() < 1e-8 && (qp[1] - 1.5).abs() < 1e-8);
    assert_eq!(corner, vec![1.0, 1.0]);
    assert!((r["corner_discrepancy"].as_f64().unwrap() - 0.5f64.sqrt()).abs() < 1e-8);
    assert!(r["warnings"].as_array().unwrap().iter().any(|w| w.as_str().unwrap().contains("pairwise corner")));
}

#[test]
fn small_margin_is_a_warning() {
    let set = "kind = \"halfspace\"\nnormal = [1.0, 1.0]\noffset = 1.0";
    let exp = experiment(&doc("", &gaussian(IDENTITY), set, "[1.0, 1.0]"));
    let r = run_dominate(&exp).unwrap();
    assert_eq!(r["margin_warning"], true);
    assert!(r["warnings"][0].as_str().unwrap().contains("margin alpha <= 1"));
}

#[test]
fn verify_exact_rows_have_zero_error() {
    let head = "methods = [\"exact_block_componentwise\", \"exact_block_at_least_one\", \"union_combined\"]";
    let text = doc(head, &gaussian(IDENTITY), &block("[1.2, 1.2]"), "[1.0, 1.0]").replace("[10, 100, 1000]", "[1000, 10000, 100000]");
    let out = run_verify(&experiment(&text), ShiftMode::Dominating).unwrap();
    let mut lines = out.csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 9);
    for row in &rows {
        assert_eq!(row.len(), 7);
        if row[2].starts_with("exact") {
            assert_eq!(row[4].parse::<f64>().unwrap(), 0.0);
        } else {
            assert!(row[4].parse::<f64>().unwrap() > 0.0);
        }
        assert_eq!(row[6], "5");
    }
    // 17 significant digits
    assert_eq!(rows[0][3].split('e').next().unwrap().replace(['.', '-'], "").len(), 17);
}

#[test]
fn verify_single_rung_refuses_the_fit() {
    let text = doc("", &gaussian(IDENTITY), &block("[1.2, 1.2]"), "[1.0, 1.0]").replace("[10, 100, 1000]", "[1000]");
    let out = run_verify(&experiment(&text), ShiftMode::Dominating).unwrap();
    assert_eq!(out.csv.lines().count(), 5);
    let fit = &out.summary["fits"]["exact_block_at_least_one"];
    assert!(fit["error"].as_str().unwrap().contains("insufficient points"));
}

#[test]
fn golden_schema() {
    let exp = experiment(&doc(
        "methods = [\"crude_componentwise\", \"crude_at_least_one\", \"importance_sampled_single\", \"union_combined\", \"exact_block_componentwise\", \"exact_block_at_least_one\"]",
        &gaussian(IDENTITY),
        &block("[1.2, 1.2]"),
        "[1.0, 1.0]",
    ));
    let keys = |v: &serde_json::Value| v.as_object().unwrap().keys().cloned().collect::<Vec<_>>().join(",");
    let meta = ["command", "config_digest", "seed", "version"];
    let check = |v: &serde_json::Value, expected: &str| {
        assert_eq!(keys(v), expected);
        for k in meta {
            assert!(v.get(k).is_some());
        }
        assert_eq!(v["version"], VERSION);
        assert_eq!(v["config_digest"].as_str().unwrap().len(), 64);
    };
    check(
        &run_dominate(&exp).unwrap(),
        "center,command,config_digest,dimension,directional_check,final_step,limit_diagonal,margin,margin_alpha,margin_warning,\
         normalization_factor,optimality_certificate,quad_value,rate_componentwise,rate_single,seed,set_kind,solver_iterations,\
         version,warnings,x_star",
    );
    check(
        &run_rate(&exp).unwrap(),
        "command,config_digest,ladder,margin_alpha,margin_warning,product_formula_rate,rate_componentwise,rate_single,seed,version",
    );
    check(
        &run_estimate(&exp, ShiftMode::Dominating).unwrap(),
        "command,config_digest,crude_at_least_one,crude_componentwise,crude_resolved,crude_single,degenerate_weights,exact,\
         importance_sampled_single,n,relative_errors,seed,shift_mode,shifts,speed,union_combined,\
         variance_reduction_factor,version",
    );
    let out = run_verify(&exp, ShiftMode::Dominating).unwrap();
    check(
        &out.summary,
        "command,config_digest,fits,lemma3,margin_alpha,methods,product_formula_rate,rate_componentwise,rate_single,seed,version",
    );
    assert_eq!(
        keys(&out.summary["fits"]["exact_block_componentwise"]),
        "intercept,points,predicted_rate,r_squared,relative_gap,slope,vs_product_formula"
    );
    assert_eq!(
        keys(&out.summary["lemma3"]),
        "claimed_gap_per_speed,gap_flagged,max_abs_gap_per_speed,product_formula_log_ratio_per_log_n,rows,source"
    );
    // crude misses every trial at these rungs
    assert_eq!(keys(&out.summary["fits"]["crude_at_least_one"]), "error,predicted_rate");
    assert_eq!(CSV_HEADER, "n,speed,method,p_hat,std_error,log_p_hat,seed");
}

#[test]
fn estimate_halfspace_matches_tail_oracle() {
    let set = "kind = \"halfspace\"\nnormal = [1.0, 1.0]\noffset = 2.0";
    let text = doc("", &gaussian(IDENTITY), set, "[1.0, 1.0]").replace("is_samples = 5000", "is_samples = 100000")
        .replace("[10, 100, 1000]", "[2, 3, 4]");
    let r = run_estimate(&experiment(&text), ShiftMode::Dominating).unwrap();
    let a2 = r["speed"].as_f64().unwrap();
    // q = P(Z > a·2/√2) at the largest rung
    let exact = convex_ldp::tail::normal_tail((2.0 * a2).sqrt());
    let is = &r["importance_sampled_single"];
    let p = is["p_hat"].as_f64().unwrap();
    assert!((p - exact).abs() <= 3.0 * is["std_error"].as_f64().unwrap(), "{p} vs {exact}");
    assert!(r["variance_reduction_factor"].as_f64().unwrap() > 10.0);
}

#[test]
fn estimate_zero_shift_equals_crude() {
    let exp = experiment(&doc("", &gaussian(IDENTITY), &block("[0.3, 0.3]"), "[1.0, 1.0]"));
    let r = run_estimate(&exp, ShiftMode::Zero).unwrap();
    assert_eq!(r["importance_sampled_single"], r["crude_single"]);
    assert_eq!(r["variance_reduction_factor"].as_f64(), Some(1.0));
}

#[test]
fn estimate_all_miss_is_flagged() {
    let exp = experiment(&doc("", &gaussian(IDENTITY), &block("[3.0, 3.0]"), "[1.0, 1.0]"));
    let r = run_estimate(&exp, ShiftMode::Zero).unwrap();
    assert_eq!(r["degenerate_weights"], true);
    assert_eq!(r["importance_sampled_single"]["p_hat"].as_f64(), Some(0.0));
}

#[test]
fn mixture_pipeline() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/mixture.toml")).unwrap();
    let exp = experiment(&text.replace("trials = 2000", "trials = 200"));
    let r = run_dominate(&exp).unwrap();
    assert!((r["rate_componentwise"].as_f64().unwrap() + 3.5).abs() < 1e-9);
    assert_eq!(r["mixture"]["argmin_component"], 2);
    let out = run_verify(&exp, ShiftMode::Dominating).unwrap();
    assert_eq!(out.csv.lines().count(), 1 + 2 * 3);
}

fn write_config(dir: &std::path::Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn execute_writes_reports_and_honours_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &doc("", &gaussian(IDENTITY), &block("[1.2, 1.2]"), "[1.0, 1.0]"));
    let opts = |seed| Options { config: config.clone(), seed: Some(seed), out: Some(dir.path().join(format!("o{seed}"))), ..Default::default() };
    let paths = execute(convex_ldp_cli::run::Command::Verify, &opts(9)).unwrap();
    assert_eq!(paths.len(), 2);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&paths[1]).unwrap()).unwrap();
    assert_eq!(summary["seed"], 9);
    let csv9 = std::fs::read_to_string(&paths[0]).unwrap();
    let again = std::fs::read_to_string(&execute(convex_ldp_cli::run::Command::Verify, &opts(9)).unwrap()[0]).unwrap();
    assert_eq!(csv9, again);
    let csv10 = std::fs::read_to_string(&execute(convex_ldp_cli::run::Command::Verify, &opts(10)).unwrap()[0]).unwrap();
    assert_ne!(csv9, csv10);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_convex-ldp");
    let dir = tempfile::tempdir().unwrap();
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();

    let good = write_config(dir.path(), &doc("", &gaussian(IDENTITY), &block("[2.0, 2.0]"), "[1.0, 1.0]"));
    let out = dir.path().join("out");
    assert_eq!(status(&["dominate", "--config", good.to_str().unwrap(), "--out", out.to_str().unwrap()]), Some(0));
    assert!(out.join("dominate.json").exists());
    assert_eq!(status(&["rate", "--config", good.to_str().unwrap(), "--out", out.to_str().unwrap()]), Some(0));

    assert_eq!(status(&["dominate", "--config", dir.path().join("missing.toml").to_str().unwrap()]), Some(4));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, doc("", &gaussian(IDENTITY), &block("[-1.0, -1.0]"), "[1.0, 1.0]")).unwrap();
    assert_eq!(status(&["dominate", "--config", bad.to_str().unwrap()]), Some(2));

    // an output path under a regular file cannot be created
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let nested = blocker.join("sub");
    assert_eq!(status(&["dominate", "--config", good.to_str().unwrap(), "--out", nested.to_str().unwrap()]), Some(4));

    // infeasible rows: the solver cannot project, exit 3
    let infeasible = dir.path().join("infeasible.toml");
    let set = "kind = \"polyhedron\"\nmatrix = [[1.0, 0.0], [-1.0, 0.0]]\noffsets = [2.0, -1.0]";
    std::fs::write(&infeasible, doc("", &gaussian(IDENTITY), set, "[1.0, 1.0]")).unwrap();
    let code = status(&["dominate", "--config", infeasible.to_str().unwrap()]);
    assert!(code == Some(3) || code == Some(2), "{code:?}");
}
