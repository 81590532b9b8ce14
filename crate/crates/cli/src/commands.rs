//! The four pipelines behind the subcommands.
//!
//! Each returns its artifacts in memory; writing them is left to the caller so
//! tests can compare outputs without touching the filesystem.

use convex_ldp::dominate::{dominating_point_about, verify_optimality, MARGIN_WARNING_BAND};
use convex_ldp::estimate::{exact_block_for, exact_reports, mc_both, union_combined};
use convex_ldp::{
    check_margin, corner_pairwise, is_single, rate_mixture, slope_fit, ConvexSet, DVector, Distribution,
    DominatingPoint, EstimateReport, GaussianModel, LadderRung, Method, MixtureRate, RandomStream, ScalingLimit, Shape,
};
use serde_json::{json, Map, Value};

use crate::config::{Experiment, ShiftMode};
use crate::error::Result;

pub const VERSION: &str = concat!("convex-ldp ", env!("CARGO_PKG_VERSION"));
pub const CSV_HEADER: &str = "n,speed,method,p_hat,std_error,log_p_hat,seed";

/// Directions sampled for the directional optimality check in reports.
const REPORT_DIRECTIONS: usize = 2000;
/// Pairwise corners farther than this from the QP point trigger a warning.
const CORNER_WARNING_DISTANCE: f64 = 1e-6;
/// Largest |log-ratio|/speed still read as exponential equivalence.
pub const LEMMA3_GAP_TOLERANCE: f64 = 0.05;

fn meta(exp: &Experiment, command: &str) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("command".into(), json!(command));
    m.insert("version".into(), json!(VERSION));
    m.insert("seed".into(), json!(exp.config.seed));
    m.insert("config_digest".into(), json!(exp.config.digest()));
    m
}

fn vec_json(v: &DVector<f64>) -> Value {
    json!(v.as_slice())
}

/// The dominating point that sets the rate: the plain problem about the mean
/// for a Gaussian, the argmin component for a mixture.
pub struct Dominant {
    pub point: DominatingPoint,
    pub rate: f64,
    pub mixture: Option<MixtureRate>,
}

pub fn dominant(exp: &Experiment) -> Result<Dominant> {
    match &exp.distribution {
        Distribution::Gaussian(g) => {
            let point = dominating_point_about(&exp.set, g.covariance(), &exp.limit, g.mean())?;
            Ok(Dominant { rate: point.rate_componentwise, point, mixture: None })
        }
        Distribution::Mixture(m) => {
            let mix = rate_mixture(&exp.set, m, &exp.limit)?;
            let comp = &m.components()[mix.argmin_component - 1];
            let point = dominating_point_about(&exp.set, comp.covariance(), &exp.limit, comp.mean())?;
            Ok(Dominant { rate: mix.rate, point, mixture: Some(mix) })
        }
    }
}

fn mixture_json(mix: &MixtureRate) -> Value {
    json!({
        "rate": mix.rate,
        "argmin_component": mix.argmin_component,
        "min_quad_value": mix.min_quad_value,
        "per_component": mix.per_component.iter().map(|c| json!({
            "component": c.component,
            "weight": c.weight,
            "x_star": vec_json(&c.x_star),
            "quad_value": c.quad_value,
        })).collect::<Vec<_>>(),
    })
}

fn covariance_of(exp: &Experiment, dom: &Dominant) -> convex_ldp::CovarianceModel {
    match (&exp.distribution, &dom.mixture) {
        (Distribution::Gaussian(g), _) => g.covariance().clone(),
        (Distribution::Mixture(m), Some(mix)) => m.components()[mix.argmin_component - 1].covariance().clone(),
        (Distribution::Mixture(_), None) => unreachable!("mixture always carries its rate"),
    }
}

pub fn run_dominate(exp: &Experiment) -> Result<Value> {
    let dom = dominant(exp)?;
    let dp = &dom.point;
    let margin = check_margin(dp);
    let mut warnings = Vec::new();
    if !margin.pass {
        warnings.push(format!("margin alpha <= 1 (alpha = {})", margin.alpha));
    } else if margin.near_boundary {
        warnings.push(format!("margin alpha within {MARGIN_WARNING_BAND:e} of 1"));
    }
    let cov = covariance_of(exp, &dom);
    let directional = verify_optimality(dp, &exp.set, &cov, &exp.limit, REPORT_DIRECTIONS)?;

    let mut out = meta(exp, "dominate");
    out.insert("set_kind".into(), json!(exp.set.kind()));
    out.insert("dimension".into(), json!(exp.set.dimension()));
    out.insert("normalization_factor".into(), json!(exp.config.normalization_factor));
    out.insert("limit_diagonal".into(), vec_json(exp.limit.diagonal()));
    out.insert("x_star".into(), vec_json(&dp.x_star));
    out.insert("center".into(), vec_json(&dp.center));
    out.insert("quad_value".into(), json!(dp.quad_value));
    out.insert("margin_alpha".into(), json!(dp.margin_alpha));
    out.insert("rate_single".into(), json!(dp.rate_single));
    out.insert("rate_componentwise".into(), json!(dom.rate));
    out.insert("optimality_certificate".into(), json!(dp.optimality_certificate));
    out.insert("directional_check".into(), json!(directional));
    out.insert("solver_iterations".into(), json!(dp.solver_iterations));
    out.insert("final_step".into(), json!(dp.final_step));
    out.insert("margin".into(), json!(margin));
    out.insert("margin_warning".into(), json!(!margin.pass || margin.near_boundary));
    if let Some(mix) = &dom.mixture {
        out.insert("mixture".into(), mixture_json(mix));
    }
    if let Shape::Polyhedron { matrix, offsets } = exp.set.shape() {
        out.insert("qp_point".into(), vec_json(&dp.x_star));
        match corner_pairwise(matrix, offsets) {
            Ok(corner) => {
                let gap = (&corner - &dp.x_star).norm();
                if gap > CORNER_WARNING_DISTANCE {
                    warnings.push(format!("pairwise corner differs from the dominating point by {gap}"));
                }
                out.insert("pairwise_corner".into(), vec_json(&corner));
                out.insert("corner_discrepancy".into(), json!(gap));
            }
            Err(e) => {
                out.insert("pairwise_corner".into(), Value::Null);
                out.insert("corner_discrepancy".into(), Value::Null);
                warnings.push(format!("pairwise corner unavailable: {e}"));
            }
        }
    }
    out.insert("warnings".into(), json!(warnings));
    Ok(Value::Object(out))
}

/// `d/2 − α`, the slope of the exact componentwise probability for
/// diagonal blocks.
fn product_formula(exp: &Experiment, alpha: f64) -> Option<f64> {
    exp.exact_applies().then(|| exp.set.dimension() as f64 / 2.0 - alpha)
}

pub fn run_rate(exp: &Experiment) -> Result<Value> {
    let dom = dominant(exp)?;
    let alpha = dom.point.margin_alpha;
    let margin = check_margin(&dom.point);
    let mut out = meta(exp, "rate");
    out.insert("rate_componentwise".into(), json!(dom.rate));
    out.insert("rate_single".into(), json!(-alpha));
    out.insert("margin_alpha".into(), json!(alpha));
    out.insert("margin_warning".into(), json!(!margin.pass || margin.near_boundary));
    out.insert("product_formula_rate".into(), json!(product_formula(exp, alpha)));
    out.insert(
        "ladder".into(),
        json!(exp
            .ladder
            .rungs
            .iter()
            .map(|r| json!({
                "n": r.n,
                "speed": r.speed(),
                "predicted_log_p": dom.rate * r.speed(),
            }))
            .collect::<Vec<_>>()),
    );
    if let Some(mix) = &dom.mixture {
        out.insert("mixture".into(), mixture_json(mix));
    }
    Ok(Value::Object(out))
}

/// Mean shift for one Gaussian: the dominating point of the scaled set about
/// the mean, minus the mean.
fn shift_for(model: &GaussianModel, scaled: &ConvexSet, mode: ShiftMode) -> Result<DVector<f64>> {
    let d = model.dimension();
    Ok(match mode {
        ShiftMode::Zero => DVector::zeros(d),
        // a scaled set that swallows the mean leaves nothing rare to tilt toward
        ShiftMode::Dominating if scaled.contains(model.mean())?.is_inside() => DVector::zeros(d),
        ShiftMode::Dominating => {
            let identity = ScalingLimit::identity(d);
            dominating_point_about(scaled, model.covariance(), &identity, model.mean())?.x_star - model.mean()
        }
    })
}

/// Single-vector IS over the scaled set. Mixtures are handled componentwise,
/// `q = Σ w_j q_j`, each component with its own shift and substream.
fn importance_single(
    exp: &Experiment,
    rung: &LadderRung,
    mode: ShiftMode,
    stream: RandomStream,
) -> Result<(EstimateReport, Vec<DVector<f64>>)> {
    let scaled = exp.set.scale(&rung.matrix)?;
    let samples = exp.config.is_samples;
    let mut report = match &exp.distribution {
        Distribution::Gaussian(g) => {
            let shift = shift_for(g, &scaled, mode)?;
            (is_single(g, &scaled, &shift, samples, stream)?, vec![shift])
        }
        Distribution::Mixture(m) => {
            let mut p = 0.0;
            let mut var = 0.0;
            let mut degenerate = true;
            let mut shifts = Vec::new();
            for (j, (comp, w)) in m.components().iter().zip(m.weights()).enumerate() {
                let shift = shift_for(comp, &scaled, mode)?;
                if *w > 0.0 {
                    let r = is_single(comp, &scaled, &shift, samples, stream.child(j as u64))?;
                    p += w * r.p_hat;
                    var += (w * r.std_error).powi(2);
                    degenerate &= r.degenerate_weights;
                }
                shifts.push(shift);
            }
            let report = EstimateReport {
                method: Method::ImportanceSampledSingle,
                p_hat: p,
                std_error: var.sqrt(),
                log_p_hat: p.ln(),
                trials: samples,
                seed: stream.seed,
                n: 1,
                scaling_norm_sq: f64::NAN,
                degenerate_weights: degenerate,
            };
            (report, shifts)
        }
    };
    report.0.n = rung.n;
    report.0.scaling_norm_sq = rung.speed();
    Ok(report)
}

fn default_methods(exp: &Experiment) -> Vec<Method> {
    if exp.exact_applies() {
        vec![
            Method::ExactBlockComponentwise,
            Method::ExactBlockAtLeastOne,
            Method::ImportanceSampledSingle,
            Method::UnionCombined,
        ]
    } else {
        vec![Method::ImportanceSampledSingle, Method::UnionCombined]
    }
}

/// All reports for one rung, in the requested method order.
fn rung_reports(exp: &Experiment, index: usize, rung: &LadderRung, methods: &[Method], mode: ShiftMode) -> Result<Vec<EstimateReport>> {
    let base = RandomStream::from_seed(exp.config.seed).child(index as u64);
    let wants = |m: Method| methods.contains(&m);
    let crude = if wants(Method::CrudeComponentwise) || wants(Method::CrudeAtLeastOne) {
        Some(mc_both(&exp.distribution, &exp.set, rung, exp.config.trials, base.child(0))?)
    } else {
        None
    };
    let is = if wants(Method::ImportanceSampledSingle) || wants(Method::UnionCombined) {
        Some(importance_single(exp, rung, mode, base.child(1))?.0)
    } else {
        None
    };
    let exact = exact_block_for(&exp.distribution, &exp.set, rung).map(|e| exact_reports(&e, exp.config.seed, rung));
    let mut out = Vec::with_capacity(methods.len());
    for m in methods {
        let mut r = match m {
            Method::CrudeComponentwise => crude.as_ref().expect("crude run").0.clone(),
            Method::CrudeAtLeastOne => crude.as_ref().expect("crude run").1.clone(),
            Method::ImportanceSampledSingle => is.clone().expect("is run"),
            Method::UnionCombined => union_combined(is.as_ref().expect("is run"), rung),
            Method::ExactBlockComponentwise => exact.as_ref().expect("validated exact")[0].clone(),
            Method::ExactBlockAtLeastOne => exact.as_ref().expect("validated exact")[1].clone(),
        };
        r.seed = exp.config.seed;
        out.push(r);
    }
    Ok(out)
}

fn csv_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn csv_row(r: &EstimateReport) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        r.n,
        csv_float(r.scaling_norm_sq),
        r.method.label(),
        csv_float(r.p_hat),
        csv_float(r.std_error),
        csv_float(r.log_p_hat),
        r.seed
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOutput {
    pub csv: String,
    pub summary: Value,
    pub reports: Vec<EstimateReport>,
}

fn predicted_for(method: Method, j: f64, alpha: f64) -> f64 {
    match method {
        Method::ImportanceSampledSingle => -alpha,
        _ => j,
    }
}

fn fit_json(points: &[(f64, f64)], predicted: f64) -> Value {
    match slope_fit(points, predicted) {
        Ok(fit) => json!({
            "slope": fit.slope,
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
            "predicted_rate": fit.predicted_rate,
            "relative_gap": fit.relative_gap,
            "points": fit.points,
        }),
        Err(e) => json!({ "error": e.to_string(), "predicted_rate": predicted }),
    }
}

pub fn run_verify(exp: &Experiment, mode: ShiftMode) -> Result<VerifyOutput> {
    let methods = exp.config.methods.clone().unwrap_or_else(|| default_methods(exp));
    let dom = dominant(exp)?;
    let j = dom.rate;
    let alpha = dom.point.margin_alpha;
    let product = product_formula(exp, alpha);

    let mut reports = Vec::new();
    for (i, rung) in exp.ladder.rungs.iter().enumerate() {
        reports.extend(rung_reports(exp, i, rung, &methods, mode)?);
    }
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for r in &reports {
        csv.push_str(&csv_row(r));
        csv.push('\n');
    }

    let mut fits = Map::new();
    for m in &methods {
        let points: Vec<(f64, f64)> = reports
            .iter()
            .filter(|r| r.method == *m && r.log_p_hat.is_finite())
            .map(|r| (r.scaling_norm_sq, r.log_p_hat))
            .collect();
        let mut entry = fit_json(&points, predicted_for(*m, j, alpha));
        let componentwise = matches!(m, Method::CrudeComponentwise | Method::ExactBlockComponentwise);
        if let (true, Some(p), Value::Object(obj)) = (componentwise, product, &mut entry) {
            obj.insert("vs_product_formula".into(), fit_json(&points, p));
        }
        fits.insert(m.label().into(), entry);
    }

    let mut out = meta(exp, "verify");
    out.insert("rate_componentwise".into(), json!(j));
    out.insert("rate_single".into(), json!(-alpha));
    out.insert("margin_alpha".into(), json!(alpha));
    out.insert("product_formula_rate".into(), json!(product));
    out.insert("methods".into(), json!(methods.iter().map(|m| m.label()).collect::<Vec<_>>()));
    out.insert("fits".into(), Value::Object(fits));
    out.insert("lemma3".into(), lemma3(&reports, exp.set.dimension()));
    Ok(VerifyOutput { csv, summary: Value::Object(out), reports })
}

/// Measured gap between the componentwise and at-least-one events, exact
/// rows preferred over crude ones.
fn lemma3(reports: &[EstimateReport], d: usize) -> Value {
    let pairs = [
        (Method::ExactBlockComponentwise, Method::ExactBlockAtLeastOne, "exact"),
        (Method::CrudeComponentwise, Method::CrudeAtLeastOne, "crude"),
    ];
    for (comp, alo, source) in pairs {
        let rows: Vec<Value> = reports
            .iter()
            .filter(|r| r.method == comp)
            .filter_map(|c| {
                let a = reports.iter().find(|r| r.method == alo && r.n == c.n)?;
                let log_ratio = c.log_p_hat - a.log_p_hat;
                log_ratio.is_finite().then(|| {
                    json!({
                        "n": c.n,
                        "speed": c.scaling_norm_sq,
                        "log_ratio": log_ratio,
                        "log_ratio_per_log_n": log_ratio / (c.n as f64).ln(),
                        "log_ratio_per_speed": log_ratio / c.scaling_norm_sq,
                    })
                })
            })
            .collect();
        if rows.is_empty() {
            continue;
        }
        let worst = rows.iter().map(|r| r["log_ratio_per_speed"].as_f64().unwrap_or(0.0).abs()).fold(0.0, f64::max);
        return json!({
            "source": source,
            "claimed_gap_per_speed": 0.0,
            "product_formula_log_ratio_per_log_n": (d as f64 - 1.0),
            "max_abs_gap_per_speed": worst,
            "gap_flagged": worst > LEMMA3_GAP_TOLERANCE,
            "rows": rows,
        });
    }
    json!({ "source": null, "gap_flagged": false, "rows": [] })
}

pub fn run_estimate(exp: &Experiment, mode: ShiftMode) -> Result<Value> {
    let index = exp.ladder.rungs.len() - 1;
    let rung = &exp.ladder.rungs[index];
    let base = RandomStream::from_seed(exp.config.seed).child(index as u64);
    let (comp, alo, _) = mc_both(&exp.distribution, &exp.set, rung, exp.config.trials, base.child(0))?;
    let (is, shifts) = importance_single(exp, rung, mode, base.child(1))?;
    let (crude_single, _) = importance_single(exp, rung, ShiftMode::Zero, base.child(1))?;
    let union = union_combined(&is, rung);
    let exact = exact_block_for(&exp.distribution, &exp.set, rung);

    let rel = |est: f64, truth: f64| json!((est - truth).abs() / truth);
    let relative_errors = exact.map(|e| {
        json!({
            "crude_componentwise": rel(comp.p_hat, e.p_componentwise),
            "crude_at_least_one": rel(alo.p_hat, e.p_at_least_one),
            "union_combined": rel(union.p_hat, e.p_at_least_one),
        })
    });
    let crude_var = crude_single.std_error.powi(2);
    let is_var = is.std_error.powi(2);
    let factor = (crude_var > 0.0 && is_var > 0.0).then(|| crude_var / is_var);

    let mut out = meta(exp, "estimate");
    out.insert("n".into(), json!(rung.n));
    out.insert("speed".into(), json!(rung.speed()));
    out.insert("shift_mode".into(), json!(mode));
    out.insert("shifts".into(), json!(shifts.iter().map(vec_json).collect::<Vec<_>>()));
    out.insert("crude_componentwise".into(), json!(comp));
    out.insert("crude_at_least_one".into(), json!(alo));
    out.insert("crude_single".into(), json!(crude_single));
    out.insert("importance_sampled_single".into(), json!(is));
    out.insert("union_combined".into(), json!(union));
    out.insert("exact".into(), json!(exact));
    out.insert("relative_errors".into(), json!(relative_errors));
    out.insert("variance_reduction_factor".into(), json!(factor));
    out.insert("crude_resolved".into(), json!(crude_single.p_hat > 0.0));
    out.insert("degenerate_weights".into(), json!(is.degenerate_weights));
    Ok(Value::Object(out))
}
