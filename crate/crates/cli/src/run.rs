//! Subcommand dispatch: read the config, run a pipeline, write its files.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::commands::{run_dominate, run_estimate, run_rate, run_verify};
use crate::config::{parse_config, Experiment, ShiftMode};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Dominate,
    Rate,
    Estimate,
    Verify,
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub zero_shift: bool,
}

/// Loads and validates the config, applying command-line overrides.
pub fn load(options: &Options) -> Result<Experiment> {
    let text = fs::read_to_string(&options.config).map_err(|e| CliError::io(&options.config, e))?;
    let mut config = parse_config(&text)?;
    if let Some(seed) = options.seed {
        config.seed = seed;
    }
    if let Some(out) = &options.out {
        config.outputs = out.clone();
    }
    Experiment::new(config)
}

/// Runs one subcommand and returns the paths written.
pub fn execute(command: Command, options: &Options) -> Result<Vec<PathBuf>> {
    let exp = load(options)?;
    let mode = if options.zero_shift { ShiftMode::Zero } else { exp.config.is_shift };
    let work = || -> Result<Vec<(String, String)>> {
        Ok(match command {
            Command::Dominate => vec![("dominate.json".into(), pretty(&run_dominate(&exp)?))],
            Command::Rate => vec![("rate.json".into(), pretty(&run_rate(&exp)?))],
            Command::Estimate => vec![("estimate.json".into(), pretty(&run_estimate(&exp, mode)?))],
            Command::Verify => {
                let out = run_verify(&exp, mode)?;
                vec![("verify.csv".into(), out.csv), ("verify_summary.json".into(), pretty(&out.summary))]
            }
        })
    };
    let files = match options.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| CliError::Config(format!("cannot build a pool of {k} threads: {e}")))?
            .install(work)?,
        None => work()?,
    };
    write_all(&exp.config.outputs, &files)
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

fn write_all(dir: &Path, files: &[(String, String)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    files
        .iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
            Ok(path)
        })
        .collect()
}
