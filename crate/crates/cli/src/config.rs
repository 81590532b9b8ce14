//! Experiment documents.
//!
//! A config is a TOML document; [`parse_config`] validates it eagerly and
//! [`Experiment::new`] builds the model objects it describes.

use std::path::PathBuf;

use convex_ldp::estimate::exact_block_for;
use convex_ldp::{
    ConvexSet, CovarianceModel, DMatrix, DVector, Distribution, GaussianMixture, GaussianModel, Method,
    ScalingLadder, ScalingLimit,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: u64,
    pub is_samples: u64,
    pub ladder: Vec<u64>,
    #[serde(default = "default_outputs")]
    pub outputs: PathBuf,
    /// Scale removed from the limit diagonal so its largest entry is 1.
    #[serde(default = "one")]
    pub normalization_factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<Method>>,
    #[serde(default)]
    pub is_shift: ShiftMode,
    pub model: ModelSpec,
    pub set: SetSpec,
    pub limit: LimitSpec,
}

fn default_outputs() -> PathBuf {
    PathBuf::from("out")
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftMode {
    /// Mean shift to the dominating point of the scaled set.
    #[default]
    Dominating,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Gaussian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mean: Option<Vec<f64>>,
        covariance: Vec<Vec<f64>>,
    },
    Mixture {
        components: Vec<ComponentSpec>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    Block { corner: Vec<f64> },
    Halfspace { normal: Vec<f64>, offset: f64 },
    Polyhedron { matrix: Vec<Vec<f64>>, offsets: Vec<f64> },
    Ellipsoid { center: Vec<f64>, shape: Vec<Vec<f64>>, radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitSpec {
    pub diagonal: Vec<f64>,
}

impl ExperimentConfig {
    /// Canonical TOML form.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical form.
    pub fn digest(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn dimension(&self) -> usize {
        self.limit.diagonal.len()
    }
}

/// Parses and validates a config document. The limit diagonal is normalized
/// to max entry 1, with the removed scale folded into `normalization_factor`.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut config: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    normalize_limit(&mut config)?;
    Experiment::new(config.clone())?;
    Ok(config)
}

fn normalize_limit(config: &mut ExperimentConfig) -> Result<()> {
    let diag = &mut config.limit.diagonal;
    if diag.is_empty() || diag.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(CliError::Validation("limit.diagonal must be non-empty with positive finite entries".into()));
    }
    if !(config.normalization_factor > 0.0) || !config.normalization_factor.is_finite() {
        return Err(CliError::Validation("normalization_factor must be positive".into()));
    }
    let max = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max != 1.0 {
        diag.iter_mut().for_each(|v| *v /= max);
        config.normalization_factor *= max;
    }
    Ok(())
}

/// A validated config with its model objects built.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub distribution: Distribution,
    pub set: ConvexSet,
    pub limit: ScalingLimit,
    pub ladder: ScalingLadder,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        let d = config.dimension();
        if config.trials == 0 {
            return Err(CliError::Validation("trials must be at least 1".into()));
        }
        if config.is_samples == 0 {
            return Err(CliError::Validation("is_samples must be at least 1".into()));
        }
        if config.ladder.is_empty() {
            return Err(CliError::Validation("ladder must list at least one sample size".into()));
        }
        if config.ladder.iter().any(|n| *n < 2) || config.ladder.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Validation("ladder must be strictly increasing with every n >= 2".into()));
        }
        let limit = ScalingLimit::new(DVector::from_vec(config.limit.diagonal.clone()))?;
        let ladder = ScalingLadder::new(limit.clone(), &config.ladder)?;
        let set = build_set(&config.set, d)?;
        let distribution = build_distribution(&config.model, d)?;

        match &distribution {
            Distribution::Gaussian(g) => {
                if set.contains(g.mean())?.is_inside() {
                    return Err(CliError::Validation("atypical set: the set contains the mean of the model".into()));
                }
            }
            Distribution::Mixture(m) => {
                for (j, comp) in m.components().iter().enumerate() {
                    if set.contains(comp.mean())?.is_inside() {
                        return Err(CliError::Validation(format!(
                            "mixture mean inside set: component {} has its mean in the set",
                            j + 1
                        )));
                    }
                }
            }
        }

        if let Some(methods) = &config.methods {
            if methods.is_empty() {
                return Err(CliError::Validation("methods must not be empty".into()));
            }
            let exact_ok = exact_block_for(&distribution, &set, &ladder.rungs[0]).is_some();
            if methods.iter().any(|m| m.is_exact()) && !exact_ok {
                return Err(CliError::Validation(
                    "exact block methods need a centered Gaussian with diagonal covariance and a block with a positive corner"
                        .into(),
                ));
            }
        }
        Ok(Self { config, distribution, set, limit, ladder })
    }

    /// True when the exact diagonal-block oracle applies.
    pub fn exact_applies(&self) -> bool {
        exact_block_for(&self.distribution, &self.set, &self.ladder.rungs[0]).is_some()
    }
}

fn vector(values: &[f64], d: usize, field: &str) -> Result<DVector<f64>> {
    if values.len() != d {
        return Err(CliError::Validation(format!("{field} has length {}, expected {d}", values.len())));
    }
    Ok(DVector::from_column_slice(values))
}

fn matrix(rows: &[Vec<f64>], ncols: usize, field: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() || rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::Validation(format!("{field} must be a non-empty matrix with {ncols} columns")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn covariance(rows: &[Vec<f64>], d: usize, field: &str) -> Result<CovarianceModel> {
    let m = matrix(rows, d, field)?;
    if m.nrows() != d {
        return Err(CliError::Validation(format!("{field} must be {d}x{d}")));
    }
    CovarianceModel::new(m).map_err(|e| CliError::Validation(format!("{field}: {e}")))
}

fn build_set(spec: &SetSpec, d: usize) -> Result<ConvexSet> {
    Ok(match spec {
        SetSpec::Block { corner } => ConvexSet::block(vector(corner, d, "set.corner")?)?,
        SetSpec::Halfspace { normal, offset } => ConvexSet::halfspace(vector(normal, d, "set.normal")?, *offset)?,
        SetSpec::Polyhedron { matrix: rows, offsets } => {
            let b = matrix(rows, d, "set.matrix")?;
            ConvexSet::polyhedron(b.clone(), vector(offsets, b.nrows(), "set.offsets")?)?
        }
        SetSpec::Ellipsoid { center, shape, radius } => {
            let q = matrix(shape, d, "set.shape")?;
            ConvexSet::ellipsoid(vector(center, d, "set.center")?, q, *radius)?
        }
    })
}

fn build_distribution(spec: &ModelSpec, d: usize) -> Result<Distribution> {
    Ok(match spec {
        ModelSpec::Gaussian { mean, covariance: rows } => {
            let cov = covariance(rows, d, "model.covariance")?;
            let mean = match mean {
                Some(m) => vector(m, d, "model.mean")?,
                None => DVector::zeros(d),
            };
            GaussianModel::new(mean, cov)?.into()
        }
        ModelSpec::Mixture { components } => {
            let mut weights = Vec::with_capacity(components.len());
            let mut models = Vec::with_capacity(components.len());
            for (j, c) in components.iter().enumerate() {
                let cov = covariance(&c.covariance, d, &format!("model.components[{j}].covariance"))?;
                models.push(GaussianModel::new(vector(&c.mean, d, &format!("model.components[{j}].mean"))?, cov)?);
                weights.push(c.weight);
            }
            GaussianMixture::new(weights, models)?.into()
        }
    })
}
