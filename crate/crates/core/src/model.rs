//! Gaussian and Gaussian-mixture models.
//!
//! The whitening factor `L` satisfies `LᵀL = Σ⁻¹`, so `‖L x‖² = ⟨x, Σ⁻¹ x⟩`
//! and `L X` is standard normal when `X ~ N(0, Σ)`. It is the inverse of the
//! lower Cholesky factor `C` of `Σ = C Cᵀ`; sampling uses `C` directly.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::rng::RandomStream;
use crate::tail::HALF_LN_TWO_PI;

pub use crate::tail::mills_bounds;

/// Pivots at or below this value are treated as singular.
pub const PIVOT_TOLERANCE: f64 = 1e-12;
const SYMMETRY_TOLERANCE: f64 = 1e-12;
const WEIGHT_TOLERANCE: f64 = 1e-12;

const SELECT_STREAM: u64 = 0x5e1ec7;
const DRAW_STREAM: u64 = 0xd2a3;

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    sigma: DMatrix<f64>,
    sigma_inv: DMatrix<f64>,
    whitener: DMatrix<f64>,
    cholesky: DMatrix<f64>,
    log_det: f64,
}

impl CovarianceModel {
    pub fn new(sigma: DMatrix<f64>) -> Result<Self> {
        build_covariance(sigma)
    }

    pub fn identity(dimension: usize) -> Self {
        build_covariance(DMatrix::identity(dimension, dimension)).expect("identity is positive definite")
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        build_covariance(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dimension(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn sigma_inv(&self) -> &DMatrix<f64> {
        &self.sigma_inv
    }

    /// `L` with `LᵀL = Σ⁻¹`.
    pub fn whitener(&self) -> &DMatrix<f64> {
        &self.whitener
    }

    /// Lower Cholesky factor `C` of `Σ`, equal to `L⁻¹`.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.cholesky
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// ⟨x, Σ⁻¹ x⟩
    pub fn inv_quadratic(&self, x: &DVector<f64>) -> f64 {
        (&self.whitener * x).norm_squared()
    }

    pub fn is_diagonal(&self) -> bool {
        let d = self.dimension();
        (0..d).all(|i| (0..d).all(|j| i == j || self.sigma[(i, j)] == 0.0))
    }

    /// Returns a copy scaled by a positive factor.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::InvalidArgument(format!("covariance scale must be positive, got {factor}")));
        }
        build_covariance(&self.sigma * factor)
    }
}

pub fn build_covariance(sigma: DMatrix<f64>) -> Result<CovarianceModel> {
    if !sigma.is_square() || sigma.nrows() == 0 {
        return Err(Error::InvalidArgument(format!(
            "covariance must be a non-empty square matrix, got {}x{}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    if sigma.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("covariance has non-finite entries".into()));
    }
    let d = sigma.nrows();
    let scale = sigma.amax();
    let asymmetry = (0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .map(|(i, j)| (sigma[(i, j)] - sigma[(j, i)]).abs())
        .fold(0.0, f64::max);
    if asymmetry > SYMMETRY_TOLERANCE * scale {
        return Err(Error::NotSymmetric { asymmetry });
    }

    let mut chol = DMatrix::<f64>::zeros(d, d);
    for j in 0..d {
        let mut pivot = sigma[(j, j)];
        for k in 0..j {
            pivot -= chol[(j, k)] * chol[(j, k)];
        }
        if pivot <= PIVOT_TOLERANCE {
            return Err(Error::NotPositiveDefinite { index: j, pivot });
        }
        let diag = pivot.sqrt();
        chol[(j, j)] = diag;
        for i in (j + 1)..d {
            let mut v = sigma[(i, j)];
            for k in 0..j {
                v -= chol[(i, k)] * chol[(j, k)];
            }
            chol[(i, j)] = v / diag;
        }
    }

    let whitener = chol
        .solve_lower_triangular(&DMatrix::identity(d, d))
        .ok_or(Error::NotPositiveDefinite { index: 0, pivot: 0.0 })?;
    let mut sigma_inv = whitener.transpose() * &whitener;
    // symmetrize: LᵀL is symmetric in exact arithmetic
    let sym = (&sigma_inv + sigma_inv.transpose()) * 0.5;
    sigma_inv = sym;
    let log_det = 2.0 * chol.diagonal().iter().map(|v| v.ln()).sum::<f64>();

    Ok(CovarianceModel { sigma, sigma_inv, whitener, cholesky: chol, log_det })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    mean: DVector<f64>,
    covariance: CovarianceModel,
}

impl GaussianModel {
    pub fn new(mean: DVector<f64>, covariance: CovarianceModel) -> Result<Self> {
        check_dim(covariance.dimension(), mean.len())?;
        Ok(Self { mean, covariance })
    }

    pub fn centered(covariance: CovarianceModel) -> Self {
        let d = covariance.dimension();
        Self { mean: DVector::zeros(d), covariance }
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &CovarianceModel {
        &self.covariance
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    /// Writes `mean + offset + C z` into `out`.
    pub(crate) fn draw_into(&self, rng: &mut ChaCha8Rng, offset: Option<&DVector<f64>>, z: &mut DVector<f64>, out: &mut DVector<f64>) {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        out.copy_from(&self.mean);
        if let Some(offset) = offset {
            *out += offset;
        }
        out.gemv(1.0, &self.covariance.cholesky, z, 1.0);
    }
}

pub fn sample_gaussian(model: &GaussianModel, count: usize, stream: RandomStream) -> Result<Vec<DVector<f64>>> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let d = model.dimension();
    let mut rng = stream.rng();
    let mut z = DVector::zeros(d);
    let mut out = DVector::zeros(d);
    Ok((0..count)
        .map(|_| {
            model.draw_into(&mut rng, None, &mut z, &mut out);
            out.clone()
        })
        .collect())
}

pub fn gaussian_log_density(model: &GaussianModel, x: &DVector<f64>) -> Result<f64> {
    check_dim(model.dimension(), x.len())?;
    let centered = x - &model.mean;
    let d = model.dimension() as f64;
    Ok(-d * HALF_LN_TWO_PI - 0.5 * model.covariance.log_det - 0.5 * model.covariance.inv_quadratic(&centered))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    components: Vec<GaussianModel>,
    cumulative: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, components: Vec<GaussianModel>) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(Error::InvalidArgument(format!(
                "mixture needs one weight per component ({} weights, {} components)",
                weights.len(),
                components.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("mixture weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::InvalidArgument(format!("mixture weights sum to {total}, not 1")));
        }
        let d = components[0].dimension();
        for c in &components {
            check_dim(d, c.dimension())?;
        }
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        // pin the last positive-weight component to 1 so u in [0,1) always selects
        if let Some(last) = weights.iter().rposition(|w| *w > 0.0) {
            for c in cumulative.iter_mut().skip(last) {
                *c = 1.0;
            }
        }
        Ok(Self { weights, components, cumulative })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[GaussianModel] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.components[0].dimension()
    }

    /// Inverse-CDF component choice for a uniform `u ∈ [0, 1)`.
    pub fn select(&self, u: f64) -> usize {
        self.cumulative
            .iter()
            .zip(&self.weights)
            .position(|(c, w)| *w > 0.0 && u < *c)
            .unwrap_or(self.len() - 1)
    }
}

/// Either a single Gaussian or a mixture; the simulators accept both.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Gaussian(GaussianModel),
    Mixture(GaussianMixture),
}

impl Distribution {
    pub fn dimension(&self) -> usize {
        match self {
            Distribution::Gaussian(g) => g.dimension(),
            Distribution::Mixture(m) => m.dimension(),
        }
    }

    pub(crate) fn sampler(&self, stream: RandomStream) -> Sampler<'_> {
        let d = self.dimension();
        Sampler {
            dist: self,
            select: stream.child(SELECT_STREAM).rng(),
            draw: stream.child(DRAW_STREAM).rng(),
            z: DVector::zeros(d),
        }
    }
}

impl From<GaussianModel> for Distribution {
    fn from(g: GaussianModel) -> Self {
        Distribution::Gaussian(g)
    }
}

impl From<GaussianMixture> for Distribution {
    fn from(m: GaussianMixture) -> Self {
        Distribution::Mixture(m)
    }
}

/// Sequential draws from a [`Distribution`]. Component selection and the
/// Gaussian draws run on separate substreams.
pub(crate) struct Sampler<'a> {
    dist: &'a Distribution,
    select: ChaCha8Rng,
    draw: ChaCha8Rng,
    z: DVector<f64>,
}

impl Sampler<'_> {
    /// Draws one vector; returns the chosen component index (0 for a plain Gaussian).
    pub(crate) fn next_into(&mut self, out: &mut DVector<f64>) -> usize {
        match self.dist {
            Distribution::Gaussian(g) => {
                g.draw_into(&mut self.draw, None, &mut self.z, out);
                0
            }
            Distribution::Mixture(m) => {
                let u: f64 = self.select.random();
                let j = m.select(u);
                m.components[j].draw_into(&mut self.draw, None, &mut self.z, out);
                j
            }
        }
    }
}

pub fn sample_mixture(mixture: &GaussianMixture, count: usize, stream: RandomStream) -> Result<Vec<DVector<f64>>> {
    Ok(sample_mixture_labeled(mixture, count, stream)?.into_iter().map(|(_, x)| x).collect())
}

/// Like [`sample_mixture`] but also returns the component index of each draw.
pub fn sample_mixture_labeled(mixture: &GaussianMixture, count: usize, stream: RandomStream) -> Result<Vec<(usize, DVector<f64>)>> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let dist = Distribution::Mixture(mixture.clone());
    let mut sampler = dist.sampler(stream);
    let mut out = DVector::zeros(mixture.dimension());
    Ok((0..count)
        .map(|_| {
            let j = sampler.next_into(&mut out);
            (j, out.clone())
        })
        .collect())
}
