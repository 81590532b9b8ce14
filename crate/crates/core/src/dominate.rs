//! Dominating points and rate functions.
//!
//! The dominating point minimizes `Q_A(x) = ⟨A(x − μ), Σ⁻¹ A(x − μ)⟩` over a
//! closed convex set, where `A` is the diagonal scaling limit (`μ = 0` unless
//! a recentered problem is solved). With margin `α = ½ Q_A(x*)`:
//!
//! ```text
//! single vector:        lim (1/a²)      log P(X ∈ a C)         = −½⟨x*, Σ⁻¹x*⟩
//! componentwise max:    lim (1/‖A_n‖²)  log P(A_n⁻¹ M_n ∈ C)   = ½ − α
//! ```
//!
//! The minimizer is found by projected gradient descent with fixed step
//! `1/λ_max(AΣ⁻¹A)` started from the projection of the center.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::model::{CovarianceModel, GaussianMixture};
use crate::rng::RandomStream;
use crate::sets::{is_atypical, ConvexSet};

pub const SOLVER_MAX_ITERATIONS: usize = 50_000;
pub const SOLVER_STEP_TOLERANCE: f64 = 1e-10;
pub const SOLVER_DIVERGENCE_STEP: f64 = 1e-6;
pub const MEMBERSHIP_SLACK: f64 = 1e-8;
pub const DIRECTION_TOLERANCE: f64 = 1e-8;
/// Margins in `(1, 1 + MARGIN_WARNING_BAND]` pass but are flagged.
pub const MARGIN_WARNING_BAND: f64 = 1e-9;
const RANK_TOLERANCE: f64 = 1e-10;
const PAIR_DET_TOLERANCE: f64 = 1e-12;
const AGREEMENT_TOLERANCE: f64 = 1e-6;
const DIRECTION_SEED: u64 = 0x00d1_5ec7;

/// Diagonal limit matrix `A` with positive entries and unit spectral norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingLimit {
    diagonal: DVector<f64>,
}

impl ScalingLimit {
    pub fn new(diagonal: DVector<f64>) -> Result<Self> {
        if diagonal.is_empty() || diagonal.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument("scaling limit entries must be positive".into()));
        }
        let max = diagonal.max();
        if (max - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("scaling limit must have max entry 1, got {max}")));
        }
        Ok(Self { diagonal })
    }

    pub fn identity(d: usize) -> Self {
        Self { diagonal: DVector::from_element(d, 1.0) }
    }

    /// Divides by the largest entry; returns the limit and that factor.
    pub fn normalized(diagonal: DVector<f64>) -> Result<(Self, f64)> {
        if diagonal.is_empty() || diagonal.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument("scaling limit entries must be positive".into()));
        }
        let factor = diagonal.max();
        let mut scaled = diagonal / factor;
        let imax = scaled.imax();
        scaled[imax] = 1.0;
        Ok((Self { diagonal: scaled }, factor))
    }

    pub fn diagonal(&self) -> &DVector<f64> {
        &self.diagonal
    }

    pub fn dimension(&self) -> usize {
        self.diagonal.len()
    }

    /// `A Σ⁻¹ A`
    pub fn metric(&self, cov: &CovarianceModel) -> DMatrix<f64> {
        let a = DMatrix::from_diagonal(&self.diagonal);
        &a * cov.sigma_inv() * &a
    }

    /// `Q_A(x) = ⟨Ax, Σ⁻¹Ax⟩`
    pub fn quadratic(&self, cov: &CovarianceModel, x: &DVector<f64>) -> f64 {
        cov.inv_quadratic(&x.component_mul(&self.diagonal))
    }
}

/// One rung `(n, A_n = √(2 log n)·A)` of a scaling ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderRung {
    pub n: u64,
    pub scale: f64,
    pub matrix: DVector<f64>,
}

impl LadderRung {
    pub fn new(n: u64, limit: &ScalingLimit) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("ladder sample sizes must be >= 2, got {n}")));
        }
        let scale = (2.0 * (n as f64).ln()).sqrt();
        Ok(Self { n, scale, matrix: limit.diagonal() * scale })
    }

    /// A rung with an explicit scale and sample size, for single-vector
    /// studies that sweep the scale directly.
    pub fn with_scale(n: u64, scale: f64, limit: &ScalingLimit) -> Result<Self> {
        if n < 1 || !(scale > 0.0) {
            return Err(Error::InvalidArgument("rung needs n >= 1 and a positive scale".into()));
        }
        Ok(Self { n, scale, matrix: limit.diagonal() * scale })
    }

    /// `‖A_n‖²`, the speed of the rate function.
    pub fn speed(&self) -> f64 {
        self.matrix.max().powi(2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingLadder {
    pub limit: ScalingLimit,
    pub rungs: Vec<LadderRung>,
}

impl ScalingLadder {
    pub fn new(limit: ScalingLimit, sample_sizes: &[u64]) -> Result<Self> {
        if sample_sizes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("ladder sample sizes must be strictly increasing".into()));
        }
        let rungs = sample_sizes.iter().map(|&n| LadderRung::new(n, &limit)).collect::<Result<_>>()?;
        Ok(Self { limit, rungs })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominatingPoint {
    pub x_star: DVector<f64>,
    /// Recentering point μ; zero for the centered problem.
    pub center: DVector<f64>,
    /// `Q_A(x* − μ)`
    pub quad_value: f64,
    /// `½ Q_A(x* − μ)`
    pub margin_alpha: f64,
    pub rate_single: f64,
    pub rate_componentwise: f64,
    pub optimality_certificate: bool,
    pub solver_iterations: usize,
    pub final_step: f64,
}

pub fn dominating_point(set: &ConvexSet, cov: &CovarianceModel, limit: &ScalingLimit) -> Result<DominatingPoint> {
    let origin = DVector::zeros(set.dimension());
    dominating_point_about(set, cov, limit, &origin)
}

/// Minimizes `Q_A(x − center)` over the set. Fails with `NotAtypical` when the
/// center lies in the set.
pub fn dominating_point_about(
    set: &ConvexSet,
    cov: &CovarianceModel,
    limit: &ScalingLimit,
    center: &DVector<f64>,
) -> Result<DominatingPoint> {
    let d = set.dimension();
    check_dim(d, cov.dimension())?;
    check_dim(d, limit.dimension())?;
    check_dim(d, center.len())?;
    if set.contains(center)?.is_inside() {
        return Err(Error::NotAtypical);
    }

    let metric = limit.metric(cov);
    let lambda_max = SymmetricEigen::new(metric.clone()).eigenvalues.max();
    let eta = 1.0 / lambda_max;

    let mut x = set.project(center)?;
    let mut step = f64::INFINITY;
    let mut iterations = 0;
    while iterations < SOLVER_MAX_ITERATIONS {
        iterations += 1;
        let grad = &metric * (&x - center);
        let next = set.project(&(&x - grad * eta))?;
        step = (&next - &x).norm();
        x = next;
        if step <= SOLVER_STEP_TOLERANCE {
            break;
        }
    }
    if step > SOLVER_DIVERGENCE_STEP {
        return Err(Error::SolverDivergence { step_norm: step, iterations });
    }

    let offset = &x - center;
    let quad_value = limit.quadratic(cov, &offset);
    let fixed_point = {
        let grad = &metric * &offset;
        (set.project(&(&x - grad * eta))? - &x).norm()
    };
    let certificate = fixed_point <= MEMBERSHIP_SLACK && set.min_slack(&x)? >= -MEMBERSHIP_SLACK;
    Ok(DominatingPoint {
        rate_single: rate_single(&offset, cov),
        rate_componentwise: 0.5 - 0.5 * quad_value,
        margin_alpha: 0.5 * quad_value,
        quad_value,
        x_star: x,
        center: center.clone(),
        optimality_certificate: certificate,
        solver_iterations: iterations,
        final_step: step,
    })
}

/// `−½⟨x, Σ⁻¹x⟩`
pub fn rate_single(x: &DVector<f64>, cov: &CovarianceModel) -> f64 {
    -0.5 * cov.inv_quadratic(x)
}

/// `J = ½ − ½ Q_A(x*)`
pub fn rate_componentwise(dp: &DominatingPoint) -> f64 {
    0.5 - dp.margin_alpha
}

/// Least-squares solution `(BᵀB)⁻¹Bᵀc` of `Bx = c` for full column rank `B`.
pub fn corner_full_rank(b: &DMatrix<f64>, c: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(b.nrows(), c.len())?;
    if b.nrows() < b.ncols() {
        return Err(Error::RankDeficient { ratio: 0.0 });
    }
    let svd = b.clone().svd(true, true);
    let (max, min) = (svd.singular_values.max(), svd.singular_values.min());
    if !(max > 0.0) || min <= RANK_TOLERANCE * max {
        return Err(Error::RankDeficient { ratio: if max > 0.0 { min / max } else { 0.0 } });
    }
    svd.solve(c, 0.0).map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// Componentwise minimum of the intersections of consecutive row pairs of a
/// planar constraint system.
pub fn corner_pairwise(b: &DMatrix<f64>, c: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(b.nrows(), c.len())?;
    if b.ncols() != 2 {
        return Err(Error::InvalidArgument(format!("pairwise corner needs d = 2, got d = {}", b.ncols())));
    }
    if b.nrows() < 2 {
        return Err(Error::InvalidArgument("pairwise corner needs at least two rows".into()));
    }
    let mut corner = DVector::from_element(2, f64::INFINITY);
    for i in 0..b.nrows() - 1 {
        let (a11, a12, a21, a22) = (b[(i, 0)], b[(i, 1)], b[(i + 1, 0)], b[(i + 1, 1)]);
        let det = a11 * a22 - a12 * a21;
        if det.abs() < PAIR_DET_TOLERANCE {
            return Err(Error::SingularPair { index: i, det });
        }
        let (c1, c2) = (c[i], c[i + 1]);
        let x = (c1 * a22 - a12 * c2) / det;
        let y = (a11 * c2 - c1 * a21) / det;
        corner[0] = corner[0].min(x);
        corner[1] = corner[1].min(y);
    }
    Ok(corner)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentPoint {
    /// 1-based component label.
    pub component: usize,
    pub weight: f64,
    pub x_star: DVector<f64>,
    pub quad_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureRate {
    pub rate: f64,
    /// 1-based label of the component attaining the minimum.
    pub argmin_component: usize,
    pub min_quad_value: f64,
    pub per_component: Vec<ComponentPoint>,
}

/// Largest-term rate for a Gaussian mixture; zero-weight components do not
/// compete for the minimum.
pub fn rate_mixture(set: &ConvexSet, mixture: &GaussianMixture, limit: &ScalingLimit) -> Result<MixtureRate> {
    for (j, comp) in mixture.components().iter().enumerate() {
        if set.contains(comp.mean())?.is_inside() {
            return Err(Error::MeanInsideSet { component: j + 1 });
        }
    }
    let per_component = mixture
        .components()
        .iter()
        .zip(mixture.weights())
        .enumerate()
        .map(|(j, (comp, &weight))| {
            let dp = dominating_point_about(set, comp.covariance(), limit, comp.mean())?;
            Ok(ComponentPoint { component: j + 1, weight, x_star: dp.x_star, quad_value: dp.quad_value })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = per_component
        .iter()
        .filter(|p| p.weight > 0.0)
        .min_by(|a, b| a.quad_value.total_cmp(&b.quad_value))
        .ok_or_else(|| Error::InvalidArgument("mixture has no positive-weight component".into()))?;
    Ok(MixtureRate {
        rate: 0.5 - 0.5 * best.quad_value,
        argmin_component: best.component,
        min_quad_value: best.quad_value,
        per_component: per_component.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginCheck {
    pub alpha: f64,
    pub pass: bool,
    pub near_boundary: bool,
}

/// Margin condition `α > 1`, strict.
pub fn check_margin(dp: &DominatingPoint) -> MarginCheck {
    let alpha = dp.margin_alpha;
    MarginCheck { alpha, pass: alpha > 1.0, near_boundary: alpha > 1.0 && alpha <= 1.0 + MARGIN_WARNING_BAND }
}

/// Samples feasible directions `d = y − x*` with `y` in the set and checks
/// `⟨AΣ⁻¹A(x* − μ), d⟩ ≥ −1e−8‖d‖` for all of them.
pub fn verify_optimality(
    dp: &DominatingPoint,
    set: &ConvexSet,
    cov: &CovarianceModel,
    limit: &ScalingLimit,
    direction_samples: usize,
) -> Result<bool> {
    let grad = limit.metric(cov) * (&dp.x_star - &dp.center);
    let points = sample_set_points(set, &dp.x_star, direction_samples, RandomStream::from_seed(DIRECTION_SEED))?;
    let grad_norm = grad.norm();
    Ok(points.iter().all(|y| {
        let d = y - &dp.x_star;
        let norm = d.norm();
        // projections land on the boundary only up to rounding in |y|
        let rounding = 64.0 * f64::EPSILON * grad_norm * (y.norm() + dp.x_star.norm());
        norm == 0.0 || grad.dot(&d) >= -DIRECTION_TOLERANCE * norm - rounding
    }))
}

/// In-set points around `anchor` and around an interior point, at radii
/// spread log-uniformly over seven decades.
fn sample_set_points(set: &ConvexSet, anchor: &DVector<f64>, count: usize, stream: RandomStream) -> Result<Vec<DVector<f64>>> {
    let d = set.dimension();
    let interior = set.interior_point()?;
    let spread = anchor.norm().max(interior.norm()) + 1.0;
    let mut rng = stream.rng();
    let mut points = Vec::with_capacity(count + 1);
    points.push(interior.clone());
    for k in 0..count {
        let u = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let u = &u / u.norm().max(1e-300);
        let radius = spread * 10f64.powf(rng.random_range(-6.0..1.0));
        let base = if k % 4 == 3 { &interior } else { anchor };
        points.push(set.project(&(base + u * radius))?);
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosestPointCheck {
    pub hypothesis_holds: bool,
    pub points_agree: bool,
}

/// Sampled check of "Σ⁻¹z > 0 on the set" alongside whether the `A = I`
/// dominating point coincides with the Euclidean projection of the origin.
pub fn closest_point_equivalence(set: &ConvexSet, cov: &CovarianceModel, probe_points: usize) -> Result<ClosestPointCheck> {
    let dp = dominating_point(set, cov, &ScalingLimit::identity(set.dimension()))?;
    let probes = sample_set_points(set, &dp.x_star, probe_points, RandomStream::from_seed(DIRECTION_SEED ^ 0x9))?;
    let hypothesis_holds = probes
        .iter()
        .chain(std::iter::once(&dp.x_star))
        .all(|z| (cov.sigma_inv() * z).iter().all(|v| *v > 0.0));
    let euclid = set.project(&DVector::zeros(set.dimension()))?;
    let points_agree = (&dp.x_star - euclid).norm() <= AGREEMENT_TOLERANCE;
    Ok(ClosestPointCheck { hypothesis_holds, points_agree })
}

/// Convenience: the set must be atypical before any rate makes sense.
pub fn require_atypical(set: &ConvexSet) -> Result<()> {
    if is_atypical(set) {
        Ok(())
    } else {
        Err(Error::NotAtypical)
    }
}
