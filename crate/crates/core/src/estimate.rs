//! Rare-event estimators for block maxima and single vectors.
//!
//! Three routes are layered so every rate can be checked at desk scale:
//!
//! * crude simulation of the componentwise-maximum and at-least-one events,
//! * mean-shift importance sampling of the single-vector probability `q`,
//!   lifted to `n` samples with `1 − (1 − q)ⁿ`,
//! * exact products of univariate tails for diagonal covariances on blocks.
//!
//! Work is split into fixed-size chunks, each keyed by its own substream and
//! reduced in chunk order, so results do not depend on the rayon pool size.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dominate::LadderRung;
use crate::error::{check_dim, Error, Result};
use crate::model::{Distribution, GaussianModel};
use crate::rng::RandomStream;
use crate::sets::{ConvexSet, Shape};
use crate::tail::log_normal_tail;

const TRIAL_CHUNK: u64 = 512;
const SAMPLE_CHUNK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    CrudeComponentwise,
    CrudeAtLeastOne,
    ImportanceSampledSingle,
    UnionCombined,
    ExactBlockComponentwise,
    ExactBlockAtLeastOne,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::CrudeComponentwise,
        Method::CrudeAtLeastOne,
        Method::ImportanceSampledSingle,
        Method::UnionCombined,
        Method::ExactBlockComponentwise,
        Method::ExactBlockAtLeastOne,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::CrudeComponentwise => "crude_componentwise",
            Method::CrudeAtLeastOne => "crude_at_least_one",
            Method::ImportanceSampledSingle => "importance_sampled_single",
            Method::UnionCombined => "union_combined",
            Method::ExactBlockComponentwise => "exact_block_componentwise",
            Method::ExactBlockAtLeastOne => "exact_block_at_least_one",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.label() == label)
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Method::ExactBlockComponentwise | Method::ExactBlockAtLeastOne)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub method: Method,
    pub p_hat: f64,
    pub std_error: f64,
    /// `ln p_hat`; for the exact methods this is computed in log space and
    /// stays finite when `p_hat` underflows.
    pub log_p_hat: f64,
    pub trials: u64,
    pub seed: u64,
    pub n: u64,
    /// `‖A_n‖²`
    pub scaling_norm_sq: f64,
    pub degenerate_weights: bool,
}

impl EstimateReport {
    pub fn relative_std_error(&self) -> f64 {
        self.std_error / self.p_hat
    }
}

/// Hit counts from one batch of block-maximum trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct EventCounts {
    pub trials: u64,
    pub componentwise: u64,
    pub at_least_one: u64,
    /// Componentwise hit with no individual sample in the set.
    pub conspiracy: u64,
}

impl std::ops::Add for EventCounts {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            trials: self.trials + o.trials,
            componentwise: self.componentwise + o.componentwise,
            at_least_one: self.at_least_one + o.at_least_one,
            conspiracy: self.conspiracy + o.conspiracy,
        }
    }
}

/// Runs `trials` independent trials of `n` draws each against `scale(set, A_n)`.
pub fn simulate_events(
    dist: &Distribution,
    set: &ConvexSet,
    rung: &LadderRung,
    trials: u64,
    stream: RandomStream,
) -> Result<EventCounts> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    check_dim(set.dimension(), dist.dimension())?;
    let scaled = set.scale(&rung.matrix)?;
    let chunks = trials.div_ceil(TRIAL_CHUNK);
    let counts: Vec<EventCounts> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * TRIAL_CHUNK;
            let end = (start + TRIAL_CHUNK).min(trials);
            let d = dist.dimension();
            let mut x = DVector::zeros(d);
            let mut max = DVector::zeros(d);
            let mut acc = EventCounts::default();
            for t in start..end {
                let mut sampler = dist.sampler(stream.child(t));
                max.fill(f64::NEG_INFINITY);
                let mut any = false;
                for _ in 0..rung.n {
                    sampler.next_into(&mut x);
                    if !any && scaled.contains_unchecked(&x) {
                        any = true;
                    }
                    max.zip_apply(&x, |m, v| *m = m.max(v));
                }
                let comp = scaled.contains_unchecked(&max);
                acc.trials += 1;
                acc.componentwise += comp as u64;
                acc.at_least_one += any as u64;
                acc.conspiracy += (comp && !any) as u64;
            }
            acc
        })
        .collect();
    Ok(counts.into_iter().fold(EventCounts::default(), |a, b| a + b))
}

fn binomial_report(method: Method, hits: u64, trials: u64, seed: u64, rung: &LadderRung) -> EstimateReport {
    let p = hits as f64 / trials as f64;
    EstimateReport {
        method,
        p_hat: p,
        std_error: (p * (1.0 - p) / trials as f64).sqrt(),
        log_p_hat: p.ln(),
        trials,
        seed,
        n: rung.n,
        scaling_norm_sq: rung.speed(),
        degenerate_weights: false,
    }
}

/// Crude estimate of `P(M_n ∈ A_n C)`.
pub fn mc_componentwise(
    dist: &Distribution,
    set: &ConvexSet,
    rung: &LadderRung,
    trials: u64,
    stream: RandomStream,
) -> Result<EstimateReport> {
    let c = simulate_events(dist, set, rung, trials, stream)?;
    Ok(binomial_report(Method::CrudeComponentwise, c.componentwise, c.trials, stream.seed, rung))
}

/// Crude estimate of `P(∃ i : X_i ∈ A_n C)`.
pub fn mc_at_least_one(
    dist: &Distribution,
    set: &ConvexSet,
    rung: &LadderRung,
    trials: u64,
    stream: RandomStream,
) -> Result<EstimateReport> {
    let c = simulate_events(dist, set, rung, trials, stream)?;
    Ok(binomial_report(Method::CrudeAtLeastOne, c.at_least_one, c.trials, stream.seed, rung))
}

/// Both crude block-maximum estimates from one shared batch of trials.
pub fn mc_both(
    dist: &Distribution,
    set: &ConvexSet,
    rung: &LadderRung,
    trials: u64,
    stream: RandomStream,
) -> Result<(EstimateReport, EstimateReport, EventCounts)> {
    let c = simulate_events(dist, set, rung, trials, stream)?;
    Ok((
        binomial_report(Method::CrudeComponentwise, c.componentwise, c.trials, stream.seed, rung),
        binomial_report(Method::CrudeAtLeastOne, c.at_least_one, c.trials, stream.seed, rung),
        c,
    ))
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.carry
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct WeightSums {
    w: Compensated,
    w2: Compensated,
    hits: u64,
}

/// Mean-shift importance sampling of `q = P(X ∈ target)` for `X ~ N(μ, Σ)`.
///
/// Draws come from `N(μ + shift, Σ)` and are weighted by
/// `exp(−⟨shift, Σ⁻¹(x − μ − shift/2)⟩)`. A zero shift reduces to crude
/// Monte Carlo with unit weights. Zero hits give `p_hat = 0` with
/// `degenerate_weights` set.
pub fn is_single(
    model: &GaussianModel,
    target: &ConvexSet,
    shift: &DVector<f64>,
    samples: u64,
    stream: RandomStream,
) -> Result<EstimateReport> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    let d = model.dimension();
    check_dim(d, target.dimension())?;
    check_dim(d, shift.len())?;
    let tilt = model.covariance().sigma_inv() * shift;
    let half_norm = 0.5 * shift.dot(&tilt);
    let zero_shift = shift.iter().all(|v| *v == 0.0);
    let chunks = samples.div_ceil(SAMPLE_CHUNK);
    let parts: Vec<WeightSums> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = SAMPLE_CHUNK.min(samples - c * SAMPLE_CHUNK);
            let mut rng = stream.child(c).rng();
            let mut z = DVector::zeros(d);
            let mut x = DVector::zeros(d);
            let mut acc = WeightSums::default();
            for _ in 0..count {
                model.draw_into(&mut rng, Some(shift), &mut z, &mut x);
                if target.contains_unchecked(&x) {
                    let w = if zero_shift { 1.0 } else { (half_norm - tilt.dot(&(&x - model.mean()))).exp() };
                    acc.w.add(w);
                    acc.w2.add(w * w);
                    acc.hits += 1;
                }
            }
            acc
        })
        .collect();
    let mut w = Compensated::default();
    let mut w2 = Compensated::default();
    let mut hits = 0;
    for p in parts {
        w.add(p.w.value());
        w2.add(p.w2.value());
        hits += p.hits;
    }
    let n = samples as f64;
    let mean = w.value() / n;
    let second = w2.value() / n;
    let var = (second - mean * mean).max(0.0);
    Ok(EstimateReport {
        method: Method::ImportanceSampledSingle,
        p_hat: mean,
        std_error: (var / n).sqrt(),
        log_p_hat: mean.ln(),
        trials: samples,
        seed: stream.seed,
        n: 1,
        scaling_norm_sq: f64::NAN,
        degenerate_weights: hits == 0,
    })
}

/// `1 − (1 − q)ⁿ` without cancellation at small `q`.
pub fn union_combine(q: f64, n: u64) -> f64 {
    assert!((0.0..=1.0).contains(&q), "union_combine needs q in [0, 1], got {q}");
    -(n as f64 * (-q).ln_1p()).exp_m1()
}

/// `ln(1 − (1 − q)ⁿ)` from `ln q`, valid when `q` itself underflows.
pub fn log_union_combine(log_q: f64, n: u64) -> f64 {
    if log_q == f64::NEG_INFINITY || n == 0 {
        return f64::NEG_INFINITY;
    }
    let q = log_q.exp();
    // −ln(1−q)/q ≥ 1, tends to 1 as q → 0
    let ratio = if q == 0.0 { 1.0 } else { -(-q).ln_1p() / q };
    let log_u = (n as f64).ln() + log_q + ratio.ln();
    let u = log_u.exp();
    if u < f64::MIN_POSITIVE {
        log_u
    } else {
        (-(-u).exp_m1()).ln()
    }
}

/// Lifts a single-vector estimate to `n` samples; the standard error uses the
/// delta method `n(1 − q)ⁿ⁻¹·se(q)`.
pub fn union_combined(single: &EstimateReport, rung: &LadderRung) -> EstimateReport {
    let q = single.p_hat.clamp(0.0, 1.0);
    let n = rung.n;
    let p = union_combine(q, n);
    let slope = n as f64 * ((n as f64 - 1.0) * (-q).ln_1p()).exp();
    EstimateReport {
        method: Method::UnionCombined,
        p_hat: p,
        std_error: slope * single.std_error,
        log_p_hat: log_union_combine(single.log_p_hat, n),
        trials: single.trials,
        seed: single.seed,
        n,
        scaling_norm_sq: rung.speed(),
        degenerate_weights: single.degenerate_weights,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactBlock {
    pub p_componentwise: f64,
    pub p_at_least_one: f64,
    pub log_p_componentwise: f64,
    pub log_p_at_least_one: f64,
}

/// Exact block-maximum probabilities for independent coordinates:
/// with `qᵢ = P(Z > a·cornerᵢ/√σᵢᵢ)`,
/// `P(M_n ≥ a·corner) = ∏ᵢ (1 − (1 − qᵢ)ⁿ)` and
/// `P(∃ i : X_i ≥ a·corner) = 1 − (1 − ∏ᵢ qᵢ)ⁿ`.
pub fn exact_block_diagonal(sigma_diag: &[f64], corner: &[f64], a_n: f64, n: u64) -> Result<ExactBlock> {
    let scales = vec![a_n; corner.len()];
    exact_block_diagonal_scaled(sigma_diag, corner, &scales, n)
}

/// As [`exact_block_diagonal`] with a per-coordinate scaling `A_n`.
pub fn exact_block_diagonal_scaled(sigma_diag: &[f64], corner: &[f64], scales: &[f64], n: u64) -> Result<ExactBlock> {
    check_dim(corner.len(), sigma_diag.len())?;
    check_dim(corner.len(), scales.len())?;
    if corner.is_empty() || n == 0 {
        return Err(Error::InvalidArgument("exact block oracle needs d >= 1 and n >= 1".into()));
    }
    if sigma_diag.iter().any(|s| !(*s > 0.0)) || corner.iter().any(|c| !(*c > 0.0)) || scales.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::InvalidArgument("exact block oracle needs positive variances, corner and scaling".into()));
    }
    let log_q: Vec<f64> = corner
        .iter()
        .zip(sigma_diag)
        .zip(scales)
        .map(|((c, s), a)| log_normal_tail(a * c / s.sqrt()))
        .collect();
    let log_comp: f64 = log_q.iter().map(|lq| log_union_combine(*lq, n)).sum();
    let log_alo = log_union_combine(log_q.iter().sum(), n);
    Ok(ExactBlock {
        p_componentwise: log_comp.exp(),
        p_at_least_one: log_alo.exp(),
        log_p_componentwise: log_comp,
        log_p_at_least_one: log_alo,
    })
}

/// Exact oracle applicability: centered Gaussian, diagonal covariance, block
/// with a positive corner. Returns the oracle at this rung when it applies.
pub fn exact_block_for(dist: &Distribution, set: &ConvexSet, rung: &LadderRung) -> Option<ExactBlock> {
    let Distribution::Gaussian(model) = dist else { return None };
    let Shape::Block { corner } = set.shape() else { return None };
    if !model.covariance().is_diagonal() || model.mean().iter().any(|m| *m != 0.0) || corner.iter().any(|c| *c <= 0.0) {
        return None;
    }
    let sigma: Vec<f64> = model.covariance().sigma().diagonal().iter().copied().collect();
    exact_block_diagonal_scaled(&sigma, corner.as_slice(), rung.matrix.as_slice(), rung.n).ok()
}

pub fn exact_reports(exact: &ExactBlock, seed: u64, rung: &LadderRung) -> [EstimateReport; 2] {
    let make = |method, p, log_p| EstimateReport {
        method,
        p_hat: p,
        std_error: 0.0,
        log_p_hat: log_p,
        trials: 0,
        seed,
        n: rung.n,
        scaling_norm_sq: rung.speed(),
        degenerate_weights: false,
    };
    [
        make(Method::ExactBlockComponentwise, exact.p_componentwise, exact.log_p_componentwise),
        make(Method::ExactBlockAtLeastOne, exact.p_at_least_one, exact.log_p_at_least_one),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub predicted_rate: f64,
    /// `|slope − predicted| / |predicted|`, absent when the prediction is 0.
    pub relative_gap: Option<f64>,
}

/// Ordinary least squares of `log_p` on `speed`.
pub fn slope_fit(points: &[(f64, f64)], predicted_rate: f64) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientPoints { found: points.len() });
    }
    if points.iter().any(|(s, l)| !s.is_finite() || !l.is_finite()) {
        return Err(Error::InvalidArgument("slope fit points must be finite".into()));
    }
    let mut speeds: Vec<f64> = points.iter().map(|p| p.0).collect();
    speeds.sort_by(f64::total_cmp);
    if speeds.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("slope fit speeds must be distinct".into()));
    }
    let k = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / k;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    let relative_gap = (predicted_rate != 0.0).then(|| (slope - predicted_rate).abs() / predicted_rate.abs());
    Ok(SlopeFit { points: points.to_vec(), slope, intercept, r_squared, predicted_rate, relative_gap })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConspiracyReport {
    pub p_conspiracy: f64,
    pub std_error: f64,
    /// Conspiracy probability over the at-least-one probability.
    pub ratio_to_union: f64,
    pub union_probability: f64,
    pub union_is_exact: bool,
    pub counts: EventCounts,
}

/// Estimates `P(M_n ∈ A_n C, no X_i ∈ A_n C)`.
pub fn conspiracy_rate(
    dist: &Distribution,
    set: &ConvexSet,
    rung: &LadderRung,
    trials: u64,
    stream: RandomStream,
) -> Result<ConspiracyReport> {
    let counts = simulate_events(dist, set, rung, trials, stream)?;
    let p = counts.conspiracy as f64 / counts.trials as f64;
    let (union_probability, union_is_exact) = match exact_block_for(dist, set, rung) {
        Some(exact) => (exact.p_at_least_one, true),
        None => (counts.at_least_one as f64 / counts.trials as f64, false),
    };
    Ok(ConspiracyReport {
        p_conspiracy: p,
        std_error: (p * (1.0 - p) / counts.trials as f64).sqrt(),
        ratio_to_union: p / union_probability,
        union_probability,
        union_is_exact,
        counts,
    })
}
