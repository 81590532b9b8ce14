//! Large-deviation rates for Gaussian block maxima on convex sets.
//!
//! The crate computes the dominating point of an atypical closed convex set
//! under a Gaussian (or Gaussian-mixture) law, the rate functions built from
//! it, and Monte Carlo, importance-sampling and exact estimators that check
//! those rates at finite sample sizes.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dominate;
pub mod error;
pub mod estimate;
pub mod model;
pub mod rng;
pub mod sets;
pub mod tail;

pub use dominate::{
    check_margin, closest_point_equivalence, corner_full_rank, corner_pairwise, dominating_point,
    dominating_point_about, rate_componentwise, rate_mixture, rate_single, verify_optimality, DominatingPoint,
    LadderRung, MarginCheck, MixtureRate, ScalingLadder, ScalingLimit,
};
pub use error::{Error, Result};
pub use estimate::{
    conspiracy_rate, exact_block_diagonal, is_single, mc_at_least_one, mc_componentwise, slope_fit, union_combine,
    EstimateReport, ExactBlock, Method, SlopeFit,
};
pub use model::{
    build_covariance, gaussian_log_density, sample_gaussian, sample_mixture, CovarianceModel, Distribution,
    GaussianMixture, GaussianModel,
};
pub use rng::RandomStream;
pub use sets::{is_atypical, ConvexSet, ExtendedIndicator, Shape};
pub use tail::mills_bounds;

pub use nalgebra::{DMatrix, DVector};
