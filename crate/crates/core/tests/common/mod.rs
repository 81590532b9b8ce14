//! Brute-force oracles shared by the integration tests.

use convex_ldp::{ConvexSet, CovarianceModel, DVector, ScalingLimit};

/// Minimum of `Q_A` over the set on a 400×400 lattice covering `[lo, hi]²`,
/// followed by a second 400×400 lattice spanning four coarse cells around the
/// best coarse point. Returns (value, point).
pub fn grid_minimum(set: &ConvexSet, cov: &CovarianceModel, limit: &ScalingLimit, lo: [f64; 2], hi: [f64; 2]) -> (f64, DVector<f64>) {
    let q = |x: &DVector<f64>| limit.quadratic(cov, x);
    let scan = |lo: [f64; 2], hi: [f64; 2]| {
        let mut best = (f64::INFINITY, DVector::zeros(2));
        for i in 0..400 {
            for j in 0..400 {
                let x = DVector::from_column_slice(&[
                    lo[0] + (hi[0] - lo[0]) * i as f64 / 399.0,
                    lo[1] + (hi[1] - lo[1]) * j as f64 / 399.0,
                ]);
                if set.contains(&x).unwrap().is_inside() {
                    let v = q(&x);
                    if v < best.0 {
                        best = (v, x);
                    }
                }
            }
        }
        best
    };
    let coarse = scan(lo, hi);
    assert!(coarse.0.is_finite(), "grid box misses the set");
    let h = [(hi[0] - lo[0]) / 399.0 * 2.0, (hi[1] - lo[1]) / 399.0 * 2.0];
    let c = &coarse.1;
    let fine = scan([c[0] - h[0], c[1] - h[1]], [c[0] + h[0], c[1] + h[1]]);
    if fine.0 < coarse.0 {
        fine
    } else {
        coarse
    }
}
