//! Closed convex sets with membership, Euclidean projection and scaling.
//!
//! All sets are closed: points on the boundary are members. Polyhedra are
//! `{x : Bx ≥ c}`; their projection runs Dykstra's alternating projections
//! over the rows and then polishes the result by solving the KKT system on
//! the detected active rows, keeping the polished point only when its
//! multipliers are nonnegative and it is feasible.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{check_dim, Error, Result};

pub const DYKSTRA_MAX_SWEEPS: usize = 10_000;
pub const DYKSTRA_TOLERANCE: f64 = 1e-8;
pub const EMPTY_INTERIOR_RADIUS: f64 = 1e-9;

const POLISH_EVERY: usize = 8;
const ACTIVE_TOLERANCE: f64 = 1e-6;

/// Numeric view of the extended-value indicator: 0 inside, −∞ outside.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtendedIndicator {
    Inside,
    Outside,
}

impl ExtendedIndicator {
    pub fn value(self) -> f64 {
        match self {
            ExtendedIndicator::Inside => 0.0,
            ExtendedIndicator::Outside => f64::NEG_INFINITY,
        }
    }

    pub fn is_inside(self) -> bool {
        self == ExtendedIndicator::Inside
    }
}

impl From<bool> for ExtendedIndicator {
    fn from(inside: bool) -> Self {
        if inside {
            ExtendedIndicator::Inside
        } else {
            ExtendedIndicator::Outside
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// `{y : y ≥ corner}` componentwise.
    Block { corner: DVector<f64> },
    /// `{x : ⟨normal, x⟩ ≥ offset}`.
    Halfspace { normal: DVector<f64>, offset: f64 },
    /// `{x : Bx ≥ c}` componentwise.
    Polyhedron { matrix: DMatrix<f64>, offsets: DVector<f64> },
    /// `{x : ⟨x − center, Q(x − center)⟩ ≤ r²}`.
    Ellipsoid { center: DVector<f64>, shape: DMatrix<f64>, radius: f64 },
}

/// A validated closed convex set. Build one with the named constructors.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexSet(Shape);

impl ConvexSet {
    pub fn block(corner: DVector<f64>) -> Result<Self> {
        if corner.is_empty() || corner.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("block corner must be a finite non-empty vector".into()));
        }
        Ok(Self(Shape::Block { corner }))
    }

    pub fn halfspace(normal: DVector<f64>, offset: f64) -> Result<Self> {
        if normal.is_empty() || normal.iter().any(|v| !v.is_finite()) || !offset.is_finite() {
            return Err(Error::InvalidArgument("halfspace needs a finite normal and offset".into()));
        }
        if normal.norm() == 0.0 {
            return Err(Error::InvalidArgument("halfspace normal must be nonzero".into()));
        }
        Ok(Self(Shape::Halfspace { normal, offset }))
    }

    pub fn polyhedron(matrix: DMatrix<f64>, offsets: DVector<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::InvalidArgument("polyhedron needs at least one row".into()));
        }
        check_dim(matrix.nrows(), offsets.len())?;
        if matrix.iter().chain(offsets.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("polyhedron entries must be finite".into()));
        }
        if let Some(i) = (0..matrix.nrows()).find(|&i| matrix.row(i).norm() == 0.0) {
            return Err(Error::InvalidArgument(format!("polyhedron row {i} is zero")));
        }
        Ok(Self(Shape::Polyhedron { matrix, offsets }))
    }

    pub fn ellipsoid(center: DVector<f64>, shape: DMatrix<f64>, radius: f64) -> Result<Self> {
        if !shape.is_square() {
            return Err(Error::InvalidArgument("ellipsoid shape must be square".into()));
        }
        check_dim(shape.nrows(), center.len())?;
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidArgument(format!("ellipsoid radius must be positive, got {radius}")));
        }
        let asym = (&shape - shape.transpose()).amax();
        if asym > 1e-12 * shape.amax() {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        let eig = SymmetricEigen::new(shape.clone());
        let min = eig.eigenvalues.min();
        if !(min > 1e-12) {
            return Err(Error::NotPositiveDefinite { index: eig.eigenvalues.imin(), pivot: min });
        }
        Ok(Self(Shape::Ellipsoid { center, shape, radius }))
    }

    pub fn shape(&self) -> &Shape {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        match &self.0 {
            Shape::Block { corner } => corner.len(),
            Shape::Halfspace { normal, .. } => normal.len(),
            Shape::Polyhedron { matrix, .. } => matrix.ncols(),
            Shape::Ellipsoid { center, .. } => center.len(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match &self.0 {
            Shape::Block { .. } => "block",
            Shape::Halfspace { .. } => "halfspace",
            Shape::Polyhedron { .. } => "polyhedron",
            Shape::Ellipsoid { .. } => "ellipsoid",
        }
    }

    /// Membership with zero tolerance; dimension must agree.
    pub fn contains(&self, x: &DVector<f64>) -> Result<ExtendedIndicator> {
        check_dim(self.dimension(), x.len())?;
        Ok(self.contains_unchecked(x).into())
    }

    pub(crate) fn contains_unchecked(&self, x: &DVector<f64>) -> bool {
        match &self.0 {
            Shape::Block { corner } => x.iter().zip(corner.iter()).all(|(a, b)| a >= b),
            Shape::Halfspace { normal, offset } => normal.dot(x) >= *offset,
            Shape::Polyhedron { matrix, offsets } => {
                (0..matrix.nrows()).all(|i| matrix.row(i).transpose().dot(x) >= offsets[i])
            }
            Shape::Ellipsoid { center, shape, radius } => {
                let u = x - center;
                u.dot(&(shape * &u)) <= radius * radius
            }
        }
    }

    /// Smallest slack over the defining inequalities, normalized so halfspace
    /// rows measure Euclidean distance. Nonnegative exactly on the set.
    pub fn min_slack(&self, x: &DVector<f64>) -> Result<f64> {
        check_dim(self.dimension(), x.len())?;
        Ok(match &self.0 {
            Shape::Block { corner } => (x - corner).min(),
            Shape::Halfspace { normal, offset } => (normal.dot(x) - offset) / normal.norm(),
            Shape::Polyhedron { matrix, offsets } => row_slacks(matrix, offsets, x).min(),
            Shape::Ellipsoid { center, shape, radius } => {
                let u = x - center;
                radius - u.dot(&(shape * &u)).sqrt()
            }
        })
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dimension(), x.len())?;
        match &self.0 {
            Shape::Block { corner } => Ok(x.zip_map(corner, f64::max)),
            Shape::Halfspace { normal, offset } => Ok(project_halfspace(normal, *offset, x)),
            Shape::Polyhedron { matrix, offsets } => project_polyhedron(matrix, offsets, x),
            Shape::Ellipsoid { center, shape, radius } => Ok(project_ellipsoid(center, shape, *radius, x)),
        }
    }

    /// The image `D·C` under a positive diagonal map given by its entries.
    pub fn scale(&self, diag: &DVector<f64>) -> Result<Self> {
        check_dim(self.dimension(), diag.len())?;
        if let Some(v) = diag.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("scaling entries must be positive, got {v}")));
        }
        Ok(Self(match &self.0 {
            Shape::Block { corner } => Shape::Block { corner: corner.component_mul(diag) },
            Shape::Halfspace { normal, offset } => {
                Shape::Halfspace { normal: normal.component_div(diag), offset: *offset }
            }
            Shape::Polyhedron { matrix, offsets } => {
                let mut m = matrix.clone();
                for (j, mut col) in m.column_iter_mut().enumerate() {
                    col /= diag[j];
                }
                Shape::Polyhedron { matrix: m, offsets: offsets.clone() }
            }
            Shape::Ellipsoid { center, shape, radius } => {
                let inv = diag.map(|v| 1.0 / v);
                let q = DMatrix::from_diagonal(&inv) * shape * DMatrix::from_diagonal(&inv);
                Shape::Ellipsoid { center: center.component_mul(diag), shape: q, radius: *radius }
            }
        }))
    }

    /// Uniform scaling `a·C`.
    pub fn scale_uniform(&self, a: f64) -> Result<Self> {
        self.scale(&DVector::from_element(self.dimension(), a))
    }

    /// The image `M·C` under an invertible linear map. Blocks are only closed
    /// under positive diagonal maps.
    pub fn linear_image(&self, map: &DMatrix<f64>) -> Result<Self> {
        let d = self.dimension();
        if map.nrows() != d || map.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: map.nrows() });
        }
        let inv = map
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("linear map is singular".into()))?;
        match &self.0 {
            Shape::Block { .. } => {
                let off_diag = (0..d).any(|i| (0..d).any(|j| i != j && map[(i, j)] != 0.0));
                if off_diag {
                    return Err(Error::InvalidArgument("a block is only closed under diagonal maps".into()));
                }
                self.scale(&map.diagonal())
            }
            Shape::Halfspace { normal, offset } => Self::halfspace(inv.transpose() * normal, *offset),
            Shape::Polyhedron { matrix, offsets } => Self::polyhedron(matrix * &inv, offsets.clone()),
            Shape::Ellipsoid { center, shape, radius } => {
                let q = inv.transpose() * shape * &inv;
                let q = (&q + q.transpose()) * 0.5;
                Self::ellipsoid(map * center, q, *radius)
            }
        }
    }

    /// True for sets with `x ∈ C, y ≥ x ⇒ y ∈ C`.
    pub fn is_upward_closed(&self) -> bool {
        match &self.0 {
            Shape::Block { .. } => true,
            Shape::Halfspace { normal, .. } => normal.iter().all(|v| *v >= 0.0),
            Shape::Polyhedron { matrix, .. } => matrix.iter().all(|v| *v >= 0.0),
            Shape::Ellipsoid { .. } => false,
        }
    }

    /// A point with positive slack on every defining inequality.
    pub fn interior_point(&self) -> Result<DVector<f64>> {
        match &self.0 {
            Shape::Block { corner } => Ok(corner.add_scalar(1.0)),
            Shape::Halfspace { normal, offset } => {
                let origin = DVector::zeros(normal.len());
                Ok(project_halfspace(normal, *offset, &origin) + normal / normal.norm())
            }
            Shape::Ellipsoid { center, .. } => Ok(center.clone()),
            Shape::Polyhedron { matrix, offsets } => {
                let (point, radius) = chebyshev_center(matrix, offsets);
                if radius <= EMPTY_INTERIOR_RADIUS {
                    Err(Error::EmptyInterior { radius })
                } else {
                    Ok(point)
                }
            }
        }
    }
}

/// Atypical sets exclude the origin.
pub fn is_atypical(set: &ConvexSet) -> bool {
    !set.contains_unchecked(&DVector::zeros(set.dimension()))
}

fn row_slacks(matrix: &DMatrix<f64>, offsets: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
    let raw = matrix * x - offsets;
    DVector::from_iterator(raw.len(), (0..raw.len()).map(|i| raw[i] / matrix.row(i).norm()))
}

fn project_halfspace(normal: &DVector<f64>, offset: f64, x: &DVector<f64>) -> DVector<f64> {
    let gap = offset - normal.dot(x);
    if gap <= 0.0 {
        x.clone()
    } else {
        x + normal * (gap / normal.norm_squared())
    }
}

fn project_ellipsoid(center: &DVector<f64>, shape: &DMatrix<f64>, radius: f64, x: &DVector<f64>) -> DVector<f64> {
    let u = x - center;
    if u.dot(&(shape * &u)) <= radius * radius {
        return x.clone();
    }
    // y = center + (I + λQ)⁻¹ u; in Q's eigenbasis the constraint is 1-D in λ
    let eig = SymmetricEigen::new(shape.clone());
    let q = &eig.eigenvalues;
    let w = eig.eigenvectors.transpose() * &u;
    let r2 = radius * radius;
    let g = |lambda: f64| -> f64 {
        (0..w.len())
            .map(|i| {
                let s = 1.0 + lambda * q[i];
                q[i] * w[i] * w[i] / (s * s)
            })
            .sum()
    };
    let mut lo = 0.0;
    let mut hi = (0..w.len()).map(|i| w[i] * w[i] / q[i]).sum::<f64>().sqrt() / radius;
    while g(hi) > r2 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > r2 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let z = DVector::from_iterator(w.len(), (0..w.len()).map(|i| w[i] / (1.0 + hi * q[i])));
    center + &eig.eigenvectors * z
}

fn project_polyhedron(matrix: &DMatrix<f64>, offsets: &DVector<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
    if row_slacks(matrix, offsets, x).min() >= 0.0 {
        return Ok(x.clone());
    }
    let m = matrix.nrows();
    let rows: Vec<DVector<f64>> = (0..m).map(|i| matrix.row(i).transpose()).collect();
    let mut y = x.clone();
    let mut increments = vec![DVector::zeros(x.len()); m];
    let mut residual = f64::INFINITY;
    for sweep in 1..=DYKSTRA_MAX_SWEEPS {
        let previous = y.clone();
        for (i, (row, inc)) in rows.iter().zip(increments.iter_mut()).enumerate() {
            let shifted = &y + &*inc;
            let p = project_halfspace(row, offsets[i], &shifted);
            *inc = shifted - &p;
            y = p;
        }
        let violation = (-row_slacks(matrix, offsets, &y).min()).max(0.0);
        residual = (&y - previous).norm().max(violation);
        if sweep % POLISH_EVERY == 0 || residual <= DYKSTRA_TOLERANCE {
            if let Some(z) = polish_projection(matrix, offsets, x, &y) {
                return Ok(z);
            }
        }
        if residual <= DYKSTRA_TOLERANCE {
            return Ok(y);
        }
    }
    Err(Error::ConvergenceFailure { residual, iterations: DYKSTRA_MAX_SWEEPS })
}

/// Solves the equality-constrained projection on the rows active at `approx`,
/// dropping rows with negative multipliers. Returns `None` unless the result
/// satisfies the full KKT conditions.
fn polish_projection(
    matrix: &DMatrix<f64>,
    offsets: &DVector<f64>,
    x: &DVector<f64>,
    approx: &DVector<f64>,
) -> Option<DVector<f64>> {
    let slacks = row_slacks(matrix, offsets, approx);
    let mut active: Vec<usize> = (0..matrix.nrows()).filter(|&i| slacks[i] <= ACTIVE_TOLERANCE).collect();
    while !active.is_empty() {
        let b = DMatrix::from_rows(&active.iter().map(|&i| matrix.row(i).into_owned()).collect::<Vec<_>>());
        let rhs = DVector::from_iterator(active.len(), active.iter().map(|&i| offsets[i])) - &b * x;
        let gram = &b * b.transpose();
        let lambda = gram.cholesky()?.solve(&rhs);
        let (worst, min_lambda) = lambda.argmin();
        if min_lambda < 0.0 {
            active.remove(worst);
            continue;
        }
        let z = x + b.transpose() * lambda;
        let feasible = row_slacks(matrix, offsets, &z).min() >= -1e-12 * (1.0 + z.amax());
        return feasible.then_some(z);
    }
    None
}

/// Chebyshev center of `{Bx ≥ c}` intersected with a box around the
/// least-squares solution of `Bx = c`. Returns the point and its radius.
fn chebyshev_center(matrix: &DMatrix<f64>, offsets: &DVector<f64>) -> (DVector<f64>, f64) {
    let d = matrix.ncols();
    let center = matrix
        .clone()
        .svd(true, true)
        .solve(offsets, 1e-12)
        .unwrap_or_else(|_| DVector::zeros(d));
    let half_width = 2.0 * (center.norm() + 1.0);
    let radius_at = |x: &DVector<f64>| -> f64 {
        let box_slack = (0..d)
            .map(|j| half_width - (x[j] - center[j]).abs())
            .fold(f64::INFINITY, f64::min);
        row_slacks(matrix, offsets, x).min().min(box_slack)
    };
    if d <= 3 {
        grid_ascent(d, &center, half_width, &radius_at)
    } else {
        subgradient_ascent(matrix, offsets, &center, half_width)
    }
}

fn grid_ascent(
    d: usize,
    start: &DVector<f64>,
    half_width: f64,
    objective: &dyn Fn(&DVector<f64>) -> f64,
) -> (DVector<f64>, f64) {
    let per_axis: usize = if d <= 2 { 41 } else { 21 };
    let mut best = start.clone();
    let mut best_value = objective(&best);
    let mut width = half_width;
    let mut point = DVector::zeros(d);
    for _ in 0..60 {
        let origin = best.clone();
        let total = per_axis.pow(d as u32);
        for idx in 0..total {
            let mut rest = idx;
            for j in 0..d {
                let k = rest % per_axis;
                rest /= per_axis;
                point[j] = origin[j] - width + 2.0 * width * k as f64 / (per_axis - 1) as f64;
            }
            let v = objective(&point);
            if v > best_value {
                best_value = v;
                best.copy_from(&point);
            }
        }
        width *= 0.25;
    }
    (best, best_value)
}

fn subgradient_ascent(
    matrix: &DMatrix<f64>,
    offsets: &DVector<f64>,
    center: &DVector<f64>,
    half_width: f64,
) -> (DVector<f64>, f64) {
    let d = matrix.ncols();
    let mut x = center.clone();
    let mut best = x.clone();
    let mut best_value = f64::NEG_INFINITY;
    for k in 0..20_000 {
        let slacks = row_slacks(matrix, offsets, &x);
        let (row, row_min) = slacks.argmin();
        let (axis, box_min) = (0..d)
            .map(|j| (j, half_width - (x[j] - center[j]).abs()))
            .fold((0, f64::INFINITY), |acc, v| if v.1 < acc.1 { v } else { acc });
        let value = row_min.min(box_min);
        if value > best_value {
            best_value = value;
            best.copy_from(&x);
        }
        let grad = if row_min <= box_min {
            let r = matrix.row(row).transpose();
            &r / r.norm()
        } else {
            let mut e = DVector::zeros(d);
            e[axis] = -(x[axis] - center[axis]).signum();
            e
        };
        let step = half_width / (1.0 + k as f64).sqrt();
        x += grad * step;
        for j in 0..d {
            x[j] = x[j].clamp(center[j] - half_width, center[j] + half_width);
        }
    }
    (best, best_value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn example_polyhedron() -> ConvexSet {
        let b = DMatrix::from_row_slice(3, 2, &[2.0, 1.0, 1.0, 1.0, 1.0, 2.0]);
        ConvexSet::polyhedron(b, v(&[4.0, 3.0, 4.0])).unwrap()
    }

    #[test]
    fn membership_examples() {
        let block = ConvexSet::block(v(&[2.0, 2.0])).unwrap();
        assert_eq!(block.contains(&v(&[2.0, 2.0])).unwrap(), ExtendedIndicator::Inside);
        let half = ConvexSet::halfspace(v(&[1.0, 1.0]), 2.0).unwrap();
        assert_eq!(half.contains(&v(&[0.0, 0.0])).unwrap(), ExtendedIndicator::Outside);
        assert_eq!(half.contains(&v(&[0.0, 0.0])).unwrap().value(), f64::NEG_INFINITY);
        assert!(example_polyhedron().contains(&v(&[1.5, 1.5])).unwrap().is_inside());
        assert!(block.contains(&v(&[1.0, 2.0, 3.0])).is_err());
    }

    #[test]
    fn constructor_validation() {
        assert!(ConvexSet::halfspace(v(&[0.0, 0.0]), 1.0).is_err());
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(ConvexSet::polyhedron(b, v(&[1.0, 1.0])).is_err());
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(ConvexSet::ellipsoid(v(&[0.0, 0.0]), q, 1.0).is_err());
        assert!(ConvexSet::ellipsoid(v(&[0.0, 0.0]), DMatrix::identity(2, 2), 0.0).is_err());
    }

    #[test]
    fn projection_examples() {
        let block = ConvexSet::block(v(&[2.0, 2.0])).unwrap();
        assert_eq!(block.project(&v(&[0.0, 0.0])).unwrap(), v(&[2.0, 2.0]));
        let half = ConvexSet::halfspace(v(&[1.0, 1.0]), 2.0).unwrap();
        assert!((half.project(&v(&[0.0, 0.0])).unwrap() - v(&[1.0, 1.0])).norm() < 1e-15);
        let ell = ConvexSet::ellipsoid(v(&[3.0, 3.0]), DMatrix::identity(2, 2), 1.0).unwrap();
        let p = ell.project(&v(&[0.0, 0.0])).unwrap();
        let expected = 3.0 - 3.0 / 18f64.sqrt();
        assert!((p[0] - expected).abs() < 1e-10 && (p[1] - expected).abs() < 1e-10);
        assert!((p[0] - 2.2929).abs() < 1e-4);
    }

    #[test]
    fn projection_of_member_is_identity() {
        let x = v(&[3.0, 2.5]);
        for set in [
            ConvexSet::block(v(&[2.0, 2.0])).unwrap(),
            ConvexSet::halfspace(v(&[1.0, 1.0]), 2.0).unwrap(),
            example_polyhedron(),
            ConvexSet::ellipsoid(v(&[3.0, 3.0]), DMatrix::identity(2, 2), 1.0).unwrap(),
        ] {
            assert_eq!(set.project(&x).unwrap(), x);
        }
    }

    #[test]
    fn polyhedron_projection_vertex_and_facet() {
        let poly = example_polyhedron();
        let p = poly.project(&v(&[0.0, 0.0])).unwrap();
        assert!((p - v(&[1.5, 1.5])).norm() < 1e-12);
        // nearest point from far below-left of the (2,1) vertex is the vertex itself
        let p = poly.project(&v(&[0.0, -5.0])).unwrap();
        assert!(poly.min_slack(&p).unwrap() >= -1e-12);
        let q = v(&[0.0, -5.0]);
        for y in [v(&[2.0, 1.0]), v(&[4.0, 0.0]), v(&[1.8, 1.2])] {
            assert!((&p - &q).norm() <= (&y - &q).norm() + 1e-9);
        }
    }

    #[test]
    fn infeasible_polyhedron_fails_loudly() {
        let b = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let poly = ConvexSet::polyhedron(b, v(&[1.0, 0.0])).unwrap();
        let err = poly.project(&v(&[0.5])).unwrap_err();
        assert!(matches!(err, Error::ConvergenceFailure { .. }));
        assert!(matches!(poly.interior_point().unwrap_err(), Error::EmptyInterior { .. }));
    }

    #[test]
    fn scaling_examples() {
        let block = ConvexSet::block(v(&[1.0, 1.0])).unwrap();
        assert_eq!(block.scale(&v(&[1.0, 1.0])).unwrap(), block);
        assert_eq!(block.scale(&v(&[3.0, 3.0])).unwrap(), ConvexSet::block(v(&[3.0, 3.0])).unwrap());
        let half = ConvexSet::halfspace(v(&[1.0, 1.0]), 2.0).unwrap();
        let scaled = half.scale(&v(&[2.0, 1.0])).unwrap();
        assert!(half.contains(&v(&[1.0, 1.0])).unwrap().is_inside());
        assert!(scaled.contains(&v(&[2.0, 1.0])).unwrap().is_inside());
        assert!(block.scale(&v(&[1.0, 0.0])).is_err());
        assert!(block.scale(&v(&[1.0, -2.0])).is_err());
    }

    #[test]
    fn atypicality_examples() {
        assert!(is_atypical(&ConvexSet::block(v(&[2.0, 2.0])).unwrap()));
        assert!(!is_atypical(&ConvexSet::halfspace(v(&[1.0, 1.0]), -1.0).unwrap()));
        assert!(is_atypical(&ConvexSet::ellipsoid(v(&[3.0, 3.0]), DMatrix::identity(2, 2), 1.0).unwrap()));
    }

    #[test]
    fn interior_point_examples() {
        let block = ConvexSet::block(v(&[2.0, 2.0])).unwrap();
        assert_eq!(block.interior_point().unwrap(), v(&[3.0, 3.0]));
        let ell = ConvexSet::ellipsoid(v(&[3.0, 3.0]), DMatrix::identity(2, 2), 1.0).unwrap();
        assert_eq!(ell.interior_point().unwrap(), v(&[3.0, 3.0]));
        let half = ConvexSet::halfspace(v(&[1.0, 1.0]), 2.0).unwrap();
        assert!(half.min_slack(&half.interior_point().unwrap()).unwrap() >= 1e-6);
    }

    #[test]
    fn chebyshev_center_beats_brute_force_grid() {
        let poly = example_polyhedron();
        let p = poly.interior_point().unwrap();
        let b = DMatrix::from_row_slice(3, 2, &[2.0, 1.0, 1.0, 1.0, 1.0, 2.0]);
        let c = v(&[4.0, 3.0, 4.0]);
        let raw_min = (&b * &p - &c).min();
        assert!(raw_min >= 0.3, "raw slack {raw_min}");

        // bounded version (capped at 4 per axis) so the deepest point is well defined
        let bb = DMatrix::from_row_slice(5, 2, &[2.0, 1.0, 1.0, 1.0, 1.0, 2.0, -1.0, 0.0, 0.0, -1.0]);
        let cc = v(&[4.0, 3.0, 4.0, -4.0, -4.0]);
        let bounded = ConvexSet::polyhedron(bb.clone(), cc.clone()).unwrap();
        let q = bounded.interior_point().unwrap();
        let mut best = f64::NEG_INFINITY;
        for i in 0..=400 {
            for j in 0..=400 {
                let x = v(&[4.0 * i as f64 / 400.0, 4.0 * j as f64 / 400.0]);
                let s = (0..5).map(|r| (bb.row(r).transpose().dot(&x) - cc[r]) / bb.row(r).norm()).fold(f64::INFINITY, f64::min);
                best = best.max(s);
            }
        }
        let found = bounded.min_slack(&q).unwrap();
        assert!(found >= best - 1e-6, "{found} vs grid {best}");
        assert!(found <= best + 0.01 * 2f64.sqrt());
    }

    #[test]
    fn chebyshev_in_higher_dimension() {
        // simplex-like cone in 5-D, unbounded upward; subgradient path
        let d = 5;
        let mut b = DMatrix::identity(d, d);
        b = b.insert_row(d, 1.0);
        let mut c = DVector::from_element(d + 1, 0.5);
        c[d] = 4.0;
        let poly = ConvexSet::polyhedron(b, c).unwrap();
        let p = poly.interior_point().unwrap();
        assert!(poly.min_slack(&p).unwrap() >= 1e-6);
    }

    #[test]
    fn linear_image_matches_membership() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, -0.3, 1.0]);
        let x = v(&[1.2, 0.9]);
        for set in [
            ConvexSet::halfspace(v(&[1.0, 1.0]), 2.0).unwrap(),
            example_polyhedron(),
            ConvexSet::ellipsoid(v(&[1.0, 1.0]), DMatrix::identity(2, 2), 0.5).unwrap(),
        ] {
            let image = set.linear_image(&m).unwrap();
            assert_eq!(set.contains(&x).unwrap(), image.contains(&(&m * &x)).unwrap());
        }
        assert!(ConvexSet::block(v(&[1.0, 1.0])).unwrap().linear_image(&m).is_err());
    }
}
