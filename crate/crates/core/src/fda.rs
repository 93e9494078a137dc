//! Functional-data containers and the B-spline basis used to reduce curves to
//! score vectors.
//!
//! Curves live on a shared [`Grid`]. A [`BasisSystem`] holds the basis
//! evaluated on that grid together with trapezoidal quadrature weights and the
//! second-order difference penalty, so that
//!
//! ```text
//! score[i, k] = Σ_t w_t · B[t, k] · value[i, t]   ≈ ∫ B_k(s) X_i(s) ds
//! β(t)        = Σ_k γ_k · B[t, k]
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of basis functions used when a configuration does not set one.
pub const DEFAULT_BASIS_SIZE: usize = 15;
/// Cubic splines.
pub const DEFAULT_DEGREE: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FdaError {
    #[error("grid must be strictly increasing and finite (violation at index {0})")]
    NonMonotoneGrid(usize),
    #[error("grid needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("invalid basis size K={k} for degree {degree} (need K >= degree + 1)")]
    InvalidK { k: usize, degree: usize },
    #[error("curves were not observed on the grid the basis was built on")]
    GridMismatch,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("functional dataset is invalid: {0}")]
    InvalidDataset(String),
}

/// Ordered observation points of the index set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    points: Vec<f64>,
}

impl Grid {
    pub fn new(points: Vec<f64>) -> Result<Self, FdaError> {
        if points.len() < 2 {
            return Err(FdaError::TooFewPoints(points.len()));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(FdaError::NonMonotoneGrid(i));
        }
        if let Some(i) = points.windows(2).position(|w| w[1] <= w[0]) {
            return Err(FdaError::NonMonotoneGrid(i + 1));
        }
        Ok(Self { points })
    }

    /// `len` equally spaced points covering `[lo, hi]`, both ends included.
    pub fn uniform(lo: f64, hi: f64, len: usize) -> Result<Self, FdaError> {
        if len < 2 {
            return Err(FdaError::TooFewPoints(len));
        }
        let step = (hi - lo) / (len - 1) as f64;
        let mut points: Vec<f64> = (0..len).map(|j| lo + step * j as f64).collect();
        points[len - 1] = hi;
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn lower(&self) -> f64 {
        self.points[0]
    }

    pub fn upper(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn span(&self) -> f64 {
        self.upper() - self.lower()
    }

    /// Smallest distance between neighbouring points.
    pub fn min_spacing(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Trapezoid-rule weights; they sum to [`Grid::span`].
    pub fn trapezoid_weights(&self) -> DVector<f64> {
        let p = &self.points;
        let t = p.len();
        DVector::from_fn(t, |j, _| {
            if j == 0 {
                0.5 * (p[1] - p[0])
            } else if j == t - 1 {
                0.5 * (p[t - 1] - p[t - 2])
            } else {
                0.5 * (p[j + 1] - p[j - 1])
            }
        })
    }
}

/// Validates `points` as a [`Grid`].
pub fn build_grid(points: &[f64]) -> Result<Grid, FdaError> {
    Grid::new(points.to_vec())
}

/// `n` curves evaluated on a common grid; row `i` is curve `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalDataset {
    grid: Grid,
    values: DMatrix<f64>,
    curve_ids: Vec<String>,
}

impl FunctionalDataset {
    pub fn new(grid: Grid, values: DMatrix<f64>, curve_ids: Vec<String>) -> Result<Self, FdaError> {
        if values.nrows() == 0 {
            return Err(FdaError::InvalidDataset("no curves".into()));
        }
        if values.ncols() != grid.len() {
            return Err(FdaError::DimensionMismatch {
                expected: grid.len(),
                actual: values.ncols(),
            });
        }
        if curve_ids.len() != values.nrows() {
            return Err(FdaError::DimensionMismatch {
                expected: values.nrows(),
                actual: curve_ids.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos % values.nrows(), pos / values.nrows());
            return Err(FdaError::InvalidDataset(format!(
                "non-finite value for curve {} at grid index {}",
                curve_ids[row], col
            )));
        }
        Ok(Self {
            grid,
            values,
            curve_ids,
        })
    }

    /// Dataset with ids `"1"`, `"2"`, ….
    pub fn with_default_ids(grid: Grid, values: DMatrix<f64>) -> Result<Self, FdaError> {
        let ids = (1..=values.nrows()).map(|i| i.to_string()).collect();
        Self::new(grid, values, ids)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn curve_ids(&self) -> &[String] {
        &self.curve_ids
    }

    pub fn n_curves(&self) -> usize {
        self.values.nrows()
    }

    /// Same grid and ids with new values (validated).
    pub fn with_values(&self, values: DMatrix<f64>) -> Result<Self, FdaError> {
        Self::new(self.grid.clone(), values, self.curve_ids.clone())
    }

    /// Column sums, i.e. `Σ_i value[i, t]` for each grid point.
    pub fn column_sums(&self) -> DVector<f64> {
        DVector::from_fn(self.values.ncols(), |t, _| self.values.column(t).sum())
    }
}

/// Basis functions evaluated on a grid, with the quadrature weights and
/// roughness penalty that go with them.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSystem {
    grid: Grid,
    basis_values: DMatrix<f64>,
    quad_weights: DVector<f64>,
    penalty: DMatrix<f64>,
    penalty_rank: usize,
    degree: usize,
}

impl BasisSystem {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `T × K` matrix, column `k` is basis function `k` on the grid.
    pub fn basis_values(&self) -> &DMatrix<f64> {
        &self.basis_values
    }

    pub fn quad_weights(&self) -> &DVector<f64> {
        &self.quad_weights
    }

    /// Second-order difference penalty `DᵀD`.
    pub fn penalty(&self) -> &DMatrix<f64> {
        &self.penalty
    }

    /// `K − 2` for the second-difference penalty (0 when `K < 3`).
    pub fn penalty_rank(&self) -> usize {
        self.penalty_rank
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn size(&self) -> usize {
        self.basis_values.ncols()
    }

    /// `G[j, k] = Σ_t w_t B[t, j] B[t, k]`.
    pub fn gram(&self) -> DMatrix<f64> {
        let weighted = weighted_rows(&self.basis_values, &self.quad_weights);
        weighted.tr_mul(&self.basis_values)
    }

    /// Function in the span of the basis whose projections equal `scores`,
    /// i.e. `B G⁻¹ scores`. This is how latent score vectors are turned back
    /// into curves.
    pub fn curve_from_scores(&self, scores: &DVector<f64>) -> Result<DVector<f64>, FdaError> {
        if scores.len() != self.size() {
            return Err(FdaError::DimensionMismatch {
                expected: self.size(),
                actual: scores.len(),
            });
        }
        let coeffs = self
            .gram()
            .cholesky()
            .ok_or_else(|| FdaError::InvalidDataset("basis Gram matrix is singular".into()))?
            .solve(scores);
        Ok(&self.basis_values * coeffs)
    }
}

fn weighted_rows(m: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (t, mut row) in out.row_iter_mut().enumerate() {
        row *= w[t];
    }
    out
}

/// Clamped knot vector with `k - degree - 1` equally spaced interior knots.
fn clamped_knots(lo: f64, hi: f64, k: usize, degree: usize) -> Vec<f64> {
    let n_interior = k - degree - 1;
    let mut knots = Vec::with_capacity(k + degree + 1);
    knots.extend(std::iter::repeat_n(lo, degree + 1));
    let step = (hi - lo) / (n_interior + 1) as f64;
    knots.extend((1..=n_interior).map(|j| lo + step * j as f64));
    knots.extend(std::iter::repeat_n(hi, degree + 1));
    knots
}

/// Cox–de Boor evaluation of all `k` basis functions at `x`.
fn bspline_row(x: f64, knots: &[f64], k: usize, degree: usize) -> Vec<f64> {
    let hi = knots[knots.len() - 1];
    // Locate the knot span; the right end belongs to the last non-empty span.
    let span = if x >= hi {
        (0..knots.len() - 1)
            .rev()
            .find(|&j| knots[j] < knots[j + 1])
            .unwrap_or(0)
    } else {
        (0..knots.len() - 1)
            .find(|&j| knots[j] <= x && x < knots[j + 1])
            .unwrap_or(0)
    };
    let mut b = vec![0.0; knots.len() - 1];
    b[span] = 1.0;
    for d in 1..=degree {
        for j in 0..knots.len() - 1 - d {
            let left_den = knots[j + d] - knots[j];
            let right_den = knots[j + d + 1] - knots[j + 1];
            let left = if left_den > 0.0 {
                (x - knots[j]) / left_den * b[j]
            } else {
                0.0
            };
            let right = if right_den > 0.0 {
                (knots[j + d + 1] - x) / right_den * b[j + 1]
            } else {
                0.0
            };
            b[j] = left + right;
        }
    }
    b.truncate(k);
    b
}

/// Second-difference operator, `(k − 2) × k`.
pub fn second_difference_matrix(k: usize) -> DMatrix<f64> {
    let rows = k.saturating_sub(2);
    let mut d = DMatrix::zeros(rows, k);
    for r in 0..rows {
        d[(r, r)] = 1.0;
        d[(r, r + 1)] = -2.0;
        d[(r, r + 2)] = 1.0;
    }
    d
}

/// Clamped B-spline basis of the given degree with `k` functions, evaluated
/// on `grid`, plus trapezoid weights and the penalty `DᵀD`.
pub fn build_bspline_basis(grid: &Grid, k: usize, degree: usize) -> Result<BasisSystem, FdaError> {
    if k < degree + 1 || k == 0 {
        return Err(FdaError::InvalidK { k, degree });
    }
    let knots = clamped_knots(grid.lower(), grid.upper(), k, degree);
    let t = grid.len();
    let mut basis_values = DMatrix::zeros(t, k);
    for (row, &x) in grid.points().iter().enumerate() {
        for (col, v) in bspline_row(x, &knots, k, degree).into_iter().enumerate() {
            basis_values[(row, col)] = v;
        }
    }
    let d = second_difference_matrix(k);
    let penalty = d.tr_mul(&d);
    Ok(BasisSystem {
        grid: grid.clone(),
        basis_values,
        quad_weights: grid.trapezoid_weights(),
        penalty,
        penalty_rank: k.saturating_sub(2),
        degree,
    })
}

/// Which functional variable a score matrix was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreSource {
    W,
    MStar,
    X,
}

/// `n × K` projections of curves onto the basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub scores: DMatrix<f64>,
    pub source: ScoreSource,
}

impl ScoreMatrix {
    pub fn n_rows(&self) -> usize {
        self.scores.nrows()
    }
}

/// Trapezoid approximation of `∫ B_k(s) X_i(s) ds` for every curve and basis
/// function.
pub fn project(data: &FunctionalDataset, basis: &BasisSystem, source: ScoreSource) -> Result<ScoreMatrix, FdaError> {
    if data.grid() != basis.grid() {
        return Err(FdaError::GridMismatch);
    }
    let weighted = weighted_rows(basis.basis_values(), basis.quad_weights());
    Ok(ScoreMatrix {
        scores: data.values() * weighted,
        source,
    })
}

/// `B · coeffs` on the grid.
pub fn reconstruct_function(coeffs: &DVector<f64>, basis: &BasisSystem) -> Result<DVector<f64>, FdaError> {
    if coeffs.len() != basis.size() {
        return Err(FdaError::DimensionMismatch {
            expected: basis.size(),
            actual: coeffs.len(),
        });
    }
    Ok(basis.basis_values() * coeffs)
}
