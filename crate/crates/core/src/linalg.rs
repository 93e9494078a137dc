//! Small dense helpers on top of nalgebra used by the samplers.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

pub(crate) type Chol = Cholesky<f64, Dyn>;

/// Cholesky of the symmetrized matrix, `None` when it is not positive definite.
pub(crate) fn spd_cholesky(m: &DMatrix<f64>) -> Option<Chol> {
    let sym = symmetrize(m);
    if sym.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Cholesky::new(sym)
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// `log det` from a Cholesky factor.
pub(crate) fn log_det(chol: &Chol) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Solves `L y = b` in place for lower-triangular `l` (only the lower part is read).
pub(crate) fn forward_substitute(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = b.len();
    let data = l.as_slice();
    for j in 0..n {
        let col = &data[j * n..(j + 1) * n];
        b[j] /= col[j];
        let bj = b[j];
        for (bi, lij) in b[j + 1..].iter_mut().zip(&col[j + 1..]) {
            *bi -= lij * bj;
        }
    }
}

/// Solves `Lᵀ y = b` in place for lower-triangular `l`.
pub(crate) fn backward_substitute_transpose(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = b.len();
    let data = l.as_slice();
    for i in (0..n).rev() {
        let col = &data[i * n..(i + 1) * n];
        let s: f64 = col[i + 1..].iter().zip(&b[i + 1..]).map(|(a, c)| a * c).sum();
        b[i] = (b[i] - s) / col[i];
    }
}

/// `out += A x` for a square column-major `a`.
pub(crate) fn matvec_add(a: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    let n = out.len();
    for (j, col) in a.as_slice().chunks_exact(n).enumerate() {
        let xj = x[j];
        for (o, v) in out.iter_mut().zip(col) {
            *o += v * xj;
        }
    }
}

/// Draw from `N(Q⁻¹ b, Q⁻¹)` given the Cholesky factor of the precision `Q`
/// and a vector of standard normals `xi`.
pub(crate) fn precision_draw(chol: &Chol, b: &DVector<f64>, xi: &mut [f64]) -> DVector<f64> {
    let mut mean = b.clone();
    precision_draw_into(chol.l_dirty(), mean.as_mut_slice(), xi);
    mean
}

/// In-place version of [`precision_draw`]: `b` is overwritten with the draw.
/// `l` is the lower Cholesky factor of the precision.
pub(crate) fn precision_draw_into(l: &DMatrix<f64>, b: &mut [f64], xi: &mut [f64]) {
    forward_substitute(l, b);
    backward_substitute_transpose(l, b);
    backward_substitute_transpose(l, xi);
    for (v, e) in b.iter_mut().zip(xi.iter()) {
        *v += e;
    }
}
