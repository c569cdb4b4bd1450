//! Dense linear-algebra helpers shared by the synthesis modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type RMat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;
pub type RVec = DVector<f64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn max_abs_real(m: &RMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.norm()))
}

/// `max |U^dagger U - I|` over all entries.
pub fn unitarity_residual(u: &CMat) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    let n = u.nrows();
    let g = u.adjoint() * u - CMat::identity(n, n);
    max_abs(&g)
}

pub fn ensure_unitary(u: &CMat, tol: f64) -> Result<()> {
    let residual = unitarity_residual(u);
    if residual > tol {
        return Err(Error::NotUnitary { residual });
    }
    Ok(())
}

pub fn real_part(u: &CMat) -> RMat {
    u.map(|z| z.re)
}

pub fn imag_part(u: &CMat) -> RMat {
    u.map(|z| z.im)
}

pub fn complexify(m: &RMat) -> CMat {
    m.map(|v| c(v, 0.0))
}

/// Standard symplectic form over interleaved `(x1, p1, ..., xn, pn)`.
pub fn symplectic_form(n_modes: usize) -> RMat {
    let mut omega = RMat::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

/// Real phase-space matrix of the passive transformation `a'_k = sum_l U_kl a_l`
/// with `a = x + i p`, in interleaved ordering.
pub fn passive_symplectic(u: &CMat) -> RMat {
    let n = u.nrows();
    let mut s = RMat::zeros(2 * n, 2 * n);
    for k in 0..n {
        for l in 0..n {
            let z = u[(k, l)];
            s[(2 * k, 2 * l)] = z.re;
            s[(2 * k, 2 * l + 1)] = -z.im;
            s[(2 * k + 1, 2 * l)] = z.im;
            s[(2 * k + 1, 2 * l + 1)] = z.re;
        }
    }
    s
}

/// Takagi factorization `M = U diag(sigma) U^T` of a complex symmetric matrix.
#[derive(Debug, Clone)]
pub struct Takagi {
    /// Non-negative values, sorted descending.
    pub values: Vec<f64>,
    pub vectors: CMat,
}

/// Computes the Takagi factorization through the real symmetric embedding
/// `H = [[Re M, Im M], [Im M, -Re M]]`. An eigenvector `(a; b)` of `H` with
/// eigenvalue `s` gives `z = a + i b` with `M conj(z) = s z`, and eigenvectors
/// for distinct positive eigenvalues are automatically orthonormal as complex
/// vectors. The null space of `M` is completed by complex Gram-Schmidt.
///
/// Columns are returned in descending order of `sigma`; inside each group of
/// equal values the basis is rotated into column-echelon form over the
/// interleaved rows `(Re U_1., Im U_1., Re U_2., ...)`, with the leading entry
/// of each column positive. This fixes the otherwise free real rotation within
/// degenerate blocks.
pub fn takagi(m: &CMat) -> Result<Takagi> {
    let n = m.nrows();
    if !m.is_square() {
        return Err(Error::InvalidInput("Takagi factorization needs a square matrix".into()));
    }
    if n == 0 {
        return Ok(Takagi { values: vec![], vectors: CMat::zeros(0, 0) });
    }
    let asym = max_abs(&(m - m.transpose()));
    let scale = max_abs(m).max(1.0);
    if asym > 1e-9 * scale {
        return Err(Error::InvalidInput(format!(
            "Takagi factorization needs a symmetric matrix (asymmetry {asym:.3e})"
        )));
    }

    let mut h = RMat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            h[(i, j)] = z.re;
            h[(i, n + j)] = z.im;
            h[(n + i, j)] = z.im;
            h[(n + i, n + j)] = -z.re;
        }
    }
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let zero_tol = 1e-10 * scale;
    let mut columns: Vec<DVector<Complex64>> = Vec::with_capacity(n);
    let mut values: Vec<f64> = Vec::with_capacity(n);
    for &idx in &order {
        if columns.len() == n {
            break;
        }
        let w = eig.eigenvalues[idx];
        if w < -zero_tol {
            break;
        }
        let v = eig.eigenvectors.column(idx);
        let mut z = DVector::from_fn(n, |k, _| c(v[k], v[n + k]));
        for q in &columns {
            let overlap = q.dotc(&z);
            z -= q * overlap;
        }
        let norm = z.norm();
        if norm < 0.5 {
            continue;
        }
        z /= c(norm, 0.0);
        columns.push(z);
        values.push(if w > zero_tol { w } else { 0.0 });
    }
    if columns.len() != n {
        return Err(Error::Decomposition { residual: f64::NAN });
    }

    let mut u = CMat::from_columns(&columns);
    let group_tol = 1e-9 * scale;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (values[start] - values[end]).abs() <= group_tol {
            end += 1;
        }
        echelonize_block(&mut u, start, end);
        start = end;
    }

    let d = CMat::from_diagonal(&DVector::from_iterator(n, values.iter().map(|&s| c(s, 0.0))));
    let residual = max_abs(&(m - &u * d * u.transpose()));
    if residual > 1e-8 * scale {
        return Err(Error::Decomposition { residual });
    }
    Ok(Takagi { values, vectors: u })
}

/// Real-orthogonal mixing of columns `start..end` of `u` into column-echelon form.
fn echelonize_block(u: &mut CMat, start: usize, end: usize) {
    let n = u.nrows();
    let k = end - start;
    // interleaved real rows, 2n x k
    let mut t = RMat::from_fn(2 * n, k, |r, j| {
        let z = u[(r / 2, start + j)];
        if r % 2 == 0 {
            z.re
        } else {
            z.im
        }
    });
    let mut mix = RMat::identity(k, k);
    let mut pivot = 0;
    for row in 0..2 * n {
        if pivot == k {
            break;
        }
        let seg: Vec<f64> = (pivot..k).map(|j| t[(row, j)]).collect();
        let norm = seg.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-9 {
            continue;
        }
        // Householder on columns pivot..k sending `seg` to (norm, 0, ..., 0).
        let mut v: Vec<f64> = seg.clone();
        v[0] -= norm;
        let vnorm2 = v.iter().map(|x| x * x).sum::<f64>();
        if vnorm2 > 1e-30 {
            let reflect = |m: &mut RMat| {
                for r in 0..m.nrows() {
                    let dot: f64 = (pivot..k).map(|j| m[(r, j)] * v[j - pivot]).sum();
                    let f = 2.0 * dot / vnorm2;
                    for j in pivot..k {
                        m[(r, j)] -= f * v[j - pivot];
                    }
                }
            };
            reflect(&mut t);
            reflect(&mut mix);
        }
        pivot += 1;
    }
    let block = u.columns(start, k).into_owned();
    let mixed = block * complexify(&mix);
    u.columns_mut(start, k).copy_from(&mixed);
}
