//! Canonical cluster states: the QND network itself, and its exact
//! replacement by off-line squeezers plus a single interferometer.
//!
//! The canonical network squeezes every mode by `r` in momentum and couples
//! neighbours with unit-gain QND gates, giving `x'_a = x_a` and
//! `p'_a = p_a + sum_{b in N_a} x_b`. On vacuum inputs this is the Bogoliubov
//! map `a' = A a + B a^dagger` with
//!
//! ```text
//! A_aa = cosh r,  B_aa = sinh r,  A_ab = B_ab = (i/2) e^r  (b in N_a)
//! ```
//!
//! Writing `A = U A_D V^dagger`, `B = U B_D V^T`, the input interferometer `V`
//! acts trivially on vacuum and what remains is squeezers `R_l` with
//! `e^{+-R_l} = sqrt(lambda^A_l) +- sqrt(lambda^B_l)` followed by `U`.
//!
//! `U` comes from the Takagi factorization of the symmetric matrix
//! `A B^T = U (A_D B_D) U^T`, which diagonalizes `A A^dagger` at the same time
//! and so avoids pairing singular vectors of `A` and `B` by hand.

use serde::{Deserialize, Serialize};

use crate::circuit::{Provenance, SynthesisResult};
use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, SymplecticOp};
use crate::graph::Graph;
use crate::linalg::{c, max_abs, takagi, unitarity_residual, CMat, I};

/// Relative tolerance of the `A = U A_D V^dagger` / `B = U B_D V^T` check.
pub const DECOMPOSITION_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct CanonicalLubo {
    pub a: CMat,
    pub b: CMat,
    pub r: f64,
}

impl CanonicalLubo {
    /// `(max |A A^dagger - B B^dagger - I|, max |A B^T - B A^T|)`.
    pub fn bogoliubov_residuals(&self) -> (f64, f64) {
        let n = self.a.nrows();
        let first = &self.a * self.a.adjoint() - &self.b * self.b.adjoint() - CMat::identity(n, n);
        let second = &self.a * self.b.transpose() - &self.b * self.a.transpose();
        (max_abs(&first), max_abs(&second))
    }
}

fn check_r(r: f64) -> Result<()> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::InvalidInput(format!("canonical squeezing must be finite and >= 0, got {r}")));
    }
    Ok(())
}

/// Phase-space simulation of the QND network on momentum-squeezed vacua.
pub fn qnd_network_state(g: &Graph, r: f64) -> Result<GaussianState> {
    check_r(r)?;
    let mut st = GaussianState::vacuum(g.n())?;
    for mode in 0..g.n() {
        st = st.apply(&SymplecticOp::Squeeze { mode, r })?;
    }
    for (a, b) in g.edges() {
        st = st.apply(&SymplecticOp::QndCz { mode_a: a, mode_b: b, gain: 1.0 })?;
    }
    Ok(st)
}

pub fn canonical_lubo(g: &Graph, r: f64) -> Result<CanonicalLubo> {
    check_r(r)?;
    let n = g.n();
    let coupling = I * (0.5 * r.exp());
    let mut a = CMat::from_diagonal_element(n, n, c(r.cosh(), 0.0));
    let mut b = CMat::from_diagonal_element(n, n, c(r.sinh(), 0.0));
    for (x, y) in g.edges() {
        for (i, j) in [(x, y), (y, x)] {
            a[(i, j)] = coupling;
            b[(i, j)] = coupling;
        }
    }
    Ok(CanonicalLubo { a, b, r })
}

pub fn decompose_canonical(lubo: &CanonicalLubo) -> Result<SynthesisResult> {
    let n = lubo.a.nrows();
    let m = &lubo.a * lubo.b.transpose();
    let tk = takagi(&m)?;
    let u = tk.vectors;
    // d = sqrt(lambda^A lambda^B) with lambda^A - lambda^B = 1
    let lambda_b: Vec<f64> = tk
        .values
        .iter()
        .map(|&d| 2.0 * d * d / (1.0 + (1.0 + 4.0 * d * d).sqrt()))
        .collect();
    let lambda_a: Vec<f64> = tk.values.iter().map(|&d| 0.5 * (1.0 + (1.0 + 4.0 * d * d).sqrt())).collect();

    let inv_a = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        lambda_a.iter().map(|&l| c(1.0 / l.sqrt(), 0.0)),
    ));
    let v = lubo.a.adjoint() * &u * inv_a;

    let a_d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(n, lambda_a.iter().map(|&l| c(l.sqrt(), 0.0))));
    let b_d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(n, lambda_b.iter().map(|&l| c(l.sqrt(), 0.0))));
    let scale = max_abs(&lubo.a).max(1.0);
    let res_a = max_abs(&(&lubo.a - &u * &a_d * v.adjoint())) / scale;
    let res_b = max_abs(&(&lubo.b - &u * &b_d * v.transpose())) / scale;
    let res_v = unitarity_residual(&v);
    let residual = res_a.max(res_b).max(res_v);
    if residual > DECOMPOSITION_TOL {
        return Err(Error::Decomposition { residual });
    }

    let squeezing = lambda_b.iter().map(|&l| l.sqrt().asinh()).collect();
    Ok(SynthesisResult {
        u,
        v: Some(v),
        squeezing,
        lambda_a,
        lambda_b,
        provenance: Provenance::Canonical { r: lubo.r },
    })
}

/// Canonical circuit for `g` at input squeezing `r`.
pub fn synthesize_canonical(g: &Graph, r: f64) -> Result<SynthesisResult> {
    decompose_canonical(&canonical_lubo(g, r)?)
}

/// Residuals of the closed-form conditions a canonical `U` must satisfy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalDiagnostics {
    /// `max |Im U_al - C_l sum_{b in N_a} Re U_bl|`, evaluated as
    /// `|den_l Im U_al - num_l sum Re U_bl| / max(|num_l|, |den_l|)` so that
    /// columns with `C_l` undefined (`r = 0`, `lambda^B_l = 0`) stay finite.
    pub im_condition: f64,
    /// `max |Re U_al (D_l - M_a) - sum_{b in N_a} sum_{k in N_b, k != a} Re U_kl|`.
    pub second_neighbor_condition: f64,
    /// `C_l(r)`; `None` where the denominator vanishes.
    pub c: Vec<Option<f64>>,
    pub d: Vec<f64>,
}

impl CanonicalDiagnostics {
    pub fn max(&self) -> f64 {
        self.im_condition.max(self.second_neighbor_condition)
    }
}

pub fn check_canonical_conditions(result: &SynthesisResult, g: &Graph, r: f64) -> Result<CanonicalDiagnostics> {
    let n = g.n();
    if result.n() != n {
        return Err(Error::ModeCountMismatch { expected: n, found: result.n() });
    }
    let re = result.u.map(|z| z.re);
    let im = result.u.map(|z| z.im);
    let neighbor_re = g.adjacency() * &re;
    let (sh, ch) = (r.sinh(), r.cosh());

    let mut c_vals = Vec::with_capacity(n);
    let mut d_vals = Vec::with_capacity(n);
    let mut im_condition = 0.0_f64;
    let mut second = 0.0_f64;
    for l in 0..n {
        let sa = result.lambda_a[l].sqrt();
        let sb = result.lambda_b[l].sqrt();
        let num = 0.5 * r.exp() * (sa + sb);
        let den = sa * sh + sb * ch;
        let norm = num.abs().max(den.abs());
        c_vals.push((den.abs() > 1e-300).then(|| num / den));
        // (lambda^B cosh^2 - lambda^A sinh^2) = lambda^B - sinh^2 when lambda^A - lambda^B = 1
        let d = 4.0 * (-2.0 * r).exp() * (result.lambda_b[l] - sh * sh);
        d_vals.push(d);
        for a in 0..n {
            let v = (den * im[(a, l)] - num * neighbor_re[(a, l)]).abs() / norm;
            im_condition = im_condition.max(v);
            let mut s = 0.0;
            for &b in g.neighbors(a) {
                for &k in g.neighbors(b) {
                    if k != a {
                        s += re[(k, l)];
                    }
                }
            }
            second = second.max((re[(a, l)] * (d - g.degree(a) as f64) - s).abs());
        }
    }
    Ok(CanonicalDiagnostics { im_condition, second_neighbor_condition: second, c: c_vals, d: d_vals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::measure_nullifiers;
    use crate::linalg::max_abs_real;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_mode_lubo_elements() {
        let g = Graph::chain(2).unwrap();
        let r = 0.4;
        let l = canonical_lubo(&g, r).unwrap();
        assert_abs_diff_eq!(l.a[(0, 0)].re, r.cosh(), epsilon = 1e-15);
        assert_abs_diff_eq!(l.a[(0, 1)].im, 0.5 * r.exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(l.b[(1, 1)].re, r.sinh(), epsilon = 1e-15);
        assert_eq!(l.a[(0, 1)], l.b[(0, 1)]);
        let (r1, r2) = l.bogoliubov_residuals();
        assert!(r1 < 1e-12 && r2 < 1e-12);
    }

    #[test]
    fn edgeless_lubo_is_diagonal() {
        let g = Graph::edgeless(3).unwrap();
        let l = canonical_lubo(&g, 0.7).unwrap();
        assert_eq!(l.a, CMat::from_diagonal_element(3, 3, c(0.7f64.cosh(), 0.0)));
        assert_eq!(l.b, CMat::from_diagonal_element(3, 3, c(0.7f64.sinh(), 0.0)));
    }

    #[test]
    fn negative_r_rejected() {
        assert!(canonical_lubo(&Graph::chain(2).unwrap(), -0.1).is_err());
        assert!(qnd_network_state(&Graph::chain(2).unwrap(), f64::NAN).is_err());
    }

    #[test]
    fn r_zero_edgeless_is_vacuum() {
        let g = Graph::edgeless(2).unwrap();
        assert_eq!(qnd_network_state(&g, 0.0).unwrap(), GaussianState::vacuum(2).unwrap());
        let res = synthesize_canonical(&g, 0.0).unwrap();
        assert!(max_abs(&(&res.u - CMat::identity(2, 2))) < 1e-12);
        assert_eq!(res.squeezing, vec![0.0, 0.0]);
    }

    #[test]
    fn edgeless_squeezing_equals_r() {
        let g = Graph::edgeless(3).unwrap();
        let res = synthesize_canonical(&g, 0.8).unwrap();
        for &s in &res.squeezing {
            assert_abs_diff_eq!(s, 0.8, epsilon = 1e-12);
        }
        // U diagonal up to sign
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(res.u[(i, j)].norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn two_mode_r_zero_golden_ratio() {
        let res = synthesize_canonical(&Graph::chain(2).unwrap(), 0.0).unwrap();
        for l in 0..2 {
            assert_abs_diff_eq!(res.lambda_a[l], 1.25, epsilon = 1e-12);
            assert_abs_diff_eq!(res.lambda_b[l], 0.25, epsilon = 1e-12);
            assert_abs_diff_eq!(res.squeezing[l], ((1.0 + 5f64.sqrt()) / 2.0).ln(), epsilon = 1e-12);
        }
    }

    #[test]
    fn two_mode_matches_asymmetric_beam_splitter() {
        for r in [0.0, 0.3, 1.0, 2.5] {
            let res = synthesize_canonical(&Graph::chain(2).unwrap(), r).unwrap();
            let diag = check_canonical_conditions(&res, &Graph::chain(2).unwrap(), r).unwrap();
            let cinv = 1.0 / diag.c[0].unwrap();
            let norm = 1.0 / (1.0 + cinv * cinv).sqrt();
            let expected = CMat::from_row_slice(2, 2, &[c(cinv * norm, 0.0), c(0.0, norm), c(0.0, norm), c(cinv * norm, 0.0)]);
            // equal up to a real orthogonal mixing of the degenerate pair
            let o = res.u.adjoint() * &expected;
            assert!(o.iter().all(|z| z.im.abs() < 1e-12), "r = {r}");
            assert!(max_abs(&(&res.u - &expected)) < 1e-12, "r = {r}: {}", res.u);
            assert_abs_diff_eq!(diag.d[0], 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(diag.d[1], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn large_r_approaches_fourier_beam_splitter() {
        let g = Graph::chain(2).unwrap();
        let r = 20.0;
        let res = synthesize_canonical(&g, r).unwrap();
        let diag = check_canonical_conditions(&res, &g, r).unwrap();
        for cv in &diag.c {
            assert_abs_diff_eq!(1.0 / cv.unwrap(), 1.0, epsilon = 1e-8);
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let limit = CMat::from_row_slice(2, 2, &[c(h, 0.0), c(0.0, h), c(0.0, h), c(h, 0.0)]);
        assert!(max_abs(&(&res.u - limit)) < 1e-8);
    }

    #[test]
    fn conditions_hold_on_chain4() {
        let g = Graph::chain(4).unwrap();
        let res = synthesize_canonical(&g, 0.5).unwrap();
        let diag = check_canonical_conditions(&res, &g, 0.5).unwrap();
        assert!(diag.im_condition < 1e-8, "{diag:?}");
        assert!(diag.second_neighbor_condition < 1e-8, "{diag:?}");
    }

    #[test]
    fn lambda_difference_and_v_identities() {
        for g in [Graph::chain(3).unwrap(), Graph::diamond(), Graph::sixmode()] {
            for r in [0.0, 0.3, 1.0] {
                let lubo = canonical_lubo(&g, r).unwrap();
                let res = decompose_canonical(&lubo).unwrap();
                for (a, b) in res.lambda_a.iter().zip(&res.lambda_b) {
                    assert_abs_diff_eq!(a - b, 1.0, epsilon = 1e-9);
                }
                let v = res.v.as_ref().unwrap();
                assert!(unitarity_residual(v) < 1e-9);
                // V = B^T U* B_D^{-1} on columns with lambda^B > 0
                let alt = lubo.b.transpose() * res.u.conjugate();
                for l in 0..g.n() {
                    if res.lambda_b[l] > 1e-6 {
                        let col = alt.column(l) / c(res.lambda_b[l].sqrt(), 0.0);
                        assert!((col - v.column(l)).camax() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn linear_optics_reproduces_qnd_network() {
        for g in [Graph::chain(4).unwrap(), Graph::diamond(), Graph::multirail(3).unwrap()] {
            for r in [0.0, 0.3, 1.0] {
                let res = synthesize_canonical(&g, r).unwrap();
                let lo = res.prepare_state().unwrap();
                let qnd = qnd_network_state(&g, r).unwrap();
                assert!(max_abs_real(&(lo.cov() - qnd.cov())) < 1e-8);
            }
        }
    }

    #[test]
    fn canonical_nullifiers_and_bias() {
        let g = Graph::sixmode();
        for r in [0.3, 1.0] {
            let st = qnd_network_state(&g, r).unwrap();
            let rep = measure_nullifiers(&g, &st).unwrap();
            for v in rep.variances {
                assert_abs_diff_eq!(v, (-2.0 * r).exp(), epsilon = 1e-12);
            }
            for a in 0..g.n() {
                let vx = st.cov()[(2 * a, 2 * a)] / 0.25;
                let vp = st.cov()[(2 * a + 1, 2 * a + 1)] / 0.25;
                assert_abs_diff_eq!(vx, (2.0 * r).exp(), epsilon = 1e-9);
                assert_abs_diff_eq!(vp, (-2.0 * r).exp() + g.degree(a) as f64 * (2.0 * r).exp(), epsilon = 1e-9);
            }
        }
    }
}
