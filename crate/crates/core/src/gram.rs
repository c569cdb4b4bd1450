//! Cluster-type circuits from real row vectors.
//!
//! Writing `Re U = alpha` and imposing `Im U = Adj alpha` (the condition that
//! cancels every anti-squeezed term in the nullifiers), unitarity of
//! `U = alpha + i Adj alpha` reads
//!
//! ```text
//! G + Adj G Adj + i (Adj G - G Adj) = I,   G = alpha alpha^T
//! ```
//!
//! so `G` commutes with `Adj` and `G (I + Adj^2) = I`: the Gram matrix of the
//! row vectors is fixed by the graph to `G = (I + Adj^2)^{-1}`. Any real
//! factor `alpha alpha^T = G` gives a valid circuit.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circuit::{lambdas_from_squeezing, Provenance, SynthesisResult};
use crate::error::{Error, Result};
use crate::graph::{cluster_condition_residual, excess_noise_weights, Graph};
use crate::linalg::{c, max_abs_real, unitarity_residual, CMat, RMat};

/// Acceptance threshold for `|Im U - Adj Re U|`.
pub const CLUSTER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix(pub RMat);

/// Row `k` is the vector `alpha_k`, i.e. `Re U_k.`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMatrix(pub RMat);

impl GramMatrix {
    pub fn matrix(&self) -> &RMat {
        &self.0
    }

    /// `(max |G Adj - Adj G|, max |G + Adj G Adj - I|)`.
    pub fn identity_residuals(&self, g: &Graph) -> (f64, f64) {
        let adj = g.adjacency();
        let n = g.n();
        let comm = &self.0 * &adj - &adj * &self.0;
        let unit = &self.0 + &adj * &self.0 * &adj - RMat::identity(n, n);
        (max_abs_real(&comm), max_abs_real(&unit))
    }
}

impl AlphaMatrix {
    pub fn matrix(&self) -> &RMat {
        &self.0
    }

    pub fn gram(&self) -> RMat {
        &self.0 * self.0.transpose()
    }

    pub fn gram_residual(&self, g: &GramMatrix) -> f64 {
        max_abs_real(&(self.gram() - g.matrix()))
    }

    /// `alpha -> alpha Q`; keeps the Gram matrix for orthogonal `Q`.
    pub fn rotated(&self, q: &RMat) -> AlphaMatrix {
        AlphaMatrix(&self.0 * q)
    }
}

pub fn derive_gram(g: &Graph) -> GramMatrix {
    let adj = g.adjacency();
    let n = g.n();
    let m = RMat::identity(n, n) + &adj * &adj;
    // I + Adj^2 is symmetric with eigenvalues >= 1
    let inv = m.cholesky().expect("I + Adj^2 is positive definite").inverse();
    let sym = (&inv + inv.transpose()) * 0.5;
    GramMatrix(sym)
}

/// The hand-picked example solutions, stored verbatim.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaperFixture {
    TwoMode,
    Chain4,
    Diamond,
    SixMode,
}

impl PaperFixture {
    pub const ALL: [PaperFixture; 4] = [PaperFixture::TwoMode, PaperFixture::Chain4, PaperFixture::Diamond, PaperFixture::SixMode];

    pub fn name(self) -> &'static str {
        match self {
            PaperFixture::TwoMode => "paper:twomode",
            PaperFixture::Chain4 => "paper:chain4",
            PaperFixture::Diamond => "paper:diamond",
            PaperFixture::SixMode => "paper:sixmode",
        }
    }

    pub fn graph(self) -> Graph {
        match self {
            PaperFixture::TwoMode => Graph::chain(2).expect("static graph"),
            PaperFixture::Chain4 => Graph::chain(4).expect("static graph"),
            PaperFixture::Diamond => Graph::diamond(),
            PaperFixture::SixMode => Graph::sixmode(),
        }
    }

    pub fn alpha(self) -> AlphaMatrix {
        let s2 = 2f64.sqrt();
        let s3 = 3f64.sqrt();
        let s5 = 5f64.sqrt();
        let s10 = 10f64.sqrt();
        let s15 = 15f64.sqrt();
        let s20 = 20f64.sqrt();
        let m35 = 0.6f64.sqrt();
        #[rustfmt::skip]
        let rows: (usize, Vec<f64>) = match self {
            PaperFixture::TwoMode => (2, vec![
                1.0 / s2, 0.0,
                0.0, 1.0 / s2,
            ]),
            PaperFixture::Chain4 => (4, vec![
                1.0 / s2, 1.0 / s10, 0.0, 0.0,
                0.0, 0.0, -2.0 / s10, 0.0,
                0.0, -2.0 / s10, 0.0, 0.0,
                0.0, 0.0, 1.0 / s10, -1.0 / s2,
            ]),
            PaperFixture::Diamond => (4, vec![
                1.0 / s3, -2.0 / s15, 0.0, 0.0,
                0.0, 0.0, 1.0 / s3, -2.0 / s15,
                0.0, 0.0, 0.0, m35,
                0.0, m35, 0.0, 0.0,
            ]),
            // vertices 1, 3, 5 then 2, 4, 6 in the source; stored by vertex
            PaperFixture::SixMode => (6, vec![
                1.0 / s5, 1.0 / s2, 0.0, 0.0, 0.0, 0.0,
                0.0, 0.0, 0.0, -1.0 / s20, 0.0, 0.5,
                1.0 / s5, -1.0 / s2, 0.0, 0.0, 0.0, 0.0,
                0.0, 0.0, 0.0, 1.0 / s5, 1.0 / s2, 0.0,
                -1.0 / s20, 0.0, 0.5, 0.0, 0.0, 0.0,
                0.0, 0.0, 0.0, 1.0 / s5, -1.0 / s2, 0.0,
            ]),
        };
        AlphaMatrix(RMat::from_row_slice(rows.0, rows.0, &rows.1))
    }
}

impl FromStr for PaperFixture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.strip_prefix("paper:").unwrap_or(s);
        match key {
            "twomode" => Ok(PaperFixture::TwoMode),
            "chain4" => Ok(PaperFixture::Chain4),
            "diamond" => Ok(PaperFixture::Diamond),
            "sixmode" => Ok(PaperFixture::SixMode),
            _ => Err(Error::UnknownFixture(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FactorStrategy {
    /// Lower-triangular factor with positive diagonal.
    Recursive,
    /// Triangular construction visiting vertices in `order`: the `j`-th
    /// visited vertex only uses columns `0..=j`.
    RecursiveOrdered(Vec<usize>),
    Paper(PaperFixture),
}

/// Row-by-row construction: `alpha_1 = (sqrt(G_11), 0, ...)`, then each
/// following vector is fixed by its overlaps with the earlier ones and its
/// own squared norm.
pub fn factor_gram(g: &GramMatrix, strategy: &FactorStrategy) -> Result<AlphaMatrix> {
    let n = g.0.nrows();
    match strategy {
        FactorStrategy::Recursive => recursive_factor(&g.0, &(0..n).collect::<Vec<_>>()),
        FactorStrategy::RecursiveOrdered(order) => {
            let mut seen = vec![false; n];
            if order.len() != n || order.iter().any(|&v| v >= n || std::mem::replace(&mut seen[v], true)) {
                return Err(Error::InvalidInput("factor order must be a permutation of the vertices".into()));
            }
            recursive_factor(&g.0, order)
        }
        FactorStrategy::Paper(fx) => {
            let alpha = fx.alpha();
            if alpha.0.nrows() != n {
                return Err(Error::ModeCountMismatch { expected: n, found: alpha.0.nrows() });
            }
            Ok(alpha)
        }
    }
}

fn recursive_factor(gram: &RMat, order: &[usize]) -> Result<AlphaMatrix> {
    let n = gram.nrows();
    let mut alpha = RMat::zeros(n, n);
    for (j, &vj) in order.iter().enumerate() {
        // overlaps with earlier vectors fix components 0..j
        for (i, &vi) in order.iter().enumerate().take(j) {
            let partial: f64 = (0..i).map(|k| alpha[(vj, k)] * alpha[(vi, k)]).sum();
            alpha[(vj, i)] = (gram[(vj, vi)] - partial) / alpha[(vi, i)];
        }
        let taken: f64 = (0..j).map(|k| alpha[(vj, k)].powi(2)).sum();
        let pivot = gram[(vj, vj)] - taken;
        if pivot.is_nan() || pivot <= 0.0 {
            return Err(Error::NotPositiveDefinite { minor: j + 1, pivot });
        }
        alpha[(vj, j)] = pivot.sqrt();
    }
    Ok(AlphaMatrix(alpha))
}

/// Tolerance on unitarity of the assembled circuit.
pub const ASSEMBLY_TOL: f64 = 1e-9;

/// `U_kl = alpha_kl + i sum_{b in N_k} alpha_bl`.
pub fn assemble_unitary(g: &Graph, alpha: &AlphaMatrix) -> Result<CMat> {
    let n = g.n();
    if alpha.0.nrows() != n || alpha.0.ncols() != n {
        return Err(Error::ModeCountMismatch { expected: n, found: alpha.0.nrows() });
    }
    let im = g.adjacency() * &alpha.0;
    let u = CMat::from_fn(n, n, |k, l| c(alpha.0[(k, l)], im[(k, l)]));
    let residual = unitarity_residual(&u);
    if residual > ASSEMBLY_TOL {
        return Err(Error::NotUnitary { residual });
    }
    Ok(u)
}

/// `max_{a,l} |Im U_al - sum_{b in N_a} Re U_bl|`; accepted iff `<= CLUSTER_TOL`.
pub fn check_cluster_conditions(u: &CMat, g: &Graph) -> Result<f64> {
    cluster_condition_residual(g, u)
}

/// Derives, factors and assembles a cluster-type circuit with the given
/// per-column input squeezing.
pub fn synthesize_gram(g: &Graph, strategy: &FactorStrategy, squeezing: &[f64]) -> Result<SynthesisResult> {
    if squeezing.len() != g.n() {
        return Err(Error::ModeCountMismatch { expected: g.n(), found: squeezing.len() });
    }
    let gram = derive_gram(g);
    let alpha = factor_gram(&gram, strategy)?;
    let residual = alpha.gram_residual(&gram);
    if residual > 1e-9 {
        return Err(Error::Decomposition { residual });
    }
    let u = assemble_unitary(g, &alpha)?;
    let (lambda_a, lambda_b) = lambdas_from_squeezing(squeezing);
    let fixture = match strategy {
        FactorStrategy::Paper(fx) => Some(fx.name().to_string()),
        _ => None,
    };
    Ok(SynthesisResult {
        u,
        v: None,
        squeezing: squeezing.to_vec(),
        lambda_a,
        lambda_b,
        provenance: Provenance::Gram { alpha: alpha.0, fixture },
    })
}

/// Permutes the columns of a circuit: column `l` of the result is column
/// `perm[l]` of the input, carrying its squeezing and alpha column along.
pub fn permute_columns(result: &SynthesisResult, perm: &[usize]) -> Result<SynthesisResult> {
    let n = result.n();
    let mut seen = vec![false; n];
    if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::InvalidInput("column permutation must be a permutation of 1..n".into()));
    }
    let u = CMat::from_fn(n, n, |i, j| result.u[(i, perm[j])]);
    let pick = |v: &[f64]| perm.iter().map(|&p| v[p]).collect::<Vec<_>>();
    let provenance = match &result.provenance {
        Provenance::Gram { alpha, fixture } => Provenance::Gram {
            alpha: RMat::from_fn(n, n, |i, j| alpha[(i, perm[j])]),
            fixture: fixture.clone(),
        },
        other => other.clone(),
    };
    Ok(SynthesisResult {
        u,
        v: None,
        squeezing: pick(&result.squeezing),
        lambda_a: pick(&result.lambda_a),
        lambda_b: pick(&result.lambda_b),
        provenance,
    })
}

/// Uniform squeezing `R` for which the largest closed-form nullifier excess
/// noise of a cluster-type circuit equals `target` (vacuum units).
pub fn uniform_squeezing_for_max_excess(g: &Graph, alpha: &AlphaMatrix, target: f64) -> Result<f64> {
    if target.is_nan() || target <= 0.0 {
        return Err(Error::InvalidInput("target excess noise must be positive".into()));
    }
    let w = excess_noise_weights(g, &alpha.0);
    let worst = w.row_iter().map(|r| r.norm_squared()).fold(0.0, f64::max);
    Ok(0.5 * (worst / target).ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson(pub Vec<Vec<f64>>);

impl From<&RMat> for MatrixJson {
    fn from(m: &RMat) -> Self {
        MatrixJson(m.row_iter().map(|r| r.iter().cloned().collect()).collect())
    }
}

impl MatrixJson {
    pub fn to_matrix(&self) -> Result<RMat> {
        let n = self.0.len();
        let m = self.0.first().map_or(0, |r| r.len());
        if self.0.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidInput("ragged matrix".into()));
        }
        Ok(RMat::from_fn(n, m, |i, j| self.0[i][j]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{excess_noise, measure_nullifiers};
    use approx::assert_abs_diff_eq;

    fn assert_matrix(actual: &RMat, expected: &[f64], tol: f64) {
        let n = actual.nrows();
        let e = RMat::from_row_slice(n, n, expected);
        assert!(max_abs_real(&(actual - &e)) < tol, "\n{actual}\nvs\n{e}");
    }

    #[test]
    fn gram_chain4() {
        let g = derive_gram(&Graph::chain(4).unwrap());
        #[rustfmt::skip]
        assert_matrix(g.matrix(), &[
            0.6, 0.0, -0.2, 0.0,
            0.0, 0.4, 0.0, -0.2,
            -0.2, 0.0, 0.4, 0.0,
            0.0, -0.2, 0.0, 0.6,
        ], 1e-12);
    }

    #[test]
    fn gram_diamond() {
        let g = derive_gram(&Graph::diamond());
        #[rustfmt::skip]
        assert_matrix(g.matrix(), &[
            0.6, 0.0, 0.0, -0.4,
            0.0, 0.6, -0.4, 0.0,
            0.0, -0.4, 0.6, 0.0,
            -0.4, 0.0, 0.0, 0.6,
        ], 1e-12);
    }

    #[test]
    fn gram_two_vertex() {
        let g = derive_gram(&Graph::chain(2).unwrap());
        assert_matrix(g.matrix(), &[0.5, 0.0, 0.0, 0.5], 1e-12);
    }

    #[test]
    fn gram_identities_hold() {
        for n in 1..=5 {
            for graph in crate::graph::connected_graphs(n) {
                let g = derive_gram(&graph);
                let (comm, unit) = g.identity_residuals(&graph);
                assert!(comm < 1e-12 && unit < 1e-12);
            }
        }
    }

    #[test]
    fn recursive_factor_is_triangular() {
        let gram = derive_gram(&Graph::sixmode());
        let alpha = factor_gram(&gram, &FactorStrategy::Recursive).unwrap();
        for i in 0..6 {
            assert!(alpha.0[(i, i)] > 0.0);
            for j in (i + 1)..6 {
                assert_eq!(alpha.0[(i, j)], 0.0);
            }
        }
        assert!(alpha.gram_residual(&gram) < 1e-12);
    }

    #[test]
    fn ordered_factor_places_vertices_first() {
        let graph = Graph::diamond();
        let gram = derive_gram(&graph);
        let alpha = factor_gram(&gram, &FactorStrategy::RecursiveOrdered(vec![0, 3, 1, 2])).unwrap();
        assert!(alpha.gram_residual(&gram) < 1e-12);
        for l in 2..4 {
            assert_eq!(alpha.0[(0, l)], 0.0);
            assert_eq!(alpha.0[(3, l)], 0.0);
        }
        assert!(factor_gram(&gram, &FactorStrategy::RecursiveOrdered(vec![0, 0, 1, 2])).is_err());
    }

    #[test]
    fn non_positive_definite_reports_minor() {
        let bad = GramMatrix(RMat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]));
        match factor_gram(&bad, &FactorStrategy::Recursive) {
            Err(Error::NotPositiveDefinite { minor, pivot }) => {
                assert_eq!(minor, 2);
                assert_abs_diff_eq!(pivot, -3.0, epsilon = 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fixtures_match_their_graphs() {
        for fx in PaperFixture::ALL {
            let graph = fx.graph();
            let gram = derive_gram(&graph);
            let alpha = fx.alpha();
            assert!(alpha.gram_residual(&gram) < 1e-12, "{}", fx.name());
            let u = assemble_unitary(&graph, &alpha).unwrap();
            assert!(unitarity_residual(&u) < 1e-12);
            assert_eq!(check_cluster_conditions(&u, &graph).unwrap(), 0.0);
            assert_eq!(fx.name().parse::<PaperFixture>().unwrap(), fx);
        }
        assert!("paper:tshape".parse::<PaperFixture>().is_err());
    }

    #[test]
    fn two_mode_assembles_to_fourier_beam_splitter() {
        let graph = Graph::chain(2).unwrap();
        let u = assemble_unitary(&graph, &PaperFixture::TwoMode.alpha()).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let expected = CMat::from_row_slice(2, 2, &[c(h, 0.0), c(0.0, h), c(0.0, h), c(h, 0.0)]);
        assert!(crate::linalg::max_abs(&(u - expected)) < 1e-15);
    }

    #[test]
    fn inconsistent_alpha_rejected() {
        let graph = Graph::chain(2).unwrap();
        let alpha = AlphaMatrix(RMat::identity(2, 2));
        assert!(matches!(assemble_unitary(&graph, &alpha), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn identity_violates_cluster_condition() {
        let graph = Graph::chain(3).unwrap();
        assert!(check_cluster_conditions(&CMat::identity(3, 3), &graph).unwrap() >= 1.0);
    }

    #[test]
    fn canonical_circuit_is_not_cluster_type_at_finite_r() {
        let graph = Graph::chain(2).unwrap();
        let finite = crate::canonical::synthesize_canonical(&graph, 0.5).unwrap();
        assert!(check_cluster_conditions(&finite.u, &graph).unwrap() > 1e-3);
        let large = crate::canonical::synthesize_canonical(&graph, 15.0).unwrap();
        assert!(check_cluster_conditions(&large.u, &graph).unwrap() < 1e-8);
    }

    #[test]
    fn chain4_simulation_matches_closed_form() {
        let graph = Graph::chain(4).unwrap();
        let r = [0.3, 1.1, 0.7, 2.0];
        let res = synthesize_gram(&graph, &FactorStrategy::Paper(PaperFixture::Chain4), &r).unwrap();
        let sim = measure_nullifiers(&graph, &res.prepare_state().unwrap()).unwrap();
        let closed = excess_noise(&graph, &res.u, &r).unwrap();
        for (s, c) in sim.variances.iter().zip(&closed) {
            assert_abs_diff_eq!(s, c, epsilon = 1e-9);
        }
    }

    #[test]
    fn two_mode_three_db_gives_unit_excess() {
        let graph = Graph::chain(2).unwrap();
        let r = uniform_squeezing_for_max_excess(&graph, &PaperFixture::TwoMode.alpha(), 1.0).unwrap();
        assert_abs_diff_eq!(r, 0.5 * 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(crate::gaussian::nats_to_db(r), 3.0103, epsilon = 1e-4);
    }

    #[test]
    fn column_permutation_carries_squeezing() {
        let graph = Graph::chain(3).unwrap();
        let res = synthesize_gram(&graph, &FactorStrategy::Recursive, &[0.1, 0.2, 0.3]).unwrap();
        let p = permute_columns(&res, &[2, 0, 1]).unwrap();
        assert_eq!(p.squeezing, vec![0.3, 0.1, 0.2]);
        let a = measure_nullifiers(&graph, &res.prepare_state().unwrap()).unwrap();
        let b = measure_nullifiers(&graph, &p.prepare_state().unwrap()).unwrap();
        for (x, y) in a.variances.iter().zip(&b.variances) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }
}
