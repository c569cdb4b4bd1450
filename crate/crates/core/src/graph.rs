//! Cluster graphs, their nullifiers, and the closed-form excess noise of
//! linear-optics cluster circuits.
//!
//! Vertices are 0-based internally and 1-based in every serialized form.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::GaussianState;
use crate::linalg::{imag_part, real_part, CMat, RMat, RVec};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from 0-based edges.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph needs at least one vertex".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!("edge ({}, {}) out of range for {n} vertices", a + 1, b + 1)));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop on vertex {}", a + 1)));
            }
            let e = (a.min(b), a.max(b));
            if !set.insert(e) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({}, {})", e.0 + 1, e.1 + 1)));
            }
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &set {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        Ok(Graph { n, edges: set, neighbors })
    }

    /// Builds a graph from 1-based edges, as written in files.
    pub fn from_one_based(n: usize, edges: &[[usize; 2]]) -> Result<Self> {
        let mut zero = Vec::with_capacity(edges.len());
        for &[a, b] in edges {
            if a == 0 || b == 0 {
                return Err(Error::InvalidGraph("vertex ids are 1-based".into()));
            }
            zero.push((a - 1, b - 1));
        }
        Graph::new(n, zero)
    }

    pub fn edgeless(n: usize) -> Result<Self> {
        Graph::new(n, [])
    }

    pub fn chain(n: usize) -> Result<Self> {
        Graph::new(n, (1..n).map(|k| (k - 1, k)))
    }

    /// Four-cycle 1-2-4-3-1.
    pub fn diamond() -> Self {
        Graph::new(4, [(0, 1), (0, 2), (1, 3), (2, 3)]).expect("static graph")
    }

    /// Input node 1, `m` middle nodes, output node `m + 2`; every middle node
    /// is joined to both ends. `multirail(1)` is the 3-chain and
    /// `multirail(2)` the diamond (up to labels).
    pub fn multirail(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidGraph("multirail needs at least one rail".into()));
        }
        let out = m + 1;
        Graph::new(m + 2, (1..=m).flat_map(|i| [(0, i), (i, out)]))
    }

    /// Six-mode graph with edges 1-2, 2-3, 2-5, 4-5, 5-6.
    pub fn sixmode() -> Self {
        Graph::new(6, [(0, 1), (1, 2), (1, 4), (3, 4), (4, 5)]).expect("static graph")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// 0-based, each edge once with `a < b`, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, a: usize) -> &[usize] {
        &self.neighbors[a]
    }

    pub fn degree(&self, a: usize) -> usize {
        self.neighbors[a].len()
    }

    pub fn adjacency(&self) -> RMat {
        let mut adj = RMat::zeros(self.n, self.n);
        for &(a, b) in &self.edges {
            adj[(a, b)] = 1.0;
            adj[(b, a)] = 1.0;
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &self.neighbors[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Relabels vertex `v` as `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n || perm.iter().collect::<BTreeSet<_>>().len() != self.n || perm.iter().any(|&p| p >= self.n) {
            return Err(Error::InvalidInput("not a permutation of the vertices".into()));
        }
        Graph::new(self.n, self.edges.iter().map(|&(a, b)| (perm[a], perm[b])))
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson { n: self.n, edges: self.edges.iter().map(|&(a, b)| [a + 1, b + 1]).collect() }
    }

    pub fn from_json(json: &GraphJson) -> Result<Self> {
        Graph::from_one_based(json.n, &json.edges)
    }
}

/// `{"n": int, "edges": [[a, b], ...]}` with 1-based vertices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphJson {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
}

/// Every labelled connected graph on `n` vertices.
pub fn connected_graphs(n: usize) -> Vec<Graph> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| ((a + 1)..n).map(move |b| (a, b))).collect();
    assert!(pairs.len() < 32, "enumeration limited to n <= 8");
    (0u32..(1u32 << pairs.len()))
        .filter_map(|mask| {
            let edges = pairs.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, &e)| e);
            let g = Graph::new(n, edges).ok()?;
            g.is_connected().then_some(g)
        })
        .collect()
}

/// `p_a - sum_{b in N_a} x_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Nullifier {
    pub vertex: usize,
    /// Interleaved `(x1, p1, ...)` coefficients.
    pub coeffs: RVec,
}

impl Nullifier {
    pub fn support(&self) -> usize {
        self.coeffs.iter().filter(|c| **c != 0.0).count()
    }
}

pub fn nullifiers(g: &Graph) -> Vec<Nullifier> {
    (0..g.n())
        .map(|a| {
            let mut coeffs = RVec::zeros(2 * g.n());
            coeffs[2 * a + 1] = 1.0;
            for &b in g.neighbors(a) {
                coeffs[2 * b] = -1.0;
            }
            Nullifier { vertex: a, coeffs }
        })
        .collect()
}

/// `max_{a,l} |Im U_al - sum_{b in N_a} Re U_bl|`.
pub fn cluster_condition_residual(g: &Graph, u: &CMat) -> Result<f64> {
    check_dims(g, u)?;
    let diff = imag_part(u) - g.adjacency() * real_part(u);
    Ok(diff.amax())
}

/// Tolerance on the cluster condition before [`excess_noise`] refuses a circuit.
pub const CLUSTER_CONDITION_TOL: f64 = 1e-6;

/// Per-vertex weights `w_al` such that the excess noise of nullifier `a` is
/// `sum_l w_al^2 e^{-2 R_l}`: `w_al = Re U_al (1 + M_a) + sum_{b in N_a}
/// sum_{k in N_b, k != a} Re U_kl`, second neighbours counted with multiplicity.
pub fn excess_noise_weights(g: &Graph, re_u: &RMat) -> RMat {
    let n = g.n();
    let mut w = RMat::zeros(n, n);
    for a in 0..n {
        let mut row = re_u.row(a) * (1.0 + g.degree(a) as f64);
        for &b in g.neighbors(a) {
            for &k in g.neighbors(b) {
                if k != a {
                    row += re_u.row(k);
                }
            }
        }
        w.set_row(a, &row);
    }
    w
}

/// Closed-form nullifier excess noise (vacuum units) of the state made by
/// squeezing input `l` by `squeezing[l]` and sending it through `u`.
pub fn excess_noise(g: &Graph, u: &CMat, squeezing: &[f64]) -> Result<Vec<f64>> {
    check_dims(g, u)?;
    if squeezing.len() != g.n() {
        return Err(Error::ModeCountMismatch { expected: g.n(), found: squeezing.len() });
    }
    let residual = cluster_condition_residual(g, u)?;
    if residual > CLUSTER_CONDITION_TOL {
        return Err(Error::InvalidCircuit { residual });
    }
    Ok(excess_noise_from_weights(&excess_noise_weights(g, &real_part(u)), squeezing))
}

pub fn excess_noise_from_weights(w: &RMat, squeezing: &[f64]) -> Vec<f64> {
    (0..w.nrows())
        .map(|a| {
            (0..w.ncols())
                .map(|l| w[(a, l)].powi(2) * (-2.0 * squeezing[l]).exp())
                .sum()
        })
        .collect()
}

fn check_dims(g: &Graph, u: &CMat) -> Result<()> {
    if u.nrows() != g.n() || u.ncols() != g.n() {
        return Err(Error::ModeCountMismatch { expected: g.n(), found: u.nrows() });
    }
    Ok(())
}

/// Per-vertex nullifier variances in vacuum units.
#[derive(Debug, Clone, PartialEq)]
pub struct NullifierReport {
    pub variances: Vec<f64>,
}

impl NullifierReport {
    pub fn new(variances: Vec<f64>) -> Self {
        NullifierReport { variances }
    }

    pub fn max(&self) -> f64 {
        self.variances.iter().cloned().fold(0.0, f64::max)
    }

    pub fn mean(&self) -> f64 {
        if self.variances.is_empty() {
            return 0.0;
        }
        self.variances.iter().sum::<f64>() / self.variances.len() as f64
    }

    pub fn to_json(&self) -> NullifierReportJson {
        NullifierReportJson {
            variances: self.variances.iter().enumerate().map(|(a, &v)| (a + 1, v)).collect(),
            max: self.max(),
            mean: self.mean(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullifierReportJson {
    /// 1-based vertex -> variance.
    pub variances: BTreeMap<usize, f64>,
    pub max: f64,
    pub mean: f64,
}

pub fn measure_nullifiers(g: &Graph, state: &GaussianState) -> Result<NullifierReport> {
    if state.n_modes() != g.n() {
        return Err(Error::ModeCountMismatch { expected: g.n(), found: state.n_modes() });
    }
    let variances = nullifiers(g)
        .iter()
        .map(|nl| state.nullifier_variance(&nl.coeffs))
        .collect::<Result<Vec<_>>>()?;
    // quadratic forms of a PSD matrix; clamp rounding below zero
    Ok(NullifierReport::new(variances.into_iter().map(|v| v.max(0.0)).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn two_mode_circuit() -> CMat {
        let h = FRAC_1_SQRT_2;
        CMat::from_row_slice(2, 2, &[c(h, 0.0), c(0.0, h), c(0.0, h), c(h, 0.0)])
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(Graph::new(2, [(0, 0)]).is_err());
        assert!(Graph::new(2, [(0, 1), (1, 0)]).is_err());
        assert!(Graph::new(2, [(0, 2)]).is_err());
        assert!(Graph::new(0, []).is_err());
        assert!(Graph::from_one_based(2, &[[0, 1]]).is_err());
    }

    #[test]
    fn two_vertex_nullifiers() {
        let g = Graph::chain(2).unwrap();
        let ns = nullifiers(&g);
        // p1 - x2
        assert_eq!(ns[0].coeffs.as_slice(), &[0.0, 1.0, -1.0, 0.0]);
        // p2 - x1
        assert_eq!(ns[1].coeffs.as_slice(), &[-1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn edgeless_nullifiers_are_momenta() {
        let ns = nullifiers(&Graph::edgeless(3).unwrap());
        for (a, nl) in ns.iter().enumerate() {
            assert_eq!(nl.support(), 1);
            assert_eq!(nl.coeffs[2 * a + 1], 1.0);
        }
    }

    #[test]
    fn chain_middle_support() {
        let ns = nullifiers(&Graph::chain(4).unwrap());
        assert_eq!(ns[1].support(), 3);
        assert_eq!(ns[0].support(), 2);
    }

    #[test]
    fn two_mode_excess_noise() {
        let g = Graph::chain(2).unwrap();
        let r = [0.7, 1.3];
        let e = excess_noise(&g, &two_mode_circuit(), &r).unwrap();
        assert_abs_diff_eq!(e[0], 2.0 * (-2.0 * r[0]).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(e[1], 2.0 * (-2.0 * r[1]).exp(), epsilon = 1e-15);
    }

    #[test]
    fn diamond_vertex_two_with_high_first_columns() {
        let s3 = 3f64.sqrt();
        let s15 = 15f64.sqrt();
        let alpha = RMat::from_row_slice(
            4,
            4,
            &[
                1.0 / s3, -2.0 / s15, 0.0, 0.0,
                0.0, 0.0, 1.0 / s3, -2.0 / s15,
                0.0, 0.0, 0.0, (0.6f64).sqrt(),
                0.0, (0.6f64).sqrt(), 0.0, 0.0,
            ],
        );
        let g = Graph::diamond();
        let w = excess_noise_weights(&g, &alpha);
        // 3 alpha_2 + 2 alpha_3: column 3 weight sqrt(3), column 4 cancels
        assert_abs_diff_eq!(w[(1, 2)].powi(2), 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(w[(1, 3)], 0.0, epsilon = 1e-14);
        let r = 0.9;
        let e = excess_noise_from_weights(&w, &[40.0, 40.0, r, 5.0]);
        assert_abs_diff_eq!(e[1], 3.0 * (-2.0 * r).exp(), epsilon = 1e-12);
    }

    #[test]
    fn infinite_squeezing_limit() {
        let e = excess_noise(&Graph::chain(2).unwrap(), &two_mode_circuit(), &[400.0, 400.0]).unwrap();
        assert_eq!(e, vec![0.0, 0.0]);
    }

    #[test]
    fn excess_noise_rejects_invalid_circuit() {
        let g = Graph::chain(2).unwrap();
        assert!(matches!(
            excess_noise(&g, &CMat::identity(2, 2), &[1.0, 1.0]),
            Err(Error::InvalidCircuit { .. })
        ));
    }

    #[test]
    fn vacuum_nullifiers() {
        let g = Graph::chain(2).unwrap();
        let rep = measure_nullifiers(&g, &GaussianState::vacuum(2).unwrap()).unwrap();
        assert_eq!(rep.variances, vec![2.0, 2.0]);
        assert!(measure_nullifiers(&g, &GaussianState::vacuum(3).unwrap()).is_err());
    }

    #[test]
    fn enumeration_counts() {
        // labelled connected graphs: 1, 1, 4, 38, 728
        let counts: Vec<usize> = (1..=5).map(|n| connected_graphs(n).len()).collect();
        assert_eq!(counts, vec![1, 1, 4, 38, 728]);
    }

    #[test]
    fn json_is_one_based_and_sorted() {
        let g = Graph::new(3, [(2, 1), (0, 1)]).unwrap();
        let text = serde_json::to_string(&g.to_json()).unwrap();
        assert_eq!(text, r#"{"n":3,"edges":[[1,2],[2,3]]}"#);
        let back = Graph::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn multirail_shapes() {
        let g = Graph::multirail(1).unwrap();
        assert_eq!(g, Graph::chain(3).unwrap());
        let d = Graph::multirail(2).unwrap();
        assert_eq!(d.edge_count(), 4);
        assert_eq!(d.degree(0), 2);
        assert_eq!(d.degree(3), 2);
    }

    #[test]
    fn report_json() {
        let rep = NullifierReport::new(vec![1.0, 3.0]);
        let j = rep.to_json();
        assert_eq!(j.max, 3.0);
        assert_eq!(j.mean, 2.0);
        assert_eq!(j.variances[&2], 3.0);
    }
}
