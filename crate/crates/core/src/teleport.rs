//! Teleportation of a coherent state through multi-rail clusters.
//!
//! The input mode is coupled to vertex 1 by a CZ gate; `p` is then measured
//! on the input and on every cluster vertex except the last, and the
//! outcomes are fed forward as displacements interleaved with inverse
//! Fourier rotations.
//!
//! States are propagated as square-root factors `cov = F F^T` over the
//! vacuum noise sources. At `R_high = 12` the plain covariance holds entries
//! of order `e^{24}`, and Schur complements lose about `10^{-6}` to
//! cancellation; the factor form keeps errors near `eps * e^{12}`.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{SymplecticOp, VACUUM_VARIANCE};
use crate::gram::{synthesize_gram, FactorStrategy, PaperFixture};
use crate::graph::{excess_noise_weights, Graph};
use crate::linalg::{passive_symplectic, real_part, RMat, RVec};

/// Squeezing of the two columns carrying the input and output vertices.
pub const DEFAULT_R_HIGH: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterKind {
    Chain3,
    Diamond,
    Multirail(usize),
}

impl ClusterKind {
    /// Number of middle vertices.
    pub fn rails(self) -> usize {
        match self {
            ClusterKind::Chain3 => 1,
            ClusterKind::Diamond => 2,
            ClusterKind::Multirail(m) => m,
        }
    }

    pub fn graph(self) -> Result<Graph> {
        match self {
            ClusterKind::Diamond => Ok(Graph::diamond()),
            _ => Graph::multirail(self.rails()),
        }
    }

    /// Input vertex first, output vertex second, then the rails, so that the
    /// two ends live in the first two columns.
    pub fn default_strategy(self) -> FactorStrategy {
        match self {
            ClusterKind::Diamond => FactorStrategy::Paper(PaperFixture::Diamond),
            _ => {
                let m = self.rails();
                FactorStrategy::RecursiveOrdered([0, m + 1].into_iter().chain(1..=m).collect())
            }
        }
    }
}

impl fmt::Display for ClusterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClusterKind::Chain3 => f.write_str("chain3"),
            ClusterKind::Diamond => f.write_str("diamond"),
            ClusterKind::Multirail(m) => write!(f, "multirail:{m}"),
        }
    }
}

impl FromStr for ClusterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chain3" => Ok(ClusterKind::Chain3),
            "diamond" => Ok(ClusterKind::Diamond),
            _ => {
                let m = s
                    .strip_prefix("multirail:")
                    .and_then(|m| m.parse::<usize>().ok())
                    .ok_or_else(|| Error::Protocol(format!("unknown cluster `{s}` (chain3, diamond, multirail:m)")))?;
                if m == 0 {
                    return Err(Error::Protocol("multirail needs at least one rail".into()));
                }
                Ok(ClusterKind::Multirail(m))
            }
        }
    }
}

impl Serialize for ClusterKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ClusterKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSpec {
    pub cluster: ClusterKind,
    /// Per-column input squeezing in nats.
    pub squeezing: Vec<f64>,
    pub strategy: FactorStrategy,
    /// Coherent input `(x, p)`.
    pub input: [f64; 2],
    pub seed: u64,
}

impl ProtocolSpec {
    /// `R_high` on the first two columns, `r` on the rest.
    pub fn new(cluster: ClusterKind, r: f64, r_high: f64) -> Self {
        let n = cluster.rails() + 2;
        let squeezing = (0..n).map(|l| if l < 2 { r_high } else { r }).collect();
        ProtocolSpec { cluster, squeezing, strategy: cluster.default_strategy(), input: [0.0, 0.0], seed: 0 }
    }

    pub fn n(&self) -> usize {
        self.cluster.rails() + 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.squeezing.len() != self.n() {
            return Err(Error::Protocol(format!(
                "{} needs {} squeezing values, got {}",
                self.cluster,
                self.n(),
                self.squeezing.len()
            )));
        }
        if self.squeezing.iter().chain(&self.input).any(|v| !v.is_finite()) {
            return Err(Error::Protocol("squeezing and input must be finite".into()));
        }
        if let FactorStrategy::Paper(fx) = &self.strategy {
            if fx.graph() != self.cluster.graph()? {
                return Err(Error::Protocol(format!("fixture {} does not match cluster {}", fx.name(), self.cluster)));
            }
        }
        Ok(())
    }

    /// Closed-form `p_out` excess where one exists: the stored-vector diamond
    /// law `(13 e^{-2R_3} + 5 e^{-2R_4}) / 12`, or `3 e^{-2R} / m` when the
    /// rail columns share one value.
    pub fn closed_form_excess_p(&self) -> Option<f64> {
        let low = &self.squeezing[2..];
        if self.strategy == FactorStrategy::Paper(PaperFixture::Diamond) {
            return Some((13.0 * (-2.0 * low[0]).exp() + 5.0 * (-2.0 * low[1]).exp()) / 12.0);
        }
        let r = low[0];
        low.iter()
            .all(|&v| v == r)
            .then(|| 3.0 * (-2.0 * r).exp() / self.cluster.rails() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSpecJson {
    pub cluster: ClusterKind,
    pub squeezing: Vec<f64>,
    /// `"paper"` for the stored diamond vectors, `"recursive"` otherwise.
    #[serde(default)]
    pub factor: Option<String>,
    #[serde(default)]
    pub input: [f64; 2],
    #[serde(default)]
    pub seed: u64,
}

impl ProtocolSpec {
    pub fn to_json(&self) -> ProtocolSpecJson {
        ProtocolSpecJson {
            cluster: self.cluster,
            squeezing: self.squeezing.clone(),
            factor: Some(match self.strategy {
                FactorStrategy::Paper(_) => "paper".into(),
                _ => "recursive".into(),
            }),
            input: self.input,
            seed: self.seed,
        }
    }

    pub fn from_json(json: &ProtocolSpecJson) -> Result<Self> {
        let strategy = match json.factor.as_deref() {
            None => json.cluster.default_strategy(),
            Some("paper") if json.cluster == ClusterKind::Diamond => FactorStrategy::Paper(PaperFixture::Diamond),
            Some("recursive") => match json.cluster {
                ClusterKind::Diamond => ClusterKind::Multirail(2).default_strategy(),
                k => k.default_strategy(),
            },
            Some(other) => return Err(Error::Protocol(format!("factor `{other}` not available for {}", json.cluster))),
        };
        let spec = ProtocolSpec {
            cluster: json.cluster,
            squeezing: json.squeezing.clone(),
            strategy,
            input: json.input,
            seed: json.seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Feedforward for outcomes `(s_in, s_1, s_mid...)`, in order of application:
/// `X(-mean s_mid)`, `F^dagger`, `X(-s_1)`, `F^dagger`, `X(-s_in)`, `F^dagger`.
pub fn correction_sequence(spec: &ProtocolSpec, outcomes: &[f64]) -> Result<Vec<SymplecticOp>> {
    let m = spec.cluster.rails();
    if outcomes.len() != m + 2 {
        return Err(Error::Protocol(format!("expected {} outcomes, got {}", m + 2, outcomes.len())));
    }
    let mid = outcomes[2..].iter().sum::<f64>() / m as f64;
    let shift = |s: f64| SymplecticOp::Displace { mode: 0, dx: -s, dp: 0.0 };
    let fd = SymplecticOp::FourierInverse { mode: 0 };
    Ok(vec![shift(mid), fd, shift(outcomes[1]), fd, shift(outcomes[0]), fd])
}

fn apply_single_mode(ops: &[SymplecticOp], v: [f64; 2]) -> [f64; 2] {
    let mut v = RVec::from_row_slice(&v);
    for op in ops {
        v = op.matrix(1) * v + op.displacement(1);
    }
    [v[0], v[1]]
}

/// Gaussian state as mean plus square-root factor over independent
/// unit-variance noise sources, `cov = F F^T`.
#[derive(Debug, Clone)]
struct FactoredState {
    mean: RVec,
    factor: RMat,
}

impl FactoredState {
    fn transform(&mut self, s: &RMat) {
        self.mean = s * &self.mean;
        self.factor = s * &self.factor;
    }

    fn drop_mode(v: &RMat, mode: usize) -> RMat {
        v.clone().remove_rows(2 * mode, 2)
    }
}

/// Cluster circuit with the input attached, before any measurement.
/// Mode 0 is the input, mode `a + 1` is vertex `a`.
fn prepare(spec: &ProtocolSpec) -> Result<(FactoredState, Graph, RMat)> {
    spec.validate()?;
    let g = spec.cluster.graph()?;
    let n = g.n();
    let circuit = synthesize_gram(&g, &spec.strategy, &spec.squeezing)?;
    let dim = 2 * (n + 1);
    let mut s_cluster = passive_symplectic(&circuit.u);
    for (l, &r) in spec.squeezing.iter().enumerate() {
        let mut col_x = s_cluster.column_mut(2 * l);
        col_x *= r.exp();
        let mut col_p = s_cluster.column_mut(2 * l + 1);
        col_p *= (-r).exp();
    }
    let mut s = RMat::identity(dim, dim);
    s.view_mut((2, 2), (2 * n, 2 * n)).copy_from(&s_cluster);
    let mut mean = RVec::zeros(dim);
    mean[0] = spec.input[0];
    mean[1] = spec.input[1];
    let mut state = FactoredState { mean, factor: RMat::identity(dim, dim) * VACUUM_VARIANCE.sqrt() };
    state.transform(&s);
    state.transform(&SymplecticOp::QndCz { mode_a: 0, mode_b: 1, gain: 1.0 }.matrix(n + 1));
    Ok((state, g, real_part(&circuit.u)))
}

/// Outcome-independent part of a run.
struct Filtered {
    /// Conditional factor of the output mode.
    out_factor: RMat,
    /// Dependence of the output's conditional mean on the noise sources,
    /// via the outcomes.
    out_fluctuation: RMat,
    /// Dependence of each outcome on the noise sources.
    outcome_fluctuation: Vec<RVec>,
}

/// Measures `p` on mode 0 until one mode is left. `next(k, mean, sd)` picks
/// outcome `k` given its marginal.
fn measure_all(
    mut state: FactoredState,
    mut next: impl FnMut(usize, f64, f64) -> f64,
) -> Result<(Vec<f64>, [f64; 2], Filtered)> {
    let cols = state.factor.ncols();
    let mut fluct = RMat::zeros(state.factor.nrows(), cols);
    let mut outcomes = Vec::new();
    let mut outcome_fluctuation = Vec::new();
    let mut k = 0;
    while state.mean.len() > 2 {
        let h = state.factor.row(1).into_owned();
        let var = h.norm_squared();
        if var < 1e-30 {
            return Err(Error::DegenerateMeasurement { variance: var });
        }
        let mu = state.mean[1];
        let s = next(k, mu, var.sqrt());
        let gain = &state.factor * h.transpose() / var;
        outcome_fluctuation.push((fluct.row(1) + &h).transpose());
        state.mean += &gain * (s - mu);
        fluct += &gain * &h;
        state.factor -= &gain * &h;
        state.mean = state.mean.remove_rows(0, 2);
        state.factor = FactoredState::drop_mode(&state.factor, 0);
        fluct = FactoredState::drop_mode(&fluct, 0);
        outcomes.push(s);
        k += 1;
    }
    Ok((
        outcomes,
        [state.mean[0], state.mean[1]],
        Filtered { out_factor: state.factor, out_fluctuation: fluct, outcome_fluctuation },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeleportReport {
    pub cluster: ClusterKind,
    pub squeezing: Vec<f64>,
    pub input: [f64; 2],
    /// `(s_in, s_1, s_mid...)` of the sampled run.
    pub outcomes: Vec<f64>,
    /// Corrected output mean of the sampled run.
    pub output_mean: [f64; 2],
    /// Corrected conditional covariance; the same for every outcome.
    pub conditional_cov: [[f64; 2]; 2],
    /// Spread of the corrected mean over outcomes.
    pub feedforward_cov: [[f64; 2]; 2],
    /// Sum of the two: the covariance of the teleported state.
    pub output_cov: [[f64; 2]; 2],
    /// `(Var - 1/4) / (1/4)`.
    pub excess_x: f64,
    pub excess_p: f64,
    /// Same quantities from the Heisenberg output operators.
    pub exact_excess_x: f64,
    pub exact_excess_p: f64,
    /// `sum_i Var(n_mid_i) / m^2`: the `p_out` noise with rail nullifier
    /// cross-covariances dropped.
    pub uncorrelated_excess_p: f64,
    pub closed_form_excess_p: Option<f64>,
}

impl TeleportReport {
    /// Largest disagreement between simulation and Heisenberg operators.
    pub fn oracle_residual(&self) -> f64 {
        (self.excess_x - self.exact_excess_x).abs().max((self.excess_p - self.exact_excess_p).abs())
    }
}

fn outer(a: &RMat) -> [[f64; 2]; 2] {
    let c = a * a.transpose();
    [[c[(0, 0)], c[(0, 1)]], [c[(1, 0)], c[(1, 1)]]]
}

fn add(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]]
}

/// Full protocol with outcomes sampled from `spec.seed`.
pub fn run_teleport(spec: &ProtocolSpec) -> Result<TeleportReport> {
    let (state, g, re_u) = prepare(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (outcomes, mean, filt) = measure_all(state, |_, mu, sd| {
        let z: f64 = StandardNormal.sample(&mut rng);
        mu + sd * z
    })?;
    let ops = correction_sequence(spec, &outcomes)?;
    let output_mean = apply_single_mode(&ops, mean);

    let rotation = ops.iter().fold(RMat::identity(2, 2), |acc, op| op.matrix(1) * acc);
    let conditional = &rotation * &filt.out_factor;
    // corrected-mean fluctuation, column by column: each noise source moves
    // the outcomes and the conditional mean together
    let cols = filt.out_factor.ncols();
    let mut ff = RMat::zeros(2, cols);
    for j in 0..cols {
        let ds: Vec<f64> = filt.outcome_fluctuation.iter().map(|o| o[j]).collect();
        let v = apply_single_mode(
            &correction_sequence(spec, &ds)?,
            [filt.out_fluctuation[(0, j)], filt.out_fluctuation[(1, j)]],
        );
        ff[(0, j)] = v[0];
        ff[(1, j)] = v[1];
    }
    let conditional_cov = outer(&conditional);
    let feedforward_cov = outer(&ff);
    let output_cov = add(conditional_cov, feedforward_cov);

    let oracle = heisenberg_oracle(spec)?;
    let ncov = nullifier_covariance(&g, &re_u, &spec.squeezing);
    let m = spec.cluster.rails();
    let uncorrelated = (1..=m).map(|a| ncov[(a, a)]).sum::<f64>() / (m * m) as f64;

    Ok(TeleportReport {
        cluster: spec.cluster,
        squeezing: spec.squeezing.clone(),
        input: spec.input,
        outcomes,
        output_mean,
        conditional_cov,
        feedforward_cov,
        output_cov,
        excess_x: output_cov[0][0] / VACUUM_VARIANCE - 1.0,
        excess_p: output_cov[1][1] / VACUUM_VARIANCE - 1.0,
        exact_excess_x: oracle.x.variance(&ncov) - 1.0,
        exact_excess_p: oracle.p.variance(&ncov) - 1.0,
        uncorrelated_excess_p: uncorrelated,
        closed_form_excess_p: spec.closed_form_excess_p(),
    })
}

/// Corrected output mean for given outcomes.
pub fn corrected_mean(spec: &ProtocolSpec, outcomes: &[f64]) -> Result<[f64; 2]> {
    if outcomes.len() != spec.n() {
        return Err(Error::Protocol(format!("expected {} outcomes, got {}", spec.n(), outcomes.len())));
    }
    let (state, _, _) = prepare(spec)?;
    let (_, mean, _) = measure_all(state, |k, _, _| outcomes[k])?;
    Ok(apply_single_mode(&correction_sequence(spec, outcomes)?, mean))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanTransfer {
    pub shots: usize,
    pub mean: [f64; 2],
    pub std_err: [f64; 2],
}

impl MeanTransfer {
    /// Largest `|mean - target| / std_err` over the two quadratures.
    pub fn z_score(&self, target: [f64; 2]) -> f64 {
        (0..2)
            .map(|q| {
                let d = (self.mean[q] - target[q]).abs();
                // a quadrature untouched by the outcomes has no spread at all
                if d == 0.0 { 0.0 } else { d / self.std_err[q] }
            })
            .fold(0.0, f64::max)
    }
}

/// Corrected output means over `shots` independent runs. Shot `k` draws from
/// stream `k` of the generator seeded by `spec.seed`, so the result does not
/// depend on thread scheduling.
pub fn monte_carlo_mean(spec: &ProtocolSpec, shots: usize) -> Result<MeanTransfer> {
    if shots < 2 {
        return Err(Error::Protocol("need at least two shots".into()));
    }
    let (state, _, _) = prepare(spec)?;
    let means = (0..shots)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(k as u64);
            let (outcomes, mean, _) = measure_all(state.clone(), |_, mu, sd| {
                let z: f64 = StandardNormal.sample(&mut rng);
                mu + sd * z
            })?;
            Ok(apply_single_mode(&correction_sequence(spec, &outcomes)?, mean))
        })
        .collect::<Result<Vec<[f64; 2]>>>()?;
    let n = shots as f64;
    let mut mean = [0.0; 2];
    let mut std_err = [0.0; 2];
    for q in 0..2 {
        mean[q] = means.iter().map(|v| v[q]).sum::<f64>() / n;
        let var = means.iter().map(|v| (v[q] - mean[q]).powi(2)).sum::<f64>() / (n - 1.0);
        std_err[q] = (var / n).sqrt();
    }
    Ok(MeanTransfer { shots, mean, std_err })
}

/// Output quadrature as `c_x x_in + c_p p_in + sum_a k_a n_a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureForm {
    pub input: [f64; 2],
    pub nullifiers: Vec<f64>,
}

impl QuadratureForm {
    /// Variance in vacuum units given the nullifier covariance (vacuum units).
    pub fn variance(&self, ncov: &RMat) -> f64 {
        let k = RVec::from_row_slice(&self.nullifiers);
        self.input[0].powi(2) + self.input[1].powi(2) + k.dot(&(ncov * &k))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeisenbergForm {
    pub x: QuadratureForm,
    pub p: QuadratureForm,
}

/// Output operators after attachment, measurement and correction, rewritten
/// in terms of the input quadratures and the cluster nullifiers
/// `n_a = p_a - sum_{b in N_a} x_b`.
pub fn heisenberg_oracle(spec: &ProtocolSpec) -> Result<HeisenbergForm> {
    let g = spec.cluster.graph()?;
    let n = g.n();
    let m = spec.cluster.rails();
    let out = n - 1;
    // coordinates (x_in, p_in, x_1, p_1, ..., x_n, p_n) before the CZ gate
    let dim = 2 + 2 * n;
    let unit = |i: usize| {
        let mut v = RVec::zeros(dim);
        v[i] = 1.0;
        v
    };
    let xv = |a: usize| 2 + 2 * a;
    let pv = |a: usize| 3 + 2 * a;
    let s_in = unit(1) + unit(xv(0));
    let s_1 = unit(pv(0)) + unit(0);
    let s_mid = (1..=m).fold(RVec::zeros(dim), |acc, a| acc + unit(pv(a))) / m as f64;

    let mut x = unit(xv(out));
    let mut p = unit(pv(out));
    let fdag = |x: RVec, p: RVec| (p, -x);
    x -= &s_mid;
    (x, p) = fdag(x, p);
    x -= &s_1;
    (x, p) = fdag(x, p);
    x -= &s_in;
    (x, p) = fdag(x, p);

    let to_nullifiers = |f: &RVec| -> Result<QuadratureForm> {
        let k: Vec<f64> = (0..n).map(|a| f[pv(a)]).collect();
        let mut rest = f.clone();
        rest[0] = 0.0;
        rest[1] = 0.0;
        for (a, &ka) in k.iter().enumerate() {
            rest[pv(a)] -= ka;
            for &b in g.neighbors(a) {
                rest[xv(b)] += ka;
            }
        }
        let residual = rest.amax();
        if residual > 1e-12 {
            return Err(Error::Protocol(format!("output is not a nullifier combination (residual {residual:.3e})")));
        }
        Ok(QuadratureForm { input: [f[0], f[1]], nullifiers: k })
    };
    Ok(HeisenbergForm { x: to_nullifiers(&x)?, p: to_nullifiers(&p)? })
}

/// `Cov(n_a, n_b) = sum_l w_al w_bl e^{-2 R_l}` in vacuum units for a
/// cluster-type circuit with real part `re_u`.
pub fn nullifier_covariance(g: &Graph, re_u: &RMat, squeezing: &[f64]) -> RMat {
    let w = excess_noise_weights(g, re_u);
    let d = RMat::from_diagonal(&RVec::from_iterator(squeezing.len(), squeezing.iter().map(|r| (-2.0 * r).exp())));
    &w * d * w.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{GaussianState, Outcome};
    use approx::assert_abs_diff_eq;

    fn e2(r: f64) -> f64 {
        (-2.0 * r).exp()
    }

    #[test]
    fn cluster_names_roundtrip() {
        for k in [ClusterKind::Chain3, ClusterKind::Diamond, ClusterKind::Multirail(3)] {
            assert_eq!(k.to_string().parse::<ClusterKind>().unwrap(), k);
        }
        assert!("multirail:0".parse::<ClusterKind>().is_err());
        assert!("ring".parse::<ClusterKind>().is_err());
    }

    #[test]
    fn oracle_reproduces_the_written_output_operators() {
        // diamond: x_out = x_in + n_1 - n_4, p_out = p_in - (n_2 + n_3)/2
        let h = heisenberg_oracle(&ProtocolSpec::new(ClusterKind::Diamond, 1.0, 12.0)).unwrap();
        assert_eq!(h.x.input, [1.0, 0.0]);
        assert_eq!(h.x.nullifiers, vec![1.0, 0.0, 0.0, -1.0]);
        assert_eq!(h.p.input, [0.0, 1.0]);
        assert_eq!(h.p.nullifiers, vec![0.0, -0.5, -0.5, 0.0]);
        // chain: p_out = p_in - n_2
        let h = heisenberg_oracle(&ProtocolSpec::new(ClusterKind::Chain3, 1.0, 12.0)).unwrap();
        assert_eq!(h.p.nullifiers, vec![0.0, -1.0, 0.0]);
    }

    #[test]
    fn simulation_matches_oracle() {
        for m in 1..=4 {
            for r in [0.5, 1.0, 2.0] {
                let rep = run_teleport(&ProtocolSpec::new(ClusterKind::Multirail(m), r, 12.0)).unwrap();
                assert!(rep.oracle_residual() < 1e-9, "m={m} r={r}: {rep:?}");
            }
        }
    }

    #[test]
    fn diamond_stored_vectors_by_brute_force() {
        // per-nullifier terms: vertex 2 gives 3 e^{-2R3}, vertex 3 gives
        // (4/3) e^{-2R3} + (5/3) e^{-2R4}, and they share 2 e^{-2R3}
        let (r3, r4) = (0.5, 2.0);
        let spec = ProtocolSpec { squeezing: vec![12.0, 12.0, r3, r4], ..ProtocolSpec::new(ClusterKind::Diamond, 0.0, 12.0) };
        let g = Graph::diamond();
        let ncov = nullifier_covariance(&g, &PaperFixture::Diamond.alpha().0, &spec.squeezing);
        assert_abs_diff_eq!(ncov[(1, 1)], 3.0 * e2(r3), epsilon = 1e-9);
        assert_abs_diff_eq!(ncov[(2, 2)], 4.0 / 3.0 * e2(r3) + 5.0 / 3.0 * e2(r4), epsilon = 1e-9);
        assert_abs_diff_eq!(ncov[(1, 2)], 2.0 * e2(r3), epsilon = 1e-9);
        let rep = run_teleport(&spec).unwrap();
        assert_abs_diff_eq!(rep.uncorrelated_excess_p, (13.0 * e2(r3) + 5.0 * e2(r4)) / 12.0, epsilon = 1e-9);
        assert_abs_diff_eq!(rep.excess_p, (25.0 * e2(r3) + 5.0 * e2(r4)) / 12.0, epsilon = 1e-9);
        assert!(rep.excess_x.abs() < 1e-6);
    }

    #[test]
    fn chain3_excess() {
        let rep = run_teleport(&ProtocolSpec::new(ClusterKind::Chain3, 1.0, 12.0)).unwrap();
        assert_abs_diff_eq!(rep.excess_p, 3.0 * e2(1.0), epsilon = 1e-9);
        assert!(rep.excess_x.abs() < 1e-9);
    }

    #[test]
    fn covariance_independent_of_outcomes() {
        let base = run_teleport(&ProtocolSpec::new(ClusterKind::Diamond, 1.0, 12.0)).unwrap();
        for seed in 1..100 {
            let spec = ProtocolSpec { seed, ..ProtocolSpec::new(ClusterKind::Diamond, 1.0, 12.0) };
            let rep = run_teleport(&spec).unwrap();
            assert_eq!(rep.conditional_cov, base.conditional_cov);
            assert_eq!(rep.output_cov, base.output_cov);
            assert_ne!(rep.outcomes, base.outcomes);
        }
    }

    #[test]
    fn zero_outcomes_give_unity_gain() {
        let mut spec = ProtocolSpec::new(ClusterKind::Diamond, 12.0, 12.0);
        spec.input = [0.7, -0.3];
        let mean = corrected_mean(&spec, &[0.0; 4]).unwrap();
        assert_abs_diff_eq!(mean[0], 0.7, epsilon = 1e-9);
        assert_abs_diff_eq!(mean[1], -0.3, epsilon = 1e-9);
    }

    #[test]
    fn input_outcome_shift_is_cancelled() {
        let spec = ProtocolSpec::new(ClusterKind::Diamond, 12.0, 12.0);
        let zero = corrected_mean(&spec, &[0.0; 4]).unwrap();
        let shifted = corrected_mean(&spec, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        // independent covariance-form regression gives a p shift of
        // 2 e^{-2R} (1 - O(e^{-4R})) and no x shift
        assert_abs_diff_eq!(shifted[0], zero[0], epsilon = 1e-15);
        assert_abs_diff_eq!((shifted[1] - zero[1]) / e2(12.0), 2.0, epsilon = 1e-4);
    }

    #[test]
    fn correction_uses_rail_mean() {
        let spec = ProtocolSpec::new(ClusterKind::Diamond, 1.0, 12.0);
        let ops = correction_sequence(&spec, &[1.0, 2.0, 3.0, 5.0]).unwrap();
        assert_eq!(ops[0], SymplecticOp::Displace { mode: 0, dx: -4.0, dp: 0.0 });
        assert_eq!(ops[2], SymplecticOp::Displace { mode: 0, dx: -2.0, dp: 0.0 });
        assert_eq!(ops[4], SymplecticOp::Displace { mode: 0, dx: -1.0, dp: 0.0 });
        assert_eq!(ops.iter().filter(|o| matches!(o, SymplecticOp::FourierInverse { .. })).count(), 3);
    }

    #[test]
    fn factored_filter_agrees_with_covariance_conditioning() {
        // moderate squeezing keeps the plain covariance route accurate
        let spec = ProtocolSpec::new(ClusterKind::Diamond, 0.4, 2.0);
        let (fs, _, _) = prepare(&spec).unwrap();
        let cov = &fs.factor * fs.factor.transpose();
        let mut st = GaussianState::from_parts(fs.mean.clone(), (&cov + cov.transpose()) * 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..4 {
            st = st.homodyne_p(0, Outcome::Forced(0.0), &mut rng).unwrap().0;
        }
        let (_, _, filt) = measure_all(fs, |_, _, _| 0.0).unwrap();
        let fcov = &filt.out_factor * filt.out_factor.transpose();
        assert!((fcov - st.cov()).amax() < 1e-10);
    }

    #[test]
    fn protocol_json_roundtrip() {
        let spec = ProtocolSpec { input: [0.7, -0.3], seed: 9, ..ProtocolSpec::new(ClusterKind::Multirail(3), 1.0, 12.0) };
        let text = serde_json::to_string(&spec.to_json()).unwrap();
        assert!(text.contains("\"cluster\":\"multirail:3\""));
        let back = ProtocolSpec::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn wrong_squeezing_length_rejected() {
        let spec = ProtocolSpec { squeezing: vec![1.0; 3], ..ProtocolSpec::new(ClusterKind::Diamond, 1.0, 12.0) };
        assert!(matches!(run_teleport(&spec), Err(Error::Protocol(_))));
    }
}
