//! Phase-space simulation of Gaussian states.
//!
//! Quadratures follow `a = x + i p` with `[x, p] = i/2`, so the vacuum has
//! covariance `I/4`. Vectors are interleaved `(x1, p1, ..., xn, pn)`.

use nalgebra::{DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, ensure_unitary, passive_symplectic, symplectic_form, CMat, RMat, RVec};

/// Quadrature variance of the vacuum.
pub const VACUUM_VARIANCE: f64 = 0.25;

/// Unitarity tolerance for interferometers handed to the simulator.
pub const UNITARY_TOL: f64 = 1e-9;

/// Marginal variances below this are refused by homodyne conditioning.
pub const DEGENERATE_VARIANCE: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    n_modes: usize,
    mean: RVec,
    cov: RMat,
}

/// Sign of the lower-right block of a real beam splitter
/// `[[t, s], [+-s, -+t]]`, `s = sqrt(1 - t^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// 2x2 real matrix of the beam splitter `B^{+-}(t)` acting on `(a_k, a_l)`.
pub fn beam_splitter_block(t: f64, sign: Sign) -> [[f64; 2]; 2] {
    let s = (1.0 - t * t).max(0.0).sqrt();
    let sg = sign.value();
    [[t, s], [sg * s, -sg * t]]
}

/// Elementary Gaussian unitaries. Mode indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SymplecticOp {
    /// `x -> e^{r} x`, `p -> e^{-r} p`.
    Squeeze { mode: usize, r: f64 },
    BeamSplitter { mode_a: usize, mode_b: usize, t: f64, sign: Sign },
    /// `a -> i a`, i.e. `x -> -p`, `p -> x`.
    Fourier { mode: usize },
    /// `a -> -i a`, i.e. `x -> p`, `p -> -x`.
    FourierInverse { mode: usize },
    /// `p_a -> p_a + g x_b`, `p_b -> p_b + g x_a`.
    QndCz { mode_a: usize, mode_b: usize, gain: f64 },
    Displace { mode: usize, dx: f64, dp: f64 },
    Swap { mode_a: usize, mode_b: usize },
}

impl SymplecticOp {
    fn modes(&self) -> Vec<usize> {
        match *self {
            SymplecticOp::Squeeze { mode, .. }
            | SymplecticOp::Fourier { mode }
            | SymplecticOp::FourierInverse { mode }
            | SymplecticOp::Displace { mode, .. } => vec![mode],
            SymplecticOp::BeamSplitter { mode_a, mode_b, .. }
            | SymplecticOp::QndCz { mode_a, mode_b, .. }
            | SymplecticOp::Swap { mode_a, mode_b } => vec![mode_a, mode_b],
        }
    }

    pub fn validate(&self, n_modes: usize) -> Result<()> {
        let modes = self.modes();
        for &m in &modes {
            if m >= n_modes {
                return Err(Error::ModeOutOfRange { index: m, n_modes });
            }
        }
        if modes.len() == 2 && modes[0] == modes[1] {
            return Err(Error::InvalidInput(format!("two-mode operation on a single mode {}", modes[0])));
        }
        Ok(())
    }

    /// Phase-space matrix on `n_modes` modes.
    pub fn matrix(&self, n_modes: usize) -> RMat {
        let mut s = RMat::identity(2 * n_modes, 2 * n_modes);
        match *self {
            SymplecticOp::Squeeze { mode, r } => {
                s[(2 * mode, 2 * mode)] = r.exp();
                s[(2 * mode + 1, 2 * mode + 1)] = (-r).exp();
            }
            SymplecticOp::BeamSplitter { mode_a, mode_b, t, sign } => {
                let b = beam_splitter_block(t, sign);
                let idx = [mode_a, mode_b];
                for (i, &mi) in idx.iter().enumerate() {
                    for (j, &mj) in idx.iter().enumerate() {
                        for q in 0..2 {
                            s[(2 * mi + q, 2 * mj + q)] = b[i][j];
                        }
                    }
                }
            }
            SymplecticOp::Fourier { mode } => {
                s[(2 * mode, 2 * mode)] = 0.0;
                s[(2 * mode + 1, 2 * mode + 1)] = 0.0;
                s[(2 * mode, 2 * mode + 1)] = -1.0;
                s[(2 * mode + 1, 2 * mode)] = 1.0;
            }
            SymplecticOp::FourierInverse { mode } => {
                s[(2 * mode, 2 * mode)] = 0.0;
                s[(2 * mode + 1, 2 * mode + 1)] = 0.0;
                s[(2 * mode, 2 * mode + 1)] = 1.0;
                s[(2 * mode + 1, 2 * mode)] = -1.0;
            }
            SymplecticOp::QndCz { mode_a, mode_b, gain } => {
                s[(2 * mode_a + 1, 2 * mode_b)] = gain;
                s[(2 * mode_b + 1, 2 * mode_a)] = gain;
            }
            SymplecticOp::Displace { .. } => {}
            SymplecticOp::Swap { mode_a, mode_b } => {
                for q in 0..2 {
                    s[(2 * mode_a + q, 2 * mode_a + q)] = 0.0;
                    s[(2 * mode_b + q, 2 * mode_b + q)] = 0.0;
                    s[(2 * mode_a + q, 2 * mode_b + q)] = 1.0;
                    s[(2 * mode_b + q, 2 * mode_a + q)] = 1.0;
                }
            }
        }
        s
    }

    pub fn displacement(&self, n_modes: usize) -> RVec {
        let mut d = RVec::zeros(2 * n_modes);
        if let SymplecticOp::Displace { mode, dx, dp } = *self {
            d[2 * mode] = dx;
            d[2 * mode + 1] = dp;
        }
        d
    }

    pub fn inverse(&self) -> SymplecticOp {
        match *self {
            SymplecticOp::Squeeze { mode, r } => SymplecticOp::Squeeze { mode, r: -r },
            SymplecticOp::BeamSplitter { mode_a, mode_b, t, sign } => match sign {
                // B^+ is a symmetric reflection and its own inverse.
                Sign::Plus => *self,
                // B^- is a rotation; exchanging the mode order transposes it.
                Sign::Minus => SymplecticOp::BeamSplitter { mode_a: mode_b, mode_b: mode_a, t, sign },
            },
            SymplecticOp::Fourier { mode } => SymplecticOp::FourierInverse { mode },
            SymplecticOp::FourierInverse { mode } => SymplecticOp::Fourier { mode },
            SymplecticOp::QndCz { mode_a, mode_b, gain } => SymplecticOp::QndCz { mode_a, mode_b, gain: -gain },
            SymplecticOp::Displace { mode, dx, dp } => SymplecticOp::Displace { mode, dx: -dx, dp: -dp },
            SymplecticOp::Swap { .. } => *self,
        }
    }
}

/// Outcome handling for a homodyne measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Forced(f64),
    Sample,
}

impl GaussianState {
    pub fn vacuum(n_modes: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::InvalidInput("a state needs at least one mode".into()));
        }
        Ok(GaussianState {
            n_modes,
            mean: RVec::zeros(2 * n_modes),
            cov: RMat::identity(2 * n_modes, 2 * n_modes) * VACUUM_VARIANCE,
        })
    }

    /// Single-mode coherent state with quadrature means `(x, p)`.
    pub fn coherent(x: f64, p: f64) -> Self {
        GaussianState {
            n_modes: 1,
            mean: RVec::from_vec(vec![x, p]),
            cov: RMat::identity(2, 2) * VACUUM_VARIANCE,
        }
    }

    pub fn from_parts(mean: RVec, cov: RMat) -> Result<Self> {
        let dim = mean.len();
        if !dim.is_multiple_of(2) || cov.nrows() != dim || cov.ncols() != dim {
            return Err(Error::InvalidInput(format!(
                "mean of length {dim} and {}x{} covariance do not describe a set of modes",
                cov.nrows(),
                cov.ncols()
            )));
        }
        let asym = (&cov - cov.transpose()).amax();
        if asym > 1e-12 * cov.amax().max(1.0) {
            return Err(Error::InvalidInput(format!("covariance not symmetric (asymmetry {asym:.3e})")));
        }
        Ok(GaussianState { n_modes: dim / 2, mean, cov })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn mean(&self) -> &RVec {
        &self.mean
    }

    pub fn cov(&self) -> &RMat {
        &self.cov
    }

    /// Product state with `self`'s modes first.
    pub fn tensor(&self, other: &GaussianState) -> GaussianState {
        let d1 = 2 * self.n_modes;
        let d2 = 2 * other.n_modes;
        let mut mean = RVec::zeros(d1 + d2);
        mean.rows_mut(0, d1).copy_from(&self.mean);
        mean.rows_mut(d1, d2).copy_from(&other.mean);
        let mut cov = RMat::zeros(d1 + d2, d1 + d2);
        cov.view_mut((0, 0), (d1, d1)).copy_from(&self.cov);
        cov.view_mut((d1, d1), (d2, d2)).copy_from(&other.cov);
        GaussianState { n_modes: self.n_modes + other.n_modes, mean, cov }
    }

    /// `mean -> S mean + d`, `cov -> S cov S^T`.
    pub fn apply_symplectic(&self, s: &RMat, d: &RVec) -> Result<Self> {
        let dim = 2 * self.n_modes;
        if s.nrows() != dim || s.ncols() != dim || d.len() != dim {
            return Err(Error::ModeCountMismatch { expected: self.n_modes, found: s.nrows() / 2 });
        }
        let mean = s * &self.mean + d;
        let mut cov = s * &self.cov * s.transpose();
        symmetrize(&mut cov);
        Ok(GaussianState { n_modes: self.n_modes, mean, cov })
    }

    pub fn apply(&self, op: &SymplecticOp) -> Result<Self> {
        op.validate(self.n_modes)?;
        self.apply_symplectic(&op.matrix(self.n_modes), &op.displacement(self.n_modes))
    }

    pub fn apply_all<'a>(&self, ops: impl IntoIterator<Item = &'a SymplecticOp>) -> Result<Self> {
        let mut state = self.clone();
        for op in ops {
            state = state.apply(op)?;
        }
        Ok(state)
    }

    /// Passive linear-optics map `a'_k = sum_l U_kl a_l`.
    pub fn apply_interferometer(&self, u: &CMat) -> Result<Self> {
        if u.nrows() != self.n_modes || u.ncols() != self.n_modes {
            return Err(Error::ModeCountMismatch { expected: self.n_modes, found: u.nrows() });
        }
        ensure_unitary(u, UNITARY_TOL)?;
        self.apply_symplectic(&passive_symplectic(u), &RVec::zeros(2 * self.n_modes))
    }

    /// Homodyne measurement of `p` on `mode`. Returns the conditional state of
    /// the remaining modes (original order kept) and the outcome used.
    ///
    /// The conditional covariance is the Schur complement
    /// `C_rr - C_rp C_pr / C_pp` and does not depend on the outcome.
    pub fn homodyne_p<R: Rng + ?Sized>(&self, mode: usize, outcome: Outcome, rng: &mut R) -> Result<(Self, f64)> {
        if mode >= self.n_modes {
            return Err(Error::ModeOutOfRange { index: mode, n_modes: self.n_modes });
        }
        let pi = 2 * mode + 1;
        let var = self.cov[(pi, pi)];
        if var < DEGENERATE_VARIANCE {
            return Err(Error::DegenerateMeasurement { variance: var });
        }
        let value = match outcome {
            Outcome::Forced(v) => v,
            Outcome::Sample => {
                let z: f64 = rng.sample(StandardNormal);
                self.mean[pi] + var.sqrt() * z
            }
        };
        let keep: Vec<usize> = (0..2 * self.n_modes).filter(|&i| i / 2 != mode).collect();
        let k = keep.len();
        let gain = DVector::from_iterator(k, keep.iter().map(|&i| self.cov[(i, pi)] / var));
        let mean = DVector::from_iterator(k, keep.iter().map(|&i| self.mean[i]))
            + &gain * (value - self.mean[pi]);
        let mut cov = RMat::from_fn(k, k, |a, b| {
            let (i, j) = (keep[a], keep[b]);
            self.cov[(i, j)] - self.cov[(i, pi)] * self.cov[(pi, j)] / var
        });
        symmetrize(&mut cov);
        Ok((GaussianState { n_modes: self.n_modes - 1, mean, cov }, value))
    }

    /// `coeffs^T cov coeffs` in vacuum units (divided by 1/4).
    pub fn nullifier_variance(&self, coeffs: &RVec) -> Result<f64> {
        if coeffs.len() != 2 * self.n_modes {
            return Err(Error::ModeCountMismatch { expected: self.n_modes, found: coeffs.len() / 2 });
        }
        Ok(coeffs.dot(&(&self.cov * coeffs)) / VACUUM_VARIANCE)
    }

    /// Smallest eigenvalue of the Hermitian matrix `cov + (i/4) Omega`.
    pub fn physicality_margin(&self) -> f64 {
        if self.n_modes == 0 {
            return 0.0;
        }
        let omega = symplectic_form(self.n_modes);
        let h = CMat::from_fn(2 * self.n_modes, 2 * self.n_modes, |i, j| {
            c(self.cov[(i, j)], VACUUM_VARIANCE * omega[(i, j)])
        });
        SymmetricEigen::new(h).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn is_physical(&self) -> bool {
        self.physicality_margin() >= -1e-9
    }

    /// `det(4 cov)`, equal to 1 for pure states.
    pub fn purity_determinant(&self) -> f64 {
        (&self.cov * (1.0 / VACUUM_VARIANCE)).determinant()
    }

    pub fn to_json(&self) -> CovarianceJson {
        CovarianceJson {
            n_modes: self.n_modes,
            ordering: "xpxp".into(),
            mean: self.mean.iter().cloned().collect(),
            cov: self.cov.row_iter().map(|r| r.iter().cloned().collect()).collect(),
        }
    }

    pub fn from_json(json: &CovarianceJson) -> Result<Self> {
        if json.ordering != "xpxp" {
            return Err(Error::InvalidInput(format!("unsupported quadrature ordering `{}`", json.ordering)));
        }
        let dim = 2 * json.n_modes;
        if json.mean.len() != dim || json.cov.len() != dim || json.cov.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidInput("covariance arrays do not match n_modes".into()));
        }
        let mean = RVec::from_vec(json.mean.clone());
        let cov = RMat::from_fn(dim, dim, |i, j| json.cov[i][j]);
        Self::from_parts(mean, cov)
    }
}

/// Wire form of a Gaussian state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceJson {
    pub n_modes: usize,
    pub ordering: String,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

fn symmetrize(m: &mut RMat) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Squeezing in nats to decibels of variance reduction: `dB = (20 / ln 10) r`.
pub fn nats_to_db(r: f64) -> f64 {
    20.0 / std::f64::consts::LN_10 * r
}

pub fn db_to_nats(db: f64) -> f64 {
    db * std::f64::consts::LN_10 / 20.0
}
