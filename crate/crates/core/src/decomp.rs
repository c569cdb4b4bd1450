//! Beam-splitter networks.
//!
//! A network is an ordered product of elementary matrices written the way an
//! operator product is: the leftmost element acts last. Mode indices are
//! 0-based in memory and 1-based on disk.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{beam_splitter_block, Sign};
use crate::linalg::{c, ensure_unitary, max_abs, CMat, I};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Element {
    /// `(F_k)_kk = i`; the dagger has `-i`.
    Fourier { mode: usize, dagger: bool },
    /// Identity except the `(k, l)` block `[[t, s], [+-s, -+t]]`.
    BeamSplitter { modes: (usize, usize), t: f64, sign: Sign },
    Swap { modes: (usize, usize) },
    /// `e^{i phi}` on mode `k`.
    Phase { mode: usize, phi: f64 },
}

impl Element {
    fn max_mode(&self) -> usize {
        match *self {
            Element::Fourier { mode, .. } | Element::Phase { mode, .. } => mode,
            Element::BeamSplitter { modes, .. } | Element::Swap { modes } => modes.0.max(modes.1),
        }
    }

    pub fn matrix(&self, n: usize) -> CMat {
        let mut m = CMat::identity(n, n);
        match *self {
            Element::Fourier { mode, dagger } => m[(mode, mode)] = if dagger { -I } else { I },
            Element::BeamSplitter { modes: (k, l), t, sign } => {
                let b = beam_splitter_block(t, sign);
                m[(k, k)] = c(b[0][0], 0.0);
                m[(k, l)] = c(b[0][1], 0.0);
                m[(l, k)] = c(b[1][0], 0.0);
                m[(l, l)] = c(b[1][1], 0.0);
            }
            Element::Swap { modes: (k, l) } => {
                m[(k, k)] = c(0.0, 0.0);
                m[(l, l)] = c(0.0, 0.0);
                m[(k, l)] = c(1.0, 0.0);
                m[(l, k)] = c(1.0, 0.0);
            }
            Element::Phase { mode, phi } => m[(mode, mode)] = c(phi.cos(), phi.sin()),
        }
        m
    }

    pub fn is_beam_splitter(&self) -> bool {
        matches!(self, Element::BeamSplitter { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementaryNetwork {
    pub n_modes: usize,
    pub elements: Vec<Element>,
}

impl ElementaryNetwork {
    pub fn beam_splitter_count(&self) -> usize {
        self.elements.iter().filter(|e| e.is_beam_splitter()).count()
    }

    pub fn to_json(&self) -> NetworkJson {
        NetworkJson {
            n_modes: self.n_modes,
            elements: self
                .elements
                .iter()
                .map(|e| match *e {
                    Element::Fourier { mode, dagger } => ElementJson::F { mode: mode + 1, dagger },
                    Element::BeamSplitter { modes: (k, l), t, sign } => ElementJson::Bs { modes: [k + 1, l + 1], t, sign },
                    Element::Swap { modes: (k, l) } => ElementJson::Swap { modes: [k + 1, l + 1] },
                    Element::Phase { mode, phi } => ElementJson::P { mode: mode + 1, phi },
                })
                .collect(),
        }
    }

    pub fn from_json(json: &NetworkJson) -> Result<Self> {
        let idx = |m: usize| {
            m.checked_sub(1).ok_or_else(|| Error::InvalidInput("network modes are 1-based".into()))
        };
        let elements = json
            .elements
            .iter()
            .map(|e| {
                Ok(match *e {
                    ElementJson::F { mode, dagger } => Element::Fourier { mode: idx(mode)?, dagger },
                    ElementJson::Bs { modes: [k, l], t, sign } => {
                        if !(-1.0..=1.0).contains(&t) {
                            return Err(Error::InvalidInput(format!("beam splitter t = {t} outside [-1, 1]")));
                        }
                        Element::BeamSplitter { modes: (idx(k)?, idx(l)?), t, sign }
                    }
                    ElementJson::Swap { modes: [k, l] } => Element::Swap { modes: (idx(k)?, idx(l)?) },
                    ElementJson::P { mode, phi } => Element::Phase { mode: idx(mode)?, phi },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ElementaryNetwork { n_modes: json.n_modes, elements })
    }
}

/// Ordered product of the elements, leftmost acting last.
pub fn evaluate_network(net: &ElementaryNetwork) -> Result<CMat> {
    let n = net.n_modes;
    let mut u = CMat::identity(n, n);
    for e in &net.elements {
        if e.max_mode() >= n {
            return Err(Error::ModeOutOfRange { index: e.max_mode(), n_modes: n });
        }
        if let Element::BeamSplitter { modes: (k, l), .. } | Element::Swap { modes: (k, l) } = *e {
            if k == l {
                return Err(Error::InvalidInput(format!("two-mode element on a single mode {}", k + 1)));
            }
        }
        u *= e.matrix(n);
    }
    Ok(u)
}

/// Triangular nulling of sub-diagonal entries.
///
/// Column by column, entry `(i, j)` is cleared against row `i - 1` by a phase
/// on row `i` and a `B^+` reflection of rows `(i - 1, i)`; the remaining
/// diagonal is absorbed by single-mode phases. Uses at most `n(n-1)/2` beam
/// splitters.
pub fn reck_decompose(u: &CMat) -> Result<ElementaryNetwork> {
    let n = u.nrows();
    if !u.is_square() {
        return Err(Error::InvalidInput("interferometer must be square".into()));
    }
    ensure_unitary(u, 1e-9)?;
    let mut w = u.clone();
    // each step T = B^+ P left-multiplies w; U = T_1^dagger T_2^dagger ... D
    let mut elements = Vec::new();
    for j in 0..n {
        for i in ((j + 1)..n).rev() {
            let a = w[(i - 1, j)];
            let b = w[(i, j)];
            if b.norm() < 1e-15 {
                continue;
            }
            let rho = (a.norm_sqr() + b.norm_sqr()).sqrt();
            let phi = if a.norm() > 0.0 { a.arg() - b.arg() } else { -b.arg() };
            let phase = c(phi.cos(), phi.sin());
            for col in 0..n {
                w[(i, col)] *= phase;
            }
            let t = a.norm() / rho;
            let bs = Element::BeamSplitter { modes: (i - 1, i), t, sign: Sign::Plus };
            let blk = bs.matrix(n);
            w = blk * w;
            w[(i, j)] = c(0.0, 0.0);
            // T^dagger = P^dagger B^+
            if phi != 0.0 {
                elements.push(Element::Phase { mode: i, phi: -phi });
            }
            elements.push(bs);
        }
    }
    for k in 0..n {
        let phi = w[(k, k)].arg();
        if phi.abs() > 1e-15 {
            elements.push(Element::Phase { mode: k, phi });
        }
    }
    let net = ElementaryNetwork { n_modes: n, elements };
    let residual = max_abs(&(evaluate_network(&net)? - u));
    if residual > 1e-9 {
        return Err(Error::Decomposition { residual });
    }
    Ok(net)
}

/// `F_4 S_12 F_1^dagger B_34^+(1/sqrt 2) B_12^+(-1/sqrt 2) B_23^-(1/sqrt 5) F_3^dagger F_4^dagger`,
/// a three-beam-splitter circuit for the linear four-mode cluster.
pub fn paper_minimal_chain4() -> ElementaryNetwork {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    ElementaryNetwork {
        n_modes: 4,
        elements: vec![
            Element::Fourier { mode: 3, dagger: false },
            Element::Swap { modes: (0, 1) },
            Element::Fourier { mode: 0, dagger: true },
            Element::BeamSplitter { modes: (2, 3), t: h, sign: Sign::Plus },
            Element::BeamSplitter { modes: (0, 1), t: -h, sign: Sign::Plus },
            Element::BeamSplitter { modes: (1, 2), t: 1.0 / 5f64.sqrt(), sign: Sign::Minus },
            Element::Fourier { mode: 2, dagger: true },
            Element::Fourier { mode: 3, dagger: true },
        ],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkJson {
    pub n_modes: usize,
    pub elements: Vec<ElementJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum ElementJson {
    #[serde(rename = "BS")]
    Bs { modes: [usize; 2], t: f64, sign: Sign },
    F { mode: usize, dagger: bool },
    P { mode: usize, phi: f64 },
    #[serde(rename = "SWAP")]
    Swap { modes: [usize; 2] },
}
