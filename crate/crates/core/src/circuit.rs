//! Off-line squeezers followed by one interferometer: the common output of
//! both synthesis routes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{nats_to_db, GaussianState, SymplecticOp};
use crate::linalg::{c, ensure_unitary, CMat, RMat};

/// How a circuit was obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    /// Exact replacement of the QND network with input squeezing `r`.
    Canonical { r: f64 },
    /// Cluster-type circuit from real row vectors `alpha` (`Re U = alpha`).
    Gram { alpha: RMat, fixture: Option<String> },
    /// Read from a file without provenance.
    External,
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub u: CMat,
    /// Input-side interferometer; acts trivially on vacuum.
    pub v: Option<CMat>,
    /// Per-input squeezing `R_l` in nats, `x -> e^{R} x`.
    pub squeezing: Vec<f64>,
    pub lambda_a: Vec<f64>,
    pub lambda_b: Vec<f64>,
    pub provenance: Provenance,
}

impl SynthesisResult {
    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    /// Squeezes vacuum input `l` by `R_l`, then applies `U`.
    pub fn prepare_state(&self) -> Result<GaussianState> {
        prepare_state(&self.u, &self.squeezing)
    }

    pub fn with_squeezing(mut self, squeezing: Vec<f64>) -> Result<Self> {
        if squeezing.len() != self.n() {
            return Err(Error::ModeCountMismatch { expected: self.n(), found: squeezing.len() });
        }
        let (la, lb) = lambdas_from_squeezing(&squeezing);
        self.lambda_a = la;
        self.lambda_b = lb;
        self.squeezing = squeezing;
        Ok(self)
    }

    pub fn to_json(&self) -> SynthesisJson {
        SynthesisJson {
            n: self.n(),
            u: self
                .u
                .row_iter()
                .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
            r: self.squeezing.clone(),
            lambda_a: self.lambda_a.clone(),
            lambda_b: self.lambda_b.clone(),
            provenance: match &self.provenance {
                Provenance::Canonical { r } => ProvenanceJson::Canonical { r: *r },
                Provenance::Gram { alpha, fixture } => ProvenanceJson::Gram {
                    alpha: alpha.row_iter().map(|r| r.iter().cloned().collect()).collect(),
                    fixture: fixture.clone(),
                },
                Provenance::External => ProvenanceJson::External,
            },
        }
    }

    pub fn from_json(json: &SynthesisJson) -> Result<Self> {
        let n = json.n;
        if json.u.len() != n || json.u.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput(format!("U must be {n}x{n}")));
        }
        if json.r.len() != n {
            return Err(Error::InvalidInput(format!("R must have {n} entries")));
        }
        if json.r.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("squeezing values must be finite".into()));
        }
        let u = CMat::from_fn(n, n, |i, j| c(json.u[i][j][0], json.u[i][j][1]));
        let provenance = match &json.provenance {
            ProvenanceJson::Canonical { r } => Provenance::Canonical { r: *r },
            ProvenanceJson::Gram { alpha, fixture } => {
                if alpha.len() != n || alpha.iter().any(|r| r.len() != n) {
                    return Err(Error::InvalidInput(format!("alpha must be {n}x{n}")));
                }
                Provenance::Gram { alpha: RMat::from_fn(n, n, |i, j| alpha[i][j]), fixture: fixture.clone() }
            }
            ProvenanceJson::External => Provenance::External,
        };
        let (la, lb) = if json.lambda_a.len() == n && json.lambda_b.len() == n {
            (json.lambda_a.clone(), json.lambda_b.clone())
        } else {
            lambdas_from_squeezing(&json.r)
        };
        Ok(SynthesisResult { u, v: None, squeezing: json.r.clone(), lambda_a: la, lambda_b: lb, provenance })
    }
}

/// `lambda^A = cosh^2 R`, `lambda^B = sinh^2 R` for a single-mode squeezer.
pub fn lambdas_from_squeezing(squeezing: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (
        squeezing.iter().map(|r| r.cosh().powi(2)).collect(),
        squeezing.iter().map(|r| r.sinh().powi(2)).collect(),
    )
}

pub fn prepare_state(u: &CMat, squeezing: &[f64]) -> Result<GaussianState> {
    let n = u.nrows();
    if squeezing.len() != n {
        return Err(Error::ModeCountMismatch { expected: n, found: squeezing.len() });
    }
    ensure_unitary(u, 1e-9)?;
    let mut st = GaussianState::vacuum(n)?;
    for (mode, &r) in squeezing.iter().enumerate() {
        st = st.apply(&SymplecticOp::Squeeze { mode, r })?;
    }
    st.apply_interferometer(u)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisJson {
    pub n: usize,
    #[serde(rename = "U")]
    pub u: Vec<Vec<[f64; 2]>>,
    #[serde(rename = "R")]
    pub r: Vec<f64>,
    #[serde(rename = "lambdaA", default)]
    pub lambda_a: Vec<f64>,
    #[serde(rename = "lambdaB", default)]
    pub lambda_b: Vec<f64>,
    #[serde(default = "external")]
    pub provenance: ProvenanceJson,
}

fn external() -> ProvenanceJson {
    ProvenanceJson::External
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum ProvenanceJson {
    Canonical {
        r: f64,
    },
    Gram {
        alpha: Vec<Vec<f64>>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        fixture: Option<String>,
    },
    External,
}

/// Per-mode squeezing cost of a circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqueezingBudget {
    pub nats: Vec<f64>,
    pub db: Vec<f64>,
    pub total_db: f64,
    pub max_db: f64,
}

pub fn squeezing_budget(result: &SynthesisResult) -> SqueezingBudget {
    budget_for(&result.squeezing)
}

pub fn budget_for(squeezing: &[f64]) -> SqueezingBudget {
    let db: Vec<f64> = squeezing.iter().map(|&r| nats_to_db(r)).collect();
    SqueezingBudget {
        nats: squeezing.to_vec(),
        total_db: db.iter().sum(),
        max_db: db.iter().cloned().fold(0.0, f64::max),
        db,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_budget() {
        let b = budget_for(&[0.0, 0.0]);
        assert_eq!(b.db, vec![0.0, 0.0]);
        assert_eq!(b.total_db, 0.0);
    }

    #[test]
    fn json_roundtrip_keeps_provenance() {
        let res = SynthesisResult {
            u: CMat::identity(2, 2),
            v: None,
            squeezing: vec![0.5, 0.25],
            lambda_a: vec![],
            lambda_b: vec![],
            provenance: Provenance::Gram { alpha: RMat::identity(2, 2), fixture: Some("paper:twomode".into()) },
        }
        .with_squeezing(vec![0.5, 0.25])
        .unwrap();
        let text = serde_json::to_string(&res.to_json()).unwrap();
        assert!(text.contains("\"method\":\"gram\""));
        let back = SynthesisResult::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.u, res.u);
        assert_eq!(back.squeezing, res.squeezing);
        assert_eq!(back.provenance, res.provenance);
    }

    #[test]
    fn missing_provenance_is_external() {
        let text = r#"{"n":1,"U":[[[1.0,0.0]]],"R":[0.3]}"#;
        let back = SynthesisResult::from_json(&serde_json::from_str(text).unwrap()).unwrap();
        assert_eq!(back.provenance, Provenance::External);
        assert!((back.lambda_a[0] - back.lambda_b[0] - 1.0).abs() < 1e-12);
    }
}
