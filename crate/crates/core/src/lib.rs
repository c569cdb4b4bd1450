//! Gaussian cluster states: circuit synthesis, interferometer decomposition
//! and teleportation through the resulting states.
//!
//! Quadratures follow `a = x + i p` with vacuum variance `1/4`; covariance
//! matrices use interleaved `(x_1, p_1, x_2, p_2, ...)` ordering.

pub mod canonical;
pub mod circuit;
pub mod decomp;
pub mod error;
pub mod gaussian;
pub mod gram;
pub mod graph;
pub mod json;
pub mod linalg;
pub mod teleport;

pub use canonical::{canonical_lubo, synthesize_canonical, CanonicalLubo};
pub use circuit::{squeezing_budget, Provenance, SqueezingBudget, SynthesisResult};
pub use decomp::{evaluate_network, reck_decompose, Element, ElementaryNetwork};
pub use error::{Error, Result};
pub use gaussian::{GaussianState, Outcome, Sign, SymplecticOp};
pub use gram::{derive_gram, synthesize_gram, AlphaMatrix, FactorStrategy, GramMatrix, PaperFixture};
pub use graph::{measure_nullifiers, Graph, NullifierReport};
pub use linalg::{CMat, RMat};
pub use teleport::{run_teleport, ClusterKind, ProtocolSpec, TeleportReport};
