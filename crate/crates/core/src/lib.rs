//! Online greedy independent sets in dense random hypergraphs.
//!
//! The crate covers the r-uniform model `H_r(n, p)` and the r-partite model
//! `H(r, n, p)`: lazily sampled instances, closed-form thresholds, an online
//! arrival runtime, the plain and staged greedy algorithms, exhaustive
//! oracles for small instances, correlated replica families, and the sweep
//! harness used by the command-line tool.

pub mod error;
pub mod exact;
pub mod gamma;
pub mod greedy_balanced;
pub mod greedy_uniform;
pub mod harness;
pub mod ogp;
pub mod online;
pub mod sampling;
pub mod thresholds;

pub use error::{LabError, Result};
pub use gamma::GammaVector;
pub use greedy_uniform::GreedyResult;
pub use online::{ArrivalPolicy, Transcript};
pub use sampling::{EdgeKey, EdgeOracle, EdgeStatus, Model, ModelSpec, VertexId};
