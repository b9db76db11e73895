//! Deterministic simulator and verification toolkit for consensus
//! optimisation over a server-client network.
//!
//! The crate is organised around five pieces:
//!
//! - [`objectives`]: client objective functions (least squares, softmax
//!   regression), proximal maps and the global-optimum oracle;
//! - [`dataio`]: IDX dataset ingestion, class partitioning and counter-seeded
//!   synthetic problem generation;
//! - [`algorithms`]: the optimizer round kernels (FedAve, exact PDMM,
//!   FedSplit, inexact FedSplit, GPDMM, AGPDMM and its variant, SCAFFOLD);
//! - [`theory`]: executable forms of the convergence certificates (KKT
//!   residuals, the per-step inequality, the Lyapunov contraction and the
//!   sublinear certificate);
//! - [`runtime`]: the reproducible round driver with CSV/JSON trace output.

pub mod algorithms;
pub mod checks;
pub mod dataio;
pub mod error;
pub mod fixtures;
pub mod objectives;
pub mod runtime;
pub mod theory;

pub use algorithms::{AlgoConfig, AlgoState, Method};
pub use error::{Error, Result};
pub use objectives::{ClientObjective, FederatedProblem, Optimum};
