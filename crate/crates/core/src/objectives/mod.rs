//! Client objective functions: least-squares and softmax regression, their
//! gradients and proximal maps, and the global-optimum oracle.

mod problem;
mod quadratic;
mod softmax;

pub use problem::{ClientObjective, FederatedProblem, Optimum, OracleOptions};
pub use quadratic::QuadraticObjective;
pub use softmax::SoftmaxObjective;
