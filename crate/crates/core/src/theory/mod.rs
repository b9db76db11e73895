//! Executable forms of the convergence certificates: KKT residuals, the
//! analysis constants, the Lyapunov quantity, the per-step and duality-gap
//! inequalities, the sublinear certificate and a polarization-identity checker.

mod certificates;
mod inequalities;

pub use certificates::{
    lyapunov_q, rate_params, sublinear_certificate, LyapunovSample, RateParams,
    SublinearCertificate,
};
pub use inequalities::{inner_step_slack, kkt_residual, duality_gap, polarization_identity, KktResiduals, PolarizationCheck};
