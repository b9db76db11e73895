use nalgebra::DVector;

use crate::algorithms::config::{Method, ResolvedConfig};
use crate::error::{Error, Result};
use crate::objectives::{FederatedProblem, Optimum};

/// Server iterate only; FedAve clients restart from `x_s` every round.
#[derive(Debug, Clone, PartialEq)]
pub struct FedAveState {
    pub x_s: DVector<f64>,
}

/// Primal/dual state of the PDMM family. `x_i` carries each client's latest
/// inner-loop endpoint (`x_i^{r-1,K}`), which is the warm start GPDMM uses.
#[derive(Debug, Clone, PartialEq)]
pub struct PdmmState {
    pub x_s: DVector<f64>,
    /// Server-owned duals `lambda_{s|i}`.
    pub lambda_si: Vec<DVector<f64>>,
    /// Carried client endpoints.
    pub x_i: Vec<DVector<f64>>,
    /// Client-owned duals `lambda_{i|s}`.
    pub lambda_is: Vec<DVector<f64>>,
}

/// FedSplit's auxiliary variables on both sides of each edge.
#[derive(Debug, Clone, PartialEq)]
pub struct FedSplitState {
    pub x_s: DVector<f64>,
    pub z_si: Vec<DVector<f64>>,
    pub x_i: Vec<DVector<f64>>,
    pub z_is: Vec<DVector<f64>>,
}

/// SCAFFOLD's server/client control variates next to the iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaffoldState {
    pub x_s: DVector<f64>,
    pub c: DVector<f64>,
    pub x_i: Vec<DVector<f64>>,
    pub c_i: Vec<DVector<f64>>,
}

impl PdmmState {
    pub fn zeros(m: usize, d: usize) -> Self {
        Self {
            x_s: DVector::zeros(d),
            lambda_si: vec![DVector::zeros(d); m],
            x_i: vec![DVector::zeros(d); m],
            lambda_is: vec![DVector::zeros(d); m],
        }
    }

    /// State at the saddle point: consensus primal iterates and the matching
    /// duals `lambda_{i|s} = grad f_i(x*) = -lambda_{s|i}`.
    pub fn at_saddle(optimum: &Optimum) -> Self {
        let m = optimum.lambda_star.len();
        Self {
            x_s: optimum.x_star.clone(),
            lambda_si: (0..m).map(|i| -&optimum.lambda_star[i]).collect(),
            x_i: vec![optimum.x_star.clone(); m],
            lambda_is: optimum.lambda_star.clone(),
        }
    }

    /// `(||sum_i lambda_{s|i}||, max_i ||lambda_{s|i}||)`.
    pub fn dual_sum_residual(&self) -> (f64, f64) {
        let d = self.x_s.len();
        let mut sum = DVector::zeros(d);
        let mut max_norm = 0.0_f64;
        for l in &self.lambda_si {
            sum += l;
            max_norm = max_norm.max(l.norm());
        }
        (sum.norm(), max_norm)
    }
}

impl FedSplitState {
    pub fn zeros(m: usize, d: usize) -> Self {
        Self {
            x_s: DVector::zeros(d),
            z_si: vec![DVector::zeros(d); m],
            x_i: vec![DVector::zeros(d); m],
            z_is: vec![DVector::zeros(d); m],
        }
    }

    /// `z = x - gamma * lambda` applied at the saddle point.
    pub fn at_saddle(optimum: &Optimum, gamma: f64) -> Self {
        let m = optimum.lambda_star.len();
        Self {
            x_s: optimum.x_star.clone(),
            z_si: (0..m)
                .map(|i| &optimum.x_star + gamma * &optimum.lambda_star[i])
                .collect(),
            x_i: vec![optimum.x_star.clone(); m],
            z_is: (0..m)
                .map(|i| &optimum.x_star - gamma * &optimum.lambda_star[i])
                .collect(),
        }
    }

    /// Recovers the dual variables `lambda_{i|s} = (x_i - z_{i|s}) / gamma`.
    pub fn lambda_is_view(&self, gamma: f64) -> Vec<DVector<f64>> {
        self.x_i
            .iter()
            .zip(&self.z_is)
            .map(|(x, z)| (x - z) / gamma)
            .collect()
    }
}

impl ScaffoldState {
    pub fn zeros(m: usize, d: usize) -> Self {
        Self {
            x_s: DVector::zeros(d),
            c: DVector::zeros(d),
            x_i: vec![DVector::zeros(d); m],
            c_i: vec![DVector::zeros(d); m],
        }
    }

    /// `(||sum_i (c_i - c)||, max_i ||c_i||)`.
    pub fn variate_sum_residual(&self) -> (f64, f64) {
        let d = self.x_s.len();
        let mut sum = DVector::zeros(d);
        let mut max_norm = 0.0_f64;
        for ci in &self.c_i {
            sum += ci - &self.c;
            max_norm = max_norm.max(ci.norm());
        }
        (sum.norm(), max_norm)
    }
}

/// Client iterates paired with the dual vectors a method exposes, as fed to
/// the KKT residuals.
pub type KktInputs = (Vec<DVector<f64>>, Vec<DVector<f64>>);

/// Per-method state, all zero-initialized by default (the carried GPDMM
/// endpoints start at `x_s`).
#[derive(Debug, Clone, PartialEq)]
pub enum AlgoState {
    FedAve(FedAveState),
    Pdmm(PdmmState),
    FedSplit(FedSplitState),
    Scaffold(ScaffoldState),
}

impl AlgoState {
    pub fn init(method: Method, m: usize, d: usize) -> Self {
        match method {
            Method::Fedave => AlgoState::FedAve(FedAveState {
                x_s: DVector::zeros(d),
            }),
            Method::PdmmExact | Method::Gpdmm | Method::Agpdmm | Method::AgpdmmVariant => {
                AlgoState::Pdmm(PdmmState::zeros(m, d))
            }
            Method::Fedsplit | Method::FedsplitInexact => {
                AlgoState::FedSplit(FedSplitState::zeros(m, d))
            }
            Method::Scaffold => AlgoState::Scaffold(ScaffoldState::zeros(m, d)),
        }
    }

    pub fn x_s(&self) -> &DVector<f64> {
        match self {
            AlgoState::FedAve(s) => &s.x_s,
            AlgoState::Pdmm(s) => &s.x_s,
            AlgoState::FedSplit(s) => &s.x_s,
            AlgoState::Scaffold(s) => &s.x_s,
        }
    }

    /// Client iterates and the dual vectors each method exposes for the KKT
    /// residuals: PDMM duals, FedSplit's transform, SCAFFOLD's control
    /// variates, and the raw client gradients for FedAve.
    pub fn kkt_inputs(
        &self,
        problem: &FederatedProblem,
        cfg: &ResolvedConfig,
    ) -> Result<KktInputs> {
        match self {
            AlgoState::Pdmm(s) => Ok((s.x_i.clone(), s.lambda_is.clone())),
            AlgoState::FedSplit(s) => Ok((s.x_i.clone(), s.lambda_is_view(cfg.gamma))),
            AlgoState::Scaffold(s) => Ok((s.x_i.clone(), s.c_i.clone())),
            AlgoState::FedAve(s) => {
                let m = problem.num_clients();
                let xs = vec![s.x_s.clone(); m];
                let lambdas = problem
                    .clients()
                    .iter()
                    .map(|c| c.grad(&s.x_s))
                    .collect::<Result<Vec<_>>>()?;
                Ok((xs, lambdas))
            }
        }
    }

    pub(crate) fn expect_pdmm(&self) -> Result<&PdmmState> {
        match self {
            AlgoState::Pdmm(s) => Ok(s),
            _ => Err(Error::Unsupported("state is not a PDMM state".into())),
        }
    }
}
