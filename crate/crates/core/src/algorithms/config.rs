use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The optimizer round kernel to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Fedave,
    PdmmExact,
    Fedsplit,
    FedsplitInexact,
    Gpdmm,
    Agpdmm,
    AgpdmmVariant,
    Scaffold,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Fedave,
        Method::PdmmExact,
        Method::Fedsplit,
        Method::FedsplitInexact,
        Method::Gpdmm,
        Method::Agpdmm,
        Method::AgpdmmVariant,
        Method::Scaffold,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Fedave => "fedave",
            Method::PdmmExact => "pdmm_exact",
            Method::Fedsplit => "fedsplit",
            Method::FedsplitInexact => "fedsplit_inexact",
            Method::Gpdmm => "gpdmm",
            Method::Agpdmm => "agpdmm",
            Method::AgpdmmVariant => "agpdmm_variant",
            Method::Scaffold => "scaffold",
        }
    }

    /// True for the methods that carry primal/dual pairs of the consensus
    /// constraints (exact PDMM and its gradient-based variants).
    pub fn is_pdmm_family(&self) -> bool {
        matches!(
            self,
            Method::PdmmExact | Method::Gpdmm | Method::Agpdmm | Method::AgpdmmVariant
        )
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where the inexact-FedSplit inner loop starts each iteration: at the mixed
/// primal/dual point `z_{s|i}` or at the fresh server iterate `x_s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InexactInit {
    Z,
    Xs,
}

/// Which client estimate feeds the dual update: the running average of the
/// inner iterates or the most recent endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaUpdate {
    Average,
    Recent,
}

/// Per-method hyperparameters. `rho` and `gamma` are optional on input;
/// [`AlgoConfig::resolve`] applies the defaults exactly once (`rho = 1/(K eta)`,
/// `gamma = 1/rho`) and validates every field. Fields irrelevant to the chosen
/// method are kept as given and simply ignored by the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgoConfig {
    pub method: Method,
    /// Client gradient stepsize.
    pub eta: f64,
    /// Inner gradient steps per round.
    #[serde(rename = "K")]
    pub k: usize,
    /// Consensus penalty.
    pub rho: Option<f64>,
    /// FedSplit penalty.
    pub gamma: Option<f64>,
    /// Server stepsize (SCAFFOLD).
    pub eta_g: f64,
    pub inexact_init: InexactInit,
    pub lambda_update: LambdaUpdate,
}

impl AlgoConfig {
    pub fn new(method: Method, eta: f64) -> Self {
        Self {
            method,
            eta,
            k: 1,
            rho: None,
            gamma: None,
            eta_g: 1.0,
            inexact_init: InexactInit::Z,
            lambda_update: LambdaUpdate::Average,
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = Some(rho);
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn with_eta_g(mut self, eta_g: f64) -> Self {
        self.eta_g = eta_g;
        self
    }

    pub fn with_inexact_init(mut self, init: InexactInit) -> Self {
        self.inexact_init = init;
        self
    }

    pub fn with_lambda_update(mut self, update: LambdaUpdate) -> Self {
        self.lambda_update = update;
        self
    }

    /// Validates the fields and fills in unset penalties. Resolution is
    /// idempotent, so defaults are applied exactly once.
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        if self.k < 1 {
            return Err(Error::Config("K must be >= 1".into()));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.eta_g > 0.0 && self.eta_g.is_finite()) {
            return Err(Error::Config(format!(
                "eta_g must be positive, got {}",
                self.eta_g
            )));
        }
        let rho = self.rho.unwrap_or(1.0 / (self.k as f64 * self.eta));
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Config(format!("rho must be positive, got {rho}")));
        }
        let gamma = self.gamma.unwrap_or(1.0 / rho);
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
        }
        Ok(ResolvedConfig {
            method: self.method,
            eta: self.eta,
            k: self.k,
            rho,
            gamma,
            eta_g: self.eta_g,
            inexact_init: self.inexact_init,
            lambda_update: self.lambda_update,
        })
    }
}

/// [`AlgoConfig`] with all defaults applied; what the kernels consume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedConfig {
    pub method: Method,
    pub eta: f64,
    pub k: usize,
    pub rho: f64,
    pub gamma: f64,
    pub eta_g: f64,
    pub inexact_init: InexactInit,
    pub lambda_update: LambdaUpdate,
}

impl ResolvedConfig {
    /// The original config form with the resolved penalties filled in.
    pub fn as_config(&self) -> AlgoConfig {
        AlgoConfig {
            method: self.method,
            eta: self.eta,
            k: self.k,
            rho: Some(self.rho),
            gamma: Some(self.gamma),
            eta_g: self.eta_g,
            inexact_init: self.inexact_init,
            lambda_update: self.lambda_update,
        }
    }
}
