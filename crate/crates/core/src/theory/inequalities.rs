use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::objectives::{ClientObjective, FederatedProblem};

/// The three residuals of the saddle-point conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// `max_i ||grad f_i(x_i) - lambda_i||`.
    pub grad: f64,
    /// `max_i ||x_i - x_s||`.
    pub consensus: f64,
    /// `||sum_i lambda_i||`.
    pub dual_sum: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.grad.max(self.consensus).max(self.dual_sum)
    }
}

/// Evaluates the KKT residuals of a candidate primal/dual point.
pub fn kkt_residual(
    x_s: &DVector<f64>,
    clients_x: &[DVector<f64>],
    lambdas: &[DVector<f64>],
    problem: &FederatedProblem,
) -> Result<KktResiduals> {
    if clients_x.len() != problem.num_clients() || lambdas.len() != problem.num_clients() {
        return Err(Error::dims(problem.num_clients(), clients_x.len()));
    }
    let mut grad = 0.0_f64;
    let mut consensus = 0.0_f64;
    let mut dual_sum = DVector::zeros(x_s.len());
    for (i, (x, lam)) in clients_x.iter().zip(lambdas).enumerate() {
        grad = grad.max((problem.client(i).grad(x)? - lam).norm());
        consensus = consensus.max((x - x_s).norm());
        dual_sum += lam;
    }
    Ok(KktResiduals {
        grad,
        consensus,
        dual_sum: dual_sum.norm(),
    })
}

/// Slack (LHS minus RHS) of the per-step inequality for one inner iterate:
/// for any probe point `x` and `theta` in `[0, 1]`,
///
/// ```text
/// f(x) - f(x+)  >=  (x - x+)ᵀ[rho (x_s - x+) - lambda_{s|i}]
///                 + (1/(2 eta)) ||x - x+||^2
///                 - ((1/eta - theta mu)/2) ||x_k - x||^2
///                 + ((1/eta - L)/2) ||x+ - x_k||^2
///                 + ((1 - theta)/(2L)) ||grad f(x_k) - grad f(x)||^2
/// ```
///
/// where `x+` must be the exact quadratic-approximation step taken from
/// `x_k`. Callers assert `slack >= -1e-9`.
#[allow(clippy::too_many_arguments)]
pub fn inner_step_slack(
    objective: &ClientObjective,
    x_probe: &DVector<f64>,
    x_rk: &DVector<f64>,
    x_rk1: &DVector<f64>,
    x_s: &DVector<f64>,
    lambda_si: &DVector<f64>,
    eta: f64,
    rho: f64,
    theta: f64,
    mu: f64,
    lipschitz: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Constraint(format!("theta = {theta} outside [0, 1]")));
    }
    if 1.0 / eta < lipschitz {
        return Err(Error::Constraint(format!(
            "1/eta = {} < L = {lipschitz}",
            1.0 / eta
        )));
    }
    // The inequality is only valid for the exact inner step; recompute it.
    let coef = 1.0 / (1.0 / eta + rho);
    let grad_k = objective.grad(x_rk)?;
    let expected = x_rk - coef * (&grad_k + rho * (x_rk - x_s) + lambda_si);
    let drift = (&expected - x_rk1).norm();
    if drift > 1e-9 * (1.0 + expected.norm()) {
        return Err(Error::Misuse(format!(
            "x_rk1 is not the inner step generated from x_rk (drift {drift:.3e})"
        )));
    }

    let lhs = objective.value(x_probe)? - objective.value(x_rk1)?;
    let dual_term = rho * (x_s - x_rk1) - lambda_si;
    let mut rhs = (x_probe - x_rk1).dot(&dual_term);
    rhs += (x_probe - x_rk1).norm_squared() / (2.0 * eta);
    rhs -= (1.0 / eta - theta * mu) / 2.0 * (x_rk - x_probe).norm_squared();
    rhs += (1.0 / eta - lipschitz) / 2.0 * (x_rk1 - x_rk).norm_squared();
    rhs += (1.0 - theta) / (2.0 * lipschitz)
        * (&grad_k - objective.grad(x_probe)?).norm_squared();
    Ok(lhs - rhs)
}

/// Combined duality gap `sum_i [f_i(x_i) - f_i(x*) - x_iᵀ lambda*_i]`,
/// which is nonnegative at any point when the duals sum to zero.
pub fn duality_gap(problem: &FederatedProblem, clients_x: &[DVector<f64>]) -> Result<f64> {
    let optimum = problem
        .optimum()
        .ok_or_else(|| Error::Config("problem has no certified optimum".into()))?;
    if clients_x.len() != problem.num_clients() {
        return Err(Error::dims(problem.num_clients(), clients_x.len()));
    }
    let mut gap = 0.0;
    for (i, x) in clients_x.iter().enumerate() {
        gap += problem.client(i).value(x)? - problem.client(i).value(&optimum.x_star)?
            - x.dot(&optimum.lambda_star[i]);
    }
    Ok(gap)
}

/// Two readings of the four-vector inner-product identity: the standard
/// polarization form, and a variant that carries `||y2 + y4||^2` twice with
/// opposite signs (collapsing that term) where the standard form has
/// `||y1 + y4||^2`. The checker evaluates both so callers can report which
/// reading actually holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationCheck {
    pub lhs: f64,
    pub rhs_variant: f64,
    pub rhs_standard: f64,
}

impl PolarizationCheck {
    /// `(lhs, rhs)` with the variant right hand side.
    pub fn pair(&self) -> (f64, f64) {
        (self.lhs, self.rhs_variant)
    }

    pub fn standard_holds(&self, tol: f64) -> bool {
        (self.lhs - self.rhs_standard).abs() <= tol * (1.0 + self.lhs.abs())
    }

    pub fn variant_holds(&self, tol: f64) -> bool {
        (self.lhs - self.rhs_variant).abs() <= tol * (1.0 + self.lhs.abs())
    }
}

/// `lhs = (y1 - y2)ᵀ(y3 - y4)` against both right-hand-side readings.
pub fn polarization_identity(
    y1: &DVector<f64>,
    y2: &DVector<f64>,
    y3: &DVector<f64>,
    y4: &DVector<f64>,
) -> PolarizationCheck {
    let lhs = (y1 - y2).dot(&(y3 - y4));
    let rhs_variant = 0.5
        * ((y1 + y3).norm_squared() - (y2 + y4).norm_squared() - (y2 + y3).norm_squared()
            + (y2 + y4).norm_squared());
    let rhs_standard = 0.5
        * ((y1 + y3).norm_squared() - (y1 + y4).norm_squared() - (y2 + y3).norm_squared()
            + (y2 + y4).norm_squared());
    PolarizationCheck {
        lhs,
        rhs_variant,
        rhs_standard,
    }
}
