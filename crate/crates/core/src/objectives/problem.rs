use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::objectives::{QuadraticObjective, SoftmaxObjective};

/// One client's local function: value, gradient and (for quadratics) an exact
/// proximal map.
#[derive(Debug, Clone)]
pub enum ClientObjective {
    Quadratic(QuadraticObjective),
    Softmax(SoftmaxObjective),
}

impl ClientObjective {
    pub fn dim(&self) -> usize {
        match self {
            ClientObjective::Quadratic(q) => q.dim(),
            ClientObjective::Softmax(s) => s.dim(),
        }
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        match self {
            ClientObjective::Quadratic(q) => q.value(x),
            ClientObjective::Softmax(s) => s.value(x),
        }
    }

    pub fn grad(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            ClientObjective::Quadratic(q) => q.grad(x),
            ClientObjective::Softmax(s) => s.grad(x),
        }
    }

    /// Gradient used inside optimizer inner loops: softmax clients consume
    /// their batch at `cursor`, quadratic clients use the exact gradient and
    /// leave the cursor untouched.
    pub fn inner_grad(&self, x: &DVector<f64>, cursor: usize) -> Result<(DVector<f64>, usize)> {
        match self {
            ClientObjective::Quadratic(q) => Ok((q.grad(x)?, cursor)),
            ClientObjective::Softmax(s) => s.minibatch_grad(x, cursor),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            ClientObjective::Quadratic(q) => q.lipschitz(),
            ClientObjective::Softmax(s) => s.lipschitz(),
        }
    }

    pub fn modulus(&self) -> f64 {
        match self {
            ClientObjective::Quadratic(q) => q.modulus(),
            ClientObjective::Softmax(s) => s.modulus(),
        }
    }

    pub fn as_quadratic(&self) -> Option<&QuadraticObjective> {
        match self {
            ClientObjective::Quadratic(q) => Some(q),
            ClientObjective::Softmax(_) => None,
        }
    }

    pub fn as_softmax(&self) -> Option<&SoftmaxObjective> {
        match self {
            ClientObjective::Softmax(s) => Some(s),
            ClientObjective::Quadratic(_) => None,
        }
    }
}

/// Certified saddle point of the consensus problem: the minimizer, its value
/// and one dual vector per client (`lambda_star[i] = grad f_i(x_star)`).
#[derive(Debug, Clone)]
pub struct Optimum {
    pub x_star: DVector<f64>,
    pub f_star: f64,
    pub lambda_star: Vec<DVector<f64>>,
    /// True when the dual-sum residual met the 1e-8 certification bound.
    pub certified: bool,
    /// Achieved `||grad F(x_star)||`; callers decide what to do when the
    /// oracle stopped above tolerance.
    pub grad_residual: f64,
}

/// Stopping rule for the global-optimum oracle.
#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    pub grad_tol: f64,
    pub max_steps: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-10,
            max_steps: 1_000_000,
        }
    }
}

const CERTIFY_TOL: f64 = 1e-8;

/// A set of client objectives over one coordinating server, together with the
/// global curvature constants and (once solved) the certified optimum.
#[derive(Debug, Clone)]
pub struct FederatedProblem {
    clients: Vec<ClientObjective>,
    dim: usize,
    lipschitz: f64,
    modulus: f64,
    optimum: Option<Optimum>,
}

impl FederatedProblem {
    pub fn new(clients: Vec<ClientObjective>) -> Result<Self> {
        let Some(first) = clients.first() else {
            return Err(Error::Config("problem needs at least one client".into()));
        };
        let dim = first.dim();
        if let Some(bad) = clients.iter().find(|c| c.dim() != dim) {
            return Err(Error::dims(dim, bad.dim()));
        }
        let lipschitz = clients.iter().map(|c| c.lipschitz()).fold(0.0, f64::max);
        let modulus = clients
            .iter()
            .map(|c| c.modulus())
            .fold(f64::INFINITY, f64::min);
        Ok(Self {
            clients,
            dim,
            lipschitz,
            modulus,
            optimum: None,
        })
    }

    pub fn clients(&self) -> &[ClientObjective] {
        &self.clients
    }

    pub fn client(&self, i: usize) -> &ClientObjective {
        &self.clients[i]
    }

    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Max of the per-client gradient Lipschitz constants.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Min of the per-client strong-convexity moduli (zero when any client is
    /// only generally convex).
    pub fn modulus(&self) -> f64 {
        self.modulus
    }

    pub fn optimum(&self) -> Option<&Optimum> {
        self.optimum.as_ref()
    }

    pub fn all_quadratic(&self) -> bool {
        self.clients.iter().all(|c| c.as_quadratic().is_some())
    }

    /// `F(x) = sum_i f_i(x)`.
    pub fn total_value(&self, x: &DVector<f64>) -> Result<f64> {
        let mut total = 0.0;
        for c in &self.clients {
            total += c.value(x)?;
        }
        Ok(total)
    }

    pub fn total_grad(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let mut g = DVector::zeros(self.dim);
        for c in &self.clients {
            g += c.grad(x)?;
        }
        Ok(g)
    }

    /// Solves for the global optimum: normal equations when every client is
    /// quadratic, otherwise full-batch gradient descent on `F` until
    /// `||grad F|| <= grad_tol` or the step budget runs out.
    pub fn solve_optimum(&self, opts: OracleOptions) -> Result<Optimum> {
        let x_star = if self.all_quadratic() {
            self.solve_normal_equations()?
        } else {
            self.descend_to_optimum(opts)?
        };
        let lambda_star: Vec<DVector<f64>> = self
            .clients
            .iter()
            .map(|c| c.grad(&x_star))
            .collect::<Result<_>>()?;
        let mut dual_sum = DVector::zeros(self.dim);
        for l in &lambda_star {
            dual_sum += l;
        }
        let grad_residual = dual_sum.norm();
        Ok(Optimum {
            f_star: self.total_value(&x_star)?,
            x_star,
            lambda_star,
            certified: grad_residual <= CERTIFY_TOL,
            grad_residual,
        })
    }

    /// Solves and attaches the optimum, validating the KKT invariants.
    pub fn certify(&mut self, opts: OracleOptions) -> Result<()> {
        let optimum = self.solve_optimum(opts)?;
        self.attach_optimum(optimum)
    }

    /// Attaches a precomputed optimum after checking the KKT residuals:
    /// `||sum_i lambda_i|| <= 1e-8 (1 + max ||lambda_i||)` and
    /// `||grad f_i(x_star) - lambda_i|| <= 1e-8` for all clients.
    pub fn attach_optimum(&mut self, optimum: Optimum) -> Result<()> {
        if optimum.lambda_star.len() != self.num_clients() {
            return Err(Error::dims(self.num_clients(), optimum.lambda_star.len()));
        }
        let mut dual_sum = DVector::zeros(self.dim);
        let mut max_norm = 0.0_f64;
        for (i, lam) in optimum.lambda_star.iter().enumerate() {
            let grad_gap = (self.clients[i].grad(&optimum.x_star)? - lam).norm();
            if grad_gap > CERTIFY_TOL {
                return Err(Error::Constraint(format!(
                    "||grad f_{i}(x*) - lambda*_{i}|| = {grad_gap:.3e} exceeds 1e-8"
                )));
            }
            max_norm = max_norm.max(lam.norm());
            dual_sum += lam;
        }
        if optimum.certified && dual_sum.norm() > CERTIFY_TOL * (1.0 + max_norm) {
            return Err(Error::Constraint(format!(
                "||sum lambda*|| = {:.3e} exceeds certification bound",
                dual_sum.norm()
            )));
        }
        self.optimum = Some(optimum);
        Ok(())
    }

    /// `(sum_i A_iᵀA_i) x = sum_i A_iᵀ b_i`, Cholesky with one refinement step.
    fn solve_normal_equations(&self) -> Result<DVector<f64>> {
        let mut m = DMatrix::<f64>::zeros(self.dim, self.dim);
        let mut rhs = DVector::<f64>::zeros(self.dim);
        for c in &self.clients {
            let q = c.as_quadratic().expect("checked all_quadratic");
            m += q.gram();
            rhs += q.atb();
        }
        let chol = m
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical("aggregate Gram matrix is singular".into()))?;
        let mut x = chol.solve(&rhs);
        let residual = &rhs - &m * &x;
        x += chol.solve(&residual);
        Ok(x)
    }

    fn descend_to_optimum(&self, opts: OracleOptions) -> Result<DVector<f64>> {
        let total_lipschitz: f64 = self.clients.iter().map(|c| c.lipschitz()).sum();
        if total_lipschitz <= 0.0 {
            return Err(Error::Numerical("nonpositive Lipschitz bound".into()));
        }
        let step = 1.0 / total_lipschitz;
        let mut x = DVector::zeros(self.dim);
        for _ in 0..opts.max_steps {
            let g = self.total_grad(&x)?;
            if g.norm() <= opts.grad_tol {
                break;
            }
            x.axpy(-step, &g, 1.0);
        }
        Ok(x)
    }
}
