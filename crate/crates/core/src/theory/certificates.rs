use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::objectives::{FederatedProblem, Optimum};

/// Analysis constants of the linear-rate certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateParams {
    pub theta: f64,
    pub phi: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub beta: f64,
}

/// Computes the rate constants
///
/// ```text
/// gamma1 = min((1 - theta)/(2 L eta^2), (1/eta - L)/2)
/// gamma2 = min(theta mu phi / (2 rho^2), gamma1 eta^2 / 2)
/// beta   = max((1/(4 rho) - gamma2/2)/(1/(4 rho)),
///              (1/eta - theta mu)/(1/eta - theta mu phi))
/// ```
///
/// after validating `1/eta > L >= mu > 0`, `theta, phi in (0, 1)` and the
/// admissibility condition `theta mu phi/(4 rho^2) < 1/(4 rho)`.
pub fn rate_params(
    eta: f64,
    rho: f64,
    lipschitz: f64,
    mu: f64,
    theta: f64,
    phi: f64,
) -> Result<RateParams> {
    if mu <= 0.0 || !mu.is_finite() {
        return Err(Error::Constraint(format!("mu = {mu} violates mu > 0")));
    }
    if lipschitz < mu {
        return Err(Error::Constraint(format!(
            "L = {lipschitz} violates L >= mu = {mu}"
        )));
    }
    if 1.0 / eta <= lipschitz {
        return Err(Error::Constraint(format!(
            "1/eta = {} violates 1/eta > L = {lipschitz}",
            1.0 / eta
        )));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Constraint(format!("theta = {theta} outside (0, 1)")));
    }
    if !(phi > 0.0 && phi < 1.0) {
        return Err(Error::Constraint(format!("phi = {phi} outside (0, 1)")));
    }
    if rho <= 0.0 {
        return Err(Error::Constraint(format!("rho = {rho} violates rho > 0")));
    }
    if theta * mu * phi / (4.0 * rho * rho) >= 1.0 / (4.0 * rho) {
        return Err(Error::Constraint(format!(
            "theta mu phi/(4 rho^2) = {} violates < 1/(4 rho) = {}",
            theta * mu * phi / (4.0 * rho * rho),
            1.0 / (4.0 * rho)
        )));
    }
    let gamma1 = ((1.0 - theta) / (2.0 * lipschitz * eta * eta)).min((1.0 / eta - lipschitz) / 2.0);
    let gamma2 = (theta * mu * phi / (2.0 * rho * rho)).min(gamma1 * eta * eta / 2.0);
    let quarter_rho = 1.0 / (4.0 * rho);
    let beta = ((quarter_rho - gamma2 / 2.0) / quarter_rho)
        .max((1.0 / eta - theta * mu) / (1.0 / eta - theta * mu * phi));
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Constraint(format!("beta = {beta} outside (0, 1)")));
    }
    Ok(RateParams {
        theta,
        phi,
        gamma1,
        gamma2,
        beta,
    })
}

/// One evaluation of the Lyapunov quantity, split into its per-client terms.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSample {
    pub round: usize,
    pub q: f64,
    /// `(1/eta - theta mu)/(2K) ||x_i^{r-1,K} - x*||^2` per client.
    pub primal: Vec<f64>,
    /// `(1/(4 rho) - gamma2/2) ||rho (xbar_i - x*) + (lambda_i - lambda*_i)||^2` per client.
    pub primal_dual: Vec<f64>,
}

/// Evaluates the round-`r` Lyapunov quantity from the round internals:
/// the inner-loop starting points, the dual-update aggregates and the fresh
/// client duals.
#[allow(clippy::too_many_arguments)]
pub fn lyapunov_q(
    round: usize,
    prev_clients_xk: &[DVector<f64>],
    xbar: &[DVector<f64>],
    lambda_next: &[DVector<f64>],
    optimum: &Optimum,
    eta: f64,
    rho: f64,
    k: usize,
    theta: f64,
    mu: f64,
    gamma2: f64,
) -> Result<LyapunovSample> {
    let m = optimum.lambda_star.len();
    if prev_clients_xk.len() != m || xbar.len() != m || lambda_next.len() != m {
        return Err(Error::dims(m, prev_clients_xk.len()));
    }
    let primal_weight = (1.0 / eta - theta * mu) / (2.0 * k as f64);
    let dual_weight = 1.0 / (4.0 * rho) - gamma2 / 2.0;
    let mut primal = Vec::with_capacity(m);
    let mut primal_dual = Vec::with_capacity(m);
    let mut q = 0.0;
    for i in 0..m {
        let p = primal_weight * (&prev_clients_xk[i] - &optimum.x_star).norm_squared();
        let mixed = rho * (&xbar[i] - &optimum.x_star) + (&lambda_next[i] - &optimum.lambda_star[i]);
        let pd = dual_weight * mixed.norm_squared();
        q += p + pd;
        primal.push(p);
        primal_dual.push(pd);
    }
    Ok(LyapunovSample {
        round,
        q,
        primal,
        primal_dual,
    })
}

/// The scaled series `(R, R * G(R))` of the sublinear certificate, where
/// `G(R)` is the combined duality gap at the running averages.
#[derive(Debug, Clone)]
pub struct SublinearCertificate {
    pub series: Vec<(usize, f64)>,
    /// Least-squares slope of the series, normalised to total relative drift
    /// across the window.
    pub slope_rel: f64,
    /// Largest series value over the first quarter of rounds.
    pub fitted_bound: f64,
}

impl SublinearCertificate {
    pub const SLOPE_TOL: f64 = 1e-3;

    /// Bounded series, i.e. no upward trend: relative slope at most 1e-3.
    pub fn passes(&self) -> bool {
        self.slope_rel <= Self::SLOPE_TOL
    }
}

/// Builds the sublinear-certificate series from per-round traces of the
/// dual-update aggregates `xbar_i^{r,K}` and the fresh duals
/// `lambda_{i|s}^{r+1}`. For round count `R` the running averages are scored
/// with the combined gap
///
/// ```text
/// G(R) = sum_i [f_i(xbar_i^R) - lambda*_iᵀ xbar_i^R - f_i(x*)]
///      + sum_i (gamma1 eta^2 / 2) ||lambdabar_i^R - lambda*_i||^2
/// ```
///
/// and the series records `R * G(R)`.
pub fn sublinear_certificate(
    problem: &FederatedProblem,
    xbar_rounds: &[Vec<DVector<f64>>],
    lambda_rounds: &[Vec<DVector<f64>>],
    gamma1: f64,
    eta: f64,
) -> Result<SublinearCertificate> {
    let optimum = problem
        .optimum()
        .ok_or_else(|| Error::Config("problem has no certified optimum".into()))?;
    if xbar_rounds.len() != lambda_rounds.len() {
        return Err(Error::dims(xbar_rounds.len(), lambda_rounds.len()));
    }
    let m = problem.num_clients();
    let d = problem.dim();
    let f_star: Vec<f64> = problem
        .clients()
        .iter()
        .map(|c| c.value(&optimum.x_star))
        .collect::<Result<_>>()?;

    let mut x_sum = vec![DVector::<f64>::zeros(d); m];
    let mut l_sum = vec![DVector::<f64>::zeros(d); m];
    let mut series = Vec::with_capacity(xbar_rounds.len());
    for (r, (xs, ls)) in xbar_rounds.iter().zip(lambda_rounds).enumerate() {
        if xs.len() != m || ls.len() != m {
            return Err(Error::dims(m, xs.len()));
        }
        let rounds = (r + 1) as f64;
        let mut gap = 0.0;
        for i in 0..m {
            x_sum[i] += &xs[i];
            l_sum[i] += &ls[i];
            let x_avg = &x_sum[i] / rounds;
            let l_avg = &l_sum[i] / rounds;
            gap += problem.client(i).value(&x_avg)? - optimum.lambda_star[i].dot(&x_avg)
                - f_star[i];
            gap += gamma1 * eta * eta / 2.0 * (l_avg - &optimum.lambda_star[i]).norm_squared();
        }
        series.push((r + 1, rounds * gap));
    }

    // An everywhere-tiny series is bounded outright; the normalised fit is
    // noise-dominated there.
    let magnitude = series.iter().map(|&(_, s)| s.abs()).fold(0.0, f64::max);
    let slope_rel = if magnitude <= 1e-9 {
        0.0
    } else {
        relative_slope(&series)
    };
    let quarter = (series.len() / 4).max(1);
    let fitted_bound = series[..quarter]
        .iter()
        .map(|&(_, s)| s)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SublinearCertificate {
        series,
        slope_rel,
        fitted_bound,
    })
}

/// Least-squares slope of `s` against `R`, scaled by the window span and
/// normalised by the mean magnitude: the relative drift over the window.
fn relative_slope(series: &[(usize, f64)]) -> f64 {
    if series.len() < 2 {
        return 0.0;
    }
    let n = series.len() as f64;
    let mean_r = series.iter().map(|&(r, _)| r as f64).sum::<f64>() / n;
    let mean_s = series.iter().map(|&(_, s)| s).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for &(r, s) in series {
        let dr = r as f64 - mean_r;
        cov += dr * (s - mean_s);
        var += dr * dr;
    }
    let slope = cov / var;
    let span = (series[series.len() - 1].0 - series[0].0) as f64;
    let scale = series.iter().map(|&(_, s)| s.abs()).sum::<f64>() / n;
    slope * span / scale.max(f64::MIN_POSITIVE)
}
