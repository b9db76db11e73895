use nalgebra::DVector;

use crate::algorithms::config::{LambdaUpdate, Method, ResolvedConfig};
use crate::algorithms::state::PdmmState;
use crate::algorithms::RoundMessages;
use crate::error::{Error, Result};
use crate::objectives::{ClientObjective, FederatedProblem};

/// One exact inner iterate observed during a gradient-based PDMM round;
/// consumed by the per-step inequality checker.
#[derive(Debug, Clone)]
pub struct InnerStep {
    pub x_before: DVector<f64>,
    pub x_after: DVector<f64>,
}

/// Everything the theory checkers need from one GPDMM round.
#[derive(Debug, Clone)]
pub struct GpdmmArtifacts {
    /// Inner-loop starting points `x_i^{r-1,K}`.
    pub start_x: Vec<DVector<f64>>,
    /// The aggregate feeding the dual update (average or endpoint).
    pub xbar: Vec<DVector<f64>>,
    /// `lambda_{i|s}^{r+1}` produced this round.
    pub lambda_is_next: Vec<DVector<f64>>,
    /// Per-client inner iterate pairs.
    pub inner_steps: Vec<Vec<InnerStep>>,
}

fn check_shapes(state: &PdmmState, problem: &FederatedProblem, cursors: &[usize]) -> Result<()> {
    let m = problem.num_clients();
    if state.lambda_si.len() != m || state.x_i.len() != m || state.lambda_is.len() != m {
        return Err(Error::dims(m, state.lambda_si.len()));
    }
    if cursors.len() != m {
        return Err(Error::dims(m, cursors.len()));
    }
    if state.x_s.len() != problem.dim() {
        return Err(Error::dims(problem.dim(), state.x_s.len()));
    }
    Ok(())
}

/// Exact PDMM round over the server-client star graph. Every client solves
/// its penalized subproblem in closed form, so all clients must be quadratic.
pub fn pdmm_exact_round(
    state: &PdmmState,
    problem: &FederatedProblem,
    cfg: &ResolvedConfig,
    cursors: &mut [usize],
) -> Result<(PdmmState, RoundMessages)> {
    check_shapes(state, problem, cursors)?;
    if !problem.all_quadratic() {
        return Err(Error::Unsupported(
            "pdmm_exact needs an exact proximal map; only quadratic clients have one".into(),
        ));
    }
    let m = problem.num_clients();
    let rho = cfg.rho;
    let mut messages = RoundMessages::default();

    let mut x_i = Vec::with_capacity(m);
    let mut lambda_is = Vec::with_capacity(m);
    for i in 0..m {
        let q = problem.client(i).as_quadratic().expect("all quadratic");
        // downlink: the combination x_s - lambda_{s|i}/rho
        messages.down_vectors += 1;
        let v = &state.x_s - &state.lambda_si[i] / rho;
        let xi = q.prox(rho, &v)?;
        let lis = rho * (&state.x_s - &xi) - &state.lambda_si[i];
        // uplink: x_i - lambda_{i|s}/rho
        messages.up_vectors += 1;
        x_i.push(xi);
        lambda_is.push(lis);
    }

    let (x_s, lambda_si) = server_update(&x_i, &lambda_is, rho, m);
    Ok((
        PdmmState {
            x_s,
            lambda_si,
            x_i,
            lambda_is,
        },
        messages,
    ))
}

/// Shared server block: `x_s' = mean_i (xagg_i - lambda_{i|s}'/rho)` followed
/// by `lambda_{s|i}' = rho (xagg_i - x_s') - lambda_{i|s}'`. Accumulation runs
/// in ascending client order so results are schedule-independent.
fn server_update(
    xagg: &[DVector<f64>],
    lambda_is_next: &[DVector<f64>],
    rho: f64,
    m: usize,
) -> (DVector<f64>, Vec<DVector<f64>>) {
    let d = xagg[0].len();
    let mut x_s = DVector::zeros(d);
    for i in 0..m {
        x_s += &xagg[i] - &lambda_is_next[i] / rho;
    }
    x_s /= m as f64;
    let lambda_si = (0..m)
        .map(|i| rho * (&xagg[i] - &x_s) - &lambda_is_next[i])
        .collect();
    (x_s, lambda_si)
}

/// `K` quadratic-approximation steps from `x0`:
/// `x <- x - coef * [grad f_i(x) + rho (x - x_s) + lambda_{s|i}]`.
/// Returns the endpoint and the sum of the `K` produced iterates.
#[allow(clippy::too_many_arguments)]
fn inner_loop(
    objective: &ClientObjective,
    x0: &DVector<f64>,
    x_s: &DVector<f64>,
    lambda_si: &DVector<f64>,
    coef: f64,
    rho: f64,
    k: usize,
    cursor: &mut usize,
    mut record: Option<&mut Vec<InnerStep>>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let mut x = x0.clone();
    let mut sum = DVector::zeros(x.len());
    for _ in 0..k {
        let (grad, next_cursor) = objective.inner_grad(&x, *cursor)?;
        *cursor = next_cursor;
        let mut bracket = grad;
        bracket.axpy(rho, &x, 1.0);
        bracket.axpy(-rho, x_s, 1.0);
        bracket += lambda_si;
        let x_next = &x - coef * &bracket;
        if let Some(steps) = record.as_deref_mut() {
            steps.push(InnerStep {
                x_before: x.clone(),
                x_after: x_next.clone(),
            });
        }
        sum += &x_next;
        x = x_next;
    }
    Ok((x, sum))
}

/// Gradient-based PDMM round: clients warm-start from their own previous
/// endpoint and send one combined vector back.
pub fn gpdmm_round(
    state: &PdmmState,
    problem: &FederatedProblem,
    cfg: &ResolvedConfig,
    cursors: &mut [usize],
) -> Result<(PdmmState, RoundMessages)> {
    let (next, messages, _) = gpdmm_core(state, problem, cfg, cursors, false)?;
    Ok((next, messages))
}

/// Like [`gpdmm_round`] but also returns the round internals used by the
/// Lyapunov and per-step inequality checkers.
pub fn gpdmm_round_traced(
    state: &PdmmState,
    problem: &FederatedProblem,
    cfg: &ResolvedConfig,
    cursors: &mut [usize],
) -> Result<(PdmmState, RoundMessages, GpdmmArtifacts)> {
    let (next, messages, artifacts) = gpdmm_core(state, problem, cfg, cursors, true)?;
    Ok((next, messages, artifacts.expect("tracing was requested")))
}

fn gpdmm_core(
    state: &PdmmState,
    problem: &FederatedProblem,
    cfg: &ResolvedConfig,
    cursors: &mut [usize],
    trace: bool,
) -> Result<(PdmmState, RoundMessages, Option<GpdmmArtifacts>)> {
    check_shapes(state, problem, cursors)?;
    let m = problem.num_clients();
    let rho = cfg.rho;
    let coef = 1.0 / (1.0 / cfg.eta + rho);
    let mut messages = RoundMessages::default();

    let mut x_i = Vec::with_capacity(m);
    let mut xbar = Vec::with_capacity(m);
    let mut lambda_is = Vec::with_capacity(m);
    let mut inner_steps: Vec<Vec<InnerStep>> = Vec::new();
    for i in 0..m {
        // downlink: x_s - lambda_{s|i}/rho (one vector; the client recovers
        // the bracket from it, see the inner-step algebra)
        messages.down_vectors += 1;
        let mut record = trace.then(Vec::new);
        let (endpoint, sum) = inner_loop(
            problem.client(i),
            &state.x_i[i],
            &state.x_s,
            &state.lambda_si[i],
            coef,
            rho,
            cfg.k,
            &mut cursors[i],
            record.as_mut(),
        )?;
        let agg = match cfg.lambda_update {
            LambdaUpdate::Average => sum / cfg.k as f64,
            LambdaUpdate::Recent => endpoint.clone(),
        };
        let lis = rho * (&state.x_s - &agg) - &state.lambda_si[i];
        // uplink: xbar_i - lambda_{i|s}/rho
        messages.up_vectors += 1;
        x_i.push(endpoint);
        xbar.push(agg);
        lambda_is.push(lis);
        if let Some(steps) = record {
            inner_steps.push(steps);
        }
    }

    let (x_s, lambda_si) = server_update(&xbar, &lambda_is, rho, m);
    let artifacts = trace.then(|| GpdmmArtifacts {
        start_x: state.x_i.clone(),
        xbar: xbar.clone(),
        lambda_is_next: lambda_is.clone(),
        inner_steps,
    });
    Ok((
        PdmmState {
            x_s,
            lambda_si,
            x_i,
            lambda_is,
        },
        messages,
        artifacts,
    ))
}

/// Accelerated round: clients restart from the fresh server iterate, which
/// costs a second downlink vector (`x_s` and `lambda_{s|i}` travel separately)
/// and uses the most recent endpoint in the dual update. The variant form
/// instead takes plain gradient steps of size `eta` on the penalized
/// surrogate, doubling the effective stepsize at `K = 1`.
pub fn agpdmm_round(
    state: &PdmmState,
    problem: &FederatedProblem,
    cfg: &ResolvedConfig,
    cursors: &mut [usize],
) -> Result<(PdmmState, RoundMessages)> {
    check_shapes(state, problem, cursors)?;
    let m = problem.num_clients();
    let rho = cfg.rho;
    let coef = match cfg.method {
        Method::AgpdmmVariant => cfg.eta,
        _ => 1.0 / (1.0 / cfg.eta + rho),
    };
    let mut messages = RoundMessages::default();

    let mut x_i = Vec::with_capacity(m);
    let mut lambda_is = Vec::with_capacity(m);
    for i in 0..m {
        // downlink: x_s and lambda_{s|i} as two separate vectors
        messages.down_vectors += 2;
        let (endpoint, _sum) = inner_loop(
            problem.client(i),
            &state.x_s,
            &state.x_s,
            &state.lambda_si[i],
            coef,
            rho,
            cfg.k,
            &mut cursors[i],
            None,
        )?;
        let lis = rho * (&state.x_s - &endpoint) - &state.lambda_si[i];
        // uplink: x_i^{r,K} - lambda_{i|s}/rho
        messages.up_vectors += 1;
        x_i.push(endpoint);
        lambda_is.push(lis);
    }

    let (x_s, lambda_si) = server_update(&x_i, &lambda_is, rho, m);
    Ok((
        PdmmState {
            x_s,
            lambda_si,
            x_i,
            lambda_is,
        },
        messages,
    ))
}

/// `z = x - gamma * lambda`, the change of variables mapping PDMM state onto
/// FedSplit state.
pub fn pdmm_fedsplit_transform(
    x: &DVector<f64>,
    lambda: &DVector<f64>,
    gamma: f64,
) -> DVector<f64> {
    x - gamma * lambda
}

/// Inverse transform: `lambda = (x - z) / gamma`.
pub fn pdmm_fedsplit_inverse(x: &DVector<f64>, z: &DVector<f64>, gamma: f64) -> DVector<f64> {
    (x - z) / gamma
}
