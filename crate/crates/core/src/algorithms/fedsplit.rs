use nalgebra::DVector;

use crate::algorithms::config::{InexactInit, ResolvedConfig};
use crate::algorithms::state::FedSplitState;
use crate::algorithms::RoundMessages;
use crate::error::{Error, Result};
use crate::objectives::FederatedProblem;

fn check_shapes(state: &FedSplitState, problem: &FederatedProblem, cursors: &[usize]) -> Result<()> {
    let m = problem.num_clients();
    if state.z_si.len() != m || state.x_i.len() != m || state.z_is.len() != m {
        return Err(Error::dims(m, state.z_si.len()));
    }
    if cursors.len() != m {
        return Err(Error::dims(m, cursors.len()));
    }
    if state.x_s.len() != problem.dim() {
        return Err(Error::dims(problem.dim(), state.x_s.len()));
    }
    Ok(())
}

fn server_update(z_is: &[DVector<f64>], m: usize) -> (DVector<f64>, Vec<DVector<f64>>) {
    let d = z_is[0].len();
    let mut x_s = DVector::zeros(d);
    for z in z_is {
        x_s += z;
    }
    x_s /= m as f64;
    let z_si = z_is.iter().map(|z| 2.0 * &x_s - z).collect();
    (x_s, z_si)
}

/// Peaceman-Rachford round with exact client proximal maps (quadratic only):
/// `x_i = prox_{f_i, 1/gamma}(z_{s|i})`, `z_{i|s} = 2 x_i - z_{s|i}`, then the
/// server reflects back `z_{s|i}' = 2 x_s' - z_{i|s}`.
pub fn fedsplit_round(
    state: &FedSplitState,
    problem: &FederatedProblem,
    cfg: &ResolvedConfig,
    cursors: &mut [usize],
) -> Result<(FedSplitState, RoundMessages)> {
    check_shapes(state, problem, cursors)?;
    if !problem.all_quadratic() {
        return Err(Error::Unsupported(
            "fedsplit needs an exact proximal map; only quadratic clients have one".into(),
        ));
    }
    let m = problem.num_clients();
    let mut messages = RoundMessages::default();

    let mut x_i = Vec::with_capacity(m);
    let mut z_is = Vec::with_capacity(m);
    for i in 0..m {
        messages.down_vectors += 1;
        let q = problem.client(i).as_quadratic().expect("all quadratic");
        let xi = q.prox(1.0 / cfg.gamma, &state.z_si[i])?;
        let zi = 2.0 * &xi - &state.z_si[i];
        messages.up_vectors += 1;
        x_i.push(xi);
        z_is.push(zi);
    }

    let (x_s, z_si) = server_update(&z_is, m);
    Ok((
        FedSplitState {
            x_s,
            z_si,
            x_i,
            z_is,
        },
        messages,
    ))
}

/// Gradient-based FedSplit: `K` descent steps of size `eta` on
/// `h_i(x) = f_i(x) + (1/(2 gamma)) ||x - z_{s|i}||^2`. The inner start is
/// `z_{s|i}` (the published scheme) or `x_s`, selected by `cfg.inexact_init`.
pub fn fedsplit_inexact_round(
    state: &FedSplitState,
    problem: &FederatedProblem,
    cfg: &ResolvedConfig,
    cursors: &mut [usize],
) -> Result<(FedSplitState, RoundMessages)> {
    check_shapes(state, problem, cursors)?;
    let m = problem.num_clients();
    let inv_gamma = 1.0 / cfg.gamma;
    let mut messages = RoundMessages::default();

    let mut x_i = Vec::with_capacity(m);
    let mut z_is = Vec::with_capacity(m);
    for i in 0..m {
        messages.down_vectors += 1;
        let z = &state.z_si[i];
        let mut x = match cfg.inexact_init {
            InexactInit::Z => z.clone(),
            InexactInit::Xs => state.x_s.clone(),
        };
        for _ in 0..cfg.k {
            let (grad, next_cursor) = problem.client(i).inner_grad(&x, cursors[i])?;
            cursors[i] = next_cursor;
            let mut step = grad;
            step.axpy(inv_gamma, &x, 1.0);
            step.axpy(-inv_gamma, z, 1.0);
            x.axpy(-cfg.eta, &step, 1.0);
        }
        let zi = 2.0 * &x - z;
        messages.up_vectors += 1;
        x_i.push(x);
        z_is.push(zi);
    }

    let (x_s, z_si) = server_update(&z_is, m);
    Ok((
        FedSplitState {
            x_s,
            z_si,
            x_i,
            z_is,
        },
        messages,
    ))
}
