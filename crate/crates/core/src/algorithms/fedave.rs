use nalgebra::DVector;

use crate::algorithms::config::ResolvedConfig;
use crate::algorithms::state::FedAveState;
use crate::algorithms::RoundMessages;
use crate::error::{Error, Result};
use crate::objectives::FederatedProblem;

/// Local-SGD baseline: every client starts at `x_s`, takes `K` gradient steps
/// of size `eta` on its own `f_i`, and the server averages the endpoints.
pub fn fedave_round(
    state: &FedAveState,
    problem: &FederatedProblem,
    cfg: &ResolvedConfig,
    cursors: &mut [usize],
) -> Result<(FedAveState, RoundMessages)> {
    let m = problem.num_clients();
    if cursors.len() != m {
        return Err(Error::dims(m, cursors.len()));
    }
    if state.x_s.len() != problem.dim() {
        return Err(Error::dims(problem.dim(), state.x_s.len()));
    }
    let mut messages = RoundMessages::default();
    let mut mean = DVector::zeros(problem.dim());
    for i in 0..m {
        messages.down_vectors += 1;
        let mut x = state.x_s.clone();
        for _ in 0..cfg.k {
            let (grad, next_cursor) = problem.client(i).inner_grad(&x, cursors[i])?;
            cursors[i] = next_cursor;
            x.axpy(-cfg.eta, &grad, 1.0);
        }
        messages.up_vectors += 1;
        mean += x;
    }
    mean /= m as f64;
    Ok((FedAveState { x_s: mean }, messages))
}
