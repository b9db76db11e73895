use nalgebra::DVector;

use crate::algorithms::config::ResolvedConfig;
use crate::algorithms::state::ScaffoldState;
use crate::algorithms::RoundMessages;
use crate::error::{Error, Result};
use crate::objectives::FederatedProblem;

/// Control-variate round: clients start at `x_s` and correct their local
/// gradients with `-c_i + c`; the drift over the `K` steps refreshes `c_i`,
/// and the server moves by `eta_g` times the mean endpoint shift.
pub fn scaffold_round(
    state: &ScaffoldState,
    problem: &FederatedProblem,
    cfg: &ResolvedConfig,
    cursors: &mut [usize],
) -> Result<(ScaffoldState, RoundMessages)> {
    let m = problem.num_clients();
    if state.c_i.len() != m || state.x_i.len() != m {
        return Err(Error::dims(m, state.c_i.len()));
    }
    if cursors.len() != m {
        return Err(Error::dims(m, cursors.len()));
    }
    if state.x_s.len() != problem.dim() {
        return Err(Error::dims(problem.dim(), state.x_s.len()));
    }
    let k_eta = cfg.k as f64 * cfg.eta;
    let mut messages = RoundMessages::default();

    let mut x_i = Vec::with_capacity(m);
    let mut c_i = Vec::with_capacity(m);
    for i in 0..m {
        // downlink: x_s and c
        messages.down_vectors += 2;
        let mut x = state.x_s.clone();
        for _ in 0..cfg.k {
            let (grad, next_cursor) = problem.client(i).inner_grad(&x, cursors[i])?;
            cursors[i] = next_cursor;
            let mut corrected = grad;
            corrected -= &state.c_i[i];
            corrected += &state.c;
            x.axpy(-cfg.eta, &corrected, 1.0);
        }
        let ci = &state.c_i[i] - &state.c + (&state.x_s - &x) / k_eta;
        // uplink: the endpoint shift and the variate shift
        messages.up_vectors += 2;
        x_i.push(x);
        c_i.push(ci);
    }

    let mut shift = DVector::zeros(problem.dim());
    for xi in &x_i {
        shift += xi - &state.x_s;
    }
    shift /= m as f64;
    let x_s = &state.x_s + cfg.eta_g * shift;

    let mut c_shift = DVector::zeros(problem.dim());
    for (new, old) in c_i.iter().zip(&state.c_i) {
        c_shift += new - old;
    }
    c_shift /= m as f64;
    let c = &state.c + c_shift;

    Ok((ScaffoldState { x_s, c, x_i, c_i }, messages))
}
