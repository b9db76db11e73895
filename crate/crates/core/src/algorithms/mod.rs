//! Optimizer round kernels. Each round maps (state, problem, config) to the
//! successor state plus a tally of the vectors that crossed the wire.

mod config;
mod fedave;
mod fedsplit;
mod pdmm;
mod scaffold;
mod state;

pub use config::{AlgoConfig, InexactInit, LambdaUpdate, Method, ResolvedConfig};
pub use fedave::fedave_round;
pub use fedsplit::{fedsplit_inexact_round, fedsplit_round};
pub use pdmm::{
    agpdmm_round, gpdmm_round, gpdmm_round_traced, pdmm_exact_round, pdmm_fedsplit_inverse,
    pdmm_fedsplit_transform, GpdmmArtifacts, InnerStep,
};
pub use scaffold::scaffold_round;
pub use state::{AlgoState, FedAveState, FedSplitState, PdmmState, ScaffoldState};

use crate::error::{Error, Result};
use crate::objectives::FederatedProblem;

/// Count of d-dimensional vector payloads exchanged in one round.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RoundMessages {
    pub down_vectors: usize,
    pub up_vectors: usize,
}

/// Runs one round of the configured method, dispatching on the state variant.
pub fn step_round(
    state: &AlgoState,
    problem: &FederatedProblem,
    cfg: &ResolvedConfig,
    cursors: &mut [usize],
) -> Result<(AlgoState, RoundMessages)> {
    match (cfg.method, state) {
        (Method::Fedave, AlgoState::FedAve(s)) => {
            let (next, msgs) = fedave_round(s, problem, cfg, cursors)?;
            Ok((AlgoState::FedAve(next), msgs))
        }
        (Method::PdmmExact, AlgoState::Pdmm(s)) => {
            let (next, msgs) = pdmm_exact_round(s, problem, cfg, cursors)?;
            Ok((AlgoState::Pdmm(next), msgs))
        }
        (Method::Gpdmm, AlgoState::Pdmm(s)) => {
            let (next, msgs) = gpdmm_round(s, problem, cfg, cursors)?;
            Ok((AlgoState::Pdmm(next), msgs))
        }
        (Method::Agpdmm | Method::AgpdmmVariant, AlgoState::Pdmm(s)) => {
            let (next, msgs) = agpdmm_round(s, problem, cfg, cursors)?;
            Ok((AlgoState::Pdmm(next), msgs))
        }
        (Method::Fedsplit, AlgoState::FedSplit(s)) => {
            let (next, msgs) = fedsplit_round(s, problem, cfg, cursors)?;
            Ok((AlgoState::FedSplit(next), msgs))
        }
        (Method::FedsplitInexact, AlgoState::FedSplit(s)) => {
            let (next, msgs) = fedsplit_inexact_round(s, problem, cfg, cursors)?;
            Ok((AlgoState::FedSplit(next), msgs))
        }
        (Method::Scaffold, AlgoState::Scaffold(s)) => {
            let (next, msgs) = scaffold_round(s, problem, cfg, cursors)?;
            Ok((AlgoState::Scaffold(next), msgs))
        }
        (method, _) => Err(Error::Unsupported(format!(
            "state variant does not match method {method}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use nalgebra::DVector;

    fn resolved(cfg: AlgoConfig) -> ResolvedConfig {
        cfg.resolve().unwrap()
    }

    fn scalar(v: f64) -> DVector<f64> {
        DVector::from_element(1, v)
    }

    #[test]
    fn fedave_symmetric_pair_stays_at_zero() {
        let problem = fixtures::symmetric_pair();
        let cfg = resolved(AlgoConfig::new(Method::Fedave, 0.1));
        let state = FedAveState { x_s: scalar(0.0) };
        let (next, _) = fedave_round(&state, &problem, &cfg, &mut [0, 0]).unwrap();
        assert_eq!(next.x_s[0], 0.0);
    }

    #[test]
    fn fedave_k1_is_mean_gradient_descent() {
        // f1 = 0.5 (x-1)^2, f2 = 0.5 (x-3)^2, eta = 0.1, x_s = 0:
        // mean gradient is -2, so the step lands at 0.2.
        let problem = fixtures::shifted_pair();
        let cfg = resolved(AlgoConfig::new(Method::Fedave, 0.1));
        let state = FedAveState { x_s: scalar(0.0) };
        let (next, _) = fedave_round(&state, &problem, &cfg, &mut [0, 0]).unwrap();
        assert!((next.x_s[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn pdmm_exact_hand_trace_two_rounds() {
        let problem = fixtures::symmetric_pair();
        let cfg = resolved(AlgoConfig::new(Method::PdmmExact, 1.0).with_rho(1.0));
        let state = PdmmState::zeros(2, 1);
        let signs = [1.0, -1.0];

        let (r1, _) = pdmm_exact_round(&state, &problem, &cfg, &mut [0, 0]).unwrap();
        for i in 0..2 {
            let a = signs[i];
            assert!((r1.x_i[i][0] - a / 2.0).abs() < 1e-15);
            assert!((r1.lambda_is[i][0] + a / 2.0).abs() < 1e-15);
            assert!((r1.lambda_si[i][0] - a).abs() < 1e-15);
        }
        assert_eq!(r1.x_s[0], 0.0);

        let (r2, _) = pdmm_exact_round(&r1, &problem, &cfg, &mut [0, 0]).unwrap();
        for i in 0..2 {
            assert!(r2.x_i[i][0].abs() < 1e-15, "x_i should hit x* = 0");
        }
    }

    #[test]
    fn pdmm_exact_fixed_point_at_saddle() {
        let (problem, _) = fixtures::desk_ls_sized(4, 30, 6, 2);
        let cfg = resolved(AlgoConfig::new(Method::PdmmExact, 1.0).with_rho(2.0));
        let mut state = PdmmState::at_saddle(problem.optimum().unwrap());
        for _ in 0..50 {
            let (next, _) = pdmm_exact_round(&state, &problem, &cfg, &mut [0; 4]).unwrap();
            state = next;
        }
        let x_star = &problem.optimum().unwrap().x_star;
        assert!((&state.x_s - x_star).norm() <= 1e-9);
    }

    #[test]
    fn pdmm_exact_dual_sum_is_zero_every_round() {
        let (problem, _) = fixtures::desk_ls_sized(5, 40, 8, 3);
        let cfg = resolved(AlgoConfig::new(Method::PdmmExact, 1.0).with_rho(0.7));
        let mut state = PdmmState::zeros(5, 8);
        for _ in 0..20 {
            let (next, _) = pdmm_exact_round(&state, &problem, &cfg, &mut [0; 5]).unwrap();
            let (sum, max_norm) = next.dual_sum_residual();
            assert!(sum <= 1e-9 * (1.0 + max_norm));
            state = next;
        }
    }

    #[test]
    fn fedsplit_hand_trace_matches_pdmm_under_transform() {
        let problem = fixtures::symmetric_pair();
        let cfg = resolved(AlgoConfig::new(Method::Fedsplit, 1.0).with_gamma(1.0));
        let state = FedSplitState::zeros(2, 1);
        let signs = [1.0, -1.0];

        let (r1, _) = fedsplit_round(&state, &problem, &cfg, &mut [0, 0]).unwrap();
        for i in 0..2 {
            let a = signs[i];
            assert!((r1.x_i[i][0] - a / 2.0).abs() < 1e-15);
            assert!((r1.z_is[i][0] - a).abs() < 1e-15);
            assert!((r1.z_si[i][0] + a).abs() < 1e-15);
        }
        assert_eq!(r1.x_s[0], 0.0);
        let (r2, _) = fedsplit_round(&r1, &problem, &cfg, &mut [0, 0]).unwrap();
        for i in 0..2 {
            assert!(r2.x_i[i][0].abs() < 1e-15);
        }
    }

    #[test]
    fn fedsplit_fixed_point_at_saddle() {
        let (problem, _) = fixtures::desk_ls_sized(3, 25, 5, 4);
        let gamma = 0.4;
        let cfg = resolved(AlgoConfig::new(Method::Fedsplit, 1.0).with_gamma(gamma));
        let mut state = FedSplitState::at_saddle(problem.optimum().unwrap(), gamma);
        for _ in 0..50 {
            let (next, _) = fedsplit_round(&state, &problem, &cfg, &mut [0; 3]).unwrap();
            state = next;
        }
        let x_star = &problem.optimum().unwrap().x_star;
        assert!((&state.x_s - x_star).norm() <= 1e-9);
    }

    #[test]
    fn exact_pdmm_and_fedsplit_traces_agree_under_the_transform() {
        // rho = 1/gamma, z = x - gamma lambda: the two trajectories coincide.
        let (problem, _) = fixtures::desk_ls_sized(6, 40, 8, 5);
        let gamma = 0.25;
        let pd_cfg = resolved(AlgoConfig::new(Method::PdmmExact, 1.0).with_rho(1.0 / gamma));
        let fs_cfg = resolved(AlgoConfig::new(Method::Fedsplit, 1.0).with_gamma(gamma));
        let mut pd = PdmmState::zeros(6, 8);
        let mut fs = FedSplitState::zeros(6, 8);
        for _ in 0..100 {
            let (pd_next, _) = pdmm_exact_round(&pd, &problem, &pd_cfg, &mut [0; 6]).unwrap();
            let (fs_next, _) = fedsplit_round(&fs, &problem, &fs_cfg, &mut [0; 6]).unwrap();
            assert!((&pd_next.x_s - &fs_next.x_s).norm() <= 1e-10);
            for i in 0..6 {
                let z = pdmm_fedsplit_transform(&pd_next.x_s, &pd_next.lambda_si[i], gamma);
                assert!((&z - &fs_next.z_si[i]).norm() <= 1e-10);
            }
            pd = pd_next;
            fs = fs_next;
        }
    }

    #[test]
    fn fedsplit_inexact_one_hand_step() {
        // z_{s|i} = 0, K = 1, gamma = 1: inner gradient at 0 is -a_i, so
        // x_i = eta a_i and z_{i|s} = 2 eta a_i.
        let problem = fixtures::symmetric_pair();
        let eta = 0.3;
        let cfg = resolved(
            AlgoConfig::new(Method::FedsplitInexact, eta)
                .with_gamma(1.0)
                .with_inexact_init(InexactInit::Z),
        );
        let state = FedSplitState::zeros(2, 1);
        let (r1, _) = fedsplit_inexact_round(&state, &problem, &cfg, &mut [0, 0]).unwrap();
        let signs = [1.0, -1.0];
        for i in 0..2 {
            assert!((r1.x_i[i][0] - eta * signs[i]).abs() < 1e-15);
            assert!((r1.z_is[i][0] - 2.0 * eta * signs[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn fedsplit_inexact_large_k_recovers_the_prox() {
        let (problem, _) = fixtures::desk_ls_sized(2, 20, 4, 6);
        let gamma = 0.5;
        let lip = problem.lipschitz();
        let eta = 0.5 / (lip + 1.0 / gamma);
        let cfg = resolved(
            AlgoConfig::new(Method::FedsplitInexact, eta)
                .with_gamma(gamma)
                .with_k(10_000)
                .with_inexact_init(InexactInit::Z),
        );
        let mut state = FedSplitState::zeros(2, 4);
        // seed some asymmetry so the prox argument is nontrivial
        state.z_si[0] = DVector::from_fn(4, |j, _| 0.1 * j as f64);
        let (next, _) = fedsplit_inexact_round(&state, &problem, &cfg, &mut [0, 0]).unwrap();
        for i in 0..2 {
            let q = problem.client(i).as_quadratic().unwrap();
            let exact = q.prox(1.0 / gamma, &state.z_si[i]).unwrap();
            assert!(
                (&next.x_i[i] - &exact).norm() <= 1e-6,
                "client {i}: {}",
                (&next.x_i[i] - &exact).norm()
            );
        }
    }

    #[test]
    fn gpdmm_hand_trace_k1() {
        // Symmetric pair, zero init, K = 1, rho = 1/eta: the inner step lands
        // at eta a_i / 2, the dual at -a_i/2, and the server back at zero.
        let problem = fixtures::symmetric_pair();
        let eta = 0.2;
        let cfg = resolved(AlgoConfig::new(Method::Gpdmm, eta));
        assert_eq!(cfg.rho, 1.0 / eta);
        let state = PdmmState::zeros(2, 1);
        let (r1, _) = gpdmm_round(&state, &problem, &cfg, &mut [0, 0]).unwrap();
        let signs = [1.0, -1.0];
        for i in 0..2 {
            let a = signs[i];
            assert!((r1.x_i[i][0] - eta * a / 2.0).abs() < 1e-15);
            assert!((r1.lambda_is[i][0] + a / 2.0).abs() < 1e-15);
        }
        assert!(r1.x_s[0].abs() < 1e-15);
    }

    #[test]
    fn gpdmm_average_and_recent_coincide_at_k1() {
        let (problem, _) = fixtures::desk_ls_sized(3, 30, 5, 7);
        let eta = 0.5 / problem.lipschitz();
        let avg = resolved(AlgoConfig::new(Method::Gpdmm, eta));
        let rec = resolved(AlgoConfig::new(Method::Gpdmm, eta).with_lambda_update(LambdaUpdate::Recent));
        let mut a = PdmmState::zeros(3, 5);
        let mut b = PdmmState::zeros(3, 5);
        for _ in 0..25 {
            let (na, _) = gpdmm_round(&a, &problem, &avg, &mut [0; 3]).unwrap();
            let (nb, _) = gpdmm_round(&b, &problem, &rec, &mut [0; 3]).unwrap();
            assert_eq!(na, nb);
            a = na;
            b = nb;
        }
    }

    #[test]
    fn gpdmm_dual_sum_invariant_both_variants() {
        let (problem, _) = fixtures::desk_ls_sized(4, 30, 6, 8);
        let eta = 0.5 / problem.lipschitz();
        for update in [LambdaUpdate::Average, LambdaUpdate::Recent] {
            let cfg = resolved(
                AlgoConfig::new(Method::Gpdmm, eta)
                    .with_k(4)
                    .with_lambda_update(update),
            );
            let mut state = PdmmState::zeros(4, 6);
            for _ in 0..30 {
                let (next, _) = gpdmm_round(&state, &problem, &cfg, &mut [0; 4]).unwrap();
                let (sum, max_norm) = next.dual_sum_residual();
                assert!(sum <= 1e-9 * (1.0 + max_norm));
                state = next;
            }
        }
    }

    #[test]
    fn agpdmm_k1_equals_fedave_step() {
        // K = 1, rho = 1/eta on the shifted pair from x_s = 0 gives 0.2,
        // bitwise identical to the FedAve K=1 step.
        let problem = fixtures::shifted_pair();
        let eta = 0.1;
        let cfg = resolved(AlgoConfig::new(Method::Agpdmm, eta));
        let state = PdmmState::zeros(2, 1);
        let (next, _) = agpdmm_round(&state, &problem, &cfg, &mut [0, 0]).unwrap();
        assert!((next.x_s[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn agpdmm_variant_k1_doubles_the_stepsize() {
        let problem = fixtures::shifted_pair();
        let eta = 0.1;
        let cfg = resolved(AlgoConfig::new(Method::AgpdmmVariant, eta));
        let state = PdmmState::zeros(2, 1);
        let (next, _) = agpdmm_round(&state, &problem, &cfg, &mut [0, 0]).unwrap();
        assert!((next.x_s[0] - 0.4).abs() < 1e-14);
    }

    #[test]
    fn agpdmm_k1_ignores_zero_sum_dual_perturbations() {
        let (problem, _) = fixtures::desk_ls_sized(3, 30, 5, 9);
        let eta = 0.5 / problem.lipschitz();
        let cfg = resolved(AlgoConfig::new(Method::Agpdmm, eta));
        let base = PdmmState::zeros(3, 5);
        let mut perturbed = base.clone();
        let delta = DVector::from_fn(5, |j, _| 0.3 * (j as f64 - 2.0));
        perturbed.lambda_si[0] += &delta;
        perturbed.lambda_si[1] -= 2.0 * &delta;
        perturbed.lambda_si[2] += &delta;
        let (a, _) = agpdmm_round(&base, &problem, &cfg, &mut [0; 3]).unwrap();
        let (b, _) = agpdmm_round(&perturbed, &problem, &cfg, &mut [0; 3]).unwrap();
        assert!((&a.x_s - &b.x_s).norm() <= 1e-12);
    }

    #[test]
    fn scaffold_k1_matches_agpdmm_and_variate_identity() {
        let problem = fixtures::shifted_pair();
        let eta = 0.1;
        let cfg = resolved(AlgoConfig::new(Method::Scaffold, eta));
        let state = ScaffoldState::zeros(2, 1);
        let (next, _) = scaffold_round(&state, &problem, &cfg, &mut [0, 0]).unwrap();
        assert!((next.x_s[0] - 0.2).abs() < 1e-15);
        // with zero covariates and K = 1, c_i' = grad f_i(x_s)
        for i in 0..2 {
            let g = problem.client(i).grad(&state.x_s).unwrap();
            assert!((next.c_i[i][0] - g[0]).abs() < 1e-14);
        }
    }

    #[test]
    fn scaffold_variate_sum_stays_zero() {
        let (problem, _) = fixtures::desk_ls_sized(4, 30, 6, 10);
        let eta = 0.5 / problem.lipschitz();
        let cfg = resolved(AlgoConfig::new(Method::Scaffold, eta).with_k(3));
        let mut state = ScaffoldState::zeros(4, 6);
        for _ in 0..30 {
            let (next, _) = scaffold_round(&state, &problem, &cfg, &mut [0; 4]).unwrap();
            let (sum, max_norm) = next.variate_sum_residual();
            assert!(sum <= 1e-9 * (1.0 + max_norm));
            state = next;
        }
    }

    #[test]
    fn gradient_pdmm_family_fixed_points_at_saddle() {
        // Starting any PDMM-family method at (x*, lambda*) keeps the server
        // iterate within 1e-9 of x* for 50 rounds.
        let (problem, _) = fixtures::desk_ls_sized(4, 30, 6, 12);
        let eta = 0.5 / problem.lipschitz();
        let x_star = &problem.optimum().unwrap().x_star;
        for method in [Method::Gpdmm, Method::Agpdmm, Method::AgpdmmVariant] {
            let cfg = resolved(AlgoConfig::new(method, eta).with_k(3));
            let mut state = PdmmState::at_saddle(problem.optimum().unwrap());
            for _ in 0..50 {
                let (next, _) = match method {
                    Method::Gpdmm => gpdmm_round(&state, &problem, &cfg, &mut [0; 4]).unwrap(),
                    _ => agpdmm_round(&state, &problem, &cfg, &mut [0; 4]).unwrap(),
                };
                state = next;
            }
            assert!(
                (&state.x_s - x_star).norm() <= 1e-9,
                "{method}: drift {}",
                (&state.x_s - x_star).norm()
            );
        }
    }

    #[test]
    fn transform_round_trips() {
        let x = DVector::from_column_slice(&[1.0]);
        let lambda = DVector::from_column_slice(&[2.0]);
        let z = pdmm_fedsplit_transform(&x, &lambda, 0.5);
        assert_eq!(z[0], 0.0);
        let zero = DVector::from_column_slice(&[0.0]);
        assert_eq!(pdmm_fedsplit_transform(&x, &zero, 0.7), x);
        let back = pdmm_fedsplit_inverse(&x, &z, 0.5);
        assert!((back[0] - 2.0).abs() <= 1e-15);
    }

    #[test]
    fn exact_methods_reject_softmax_clients() {
        let (problem, _) = fixtures::desk_classification(1);
        let cfg = resolved(AlgoConfig::new(Method::PdmmExact, 1.0).with_rho(1.0));
        let state = PdmmState::zeros(problem.num_clients(), problem.dim());
        let mut cursors = vec![0; problem.num_clients()];
        assert!(matches!(
            pdmm_exact_round(&state, &problem, &cfg, &mut cursors),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn pdmm_family_rounds_are_deterministic() {
        let (problem, _) = fixtures::desk_ls_sized(3, 20, 4, 11);
        let eta = 0.5 / problem.lipschitz();
        let cfg = resolved(AlgoConfig::new(Method::Gpdmm, eta).with_k(3));
        let run = || {
            let mut state = PdmmState::zeros(3, 4);
            let mut cursors = [0; 3];
            for _ in 0..10 {
                let (next, _) = gpdmm_round(&state, &problem, &cfg, &mut cursors).unwrap();
                state = next;
            }
            state
        };
        assert_eq!(run(), run());
    }
}
