//! Round driver: wires a problem, a round kernel, metrics and traffic
//! accounting into a reproducible experiment run with persisted traces.

mod trace;
mod traffic;

pub use trace::{write_summary_json, write_trace_csv, TRACE_HEADER};
pub use traffic::{account_traffic, TrafficLedger};

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::algorithms::{
    gpdmm_round_traced, step_round, AlgoConfig, AlgoState, LambdaUpdate, Method,
};
use crate::dataio::{gen_synthetic_ls, load_idx, partition_by_class, SyntheticLsSpec};
use crate::error::{Error, Result};
use crate::objectives::{
    ClientObjective, FederatedProblem, OracleOptions, SoftmaxObjective,
};
use crate::theory::{inner_step_slack, kkt_residual, lyapunov_q, rate_params, KktResiduals};

fn default_metrics_every() -> usize {
    1
}

fn default_batch() -> usize {
    300
}

/// Which datasets the runtime can ingest from IDX pairs on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetName {
    #[serde(rename = "mnist")]
    Mnist,
    #[serde(rename = "fashion-mnist")]
    FashionMnist,
}

impl DatasetName {
    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetName::Mnist => "mnist",
            DatasetName::FashionMnist => "fashion-mnist",
        }
    }
}

/// Problem reference: generated least squares or an on-disk dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemSpec {
    SynthLs {
        clients: usize,
        rows: usize,
        dim: usize,
        #[serde(default = "SyntheticLsSpec::default_noise_std")]
        noise_std: f64,
    },
    Dataset {
        name: DatasetName,
        data_dir: Option<PathBuf>,
        #[serde(default = "default_batch")]
        batch: usize,
    },
}

/// Full description of one reproducible run; embedded verbatim in the output
/// summary so a run can be replayed from its artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub algo: AlgoConfig,
    pub problem: ProblemSpec,
    pub rounds: usize,
    pub seed: u64,
    #[serde(default = "default_metrics_every")]
    pub metrics_every: usize,
    #[serde(default)]
    pub theory_checks: bool,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub phi: Option<f64>,
    /// Gradient-descent budget for the dataset optimum oracle.
    #[serde(default)]
    pub oracle_steps: Option<usize>,
}

impl RunConfig {
    pub fn new(algo: AlgoConfig, problem: ProblemSpec, rounds: usize, seed: u64) -> Self {
        Self {
            algo,
            problem,
            rounds,
            seed,
            metrics_every: 1,
            theory_checks: false,
            theta: None,
            phi: None,
            oracle_steps: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.rounds < 1 {
            return Err(Error::Config("rounds must be >= 1".into()));
        }
        if self.metrics_every < 1 {
            return Err(Error::Config("metrics_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-round metrics row.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    pub round: usize,
    /// `F(x_s^r) - F*` against the problem's solved optimum.
    pub gap: f64,
    pub kkt: KktResiduals,
    pub q: Option<f64>,
    pub down_vecs: usize,
    pub up_vecs: usize,
    pub wall_ns: u128,
}

/// Contraction report of the online Lyapunov check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub beta: f64,
    /// Largest observed `Q^{r+1} - beta Q^r` (must stay <= 1e-12).
    pub max_violation: f64,
    /// Tightest observed per-round ratio, for comparing bound vs behaviour.
    pub min_ratio: f64,
    pub max_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: RunConfig,
    pub rounds_run: usize,
    pub initial_gap: f64,
    pub final_gap: f64,
    pub final_accuracy: Option<f64>,
    pub traffic: TrafficLedger,
    pub optimum_certified: bool,
    pub optimum_residual: f64,
    /// Largest `||sum lambda_{s|i}|| / (1 + max ||lambda_{s|i}||)` seen.
    pub dual_sum_max: f64,
    pub inner_slack_min: Option<f64>,
    pub contraction: Option<ContractionReport>,
    pub warnings: Vec<String>,
}

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub final_state: AlgoState,
    pub traces: Vec<RoundTrace>,
    pub summary: RunSummary,
    /// Per-round `(xbar, lambda_{i|s}^{r+1})` lists, collected for GPDMM runs
    /// with theory checks on; feeds the sublinear certificate.
    pub gpdmm_series: Option<GpdmmSeries>,
}

#[derive(Debug, Clone, Default)]
pub struct GpdmmSeries {
    pub xbar: Vec<Vec<DVector<f64>>>,
    pub lambda_is: Vec<Vec<DVector<f64>>>,
}

/// Builds the problem named by the config and runs it.
pub fn run_experiment(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let (problem, validation) = build_problem(config)?;
    run_on_problem(&problem, config, validation.as_ref())
}

/// Materialises the problem (and validation set, for datasets) described by a
/// run config.
pub fn build_problem(
    config: &RunConfig,
) -> Result<(FederatedProblem, Option<SoftmaxObjective>)> {
    match &config.problem {
        ProblemSpec::SynthLs {
            clients,
            rows,
            dim,
            noise_std,
        } => {
            let spec = SyntheticLsSpec {
                m: *clients,
                n: *rows,
                d: *dim,
                noise_std: *noise_std,
                seed: config.seed,
            };
            let (problem, _y0) = gen_synthetic_ls(&spec)?;
            Ok((problem, None))
        }
        ProblemSpec::Dataset {
            name,
            data_dir,
            batch,
        } => {
            let dir = resolve_data_dir(data_dir.as_deref())?;
            let (train, test) = load_dataset_pair(&dir, *name)?;
            let clients = partition_by_class(&train, 10)?
                .into_iter()
                .map(|s| {
                    let b = (*batch).min(s.num_samples());
                    Ok(ClientObjective::Softmax(s.with_batch_size(b)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut problem = FederatedProblem::new(clients)?;
            problem.certify(OracleOptions {
                grad_tol: 1e-10,
                max_steps: config.oracle_steps.unwrap_or(500),
            })?;
            if test.rows() != train.rows() || test.cols() != train.cols() {
                return Err(Error::Format(format!(
                    "train images are {}x{} but test images are {}x{}",
                    train.rows(),
                    train.cols(),
                    test.rows(),
                    test.cols()
                )));
            }
            let validation = SoftmaxObjective::new(
                test.pixels().clone(),
                test.labels().to_vec(),
                10,
            )?;
            Ok((problem, Some(validation)))
        }
    }
}

/// `--data-dir` wins; the `CPX_DATA_DIR` environment variable is the fallback.
pub fn resolve_data_dir(explicit: Option<&Path>) -> Result<PathBuf> {
    if let Some(dir) = explicit {
        return Ok(dir.to_path_buf());
    }
    if let Ok(env) = std::env::var("CPX_DATA_DIR") {
        if !env.is_empty() {
            return Ok(PathBuf::from(env));
        }
    }
    Err(Error::Config(
        "no dataset directory: pass --data-dir or set CPX_DATA_DIR".into(),
    ))
}

fn find_dataset_file(dir: &Path, dataset: DatasetName, file: &str) -> Result<PathBuf> {
    let flat = dir.join(file);
    if flat.exists() {
        return Ok(flat);
    }
    let nested = dir.join(dataset.as_str()).join(file);
    if nested.exists() {
        return Ok(nested);
    }
    Err(Error::Config(format!(
        "dataset file {file} not found under {} (also tried {}/)",
        dir.display(),
        dataset.as_str()
    )))
}

fn load_dataset_pair(
    dir: &Path,
    dataset: DatasetName,
) -> Result<(crate::dataio::IdxImageSet, crate::dataio::IdxImageSet)> {
    let train = load_idx(
        &find_dataset_file(dir, dataset, "train-images-idx3-ubyte")?,
        &find_dataset_file(dir, dataset, "train-labels-idx1-ubyte")?,
    )?;
    let test = load_idx(
        &find_dataset_file(dir, dataset, "t10k-images-idx3-ubyte")?,
        &find_dataset_file(dir, dataset, "t10k-labels-idx1-ubyte")?,
    )?;
    Ok((train, test))
}

struct TheoryTracker {
    theta: f64,
    mu: f64,
    gamma2: f64,
    beta: f64,
    prev_q: Option<f64>,
    report: ContractionReport,
    enforce: bool,
}

/// Executes `config.rounds` rounds of the configured kernel on an
/// already-built problem. The problem must carry a solved optimum (the gap
/// metric is measured against it). `config.problem` is echoed into the
/// summary as given; [`build_problem`] is the constructor that honors it.
pub fn run_on_problem(
    problem: &FederatedProblem,
    config: &RunConfig,
    validation: Option<&SoftmaxObjective>,
) -> Result<RunOutput> {
    config.validate()?;
    let cfg = config.algo.resolve()?;
    let optimum = problem
        .optimum()
        .ok_or_else(|| Error::Config("run_on_problem needs a solved optimum".into()))?;
    let m = problem.num_clients();
    let d = problem.dim();
    let mut warnings = Vec::new();
    if 1.0 / cfg.eta < problem.lipschitz() {
        warnings.push(format!(
            "1/eta = {:.3e} is below the gradient Lipschitz bound L = {:.3e}; inner steps may diverge",
            1.0 / cfg.eta,
            problem.lipschitz()
        ));
    }

    // Theory instrumentation: the contraction and the per-step inequality
    // assume exact inner gradients, so they run only on all-quadratic
    // problems; the contraction additionally needs the regime its
    // certificate covers (average dual update, strong convexity, certified
    // optimum). The series for the sublinear certificate is collected for
    // every traced GPDMM run.
    let trace_gpdmm = config.theory_checks && cfg.method == Method::Gpdmm;
    let probe_inner_steps = trace_gpdmm && problem.all_quadratic();
    let mut theory = if trace_gpdmm {
        let theta = config.theta.unwrap_or(0.5);
        let phi = config.phi.unwrap_or(0.5);
        let enforce = probe_inner_steps
            && cfg.lambda_update == LambdaUpdate::Average
            && problem.modulus() > 0.0
            && optimum.certified;
        let (gamma2, beta) = if enforce {
            let params =
                rate_params(cfg.eta, cfg.rho, problem.lipschitz(), problem.modulus(), theta, phi)?;
            (params.gamma2, params.beta)
        } else {
            (0.0, f64::NAN)
        };
        Some(TheoryTracker {
            theta,
            mu: problem.modulus(),
            gamma2,
            beta,
            prev_q: None,
            report: ContractionReport {
                beta,
                max_violation: f64::NEG_INFINITY,
                min_ratio: f64::INFINITY,
                max_ratio: f64::NEG_INFINITY,
            },
            enforce,
        })
    } else {
        None
    };

    let mut state = AlgoState::init(cfg.method, m, d);
    let mut cursors = vec![0usize; m];
    let mut ledger = TrafficLedger::default();
    let mut traces = Vec::new();
    let mut series = trace_gpdmm.then(GpdmmSeries::default);
    let mut inner_slack_min: Option<f64> = None;
    let mut dual_sum_max = 0.0_f64;
    let initial_gap = problem.total_value(state.x_s())? - optimum.f_star;

    for round in 1..=config.rounds {
        let started = Instant::now();
        let (next_state, messages, q_value) = if trace_gpdmm {
            let pdmm = state.expect_pdmm()?;
            let (next, messages, artifacts) = gpdmm_round_traced(pdmm, problem, &cfg, &mut cursors)
                .map_err(|e| Error::at_round(round, e))?;
            let tracker = theory.as_mut().expect("tracker exists when tracing");
            if probe_inner_steps {
                // per-step inequality at the probe x*, over every inner step
                for (i, steps) in artifacts.inner_steps.iter().enumerate() {
                    for step in steps {
                        let slack = inner_step_slack(
                            problem.client(i),
                            &optimum.x_star,
                            &step.x_before,
                            &step.x_after,
                            &pdmm.x_s,
                            &pdmm.lambda_si[i],
                            cfg.eta,
                            cfg.rho,
                            tracker.theta,
                            tracker.mu,
                            problem.lipschitz(),
                        )?;
                        inner_slack_min =
                            Some(inner_slack_min.map_or(slack, |s: f64| s.min(slack)));
                    }
                }
            }
            let q = if tracker.enforce {
                let sample = lyapunov_q(
                    round,
                    &artifacts.start_x,
                    &artifacts.xbar,
                    &artifacts.lambda_is_next,
                    optimum,
                    cfg.eta,
                    cfg.rho,
                    cfg.k,
                    tracker.theta,
                    tracker.mu,
                    tracker.gamma2,
                )?;
                if let Some(prev) = tracker.prev_q {
                    let violation = sample.q - tracker.beta * prev;
                    tracker.report.max_violation = tracker.report.max_violation.max(violation);
                    if prev > 0.0 {
                        let ratio = sample.q / prev;
                        tracker.report.min_ratio = tracker.report.min_ratio.min(ratio);
                        tracker.report.max_ratio = tracker.report.max_ratio.max(ratio);
                    }
                    if violation > 1e-12 {
                        return Err(Error::Invariant {
                            round,
                            message: format!(
                                "Lyapunov contraction violated: Q = {} > beta Q_prev = {}",
                                sample.q,
                                tracker.beta * prev
                            ),
                        });
                    }
                }
                tracker.prev_q = Some(sample.q);
                Some(sample.q)
            } else {
                None
            };
            if let Some(s) = series.as_mut() {
                s.xbar.push(artifacts.xbar);
                s.lambda_is.push(artifacts.lambda_is_next);
            }
            (AlgoState::Pdmm(next), messages, q)
        } else {
            let (next, messages) = step_round(&state, problem, &cfg, &mut cursors)
                .map_err(|e| Error::at_round(round, e))?;
            (next, messages, None)
        };
        state = next_state;
        ledger.record(messages, d);

        // Dual-sum invariant after every server step (PDMM family), and the
        // zero-initialised variate identity for SCAFFOLD.
        match &state {
            AlgoState::Pdmm(s) => {
                let (sum, max_norm) = s.dual_sum_residual();
                dual_sum_max = dual_sum_max.max(sum / (1.0 + max_norm));
                if sum > 1e-9 * (1.0 + max_norm) {
                    return Err(Error::Invariant {
                        round,
                        message: format!("||sum lambda_s|i|| = {sum:.3e} breaks the dual-sum identity"),
                    });
                }
            }
            AlgoState::Scaffold(s) => {
                let (sum, max_norm) = s.variate_sum_residual();
                if sum > 1e-9 * (1.0 + max_norm) {
                    return Err(Error::Invariant {
                        round,
                        message: format!("||sum (c_i - c)|| = {sum:.3e} breaks the variate identity"),
                    });
                }
            }
            _ => {}
        }

        if round % config.metrics_every == 0 || round == config.rounds {
            let gap = problem.total_value(state.x_s())? - optimum.f_star;
            if optimum.certified && gap < -1e-9 {
                return Err(Error::Invariant {
                    round,
                    message: format!("gap {gap:.3e} dropped below the certified optimum"),
                });
            }
            let (clients_x, lambdas) = state.kkt_inputs(problem, &cfg)?;
            let kkt = kkt_residual(state.x_s(), &clients_x, &lambdas, problem)?;
            traces.push(RoundTrace {
                round,
                gap,
                kkt,
                q: q_value,
                down_vecs: messages.down_vectors,
                up_vecs: messages.up_vectors,
                wall_ns: started.elapsed().as_nanos(),
            });
        }
    }

    let final_gap = problem.total_value(state.x_s())? - optimum.f_star;
    let final_accuracy = match validation {
        Some(set) => Some(set.accuracy(state.x_s())?),
        None => None,
    };
    let summary = RunSummary {
        config: RunConfig {
            algo: cfg.as_config(),
            ..config.clone()
        },
        rounds_run: config.rounds,
        initial_gap,
        final_gap,
        final_accuracy,
        traffic: ledger,
        optimum_certified: optimum.certified,
        optimum_residual: optimum.grad_residual,
        dual_sum_max,
        inner_slack_min,
        contraction: theory
            .as_ref()
            .filter(|t| t.enforce && t.prev_q.is_some())
            .map(|t| t.report),
        warnings,
    };
    Ok(RunOutput {
        final_state: state,
        traces,
        summary,
        gpdmm_series: series,
    })
}
