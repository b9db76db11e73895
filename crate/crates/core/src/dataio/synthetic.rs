use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataio::rng::{CounterRng, StreamRole};
use crate::error::{Error, Result};
use crate::objectives::{ClientObjective, FederatedProblem, OracleOptions, QuadraticObjective};

fn default_noise_std() -> f64 {
    0.5
}

/// Parameters of a synthetic least-squares problem: `m` clients, each holding
/// `A_i` (`n x d`, standard normal entries) and `b_i = A_i y0 + v_i` with
/// `v_i ~ N(0, noise_std^2 I)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLsSpec {
    pub m: usize,
    pub n: usize,
    pub d: usize,
    #[serde(default = "default_noise_std")]
    pub noise_std: f64,
    pub seed: u64,
}

impl SyntheticLsSpec {
    pub fn default_noise_std() -> f64 {
        default_noise_std()
    }

    pub fn new(m: usize, n: usize, d: usize, seed: u64) -> Self {
        Self {
            m,
            n,
            d,
            noise_std: default_noise_std(),
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.m < 1 || self.n < 1 || self.d < 1 {
            return Err(Error::Config("m, n, d must all be >= 1".into()));
        }
        if self.noise_std < 0.0 {
            return Err(Error::Config("noise_std must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Generates the problem and certifies its optimum via the normal equations.
/// Also returns the generation target `y0`.
pub fn gen_synthetic_ls(spec: &SyntheticLsSpec) -> Result<(FederatedProblem, DVector<f64>)> {
    spec.validate()?;
    let y0_rng = CounterRng::new(spec.seed, 0, StreamRole::InitVector);
    let y0 = DVector::from_fn(spec.d, |j, _| y0_rng.normal_at(j as u64));

    let mut clients = Vec::with_capacity(spec.m);
    for i in 0..spec.m {
        let a_rng = CounterRng::new(spec.seed, i as u64, StreamRole::MatrixA);
        let v_rng = CounterRng::new(spec.seed, i as u64, StreamRole::Noise);
        let a = DMatrix::from_fn(spec.n, spec.d, |r, c| {
            a_rng.normal_at((r * spec.d + c) as u64)
        });
        let mut b = &a * &y0;
        for r in 0..spec.n {
            b[r] += spec.noise_std * v_rng.normal_at(r as u64);
        }
        clients.push(ClientObjective::Quadratic(QuadraticObjective::new(a, b)?));
    }

    let mut problem = FederatedProblem::new(clients)?;
    problem.certify(OracleOptions::default())?;
    Ok((problem, y0))
}
