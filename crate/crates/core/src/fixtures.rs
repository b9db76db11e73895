//! Desk-scale problem fixtures shared by tests, the verification suite and
//! the benchmarks. All of them are deterministic in their seed and carry a
//! certified optimum.

use nalgebra::{DMatrix, DVector};

use crate::dataio::{gen_synthetic_ls, CounterRng, IdxImageSet, StreamRole, SyntheticLsSpec};
use crate::dataio::partition_by_class;
use crate::error::Result;
use crate::objectives::{
    ClientObjective, FederatedProblem, OracleOptions, QuadraticObjective,
};

/// `f1 = 0.5 (x - 1)^2`, `f2 = 0.5 (x + 1)^2`; optimum at `x* = 0` with
/// `F* = 1` and duals `(-1, +1)`.
pub fn symmetric_pair() -> FederatedProblem {
    scalar_pair(1.0, -1.0)
}

/// `f1 = 0.5 (x - 1)^2`, `f2 = 0.5 (x - 3)^2`; heterogeneous minimizers.
pub fn shifted_pair() -> FederatedProblem {
    scalar_pair(1.0, 3.0)
}

pub fn scalar_pair(a1: f64, a2: f64) -> FederatedProblem {
    let clients = vec![
        ClientObjective::Quadratic(QuadraticObjective::scalar_shifted(a1)),
        ClientObjective::Quadratic(QuadraticObjective::scalar_shifted(a2)),
    ];
    let mut problem = FederatedProblem::new(clients).expect("valid pair");
    problem
        .certify(OracleOptions::default())
        .expect("scalar pair certifies");
    problem
}

/// Desk least squares: 25 clients, 200 rows, 20 columns. Strongly convex.
pub fn desk_ls(seed: u64) -> (FederatedProblem, DVector<f64>) {
    desk_ls_sized(25, 200, 20, seed)
}

pub fn desk_ls_sized(m: usize, n: usize, d: usize, seed: u64) -> (FederatedProblem, DVector<f64>) {
    gen_synthetic_ls(&SyntheticLsSpec::new(m, n, d, seed)).expect("desk generation succeeds")
}

/// Rank-deficient least squares (each client has fewer rows than columns, so
/// every per-client modulus is zero) whose aggregate Gram matrix is still
/// positive definite. Used for the general-convex (mu = 0) checks.
pub fn rank_deficient_ls(seed: u64) -> FederatedProblem {
    let m = 3;
    let n = 4;
    let d = 8;
    let y0_rng = CounterRng::new(seed, 0, StreamRole::InitVector);
    let y0 = DVector::from_fn(d, |j, _| y0_rng.normal_at(j as u64));
    let mut clients = Vec::with_capacity(m);
    for i in 0..m {
        let a_rng = CounterRng::new(seed, i as u64, StreamRole::MatrixA);
        let v_rng = CounterRng::new(seed, i as u64, StreamRole::Noise);
        let a = DMatrix::from_fn(n, d, |r, c| a_rng.normal_at((r * d + c) as u64));
        let mut b = &a * &y0;
        for r in 0..n {
            b[r] += 0.1 * v_rng.normal_at(r as u64);
        }
        clients.push(ClientObjective::Quadratic(
            QuadraticObjective::new(a, b).expect("valid client"),
        ));
    }
    let mut problem = FederatedProblem::new(clients).expect("valid problem");
    assert_eq!(problem.modulus(), 0.0);
    problem
        .certify(OracleOptions::default())
        .expect("aggregate system is nonsingular");
    problem
}

/// Synthetic classification fixture: three classes of 2x2 "images" drawn
/// around class-specific anchor pixels, partitioned into three single-class
/// clients. Small ridge term so the optimum certifies.
pub fn desk_classification(seed: u64) -> (FederatedProblem, IdxImageSet) {
    let set = desk_image_set(seed);
    let problem = classification_problem(&set, 4, 1e-3).expect("fixture builds");
    (problem, set)
}

/// The raw image set behind [`desk_classification`].
pub fn desk_image_set(seed: u64) -> IdxImageSet {
    let classes = 3;
    let per_class = 12;
    let n = classes * per_class;
    let dim = 4;
    let anchors: [[f64; 4]; 3] = [
        [210.0, 40.0, 40.0, 120.0],
        [40.0, 210.0, 120.0, 40.0],
        [40.0, 120.0, 210.0, 210.0],
    ];
    let rng = CounterRng::new(seed, 0, StreamRole::Pixels);
    let mut bytes = vec![0u8; n * dim];
    let mut labels = vec![0usize; n];
    for i in 0..n {
        let class = i % classes;
        labels[i] = class;
        for j in 0..dim {
            let noisy = anchors[class][j] + 40.0 * rng.normal_at((i * dim + j) as u64);
            bytes[i * dim + j] = noisy.clamp(0.0, 255.0) as u8;
        }
    }
    let pixels = DMatrix::from_fn(n, dim, |i, j| bytes[i * dim + j] as f64 / 255.0);
    IdxImageSet::new(pixels, labels, 2, 2).expect("consistent geometry")
}

/// Partitions an image set into single-class clients, applies the batch size
/// and ridge term, and certifies the optimum.
pub fn classification_problem(
    set: &IdxImageSet,
    batch_size: usize,
    regularizer: f64,
) -> Result<FederatedProblem> {
    let clients = partition_by_class(set, set.num_distinct_labels())?
        .into_iter()
        .map(|s| {
            let b = batch_size.min(s.num_samples());
            let s = s.with_batch_size(b)?;
            Ok(ClientObjective::Softmax(s.with_regularizer(regularizer)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut problem = FederatedProblem::new(clients)?;
    problem.certify(OracleOptions::default())?;
    Ok(problem)
}
