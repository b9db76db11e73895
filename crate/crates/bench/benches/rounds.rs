//! Round-kernel benchmarks on the desk least-squares problem plus the
//! building blocks they lean on (proximal solve, synthetic generation).

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use cpx_core::algorithms::{
    agpdmm_round, gpdmm_round, pdmm_exact_round, scaffold_round, AlgoConfig, Method, PdmmState,
    ScaffoldState,
};
use cpx_core::dataio::{gen_synthetic_ls, SyntheticLsSpec};
use cpx_core::fixtures;
use nalgebra::DVector;

fn bench_rounds(c: &mut Criterion) {
    let (problem, _) = fixtures::desk_ls(1);
    let m = problem.num_clients();
    let d = problem.dim();
    let eta = 0.5 / problem.lipschitz();

    let gpdmm_cfg = AlgoConfig::new(Method::Gpdmm, eta).with_k(5).resolve().unwrap();
    c.bench_function("gpdmm_round m25 d20 K5", |b| {
        b.iter_batched(
            || (PdmmState::zeros(m, d), vec![0usize; m]),
            |(state, mut cursors)| gpdmm_round(&state, &problem, &gpdmm_cfg, &mut cursors).unwrap(),
            BatchSize::SmallInput,
        )
    });

    let agpdmm_cfg = AlgoConfig::new(Method::Agpdmm, eta).with_k(5).resolve().unwrap();
    c.bench_function("agpdmm_round m25 d20 K5", |b| {
        b.iter_batched(
            || (PdmmState::zeros(m, d), vec![0usize; m]),
            |(state, mut cursors)| {
                agpdmm_round(&state, &problem, &agpdmm_cfg, &mut cursors).unwrap()
            },
            BatchSize::SmallInput,
        )
    });

    let scaffold_cfg = AlgoConfig::new(Method::Scaffold, eta).with_k(5).resolve().unwrap();
    c.bench_function("scaffold_round m25 d20 K5", |b| {
        b.iter_batched(
            || (ScaffoldState::zeros(m, d), vec![0usize; m]),
            |(state, mut cursors)| {
                scaffold_round(&state, &problem, &scaffold_cfg, &mut cursors).unwrap()
            },
            BatchSize::SmallInput,
        )
    });

    let exact_cfg = AlgoConfig::new(Method::PdmmExact, 1.0).with_rho(100.0).resolve().unwrap();
    c.bench_function("pdmm_exact_round m25 d20", |b| {
        b.iter_batched(
            || (PdmmState::zeros(m, d), vec![0usize; m]),
            |(state, mut cursors)| {
                pdmm_exact_round(&state, &problem, &exact_cfg, &mut cursors).unwrap()
            },
            BatchSize::SmallInput,
        )
    });

    let quad = problem.client(0).as_quadratic().unwrap();
    let v = DVector::from_element(d, 0.5);
    c.bench_function("prox_quadratic d20", |b| b.iter(|| quad.prox(100.0, &v).unwrap()));

    c.bench_function("gen_synthetic_ls m4 n100 d10", |b| {
        b.iter(|| gen_synthetic_ls(&SyntheticLsSpec::new(4, 100, 10, 7)).unwrap())
    });
}

criterion_group!(benches, bench_rounds);
criterion_main!(benches);
