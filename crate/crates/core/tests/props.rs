//! Property tests for the numeric invariants: gradient consistency against
//! finite differences, the curvature certificates, proximal optimality, the
//! state transform, and the counter generator.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use cpx_core::algorithms::{pdmm_fedsplit_inverse, pdmm_fedsplit_transform};
use cpx_core::dataio::{CounterRng, StreamRole};
use cpx_core::objectives::QuadraticObjective;

fn small_matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-2.0..2.0f64, rows * cols)
        .prop_map(move |v| DMatrix::from_row_slice(rows, cols, &v))
}

fn small_vector(len: usize) -> impl Strategy<Value = DVector<f64>> {
    proptest::collection::vec(-2.0..2.0f64, len).prop_map(|v| DVector::from_column_slice(&v))
}

/// Central differences over 100 random points for one quadratic and one
/// softmax client, componentwise within 1e-5.
#[test]
fn gradient_consistency_sweep_100_points() {
    let (quad_problem, _) = cpx_core::fixtures::desk_ls_sized(1, 12, 4, 51);
    let (softmax_problem, _) = cpx_core::fixtures::desk_classification(51);
    let rng = CounterRng::new(51, 0, StreamRole::Probe);
    let mut index = 0u64;
    for problem in [&quad_problem, &softmax_problem] {
        let obj = problem.client(0);
        let d = problem.dim();
        for _ in 0..100 {
            let x = DVector::from_fn(d, |j, _| rng.normal_at(index + j as u64));
            index += d as u64;
            let g = obj.grad(&x).unwrap();
            let h = 1e-6;
            for i in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (obj.value(&xp).unwrap() - obj.value(&xm).unwrap()) / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-5, "component {i}: {fd} vs {}", g[i]);
            }
        }
    }
}

/// Strong-convexity and smoothness certificates from the Gram eigenvalues,
/// checked on 1000 random point pairs with slack >= -1e-9.
#[test]
fn curvature_certificates_sweep_1000_pairs() {
    let (problem, _) = cpx_core::fixtures::desk_ls_sized(2, 30, 5, 52);
    let rng = CounterRng::new(52, 0, StreamRole::Probe);
    let mut index = 0u64;
    for client in problem.clients() {
        let d = client.dim();
        let mu = client.modulus();
        let lip = client.lipschitz();
        for _ in 0..500 {
            let x = DVector::from_fn(d, |j, _| 3.0 * rng.normal_at(index + j as u64));
            index += d as u64;
            let y = DVector::from_fn(d, |j, _| 3.0 * rng.normal_at(index + j as u64));
            index += d as u64;
            let fx = client.value(&x).unwrap();
            let fy = client.value(&y).unwrap();
            let gx = client.grad(&x).unwrap();
            let gy = client.grad(&y).unwrap();
            let linear = fx + gx.dot(&(&y - &x));
            let strong = fy - linear - mu / 2.0 * (&x - &y).norm_squared();
            let smooth = fy - linear - (&gx - &gy).norm_squared() / (2.0 * lip);
            assert!(strong >= -1e-9, "strong-convexity slack {strong}");
            assert!(smooth >= -1e-9, "smoothness slack {smooth}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quadratic_gradient_matches_central_differences(
        a in small_matrix(5, 3),
        b in small_vector(5),
        x in small_vector(3),
    ) {
        let obj = QuadraticObjective::new(a, b).unwrap();
        let g = obj.grad(&x).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (obj.value(&xp).unwrap() - obj.value(&xm).unwrap()) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() <= 1e-5, "component {}: {} vs {}", i, fd, g[i]);
        }
    }

    #[test]
    fn curvature_certificates_hold_on_random_pairs(
        a in small_matrix(6, 3),
        b in small_vector(6),
        x in small_vector(3),
        y in small_vector(3),
    ) {
        // f(y) >= f(x) + grad(x)'(y-x) + mu/2 ||x-y||^2
        // f(y) >= f(x) + grad(x)'(y-x) + 1/(2L) ||grad(x)-grad(y)||^2
        let obj = QuadraticObjective::new(a, b).unwrap();
        let fx = obj.value(&x).unwrap();
        let fy = obj.value(&y).unwrap();
        let gx = obj.grad(&x).unwrap();
        let gy = obj.grad(&y).unwrap();
        let linear = fx + gx.dot(&(&y - &x));
        let strong = linear + obj.modulus() / 2.0 * (&x - &y).norm_squared();
        prop_assert!(fy - strong >= -1e-9, "strong-convexity slack {}", fy - strong);
        if obj.lipschitz() > 0.0 {
            let smooth = linear + (&gx - &gy).norm_squared() / (2.0 * obj.lipschitz());
            prop_assert!(fy - smooth >= -1e-9, "smoothness slack {}", fy - smooth);
        }
    }

    #[test]
    fn prox_satisfies_its_optimality_condition(
        a in small_matrix(4, 3),
        b in small_vector(4),
        v in small_vector(3),
        rho in 0.05..20.0f64,
    ) {
        let obj = QuadraticObjective::new(a, b).unwrap();
        let p = obj.prox(rho, &v).unwrap();
        let residual = obj.grad(&p).unwrap() + rho * (&p - &v);
        prop_assert!(residual.norm() <= 1e-9, "residual {}", residual.norm());
    }

    #[test]
    fn transform_and_inverse_cancel(
        x in small_vector(4),
        lambda in small_vector(4),
        gamma in 0.01..100.0f64,
    ) {
        let z = pdmm_fedsplit_transform(&x, &lambda, gamma);
        let back = pdmm_fedsplit_inverse(&x, &z, gamma);
        prop_assert!((&back - &lambda).norm() <= 1e-12 * (1.0 + lambda.norm()));
    }

    #[test]
    fn counter_rng_is_stateless_and_bounded(
        seed in any::<u64>(),
        client in 0u64..64,
        index in any::<u64>(),
    ) {
        let rng = CounterRng::new(seed, client, StreamRole::Probe);
        prop_assert_eq!(rng.u64_at(index), rng.u64_at(index));
        let u = rng.uniform_at(index);
        prop_assert!((0.0..1.0).contains(&u));
        if index < u64::MAX / 4 {
            let z = rng.normal_at(index);
            prop_assert!(z.is_finite());
        }
    }
}
