use msrecover::eval::{l0_oracle, L0Solution};
use msrecover::ops::AnalysisOperator;
use msrecover::prox::GroupStructure;
use msrecover::sensing::*;
use msrecover::solver::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn tight() -> SolverConfig {
    SolverConfig {
        max_iterations: 20000,
        abs_tolerance: 1e-10,
        rel_tolerance: 1e-9,
        ..Default::default()
    }
}

fn gaussian(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
    generate_matrix(&SensingSpec {
        kind: SensingKind::Gaussian,
        m,
        n,
        seed,
    })
    .unwrap()
}

fn column(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

fn recover(
    preset: Preset,
    y: &DVector<f64>,
    phi: &DMatrix<f64>,
    params: &PresetParams,
) -> RecoveryResult {
    let problem = make_preset(preset, column(y), phi.clone(), params).unwrap();
    solve(&problem, &tight()).unwrap()
}

fn random_signal(n: usize, seed: u64) -> DVector<f64> {
    let mut r = rng_from_seed(seed);
    DVector::from_fn(n, |_, _| r.gen_range(-1.0..1.0))
}

#[test]
fn identity_sensing_returns_the_measurements() {
    let n = 12;
    let y = random_signal(n, 1);
    let res = recover(
        Preset::Bp,
        &y,
        &DMatrix::identity(n, n),
        &PresetParams::default(),
    );
    assert!((res.estimate_vector() - &y).amax() < 1e-9);
    assert!(res.converged);
}

#[test]
fn invertible_sensing_gives_the_inverse_for_every_exact_program() {
    let n = 10;
    let phi = gaussian(n, n, 2);
    let x = random_signal(n, 3);
    let y = &phi * &x;
    let params = PresetParams {
        lambda2: Some(0.5),
        ..Default::default()
    };
    for preset in [Preset::Bp, Preset::Tv, Preset::L1tv, Preset::L1l1] {
        let res = recover(preset, &y, &phi, &params);
        let err = (res.estimate_vector() - &x).norm() / x.norm();
        assert!(err < 1e-8, "{preset:?}: {err}");
    }
}

#[test]
fn nuclear_with_invertible_sensing_recovers_the_matrix() {
    let n = 6;
    let phi = gaussian(n, n, 4);
    let x = DMatrix::from_fn(n, n, |i, j| ((i + 1) * (j + 2)) as f64 / 10.0);
    let problem = make_preset(Preset::Nuclear, &phi * &x, phi, &PresetParams::default()).unwrap();
    let res = solve(&problem, &tight()).unwrap();
    assert!((res.estimate - x).norm() < 1e-7);
}

#[test]
fn basis_pursuit_matches_the_sparsest_solution_on_tiny_instances() {
    let (n, m) = (8, 5);
    let identity = AnalysisOperator::identity(n).unwrap();
    let mut agree = 0;
    for c in 0..20u64 {
        let mut r = rng_from_seed(derive_seed(11, &[c]));
        let phi = gaussian(m, n, r.gen());
        let mut x = DVector::zeros(n);
        x[r.gen_range(0..n)] = r.gen_range(0.5..2.0);
        let y = &phi * &x;
        let L0Solution::Found { estimate, .. } = l0_oracle(&y, &phi, &identity, 2).unwrap() else {
            panic!("a 1-sparse solution exists")
        };
        let bp = recover(Preset::Bp, &y, &phi, &PresetParams::default()).estimate_vector();
        // The L1 minimizer never has a larger L1 norm than any feasible point.
        assert!(
            bp.lp_norm(1) <= estimate.lp_norm(1) + 1e-6,
            "c={c} {} {}",
            bp.lp_norm(1),
            estimate.lp_norm(1)
        );
        if (&bp - &estimate).norm() <= 1e-4 * estimate.norm() {
            agree += 1;
        }
    }
    assert!(agree >= 18, "{agree}/20");
}

#[test]
fn zero_lambda2_reduces_l1tv_to_tv() {
    let (n, m) = (32, 16);
    let phi = gaussian(m, n, 5);
    let y = &phi * random_signal(n, 6);
    let base = PresetParams {
        epsilon: 0.1 * y.norm(),
        ..Default::default()
    };
    let tv = recover(Preset::Tv, &y, &phi, &base);
    let l1tv = recover(
        Preset::L1tv,
        &y,
        &phi,
        &PresetParams {
            lambda2: Some(0.0),
            ..base
        },
    );
    assert_eq!(tv.estimate, l1tv.estimate);
}

#[test]
fn singleton_groups_reduce_l2l1_to_bpdn() {
    let (n, m) = (24, 12);
    let phi = gaussian(m, n, 7);
    let y = &phi * random_signal(n, 8);
    let eps = 0.2 * y.norm();
    let bpdn = recover(
        Preset::Bpdn,
        &y,
        &phi,
        &PresetParams {
            epsilon: eps,
            ..Default::default()
        },
    );
    let group = recover(
        Preset::L2l1,
        &y,
        &phi,
        &PresetParams {
            epsilon: eps,
            groups: Some(GroupStructure::singletons(n).unwrap()),
            ..Default::default()
        },
    );
    let a = bpdn.estimate_vector();
    assert!((group.estimate_vector() - &a).norm() <= 1e-6 * a.norm());
}

#[test]
fn estimates_scale_with_the_data() {
    let (n, m) = (20, 10);
    let phi = gaussian(m, n, 9);
    let y = &phi * random_signal(n, 10);
    let params = |scale: f64| PresetParams {
        epsilon: 0.1 * scale * y.norm(),
        ..Default::default()
    };
    let base = recover(Preset::Bpdn, &y, &phi, &params(1.0)).estimate_vector();
    let scaled = recover(Preset::Bpdn, &(&y * 7.5), &phi, &params(7.5)).estimate_vector();
    assert!((scaled / 7.5 - &base).norm() <= 1e-6 * base.norm());
}

#[test]
fn histories_have_one_entry_per_iteration() {
    let (n, m) = (16, 8);
    let phi = gaussian(m, n, 12);
    let y = &phi * random_signal(n, 13);
    let problem = make_preset(
        Preset::Bpdn,
        column(&y),
        phi,
        &PresetParams {
            epsilon: 0.3 * y.norm(),
            ..Default::default()
        },
    )
    .unwrap();
    let res = solve(&problem, &SolverConfig::default()).unwrap();
    assert_eq!(res.primal_residual_history.len(), res.iterations);
    assert_eq!(res.dual_residual_history.len(), res.iterations);
    assert_eq!(res.objective_history.len(), res.iterations);
    assert!((res.objective - problem.objective(&res.estimate).unwrap()).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_estimate_is_feasible(
        seed in any::<u64>(),
        fraction in 0.0..0.9f64,
        preset in prop::sample::select(vec![Preset::Bpdn, Preset::Tv, Preset::L1tv, Preset::L2l1tv]),
    ) {
        let (n, m) = (24, 10);
        let phi = gaussian(m, n, seed);
        let y = random_signal(m, seed ^ 0x5eed);
        let eps = fraction * y.norm();
        let params = PresetParams {
            epsilon: eps,
            lambda2: Some(0.3),
            groups: Some(GroupStructure::contiguous(n, 4).unwrap()),
            ..Default::default()
        };
        let problem = make_preset(preset, column(&y), phi, &params).unwrap();
        let res = solve(&problem, &SolverConfig { max_iterations: 300, ..Default::default() }).unwrap();
        prop_assert!(res.final_data_misfit <= eps + 1e-9 * y.norm().max(1.0));
        prop_assert!(res.estimate.iter().all(|v| v.is_finite()));
    }
}
