//! Fock-representation checks against closed forms built from pairings only.

use num_complex::Complex64;
use proptest::prelude::*;
use smeared_core::fock::{
    build_mode_basis, characteristic_function, gibbs_cutoff, gibbs_weight, ladder_operator, numeric_characteristic,
    observable, state_prepare, variance_multiplier, CharacteristicMethod, CharacteristicQuery, FockSpace, GibbsSpec,
    LadderKind, ObservableSpec, PreparedState, Sector, StateKind, StateVector, DENSE_LIMIT,
};
use smeared_core::kinematics::Bivector;
use smeared_core::pairing::{default_names, pair, LightConeQuadrature, Sheet};
use smeared_core::randomfield::{covariance, CovarianceSource};
use smeared_core::testfns::TestFunction;
use smeared_core::verification::{normalize, positive_packet, real_packet};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn real_f() -> TestFunction {
    real_packet([0.0, 0.0, 0.0, 0.0], 1.0, 1.0, [1.0, 0.2, 0.0], [0.0, 0.5, -0.3])
}

fn setup(bank: &[TestFunction]) -> LightConeQuadrature {
    LightConeQuadrature::covering(bank, Sheet::Positive).unwrap()
}

#[test]
fn one_quantum_characteristic_function_matches_closed_form() {
    let f_raw = real_f();
    let h_raw = positive_packet([0.3, 0.0, 0.2, 0.0], [0.0, 1.0, 1.0], 3.0, 1.0, Bivector::from_real([1.0, 0.0, 0.5], [0.0, 0.3, 0.0]));
    let q = setup(&[f_raw.clone(), h_raw.clone()]);
    let f = normalize(&f_raw, &q).unwrap();
    let h = normalize(&h_raw, &q).unwrap();
    let basis = build_mode_basis(&[f.clone(), h.clone()], &default_names(2), Sector::A, &q).unwrap();
    let v = pair(&f, &f, &q).unwrap().value.re;
    let kappa = pair(&h, &f, &q).unwrap().value.norm_sqr();
    let lambdas: Vec<f64> = (0..9).map(|i| 0.4 * i as f64).collect();
    // dense (small N) and Krylov (N large enough to pass the dense limit) paths
    for n in [20, 30] {
        let space = FockSpace::new(2, 0, n).unwrap();
        assert_eq!(space.dim() > DENSE_LIMIT, n == 30);
        let phi = observable(&ObservableSpec::phi(f.clone()).unwrap(), &basis, None, &space).unwrap();
        let state = state_prepare(StateKind::SingleQuantum, Some(&h), &basis, &space).unwrap();
        let got = numeric_characteristic(&state, &phi.operator, &lambdas).unwrap();
        for (l, x) in lambdas.iter().zip(&got) {
            let expected = (-0.5 * l * l * v).exp() * (1.0 - l * l * kappa);
            assert!((x - c(expected, 0.0)).norm() <= 1e-8, "N = {n}, lambda {l}: {x} vs {expected}");
        }
        let projector = state_prepare(StateKind::ProjectorDensity, Some(&h), &basis, &space).unwrap();
        let again = numeric_characteristic(&projector, &phi.operator, &lambdas).unwrap();
        for (a, b) in got.iter().zip(&again) {
            assert!((a - b).norm() <= 1e-12);
        }
    }
}

/// `Σ p(n_a, n_b) ⟨n|φ²|n⟩/(f*,f)` over the truncated joint Gibbs weights; on the
/// top level the creation half of `a a†` leaves the space and only `n_a` remains.
fn brute_force_multiplier(mu: f64, nu: f64, cutoff: usize) -> f64 {
    let (mut num, mut z) = (0.0, 0.0);
    for na in 0..=cutoff {
        for nb in 0..=(cutoff - na) {
            let w = (-mu * na as f64 - nu * nb as f64).exp();
            let diag = if na + nb == cutoff { na } else { 2 * na + 1 };
            num += w * diag as f64;
            z += w;
        }
    }
    num / z
}

#[test]
fn gibbs_second_moment_follows_half_argument_coth() {
    let f_raw = real_f();
    let q = setup(std::slice::from_ref(&f_raw));
    let f = normalize(&f_raw, &q).unwrap();
    let ba = build_mode_basis(std::slice::from_ref(&f), &default_names(1), Sector::A, &q).unwrap();
    let ff = pair(&f.conjugate(), &f, &q).unwrap().value.re;
    for (mu, nu) in [(0.5, 1.0), (1.0, 1.0), (2.0, 0.7)] {
        let spec = GibbsSpec::new(mu, nu).unwrap();
        let n = gibbs_cutoff(&spec, 2);
        let space = FockSpace::new(1, 1, n).unwrap();
        let phi = observable(&ObservableSpec::phi(f.clone()).unwrap(), &ba, None, &space).unwrap();
        let state = PreparedState::Gibbs(gibbs_weight(&spec, &space).unwrap());
        let second = state.expectation(&phi.operator.product(&phi.operator).unwrap()).re;
        let oracle = brute_force_multiplier(mu, nu, n);
        assert!((second - ff * oracle).abs() <= 1e-12 * second, "mu {mu}: {second} vs {}", ff * oracle);
        let half = 1.0 / (0.5 * mu).tanh();
        // discarded tail mass is below 1e-8; its second moment carries a factor ~N
        assert!((oracle - half).abs() <= 1e-6 * half, "mu {mu}: brute force {oracle} vs coth(mu/2) {half}");
        // analytic and numeric characteristic functions agree
        let lambdas = vec![0.3, 0.7, 1.0];
        let analytic =
            characteristic_function(&state, &phi, &CharacteristicQuery::new(lambdas.clone(), CharacteristicMethod::AnalyticGaussian).unwrap(), &space)
                .unwrap();
        let numeric =
            characteristic_function(&state, &phi, &CharacteristicQuery::new(lambdas, CharacteristicMethod::MatrixExponential).unwrap(), &space)
                .unwrap();
        for (a, b) in analytic.iter().zip(&numeric) {
            assert!((a - b).norm() <= 1e-8);
        }
    }
}

#[test]
fn vacuum_fock_moments_match_covariance_model() {
    let bank = vec![
        real_f(),
        real_packet([0.5, 1.0, 0.0, 0.0], 1.2, 0.9, [0.0, 1.0, 0.0], [0.4, 0.0, 0.2]),
        real_packet([-0.3, 0.0, 0.0, 2.0], 0.8, 1.1, [0.3, 0.0, -0.7], [0.0, 0.0, 1.0]),
    ];
    let q = setup(&bank);
    let names = default_names(3);
    let model = covariance(&bank, &names, CovarianceSource::Vacuum, &q).unwrap();
    let ba = build_mode_basis(&bank, &names, Sector::A, &q).unwrap();
    let bb = build_mode_basis(&bank, &names, Sector::B, &q).unwrap();
    let space = FockSpace::new(ba.modes(), bb.modes(), 2).unwrap();
    let chis: Vec<_> = bank.iter().map(|f| observable(&ObservableSpec::chi(f.clone()).unwrap(), &ba, Some(&bb), &space).unwrap()).collect();
    let vac = StateVector::vacuum(&space);
    let scale = model.matrix.iter().map(|x| x.abs()).fold(0.0, f64::max);
    for i in 0..3 {
        for j in 0..3 {
            let m = vac.expectation(&chis[i].operator.product(&chis[j].operator).unwrap()).re;
            assert!((m - model.matrix[(i, j)]).abs() <= 1e-6 * scale, "({i},{j}): {m} vs {}", model.matrix[(i, j)]);
        }
    }
}

#[test]
fn creator_is_adjoint_and_ladder_is_linear() {
    let f = real_f();
    let g = positive_packet([0.0; 4], [1.0, 0.0, 0.0], 2.0, 1.0, Bivector::from_real([0.0, 1.0, 0.0], [0.0, 0.0, 1.0]));
    let q = setup(&[f.clone(), g.clone()]);
    let basis = build_mode_basis(&[f.clone(), g.clone()], &default_names(2), Sector::A, &q).unwrap();
    let space = FockSpace::new(2, 0, 5).unwrap();
    let a = |h: &TestFunction| ladder_operator(&basis, h, LadderKind::Annihilate, &space).unwrap();
    let combo = f.combine(c(0.3, -1.2), &g, c(2.0, 0.5));
    let lhs = a(&combo);
    let rhs = a(&f).combine(c(0.3, -1.2), &a(&g), c(2.0, 0.5)).unwrap();
    assert!(lhs.sub(&rhs).unwrap().matrix.max_abs() <= 1e-12 * rhs.matrix.max_abs());
    let create = ladder_operator(&basis, &combo, LadderKind::Create, &space).unwrap();
    assert_eq!(create.matrix.to_dense(), lhs.matrix.adjoint().to_dense());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn multiplier_is_the_one_mode_thermal_sum(x in 0.05f64..6.0) {
        let mut num = 0.0;
        let mut z = 0.0;
        for n in 0..4000 {
            let w = (-x * n as f64).exp();
            num += w * (2 * n + 1) as f64;
            z += w;
        }
        prop_assert!((variance_multiplier(x) - num / z).abs() <= 1e-10 * num / z);
    }

    #[test]
    fn multiplier_decreases_towards_one(x in 0.05f64..20.0, dx in 0.01f64..2.0) {
        prop_assert!(variance_multiplier(x + dx) < variance_multiplier(x));
        prop_assert!(variance_multiplier(x) >= 1.0);
    }

    #[test]
    fn gibbs_cutoff_is_minimal(mu in 0.3f64..4.0, nu in 0.3f64..4.0, modes in 1usize..4) {
        let spec = GibbsSpec::new(mu, nu).unwrap();
        let n = gibbs_cutoff(&spec, modes);
        let m = mu.min(nu);
        let bound = |n: usize| (-m * n as f64).exp() * smeared_core::fock::binomial(n + modes - 1, modes - 1) as f64;
        prop_assert!(bound(n) < 1e-8);
        prop_assert!(n == 0 || bound(n - 1) >= 1e-8);
    }
}
