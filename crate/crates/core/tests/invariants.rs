//! Cross-module invariants: assembly against dynamics, dynamics against the
//! dense oracle, and the resolvent sweep against dense spectra.

use nalgebra::Complex;
use piezolab_core::analysis::{self, log_spaced, ModePolicy, SpectralReport, C64};
use piezolab_core::dynamics::{smooth_modal_data, step, ModalState};
use piezolab_core::oracle::{dense_expm_propagate, expm};
use piezolab_core::{energy_norm, xi, DampingProfile, DampingShape, Grid1D, ModalOperator, PhysicalParams};
use proptest::prelude::*;

fn op(n: usize, j: usize, profile: &DampingProfile) -> ModalOperator {
    ModalOperator::assemble(PhysicalParams::default(), profile, Grid1D::new(n).unwrap(), j).unwrap()
}

fn profile_strategy() -> impl Strategy<Value = DampingProfile> {
    (0.05..0.45f64, 0.1..0.5f64, 0.0..20.0f64, prop::bool::ANY).prop_map(|(a, w, d0, smooth)| {
        let b = (a + w).min(0.95);
        let shape = if smooth {
            DampingShape::SmoothRamp { eps: 0.2 * (b - a) }
        } else {
            DampingShape::Indicator
        };
        DampingProfile::new(a, b, d0, shape).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dissipation_identity_for_any_profile(
        profile in profile_strategy(),
        n in 4usize..40,
        j in 0usize..48,
        seed in prop::collection::vec(-1.0..1.0f64, 8 * 40),
    ) {
        let op = op(n, j, &profile);
        let u: Vec<C64> = (0..op.dim()).map(|i| Complex::new(seed[2 * i], seed[2 * i + 1])).collect();
        let gap = (op.dissipation_form(&u) + op.dissipated_power(&u)).abs();
        prop_assert!(gap <= 1e-12 * op.energy_inner(&u, &u).re);
    }

    #[test]
    fn damped_spectrum_stays_left(profile in profile_strategy(), j in 0usize..24) {
        prop_assume!(profile.d0 > 0.1);
        let eig = analysis::spectrum(&op(12, j, &profile)).unwrap();
        prop_assert!(eig.iter().all(|z| z.re < 0.0));
    }
}

#[test]
fn modes_evolve_independently() {
    let profile = DampingProfile::default();
    let ops: Vec<_> = (0..3).map(|j| op(16, j, &profile)).collect();
    let mut init = smooth_modal_data(&ops, 1.0).unwrap();
    init.modes[1].iter_mut().for_each(|v| *v = 0.0);
    let joint = step(&init, &ops, 1e-2).unwrap();
    assert!(joint.modes[1].iter().all(|&v| v == 0.0));
    for (j, opj) in ops.iter().enumerate() {
        let single = ModalState {
            t: 0.0,
            grid: init.grid,
            modes: vec![init.modes[j].clone()],
        };
        let alone = step(&single, std::slice::from_ref(opj), 1e-2).unwrap();
        assert_eq!(alone.modes[0], joint.modes[j]);
    }
}

#[test]
fn single_step_matches_matrix_exponential() {
    for j in [0, 1] {
        let op = op(8, j, &DampingProfile::default());
        let init = smooth_modal_data(std::slice::from_ref(&op), 2.0).unwrap();
        let dt = 1e-3;
        let next = step(&init, std::slice::from_ref(&op), dt).unwrap();
        let exact = dense_expm_propagate(&op, &init.modes[0], dt).unwrap();
        let diff: Vec<f64> = exact.iter().zip(&next.modes[0]).map(|(a, b)| a - b).collect();
        let rel = energy_norm(&diff, &op).unwrap() / energy_norm(&exact, &op).unwrap();
        assert!(rel <= 1e-7, "j = {j}: {rel:e}");
    }
}

#[test]
fn propagator_contracts_the_energy_norm() {
    let op = op(6, 1, &DampingProfile::default());
    let b = analysis::symmetrized_generator(&op).unwrap();
    for t in [0.1, 1.0, 5.0] {
        let e = expm(&(&b * t)).unwrap();
        let norm = e.singular_values().max();
        assert!(norm <= 1.0 + 1e-10, "t = {t}: {norm}");
    }
}

#[test]
fn resolvent_dominates_inverse_spectral_distance() {
    let profile = DampingProfile::default();
    for j in [0, 5] {
        let op = op(16, j, &profile);
        let eig = analysis::spectrum(&op).unwrap();
        for lambda in [0.5, 3.0, 20.0] {
            let dist = eig
                .iter()
                .map(|z| (C64::new(0.0, lambda) - z).norm())
                .fold(f64::INFINITY, f64::min);
            let n = analysis::resolvent_norm(&op, lambda).unwrap();
            assert!(n >= (1.0 - 1e-8) / dist, "j = {j}, lambda = {lambda}: {n} < 1/{dist}");
        }
    }
}

#[test]
fn sweep_exponent_is_stable_under_refinement() {
    let lambdas = log_spaced(1.0, 100.0, 12);
    let params = PhysicalParams::default();
    let profile = DampingProfile::default();
    let fits: Vec<_> = [16, 32]
        .iter()
        .map(|&n| {
            analysis::resolvent_sweep(&params, &profile, Grid1D::new(n).unwrap(), &lambdas, ModePolicy::default())
                .unwrap()
        })
        .collect();
    for r in &fits {
        for p in &r.points {
            let ratio = xi(p.argmax_mode) / p.lambda;
            assert!((0.25..=2.0).contains(&ratio), "n = {}, lambda = {}: xi*/lambda = {ratio}", r.n, p.lambda);
        }
    }
    let shift = (fits[0].fit.exponent - fits[1].fit.exponent).abs();
    assert!(shift <= 0.3, "exponent moved by {shift}");
}

#[test]
fn spectral_report_round_trips_through_json() {
    let report = analysis::spectral_report(
        &PhysicalParams::default(),
        &DampingProfile::default(),
        Grid1D::new(6).unwrap(),
        &[0, 2],
    )
    .unwrap();
    let text = serde_json::to_string(&report).unwrap();
    let back: SpectralReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, report);
}
