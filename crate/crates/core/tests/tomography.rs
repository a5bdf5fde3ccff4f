use biphoton_core::angmom::CascadeLevels;
use biphoton_core::entanglement::{fidelity, trace_distance};
use biphoton_core::polstate::{
    density_from_ket, ket_from_path, predict_path_state, BiphotonKet, DensityMatrix4, Projector,
};
use biphoton_core::tomography::{
    expected_records, log_likelihood, reconstruct_linear, reconstruct_mle, resample_uncertainties, resample_with_seeds,
    simulate_counts, standard_settings, CountsRecord, MeasurementSetting, SettingsKind,
};
use biphoton_core::Error;
use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64 as C64;

fn psi_x() -> BiphotonKet {
    ket_from_path(&predict_path_state(&CascadeLevels::PATH_X).unwrap())
}

/// Slightly mixed ψ_X; every outcome has nonzero probability.
fn noisy_psi_x() -> DensityMatrix4 {
    let rho = density_from_ket(&psi_x());
    rho.mix(&DensityMatrix4::maximally_mixed(rho.basis()), 0.95)
}

#[test]
fn noiseless_estimators_agree() {
    for rho in [density_from_ket(&psi_x()), noisy_psi_x()] {
        for kind in [SettingsKind::Minimal16, SettingsKind::Overcomplete36] {
            let records = expected_records(&rho, &standard_settings(kind), 1e5);
            let lin = reconstruct_linear(&records).unwrap();
            let mle = reconstruct_mle(&records).unwrap();
            let d = trace_distance(&lin.rho, &mle.rho);
            assert!(d <= 1e-5, "{kind:?}: trace distance {d:e}");
        }
    }
}

#[test]
fn mle_is_physical_and_beats_projected_linear_estimate() {
    let settings = standard_settings(SettingsKind::Overcomplete36);
    for seed in 0..10 {
        for n in [30.0, 1e3, 1e5] {
            let records = simulate_counts(&density_from_ket(&psi_x()), &settings, n, seed);
            let mle = reconstruct_mle(&records).unwrap();
            assert!(mle.rho.min_eigenvalue() >= -1e-12, "seed {seed}, n {n}");
            assert!((mle.rho.matrix().trace().re - 1.0).abs() < 1e-10);
            let lin = reconstruct_linear(&records).unwrap().rho.project_physical();
            assert!(
                mle.log_likelihood >= log_likelihood(&lin, &records) - 1e-9,
                "seed {seed}, n {n}"
            );
        }
    }
}

fn unitary2(a: f64, b: f64, g: f64) -> Matrix2<C64> {
    let e = |x: f64| C64::from_polar(1.0, x);
    Matrix2::new(e(b) * a.cos(), e(g) * a.sin(), -e(-g) * a.sin(), e(-b) * a.cos())
}

fn rotate_projector(u: &Matrix2<C64>, p: &Projector) -> Projector {
    let h = u[(0, 0)] * p.c_h + u[(0, 1)] * p.c_v;
    let v = u[(1, 0)] * p.c_h + u[(1, 1)] * p.c_v;
    Projector::normalized(h, v).unwrap()
}

#[test]
fn reconstruction_is_equivariant_under_local_unitaries() {
    let us = unitary2(0.3, 1.1, -0.4);
    let ui = unitary2(1.2, -0.7, 2.0);
    let u = Matrix4::from_fn(|r, c| us[(r / 2, c / 2)] * ui[(r % 2, c % 2)]);
    let truth = density_from_ket(&psi_x()).to_basis(biphoton_core::polstate::Basis::Linear);
    let rotated_truth = DensityMatrix4::new(truth.basis(), u * truth.matrix() * u.adjoint()).unwrap();
    let settings = standard_settings(SettingsKind::Overcomplete36);
    let rotated_settings: Vec<MeasurementSetting> = settings
        .iter()
        .map(|s| MeasurementSetting {
            proj_s: rotate_projector(&us, &s.proj_s),
            proj_i: rotate_projector(&ui, &s.proj_i),
            label: s.label.clone(),
        })
        .collect();
    let a = reconstruct_mle(&simulate_counts(&truth, &settings, 1e5, 11))
        .unwrap()
        .rho;
    let b = reconstruct_mle(&simulate_counts(&rotated_truth, &rotated_settings, 1e5, 11))
        .unwrap()
        .rho;
    let mapped =
        DensityMatrix4::new_unchecked_positivity(a.basis(), u * a.to_basis(truth.basis()).matrix() * u.adjoint())
            .unwrap();
    // same seed and identical outcome probabilities give identical counts
    assert!(trace_distance(&mapped, &b) < 1e-6);
    let purity_fid = |x: &DensityMatrix4, y: &DensityMatrix4| (x.matrix() * y.matrix()).trace().re;
    assert!(purity_fid(&mapped, &b) / purity_fid(&b, &b) >= 0.999);
}

#[test]
fn fidelity_improves_with_counts() {
    let settings = standard_settings(SettingsKind::Overcomplete36);
    let truth = noisy_psi_x();
    let target = psi_x();
    let ideal = fidelity(&truth, &target);
    let mut last_gap = f64::INFINITY;
    for n in [1e2, 1e3, 1e4, 1e5] {
        let mean_gap: f64 = (0..20)
            .map(|seed| {
                let rho = reconstruct_mle(&simulate_counts(&truth, &settings, n, seed))
                    .unwrap()
                    .rho;
                trace_distance(&rho, &truth)
            })
            .sum::<f64>()
            / 20.0;
        assert!(mean_gap < last_gap, "n = {n}: mean distance {mean_gap} did not shrink");
        last_gap = mean_gap;
    }
    assert!(ideal > 0.95);
}

#[test]
fn all_zero_counts_are_rejected() {
    let records: Vec<CountsRecord> = standard_settings(SettingsKind::Overcomplete36)
        .into_iter()
        .map(|setting| CountsRecord {
            setting,
            counts: 0.0,
            exposure: 1.0,
        })
        .collect();
    assert!(matches!(reconstruct_mle(&records), Err(Error::DegenerateData(_))));
}

#[test]
fn identical_resample_seeds_have_zero_spread() {
    let records = simulate_counts(&noisy_psi_x(), &standard_settings(SettingsKind::Overcomplete36), 1e3, 4);
    let m = resample_with_seeds(&records, &[9, 9], Some(&psi_x())).unwrap();
    assert_eq!(m.concurrence.std, 0.0);
    assert_eq!(m.purity.std, 0.0);
    assert_eq!(m.fidelity.unwrap().std, 0.0);
}

#[test]
fn bootstrap_spread_follows_poisson_scaling() {
    let settings = standard_settings(SettingsKind::Overcomplete36);
    let truth = noisy_psi_x();
    let small = simulate_counts(&truth, &settings, 1e3, 21);
    let large = simulate_counts(&truth, &settings, 1e5, 21);
    let s_small = resample_uncertainties(&small, 200, 5, None).unwrap().concurrence.std;
    let s_large = resample_uncertainties(&large, 200, 5, None).unwrap().concurrence.std;
    let ratio = s_small / s_large;
    assert!((5.0..=15.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn resampling_is_deterministic() {
    let records = simulate_counts(&noisy_psi_x(), &standard_settings(SettingsKind::Minimal16), 1e3, 2);
    let a = resample_uncertainties(&records, 8, 3, None).unwrap();
    let b = resample_uncertainties(&records, 8, 3, None).unwrap();
    assert_eq!(a, b);
}
