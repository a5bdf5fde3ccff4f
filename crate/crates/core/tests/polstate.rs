use std::f64::consts::{FRAC_1_SQRT_2, PI};

use biphoton_core::angmom::CascadeLevels;
use biphoton_core::polstate::{
    beat_params, change_basis, joint_projection_amplitude, ket_from_path, predict_path_state, search_projectors, Basis,
    BeatParams, BiphotonKet, Projector,
};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn ket_strategy(basis: Basis) -> impl Strategy<Value = BiphotonKet> {
    prop::array::uniform8(-1.0f64..1.0)
        .prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-3)
        .prop_map(move |v| {
            BiphotonKet::normalized(basis, [c(v[0], v[1]), c(v[2], v[3]), c(v[4], v[5]), c(v[6], v[7])]).unwrap()
        })
}

fn projector_strategy() -> impl Strategy<Value = Projector> {
    (0.0..PI, -PI..PI).prop_map(|(t, p)| Projector::from_angles(t, p))
}

fn path_kets() -> (BiphotonKet, BiphotonKet) {
    (
        ket_from_path(&predict_path_state(&CascadeLevels::PATH_X).unwrap()),
        ket_from_path(&predict_path_state(&CascadeLevels::PATH_Y).unwrap()),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn basis_change_preserves_norm_and_round_trips(k in ket_strategy(Basis::Circular)) {
        let lin = change_basis(&k, Basis::Linear);
        prop_assert!((lin.norm_sqr() - 1.0).abs() < 1e-12);
        let back = change_basis(&lin, Basis::Circular);
        for (a, b) in back.amplitudes.iter().zip(&k.amplitudes) {
            prop_assert!((a - b).norm() < 1e-12);
        }
        let same = change_basis(&k, Basis::Circular);
        prop_assert_eq!(same, k);
    }
}

proptest! {
    #[test]
    fn projection_amplitude_is_basis_independent(
        k in ket_strategy(Basis::Circular),
        ps in projector_strategy(),
        pi in projector_strategy(),
    ) {
        let a = joint_projection_amplitude(&k, &ps, &pi);
        let b = joint_projection_amplitude(&change_basis(&k, Basis::Linear), &ps, &pi);
        prop_assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn projection_amplitude_matches_explicit_sum(
        k in ket_strategy(Basis::Linear),
        ps in projector_strategy(),
        pi in projector_strategy(),
    ) {
        let s = [ps.c_h, ps.c_v];
        let i = [pi.c_h, pi.c_v];
        let mut want = C64::new(0.0, 0.0);
        for a in 0..2 {
            for b in 0..2 {
                want += (s[a] * i[b]).conj() * k.amplitudes[2 * a + b];
            }
        }
        prop_assert!((joint_projection_amplitude(&k, &ps, &pi) - want).norm() < 1e-12);
    }

    #[test]
    fn beat_ratio_ignores_global_phases(
        kx in ket_strategy(Basis::Circular),
        ky in ket_strategy(Basis::Circular),
        ps in projector_strategy(),
        pi in projector_strategy(),
        tx in -PI..PI,
        ty in -PI..PI,
    ) {
        let ax = joint_projection_amplitude(&kx, &ps, &pi);
        let ay = joint_projection_amplitude(&ky, &ps, &pi);
        prop_assume!(ax.norm() > 1e-3 && ay.norm() > 1e-3);
        let base = beat_params(&kx, &ky, &ps, &pi).unwrap();
        let shifted = beat_params(&kx.with_global_phase(tx), &ky.with_global_phase(ty), &ps, &pi).unwrap();
        prop_assert!((base.r - shifted.r).abs() < 1e-10 * base.r.max(1.0));
        // the relative phase moves by exactly ty − tx
        let dphi = C64::from_polar(1.0, shifted.phi - base.phi - (ty - tx));
        prop_assert!((dphi - C64::new(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn identical_kets_give_unit_ratio(k in ket_strategy(Basis::Circular), ps in projector_strategy(), pi in projector_strategy()) {
        prop_assume!(joint_projection_amplitude(&k, &ps, &pi).norm() > 1e-6);
        let bp = beat_params(&k, &k, &ps, &pi).unwrap();
        prop_assert!((bp.r - 1.0).abs() < 1e-12 && bp.phi.abs() < 1e-12);
    }
}

#[test]
fn predicted_path_states_overlap_rounded_states() {
    let (kx, ky) = path_kets();
    let rounded_x =
        BiphotonKet::normalized(Basis::Circular, [c(0.0, 0.0), c(0.55, 0.0), c(-0.83, 0.0), c(0.0, 0.0)]).unwrap();
    let rounded_y =
        BiphotonKet::normalized(Basis::Circular, [c(0.0, 0.0), c(0.92, 0.0), c(-0.39, 0.0), c(0.0, 0.0)]).unwrap();
    assert!(kx.overlap_sqr(&rounded_x) >= 0.999);
    assert!(ky.overlap_sqr(&rounded_y) >= 0.999);
}

#[test]
fn circular_analyzer_projection_matches_hand_expansion() {
    let (kx, _) = path_kets();
    let idler = Projector::normalized(c(0.7, 0.57), c(0.0, 0.41)).unwrap();
    // ψ_X = a0|LR⟩ − a1|RL⟩ and ⟨L|L⟩ = 1, ⟨L|R⟩ = 0, so only a0⟨q|R⟩ survives
    let a0 = 2.0 / 13f64.sqrt();
    let r_vec = [c(FRAC_1_SQRT_2, 0.0), c(0.0, -FRAC_1_SQRT_2)];
    let q_dot_r = idler.c_h.conj() * r_vec[0] + idler.c_v.conj() * r_vec[1];
    let want = q_dot_r * a0;
    let got = joint_projection_amplitude(&kx, &Projector::l(), &idler);
    assert!((got - want).norm() < 1e-12);
}

#[test]
fn beat_regime_targets_are_classified_consistently() {
    let (kx, ky) = path_kets();
    for (r, phi) in [(2.86e-2, PI), (1.43, 0.0), (0.5, PI)] {
        let target = BeatParams { r, phi };
        let found = search_projectors(&kx, &ky, target, 1e-6);
        let check = beat_params(&kx, &ky, &found.proj_s, &found.proj_i).unwrap();
        let achieved = C64::from_polar(check.r, check.phi);
        let residual = (achieved - C64::from_polar(r, phi)).norm();
        assert!((residual - found.residual).abs() < 1e-9);
        assert_eq!(found.attainable, found.residual < 1e-6);
        assert!(
            found.attainable,
            "R = {r}, φ = {phi} should be reachable with these path states"
        );
    }
}
