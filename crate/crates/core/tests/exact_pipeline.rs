mod common;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use qstokes::measurement::{default_plan, measure_exact, measure_exact_via_state, measure_plan_exact};
use qstokes::reconstruct::reconstruct_all;
use qstokes::stokes::{correlations_from_state, stokes_oracle};
use qstokes::{Error, MeasurementSetting, Realization, ReconstructOptions, Role, TwoModeState, C64};

#[test]
fn moment_transform_matches_rotated_state() {
    let plan = default_plan(None, None).unwrap().with_identity_settings();
    for t in common::test_states(11) {
        for e in &plan.entries {
            let a = measure_exact(&t.state, e.setting, e.role).unwrap().values.to_array();
            let b = measure_exact_via_state(&t.state, e.setting, e.role)
                .unwrap()
                .values
                .to_array();
            for k in 0..5 {
                // rotating a truncated grid leaks a little weight past the cutoff
                assert!(
                    (a[k] - b[k]).abs() < 1e-8 * (1.0 + a[k].abs()),
                    "{} at {:?}: {a:?} vs {b:?}",
                    t.label,
                    e.setting
                );
            }
        }
    }
}

#[test]
fn gadget_realization_round_trips() {
    let plan = default_plan(None, None)
        .unwrap()
        .with_realization(Realization::QqhGadget);
    for t in common::test_states(3) {
        let recs = measure_plan_exact(&t.state, &plan).unwrap();
        let rep = reconstruct_all(&recs, &ReconstructOptions::default()).unwrap();
        assert!(
            rep.corr.max_abs_diff(&correlations_from_state(&t.state)) < 1e-8,
            "{}",
            t.label
        );
        assert!(rep.summary.max_abs_diff(&stokes_oracle(&t.state)) < 1e-8, "{}", t.label);
        assert!(rep.warnings.is_empty(), "{}: {:?}", t.label, rep.warnings);
    }
}

#[test]
fn gadget_rejects_general_phase() {
    let s = MeasurementSetting::new(0.3, 0.7).with_realization(Realization::QqhGadget);
    let err = measure_exact(&TwoModeState::vacuum(3).unwrap(), s, Role::FirstOrder).unwrap_err();
    assert!(matches!(err, Error::UnsupportedGadget { .. }), "{err}");
}

#[test]
fn custom_theta_sets_reconstruct() {
    let plan = default_plan(Some(&[0.2, 0.5, 0.8, 1.1, 1.4, 1.0]), Some(&[0.3, FRAC_PI_4, 1.2, 1.0])).unwrap();
    let s = TwoModeState::squeezed_coherent(C64::new(0.5, 0.2), C64::new(-0.3, 0.4), C64::new(0.15, -0.2), 25).unwrap();
    let rep = reconstruct_all(&measure_plan_exact(&s, &plan).unwrap(), &ReconstructOptions::default()).unwrap();
    assert!(rep.summary.max_abs_diff(&stokes_oracle(&s)) < 1e-8);
}

#[test]
fn degenerate_theta_sets_are_rejected() {
    assert!(matches!(
        default_plan(Some(&[0.1, 0.2, 0.3, 0.4, 0.1 + std::f64::consts::PI]), None),
        Err(Error::DegenerateThetas(_))
    ));
    assert!(default_plan(None, Some(&[0.3, 0.6])).is_err());
    // θ = 0 and π/2 leave the cross terms unseen
    assert!(default_plan(None, Some(&[0.0, FRAC_PI_2, 1.0])).is_err());
}

#[test]
fn dropping_the_mixed_setting_fails_loudly() {
    let mut plan = default_plan(None, None).unwrap();
    plan.entries.retain(|e| e.role != Role::Mixed);
    let s = TwoModeState::coherent(C64::new(1.0, 0.0), C64::new(0.0, 1.0), 20).unwrap();
    let recs = measure_plan_exact(&s, &plan).unwrap();
    assert!(reconstruct_all(&recs, &ReconstructOptions::default()).is_err());
}

#[test]
fn inconsistent_records_raise_warnings() {
    let s = TwoModeState::coherent(C64::new(1.0, 0.0), C64::new(0.5, 0.5), 20).unwrap();
    let mut recs = measure_plan_exact(&s, &default_plan(None, None).unwrap()).unwrap();
    recs.iter_mut()
        .filter(|r| r.role == Role::FamilyPhiHalf)
        .for_each(|r| r.values.g22 += 0.05);
    let rep = reconstruct_all(&recs, &ReconstructOptions::default()).unwrap();
    assert!(rep.ab_discrepancy > 0.01);
    assert!(!rep.warnings.is_empty());
}
