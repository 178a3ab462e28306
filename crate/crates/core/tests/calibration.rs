use std::f64::consts::PI;
use std::sync::OnceLock;

use qutritcr::calibration::{
    calibrate_cr_detailed, calibrate_single_qutrit, fit_rabi, nelder_mead, prepare_control_state, CalibrationOptions, CrCalibration,
    NelderMeadOptions, Rotation,
};
use qutritcr::device::{DeviceParams, Subspace, Transmon};
use qutritcr::effective::CrTarget;
use qutritcr::linalg::StateVector;
use qutritcr::metrics::average_gate_fidelity;
use qutritcr::propagator::EvolveOptions;
use qutritcr::simulate::Simulator;

struct Shared {
    x01: qutritcr::calibration::CalibratedGate,
    x12: qutritcr::calibration::CalibratedGate,
    cr01: CrCalibration,
    csx12: CrCalibration,
}

fn shared() -> &'static Shared {
    static S: OnceLock<Shared> = OnceLock::new();
    S.get_or_init(|| {
        let p = DeviceParams::default();
        let o = CalibrationOptions::default();
        Shared {
            x01: calibrate_single_qutrit(&p, Transmon::One, Rotation::x01_pi(), &o).unwrap(),
            x12: calibrate_single_qutrit(&p, Transmon::One, Rotation::x12_pi(), &o).unwrap(),
            cr01: calibrate_cr_detailed(&p, &CrTarget::idealized(Subspace::S01, PI), &o).unwrap(),
            csx12: calibrate_cr_detailed(&p, &CrTarget::idealized(Subspace::S12, PI / 2.0), &o).unwrap(),
        }
    })
}

fn sim() -> Simulator {
    Simulator::new(&DeviceParams::default(), &EvolveOptions::default()).unwrap()
}

#[test]
fn x01_pi_flips_the_control() {
    let s = shared();
    let out = sim().evolve(&s.x01.schedule, &StateVector::two_qutrit(0, 0)).unwrap().value;
    let pops: Vec<f64> = out.amplitudes().iter().map(|a| a.norm_sqr()).collect();
    assert!(pops[3] >= 0.999, "{pops:?}");
    // population left on |2⟩ of the driven transmon
    assert!(pops[6] <= 1e-3, "{pops:?}");
}

#[test]
fn control_two_is_prepared() {
    let s = shared();
    let prep = prepare_control_state(2, &s.x01, &s.x12).unwrap();
    let out = sim().evolve(&prep, &StateVector::two_qutrit(0, 0)).unwrap().value;
    assert!(out.amplitudes()[6].norm_sqr() >= 0.998);
    assert!(prepare_control_state(3, &s.x01, &s.x12).is_err());
}

#[test]
fn cr_gates_reach_their_targets() {
    let s = shared();
    for cal in [&s.cr01, &s.csx12] {
        assert!(cal.gate.fidelity_to_target >= 0.96, "{} {}", cal.gate.name, cal.gate.fidelity_to_target);
        assert!(cal.stage2.fidelity >= cal.stage1.fidelity - 1e-12);
        assert!(cal.evals > 0);
    }
    let ideal = CrTarget::idealized(Subspace::S12, PI / 2.0).gate().matrix;
    let f = average_gate_fidelity(&s.csx12.gate.achieved, &ideal).unwrap();
    assert!((f - s.csx12.gate.fidelity_to_target).abs() < 1e-12);
}

#[test]
fn csx12_leaves_control_one_alone() {
    let u = &shared().csx12.gate.achieved;
    for t in 0..3 {
        let stay = u[(3 + t, 3 + t)].norm_sqr();
        assert!(1.0 - stay <= 0.15, "target {t}: {stay}");
    }
}

#[test]
fn single_calibration_is_repeatable() {
    let p = DeviceParams::default();
    let o = CalibrationOptions::default();
    let again = calibrate_single_qutrit(&p, Transmon::One, Rotation::x01_pi(), &o).unwrap();
    assert_eq!(again.to_json().unwrap(), shared().x01.to_json().unwrap());
}

#[test]
fn simplex_finds_a_shifted_bowl() {
    let m = nelder_mead(
        |x| Ok((x[0] - 1.5).powi(2) + 4.0 * (x[1] + 0.5).powi(2)),
        &[0.0, 0.0],
        &[0.5, 0.5],
        &NelderMeadOptions::default(),
    )
    .unwrap();
    assert!((m.x[0] - 1.5).abs() < 1e-4 && (m.x[1] + 0.5).abs() < 1e-4, "{:?}", m.x);
}

#[test]
fn fit_recovers_noiseless_sinusoid() {
    let t: Vec<f64> = (0..120).map(|k| 5.0 * k as f64).collect();
    let y: Vec<f64> = t.iter().map(|t| 0.3 + 0.2 * (2.0 * PI * 0.004 * t + 0.7).cos()).collect();
    let f = fit_rabi(&t, &y).unwrap();
    assert!((f.freq - 0.004).abs() / 0.004 < 1e-4);
    assert!((f.amplitude - 0.2).abs() < 1e-4 && (f.offset - 0.3).abs() < 1e-4);
}
