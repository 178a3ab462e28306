use qutritcr::calibration::{run_rabi_scan, RabiOptions};
use qutritcr::device::{transition_frequencies, DeviceParams, Subspace, Transmon};
use qutritcr::linalg::StateVector;
use qutritcr::propagator::EvolveOptions;
use qutritcr::pulse::{build_cr_schedule, concat, Instruction, Play, PulseShape, Schedule};
use qutritcr::simulate::Simulator;

fn drag(p: &DeviceParams, beta: f64, phase: f64) -> Schedule {
    let f = transition_frequencies(p, true).unwrap().get(Transmon::One, Subspace::S01);
    let shape = PulseShape::DragGaussian {
        amp_ghz: 0.02,
        sigma_ns: 10.0,
        duration_ns: 40.0,
        beta_ns: beta,
    };
    Schedule::new(vec![Instruction::Play(Play::new(Transmon::One, 0.0, shape, f, phase))]).unwrap()
}

#[test]
fn back_to_back_pulses_compose() {
    // uncoupled, so the frame is exact and timing cannot matter
    let p = DeviceParams {
        coupling_j: 0.0,
        ..DeviceParams::default()
    };
    let (a, b) = (drag(&p, 1.5, 0.3), drag(&p, -2.0, 1.1));
    let both = concat(&[&a, &b]);
    let sim = Simulator::new(&p, &EvolveOptions::rwa()).unwrap();
    let whole = sim.unitary(&both).unwrap();
    let parts = &sim.unitary(&b).unwrap().value * &sim.unitary(&a).unwrap().value;
    let err = whole.value.max_abs_diff(&parts);
    assert!(err < 1e-7, "{err}");

    let full = Simulator::new(&p, &EvolveOptions::default()).unwrap().unitary(&both).unwrap();
    assert!(full.is_valid());
    assert!(full.value.unitarity_error() < 1e-7);
}

#[test]
fn long_rotating_wave_runs_stay_normalized() {
    let p = DeviceParams::default();
    let sim = Simulator::new(&p, &EvolveOptions::rwa()).unwrap();
    let s = build_cr_schedule(&p, Subspace::S01, 0.03, 30_000.0, 20.0, 0.0).unwrap();
    let out = sim.evolve(&s, &StateVector::two_qutrit(0, 0)).unwrap();
    assert!(out.is_valid(), "{}", out.norm_drift);
}

#[test]
fn scan_rows_match_single_runs() {
    let p = DeviceParams::default();
    let sim = Simulator::new(&p, &EvolveOptions::default()).unwrap();
    let widths = [0.0, 33.0, 70.0, 140.0];
    let tr = run_rabi_scan(&sim, Subspace::S01, 0.4, &widths, 0, None, &RabiOptions::default()).unwrap();
    for (w, row) in widths.iter().zip(&tr.populations) {
        let s = build_cr_schedule(&p, Subspace::S01, 0.4, *w, 20.0, 0.0).unwrap();
        let psi = sim.evolve(&s, &StateVector::two_qutrit(0, 0)).unwrap().value;
        for (k, a) in psi.amplitudes().iter().enumerate() {
            assert!((a.norm_sqr() - row[k]).abs() < 1e-6, "width {w}, level {k}");
        }
    }
}

#[test]
fn weak_drive_agrees_across_models() {
    let p = DeviceParams::default();
    let s = build_cr_schedule(&p, Subspace::S01, 0.05, 200.0, 20.0, 0.0).unwrap();
    let psi0 = StateVector::two_qutrit(0, 0);
    let rwa = Simulator::new(&p, &EvolveOptions::rwa()).unwrap().evolve(&s, &psi0).unwrap().value;
    let full = Simulator::new(&p, &EvolveOptions::default()).unwrap().evolve(&s, &psi0).unwrap().value;
    for (a, b) in rwa.amplitudes().iter().zip(full.amplitudes()) {
        assert!((a.norm_sqr() - b.norm_sqr()).abs() < 5e-3);
    }
}
