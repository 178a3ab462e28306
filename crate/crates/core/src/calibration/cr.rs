//! Cross-resonance gate calibration.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::fit::fit_rabi;
use super::gate::{CalibratedGate, CalibrationOptions, PulseParams};
use super::optimize::{nelder_mead, NelderMeadOptions};
use super::phases::{calibrate_virtual_phases, VirtualPhases};
use super::rabi::{conditional_rates, edge_width, principal_axis, project, run_rabi_scan, RabiOptions, RabiTrace};
use crate::device::{transition_frequencies, DeviceParams, Subspace, Transmon};
use crate::effective::{CrTarget, IdealGate};
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::metrics::average_gate_fidelity;
use crate::pulse::{build_cr_schedule, Schedule, MAX_AMP_GHZ};
use crate::simulate::Simulator;

/// Longest flat-top width probed by the stage-one scan.
pub const CR_SCAN_SPAN_NS: f64 = 1600.0;

/// One pulse setting and the fidelity it reached after phase correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrPoint {
    pub amp_ghz: f64,
    pub width_ns: f64,
    pub phase_rad: f64,
    pub fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrCalibration {
    pub gate: CalibratedGate,
    /// Width and phase from the control-0 Rabi fit, scored in the search model.
    pub stage1: CrPoint,
    /// After simplex refinement, scored in the search model.
    pub stage2: CrPoint,
    pub evals: usize,
}

pub fn cr_amp(subspace: Subspace, opts: &CalibrationOptions) -> f64 {
    match subspace {
        Subspace::S01 => opts.cr01_amp_ghz,
        Subspace::S12 => opts.cr12_amp_ghz,
    }
}

/// Plateau rate (rad/ns) and rotation axis of the target under control `|0⟩`.
pub fn control0_rotation(trace: &RabiTrace) -> Result<(f64, f64)> {
    let rate = conditional_rates(std::slice::from_ref(trace))?[0].rate.abs();
    let (lo, hi) = trace.subspace.levels();
    let z = trace.target_coherence(lo, hi);
    // a rotation about φ moves the coherence along ±sin(Ωt)·(−i·e^{iφ}); the
    // sign of the sine separates φ from φ + π
    let u = principal_axis(&z);
    let sign = match fit_rabi(&trace.durations, &project(&z, u)) {
        Ok(f) if f.phase.sin() > 0.0 => -1.0,
        _ => 1.0,
    };
    Ok((rate, (u * sign).arg() + FRAC_PI_2))
}

/// Best post-gate phases and fidelity of a CR schedule.
fn score(sim: &Simulator, schedule: &Schedule, target: &IdealGate) -> Result<(VirtualPhases, f64)> {
    let u = sim.unitary(schedule)?.value;
    let fit = calibrate_virtual_phases(&u, target)?;
    Ok((fit.phases, fit.fidelity))
}

pub fn calibrate_cr_gate(p: &DeviceParams, target: &CrTarget, opts: &CalibrationOptions) -> Result<CalibratedGate> {
    Ok(calibrate_cr_detailed(p, target, opts)?.gate)
}

/// Stage one fixes the amplitude and reads the width and carrier phase off a
/// control-0 Rabi scan. Stage two refines (amp, width, phase) with a simplex
/// search, closing the four post-gate phases exactly at every step.
pub fn calibrate_cr_detailed(p: &DeviceParams, target: &CrTarget, opts: &CalibrationOptions) -> Result<CrCalibration> {
    let ideal = target.gate();
    let name = ideal.name.clone();
    let fail = |reason: String| Error::CalibrationFailed {
        gate: name.clone(),
        reason,
    };
    let sub = target.subspace;
    let rf = opts.cr_risefall_ns;
    let amp0 = cr_amp(sub, opts);
    let theta = (target.theta * target.signs[0]).abs();
    if theta < 1e-12 {
        return Err(fail("control-0 angle must be nonzero".into()));
    }
    let search = Simulator::new(p, &opts.search_evolve())?;

    let n = opts.cr_scan_points.max(16);
    let widths: Vec<f64> = (0..n).map(|k| CR_SCAN_SPAN_NS * k as f64 / (n - 1) as f64).collect();
    let trace = run_rabi_scan(&search, sub, amp0, &widths, 0, None, &RabiOptions { risefall_ns: rf, phase_rad: 0.0 })?;
    let (rate, axis) = control0_rotation(&trace).map_err(|e| fail(format!("control-0 scan: {e}")))?;
    let width0 = (theta / rate - edge_width(amp0, rf)).max(0.0);
    let phase0 = axis;

    let build = |x: &[f64]| build_cr_schedule(p, sub, x[0], x[1], rf, x[2]);
    let (amp_lo, amp_hi) = (amp0 * (1.0 - opts.cr_amp_window), (amp0 * (1.0 + opts.cr_amp_window)).min(MAX_AMP_GHZ));
    let valid = |x: &[f64]| x[0] > 0.0 && x[0] >= amp_lo && x[0] <= amp_hi && x[1] >= 0.0;
    let f1 = score(&search, &build(&[amp0, width0, phase0])?, &ideal)?.1;
    let stage1 = CrPoint {
        amp_ghz: amp0,
        width_ns: width0,
        phase_rad: phase0,
        fidelity: f1,
    };

    let objective = |sim: &Simulator, x: &[f64]| -> Result<f64> {
        if !valid(x) {
            return Ok(f64::INFINITY);
        }
        Ok(1.0 - score(sim, &build(x)?, &ideal)?.1)
    };
    let nm = NelderMeadOptions {
        max_evals: opts.cr_max_evals,
        f_tol: 1e-7,
        x_tol: 1e-4,
    };
    let x0 = [amp0, width0, phase0];
    let steps = [0.5 * opts.cr_amp_window * amp0, 0.05 * (width0 + edge_width(amp0, rf)), 0.1];
    let best = nelder_mead(|x| objective(&search, x), &x0, &steps, &nm)?;
    let mut evals = best.evals;
    let stage2 = CrPoint {
        amp_ghz: best.x[0],
        width_ns: best.x[1],
        phase_rad: best.x[2],
        fidelity: 1.0 - best.value,
    };

    let physical = Simulator::new(p, &opts.evolve)?;
    let mut x = best.x.clone();
    if opts.search_evolve() != opts.evolve && opts.cr_polish_evals > 0 {
        let polish = NelderMeadOptions {
            max_evals: opts.cr_polish_evals,
            f_tol: 1e-7,
            x_tol: 1e-4,
        };
        let small = [0.005 * x[0], 2.0, 0.02];
        let refined = nelder_mead(|x| objective(&physical, x), &x, &small, &polish)?;
        evals += refined.evals;
        x = refined.x;
    }

    let pulses = build(&x)?;
    let (phases, _) = score(&physical, &pulses, &ideal)?;
    let mut schedule = pulses;
    for (t, (a, b)) in [Transmon::One, Transmon::Two].into_iter().zip(phases.0) {
        schedule.push_zdiag(t, a, b);
    }
    let achieved: ComplexMatrix = physical.unitary(&schedule)?.value;
    let fidelity = average_gate_fidelity(&achieved, &ideal.matrix)?;
    let carrier = transition_frequencies(p, true)?.get(Transmon::Two, sub);
    let gate = CalibratedGate {
        name: name.clone(),
        schedule,
        virtual_phases: phases,
        achieved,
        fidelity_to_target: fidelity,
        params: PulseParams::CrossResonance {
            amp_ghz: x[0],
            width_ns: x[1],
            risefall_ns: rf,
            phase_rad: x[2],
            carrier_ghz: carrier,
        },
    };
    if fidelity < opts.cr_min_fidelity {
        return Err(fail(format!(
            "fidelity {fidelity:.6} below {} (search model reached {:.6})",
            opts.cr_min_fidelity, stage2.fidelity
        )));
    }
    Ok(CrCalibration { gate, stage1, stage2, evals })
}
