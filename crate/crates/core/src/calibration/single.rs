//! DRAG single-qutrit gates.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gate::{block, local_indices, CalibratedGate, CalibrationOptions, PulseParams};
use super::optimize::{nelder_mead, NelderMeadOptions};
use super::phases::{calibrate_virtual_phases, VirtualPhases};
use crate::device::{transition_frequencies, DeviceParams, Subspace, Transmon, DIM, LEVELS, TWO_PI};
use crate::effective::{givens_decompose, ideal_single_qutrit, rotation, IdealGate, SingleQutritGate};
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::metrics::block_gate_fidelity;
use crate::pulse::{concat, Instruction, Play, PulseShape, Schedule, MAX_AMP_GHZ};
use crate::simulate::Simulator;

const GOLDEN_ITERS: usize = 14;

/// `exp(−iθ/2 (cos φ X + sin φ Y))` on one transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    pub subspace: Subspace,
    pub theta: f64,
    pub axis: f64,
}

impl Rotation {
    pub fn rx(subspace: Subspace, theta: f64) -> Self {
        Self { subspace, theta, axis: 0.0 }
    }

    pub fn x01_pi() -> Self {
        Self::rx(Subspace::S01, PI)
    }

    pub fn x12_pi() -> Self {
        Self::rx(Subspace::S12, PI)
    }

    pub fn matrix(&self) -> ComplexMatrix {
        rotation(self.subspace, self.theta, self.axis)
    }

    /// Same rotation with `θ ≥ 0`.
    fn canonical(&self) -> Self {
        if self.theta < 0.0 {
            Self {
                theta: -self.theta,
                axis: self.axis + PI,
                ..*self
            }
        } else {
            *self
        }
    }
}

/// Drive settings of one DRAG pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Drag {
    transmon: Transmon,
    subspace: Subspace,
    carrier: f64,
    sigma: f64,
    duration: f64,
}

impl Drag {
    fn schedule(&self, amp: f64, beta: f64, phase: f64) -> Result<Schedule> {
        let shape = PulseShape::DragGaussian {
            amp_ghz: amp,
            sigma_ns: self.sigma,
            duration_ns: self.duration,
            beta_ns: beta,
        };
        let play = Play::new(self.transmon, 0.0, shape, self.carrier, phase).with_frame(self.transmon, self.subspace);
        Schedule::new(vec![Instruction::Play(play)])
    }

    fn block(&self, sim: &Simulator, amp: f64, beta: f64, phase: f64) -> Result<ComplexMatrix> {
        let idx = local_indices(self.transmon);
        let u = sim.unitary_columns(&self.schedule(amp, beta, phase)?, &idx)?.value;
        Ok(block(&u, &idx))
    }
}

/// Population leaving the driven transition, averaged over its two levels.
fn leakage(b: &ComplexMatrix, s: Subspace) -> f64 {
    let (lo, hi) = s.levels();
    let out = 3 - lo - hi;
    (b[(out, lo)].norm_sqr() + b[(out, hi)].norm_sqr()) / 2.0
}

/// Fidelity of `b` to `target` after the best post-gate phases.
fn corrected(b: &ComplexMatrix, target: &IdealGate) -> Result<(VirtualPhases, f64)> {
    let fit = calibrate_virtual_phases(b, target)?;
    let f = block_gate_fidelity(&target.matrix, &(&fit.phases.matrix(LEVELS) * b));
    Ok((fit.phases, f))
}

fn golden_min(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    for _ in 0..GOLDEN_ITERS {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a)?;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b)?;
        }
    }
    Ok(if fa <= fb { a } else { b })
}

fn finish(
    p: &DeviceParams,
    name: String,
    pulses: Schedule,
    transmon: Transmon,
    target: &IdealGate,
    opts: &CalibrationOptions,
    params: PulseParams,
) -> Result<CalibratedGate> {
    let sim = Simulator::new(p, &opts.evolve)?;
    let raw = sim.unitary(&pulses)?.value;
    let b = block(&raw, &local_indices(transmon));
    let (phases, _) = corrected(&b, target)?;
    let mut schedule = pulses;
    let (a, c) = phases.0[0];
    schedule.push_zdiag(transmon, a, c);
    let achieved = sim.unitary(&schedule)?.value;
    let fidelity = block_gate_fidelity(&target.matrix, &block(&achieved, &local_indices(transmon)));
    Ok(CalibratedGate {
        name,
        schedule,
        virtual_phases: VirtualPhases([phases.0[0], (0.0, 0.0)]),
        achieved,
        fidelity_to_target: fidelity,
        params,
    })
}

/// A single DRAG pulse realizing `rot` on `transmon`, followed by virtual
/// phase corrections. The fidelity is that of the 3×3 block with the other
/// transmon in `|0⟩`.
pub fn calibrate_single_qutrit(p: &DeviceParams, transmon: Transmon, rot: Rotation, opts: &CalibrationOptions) -> Result<CalibratedGate> {
    let name = format!("R{}({:.4},{:.4})[{}]", rot.subspace.label(), rot.theta, rot.axis, u8::from(transmon));
    calibrate_rotation_named(p, transmon, rot, opts, name)
}

fn calibrate_rotation_named(
    p: &DeviceParams,
    transmon: Transmon,
    rot: Rotation,
    opts: &CalibrationOptions,
    name: String,
) -> Result<CalibratedGate> {
    if rot.theta.abs() < 1e-12 {
        return Ok(CalibratedGate {
            name,
            schedule: Schedule::empty(),
            virtual_phases: VirtualPhases::default(),
            achieved: ComplexMatrix::identity(DIM),
            fidelity_to_target: 1.0,
            params: PulseParams::Virtual,
        });
    }
    let rot = rot.canonical();
    let target = IdealGate::new(name.clone(), rot.matrix())?;
    let fail = |reason: String| Error::CalibrationFailed {
        gate: name.clone(),
        reason,
    };
    let drag = Drag {
        transmon,
        subspace: rot.subspace,
        carrier: transition_frequencies(p, true)?.get(transmon, rot.subspace),
        sigma: opts.drag_sigma_ns,
        duration: opts.drag_duration_ns,
    };
    let unit_area = PulseShape::DragGaussian {
        amp_ghz: 1.0,
        sigma_ns: drag.sigma,
        duration_ns: drag.duration,
        beta_ns: 0.0,
    }
    .area();
    let amp0 = rot.theta / (TWO_PI * rot.subspace.matrix_element() * unit_area);
    if !(amp0 < MAX_AMP_GHZ) {
        return Err(fail(format!("needs amplitude {amp0} GHz")));
    }
    let phase0 = -rot.axis;

    let search = Simulator::new(p, &opts.search_evolve())?;
    // leakage-minimizing beta on the grid, then refined between its neighbours
    let span = 2.0 * drag.sigma;
    let n = opts.beta_points.max(3);
    let grid: Vec<f64> = (0..n).map(|k| -span + 2.0 * span * k as f64 / (n - 1) as f64).collect();
    let leaks: Vec<f64> = grid
        .par_iter()
        .map(|&b| drag.block(&search, amp0, b, phase0).map(|u| leakage(&u, rot.subspace)))
        .collect::<Result<_>>()?;
    let k = (0..n).min_by(|&a, &b| leaks[a].total_cmp(&leaks[b])).unwrap_or(n / 2);
    let beta0 = golden_min(grid[k.saturating_sub(1)], grid[(k + 1).min(n - 1)], |b| {
        Ok(leakage(&drag.block(&search, amp0, b, phase0)?, rot.subspace))
    })?;

    let infidelity = |sim: &Simulator, x: &[f64]| -> Result<f64> {
        if !(x[0] > 0.0 && x[0] < MAX_AMP_GHZ) {
            return Ok(f64::INFINITY);
        }
        let b = drag.block(sim, x[0], x[1], x[2])?;
        Ok(1.0 - corrected(&b, &target)?.1)
    };
    let nm = NelderMeadOptions {
        max_evals: opts.single_max_evals,
        f_tol: 1e-11,
        x_tol: 1e-9,
    };
    let steps = [0.02 * amp0, 0.1, 0.02];
    let mut best = nelder_mead(|x| infidelity(&search, x), &[amp0, beta0, phase0], &steps, &nm)?;

    let physical = Simulator::new(p, &opts.evolve)?;
    if opts.search_evolve() != opts.evolve {
        let value = infidelity(&physical, &best.x)?;
        if 1.0 - value < opts.single_min_fidelity.max(0.9999) {
            let polish = NelderMeadOptions {
                max_evals: opts.single_max_evals / 3,
                ..nm
            };
            let small = [0.002 * amp0, 0.02, 0.005];
            let refined = nelder_mead(|x| infidelity(&physical, x), &best.x, &small, &polish)?;
            if refined.value < value {
                best = refined;
            }
        }
    }
    let (amp, beta, phase) = (best.x[0], best.x[1], best.x[2]);
    let params = PulseParams::Drag {
        transmon,
        amp_ghz: amp,
        beta_ns: beta,
        phase_rad: phase,
        carrier_ghz: drag.carrier,
    };
    let gate = finish(p, name.clone(), drag.schedule(amp, beta, phase)?, transmon, &target, opts, params)?;
    if gate.fidelity_to_target < opts.single_min_fidelity {
        return Err(fail(format!("fidelity {:.6} below {}", gate.fidelity_to_target, opts.single_min_fidelity)));
    }
    Ok(gate)
}

/// Calibrate a named local gate. Rotations use one pulse; `H3` and `X012`
/// use three (12, 01, 12) after a leading virtual diagonal.
pub fn calibrate_local_gate(p: &DeviceParams, transmon: Transmon, gate: SingleQutritGate, opts: &CalibrationOptions) -> Result<CalibratedGate> {
    let name = format!("{gate}({})", u8::from(transmon));
    let target = ideal_single_qutrit(gate);
    match gate {
        SingleQutritGate::X01 => calibrate_rotation_named(p, transmon, Rotation::x01_pi(), opts, name),
        SingleQutritGate::V => calibrate_rotation_named(p, transmon, Rotation::rx(Subspace::S12, -PI / 2.0), opts, name),
        SingleQutritGate::Zdiag(a, b) => {
            let mut schedule = Schedule::empty();
            schedule.push_zdiag(transmon, a, b);
            let sim = Simulator::new(p, &opts.evolve)?;
            let achieved = sim.unitary(&schedule)?.value;
            let fidelity = block_gate_fidelity(&target.matrix, &block(&achieved, &local_indices(transmon)));
            Ok(CalibratedGate {
                name,
                schedule,
                virtual_phases: VirtualPhases::default(),
                achieved,
                fidelity_to_target: fidelity,
                params: PulseParams::Virtual,
            })
        }
        SingleQutritGate::H3 | SingleQutritGate::X012 => {
            let dec = givens_decompose(&target.matrix)?;
            let mut lead = Schedule::empty();
            lead.push_zdiag(transmon, dec.phases.0, dec.phases.1);
            let mut parts = Vec::new();
            let mut scheds = vec![lead];
            for (i, g) in dec.rotations.iter().enumerate() {
                let rot = Rotation {
                    subspace: g.subspace,
                    theta: g.theta,
                    axis: g.axis,
                };
                let c = calibrate_rotation_named(p, transmon, rot, opts, format!("{name}.{i}"))?;
                parts.push(c.params.clone());
                scheds.push(c.schedule);
            }
            let refs: Vec<&Schedule> = scheds.iter().collect();
            let pulses = concat(&refs);
            let gate = finish(p, name.clone(), pulses, transmon, &target, opts, PulseParams::Composite { parts })?;
            if gate.fidelity_to_target < opts.single_min_fidelity {
                return Err(Error::CalibrationFailed {
                    gate: name,
                    reason: format!("fidelity {:.6} below {}", gate.fidelity_to_target, opts.single_min_fidelity),
                });
            }
            Ok(gate)
        }
    }
}

/// Control preparation on transmon one: nothing, `X01π`, or `X01π` then `X12π`.
pub fn prepare_control_state(c: usize, x01: &CalibratedGate, x12: &CalibratedGate) -> Result<Schedule> {
    match c {
        0 => Ok(Schedule::empty()),
        1 => Ok(x01.schedule.clone()),
        2 => Ok(concat(&[&x01.schedule, &x12.schedule])),
        _ => Err(Error::OutOfRange {
            value: c as f64,
            lo: 0.0,
            hi: 2.0,
        }),
    }
}
