//! Control-conditioned CR Rabi scans.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::fit::{fit_rabi, FitResult};
use super::gate::CalibratedGate;
use super::single::prepare_control_state;
use crate::device::{Subspace, Transmon, DIM, LEVELS, TWO_PI};
use crate::effective::rotation;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, StateVector, C64, ZERO};
use crate::propagator::populations;
use crate::pulse::{build_cr_schedule, PulseShape, Schedule};
use crate::simulate::{Branch, Simulator};

/// Calibrated `X01π` and `X12π` on transmon one.
#[derive(Debug, Clone)]
pub struct ControlPrep {
    pub x01: CalibratedGate,
    pub x12: CalibratedGate,
}

impl ControlPrep {
    pub fn schedule(&self, c: usize) -> Result<Schedule> {
        prepare_control_state(c, &self.x01, &self.x12)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiOptions {
    pub risefall_ns: f64,
    pub phase_rad: f64,
}

impl Default for RabiOptions {
    fn default() -> Self {
        Self {
            risefall_ns: 20.0,
            phase_rad: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiTrace {
    pub control_state: usize,
    pub subspace: Subspace,
    pub amp_ghz: f64,
    /// Flat-top widths of the CR pulse, ns.
    pub durations: Vec<f64>,
    /// Per width, the nine populations in `|q1 q2⟩` order.
    pub populations: Vec<[f64; DIM]>,
    #[serde(skip)]
    pub states: Vec<StateVector>,
}

impl RabiTrace {
    /// Population of target level `level`, summed over the control.
    pub fn target_population(&self, level: usize) -> Vec<f64> {
        self.populations
            .iter()
            .map(|p| (0..LEVELS).map(|c| p[LEVELS * c + level]).sum())
            .collect()
    }

    /// Reduced target coherence `2ρ_{ji} = 2Σ_c ψ[c,j]·conj(ψ[c,i])`.
    pub fn target_coherence(&self, i: usize, j: usize) -> Vec<C64> {
        self.states
            .iter()
            .map(|s| {
                let a = s.amplitudes();
                let mut z = ZERO;
                for c in 0..LEVELS {
                    z += a[LEVELS * c + j] * a[LEVELS * c + i].conj();
                }
                z * 2.0
            })
            .collect()
    }

    /// Sinusoid fit of the population the drive pumps into.
    pub fn fit(&self) -> Result<FitResult> {
        fit_rabi(&self.durations, &self.target_population(self.subspace.levels().1))
    }
}

/// Target state before the CR pulse: `|0⟩`, or `(|0⟩ − |1⟩)/√2` for the 12 drive.
pub fn rabi_initial_target(subspace: Subspace) -> StateVector {
    rotation_to(subspace).apply(&StateVector::basis(LEVELS, 0)).expect("3-level state")
}

/// For each flat-top width in `widths`: prepare the control, put the target
/// in [`rabi_initial_target`] and play one CR pulse. Widths must increase.
///
/// The control is prepared by propagating its calibrated pulses; the target
/// state is then set exactly.
pub fn run_rabi_scan(
    sim: &Simulator,
    subspace: Subspace,
    amp: f64,
    widths: &[f64],
    control_state: usize,
    prep: Option<&ControlPrep>,
    opts: &RabiOptions,
) -> Result<RabiTrace> {
    if widths.is_empty() || widths.windows(2).any(|w| w[1] <= w[0]) || widths[0] < 0.0 {
        return Err(Error::InvalidParams("widths must be non-negative and strictly increasing".into()));
    }
    let control = match (control_state, prep) {
        (0, _) => StateVector::two_qutrit(0, 0),
        (c, Some(prep)) => sim.evolve(&prep.schedule(c)?, &StateVector::two_qutrit(0, 0))?.value,
        (c, None) if c < LEVELS => {
            return Err(Error::InvalidParams(format!("control state {c} needs calibrated preparation pulses")));
        }
        (c, None) => {
            return Err(Error::OutOfRange {
                value: c as f64,
                lo: 0.0,
                hi: 2.0,
            })
        }
    };
    let init = Transmon::Two.embed(&rotation_to(subspace)).apply(&control)?;

    let p = sim.params();
    let rf = opts.risefall_ns;
    let wmax = *widths.last().expect("non-empty");
    let prefix = build_cr_schedule(p, subspace, amp, wmax, rf, opts.phase_rad)?;
    let branches = widths
        .iter()
        .map(|&w| {
            Ok(Branch {
                split_ns: rf + w,
                schedule: build_cr_schedule(p, subspace, amp, w, rf, opts.phase_rad)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let states = sim.evolve_branches(&prefix, &init, &branches)?;
    let pops = states
        .iter()
        .map(|s| {
            let v = populations(s);
            let mut out = [0.0; DIM];
            out.copy_from_slice(&v);
            out
        })
        .collect();
    Ok(RabiTrace {
        control_state,
        subspace,
        amp_ghz: amp,
        durations: widths.to_vec(),
        populations: pops,
        states,
    })
}

/// Local target unitary taking `|0⟩` to [`rabi_initial_target`].
fn rotation_to(subspace: Subspace) -> ComplexMatrix {
    match subspace {
        Subspace::S01 => ComplexMatrix::identity(LEVELS),
        Subspace::S12 => rotation(Subspace::S01, FRAC_PI_2, -FRAC_PI_2),
    }
}

fn wrap(x: f64) -> f64 {
    let p = x.rem_euclid(TWO_PI);
    if p > PI {
        p - TWO_PI
    } else {
        p
    }
}

/// Unit vector along the principal axis of a set of complex points.
pub(crate) fn principal_axis(z: &[C64]) -> C64 {
    let s: C64 = z.iter().map(|v| v * v).sum();
    C64::from_polar(1.0, s.arg() / 2.0)
}

pub(crate) fn project(z: &[C64], axis: C64) -> Vec<f64> {
    z.iter().map(|v| (v * axis.conj()).re).collect()
}

/// Plateau Rabi rate and rotation axis of one control branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalRate {
    pub control_state: usize,
    /// rad/ns, signed relative to the first trace given
    pub rate: f64,
    pub fit: FitResult,
}

/// Signed target Rabi rates for control-conditioned traces of one drive. The
/// magnitude comes from the population fit, corrected for detuning; the sign
/// from the target coherence projected on the first trace's rotation axis,
/// whose rate is reported positive.
pub fn conditional_rates(traces: &[RabiTrace]) -> Result<Vec<ConditionalRate>> {
    let Some(first) = traces.first() else {
        return Ok(Vec::new());
    };
    let (lo, hi) = first.subspace.levels();
    let axis = principal_axis(&first.target_coherence(lo, hi));
    let mut out = Vec::with_capacity(traces.len());
    let mut ref_sign = 1.0;
    for (k, tr) in traces.iter().enumerate() {
        let fit = tr.fit()?;
        // a resonant drive swings the pumped population by half its source level
        let full = match tr.subspace {
            Subspace::S01 => 0.5,
            Subspace::S12 => 0.25,
        };
        let mag = TWO_PI * fit.freq * (fit.amplitude / full).min(1.0).sqrt();
        let y = project(&tr.target_coherence(lo, hi), axis);
        // sin(Ωt) fits with phase −π/2 for Ω > 0
        let sign = match fit_rabi(&tr.durations, &y) {
            Ok(f) if f.phase.sin() > 0.0 => -1.0,
            Ok(_) => 1.0,
            Err(Error::NoOscillation { .. }) => 1.0,
            Err(e) => return Err(e),
        };
        if k == 0 {
            ref_sign = sign;
        }
        out.push(ConditionalRate {
            control_state: tr.control_state,
            rate: mag * sign * ref_sign,
            fit,
        });
    }
    Ok(out)
}

/// Phase difference (rad, in [0, π]) between the target 0–2 coherence
/// oscillations of two 12-drive traces.
pub fn coherence_phase_difference(a: &RabiTrace, b: &RabiTrace) -> Result<f64> {
    let za = a.target_coherence(0, 2);
    let zb = b.target_coherence(0, 2);
    let axis = principal_axis(&za);
    let fa = fit_rabi(&a.durations, &project(&za, axis))?;
    let fb = fit_rabi(&b.durations, &project(&zb, axis))?;
    Ok(wrap(fb.phase - fa.phase).abs())
}

/// Effective length of the CR edges in units of the plateau: the extra
/// width an ideal square pulse would need for the same area.
pub fn edge_width(amp: f64, risefall: f64) -> f64 {
    let shape = PulseShape::GaussianSquare {
        amp_ghz: amp,
        sigma_ns: risefall / 2.0,
        risefall_ns: risefall,
        width_ns: 0.0,
    };
    shape.area() / amp
}
