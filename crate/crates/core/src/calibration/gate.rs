//! Calibrated gates and calibration settings.

use serde::{Deserialize, Serialize};

use super::phases::VirtualPhases;
use crate::device::{Transmon, DIM, LEVELS};
use crate::error::Result;
use crate::linalg::ComplexMatrix;
use crate::propagator::EvolveOptions;
use crate::pulse::Schedule;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationOptions {
    /// Model used for reported unitaries and fidelities.
    pub evolve: EvolveOptions,
    /// Run the optimizer loops under the RWA, then re-check (and polish)
    /// with `evolve`.
    pub search_in_rwa: bool,
    pub drag_duration_ns: f64,
    pub drag_sigma_ns: f64,
    pub beta_points: usize,
    pub single_max_evals: usize,
    pub single_min_fidelity: f64,
    pub cr01_amp_ghz: f64,
    pub cr12_amp_ghz: f64,
    pub cr_risefall_ns: f64,
    /// Stage two keeps the CR amplitude within this fraction of its default,
    /// so the configured amplitudes keep setting the gate times.
    pub cr_amp_window: f64,
    pub cr_scan_points: usize,
    pub cr_max_evals: usize,
    pub cr_polish_evals: usize,
    pub cr_min_fidelity: f64,
    pub seed: u64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            evolve: EvolveOptions::default(),
            search_in_rwa: true,
            drag_duration_ns: 40.0,
            drag_sigma_ns: 10.0,
            beta_points: 21,
            single_max_evals: 150,
            single_min_fidelity: 0.999,
            cr01_amp_ghz: 0.5,
            cr12_amp_ghz: 0.08,
            cr_risefall_ns: 20.0,
            cr_amp_window: 0.1,
            cr_scan_points: 48,
            cr_max_evals: 500,
            cr_polish_evals: 0,
            cr_min_fidelity: 0.95,
            seed: 7,
        }
    }
}

impl CalibrationOptions {
    /// Options for the optimizer loops.
    pub fn search_evolve(&self) -> EvolveOptions {
        EvolveOptions {
            rwa: self.evolve.rwa || self.search_in_rwa,
            ..self.evolve
        }
    }
}

/// What was tuned to produce a gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PulseParams {
    Virtual,
    Drag {
        transmon: Transmon,
        amp_ghz: f64,
        beta_ns: f64,
        phase_rad: f64,
        carrier_ghz: f64,
    },
    CrossResonance {
        amp_ghz: f64,
        width_ns: f64,
        risefall_ns: f64,
        phase_rad: f64,
        carrier_ghz: f64,
    },
    Composite {
        parts: Vec<PulseParams>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedGate {
    pub name: String,
    /// Pulses followed by the virtual phase corrections.
    pub schedule: Schedule,
    pub virtual_phases: VirtualPhases,
    /// Full 9×9 gate of `schedule` in the computational frame.
    pub achieved: ComplexMatrix,
    pub fidelity_to_target: f64,
    pub params: PulseParams,
}

impl CalibratedGate {
    pub fn duration(&self) -> f64 {
        self.schedule.duration()
    }

    /// 3×3 action on `transmon` with the other one in `|0⟩`.
    pub fn local_block(&self, transmon: Transmon) -> ComplexMatrix {
        block(&self.achieved, &local_indices(transmon))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Basis indices of `transmon`'s levels with the other transmon in `|0⟩`.
pub fn local_indices(transmon: Transmon) -> [usize; LEVELS] {
    [0, 1, 2].map(|l| transmon.basis_index(l, 0))
}

pub(crate) fn block(u: &ComplexMatrix, idx: &[usize]) -> ComplexMatrix {
    debug_assert_eq!(u.rows(), DIM);
    ComplexMatrix::from_fn(idx.len(), idx.len(), |i, j| u[(idx[i], idx[j])])
}
