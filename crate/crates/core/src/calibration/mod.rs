//! Pulse calibration: Rabi fits, single-qutrit gates and cross-resonance gates.

pub mod cr;
pub mod fit;
pub mod gate;
pub mod optimize;
pub mod phases;
pub mod rabi;
pub mod single;

pub use fit::{fit_rabi, FitResult};
pub use optimize::{nelder_mead, Minimum, NelderMeadOptions};
pub use phases::{calibrate_virtual_phases, PhaseFit, VirtualPhases};
pub use gate::{local_indices, CalibratedGate, CalibrationOptions, PulseParams};
pub use single::{calibrate_local_gate, calibrate_single_qutrit, prepare_control_state, Rotation};
pub use rabi::{coherence_phase_difference, conditional_rates, run_rabi_scan, ConditionalRate, ControlPrep, RabiOptions, RabiTrace};
pub use cr::{calibrate_cr_detailed, calibrate_cr_gate, CrCalibration, CrPoint};
