//! Reproduction pipelines: calibration store, conditional Rabi scans, Bell
//! preparation and shot sampling.

mod bell;
mod config;
mod rabi;
mod shots;
mod store;

pub use bell::{bell_schedule, cmd_bell, mub_probabilities, BellEstimates};
pub use config::{Check, ControlFit, ExperimentConfig, ExperimentResult, RabiConfig, SEED_ENV};
pub use rabi::{cmd_rabi, linspace, RabiRun, CSV_HEADER};
pub use shots::sample_shots;
pub use store::{calibration_hash, cmd_calibrate, CalibrationStore, StoreGate, StoreStatus, STORE_KEYS};
