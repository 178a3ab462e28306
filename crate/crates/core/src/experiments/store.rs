use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use crate::calibration::{
    calibrate_cr_gate, calibrate_local_gate, calibrate_single_qutrit, local_indices, CalibratedGate, CalibrationOptions, ControlPrep,
    Rotation,
};
use crate::device::{DeviceParams, Subspace, Transmon};
use crate::effective::{ideal_single_qutrit, CrTarget, SingleQutritGate};
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::metrics::{average_gate_fidelity, block_gate_fidelity};

/// Gates every store holds, in calibration order.
pub const STORE_KEYS: [&str; 8] = ["X01π(1)", "X01π(2)", "X12π(1)", "X12π(2)", "V(2)", "H3(1)", "CR01(π)", "CSX12"];

/// How a store entry is calibrated and what it targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StoreGate {
    Rotation(Transmon, Rotation),
    Local(Transmon, SingleQutritGate),
    Cr(CrTarget),
}

impl StoreGate {
    pub fn for_key(key: &str) -> Result<Self> {
        Ok(match key {
            "X01π(1)" => Self::Rotation(Transmon::One, Rotation::x01_pi()),
            "X01π(2)" => Self::Rotation(Transmon::Two, Rotation::x01_pi()),
            "X12π(1)" => Self::Rotation(Transmon::One, Rotation::x12_pi()),
            "X12π(2)" => Self::Rotation(Transmon::Two, Rotation::x12_pi()),
            "V(2)" => Self::Local(Transmon::Two, SingleQutritGate::V),
            "H3(1)" => Self::Local(Transmon::One, SingleQutritGate::H3),
            "CR01(π)" => Self::Cr(CrTarget::idealized(Subspace::S01, PI)),
            "CSX12" => Self::Cr(CrTarget::idealized(Subspace::S12, PI / 2.0)),
            _ => return Err(Error::UnknownGate(key.to_string())),
        })
    }

    pub fn calibrate(&self, p: &DeviceParams, opts: &CalibrationOptions) -> Result<CalibratedGate> {
        match *self {
            Self::Rotation(t, rot) => calibrate_single_qutrit(p, t, rot, opts),
            Self::Local(t, g) => calibrate_local_gate(p, t, g, opts),
            Self::Cr(target) => calibrate_cr_gate(p, &target, opts),
        }
    }

    /// Fidelity measure used during calibration: the local 3×3 block for
    /// single-qutrit gates, the full gate for CR gates.
    pub fn fidelity(&self, achieved: &ComplexMatrix) -> Result<f64> {
        let local = |t: Transmon, target: ComplexMatrix| {
            let idx = local_indices(t);
            let blk = ComplexMatrix::from_fn(3, 3, |i, j| achieved[(idx[i], idx[j])]);
            block_gate_fidelity(&target, &blk)
        };
        Ok(match *self {
            Self::Rotation(t, rot) => local(t, rot.matrix()),
            Self::Local(t, g) => local(t, ideal_single_qutrit(g).matrix),
            Self::Cr(target) => average_gate_fidelity(achieved, &target.gate().matrix)?,
        })
    }
}

/// SHA-256 over everything a calibration depends on.
pub fn calibration_hash(p: &DeviceParams, opts: &CalibrationOptions) -> Result<String> {
    let bytes = serde_json::to_vec(&(p, opts))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationStore {
    pub config_hash: String,
    pub device: DeviceParams,
    pub options: CalibrationOptions,
    pub gates: BTreeMap<String, CalibratedGate>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StoreStatus {
    Reused,
    Created,
    /// An existing store was discarded for the given reason.
    Regenerated(String),
}

impl CalibrationStore {
    /// Calibrate every gate in [`STORE_KEYS`]; independent gates run in parallel.
    pub fn calibrate(p: &DeviceParams, opts: &CalibrationOptions) -> Result<Self> {
        let gates = STORE_KEYS
            .par_iter()
            .map(|key| {
                let mut g = StoreGate::for_key(key)?.calibrate(p, opts)?;
                g.name = key.to_string();
                Ok((key.to_string(), g))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(Self {
            config_hash: calibration_hash(p, opts)?,
            device: p.clone(),
            options: *opts,
            gates,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Write through a temporary file so a crash never leaves a partial store.
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_string_pretty(self)?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Why this store cannot serve `p` and `opts`, if it cannot.
    pub fn mismatch(&self, p: &DeviceParams, opts: &CalibrationOptions) -> Result<Option<String>> {
        let want = calibration_hash(p, opts)?;
        if self.config_hash != want {
            return Ok(Some(format!("config hash {} != {want}", self.config_hash)));
        }
        if let Some(k) = STORE_KEYS.iter().find(|k| !self.gates.contains_key(**k)) {
            return Ok(Some(format!("missing {k}")));
        }
        Ok(None)
    }

    /// Entry by key or by a loose alias such as `csx12`, `x01pi1` or `cr01`.
    pub fn gate(&self, name: &str) -> Result<&CalibratedGate> {
        let want = normalize(name);
        self.gates
            .iter()
            .find(|(k, _)| {
                let k = normalize(k);
                k == want || k == format!("{want}pi")
            })
            .map(|(_, g)| g)
            .ok_or_else(|| Error::UnknownGate(name.to_string()))
    }

    pub fn control_prep(&self) -> Result<ControlPrep> {
        Ok(ControlPrep {
            x01: self.gate("X01π(1)")?.clone(),
            x12: self.gate("X12π(1)")?.clone(),
        })
    }

    /// One line per gate: name, duration and fidelity.
    pub fn fidelity_table(&self) -> String {
        let mut out = format!("{:<10} {:>12} {:>12}\n", "gate", "duration_ns", "fidelity");
        for key in STORE_KEYS {
            if let Some(g) = self.gates.get(key) {
                out += &format!("{:<10} {:>12.2} {:>12.6}\n", key, g.duration(), g.fidelity_to_target);
            }
        }
        out
    }
}

fn normalize(s: &str) -> String {
    s.to_lowercase().replace('π', "pi").chars().filter(|c| c.is_ascii_alphanumeric()).collect()
}

/// Load the store at `path` if it matches `cfg`, otherwise calibrate and
/// overwrite it. Unreadable stores are regenerated.
pub fn cmd_calibrate(cfg: &ExperimentConfig, path: &Path) -> Result<(CalibrationStore, StoreStatus)> {
    let (p, opts) = (&cfg.device, &cfg.calibration);
    let status = if path.exists() {
        match CalibrationStore::load(path) {
            Ok(store) => match store.mismatch(p, opts)? {
                None => return Ok((store, StoreStatus::Reused)),
                Some(why) => StoreStatus::Regenerated(why),
            },
            Err(e) => StoreStatus::Regenerated(format!("unreadable store: {e}")),
        }
    } else {
        StoreStatus::Created
    };
    let store = CalibrationStore::calibrate(p, opts)?;
    store.save(path)?;
    Ok((store, status))
}
