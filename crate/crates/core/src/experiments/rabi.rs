use std::f64::consts::PI;

use rayon::prelude::*;

use super::config::{Check, ControlFit, ExperimentConfig, ExperimentResult};
use crate::calibration::{coherence_phase_difference, conditional_rates, run_rabi_scan, ControlPrep, RabiOptions, RabiTrace};
use crate::device::{Subspace, LEVELS};
use crate::error::{Error, Result};
use crate::simulate::Simulator;

pub const CSV_HEADER: &str = "t_ns,p00,p01,p02,p10,p11,p12,p20,p21,p22";

/// `points` evenly spaced values from 0 to `t_max`.
pub fn linspace(t_max: f64, points: usize) -> Result<Vec<f64>> {
    if points == 0 || !(t_max.is_finite() && t_max >= 0.0) || (points > 1 && t_max == 0.0) {
        return Err(Error::InvalidParams(format!("grid of {points} points up to {t_max} ns")));
    }
    if points == 1 {
        return Ok(vec![0.0]);
    }
    Ok((0..points).map(|k| t_max * k as f64 / (points - 1) as f64).collect())
}

#[derive(Debug, Clone)]
pub struct RabiRun {
    /// Populations for the requested control state.
    pub csv: String,
    /// Fits for every control state.
    pub result: ExperimentResult,
    pub traces: Vec<RabiTrace>,
}

fn csv(trace: &RabiTrace) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for (t, row) in trace.durations.iter().zip(&trace.populations) {
        out += &t.to_string();
        for p in row {
            out.push(',');
            out += &p.to_string();
        }
        out.push('\n');
    }
    out
}

/// Conditional Rabi scan. All three control states are simulated so the
/// sidecar can compare them; the CSV holds `control_state` only.
pub fn cmd_rabi(cfg: &ExperimentConfig, subspace: Subspace, control_state: usize, amp: f64, grid: &[f64], prep: &ControlPrep) -> Result<RabiRun> {
    if control_state >= LEVELS {
        return Err(Error::OutOfRange {
            value: control_state as f64,
            lo: 0.0,
            hi: 2.0,
        });
    }
    let sim = Simulator::new(&cfg.device, &cfg.rabi.evolve)?;
    let ro = RabiOptions {
        risefall_ns: cfg.rabi.risefall_ns,
        phase_rad: cfg.rabi.phase_rad,
    };
    let traces = (0..LEVELS)
        .into_par_iter()
        .map(|c| run_rabi_scan(&sim, subspace, amp, grid, c, Some(prep), &ro))
        .collect::<Result<Vec<_>>>()?;

    let rates = conditional_rates(&traces).ok();
    let fits: Vec<ControlFit> = traces
        .iter()
        .enumerate()
        .map(|(c, tr)| {
            let (fit, error) = match tr.fit() {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            ControlFit {
                control_state: c,
                fit,
                error,
                rate_rad_per_ns: rates.as_ref().map(|r| r[c].rate),
            }
        })
        .collect();

    let freq = |c: usize| fits[c].fit.map(|f| f.freq);
    let mut checks = Vec::new();
    match subspace {
        Subspace::S01 => {
            if let Some(f0) = freq(0) {
                // no oscillation on control |1⟩ counts as identity
                checks.push(Check::new("control1_over_control0", freq(1).unwrap_or(0.0) / f0, 0.0, 0.35));
                if let Some(f2) = freq(2) {
                    checks.push(Check::new("control2_over_control0", f2 / f0, 0.85, 1.15));
                }
            }
        }
        Subspace::S12 => {
            if let Ok(d) = coherence_phase_difference(&traces[0], &traces[2]) {
                checks.push(Check::new("phase_difference_rad", d, PI - 0.3, PI + 0.3));
            }
        }
    }
    let edges = 2.0 * cfg.rabi.risefall_ns;
    let result = ExperimentResult {
        pipeline: format!("rabi{}", subspace.label()),
        config_hash: cfg.hash()?,
        seed: cfg.seed,
        duration_ns: grid.last().map_or(0.0, |w| w + edges),
        metrics: Vec::new(),
        fits,
        checks,
    };
    Ok(RabiRun {
        csv: csv(&traces[control_state]),
        result,
        traces,
    })
}
