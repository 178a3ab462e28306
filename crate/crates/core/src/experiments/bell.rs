use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Check, ExperimentConfig, ExperimentResult};
use super::shots::sample_shots;
use super::store::CalibrationStore;
use crate::device::{Transmon, LEVELS, TWO_PI};
use crate::effective::BELL_CORRECTION;
use crate::error::Result;
use crate::linalg::{cis, StateVector, C64, ZERO};
use crate::metrics::{concurrence, state_fidelity, MetricReport};
use crate::pulse::{concat, Schedule};
use crate::simulate::Simulator;

const BOOTSTRAP: usize = 32;

/// Calibrated `H3(1)`, `CR01(π)`, `CSX12`, `V(2)`, `X01π(2)` and the
/// closing control-side diagonal.
pub fn bell_schedule(store: &CalibrationStore) -> Result<Schedule> {
    let mut corr = Schedule::empty();
    corr.push_zdiag(Transmon::One, BELL_CORRECTION.0, BELL_CORRECTION.1);
    let parts = ["H3(1)", "CR01(π)", "CSX12", "V(2)", "X01π(2)"]
        .iter()
        .map(|k| store.gate(k).map(|g| &g.schedule))
        .collect::<Result<Vec<_>>>()?;
    let mut all = parts;
    all.push(&corr);
    Ok(concat(&all))
}

/// Outcome probabilities of qutrit one measured in each of the four
/// mutually unbiased bases of dimension three.
pub fn mub_probabilities(psi: &StateVector) -> [[f64; LEVELS]; LEVELS + 1] {
    let a = psi.amplitudes();
    let mut out = [[0.0; LEVELS]; LEVELS + 1];
    for (b, row) in out.iter_mut().enumerate() {
        for (j, p) in row.iter_mut().enumerate() {
            // basis vector v_n = ω^{jn + k n²}/√3 for basis k = b − 1
            let v = |n: usize| -> C64 {
                if b == 0 {
                    if n == j {
                        C64::new(1.0, 0.0)
                    } else {
                        ZERO
                    }
                } else {
                    let k = b - 1;
                    cis(TWO_PI * ((j * n + k * n * n) % 3) as f64 / 3.0) / 3f64.sqrt()
                }
            };
            *p = (0..LEVELS)
                .map(|q2| {
                    let mut amp = ZERO;
                    for q1 in 0..LEVELS {
                        amp += v(q1).conj() * a[LEVELS * q1 + q2];
                    }
                    amp.norm_sqr()
                })
                .sum();
        }
    }
    out
}

/// Shot-based estimates of the Bell fidelity and concurrence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellEstimates {
    pub fidelity: f64,
    pub fidelity_stderr: f64,
    pub concurrence: f64,
    pub concurrence_stderr: f64,
}

fn concurrence_from_counts(counts: &[Vec<u64>]) -> f64 {
    // Σ_b Σ_k p_bk² = Tr ρ² + 1 over a complete set of unbiased bases;
    // c(c−1)/(n(n−1)) is unbiased for p²
    let sum_sq: f64 = counts
        .iter()
        .map(|c| {
            let n = c.iter().sum::<u64>() as f64;
            c.iter()
                .map(|&k| {
                    let k = k as f64;
                    if n > 1.0 {
                        k * (k - 1.0) / (n * (n - 1.0))
                    } else {
                        (k / n.max(1.0)).powi(2)
                    }
                })
                .sum::<f64>()
        })
        .sum();
    (1.5 * (2.0 - sum_sq).max(0.0)).sqrt().min(1.0)
}

impl BellEstimates {
    /// Fidelity from a projective test against `target`; concurrence from
    /// tomography of qutrit one, with shots split evenly over the four bases
    /// and a parametric bootstrap for its error.
    pub fn sample(psi: &StateVector, target: &StateVector, shots: u64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = state_fidelity(psi, target)?.clamp(0.0, 1.0);
        let hits = sample_shots(&[f, 1.0 - f], shots, rng.next_u64())?[0];
        let fidelity = hits as f64 / shots as f64;

        let probs = mub_probabilities(psi);
        let per = |b: usize| shots / 4 + u64::from((b as u64) < shots % 4);
        let draw = |rng: &mut ChaCha8Rng, p: &[[f64; LEVELS]; LEVELS + 1]| -> Result<Vec<Vec<u64>>> {
            p.iter()
                .enumerate()
                .map(|(b, row)| {
                    let s: f64 = row.iter().sum();
                    let row: Vec<f64> = row.iter().map(|x| x / s).collect();
                    sample_shots(&row, per(b), rng.next_u64())
                })
                .collect()
        };
        let counts = draw(&mut rng, &probs)?;
        let c_hat = concurrence_from_counts(&counts);
        let mut observed = [[0.0; LEVELS]; LEVELS + 1];
        for (b, c) in counts.iter().enumerate() {
            let n = c.iter().sum::<u64>().max(1) as f64;
            for k in 0..LEVELS {
                observed[b][k] = c[k] as f64 / n;
            }
        }
        let boot = (0..BOOTSTRAP)
            .map(|_| Ok(concurrence_from_counts(&draw(&mut rng, &observed)?)))
            .collect::<Result<Vec<f64>>>()?;
        let mean = boot.iter().sum::<f64>() / BOOTSTRAP as f64;
        let var = boot.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (BOOTSTRAP - 1) as f64;
        Ok(Self {
            fidelity,
            fidelity_stderr: (fidelity * (1.0 - fidelity) / shots as f64).sqrt(),
            concurrence: c_hat,
            concurrence_stderr: var.sqrt(),
        })
    }
}

/// Propagate `|00⟩` through the calibrated Bell schedule in the full model.
pub fn cmd_bell(cfg: &ExperimentConfig, store: &CalibrationStore) -> Result<ExperimentResult> {
    cfg.validate()?;
    let schedule = bell_schedule(store)?;
    let sim = Simulator::new(&cfg.device, &cfg.calibration.evolve)?;
    let psi = sim.evolve(&schedule, &StateVector::two_qutrit(0, 0))?.value;
    let target = StateVector::bell();
    let fidelity = state_fidelity(&psi, &target)?.clamp(0.0, 1.0);
    let conc = concurrence(&psi)?.clamp(0.0, 1.0);
    let est = BellEstimates::sample(&psi, &target, cfg.shots, cfg.seed)?;
    let duration = schedule.duration();
    let sampled = |name: &str, v: f64, se: f64| MetricReport::new(name, v, Some(se), Some(cfg.shots), Some(cfg.seed));
    Ok(ExperimentResult {
        pipeline: "bell".into(),
        config_hash: cfg.hash()?,
        seed: cfg.seed,
        duration_ns: duration,
        metrics: vec![
            MetricReport::exact("fidelity", fidelity)?,
            MetricReport::exact("concurrence", conc)?,
            sampled("fidelity_shots", est.fidelity, est.fidelity_stderr)?,
            sampled("concurrence_shots", est.concurrence, est.concurrence_stderr)?,
        ],
        fits: Vec::new(),
        checks: vec![
            Check::new("fidelity", fidelity, 0.95, 0.989),
            Check::new("concurrence", conc, 0.95, 1.0),
            Check::new("duration_ns", duration, 563.0, 845.0),
        ],
    })
}
