//! Diagonal phase corrections after a gate.

use serde::{Deserialize, Serialize};

use crate::device::{DIM, LEVELS};
use crate::effective::IdealGate;
use crate::error::{Error, Result};
use crate::linalg::{cis, ComplexMatrix, C64, ZERO};
use crate::metrics::gate_fidelity_unchecked;

/// Post-gate `Zdiag(φa, φb)` on each transmon; index 0 is transmon one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct VirtualPhases(pub [(f64, f64); 2]);

impl VirtualPhases {
    /// `Zdiag ⊗ Zdiag` for two qutrits, or the first factor alone for one.
    pub fn matrix(&self, dim: usize) -> ComplexMatrix {
        let l = |p: (f64, f64)| [0.0, p.0, p.1];
        let (a, b) = (l(self.0[0]), l(self.0[1]));
        if dim == LEVELS {
            return ComplexMatrix::from_diagonal(&a.map(cis));
        }
        ComplexMatrix::from_diagonal(&(0..DIM).map(|k| cis(a[k / LEVELS] + b[k % LEVELS])).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseFit {
    pub phases: VirtualPhases,
    pub fidelity: f64,
    pub initial_fidelity: f64,
}

/// Choose the post-gate diagonal phases that maximize the average gate
/// fidelity of `Z·achieved` to `target`. Never returns a lower fidelity than
/// the uncorrected gate.
pub fn calibrate_virtual_phases(achieved: &ComplexMatrix, target: &IdealGate) -> Result<PhaseFit> {
    let dim = achieved.rows();
    if dim != target.dim() || !(dim == LEVELS || dim == DIM) {
        return Err(Error::DimMismatch { expected: target.dim(), got: dim });
    }
    // Tr(T† Z U) = Σ_k Z_kk (U T†)_kk
    let ut = achieved * &target.matrix.adjoint();
    let m: Vec<C64> = (0..dim).map(|k| ut[(k, k)]).collect();
    let groups: Vec<Vec<usize>> = if dim == LEVELS {
        vec![vec![0], vec![1], vec![2]]
    } else {
        (0..LEVELS)
            .map(|c| (0..LEVELS).map(|q| LEVELS * c + q).collect())
            .chain((0..LEVELS).map(|q| (0..LEVELS).map(|c| LEVELS * c + q).collect()))
            .collect()
    };

    let score = |angles: &[f64]| -> C64 {
        let mut s = ZERO;
        for (k, mk) in m.iter().enumerate() {
            s += mk * cis(phase_of(angles, k, dim));
        }
        s
    };

    let initial = gate_fidelity_unchecked(&target.matrix, achieved);
    let mut best_angles = vec![0.0; groups.len()];
    let mut best_norm = score(&best_angles).norm();
    // a few deterministic starts guard against the rare poor local optimum
    let starts: Vec<Vec<f64>> = {
        let mut v = vec![vec![0.0; groups.len()]];
        v.push((0..groups.len()).map(|g| -m[groups[g][0]].arg()).collect());
        for s in [2.1, 4.2] {
            v.push((0..groups.len()).map(|g| s * g as f64).collect());
        }
        v
    };
    for start in starts {
        let mut angles = start;
        for _ in 0..200 {
            let before = score(&angles).norm();
            for (g, members) in groups.iter().enumerate() {
                let mut part = ZERO;
                for &k in members {
                    part += m[k] * cis(phase_of(&angles, k, dim) - angles[g]);
                }
                let rest = score(&angles) - part * cis(angles[g]);
                if part.norm() > 0.0 {
                    angles[g] = if rest.norm() > 0.0 { rest.arg() - part.arg() } else { -part.arg() };
                }
            }
            if score(&angles).norm() - before <= 1e-15 {
                break;
            }
        }
        let n = score(&angles).norm();
        if n > best_norm {
            best_norm = n;
            best_angles = angles;
        }
    }

    let phases = normalize(&best_angles, dim);
    let corrected = &phases.matrix(dim) * achieved;
    let fidelity = gate_fidelity_unchecked(&target.matrix, &corrected);
    if fidelity < initial {
        return Ok(PhaseFit {
            phases: VirtualPhases::default(),
            fidelity: initial,
            initial_fidelity: initial,
        });
    }
    Ok(PhaseFit {
        phases,
        fidelity,
        initial_fidelity: initial,
    })
}

/// Phase of diagonal entry `k`; angles are per-level for each transmon.
fn phase_of(angles: &[f64], k: usize, dim: usize) -> f64 {
    if dim == LEVELS {
        angles[k]
    } else {
        angles[k / LEVELS] + angles[LEVELS + k % LEVELS]
    }
}

/// Remove the global phase so level 0 of each transmon carries no phase.
fn normalize(angles: &[f64], dim: usize) -> VirtualPhases {
    let w = |x: f64| {
        let p = x.rem_euclid(std::f64::consts::TAU);
        if p > std::f64::consts::PI {
            p - std::f64::consts::TAU
        } else {
            p
        }
    };
    let a = &angles[..LEVELS];
    let first = (w(a[1] - a[0]), w(a[2] - a[0]));
    let second = if dim == DIM {
        let b = &angles[LEVELS..];
        (w(b[1] - b[0]), w(b[2] - b[0]))
    } else {
        (0.0, 0.0)
    };
    VirtualPhases([first, second])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{Subspace, Transmon};
    use crate::effective::{ideal_ucr, rotation, zdiag};
    use std::f64::consts::PI;

    #[test]
    fn identical_gates_need_no_phases() {
        let t = ideal_ucr(Subspace::S01, PI, [1.0, 0.0, -1.0]);
        let fit = calibrate_virtual_phases(&t.matrix, &t).unwrap();
        assert!((fit.fidelity - 1.0).abs() < 1e-12);
        for (a, b) in fit.phases.0 {
            assert!(a.abs() < 1e-9 && b.abs() < 1e-9);
        }
    }

    #[test]
    fn recovers_control_phase_error() {
        let t = ideal_ucr(Subspace::S01, PI, [1.0, 0.0, -1.0]);
        let achieved = &t.matrix * &Transmon::One.embed(&zdiag(0.3, -0.2));
        let fit = calibrate_virtual_phases(&achieved, &t).unwrap();
        assert!((fit.fidelity - 1.0).abs() < 1e-10);
        let (a, b) = fit.phases.0[0];
        assert!((a + 0.3).abs() < 1e-4 && (b - 0.2).abs() < 1e-4, "{fit:?}");
    }

    #[test]
    fn recovers_phases_on_both_transmons() {
        let t = ideal_ucr(Subspace::S12, PI / 2.0, [1.0, 0.0, -1.0]);
        let z = VirtualPhases([(0.4, -1.1), (2.0, 0.5)]);
        let achieved = &z.matrix(DIM).adjoint() * &t.matrix;
        let fit = calibrate_virtual_phases(&achieved, &t).unwrap();
        assert!((fit.fidelity - 1.0).abs() < 1e-10, "{fit:?}");
    }

    #[test]
    fn non_diagonal_error_is_not_removed() {
        let t = IdealGate::new("X", crate::effective::rx(Subspace::S01, PI)).unwrap();
        let err = rotation(Subspace::S01, 0.2, PI / 2.0);
        let achieved = &t.matrix * &err;
        let fit = calibrate_virtual_phases(&achieved, &t).unwrap();
        assert!(fit.fidelity < 1.0 - 1e-4);
        assert!((fit.fidelity - fit.initial_fidelity).abs() < 1e-6, "{fit:?}");
    }
}
