//! Fidelities, purity and two-qutrit concurrence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigh, partial_trace, ComplexMatrix, Keep, StateVector, NORM_TOL};

/// Unitarity tolerance for gate-fidelity inputs.
pub const GATE_UNITARY_TOL: f64 = 1e-7;

fn check_state(psi: &StateVector) -> Result<()> {
    let d = (psi.norm_sqr() - 1.0).abs();
    if d > NORM_TOL {
        return Err(Error::NormDrift(d));
    }
    Ok(())
}

/// `|⟨ψ|φ⟩|²`
pub fn state_fidelity(psi: &StateVector, phi: &StateVector) -> Result<f64> {
    check_state(psi)?;
    check_state(phi)?;
    Ok(psi.inner(phi)?.norm_sqr().min(1.0))
}

/// `(|Tr(U†V)|² + d) / (d(d+1))`
pub fn average_gate_fidelity(u: &ComplexMatrix, v: &ComplexMatrix) -> Result<f64> {
    if u.rows() != v.rows() || u.cols() != v.cols() {
        return Err(Error::DimMismatch {
            expected: u.rows(),
            got: v.rows(),
        });
    }
    for m in [u, v] {
        let e = m.unitarity_error();
        if e > GATE_UNITARY_TOL {
            return Err(Error::NotUnitary(e));
        }
    }
    Ok(gate_fidelity_unchecked(u, v))
}

/// [`average_gate_fidelity`] without the unitarity check, for inner loops
/// over matrices already known to be unitary.
pub fn gate_fidelity_unchecked(u: &ComplexMatrix, v: &ComplexMatrix) -> f64 {
    let d = u.rows() as f64;
    let tr = (&u.adjoint() * v).trace();
    ((tr.norm_sqr() + d) / (d * (d + 1.0))).min(1.0)
}

/// Average fidelity of a possibly leaky block `V` (a sub-block of a larger
/// unitary) to the unitary `U`: `(Tr(MM†) + |Tr M|²) / (d(d+1))`, `M = U†V`.
pub fn block_gate_fidelity(u: &ComplexMatrix, v: &ComplexMatrix) -> f64 {
    let d = u.rows() as f64;
    let m = &u.adjoint() * v;
    let tmm = (&m * &m.adjoint()).trace().re;
    ((tmm + m.trace().norm_sqr()) / (d * (d + 1.0))).clamp(0.0, 1.0)
}

/// `Tr ρ²`
pub fn purity(rho: &ComplexMatrix) -> Result<f64> {
    if !rho.is_square() {
        return Err(Error::NotDensityMatrix("not square".into()));
    }
    if !rho.is_hermitian(1e-10) {
        return Err(Error::NotDensityMatrix("not Hermitian".into()));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
        return Err(Error::NotDensityMatrix(format!("trace {tr}")));
    }
    let (vals, _) = eigh(rho)?;
    if vals.iter().any(|&v| v < -1e-10) {
        return Err(Error::NotDensityMatrix("negative eigenvalue".into()));
    }
    Ok((rho * rho).trace().re)
}

/// `sqrt((3/2)(1 − Tr ρ_A²))` of a pure two-qutrit state.
pub fn concurrence(psi: &StateVector) -> Result<f64> {
    concurrence_keeping(psi, Keep::First)
}

pub fn concurrence_keeping(psi: &StateVector, keep: Keep) -> Result<f64> {
    if psi.dim() != 9 {
        return Err(Error::DimMismatch {
            expected: 9,
            got: psi.dim(),
        });
    }
    check_state(psi)?;
    let rho = partial_trace(psi, keep)?;
    let p = purity(&rho)?;
    Ok((1.5 * (1.0 - p)).max(0.0).sqrt().min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl MetricReport {
    pub fn exact(name: impl Into<String>, value: f64) -> Result<Self> {
        Self::new(name, value, None, None, None)
    }

    pub fn new(name: impl Into<String>, value: f64, stderr: Option<f64>, shots: Option<u64>, seed: Option<u64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::OutOfRange { value, lo: 0.0, hi: 1.0 });
        }
        Ok(Self {
            name: name.into(),
            value,
            stderr,
            shots,
            seed,
        })
    }

    /// One JSON line, no trailing newline.
    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}
