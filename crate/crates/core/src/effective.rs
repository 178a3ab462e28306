//! The perturbative cross-resonance model and the ideal gate library.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::device::{transition_frequencies, DeviceParams, Subspace, Transmon, DIM, LEVELS, TWO_PI};
use crate::error::{Error, Result};
use crate::linalg::{cis, kron, ComplexMatrix, StateVector, C64, I, ONE, UNITARY_TOL, ZERO};

const MIN_DENOMINATOR_GHZ: f64 = 1e-6;

/// How the coefficient denominators are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpretation {
    /// `η10 = 1/ω1`, `η11 = 1/(ω1 + δ1)`
    Literal,
    /// `η10 = 1/Δ`, `η11 = 1/(Δ + δ1)` with `Δ = ω1 − ω2`
    #[default]
    Detuning,
}

/// Control-state weights of the effective drive, in GHz⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CRCoefficients {
    pub eta10: f64,
    pub eta11: f64,
    pub nu0: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub interpretation: Interpretation,
}

impl CRCoefficients {
    pub fn nu(&self) -> [f64; LEVELS] {
        [self.nu0, self.nu1, self.nu2]
    }

    /// `(ν1/ν0, ν2/ν0)`
    pub fn ratios(&self) -> (f64, f64) {
        (self.nu1 / self.nu0, self.nu2 / self.nu0)
    }
}

pub fn cr_coefficients(p: &DeviceParams, interpretation: Interpretation) -> Result<CRCoefficients> {
    p.validate()?;
    let base = match interpretation {
        Interpretation::Literal => p.omega1,
        Interpretation::Detuning => p.omega1 - p.omega2,
    };
    let (d10, d11) = (base, base + p.delta1);
    for d in [d10, d11] {
        if d.abs() < MIN_DENOMINATOR_GHZ {
            return Err(Error::SingularDenominator(d));
        }
    }
    let (eta10, eta11) = (1.0 / d10, 1.0 / d11);
    Ok(CRCoefficients {
        eta10,
        eta11,
        nu0: -eta10,
        nu1: eta10 - 2.0 * eta11,
        nu2: 2.0 * eta11,
        interpretation,
    })
}

/// `(Σ ν_i |i⟩⟨i|) ⊗ [e^{iφ01}|0⟩⟨1| + √2 e^{iφ12}|1⟩⟨2| + h.c.]` with
/// `φab = 2π(ω_d − w_ab)t` on the dressed target transitions.
pub fn effective_hamiltonian(p: &DeviceParams, coeffs: &CRCoefficients, omega_d: f64, t: f64) -> Result<ComplexMatrix> {
    let tr = transition_frequencies(p, true)?;
    let phi01 = TWO_PI * (omega_d - tr.w01_2) * t;
    let phi12 = TWO_PI * (omega_d - tr.w12_2) * t;
    let mut target = ComplexMatrix::zeros(LEVELS, LEVELS);
    target[(0, 1)] = cis(phi01);
    target[(1, 0)] = cis(-phi01);
    target[(1, 2)] = cis(phi12) * 2f64.sqrt();
    target[(2, 1)] = cis(-phi12) * 2f64.sqrt();
    let control = ComplexMatrix::from_diagonal(&coeffs.nu().map(|v| C64::new(v, 0.0)));
    Ok(kron(&control, &target))
}

/// `exp(−iθ/2 (cos φ X + sin φ Y))` on one transition of a qutrit.
pub fn rotation(subspace: Subspace, theta: f64, axis: f64) -> ComplexMatrix {
    let (a, b) = subspace.levels();
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let mut m = ComplexMatrix::identity(LEVELS);
    m[(a, a)] = C64::new(c, 0.0);
    m[(b, b)] = C64::new(c, 0.0);
    m[(a, b)] = -I * s * cis(-axis);
    m[(b, a)] = -I * s * cis(axis);
    m
}

/// `R_X^{ab}(θ) = exp(−i(|a⟩⟨b| + |b⟩⟨a|)θ/2)`
pub fn rx(subspace: Subspace, theta: f64) -> ComplexMatrix {
    rotation(subspace, theta, 0.0)
}

/// `diag(1, e^{iφa}, e^{iφb})`
pub fn zdiag(phi_a: f64, phi_b: f64) -> ComplexMatrix {
    ComplexMatrix::from_diagonal(&[ONE, cis(phi_a), cis(phi_b)])
}

/// A named target unitary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdealGate {
    pub name: String,
    pub matrix: ComplexMatrix,
}

impl IdealGate {
    pub fn new(name: impl Into<String>, matrix: ComplexMatrix) -> Result<Self> {
        let err = matrix.unitarity_error();
        if err > UNITARY_TOL {
            return Err(Error::NotUnitary(err));
        }
        Ok(Self {
            name: name.into(),
            matrix,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// Lift a single-qutrit gate onto one transmon of the pair.
    pub fn on(&self, t: Transmon) -> Result<Self> {
        if self.dim() != LEVELS {
            return Err(Error::DimMismatch {
                expected: LEVELS,
                got: self.dim(),
            });
        }
        Ok(Self {
            name: format!("{}({})", self.name, u8::from(t)),
            matrix: t.embed(&self.matrix),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Parameters of a control-conditioned target rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrTarget {
    pub subspace: Subspace,
    pub theta: f64,
    pub signs: [f64; LEVELS],
}

impl CrTarget {
    /// The idealized conditional gate, `signs = (1, 0, −1)`.
    pub fn idealized(subspace: Subspace, theta: f64) -> Self {
        Self {
            subspace,
            theta,
            signs: [1.0, 0.0, -1.0],
        }
    }

    pub fn gate(&self) -> IdealGate {
        ideal_ucr(self.subspace, self.theta, self.signs)
    }
}

/// `Σ_i |i⟩⟨i| ⊗ R_X^{subspace}(s_i θ)`
pub fn ideal_ucr(subspace: Subspace, theta: f64, signs: [f64; LEVELS]) -> IdealGate {
    let mut m = ComplexMatrix::zeros(DIM, DIM);
    for (c, s) in signs.iter().enumerate() {
        let block = rx(subspace, s * theta);
        for i in 0..LEVELS {
            for j in 0..LEVELS {
                m[(LEVELS * c + i, LEVELS * c + j)] = block[(i, j)];
            }
        }
    }
    IdealGate {
        name: format!("UCR{}({theta})", subspace.label()),
        matrix: m,
    }
}

/// `U_CSX` on the chosen transition: idealized conditional `R_X(π/2)`.
pub fn ideal_csx(subspace: Subspace) -> IdealGate {
    let mut g = ideal_ucr(subspace, PI / 2.0, [1.0, 0.0, -1.0]);
    g.name = format!("CSX{}", subspace.label());
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SingleQutritGate {
    H3,
    X012,
    X01,
    V,
    Zdiag(f64, f64),
}

impl fmt::Display for SingleQutritGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SingleQutritGate::H3 => write!(f, "H3"),
            SingleQutritGate::X012 => write!(f, "X012"),
            SingleQutritGate::X01 => write!(f, "X01"),
            SingleQutritGate::V => write!(f, "V"),
            SingleQutritGate::Zdiag(a, b) => write!(f, "Zdiag({a},{b})"),
        }
    }
}

impl FromStr for SingleQutritGate {
    type Err = Error;

    /// Accepts `H3`, `X012`, `X01`, `V` and `Zdiag(a,b)` (case-insensitive).
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "h3" => return Ok(Self::H3),
            "x012" => return Ok(Self::X012),
            "x01" => return Ok(Self::X01),
            "v" => return Ok(Self::V),
            _ => {}
        }
        let lower = t.to_ascii_lowercase();
        if let Some(args) = lower.strip_prefix("zdiag(").and_then(|r| r.strip_suffix(')')) {
            let parts: Vec<&str> = args.split(',').map(str::trim).collect();
            if let [a, b] = parts[..] {
                if let (Ok(a), Ok(b)) = (a.parse::<f64>(), b.parse::<f64>()) {
                    return Ok(Self::Zdiag(a, b));
                }
            }
        }
        Err(Error::UnknownGate(s.to_string()))
    }
}

/// `ω^{jk}/√3` with `ω = e^{2πi/3}`.
pub fn dft3() -> ComplexMatrix {
    let norm = 1.0 / 3f64.sqrt();
    ComplexMatrix::from_fn(LEVELS, LEVELS, |j, k| cis(TWO_PI * (j * k) as f64 / 3.0) * norm)
}

pub fn ideal_single_qutrit(gate: SingleQutritGate) -> IdealGate {
    let m = match gate {
        SingleQutritGate::H3 => dft3(),
        SingleQutritGate::X012 => ComplexMatrix::from_fn(LEVELS, LEVELS, |i, j| if i == (j + 1) % LEVELS { ONE } else { ZERO }),
        SingleQutritGate::X01 => rx(Subspace::S01, PI),
        SingleQutritGate::V => rx(Subspace::S12, -PI / 2.0),
        SingleQutritGate::Zdiag(a, b) => zdiag(a, b),
    };
    IdealGate {
        name: gate.to_string(),
        matrix: m,
    }
}

pub fn ideal_single_qutrit_named(name: &str) -> Result<IdealGate> {
    Ok(ideal_single_qutrit(name.parse()?))
}

/// One factor of a Givens decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GivensRotation {
    pub subspace: Subspace,
    pub theta: f64,
    pub axis: f64,
}

impl GivensRotation {
    pub fn matrix(&self) -> ComplexMatrix {
        rotation(self.subspace, self.theta, self.axis)
    }
}

/// `U = R12 · R01 · R12 · diag(1, e^{iφa}, e^{iφb}) · e^{iγ}` for a 3×3 unitary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GivensDecomposition {
    /// Rotations in time order: `rotations[0]` acts first.
    pub rotations: Vec<GivensRotation>,
    /// Leading diagonal `(φa, φb)`, applied before every rotation.
    pub phases: (f64, f64),
    pub global_phase: f64,
}

impl GivensDecomposition {
    pub fn matrix(&self) -> ComplexMatrix {
        let mut m = zdiag(self.phases.0, self.phases.1).scale(cis(self.global_phase));
        for r in &self.rotations {
            m = &r.matrix() * &m;
        }
        m
    }
}

/// Rotation `R` on `subspace` such that `R† v` has no weight on the upper level.
fn eliminate(subspace: Subspace, upper: C64, lower: C64) -> GivensRotation {
    if upper.norm() < 1e-14 {
        return GivensRotation {
            subspace,
            theta: 0.0,
            axis: 0.0,
        };
    }
    // second row of R†: i e^{iφ} s · lower + c · upper = 0
    let theta = 2.0 * upper.norm().atan2(lower.norm());
    let axis = if lower.norm() < 1e-14 {
        0.0
    } else {
        (upper / lower * I).arg()
    };
    GivensRotation { subspace, theta, axis }
}

pub fn givens_decompose(u: &ComplexMatrix) -> Result<GivensDecomposition> {
    if u.rows() != LEVELS || u.cols() != LEVELS {
        return Err(Error::DimMismatch {
            expected: LEVELS,
            got: u.rows(),
        });
    }
    let err = u.unitarity_error();
    if err > 1e-9 {
        return Err(Error::NotUnitary(err));
    }
    let g1 = eliminate(Subspace::S12, u[(2, 0)], u[(1, 0)]);
    let m1 = &g1.matrix().adjoint() * u;
    let g2 = eliminate(Subspace::S01, m1[(1, 0)], m1[(0, 0)]);
    let m2 = &g2.matrix().adjoint() * &m1;
    let g3 = eliminate(Subspace::S12, m2[(2, 1)], m2[(1, 1)]);
    let d = &g3.matrix().adjoint() * &m2;
    let gamma = d[(0, 0)].arg();
    let phases = ((d[(1, 1)]).arg() - gamma, (d[(2, 2)]).arg() - gamma);
    Ok(GivensDecomposition {
        rotations: vec![g3, g2, g1],
        phases,
        global_phase: gamma,
    })
}

/// One step of the Bell reference circuit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CircuitStep {
    Local { gate: SingleQutritGate, transmon: Transmon },
    Cr(CrTarget),
}

impl CircuitStep {
    pub fn gate(&self) -> IdealGate {
        match *self {
            CircuitStep::Local { gate, transmon } => {
                let g = ideal_single_qutrit(gate);
                IdealGate {
                    name: format!("{}({})", g.name, u8::from(transmon)),
                    matrix: transmon.embed(&g.matrix),
                }
            }
            CircuitStep::Cr(t) => t.gate(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BellCircuit {
    pub steps: Vec<CircuitStep>,
    pub target: StateVector,
}

impl BellCircuit {
    /// Product of every step, first step rightmost.
    pub fn unitary(&self) -> ComplexMatrix {
        self.steps
            .iter()
            .fold(ComplexMatrix::identity(DIM), |acc, s| &s.gate().matrix * &acc)
    }
}

/// Control-side diagonal correction that lands the circuit on the Bell state.
pub const BELL_CORRECTION: (f64, f64) = (-PI / 2.0, 0.0);

/// `(H3⊗I) → U_CR^{01}(π) → U_CSX12 → (I⊗V) → (I⊗X01) → (Zdiag⊗I)`
pub fn bell_reference_circuit() -> BellCircuit {
    let mut steps = bell_circuit_uncorrected();
    steps.push(CircuitStep::Local {
        gate: SingleQutritGate::Zdiag(BELL_CORRECTION.0, BELL_CORRECTION.1),
        transmon: Transmon::One,
    });
    BellCircuit {
        steps,
        target: StateVector::bell(),
    }
}

fn bell_circuit_uncorrected() -> Vec<CircuitStep> {
    vec![
        CircuitStep::Local {
            gate: SingleQutritGate::H3,
            transmon: Transmon::One,
        },
        CircuitStep::Cr(CrTarget::idealized(Subspace::S01, PI)),
        CircuitStep::Cr(CrTarget::idealized(Subspace::S12, PI / 2.0)),
        CircuitStep::Local {
            gate: SingleQutritGate::V,
            transmon: Transmon::Two,
        },
        CircuitStep::Local {
            gate: SingleQutritGate::X01,
            transmon: Transmon::Two,
        },
    ]
}

/// The same circuit without its closing diagonal correction.
pub fn bell_reference_circuit_uncorrected() -> BellCircuit {
    BellCircuit {
        steps: bell_circuit_uncorrected(),
        target: StateVector::bell(),
    }
}
