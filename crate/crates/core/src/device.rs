//! Two coupled three-level Duffing transmons.
//!
//! Parameters are given as cyclic frequencies in GHz; every operator handed to
//! the propagator is in angular units (rad/ns). The 2π conversion happens here
//! and nowhere else.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cis, eigh, kron, ComplexMatrix, StateVector, C64, ONE, ZERO};
use crate::propagator::Hamiltonian;
use crate::pulse::{ResolvedPlay, Schedule};

pub const TWO_PI: f64 = 2.0 * PI;
pub const LEVELS: usize = 3;
pub const DIM: usize = LEVELS * LEVELS;

/// One of the two transmons. Transmon one is the CR control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Transmon {
    One,
    Two,
}

impl Transmon {
    pub fn index(self) -> usize {
        match self {
            Transmon::One => 0,
            Transmon::Two => 1,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Transmon::One => Transmon::Two,
            Transmon::Two => Transmon::One,
        }
    }

    /// Lift a single-qutrit operator onto the pair.
    pub fn embed(self, op: &ComplexMatrix) -> ComplexMatrix {
        let id = ComplexMatrix::identity(LEVELS);
        match self {
            Transmon::One => kron(op, &id),
            Transmon::Two => kron(&id, op),
        }
    }

    /// Two-qutrit basis index for this transmon in `level` and the other one in `other_level`.
    pub fn basis_index(self, level: usize, other_level: usize) -> usize {
        match self {
            Transmon::One => LEVELS * level + other_level,
            Transmon::Two => LEVELS * other_level + level,
        }
    }
}

impl TryFrom<u8> for Transmon {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Transmon::One),
            2 => Ok(Transmon::Two),
            _ => Err(format!("transmon index must be 1 or 2, got {v}")),
        }
    }
}

impl From<Transmon> for u8 {
    fn from(t: Transmon) -> u8 {
        t.index() as u8 + 1
    }
}

/// A two-level transition inside a qutrit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subspace {
    #[serde(rename = "01")]
    S01,
    #[serde(rename = "12")]
    S12,
}

impl Subspace {
    /// `(lower, upper)` levels.
    pub fn levels(self) -> (usize, usize) {
        match self {
            Subspace::S01 => (0, 1),
            Subspace::S12 => (1, 2),
        }
    }

    /// Matrix element of `a + a†` on this transition.
    pub fn matrix_element(self) -> f64 {
        match self {
            Subspace::S01 => 1.0,
            Subspace::S12 => 2f64.sqrt(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Subspace::S01 => "01",
            Subspace::S12 => "12",
        }
    }
}

impl std::str::FromStr for Subspace {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "01" => Ok(Subspace::S01),
            "12" => Ok(Subspace::S12),
            _ => Err(Error::InvalidParams(format!("unknown subspace `{s}`"))),
        }
    }
}

/// Device parameters in cyclic GHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceParams {
    #[serde(rename = "omega1_ghz")]
    pub omega1: f64,
    #[serde(rename = "omega2_ghz")]
    pub omega2: f64,
    #[serde(rename = "delta1_ghz")]
    pub delta1: f64,
    #[serde(rename = "delta2_ghz")]
    pub delta2: f64,
    #[serde(rename = "j_ghz")]
    pub coupling_j: f64,
    pub levels: usize,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            omega1: 4.9,
            omega2: 5.5,
            delta1: -0.4,
            delta2: -0.3,
            coupling_j: 0.0027,
            levels: LEVELS,
        }
    }
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        let all = [self.omega1, self.omega2, self.delta1, self.delta2, self.coupling_j];
        if all.iter().any(|x| !x.is_finite()) {
            return bad("device parameters must be finite".into());
        }
        if self.levels != LEVELS {
            return bad(format!("only {LEVELS}-level transmons are modeled, got {}", self.levels));
        }
        if self.omega1 <= 0.0 || self.omega2 <= 0.0 {
            return bad("transmon frequencies must be positive".into());
        }
        if self.delta1 >= 0.0 || self.delta2 >= 0.0 {
            return bad("anharmonicities must be negative".into());
        }
        // J = 0 is accepted for decoupled reference runs
        if self.coupling_j < 0.0 {
            return bad("coupling must be non-negative".into());
        }
        if self.coupling_j >= (self.omega1 - self.omega2).abs() / 10.0 {
            return bad(format!(
                "coupling {} GHz is outside the dispersive regime for detuning {} GHz",
                self.coupling_j,
                self.omega1 - self.omega2
            ));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    pub fn omega(&self, t: Transmon) -> f64 {
        match t {
            Transmon::One => self.omega1,
            Transmon::Two => self.omega2,
        }
    }

    pub fn delta(&self, t: Transmon) -> f64 {
        match t {
            Transmon::One => self.delta1,
            Transmon::Two => self.delta2,
        }
    }
}

/// Rotation frequencies (GHz) applied to each transmon's number operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSpec {
    pub frame1: f64,
    pub frame2: f64,
}

impl FrameSpec {
    pub const LAB: FrameSpec = FrameSpec {
        frame1: 0.0,
        frame2: 0.0,
    };

    /// Each transmon rotating at its bare 0–1 frequency.
    pub fn bare(p: &DeviceParams) -> Self {
        Self {
            frame1: p.omega1,
            frame2: p.omega2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frame1.is_finite() && self.frame2.is_finite())
            || self.frame1 < 0.0
            || self.frame2 < 0.0
        {
            return Err(Error::InvalidParams(format!("invalid frame {self:?}")));
        }
        Ok(())
    }

    /// Diagonal of `F = 2π(frame1·n1 + frame2·n2)` in rad/ns.
    pub fn diagonal(&self) -> [f64; DIM] {
        let mut d = [0.0; DIM];
        for (k, v) in d.iter_mut().enumerate() {
            *v = TWO_PI * (self.frame1 * (k / LEVELS) as f64 + self.frame2 * (k % LEVELS) as f64);
        }
        d
    }
}

/// Truncated annihilation operator, `a|n⟩ = √n|n−1⟩`.
pub fn annihilation() -> ComplexMatrix {
    let mut a = ComplexMatrix::zeros(LEVELS, LEVELS);
    for n in 1..LEVELS {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

pub fn number() -> ComplexMatrix {
    ComplexMatrix::from_diagonal(&[ZERO, ONE, C64::new(2.0, 0.0)])
}

/// `H0/2π = Σ ω_i n_i + (δ_i/2) n_i(n_i−1) + J(a1†a2 + a1a2†)`, returned in rad/ns.
pub fn build_static_hamiltonian(p: &DeviceParams) -> Result<ComplexMatrix> {
    p.validate()?;
    let mut h = ComplexMatrix::zeros(DIM, DIM);
    for k in 0..DIM {
        let (n1, n2) = ((k / LEVELS) as f64, (k % LEVELS) as f64);
        let e = p.omega1 * n1
            + 0.5 * p.delta1 * n1 * (n1 - 1.0)
            + p.omega2 * n2
            + 0.5 * p.delta2 * n2 * (n2 - 1.0);
        h[(k, k)] = C64::new(TWO_PI * e, 0.0);
    }
    let a = annihilation();
    let a1 = Transmon::One.embed(&a);
    let a2 = Transmon::Two.embed(&a);
    let exchange = &(&a1.adjoint() * &a2) + &(&a1 * &a2.adjoint());
    Ok(&h + &exchange.scale(C64::new(TWO_PI * p.coupling_j, 0.0)))
}

/// `(a + a†)` on the chosen transmon, identity on the other.
pub fn drive_operator(which: Transmon) -> ComplexMatrix {
    let a = annihilation();
    which.embed(&(&a + &a.adjoint()))
}

/// Transition frequencies (GHz) of both transmons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transitions {
    pub w01_1: f64,
    pub w12_1: f64,
    pub w01_2: f64,
    pub w12_2: f64,
}

impl Transitions {
    pub fn get(&self, t: Transmon, s: Subspace) -> f64 {
        match (t, s) {
            (Transmon::One, Subspace::S01) => self.w01_1,
            (Transmon::One, Subspace::S12) => self.w12_1,
            (Transmon::Two, Subspace::S01) => self.w01_2,
            (Transmon::Two, Subspace::S12) => self.w12_2,
        }
    }

    /// Level energies `[0, w01, w01 + w12]` of one transmon.
    pub fn ladder(&self, t: Transmon) -> [f64; LEVELS] {
        let (a, b) = (self.get(t, Subspace::S01), self.get(t, Subspace::S12));
        [0.0, a, a + b]
    }
}

/// Static eigenenergies (GHz) labeled by the bare state they connect to.
#[derive(Debug, Clone)]
pub struct DressedSpectrum {
    /// `energies[3·n1 + n2]`
    pub energies: [f64; DIM],
    /// Eigenvector columns reordered to match `energies`.
    pub vectors: ComplexMatrix,
}

/// Diagonalize `H0` and assign each eigenstate to the bare state it overlaps most.
pub fn dressed_spectrum(p: &DeviceParams) -> Result<DressedSpectrum> {
    let h = build_static_hamiltonian(p)?;
    let (values, vecs) = eigh(&h)?;
    // greedy assignment on descending overlap; the coupling is weak so this is unambiguous
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(DIM * DIM);
    for bare in 0..DIM {
        for eig in 0..DIM {
            pairs.push((vecs[(bare, eig)].norm_sqr(), bare, eig));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut bare_taken = [false; DIM];
    let mut eig_taken = [false; DIM];
    let mut assign = [0usize; DIM];
    for (_, bare, eig) in pairs {
        if !bare_taken[bare] && !eig_taken[eig] {
            bare_taken[bare] = true;
            eig_taken[eig] = true;
            assign[bare] = eig;
        }
    }
    let mut energies = [0.0; DIM];
    for bare in 0..DIM {
        energies[bare] = values[assign[bare]] / TWO_PI;
    }
    let vectors = ComplexMatrix::from_fn(DIM, DIM, |i, j| vecs[(i, assign[j])]);
    Ok(DressedSpectrum { energies, vectors })
}

/// Bare or dressed transition frequencies.
///
/// Bare: `w01 = ω`, `w12 = ω + δ`. Dressed: differences of the assigned
/// eigenenergies with the other transmon in its ground state.
pub fn transition_frequencies(p: &DeviceParams, dressed: bool) -> Result<Transitions> {
    p.validate()?;
    if !dressed {
        return Ok(Transitions {
            w01_1: p.omega1,
            w12_1: p.omega1 + p.delta1,
            w01_2: p.omega2,
            w12_2: p.omega2 + p.delta2,
        });
    }
    let e = dressed_spectrum(p)?.energies;
    Ok(Transitions {
        w01_1: e[3] - e[0],
        w12_1: e[6] - e[3],
        w01_2: e[1] - e[0],
        w12_2: e[2] - e[1],
    })
}

/// The frame gates are defined in: each transmon's levels rotate at its own
/// dressed ladder energies. Drives resonant with a dressed transition are
/// static in this frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComputationalFrame {
    /// rad/ns
    pub energies: [f64; DIM],
}

impl ComputationalFrame {
    pub fn new(p: &DeviceParams) -> Result<Self> {
        Ok(Self::from_transitions(&transition_frequencies(p, true)?))
    }

    pub fn from_transitions(tr: &Transitions) -> Self {
        let l1 = tr.ladder(Transmon::One);
        let l2 = tr.ladder(Transmon::Two);
        let mut energies = [0.0; DIM];
        for (k, e) in energies.iter_mut().enumerate() {
            *e = TWO_PI * (l1[k / LEVELS] + l2[k % LEVELS]);
        }
        Self { energies }
    }

    /// Phases `e^{i(D−F)t}` relating the simulation frame `F` to this one.
    fn phases(&self, sim: &FrameSpec, t: f64) -> [C64; DIM] {
        let f = sim.diagonal();
        let mut out = [ZERO; DIM];
        for k in 0..DIM {
            out[k] = cis((self.energies[k] - f[k]) * t);
        }
        out
    }

    /// Map a state at time `t` from the simulation frame into this frame.
    pub fn state_from_sim(&self, psi: &StateVector, sim: &FrameSpec, t: f64) -> StateVector {
        let ph = self.phases(sim, t);
        StateVector::from_raw(
            psi.amplitudes()
                .iter()
                .zip(ph.iter())
                .map(|(a, p)| a * p)
                .collect(),
        )
    }

    /// Map a state at time `t` from this frame into the simulation frame.
    pub fn state_to_sim(&self, psi: &StateVector, sim: &FrameSpec, t: f64) -> StateVector {
        let ph = self.phases(sim, t);
        StateVector::from_raw(
            psi.amplitudes()
                .iter()
                .zip(ph.iter())
                .map(|(a, p)| a * p.conj())
                .collect(),
        )
    }

    /// `e^{i(D−F)t1} U e^{−i(D−F)t0}`
    pub fn unitary_from_sim(&self, u: &ComplexMatrix, sim: &FrameSpec, t0: f64, t1: f64) -> ComplexMatrix {
        let p1 = self.phases(sim, t1);
        let p0 = self.phases(sim, t0);
        ComplexMatrix::from_fn(DIM, DIM, |i, j| p1[i] * u[(i, j)] * p0[j].conj())
    }
}

/// Options for building the rotating-frame Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RwaSpec {
    /// Components oscillating faster than this (GHz) are dropped.
    pub cutoff_ghz: f64,
}

impl Default for RwaSpec {
    fn default() -> Self {
        Self { cutoff_ghz: 2.0 }
    }
}

#[derive(Debug, Clone, Copy)]
struct Element {
    row: usize,
    col: usize,
    value: C64,
    /// frame frequency difference Δ of row and column
    delta: f64,
    /// keep the `e^{i(Δ−ω)t}` component
    keep_minus: bool,
    /// keep the `e^{i(Δ+ω)t}` component
    keep_plus: bool,
}

#[derive(Debug, Clone)]
struct Drive {
    play: ResolvedPlay,
    omega: f64,
    elements: Vec<Element>,
}

/// `t ↦ R(t)(H0 + H_drive(t))R†(t) − F` with `R(t) = e^{iFt}`.
#[derive(Debug, Clone)]
pub struct DeviceHamiltonian {
    frame: FrameSpec,
    diag: [f64; DIM],
    off_diag: Vec<Element>,
    drives: Vec<Drive>,
}

/// Build the rotating-frame Hamiltonian for a schedule.
///
/// With `rwa = Some(..)`, every component whose oscillation frequency in the
/// chosen frame exceeds the cutoff is discarded; otherwise all counter-rotating
/// terms are kept.
pub fn rotating_frame_hamiltonian(
    p: &DeviceParams,
    frame: &FrameSpec,
    schedule: &Schedule,
    rwa: Option<RwaSpec>,
) -> Result<DeviceHamiltonian> {
    frame.validate()?;
    let h0 = build_static_hamiltonian(p)?;
    let fd = frame.diagonal();
    let cutoff = rwa.map(|r| TWO_PI * r.cutoff_ghz);
    let keep = |freq: f64| cutoff.is_none_or(|c| freq.abs() <= c);

    let mut diag = [0.0; DIM];
    let mut off_diag = Vec::new();
    for i in 0..DIM {
        diag[i] = h0[(i, i)].re - fd[i];
        for j in 0..DIM {
            if i != j && h0[(i, j)] != ZERO && keep(fd[i] - fd[j]) {
                off_diag.push(Element {
                    row: i,
                    col: j,
                    value: h0[(i, j)],
                    delta: fd[i] - fd[j],
                    keep_minus: true,
                    keep_plus: false,
                });
            }
        }
    }

    let mut drives = Vec::new();
    for play in schedule.resolve().plays {
        let op = drive_operator(play.play.channel);
        let omega = TWO_PI * play.play.carrier_ghz;
        let mut elements = Vec::new();
        for i in 0..DIM {
            for j in 0..DIM {
                if op[(i, j)] == ZERO {
                    continue;
                }
                let delta = fd[i] - fd[j];
                let e = Element {
                    row: i,
                    col: j,
                    value: op[(i, j)],
                    delta,
                    keep_minus: keep(delta - omega),
                    keep_plus: keep(delta + omega),
                };
                if e.keep_minus || e.keep_plus {
                    elements.push(e);
                }
            }
        }
        drives.push(Drive {
            play,
            omega,
            elements,
        });
    }

    Ok(DeviceHamiltonian {
        frame: *frame,
        diag,
        off_diag,
        drives,
    })
}

impl DeviceHamiltonian {
    pub fn frame(&self) -> &FrameSpec {
        &self.frame
    }

    /// Dense `H_rot(t)`.
    pub fn matrix_at(&self, t: f64) -> ComplexMatrix {
        let mut buf = vec![ZERO; DIM * DIM];
        self.fill(t, &mut buf);
        ComplexMatrix::from_row_major(DIM, DIM, &buf).expect("square buffer")
    }
}

impl Hamiltonian for DeviceHamiltonian {
    fn dim(&self) -> usize {
        DIM
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.drives.iter().flat_map(|d| [d.play.play.start_ns, d.play.play.end_ns()]).collect()
    }

    fn fill(&self, t: f64, out: &mut [C64]) {
        self.fill_on(t, (t, t), out);
    }

    fn fill_on(&self, t: f64, span: (f64, f64), out: &mut [C64]) {
        let mid = 0.5 * (span.0 + span.1);
        out.fill(ZERO);
        for (k, d) in self.diag.iter().enumerate() {
            out[k * DIM + k] = C64::new(*d, 0.0);
        }
        // net frequencies are combined before multiplying by t, so phases
        // stay accurate at long times
        for e in &self.off_diag {
            out[e.row * DIM + e.col] += e.value * cis(e.delta * t);
        }
        for d in &self.drives {
            let play = &d.play;
            let start = play.play.start_ns;
            let d_ns = play.play.shape.duration();
            if !(start..=start + d_ns).contains(&mid) {
                continue;
            }
            let Some(s) = play.play.shape.sample_clamped((t - start).clamp(0.0, d_ns)) else {
                continue;
            };
            // 2π·Re[s·e^{−i(ωt+φ)}] = π(s·e^{−i(ωt+φ)} + c.c.)
            let phi = play.total_phase;
            for e in &d.elements {
                let mut coeff = ZERO;
                if e.keep_minus {
                    coeff += s * cis((e.delta - d.omega) * t - phi);
                }
                if e.keep_plus {
                    coeff += s.conj() * cis((e.delta + d.omega) * t + phi);
                }
                out[e.row * DIM + e.col] += e.value * coeff * PI;
            }
        }
    }
}
