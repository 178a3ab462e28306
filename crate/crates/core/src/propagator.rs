//! Adaptive Dormand–Prince 8(5,3) integration of `i dψ/dt = H(t) ψ`.
//!
//! States are never renormalized. The drift of the norm (or of `U†U` for
//! propagators) is measured at the end of every run and returned with the
//! result.

use serde::{Deserialize, Serialize};

use crate::device::FrameSpec;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, StateVector, C64, NORM_TOL, ZERO};

/// Drift above which a run is rejected outright.
pub const NORM_DRIFT_FATAL: f64 = 1e-6;
/// Drift a run must stay under to count as valid.
pub const NORM_DRIFT_VALID: f64 = 1e-8;

const MIN_STEP: f64 = 1e-10;
/// Tolerances bound the error committed per this much evolution time (ns):
/// a step of length `h` must keep its local error under `tol·h/ERROR_WINDOW_NS`.
pub const ERROR_WINDOW_NS: f64 = 100.0;
const MAX_STEPS: usize = 50_000_000;

/// A time-dependent Hermitian generator in rad/ns.
pub trait Hamiltonian: Send + Sync {
    fn dim(&self) -> usize;
    /// Write `H(t)` into `out` in row-major order.
    fn fill(&self, t: f64, out: &mut [C64]);
    /// Times where `H` may jump. Integration restarts at each of them.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
    /// `H(t)` continued smoothly over the segment `span`, which holds no
    /// breakpoint in its interior. Used so that stage times rounding onto
    /// a jump still see the segment's own side of it.
    fn fill_on(&self, t: f64, _span: (f64, f64), out: &mut [C64]) {
        self.fill(t, out);
    }
}

impl Hamiltonian for ComplexMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn fill(&self, _t: f64, out: &mut [C64]) {
        let n = self.rows();
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self[(i, j)];
            }
        }
    }
}

/// Wraps a closure `t ↦ H(t)`.
pub struct FnHamiltonian<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(f64) -> ComplexMatrix + Send + Sync> FnHamiltonian<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(f64) -> ComplexMatrix + Send + Sync> Hamiltonian for FnHamiltonian<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn fill(&self, t: f64, out: &mut [C64]) {
        let m = (self.f)(t);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[i * self.dim + j] = m[(i, j)];
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// ns
    pub max_step: f64,
    pub rwa: bool,
    /// GHz, used when `rwa` is set
    #[serde(default = "default_cutoff")]
    pub rwa_cutoff_ghz: f64,
    /// `None` selects each transmon's bare 0–1 frequency.
    #[serde(default)]
    pub frame: Option<FrameSpec>,
}

fn default_cutoff() -> f64 {
    2.0
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: 0.5,
            rwa: false,
            rwa_cutoff_ghz: default_cutoff(),
            frame: None,
        }
    }
}

impl EvolveOptions {
    pub fn rwa() -> Self {
        Self {
            rwa: true,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !(ok(self.rel_tol) && ok(self.abs_tol) && ok(self.max_step) && ok(self.rwa_cutoff_ghz)) {
            return Err(Error::InvalidParams(format!("invalid evolve options {self:?}")));
        }
        if let Some(f) = &self.frame {
            f.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

/// A result together with its integration diagnostics.
#[derive(Debug, Clone)]
pub struct Evolution<T> {
    pub value: T,
    /// `|‖ψ‖² − 1|` for states, `max |U†U − I|` for propagators.
    pub norm_drift: f64,
    pub stats: StepStats,
}

impl<T> Evolution<T> {
    pub fn is_valid(&self) -> bool {
        self.norm_drift <= NORM_DRIFT_VALID
    }
}

// Dormand–Prince 8(5,3) tableau
#[allow(clippy::excessive_precision)]
mod tableau {
    pub const C: [f64; 12] = [0.0, 0.05260015195876773, 0.0789002279381516, 0.1183503419072274, 0.2816496580927726, 0.3333333333333333, 0.25, 0.3076923076923077, 0.6512820512820513, 0.6, 0.8571428571428571, 1.0];
    pub const A: [[f64; 12]; 13] = [
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.05260015195876773, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0197250569845379, 0.0591751709536137, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.02958758547680685, 0.0, 0.08876275643042054, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.2413651341592667, 0.0, -0.8845494793282861, 0.924834003261792, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.037037037037037035, 0.0, 0.0, 0.17082860872947386, 0.12546768756682242, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.037109375, 0.0, 0.0, 0.17025221101954405, 0.06021653898045596, -0.017578125, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.03709200011850479, 0.0, 0.0, 0.17038392571223998, 0.10726203044637328, -0.015319437748624402, 0.008273789163814023, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.6241109587160757, 0.0, 0.0, -3.3608926294469414, -0.868219346841726, 27.59209969944671, 20.154067550477894, -43.48988418106996, 0.0, 0.0, 0.0, 0.0],
        [0.47766253643826434, 0.0, 0.0, -2.4881146199716677, -0.590290826836843, 21.230051448181193, 15.279233632882423, -33.28821096898486, -0.020331201708508627, 0.0, 0.0, 0.0],
        [-0.9371424300859873, 0.0, 0.0, 5.186372428844064, 1.0914373489967295, -8.149787010746927, -18.52006565999696, 22.739487099350505, 2.4936055526796523, -3.0467644718982196, 0.0, 0.0],
        [2.273310147516538, 0.0, 0.0, -10.53449546673725, -2.0008720582248625, -17.9589318631188, 27.94888452941996, -2.8589982771350235, -8.87285693353063, 12.360567175794303, 0.6433927460157636, 0.0],
        [0.054293734116568765, 0.0, 0.0, 0.0, 0.0, 4.450312892752409, 1.8915178993145003, -5.801203960010585, 0.3111643669578199, -0.1521609496625161, 0.20136540080403034, 0.04471061572777259],
    ];
    pub const E3: [f64; 13] = [-0.18980075407240762, 0.0, 0.0, 0.0, 0.0, 4.450312892752409, 1.8915178993145003, -5.801203960010585, -0.4226823213237919, -0.1521609496625161, 0.20136540080403034, 0.02265179219836082, 0.0];
    pub const E5: [f64; 13] = [0.01312004499419488, 0.0, 0.0, 0.0, 0.0, -1.2251564463762044, -0.4957589496572502, 1.6643771824549864, -0.35032884874997366, 0.3341791187130175, 0.08192320648511571, -0.022355307863886294, 0.0];
}
use tableau::{A, C, E3, E5};

/// Stepper that keeps its step-size estimate across successive intervals,
/// so a long run can be split into segments (for sampling or branching)
/// without restarting the controller.
pub struct Integrator<'a> {
    h: &'a dyn Hamiltonian,
    opts: EvolveOptions,
    dim: usize,
    step: f64,
    span: (f64, f64),
    hbuf: Vec<C64>,
    k: [Vec<C64>; 13],
    stage: Vec<C64>,
    pub stats: StepStats,
}

impl<'a> Integrator<'a> {
    pub fn new(h: &'a dyn Hamiltonian, opts: &EvolveOptions) -> Result<Self> {
        opts.validate()?;
        let dim = h.dim();
        Ok(Self {
            h,
            opts: *opts,
            dim,
            step: opts.max_step.min(0.01),
            span: (0.0, 0.0),
            hbuf: vec![ZERO; dim * dim],
            k: Default::default(),
            stage: Vec::new(),
            stats: StepStats::default(),
        })
    }

    /// `out = −i H(t) y` for every column of `y`.
    fn rhs(&mut self, t: f64, y: &[C64], out_idx: usize) {
        self.h.fill_on(t, self.span, &mut self.hbuf);
        let n = self.dim;
        let out = &mut self.k[out_idx];
        for (yc, oc) in y.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
            for i in 0..n {
                let row = &self.hbuf[i * n..(i + 1) * n];
                let mut acc = ZERO;
                for (hij, yj) in row.iter().zip(yc) {
                    acc += hij * yj;
                }
                oc[i] = C64::new(acc.im, -acc.re);
            }
        }
    }

    /// Advance `y` (columns of length `dim`, stored back to back) from `t0` to `t1`.
    pub fn advance(&mut self, y: &mut [C64], t0: f64, t1: f64) -> Result<()> {
        if !(t1 >= t0) {
            return Err(Error::InvalidParams(format!("t1 = {t1} precedes t0 = {t0}")));
        }
        if y.len() % self.dim != 0 {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: y.len(),
            });
        }
        let len = y.len();
        for k in &mut self.k {
            if k.len() != len {
                k.clear();
                k.resize(len, ZERO);
            }
        }
        self.stage.resize(len, ZERO);
        let mut cuts: Vec<f64> = self.h.breakpoints().into_iter().filter(|b| *b > t0 && *b < t1).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut a = t0;
        for b in cuts.into_iter().chain(std::iter::once(t1)) {
            self.segment(y, a, b)?;
            a = b;
        }
        Ok(())
    }

    fn segment(&mut self, y: &mut [C64], t0: f64, t1: f64) -> Result<()> {
        let len = y.len();
        let mut ynew = vec![ZERO; len];
        self.span = (t0, t1);
        let mut t = t0;
        self.rhs(t, y, 0);
        while t < t1 {
            if self.stats.accepted + self.stats.rejected > MAX_STEPS {
                return Err(Error::StepFailure {
                    t,
                    reason: "step budget exhausted".into(),
                });
            }
            let remaining = t1 - t;
            let mut h = self.step.min(self.opts.max_step);
            let last = h >= remaining * (1.0 - 1e-12);
            if last {
                h = remaining;
            }
            for s in 1..13 {
                self.stage.copy_from_slice(y);
                for (j, a) in A[s][..s].iter().enumerate() {
                    if *a != 0.0 {
                        let ha = h * a;
                        for (st, kj) in self.stage.iter_mut().zip(&self.k[j]) {
                            *st += kj * ha;
                        }
                    }
                }
                let tc = if s == 12 { t + h } else { t + C[s] * h };
                if s == 12 {
                    ynew.copy_from_slice(&self.stage);
                }
                let stage = std::mem::take(&mut self.stage);
                self.rhs(tc, &stage, s);
                self.stage = stage;
            }
            // blended 5th/3rd order estimate, RMS over components
            let (mut e5sq, mut e3sq) = (0.0, 0.0);
            for i in 0..len {
                let (mut e5, mut e3) = (ZERO, ZERO);
                for s in 0..13 {
                    let k = self.k[s][i];
                    e5 += k * E5[s];
                    e3 += k * E3[s];
                }
                let sc = self.opts.abs_tol + self.opts.rel_tol * y[i].norm().max(ynew[i].norm());
                e5sq += e5.norm_sqr() / (sc * sc);
                e3sq += e3.norm_sqr() / (sc * sc);
            }
            let err = if e5sq == 0.0 && e3sq == 0.0 {
                0.0
            } else {
                h * e5sq / ((e5sq + 0.01 * e3sq) * len as f64).sqrt() * ERROR_WINDOW_NS / h.min(ERROR_WINDOW_NS)
            };
            if !err.is_finite() {
                return Err(Error::StepFailure {
                    t,
                    reason: "non-finite error estimate".into(),
                });
            }
            let fac = if err == 0.0 { 6.0 } else { (0.9 * err.powf(-1.0 / 8.0)).clamp(0.333, 6.0) };
            if err <= 1.0 {
                self.stats.accepted += 1;
                t = if last { t1 } else { t + h };
                y.copy_from_slice(&ynew);
                self.k.swap(0, 12);
                if !last || h >= self.step {
                    self.step = (h * fac).min(self.opts.max_step);
                }
            } else {
                self.stats.rejected += 1;
                self.step = h * fac.min(1.0);
                if self.step < MIN_STEP {
                    return Err(Error::StepFailure {
                        t,
                        reason: format!("step size fell below {MIN_STEP} ns"),
                    });
                }
            }
        }
        Ok(())
    }
}

fn check_normalized(psi: &StateVector) -> Result<()> {
    let d = (psi.norm_sqr() - 1.0).abs();
    if d > NORM_TOL {
        return Err(Error::NormDrift(d));
    }
    Ok(())
}

fn check_dim(h: &dyn Hamiltonian, dim: usize) -> Result<()> {
    if h.dim() != dim {
        return Err(Error::DimMismatch {
            expected: h.dim(),
            got: dim,
        });
    }
    Ok(())
}

pub fn evolve_state_report(
    h: &dyn Hamiltonian,
    psi0: &StateVector,
    t0: f64,
    t1: f64,
    opts: &EvolveOptions,
) -> Result<Evolution<StateVector>> {
    check_dim(h, psi0.dim())?;
    check_normalized(psi0)?;
    let mut y = psi0.amplitudes().to_vec();
    let mut integ = Integrator::new(h, opts)?;
    integ.advance(&mut y, t0, t1)?;
    let out = StateVector::from_raw(y);
    let drift = (out.norm_sqr() - psi0.norm_sqr()).abs();
    if drift > NORM_DRIFT_FATAL {
        return Err(Error::NormDrift(drift));
    }
    Ok(Evolution {
        value: out,
        norm_drift: drift,
        stats: integ.stats,
    })
}

pub fn evolve_state(h: &dyn Hamiltonian, psi0: &StateVector, t0: f64, t1: f64, opts: &EvolveOptions) -> Result<StateVector> {
    evolve_state_report(h, psi0, t0, t1, opts).map(|e| e.value)
}

/// Propagate the chosen basis columns; the returned matrix has zeros elsewhere.
pub fn evolve_columns(
    h: &dyn Hamiltonian,
    columns: &[usize],
    t0: f64,
    t1: f64,
    opts: &EvolveOptions,
) -> Result<Evolution<ComplexMatrix>> {
    let n = h.dim();
    if let Some(&c) = columns.iter().find(|&&c| c >= n) {
        return Err(Error::OutOfRange {
            value: c as f64,
            lo: 0.0,
            hi: (n - 1) as f64,
        });
    }
    let mut y = vec![ZERO; n * columns.len()];
    for (k, &c) in columns.iter().enumerate() {
        y[k * n + c] = C64::new(1.0, 0.0);
    }
    let mut integ = Integrator::new(h, opts)?;
    integ.advance(&mut y, t0, t1)?;
    let mut u = ComplexMatrix::zeros(n, n);
    for (k, &c) in columns.iter().enumerate() {
        for i in 0..n {
            u[(i, c)] = y[k * n + i];
        }
    }
    // drift of the Gram matrix restricted to the propagated columns
    let mut drift: f64 = 0.0;
    for (a, &ca) in columns.iter().enumerate() {
        for &cb in &columns[a..] {
            let mut g = ZERO;
            for i in 0..n {
                g += u[(i, ca)].conj() * u[(i, cb)];
            }
            let target = if ca == cb { 1.0 } else { 0.0 };
            drift = drift.max((g - target).norm());
        }
    }
    if drift > NORM_DRIFT_FATAL {
        return Err(Error::NormDrift(drift));
    }
    Ok(Evolution {
        value: u,
        norm_drift: drift,
        stats: integ.stats,
    })
}

pub fn evolve_unitary_report(h: &dyn Hamiltonian, t0: f64, t1: f64, opts: &EvolveOptions) -> Result<Evolution<ComplexMatrix>> {
    let cols: Vec<usize> = (0..h.dim()).collect();
    evolve_columns(h, &cols, t0, t1, opts)
}

pub fn evolve_unitary(h: &dyn Hamiltonian, t0: f64, t1: f64, opts: &EvolveOptions) -> Result<ComplexMatrix> {
    evolve_unitary_report(h, t0, t1, opts).map(|e| e.value)
}

/// `|amplitude|²` in basis order.
pub fn populations(psi: &StateVector) -> Vec<f64> {
    psi.amplitudes().iter().map(|a| a.norm_sqr()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{expm_unitary, I};
    use std::f64::consts::PI;

    #[test]
    fn null_generator_is_identity() {
        let h = ComplexMatrix::zeros(9, 9);
        let psi = StateVector::two_qutrit(1, 2);
        let out = evolve_state(&h, &psi, 0.0, 100.0, &EvolveOptions::default()).unwrap();
        assert_eq!(out.amplitudes(), psi.amplitudes());
        let u = evolve_unitary(&h, 0.0, 50.0, &EvolveOptions::default()).unwrap();
        assert!(u.max_abs_diff(&ComplexMatrix::identity(9)) == 0.0);
    }

    #[test]
    fn eigenstate_phase() {
        let e = 0.37;
        let mut diag = vec![ZERO; 9];
        diag[4] = C64::new(e, 0.0);
        let h = ComplexMatrix::from_diagonal(&diag);
        let psi = StateVector::basis(9, 4);
        let out = evolve_state(&h, &psi, 2.0, 42.0, &EvolveOptions::default()).unwrap();
        let expect = (-I * e * 40.0).exp();
        let dev = (out.amplitudes()[4] - expect).norm();
        assert!(dev < 1e-8, "{dev}");
    }

    #[test]
    fn resonant_rabi_half_population() {
        let omega = 2.0 * PI * 0.01;
        let h = ComplexMatrix::from_real(2, 2, &[0.0, omega / 2.0, omega / 2.0, 0.0]).unwrap();
        let psi = StateVector::basis(2, 0);
        let out = evolve_state(&h, &psi, 0.0, 25.0, &EvolveOptions::default()).unwrap();
        let p1 = populations(&out)[1];
        let oracle = (omega * 25.0 / 2.0).sin().powi(2);
        assert!((oracle - 0.5).abs() < 1e-12);
        assert!((p1 - oracle).abs() < 1e-6, "{p1}");
    }

    #[test]
    fn constant_hamiltonian_matches_exponential() {
        let h = ComplexMatrix::from_fn(9, 9, |i, j| {
            let re = ((i * 7 + j * 3) % 5) as f64 * 0.01 + ((j * 7 + i * 3) % 5) as f64 * 0.01;
            let im = if i == j { 0.0 } else { ((i * 5 + j) % 3) as f64 * 0.01 - ((j * 5 + i) % 3) as f64 * 0.01 };
            C64::new(re, im)
        });
        assert!(h.is_hermitian(1e-15));
        let u = evolve_unitary(&h, 0.0, 30.0, &EvolveOptions::default()).unwrap();
        let oracle = expm_unitary(&h, 30.0).unwrap();
        assert!(u.max_abs_diff(&oracle) < 1e-7, "{}", u.max_abs_diff(&oracle));
        assert!(u.unitarity_error() < 1e-7);
    }

    #[test]
    fn columns_agree_with_states() {
        let h = FnHamiltonian::new(3, |t: f64| {
            ComplexMatrix::from_fn(3, 3, |i, j| {
                if i == j {
                    C64::new(0.1 * i as f64, 0.0)
                } else {
                    let v = C64::new(0.05 * (t * 0.3).cos(), 0.02 * (i as f64 - j as f64));
                    v
                }
            })
        });
        let opts = EvolveOptions::default();
        let u = evolve_unitary(&h, 0.0, 20.0, &opts).unwrap();
        for c in 0..3 {
            let psi = evolve_state(&h, &StateVector::basis(3, c), 0.0, 20.0, &opts).unwrap();
            for i in 0..3 {
                assert!((psi.amplitudes()[i] - u[(i, c)]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_unnormalized_and_reversed_interval() {
        let h = ComplexMatrix::zeros(2, 2);
        let bad = StateVector::from_raw(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
        assert!(matches!(evolve_state(&h, &bad, 0.0, 1.0, &EvolveOptions::default()), Err(Error::NormDrift(_))));
        let good = StateVector::basis(2, 0);
        assert!(evolve_state(&h, &good, 1.0, 0.0, &EvolveOptions::default()).is_err());
        let mut opts = EvolveOptions::default();
        opts.max_step = 0.0;
        assert!(evolve_state(&h, &good, 0.0, 1.0, &opts).is_err());
    }

    #[test]
    fn populations_examples() {
        let psi = StateVector::new({
            let mut a = vec![ZERO; 9];
            a[0] = C64::new(0.5f64.sqrt(), 0.0);
            a[7] = C64::new(0.0, 0.5f64.sqrt());
            a
        })
        .unwrap();
        let p = populations(&psi);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[7] - 0.5).abs() < 1e-15);
        let b = populations(&StateVector::bell());
        for k in [0, 4, 8] {
            assert!((b[k] - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
