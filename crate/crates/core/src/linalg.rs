//! Dense complex linear algebra for single qutrits (dimension 3) and qutrit
//! pairs (dimension 9).
//!
//! Two-qutrit basis order is `|q1 q2⟩ ↦ 3·q1 + q2`, so the control transmon is
//! the most significant trit and controlled operators are block diagonal.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Hermiticity tolerance on `max |A_ij − conj(A_ji)|`.
pub const HERM_TOL: f64 = 1e-12;
/// Unitarity tolerance on `max |(U†U − I)_ij|` for exactly built operators.
pub const UNITARY_TOL: f64 = 1e-10;
/// Tolerance on `|Σ|ψ_i|² − 1|` for state vectors.
pub const NORM_TOL: f64 = 1e-9;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// `e^{iθ}`
#[inline]
pub fn cis(theta: f64) -> C64 {
    let (s, c) = theta.sin_cos();
    C64::new(c, s)
}

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    /// Build from entries in row-major order.
    pub fn from_row_major(rows: usize, cols: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimMismatch {
                expected: rows * cols,
                got: entries.len(),
            });
        }
        Ok(Self(DMatrix::from_row_slice(rows, cols, entries)))
    }

    /// Build from real entries in row-major order.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        let c: Vec<C64> = entries.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_row_major(rows, cols, &c)
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self(DMatrix::from_fn(rows, cols, f))
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |i, j| if i == j { diag[i] } else { ZERO })
    }

    /// `|i⟩⟨j|` in dimension `dim`.
    pub fn ketbra(dim: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        m[(i, j)] = ONE;
        m
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(&self.0 * s)
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.rows().min(self.cols())).map(|i| self.0[(i, i)]).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.0.shape(), other.0.shape(), "shape mismatch");
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `max |A_ij − conj(A_ji)|`; infinite for non-square input.
    pub fn hermiticity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows();
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                err = err.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        err
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// `max |(U†U − I)_ij|`; infinite for non-square input.
    pub fn unitarity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let p = self.0.adjoint() * &self.0;
        let n = self.rows();
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { ONE } else { ZERO };
                err = err.max((p[(i, j)] - target).norm());
            }
        }
        err
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_error() <= tol
    }

    /// Commutator `AB − BA`.
    pub fn commutator(&self, other: &Self) -> Self {
        self * other - other * self
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        if self.cols() != psi.dim() || self.rows() != psi.dim() {
            return Err(Error::DimMismatch {
                expected: self.cols(),
                got: psi.dim(),
            });
        }
        let mut out = vec![ZERO; psi.dim()];
        for (i, o) in out.iter_mut().enumerate() {
            for (j, a) in psi.amplitudes().iter().enumerate() {
                *o += self.0[(i, j)] * a;
            }
        }
        Ok(StateVector::from_raw(out))
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.0[idx]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut C64 {
        &mut self.0[idx]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl Mul for ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(self.0 * rhs.0)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Add for ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(self.0 + rhs.0)
    }
}

impl Sub for ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(self.0 - rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows(), self.cols())?;
        for i in 0..self.rows() {
            write!(f, "  ")?;
            for j in 0..self.cols() {
                let z = self.0[(i, j)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Serialized as `{"rows":r,"cols":c,"data":[[re,im],...]}` in row-major order.
#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    data: Vec<[f64; 2]>,
}

impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixRepr {
            rows: self.rows(),
            cols: self.cols(),
            data: self.to_row_major().iter().map(|z| [z.re, z.im]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = MatrixRepr::deserialize(d)?;
        let entries: Vec<C64> = r.data.iter().map(|p| C64::new(p[0], p[1])).collect();
        ComplexMatrix::from_row_major(r.rows, r.cols, &entries).map_err(serde::de::Error::custom)
    }
}

/// Kronecker product; `kron(a,b)[br·i+k][bc·j+l] = a[i][j]·b[k][l]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix(a.0.kronecker(&b.0))
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
///
/// Returns `(values, vectors)` with eigenvectors as the columns of `vectors`.
pub fn eigh(h: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    let err = h.hermiticity_error();
    if err > HERM_TOL * h.max_abs().max(1.0) {
        return Err(Error::NotHermitian(err));
    }
    // symmetrize so roundoff in the input does not leak into the solver
    let sym = (&h.0 + h.0.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let n = h.rows();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

/// `e^{−i·h·s}` for Hermitian `h`, through its eigendecomposition.
pub fn expm_unitary(h: &ComplexMatrix, s: f64) -> Result<ComplexMatrix> {
    let (values, v) = eigh(h)?;
    let phases: Vec<C64> = values.iter().map(|&e| cis(-e * s)).collect();
    let n = h.rows();
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = ZERO;
            for k in 0..n {
                acc += v[(i, k)] * phases[k] * v[(j, k)].conj();
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// Which qutrit of a pair survives a partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Keep {
    First,
    Second,
}

/// Reduced density matrix of one qutrit of a two-qutrit pure state.
pub fn partial_trace(psi: &StateVector, keep: Keep) -> Result<ComplexMatrix> {
    if psi.dim() != 9 {
        return Err(Error::DimMismatch {
            expected: 9,
            got: psi.dim(),
        });
    }
    let a = psi.amplitudes();
    let amp = |i: usize, j: usize| a[3 * i + j];
    let mut rho = ComplexMatrix::zeros(3, 3);
    for r in 0..3 {
        for c in 0..3 {
            let mut acc = ZERO;
            for k in 0..3 {
                acc += match keep {
                    Keep::First => amp(r, k) * amp(c, k).conj(),
                    Keep::Second => amp(k, r) * amp(k, c).conj(),
                };
            }
            rho[(r, c)] = acc;
        }
    }
    Ok(rho)
}

/// A pure state on one qutrit (dim 3) or a qutrit pair (dim 9).
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// Normalized state; fails if the norm is off by more than [`NORM_TOL`].
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let psi = Self { amplitudes };
        let drift = (psi.norm_sqr() - 1.0).abs();
        if drift > NORM_TOL {
            return Err(Error::NormDrift(drift));
        }
        Ok(psi)
    }

    /// Unchecked constructor for intermediate results of the integrator.
    pub fn from_raw(amplitudes: Vec<C64>) -> Self {
        Self { amplitudes }
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn normalized(amplitudes: Vec<C64>) -> Self {
        let n = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        Self {
            amplitudes: amplitudes.into_iter().map(|a| a / n).collect(),
        }
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut a = vec![ZERO; dim];
        a[index] = ONE;
        Self { amplitudes: a }
    }

    /// `|q1 q2⟩` as a length-9 vector.
    pub fn two_qutrit(q1: usize, q2: usize) -> Self {
        Self::basis(9, 3 * q1 + q2)
    }

    /// `|a⟩ ⊗ |b⟩`
    pub fn product(a: &StateVector, b: &StateVector) -> Self {
        let mut out = Vec::with_capacity(a.dim() * b.dim());
        for x in &a.amplitudes {
            for y in &b.amplitudes {
                out.push(x * y);
            }
        }
        Self { amplitudes: out }
    }

    /// `(|00⟩ + |11⟩ + |22⟩)/√3`
    pub fn bell() -> Self {
        let s = C64::new(1.0 / 3f64.sqrt(), 0.0);
        let mut a = vec![ZERO; 9];
        a[0] = s;
        a[4] = s;
        a[8] = s;
        Self { amplitudes: a }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}

impl fmt::Debug for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StateVector[")?;
        for z in &self.amplitudes {
            write!(f, " {:+.4}{:+.4}i", z.re, z.im)?;
        }
        write!(f, " ]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn x01() -> ComplexMatrix {
        &ComplexMatrix::ketbra(3, 0, 1) + &ComplexMatrix::ketbra(3, 1, 0)
    }

    #[test]
    fn kron_identity() {
        let k = kron(&ComplexMatrix::identity(3), &ComplexMatrix::identity(3));
        assert_eq!(k, ComplexMatrix::identity(9));
    }

    #[test]
    fn kron_projector_with_flip() {
        let k = kron(&ComplexMatrix::ketbra(3, 1, 1), &x01());
        let nonzero: Vec<(usize, usize)> = (0..9)
            .flat_map(|i| (0..9).map(move |j| (i, j)))
            .filter(|&(i, j)| k[(i, j)] != ZERO)
            .collect();
        assert_eq!(nonzero, vec![(3, 4), (4, 3)]);
        assert_eq!(k[(3, 4)], ONE);
        assert_eq!(k[(4, 3)], ONE);
    }

    #[test]
    fn kron_diagonal() {
        let a = ComplexMatrix::from_real(3, 3, &[1., 0., 0., 0., 2., 0., 0., 0., 3.]).unwrap();
        let k = kron(&a, &ComplexMatrix::identity(3));
        let expect: Vec<C64> = [1., 1., 1., 2., 2., 2., 3., 3., 3.]
            .iter()
            .map(|&x| c(x, 0.0))
            .collect();
        assert_eq!(k, ComplexMatrix::from_diagonal(&expect));
    }

    #[test]
    fn from_row_major_rejects_bad_length() {
        assert!(matches!(
            ComplexMatrix::from_row_major(2, 2, &[ONE; 3]),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn expm_at_zero_is_identity() {
        let h = kron(&x01(), &ComplexMatrix::ketbra(3, 2, 2));
        let u = expm_unitary(&h, 0.0).unwrap();
        assert!(u.max_abs_diff(&ComplexMatrix::identity(9)) < 1e-14);
    }

    #[test]
    fn expm_half_pi_flip() {
        let u = expm_unitary(&x01(), PI / 2.0).unwrap();
        let expect = ComplexMatrix::from_row_major(
            3,
            3,
            &[ZERO, -I, ZERO, -I, ZERO, ZERO, ZERO, ZERO, ONE],
        )
        .unwrap();
        assert!(u.max_abs_diff(&expect) < 1e-14, "{u:?}");
    }

    #[test]
    fn expm_rejects_non_hermitian() {
        let h = ComplexMatrix::ketbra(3, 0, 1);
        assert!(matches!(expm_unitary(&h, 1.0), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn expm_inverse() {
        let h = ComplexMatrix::from_fn(9, 9, |i, j| {
            let z = c((i + 2 * j) as f64 * 0.1, (i as f64 - j as f64) * 0.07);
            if i == j {
                c(z.re, 0.0)
            } else {
                z
            }
        });
        let h = (&h + &h.adjoint()).scale(c(0.5, 0.0));
        let a = expm_unitary(&h, 0.73).unwrap();
        let b = expm_unitary(&h, -0.73).unwrap();
        assert!((&a * &b).max_abs_diff(&ComplexMatrix::identity(9)) < 1e-10);
        assert!(a.is_unitary(UNITARY_TOL));
    }

    #[test]
    fn partial_trace_product_state() {
        let psi = StateVector::two_qutrit(1, 2);
        let rho = partial_trace(&psi, Keep::First).unwrap();
        assert!(rho.max_abs_diff(&ComplexMatrix::ketbra(3, 1, 1)) < 1e-15);
    }

    #[test]
    fn partial_trace_bell_is_maximally_mixed() {
        let rho = partial_trace(&StateVector::bell(), Keep::First).unwrap();
        let expect = ComplexMatrix::identity(3).scale(c(1.0 / 3.0, 0.0));
        assert!(rho.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn partial_trace_two_level_schmidt() {
        let mut a = vec![ZERO; 9];
        a[0] = c(FRAC_1_SQRT_2, 0.0);
        a[4] = c(FRAC_1_SQRT_2, 0.0);
        let rho = partial_trace(&StateVector::new(a).unwrap(), Keep::Second).unwrap();
        let expect = ComplexMatrix::from_diagonal(&[c(0.5, 0.0), c(0.5, 0.0), ZERO]);
        assert!(rho.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn partial_trace_needs_dim_nine() {
        let psi = StateVector::basis(3, 0);
        assert!(matches!(
            partial_trace(&psi, Keep::First),
            Err(Error::DimMismatch { expected: 9, got: 3 })
        ));
    }

    #[test]
    fn state_vector_norm_checked() {
        assert!(StateVector::new(vec![ONE, ONE]).is_err());
        assert!(StateVector::new(vec![c(0.6, 0.0), c(0.0, 0.8)]).is_ok());
    }

    #[test]
    fn matrix_json_round_trip() {
        let m = ComplexMatrix::from_row_major(2, 2, &[ONE, I, -I, c(0.5, -0.25)]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"rows":2,"cols":2,"data":[[1.0,0.0],[0.0,1.0],[-0.0,-1.0],[0.5,-0.25]]}"#);
        let back: ComplexMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
