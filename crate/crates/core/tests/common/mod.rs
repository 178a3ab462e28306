//! Reference values computed without the library's own routines.
#![allow(dead_code)]

use qutritcr::device::DeviceParams;
use qutritcr::linalg::{ComplexMatrix, C64};
use rand::Rng;

type Dense = Vec<Vec<C64>>;

fn dense(m: &ComplexMatrix) -> Dense {
    (0..m.rows()).map(|i| (0..m.cols()).map(|j| m[(i, j)]).collect()).collect()
}

fn from_dense(d: &Dense) -> ComplexMatrix {
    ComplexMatrix::from_fn(d.len(), d.len(), |i, j| d[i][j])
}

fn matmul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

/// `exp(−iHt)` by scaling and squaring of a Taylor series.
pub fn expm_taylor(h: &ComplexMatrix, t: f64) -> ComplexMatrix {
    let n = h.rows();
    let norm: f64 = dense(h).iter().flatten().map(|z| z.norm()).sum::<f64>() * t.abs();
    let squarings = (norm.max(1.0).log2().ceil() as i32 + 4).max(0);
    let scale = t / 2f64.powi(squarings);
    let a: Dense = dense(h).iter().map(|r| r.iter().map(|z| z * C64::new(0.0, -scale)).collect()).collect();
    let mut sum: Dense = (0..n).map(|i| (0..n).map(|j| C64::new(f64::from(u8::from(i == j)), 0.0)).collect()).collect();
    let mut term = sum.clone();
    for k in 1..30 {
        term = matmul(&term, &a).iter().map(|r| r.iter().map(|z| z / k as f64).collect()).collect();
        for i in 0..n {
            for j in 0..n {
                sum[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        sum = matmul(&sum, &sum);
    }
    from_dense(&sum)
}

pub fn random_hermitian(rng: &mut impl Rng, n: usize, scale: f64) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = C64::new(scale * rng.random_range(-1.0..1.0), 0.0);
        for j in 0..i {
            let z = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

pub fn random_unitary(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    expm_taylor(&random_hermitian(rng, n, 1.0), 1.0)
}

pub fn random_state(rng: &mut impl Rng, n: usize) -> Vec<C64> {
    let v: Vec<C64> = (0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

/// Exact state of `H = ω/2 σz + Ω/2 (cos ωt σx + sin ωt σy)` from `|0⟩`.
pub fn circular_rabi(omega: f64, rabi: f64, t: f64) -> [C64; 2] {
    let (c, s) = ((rabi * t / 2.0).cos(), (rabi * t / 2.0).sin());
    [
        C64::from_polar(c, -omega * t / 2.0),
        C64::from_polar(s, omega * t / 2.0) * C64::new(0.0, -1.0),
    ]
}

/// Control-conditioned target rates from second-order perturbation theory
/// in `J` and the drive, normalized by control `|0⟩`: `(ν1/ν0, ν2/ν0)`.
///
/// With control ladder energies `E_n = ω n + δ n(n−1)/2` truncated at three
/// levels, a drive at the target frequency `ω_t` gives
/// `ν_c ∝ (c+1)/(E_{c+1} − E_c − ω_t) − c/(E_c − E_{c−1} − ω_t)`.
pub fn cr_ratio_oracle(p: &DeviceParams) -> (f64, f64) {
    let e = |n: f64| p.omega1 * n + 0.5 * p.delta1 * n * (n - 1.0);
    let nu = |c: usize| {
        let c = c as f64;
        let up = if c < 2.0 { (c + 1.0) / (e(c + 1.0) - e(c) - p.omega2) } else { 0.0 };
        let down = if c > 0.0 { c / (e(c) - e(c - 1.0) - p.omega2) } else { 0.0 };
        up - down
    };
    (nu(1) / nu(0), nu(2) / nu(0))
}
