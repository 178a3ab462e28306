//! Sinusoid fitting for Rabi traces.

use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::device::TWO_PI;
use crate::error::{Error, Result};

pub const MIN_SAMPLES: usize = 16;
/// A trace oscillates only if its spectral peak exceeds this multiple of the median.
pub const PEAK_TO_MEDIAN: f64 = 3.0;
const ZERO_PAD: usize = 8;

/// `y(t) = offset + amplitude·cos(2π·freq·t + phase)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// GHz
    pub freq: f64,
    /// rad, in (−π, π]
    pub phase: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub rmse: f64,
}

impl FitResult {
    pub fn eval(&self, t: f64) -> f64 {
        self.offset + self.amplitude * (TWO_PI * self.freq * t + self.phase).cos()
    }
}

fn wrap(phase: f64) -> f64 {
    let mut p = phase.rem_euclid(TWO_PI);
    if p > PI {
        p -= TWO_PI;
    }
    p
}

/// Magnitude of the mean-removed DFT at cyclic frequency `f`.
fn spectrum_at(t: &[f64], y: &[f64], mean: f64, f: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (ti, yi) in t.iter().zip(y) {
        let arg = TWO_PI * f * ti;
        re += (yi - mean) * arg.cos();
        im -= (yi - mean) * arg.sin();
    }
    re.hypot(im)
}

/// Offset and quadratures by linear least squares at a fixed frequency.
fn linear_fit(t: &[f64], y: &[f64], f: f64) -> (f64, f64, f64) {
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut aty = nalgebra::Vector3::<f64>::zeros();
    for (ti, yi) in t.iter().zip(y) {
        let row = nalgebra::Vector3::new(1.0, (TWO_PI * f * ti).cos(), (TWO_PI * f * ti).sin());
        ata += row * row.transpose();
        aty += row * *yi;
    }
    match ata.lu().solve(&aty) {
        Some(x) => (x[0], x[1], x[2]),
        None => (y.iter().sum::<f64>() / y.len() as f64, 0.0, 0.0),
    }
}

fn residuals(t: &[f64], y: &[f64], p: &Vector4<f64>) -> f64 {
    t.iter()
        .zip(y)
        .map(|(ti, yi)| {
            let r = yi - (p[0] + p[1] * (TWO_PI * p[2] * ti + p[3]).cos());
            r * r
        })
        .sum()
}

/// Fit a sinusoid to `(t, y)`.
///
/// The frequency is seeded by the largest peak of a zero-padded DFT (ties go
/// to the lower frequency) and refined with Levenberg–Marquardt.
pub fn fit_rabi(t: &[f64], y: &[f64]) -> Result<FitResult> {
    let n = t.len();
    if n != y.len() {
        return Err(Error::DimMismatch { expected: n, got: y.len() });
    }
    if n < MIN_SAMPLES {
        return Err(Error::InvalidParams(format!("need at least {MIN_SAMPLES} samples, got {n}")));
    }
    if t.windows(2).any(|w| w[1] <= w[0]) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParams("sample times must increase and values be finite".into()));
    }
    let span = t[n - 1] - t[0];
    let mean = y.iter().sum::<f64>() / n as f64;
    let df = 1.0 / (span * (n as f64) / (n as f64 - 1.0));

    // oscillation test on the natural DFT bins
    let mut bins: Vec<f64> = (1..=n / 2).map(|k| spectrum_at(t, y, mean, k as f64 * df)).collect();
    let scale = y.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    let peak = bins.iter().cloned().fold(0.0, f64::max);
    bins.sort_by(f64::total_cmp);
    let median = bins[bins.len() / 2];
    if scale < 1e-12 || peak < PEAK_TO_MEDIAN * median {
        return Err(Error::NoOscillation { peak, median });
    }

    // zero-padded seed, searching upward so ties keep the lower frequency
    let mut seed_f = df;
    let mut best = -1.0;
    for k in 1..=(n / 2) * ZERO_PAD {
        let f = k as f64 * df / ZERO_PAD as f64;
        let s = spectrum_at(t, y, mean, f);
        if s > best * (1.0 + 1e-12) {
            best = s;
            seed_f = f;
        }
    }
    let (o, a, b) = linear_fit(t, y, seed_f);
    let mut p = Vector4::new(o, a.hypot(b), seed_f, (-b).atan2(a));

    // Levenberg–Marquardt
    let mut cost = residuals(t, y, &p);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let mut jtj = Matrix4::<f64>::zeros();
        let mut jtr = Vector4::<f64>::zeros();
        for (ti, yi) in t.iter().zip(y) {
            let arg = TWO_PI * p[2] * ti + p[3];
            let (s, c) = arg.sin_cos();
            let r = yi - (p[0] + p[1] * c);
            let j = Vector4::new(1.0, c, -p[1] * s * TWO_PI * ti, -p[1] * s);
            jtj += j * j.transpose();
            jtr += j * r;
        }
        let mut improved = false;
        for _ in 0..20 {
            let mut damped = jtj;
            for i in 0..4 {
                damped[(i, i)] += lambda * jtj[(i, i)].max(1e-30);
            }
            let Some(step) = damped.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + step;
            let c = residuals(t, y, &trial);
            if c < cost {
                let rel = (cost - c) / cost.max(1e-300);
                p = trial;
                cost = c;
                lambda = (lambda / 10.0).max(1e-12);
                improved = rel > 1e-14;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }

    let (mut amp, mut freq, mut phase) = (p[1], p[2], p[3]);
    if amp < 0.0 {
        amp = -amp;
        phase += PI;
    }
    if freq < 0.0 {
        freq = -freq;
        phase = -phase;
    }
    Ok(FitResult {
        freq,
        phase: wrap(phase),
        amplitude: amp,
        offset: p[0],
        rmse: (cost / n as f64).sqrt(),
    })
}
