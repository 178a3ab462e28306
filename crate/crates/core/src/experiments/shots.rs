use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-6;

/// Multinomial counts of `shots` draws, reproducible from `seed`. Drawn as
/// successive binomials over the remaining mass.
pub fn sample_shots(probabilities: &[f64], shots: u64, seed: u64) -> Result<Vec<u64>> {
    if probabilities.is_empty() {
        return Err(Error::BadDistribution("no outcomes".into()));
    }
    if let Some(p) = probabilities.iter().find(|p| !p.is_finite() || **p < -SUM_TOL) {
        return Err(Error::BadDistribution(format!("probability {p}")));
    }
    let total: f64 = probabilities.iter().sum();
    if (total - 1.0).abs() > SUM_TOL {
        return Err(Error::BadDistribution(format!("probabilities sum to {total}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut left = shots;
    let mut mass = total;
    let mut counts = vec![0; probabilities.len()];
    let last = probabilities.len() - 1;
    for (i, &p) in probabilities.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i == last {
            counts[i] = left;
            break;
        }
        let q = if mass > 0.0 { (p.max(0.0) / mass).clamp(0.0, 1.0) } else { 0.0 };
        let k = Binomial::new(left, q)
            .map_err(|e| Error::BadDistribution(e.to_string()))?
            .sample(&mut rng);
        counts[i] = k;
        left -= k;
        mass -= p.max(0.0);
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass() {
        let mut p = [0.0; 9];
        p[0] = 1.0;
        assert_eq!(sample_shots(&p, 1000, 3).unwrap(), [1000, 0, 0, 0, 0, 0, 0, 0, 0]);
        p[0] = 0.0;
        p[8] = 1.0;
        assert_eq!(sample_shots(&p, 1000, 3).unwrap()[8], 1000);
    }

    #[test]
    fn uniform_counts_within_five_sigma() {
        let n = 9_000_000u64;
        let p = [1.0 / 9.0; 9];
        let sd = (n as f64 * (1.0 / 9.0) * (8.0 / 9.0)).sqrt();
        for seed in [0, 1, 99] {
            let c = sample_shots(&p, n, seed).unwrap();
            assert_eq!(c.iter().sum::<u64>(), n);
            for k in c {
                assert!((k as f64 - 1e6).abs() < 5.0 * sd, "{k}");
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let p = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(sample_shots(&p, 5000, 11).unwrap(), sample_shots(&p, 5000, 11).unwrap());
        assert_ne!(sample_shots(&p, 5000, 11).unwrap(), sample_shots(&p, 5000, 12).unwrap());
    }

    #[test]
    fn bad_distributions() {
        assert!(matches!(sample_shots(&[0.5, 0.4], 10, 0), Err(Error::BadDistribution(_))));
        assert!(matches!(sample_shots(&[1.5, -0.5], 10, 0), Err(Error::BadDistribution(_))));
        assert!(matches!(sample_shots(&[f64::NAN, 1.0], 10, 0), Err(Error::BadDistribution(_))));
        assert!(matches!(sample_shots(&[], 10, 0), Err(Error::BadDistribution(_))));
    }
}
