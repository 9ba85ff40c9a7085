//! Twin desynchronization: rate and CPU-frequency calibration biases.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Bounded AR(1) drift, redrawn once per twin-update round.
///
/// Biases are kept as fractions of the quantity they calibrate, so
/// `dR_k = rate_fraction[k] * R_k` and `df_k = cpu_fraction[k] * f_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasProcess {
    rho: f64,
    max_fraction: f64,
    noise_std: f64,
    rate_fraction: Vec<f64>,
    cpu_fraction: Vec<f64>,
}

impl BiasProcess {
    pub fn new(users: usize, rho: f64, max_fraction: f64, noise_std: f64) -> Self {
        Self {
            rho,
            max_fraction,
            noise_std,
            rate_fraction: vec![0.0; users],
            cpu_fraction: vec![0.0; users],
        }
    }

    /// Zero biases; the twin is perfectly synchronized.
    pub fn disabled(users: usize) -> Self {
        Self::new(users, 0.0, 0.0, 0.0)
    }

    pub fn refresh<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let noise = Normal::new(0.0, self.noise_std.max(0.0)).expect("finite std");
        let (rho, cap) = (self.rho, self.max_fraction);
        for x in self.rate_fraction.iter_mut().chain(self.cpu_fraction.iter_mut()) {
            let next = rho * *x + noise.sample(rng);
            *x = next.clamp(0.0, cap.max(0.0));
        }
    }

    pub fn rate_fraction(&self, user: usize) -> f64 {
        self.rate_fraction[user]
    }

    pub fn cpu_fraction(&self, user: usize) -> f64 {
        self.cpu_fraction[user]
    }

    pub fn set(&mut self, user: usize, rate_fraction: f64, cpu_fraction: f64) {
        self.rate_fraction[user] = rate_fraction;
        self.cpu_fraction[user] = cpu_fraction;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stays_within_bounds() {
        let mut b = BiasProcess::new(4, 0.9, 0.05, 0.03);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen_positive = false;
        for _ in 0..500 {
            b.refresh(&mut rng);
            for k in 0..4 {
                for x in [b.rate_fraction(k), b.cpu_fraction(k)] {
                    assert!((0.0..=0.05).contains(&x));
                    seen_positive |= x > 0.0;
                }
            }
        }
        assert!(seen_positive);
    }

    #[test]
    fn disabled_is_zero() {
        let mut b = BiasProcess::disabled(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        b.refresh(&mut rng);
        assert_eq!(b.rate_fraction(1), 0.0);
        assert_eq!(b.cpu_fraction(0), 0.0);
    }
}
