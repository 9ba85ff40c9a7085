//! Horizon-fair QoE bookkeeping.

use serde::{Deserialize, Serialize};

/// Running extremes and per-user sums of QoE over the whole horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessTracker {
    lowest: Option<f64>,
    highest: Option<f64>,
    sums: Vec<f64>,
    slots: u64,
    hfqoe: f64,
}

impl FairnessTracker {
    pub fn new(users: usize) -> Self {
        Self { lowest: None, highest: None, sums: vec![0.0; users], slots: 0, hfqoe: 1.0 }
    }

    pub fn lowest(&self) -> Option<f64> {
        self.lowest
    }

    pub fn highest(&self) -> Option<f64> {
        self.highest
    }

    pub fn slots(&self) -> u64 {
        self.slots
    }

    pub fn hfqoe(&self) -> f64 {
        self.hfqoe
    }

    pub fn users(&self) -> usize {
        self.sums.len()
    }

    pub fn average_qoe(&self) -> Vec<f64> {
        if self.slots == 0 {
            return vec![0.0; self.sums.len()];
        }
        self.sums.iter().map(|s| s / self.slots as f64).collect()
    }

    /// Folds one slot of per-user QoE in and returns the new hfQoE.
    pub fn update(&mut self, qoe: &[f64]) -> f64 {
        assert_eq!(qoe.len(), self.sums.len(), "one QoE value per user");
        for (&q, sum) in qoe.iter().zip(self.sums.iter_mut()) {
            *sum += q;
            self.lowest = Some(self.lowest.map_or(q, |l| l.min(q)));
            self.highest = Some(self.highest.map_or(q, |h| h.max(q)));
        }
        self.slots += 1;
        let (h, l) = (self.highest.unwrap_or(0.0), self.lowest.unwrap_or(0.0));
        self.hfqoe = hfqoe(&self.average_qoe(), h, l);
        self.hfqoe
    }
}

/// `1 - 2 sigma / (H - L)` with sigma the population std of per-user averages.
/// Defined as 1 when `H == L`.
pub fn hfqoe(averages: &[f64], highest: f64, lowest: f64) -> f64 {
    let spread = highest - lowest;
    if averages.is_empty() || spread <= 0.0 {
        return 1.0;
    }
    1.0 - 2.0 * population_std(averages) / spread
}

pub fn population_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}
