//! Rendering latency and the per-slot latency record.

use serde::{Deserialize, Serialize};

use super::content::LEVELS;
use super::EnvError;

/// CPU allocation for one user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComputeState {
    /// Allocated CPU frequency (Hz).
    pub frequency: f64,
    /// Twin-estimated CPU frequency bias (Hz).
    pub frequency_bias: f64,
}

/// Seconds to render a GoP: `sum_a g_a c_a / (f - df)`.
pub fn render_latency(
    gop_bits: &[f64; LEVELS],
    cycles_per_bit: &[f64; LEVELS],
    comp: &ComputeState,
) -> Result<f64, EnvError> {
    let effective = comp.frequency - comp.frequency_bias;
    if !(effective > 0.0) {
        return Err(EnvError::CalibratedFrequencyNonPositive {
            frequency: comp.frequency,
            bias: comp.frequency_bias,
        });
    }
    let cycles: f64 = gop_bits.iter().zip(cycles_per_bit).map(|(g, c)| g * c).sum();
    Ok(cycles / effective)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyRecord {
    pub download: f64,
    pub render: f64,
    pub total: f64,
    pub delivered: bool,
    pub threshold: f64,
}

impl LatencyRecord {
    pub fn new(download: f64, render: f64, threshold: f64) -> Self {
        let total = download + render;
        Self { download, render, total, delivered: total <= threshold, threshold }
    }

    /// Record for a slot whose calibrated rate or frequency was non-positive.
    pub fn failed(threshold: f64) -> Self {
        Self {
            download: f64::INFINITY,
            render: f64::INFINITY,
            total: f64::INFINITY,
            delivered: false,
            threshold,
        }
    }

    /// Total latency bounded at `10 T_th` for aggregate metrics.
    pub fn capped_total(&self) -> f64 {
        self.total.min(10.0 * self.threshold)
    }

    pub fn capped_download(&self) -> f64 {
        self.download.min(10.0 * self.threshold)
    }

    pub fn capped_render(&self) -> f64 {
        self.render.min(10.0 * self.threshold)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const C: [f64; 3] = [800.0, 900.0, 1000.0];

    fn comp(f: f64) -> ComputeState {
        ComputeState { frequency: f, frequency_bias: 0.0 }
    }

    #[test]
    fn single_level_render() {
        let t = render_latency(&[1e6, 0.0, 0.0], &C, &comp(8e9)).unwrap();
        assert!((t - 0.1).abs() < 1e-15);
    }

    #[test]
    fn fig1_render_at_full_server() {
        let g = [74_649_600.0, 447_897_600.0, 796_262_400.0];
        let cycles: f64 = 74_649_600.0 * 800.0 + 447_897_600.0 * 900.0 + 796_262_400.0 * 1000.0;
        assert_eq!(cycles, 1_259_089_920_000.0);
        let t = render_latency(&g, &C, &comp(15e9)).unwrap();
        assert!((t - 83.939_328).abs() < 1e-6, "{t}");
    }

    #[test]
    fn empty_gop_renders_instantly() {
        assert_eq!(render_latency(&[0.0; 3], &C, &comp(1e9)).unwrap(), 0.0);
    }

    #[test]
    fn bias_at_or_above_frequency_fails() {
        let c = ComputeState { frequency: 1e9, frequency_bias: 1e9 };
        assert!(matches!(
            render_latency(&[1.0; 3], &C, &c),
            Err(EnvError::CalibratedFrequencyNonPositive { .. })
        ));
    }

    #[test]
    fn record_delivery_flag() {
        let ok = LatencyRecord::new(0.05, 0.09, 0.15);
        assert_eq!(ok.total, 0.05 + 0.09);
        assert!(ok.delivered);
        let late = LatencyRecord::new(0.05, 0.2, 0.15);
        assert!(!late.delivered);
        let failed = LatencyRecord::failed(0.15);
        assert!(!failed.delivered);
        assert_eq!(failed.capped_total(), 1.5);
    }
}
