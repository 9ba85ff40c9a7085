//! Downlink channel: Shannon rate over a Rayleigh-faded, path-loss attenuated link.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::EnvError;

/// Snapshot of one user's downlink for one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelState {
    /// Allocated subchannel bandwidth (Hz).
    pub bandwidth: f64,
    /// Transmit power (W).
    pub tx_power: f64,
    /// Rayleigh power gain.
    pub gain: f64,
    /// BS to user distance (m).
    pub distance: f64,
    pub path_loss_exp: f64,
    /// Inter-cell interference (W).
    pub interference: f64,
    /// Noise power (W).
    pub noise: f64,
    /// Twin-estimated rate bias (bit/s).
    pub rate_bias: f64,
    /// Compression ratio applied before transmission.
    pub compression: f64,
}

impl ChannelState {
    pub fn snr(&self) -> f64 {
        self.tx_power * self.gain * self.distance.powf(-self.path_loss_exp)
            / (self.interference + self.noise)
    }
}

/// Theoretical rate `B log2(1 + P h d^-alpha / (I + sigma^2))` in bit/s.
pub fn transmission_rate(ch: &ChannelState) -> f64 {
    ch.bandwidth * (1.0 + ch.snr()).log2()
}

/// Seconds to deliver `bits` over the calibrated rate `omega (R - dR)`.
pub fn download_latency(bits: f64, ch: &ChannelState) -> Result<f64, EnvError> {
    let rate = transmission_rate(ch);
    let calibrated = rate - ch.rate_bias;
    if !(calibrated > 0.0) {
        return Err(EnvError::CalibratedRateNonPositive { rate, bias: ch.rate_bias });
    }
    Ok(bits / (ch.compression * calibrated))
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Unit-mean exponential power gain (squared Rayleigh amplitude).
pub fn rayleigh_power_gain<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}
