//! Physical system and its digital twin: content sizes, channel rates,
//! calibrated latencies, QoE and horizon fairness for one edge cell.

pub mod bias;
pub mod channel;
pub mod content;
pub mod fairness;
pub mod latency;
pub mod qoe;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::SimConfig;
use crate::mdp::{ActionVector, UserAction};
use bias::BiasProcess;
use channel::{download_latency, rayleigh_power_gain, transmission_rate, ChannelState};
use content::{gop_size, AttentionProfile, ContentConfig, LEVELS};
use fairness::FairnessTracker;
use latency::{render_latency, ComputeState, LatencyRecord};
use qoe::{psnr, qoe, QoeRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("calibrated rate is non-positive (R = {rate}, dR = {bias})")]
    CalibratedRateNonPositive { rate: f64, bias: f64 },
    #[error("calibrated CPU frequency is non-positive (f = {frequency}, df = {bias})")]
    CalibratedFrequencyNonPositive { frequency: f64, bias: f64 },
    #[error("resolution fraction {0} outside (0, 1]")]
    InvalidResolution(f64),
    #[error("attention counts {counts:?} do not sum to {tiles} tiles")]
    InvalidProfile { counts: [u32; LEVELS], tiles: usize },
    #[error("invalid content configuration: {0}")]
    InvalidContent(String),
}

/// Link constants shared by all users of the cell.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkParams {
    pub tx_power: f64,
    pub path_loss_exp: f64,
    pub interference: f64,
    pub noise: f64,
    pub compression: f64,
}

impl LinkParams {
    pub fn from_config(cfg: &SimConfig) -> Self {
        Self {
            tx_power: cfg.channel.tx_power,
            path_loss_exp: cfg.channel.path_loss_exp,
            interference: cfg.channel.interference,
            noise: cfg.noise_watts(),
            compression: cfg.system.compression,
        }
    }

    pub fn channel(&self, bandwidth: f64, gain: f64, distance: f64, rate_bias: f64) -> ChannelState {
        ChannelState {
            bandwidth,
            tx_power: self.tx_power,
            gain,
            distance,
            path_loss_exp: self.path_loss_exp,
            interference: self.interference,
            noise: self.noise,
            rate_bias,
            compression: self.compression,
        }
    }
}

/// Everything needed to evaluate one user's slot in closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotModel {
    pub content: ContentConfig,
    pub link: LinkParams,
    pub latency_threshold: f64,
    pub eps1: f64,
    pub precompress_render: bool,
}

/// Outcome for one user in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserOutcome {
    pub latency: LatencyRecord,
    pub qoe: QoeRecord,
    /// Theoretical rate R_k before calibration (bit/s).
    pub rate: f64,
    pub calibration_failed: bool,
}

impl SlotModel {
    pub fn from_config(cfg: &SimConfig) -> Self {
        Self {
            content: cfg.content(),
            link: LinkParams::from_config(cfg),
            latency_threshold: cfg.system.latency_threshold,
            eps1: cfg.system.eps1,
            precompress_render: cfg.system.precompress_render,
        }
    }

    /// Latencies of a GoP; errors when a calibrated resource is non-positive.
    pub fn latencies(
        &self,
        profile: &AttentionProfile,
        action: &UserAction,
        gain: f64,
        distance: f64,
        rate_bias_fraction: f64,
        cpu_bias_fraction: f64,
    ) -> Result<(LatencyRecord, f64), EnvError> {
        let gop = gop_size(profile, &action.resolution, self.content.frames_per_gop);
        let mut ch = self.link.channel(action.bandwidth, gain, distance, 0.0);
        let rate = transmission_rate(&ch);
        ch.rate_bias = rate_bias_fraction * rate;
        let download = download_latency(gop.total, &ch)?;
        let mut render_bits = gop.per_level;
        if self.precompress_render {
            render_bits.iter_mut().for_each(|g| *g /= self.link.compression);
        }
        let comp = ComputeState {
            frequency: action.cpu,
            frequency_bias: cpu_bias_fraction * action.cpu,
        };
        let render = render_latency(&render_bits, &self.content.cycles_per_bit, &comp)?;
        Ok((LatencyRecord::new(download, render, self.latency_threshold), rate))
    }

    /// Full evaluation of one user; calibration errors become failed deliveries.
    pub fn evaluate(
        &self,
        profile: &AttentionProfile,
        action: &UserAction,
        gain: f64,
        distance: f64,
        rate_bias_fraction: f64,
        cpu_bias_fraction: f64,
    ) -> UserOutcome {
        let (latency, rate, failed) = match self.latencies(
            profile,
            action,
            gain,
            distance,
            rate_bias_fraction,
            cpu_bias_fraction,
        ) {
            Ok((l, r)) => (l, r, false),
            Err(_) => {
                let rate = transmission_rate(&self.link.channel(action.bandwidth, gain, distance, 0.0));
                (LatencyRecord::failed(self.latency_threshold), rate, true)
            }
        };
        let p = psnr(latency.delivered, self.eps1);
        let q = qoe(p, profile, &action.resolution, self.content.tile_bits_min);
        UserOutcome {
            latency,
            qoe: QoeRecord { psnr: p, qoe: q, eps1: self.eps1 },
            rate,
            calibration_failed: failed,
        }
    }
}

/// One simulated slot across all users.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub users: Vec<UserOutcome>,
    pub gains: Vec<f64>,
    pub hfqoe: f64,
}

impl SlotOutcome {
    pub fn qoe(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.qoe.qoe).collect()
    }

    pub fn calibration_failures(&self) -> usize {
        self.users.iter().filter(|u| u.calibration_failed).count()
    }
}

/// The simulated cell: channel draws, twin biases and the fairness horizon.
#[derive(Debug, Clone)]
pub struct Environment {
    model: SlotModel,
    distances: Vec<f64>,
    fading: bool,
    bias: BiasProcess,
    fairness: FairnessTracker,
    channel_rng: ChaCha8Rng,
    bias_rng: ChaCha8Rng,
}

impl Environment {
    pub fn new(cfg: &SimConfig, seed: u64) -> Self {
        let k = cfg.system.users;
        let mut channel_rng = ChaCha8Rng::seed_from_u64(seed);
        channel_rng.set_stream(1);
        let mut bias_rng = ChaCha8Rng::seed_from_u64(seed);
        bias_rng.set_stream(2);
        Self {
            model: SlotModel::from_config(cfg),
            distances: (0..k).map(|u| cfg.user_distance(u)).collect(),
            fading: cfg.channel.rayleigh_fading,
            bias: BiasProcess::new(k, cfg.bias.rho, cfg.bias.max_fraction, cfg.bias.noise_std),
            fairness: FairnessTracker::new(k),
            channel_rng,
            bias_rng,
        }
    }

    pub fn users(&self) -> usize {
        self.distances.len()
    }

    pub fn model(&self) -> &SlotModel {
        &self.model
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn fairness(&self) -> &FairnessTracker {
        &self.fairness
    }

    pub fn bias(&self) -> &BiasProcess {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut BiasProcess {
        &mut self.bias
    }

    /// Redraws the twin calibration biases (start of a twin-update round).
    pub fn refresh_biases(&mut self) {
        self.bias.refresh(&mut self.bias_rng);
    }

    /// Draws this slot's channel gains and evaluates every user.
    pub fn step(&mut self, profiles: &[AttentionProfile], action: &ActionVector) -> SlotOutcome {
        let gains: Vec<f64> = (0..self.users())
            .map(|_| if self.fading { rayleigh_power_gain(&mut self.channel_rng) } else { 1.0 })
            .collect();
        self.step_with_gains(profiles, action, gains)
    }

    pub fn step_with_gains(
        &mut self,
        profiles: &[AttentionProfile],
        action: &ActionVector,
        gains: Vec<f64>,
    ) -> SlotOutcome {
        assert_eq!(profiles.len(), self.users(), "one profile per user");
        assert_eq!(action.users.len(), self.users(), "one action per user");
        let users: Vec<UserOutcome> = (0..self.users())
            .map(|k| {
                self.model.evaluate(
                    &profiles[k],
                    &action.users[k],
                    gains[k],
                    self.distances[k],
                    self.bias.rate_fraction(k),
                    self.bias.cpu_fraction(k),
                )
            })
            .collect();
        let qoe: Vec<f64> = users.iter().map(|u| u.qoe.qoe).collect();
        let hfqoe = self.fairness.update(&qoe);
        SlotOutcome { users, gains, hfqoe }
    }
}
