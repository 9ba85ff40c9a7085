//! The learning boundary: state vectors, action decoding and reward.

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::env::content::{AttentionProfile, ContentConfig, ResolutionAssignment, LEVELS};

/// Entries per user in the state vector.
pub const STATE_PER_USER: usize = 13;
/// Raw action components per user: `(x_r1, x_r2, x_B, x_f)`.
pub const ACTION_PER_USER: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawAction(pub Vec<f64>);

impl RawAction {
    pub fn uniform(users: usize, value: f64) -> Self {
        Self(vec![value; users * ACTION_PER_USER])
    }

    pub fn users(&self) -> usize {
        self.0.len() / ACTION_PER_USER
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserAction {
    pub resolution: ResolutionAssignment,
    /// Allocated bandwidth B_k (Hz).
    pub bandwidth: f64,
    /// Allocated CPU frequency f_k (Hz).
    pub cpu: f64,
}

/// Decoded solution set `{b, B, f}` for every user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionVector {
    pub users: Vec<UserAction>,
}

impl ActionVector {
    pub fn total_bandwidth(&self) -> f64 {
        self.users.iter().map(|u| u.bandwidth).sum()
    }

    pub fn total_cpu(&self) -> f64 {
        self.users.iter().map(|u| u.cpu).sum()
    }

    /// Budgets are fully used (to `tol` relative) and resolutions sit in their boxes.
    pub fn is_feasible(&self, content: &ContentConfig, bandwidth: f64, cpu: f64, tol: f64) -> bool {
        (self.total_bandwidth() - bandwidth).abs() <= tol * bandwidth
            && (self.total_cpu() - cpu).abs() <= tol * cpu
            && self.users.iter().all(|u| {
                u.bandwidth >= 0.0 && u.cpu >= 0.0 && content.within_boxes(&u.resolution)
            })
    }
}

/// Maps `raw` in `[0,1]^{4K}` onto resolution boxes and normalized shares.
pub fn decode_action(
    raw: &RawAction,
    content: &ContentConfig,
    bandwidth: f64,
    cpu: f64,
    eps_share: f64,
    eps_cap: f64,
) -> ActionVector {
    let k = raw.users();
    let x = |u: usize, c: usize| raw.0[u * ACTION_PER_USER + c].clamp(0.0, 1.0);
    let share_sum = |c: usize| (0..k).map(|u| x(u, c) + eps_share).sum::<f64>();
    let (b_sum, f_sum) = (share_sum(2), share_sum(3));
    let [[lo1, hi1], [lo2, hi2]] = content.resolution_ranges;
    let users = (0..k)
        .map(|u| {
            let r1 = lo1 + x(u, 0) * (hi1 - lo1) * (1.0 - eps_cap);
            let r2 = lo2 + x(u, 1) * (hi2 - lo2) * (1.0 - eps_cap);
            let resolution = ResolutionAssignment::new([r1, r2, content.top_resolution], content.tile_bits_max)
                .expect("resolution boxes lie in (0, 1]");
            UserAction {
                resolution,
                bandwidth: bandwidth * (x(u, 2) + eps_share) / b_sum,
                cpu: cpu * (x(u, 3) + eps_share) / f_sum,
            }
        })
        .collect();
    ActionVector { users }
}

/// Inverse of [`decode_action`] for actions inside the boxes (shares up to scale).
pub fn encode_action(action: &ActionVector, content: &ContentConfig, bandwidth: f64, cpu: f64, eps_cap: f64) -> RawAction {
    let [[lo1, hi1], [lo2, hi2]] = content.resolution_ranges;
    let mut raw = Vec::with_capacity(action.users.len() * ACTION_PER_USER);
    for u in &action.users {
        let [r1, r2, _] = u.resolution.fractions;
        raw.push(((r1 - lo1) / ((hi1 - lo1) * (1.0 - eps_cap))).clamp(0.0, 1.0));
        raw.push(((r2 - lo2) / ((hi2 - lo2) * (1.0 - eps_cap))).clamp(0.0, 1.0));
        raw.push((u.bandwidth / bandwidth).clamp(0.0, 1.0));
        raw.push((u.cpu / cpu).clamp(0.0, 1.0));
    }
    RawAction(raw)
}

/// One user's twin snapshot: attention fractions and the last observed QoE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserTwin {
    pub fractions: [f64; LEVELS],
    pub qoe: f64,
}

impl UserTwin {
    pub fn new(profile: &AttentionProfile, qoe: f64) -> Self {
        Self { fractions: profile.fractions(), qoe }
    }
}

/// Un-normalized quantities observed for one user before acting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserObservation {
    pub previous: UserTwin,
    pub current: UserTwin,
    pub rate: f64,
    pub cpu: f64,
    pub download: f64,
    pub render: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub users: Vec<UserObservation>,
    pub hfqoe: f64,
}

/// Fixed a-priori normalization scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateScales {
    pub qoe: f64,
    pub rate: f64,
    pub cpu: f64,
    pub latency: f64,
}

impl StateScales {
    /// Rate scale is the Shannon rate over the whole band at unit gain for the nearest user.
    pub fn from_config(cfg: &SimConfig) -> Self {
        let nearest = (0..cfg.system.users)
            .map(|k| cfg.user_distance(k))
            .fold(f64::INFINITY, f64::min);
        let link = crate::env::LinkParams::from_config(cfg);
        let rate = crate::env::channel::transmission_rate(&link.channel(cfg.system.bandwidth, 1.0, nearest, 0.0));
        Self {
            qoe: cfg.scales.qoe_scale,
            rate,
            cpu: cfg.system.cpu_frequency,
            latency: cfg.scales.latency_factor * cfg.system.latency_threshold,
        }
    }
}

/// Normalizes an observation into `[0,1]^{13K+1}`; returns the state and
/// how many entries had to be clipped.
pub fn normalize_state(obs: &Observation, scales: &StateScales) -> (StateVector, usize) {
    let mut v = Vec::with_capacity(obs.users.len() * STATE_PER_USER + 1);
    let mut clipped = 0;
    let mut push = |x: f64| {
        let y = if x.is_nan() { 0.0 } else { x.clamp(0.0, 1.0) };
        clipped += (y != x) as usize;
        v.push(y);
    };
    for u in &obs.users {
        for twin in [&u.previous, &u.current] {
            twin.fractions.iter().for_each(|&f| push(f));
            push(twin.qoe / scales.qoe);
        }
        push(u.rate / scales.rate);
        push(u.cpu / scales.cpu);
        push(u.download / scales.latency);
        push(u.render / scales.latency);
        push(u.total / scales.latency);
    }
    push(obs.hfqoe);
    (StateVector(v), clipped)
}

pub fn denormalize_state(state: &StateVector, scales: &StateScales) -> Observation {
    let users = state.0.len() / STATE_PER_USER;
    let obs = (0..users)
        .map(|k| {
            let s = &state.0[k * STATE_PER_USER..(k + 1) * STATE_PER_USER];
            let twin = |o: usize| UserTwin { fractions: [s[o], s[o + 1], s[o + 2]], qoe: s[o + 3] * scales.qoe };
            UserObservation {
                previous: twin(0),
                current: twin(4),
                rate: s[8] * scales.rate,
                cpu: s[9] * scales.cpu,
                download: s[10] * scales.latency,
                render: s[11] * scales.latency,
                total: s[12] * scales.latency,
            }
        })
        .collect();
    Observation { users: obs, hfqoe: state.0[users * STATE_PER_USER] }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardComponents {
    pub sum_qoe: f64,
    pub qoe_violations: u32,
    pub fairness_violation: u32,
    pub w1: f64,
    pub w2: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardSpec {
    pub qoe_threshold: f64,
    pub hfqoe_threshold: f64,
    pub w1: f64,
    pub w2: f64,
}

impl RewardSpec {
    pub fn from_config(cfg: &SimConfig) -> Self {
        Self {
            qoe_threshold: cfg.system.qoe_threshold,
            hfqoe_threshold: cfg.system.hfqoe_threshold,
            w1: cfg.system.penalty_qoe,
            w2: cfg.system.penalty_fairness,
        }
    }
}

/// `sum_k QoE_k - w1 #{QoE_k < QoE_th} - w2 [hfQoE < hfQoE_th]`.
pub fn reward(qoe: &[f64], hfqoe: f64, spec: &RewardSpec) -> RewardComponents {
    let sum_qoe: f64 = qoe.iter().sum();
    let qoe_violations = qoe.iter().filter(|&&q| q < spec.qoe_threshold).count() as u32;
    let fairness_violation = (hfqoe < spec.hfqoe_threshold) as u32;
    RewardComponents {
        sum_qoe,
        qoe_violations,
        fairness_violation,
        w1: spec.w1,
        w2: spec.w2,
        reward: sum_qoe - spec.w1 * qoe_violations as f64 - spec.w2 * fairness_violation as f64,
    }
}

/// `sum_tau gamma^tau r_tau` over the given window.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    rewards.iter().rev().fold(0.0, |acc, r| r + gamma * acc)
}
