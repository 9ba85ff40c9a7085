//! Resource-allocation policies: the continual DDPG family and two fixed baselines.

mod baselines;
mod ddpg;
mod runner;

pub use baselines::{average_allocation, fixed_2k, AVG_ALLOC_GRID};
pub use ddpg::{policy_gradient, DdpgAgent, TrainDiagnostics, CHECKPOINT_VERSION};
pub use runner::{run_continual, GazeInput, RunOptions};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::replay::{BufferConfig, ReplayMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Fper,
    Per,
    Cddpg,
    OfflineDdpg,
    AvgAlloc,
    Fixed2k,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Fper,
        Variant::Per,
        Variant::Cddpg,
        Variant::OfflineDdpg,
        Variant::AvgAlloc,
        Variant::Fixed2k,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Fper => "fper",
            Variant::Per => "per",
            Variant::Cddpg => "cddpg",
            Variant::OfflineDdpg => "offline_ddpg",
            Variant::AvgAlloc => "avg_alloc",
            Variant::Fixed2k => "fixed_2k",
        }
    }

    pub fn is_learning(self) -> bool {
        matches!(self, Variant::Fper | Variant::Per | Variant::Cddpg | Variant::OfflineDdpg)
    }

    pub fn replay_mode(self) -> ReplayMode {
        match self {
            Variant::Fper => ReplayMode::Fper,
            Variant::Per => ReplayMode::Per,
            _ => ReplayMode::Uniform,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == key)
            .ok_or_else(|| {
                let names: Vec<_> = Variant::ALL.iter().map(|v| v.name()).collect();
                format!("unknown variant `{s}` (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exploration {
    pub initial: f64,
    /// Multiplier applied after every twin-update round.
    pub decay: f64,
    pub floor: f64,
}

impl Exploration {
    pub fn std_at(&self, round: usize) -> f64 {
        (self.initial * self.decay.powi(round as i32)).max(self.floor.min(self.initial))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub gamma: f64,
    pub tau: f64,
    pub lr_critic: f64,
    pub lr_actor: f64,
    pub batch: usize,
    pub hidden: Vec<usize>,
    pub buffer: BufferConfig,
    pub exploration: Exploration,
    pub variant: Variant,
    /// Multiplier applied to rewards before they enter the replay buffer.
    pub reward_scale: f64,
}

impl AgentConfig {
    pub fn from_sim(cfg: &SimConfig, variant: Variant) -> Self {
        let a = &cfg.agent;
        Self {
            gamma: a.gamma,
            tau: a.tau,
            lr_critic: a.lr_critic,
            lr_actor: a.lr_actor,
            batch: a.batch,
            hidden: a.hidden.clone(),
            buffer: cfg.buffer_config(variant.replay_mode()),
            exploration: Exploration { initial: a.explore_std, decay: a.explore_decay, floor: a.explore_floor },
            variant,
            reward_scale: a.reward_scale,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(format!("gamma {} must lie in [0, 1)", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(format!("tau {} must lie in (0, 1]", self.tau));
        }
        if self.batch == 0 || self.batch > self.buffer.capacity {
            return Err(format!("batch {} must lie in [1, capacity {}]", self.batch, self.buffer.capacity));
        }
        self.buffer.validate().map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContinualSchedule {
    /// Slots per twin-update round.
    pub delta_t: usize,
    pub rounds: usize,
    /// Rounds of training before an offline agent freezes.
    pub offline_rounds: usize,
}

impl ContinualSchedule {
    pub fn from_sim(cfg: &SimConfig, rounds: usize) -> Self {
        Self { delta_t: cfg.system.slots_per_round, rounds, offline_rounds: cfg.agent.offline_rounds }
    }

    pub fn total_slots(&self) -> usize {
        self.delta_t * self.rounds
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert_eq!("FPER".parse::<Variant>().unwrap(), Variant::Fper);
        assert_eq!("fixed-2k".parse::<Variant>().unwrap(), Variant::Fixed2k);
        assert!("ppo".parse::<Variant>().is_err());
    }

    #[test]
    fn exploration_decays_to_floor() {
        let e = Exploration { initial: 0.2, decay: 0.995, floor: 0.01 };
        assert_eq!(e.std_at(0), 0.2);
        assert!((e.std_at(1) - 0.199).abs() < 1e-12);
        assert_eq!(e.std_at(5000), 0.01);
    }

    #[test]
    fn table_defaults() {
        let a = AgentConfig::from_sim(&SimConfig::paper_table1(), Variant::Fper);
        assert_eq!((a.gamma, a.tau, a.lr_critic, a.lr_actor, a.batch), (0.99, 0.01, 2e-4, 1e-7, 64));
        assert_eq!(a.hidden, vec![256, 256, 256]);
        assert_eq!(a.buffer.capacity, 10_000);
        assert_eq!((a.buffer.beta1, a.buffer.beta2, a.buffer.mu), (0.9, 0.8, 0.95));
        assert_eq!(a.buffer.mode, ReplayMode::Fper);
        a.validate().unwrap();
        assert_eq!(AgentConfig::from_sim(&SimConfig::paper_table1(), Variant::Cddpg).buffer.mode, ReplayMode::Uniform);
    }

    #[test]
    fn schedule_slot_arithmetic() {
        let s = ContinualSchedule { delta_t: 100, rounds: 10, offline_rounds: 1000 };
        assert_eq!(s.total_slots(), 1000);
    }
}
