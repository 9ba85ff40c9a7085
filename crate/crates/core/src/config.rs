//! Simulation configuration: TOML files layered over built-in presets.
//!
//! A file may name a base with `include = "<preset or relative path>"`; its
//! own tables are merged key by key on top of the base. Unknown keys are
//! rejected and every key must be present once the layers are merged.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::channel::{distance, dbm_to_watts};
use crate::env::content::ContentConfig;
use crate::gaze::AttentionRule;
use crate::replay::{BufferConfig, ReplayMode};

pub const PAPER_TABLE1: &str = include_str!("../presets/paper-table1.toml");
pub const DESK_SCALE: &str = include_str!("../presets/desk-scale.toml");

pub const PRESETS: [&str; 2] = ["paper-table1", "desk-scale"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("unknown preset `{0}` (known: paper-table1, desk-scale)")]
    UnknownPreset(String),
    #[error("include cycle through `{0}`")]
    IncludeCycle(String),
    #[error("unknown sweep parameter `{0}`")]
    UnknownParameter(String),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub system: SystemConfig,
    pub channel: ChannelConfig,
    pub bias: BiasConfig,
    pub attention: AttentionConfig,
    pub scales: ScaleConfig,
    pub agent: AgentParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Frames per GoP (F).
    pub frames_per_gop: u32,
    /// Tile grid columns (I).
    pub tile_cols: usize,
    /// Tile grid rows (J).
    pub tile_rows: usize,
    /// Number of users (K).
    pub users: usize,
    /// Latency threshold T_th in seconds.
    pub latency_threshold: f64,
    /// Slots per twin-update round.
    pub slots_per_round: usize,
    /// Total bandwidth B_max in Hz.
    pub bandwidth: f64,
    /// Server CPU capacity f_max in Hz.
    pub cpu_frequency: f64,
    pub cycles_per_bit: [f64; 3],
    pub r1_range: [f64; 2],
    pub r2_range: [f64; 2],
    pub r3: f64,
    /// b_max in bits.
    pub tile_bits_max: f64,
    /// b_th in bits.
    pub tile_bits_min: f64,
    pub qoe_threshold: f64,
    pub hfqoe_threshold: f64,
    pub eps1: f64,
    /// Compression ratio omega.
    pub compression: f64,
    pub penalty_qoe: f64,
    pub penalty_fairness: f64,
    /// Divide GoP bits by omega before rendering.
    pub precompress_render: bool,
    pub eps_share: f64,
    pub eps_cap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    /// BS transmit power per user (W).
    pub tx_power: f64,
    pub path_loss_exp: f64,
    pub noise_dbm: f64,
    /// Inter-cell interference (W).
    pub interference: f64,
    pub bs_position: [f64; 2],
    /// User positions in metres; reused cyclically when `users` exceeds the list.
    pub user_positions: Vec<[f64; 2]>,
    pub rayleigh_fading: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasConfig {
    pub rho: f64,
    pub max_fraction: f64,
    pub noise_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttentionConfig {
    pub inner_radius: u32,
    pub mid_radius: u32,
    /// Per-user synthetic gaze step scale, reused cyclically.
    pub gaze_step_scales: Vec<f64>,
    /// Directory of gaze trace files; empty selects synthetic gaze.
    pub trace_dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleConfig {
    pub qoe_scale: f64,
    /// Latencies are normalized by `latency_factor * T_th`.
    pub latency_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentParams {
    pub gamma: f64,
    pub tau: f64,
    pub lr_critic: f64,
    pub lr_actor: f64,
    pub batch: usize,
    pub hidden: Vec<usize>,
    pub capacity: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub mu: f64,
    pub eps2: f64,
    pub eps3: f64,
    pub reward_scale: f64,
    pub explore_std: f64,
    pub explore_decay: f64,
    pub explore_floor: f64,
    pub offline_rounds: usize,
}

impl SimConfig {
    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        let table = load_layers(Source::Preset(name.to_string()), &mut Vec::new())?;
        Self::from_table(table, name)
    }

    pub fn paper_table1() -> Self {
        Self::preset("paper-table1").expect("built-in preset is valid")
    }

    pub fn desk_scale() -> Self {
        Self::preset("desk-scale").expect("built-in preset is valid")
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let table = load_layers(Source::File(path.to_path_buf()), &mut Vec::new())?;
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).unwrap_or_default();
        Self::from_table(table, &origin).map_err(|e| locate(e, &text, &origin))
    }

    /// Parses `text` with an optional base preset underneath it.
    pub fn from_str_with_base(text: &str, base: Option<&str>) -> Result<Self, ConfigError> {
        let mut stack = Vec::new();
        let own = parse_table(text, "<inline>")?;
        let merged = match (own.get("include").and_then(|v| v.as_str()), base) {
            (Some(inc), _) => {
                let base = load_layers(Source::Preset(inc.to_string()), &mut stack)?;
                merge(base, own)
            }
            (None, Some(b)) => merge(load_layers(Source::Preset(b.to_string()), &mut stack)?, own),
            (None, None) => own,
        };
        Self::from_table(merged, "<inline>").map_err(|e| locate(e, text, "<inline>"))
    }

    fn from_table(mut table: toml::Table, origin: &str) -> Result<Self, ConfigError> {
        table.remove("include");
        let cfg = SimConfig::deserialize(toml::Value::Table(table))
            .map_err(|e| ConfigError::Parse { origin: origin.to_string(), message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn tiles(&self) -> usize {
        self.system.tile_cols * self.system.tile_rows
    }

    pub fn content(&self) -> ContentConfig {
        let s = &self.system;
        ContentConfig {
            cols: s.tile_cols,
            rows: s.tile_rows,
            frames_per_gop: s.frames_per_gop,
            tile_bits_max: s.tile_bits_max,
            tile_bits_min: s.tile_bits_min,
            cycles_per_bit: s.cycles_per_bit,
            resolution_ranges: [s.r1_range, s.r2_range],
            top_resolution: s.r3,
        }
    }

    pub fn attention_rule(&self) -> AttentionRule {
        AttentionRule {
            inner_radius: self.attention.inner_radius,
            mid_radius: self.attention.mid_radius,
        }
    }

    pub fn noise_watts(&self) -> f64 {
        dbm_to_watts(self.channel.noise_dbm)
    }

    pub fn user_position(&self, user: usize) -> [f64; 2] {
        let p = &self.channel.user_positions;
        p[user % p.len()]
    }

    pub fn user_distance(&self, user: usize) -> f64 {
        distance(self.user_position(user), self.channel.bs_position)
    }

    pub fn gaze_step_scale(&self, user: usize) -> f64 {
        let s = &self.attention.gaze_step_scales;
        s[user % s.len()]
    }

    /// Dimension of the normalized state vector, `13 K + 1`.
    pub fn state_dim(&self) -> usize {
        13 * self.system.users + 1
    }

    /// Dimension of the raw action vector, `4 K`.
    pub fn action_dim(&self) -> usize {
        4 * self.system.users
    }

    pub fn buffer_config(&self, mode: ReplayMode) -> BufferConfig {
        let a = &self.agent;
        BufferConfig {
            capacity: a.capacity,
            beta1: a.beta1,
            beta2: a.beta2,
            mu: a.mu,
            eps2: a.eps2,
            eps3: a.eps3,
            mode,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.system;
        check("system.users", s.users >= 1, "need at least one user")?;
        check("system.slots_per_round", s.slots_per_round >= 1, "must be >= 1")?;
        for (key, v) in [
            ("system.latency_threshold", s.latency_threshold),
            ("system.bandwidth", s.bandwidth),
            ("system.cpu_frequency", s.cpu_frequency),
            ("system.eps1", s.eps1),
            ("system.compression", s.compression),
            ("system.eps_share", s.eps_share),
            ("channel.tx_power", self.channel.tx_power),
            ("channel.path_loss_exp", self.channel.path_loss_exp),
            ("scales.qoe_scale", self.scales.qoe_scale),
            ("scales.latency_factor", self.scales.latency_factor),
            ("agent.lr_critic", self.agent.lr_critic),
            ("agent.lr_actor", self.agent.lr_actor),
            ("agent.reward_scale", self.agent.reward_scale),
        ] {
            check(key, v > 0.0 && v.is_finite(), "must be positive and finite")?;
        }
        check("system.eps_cap", (0.0..1.0).contains(&s.eps_cap), "must lie in [0, 1)")?;
        check("system.penalty_qoe", s.penalty_qoe >= 0.0, "must be non-negative")?;
        check("system.penalty_fairness", s.penalty_fairness >= 0.0, "must be non-negative")?;
        self.content()
            .validate()
            .map_err(|e| ConfigError::Invalid { key: "system".into(), reason: e.to_string() })?;
        check("channel.interference", self.channel.interference >= 0.0, "must be non-negative")?;
        check("channel.user_positions", !self.channel.user_positions.is_empty(), "must be non-empty")?;
        for k in 0..s.users {
            check("channel.user_positions", self.user_distance(k) > 0.0, "user placed on the BS")?;
        }
        let b = &self.bias;
        check("bias.rho", (0.0..=1.0).contains(&b.rho), "must lie in [0, 1]")?;
        check("bias.max_fraction", (0.0..1.0).contains(&b.max_fraction), "must lie in [0, 1)")?;
        check("bias.noise_std", b.noise_std >= 0.0, "must be non-negative")?;
        let at = &self.attention;
        check("attention.mid_radius", at.inner_radius < at.mid_radius, "must exceed inner_radius")?;
        check("attention.gaze_step_scales", !at.gaze_step_scales.is_empty(), "must be non-empty")?;
        for &x in &at.gaze_step_scales {
            check("attention.gaze_step_scales", x > 0.0 && x <= 0.5, "each must lie in (0, 0.5]")?;
        }
        let a = &self.agent;
        check("agent.gamma", (0.0..1.0).contains(&a.gamma), "must lie in [0, 1)")?;
        check("agent.tau", a.tau > 0.0 && a.tau <= 1.0, "must lie in (0, 1]")?;
        check("agent.capacity", a.capacity > 0, "must be positive")?;
        check("agent.batch", a.batch >= 1 && a.batch <= a.capacity, "must lie in [1, capacity]")?;
        check("agent.hidden", a.hidden.iter().all(|&w| w > 0), "widths must be positive")?;
        check("agent.beta1", a.beta1 >= 0.0, "must be non-negative")?;
        check("agent.beta2", (0.0..=1.0).contains(&a.beta2), "must lie in [0, 1]")?;
        check("agent.mu", a.mu > 0.0 && a.mu < 1.0, "must lie in (0, 1)")?;
        check("agent.eps2", a.eps2 > 0.0, "must be positive")?;
        check("agent.eps3", a.eps3 > 0.0, "must be positive")?;
        check("agent.explore_std", a.explore_std >= 0.0, "must be non-negative")?;
        check("agent.explore_decay", a.explore_decay > 0.0 && a.explore_decay <= 1.0, "must lie in (0, 1]")?;
        check("agent.explore_floor", a.explore_floor >= 0.0, "must be non-negative")?;
        Ok(())
    }

    /// Overrides one sweepable parameter.
    pub fn set_parameter(&mut self, name: &str, value: f64) -> Result<(), ConfigError> {
        match name {
            "beta1" => self.agent.beta1 = value,
            "beta2" => self.agent.beta2 = value,
            "mu" => self.agent.mu = value,
            "t_th" => self.system.latency_threshold = value,
            "hfqoe_th" => self.system.hfqoe_threshold = value,
            "omega" => self.system.compression = value,
            "users" => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(ConfigError::Invalid {
                        key: "users".into(),
                        reason: format!("{value} is not a positive integer"),
                    });
                }
                self.system.users = value as usize;
            }
            "f_max" => self.system.cpu_frequency = value,
            "b_max" => self.system.bandwidth = value,
            other => return Err(ConfigError::UnknownParameter(other.to_string())),
        }
        self.validate()
    }
}

pub const SWEEPABLE: [&str; 9] =
    ["beta1", "beta2", "mu", "t_th", "hfqoe_th", "omega", "users", "f_max", "b_max"];

fn check(key: &str, ok: bool, reason: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Invalid { key: key.to_string(), reason: reason.to_string() })
    }
}

enum Source {
    Preset(String),
    File(PathBuf),
}

fn preset_text(name: &str) -> Option<&'static str> {
    match name {
        "paper-table1" => Some(PAPER_TABLE1),
        "desk-scale" => Some(DESK_SCALE),
        _ => None,
    }
}

fn load_layers(source: Source, stack: &mut Vec<String>) -> Result<toml::Table, ConfigError> {
    let (key, text, origin, dir) = match &source {
        Source::Preset(name) => {
            let text = preset_text(name).ok_or_else(|| ConfigError::UnknownPreset(name.clone()))?;
            (name.clone(), text.to_string(), format!("preset `{name}`"), None)
        }
        Source::File(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|source| ConfigError::Io { path: path.clone(), source })?;
            let dir = path.parent().map(Path::to_path_buf);
            (path.display().to_string(), text, path.display().to_string(), dir)
        }
    };
    if stack.contains(&key) {
        return Err(ConfigError::IncludeCycle(key));
    }
    stack.push(key);
    let own = parse_table(&text, &origin)?;
    let merged = match own.get("include").and_then(|v| v.as_str()) {
        Some(inc) => {
            let base_source = if preset_text(inc).is_some() {
                Source::Preset(inc.to_string())
            } else {
                let base = dir.unwrap_or_default().join(inc);
                if !base.exists() && !inc.ends_with(".toml") {
                    return Err(ConfigError::UnknownPreset(inc.to_string()));
                }
                Source::File(base)
            };
            merge(load_layers(base_source, stack)?, own)
        }
        None => own,
    };
    stack.pop();
    Ok(merged)
}

fn parse_table(text: &str, origin: &str) -> Result<toml::Table, ConfigError> {
    text.parse::<toml::Table>()
        .map_err(|e| ConfigError::Parse { origin: origin.to_string(), message: e.to_string() })
}

fn merge(mut base: toml::Table, overlay: toml::Table) -> toml::Table {
    for (k, v) in overlay {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => {
                let merged = merge(std::mem::take(b), o);
                *b = merged;
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
    base
}

/// Adds a line number for the offending key when it appears in `text`.
fn locate(err: ConfigError, text: &str, origin: &str) -> ConfigError {
    let key = match &err {
        ConfigError::Parse { message, .. } => {
            message.split('`').nth(1).map(str::to_string)
        }
        ConfigError::Invalid { key, .. } => key.rsplit('.').next().map(str::to_string),
        _ => None,
    };
    let Some(key) = key else { return err };
    let line = text.lines().position(|l| {
        let l = l.trim_start();
        l.starts_with(&key) && l[key.len()..].trim_start().starts_with('=')
    });
    match (err, line) {
        (ConfigError::Parse { message, .. }, Some(n)) => {
            ConfigError::Parse { origin: format!("{origin}:{}", n + 1), message }
        }
        (ConfigError::Invalid { key, reason }, Some(n)) => {
            ConfigError::Invalid { key, reason: format!("{reason} ({origin}:{})", n + 1) }
        }
        (e, _) => e,
    }
}
