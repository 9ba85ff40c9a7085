use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{average_allocation, fixed_2k, AgentConfig, ContinualSchedule, DdpgAgent, Variant};
use crate::config::SimConfig;
use crate::env::content::AttentionProfile;
use crate::env::Environment;
use crate::gaze::{compose_long_trace, AttentionFeed, GazeSource, GazeTrace, GazeWalker};
use crate::mdp::{
    decode_action, normalize_state, reward, Observation, RewardSpec, StateScales, UserObservation, UserTwin,
};
use crate::metrics::{Counters, MetricsLog, SlotRecord, UserSlot};
use crate::replay::Transition;

/// Where user gaze comes from.
#[derive(Debug, Clone)]
pub enum GazeInput {
    /// Reflected random walks, one per user.
    Synthetic,
    /// A recorded corpus, recomposed into one long trace per user.
    Traces(Vec<GazeTrace>),
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub variant: Variant,
    pub seed: u64,
    pub rounds: usize,
    pub gaze: GazeInput,
}

impl RunOptions {
    pub fn new(variant: Variant, seed: u64, rounds: usize) -> Self {
        Self { variant, seed, rounds, gaze: GazeInput::Synthetic }
    }
}

fn user_seed(seed: u64, user: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(user as u64 + 1)
}

fn attention_feeds(cfg: &SimConfig, opts: &RunOptions) -> Vec<AttentionFeed> {
    let s = &cfg.system;
    let frames = s.frames_per_gop as usize;
    (0..s.users)
        .map(|k| {
            let source = match &opts.gaze {
                GazeInput::Synthetic => {
                    GazeSource::Synthetic(GazeWalker::new(cfg.gaze_step_scale(k), user_seed(opts.seed, k)))
                }
                GazeInput::Traces(corpus) => {
                    let target = (frames * s.slots_per_round).max(frames);
                    let trace = compose_long_trace(corpus, target, user_seed(opts.seed, k))
                        .expect("corpus validated by caller");
                    GazeSource::Replay { trace, cursor: 0 }
                }
            };
            AttentionFeed::new(source, cfg.attention_rule(), s.tile_cols, s.tile_rows, frames)
        })
        .collect()
}

/// Everything the twins know going into a slot.
struct TwinState {
    previous: Vec<AttentionProfile>,
    current: Vec<AttentionProfile>,
    qoe_before: Vec<f64>,
    qoe_last: Vec<f64>,
    last: Vec<[f64; 5]>,
    hfqoe: f64,
}

impl TwinState {
    fn observation(&self) -> Observation {
        let users = (0..self.current.len())
            .map(|k| {
                let [rate, cpu, download, render, total] = self.last[k];
                UserObservation {
                    previous: UserTwin::new(&self.previous[k], self.qoe_before[k]),
                    current: UserTwin::new(&self.current[k], self.qoe_last[k]),
                    rate,
                    cpu,
                    download,
                    render,
                    total,
                }
            })
            .collect();
        Observation { users, hfqoe: self.hfqoe }
    }
}

/// Continual twin-driven control loop.
///
/// Each round redraws the twin calibration biases and decays exploration; each
/// slot acts, steps the cell, stores the transition and trains once the buffer
/// holds a full batch. Returns the log and, for learning variants, the agent.
pub fn run_continual(cfg: &SimConfig, opts: &RunOptions) -> (MetricsLog, Option<DdpgAgent>) {
    let schedule = ContinualSchedule::from_sim(cfg, opts.rounds);
    let k = cfg.system.users;
    let content = cfg.content();
    let scales = StateScales::from_config(cfg);
    let spec = RewardSpec::from_config(cfg);
    let (bandwidth, cpu) = (cfg.system.bandwidth, cfg.system.cpu_frequency);
    let variant = opts.variant;
    let agent_cfg = AgentConfig::from_sim(cfg, variant);

    let mut env = Environment::new(cfg, opts.seed);
    let mut feeds = attention_feeds(cfg, opts);
    let mut agent = variant
        .is_learning()
        .then(|| DdpgAgent::new(agent_cfg.clone(), cfg.state_dim(), cfg.action_dim(), opts.seed).expect("validated"));
    let mut explore_rng = ChaCha8Rng::seed_from_u64(opts.seed);
    explore_rng.set_stream(4);
    let fixed = fixed_2k(cfg);

    let first: Vec<AttentionProfile> = feeds.iter_mut().map(|f| f.next_profile()).collect();
    let mut twin = TwinState {
        previous: first.clone(),
        current: first,
        qoe_before: vec![0.0; k],
        qoe_last: vec![0.0; k],
        last: vec![[0.0; 5]; k],
        hfqoe: 1.0,
    };
    let mut log = MetricsLog {
        variant,
        seed: opts.seed,
        users: k,
        latency_cap: 10.0 * cfg.system.latency_threshold,
        slots: Vec::with_capacity(schedule.total_slots()),
        rounds: Vec::with_capacity(schedule.rounds),
        train_times: Vec::new(),
        counters: Counters::default(),
    };
    let (mut state, clipped) = normalize_state(&twin.observation(), &scales);
    log.counters.clipped_state_entries += clipped as u64;

    let mut t = 0;
    for round in 0..schedule.rounds {
        env.refresh_biases();
        let training = match variant {
            Variant::OfflineDdpg => round < schedule.offline_rounds,
            v => v.is_learning(),
        };
        let std = if training { agent_cfg.exploration.std_at(round) } else { 0.0 };
        let round_start = log.slots.len();
        for _ in 0..schedule.delta_t {
            let (raw, action) = match (&agent, variant) {
                (Some(a), _) => {
                    let raw = a.act(&state, std, &mut explore_rng);
                    let action = decode_action(&raw, &content, bandwidth, cpu, cfg.system.eps_share, cfg.system.eps_cap);
                    if !action.is_feasible(&content, bandwidth, cpu, 1e-9) {
                        log.counters.infeasible_actions += 1;
                    }
                    (Some(raw), action)
                }
                (None, Variant::Fixed2k) => (None, fixed.clone()),
                (None, _) => (None, average_allocation(&twin.current, cfg)),
            };
            let outcome = env.step(&twin.current, &action);
            let qoe = outcome.qoe();
            let r = reward(&qoe, outcome.hfqoe, &spec);
            log.counters.calibration_failures += outcome.calibration_failures() as u64;

            let next: Vec<AttentionProfile> = feeds.iter_mut().map(|f| f.next_profile()).collect();
            twin.previous = std::mem::replace(&mut twin.current, next);
            twin.qoe_before = std::mem::replace(&mut twin.qoe_last, qoe);
            for (j, u) in outcome.users.iter().enumerate() {
                twin.last[j] = [
                    u.rate,
                    action.users[j].cpu,
                    u.latency.capped_download(),
                    u.latency.capped_render(),
                    u.latency.capped_total(),
                ];
            }
            twin.hfqoe = outcome.hfqoe;
            let (next_state, clipped) = normalize_state(&twin.observation(), &scales);
            log.counters.clipped_state_entries += clipped as u64;

            if let (Some(a), Some(raw)) = (agent.as_mut(), raw) {
                if training {
                    a.remember(Transition {
                        state: state.0.clone(),
                        action: raw.0,
                        reward: r.reward * agent_cfg.reward_scale,
                        next_state: next_state.0.clone(),
                    });
                    if a.ready() {
                        let started = Instant::now();
                        let d = a.train_step().expect("buffer holds a batch");
                        log.train_times.push(started.elapsed().as_secs_f64());
                        log.counters.skipped_optimizer_steps += d.skipped as u64;
                        log.counters.train_steps += 1;
                    }
                }
            }

            log.slots.push(SlotRecord {
                t,
                round,
                users: outcome
                    .users
                    .iter()
                    .map(|u| UserSlot {
                        download: u.latency.download,
                        render: u.latency.render,
                        total: u.latency.total,
                        delivered: u.latency.delivered,
                        qoe: u.qoe.qoe,
                    })
                    .collect(),
                hfqoe: outcome.hfqoe,
                reward: r.reward,
                sum_qoe: r.sum_qoe,
                qoe_violations: r.qoe_violations,
                fairness_violation: r.fairness_violation,
            });
            state = next_state;
            t += 1;
        }
        let rec = log.round_record(round, &log.slots[round_start..], std);
        log.rounds.push(rec);
    }
    if let Some(a) = &agent {
        log.counters.stale_priority_updates = a.buffer().stale_updates();
    }
    (log, agent)
}
