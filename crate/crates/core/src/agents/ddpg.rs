use std::path::Path;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::AgentConfig;
use crate::codec::{Reader, Writer};
use crate::mdp::{RawAction, StateVector};
use crate::nn::{critic_loss, soft_update, Activation, Adam, Gradients, Mlp, MlpSpec, NnError};
use crate::replay::{ReplayBuffer, ReplayError, Transition};

const MAGIC: &[u8; 8] = b"VRTWDDPG";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Scale of the actor's final layer at initialization, so early actions sit near 0.5.
const ACTOR_FINAL_SCALE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainDiagnostics {
    pub critic_loss: f64,
    pub mean_q: f64,
    pub mean_abs_td: f64,
    pub mean_weight: f64,
    /// Optimizer updates rejected for non-finite gradients in this step.
    pub skipped: u32,
}

/// Actor, critic, their targets, optimizers and the replay buffer.
#[derive(Debug, Clone)]
pub struct DdpgAgent {
    cfg: AgentConfig,
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_target: Mlp,
    pub critic_target: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
    buffer: ReplayBuffer,
    sample_rng: ChaCha8Rng,
    state_dim: usize,
    action_dim: usize,
    train_steps: u64,
    skipped_steps: u64,
}

fn rows(data: &[&[f64]], width: usize) -> Array2<f64> {
    let mut a = Array2::zeros((data.len(), width));
    for (mut row, d) in a.rows_mut().into_iter().zip(data) {
        row.assign(&ArrayView2::from_shape((1, width), d).expect("row width").row(0));
    }
    a
}

fn join(states: &Array2<f64>, actions: &Array2<f64>) -> Array2<f64> {
    concatenate(Axis(1), &[states.view(), actions.view()]).expect("equal batch sizes")
}

/// Gradient of `-(1/B) sum_i w_i Q(s_i, actor(s_i))` w.r.t. the actor parameters,
/// with the critic held fixed. Returns the gradient and the weighted mean Q.
pub fn policy_gradient(
    actor: &Mlp,
    critic: &Mlp,
    states: &Array2<f64>,
    weights: &[f64],
) -> Result<(Gradients, f64), NnError> {
    let b = states.nrows();
    let a_cache = actor.forward_cached(states.clone())?;
    let c_cache = critic.forward_cached(join(states, a_cache.output()))?;
    let q = c_cache.output();
    let mut upstream = Array2::zeros((b, 1));
    let mut objective = 0.0;
    for i in 0..b {
        upstream[[i, 0]] = -weights[i] / b as f64;
        objective += weights[i] * q[[i, 0]] / b as f64;
    }
    let (_, input_grad) = critic.backward(&c_cache, &upstream)?;
    let action_grad = input_grad.slice(s![.., states.ncols()..]).to_owned();
    let (grads, _) = actor.backward(&a_cache, &action_grad)?;
    Ok((grads, objective))
}

impl DdpgAgent {
    pub fn new(cfg: AgentConfig, state_dim: usize, action_dim: usize, seed: u64) -> Result<Self, ReplayError> {
        let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
        init_rng.set_stream(3);
        let mut sample_rng = ChaCha8Rng::seed_from_u64(seed);
        sample_rng.set_stream(5);
        let actor = Mlp::new(
            MlpSpec::new(state_dim, &cfg.hidden, action_dim, Activation::Sigmoid),
            ACTOR_FINAL_SCALE,
            &mut init_rng,
        );
        let critic = Mlp::new(
            MlpSpec::new(state_dim + action_dim, &cfg.hidden, 1, Activation::Identity),
            1.0,
            &mut init_rng,
        );
        Ok(Self {
            actor_opt: Adam::new(&actor, cfg.lr_actor),
            critic_opt: Adam::new(&critic, cfg.lr_critic),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            buffer: ReplayBuffer::new(cfg.buffer)?,
            sample_rng,
            state_dim,
            action_dim,
            train_steps: 0,
            skipped_steps: 0,
            cfg,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn buffer_mut(&mut self) -> &mut ReplayBuffer {
        &mut self.buffer
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn skipped_steps(&self) -> u64 {
        self.skipped_steps
    }

    pub fn ready(&self) -> bool {
        self.buffer.len() >= self.cfg.batch
    }

    /// Policy output plus Gaussian noise of standard deviation `std`, clipped to `[0, 1]`.
    pub fn act<R: Rng + ?Sized>(&self, state: &StateVector, std: f64, rng: &mut R) -> RawAction {
        let mut a = self.actor.forward(&state.0).expect("state width matches actor");
        if std > 0.0 {
            for x in &mut a {
                let n: f64 = StandardNormal.sample(rng);
                *x = (*x + std * n).clamp(0.0, 1.0);
            }
        }
        RawAction(a)
    }

    /// `y = r + gamma Q'(s', actor'(s'))`.
    pub fn td_target(&self, reward: f64, next_state: &[f64]) -> f64 {
        let a = self.actor_target.forward(next_state).expect("state width");
        let mut x = next_state.to_vec();
        x.extend(a);
        reward + self.cfg.gamma * self.critic_target.forward(&x).expect("critic width")[0]
    }

    /// `delta = y - Q(s, a)`.
    pub fn td_error(&self, y: f64, state: &[f64], action: &[f64]) -> f64 {
        let mut x = state.to_vec();
        x.extend_from_slice(action);
        y - self.critic.forward(&x).expect("critic width")[0]
    }

    pub fn remember(&mut self, t: Transition) {
        debug_assert_eq!(t.state.len(), self.state_dim);
        debug_assert_eq!(t.action.len(), self.action_dim);
        self.buffer.push(t);
    }

    /// One critic update, one actor update, priority refresh and soft target updates.
    pub fn train_step(&mut self) -> Result<TrainDiagnostics, ReplayError> {
        let batch = self.buffer.sample(self.cfg.batch, &mut self.sample_rng)?;
        let ts = &batch.transitions;
        let states = rows(&ts.iter().map(|t| t.state.as_slice()).collect::<Vec<_>>(), self.state_dim);
        let actions = rows(&ts.iter().map(|t| t.action.as_slice()).collect::<Vec<_>>(), self.action_dim);
        let next = rows(&ts.iter().map(|t| t.next_state.as_slice()).collect::<Vec<_>>(), self.state_dim);

        let next_actions = self.actor_target.forward_batch(next.view()).expect("state width");
        let q_next = self.critic_target.forward_batch(join(&next, &next_actions).view()).expect("critic width");
        let targets: Vec<f64> = ts.iter().zip(q_next.column(0)).map(|(t, q)| t.reward + self.cfg.gamma * q).collect();

        let cache = self.critic.forward_cached(join(&states, &actions)).expect("critic width");
        let q = cache.output();
        let (loss, upstream) = critic_loss(q, &targets, &batch.weights).expect("batch shapes");
        let td_abs: Vec<f64> = targets.iter().zip(q.column(0)).map(|(y, q)| (y - q).abs()).collect();
        let mean_q = q.mean().unwrap_or(0.0);
        let (grads, _) = self.critic.backward(&cache, &upstream).expect("critic shapes");
        let mut skipped = 0;
        if self.critic_opt.step(&mut self.critic, &grads).is_err() {
            skipped += 1;
        }

        let (grads, _) = policy_gradient(&self.actor, &self.critic, &states, &batch.weights).expect("actor shapes");
        if self.actor_opt.step(&mut self.actor, &grads).is_err() {
            skipped += 1;
        }

        self.buffer.update_priorities(&batch.tickets, &td_abs);
        soft_update(&mut self.actor_target, &self.actor, self.cfg.tau).expect("same shapes");
        soft_update(&mut self.critic_target, &self.critic, self.cfg.tau).expect("same shapes");
        self.train_steps += 1;
        self.skipped_steps += skipped as u64;
        let b = td_abs.len() as f64;
        Ok(TrainDiagnostics {
            critic_loss: loss,
            mean_q,
            mean_abs_td: td_abs.iter().sum::<f64>() / b,
            mean_weight: batch.weights.iter().sum::<f64>() / b,
            skipped,
        })
    }

    /// Serializes all four networks and both optimizer states.
    pub fn checkpoint_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(MAGIC, CHECKPOINT_VERSION);
        for net in [&self.actor, &self.critic, &self.actor_target, &self.critic_target] {
            net.write_into(&mut w);
        }
        self.actor_opt.write_into(&mut w);
        self.critic_opt.write_into(&mut w);
        w.u64(self.train_steps);
        w.u64(self.skipped_steps);
        w.finish()
    }

    /// Restores networks and optimizers; the shapes must match this agent.
    pub fn restore_checkpoint(&mut self, bytes: &[u8]) -> Result<(), NnError> {
        let corrupt = NnError::CorruptCheckpoint;
        let mut r = Reader::open(bytes, MAGIC, CHECKPOINT_VERSION).map_err(corrupt)?;
        let mut nets = Vec::with_capacity(4);
        for expected in [&self.actor, &self.critic, &self.actor_target, &self.critic_target] {
            let net = Mlp::read_from(&mut r).map_err(corrupt)?;
            if net.spec() != expected.spec() {
                return Err(NnError::CorruptCheckpoint("network shape differs from agent".into()));
            }
            nets.push(net);
        }
        let actor_opt = Adam::read_from(&mut r, &nets[0]).map_err(corrupt)?;
        let critic_opt = Adam::read_from(&mut r, &nets[1]).map_err(corrupt)?;
        let train_steps = r.u64().map_err(corrupt)?;
        let skipped_steps = r.u64().map_err(corrupt)?;
        r.finish().map_err(corrupt)?;
        let mut it = nets.into_iter();
        self.actor = it.next().unwrap();
        self.critic = it.next().unwrap();
        self.actor_target = it.next().unwrap();
        self.critic_target = it.next().unwrap();
        self.actor_opt = actor_opt;
        self.critic_opt = critic_opt;
        self.train_steps = train_steps;
        self.skipped_steps = skipped_steps;
        Ok(())
    }

    pub fn save_checkpoint(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.checkpoint_bytes())
    }

    pub fn load_checkpoint(&mut self, path: &Path) -> Result<(), NnError> {
        let bytes = std::fs::read(path).map_err(|e| NnError::CorruptCheckpoint(e.to_string()))?;
        self.restore_checkpoint(&bytes)
    }
}
