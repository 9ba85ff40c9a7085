use std::path::Path;

use super::{BufferConfig, ReplayBuffer, ReplayEntry, ReplayError, ReplayMode, Transition};
use crate::codec::{Reader, Writer};

const MAGIC: &[u8; 8] = b"VRTWRPLY";
pub const SNAPSHOT_VERSION: u32 = 1;

fn rebuild_tree(b: &mut ReplayBuffer) {
    if b.config.mode == ReplayMode::Uniform {
        return;
    }
    for i in 0..b.entries.len() {
        let p = b.entries[i].priority;
        b.tree.set(i, p.powf(b.config.beta1), p);
    }
}

fn mode_tag(m: ReplayMode) -> u8 {
    match m {
        ReplayMode::Uniform => 0,
        ReplayMode::Per => 1,
        ReplayMode::Fper => 2,
    }
}

impl ReplayBuffer {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(MAGIC, SNAPSHOT_VERSION);
        let c = &self.config;
        w.u8(mode_tag(c.mode));
        w.u64(c.capacity as u64);
        for v in [c.beta1, c.beta2, c.mu, c.eps2, c.eps3] {
            w.f64(v);
        }
        w.u64(self.cursor as u64);
        w.u64(self.pushes);
        w.u64(self.stale_updates);
        w.u64(self.entries.len() as u64);
        for (e, &g) in self.entries.iter().zip(&self.generations) {
            w.u64(g);
            w.f64(e.td_abs);
            w.u32(e.replays);
            w.f64(e.priority);
            w.f64(e.transition.reward);
            w.f64s(&e.transition.state);
            w.f64s(&e.transition.action);
            w.f64s(&e.transition.next_state);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ReplayError> {
        Self::decode(bytes).map_err(ReplayError::CorruptSnapshot)
    }

    fn decode(bytes: &[u8]) -> Result<Self, String> {
        let mut r = Reader::open(bytes, MAGIC, SNAPSHOT_VERSION)?;
        let mode = match r.u8()? {
            0 => ReplayMode::Uniform,
            1 => ReplayMode::Per,
            2 => ReplayMode::Fper,
            t => return Err(format!("unknown mode tag {t}")),
        };
        let capacity = r.usize()?;
        let config = BufferConfig {
            capacity,
            beta1: r.f64()?,
            beta2: r.f64()?,
            mu: r.f64()?,
            eps2: r.f64()?,
            eps3: r.f64()?,
            mode,
        };
        let mut b = ReplayBuffer::new(config).map_err(|e| e.to_string())?;
        b.cursor = r.usize()?;
        b.pushes = r.u64()?;
        b.stale_updates = r.u64()?;
        let len = r.usize()?;
        if len > capacity || b.cursor >= capacity {
            return Err("entry count or cursor exceeds capacity".into());
        }
        for _ in 0..len {
            let generation = r.u64()?;
            let td_abs = r.f64()?;
            let replays = r.u32()?;
            let priority = r.f64()?;
            if !(priority > 0.0 && priority.is_finite()) {
                return Err(format!("invalid priority {priority}"));
            }
            let reward = r.f64()?;
            let state = r.f64s()?;
            let action = r.f64s()?;
            let next_state = r.f64s()?;
            b.entries.push(ReplayEntry {
                transition: Transition { state, action, reward, next_state },
                td_abs,
                replays,
                priority,
            });
            b.generations.push(generation);
        }
        r.finish()?;
        rebuild_tree(&mut b);
        Ok(b)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, ReplayError> {
        let bytes = std::fs::read(path).map_err(|e| ReplayError::CorruptSnapshot(e.to_string()))?;
        Self::from_bytes(&bytes)
    }
}
