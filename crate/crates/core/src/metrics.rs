//! Per-slot and per-round run records and their file formats.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::Variant;

/// Formats a real with at most 9 significant digits.
pub fn fmt_real(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("scientific notation parses");
    format!("{rounded}")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserSlot {
    pub download: f64,
    pub render: f64,
    pub total: f64,
    pub delivered: bool,
    pub qoe: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub t: usize,
    pub round: usize,
    pub users: Vec<UserSlot>,
    pub hfqoe: f64,
    pub reward: f64,
    pub sum_qoe: f64,
    pub qoe_violations: u32,
    pub fairness_violation: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub mean_reward: f64,
    /// Mean end-to-end latency with failures capped at ten deadlines.
    pub mean_latency: f64,
    pub mean_download: f64,
    pub mean_render: f64,
    /// Fraction of user-slots delivered within the deadline.
    pub success_rate: f64,
    pub mean_qoe: f64,
    /// hfQoE at the end of the round.
    pub hfqoe: f64,
    pub explore_std: f64,
}

/// Anomalies tallied over a run; none of them abort it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counters {
    pub clipped_state_entries: u64,
    pub calibration_failures: u64,
    pub stale_priority_updates: u64,
    pub skipped_optimizer_steps: u64,
    pub infeasible_actions: u64,
    pub train_steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsLog {
    pub variant: Variant,
    pub seed: u64,
    pub users: usize,
    pub latency_cap: f64,
    pub slots: Vec<SlotRecord>,
    pub rounds: Vec<RoundRecord>,
    /// Wall-clock seconds per training step, in order.
    pub train_times: Vec<f64>,
    pub counters: Counters,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub steps: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
}

/// Mean and standard deviation of step times after dropping `warmup` steps.
pub fn timing_stats(times: &[f64], warmup: usize) -> TimingStats {
    let kept = &times[warmup.min(times.len())..];
    let n = kept.len();
    if n == 0 {
        return TimingStats { steps: 0, mean_ms: 0.0, std_ms: 0.0 };
    }
    let mean = kept.iter().sum::<f64>() / n as f64;
    let var = kept.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n as f64;
    TimingStats { steps: n, mean_ms: mean * 1e3, std_ms: var.sqrt() * 1e3 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub variant: Variant,
    pub seed: u64,
    pub slots: usize,
    pub rounds: usize,
    pub total_reward: f64,
    pub mean_reward: f64,
    pub mean_latency: f64,
    pub success_rate: f64,
    pub mean_qoe: f64,
    pub final_hfqoe: f64,
    pub final_window_rounds: usize,
    pub final_window_reward: f64,
    pub counters: Counters,
}

impl MetricsLog {
    /// Aggregates the slots of one round into a [`RoundRecord`].
    pub fn round_record(&self, round: usize, slots: &[SlotRecord], explore_std: f64) -> RoundRecord {
        let n = slots.len().max(1) as f64;
        let user_slots = slots.iter().flat_map(|s| s.users.iter());
        let m = (slots.len() * self.users).max(1) as f64;
        let (mut lat, mut dl, mut rd, mut ok, mut q) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for u in user_slots {
            lat += u.total.min(self.latency_cap);
            dl += u.download.min(self.latency_cap);
            rd += u.render.min(self.latency_cap);
            ok += u.delivered as u8 as f64;
            q += u.qoe;
        }
        RoundRecord {
            round,
            mean_reward: slots.iter().map(|s| s.reward).sum::<f64>() / n,
            mean_latency: lat / m,
            mean_download: dl / m,
            mean_render: rd / m,
            success_rate: ok / m,
            mean_qoe: q / m,
            hfqoe: slots.last().map_or(1.0, |s| s.hfqoe),
            explore_std,
        }
    }

    /// Mean of the per-round mean reward over the last `window` rounds.
    pub fn final_window_reward(&self, window: usize) -> f64 {
        let w = window.min(self.rounds.len()).max(1);
        let tail = &self.rounds[self.rounds.len().saturating_sub(w)..];
        tail.iter().map(|r| r.mean_reward).sum::<f64>() / tail.len().max(1) as f64
    }

    pub fn summary(&self, window: usize) -> Summary {
        let slots = self.slots.len().max(1) as f64;
        let m = (self.slots.len() * self.users).max(1) as f64;
        let us = || self.slots.iter().flat_map(|s| s.users.iter());
        let total_reward: f64 = self.slots.iter().map(|s| s.reward).sum();
        Summary {
            variant: self.variant,
            seed: self.seed,
            slots: self.slots.len(),
            rounds: self.rounds.len(),
            total_reward,
            mean_reward: total_reward / slots,
            mean_latency: us().map(|u| u.total.min(self.latency_cap)).sum::<f64>() / m,
            success_rate: us().filter(|u| u.delivered).count() as f64 / m,
            mean_qoe: us().map(|u| u.qoe).sum::<f64>() / m,
            final_hfqoe: self.slots.last().map_or(1.0, |s| s.hfqoe),
            final_window_rounds: window.min(self.rounds.len()),
            final_window_reward: self.final_window_reward(window),
            counters: self.counters,
        }
    }

    pub fn slots_csv(&self) -> String {
        let mut header = vec!["t", "round", "reward", "sum_qoe", "hfqoe", "qoe_violations", "fairness_violation"]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>();
        for k in 0..self.users {
            for col in ["download", "render", "total", "delivered", "qoe"] {
                header.push(format!("{col}_{k}"));
            }
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&header).expect("in-memory write");
        for s in &self.slots {
            let mut row = vec![
                s.t.to_string(),
                s.round.to_string(),
                fmt_real(s.reward),
                fmt_real(s.sum_qoe),
                fmt_real(s.hfqoe),
                s.qoe_violations.to_string(),
                s.fairness_violation.to_string(),
            ];
            for u in &s.users {
                row.extend([
                    fmt_real(u.download),
                    fmt_real(u.render),
                    fmt_real(u.total),
                    (u.delivered as u8).to_string(),
                    fmt_real(u.qoe),
                ]);
            }
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("ascii csv")
    }

    pub fn rounds_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "round",
            "mean_reward",
            "mean_latency",
            "mean_download",
            "mean_render",
            "success_rate",
            "mean_qoe",
            "hfqoe",
            "explore_std",
        ])
        .expect("in-memory write");
        for r in &self.rounds {
            w.write_record([
                r.round.to_string(),
                fmt_real(r.mean_reward),
                fmt_real(r.mean_latency),
                fmt_real(r.mean_download),
                fmt_real(r.mean_render),
                fmt_real(r.success_rate),
                fmt_real(r.mean_qoe),
                fmt_real(r.hfqoe),
                fmt_real(r.explore_std),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("ascii csv")
    }

    pub fn timing_csv(&self) -> String {
        let mut out = String::from("step,seconds\n");
        for (i, t) in self.train_times.iter().enumerate() {
            out.push_str(&format!("{i},{}\n", fmt_real(*t)));
        }
        out
    }

    /// Writes `slots.csv`, `rounds.csv`, `timing.csv` and `summary.json` into `dir`.
    pub fn write_dir(&self, dir: &Path, window: usize) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("slots.csv"), self.slots_csv())?;
        std::fs::write(dir.join("rounds.csv"), self.rounds_csv())?;
        std::fs::write(dir.join("timing.csv"), self.timing_csv())?;
        let mut f = std::fs::File::create(dir.join("summary.json"))?;
        serde_json::to_writer_pretty(&mut f, &self.summary(window))?;
        f.write_all(b"\n")
    }
}

/// Reads a slots CSV back into records.
pub fn parse_slots_csv(text: &str, users: usize) -> Result<Vec<SlotRecord>, String> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let f = |i: usize| -> Result<f64, String> {
            rec.get(i)
                .ok_or(format!("row {line}: missing column {i}"))?
                .parse::<f64>()
                .map_err(|e| format!("row {line} column {i}: {e}"))
        };
        let mut us = Vec::with_capacity(users);
        for k in 0..users {
            let o = 7 + 5 * k;
            us.push(UserSlot {
                download: f(o)?,
                render: f(o + 1)?,
                total: f(o + 2)?,
                delivered: f(o + 3)? != 0.0,
                qoe: f(o + 4)?,
            });
        }
        out.push(SlotRecord {
            t: f(0)? as usize,
            round: f(1)? as usize,
            reward: f(2)?,
            sum_qoe: f(3)?,
            hfqoe: f(4)?,
            qoe_violations: f(5)? as u32,
            fairness_violation: f(6)? as u32,
            users: us,
        });
    }
    Ok(out)
}
