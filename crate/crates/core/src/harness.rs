//! Experiment commands: single runs, variant comparisons, parameter sweeps,
//! operation-time benchmarks and gaze ingestion.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::agents::{run_continual, AgentConfig, DdpgAgent, GazeInput, RunOptions, Variant};
use crate::config::{ConfigError, SimConfig};
use crate::env::content::AttentionProfile;
use crate::gaze::{profiles_to_csv, read_trace_dir, AttentionFeed, GazeError, GazeSource, GazeWalker};
use crate::metrics::{fmt_real, timing_stats, MetricsLog, Summary};
use crate::replay::Transition;

/// Environment variable that overrides the default output directory.
pub const OUT_DIR_ENV: &str = "VRTWIN_OUT_DIR";
/// Rounds averaged for the headline reward of a run.
pub const FINAL_WINDOW: usize = 50;
/// Training steps excluded from operation-time statistics.
pub const TIMING_WARMUP: usize = 100;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Gaze(#[from] GazeError),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl HarnessError {
    /// Process exit code: 3 for configuration problems, 4 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Usage(_) => 3,
            HarnessError::Gaze(_) | HarnessError::Io { .. } => 4,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, contents).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write(path, text)
}

/// `--out-dir` if given, else the override variable, else `runs/`.
pub fn resolve_out_dir(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// A config file, else a named preset, else `desk-scale`.
pub fn load_config(path: Option<&Path>, preset: Option<&str>) -> Result<SimConfig, HarnessError> {
    Ok(match (path, preset) {
        (Some(p), _) => SimConfig::from_file(p)?,
        (None, Some(name)) => SimConfig::preset(name)?,
        (None, None) => SimConfig::desk_scale(),
    })
}

/// Gaze input for a run: the configured trace directory, if any.
pub fn gaze_input(cfg: &SimConfig, synthetic: bool) -> Result<GazeInput, HarnessError> {
    if synthetic || cfg.attention.trace_dir.is_empty() {
        return Ok(GazeInput::Synthetic);
    }
    let (traces, _) = read_trace_dir(Path::new(&cfg.attention.trace_dir))?;
    Ok(GazeInput::Traces(traces))
}

/// Runs one variant and writes metrics, summary, config and checkpoints under `out`.
pub fn cmd_run(cfg: &SimConfig, opts: &RunOptions, out: &Path) -> Result<Summary, HarnessError> {
    let (log, agent) = run_continual(cfg, opts);
    log.write_dir(out, FINAL_WINDOW).map_err(io_err(out))?;
    write(&out.join("config.toml"), cfg.to_toml())?;
    if let Some(agent) = agent {
        let ckpt = out.join("agent.ckpt");
        agent.save_checkpoint(&ckpt).map_err(io_err(&ckpt))?;
        let replay = out.join("replay.bin");
        agent.buffer().save(&replay).map_err(io_err(&replay))?;
    }
    Ok(log.summary(FINAL_WINDOW))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub variant: Variant,
    pub runs: usize,
    /// Mean over seeds of the final-window reward.
    pub reward: f64,
    /// Half-width of the 95% Student-t interval on `reward`.
    pub reward_ci95: f64,
    pub success_rate: f64,
    pub mean_latency: f64,
    pub mean_qoe: f64,
    pub hfqoe: f64,
    pub per_seed_reward: Vec<f64>,
}

/// Mean and 95% half-width of a small sample.
pub fn mean_ci95(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive dof").inverse_cdf(0.975);
    (mean, t * (var / n as f64).sqrt())
}

fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("variant,runs,reward,reward_ci95,success_rate,mean_latency,mean_qoe,hfqoe\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.variant,
            r.runs,
            fmt_real(r.reward),
            fmt_real(r.reward_ci95),
            fmt_real(r.success_rate),
            fmt_real(r.mean_latency),
            fmt_real(r.mean_qoe),
            fmt_real(r.hfqoe)
        ));
    }
    out
}

/// Final-window aggregates of one run.
fn window_stats(log: &MetricsLog, window: usize) -> [f64; 5] {
    let tail = &log.rounds[log.rounds.len().saturating_sub(window)..];
    let n = tail.len().max(1) as f64;
    let mean = |f: fn(&crate::metrics::RoundRecord) -> f64| tail.iter().map(f).sum::<f64>() / n;
    [
        mean(|r| r.mean_reward),
        mean(|r| r.success_rate),
        mean(|r| r.mean_latency),
        mean(|r| r.mean_qoe),
        mean(|r| r.hfqoe),
    ]
}

/// Every variant under every seed; one table sorted by reward, best first.
pub fn cmd_compare(
    cfg: &SimConfig,
    variants: &[Variant],
    seeds: &[u64],
    rounds: usize,
    gaze: &GazeInput,
    out: Option<&Path>,
) -> Result<Vec<ComparisonRow>, HarnessError> {
    let window = FINAL_WINDOW.min(rounds);
    let mut rows = Vec::with_capacity(variants.len());
    for &variant in variants {
        let mut stats = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let opts = RunOptions { variant, seed, rounds, gaze: gaze.clone() };
            let (log, _) = run_continual(cfg, &opts);
            if let Some(dir) = out {
                let run_dir = dir.join(format!("{variant}-seed{seed}"));
                log.write_dir(&run_dir, window).map_err(io_err(&run_dir))?;
            }
            stats.push(window_stats(&log, window));
        }
        let col = |i: usize| stats.iter().map(|s| s[i]).collect::<Vec<_>>();
        let mean = |i: usize| col(i).iter().sum::<f64>() / stats.len().max(1) as f64;
        let (reward, reward_ci95) = mean_ci95(&col(0));
        rows.push(ComparisonRow {
            variant,
            runs: seeds.len(),
            reward,
            reward_ci95,
            success_rate: mean(1),
            mean_latency: mean(2),
            mean_qoe: mean(3),
            hfqoe: mean(4),
            per_seed_reward: col(0),
        });
    }
    rows.sort_by(|a, b| b.reward.total_cmp(&a.reward));
    if let Some(dir) = out {
        write(&dir.join("compare.csv"), comparison_csv(&rows))?;
        write_json(&dir.join("compare.json"), &rows)?;
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: f64,
    pub seed: u64,
    pub mean_reward: f64,
    pub mean_latency: f64,
    pub mean_download: f64,
    pub mean_render: f64,
    pub success_rate: f64,
    pub mean_qoe: f64,
    pub hfqoe: f64,
}

/// One run per `(value, seed)`; metrics are averaged over the whole run.
pub fn cmd_sweep(
    cfg: &SimConfig,
    parameter: &str,
    values: &[f64],
    variant: Variant,
    seeds: &[u64],
    rounds: usize,
    out: Option<&Path>,
) -> Result<Vec<SweepRow>, HarnessError> {
    let mut rows = Vec::new();
    for &value in values {
        let mut c = cfg.clone();
        c.set_parameter(parameter, value)?;
        for &seed in seeds {
            let (log, _) = run_continual(&c, &RunOptions::new(variant, seed, rounds));
            let n = log.rounds.len().max(1) as f64;
            let mean = |f: fn(&crate::metrics::RoundRecord) -> f64| log.rounds.iter().map(f).sum::<f64>() / n;
            rows.push(SweepRow {
                parameter: parameter.to_string(),
                value,
                seed,
                mean_reward: mean(|r| r.mean_reward),
                mean_latency: mean(|r| r.mean_latency),
                mean_download: mean(|r| r.mean_download),
                mean_render: mean(|r| r.mean_render),
                success_rate: mean(|r| r.success_rate),
                mean_qoe: mean(|r| r.mean_qoe),
                hfqoe: log.slots.last().map_or(1.0, |s| s.hfqoe),
            });
        }
    }
    if let Some(dir) = out {
        let mut text = String::from(
            "parameter,value,seed,mean_reward,mean_latency,mean_download,mean_render,success_rate,mean_qoe,hfqoe\n",
        );
        for r in &rows {
            text.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.parameter,
                fmt_real(r.value),
                r.seed,
                fmt_real(r.mean_reward),
                fmt_real(r.mean_latency),
                fmt_real(r.mean_download),
                fmt_real(r.mean_render),
                fmt_real(r.success_rate),
                fmt_real(r.mean_qoe),
                fmt_real(r.hfqoe)
            ));
        }
        write(&dir.join(format!("sweep-{parameter}.csv")), text)?;
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpTimeRow {
    pub variant: Variant,
    pub users: usize,
    pub steps: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
}

fn random_transition(rng: &mut ChaCha8Rng, state_dim: usize, action_dim: usize) -> Transition {
    Transition {
        state: (0..state_dim).map(|_| rng.random()).collect(),
        action: (0..action_dim).map(|_| rng.random()).collect(),
        reward: rng.random_range(-1.0..1.0),
        next_state: (0..state_dim).map(|_| rng.random()).collect(),
    }
}

/// Wall-clock per training step for each learning variant and user count.
///
/// Buffers are pre-filled with identical random transitions, and the variants
/// take turns step by step so slow drifts in machine load hit all of them alike.
/// The first [`TIMING_WARMUP`] steps of each variant are discarded.
pub fn cmd_bench_optime(
    cfg: &SimConfig,
    variants: &[Variant],
    users: &[usize],
    steps: usize,
    out: Option<&Path>,
) -> Result<Vec<OpTimeRow>, HarnessError> {
    if let Some(v) = variants.iter().find(|v| !v.is_learning()) {
        return Err(HarnessError::Usage(format!("variant `{v}` has no training step to time")));
    }
    let mut rows = Vec::new();
    for &k in users {
        let mut c = cfg.clone();
        c.set_parameter("users", k as f64)?;
        let (sd, ad) = (c.state_dim(), c.action_dim());
        let mut agents: Vec<DdpgAgent> = variants
            .iter()
            .map(|&v| DdpgAgent::new(AgentConfig::from_sim(&c, v), sd, ad, 0).expect("validated config"))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
        for _ in 0..c.agent.capacity {
            let t = random_transition(&mut rng, sd, ad);
            for a in &mut agents {
                a.remember(t.clone());
            }
        }
        let mut times = vec![Vec::with_capacity(steps + TIMING_WARMUP); agents.len()];
        for _ in 0..steps + TIMING_WARMUP {
            let t = random_transition(&mut rng, sd, ad);
            for (a, tv) in agents.iter_mut().zip(&mut times) {
                a.remember(t.clone());
                let started = Instant::now();
                a.train_step().expect("buffer is full");
                tv.push(started.elapsed().as_secs_f64());
            }
        }
        for (&variant, tv) in variants.iter().zip(&times) {
            let s = timing_stats(tv, TIMING_WARMUP);
            rows.push(OpTimeRow { variant, users: k, steps: s.steps, mean_ms: s.mean_ms, std_ms: s.std_ms });
        }
    }
    if let Some(dir) = out {
        let mut text = String::from("variant,users,steps,mean_ms,std_ms\n");
        for r in &rows {
            text.push_str(&format!(
                "{},{},{},{},{}\n",
                r.variant,
                r.users,
                r.steps,
                fmt_real(r.mean_ms),
                fmt_real(r.std_ms)
            ));
        }
        write(&dir.join("optime.csv"), text)?;
    }
    Ok(rows)
}

/// Attention profiles for `slots` GoPs per user, from a trace directory or synthetic gaze.
pub fn cmd_ingest(
    cfg: &SimConfig,
    gaze_dir: Option<&Path>,
    slots: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<Vec<(usize, usize, AttentionProfile)>, HarnessError> {
    let s = &cfg.system;
    let frames = s.frames_per_gop as usize;
    let corpus = match gaze_dir {
        Some(dir) => Some(read_trace_dir(dir)?.0),
        None => None,
    };
    let mut rows = Vec::with_capacity(slots * s.users);
    for k in 0..s.users {
        let user_seed = seed.wrapping_mul(1_000_003).wrapping_add(k as u64);
        let source = match &corpus {
            Some(traces) => GazeSource::Replay {
                trace: crate::gaze::compose_long_trace(traces, slots * frames, user_seed)?,
                cursor: 0,
            },
            None => GazeSource::Synthetic(GazeWalker::new(cfg.gaze_step_scale(k), user_seed)),
        };
        let mut feed = AttentionFeed::new(source, cfg.attention_rule(), s.tile_cols, s.tile_rows, frames);
        for t in 0..slots {
            rows.push((t, k, feed.next_profile()));
        }
    }
    rows.sort_by_key(|&(t, k, _)| (t, k));
    if let Some(dir) = out {
        write(&dir.join("attention.csv"), profiles_to_csv(&rows))?;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn student_interval() {
        let (m, h) = mean_ci95(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((h - 4.302_652_7 / 3f64.sqrt()).abs() < 1e-6, "{h}");
        assert_eq!(mean_ci95(&[5.0]), (5.0, 0.0));
    }

    #[test]
    fn exit_codes_distinguish_config_and_runtime() {
        assert_eq!(HarnessError::from(ConfigError::UnknownParameter("x".into())).exit_code(), 3);
        assert_eq!(HarnessError::from(GazeError::EmptyCorpus).exit_code(), 4);
    }

    #[test]
    fn out_dir_flag_wins() {
        assert_eq!(resolve_out_dir(Some(Path::new("/tmp/x"))), PathBuf::from("/tmp/x"));
    }

    #[test]
    fn unknown_sweep_parameter() {
        let err = cmd_sweep(&SimConfig::desk_scale(), "gamma", &[0.5], Variant::Fixed2k, &[0], 1, None).unwrap_err();
        assert!(matches!(err, HarnessError::Config(ConfigError::UnknownParameter(_))));
    }

    #[test]
    fn ingest_rows_cover_grid() {
        let rows = cmd_ingest(&SimConfig::desk_scale(), None, 20, 4, None).unwrap();
        assert_eq!(rows.len(), 80);
        assert!(rows.iter().all(|(_, _, p)| p.counts().iter().sum::<u32>() == 16));
        assert_eq!(rows, cmd_ingest(&SimConfig::desk_scale(), None, 20, 4, None).unwrap());
    }

    #[test]
    fn ingest_empty_dir_errors() {
        let dir = tempfile::tempdir().unwrap();
        let err = cmd_ingest(&SimConfig::desk_scale(), Some(dir.path()), 5, 0, None).unwrap_err();
        assert!(matches!(err, HarnessError::Gaze(GazeError::EmptyCorpus)));
    }

    #[test]
    fn bench_rejects_baselines() {
        let err = cmd_bench_optime(&SimConfig::desk_scale(), &[Variant::Fixed2k], &[2], 10, None).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
