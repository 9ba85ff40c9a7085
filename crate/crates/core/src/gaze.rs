//! Eye-gaze traces to per-GoP attention profiles.
//!
//! Each frame's gaze tile gets level 3, tiles within `mid_radius` (Chebyshev)
//! get level 2 and the rest level 1. A GoP keeps the highest level each tile
//! reached over its frames.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::content::{AttentionProfile, LEVELS};

#[derive(Debug, Error)]
pub enum GazeError {
    #[error("no gaze traces to compose")]
    EmptyCorpus,
    #[error("{source_id}:{line}: {message}")]
    Malformed { source_id: String, line: usize, message: String },
    #[error("trace `{0}` holds no samples")]
    EmptyTrace(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    pub u: f64,
    pub v: f64,
}

impl GazeSample {
    /// Clamps into `[0, 1)`; returns the sample and whether it was moved.
    pub fn clamped(u: f64, v: f64) -> (Self, bool) {
        let top = 1.0 - f64::EPSILON;
        let fix = |x: f64| if x.is_nan() { 0.0 } else { x.clamp(0.0, top) };
        let s = Self { u: fix(u), v: fix(v) };
        (s, s.u != u || s.v != v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeTrace {
    pub samples: Vec<GazeSample>,
    pub source_id: String,
}

impl GazeTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Parses `u,v` lines; `#` comments and blank lines are skipped.
    /// Out-of-range samples are clamped and counted.
    pub fn parse(text: &str, source_id: &str) -> Result<(Self, usize), GazeError> {
        let mut samples = Vec::new();
        let mut clamped = 0;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = |message: String| GazeError::Malformed {
                source_id: source_id.to_string(),
                line: i + 1,
                message,
            };
            let mut parts = line.split(',');
            let (Some(u), Some(v), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(malformed(format!("expected `u,v`, got `{line}`")));
            };
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| malformed(format!("{e}: `{s}`")));
            let (s, moved) = GazeSample::clamped(parse(u)?, parse(v)?);
            clamped += moved as usize;
            samples.push(s);
        }
        if samples.is_empty() {
            return Err(GazeError::EmptyTrace(source_id.to_string()));
        }
        Ok((Self { samples, source_id: source_id.to_string() }, clamped))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# gaze trace {}\n", self.source_id);
        for s in &self.samples {
            writeln!(out, "{},{}", s.u, s.v).expect("write to string");
        }
        out
    }

    pub fn read(path: &Path) -> Result<(Self, usize), GazeError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| GazeError::Io { path: path.display().to_string(), source })?;
        let id = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        Self::parse(&text, &id)
    }
}

/// Reads every regular file in `dir` (sorted by name) as a gaze trace.
pub fn read_trace_dir(dir: &Path) -> Result<(Vec<GazeTrace>, usize), GazeError> {
    let io = |source| GazeError::Io { path: dir.display().to_string(), source };
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    let mut traces = Vec::with_capacity(paths.len());
    let mut clamped = 0;
    for p in paths {
        let (t, c) = GazeTrace::read(&p)?;
        clamped += c;
        traces.push(t);
    }
    if traces.is_empty() {
        return Err(GazeError::EmptyCorpus);
    }
    Ok((traces, clamped))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttentionRule {
    pub inner_radius: u32,
    pub mid_radius: u32,
}

impl Default for AttentionRule {
    fn default() -> Self {
        Self { inner_radius: 0, mid_radius: 2 }
    }
}

/// Grid tile `(i, j)` holding the gaze point.
pub fn gaze_to_tile(s: GazeSample, cols: usize, rows: usize) -> (usize, usize) {
    let i = ((cols as f64 * s.u).floor() as usize).min(cols - 1);
    let j = ((rows as f64 * s.v).floor() as usize).min(rows - 1);
    (i, j)
}

/// Per-tile attention levels (1..=3), row-major with index `j * cols + i`.
pub fn frame_attention(tile: (usize, usize), rule: AttentionRule, cols: usize, rows: usize) -> Vec<u8> {
    let mut levels = Vec::with_capacity(cols * rows);
    for j in 0..rows {
        for i in 0..cols {
            let d = i.abs_diff(tile.0).max(j.abs_diff(tile.1)) as u32;
            levels.push(if d <= rule.inner_radius {
                3
            } else if d <= rule.mid_radius {
                2
            } else {
                1
            });
        }
    }
    levels
}

pub fn level_counts(levels: &[u8]) -> [u32; LEVELS] {
    let mut counts = [0; LEVELS];
    for &l in levels {
        counts[l as usize - 1] += 1;
    }
    counts
}

/// Max-aggregates the per-frame level maps of one GoP.
pub fn gop_attention(frames: &[GazeSample], rule: AttentionRule, cols: usize, rows: usize) -> AttentionProfile {
    let mut levels = vec![1u8; cols * rows];
    for &s in frames {
        let frame = frame_attention(gaze_to_tile(s, cols, rows), rule, cols, rows);
        for (acc, l) in levels.iter_mut().zip(frame) {
            *acc = (*acc).max(l);
        }
    }
    AttentionProfile::new(level_counts(&levels), cols * rows).expect("every tile has a level")
}

/// Concatenates traces drawn uniformly with replacement, truncated to `target_frames`.
pub fn compose_long_trace(traces: &[GazeTrace], target_frames: usize, seed: u64) -> Result<GazeTrace, GazeError> {
    if traces.is_empty() {
        return Err(GazeError::EmptyCorpus);
    }
    if let Some(t) = traces.iter().find(|t| t.is_empty()) {
        return Err(GazeError::EmptyTrace(t.source_id.clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(target_frames);
    while samples.len() < target_frames {
        let t = traces.choose(&mut rng).expect("non-empty corpus");
        let take = (target_frames - samples.len()).min(t.len());
        samples.extend_from_slice(&t.samples[..take]);
    }
    Ok(GazeTrace { samples, source_id: format!("composed:{seed}") })
}

/// Reflected random walk in the unit square.
#[derive(Debug, Clone)]
pub struct GazeWalker {
    pos: [f64; 2],
    step_scale: f64,
    rng: ChaCha8Rng,
}

impl GazeWalker {
    pub fn new(step_scale: f64, seed: u64) -> Self {
        assert!(step_scale > 0.0 && step_scale <= 0.5, "step scale must lie in (0, 0.5]");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pos = [rng.random::<f64>(), rng.random::<f64>()];
        Self { pos, step_scale, rng }
    }

    pub fn next_sample(&mut self) -> GazeSample {
        let s = GazeSample { u: self.pos[0], v: self.pos[1] };
        for x in &mut self.pos {
            let mut y = *x + self.rng.random_range(-self.step_scale..self.step_scale);
            if y < 0.0 {
                y = -y;
            }
            if y >= 1.0 {
                y = 2.0 - y;
            }
            *x = y.clamp(0.0, 1.0 - f64::EPSILON);
        }
        s
    }
}

pub fn synth_gaze(steps: usize, step_scale: f64, seed: u64) -> GazeTrace {
    let mut w = GazeWalker::new(step_scale, seed);
    GazeTrace {
        samples: (0..steps).map(|_| w.next_sample()).collect(),
        source_id: format!("synthetic:{step_scale}:{seed}"),
    }
}

/// Endless per-user gaze: a synthetic walker or a trace replayed cyclically.
#[derive(Debug, Clone)]
pub enum GazeSource {
    Synthetic(GazeWalker),
    Replay { trace: GazeTrace, cursor: usize },
}

impl GazeSource {
    pub fn next_sample(&mut self) -> GazeSample {
        match self {
            GazeSource::Synthetic(w) => w.next_sample(),
            GazeSource::Replay { trace, cursor } => {
                let s = trace.samples[*cursor];
                *cursor = (*cursor + 1) % trace.len();
                s
            }
        }
    }
}

/// Produces one attention profile per slot from a gaze source.
#[derive(Debug, Clone)]
pub struct AttentionFeed {
    source: GazeSource,
    rule: AttentionRule,
    cols: usize,
    rows: usize,
    frames: usize,
    buf: Vec<GazeSample>,
}

impl AttentionFeed {
    pub fn new(source: GazeSource, rule: AttentionRule, cols: usize, rows: usize, frames: usize) -> Self {
        Self { source, rule, cols, rows, frames, buf: Vec::with_capacity(frames) }
    }

    pub fn next_profile(&mut self) -> AttentionProfile {
        self.buf.clear();
        for _ in 0..self.frames {
            let s = self.source.next_sample();
            self.buf.push(s);
        }
        gop_attention(&self.buf, self.rule, self.cols, self.rows)
    }
}

/// CSV with columns `t,user,N1,N2,N3`.
pub fn profiles_to_csv(rows: &[(usize, usize, AttentionProfile)]) -> String {
    let mut out = String::from("t,user,N1,N2,N3\n");
    for (t, k, p) in rows {
        let [a, b, c] = p.counts();
        writeln!(out, "{t},{k},{a},{b},{c}").expect("write to string");
    }
    out
}
