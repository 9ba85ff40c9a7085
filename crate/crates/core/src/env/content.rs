//! Attention-based tile content: tile sizes per resolution and GoP sizes.

use serde::{Deserialize, Serialize};

use super::EnvError;

/// Number of attention levels (SD, HD, UHD).
pub const LEVELS: usize = 3;

/// Pixel ratio of a 2K frame (2560x1440) to a 4K frame (3840x2160).
pub const TWO_K_FRACTION: f64 = (2560.0 * 1440.0) / (3840.0 * 2160.0);

/// Static description of the tiled field of view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentConfig {
    pub cols: usize,
    pub rows: usize,
    pub frames_per_gop: u32,
    /// Bits per tile at full resolution.
    pub tile_bits_max: f64,
    /// Bits of the smallest reference tile.
    pub tile_bits_min: f64,
    /// CPU cycles per bit for attention levels 1..=3.
    pub cycles_per_bit: [f64; LEVELS],
    /// Resolution range `[lo, hi)` for levels 1 and 2.
    pub resolution_ranges: [[f64; 2]; 2],
    /// Resolution of level 3.
    pub top_resolution: f64,
}

impl ContentConfig {
    pub fn tiles(&self) -> usize {
        self.cols * self.rows
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |what: &str| Err(EnvError::InvalidContent(what.to_string()));
        if self.cols == 0 || self.rows == 0 {
            return bad("tile grid must be non-empty");
        }
        if self.frames_per_gop == 0 {
            return bad("frames per GoP must be positive");
        }
        if !(self.tile_bits_min > 0.0 && self.tile_bits_min < self.tile_bits_max) {
            return bad("require 0 < b_th < b_max");
        }
        if self.cycles_per_bit.iter().any(|c| !(*c > 0.0)) {
            return bad("cycles per bit must be positive");
        }
        if self.cycles_per_bit.windows(2).any(|w| w[1] < w[0]) {
            return bad("cycles per bit must be non-decreasing in attention level");
        }
        for [lo, hi] in self.resolution_ranges {
            if !(lo > 0.0 && lo < hi && hi <= 1.0) {
                return bad("resolution ranges must satisfy 0 < lo < hi <= 1");
            }
        }
        if !(self.top_resolution > 0.0 && self.top_resolution <= 1.0) {
            return bad("level-3 resolution must lie in (0, 1]");
        }
        Ok(())
    }

    /// True when `res` respects the per-level resolution boxes.
    pub fn within_boxes(&self, res: &ResolutionAssignment) -> bool {
        let [r1, r2, r3] = res.fractions;
        let [[lo1, hi1], [lo2, hi2]] = self.resolution_ranges;
        (lo1..hi1).contains(&r1) && (lo2..hi2).contains(&r2) && r3 == self.top_resolution
    }

    /// Tile size used by the fixed 2K baseline.
    pub fn two_k_tile_bits(&self) -> f64 {
        self.tile_bits_max * TWO_K_FRACTION
    }
}

/// Tiles per attention level for one user and one GoP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttentionProfile {
    counts: [u32; LEVELS],
}

impl AttentionProfile {
    pub fn new(counts: [u32; LEVELS], tiles: usize) -> Result<Self, EnvError> {
        let sum: u64 = counts.iter().map(|&c| c as u64).sum();
        if tiles == 0 || sum != tiles as u64 {
            return Err(EnvError::InvalidProfile { counts, tiles });
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> [u32; LEVELS] {
        self.counts
    }

    pub fn count(&self, level: usize) -> u32 {
        self.counts[level]
    }

    pub fn tiles(&self) -> u32 {
        self.counts.iter().sum()
    }

    /// Tile fractions per level, `N_a / N`.
    pub fn fractions(&self) -> [f64; LEVELS] {
        let n = self.tiles() as f64;
        self.counts.map(|c| c as f64 / n)
    }
}

/// Per-level resolution fractions and the tile sizes they imply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolutionAssignment {
    pub fractions: [f64; LEVELS],
    pub bits: [f64; LEVELS],
}

impl ResolutionAssignment {
    pub fn new(fractions: [f64; LEVELS], tile_bits_max: f64) -> Result<Self, EnvError> {
        let mut bits = [0.0; LEVELS];
        for (b, &r) in bits.iter_mut().zip(&fractions) {
            *b = tile_bits(r, tile_bits_max)?;
        }
        Ok(Self { fractions, bits })
    }

    /// Same tile size at every level.
    pub fn uniform_bits(bits: f64, tile_bits_max: f64) -> Result<Self, EnvError> {
        Self::new([bits / tile_bits_max; LEVELS], tile_bits_max)
    }
}

/// Bits of one tile at resolution fraction `r`.
pub fn tile_bits(r: f64, tile_bits_max: f64) -> Result<f64, EnvError> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(EnvError::InvalidResolution(r));
    }
    Ok(r * tile_bits_max)
}

/// GoP data size split per attention level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GopSize {
    pub per_level: [f64; LEVELS],
    pub total: f64,
}

pub fn gop_size(profile: &AttentionProfile, res: &ResolutionAssignment, frames: u32) -> GopSize {
    let mut per_level = [0.0; LEVELS];
    for (a, g) in per_level.iter_mut().enumerate() {
        *g = profile.count(a) as f64 * res.bits[a] * frames as f64;
    }
    GopSize { per_level, total: per_level.iter().sum() }
}
