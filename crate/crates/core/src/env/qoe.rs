//! PSNR under a binary delivery error and the attention-weighted QoE.

use serde::{Deserialize, Serialize};

use super::content::{AttentionProfile, ResolutionAssignment, LEVELS};

/// PSNR in dB with a binary MSE: 0 when delivered, 1 when the FoV is lost.
pub fn psnr(delivered: bool, eps1: f64) -> f64 {
    let mse = if delivered { 0.0 } else { 1.0 };
    10.0 * ((1.0 + eps1) / (mse + eps1)).log10()
}

/// Attention-weighted log-resolution term `sum_a (a N_a / N) ln(b_a / b_th)`.
pub fn perception_weight(
    profile: &AttentionProfile,
    res: &ResolutionAssignment,
    tile_bits_min: f64,
) -> f64 {
    let n = profile.tiles() as f64;
    (0..LEVELS)
        .filter(|&a| profile.count(a) > 0)
        .map(|a| (a + 1) as f64 * profile.count(a) as f64 / n * (res.bits[a] / tile_bits_min).ln())
        .sum()
}

pub fn qoe(
    psnr_db: f64,
    profile: &AttentionProfile,
    res: &ResolutionAssignment,
    tile_bits_min: f64,
) -> f64 {
    psnr_db * perception_weight(profile, res, tile_bits_min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoeRecord {
    pub psnr: f64,
    pub qoe: f64,
    pub eps1: f64,
}
