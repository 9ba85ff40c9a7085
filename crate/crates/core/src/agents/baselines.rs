use crate::config::SimConfig;
use crate::env::content::{AttentionProfile, ResolutionAssignment};
use crate::env::qoe::perception_weight;
use crate::env::SlotModel;
use crate::mdp::{ActionVector, UserAction};

/// Points per resolution range searched by the average-allocation baseline.
pub const AVG_ALLOC_GRID: usize = 8;

fn uniform_shares(cfg: &SimConfig, resolutions: Vec<ResolutionAssignment>) -> ActionVector {
    let k = resolutions.len() as f64;
    ActionVector {
        users: resolutions
            .into_iter()
            .map(|resolution| UserAction {
                resolution,
                bandwidth: cfg.system.bandwidth / k,
                cpu: cfg.system.cpu_frequency / k,
            })
            .collect(),
    }
}

/// Uniform shares and the 2K tile size at every attention level.
pub fn fixed_2k(cfg: &SimConfig) -> ActionVector {
    let content = cfg.content();
    let res = ResolutionAssignment::uniform_bits(content.two_k_tile_bits(), content.tile_bits_max)
        .expect("2K tile fits under the 4K maximum");
    uniform_shares(cfg, vec![res; cfg.system.users])
}

/// Evenly spaced points over a resolution range, stopping at the same
/// open upper edge the action decoder uses.
fn grid(lo: f64, hi: f64, eps_cap: f64) -> impl Iterator<Item = f64> {
    let span = (hi - lo) * (1.0 - eps_cap);
    (0..AVG_ALLOC_GRID).map(move |i| lo + span * i as f64 / (AVG_ALLOC_GRID - 1) as f64)
}

/// Uniform shares; per user the `(r1, r2)` grid point with the highest perception
/// weight whose nominal latency (unit gain, no calibration bias) meets the deadline.
/// Falls back to the range minima when nothing is feasible.
pub fn average_allocation(profiles: &[AttentionProfile], cfg: &SimConfig) -> ActionVector {
    let model = SlotModel::from_config(cfg);
    let content = &model.content;
    let k = profiles.len();
    let bandwidth = cfg.system.bandwidth / k as f64;
    let cpu = cfg.system.cpu_frequency / k as f64;
    let [[lo1, hi1], [lo2, hi2]] = content.resolution_ranges;
    let resolutions = profiles
        .iter()
        .enumerate()
        .map(|(user, profile)| {
            let distance = cfg.user_distance(user);
            let mut best: Option<(f64, ResolutionAssignment)> = None;
            for r1 in grid(lo1, hi1, cfg.system.eps_cap) {
                for r2 in grid(lo2, hi2, cfg.system.eps_cap) {
                    let res = ResolutionAssignment::new([r1, r2, content.top_resolution], content.tile_bits_max)
                        .expect("grid inside (0, 1]");
                    let action = UserAction { resolution: res, bandwidth, cpu };
                    let feasible = model
                        .latencies(profile, &action, 1.0, distance, 0.0, 0.0)
                        .map(|(l, _)| l.delivered)
                        .unwrap_or(false);
                    if !feasible {
                        continue;
                    }
                    let w = perception_weight(profile, &res, content.tile_bits_min);
                    if best.as_ref().is_none_or(|(bw, _)| w > *bw) {
                        best = Some((w, res));
                    }
                }
            }
            best.map(|(_, r)| r).unwrap_or_else(|| {
                ResolutionAssignment::new([lo1, lo2, content.top_resolution], content.tile_bits_max)
                    .expect("range minima inside (0, 1]")
            })
        })
        .collect();
    uniform_shares(cfg, resolutions)
}
