//! Navigation metrics: PL, NE, OSR, SR, SPL, per episode and aggregated.
//!
//! PL is the executed path length; NE the geodesic distance from the final
//! position to the target; SR the share of episodes ending within the
//! success radius; OSR the share whose trajectory ever came within it; SPL
//! success weighted by `l / max(p, l)` with `l` the geodesic start-target
//! distance and `p` the executed length.

use crate::error::{Error, Result};
use crate::navigator::Trajectory;
use crate::worldsim::{CandidateKind, EpisodeSpec, WorldGraph};

/// Per-episode evaluation outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeResult {
    pub episode_id: u64,
    /// Path length: total meters traveled.
    pub pl: f64,
    /// Navigation error: geodesic distance from the final position to the
    /// target.
    pub ne: f64,
    pub success: bool,
    /// Success at the closest visited point.
    pub oracle_success: bool,
    /// Success weighted by inverse normalized path length, in [0, 1].
    pub spl: f64,
}

/// Evaluate one trajectory against its episode.
pub fn evaluate_episode(
    world: &WorldGraph,
    episode: &EpisodeSpec,
    trajectory: &Trajectory,
    d: f64,
) -> Result<EpisodeResult> {
    if trajectory.steps.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    let target = episode.target_viewpoint();
    let dist = world.distances_from(target)?;
    let mut pl = 0.0;
    for step in &trajectory.steps {
        if !world.contains(step.state.viewpoint) {
            return Err(Error::InvalidArgument(format!(
                "trajectory references unknown viewpoint {}",
                step.state.viewpoint
            )));
        }
        if let CandidateKind::Move { target: to } = step.chosen().kind {
            pl += world.edge_length(step.state.viewpoint, to);
        }
    }
    let final_vp = trajectory.final_viewpoint();
    if !world.contains(final_vp) {
        return Err(Error::InvalidArgument(format!(
            "trajectory references unknown viewpoint {final_vp}"
        )));
    }
    let ne = dist[final_vp as usize];
    let success = ne <= d;
    let oracle_success = trajectory.visited().iter().any(|&v| dist[v as usize] <= d);
    // Sum the shortest path edge by edge, in walk order: an agent that
    // followed it exactly then has p bitwise equal to l and SPL exactly 1.
    let shortest: f64 = world
        .shortest_path(episode.start.viewpoint, target)?
        .windows(2)
        .map(|w| world.edge_length(w[0], w[1]))
        .sum();
    let spl = if !success {
        0.0
    } else if shortest <= 0.0 {
        1.0 // degenerate start-at-target episode: SPL = success
    } else {
        shortest / pl.max(shortest)
    };
    Ok(EpisodeResult {
        episode_id: episode.id,
        pl,
        ne,
        success,
        oracle_success,
        spl,
    })
}

/// Aggregate metrics over a batch of episodes. Means for PL/NE, rates as
/// percentages for OSR/SR/SPL.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub episodes: Vec<EpisodeResult>,
    pub mean_pl: f64,
    pub mean_ne: f64,
    pub osr_pct: f64,
    pub sr_pct: f64,
    pub spl_pct: f64,
}

/// Arithmetic means over per-episode results.
pub fn aggregate(results: Vec<EpisodeResult>) -> Result<MetricsReport> {
    if results.is_empty() {
        return Err(Error::InvalidArgument("aggregate of zero episodes".into()));
    }
    let n = results.len() as f64;
    let mean = |f: &dyn Fn(&EpisodeResult) -> f64| results.iter().map(|r| f(r)).sum::<f64>() / n;
    let report = MetricsReport {
        mean_pl: mean(&|r| r.pl),
        mean_ne: mean(&|r| r.ne),
        osr_pct: 100.0 * mean(&|r| r.oracle_success as u8 as f64),
        sr_pct: 100.0 * mean(&|r| r.success as u8 as f64),
        spl_pct: 100.0 * mean(&|r| r.spl),
        episodes: results,
    };
    Ok(report)
}
