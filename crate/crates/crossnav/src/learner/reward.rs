//! Reward algebra: distance-shaped immediate rewards, discounted returns,
//! and mixed advantages.

use crate::error::{Error, Result};
use crate::navigator::Trajectory;
use crate::worldsim::{geodesic_distance, AgentState, WorldGraph};

/// Which scalar of the critic's output enters the advantage.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IntrinsicForm {
    /// `exp(mean log p)`: geometric mean of token probabilities, in (0,1].
    GeometricMean,
    /// `mean log p` itself (≤ 0); kept for comparison.
    MeanLogProb,
}

/// Reward hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardConfig {
    /// Discount factor γ.
    pub gamma: f64,
    /// Intrinsic reward weight δ.
    pub delta: f64,
    /// Success radius in meters.
    pub d_success: f64,
    pub intrinsic_form: IntrinsicForm,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            delta: 2.0,
            d_success: 3.0,
            intrinsic_form: IntrinsicForm::GeometricMean,
        }
    }
}

/// The immediate reward of one action: the reduced geodesic distance to
/// the target for non-final steps, the success indicator (evaluated at the
/// post-action state) for the final one.
pub fn immediate_reward(
    world: &WorldGraph,
    target: u32,
    state: &AgentState,
    next_state: &AgentState,
    is_final: bool,
    d: f64,
) -> Result<f64> {
    let d_next = geodesic_distance(world, next_state.viewpoint, target)?;
    if is_final {
        Ok(if d_next <= d { 1.0 } else { 0.0 })
    } else {
        let d_here = geodesic_distance(world, state.viewpoint, target)?;
        Ok(d_here - d_next)
    }
}

/// Discounted returns by backward recursion: `R_t = r_t + γ·R_{t+1}`.
pub fn discounted_returns(immediate: &[f64], gamma: f64) -> Result<Vec<f64>> {
    if immediate.is_empty() {
        return Err(Error::InvalidArgument("no rewards to discount".into()));
    }
    let mut returns = vec![0.0; immediate.len()];
    let mut acc = 0.0;
    for (slot, &r) in returns.iter_mut().zip(immediate).rev() {
        acc = r + gamma * acc;
        *slot = acc;
    }
    Ok(returns)
}

/// Mixed advantages: `A_t = R_t + δ·R_intr`, the trajectory-level
/// intrinsic reward added uniformly at every step.
pub fn advantages(returns: &[f64], intrinsic: f64, delta: f64) -> Vec<f64> {
    returns.iter().map(|r| r + delta * intrinsic).collect()
}

/// Per-trajectory reward bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardRecord {
    /// Per-step immediate rewards (final step is the success indicator).
    pub immediate: Vec<f64>,
    /// Discounted returns, `R_t = r_t + γ·R_{t+1}`.
    pub returns: Vec<f64>,
    /// Trajectory-level intrinsic reward (already in the chosen form).
    pub intrinsic: f64,
    /// `A_t = R_t + δ·R_intr`.
    pub advantages: Vec<f64>,
}

impl RewardRecord {
    pub fn success(&self) -> bool {
        *self.immediate.last().expect("non-empty") == 1.0
    }
}

/// Assemble the full reward record of a trajectory against a target.
///
/// One Dijkstra pass from the target serves every step.
pub fn reward_record(
    world: &WorldGraph,
    target: u32,
    trajectory: &Trajectory,
    intrinsic: f64,
    config: &RewardConfig,
) -> Result<RewardRecord> {
    let steps = &trajectory.steps;
    if steps.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    let dist = world.distances_from(target)?;
    let t_last = steps.len() - 1;
    let mut immediate = Vec::with_capacity(steps.len());
    for (t, step) in steps.iter().enumerate() {
        let here = dist[step.state.viewpoint as usize];
        let next_vp = match step.chosen().kind {
            crate::worldsim::CandidateKind::Stop => step.state.viewpoint,
            crate::worldsim::CandidateKind::Move { target } => target,
        };
        let next = dist[next_vp as usize];
        if t == t_last {
            immediate.push(if next <= config.d_success { 1.0 } else { 0.0 });
        } else {
            immediate.push(here - next);
        }
    }
    let returns = discounted_returns(&immediate, config.gamma)?;
    let adv = advantages(&returns, intrinsic, config.delta);
    Ok(RewardRecord {
        immediate,
        returns,
        intrinsic,
        advantages: adv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn distance_reduction_reward() {
        // D 5→3 gives +2; checked with a hand-built two-edge world.
        let world = two_edge_world();
        // Viewpoints: 0 --(5-3=2m)-- 1 --(3m)-- 2, target 2.
        let s0 = AgentState::new(0, 0.0);
        let s1 = AgentState::new(1, 0.0);
        let r = immediate_reward(&world, 2, &s0, &s1, false, 3.0).unwrap();
        assert_close(r, 2.0, 1e-12);
    }

    #[test]
    fn final_indicator_thresholds() {
        let world = two_edge_world();
        let s1 = AgentState::new(1, 0.0);
        // D(1, 2) = 3.0 ≤ 3.0 → success.
        assert_eq!(
            immediate_reward(&world, 2, &s1, &s1, true, 3.0).unwrap(),
            1.0
        );
        // Tighter radius: 3.0 > 2.5 → 0.
        assert_eq!(
            immediate_reward(&world, 2, &s1, &s1, true, 2.5).unwrap(),
            0.0
        );
        // And the Eq.-style pair: 2.5 ≤ 3 → 1; 3.5 > 3 → 0 (start vp).
        let s0 = AgentState::new(0, 0.0);
        assert_eq!(
            immediate_reward(&world, 2, &s0, &s0, true, 5.0).unwrap(),
            1.0
        );
        assert_eq!(
            immediate_reward(&world, 2, &s0, &s0, true, 4.0).unwrap(),
            0.0
        );
    }

    fn two_edge_world() -> WorldGraph {
        use crate::worldsim::{Viewpoint, WorldConfig, WorldGraph};
        let config = WorldConfig {
            n_viewpoints: 3,
            mean_degree: 1.0,
            feature_dim: 2,
            patch_count: 4,
            landmark_vocab: 3,
            noise_sigma: 0.0,
            tile_factor: 1,
            landmark_seed: 1,
        };
        WorldGraph::assemble(
            0,
            7,
            vec![
                Viewpoint {
                    id: 0,
                    position: [0.0, 0.0, 0.0],
                    landmark_id: 0,
                },
                Viewpoint {
                    id: 1,
                    position: [2.0, 0.0, 0.0],
                    landmark_id: 1,
                },
                Viewpoint {
                    id: 2,
                    position: [5.0, 0.0, 0.0],
                    landmark_id: 2,
                },
            ],
            vec![(0, 1), (1, 2)],
            &config,
        )
        .unwrap()
    }

    #[test]
    fn returns_recursion_arithmetic() {
        let r = discounted_returns(&[1.0, 1.0, 1.0], 0.5).unwrap();
        assert_eq!(r, vec![1.75, 1.5, 1.0]);
    }

    #[test]
    fn zero_gamma_returns_equal_immediate() {
        let imm = [0.3, -1.0, 2.0, 0.5];
        let r = discounted_returns(&imm, 0.0).unwrap();
        assert_eq!(r, imm.to_vec());
    }

    #[test]
    fn returns_match_quadratic_oracle() {
        // Direct double-sum: R_t = r_t + Σ_{t'>t} γ^{t'−t} r_{t'}.
        let imm = [0.7, -0.2, 1.5, 0.0, -1.1, 0.4];
        let gamma = 0.95;
        let fast = discounted_returns(&imm, gamma).unwrap();
        for t in 0..imm.len() {
            let mut slow = imm[t];
            for tp in t + 1..imm.len() {
                slow += gamma.powi((tp - t) as i32) * imm[tp];
            }
            assert_close(fast[t], slow, 1e-12);
        }
    }

    #[test]
    fn returns_satisfy_recursion_exactly() {
        let imm = [0.25, -0.5, 0.125, 1.0];
        let gamma = 0.5; // power of two: recursion is exact in f64
        let r = discounted_returns(&imm, gamma).unwrap();
        for t in 0..imm.len() - 1 {
            assert_eq!(r[t], imm[t] + gamma * r[t + 1]);
        }
        assert_eq!(*r.last().unwrap(), *imm.last().unwrap());
    }

    #[test]
    fn advantage_arithmetic() {
        assert_eq!(advantages(&[1.0, 0.0], 0.5, 2.0), vec![2.0, 1.0]);
        // δ=0 leaves the returns untouched.
        assert_eq!(advantages(&[0.3, 0.7], 0.9, 0.0), vec![0.3, 0.7]);
        // Default δ is 2.
        assert_eq!(RewardConfig::default().delta, 2.0);
        assert_eq!(RewardConfig::default().gamma, 0.95);
        assert_eq!(RewardConfig::default().d_success, 3.0);
    }

    #[test]
    fn empty_inputs_are_rejected() {
        assert!(discounted_returns(&[], 0.9).is_err());
    }
}
