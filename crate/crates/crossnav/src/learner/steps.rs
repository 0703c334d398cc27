//! The three update steps: supervised warm start, mixed-reward REINFORCE,
//! and self-imitation, plus demonstration trajectories.

use crate::critic::{intrinsic_reward, CriticParams};
use crate::error::{Error, Result};
use crate::learner::replay::{ReplayBuffer, ReplayEntry};
use crate::learner::reward::{reward_record, IntrinsicForm, RewardConfig, RewardRecord};
use crate::mathcore::{adam_step, AdamHyper, AdamState, Mode, ParamSet};
use crate::navigator::{
    rollout, rollout_with, trajectory_logprob_backward, trajectory_logprobs, ActionSelect,
    NavigatorParams, Trajectory,
};
use crate::worldsim::{demonstration_action, without_supervision, EpisodeSpec, WorldGraph};
use rand::{Rng, RngCore};

/// Teacher-forced walk along the demonstration: the policy scores every
/// candidate while the simulator picks the expert action, ending with STOP
/// at the target.
pub fn teacher_forced_trajectory(
    nav: &NavigatorParams,
    world: &WorldGraph,
    episode: &EpisodeSpec,
    max_steps: usize,
    mode: Mode,
) -> Result<Trajectory> {
    rollout_with(nav, world, episode, max_steps, mode, |_, state, _| {
        demonstration_action(world, episode, state)
    })
}

/// The demonstration as a bare environment trajectory (no policy attached;
/// log-probs are zero). This is the ⟨X*, τ*⟩ pair the critic pre-trains on.
pub fn demonstration_trajectory(
    world: &WorldGraph,
    episode: &EpisodeSpec,
) -> Result<Trajectory> {
    use crate::worldsim::{observe, transition};
    let mut steps = Vec::new();
    let mut state = episode.start;
    loop {
        let obs = observe(world, &state, episode.seed)?;
        let action = demonstration_action(world, episode, &state)?;
        steps.push(crate::navigator::TrajStep {
            state,
            action,
            log_prob: 0.0,
            candidates: obs.candidates.clone(),
        });
        if obs.candidates[action].is_stop() {
            break;
        }
        state = transition(world, &state, &obs.candidates[action])?;
    }
    Ok(Trajectory {
        episode_id: episode.id,
        episode_seed: episode.seed,
        steps,
        stopped: true,
        mode: Mode::Eval,
    })
}

fn negated(grads: &ParamSet) -> ParamSet {
    let mut out = grads.zeros_like();
    out.accumulate(grads, -1.0).expect("mirrored layout");
    out
}

/// Loss and loss-gradients of one supervised (teacher-forced) episode:
/// `L = −Σ_t log π(a*_t | s_t)` along the demonstration.
pub fn sl_grads(
    nav: &NavigatorParams,
    world: &WorldGraph,
    episode: &EpisodeSpec,
    max_steps: usize,
    mode: Mode,
) -> Result<(f64, ParamSet)> {
    let traj = teacher_forced_trajectory(nav, world, episode, max_steps, mode)?;
    let loss = -traj.total_log_prob();
    let weights = vec![1.0; traj.steps.len()];
    let grads = trajectory_logprob_backward(nav, world, episode, &traj, &weights)?;
    Ok((loss, negated(&grads)))
}

/// One supervised update: [`sl_grads`] followed by a single Adam step.
pub fn sl_step(
    nav: &NavigatorParams,
    opt: &AdamState,
    world: &WorldGraph,
    episode: &EpisodeSpec,
    hyper: &AdamHyper,
    max_steps: usize,
    mode: Mode,
) -> Result<(f64, NavigatorParams, AdamState)> {
    let (loss, grads) = sl_grads(nav, world, episode, max_steps, mode)?;
    let (params, opt) = adam_step(&nav.params, &grads, opt, hyper)?;
    Ok((
        loss,
        NavigatorParams {
            config: nav.config,
            params,
        },
        opt,
    ))
}

/// Statistics of one REINFORCE update.
#[derive(Clone, Debug, PartialEq)]
pub struct RlStats {
    pub rewards: RewardRecord,
    pub steps: usize,
    pub stopped: bool,
}

/// Sample one rollout and compute the REINFORCE loss gradients
/// `∇(−Σ_t A_t log π(a_t|s_t))` with the mixed advantage.
#[allow(clippy::too_many_arguments)]
pub fn rl_grads(
    nav: &NavigatorParams,
    critic: &CriticParams,
    world: &WorldGraph,
    episode: &EpisodeSpec,
    rng: &mut (impl Rng + RngCore),
    reward: &RewardConfig,
    max_steps: usize,
    dropout: f64,
    advantage_baseline: bool,
) -> Result<(RlStats, ParamSet)> {
    let mode = Mode::Train {
        dropout,
        seed: rng.next_u64(),
    };
    let traj = rollout(nav, world, episode, ActionSelect::Sample, Some(rng), max_steps, mode)?;
    let intrinsic = intrinsic_reward(&episode.instruction, &traj, world, critic)?;
    let r_intr = match reward.intrinsic_form {
        IntrinsicForm::GeometricMean => intrinsic.value(),
        IntrinsicForm::MeanLogProb => intrinsic.mean_log_prob(),
    };
    let record = reward_record(world, episode.target_viewpoint(), &traj, r_intr, reward)?;
    let mut weights = record.advantages.clone();
    if advantage_baseline {
        let mean = weights.iter().sum::<f64>() / weights.len() as f64;
        for w in &mut weights {
            *w -= mean;
        }
    }
    let grads = trajectory_logprob_backward(nav, world, episode, &traj, &weights)?;
    Ok((
        RlStats {
            steps: traj.steps.len(),
            stopped: traj.stopped,
            rewards: record,
        },
        negated(&grads),
    ))
}

/// One REINFORCE update: [`rl_grads`] followed by a single Adam step. The
/// critic is read-only (frozen).
#[allow(clippy::too_many_arguments)]
pub fn rl_step(
    nav: &NavigatorParams,
    opt: &AdamState,
    critic: &CriticParams,
    world: &WorldGraph,
    episode: &EpisodeSpec,
    rng: &mut (impl Rng + RngCore),
    reward: &RewardConfig,
    hyper: &AdamHyper,
    max_steps: usize,
    dropout: f64,
    advantage_baseline: bool,
) -> Result<(RlStats, NavigatorParams, AdamState)> {
    let (stats, grads) = rl_grads(
        nav,
        critic,
        world,
        episode,
        rng,
        reward,
        max_steps,
        dropout,
        advantage_baseline,
    )?;
    let (params, opt) = adam_step(&nav.params, &grads, opt, hyper)?;
    Ok((
        stats,
        NavigatorParams {
            config: nav.config,
            params,
        },
        opt,
    ))
}

/// Result of one self-imitation collection pass.
#[derive(Clone, Debug, PartialEq)]
pub struct SilCollectOutcome {
    /// Critic rewards of the K rollouts, in rollout order.
    pub rewards: Vec<f64>,
    /// Index of the stored (argmax) rollout.
    pub best_index: usize,
    /// Whether the buffer entry was replaced.
    pub stored: bool,
}

/// Sample `k` rollouts, score each with the frozen critic, and offer the
/// best one (ties to the earliest) to the replay buffer.
///
/// Runs inside a supervision guard: touching the episode's target or
/// demonstration here panics.
#[allow(clippy::too_many_arguments)]
pub fn sil_collect(
    nav: &NavigatorParams,
    critic: &CriticParams,
    world: &WorldGraph,
    episode: &EpisodeSpec,
    k: usize,
    rng: &mut (impl Rng + RngCore),
    dropout: f64,
    max_steps: usize,
    buffer: &mut ReplayBuffer,
) -> Result<SilCollectOutcome> {
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one rollout".into()));
    }
    without_supervision(|| {
        let mut rewards = Vec::with_capacity(k);
        let mut best: Option<(usize, f64, Trajectory)> = None;
        for i in 0..k {
            let mode = Mode::Train {
                dropout,
                seed: rng.next_u64(),
            };
            let traj =
                rollout(nav, world, episode, ActionSelect::Sample, Some(rng), max_steps, mode)?;
            let reward = intrinsic_reward(&episode.instruction, &traj, world, critic)?.value();
            rewards.push(reward);
            let better = match &best {
                None => true,
                Some((_, r, _)) => reward > *r, // strict: ties keep the earliest
            };
            if better {
                best = Some((i, reward, traj));
            }
        }
        let (best_index, reward, traj) = best.expect("k ≥ 1");
        let stored = buffer.offer(traj, reward);
        Ok(SilCollectOutcome {
            rewards,
            best_index,
            stored,
        })
    })
}

/// Loss and loss-gradients of one self-imitation replay:
/// `L = −R_intr · Σ_t log π(â_t | s_t)` along the stored trajectory (with
/// the unit-weight flag, the pure behavior-cloning form). Guarded against
/// supervision access.
pub fn sil_grads(
    nav: &NavigatorParams,
    entry: &ReplayEntry,
    world: &WorldGraph,
    episode: &EpisodeSpec,
    mode: Mode,
    unit_weight: bool,
) -> Result<(f64, ParamSet)> {
    without_supervision(|| {
        let traj = entry.trajectory.clone().with_mode(mode);
        let w = if unit_weight { 1.0 } else { entry.reward };
        let logprob: f64 = trajectory_logprobs(nav, world, episode, &traj)?.iter().sum();
        let loss = -w * logprob;
        let weights = vec![w; traj.steps.len()];
        let grads = trajectory_logprob_backward(nav, world, episode, &traj, &weights)?;
        Ok((loss, negated(&grads)))
    })
}

/// One self-imitation update: [`sil_grads`] followed by a single Adam
/// step.
#[allow(clippy::too_many_arguments)]
pub fn sil_step(
    nav: &NavigatorParams,
    opt: &AdamState,
    entry: &ReplayEntry,
    world: &WorldGraph,
    episode: &EpisodeSpec,
    hyper: &AdamHyper,
    mode: Mode,
    unit_weight: bool,
) -> Result<(f64, NavigatorParams, AdamState)> {
    let (loss, grads) = sil_grads(nav, entry, world, episode, mode, unit_weight)?;
    let (params, opt) = adam_step(&nav.params, &grads, opt, hyper)?;
    Ok((
        loss,
        NavigatorParams {
            config: nav.config,
            params,
        },
        opt,
    ))
}
