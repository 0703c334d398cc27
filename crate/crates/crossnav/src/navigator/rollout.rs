//! Rollouts: running the policy (or a teacher) through an episode.

use crate::error::{Error, Result};
use crate::mathcore::dropout::Mode;
use crate::navigator::forward::{encode_instruction, step_forward, StepCache, StepState};
use crate::navigator::params::NavigatorParams;
use crate::worldsim::{observe, transition, ActionCandidate, AgentState, EpisodeSpec, WorldGraph};
use rand::Rng;

/// How the rollout picks actions from the step distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActionSelect {
    /// Argmax; ties go to the lowest candidate index.
    Greedy,
    /// Sample from the distribution with the caller's RNG.
    Sample,
}

/// One recorded step of a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajStep {
    pub state: AgentState,
    /// Chosen candidate index.
    pub action: usize,
    /// Log-probability the policy assigned to the chosen action.
    pub log_prob: f64,
    /// Candidate snapshot at this state.
    pub candidates: Vec<ActionCandidate>,
}

impl TrajStep {
    pub fn chosen(&self) -> &ActionCandidate {
        &self.candidates[self.action]
    }
}

/// A finished rollout.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub episode_id: u64,
    /// Episode seed (drives observation noise; needed for exact replay).
    pub episode_seed: u64,
    pub steps: Vec<TrajStep>,
    /// True when the policy stopped; false on the max-length cutoff.
    pub stopped: bool,
    /// Dropout mode the rollout ran under, for exact replay.
    pub mode: Mode,
}

impl Trajectory {
    /// The viewpoint the agent ended at.
    pub fn final_viewpoint(&self) -> u32 {
        let last = self.steps.last().expect("trajectories are non-empty");
        match last.chosen().kind {
            crate::worldsim::CandidateKind::Stop => last.state.viewpoint,
            crate::worldsim::CandidateKind::Move { target } => target,
        }
    }

    /// Viewpoint sequence including start and final (MOVE targets).
    pub fn visited(&self) -> Vec<u32> {
        let mut out: Vec<u32> = self.steps.iter().map(|s| s.state.viewpoint).collect();
        out.push(self.final_viewpoint());
        out.dedup();
        out
    }

    /// Sum of per-step log-probabilities.
    pub fn total_log_prob(&self) -> f64 {
        self.steps.iter().map(|s| s.log_prob).sum()
    }

    /// The same trajectory replayed under a different dropout mode (e.g. a
    /// fresh mask seed when imitating a stored rollout).
    pub fn with_mode(mut self, mode: Mode) -> Trajectory {
        self.mode = mode;
        self
    }
}

/// Per-step log-probabilities of a trajectory's actions under the current
/// parameters (exact forward replay).
pub fn trajectory_logprobs(
    nav: &NavigatorParams,
    world: &WorldGraph,
    episode: &EpisodeSpec,
    trajectory: &Trajectory,
) -> Result<Vec<f64>> {
    let (caches, _) = replay_forward(nav, world, episode, trajectory)?;
    Ok(caches
        .iter()
        .zip(&trajectory.steps)
        .map(|(c, s)| c.probs[s.action].ln())
        .collect())
}

/// Argmax when `u` is absent (ties to the lowest index), inverse-CDF
/// sample otherwise.
fn pick(probs: &[f64], u: Option<f64>) -> usize {
    match u {
        None => {
            let mut best = 0;
            for (i, p) in probs.iter().enumerate() {
                if *p > probs[best] {
                    best = i;
                }
            }
            best
        }
        Some(u) => {
            let mut acc = 0.0;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    return i;
                }
            }
            probs.len() - 1
        }
    }
}

/// Run the policy through an episode, recording per-step log-probs.
///
/// Starts from the zero hidden state with the STOP embedding as the
/// previous action; terminates on STOP or after `max_steps`. Uses only
/// the episode's instruction, start state, and seed, so it is safe inside
/// a self-supervised scope.
pub fn rollout(
    nav: &NavigatorParams,
    world: &WorldGraph,
    episode: &EpisodeSpec,
    select: ActionSelect,
    mut rng: Option<&mut impl Rng>,
    max_steps: usize,
    mode: Mode,
) -> Result<Trajectory> {
    rollout_with(nav, world, episode, max_steps, mode, |_, _, cache| {
        let u = match select {
            ActionSelect::Greedy => None,
            ActionSelect::Sample => Some(
                rng.as_mut()
                    .ok_or_else(|| Error::InvalidArgument("sampling needs an rng".into()))?
                    .random::<f64>(),
            ),
        };
        Ok(pick(&cache.probs, u))
    })
}

/// Run an episode with a caller-chosen action at each step (the policy
/// still scores every candidate; its log-prob of the forced choice is
/// recorded). Drives teacher forcing and stored-trajectory replays.
pub fn rollout_with(
    nav: &NavigatorParams,
    world: &WorldGraph,
    episode: &EpisodeSpec,
    max_steps: usize,
    mode: Mode,
    mut choose: impl FnMut(usize, &AgentState, &StepCache) -> Result<usize>,
) -> Result<Trajectory> {
    if max_steps == 0 {
        return Err(Error::InvalidArgument("max_steps must be ≥ 1".into()));
    }
    let encoded = encode_instruction(&episode.instruction, nav, mode)?;
    let mut state = StepState::initial(nav);
    let mut agent = episode.start;
    let mut steps = Vec::new();
    let mut stopped = false;
    for t in 0..max_steps {
        let obs = observe(world, &agent, episode.seed)?;
        let cache = step_forward(nav, &state, &obs, &encoded, mode, t)?;
        let action = choose(t, &agent, &cache)?;
        if action >= cache.probs.len() {
            return Err(Error::InvalidAction(format!(
                "chosen index {action} out of {} candidates",
                cache.probs.len()
            )));
        }
        let log_prob = cache.probs[action].ln();
        steps.push(TrajStep {
            state: agent,
            action,
            log_prob,
            candidates: obs.candidates.clone(),
        });
        if obs.candidates[action].is_stop() {
            stopped = true;
            break;
        }
        state.advance(&cache, action);
        agent = transition(world, &agent, &obs.candidates[action])?;
    }
    Ok(Trajectory {
        episode_id: episode.id,
        episode_seed: episode.seed,
        steps,
        stopped,
        mode,
    })
}

/// Replay a trajectory's forward pass, returning the per-step caches and
/// the encoded instruction. Verifies that the stored actions and log-probs
/// are consistent with the current parameters and world.
pub(crate) fn replay_forward(
    nav: &NavigatorParams,
    world: &WorldGraph,
    episode: &EpisodeSpec,
    trajectory: &Trajectory,
) -> Result<(Vec<StepCache>, crate::navigator::forward::EncodedInstruction)> {
    if episode.id != trajectory.episode_id || episode.seed != trajectory.episode_seed {
        return Err(Error::Integrity(
            "trajectory does not belong to this episode".into(),
        ));
    }
    let mode = trajectory.mode;
    let encoded = encode_instruction(&episode.instruction, nav, mode)?;
    let mut state = StepState::initial(nav);
    let mut agent = episode.start;
    let mut caches = Vec::with_capacity(trajectory.steps.len());
    for (t, step) in trajectory.steps.iter().enumerate() {
        if step.state != agent {
            return Err(Error::Integrity(format!(
                "trajectory step {t} state diverges on replay"
            )));
        }
        let obs = observe(world, &agent, episode.seed)?;
        if obs.candidates != step.candidates {
            return Err(Error::Integrity(format!(
                "trajectory step {t} candidates diverge on replay"
            )));
        }
        let cache = step_forward(nav, &state, &obs, &encoded, mode, t)?;
        if step.action >= cache.probs.len() {
            return Err(Error::Integrity(format!(
                "trajectory step {t} action out of range"
            )));
        }
        if !step.chosen().is_stop() {
            state.advance(&cache, step.action);
            agent = transition(world, &agent, &obs.candidates[step.action])?;
        }
        caches.push(cache);
    }
    Ok((caches, encoded))
}
