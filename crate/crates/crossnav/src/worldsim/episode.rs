//! Synthetic instruction/demonstration episodes.
//!
//! An episode pairs a start state and target viewpoint with a shortest
//! demonstration path and an instruction produced by a template grammar:
//! per hop a quantized direction token (forward/left/right/back) and the
//! landmark token of the next viewpoint, then a terminal "stop-at
//! <landmark>" clause.

use crate::error::{Error, Result};
use crate::mathcore::mix_seed;
use crate::worldsim::graph::WorldGraph;
use crate::worldsim::guard::check_supervision_access;
use crate::worldsim::observe::{bearing, signed_angle, AgentState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPISODE_SALT: u64 = 0x6570_6973; // "epis"

pub const TOKEN_FORWARD: u32 = 0;
pub const TOKEN_LEFT: u32 = 1;
pub const TOKEN_RIGHT: u32 = 2;
pub const TOKEN_BACK: u32 = 3;
pub const TOKEN_STOP_AT: u32 = 4;
/// First landmark token; landmark `k` is token `LANDMARK_BASE + k`.
pub const LANDMARK_BASE: u32 = 5;

/// Token id of a landmark.
pub fn landmark_token(landmark: u32) -> u32 {
    LANDMARK_BASE + landmark
}

/// Instruction vocabulary size for a landmark vocabulary: four directions,
/// the stop clause, the landmarks, and one begin-of-sequence token used
/// internally by the critic's decoder.
pub fn vocab_size(landmark_vocab: usize) -> usize {
    LANDMARK_BASE as usize + landmark_vocab + 1
}

/// The begin-of-sequence token (never appears inside an instruction).
pub fn bos_token(landmark_vocab: usize) -> u32 {
    (vocab_size(landmark_vocab) - 1) as u32
}

/// Human-readable token name, for traces and debugging.
pub fn token_name(token: u32, landmark_vocab: usize) -> String {
    match token {
        TOKEN_FORWARD => "forward".into(),
        TOKEN_LEFT => "left".into(),
        TOKEN_RIGHT => "right".into(),
        TOKEN_BACK => "back".into(),
        TOKEN_STOP_AT => "stop-at".into(),
        t if t == bos_token(landmark_vocab) => "<bos>".into(),
        t => format!("landmark-{}", t - LANDMARK_BASE),
    }
}

/// Quantize a relative bearing (radians) into a direction token.
pub fn direction_token(relative: f64) -> u32 {
    let a = signed_angle(relative);
    let q = std::f64::consts::FRAC_PI_4;
    if a.abs() < q {
        TOKEN_FORWARD
    } else if (q..3.0 * q).contains(&a) {
        TOKEN_LEFT
    } else if (-3.0 * q..=-q).contains(&a) {
        TOKEN_RIGHT
    } else {
        TOKEN_BACK
    }
}

/// A tokenized instruction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instruction {
    tokens: Vec<u32>,
}

impl Instruction {
    pub fn new(tokens: Vec<u32>, vocab: usize) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::InvalidArgument("empty instruction".into()));
        }
        if tokens.iter().any(|&t| t as usize >= vocab) {
            return Err(Error::InvalidArgument("token outside vocabulary".into()));
        }
        Ok(Self { tokens })
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Episode generation knobs.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeConfig {
    /// Demonstration length bounds in hops.
    pub min_hops: usize,
    pub max_hops: usize,
    /// Success radius in meters; starts closer than this to the target are
    /// rejected (stopping immediately must not succeed).
    pub d_success: f64,
    pub max_instruction_length: usize,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            min_hops: 2,
            max_hops: 6,
            d_success: 3.0,
            max_instruction_length: 80,
        }
    }
}

/// One instruction-following task.
///
/// `target_viewpoint` and `demonstration` are supervision: reading them
/// inside a [`crate::worldsim::without_supervision`] scope panics.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeSpec {
    pub id: u64,
    pub world_id: u32,
    /// Drives observation noise during this episode's rollouts.
    pub seed: u64,
    pub instruction: Instruction,
    pub start: AgentState,
    target_viewpoint: u32,
    demonstration: Vec<u32>,
}

impl EpisodeSpec {
    pub fn from_parts(
        id: u64,
        world_id: u32,
        seed: u64,
        instruction: Instruction,
        start: AgentState,
        target_viewpoint: u32,
        demonstration: Vec<u32>,
    ) -> Result<Self> {
        if demonstration.first() != Some(&start.viewpoint)
            || demonstration.last() != Some(&target_viewpoint)
        {
            return Err(Error::InvalidArgument(
                "demonstration must run from start to target".into(),
            ));
        }
        Ok(Self {
            id,
            world_id,
            seed,
            instruction,
            start,
            target_viewpoint,
            demonstration,
        })
    }

    /// The goal viewpoint (supervision).
    pub fn target_viewpoint(&self) -> u32 {
        check_supervision_access("target viewpoint");
        self.target_viewpoint
    }

    /// The shortest demonstration path, start to target inclusive
    /// (supervision).
    pub fn demonstration(&self) -> &[u32] {
        check_supervision_access("demonstration path");
        &self.demonstration
    }
}

/// Build the instruction for a demonstration path.
fn instruction_for_path(
    world: &WorldGraph,
    path: &[u32],
    start_heading: f64,
    max_len: usize,
) -> Result<Instruction> {
    let mut tokens = Vec::with_capacity(2 * path.len());
    let mut heading = start_heading;
    for hop in path.windows(2) {
        let abs = bearing(world.position(hop[0]), world.position(hop[1]));
        tokens.push(direction_token(abs - heading));
        tokens.push(landmark_token(world.landmark_of(hop[1])));
        heading = abs;
    }
    tokens.push(TOKEN_STOP_AT);
    tokens.push(landmark_token(world.landmark_of(*path.last().unwrap())));
    tokens.truncate(max_len);
    Instruction::new(tokens, vocab_size(world.landmark_vocab))
}

/// Generate an episode on a world: sample a start/target pair whose
/// shortest path lies within the hop bounds and beyond the success radius,
/// derive the demonstration and instruction. Deterministic given
/// `(world, seed, config)`. The episode id is the seed.
pub fn generate_episode(
    world: &WorldGraph,
    seed: u64,
    config: &EpisodeConfig,
) -> Result<EpisodeSpec> {
    if config.min_hops == 0 || config.min_hops > config.max_hops {
        return Err(Error::Generation(format!(
            "bad hop bounds [{}, {}]",
            config.min_hops, config.max_hops
        )));
    }
    let n = world.n_viewpoints() as u32;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, EPISODE_SALT));
    let heading = rng.random_range(0.0..2.0 * std::f64::consts::PI);

    let valid_pair = |start: u32, target: u32| -> Result<Option<Vec<u32>>> {
        if start == target {
            return Ok(None);
        }
        let dist = world.distances_from(target)?;
        if dist[start as usize] <= config.d_success {
            return Ok(None);
        }
        let path = world.shortest_path(start, target)?;
        let hops = path.len() - 1;
        if hops < config.min_hops || hops > config.max_hops {
            return Ok(None);
        }
        Ok(Some(path))
    };

    let mut found: Option<(u32, u32, Vec<u32>)> = None;
    for _ in 0..256 {
        let start = rng.random_range(0..n);
        let target = rng.random_range(0..n);
        if let Some(path) = valid_pair(start, target)? {
            found = Some((start, target, path));
            break;
        }
    }
    if found.is_none() {
        // Exhaustive fallback, deterministic order.
        let mut pairs = Vec::new();
        for start in 0..n {
            for target in 0..n {
                if valid_pair(start, target)?.is_some() {
                    pairs.push((start, target));
                }
            }
        }
        if pairs.is_empty() {
            return Err(Error::Generation(format!(
                "world {} has no start/target pair within [{}, {}] hops",
                world.id, config.min_hops, config.max_hops
            )));
        }
        let (start, target) = pairs[rng.random_range(0..pairs.len())];
        let path = world.shortest_path(start, target)?;
        found = Some((start, target, path));
    }
    let (start, target, path) = found.unwrap();
    let start_state = AgentState::new(start, heading);
    let instruction =
        instruction_for_path(world, &path, heading, config.max_instruction_length)?;
    EpisodeSpec::from_parts(seed, world.id, seed, instruction, start_state, target, path)
}

/// The teacher action at a state: the candidate index moving to the next
/// demonstration viewpoint, or STOP at the target. Candidates are the
/// deterministic list [`crate::worldsim::observe`] returns (MOVE per
/// neighbor ascending, STOP last).
pub fn demonstration_action(
    world: &WorldGraph,
    episode: &EpisodeSpec,
    state: &AgentState,
) -> Result<usize> {
    let demo = episode.demonstration();
    let pos = demo
        .iter()
        .position(|&v| v == state.viewpoint)
        .ok_or(Error::OffPath(state.viewpoint))?;
    let neighbors = world.neighbors(state.viewpoint);
    if pos + 1 == demo.len() {
        return Ok(neighbors.len()); // STOP is last
    }
    let next = demo[pos + 1];
    neighbors
        .iter()
        .position(|&v| v == next)
        .ok_or_else(|| Error::Integrity(format!("demonstration hop {} -> {next} is not an edge", state.viewpoint)))
}
