//! Observations and transitions: panoramic patches, action candidates,
//! headings.

use crate::error::{Error, Result};
use crate::mathcore::mix_seed3;
use crate::worldsim::graph::WorldGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const OBSERVE_SALT: u64 = 0x6f62_7365; // "obse"

/// Where the agent stands and faces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AgentState {
    pub viewpoint: u32,
    /// Heading ψ in radians, [0, 2π), measured from +x counterclockwise.
    pub heading: f64,
    /// Elevation ω in radians; fixed 0 on single-floor worlds.
    pub elevation: f64,
}

impl AgentState {
    pub fn new(viewpoint: u32, heading: f64) -> Self {
        Self {
            viewpoint,
            heading: normalize_angle(heading),
            elevation: 0.0,
        }
    }
}

/// Wrap an angle into [0, 2π).
pub fn normalize_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut r = a % two_pi;
    if r < 0.0 {
        r += two_pi;
    }
    if r >= two_pi {
        r = 0.0;
    }
    r
}

/// Wrap an angle into (−π, π].
pub fn signed_angle(a: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let r = normalize_angle(a);
    if r > pi {
        r - 2.0 * pi
    } else {
        r
    }
}

/// Absolute bearing (radians in [0, 2π)) of `to` as seen from `from`.
pub fn bearing(from: [f64; 3], to: [f64; 3]) -> f64 {
    normalize_angle((to[1] - from[1]).atan2(to[0] - from[0]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CandidateKind {
    /// Move along an edge to a neighboring viewpoint.
    Move { target: u32 },
    /// End the episode in place.
    Stop,
}

/// One navigable direction (or STOP).
///
/// MOVE candidates carry the appearance feature of the panoramic patch
/// covering their bearing and a tiled `[sin ψ; cos ψ; sin ω; cos ω]`
/// orientation relative to the current heading. The STOP candidate's
/// appearance and orientation are dedicated learned embeddings owned by
/// the models, so both vectors are empty here.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionCandidate {
    pub kind: CandidateKind,
    pub appearance: Vec<f64>,
    pub orientation: Vec<f64>,
}

impl ActionCandidate {
    pub fn is_stop(&self) -> bool {
        matches!(self.kind, CandidateKind::Stop)
    }
}

/// What the agent perceives at a state: `m` panoramic patch features and
/// the candidate list (MOVE per neighbor, ascending id, then STOP).
#[derive(Clone, Debug, PartialEq)]
pub struct PanoramicObservation {
    pub patches: Vec<Vec<f64>>,
    pub candidates: Vec<ActionCandidate>,
}

impl PanoramicObservation {
    /// Index of the STOP candidate (always the last).
    pub fn stop_index(&self) -> usize {
        self.candidates.len() - 1
    }

    /// Index of the MOVE candidate leading to `target`, if present.
    pub fn move_index(&self, target: u32) -> Option<usize> {
        self.candidates
            .iter()
            .position(|c| c.kind == CandidateKind::Move { target })
    }
}

/// The panoramic patch sector (0..m) covering an absolute bearing.
pub fn patch_sector(bearing: f64, patch_count: usize) -> usize {
    let two_pi = 2.0 * std::f64::consts::PI;
    let j = (normalize_angle(bearing) / two_pi * patch_count as f64).floor() as usize;
    j.min(patch_count - 1)
}

/// Standard normal via Box–Muller, two uniform draws per sample.
fn normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Observe the world at a state.
///
/// Patch `j` covers the absolute heading sector `[2πj/m, 2π(j+1)/m)`; its
/// feature is the landmark embedding of the neighbor whose bearing falls
/// in that sector (smallest id when several share one), or zero, plus
/// Gaussian noise. Noise is deterministic per `(world, viewpoint,
/// episode_seed)`, so revisiting a viewpoint within an episode reproduces
/// the observation exactly.
pub fn observe(
    world: &WorldGraph,
    state: &AgentState,
    episode_seed: u64,
) -> Result<PanoramicObservation> {
    if !world.contains(state.viewpoint) {
        return Err(Error::InvalidArgument(format!(
            "unknown viewpoint {}",
            state.viewpoint
        )));
    }
    let m = world.patch_count;
    let here = world.position(state.viewpoint);
    let neighbors = world.neighbors(state.viewpoint);

    let mut sector_owner: Vec<Option<u32>> = vec![None; m];
    let mut neighbor_sector = Vec::with_capacity(neighbors.len());
    for &nb in neighbors {
        let sector = patch_sector(bearing(here, world.position(nb)), m);
        neighbor_sector.push(sector);
        // Ascending neighbor order makes the smallest id win its sector.
        if sector_owner[sector].is_none() {
            sector_owner[sector] = Some(nb);
        }
    }

    let mut noise_rng = ChaCha8Rng::seed_from_u64(mix_seed3(
        world.seed,
        state.viewpoint as u64 ^ OBSERVE_SALT,
        episode_seed,
    ));
    let mut patches = Vec::with_capacity(m);
    for owner in &sector_owner {
        let mut patch = match owner {
            Some(nb) => world.landmark_feature(world.landmark_of(*nb)).to_vec(),
            None => vec![0.0; world.feature_dim],
        };
        for v in &mut patch {
            *v += world.noise_sigma * normal(&mut noise_rng);
        }
        patches.push(patch);
    }

    let mut candidates = Vec::with_capacity(neighbors.len() + 1);
    for (&nb, &sector) in neighbors.iter().zip(&neighbor_sector) {
        let abs = bearing(here, world.position(nb));
        let rel = normalize_angle(abs - state.heading);
        let quad = [rel.sin(), rel.cos(), state.elevation.sin(), state.elevation.cos()];
        let orientation: Vec<f64> = quad
            .iter()
            .cycle()
            .take(4 * world.tile_factor)
            .copied()
            .collect();
        candidates.push(ActionCandidate {
            kind: CandidateKind::Move { target: nb },
            appearance: patches[sector].clone(),
            orientation,
        });
    }
    candidates.push(ActionCandidate {
        kind: CandidateKind::Stop,
        appearance: Vec::new(),
        orientation: Vec::new(),
    });
    Ok(PanoramicObservation { patches, candidates })
}

/// Execute an action. MOVE relocates the agent and turns it to face the
/// direction of travel; STOP leaves the state unchanged (terminal).
pub fn transition(
    world: &WorldGraph,
    state: &AgentState,
    action: &ActionCandidate,
) -> Result<AgentState> {
    match action.kind {
        CandidateKind::Stop => Ok(*state),
        CandidateKind::Move { target } => {
            if !world.neighbors(state.viewpoint).contains(&target) {
                return Err(Error::InvalidAction(format!(
                    "{} is not a neighbor of {}",
                    target, state.viewpoint
                )));
            }
            let heading = bearing(world.position(state.viewpoint), world.position(target));
            Ok(AgentState {
                viewpoint: target,
                heading,
                elevation: state.elevation,
            })
        }
    }
}
