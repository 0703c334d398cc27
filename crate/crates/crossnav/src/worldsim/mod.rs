//! Procedural navigation environments.
//!
//! Connected viewpoint graphs with landmark-derived panoramic features,
//! synthetic instruction/demonstration pairs, transition and observation
//! functions, geodesic distances, and dataset splits. All generation and
//! observation is a pure function of `(config, seeds)`.

pub mod episode;
pub mod graph;
pub mod guard;
pub mod observe;
pub mod serialize;
pub mod split;

pub use episode::{
    bos_token, demonstration_action, direction_token, generate_episode, landmark_token,
    token_name, vocab_size, EpisodeConfig, EpisodeSpec, Instruction, TOKEN_BACK, TOKEN_FORWARD,
    TOKEN_LEFT, TOKEN_RIGHT, TOKEN_STOP_AT,
};
pub use graph::{
    generate_world, geodesic_distance, landmark_feature_table, Viewpoint, WorldConfig,
    WorldGraph, SPACING,
};
pub use guard::{supervision_blocked, without_supervision};
pub use observe::{
    bearing, normalize_angle, observe, patch_sector, signed_angle, transition, ActionCandidate,
    AgentState, CandidateKind, PanoramicObservation,
};
pub use serialize::{fmt_real, read_dataset, write_dataset, WORLD_MAGIC};
pub use split::{generate_split, Dataset, Split, SplitConfig};
