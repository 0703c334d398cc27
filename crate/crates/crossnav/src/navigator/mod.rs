//! The cross-modal reasoning navigator π_θ.
//!
//! At each step the policy chains three attentions — panoramic (queried by
//! the trajectory history), textual (queried by the new history context),
//! and visual (queried by the textual context) — and scores each navigable
//! candidate with a bilinear predictor over `[h; c_text; c_visual]`.
//! Forward passes cache their intermediates; the backward pass replays a
//! trajectory exactly (same observations, same dropout masks) and
//! accumulates hand-derived gradients.

pub mod backward;
pub mod forward;
pub mod params;
pub mod rollout;

pub use backward::trajectory_logprob_backward;
pub use forward::{
    encode_instruction, navigator_step, step_forward, EncodedInstruction, NavigatorStepOutput,
    StepCache, StepState,
};
pub use params::{NavigatorConfig, NavigatorParams};
pub use rollout::{rollout, rollout_with, trajectory_logprobs, ActionSelect, TrajStep, Trajectory};

#[cfg(test)]
pub(crate) mod testkit {
    //! Micro-scale worlds and navigators for gradient checks.

    use super::*;
    use crate::worldsim::{
        generate_episode, generate_world, vocab_size, EpisodeConfig, EpisodeSpec, WorldConfig,
        WorldGraph,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub fn micro_world_config() -> WorldConfig {
        WorldConfig {
            n_viewpoints: 8,
            mean_degree: 2.5,
            feature_dim: 3,
            patch_count: 4,
            landmark_vocab: 4,
            noise_sigma: 0.05,
            tile_factor: 1,
            landmark_seed: 5,
        }
    }

    pub fn micro_nav_config(world: &WorldConfig) -> NavigatorConfig {
        NavigatorConfig {
            vocab: vocab_size(world.landmark_vocab),
            word_dim: 3,
            hidden: 4,
            feature_dim: world.feature_dim,
            tile_factor: world.tile_factor,
            action_emb: 3,
            attn_pano: 3,
            attn_text: 4,
            attn_visual: 3,
            predictor: 3,
        }
    }

    pub fn micro_setup(seed: u64) -> (WorldGraph, EpisodeSpec, NavigatorParams) {
        let wc = micro_world_config();
        let world = generate_world(&wc, 0, seed).unwrap();
        let episode = generate_episode(
            &world,
            seed ^ 0xabcd,
            &EpisodeConfig {
                min_hops: 2,
                max_hops: 3,
                d_success: 0.5,
                max_instruction_length: 80,
            },
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x55);
        let nav = NavigatorParams::init(micro_nav_config(&wc), &mut rng).unwrap();
        (world, episode, nav)
    }
}
