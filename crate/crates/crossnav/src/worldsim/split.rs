//! Train / seen-validation / unseen-validation dataset splits.
//!
//! Seen-validation episodes reuse the training worlds under disjoint
//! episode seeds; unseen-validation worlds come from disjoint world seeds.
//! The landmark vocabulary (and embedding table) is shared across all
//! splits.

use crate::error::Result;
use crate::mathcore::mix_seed3;
use crate::worldsim::episode::{generate_episode, EpisodeConfig, EpisodeSpec};
use crate::worldsim::graph::{generate_world, WorldConfig, WorldGraph};

const WORLD_SALT: u64 = 0x776f_726c; // "worl"
const TRAIN_SALT: u64 = 0x7472_6169; // "trai"
const SEEN_SALT: u64 = 0x7365_656e; // "seen"
const UNSEEN_SALT: u64 = 0x756e_7365; // "unse"

/// Sizes of a generated dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitConfig {
    pub train_worlds: usize,
    pub unseen_worlds: usize,
    pub train_episodes: usize,
    pub seen_val_episodes: usize,
    pub unseen_val_episodes: usize,
    pub world: WorldConfig,
    pub episode: EpisodeConfig,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_worlds: 20,
            unseen_worlds: 5,
            train_episodes: 500,
            seen_val_episodes: 100,
            unseen_val_episodes: 100,
            world: WorldConfig::default(),
            episode: EpisodeConfig::default(),
        }
    }
}

/// Which split an episode belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    SeenVal,
    UnseenVal,
}

impl Split {
    pub fn name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::SeenVal => "seen_val",
            Split::UnseenVal => "unseen_val",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "seen_val" => Some(Split::SeenVal),
            "unseen_val" => Some(Split::UnseenVal),
            _ => None,
        }
    }
}

/// A generated dataset: all worlds (training first, then unseen) and the
/// three episode lists.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub worlds: Vec<WorldGraph>,
    pub train_world_count: usize,
    pub train: Vec<EpisodeSpec>,
    pub seen_val: Vec<EpisodeSpec>,
    pub unseen_val: Vec<EpisodeSpec>,
}

impl Dataset {
    pub fn world(&self, id: u32) -> &WorldGraph {
        &self.worlds[id as usize]
    }

    pub fn episodes(&self, split: Split) -> &[EpisodeSpec] {
        match split {
            Split::Train => &self.train,
            Split::SeenVal => &self.seen_val,
            Split::UnseenVal => &self.unseen_val,
        }
    }

    pub fn is_training_world(&self, id: u32) -> bool {
        (id as usize) < self.train_world_count
    }
}

/// Generate the full dataset. Deterministic given `(config, seed)`.
pub fn generate_split(config: &SplitConfig, seed: u64) -> Result<Dataset> {
    let mut worlds = Vec::with_capacity(config.train_worlds + config.unseen_worlds);
    for w in 0..config.train_worlds + config.unseen_worlds {
        let world_seed = mix_seed3(seed, WORLD_SALT, w as u64);
        worlds.push(generate_world(&config.world, w as u32, world_seed)?);
    }

    let gen_over = |count: usize,
                    salt: u64,
                    world_pool: &[WorldGraph]|
     -> Result<Vec<EpisodeSpec>> {
        (0..count)
            .map(|e| {
                let world = &world_pool[e % world_pool.len()];
                let ep_seed = mix_seed3(seed, salt, e as u64);
                generate_episode(world, ep_seed, &config.episode)
            })
            .collect()
    };

    let train_pool = &worlds[..config.train_worlds];
    let unseen_pool = &worlds[config.train_worlds..];
    let train = gen_over(config.train_episodes, TRAIN_SALT, train_pool)?;
    let seen_val = gen_over(config.seen_val_episodes, SEEN_SALT, train_pool)?;
    let unseen_val = gen_over(config.unseen_val_episodes, UNSEEN_SALT, unseen_pool)?;

    Ok(Dataset {
        worlds,
        train_world_count: config.train_worlds,
        train,
        seen_val,
        unseen_val,
    })
}
