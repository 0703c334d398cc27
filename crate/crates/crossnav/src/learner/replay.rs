//! The self-imitation replay buffer: best trajectory per episode.

use crate::navigator::Trajectory;
use std::collections::BTreeMap;

/// One stored rollout and the critic reward it earned at collection time.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayEntry {
    pub trajectory: Trajectory,
    pub reward: f64,
}

/// Keeps at most one entry per episode: the best-rewarded trajectory seen
/// so far. Replacement requires a strictly better reward, so stored
/// rewards are monotone non-decreasing.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReplayBuffer {
    entries: BTreeMap<u64, ReplayEntry>,
}

impl ReplayBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, episode_id: u64) -> Option<&ReplayEntry> {
        self.entries.get(&episode_id)
    }

    /// Offer a trajectory; it is stored only when no entry exists for its
    /// episode or its reward strictly beats the stored one. Returns whether
    /// it was stored.
    pub fn offer(&mut self, trajectory: Trajectory, reward: f64) -> bool {
        let id = trajectory.episode_id;
        match self.entries.get(&id) {
            Some(existing) if existing.reward >= reward => false,
            _ => {
                self.entries.insert(id, ReplayEntry { trajectory, reward });
                true
            }
        }
    }

    /// Entries in episode-id order (deterministic).
    pub fn iter(&self) -> impl Iterator<Item = (&u64, &ReplayEntry)> {
        self.entries.iter()
    }
}
