//! Instruction-following navigation on procedurally generated graph worlds.
//!
//! The crate implements a cross-modal matching navigator (a policy that
//! attends over an instruction and a panoramic observation at every step),
//! a matching critic that scores trajectories by the probability of
//! reconstructing their instruction (the cycle-reconstruction reward), and
//! three training regimes on top of them: supervised warm start, REINFORCE
//! with a mixed extrinsic/intrinsic reward, and self-imitation on the
//! agent's own best rollouts.
//!
//! Everything is plain `f64` with hand-derived backward passes, verified
//! against central finite differences. There is no autodiff tape and no
//! GPU path; the point is a small, auditable implementation.
//!
//! Module map:
//!
//! - [`mathcore`]: tensors, parameter sets, softmax / affine / attention /
//!   LSTM with backward passes, Adam, and the finite-difference checker.
//! - [`worldsim`]: procedural viewpoint graphs, synthetic instruction and
//!   demonstration generation, observations, transitions, geodesics.
//! - [`navigator`]: the cross-modal policy and its rollout machinery.
//! - [`critic`]: the matching critic and the intrinsic reward.
//! - [`learner`]: reward algebra, SL / RL / SIL update steps, the replay
//!   buffer, and the training orchestrator.
//! - [`metrics`]: PL / NE / OSR / SR / SPL per episode and aggregated.
//! - [`cli`]: run configuration, checkpoints, trace logs, subcommands.

pub mod cli;
pub mod critic;
pub mod error;
pub mod learner;
pub mod mathcore;
pub mod metrics;
pub mod navigator;
pub mod worldsim;

pub use error::{Error, Result};
