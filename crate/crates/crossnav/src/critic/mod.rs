//! The matching critic V_β and the cycle-reconstruction reward.
//!
//! An attention-based trajectory-to-instruction sequence model: it encodes
//! an executed trajectory and scores how probable the original instruction
//! is under a teacher-forced decoder. The length-normalized reconstruction
//! probability is the intrinsic reward. Pre-trained by MLE on
//! demonstration pairs, then frozen during policy learning.

pub mod model;
pub mod params;

pub use model::{
    critic_mle_gradients, encode_trajectory, instruction_logprob, intrinsic_reward,
    IntrinsicReward,
};
pub use params::{CriticConfig, CriticParams};
