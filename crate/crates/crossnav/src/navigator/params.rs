//! Navigator parameter layout and initialization.

use crate::error::Result;
use crate::mathcore::init::{glorot_matrix, glorot_vector, lstm_init};
use crate::mathcore::{ParamSet, Tensor};
use rand::Rng;

/// Architecture dimensions of the navigator.
///
/// Paper-scale values are hidden 512, word embedding 300, attention inner
/// dims 256/512/256, predictor projections 256; the desk defaults below
/// keep gradient checks and training fast while preserving the structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NavigatorConfig {
    /// Instruction vocabulary size (including the critic's BOS token).
    pub vocab: usize,
    pub word_dim: usize,
    /// Hidden size of both the language and trajectory LSTMs.
    pub hidden: usize,
    /// Panoramic feature dimension (must match the world).
    pub feature_dim: usize,
    /// Orientation tiling factor (must match the world).
    pub tile_factor: usize,
    /// Projected size of the previous-action embedding fed to the LSTM.
    pub action_emb: usize,
    /// Inner dimensions of the three attention heads.
    pub attn_pano: usize,
    pub attn_text: usize,
    pub attn_visual: usize,
    /// Projection dimension shared by the action predictor's two matrices.
    pub predictor: usize,
}

impl NavigatorConfig {
    /// Desk-scale defaults for a given vocabulary and world feature shape.
    pub fn desk(vocab: usize, feature_dim: usize, tile_factor: usize) -> Self {
        Self {
            vocab,
            word_dim: 32,
            hidden: 64,
            feature_dim,
            tile_factor,
            action_emb: 32,
            attn_pano: 32,
            attn_text: 64,
            attn_visual: 32,
            predictor: 32,
        }
    }

    /// Raw `[appearance; orientation]` embedding length of an action.
    pub fn action_raw_dim(&self) -> usize {
        self.feature_dim + 4 * self.tile_factor
    }

    /// Input dimension of the trajectory LSTM: `[v_t; prev action]`.
    pub fn traj_input_dim(&self) -> usize {
        self.feature_dim + self.action_emb
    }

    /// Input dimension of the action predictor: `[h; c_text; c_visual]`.
    pub fn predictor_input_dim(&self) -> usize {
        2 * self.hidden + self.feature_dim
    }
}

/// All learnable navigator parameters, stored flat in a named set.
#[derive(Clone, Debug, PartialEq)]
pub struct NavigatorParams {
    pub config: NavigatorConfig,
    pub params: ParamSet,
}

impl NavigatorParams {
    /// Glorot-uniform matrices, zero biases, forget-gate bias 1, and a
    /// learned STOP embedding.
    pub fn init(config: NavigatorConfig, rng: &mut impl Rng) -> Result<Self> {
        let mut p = ParamSet::new();
        p.insert("word_emb", glorot_matrix(config.vocab, config.word_dim, rng))?;
        let (wx, wh, b) = lstm_init(config.word_dim, config.hidden, rng);
        p.insert("lang_wx", wx)?;
        p.insert("lang_wh", wh)?;
        p.insert("lang_b", b)?;
        let (wx, wh, b) = lstm_init(config.traj_input_dim(), config.hidden, rng);
        p.insert("traj_wx", wx)?;
        p.insert("traj_wh", wh)?;
        p.insert("traj_b", b)?;
        p.insert("pano_q", glorot_matrix(config.hidden, config.attn_pano, rng))?;
        p.insert("pano_k", glorot_matrix(config.feature_dim, config.attn_pano, rng))?;
        p.insert("text_q", glorot_matrix(config.hidden, config.attn_text, rng))?;
        p.insert("text_k", glorot_matrix(config.hidden, config.attn_text, rng))?;
        p.insert("vis_q", glorot_matrix(config.hidden, config.attn_visual, rng))?;
        p.insert("vis_k", glorot_matrix(config.feature_dim, config.attn_visual, rng))?;
        p.insert(
            "act_w",
            glorot_matrix(config.action_raw_dim(), config.action_emb, rng),
        )?;
        p.insert("act_b", Tensor::zeros(vec![config.action_emb]))?;
        p.insert(
            "w_c",
            glorot_matrix(config.predictor_input_dim(), config.predictor, rng),
        )?;
        p.insert(
            "w_u",
            glorot_matrix(config.action_raw_dim(), config.predictor, rng),
        )?;
        p.insert(
            "stop_emb",
            glorot_vector(config.action_raw_dim(), config.action_raw_dim(), 1, rng),
        )?;
        Ok(Self { config, params: p })
    }

    /// Same layout with all values zero (for tests and gradients).
    pub fn zeros(config: NavigatorConfig) -> Self {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        use rand::SeedableRng;
        let mut out = Self::init(config, &mut rng).expect("layout is valid");
        for (_, t) in out.params.iter_mut() {
            t.values_mut().fill(0.0);
        }
        out
    }

    pub fn get(&self, name: &str) -> &Tensor {
        self.params.get(name).expect("fixed layout")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layout_dimensions_are_consistent() {
        let config = NavigatorConfig::desk(10, 8, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let nav = NavigatorParams::init(config, &mut rng).unwrap();
        assert_eq!(nav.get("word_emb").shape(), &[10, 32]);
        assert_eq!(nav.get("traj_wx").shape(), &[8 + 32, 4 * 64]);
        assert_eq!(nav.get("w_c").shape(), &[2 * 64 + 8, 32]);
        assert_eq!(nav.get("stop_emb").shape(), &[8 + 4 * 2]);
        // Forget-gate bias block is 1.
        let b = nav.get("traj_b").values();
        assert!(b[64..128].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let config = NavigatorConfig::desk(6, 4, 1);
        let a = NavigatorParams::init(config, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = NavigatorParams::init(config, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }
}
