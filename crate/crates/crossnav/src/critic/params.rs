//! Matching critic parameter layout and initialization.

use crate::error::Result;
use crate::mathcore::init::{glorot_matrix, glorot_vector, lstm_init};
use crate::mathcore::{ParamSet, Tensor};
use rand::Rng;

/// Architecture dimensions of the matching critic.
///
/// The trajectory encoder mirrors the navigator's history-context
/// machinery; the decoder is an attention + LSTM + two-layer head over the
/// shared instruction vocabulary. Paper scale uses hidden 512, word
/// embedding 300, decoder attention projection 512.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CriticConfig {
    /// Must equal the navigator's instruction vocabulary.
    pub vocab: usize,
    pub word_dim: usize,
    pub hidden: usize,
    pub feature_dim: usize,
    pub tile_factor: usize,
    pub action_emb: usize,
    /// Encoder panoramic attention inner dimension.
    pub attn_pano: usize,
    /// Decoder attention projection dimension.
    pub attn_decode: usize,
}

impl CriticConfig {
    pub fn desk(vocab: usize, feature_dim: usize, tile_factor: usize) -> Self {
        Self {
            vocab,
            word_dim: 32,
            hidden: 64,
            feature_dim,
            tile_factor,
            action_emb: 32,
            attn_pano: 32,
            attn_decode: 64,
        }
    }

    pub fn action_raw_dim(&self) -> usize {
        self.feature_dim + 4 * self.tile_factor
    }

    pub fn encoder_input_dim(&self) -> usize {
        self.feature_dim + self.action_emb
    }

    pub fn decoder_input_dim(&self) -> usize {
        self.word_dim + self.hidden
    }
}

/// All learnable critic parameters (β), stored flat in a named set. The
/// critic owns its word embedding table, separate from the navigator's.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticParams {
    pub config: CriticConfig,
    pub params: ParamSet,
}

impl CriticParams {
    pub fn init(config: CriticConfig, rng: &mut impl Rng) -> Result<Self> {
        let mut p = ParamSet::new();
        p.insert("word_emb", glorot_matrix(config.vocab, config.word_dim, rng))?;
        p.insert("pano_q", glorot_matrix(config.hidden, config.attn_pano, rng))?;
        p.insert("pano_k", glorot_matrix(config.feature_dim, config.attn_pano, rng))?;
        p.insert(
            "act_w",
            glorot_matrix(config.action_raw_dim(), config.action_emb, rng),
        )?;
        p.insert("act_b", Tensor::zeros(vec![config.action_emb]))?;
        p.insert(
            "stop_emb",
            glorot_vector(config.action_raw_dim(), config.action_raw_dim(), 1, rng),
        )?;
        let (wx, wh, b) = lstm_init(config.encoder_input_dim(), config.hidden, rng);
        p.insert("enc_wx", wx)?;
        p.insert("enc_wh", wh)?;
        p.insert("enc_b", b)?;
        p.insert("dec_q", glorot_matrix(config.hidden, config.attn_decode, rng))?;
        p.insert("dec_k", glorot_matrix(config.hidden, config.attn_decode, rng))?;
        let (wx, wh, b) = lstm_init(config.decoder_input_dim(), config.hidden, rng);
        p.insert("dec_wx", wx)?;
        p.insert("dec_wh", wh)?;
        p.insert("dec_b", b)?;
        p.insert("head_w1", glorot_matrix(config.hidden, config.hidden, rng))?;
        p.insert("head_b1", Tensor::zeros(vec![config.hidden]))?;
        p.insert("head_w2", glorot_matrix(config.hidden, config.vocab, rng))?;
        p.insert("head_b2", Tensor::zeros(vec![config.vocab]))?;
        Ok(Self { config, params: p })
    }

    pub fn zeros(config: CriticConfig) -> Self {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
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
