//! Matching critic forward and backward passes.
//!
//! Encoder: per trajectory step, attend over the panoramic patches with
//! the previous encoder hidden state and run an LSTM over `[attended
//! patches; action embedding]`. Decoder (teacher forced): attend over the
//! encoded steps with the previous decoder hidden state, run an LSTM over
//! `[previous token embedding; context]`, and score the vocabulary with
//! Linear → Tanh → Linear → Softmax.

use crate::error::{Error, Result};
use crate::mathcore::dropout::{apply_mask, Mode};
use crate::mathcore::ops::{
    add_assign, affine, attention_backward, attention_forward, lstm_backward, lstm_forward,
    outer_acc, softmax, vec_mat_t, AttnCache, LstmCache,
};
use crate::mathcore::ParamSet;
use crate::navigator::forward::candidate_raw;
use crate::navigator::Trajectory;
use crate::worldsim::{observe, Instruction, WorldGraph};

const SITE_ENC: u64 = 0x11_0000_0000;
const SITE_DEC: u64 = 0x12_0000_0000;

use crate::critic::params::CriticParams;

struct EncStep {
    pano: AttnCache,
    act_raw: Vec<f64>,
    act_is_stop: bool,
    lstm: LstmCache,
    mask: Option<Vec<f64>>,
}

struct DecStep {
    attn: AttnCache,
    prev_token: u32,
    lstm: LstmCache,
    h_dropped: Vec<f64>,
    mask: Option<Vec<f64>>,
    tanh: Vec<f64>,
    probs: Vec<f64>,
    target: u32,
}

struct CriticForward {
    enc: Vec<EncStep>,
    dec: Vec<DecStep>,
}

impl CriticForward {
    fn logprobs(&self) -> Vec<f64> {
        self.dec.iter().map(|d| d.probs[d.target as usize].ln()).collect()
    }
}

fn encode(
    critic: &CriticParams,
    trajectory: &Trajectory,
    world: &WorldGraph,
    mode: Mode,
) -> Result<Vec<EncStep>> {
    if trajectory.steps.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    let config = &critic.config;
    let mut h = vec![0.0; config.hidden];
    let mut c = vec![0.0; config.hidden];
    let mut steps = Vec::with_capacity(trajectory.steps.len());
    for (t, step) in trajectory.steps.iter().enumerate() {
        let obs = observe(world, &step.state, trajectory.episode_seed)?;
        if obs.candidates != step.candidates {
            return Err(Error::Integrity(format!(
                "trajectory step {t} candidates diverge from the world"
            )));
        }
        let pano = attention_forward(
            &h,
            &obs.patches,
            critic.get("pano_q"),
            critic.get("pano_k"),
        )?;
        let (act_raw, act_is_stop) = candidate_raw(
            &step.candidates[step.action],
            critic.get("stop_emb").values(),
            config.action_raw_dim(),
        )?;
        let act_emb = affine(&act_raw, critic.get("act_w"), critic.get("act_b").values())?;
        let mut input = pano.context.clone();
        input.extend_from_slice(&act_emb);
        let lstm = lstm_forward(
            &input,
            &h,
            &c,
            critic.get("enc_wx"),
            critic.get("enc_wh"),
            critic.get("enc_b").values(),
        )?;
        h = lstm.h_new.clone();
        c = lstm.c_new.clone();
        let mask = mode.mask(SITE_ENC | t as u64, config.hidden);
        steps.push(EncStep {
            pano,
            act_raw,
            act_is_stop,
            lstm,
            mask,
        });
    }
    Ok(steps)
}

fn enc_features(steps: &[EncStep]) -> Vec<Vec<f64>> {
    steps
        .iter()
        .map(|s| {
            let mut f = s.lstm.h_new.clone();
            apply_mask(&mut f, s.mask.as_ref());
            f
        })
        .collect()
}

/// Per-step features of an encoded trajectory (dropout applied).
pub fn encode_trajectory(
    trajectory: &Trajectory,
    world: &WorldGraph,
    critic: &CriticParams,
    mode: Mode,
) -> Result<Vec<Vec<f64>>> {
    Ok(enc_features(&encode(critic, trajectory, world, mode)?))
}

fn forward(
    critic: &CriticParams,
    instruction: &Instruction,
    trajectory: &Trajectory,
    world: &WorldGraph,
    mode: Mode,
) -> Result<CriticForward> {
    let config = &critic.config;
    if instruction.is_empty() {
        return Err(Error::InvalidArgument("empty instruction".into()));
    }
    for &t in instruction.tokens() {
        if t as usize >= config.vocab {
            return Err(Error::InvalidArgument(format!(
                "token {t} outside vocabulary {}",
                config.vocab
            )));
        }
    }
    let enc = encode(critic, trajectory, world, mode)?;
    let features = enc_features(&enc);
    // The begin-of-sequence token is the last vocabulary slot.
    let bos = (config.vocab - 1) as u32;

    let emb = critic.get("word_emb");
    let mut h = vec![0.0; config.hidden];
    let mut c = vec![0.0; config.hidden];
    let mut dec = Vec::with_capacity(instruction.len());
    for (i, &target) in instruction.tokens().iter().enumerate() {
        let prev_token = if i == 0 { bos } else { instruction.tokens()[i - 1] };
        // Attention over the encoded trajectory, queried by the previous
        // decoder hidden state.
        let attn = attention_forward(&h, &features, critic.get("dec_q"), critic.get("dec_k"))?;
        let mut input = emb.row(prev_token as usize).to_vec();
        input.extend_from_slice(&attn.context);
        let lstm = lstm_forward(
            &input,
            &h,
            &c,
            critic.get("dec_wx"),
            critic.get("dec_wh"),
            critic.get("dec_b").values(),
        )?;
        h = lstm.h_new.clone();
        c = lstm.c_new.clone();
        let mask = mode.mask(SITE_DEC | i as u64, config.hidden);
        let mut h_dropped = h.clone();
        apply_mask(&mut h_dropped, mask.as_ref());
        // Linear → Tanh → Linear → Softmax.
        let tanh: Vec<f64> =
            affine(&h_dropped, critic.get("head_w1"), critic.get("head_b1").values())?
                .iter()
                .map(|v| v.tanh())
                .collect();
        let logits = affine(&tanh, critic.get("head_w2"), critic.get("head_b2").values())?;
        let probs = softmax(&logits)?;
        dec.push(DecStep {
            attn,
            prev_token,
            lstm,
            h_dropped,
            mask,
            tanh,
            probs,
            target,
        });
    }
    Ok(CriticForward { enc, dec })
}

/// Teacher-forced per-token log-probabilities `log p_β(x_i | x_{<i}, τ)`.
pub fn instruction_logprob(
    instruction: &Instruction,
    trajectory: &Trajectory,
    world: &WorldGraph,
    critic: &CriticParams,
    mode: Mode,
) -> Result<Vec<f64>> {
    Ok(forward(critic, instruction, trajectory, world, mode)?.logprobs())
}

/// The cycle-reconstruction intrinsic reward: the geometric mean of the
/// critic's per-token reconstruction probabilities, `exp(mean log p)`.
/// Always in (0, 1], reaching 1 only when every token has probability 1.
#[derive(Clone, Debug, PartialEq)]
pub struct IntrinsicReward {
    value: f64,
    per_token_logprobs: Vec<f64>,
}

impl IntrinsicReward {
    pub fn from_logprobs(per_token_logprobs: Vec<f64>) -> Result<Self> {
        if per_token_logprobs.is_empty() {
            return Err(Error::InvalidArgument("reward over zero tokens".into()));
        }
        if per_token_logprobs.iter().any(|&lp| lp > 0.0 || !lp.is_finite()) {
            return Err(Error::Numeric("log-probabilities must be finite and ≤ 0".into()));
        }
        let value = Self::mean(&per_token_logprobs).exp();
        Ok(Self {
            value,
            per_token_logprobs,
        })
    }

    fn mean(lps: &[f64]) -> f64 {
        lps.iter().sum::<f64>() / lps.len() as f64
    }

    /// Length-normalized reconstruction probability, in (0, 1].
    pub fn value(&self) -> f64 {
        self.value
    }

    /// The alternative normalization (mean log-probability, ≤ 0), kept for
    /// comparison behind the reward-form switch.
    pub fn mean_log_prob(&self) -> f64 {
        Self::mean(&self.per_token_logprobs)
    }

    pub fn per_token_logprobs(&self) -> &[f64] {
        &self.per_token_logprobs
    }
}

/// Evaluate the intrinsic reward of a trajectory against an instruction
/// (always in evaluation mode; the critic is frozen during policy
/// learning).
pub fn intrinsic_reward(
    instruction: &Instruction,
    trajectory: &Trajectory,
    world: &WorldGraph,
    critic: &CriticParams,
) -> Result<IntrinsicReward> {
    IntrinsicReward::from_logprobs(instruction_logprob(
        instruction,
        trajectory,
        world,
        critic,
        Mode::Eval,
    )?)
}

/// MLE loss `−(1/n) Σ_i log p_β(x_i | ...)` and its gradients for one
/// demonstration pair.
pub fn critic_mle_gradients(
    instruction: &Instruction,
    trajectory: &Trajectory,
    world: &WorldGraph,
    critic: &CriticParams,
    mode: Mode,
) -> Result<(f64, ParamSet)> {
    let fwd = forward(critic, instruction, trajectory, world, mode)?;
    let logprobs = fwd.logprobs();
    let n = logprobs.len() as f64;
    let loss = -logprobs.iter().sum::<f64>() / n;
    let grads = backward(critic, &fwd, -1.0 / n)?;
    Ok((loss, grads))
}

/// Gradients of `scale · Σ_i log p(x_i)` with respect to every critic
/// parameter.
fn backward(critic: &CriticParams, fwd: &CriticForward, scale: f64) -> Result<ParamSet> {
    let config = &critic.config;
    let hidden = config.hidden;
    let mut grads = critic.params.zeros_like();

    // Decoder walk, newest token first.
    let mut d_enc_feats = vec![vec![0.0; hidden]; fwd.enc.len()];
    let mut dh_next = vec![0.0; hidden];
    let mut dc_next = vec![0.0; hidden];
    for i in (0..fwd.dec.len()).rev() {
        let step = &fwd.dec[i];
        let mut dlogits: Vec<f64> = step.probs.iter().map(|p| -scale * p).collect();
        dlogits[step.target as usize] += scale;

        // Head: Linear → Tanh → Linear.
        let d_tanh = {
            let [g_w2, g_b2] = grads.get_two(["head_w2", "head_b2"])?;
            outer_acc(g_w2, &step.tanh, &dlogits);
            add_assign(g_b2.values_mut(), &dlogits);
            vec_mat_t(&dlogits, critic.get("head_w2"))
        };
        let d_pre: Vec<f64> = d_tanh
            .iter()
            .zip(&step.tanh)
            .map(|(d, t)| d * (1.0 - t * t))
            .collect();
        let mut dh_dropped = {
            let [g_w1, g_b1] = grads.get_two(["head_w1", "head_b1"])?;
            outer_acc(g_w1, &step.h_dropped, &d_pre);
            add_assign(g_b1.values_mut(), &d_pre);
            vec_mat_t(&d_pre, critic.get("head_w1"))
        };
        apply_mask(&mut dh_dropped, step.mask.as_ref());
        let mut dh = dh_dropped;
        add_assign(&mut dh, &dh_next);

        let lstm_out = {
            let [g_wx, g_wh, g_b] = grads.get_three(["dec_wx", "dec_wh", "dec_b"])?;
            lstm_backward(
                &step.lstm,
                critic.get("dec_wx"),
                critic.get("dec_wh"),
                &dh,
                &dc_next,
                g_wx,
                g_wh,
                g_b.values_mut(),
            )
        };
        let d_word = &lstm_out.d_input[..config.word_dim];
        let d_ctx = &lstm_out.d_input[config.word_dim..];
        add_assign(
            grads.get_mut("word_emb")?.row_mut(step.prev_token as usize),
            d_word,
        );
        let attn_out = {
            let [g_q, g_k] = grads.get_two(["dec_q", "dec_k"])?;
            attention_backward(
                &step.attn,
                critic.get("dec_q"),
                critic.get("dec_k"),
                d_ctx,
                None,
                g_q,
                g_k,
            )
        };
        for (acc, df) in d_enc_feats.iter_mut().zip(&attn_out.d_feats) {
            add_assign(acc, df);
        }
        dh_next = lstm_out.d_h_prev;
        add_assign(&mut dh_next, &attn_out.d_query);
        dc_next = lstm_out.d_c_prev;
    }

    // Encoder walk, newest step first.
    let mut dh_enc = vec![0.0; hidden];
    let mut dc_enc = vec![0.0; hidden];
    for t in (0..fwd.enc.len()).rev() {
        let step = &fwd.enc[t];
        let mut dfeat = d_enc_feats[t].clone();
        apply_mask(&mut dfeat, step.mask.as_ref());
        add_assign(&mut dfeat, &dh_enc);
        let lstm_out = {
            let [g_wx, g_wh, g_b] = grads.get_three(["enc_wx", "enc_wh", "enc_b"])?;
            lstm_backward(
                &step.lstm,
                critic.get("enc_wx"),
                critic.get("enc_wh"),
                &dfeat,
                &dc_enc,
                g_wx,
                g_wh,
                g_b.values_mut(),
            )
        };
        let dv = &lstm_out.d_input[..config.feature_dim];
        let d_act_emb = &lstm_out.d_input[config.feature_dim..];
        {
            let [g_w, g_b] = grads.get_two(["act_w", "act_b"])?;
            outer_acc(g_w, &step.act_raw, d_act_emb);
            add_assign(g_b.values_mut(), d_act_emb);
        }
        if step.act_is_stop {
            let d_raw = vec_mat_t(d_act_emb, critic.get("act_w"));
            add_assign(grads.get_mut("stop_emb")?.values_mut(), &d_raw);
        }
        let pano_out = {
            let [g_q, g_k] = grads.get_two(["pano_q", "pano_k"])?;
            attention_backward(
                &step.pano,
                critic.get("pano_q"),
                critic.get("pano_k"),
                dv,
                None,
                g_q,
                g_k,
            )
        };
        dh_enc = lstm_out.d_h_prev;
        add_assign(&mut dh_enc, &pano_out.d_query);
        dc_enc = lstm_out.d_c_prev;
    }
    // dh_enc / dc_enc land on the zero initial state: discarded.
    Ok(grads)
}
