//! Navigator forward passes: instruction encoding and the cross-modal
//! reasoning step.

use crate::error::{Error, Result};
use crate::mathcore::dropout::{apply_mask, Mode};
use crate::mathcore::ops::{
    affine, attention_forward, lstm_forward, softmax, AttnCache, LstmCache,
};
use crate::navigator::params::NavigatorParams;
use crate::worldsim::{ActionCandidate, Instruction, PanoramicObservation};

// Dropout site tags; each site is `TAG | index`, masks replay per site.
pub(crate) const SITE_ENCODER: u64 = 0x1_0000_0000;
pub(crate) const SITE_PANO: u64 = 0x2_0000_0000;
pub(crate) const SITE_HIDDEN: u64 = 0x3_0000_0000;
pub(crate) const SITE_TEXT: u64 = 0x4_0000_0000;
pub(crate) const SITE_VISUAL: u64 = 0x5_0000_0000;

/// Per-token features of an encoded instruction, plus what the encoder
/// backward pass needs.
#[derive(Clone, Debug)]
pub struct EncodedInstruction {
    /// The features the navigator consumes (dropout already applied).
    pub features: Vec<Vec<f64>>,
    pub(crate) tokens: Vec<u32>,
    pub(crate) caches: Vec<LstmCache>,
    pub(crate) masks: Vec<Option<Vec<f64>>>,
}

impl EncodedInstruction {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Encode an instruction with the language LSTM: one hidden state per
/// token. Dropout (training mode) applies per-token masks to the outputs.
pub fn encode_instruction(
    instruction: &Instruction,
    nav: &NavigatorParams,
    mode: Mode,
) -> Result<EncodedInstruction> {
    let config = &nav.config;
    let emb = nav.get("word_emb");
    let (wx, wh, b) = (nav.get("lang_wx"), nav.get("lang_wh"), nav.get("lang_b"));
    let mut h = vec![0.0; config.hidden];
    let mut c = vec![0.0; config.hidden];
    let mut features = Vec::with_capacity(instruction.len());
    let mut caches = Vec::with_capacity(instruction.len());
    let mut masks = Vec::with_capacity(instruction.len());
    for (i, &token) in instruction.tokens().iter().enumerate() {
        if token as usize >= config.vocab {
            return Err(Error::InvalidArgument(format!(
                "token {token} outside vocabulary {}",
                config.vocab
            )));
        }
        let x = emb.row(token as usize);
        let cache = lstm_forward(x, &h, &c, wx, wh, b.values())?;
        h = cache.h_new.clone();
        c = cache.c_new.clone();
        let mask = mode.mask(SITE_ENCODER | i as u64, config.hidden);
        let mut feat = h.clone();
        apply_mask(&mut feat, mask.as_ref());
        features.push(feat);
        caches.push(cache);
        masks.push(mask);
    }
    Ok(EncodedInstruction {
        features,
        tokens: instruction.tokens().to_vec(),
        caches,
        masks,
    })
}

/// Recurrent state carried between navigator steps.
#[derive(Clone, Debug)]
pub struct StepState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    /// Raw `[appearance; orientation]` embedding of the previous action.
    pub prev_raw: Vec<f64>,
    /// True when `prev_raw` is the learned STOP embedding (initial step).
    pub prev_is_stop: bool,
}

impl StepState {
    /// Zero hidden state; the previous action starts as the STOP embedding.
    pub fn initial(nav: &NavigatorParams) -> Self {
        Self {
            h: vec![0.0; nav.config.hidden],
            c: vec![0.0; nav.config.hidden],
            prev_raw: nav.get("stop_emb").values().to_vec(),
            prev_is_stop: true,
        }
    }

    /// Advance past a chosen candidate.
    pub fn advance(&mut self, cache: &StepCache, chosen: usize) {
        self.h = cache.lstm.h_new.clone();
        self.c = cache.lstm.c_new.clone();
        self.prev_raw = cache.u[chosen].clone();
        self.prev_is_stop = cache.u_is_stop[chosen];
    }
}

/// Dropout masks drawn by one step.
#[derive(Clone, Debug, Default)]
pub(crate) struct StepMasks {
    pub pano: Option<Vec<f64>>,
    pub hidden: Option<Vec<f64>>,
    pub text: Option<Vec<f64>>,
    pub visual: Option<Vec<f64>>,
}

/// Every intermediate of one navigator step, sufficient for the backward
/// pass.
#[derive(Clone, Debug)]
pub struct StepCache {
    pub(crate) pano: AttnCache,
    pub(crate) prev_raw: Vec<f64>,
    pub(crate) prev_is_stop: bool,
    pub(crate) lstm: LstmCache,
    pub(crate) text: AttnCache,
    pub(crate) text_dropped: Vec<f64>,
    pub(crate) visual: AttnCache,
    pub(crate) visual_dropped: Vec<f64>,
    pub(crate) concat: Vec<f64>,
    pub(crate) xc: Vec<f64>,
    pub(crate) u: Vec<Vec<f64>>,
    pub(crate) u_is_stop: Vec<bool>,
    pub(crate) y: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
    pub(crate) masks: StepMasks,
}

/// What a navigator step exposes to callers.
#[derive(Clone, Debug)]
pub struct NavigatorStepOutput {
    /// New history context (recurrent, undropped).
    pub h: Vec<f64>,
    /// New LSTM cell state.
    pub cell: Vec<f64>,
    /// Visually conditioned textual context.
    pub text_context: Vec<f64>,
    /// Textually conditioned visual context.
    pub visual_context: Vec<f64>,
    /// Probability over the observation's candidates.
    pub action_probs: Vec<f64>,
    pub panoramic_weights: Vec<f64>,
    pub textual_weights: Vec<f64>,
    pub visual_weights: Vec<f64>,
}

impl StepCache {
    pub fn output(&self) -> NavigatorStepOutput {
        NavigatorStepOutput {
            h: self.lstm.h_new.clone(),
            cell: self.lstm.c_new.clone(),
            text_context: self.text_dropped.clone(),
            visual_context: self.visual_dropped.clone(),
            action_probs: self.probs.clone(),
            panoramic_weights: self.pano.weights.clone(),
            textual_weights: self.text.weights.clone(),
            visual_weights: self.visual.weights.clone(),
        }
    }
}

/// Raw embedding of a candidate: `[appearance; orientation]` for MOVE, the
/// learned STOP embedding otherwise.
pub(crate) fn candidate_raw(
    cand: &ActionCandidate,
    stop_emb: &[f64],
    expect_dim: usize,
) -> Result<(Vec<f64>, bool)> {
    if cand.is_stop() {
        return Ok((stop_emb.to_vec(), true));
    }
    let mut raw = Vec::with_capacity(cand.appearance.len() + cand.orientation.len());
    raw.extend_from_slice(&cand.appearance);
    raw.extend_from_slice(&cand.orientation);
    if raw.len() != expect_dim {
        return Err(Error::Shape(format!(
            "candidate embedding dim {} vs config {expect_dim}",
            raw.len()
        )));
    }
    Ok((raw, false))
}

/// One cross-modal reasoning step.
///
/// (a) attend over panoramic patches with the previous history context;
/// (b) LSTM over `[attended patches; previous action]`; (c) attend over
/// the instruction with the new history context; (d) attend over the
/// patches again with the textual context; (e) score each candidate with
/// the bilinear predictor and normalize. Dropout applies to the attended
/// patch vector, the non-recurrent copy of the hidden state, and both
/// contexts.
pub fn step_forward(
    nav: &NavigatorParams,
    state: &StepState,
    observation: &PanoramicObservation,
    encoded: &EncodedInstruction,
    mode: Mode,
    step_index: usize,
) -> Result<StepCache> {
    let config = &nav.config;
    if observation.candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidates to act on".into()));
    }
    for patch in &observation.patches {
        if patch.len() != config.feature_dim {
            return Err(Error::Shape(format!(
                "patch dim {} vs config {}",
                patch.len(),
                config.feature_dim
            )));
        }
    }
    let t = step_index as u64;

    // (a) panoramic attention, queried by the previous history context.
    let pano = attention_forward(
        &state.h,
        &observation.patches,
        nav.get("pano_q"),
        nav.get("pano_k"),
    )?;
    let mask_pano = mode.mask(SITE_PANO | t, config.feature_dim);
    let mut v_t = pano.context.clone();
    apply_mask(&mut v_t, mask_pano.as_ref());

    // (b) trajectory LSTM over [v_t; previous action embedding].
    let prev_emb = affine(&state.prev_raw, nav.get("act_w"), nav.get("act_b").values())?;
    let mut lstm_in = v_t;
    lstm_in.extend_from_slice(&prev_emb);
    let lstm = lstm_forward(
        &lstm_in,
        &state.h,
        &state.c,
        nav.get("traj_wx"),
        nav.get("traj_wh"),
        nav.get("traj_b").values(),
    )?;
    let mask_hidden = mode.mask(SITE_HIDDEN | t, config.hidden);
    let mut h_dropped = lstm.h_new.clone();
    apply_mask(&mut h_dropped, mask_hidden.as_ref());

    // (c) visually conditioned textual context.
    let text = attention_forward(
        &h_dropped,
        &encoded.features,
        nav.get("text_q"),
        nav.get("text_k"),
    )?;
    let mask_text = mode.mask(SITE_TEXT | t, config.hidden);
    let mut text_dropped = text.context.clone();
    apply_mask(&mut text_dropped, mask_text.as_ref());

    // (d) textually conditioned visual context.
    let visual = attention_forward(
        &text_dropped,
        &observation.patches,
        nav.get("vis_q"),
        nav.get("vis_k"),
    )?;
    let mask_visual = mode.mask(SITE_VISUAL | t, config.feature_dim);
    let mut visual_dropped = visual.context.clone();
    apply_mask(&mut visual_dropped, mask_visual.as_ref());

    // (e) bilinear action predictor over [h; c_text; c_visual].
    let mut concat = Vec::with_capacity(config.predictor_input_dim());
    concat.extend_from_slice(&h_dropped);
    concat.extend_from_slice(&text_dropped);
    concat.extend_from_slice(&visual_dropped);
    let xc = crate::mathcore::ops::vec_mat(&concat, nav.get("w_c"))?;
    let stop_emb = nav.get("stop_emb").values();
    let mut u = Vec::with_capacity(observation.candidates.len());
    let mut u_is_stop = Vec::with_capacity(observation.candidates.len());
    let mut y = Vec::with_capacity(observation.candidates.len());
    let mut logits = Vec::with_capacity(observation.candidates.len());
    for cand in &observation.candidates {
        let (raw, is_stop) = candidate_raw(cand, stop_emb, config.action_raw_dim())?;
        let yk = crate::mathcore::ops::vec_mat(&raw, nav.get("w_u"))?;
        logits.push(crate::mathcore::ops::dot(&xc, &yk));
        u.push(raw);
        u_is_stop.push(is_stop);
        y.push(yk);
    }
    let probs = softmax(&logits)?;

    Ok(StepCache {
        pano,
        prev_raw: state.prev_raw.clone(),
        prev_is_stop: state.prev_is_stop,
        lstm,
        text,
        text_dropped,
        visual,
        visual_dropped,
        concat,
        xc,
        u,
        u_is_stop,
        y,
        probs,
        masks: StepMasks {
            pano: mask_pano,
            hidden: mask_hidden,
            text: mask_text,
            visual: mask_visual,
        },
    })
}

/// Public single-step entry point returning just the outputs.
pub fn navigator_step(
    nav: &NavigatorParams,
    state: &StepState,
    observation: &PanoramicObservation,
    encoded: &EncodedInstruction,
    mode: Mode,
    step_index: usize,
) -> Result<NavigatorStepOutput> {
    Ok(step_forward(nav, state, observation, encoded, mode, step_index)?.output())
}
