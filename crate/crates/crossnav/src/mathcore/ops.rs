//! Differentiable building blocks: softmax, affine, dot-product attention,
//! and the LSTM cell.
//!
//! Every forward pass returns a cache holding exactly the intermediates its
//! backward pass needs. Backward passes are hand-derived reverse
//! accumulation; there is no tape. Gradients accumulate into caller-owned
//! tensors so multi-step models can sum contributions across time.

use crate::error::{Error, Result};
use crate::mathcore::tensor::{ParamSet, Tensor};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `x · W` for a row vector `x` (len r) and matrix `W` (r×c).
pub fn vec_mat(x: &[f64], w: &Tensor) -> Result<Vec<f64>> {
    if w.shape().len() != 2 || x.len() != w.rows() {
        return Err(Error::Shape(format!(
            "vec_mat: vector len {} vs matrix {:?}",
            x.len(),
            w.shape()
        )));
    }
    let (r, c) = (w.rows(), w.cols());
    let mut out = vec![0.0; c];
    for i in 0..r {
        let xi = x[i];
        let row = w.row(i);
        for j in 0..c {
            out[j] += xi * row[j];
        }
    }
    Ok(out)
}

/// `y · Wᵀ` for a row vector `y` (len c) and matrix `W` (r×c).
pub fn vec_mat_t(y: &[f64], w: &Tensor) -> Vec<f64> {
    debug_assert_eq!(y.len(), w.cols());
    (0..w.rows()).map(|i| dot(w.row(i), y)).collect()
}

/// `gw += x ⊗ y` (outer product accumulate, x: rows, y: cols).
pub fn outer_acc(gw: &mut Tensor, x: &[f64], y: &[f64]) {
    debug_assert_eq!(gw.rows(), x.len());
    debug_assert_eq!(gw.cols(), y.len());
    let c = gw.cols();
    let g = gw.values_mut();
    for i in 0..x.len() {
        let xi = x[i];
        for j in 0..c {
            g[i * c + j] += xi * y[j];
        }
    }
}

pub fn add_assign(dst: &mut [f64], src: &[f64]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax (max subtraction).
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::InvalidArgument("softmax of empty input".into()));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("softmax of non-finite logits".into()));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// Backward through softmax: given outputs `probs` and upstream `dprobs`,
/// returns gradients with respect to the logits.
pub fn softmax_backward(probs: &[f64], dprobs: &[f64]) -> Vec<f64> {
    debug_assert_eq!(probs.len(), dprobs.len());
    let inner = dot(probs, dprobs);
    probs
        .iter()
        .zip(dprobs)
        .map(|(&p, &dp)| p * (dp - inner))
        .collect()
}

/// `x · W + b`.
pub fn affine(x: &[f64], weight: &Tensor, bias: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec_mat(x, weight)?;
    if bias.len() != out.len() {
        return Err(Error::Shape(format!(
            "affine: bias len {} vs output len {}",
            bias.len(),
            out.len()
        )));
    }
    add_assign(&mut out, bias);
    Ok(out)
}

/// Backward through [`affine`]: accumulates into `g_weight`/`g_bias`,
/// returns the input gradient.
pub fn affine_backward(
    x: &[f64],
    weight: &Tensor,
    dy: &[f64],
    g_weight: &mut Tensor,
    g_bias: &mut [f64],
) -> Vec<f64> {
    outer_acc(g_weight, x, dy);
    add_assign(g_bias, dy);
    vec_mat_t(dy, weight)
}

/// Projection matrices of a dot-product attention head.
#[derive(Clone, Debug)]
pub struct AttentionParams {
    /// Maps the query into the score space (query_dim × inner).
    pub proj_query: Tensor,
    /// Maps each feature into the score space (feature_dim × inner).
    pub proj_key: Tensor,
}

impl AttentionParams {
    pub fn identity(dim: usize) -> Self {
        Self {
            proj_query: Tensor::identity(dim),
            proj_key: Tensor::identity(dim),
        }
    }
}

/// Intermediates of one attention application.
#[derive(Clone, Debug)]
pub struct AttnCache {
    pub query: Vec<f64>,
    pub feats: Vec<Vec<f64>>,
    proj_q: Vec<f64>,
    proj_k: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub context: Vec<f64>,
}

/// Dot-product attention: weights are the softmax of the bilinear scores
/// `(q·Wq)(f_j·Wk)ᵀ`; the context is the weighted sum of the *unprojected*
/// features.
pub fn attention_forward(
    query: &[f64],
    feats: &[Vec<f64>],
    proj_query: &Tensor,
    proj_key: &Tensor,
) -> Result<AttnCache> {
    if feats.is_empty() {
        return Err(Error::InvalidArgument("attention over no features".into()));
    }
    let fdim = feats[0].len();
    if feats.iter().any(|f| f.len() != fdim) {
        return Err(Error::Shape("attention features of mixed dimension".into()));
    }
    let proj_q = vec_mat(query, proj_query)?;
    let mut proj_k = Vec::with_capacity(feats.len());
    for f in feats {
        proj_k.push(vec_mat(f, proj_key)?);
    }
    if proj_k[0].len() != proj_q.len() {
        return Err(Error::Shape(format!(
            "attention inner dims differ: query {} vs key {}",
            proj_q.len(),
            proj_k[0].len()
        )));
    }
    let scores: Vec<f64> = proj_k.iter().map(|k| dot(&proj_q, k)).collect();
    let weights = softmax(&scores)?;
    let mut context = vec![0.0; fdim];
    for (w, f) in weights.iter().zip(feats) {
        for (c, v) in context.iter_mut().zip(f) {
            *c += w * v;
        }
    }
    Ok(AttnCache {
        query: query.to_vec(),
        feats: feats.to_vec(),
        proj_q,
        proj_k,
        weights,
        context,
    })
}

/// Convenience form of [`attention_forward`] returning `(context, weights)`.
pub fn dot_product_attention(
    query: &[f64],
    features: &[Vec<f64>],
    params: &AttentionParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let cache = attention_forward(query, features, &params.proj_query, &params.proj_key)?;
    Ok((cache.context, cache.weights))
}

/// Gradients flowing out of an attention application.
pub struct AttnGrads {
    pub d_query: Vec<f64>,
    pub d_feats: Vec<Vec<f64>>,
}

/// Backward through attention. `d_context` is the upstream gradient of the
/// context vector; `d_weights`, when present, is the upstream gradient of
/// the attention weights themselves. Projection gradients accumulate into
/// `g_proj_query` / `g_proj_key`.
pub fn attention_backward(
    cache: &AttnCache,
    proj_query: &Tensor,
    proj_key: &Tensor,
    d_context: &[f64],
    d_weights: Option<&[f64]>,
    g_proj_query: &mut Tensor,
    g_proj_key: &mut Tensor,
) -> AttnGrads {
    let m = cache.feats.len();
    // context = Σ_j w_j f_j
    let mut dw: Vec<f64> = (0..m).map(|j| dot(d_context, &cache.feats[j])).collect();
    if let Some(extra) = d_weights {
        add_assign(&mut dw, extra);
    }
    let mut d_feats: Vec<Vec<f64>> = cache
        .weights
        .iter()
        .map(|&w| d_context.iter().map(|&d| w * d).collect())
        .collect();
    // weights = softmax(scores)
    let ds = softmax_backward(&cache.weights, &dw);
    // scores_j = proj_q · proj_k_j
    let mut d_proj_q = vec![0.0; cache.proj_q.len()];
    for (j, k) in cache.proj_k.iter().enumerate() {
        for (d, kv) in d_proj_q.iter_mut().zip(k) {
            *d += ds[j] * kv;
        }
        // d proj_k_j = ds_j * proj_q
        let dk: Vec<f64> = cache.proj_q.iter().map(|&q| ds[j] * q).collect();
        outer_acc(g_proj_key, &cache.feats[j], &dk);
        add_assign(&mut d_feats[j], &vec_mat_t(&dk, proj_key));
    }
    outer_acc(g_proj_query, &cache.query, &d_proj_q);
    let d_query = vec_mat_t(&d_proj_q, proj_query);
    AttnGrads { d_query, d_feats }
}

/// Intermediates of one LSTM cell application.
///
/// Gate order in `gates` is input, forget, candidate, output, each a block
/// of `hidden` values, post-activation.
#[derive(Clone, Debug)]
pub struct LstmCache {
    pub input: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    gates: Vec<f64>,
    pub c_new: Vec<f64>,
    tanh_c: Vec<f64>,
    pub h_new: Vec<f64>,
}

/// One step of a standard 4-gate LSTM cell (sigmoid gates, tanh candidate
/// and output squash).
///
/// `wx` is input_dim×4h, `wh` is h×4h, `bias` is 4h, blocks ordered
/// input/forget/candidate/output.
pub fn lstm_forward(
    input: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    wx: &Tensor,
    wh: &Tensor,
    bias: &[f64],
) -> Result<LstmCache> {
    let h = h_prev.len();
    if c_prev.len() != h {
        return Err(Error::Shape("lstm: h and c dims differ".into()));
    }
    if wx.cols() != 4 * h || wh.rows() != h || wh.cols() != 4 * h || bias.len() != 4 * h {
        return Err(Error::Shape(format!(
            "lstm: param shapes {:?}/{:?}/{} inconsistent with hidden {}",
            wx.shape(),
            wh.shape(),
            bias.len(),
            h
        )));
    }
    let mut z = vec_mat(input, wx)?;
    add_assign(&mut z, &vec_mat(h_prev, wh)?);
    add_assign(&mut z, bias);
    let mut gates = vec![0.0; 4 * h];
    for i in 0..h {
        gates[i] = sigmoid(z[i]);
        gates[h + i] = sigmoid(z[h + i]);
        gates[2 * h + i] = z[2 * h + i].tanh();
        gates[3 * h + i] = sigmoid(z[3 * h + i]);
    }
    let mut c_new = vec![0.0; h];
    let mut tanh_c = vec![0.0; h];
    let mut h_new = vec![0.0; h];
    for i in 0..h {
        c_new[i] = gates[h + i] * c_prev[i] + gates[i] * gates[2 * h + i];
        tanh_c[i] = c_new[i].tanh();
        h_new[i] = gates[3 * h + i] * tanh_c[i];
    }
    Ok(LstmCache {
        input: input.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        gates,
        c_new,
        tanh_c,
        h_new,
    })
}

/// Gradients flowing out of an LSTM step.
pub struct LstmGrads {
    pub d_input: Vec<f64>,
    pub d_h_prev: Vec<f64>,
    pub d_c_prev: Vec<f64>,
}

/// Backward through [`lstm_forward`]. `dh` and `dc` are the upstream
/// gradients of the new hidden and cell states.
pub fn lstm_backward(
    cache: &LstmCache,
    wx: &Tensor,
    wh: &Tensor,
    dh: &[f64],
    dc: &[f64],
    g_wx: &mut Tensor,
    g_wh: &mut Tensor,
    g_bias: &mut [f64],
) -> LstmGrads {
    let h = cache.h_prev.len();
    let gates = &cache.gates;
    let mut dz = vec![0.0; 4 * h];
    let mut d_c_prev = vec![0.0; h];
    for i in 0..h {
        let (gi, gf, gg, go) = (gates[i], gates[h + i], gates[2 * h + i], gates[3 * h + i]);
        let d_o = dh[i] * cache.tanh_c[i];
        let d_c = dc[i] + dh[i] * go * (1.0 - cache.tanh_c[i] * cache.tanh_c[i]);
        let d_i = d_c * gg;
        let d_f = d_c * cache.c_prev[i];
        let d_g = d_c * gi;
        d_c_prev[i] = d_c * gf;
        dz[i] = d_i * gi * (1.0 - gi);
        dz[h + i] = d_f * gf * (1.0 - gf);
        dz[2 * h + i] = d_g * (1.0 - gg * gg);
        dz[3 * h + i] = d_o * go * (1.0 - go);
    }
    outer_acc(g_wx, &cache.input, &dz);
    outer_acc(g_wh, &cache.h_prev, &dz);
    add_assign(g_bias, &dz);
    LstmGrads {
        d_input: vec_mat_t(&dz, wx),
        d_h_prev: vec_mat_t(&dz, wh),
        d_c_prev,
    }
}

/// One LSTM step driven by a named parameter set (`wx`, `wh`, `b`).
/// Returns the new `(h, c)` pair.
pub fn lstm_step(
    input: &[f64],
    hidden: (&[f64], &[f64]),
    params: &ParamSet,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let cache = lstm_forward(
        input,
        hidden.0,
        hidden.1,
        params.get("wx")?,
        params.get("wh")?,
        params.get("b")?.values(),
    )?;
    Ok((cache.h_new, cache.c_new))
}
