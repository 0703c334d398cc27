//! Reverse accumulation through a whole trajectory.
//!
//! The recipe mirrors the forward step exactly, walked backward in time:
//! predictor → visual attention → textual attention → LSTM → previous
//! action projection → panoramic attention, with the recurrent gradient
//! carried to the preceding step, then back through the language encoder.

use crate::error::{Error, Result};
use crate::mathcore::dropout::apply_mask;
use crate::mathcore::ops::{add_assign, attention_backward, lstm_backward, vec_mat_t};
use crate::mathcore::ParamSet;
use crate::navigator::forward::{EncodedInstruction, StepCache};
use crate::navigator::params::NavigatorParams;
use crate::navigator::rollout::{replay_forward, Trajectory};
use crate::worldsim::{EpisodeSpec, WorldGraph};

/// Gradients of `Σ_t weight_t · log π(a_t | s_t)` with respect to every
/// navigator parameter, by exact replay of the trajectory's forward pass
/// (same dropout masks, same observations).
pub fn trajectory_logprob_backward(
    nav: &NavigatorParams,
    world: &WorldGraph,
    episode: &EpisodeSpec,
    trajectory: &Trajectory,
    per_step_weights: &[f64],
) -> Result<ParamSet> {
    if per_step_weights.len() != trajectory.steps.len() {
        return Err(Error::InvalidArgument(format!(
            "{} weights for {} steps",
            per_step_weights.len(),
            trajectory.steps.len()
        )));
    }
    let (caches, encoded) = replay_forward(nav, world, episode, trajectory)?;
    backward_over_caches(nav, trajectory, &caches, &encoded, per_step_weights)
}

/// The backward walk proper, over already-built forward caches.
pub(crate) fn backward_over_caches(
    nav: &NavigatorParams,
    trajectory: &Trajectory,
    caches: &[StepCache],
    encoded: &EncodedInstruction,
    per_step_weights: &[f64],
) -> Result<ParamSet> {
    let config = &nav.config;
    let (hidden, fdim) = (config.hidden, config.feature_dim);
    let mut grads = nav.params.zeros_like();
    let mut d_enc: Vec<Vec<f64>> = vec![vec![0.0; hidden]; encoded.len()];
    let mut dh_next = vec![0.0; hidden];
    let mut dc_next = vec![0.0; hidden];

    for t in (0..trajectory.steps.len()).rev() {
        let cache = &caches[t];
        let step = &trajectory.steps[t];
        let weight = per_step_weights[t];

        // d log p_a / d logit_k = δ_{ka} − p_k.
        let mut dlogits: Vec<f64> = cache.probs.iter().map(|p| -weight * p).collect();
        dlogits[step.action] += weight;

        // Bilinear predictor: logit_k = (concat·W_c) · (u_k·W_u).
        let mut dxc = vec![0.0; config.predictor];
        for (k, dlk) in dlogits.iter().enumerate() {
            for (d, yv) in dxc.iter_mut().zip(&cache.y[k]) {
                *d += dlk * yv;
            }
            let dy: Vec<f64> = cache.xc.iter().map(|&x| dlk * x).collect();
            crate::mathcore::ops::outer_acc(grads.get_mut("w_u")?, &cache.u[k], &dy);
            if cache.u_is_stop[k] {
                let du = vec_mat_t(&dy, nav.get("w_u"));
                add_assign(grads.get_mut("stop_emb")?.values_mut(), &du);
            }
        }
        crate::mathcore::ops::outer_acc(grads.get_mut("w_c")?, &cache.concat, &dxc);
        let dconcat = vec_mat_t(&dxc, nav.get("w_c"));
        let mut dh_drop = dconcat[..hidden].to_vec();
        let mut dtext_drop = dconcat[hidden..2 * hidden].to_vec();
        let mut dvis_drop = dconcat[2 * hidden..].to_vec();

        // (d) textually conditioned visual context.
        apply_mask(&mut dvis_drop, cache.masks.visual.as_ref());
        {
            let [g_q, g_k] = grads.get_two(["vis_q", "vis_k"])?;
            let out = attention_backward(
                &cache.visual,
                nav.get("vis_q"),
                nav.get("vis_k"),
                &dvis_drop,
                None,
                g_q,
                g_k,
            );
            add_assign(&mut dtext_drop, &out.d_query);
            // Patch gradients end in the environment.
        }

        // (c) visually conditioned textual context.
        apply_mask(&mut dtext_drop, cache.masks.text.as_ref());
        {
            let [g_q, g_k] = grads.get_two(["text_q", "text_k"])?;
            let out = attention_backward(
                &cache.text,
                nav.get("text_q"),
                nav.get("text_k"),
                &dtext_drop,
                None,
                g_q,
                g_k,
            );
            add_assign(&mut dh_drop, &out.d_query);
            for (acc, df) in d_enc.iter_mut().zip(&out.d_feats) {
                add_assign(acc, df);
            }
        }

        // (b) trajectory LSTM.
        apply_mask(&mut dh_drop, cache.masks.hidden.as_ref());
        let mut dh = dh_drop;
        add_assign(&mut dh, &dh_next);
        let lstm_out = {
            let [g_wx, g_wh, g_b] = grads.get_three(["traj_wx", "traj_wh", "traj_b"])?;
            lstm_backward(
                &cache.lstm,
                nav.get("traj_wx"),
                nav.get("traj_wh"),
                &dh,
                &dc_next,
                g_wx,
                g_wh,
                g_b.values_mut(),
            )
        };
        let mut dv = lstm_out.d_input[..fdim].to_vec();
        let dprev_emb = &lstm_out.d_input[fdim..];

        // Previous action projection.
        {
            let [g_w, g_b] = grads.get_two(["act_w", "act_b"])?;
            crate::mathcore::ops::outer_acc(g_w, &cache.prev_raw, dprev_emb);
            add_assign(g_b.values_mut(), dprev_emb);
        }
        if cache.prev_is_stop {
            let dprev_raw = vec_mat_t(dprev_emb, nav.get("act_w"));
            add_assign(grads.get_mut("stop_emb")?.values_mut(), &dprev_raw);
        }

        // (a) panoramic attention, queried by h_{t−1}.
        apply_mask(&mut dv, cache.masks.pano.as_ref());
        let pano_out = {
            let [g_q, g_k] = grads.get_two(["pano_q", "pano_k"])?;
            attention_backward(
                &cache.pano,
                nav.get("pano_q"),
                nav.get("pano_k"),
                &dv,
                None,
                g_q,
                g_k,
            )
        };

        dh_next = lstm_out.d_h_prev;
        add_assign(&mut dh_next, &pano_out.d_query);
        dc_next = lstm_out.d_c_prev;
    }
    // dh_next / dc_next now sit on the zero initial state: discarded.

    // Language encoder backward.
    let mut dh_lang = vec![0.0; hidden];
    let mut dc_lang = vec![0.0; hidden];
    for i in (0..encoded.len()).rev() {
        let mut dfeat = d_enc[i].clone();
        apply_mask(&mut dfeat, encoded.masks[i].as_ref());
        add_assign(&mut dfeat, &dh_lang);
        let out = {
            let [g_wx, g_wh, g_b] = grads.get_three(["lang_wx", "lang_wh", "lang_b"])?;
            lstm_backward(
                &encoded.caches[i],
                nav.get("lang_wx"),
                nav.get("lang_wh"),
                &dfeat,
                &dc_lang,
                g_wx,
                g_wh,
                g_b.values_mut(),
            )
        };
        let token = encoded.tokens[i] as usize;
        add_assign(grads.get_mut("word_emb")?.row_mut(token), &out.d_input);
        dh_lang = out.d_h_prev;
        dc_lang = out.d_c_prev;
    }

    // dh_lang / dc_lang land on the zero initial encoder state: discarded.
    debug_assert!(grads
        .iter()
        .all(|(_, t)| t.values().iter().all(|v| v.is_finite())));
    Ok(grads)
}

impl ParamSet {
    /// Two distinct entries mutably, for backward passes that accumulate
    /// into a pair of tensors.
    pub(crate) fn get_two(
        &mut self,
        names: [&str; 2],
    ) -> Result<[&mut crate::mathcore::Tensor; 2]> {
        let [a, b] = self.get_disjoint_mut(names)?;
        Ok([a, b])
    }

    pub(crate) fn get_three(
        &mut self,
        names: [&str; 3],
    ) -> Result<[&mut crate::mathcore::Tensor; 3]> {
        self.get_disjoint_mut(names)
    }
}
