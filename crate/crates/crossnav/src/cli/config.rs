//! Run configuration: flat `key = value` text with strict validation.
//!
//! Unknown keys, duplicates, malformed values, and range violations are
//! all rejected with the offending line number. An empty file yields the
//! documented defaults (γ=0.95, δ=2, d=3, K=10, max_path=10, ...).

use crate::error::{Error, Result};
use crate::learner::{IntrinsicForm, RewardConfig, TrainConfig};
use crate::worldsim::SplitConfig;
use std::collections::HashMap;

/// Everything a run needs: dataset shape, reward constants, training
/// hyperparameters, and process knobs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub split: SplitConfig,
    pub reward: RewardConfig,
    pub train: TrainConfig,
    /// Seed for dataset generation (world geometry, episodes).
    pub data_seed: u64,
    /// Evaluation worker threads.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            split: SplitConfig::default(),
            reward: RewardConfig::default(),
            train: TrainConfig::default(),
            data_seed: 1,
            workers: 1,
        }
    }
}

const KEYS: &[&str] = &[
    // world
    "n_viewpoints",
    "mean_degree",
    "feature_dim",
    "patch_count",
    "landmark_vocab",
    "noise_sigma",
    "tile_factor",
    "landmark_seed",
    // split sizes
    "train_worlds",
    "unseen_worlds",
    "train_episodes",
    "seen_val_episodes",
    "unseen_val_episodes",
    // episodes
    "min_hops",
    "max_hops",
    "d_success",
    "max_instruction",
    // reward
    "gamma",
    "delta",
    "intrinsic_form",
    // training
    "lr_sl",
    "lr_rl",
    "lr_sil",
    "lr_critic",
    "dropout",
    "weight_decay",
    "sil_rollouts",
    "max_path",
    "critic_epochs",
    "sl_epochs",
    "rl_epochs",
    "sil_epochs",
    "batch_episodes",
    "patience",
    "advantage_baseline",
    "sil_unit_weight",
    "seed",
    // model dims
    "hidden",
    "word_dim",
    "action_emb",
    "attn_pano",
    "attn_text",
    "attn_visual",
    "predictor",
    "attn_decode",
    // process
    "data_seed",
    "workers",
];

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config {
        line,
        msg: msg.into(),
    }
}

fn parse_f64(key: &str, value: &str, line: usize) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| err(line, format!("{key}: not a real number: {value:?}")))
}

fn parse_usize(key: &str, value: &str, line: usize) -> Result<usize> {
    value
        .parse::<usize>()
        .map_err(|_| err(line, format!("{key}: not a non-negative integer: {value:?}")))
}

fn parse_u64(key: &str, value: &str, line: usize) -> Result<u64> {
    value
        .parse::<u64>()
        .map_err(|_| err(line, format!("{key}: not an unsigned integer: {value:?}")))
}

fn parse_bool(key: &str, value: &str, line: usize) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(err(line, format!("{key}: expected true or false, got {value:?}"))),
    }
}

/// Parse config text into a full [`RunConfig`], defaults filled in.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    let mut first_line: HashMap<String, usize> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(line_no, format!("expected key = value, got {content:?}")))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KEYS.contains(&key.as_str()) {
            return Err(err(line_no, format!("unknown key {key:?}")));
        }
        if let Some(prev) = first_line.insert(key.clone(), line_no) {
            return Err(err(
                line_no,
                format!("duplicate key {key:?} (first set at line {prev})"),
            ));
        }
        entries.push((line_no, key, value));
    }

    let mut c = RunConfig::default();
    for (ln, key, value) in &entries {
        let ln = *ln;
        let v = value.as_str();
        match key.as_str() {
            "n_viewpoints" => {
                c.split.world.n_viewpoints = parse_usize(key, v, ln)?;
                if c.split.world.n_viewpoints < 2 {
                    return Err(err(ln, "n_viewpoints must be ≥ 2"));
                }
            }
            "mean_degree" => {
                c.split.world.mean_degree = parse_f64(key, v, ln)?;
                if c.split.world.mean_degree <= 0.0 {
                    return Err(err(ln, "mean_degree must be > 0"));
                }
            }
            "feature_dim" => {
                c.split.world.feature_dim = parse_usize(key, v, ln)?;
                if c.split.world.feature_dim == 0 {
                    return Err(err(ln, "feature_dim must be ≥ 1"));
                }
            }
            "patch_count" => {
                c.split.world.patch_count = parse_usize(key, v, ln)?;
                if c.split.world.patch_count == 0 {
                    return Err(err(ln, "patch_count must be ≥ 1"));
                }
            }
            "landmark_vocab" => {
                c.split.world.landmark_vocab = parse_usize(key, v, ln)?;
                if c.split.world.landmark_vocab == 0 {
                    return Err(err(ln, "landmark_vocab must be ≥ 1"));
                }
            }
            "noise_sigma" => {
                c.split.world.noise_sigma = parse_f64(key, v, ln)?;
                if c.split.world.noise_sigma < 0.0 {
                    return Err(err(ln, "noise_sigma must be ≥ 0"));
                }
            }
            "tile_factor" => {
                c.split.world.tile_factor = parse_usize(key, v, ln)?;
                if c.split.world.tile_factor == 0 {
                    return Err(err(ln, "tile_factor must be ≥ 1"));
                }
            }
            "landmark_seed" => c.split.world.landmark_seed = parse_u64(key, v, ln)?,
            "train_worlds" => {
                c.split.train_worlds = parse_usize(key, v, ln)?;
                if c.split.train_worlds == 0 {
                    return Err(err(ln, "train_worlds must be ≥ 1"));
                }
            }
            "unseen_worlds" => {
                c.split.unseen_worlds = parse_usize(key, v, ln)?;
                if c.split.unseen_worlds == 0 {
                    return Err(err(ln, "unseen_worlds must be ≥ 1"));
                }
            }
            "train_episodes" => {
                c.split.train_episodes = parse_usize(key, v, ln)?;
                if c.split.train_episodes == 0 {
                    return Err(err(ln, "train_episodes must be ≥ 1"));
                }
            }
            "seen_val_episodes" => {
                c.split.seen_val_episodes = parse_usize(key, v, ln)?;
                if c.split.seen_val_episodes == 0 {
                    return Err(err(ln, "seen_val_episodes must be ≥ 1"));
                }
            }
            "unseen_val_episodes" => {
                c.split.unseen_val_episodes = parse_usize(key, v, ln)?;
                if c.split.unseen_val_episodes == 0 {
                    return Err(err(ln, "unseen_val_episodes must be ≥ 1"));
                }
            }
            "min_hops" => {
                c.split.episode.min_hops = parse_usize(key, v, ln)?;
                if c.split.episode.min_hops == 0 {
                    return Err(err(ln, "min_hops must be ≥ 1"));
                }
            }
            "max_hops" => c.split.episode.max_hops = parse_usize(key, v, ln)?,
            "d_success" => {
                let d = parse_f64(key, v, ln)?;
                if d <= 0.0 {
                    return Err(err(ln, "d_success must be > 0"));
                }
                c.split.episode.d_success = d;
                c.reward.d_success = d;
            }
            "max_instruction" => {
                let m = parse_usize(key, v, ln)?;
                if m == 0 {
                    return Err(err(ln, "max_instruction must be ≥ 1"));
                }
                c.split.episode.max_instruction_length = m;
                c.train.max_instruction = m;
            }
            "gamma" => {
                c.reward.gamma = parse_f64(key, v, ln)?;
                if !(0.0..=1.0).contains(&c.reward.gamma) {
                    return Err(err(ln, "gamma must lie in [0, 1]"));
                }
            }
            "delta" => {
                c.reward.delta = parse_f64(key, v, ln)?;
                if c.reward.delta < 0.0 {
                    return Err(err(ln, "delta must be ≥ 0"));
                }
            }
            "intrinsic_form" => {
                c.reward.intrinsic_form = match v {
                    "geometric_mean" => IntrinsicForm::GeometricMean,
                    "mean_logprob" => IntrinsicForm::MeanLogProb,
                    _ => {
                        return Err(err(
                            ln,
                            "intrinsic_form must be geometric_mean or mean_logprob",
                        ))
                    }
                };
            }
            "lr_sl" | "lr_rl" | "lr_sil" | "lr_critic" => {
                let lr = parse_f64(key, v, ln)?;
                if lr <= 0.0 {
                    return Err(err(ln, format!("{key} must be > 0")));
                }
                match key.as_str() {
                    "lr_sl" => c.train.lr_sl = lr,
                    "lr_rl" => c.train.lr_rl = lr,
                    "lr_sil" => c.train.lr_sil = lr,
                    _ => c.train.lr_critic = lr,
                }
            }
            "dropout" => {
                c.train.dropout = parse_f64(key, v, ln)?;
                if !(0.0..1.0).contains(&c.train.dropout) {
                    return Err(err(ln, "dropout must lie in [0, 1)"));
                }
            }
            "weight_decay" => {
                c.train.weight_decay = parse_f64(key, v, ln)?;
                if c.train.weight_decay < 0.0 {
                    return Err(err(ln, "weight_decay must be ≥ 0"));
                }
            }
            "sil_rollouts" => {
                c.train.sil_rollouts = parse_usize(key, v, ln)?;
                if c.train.sil_rollouts == 0 {
                    return Err(err(ln, "sil_rollouts must be ≥ 1"));
                }
            }
            "max_path" => {
                c.train.max_path = parse_usize(key, v, ln)?;
                if c.train.max_path == 0 {
                    return Err(err(ln, "max_path must be ≥ 1"));
                }
            }
            "critic_epochs" => c.train.critic_epochs = parse_usize(key, v, ln)?,
            "sl_epochs" => c.train.sl_epochs = parse_usize(key, v, ln)?,
            "rl_epochs" => c.train.rl_epochs = parse_usize(key, v, ln)?,
            "sil_epochs" => c.train.sil_epochs = parse_usize(key, v, ln)?,
            "batch_episodes" => {
                c.train.batch_episodes = parse_usize(key, v, ln)?;
                if c.train.batch_episodes == 0 {
                    return Err(err(ln, "batch_episodes must be ≥ 1"));
                }
            }
            "patience" => c.train.patience = parse_usize(key, v, ln)?,
            "advantage_baseline" => c.train.advantage_baseline = parse_bool(key, v, ln)?,
            "sil_unit_weight" => c.train.sil_unit_weight = parse_bool(key, v, ln)?,
            "seed" => c.train.seed = parse_u64(key, v, ln)?,
            "hidden" | "word_dim" | "action_emb" | "attn_pano" | "attn_text" | "attn_visual"
            | "predictor" | "attn_decode" => {
                let d = parse_usize(key, v, ln)?;
                if d == 0 {
                    return Err(err(ln, format!("{key} must be ≥ 1")));
                }
                match key.as_str() {
                    "hidden" => c.train.hidden = d,
                    "word_dim" => c.train.word_dim = d,
                    "action_emb" => c.train.action_emb = d,
                    "attn_pano" => c.train.attn_pano = d,
                    "attn_text" => c.train.attn_text = d,
                    "attn_visual" => c.train.attn_visual = d,
                    "predictor" => c.train.predictor = d,
                    _ => c.train.attn_decode = d,
                }
            }
            "data_seed" => c.data_seed = parse_u64(key, v, ln)?,
            "workers" => {
                c.workers = parse_usize(key, v, ln)?;
                if c.workers == 0 {
                    return Err(err(ln, "workers must be ≥ 1"));
                }
            }
            _ => unreachable!("key membership already checked"),
        }
    }

    // Cross-field checks, attributed to the best available line.
    let line_of = |key: &str| first_line.get(key).copied().unwrap_or(0);
    if c.split.episode.max_hops < c.split.episode.min_hops {
        return Err(err(
            line_of("max_hops").max(line_of("min_hops")),
            "max_hops must be ≥ min_hops",
        ));
    }
    if c.split.episode.max_hops + 1 > c.train.max_path {
        return Err(err(
            line_of("max_hops").max(line_of("max_path")),
            "max_hops + 1 (hops plus the stop) must fit in max_path",
        ));
    }
    if c.split.world.mean_degree >= c.split.world.n_viewpoints as f64 {
        return Err(err(
            line_of("mean_degree").max(line_of("n_viewpoints")),
            "mean_degree must be < n_viewpoints",
        ));
    }
    Ok(c)
}

/// Canonical text form: every key on one line, parseable by
/// [`parse_config`], round-trip exact.
pub fn config_to_text(c: &RunConfig) -> String {
    use crate::worldsim::fmt_real;
    let form = match c.reward.intrinsic_form {
        IntrinsicForm::GeometricMean => "geometric_mean",
        IntrinsicForm::MeanLogProb => "mean_logprob",
    };
    let mut s = String::new();
    let kv: Vec<(&str, String)> = vec![
        ("n_viewpoints", c.split.world.n_viewpoints.to_string()),
        ("mean_degree", fmt_real(c.split.world.mean_degree)),
        ("feature_dim", c.split.world.feature_dim.to_string()),
        ("patch_count", c.split.world.patch_count.to_string()),
        ("landmark_vocab", c.split.world.landmark_vocab.to_string()),
        ("noise_sigma", fmt_real(c.split.world.noise_sigma)),
        ("tile_factor", c.split.world.tile_factor.to_string()),
        ("landmark_seed", c.split.world.landmark_seed.to_string()),
        ("train_worlds", c.split.train_worlds.to_string()),
        ("unseen_worlds", c.split.unseen_worlds.to_string()),
        ("train_episodes", c.split.train_episodes.to_string()),
        ("seen_val_episodes", c.split.seen_val_episodes.to_string()),
        ("unseen_val_episodes", c.split.unseen_val_episodes.to_string()),
        ("min_hops", c.split.episode.min_hops.to_string()),
        ("max_hops", c.split.episode.max_hops.to_string()),
        ("d_success", fmt_real(c.reward.d_success)),
        ("max_instruction", c.train.max_instruction.to_string()),
        ("gamma", fmt_real(c.reward.gamma)),
        ("delta", fmt_real(c.reward.delta)),
        ("intrinsic_form", form.to_string()),
        ("lr_sl", fmt_real(c.train.lr_sl)),
        ("lr_rl", fmt_real(c.train.lr_rl)),
        ("lr_sil", fmt_real(c.train.lr_sil)),
        ("lr_critic", fmt_real(c.train.lr_critic)),
        ("dropout", fmt_real(c.train.dropout)),
        ("weight_decay", fmt_real(c.train.weight_decay)),
        ("sil_rollouts", c.train.sil_rollouts.to_string()),
        ("max_path", c.train.max_path.to_string()),
        ("critic_epochs", c.train.critic_epochs.to_string()),
        ("sl_epochs", c.train.sl_epochs.to_string()),
        ("rl_epochs", c.train.rl_epochs.to_string()),
        ("sil_epochs", c.train.sil_epochs.to_string()),
        ("batch_episodes", c.train.batch_episodes.to_string()),
        ("patience", c.train.patience.to_string()),
        ("advantage_baseline", c.train.advantage_baseline.to_string()),
        ("sil_unit_weight", c.train.sil_unit_weight.to_string()),
        ("seed", c.train.seed.to_string()),
        ("hidden", c.train.hidden.to_string()),
        ("word_dim", c.train.word_dim.to_string()),
        ("action_emb", c.train.action_emb.to_string()),
        ("attn_pano", c.train.attn_pano.to_string()),
        ("attn_text", c.train.attn_text.to_string()),
        ("attn_visual", c.train.attn_visual.to_string()),
        ("predictor", c.train.predictor.to_string()),
        ("attn_decode", c.train.attn_decode.to_string()),
        ("data_seed", c.data_seed.to_string()),
        ("workers", c.workers.to_string()),
    ];
    for (k, v) in kv {
        s.push_str(k);
        s.push_str(" = ");
        s.push_str(&v);
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_documented_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c.reward.gamma, 0.95);
        assert_eq!(c.reward.delta, 2.0);
        assert_eq!(c.reward.d_success, 3.0);
        assert_eq!(c.train.sil_rollouts, 10);
        assert_eq!(c.train.max_path, 10);
        assert_eq!(c.train.max_instruction, 80);
        assert_eq!(c.train.lr_sl, 1e-4);
        assert_eq!(c.train.lr_rl, 1e-5);
        assert_eq!(c.train.lr_critic, 1e-4);
        assert_eq!(c.train.dropout, 0.5);
        assert_eq!(c.train.weight_decay, 5e-4);
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let c = parse_config("# full line comment\n\ngamma = 0.5 # trailing\n").unwrap();
        assert_eq!(c.reward.gamma, 0.5);
    }

    #[test]
    fn out_of_range_gamma_names_its_line() {
        let e = parse_config("seed = 1\ngamma = 1.5\n").unwrap_err();
        match e {
            Error::Config { line, msg } => {
                assert_eq!(line, 2);
                assert!(msg.contains("gamma"));
            }
            other => panic!("wrong error {other:?}"),
        }
    }

    #[test]
    fn duplicate_key_cites_both_lines() {
        let e = parse_config("gamma = 0.9\nseed = 1\ngamma = 0.8\n").unwrap_err();
        match e {
            Error::Config { line, msg } => {
                assert_eq!(line, 3);
                assert!(msg.contains("line 1"), "{msg}");
            }
            other => panic!("wrong error {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_rejected() {
        let e = parse_config("not_a_key = 3\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 1, .. }));
    }

    #[test]
    fn malformed_value_is_rejected() {
        let e = parse_config("gamma = fast\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 1, .. }));
        let e = parse_config("just some words\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 1, .. }));
    }

    #[test]
    fn cross_field_hop_bounds_are_checked() {
        let e = parse_config("min_hops = 5\nmax_hops = 3\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 2, .. }));
        let e = parse_config("max_hops = 12\n").unwrap_err(); // max_path default 10
        assert!(matches!(e, Error::Config { .. }));
    }

    #[test]
    fn canonical_text_round_trips() {
        let mut c = RunConfig::default();
        c.reward.gamma = 0.875;
        c.train.seed = 123456789;
        c.reward.intrinsic_form = IntrinsicForm::MeanLogProb;
        let text = config_to_text(&c);
        let back = parse_config(&text).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn d_success_feeds_episode_and_reward() {
        let c = parse_config("d_success = 2.5\n").unwrap();
        assert_eq!(c.reward.d_success, 2.5);
        assert_eq!(c.split.episode.d_success, 2.5);
    }
}
