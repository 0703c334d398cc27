//! Training orchestration: critic pre-training, supervised warm start,
//! mixed-reward REINFORCE, and self-imitation, with per-epoch history.

use crate::critic::{critic_mle_gradients, CriticConfig, CriticParams};
use crate::error::{Error, Result};
use crate::learner::replay::ReplayBuffer;
use crate::learner::reward::RewardConfig;
use crate::learner::steps::{demonstration_trajectory, rl_grads, sil_collect, sil_grads, sl_grads};
use crate::mathcore::{adam_step, AdamHyper, AdamState, Mode, ParamSet};
use crate::metrics::{aggregate, evaluate_episode, MetricsReport};
use crate::navigator::{rollout, ActionSelect, NavigatorConfig, NavigatorParams};
use crate::worldsim::{vocab_size, Dataset, Split, WorldGraph};
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Training hyperparameters and model dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr_sl: f64,
    pub lr_rl: f64,
    pub lr_sil: f64,
    pub lr_critic: f64,
    pub dropout: f64,
    pub weight_decay: f64,
    /// Rollouts per episode during self-imitation collection (K).
    pub sil_rollouts: usize,
    pub max_path: usize,
    pub max_instruction: usize,
    pub critic_epochs: usize,
    pub sl_epochs: usize,
    pub rl_epochs: usize,
    pub sil_epochs: usize,
    /// Episodes per gradient accumulation batch.
    pub batch_episodes: usize,
    /// Early-stopping patience in epochs; 0 disables early stopping.
    pub patience: usize,
    /// Subtract the per-episode mean advantage before the policy gradient.
    pub advantage_baseline: bool,
    /// Imitate stored trajectories with weight 1 instead of their reward.
    pub sil_unit_weight: bool,
    /// Master training seed (init, shuffling, sampling, dropout).
    pub seed: u64,
    // Model dimensions.
    pub hidden: usize,
    pub word_dim: usize,
    pub action_emb: usize,
    pub attn_pano: usize,
    pub attn_text: usize,
    pub attn_visual: usize,
    pub predictor: usize,
    pub attn_decode: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_sl: 1e-4,
            lr_rl: 1e-5,
            lr_sil: 1e-5,
            lr_critic: 1e-4,
            dropout: 0.5,
            weight_decay: 5e-4,
            sil_rollouts: 10,
            max_path: 10,
            max_instruction: 80,
            critic_epochs: 10,
            sl_epochs: 30,
            rl_epochs: 10,
            sil_epochs: 10,
            batch_episodes: 1,
            patience: 5,
            advantage_baseline: false,
            sil_unit_weight: false,
            seed: 7,
            hidden: 64,
            word_dim: 32,
            action_emb: 32,
            attn_pano: 32,
            attn_text: 64,
            attn_visual: 32,
            predictor: 32,
            attn_decode: 64,
        }
    }
}

impl TrainConfig {
    pub fn navigator_config(&self, world: &WorldGraph) -> NavigatorConfig {
        self.navigator_dims(world.landmark_vocab, world.feature_dim, world.tile_factor)
    }

    pub fn critic_config(&self, world: &WorldGraph) -> CriticConfig {
        self.critic_dims(world.landmark_vocab, world.feature_dim, world.tile_factor)
    }

    /// Same derivation from a world *config* (used when no generated world
    /// is at hand, e.g. checkpoint loading).
    pub fn navigator_config_for(&self, world: &crate::worldsim::WorldConfig) -> NavigatorConfig {
        self.navigator_dims(world.landmark_vocab, world.feature_dim, world.tile_factor)
    }

    pub fn critic_config_for(&self, world: &crate::worldsim::WorldConfig) -> CriticConfig {
        self.critic_dims(world.landmark_vocab, world.feature_dim, world.tile_factor)
    }

    fn navigator_dims(
        &self,
        landmark_vocab: usize,
        feature_dim: usize,
        tile_factor: usize,
    ) -> NavigatorConfig {
        NavigatorConfig {
            vocab: vocab_size(landmark_vocab),
            word_dim: self.word_dim,
            hidden: self.hidden,
            feature_dim,
            tile_factor,
            action_emb: self.action_emb,
            attn_pano: self.attn_pano,
            attn_text: self.attn_text,
            attn_visual: self.attn_visual,
            predictor: self.predictor,
        }
    }

    fn critic_dims(
        &self,
        landmark_vocab: usize,
        feature_dim: usize,
        tile_factor: usize,
    ) -> CriticConfig {
        CriticConfig {
            vocab: vocab_size(landmark_vocab),
            word_dim: self.word_dim,
            hidden: self.hidden,
            feature_dim,
            tile_factor,
            action_emb: self.action_emb,
            attn_pano: self.attn_pano,
            attn_decode: self.attn_decode,
        }
    }

    fn hyper(&self, lr: f64) -> AdamHyper {
        AdamHyper {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: self.weight_decay,
        }
    }
}

/// Which split self-imitation runs on: the training split (efficiency) or
/// the unseen split (exploration without supervision).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SilMode {
    Train,
    Unseen,
}

impl SilMode {
    pub fn split(&self) -> Split {
        match self {
            SilMode::Train => Split::Train,
            SilMode::Unseen => Split::UnseenVal,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(SilMode::Train),
            "unseen" => Some(SilMode::Unseen),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SilMode::Train => "train",
            SilMode::Unseen => "unseen",
        }
    }
}

/// Training phase tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Critic,
    Sl,
    Rl,
    Sil,
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::Critic => "critic",
            Phase::Sl => "sl",
            Phase::Rl => "rl",
            Phase::Sil => "sil",
        }
    }

    pub fn parse(s: &str) -> Option<Phase> {
        match s {
            "critic" => Some(Phase::Critic),
            "sl" => Some(Phase::Sl),
            "rl" => Some(Phase::Rl),
            "sil" => Some(Phase::Sil),
            _ => None,
        }
    }
}

/// Aggregate metrics of one validation pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValAggregates {
    pub mean_pl: f64,
    pub mean_ne: f64,
    pub osr_pct: f64,
    pub sr_pct: f64,
    pub spl_pct: f64,
}

impl From<&MetricsReport> for ValAggregates {
    fn from(r: &MetricsReport) -> Self {
        Self {
            mean_pl: r.mean_pl,
            mean_ne: r.mean_ne,
            osr_pct: r.osr_pct,
            sr_pct: r.sr_pct,
            spl_pct: r.spl_pct,
        }
    }
}

/// One row of training history. All fields are finite so records compare
/// exactly across runs.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryRecord {
    pub phase: Phase,
    pub epoch: usize,
    /// Mean per-episode training loss (0 for RL, whose surrogate loss is
    /// not a meaningful scalar).
    pub loss: f64,
    /// Mean discounted return from the start state (RL only).
    pub mean_return: f64,
    /// Mean intrinsic reward of the epoch's rollouts (RL/SIL).
    pub mean_intrinsic: f64,
    /// Fraction of training rollouts ending in success (RL only).
    pub train_success: f64,
    /// Seen-validation metrics; SR is the early-stopping signal for SL/RL.
    pub val: ValAggregates,
    /// Seen-validation loss (critic phase only).
    pub val_loss: f64,
}

/// Everything that evolves during training.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub nav: NavigatorParams,
    pub critic: CriticParams,
    pub nav_opt: AdamState,
    pub critic_opt: AdamState,
    pub rng: ChaCha8Rng,
}

impl TrainState {
    /// Fresh state: parameters initialized from the config seed, zero
    /// optimizer moments.
    pub fn init(dataset: &Dataset, config: &TrainConfig) -> Result<Self> {
        let world = dataset
            .worlds
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty dataset".into()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let nav = NavigatorParams::init(config.navigator_config(world), &mut rng)?;
        let critic = CriticParams::init(config.critic_config(world), &mut rng)?;
        let nav_opt = AdamState::new(&nav.params);
        let critic_opt = AdamState::new(&critic.params);
        Ok(Self {
            nav,
            critic,
            nav_opt,
            critic_opt,
            rng,
        })
    }
}

/// Greedy-evaluate a split: one deterministic rollout per episode, scored
/// with the navigation metrics. `workers > 1` splits the episodes across
/// threads; aggregation is order-independent.
pub fn evaluate(
    nav: &NavigatorParams,
    dataset: &Dataset,
    split: Split,
    d_success: f64,
    max_path: usize,
    workers: usize,
) -> Result<MetricsReport> {
    let episodes = dataset.episodes(split);
    if episodes.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "split {} has no episodes",
            split.name()
        )));
    }
    let eval_one = |ep: &crate::worldsim::EpisodeSpec| -> Result<crate::metrics::EpisodeResult> {
        let world = dataset.world(ep.world_id);
        let traj = rollout(
            nav,
            world,
            ep,
            ActionSelect::Greedy,
            None::<&mut ChaCha8Rng>,
            max_path,
            Mode::Eval,
        )?;
        evaluate_episode(world, ep, &traj, d_success)
    };
    let results: Result<Vec<_>> = if workers <= 1 {
        episodes.iter().map(eval_one).collect()
    } else {
        let chunk = episodes.len().div_ceil(workers);
        std::thread::scope(|scope| {
            let handles: Vec<_> = episodes
                .chunks(chunk)
                .map(|c| scope.spawn(move || c.iter().map(eval_one).collect::<Result<Vec<_>>>()))
                .collect();
            let mut all = Vec::with_capacity(episodes.len());
            for h in handles {
                all.extend(h.join().expect("evaluation worker panicked")?);
            }
            Ok(all)
        })
    };
    aggregate(results?)
}

/// Shuffled episode indices for one epoch.
fn epoch_order(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Accumulate mean gradients over a batch and take one Adam step.
fn apply_batch(
    params: &ParamSet,
    opt: &AdamState,
    batch: &[ParamSet],
    hyper: &AdamHyper,
) -> Result<(ParamSet, AdamState)> {
    let mut total = params.zeros_like();
    for g in batch {
        total.accumulate(g, 1.0 / batch.len() as f64)?;
    }
    adam_step(params, &total, opt, hyper)
}

/// Pre-train the matching critic by MLE on demonstration pairs, early
/// stopping on the seen-validation loss. The best-validation parameters
/// win.
pub fn run_critic_phase(
    state: &mut TrainState,
    dataset: &Dataset,
    config: &TrainConfig,
    reward: &RewardConfig,
    sink: &mut dyn FnMut(&HistoryRecord),
) -> Result<()> {
    let hyper = config.hyper(config.lr_critic);
    state.critic_opt = AdamState::new(&state.critic.params);
    let mut best: Option<(f64, CriticParams)> = None;
    let mut since_best = 0usize;
    for epoch in 0..config.critic_epochs {
        let order = epoch_order(dataset.train.len(), &mut state.rng);
        let mut losses = Vec::with_capacity(order.len());
        let mut batch = Vec::with_capacity(config.batch_episodes);
        for &i in &order {
            let ep = &dataset.train[i];
            let world = dataset.world(ep.world_id);
            let traj = demonstration_trajectory(world, ep)?;
            let mode = Mode::Train {
                dropout: config.dropout,
                seed: state.rng.next_u64(),
            };
            let (loss, grads) =
                critic_mle_gradients(&ep.instruction, &traj, world, &state.critic, mode)?;
            losses.push(loss);
            batch.push(grads);
            if batch.len() == config.batch_episodes.max(1) {
                let (p, o) = apply_batch(&state.critic.params, &state.critic_opt, &batch, &hyper)?;
                state.critic.params = p;
                state.critic_opt = o;
                batch.clear();
            }
        }
        if !batch.is_empty() {
            let (p, o) = apply_batch(&state.critic.params, &state.critic_opt, &batch, &hyper)?;
            state.critic.params = p;
            state.critic_opt = o;
            batch.clear();
        }
        // Validation loss on seen-val demonstrations.
        let mut val_losses = Vec::with_capacity(dataset.seen_val.len());
        for ep in &dataset.seen_val {
            let world = dataset.world(ep.world_id);
            let traj = demonstration_trajectory(world, ep)?;
            let (loss, _) =
                critic_mle_gradients(&ep.instruction, &traj, world, &state.critic, Mode::Eval)?;
            val_losses.push(loss);
        }
        let val_loss = mean(&val_losses);
        let val = evaluate(
            &state.nav,
            dataset,
            Split::SeenVal,
            reward.d_success,
            config.max_path,
            1,
        )?;
        sink(&HistoryRecord {
            phase: Phase::Critic,
            epoch,
            loss: mean(&losses),
            mean_return: 0.0,
            mean_intrinsic: 0.0,
            train_success: 0.0,
            val: ValAggregates::from(&val),
            val_loss,
        });
        let improved = best.as_ref().map_or(true, |(b, _)| val_loss < *b);
        if improved {
            best = Some((val_loss, state.critic.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if config.patience > 0 && since_best >= config.patience {
                break;
            }
        }
    }
    if let Some((_, critic)) = best {
        state.critic = critic;
    }
    Ok(())
}

/// Validation-SR early stopping shared by SL and RL: patience epochs
/// without improvement end the phase and the best-validation parameters
/// win. Patience 0 disables both the stopping and the restore (the final
/// epoch's parameters stand).
struct ValTracker {
    best: Option<(f64, NavigatorParams)>,
    since_best: usize,
    patience: usize,
}

impl ValTracker {
    fn new(patience: usize) -> Self {
        Self {
            best: None,
            since_best: 0,
            patience,
        }
    }

    /// Record this epoch's validation SR. Returns true when the phase
    /// should stop.
    fn update(&mut self, val_sr: f64, nav: &NavigatorParams) -> bool {
        if self.patience == 0 {
            return false;
        }
        let improved = self.best.as_ref().map_or(true, |(b, _)| val_sr > *b);
        if improved {
            self.best = Some((val_sr, nav.clone()));
            self.since_best = 0;
            false
        } else {
            self.since_best += 1;
            self.since_best >= self.patience
        }
    }

    fn restore(self, nav: &mut NavigatorParams) {
        if let Some((_, best)) = self.best {
            *nav = best;
        }
    }
}

/// Supervised warm start: teacher-forced MLE over the training split.
pub fn run_sl_phase(
    state: &mut TrainState,
    dataset: &Dataset,
    config: &TrainConfig,
    reward: &RewardConfig,
    sink: &mut dyn FnMut(&HistoryRecord),
) -> Result<()> {
    let hyper = config.hyper(config.lr_sl);
    state.nav_opt = AdamState::new(&state.nav.params);
    let mut tracker = ValTracker::new(config.patience);
    for epoch in 0..config.sl_epochs {
        let order = epoch_order(dataset.train.len(), &mut state.rng);
        let mut losses = Vec::with_capacity(order.len());
        let mut batch = Vec::with_capacity(config.batch_episodes);
        for &i in &order {
            let ep = &dataset.train[i];
            let world = dataset.world(ep.world_id);
            let mode = Mode::Train {
                dropout: config.dropout,
                seed: state.rng.next_u64(),
            };
            let (loss, grads) = sl_grads(&state.nav, world, ep, config.max_path, mode)?;
            losses.push(loss);
            batch.push(grads);
            if batch.len() == config.batch_episodes.max(1) {
                let (p, o) = apply_batch(&state.nav.params, &state.nav_opt, &batch, &hyper)?;
                state.nav.params = p;
                state.nav_opt = o;
                batch.clear();
            }
        }
        if !batch.is_empty() {
            let (p, o) = apply_batch(&state.nav.params, &state.nav_opt, &batch, &hyper)?;
            state.nav.params = p;
            state.nav_opt = o;
        }
        let val = evaluate(
            &state.nav,
            dataset,
            Split::SeenVal,
            reward.d_success,
            config.max_path,
            1,
        )?;
        sink(&HistoryRecord {
            phase: Phase::Sl,
            epoch,
            loss: mean(&losses),
            mean_return: 0.0,
            mean_intrinsic: 0.0,
            train_success: 0.0,
            val: ValAggregates::from(&val),
            val_loss: 0.0,
        });
        if tracker.update(val.sr_pct, &state.nav) {
            break;
        }
    }
    tracker.restore(&mut state.nav);
    Ok(())
}

/// Mixed-reward REINFORCE over the training split with the frozen critic.
pub fn run_rl_phase(
    state: &mut TrainState,
    dataset: &Dataset,
    config: &TrainConfig,
    reward: &RewardConfig,
    sink: &mut dyn FnMut(&HistoryRecord),
) -> Result<()> {
    let hyper = config.hyper(config.lr_rl);
    state.nav_opt = AdamState::new(&state.nav.params);
    let mut tracker = ValTracker::new(config.patience);
    for epoch in 0..config.rl_epochs {
        let order = epoch_order(dataset.train.len(), &mut state.rng);
        let mut returns = Vec::with_capacity(order.len());
        let mut intrinsics = Vec::with_capacity(order.len());
        let mut successes = Vec::with_capacity(order.len());
        let mut batch = Vec::with_capacity(config.batch_episodes);
        for &i in &order {
            let ep = &dataset.train[i];
            let world = dataset.world(ep.world_id);
            let (stats, grads) = rl_grads(
                &state.nav,
                &state.critic,
                world,
                ep,
                &mut state.rng,
                reward,
                config.max_path,
                config.dropout,
                config.advantage_baseline,
            )?;
            returns.push(stats.rewards.returns[0]);
            intrinsics.push(stats.rewards.intrinsic);
            successes.push(stats.rewards.success() as u8 as f64);
            batch.push(grads);
            if batch.len() == config.batch_episodes.max(1) {
                let (p, o) = apply_batch(&state.nav.params, &state.nav_opt, &batch, &hyper)?;
                state.nav.params = p;
                state.nav_opt = o;
                batch.clear();
            }
        }
        if !batch.is_empty() {
            let (p, o) = apply_batch(&state.nav.params, &state.nav_opt, &batch, &hyper)?;
            state.nav.params = p;
            state.nav_opt = o;
        }
        let val = evaluate(
            &state.nav,
            dataset,
            Split::SeenVal,
            reward.d_success,
            config.max_path,
            1,
        )?;
        sink(&HistoryRecord {
            phase: Phase::Rl,
            epoch,
            loss: 0.0,
            mean_return: mean(&returns),
            mean_intrinsic: mean(&intrinsics),
            train_success: mean(&successes),
            val: ValAggregates::from(&val),
            val_loss: 0.0,
        });
        if tracker.update(val.sr_pct, &state.nav) {
            break;
        }
    }
    tracker.restore(&mut state.nav);
    Ok(())
}

/// Self-imitation: one collection pass (K rollouts per episode, best-by-
/// critic stored), then fine-tuning on the replay buffer. Never reads
/// demonstrations or targets of the chosen split.
pub fn run_sil_phase(
    state: &mut TrainState,
    dataset: &Dataset,
    config: &TrainConfig,
    reward: &RewardConfig,
    mode: SilMode,
    sink: &mut dyn FnMut(&HistoryRecord),
) -> Result<()> {
    let split = mode.split();
    let episodes = dataset.episodes(split);
    if episodes.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "split {} has no episodes",
            split.name()
        )));
    }
    let hyper = config.hyper(config.lr_sil);
    state.nav_opt = AdamState::new(&state.nav.params);
    let mut buffer = ReplayBuffer::new();
    for epoch in 0..config.sil_epochs {
        if epoch == 0 {
            for ep in episodes {
                let world = dataset.world(ep.world_id);
                sil_collect(
                    &state.nav,
                    &state.critic,
                    world,
                    ep,
                    config.sil_rollouts,
                    &mut state.rng,
                    config.dropout,
                    config.max_path,
                    &mut buffer,
                )?;
            }
        }
        let mut losses = Vec::with_capacity(buffer.len());
        let mut rewards = Vec::with_capacity(buffer.len());
        let mut batch = Vec::with_capacity(config.batch_episodes);
        let by_id: std::collections::BTreeMap<u64, &crate::worldsim::EpisodeSpec> =
            episodes.iter().map(|e| (e.id, e)).collect();
        let entries: Vec<_> = buffer.iter().map(|(id, e)| (*id, e.clone())).collect();
        for (id, entry) in &entries {
            let ep = by_id
                .get(id)
                .ok_or_else(|| Error::Integrity(format!("buffer entry {id} has no episode")))?;
            let world = dataset.world(ep.world_id);
            let step_mode = Mode::Train {
                dropout: config.dropout,
                seed: state.rng.next_u64(),
            };
            let (loss, grads) =
                sil_grads(&state.nav, entry, world, ep, step_mode, config.sil_unit_weight)?;
            losses.push(loss);
            rewards.push(entry.reward);
            batch.push(grads);
            if batch.len() == config.batch_episodes.max(1) {
                let (p, o) = apply_batch(&state.nav.params, &state.nav_opt, &batch, &hyper)?;
                state.nav.params = p;
                state.nav_opt = o;
                batch.clear();
            }
        }
        if !batch.is_empty() {
            let (p, o) = apply_batch(&state.nav.params, &state.nav_opt, &batch, &hyper)?;
            state.nav.params = p;
            state.nav_opt = o;
        }
        let val = evaluate(
            &state.nav,
            dataset,
            Split::SeenVal,
            reward.d_success,
            config.max_path,
            1,
        )?;
        sink(&HistoryRecord {
            phase: Phase::Sil,
            epoch,
            loss: mean(&losses),
            mean_return: 0.0,
            mean_intrinsic: mean(&rewards),
            train_success: 0.0,
            val: ValAggregates::from(&val),
            val_loss: 0.0,
        });
    }
    Ok(())
}

/// The full pipeline: critic pre-training, supervised warm start,
/// mixed-reward RL, then optional self-imitation. Phases with zero epochs
/// are skipped (zero RL epochs leaves the pure-SL policy).
pub fn train(
    dataset: &Dataset,
    config: &TrainConfig,
    reward: &RewardConfig,
    sil: Option<SilMode>,
    sink: &mut dyn FnMut(&HistoryRecord),
) -> Result<TrainState> {
    let mut state = TrainState::init(dataset, config)?;
    if config.critic_epochs > 0 {
        run_critic_phase(&mut state, dataset, config, reward, sink)?;
    }
    if config.sl_epochs > 0 {
        run_sl_phase(&mut state, dataset, config, reward, sink)?;
    }
    if config.rl_epochs > 0 {
        run_rl_phase(&mut state, dataset, config, reward, sink)?;
    }
    if let Some(mode) = sil {
        if config.sil_epochs > 0 {
            run_sil_phase(&mut state, dataset, config, reward, mode, sink)?;
        }
    }
    Ok(state)
}
