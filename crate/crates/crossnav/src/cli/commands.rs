//! Subcommand implementations.

use crate::cli::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::cli::config::{parse_config, RunConfig};
use crate::cli::lock::DirLock;
use crate::cli::trace::{parse_trace, TraceRecord, TraceWriter};
use crate::critic::{critic_mle_gradients, instruction_logprob, intrinsic_reward, CriticConfig, CriticParams};
use crate::error::{Error, Result};
use crate::learner::{
    reward_record, run_critic_phase, run_rl_phase, run_sil_phase, run_sl_phase, HistoryRecord, Phase, SilMode, TrainState,
};
use crate::mathcore::{grad_check, Mode, ParamSet};
use crate::metrics::{aggregate, evaluate_episode};
use crate::navigator::{
    rollout, rollout_with, trajectory_logprob_backward, ActionSelect, NavigatorConfig,
    NavigatorParams, Trajectory,
};
use crate::worldsim::{
    demonstration_action, generate_episode, generate_split, generate_world, read_dataset,
    vocab_size, write_dataset, Dataset, EpisodeConfig, Split, WorldConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

pub const DATASET_FILE: &str = "dataset.world";

fn read_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

fn load_dataset(out: &Path) -> Result<Dataset> {
    let path = out.join(DATASET_FILE);
    let file = std::fs::File::open(&path).map_err(|e| {
        Error::InvalidArgument(format!(
            "cannot open {} (run gen-data first): {e}",
            path.display()
        ))
    })?;
    read_dataset(&mut BufReader::new(file))
}

/// `gen-data`: generate the dataset splits and write them to
/// `<out>/dataset.world`.
pub fn cmd_gen_data(config_path: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut config = read_config(config_path)?;
    if let Some(s) = seed {
        config.data_seed = s;
    }
    let _lock = DirLock::acquire(out)?;
    let dataset = generate_split(&config.split, config.data_seed)?;
    let path = out.join(DATASET_FILE);
    let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
    write_dataset(&mut file, &dataset)?;
    file.flush()?;
    println!(
        "wrote {} ({} worlds, {}/{}/{} episodes)",
        path.display(),
        dataset.worlds.len(),
        dataset.train.len(),
        dataset.seen_val.len(),
        dataset.unseen_val.len()
    );
    Ok(())
}

/// Check that a replacement config is compatible with a checkpoint (same
/// dataset shape and tensor dimensions).
fn check_compatible(new: &RunConfig, ckpt: &Checkpoint) -> Result<()> {
    if new.split.world != ckpt.config.split.world {
        return Err(Error::InvalidArgument(
            "config world parameters differ from the checkpoint".into(),
        ));
    }
    let new_nav = new.train.navigator_config_for(&new.split.world);
    let old_nav = ckpt.config.train.navigator_config_for(&ckpt.config.split.world);
    if new_nav != old_nav {
        return Err(Error::InvalidArgument(
            "navigator dimensions differ from the checkpoint".into(),
        ));
    }
    let new_critic = new.train.critic_config_for(&new.split.world);
    let old_critic = ckpt.config.train.critic_config_for(&ckpt.config.split.world);
    if new_critic != old_critic {
        return Err(Error::InvalidArgument(
            "critic dimensions differ from the checkpoint".into(),
        ));
    }
    Ok(())
}

struct PhaseIo {
    trace: TraceWriter<std::io::BufWriter<std::fs::File>>,
}

impl PhaseIo {
    fn new(out: &Path, phase: Phase, timestamp: bool) -> Result<Self> {
        let path = out.join(format!("{}.trace", phase.name()));
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        Ok(Self {
            trace: TraceWriter::new(file, timestamp)?,
        })
    }

    fn sink(&mut self) -> impl FnMut(&HistoryRecord) + '_ {
        |r: &HistoryRecord| {
            let record = TraceRecord::Epoch {
                phase: r.phase,
                epoch: r.epoch,
                split: Split::SeenVal.name().to_string(),
                mean_pl: r.val.mean_pl,
                mean_ne: r.val.mean_ne,
                osr_pct: r.val.osr_pct,
                sr_pct: r.val.sr_pct,
                spl_pct: r.val.spl_pct,
            };
            self.trace.emit(&record).expect("trace write failed");
            println!(
                "[{}] epoch {:>3}  loss {:9.4}  return {:7.3}  intr {:6.4}  val SR {:5.1}%",
                r.phase.name(),
                r.epoch,
                r.loss,
                r.mean_return,
                r.mean_intrinsic,
                r.val.sr_pct
            );
        }
    }
}

/// Shared runner for the four training subcommands.
#[allow(clippy::too_many_arguments)]
pub fn cmd_train_phase(
    phase: Phase,
    config_path: Option<&Path>,
    out: &Path,
    checkpoint_path: Option<&Path>,
    seed: Option<u64>,
    sil_mode: Option<SilMode>,
    timestamp: bool,
) -> Result<()> {
    let _lock = DirLock::acquire(out)?;

    // Resolve config and state: a fresh run (critic pretraining) builds
    // state from the config; later phases continue from a checkpoint, with
    // an optional replacement config for ablations (dims must match).
    let (config, mut state) = match (phase, checkpoint_path) {
        (Phase::Critic, None) => {
            let mut config = read_config(config_path.ok_or_else(|| {
                Error::InvalidArgument("pretrain-critic needs --config".into())
            })?)?;
            if let Some(s) = seed {
                config.train.seed = s;
            }
            let dataset = load_dataset(out)?;
            let state = TrainState::init(&dataset, &config.train)?;
            (config, state)
        }
        (_, Some(ckpt_path)) => {
            let ckpt = load_checkpoint(ckpt_path)?;
            let config = match config_path {
                Some(p) => {
                    let new = read_config(p)?;
                    check_compatible(&new, &ckpt)?;
                    new
                }
                None => ckpt.config.clone(),
            };
            (config, ckpt.state)
        }
        (_, None) => {
            return Err(Error::InvalidArgument(format!(
                "train-{} needs --checkpoint from the previous phase",
                phase.name()
            )))
        }
    };

    let dataset = load_dataset(out)?;
    let mut io = PhaseIo::new(out, phase, timestamp)?;
    {
        let mut sink = io.sink();
        match phase {
            Phase::Critic => {
                run_critic_phase(&mut state, &dataset, &config.train, &config.reward, &mut sink)?
            }
            Phase::Sl => {
                run_sl_phase(&mut state, &dataset, &config.train, &config.reward, &mut sink)?
            }
            Phase::Rl => {
                run_rl_phase(&mut state, &dataset, &config.train, &config.reward, &mut sink)?
            }
            Phase::Sil => {
                let mode = sil_mode.ok_or_else(|| {
                    Error::InvalidArgument("train-sil needs --mode train|unseen".into())
                })?;
                run_sil_phase(
                    &mut state,
                    &dataset,
                    &config.train,
                    &config.reward,
                    mode,
                    &mut sink,
                )?
            }
        }
    }
    io.trace.flush()?;
    let ckpt_out = out.join(format!("{}.ckpt", phase.name()));
    save_checkpoint(
        &ckpt_out,
        &Checkpoint {
            phase,
            config,
            state,
        },
    )?;
    println!("saved {}", ckpt_out.display());
    Ok(())
}

/// Per-episode evaluation detail used by the eval trace.
fn eval_episode_records(
    nav: &NavigatorParams,
    critic: &CriticParams,
    dataset: &Dataset,
    episode: &crate::worldsim::EpisodeSpec,
    config: &RunConfig,
) -> Result<(Vec<TraceRecord>, crate::metrics::EpisodeResult)> {
    let world = dataset.world(episode.world_id);
    let traj = rollout(
        nav,
        world,
        episode,
        ActionSelect::Greedy,
        None::<&mut ChaCha8Rng>,
        config.train.max_path,
        Mode::Eval,
    )?;
    let intr = intrinsic_reward(&episode.instruction, &traj, world, critic)?.value();
    let rewards = reward_record(
        world,
        episode.target_viewpoint(),
        &traj,
        intr,
        &config.reward,
    )?;
    let result = evaluate_episode(world, episode, &traj, config.reward.d_success)?;
    let mut records = Vec::with_capacity(traj.steps.len() + 1);
    for (t, step) in traj.steps.iter().enumerate() {
        records.push(TraceRecord::Step {
            episode_id: episode.id,
            t,
            viewpoint: step.state.viewpoint,
            heading: step.state.heading,
            action_index: step.action,
            log_prob: step.log_prob,
            immediate_reward: rewards.immediate[t],
        });
    }
    records.push(TraceRecord::Episode {
        episode_id: episode.id,
        intrinsic: intr,
        returns0: rewards.returns[0],
        pl: result.pl,
        ne: result.ne,
        success: result.success,
        oracle_success: result.oracle_success,
        spl: result.spl,
    });
    Ok((records, result))
}

/// `eval`: greedy rollouts over one or all splits, metrics table on
/// stdout, step/episode/epoch records to `<out>/eval.trace`.
pub fn cmd_eval(
    checkpoint_path: &Path,
    out: Option<&Path>,
    split: Option<Split>,
    workers: Option<usize>,
    timestamp: bool,
) -> Result<()> {
    let ckpt = load_checkpoint(checkpoint_path)?;
    let config = ckpt.config.clone();
    let workers = workers.unwrap_or(config.workers).max(1);
    let dataset = match out {
        Some(dir) => load_dataset(dir)?,
        None => {
            // Fall back to regenerating from the config snapshot.
            generate_split(&config.split, config.data_seed)?
        }
    };
    let mut writer = match out {
        Some(dir) => {
            let file = std::io::BufWriter::new(std::fs::File::create(dir.join("eval.trace"))?);
            Some(TraceWriter::new(file, timestamp)?)
        }
        None => None,
    };
    let splits: Vec<Split> = match split {
        Some(s) => vec![s],
        None => vec![Split::Train, Split::SeenVal, Split::UnseenVal],
    };
    println!(
        "{:<12}{:>9}{:>9}{:>8}{:>8}{:>8}",
        "split", "PL", "NE", "OSR", "SR", "SPL"
    );
    for s in splits {
        let episodes = dataset.episodes(s);
        if episodes.is_empty() {
            continue;
        }
        let eval_one = |ep: &crate::worldsim::EpisodeSpec| {
            eval_episode_records(&ckpt.state.nav, &ckpt.state.critic, &dataset, ep, &config)
        };
        let per_episode: Result<Vec<_>> = if workers <= 1 {
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
        let per_episode = per_episode?;
        let results: Vec<_> = per_episode.iter().map(|(_, r)| r.clone()).collect();
        let report = aggregate(results)?;
        if let Some(w) = writer.as_mut() {
            for (records, _) in &per_episode {
                for r in records {
                    w.emit(r)?;
                }
            }
            w.emit(&TraceRecord::Epoch {
                phase: ckpt.phase,
                epoch: 0,
                split: s.name().to_string(),
                mean_pl: report.mean_pl,
                mean_ne: report.mean_ne,
                osr_pct: report.osr_pct,
                sr_pct: report.sr_pct,
                spl_pct: report.spl_pct,
            })?;
        }
        println!(
            "{:<12}{:>9.2}{:>9.2}{:>8.1}{:>8.1}{:>8.1}",
            s.name(),
            report.mean_pl,
            report.mean_ne,
            report.osr_pct,
            report.sr_pct,
            report.spl_pct
        );
    }
    if let Some(w) = writer.as_mut() {
        w.flush()?;
    }
    Ok(())
}

/// One gradient check instance of the battery.
pub struct GradCheckOutcome {
    pub name: &'static str,
    pub max_rel_error: f64,
    pub coords: usize,
}

fn battery_world_config() -> WorldConfig {
    WorldConfig {
        n_viewpoints: 8,
        mean_degree: 2.5,
        feature_dim: 3,
        patch_count: 4,
        landmark_vocab: 4,
        noise_sigma: 0.05,
        tile_factor: 1,
        landmark_seed: 5,
    }
}

fn battery_nav_config(wc: &WorldConfig) -> NavigatorConfig {
    NavigatorConfig {
        vocab: vocab_size(wc.landmark_vocab),
        word_dim: 3,
        hidden: 4,
        feature_dim: wc.feature_dim,
        tile_factor: wc.tile_factor,
        action_emb: 3,
        attn_pano: 3,
        attn_text: 4,
        attn_visual: 3,
        predictor: 3,
    }
}

fn battery_critic_config(wc: &WorldConfig) -> CriticConfig {
    CriticConfig {
        vocab: vocab_size(wc.landmark_vocab),
        word_dim: 3,
        hidden: 4,
        feature_dim: wc.feature_dim,
        tile_factor: wc.tile_factor,
        action_emb: 3,
        attn_pano: 3,
        attn_decode: 4,
    }
}

fn battery_setup(
    seed: u64,
) -> Result<(
    crate::worldsim::WorldGraph,
    crate::worldsim::EpisodeSpec,
    NavigatorParams,
)> {
    let wc = battery_world_config();
    let world = generate_world(&wc, 0, seed)?;
    let episode = generate_episode(
        &world,
        seed ^ 0xabcd,
        &EpisodeConfig {
            min_hops: 3,
            max_hops: 4,
            d_success: 0.5,
            max_instruction_length: 80,
        },
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x55);
    let nav = NavigatorParams::init(battery_nav_config(&wc), &mut rng)?;
    Ok((world, episode, nav))
}

fn demo_traj(
    world: &crate::worldsim::WorldGraph,
    episode: &crate::worldsim::EpisodeSpec,
    nav: &NavigatorParams,
) -> Result<Trajectory> {
    rollout_with(nav, world, episode, 10, Mode::Eval, |_, state, _| {
        demonstration_action(world, episode, state)
    })
}

/// The gradient-fidelity battery: a single navigator step, a teacher-
/// forced rollout of at least three steps, and the critic MLE loss, each
/// checked coordinate-by-coordinate against central finite differences at
/// `epsilon = 1e-5`.
pub fn grad_check_battery() -> Result<Vec<GradCheckOutcome>> {
    let mut out = Vec::new();

    // Navigator: one-step action log-probability.
    {
        let (world, episode, nav) = battery_setup(13)?;
        let traj = rollout_with(&nav, &world, &episode, 10, Mode::Eval, |_, _, cache| {
            Ok(cache.probs.len() - 1) // STOP immediately
        })?;
        let analytic = trajectory_logprob_backward(&nav, &world, &episode, &traj, &[1.0])?;
        let config = nav.config;
        let loss = |p: &ParamSet| {
            let candidate = NavigatorParams {
                config,
                params: p.clone(),
            };
            Ok(crate::navigator::trajectory_logprobs(&candidate, &world, &episode, &traj)?[0])
        };
        let report = grad_check(loss, &nav.params, &analytic, 1e-5)?;
        out.push(GradCheckOutcome {
            name: "navigator-step",
            max_rel_error: report.max_rel_error,
            coords: report.coords,
        });
    }

    // Navigator: full teacher-forced rollout (≥ 3 steps).
    {
        let (world, episode, nav) = battery_setup(11)?;
        let traj = demo_traj(&world, &episode, &nav)?;
        debug_assert!(traj.steps.len() >= 3);
        let weights = vec![1.0; traj.steps.len()];
        let analytic = trajectory_logprob_backward(&nav, &world, &episode, &traj, &weights)?;
        let config = nav.config;
        let loss = |p: &ParamSet| {
            let candidate = NavigatorParams {
                config,
                params: p.clone(),
            };
            Ok(
                crate::navigator::trajectory_logprobs(&candidate, &world, &episode, &traj)?
                    .iter()
                    .sum(),
            )
        };
        let report = grad_check(loss, &nav.params, &analytic, 1e-5)?;
        out.push(GradCheckOutcome {
            name: "navigator-rollout",
            max_rel_error: report.max_rel_error,
            coords: report.coords,
        });
    }

    // Critic: MLE loss on a demonstration pair.
    {
        let (world, episode, nav) = battery_setup(21)?;
        let traj = demo_traj(&world, &episode, &nav)?;
        let critic = CriticParams::init(
            battery_critic_config(&battery_world_config()),
            &mut ChaCha8Rng::seed_from_u64(21 ^ 0xc0),
        )?;
        let (_, analytic) =
            critic_mle_gradients(&episode.instruction, &traj, &world, &critic, Mode::Eval)?;
        let config = critic.config;
        let loss = |p: &ParamSet| {
            let candidate = CriticParams {
                config,
                params: p.clone(),
            };
            let lps = instruction_logprob(
                &episode.instruction,
                &traj,
                &world,
                &candidate,
                Mode::Eval,
            )?;
            Ok(-lps.iter().sum::<f64>() / lps.len() as f64)
        };
        let report = grad_check(loss, &critic.params, &analytic, 1e-5)?;
        out.push(GradCheckOutcome {
            name: "critic-mle",
            max_rel_error: report.max_rel_error,
            coords: report.coords,
        });
    }

    Ok(out)
}

/// `grad-check`: run the battery, print one line per check, exit nonzero
/// above the 1e-4 gate.
pub fn cmd_grad_check() -> Result<bool> {
    let outcomes = grad_check_battery()?;
    let mut all_ok = true;
    for o in &outcomes {
        let ok = o.max_rel_error < 1e-4;
        all_ok &= ok;
        println!(
            "{:<20} max relative error {:.3e} over {} coordinates  [{}]",
            o.name,
            o.max_rel_error,
            o.coords,
            if ok { "PASS" } else { "FAIL" }
        );
    }
    Ok(all_ok)
}

/// `trace-dump`: parse a trace file and re-emit the canonical records.
pub fn cmd_trace_dump(path: &Path) -> Result<()> {
    let file = std::fs::File::open(path)?;
    let records = parse_trace(&mut BufReader::new(file))?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for r in &records {
        writeln!(out, "{}", r.to_line())?;
    }
    eprintln!("{} records", records.len());
    Ok(())
}

/// Conventional checkpoint path of a phase inside a run directory.
pub fn default_checkpoint(out: &Path, phase: Phase) -> PathBuf {
    out.join(format!("{}.ckpt", phase.name()))
}
