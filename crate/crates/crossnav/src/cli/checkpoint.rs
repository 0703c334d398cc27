//! `CROSSNAV-CKPT v1` checkpoints: a text header (phase, config snapshot,
//! RNG state, tensor directory) followed by raw little-endian `f64`
//! payloads in directory order. Round trips are bit-identical, including
//! the RNG continuation.

use crate::cli::config::{config_to_text, parse_config, RunConfig};
use crate::critic::CriticParams;
use crate::error::{Error, Result};
use crate::learner::{Phase, TrainState};
use crate::mathcore::{AdamState, ParamSet};
use crate::navigator::NavigatorParams;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::Path;

pub const CKPT_MAGIC: &str = "CROSSNAV-CKPT v1";

/// A full training snapshot.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub phase: Phase,
    pub config: RunConfig,
    pub state: TrainState,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn unhex(s: &str) -> Result<Vec<u8>> {
    if s.len() % 2 != 0 || !s.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(Error::Parse(format!("bad hex string {s:?}")));
    }
    (0..s.len() / 2)
        .map(|i| {
            u8::from_str_radix(&s[2 * i..2 * i + 2], 16)
                .map_err(|_| Error::Parse("bad hex byte".into()))
        })
        .collect()
}

/// The six tensor groups of a checkpoint, in their fixed order.
fn groups(state: &TrainState) -> [(&'static str, &ParamSet); 6] {
    [
        ("nav", &state.nav.params),
        ("navm", &state.nav_opt.m),
        ("navv", &state.nav_opt.v),
        ("critic", &state.critic.params),
        ("criticm", &state.critic_opt.m),
        ("criticv", &state.critic_opt.v),
    ]
}

/// Serialize a checkpoint to a writer.
pub fn write_checkpoint(out: &mut impl Write, ckpt: &Checkpoint) -> Result<()> {
    writeln!(out, "{CKPT_MAGIC}")?;
    writeln!(out, "phase {}", ckpt.phase.name())?;
    let config_text = config_to_text(&ckpt.config);
    writeln!(out, "config-lines {}", config_text.lines().count())?;
    out.write_all(config_text.as_bytes())?;
    writeln!(
        out,
        "rng seed={} word_pos={}",
        hex(&ckpt.state.rng.get_seed()),
        ckpt.state.rng.get_word_pos()
    )?;
    writeln!(
        out,
        "adam nav_step={} critic_step={}",
        ckpt.state.nav_opt.step, ckpt.state.critic_opt.step
    )?;
    let gs = groups(&ckpt.state);
    let count: usize = gs.iter().map(|(_, p)| p.len()).sum();
    writeln!(out, "tensors {count}")?;
    for (prefix, set) in &gs {
        for (name, t) in set.iter() {
            let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
            writeln!(out, "tensor {prefix}/{name} {}", dims.join(" "))?;
        }
    }
    writeln!(out, "payload")?;
    for (_, set) in &gs {
        for (_, t) in set.iter() {
            for v in t.values() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

/// Save to a file path.
pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_checkpoint(&mut file, ckpt)?;
    file.flush()?;
    Ok(())
}

/// Load and fully validate a checkpoint; a truncated or inconsistent file
/// yields an integrity error with no partial state exposed.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path)?;
    let marker = b"\npayload\n";
    let split_at = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| Error::Integrity("checkpoint has no payload section".into()))?;
    let header = std::str::from_utf8(&bytes[..split_at])
        .map_err(|_| Error::Integrity("checkpoint header is not UTF-8".into()))?;
    let payload = &bytes[split_at + marker.len()..];

    let mut lines = header.lines();
    let magic = lines
        .next()
        .ok_or_else(|| Error::Integrity("empty checkpoint".into()))?;
    if magic != CKPT_MAGIC {
        return Err(Error::Integrity(format!(
            "bad magic {magic:?}, expected {CKPT_MAGIC:?}"
        )));
    }
    let phase_line = lines
        .next()
        .ok_or_else(|| Error::Integrity("missing phase line".into()))?;
    let phase = phase_line
        .strip_prefix("phase ")
        .and_then(Phase::parse)
        .ok_or_else(|| Error::Integrity(format!("bad phase line {phase_line:?}")))?;
    let config_count: usize = lines
        .next()
        .and_then(|l| l.strip_prefix("config-lines "))
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| Error::Integrity("bad config-lines header".into()))?;
    let mut config_text = String::new();
    for _ in 0..config_count {
        let line = lines
            .next()
            .ok_or_else(|| Error::Integrity("config snapshot truncated".into()))?;
        config_text.push_str(line);
        config_text.push('\n');
    }
    let config = parse_config(&config_text)?;

    let rng_line = lines
        .next()
        .and_then(|l| l.strip_prefix("rng "))
        .ok_or_else(|| Error::Integrity("missing rng line".into()))?;
    let mut seed_hex = None;
    let mut word_pos = None;
    for field in rng_line.split_whitespace() {
        if let Some(s) = field.strip_prefix("seed=") {
            seed_hex = Some(s.to_string());
        } else if let Some(p) = field.strip_prefix("word_pos=") {
            word_pos = Some(
                p.parse::<u128>()
                    .map_err(|_| Error::Integrity("bad rng word_pos".into()))?,
            );
        }
    }
    let seed_bytes = unhex(&seed_hex.ok_or_else(|| Error::Integrity("rng seed missing".into()))?)?;
    let seed: [u8; 32] = seed_bytes
        .try_into()
        .map_err(|_| Error::Integrity("rng seed must be 32 bytes".into()))?;
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_word_pos(word_pos.ok_or_else(|| Error::Integrity("rng word_pos missing".into()))?);

    let adam_line = lines
        .next()
        .and_then(|l| l.strip_prefix("adam "))
        .ok_or_else(|| Error::Integrity("missing adam line".into()))?;
    let mut nav_step = None;
    let mut critic_step = None;
    for field in adam_line.split_whitespace() {
        if let Some(s) = field.strip_prefix("nav_step=") {
            nav_step = s.parse::<u64>().ok();
        } else if let Some(s) = field.strip_prefix("critic_step=") {
            critic_step = s.parse::<u64>().ok();
        }
    }
    let (nav_step, critic_step) = (
        nav_step.ok_or_else(|| Error::Integrity("bad adam nav_step".into()))?,
        critic_step.ok_or_else(|| Error::Integrity("bad adam critic_step".into()))?,
    );

    let tensor_count: usize = lines
        .next()
        .and_then(|l| l.strip_prefix("tensors "))
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| Error::Integrity("bad tensors header".into()))?;
    let mut directory: Vec<(String, Vec<usize>)> = Vec::with_capacity(tensor_count);
    for _ in 0..tensor_count {
        let line = lines
            .next()
            .ok_or_else(|| Error::Integrity("tensor directory truncated".into()))?;
        let mut fields = line.split_whitespace();
        if fields.next() != Some("tensor") {
            return Err(Error::Integrity(format!("bad tensor line {line:?}")));
        }
        let name = fields
            .next()
            .ok_or_else(|| Error::Integrity("tensor line without a name".into()))?
            .to_string();
        let shape: Vec<usize> = fields
            .map(|d| {
                d.parse::<usize>()
                    .map_err(|_| Error::Integrity(format!("bad dimension in {line:?}")))
            })
            .collect::<Result<_>>()?;
        directory.push((name, shape));
    }
    if lines.next().is_some() {
        return Err(Error::Integrity("unexpected text after tensor directory".into()));
    }

    // Pull the payload per directory entry.
    let expected_bytes: usize = directory
        .iter()
        .map(|(_, s)| s.iter().product::<usize>() * 8)
        .sum();
    if payload.len() != expected_bytes {
        return Err(Error::Integrity(format!(
            "payload holds {} bytes, directory wants {expected_bytes}",
            payload.len()
        )));
    }
    let mut sets: [ParamSet; 6] = Default::default();
    let group_names = ["nav", "navm", "navv", "critic", "criticm", "criticv"];
    let mut offset = 0usize;
    for (name, shape) in &directory {
        let (prefix, tensor_name) = name
            .split_once('/')
            .ok_or_else(|| Error::Integrity(format!("tensor {name:?} lacks a group prefix")))?;
        let group = group_names
            .iter()
            .position(|g| *g == prefix)
            .ok_or_else(|| Error::Integrity(format!("unknown tensor group {prefix:?}")))?;
        let count: usize = shape.iter().product();
        let mut values = Vec::with_capacity(count);
        for i in 0..count {
            let at = offset + 8 * i;
            let mut buf = [0u8; 8];
            buf.copy_from_slice(&payload[at..at + 8]);
            let v = f64::from_le_bytes(buf);
            if !v.is_finite() {
                return Err(Error::Integrity(format!(
                    "non-finite value in tensor {name:?}"
                )));
            }
            values.push(v);
        }
        offset += 8 * count;
        sets[group].insert(
            tensor_name,
            crate::mathcore::Tensor::new(shape.clone(), values)?,
        )?;
    }

    // Rebuild the typed state and verify layouts.
    let [nav_p, navm, navv, critic_p, criticm, criticv] = sets;
    let nav_config = config.train.navigator_config_for(&config.split.world);
    let critic_config = config.train.critic_config_for(&config.split.world);
    let expect_nav = NavigatorParams::zeros(nav_config);
    expect_nav.params.check_mirrors(&nav_p).map_err(|e| {
        Error::Integrity(format!("navigator tensors do not match the config: {e}"))
    })?;
    let expect_critic = CriticParams::zeros(critic_config);
    expect_critic.params.check_mirrors(&critic_p).map_err(|e| {
        Error::Integrity(format!("critic tensors do not match the config: {e}"))
    })?;
    nav_p.check_mirrors(&navm)?;
    nav_p.check_mirrors(&navv)?;
    critic_p.check_mirrors(&criticm)?;
    critic_p.check_mirrors(&criticv)?;

    Ok(Checkpoint {
        phase,
        config,
        state: TrainState {
            nav: NavigatorParams {
                config: nav_config,
                params: nav_p,
            },
            critic: CriticParams {
                config: critic_config,
                params: critic_p,
            },
            nav_opt: AdamState {
                step: nav_step,
                m: navm,
                v: navv,
            },
            critic_opt: AdamState {
                step: critic_step,
                m: criticm,
                v: criticv,
            },
            rng,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldsim::generate_split;

    fn sample_checkpoint() -> Checkpoint {
        let mut config = RunConfig::default();
        config.split.train_worlds = 1;
        config.split.unseen_worlds = 1;
        config.split.train_episodes = 2;
        config.split.seen_val_episodes = 1;
        config.split.unseen_val_episodes = 1;
        config.split.world.n_viewpoints = 10;
        config.split.world.feature_dim = 4;
        config.train.hidden = 4;
        config.train.word_dim = 3;
        config.train.action_emb = 3;
        config.train.attn_pano = 3;
        config.train.attn_text = 4;
        config.train.attn_visual = 3;
        config.train.predictor = 3;
        config.train.attn_decode = 4;
        let dataset = generate_split(&config.split, config.data_seed).unwrap();
        let mut state = TrainState::init(&dataset, &config.train).unwrap();
        // Push the RNG forward so word_pos is non-trivial.
        use rand::RngCore;
        for _ in 0..13 {
            state.rng.next_u64();
        }
        Checkpoint {
            phase: Phase::Sl,
            config,
            state,
        }
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let ckpt = sample_checkpoint();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("test.ckpt");
        save_checkpoint(&path, &ckpt).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.phase, ckpt.phase);
        assert_eq!(back.config, ckpt.config);
        assert_eq!(back.state.nav.params, ckpt.state.nav.params);
        assert_eq!(back.state.critic.params, ckpt.state.critic.params);
        assert_eq!(back.state.nav_opt, ckpt.state.nav_opt);
        assert_eq!(back.state.critic_opt, ckpt.state.critic_opt);
        assert_eq!(back.state.rng, ckpt.state.rng);
        // And the file itself re-serializes identically.
        let path2 = dir.path().join("again.ckpt");
        save_checkpoint(&path2, &back).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn rng_continuation_matches() {
        let ckpt = sample_checkpoint();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rng.ckpt");
        save_checkpoint(&path, &ckpt).unwrap();
        let mut back = load_checkpoint(&path).unwrap();
        let mut orig = ckpt.state.rng.clone();
        use rand::RngCore;
        for _ in 0..100 {
            assert_eq!(orig.next_u64(), back.state.rng.next_u64());
        }
    }

    #[test]
    fn truncated_payload_is_an_integrity_error() {
        let ckpt = sample_checkpoint();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trunc.ckpt");
        save_checkpoint(&path, &ckpt).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Integrity(_))));
    }

    #[test]
    fn magic_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, b"NOT-A-CKPT v9\npayload\n").unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Integrity(_))));
    }
}
