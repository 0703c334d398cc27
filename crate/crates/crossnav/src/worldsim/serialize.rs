//! The `CROSSNAV-WORLD v1` dataset file: a human-diffable structured-text
//! document holding worlds and episode splits, round-trip exact for ids
//! and reals (17 significant digits).

use crate::error::{Error, Result};
use crate::worldsim::episode::{vocab_size, EpisodeSpec, Instruction};
use crate::worldsim::graph::{Viewpoint, WorldConfig, WorldGraph};
use crate::worldsim::observe::AgentState;
use crate::worldsim::split::Dataset;
use std::io::{BufRead, Write};

pub const WORLD_MAGIC: &str = "CROSSNAV-WORLD v1";

/// Format a real with 17 significant digits (exact f64 round trip).
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_real(s: &str, line: usize) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Parse(format!("line {line}: bad real {s:?}")))
}

fn parse_int<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.parse::<T>().map_err(|_| Error::Parse(format!("line {line}: bad integer {s:?}")))
}

/// Split a `key=value` field.
fn kv<'a>(field: &'a str, key: &str, line: usize) -> Result<&'a str> {
    field
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| Error::Parse(format!("line {line}: expected {key}=..., got {field:?}")))
}

/// Write a dataset as a `CROSSNAV-WORLD v1` document.
pub fn write_dataset(out: &mut impl Write, ds: &Dataset) -> Result<()> {
    let first = ds
        .worlds
        .first()
        .ok_or_else(|| Error::InvalidArgument("dataset with no worlds".into()))?;
    writeln!(out, "{WORLD_MAGIC}")?;
    writeln!(
        out,
        "features feature_dim={} patch_count={} landmark_vocab={} noise_sigma={} tile_factor={} landmark_seed={}",
        first.feature_dim,
        first.patch_count,
        first.landmark_vocab,
        fmt_real(first.noise_sigma),
        first.tile_factor,
        first.landmark_seed
    )?;
    for world in &ds.worlds {
        let role = if ds.is_training_world(world.id) { "train" } else { "unseen" };
        writeln!(out, "world {} seed={} role={}", world.id, world.seed, role)?;
        for vp in &world.viewpoints {
            writeln!(
                out,
                "viewpoint {} {} {} {} {}",
                vp.id,
                fmt_real(vp.position[0]),
                fmt_real(vp.position[1]),
                fmt_real(vp.position[2]),
                vp.landmark_id
            )?;
        }
        for (a, b) in &world.edges {
            writeln!(out, "edge {a} {b}")?;
        }
    }
    for (name, eps) in [
        ("train", &ds.train),
        ("seen_val", &ds.seen_val),
        ("unseen_val", &ds.unseen_val),
    ] {
        writeln!(out, "episodes {name}")?;
        for ep in eps {
            let demo: Vec<String> = ep.demonstration().iter().map(u32::to_string).collect();
            let tokens: Vec<String> =
                ep.instruction.tokens().iter().map(u32::to_string).collect();
            writeln!(
                out,
                "episode id={} world={} seed={} start={} heading={} target={} demo={} tokens={}",
                ep.id,
                ep.world_id,
                ep.seed,
                ep.start.viewpoint,
                fmt_real(ep.start.heading),
                ep.target_viewpoint(),
                demo.join(","),
                tokens.join(",")
            )?;
        }
    }
    Ok(())
}

/// Read a `CROSSNAV-WORLD v1` document back into a dataset.
pub fn read_dataset(input: &mut impl BufRead) -> Result<Dataset> {
    let mut lines = Vec::new();
    for line in input.lines() {
        lines.push(line?);
    }
    let mut it = lines.iter().enumerate().map(|(i, l)| (i + 1, l.as_str()));

    let (_, magic) = it
        .next()
        .ok_or_else(|| Error::Parse("empty dataset file".into()))?;
    if magic != WORLD_MAGIC {
        return Err(Error::Integrity(format!(
            "bad magic {magic:?}, expected {WORLD_MAGIC:?}"
        )));
    }
    let (fline, features) = it
        .next()
        .ok_or_else(|| Error::Parse("missing features line".into()))?;
    let f: Vec<&str> = features.split_whitespace().collect();
    if f.len() != 7 || f[0] != "features" {
        return Err(Error::Parse(format!("line {fline}: bad features line")));
    }
    let config = WorldConfig {
        n_viewpoints: 2,
        mean_degree: 1.0,
        feature_dim: parse_int(kv(f[1], "feature_dim", fline)?, fline)?,
        patch_count: parse_int(kv(f[2], "patch_count", fline)?, fline)?,
        landmark_vocab: parse_int(kv(f[3], "landmark_vocab", fline)?, fline)?,
        noise_sigma: parse_real(kv(f[4], "noise_sigma", fline)?, fline)?,
        tile_factor: parse_int(kv(f[5], "tile_factor", fline)?, fline)?,
        landmark_seed: parse_int(kv(f[6], "landmark_seed", fline)?, fline)?,
    };

    struct PendingWorld {
        id: u32,
        seed: u64,
        train: bool,
        viewpoints: Vec<Viewpoint>,
        edges: Vec<(u32, u32)>,
    }
    let mut worlds: Vec<WorldGraph> = Vec::new();
    let mut train_world_count = 0usize;
    let mut pending: Option<PendingWorld> = None;
    let mut splits: [Vec<EpisodeSpec>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut current_split: Option<usize> = None;

    let flush = |pending: &mut Option<PendingWorld>,
                     worlds: &mut Vec<WorldGraph>,
                     train_world_count: &mut usize,
                     config: &WorldConfig|
     -> Result<()> {
        if let Some(w) = pending.take() {
            if w.id as usize != worlds.len() {
                return Err(Error::Parse(format!(
                    "world {} out of order (expected {})",
                    w.id,
                    worlds.len()
                )));
            }
            if w.train {
                *train_world_count += 1;
            }
            worlds.push(WorldGraph::assemble(w.id, w.seed, w.viewpoints, w.edges, config)?);
        }
        Ok(())
    };

    for (ln, raw) in it {
        let fields: Vec<&str> = raw.split_whitespace().collect();
        match fields.first().copied() {
            None => continue,
            Some("world") => {
                flush(&mut pending, &mut worlds, &mut train_world_count, &config)?;
                if fields.len() != 4 {
                    return Err(Error::Parse(format!("line {ln}: bad world line")));
                }
                pending = Some(PendingWorld {
                    id: parse_int(fields[1], ln)?,
                    seed: parse_int(kv(fields[2], "seed", ln)?, ln)?,
                    train: kv(fields[3], "role", ln)? == "train",
                    viewpoints: Vec::new(),
                    edges: Vec::new(),
                });
            }
            Some("viewpoint") => {
                let w = pending
                    .as_mut()
                    .ok_or_else(|| Error::Parse(format!("line {ln}: viewpoint outside world")))?;
                if fields.len() != 6 {
                    return Err(Error::Parse(format!("line {ln}: bad viewpoint line")));
                }
                w.viewpoints.push(Viewpoint {
                    id: parse_int(fields[1], ln)?,
                    position: [
                        parse_real(fields[2], ln)?,
                        parse_real(fields[3], ln)?,
                        parse_real(fields[4], ln)?,
                    ],
                    landmark_id: parse_int(fields[5], ln)?,
                });
            }
            Some("edge") => {
                let w = pending
                    .as_mut()
                    .ok_or_else(|| Error::Parse(format!("line {ln}: edge outside world")))?;
                if fields.len() != 3 {
                    return Err(Error::Parse(format!("line {ln}: bad edge line")));
                }
                w.edges.push((parse_int(fields[1], ln)?, parse_int(fields[2], ln)?));
            }
            Some("episodes") => {
                flush(&mut pending, &mut worlds, &mut train_world_count, &config)?;
                current_split = Some(match fields.get(1).copied() {
                    Some("train") => 0,
                    Some("seen_val") => 1,
                    Some("unseen_val") => 2,
                    other => {
                        return Err(Error::Parse(format!(
                            "line {ln}: unknown split {other:?}"
                        )))
                    }
                });
            }
            Some("episode") => {
                let split = current_split
                    .ok_or_else(|| Error::Parse(format!("line {ln}: episode outside a split")))?;
                if fields.len() != 9 {
                    return Err(Error::Parse(format!("line {ln}: bad episode line")));
                }
                let id: u64 = parse_int(kv(fields[1], "id", ln)?, ln)?;
                let world_id: u32 = parse_int(kv(fields[2], "world", ln)?, ln)?;
                let seed: u64 = parse_int(kv(fields[3], "seed", ln)?, ln)?;
                let start_vp: u32 = parse_int(kv(fields[4], "start", ln)?, ln)?;
                let heading = parse_real(kv(fields[5], "heading", ln)?, ln)?;
                let target: u32 = parse_int(kv(fields[6], "target", ln)?, ln)?;
                let demo: Vec<u32> = kv(fields[7], "demo", ln)?
                    .split(',')
                    .map(|s| parse_int(s, ln))
                    .collect::<Result<_>>()?;
                let tokens: Vec<u32> = kv(fields[8], "tokens", ln)?
                    .split(',')
                    .map(|s| parse_int(s, ln))
                    .collect::<Result<_>>()?;
                let instruction = Instruction::new(tokens, vocab_size(config.landmark_vocab))?;
                splits[split].push(EpisodeSpec::from_parts(
                    id,
                    world_id,
                    seed,
                    instruction,
                    AgentState {
                        viewpoint: start_vp,
                        heading,
                        elevation: 0.0,
                    },
                    target,
                    demo,
                )?);
            }
            Some(other) => {
                return Err(Error::Parse(format!("line {ln}: unknown section {other:?}")));
            }
        }
    }
    flush(&mut pending, &mut worlds, &mut train_world_count, &config)?;
    if worlds.is_empty() {
        return Err(Error::Integrity("dataset with no worlds".into()));
    }
    let [train, seen_val, unseen_val] = splits;
    for ep in train.iter().chain(&seen_val).chain(&unseen_val) {
        if ep.world_id as usize >= worlds.len() {
            return Err(Error::Integrity(format!(
                "episode {} references unknown world {}",
                ep.id, ep.world_id
            )));
        }
    }
    Ok(Dataset {
        worlds,
        train_world_count,
        train,
        seen_val,
        unseen_val,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldsim::split::{generate_split, SplitConfig};
    use std::io::BufReader;

    fn sample() -> Dataset {
        let config = SplitConfig {
            train_worlds: 2,
            unseen_worlds: 1,
            train_episodes: 5,
            seen_val_episodes: 3,
            unseen_val_episodes: 3,
            world: WorldConfig {
                n_viewpoints: 12,
                feature_dim: 4,
                ..WorldConfig::default()
            },
            ..SplitConfig::default()
        };
        generate_split(&config, 31).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let ds = sample();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &ds).unwrap();
        let back = read_dataset(&mut BufReader::new(&buf[..])).unwrap();
        assert_eq!(ds, back);
        // And byte-stable: re-serialization is identical.
        let mut buf2 = Vec::new();
        write_dataset(&mut buf2, &back).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn magic_is_checked() {
        let mut r = BufReader::new(&b"NOT-A-DATASET\n"[..]);
        assert!(matches!(read_dataset(&mut r), Err(Error::Integrity(_))));
    }

    #[test]
    fn truncation_is_detected() {
        let ds = sample();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &ds).unwrap();
        // Cut mid-file: a world line without its episodes still parses, so
        // chop inside the first world's viewpoint list instead.
        let cut = buf.len() / 8;
        let short = &buf[..cut];
        let res = read_dataset(&mut BufReader::new(short));
        // Either a parse error or a dataset that no longer matches.
        if let Ok(back) = res {
            assert_ne!(ds, back);
        }
    }
}
