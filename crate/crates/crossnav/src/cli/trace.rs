//! The trace log: line-structured, tab-separated records with reals at 17
//! significant digits, re-parseable exactly.

use crate::error::{Error, Result};
use crate::learner::Phase;
use crate::worldsim::fmt_real;
use std::io::{BufRead, Write};

pub const TRACE_HEADER: &str = "# crossnav-trace v1";

/// One trace line.
#[derive(Clone, Debug, PartialEq)]
pub enum TraceRecord {
    /// One policy step inside an episode.
    Step {
        episode_id: u64,
        t: usize,
        viewpoint: u32,
        heading: f64,
        action_index: usize,
        log_prob: f64,
        immediate_reward: f64,
    },
    /// One finished episode with its rewards and metrics.
    Episode {
        episode_id: u64,
        intrinsic: f64,
        returns0: f64,
        pl: f64,
        ne: f64,
        success: bool,
        oracle_success: bool,
        spl: f64,
    },
    /// One training or evaluation epoch with aggregate metrics.
    Epoch {
        phase: Phase,
        epoch: usize,
        split: String,
        mean_pl: f64,
        mean_ne: f64,
        osr_pct: f64,
        sr_pct: f64,
        spl_pct: f64,
    },
}

impl TraceRecord {
    /// The canonical line form (no trailing newline).
    pub fn to_line(&self) -> String {
        match self {
            TraceRecord::Step {
                episode_id,
                t,
                viewpoint,
                heading,
                action_index,
                log_prob,
                immediate_reward,
            } => format!(
                "step\t{episode_id}\t{t}\t{viewpoint}\t{}\t{action_index}\t{}\t{}",
                fmt_real(*heading),
                fmt_real(*log_prob),
                fmt_real(*immediate_reward)
            ),
            TraceRecord::Episode {
                episode_id,
                intrinsic,
                returns0,
                pl,
                ne,
                success,
                oracle_success,
                spl,
            } => format!(
                "episode\t{episode_id}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                fmt_real(*intrinsic),
                fmt_real(*returns0),
                fmt_real(*pl),
                fmt_real(*ne),
                *success as u8,
                *oracle_success as u8,
                fmt_real(*spl)
            ),
            TraceRecord::Epoch {
                phase,
                epoch,
                split,
                mean_pl,
                mean_ne,
                osr_pct,
                sr_pct,
                spl_pct,
            } => format!(
                "epoch\t{}\t{epoch}\t{split}\t{}\t{}\t{}\t{}\t{}",
                phase.name(),
                fmt_real(*mean_pl),
                fmt_real(*mean_ne),
                fmt_real(*osr_pct),
                fmt_real(*sr_pct),
                fmt_real(*spl_pct)
            ),
        }
    }

    /// Parse one canonical line.
    pub fn parse_line(line: &str) -> Result<TraceRecord> {
        let fields: Vec<&str> = line.split('\t').collect();
        let bad = || Error::Parse(format!("bad trace line {line:?}"));
        let real = |s: &str| s.parse::<f64>().map_err(|_| bad());
        let int = |s: &str| s.parse::<u64>().map_err(|_| bad());
        let flag = |s: &str| match s {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(bad()),
        };
        match fields.first().copied() {
            Some("step") if fields.len() == 8 => Ok(TraceRecord::Step {
                episode_id: int(fields[1])?,
                t: int(fields[2])? as usize,
                viewpoint: int(fields[3])? as u32,
                heading: real(fields[4])?,
                action_index: int(fields[5])? as usize,
                log_prob: real(fields[6])?,
                immediate_reward: real(fields[7])?,
            }),
            Some("episode") if fields.len() == 9 => Ok(TraceRecord::Episode {
                episode_id: int(fields[1])?,
                intrinsic: real(fields[2])?,
                returns0: real(fields[3])?,
                pl: real(fields[4])?,
                ne: real(fields[5])?,
                success: flag(fields[6])?,
                oracle_success: flag(fields[7])?,
                spl: real(fields[8])?,
            }),
            Some("epoch") if fields.len() == 9 => Ok(TraceRecord::Epoch {
                phase: Phase::parse(fields[1]).ok_or_else(bad)?,
                epoch: int(fields[2])? as usize,
                split: fields[3].to_string(),
                mean_pl: real(fields[4])?,
                mean_ne: real(fields[5])?,
                osr_pct: real(fields[6])?,
                sr_pct: real(fields[7])?,
                spl_pct: real(fields[8])?,
            }),
            _ => Err(bad()),
        }
    }
}

/// Append-only trace writer. The first line names the schema version; an
/// optional second line carries a wall-clock timestamp (disable it for
/// byte-reproducible runs).
pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W, timestamp: bool) -> Result<Self> {
        writeln!(out, "{TRACE_HEADER}")?;
        if timestamp {
            let now = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            writeln!(out, "# generated {now}")?;
        }
        Ok(Self { out })
    }

    pub fn emit(&mut self, record: &TraceRecord) -> Result<()> {
        writeln!(self.out, "{}", record.to_line())?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Parse a whole trace stream back into records. Comment lines (`#`) are
/// skipped; the header must be present.
pub fn parse_trace(input: &mut impl BufRead) -> Result<Vec<TraceRecord>> {
    let mut records = Vec::new();
    let mut saw_header = false;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line != TRACE_HEADER {
                return Err(Error::Integrity(format!(
                    "trace header {line:?}, expected {TRACE_HEADER:?}"
                )));
            }
            saw_header = true;
            continue;
        }
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        records.push(TraceRecord::parse_line(&line)?);
    }
    if !saw_header {
        return Err(Error::Integrity("empty trace".into()));
    }
    Ok(records)
}
