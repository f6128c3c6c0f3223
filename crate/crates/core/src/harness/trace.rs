//! Line-oriented, version-tagged trace files.
//!
//! ```text
//! dyntrack-trace 1
//! header {"config_hash":"…","seed":7,"planner":"tree_search","nx":100,"ny":100,"replans":12}
//! step {…}
//! snap {…}
//! plan {…}
//! end 263
//! ```
//!
//! `end` carries the number of records between the header and itself, so a
//! truncated file is always detected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::planner::PlannerKind;

use super::episode::{EpisodeTrace, PlannerLogRow, Snapshot, StepRecord};

pub const MAGIC: &str = "dyntrack-trace";
pub const VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("unsupported trace version {found} (expected {VERSION})")]
    Version { found: String },
    #[error("trace line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("trace truncated: incomplete {record} record")]
    Truncated { record: String },
    #[error("trace geometry mismatch: {0}")]
    Geometry(String),
}

#[derive(Serialize, Deserialize)]
struct Header {
    config_hash: String,
    seed: u64,
    planner: PlannerKind,
    nx: usize,
    ny: usize,
    replans: usize,
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("trace records are always serializable")
}

pub fn to_string(trace: &EpisodeTrace) -> String {
    let header = Header {
        config_hash: trace.config_hash.clone(),
        seed: trace.seed,
        planner: trace.planner,
        nx: trace.nx,
        ny: trace.ny,
        replans: trace.replans,
    };
    let mut out = format!("{MAGIC} {VERSION}\nheader {}\n", json(&header));
    for s in &trace.steps {
        out.push_str(&format!("step {}\n", json(s)));
    }
    for s in &trace.snapshots {
        out.push_str(&format!("snap {}\n", json(s)));
    }
    for p in &trace.planner_log {
        out.push_str(&format!("plan {}\n", json(p)));
    }
    let n = trace.steps.len() + trace.snapshots.len() + trace.planner_log.len();
    out.push_str(&format!("end {n}\n"));
    out
}

pub fn checksum(trace: &EpisodeTrace) -> String {
    let digest = Sha256::digest(to_string(trace).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn parse_json<T: for<'de> Deserialize<'de>>(
    body: &str,
    line: usize,
    kind: &str,
) -> Result<T, TraceError> {
    serde_json::from_str(body).map_err(|e| {
        if e.is_eof() {
            TraceError::Truncated {
                record: format!("{kind} (line {line})"),
            }
        } else {
            TraceError::Parse {
                line,
                msg: e.to_string(),
            }
        }
    })
}

pub fn from_str(text: &str) -> Result<EpisodeTrace, TraceError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or(TraceError::Truncated {
        record: "version tag".into(),
    })?;
    let mut tag = first.split_whitespace();
    if tag.next() != Some(MAGIC) {
        return Err(TraceError::Parse {
            line: 1,
            msg: format!("missing `{MAGIC}` tag"),
        });
    }
    let found = tag.next().unwrap_or("").to_string();
    if found != VERSION.to_string() {
        return Err(TraceError::Version { found });
    }

    let (hl, hline) = lines.next().ok_or(TraceError::Truncated {
        record: "header".into(),
    })?;
    let body = hline.strip_prefix("header ").ok_or(TraceError::Parse {
        line: hl,
        msg: "expected header record".into(),
    })?;
    let header: Header = parse_json(body, hl, "header")?;

    let mut steps: Vec<StepRecord> = Vec::new();
    let mut snapshots: Vec<Snapshot> = Vec::new();
    let mut planner_log: Vec<PlannerLogRow> = Vec::new();
    let mut last_kind = "header";
    let mut last_line = hl;
    for (ln, line) in lines {
        last_line = ln;
        let (kind, body) = line.split_once(' ').unwrap_or((line, ""));
        match kind {
            "step" => {
                let s: StepRecord = parse_json(body, ln, kind)?;
                if steps.last().is_some_and(|p| p.t >= s.t) {
                    return Err(TraceError::Parse {
                        line: ln,
                        msg: "step times must increase".into(),
                    });
                }
                steps.push(s);
            }
            "snap" => {
                let s: Snapshot = parse_json(body, ln, kind)?;
                if (s.nx, s.ny) != (header.nx, header.ny) || s.probabilities.len() != s.nx * s.ny {
                    return Err(TraceError::Geometry(format!(
                        "snapshot at line {ln} is {}x{} with {} cells, header says {}x{}",
                        s.nx,
                        s.ny,
                        s.probabilities.len(),
                        header.nx,
                        header.ny
                    )));
                }
                snapshots.push(s);
            }
            "plan" => planner_log.push(parse_json(body, ln, kind)?),
            "end" => {
                let n: usize = body.trim().parse().map_err(|_| TraceError::Parse {
                    line: ln,
                    msg: format!("bad record count `{body}`"),
                })?;
                let got = steps.len() + snapshots.len() + planner_log.len();
                if n != got {
                    return Err(TraceError::Parse {
                        line: ln,
                        msg: format!("end says {n} records, found {got}"),
                    });
                }
                return Ok(EpisodeTrace {
                    config_hash: header.config_hash,
                    seed: header.seed,
                    planner: header.planner,
                    nx: header.nx,
                    ny: header.ny,
                    steps,
                    snapshots,
                    planner_log,
                    replans: header.replans,
                    eval_ms: Vec::new(),
                });
            }
            other => {
                // a cut inside the record keyword itself
                if ["step", "snap", "plan", "end"]
                    .iter()
                    .any(|k| k.starts_with(other))
                    && body.is_empty()
                {
                    return Err(TraceError::Truncated {
                        record: format!("record at line {ln}"),
                    });
                }
                return Err(TraceError::Parse {
                    line: ln,
                    msg: format!("unknown record `{other}`"),
                });
            }
        }
        last_kind = kind;
    }
    Err(TraceError::Truncated {
        record: format!("trace after {last_kind} record (line {last_line}), missing end"),
    })
}

pub fn write(path: &Path, trace: &EpisodeTrace) -> Result<()> {
    std::fs::write(path, to_string(trace)).map_err(|e| Error::io(path, e))
}

pub fn replay(path: &Path) -> Result<EpisodeTrace> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(from_str(&text)?)
}
