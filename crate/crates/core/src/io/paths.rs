//! Path records as JSON lines.
//!
//! The first line is a [`PathHeader`]; each following line is one
//! [`PathRecord`]. Floating-point values are rounded to nine significant
//! digits so that outputs compare byte for byte.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::refine::{output_cmp, ExactPath};
use crate::tracer::InteractionKind;

pub const FORMAT_NAME: &str = "pointray-paths";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathHeader {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub path_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub kind: String,
    pub position: [f64; 3],
    pub label: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub tx_id: u32,
    pub rx_id: u32,
    pub delay_s: f64,
    pub length_m: f64,
    pub interactions: Vec<InteractionRecord>,
    pub converged: bool,
    pub gradient_norm: f64,
}

/// Round to nine significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

fn kind_name(kind: InteractionKind) -> &'static str {
    match kind {
        InteractionKind::Reflection => "reflection",
        InteractionKind::Diffraction => "diffraction",
    }
}

impl From<&ExactPath> for PathRecord {
    fn from(p: &ExactPath) -> Self {
        PathRecord {
            tx_id: p.tx_id,
            rx_id: p.rx_id,
            delay_s: round_sig(p.delay),
            length_m: round_sig(p.total_length),
            interactions: p
                .interactions
                .iter()
                .map(|n| InteractionRecord {
                    kind: kind_name(n.kind).to_string(),
                    position: n.position.to_array().map(round_sig),
                    label: n.label,
                })
                .collect(),
            converged: p.converged,
            gradient_norm: round_sig(p.gradient_norm),
        }
    }
}

/// Write `paths` sorted by transmitter, receiver and delay.
pub fn write_paths(path: &Path, paths: &[ExactPath], config_hash: &str) -> Result<()> {
    let mut sorted: Vec<&ExactPath> = paths.iter().collect();
    sorted.sort_by(|a, b| output_cmp(a, b));
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let header = PathHeader {
        format: FORMAT_NAME.to_string(),
        version: FORMAT_VERSION,
        config_hash: config_hash.to_string(),
        path_count: sorted.len(),
    };
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", serde_json::to_string(&header).expect("header serializes")).map_err(io)?;
    for p in sorted {
        writeln!(w, "{}", serde_json::to_string(&PathRecord::from(p)).expect("record serializes")).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_paths(path: &Path) -> Result<(PathHeader, Vec<PathRecord>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = std::io::BufReader::new(file).lines();
    let parse_err = |line: usize, e: serde_json::Error| Error::Parse { line, message: e.to_string() };
    let first = lines
        .next()
        .ok_or(Error::Parse { line: 1, message: "missing header".into() })?
        .map_err(|e| Error::io(path, e))?;
    let header: PathHeader = serde_json::from_str(&first).map_err(|e| parse_err(1, e))?;
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| parse_err(i + 2, e))?);
    }
    Ok((header, records))
}
