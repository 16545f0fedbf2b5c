//! Diffraction edge lists.
//!
//! One edge per line: start, end, first face normal and second face normal
//! as twelve numbers, then the integer label. Blank lines and lines starting
//! with `#` are skipped.

use std::io::Write;
use std::path::Path;

use glam::DVec3;

use crate::error::{Error, Result};
use crate::scene::DiffractionEdge;

const PERPENDICULAR_TOL: f64 = 1e-3;
const UNIT_TOL: f64 = 1e-6;

fn check(index: usize, e: &DiffractionEdge) -> Result<()> {
    let bad = |reason: &str| Err(Error::InvalidEdge { index, reason: reason.to_string() });
    if e.length() <= 0.0 {
        return bad("start equals end");
    }
    for n in [e.normal_a, e.normal_b] {
        if (n.length() - 1.0).abs() > UNIT_TOL {
            return bad("face normal is not unit length");
        }
        if e.direction().dot(n).abs() > PERPENDICULAR_TOL {
            return bad("face normal is not perpendicular to the edge");
        }
    }
    Ok(())
}

pub fn parse_edges(text: &str) -> Result<Vec<DiffractionEdge>> {
    let mut edges = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let index = edges.len();
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|w| w.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse { line: line_no + 1, message: e.to_string() })?;
        if values.len() != 13 || !values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidEdge { index, reason: "expected 13 finite numbers".into() });
        }
        let label = values[12];
        if label < 0.0 || label.fract() != 0.0 || label > u32::MAX as f64 {
            return Err(Error::InvalidEdge { index, reason: "label must be an unsigned integer".into() });
        }
        let v = |i: usize| DVec3::new(values[i], values[i + 1], values[i + 2]);
        let edge = DiffractionEdge { start: v(0), end: v(3), normal_a: v(6), normal_b: v(9), label: label as u32 };
        check(index, &edge)?;
        edges.push(edge);
    }
    Ok(edges)
}

pub fn load_edges(path: &Path) -> Result<Vec<DiffractionEdge>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edges(&text)
}

pub fn write_edges(path: &Path, edges: &[DiffractionEdge]) -> Result<()> {
    let mut out = String::from("# start end normal_a normal_b label\n");
    for e in edges {
        let mut fields: Vec<String> =
            [e.start, e.end, e.normal_a, e.normal_b].iter().flat_map(|v| v.to_array()).map(|x| x.to_string()).collect();
        fields.push(e.label.to_string());
        out.push_str(&fields.join(" "));
        out.push('\n');
    }
    std::fs::File::create(path).and_then(|mut f| f.write_all(out.as_bytes())).map_err(|e| Error::io(path, e))
}
