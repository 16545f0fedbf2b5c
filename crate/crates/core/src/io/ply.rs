//! Polygon file format (PLY) point clouds.
//!
//! The vertex element must provide `x y z nx ny nz` and `label`. Other vertex
//! properties and elements after the vertices are ignored. ASCII and binary
//! little-endian bodies are supported.

use std::io::Write;
use std::path::Path;

use glam::DVec3;

use crate::error::{Error, Result};
use crate::scene::LabeledPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<(String, Scalar)>,
    has_list: bool,
}

#[derive(Debug)]
struct Header {
    format: PlyFormat,
    elements: Vec<Element>,
    /// Byte offset of the body.
    body: usize,
    /// Line number of the first body line (ASCII).
    body_line: usize,
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut offset = 0;
    let mut line_no = 0;
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        line_no += 1;
        let rest = &bytes[offset..];
        let Some(end) = rest.iter().position(|&b| b == b'\n') else {
            return Err(parse_error(line_no, "unterminated header"));
        };
        let line = std::str::from_utf8(&rest[..end])
            .map_err(|_| parse_error(line_no, "header is not text"))?
            .trim_end_matches('\r')
            .trim();
        offset += end + 1;
        let mut words = line.split_whitespace();
        let keyword = words.next().unwrap_or("");
        match keyword {
            "ply" if line_no == 1 => {}
            _ if line_no == 1 => return Err(parse_error(1, "missing 'ply' magic")),
            "format" => {
                format = Some(match (words.next(), words.next()) {
                    (Some("ascii"), Some("1.0")) => PlyFormat::Ascii,
                    (Some("binary_little_endian"), Some("1.0")) => PlyFormat::BinaryLittleEndian,
                    (Some(f), _) => return Err(parse_error(line_no, format!("unsupported format '{f}'"))),
                    _ => return Err(parse_error(line_no, "malformed format line")),
                });
            }
            "comment" | "obj_info" | "" => {}
            "element" => {
                let (Some(name), Some(count), None) = (words.next(), words.next(), words.next()) else {
                    return Err(parse_error(line_no, "malformed element line"));
                };
                let count = count.parse().map_err(|_| parse_error(line_no, "bad element count"))?;
                elements.push(Element { name: name.to_string(), count, properties: vec![], has_list: false });
            }
            "property" => {
                let Some(element) = elements.last_mut() else {
                    return Err(parse_error(line_no, "property before any element"));
                };
                let ty = words.next().ok_or_else(|| parse_error(line_no, "malformed property line"))?;
                if ty == "list" {
                    element.has_list = true;
                    continue;
                }
                let scalar = Scalar::parse(ty).ok_or_else(|| parse_error(line_no, format!("unknown type '{ty}'")))?;
                let name = words.next().ok_or_else(|| parse_error(line_no, "property without name"))?;
                element.properties.push((name.to_string(), scalar));
            }
            "end_header" => break,
            other => return Err(parse_error(line_no, format!("unexpected header keyword '{other}'"))),
        }
    }
    let format = format.ok_or_else(|| parse_error(line_no, "missing format line"))?;
    Ok(Header { format, elements, body: offset, body_line: line_no + 1 })
}

const REQUIRED: [&str; 7] = ["x", "y", "z", "nx", "ny", "nz", "label"];

/// Parse a PLY document held in memory.
pub fn parse_point_cloud(bytes: &[u8]) -> Result<Vec<LabeledPoint>> {
    let header = parse_header(bytes)?;
    let Some(vertex_index) = header.elements.iter().position(|e| e.name == "vertex") else {
        return Err(Error::MissingField("vertex".into()));
    };
    let vertex = &header.elements[vertex_index];
    let mut columns = [0usize; 7];
    for (slot, name) in columns.iter_mut().zip(REQUIRED) {
        *slot = vertex
            .properties
            .iter()
            .position(|(p, _)| p == name)
            .ok_or_else(|| Error::MissingField(name.to_string()))?;
    }
    if vertex.has_list {
        return Err(parse_error(header.body_line, "list properties on vertices are not supported"));
    }
    let preceding = &header.elements[..vertex_index];
    match header.format {
        PlyFormat::Ascii => parse_ascii(bytes, &header, preceding, vertex, &columns),
        PlyFormat::BinaryLittleEndian => parse_binary(bytes, &header, preceding, vertex, &columns),
    }
}

fn make_point(v: &[f64; 7], line: usize) -> Result<LabeledPoint> {
    let label = v[6];
    if !(label >= 0.0 && label <= u32::MAX as f64 && label.fract() == 0.0) {
        return Err(parse_error(line, format!("label {label} is not an unsigned integer")));
    }
    Ok(LabeledPoint {
        position: DVec3::new(v[0], v[1], v[2]),
        normal: DVec3::new(v[3], v[4], v[5]),
        label: label as u32,
    })
}

fn parse_ascii(
    bytes: &[u8],
    header: &Header,
    preceding: &[Element],
    vertex: &Element,
    columns: &[usize; 7],
) -> Result<Vec<LabeledPoint>> {
    let text =
        std::str::from_utf8(&bytes[header.body..]).map_err(|_| parse_error(header.body_line, "body is not text"))?;
    let skip: usize = preceding.iter().map(|e| e.count).sum();
    let mut lines = text.lines().enumerate().map(|(i, l)| (header.body_line + i, l)).skip(skip);
    let mut points = Vec::with_capacity(vertex.count);
    let mut values = vec![0.0; vertex.properties.len()];
    for _ in 0..vertex.count {
        let (line_no, line) =
            lines.next().ok_or_else(|| parse_error(header.body_line, "fewer vertices than declared"))?;
        let mut n = 0;
        for word in line.split_whitespace() {
            if n == values.len() {
                return Err(parse_error(line_no, "too many values"));
            }
            values[n] = word.parse().map_err(|_| parse_error(line_no, format!("bad number '{word}'")))?;
            n += 1;
        }
        if n != values.len() {
            return Err(parse_error(line_no, "too few values"));
        }
        points.push(make_point(&columns.map(|c| values[c]), line_no)?);
    }
    Ok(points)
}

fn parse_binary(
    bytes: &[u8],
    header: &Header,
    preceding: &[Element],
    vertex: &Element,
    columns: &[usize; 7],
) -> Result<Vec<LabeledPoint>> {
    let mut offset = header.body;
    for e in preceding {
        if e.has_list {
            return Err(parse_error(header.body_line, format!("cannot skip list element '{}'", e.name)));
        }
        offset += e.count * e.properties.iter().map(|(_, s)| s.size()).sum::<usize>();
    }
    let mut field_offsets = Vec::with_capacity(vertex.properties.len());
    let mut stride = 0;
    for (_, s) in &vertex.properties {
        field_offsets.push(stride);
        stride += s.size();
    }
    let needed = offset + stride * vertex.count;
    if bytes.len() < needed {
        return Err(parse_error(header.body_line, "file shorter than declared vertex count"));
    }
    let body = &bytes[offset..needed];
    let mut points = Vec::with_capacity(vertex.count);
    for (i, record) in body.chunks_exact(stride).enumerate() {
        let v = columns.map(|c| vertex.properties[c].1.read_le(&record[field_offsets[c]..]));
        points.push(make_point(&v, header.body_line + i)?);
    }
    Ok(points)
}

pub fn load_point_cloud(path: &Path) -> Result<Vec<LabeledPoint>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_point_cloud(&bytes)
}

/// Write points with 32-bit float coordinates and normals.
pub fn write_point_cloud(path: &Path, points: &[LabeledPoint], format: PlyFormat) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let format_name = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    write!(
        w,
        "ply\nformat {format_name} 1.0\nelement vertex {}\n\
         property float x\nproperty float y\nproperty float z\n\
         property float nx\nproperty float ny\nproperty float nz\n\
         property uint label\nend_header\n",
        points.len()
    )
    .map_err(io)?;
    for p in points {
        let f = [p.position.x, p.position.y, p.position.z, p.normal.x, p.normal.y, p.normal.z].map(|v| v as f32);
        match format {
            PlyFormat::Ascii => {
                writeln!(w, "{} {} {} {} {} {} {}", f[0], f[1], f[2], f[3], f[4], f[5], p.label).map_err(io)?
            }
            PlyFormat::BinaryLittleEndian => {
                for v in f {
                    w.write_all(&v.to_le_bytes()).map_err(io)?;
                }
                w.write_all(&p.label.to_le_bytes()).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "ply\nformat ascii 1.0\ncomment three points\nelement vertex 3\n\
        property float x\nproperty float y\nproperty float z\n\
        property float nx\nproperty float ny\nproperty float nz\n\
        property uchar red\nproperty uint label\nend_header\n\
        0 0 0 0 0 1 255 1\n1 0 0 0 0 1 0 1\n0 1 0 0 0 1 0 2\n";

    #[test]
    fn ascii_three_points() {
        let pts = parse_point_cloud(TEXT.as_bytes()).unwrap();
        assert_eq!(pts.len(), 3);
        assert_eq!(pts[2].label, 2);
        assert_eq!(pts[1].position, DVec3::X);
    }

    #[test]
    fn missing_normal_component() {
        let text = TEXT.replace("property float nx\n", "");
        let err = parse_point_cloud(text.as_bytes()).unwrap_err();
        assert_eq!(err.to_string(), "missing field: nx");
    }

    #[test]
    fn malformed_header_reports_line() {
        let text = TEXT.replace("element vertex 3", "element vertex three");
        match parse_point_cloud(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cloud.ply");
        let pts: Vec<LabeledPoint> = (0..10)
            .map(|i| LabeledPoint { position: DVec3::splat(i as f64 * 0.5), normal: DVec3::Y, label: i })
            .collect();
        write_point_cloud(&path, &pts, PlyFormat::BinaryLittleEndian).unwrap();
        assert_eq!(load_point_cloud(&path).unwrap(), pts);
        write_point_cloud(&path, &pts, PlyFormat::Ascii).unwrap();
        assert_eq!(load_point_cloud(&path).unwrap(), pts);
    }
}
