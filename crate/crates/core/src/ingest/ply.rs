//! Minimal PLY reader and writer for colored vertex clouds.
//!
//! Reads `ascii 1.0` and `binary_little_endian 1.0`. The `vertex` element must
//! carry `x`, `y`, `z`, `red`, `green` and `blue`; other properties and other
//! elements (faces, for instance) are parsed and skipped. Integer colors are
//! divided by 255, float colors are taken as already normalized.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::cloud::{CloudError, PointCloud};
use crate::image::quantize;

#[derive(Debug, Error)]
pub enum PlyError {
    #[error("malformed PLY header: {0}")]
    MalformedHeader(String),
    #[error("unsupported PLY format {0:?}")]
    UnsupportedFormat(String),
    #[error("vertex element is missing required property {0:?}")]
    MissingProperty(&'static str),
    #[error("PLY payload truncated: {0}")]
    Truncated(String),
    #[error("invalid value on data line {line}: {reason}")]
    InvalidValue { line: usize, reason: String },
    #[error("PLY describes an invalid cloud: {0}")]
    Cloud(#[from] CloudError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PlyEncoding {
    Ascii,
    #[default]
    BinaryLittleEndian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
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
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn is_float(self) -> bool {
        matches!(self, Self::F32 | Self::F64)
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => f64::from(b[0] as i8),
            Self::U8 => f64::from(b[0]),
            Self::I16 => f64::from(i16::from_le_bytes([b[0], b[1]])),
            Self::U16 => f64::from(u16::from_le_bytes([b[0], b[1]])),
            Self::I32 => f64::from(i32::from_le_bytes(b[..4].try_into().unwrap())),
            Self::U32 => f64::from(u32::from_le_bytes(b[..4].try_into().unwrap())),
            Self::F32 => f64::from(f32::from_le_bytes(b[..4].try_into().unwrap())),
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Clone, Debug)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { count: Scalar, item: Scalar },
}

#[derive(Clone, Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

struct Header {
    encoding: PlyEncoding,
    elements: Vec<Element>,
    body_offset: usize,
}

const REQUIRED: [&str; 6] = ["x", "y", "z", "red", "green", "blue"];

fn parse_header(bytes: &[u8]) -> Result<Header, PlyError> {
    let malformed = |m: &str| PlyError::MalformedHeader(m.to_string());
    let mut offset = 0;
    let mut lines = Vec::new();
    loop {
        let rest = &bytes[offset..];
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| malformed("missing end_header"))?;
        let line = std::str::from_utf8(&rest[..nl])
            .map_err(|_| malformed("header is not valid text"))?
            .trim_end_matches('\r')
            .trim()
            .to_string();
        offset += nl + 1;
        let done = line == "end_header";
        lines.push(line);
        if done {
            break;
        }
    }

    let mut it = lines.into_iter();
    if it.next().as_deref() != Some("ply") {
        return Err(malformed("first line must be \"ply\""));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    for line in it {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] | ["end_header"] => {}
            ["format", fmt, _version] => {
                encoding = Some(match *fmt {
                    "ascii" => PlyEncoding::Ascii,
                    "binary_little_endian" => PlyEncoding::BinaryLittleEndian,
                    other => return Err(PlyError::UnsupportedFormat(other.to_string())),
                });
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| malformed(&format!("bad element count {count:?}")))?,
                properties: Vec::new(),
            }),
            ["property", "list", count, item, _name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| malformed("property before any element"))?;
                let count = Scalar::parse(count).ok_or_else(|| malformed(&format!("unknown type {count:?}")))?;
                let item = Scalar::parse(item).ok_or_else(|| malformed(&format!("unknown type {item:?}")))?;
                el.properties.push(Property::List { count, item });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| malformed("property before any element"))?;
                let ty = Scalar::parse(ty).ok_or_else(|| malformed(&format!("unknown type {ty:?}")))?;
                el.properties.push(Property::Scalar {
                    name: name.to_string(),
                    ty,
                });
            }
            _ => return Err(malformed(&format!("unrecognized line {line:?}"))),
        }
    }
    let encoding = encoding.ok_or_else(|| malformed("missing format line"))?;
    Ok(Header {
        encoding,
        elements,
        body_offset: offset,
    })
}

/// Column index of each required property within the vertex element, plus color scaling.
fn vertex_layout(el: &Element) -> Result<([usize; 6], [bool; 3]), PlyError> {
    let mut idx = [usize::MAX; 6];
    let mut float_color = [false; 3];
    for (i, p) in el.properties.iter().enumerate() {
        if let Property::Scalar { name, ty } = p {
            if let Some(k) = REQUIRED.iter().position(|r| r == name) {
                idx[k] = i;
                if k >= 3 {
                    float_color[k - 3] = ty.is_float();
                }
            }
        }
    }
    for (k, &i) in idx.iter().enumerate() {
        if i == usize::MAX {
            return Err(PlyError::MissingProperty(REQUIRED[k]));
        }
    }
    Ok((idx, float_color))
}

fn color_value(v: f64, is_float: bool) -> f32 {
    if is_float {
        v.clamp(0.0, 1.0) as f32
    } else {
        (v / 255.0).clamp(0.0, 1.0) as f32
    }
}

pub fn parse_ply(bytes: &[u8]) -> Result<PointCloud, PlyError> {
    let header = parse_header(bytes)?;
    let vertex_pos = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| PlyError::MalformedHeader("no vertex element".into()))?;
    let (layout, float_color) = vertex_layout(&header.elements[vertex_pos])?;
    let body = &bytes[header.body_offset..];
    let (rows, _) = match header.encoding {
        PlyEncoding::Ascii => read_ascii(body, &header.elements, vertex_pos)?,
        PlyEncoding::BinaryLittleEndian => read_binary(body, &header.elements, vertex_pos)?,
    };
    let mut positions = Vec::with_capacity(rows.len());
    let mut colors = Vec::with_capacity(rows.len());
    for row in rows {
        positions.push([row[layout[0]], row[layout[1]], row[layout[2]]]);
        colors.push([
            color_value(row[layout[3]], float_color[0]),
            color_value(row[layout[4]], float_color[1]),
            color_value(row[layout[5]], float_color[2]),
        ]);
    }
    Ok(PointCloud::new(positions, colors)?)
}

type Rows = Vec<Vec<f64>>;

fn read_ascii(body: &[u8], elements: &[Element], vertex_pos: usize) -> Result<(Rows, usize), PlyError> {
    let text = std::str::from_utf8(body).map_err(|_| PlyError::InvalidValue {
        line: 0,
        reason: "ascii body is not valid UTF-8".into(),
    })?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let mut rows = Vec::new();
    for (ei, el) in elements.iter().enumerate() {
        for k in 0..el.count {
            let (line_no, line) = lines.next().ok_or_else(|| {
                PlyError::Truncated(format!("element {:?} has {} of {} rows", el.name, k, el.count))
            })?;
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| PlyError::InvalidValue {
                    line: line_no + 1,
                    reason: e.to_string(),
                })?;
            if ei != vertex_pos {
                continue;
            }
            if values.len() < el.properties.len() {
                return Err(PlyError::Truncated(format!(
                    "vertex row {k} has {} of {} values",
                    values.len(),
                    el.properties.len()
                )));
            }
            rows.push(values);
        }
    }
    Ok((rows, 0))
}

fn read_binary(body: &[u8], elements: &[Element], vertex_pos: usize) -> Result<(Rows, usize), PlyError> {
    let mut at = 0usize;
    let mut take = |n: usize, what: &str| -> Result<&[u8], PlyError> {
        if at + n > body.len() {
            return Err(PlyError::Truncated(format!(
                "needed {n} more bytes for {what} at offset {at}, {} available",
                body.len() - at.min(body.len())
            )));
        }
        let s = &body[at..at + n];
        at += n;
        Ok(s)
    };
    let mut rows = Vec::new();
    for (ei, el) in elements.iter().enumerate() {
        for _ in 0..el.count {
            let mut row = Vec::with_capacity(el.properties.len());
            for p in &el.properties {
                match p {
                    Property::Scalar { ty, .. } => row.push(ty.read_le(take(ty.size(), &el.name)?)),
                    Property::List { count, item } => {
                        let n = count.read_le(take(count.size(), &el.name)?);
                        if n < 0.0 {
                            return Err(PlyError::InvalidValue {
                                line: 0,
                                reason: format!("negative list length in {:?}", el.name),
                            });
                        }
                        take(n as usize * item.size(), &el.name)?;
                        row.push(f64::NAN);
                    }
                }
            }
            if ei == vertex_pos {
                rows.push(row);
            }
        }
    }
    Ok((rows, at))
}

pub fn load_ply(path: &Path) -> Result<PointCloud, PlyError> {
    parse_ply(&fs::read(path)?)
}

/// Serializes with `double` positions and `uchar` colors.
pub fn encode_ply(cloud: &PointCloud, encoding: PlyEncoding) -> Vec<u8> {
    let format = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
    };
    let mut out = format!(
        "ply\nformat {format} 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
        cloud.len()
    )
    .into_bytes();
    for (p, c) in cloud.positions().iter().zip(cloud.colors()) {
        let [r, g, b] = c.map(quantize);
        match encoding {
            PlyEncoding::Ascii => {
                out.extend_from_slice(format!("{:?} {:?} {:?} {r} {g} {b}\n", p[0], p[1], p[2]).as_bytes())
            }
            PlyEncoding::BinaryLittleEndian => {
                for v in p {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                out.extend_from_slice(&[r, g, b]);
            }
        }
    }
    out
}

pub fn save_ply(cloud: &PointCloud, path: &Path, encoding: PlyEncoding) -> Result<(), PlyError> {
    fs::write(path, encode_ply(cloud, encoding))?;
    Ok(())
}
