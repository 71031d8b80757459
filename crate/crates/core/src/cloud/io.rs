//! Point-cloud file formats.
//!
//! `XyzText`: one point per line, whitespace separated `x y z [r g b | i]`,
//! with an optional `#fields ...` header naming the columns. Recognised field
//! names are `x y z r g b i ground`.
//!
//! `BinaryRecord`: little-endian. A 16-byte header
//!
//! ```text
//! 0..4   magic  b"CFPC"
//! 4      format version (1)
//! 5      layout bits: 1 = color, 2 = intensity, 4 = ground flag
//! 6      source kind: 0 = DAP, 1 = LIDAR
//! 7      reserved (0)
//! 8..16  point count, u64
//! ```
//!
//! followed by fixed-width records: `x y z` as f64, one presence byte (bit 0
//! color present, bit 1 intensity present, bit 2 ground flag present, bit 3
//! ground value), then `r g b` as u8 if the layout has color, then intensity
//! as f32 if the layout has intensity.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use super::{CloudError, Point3D, PointCloud, SourceKind};

const MAGIC: &[u8; 4] = b"CFPC";
const VERSION: u8 = 1;
const LAYOUT_COLOR: u8 = 1;
const LAYOUT_INTENSITY: u8 = 2;
const LAYOUT_GROUND: u8 = 4;

const HAS_COLOR: u8 = 1;
const HAS_INTENSITY: u8 = 2;
const HAS_GROUND: u8 = 4;
const GROUND_VALUE: u8 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    XyzText,
    BinaryRecord,
}

impl CloudFormat {
    /// `.bin`/`.cfpc` are binary, anything else is text.
    pub fn from_path(path: &Path) -> CloudFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("cfpc") => CloudFormat::BinaryRecord,
            _ => CloudFormat::XyzText,
        }
    }
}

impl FromStr for CloudFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "xyz" | "xyz_text" | "text" => Ok(CloudFormat::XyzText),
            "bin" | "binary" | "binary_record" => Ok(CloudFormat::BinaryRecord),
            other => Err(format!("unknown cloud format '{other}'")),
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CloudError {
    CloudError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, location: String, message: impl Into<String>) -> CloudError {
    CloudError::Parse {
        path: path.display().to_string(),
        location,
        message: message.into(),
    }
}

/// Reads a cloud. `source` is used for text files (binary files carry their own).
pub fn load_cloud(
    path: &Path,
    format: CloudFormat,
    source: SourceKind,
) -> Result<PointCloud, CloudError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let cloud = match format {
        CloudFormat::XyzText => read_text(path, BufReader::new(file), source)?,
        CloudFormat::BinaryRecord => read_binary(path, BufReader::new(file))?,
    };
    if cloud.is_empty() {
        return Err(CloudError::EmptyCloud(path.display().to_string()));
    }
    Ok(cloud)
}

pub fn save_cloud(path: &Path, cloud: &PointCloud, format: CloudFormat) -> Result<(), CloudError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    match format {
        CloudFormat::XyzText => write_text(&mut w, cloud),
        CloudFormat::BinaryRecord => write_binary(&mut w, cloud),
    }
    .and_then(|_| w.flush())
    .map_err(|e| io_err(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Field {
    X,
    Y,
    Z,
    R,
    G,
    B,
    I,
    Ground,
}

fn parse_header(path: &Path, line_no: usize, rest: &str) -> Result<Vec<Field>, CloudError> {
    let fields = rest
        .split_whitespace()
        .map(|name| match name.to_ascii_lowercase().as_str() {
            "x" => Ok(Field::X),
            "y" => Ok(Field::Y),
            "z" => Ok(Field::Z),
            "r" => Ok(Field::R),
            "g" => Ok(Field::G),
            "b" => Ok(Field::B),
            "i" | "intensity" => Ok(Field::I),
            "ground" => Ok(Field::Ground),
            other => Err(parse_err(
                path,
                format!("line {line_no}"),
                format!("unknown field '{other}' in header"),
            )),
        })
        .collect::<Result<Vec<_>, _>>()?;
    if fields.len() < 3 || fields[..3] != [Field::X, Field::Y, Field::Z] {
        return Err(parse_err(
            path,
            format!("line {line_no}"),
            "header must start with 'x y z'",
        ));
    }
    Ok(fields)
}

fn default_layout(ncols: usize) -> Option<Vec<Field>> {
    match ncols {
        3 => Some(vec![Field::X, Field::Y, Field::Z]),
        4 => Some(vec![Field::X, Field::Y, Field::Z, Field::I]),
        6 => Some(vec![
            Field::X,
            Field::Y,
            Field::Z,
            Field::R,
            Field::G,
            Field::B,
        ]),
        _ => None,
    }
}

fn read_text<R: BufRead>(
    path: &Path,
    reader: R,
    source: SourceKind,
) -> Result<PointCloud, CloudError> {
    let mut header: Option<Vec<Field>> = None;
    let mut points = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| io_err(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("#fields") {
            header = Some(parse_header(path, line_no, rest)?);
            continue;
        }
        if trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        let layout = match &header {
            Some(h) => h.clone(),
            None => default_layout(tokens.len()).ok_or_else(|| {
                parse_err(
                    path,
                    format!("line {line_no}"),
                    format!("expected 3, 4 or 6 columns, found {}", tokens.len()),
                )
            })?,
        };
        if tokens.len() != layout.len() {
            return Err(parse_err(
                path,
                format!("line {line_no}"),
                format!("expected {} columns, found {}", layout.len(), tokens.len()),
            ));
        }
        let mut p = Point3D::default();
        let mut rgb = [None::<u8>; 3];
        for (field, tok) in layout.iter().zip(&tokens) {
            let bad = |what: &str| {
                parse_err(
                    path,
                    format!("line {line_no}"),
                    format!("invalid {what} value '{tok}'"),
                )
            };
            match field {
                Field::X | Field::Y | Field::Z => {
                    let v: f64 = tok.parse().map_err(|_| bad("coordinate"))?;
                    if !v.is_finite() {
                        return Err(bad("coordinate"));
                    }
                    match field {
                        Field::X => p.x = v,
                        Field::Y => p.y = v,
                        _ => p.z = v,
                    }
                }
                Field::R | Field::G | Field::B => {
                    let v: u8 = tok.parse().map_err(|_| bad("color"))?;
                    let ch = match field {
                        Field::R => 0,
                        Field::G => 1,
                        _ => 2,
                    };
                    rgb[ch] = Some(v);
                }
                Field::I => {
                    let v: f32 = tok.parse().map_err(|_| bad("intensity"))?;
                    if !v.is_finite() || v < 0.0 {
                        return Err(bad("intensity"));
                    }
                    p.intensity = Some(v);
                }
                Field::Ground => {
                    p.ground = Some(match *tok {
                        "1" | "true" => true,
                        "0" | "false" => false,
                        _ => return Err(bad("ground flag")),
                    });
                }
            }
        }
        if let [Some(r), Some(g), Some(b)] = rgb {
            p.color = Some([r, g, b]);
        }
        points.push(p);
    }
    Ok(PointCloud::new(points, source))
}

fn write_text<W: Write>(w: &mut W, cloud: &PointCloud) -> std::io::Result<()> {
    let pts = cloud.points();
    let has_color = pts.iter().any(|p| p.color.is_some());
    let has_intensity = pts.iter().any(|p| p.intensity.is_some());
    let has_ground = pts.iter().any(|p| p.ground.is_some());
    let mut header = String::from("#fields x y z");
    if has_color {
        header.push_str(" r g b");
    }
    if has_intensity {
        header.push_str(" i");
    }
    if has_ground {
        header.push_str(" ground");
    }
    writeln!(w, "{header}")?;
    for p in pts {
        write!(w, "{} {} {}", p.x, p.y, p.z)?;
        if has_color {
            let [r, g, b] = p.color.unwrap_or([0, 0, 0]);
            write!(w, " {r} {g} {b}")?;
        }
        if has_intensity {
            write!(w, " {}", p.intensity.unwrap_or(0.0))?;
        }
        if has_ground {
            write!(w, " {}", u8::from(p.ground.unwrap_or(false)))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn write_binary<W: Write>(w: &mut W, cloud: &PointCloud) -> std::io::Result<()> {
    let pts = cloud.points();
    let mut layout = 0u8;
    if pts.iter().any(|p| p.color.is_some()) {
        layout |= LAYOUT_COLOR;
    }
    if pts.iter().any(|p| p.intensity.is_some()) {
        layout |= LAYOUT_INTENSITY;
    }
    if pts.iter().any(|p| p.ground.is_some()) {
        layout |= LAYOUT_GROUND;
    }
    let source = match cloud.source() {
        SourceKind::Dap => 0u8,
        SourceKind::Lidar => 1u8,
    };
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION, layout, source, 0])?;
    w.write_all(&(pts.len() as u64).to_le_bytes())?;
    for p in pts {
        w.write_all(&p.x.to_le_bytes())?;
        w.write_all(&p.y.to_le_bytes())?;
        w.write_all(&p.z.to_le_bytes())?;
        let mut presence = 0u8;
        if p.color.is_some() {
            presence |= HAS_COLOR;
        }
        if p.intensity.is_some() {
            presence |= HAS_INTENSITY;
        }
        if let Some(g) = p.ground {
            presence |= HAS_GROUND;
            if g {
                presence |= GROUND_VALUE;
            }
        }
        w.write_all(&[presence])?;
        if layout & LAYOUT_COLOR != 0 {
            w.write_all(&p.color.unwrap_or([0, 0, 0]))?;
        }
        if layout & LAYOUT_INTENSITY != 0 {
            w.write_all(&p.intensity.unwrap_or(0.0).to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_binary<R: Read>(path: &Path, mut r: R) -> Result<PointCloud, CloudError> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => CloudError::EmptyCloud(path.display().to_string()),
        _ => io_err(path, e),
    })?;
    if &header[0..4] != MAGIC {
        return Err(parse_err(path, "offset 0".into(), "bad magic"));
    }
    if header[4] != VERSION {
        return Err(parse_err(
            path,
            "offset 4".into(),
            format!("unsupported version {}", header[4]),
        ));
    }
    let layout = header[5];
    if layout & !(LAYOUT_COLOR | LAYOUT_INTENSITY | LAYOUT_GROUND) != 0 {
        return Err(parse_err(path, "offset 5".into(), "unknown layout bits"));
    }
    let source = match header[6] {
        0 => SourceKind::Dap,
        1 => SourceKind::Lidar,
        other => {
            return Err(parse_err(
                path,
                "offset 6".into(),
                format!("unknown source kind {other}"),
            ))
        }
    };
    let count = u64::from_le_bytes(header[8..16].try_into().expect("8-byte slice"));
    let record_len = 25
        + if layout & LAYOUT_COLOR != 0 { 3 } else { 0 }
        + if layout & LAYOUT_INTENSITY != 0 { 4 } else { 0 };
    let mut buf = vec![0u8; record_len];
    let mut points = Vec::with_capacity(count.min(1 << 26) as usize);
    for i in 0..count {
        let offset = 16 + i * record_len as u64;
        r.read_exact(&mut buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => {
                parse_err(path, format!("offset {offset}"), "truncated record")
            }
            _ => io_err(path, e),
        })?;
        let f = |k: usize| f64::from_le_bytes(buf[k..k + 8].try_into().expect("8-byte slice"));
        let mut p = Point3D::new(f(0), f(8), f(16));
        if !p.is_finite() {
            return Err(parse_err(
                path,
                format!("offset {offset}"),
                "non-finite coordinate",
            ));
        }
        let presence = buf[24];
        let mut k = 25;
        if layout & LAYOUT_COLOR != 0 {
            if presence & HAS_COLOR != 0 {
                p.color = Some([buf[k], buf[k + 1], buf[k + 2]]);
            }
            k += 3;
        }
        if layout & LAYOUT_INTENSITY != 0 && presence & HAS_INTENSITY != 0 {
            p.intensity = Some(f32::from_le_bytes(
                buf[k..k + 4].try_into().expect("4-byte slice"),
            ));
        }
        if presence & HAS_GROUND != 0 {
            p.ground = Some(presence & GROUND_VALUE != 0);
        }
        points.push(p);
    }
    Ok(PointCloud::new(points, source))
}
