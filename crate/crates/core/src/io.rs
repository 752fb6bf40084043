//! Plain-text fixtures: point clouds (ASCII PLY, XYZ, CSV), worlds (JSON)
//! and trajectories (CSV).
//!
//! Coordinates are written with 17 significant digits, so a write/read
//! round trip reproduces every `f64` bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, PointCloud, Vector};
use crate::slam::{Landmark, Pose2, Segment, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    PlyAscii,
    Xyz,
    Csv,
}

impl CloudFormat {
    /// From the extension: `.ply`, `.csv`, anything else is XYZ.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("ply") => CloudFormat::PlyAscii,
            Some("csv") => CloudFormat::Csv,
            _ => CloudFormat::Xyz,
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, message: message.into() }
}

pub fn read_cloud(path: impl AsRef<Path>, format: CloudFormat) -> Result<PointCloud> {
    let path = path.as_ref();
    parse_cloud(&read_text(path)?, format, path)
}

/// Reads with the format implied by the extension.
pub fn read_cloud_auto(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    read_cloud(path, CloudFormat::from_path(path))
}

/// Parses `text`; `origin` only labels error messages.
pub fn parse_cloud(text: &str, format: CloudFormat, origin: &Path) -> Result<PointCloud> {
    match format {
        CloudFormat::PlyAscii => parse_ply(text, origin),
        CloudFormat::Xyz | CloudFormat::Csv => parse_columns(text, origin),
    }
}

fn fields(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty())
}

fn parse_row(line: &str, lineno: usize, origin: &Path) -> Result<Vec<f64>> {
    fields(line)
        .map(|f| {
            f.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_error(origin, lineno, format!("bad number {f:?}")))
        })
        .collect()
}

fn build(points: Vec<Point>, normals: Option<Vec<Vector>>, origin: &Path, line: usize) -> Result<PointCloud> {
    let cloud = PointCloud::new(points)?;
    match normals {
        Some(n) => cloud
            .with_normals(n)
            .map_err(|e| parse_error(origin, line, e.to_string())),
        None => Ok(cloud),
    }
}

fn parse_columns(text: &str, origin: &Path) -> Result<PointCloud> {
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut width = None;
    let mut last = 0;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row = parse_row(trimmed, lineno, origin)?;
        if row.len() != 3 && row.len() != 6 {
            return Err(parse_error(origin, lineno, format!("expected 3 or 6 columns, found {}", row.len())));
        }
        if *width.get_or_insert(row.len()) != row.len() {
            return Err(parse_error(origin, lineno, "column count changes mid-file"));
        }
        points.push(Point::new(row[0], row[1], row[2]));
        if row.len() == 6 {
            normals.push(Vector::new(row[3], row[4], row[5]));
        }
        last = lineno;
    }
    build(points, (width == Some(6)).then_some(normals), origin, last)
}

fn unsupported(origin: &Path, detail: impl Into<String>) -> Error {
    Error::UnsupportedProperty { path: origin.to_path_buf(), detail: detail.into() }
}

fn parse_ply(text: &str, origin: &Path) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(parse_error(origin, 1, "missing 'ply' magic")),
    }

    let mut count = None;
    let mut properties: Vec<String> = Vec::new();
    let mut header_end = 0;
    for (lineno, line) in lines.by_ref() {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            [] | ["comment", ..] | ["obj_info", ..] => {}
            ["format", "ascii", "1.0"] => {}
            ["format", other, ..] => return Err(unsupported(origin, format!("format {other}"))),
            ["element", "vertex", n] => {
                if count.is_some() {
                    return Err(parse_error(origin, lineno, "duplicate vertex element"));
                }
                count = Some(n.parse::<usize>().map_err(|_| parse_error(origin, lineno, "bad vertex count"))?);
            }
            ["element", name, ..] => return Err(unsupported(origin, format!("element {name}"))),
            ["property", "list", ..] => return Err(unsupported(origin, "list property")),
            ["property", ty, name] => {
                if count.is_none() {
                    return Err(parse_error(origin, lineno, "property before element"));
                }
                if !matches!(*ty, "float" | "double" | "float32" | "float64") {
                    return Err(unsupported(origin, format!("property type {ty}")));
                }
                if !matches!(*name, "x" | "y" | "z" | "nx" | "ny" | "nz") || properties.iter().any(|p| p == name) {
                    return Err(unsupported(origin, format!("property {name}")));
                }
                properties.push(name.to_string());
            }
            ["end_header"] => {
                header_end = lineno;
                break;
            }
            _ => return Err(parse_error(origin, lineno, format!("unexpected header line {line:?}"))),
        }
    }
    if header_end == 0 {
        return Err(parse_error(origin, text.lines().count(), "missing end_header"));
    }
    let count = count.ok_or_else(|| parse_error(origin, header_end, "no vertex element"))?;
    let column = |name: &str| properties.iter().position(|p| p == name);
    let (Some(x), Some(y), Some(z)) = (column("x"), column("y"), column("z")) else {
        return Err(parse_error(origin, header_end, "vertex needs x, y and z"));
    };
    let normal_cols = match (column("nx"), column("ny"), column("nz")) {
        (Some(a), Some(b), Some(c)) => Some([a, b, c]),
        (None, None, None) => None,
        _ => return Err(parse_error(origin, header_end, "normals need nx, ny and nz")),
    };

    let mut points = Vec::with_capacity(count);
    let mut normals = Vec::new();
    let mut last = header_end;
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        if points.len() == count {
            return Err(parse_error(origin, lineno, "data after the last vertex"));
        }
        let row = parse_row(line, lineno, origin)?;
        if row.len() != properties.len() {
            return Err(parse_error(
                origin,
                lineno,
                format!("expected {} values, found {}", properties.len(), row.len()),
            ));
        }
        points.push(Point::new(row[x], row[y], row[z]));
        if let Some([a, b, c]) = normal_cols {
            normals.push(Vector::new(row[a], row[b], row[c]));
        }
        last = lineno;
    }
    if points.len() != count {
        return Err(parse_error(origin, last, format!("expected {count} vertices, found {}", points.len())));
    }
    build(points, normal_cols.map(|_| normals), origin, last)
}

fn push_row(out: &mut String, values: &[f64], sep: &str) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push_str(sep);
        }
        write!(out, "{v:.16e}").expect("writing to a String");
    }
    out.push('\n');
}

fn rows(cloud: &PointCloud) -> impl Iterator<Item = Vec<f64>> + '_ {
    (0..cloud.len()).map(|i| {
        let p = cloud.point(i);
        let mut row = vec![p.x, p.y, p.z];
        if let Some(n) = cloud.normal(i) {
            row.extend_from_slice(&[n.x, n.y, n.z]);
        }
        row
    })
}

/// Serializes `cloud`; normals become three extra columns.
pub fn format_cloud(cloud: &PointCloud, format: CloudFormat) -> String {
    let mut out = String::new();
    match format {
        CloudFormat::PlyAscii => {
            out.push_str("ply\nformat ascii 1.0\n");
            writeln!(out, "element vertex {}", cloud.len()).expect("writing to a String");
            out.push_str("property double x\nproperty double y\nproperty double z\n");
            if cloud.normals().is_some() {
                out.push_str("property double nx\nproperty double ny\nproperty double nz\n");
            }
            out.push_str("end_header\n");
            rows(cloud).for_each(|r| push_row(&mut out, &r, " "));
        }
        CloudFormat::Xyz => rows(cloud).for_each(|r| push_row(&mut out, &r, " ")),
        CloudFormat::Csv => rows(cloud).for_each(|r| push_row(&mut out, &r, ",")),
    }
    out
}

pub fn write_cloud(cloud: &PointCloud, path: impl AsRef<Path>, format: CloudFormat) -> Result<()> {
    write_text(path.as_ref(), &format_cloud(cloud, format))
}

pub fn write_cloud_auto(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_cloud(cloud, path, CloudFormat::from_path(path))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorldFile {
    walls: Vec<[f64; 4]>,
    #[serde(default)]
    landmarks: Vec<[f64; 3]>,
}

/// `{"walls": [[x1, y1, x2, y2], …], "landmarks": [[x, y, confidence], …]}`.
pub fn parse_world(text: &str) -> Result<World> {
    let file: WorldFile = serde_json::from_str(text)?;
    World::new(
        file.walls.iter().map(|w| Segment::new(w[0], w[1], w[2], w[3])).collect(),
        file.landmarks
            .iter()
            .map(|l| Landmark { x: l[0], y: l[1], confidence: l[2] })
            .collect(),
    )
}

/// One wall or landmark per line.
pub fn format_world(world: &World) -> String {
    let row = |v: &[f64]| serde_json::to_string(v).expect("numbers serialize");
    let walls: Vec<String> = world.walls().iter().map(|w| row(&[w.a[0], w.a[1], w.b[0], w.b[1]])).collect();
    let mut out = format!("{{\n  \"walls\": [\n    {}\n  ]", walls.join(",\n    "));
    if !world.landmarks().is_empty() {
        let marks: Vec<String> = world.landmarks().iter().map(|l| row(&[l.x, l.y, l.confidence])).collect();
        out += &format!(",\n  \"landmarks\": [\n    {}\n  ]", marks.join(",\n    "));
    }
    out + "\n}\n"
}

pub fn read_world(path: impl AsRef<Path>) -> Result<World> {
    parse_world(&read_text(path.as_ref())?)
}

pub fn write_world(world: &World, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &format_world(world))
}

/// Rows `x,y,theta`; an optional non-numeric first row is taken as a header.
pub fn parse_trajectory(text: &str, origin: &Path) -> Result<Vec<Pose2>> {
    let mut poses = Vec::new();
    let mut first = true;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let header = std::mem::replace(&mut first, false)
            && fields(trimmed).next().is_some_and(|f| f.parse::<f64>().is_err());
        if header {
            continue;
        }
        let row = parse_row(trimmed, lineno, origin)?;
        if row.len() != 3 {
            return Err(parse_error(origin, lineno, format!("expected x,y,theta, found {} values", row.len())));
        }
        poses.push(Pose2::new(row[0], row[1], row[2]));
    }
    Ok(poses)
}

pub fn format_trajectory(poses: &[Pose2]) -> String {
    let mut out = String::from("x,y,theta\n");
    for p in poses {
        push_row(&mut out, &[p.x, p.y, p.theta], ",");
    }
    out
}

pub fn read_trajectory(path: impl AsRef<Path>) -> Result<Vec<Pose2>> {
    let path = path.as_ref();
    parse_trajectory(&read_text(path)?, path)
}

pub fn write_trajectory(poses: &[Pose2], path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &format_trajectory(poses))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_str(&read_text(path.as_ref())?)?)
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path.as_ref(), &text)
}
