//! ASCII PLY with a single `vertex` element of `x y z` floats.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

fn tag(v: Option<u32>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "none".into())
}

/// Serializes a cloud. Coordinates are stored as 32-bit floats printed with
/// nine significant digits, which round-trips every `f32` exactly.
pub fn ply_to_string(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(64 + cloud.len() * 48);
    out.push_str("ply\nformat ascii 1.0\n");
    out.push_str(&format!("comment category {} pair_id {}\n", tag(cloud.category), tag(cloud.pair_id)));
    out.push_str(&format!("element vertex {}\n", cloud.len()));
    out.push_str("property float x\nproperty float y\nproperty float z\nend_header\n");
    for p in &cloud.points {
        out.push_str(&format!("{:.8e} {:.8e} {:.8e}\n", p[0] as f32, p[1] as f32, p[2] as f32));
    }
    out
}

pub fn write_ply(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, ply_to_string(cloud)).map_err(|e| Error::io(path, e))
}

pub fn read_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ply(&text)
}

fn parse_tag(s: &str, line: usize) -> Result<Option<u32>> {
    if s == "none" {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| Error::Parse { line, reason: format!("bad tag value `{s}`") })
}

pub fn parse_ply(text: &str) -> Result<PointCloud> {
    let err = |line: usize, reason: String| Error::Parse { line, reason };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(err(1, "missing `ply` magic".into())),
    }
    let mut count: Option<usize> = None;
    let mut props: Vec<String> = Vec::new();
    let mut single = true;
    let mut category = None;
    let mut pair_id = None;
    let mut header_done = false;
    for (n, line) in lines.by_ref() {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["format", "ascii", "1.0"] => {}
            ["format", ..] => return Err(err(n, format!("unsupported format `{line}`"))),
            ["comment", rest @ ..] => {
                if let ["category", c, "pair_id", p] = rest {
                    category = parse_tag(c, n)?;
                    pair_id = parse_tag(p, n)?;
                }
            }
            ["element", "vertex", c] => {
                count = Some(c.parse().map_err(|_| err(n, format!("bad vertex count `{c}`")))?);
            }
            ["element", other, ..] => return Err(err(n, format!("unsupported element `{other}`"))),
            ["property", ty, name] => {
                if count.is_none() {
                    return Err(err(n, "property before element".into()));
                }
                if !matches!(*ty, "float" | "float32" | "double" | "float64") {
                    return Err(err(n, format!("unsupported property type `{ty}`")));
                }
                single &= matches!(*ty, "float" | "float32");
                props.push(name.to_string());
            }
            ["end_header"] => {
                header_done = true;
                break;
            }
            [] => {}
            _ => return Err(err(n, format!("unrecognized header line `{line}`"))),
        }
    }
    let header_end = text.lines().count();
    if !header_done {
        return Err(err(header_end, "missing `end_header`".into()));
    }
    let count = count.ok_or_else(|| err(header_end, "missing `element vertex`".into()))?;
    if props != ["x", "y", "z"] {
        return Err(err(header_end, format!("expected properties x, y, z; got {props:?}")));
    }
    let mut points = Vec::with_capacity(count);
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        if points.len() == count {
            return Err(err(n, "more vertices than declared".into()));
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|w| w.parse::<f64>().map_err(|_| err(n, format!("non-numeric value `{w}`"))))
            .collect::<Result<_>>()?;
        if vals.len() != 3 {
            return Err(err(n, format!("expected 3 values, got {}", vals.len())));
        }
        let r = |v: f64| if single { v as f32 as f64 } else { v };
        points.push([r(vals[0]), r(vals[1]), r(vals[2])]);
    }
    if points.len() != count {
        return Err(err(header_end, format!("declared {count} vertices, found {}", points.len())));
    }
    Ok(PointCloud::new(points)?.with_category(category).with_pair_id(pair_id))
}
