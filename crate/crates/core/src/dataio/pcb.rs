//! `PCB1`: packed little-endian binary collection of point clouds.
//!
//! Layout: magic `PCB1`, `u32` cloud count, then per cloud `u32` category,
//! `u32` pair id (`0xFFFFFFFF` = none), `u32` point count and the points as
//! `f32` triples.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

pub const PCB_MAGIC: &[u8; 4] = b"PCB1";
const NONE: u32 = u32::MAX;

pub fn encode_pcb(clouds: &[PointCloud]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + clouds.iter().map(|c| 12 + 12 * c.len()).sum::<usize>());
    out.extend_from_slice(PCB_MAGIC);
    out.extend_from_slice(&(clouds.len() as u32).to_le_bytes());
    for c in clouds {
        out.extend_from_slice(&c.category.unwrap_or(NONE).to_le_bytes());
        out.extend_from_slice(&c.pair_id.unwrap_or(NONE).to_le_bytes());
        out.extend_from_slice(&(c.len() as u32).to_le_bytes());
        for p in &c.points {
            for v in p {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
    }
    out
}

pub(crate) struct Cursor<'a> {
    pub buf: &'a [u8],
    pub pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format { offset: self.pos, reason: format!("truncated while reading {what}") });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode_pcb(buf: &[u8]) -> Result<Vec<PointCloud>> {
    let mut cur = Cursor { buf, pos: 0 };
    if cur.take(4, "magic")? != PCB_MAGIC {
        return Err(Error::Format { offset: 0, reason: "bad magic, expected PCB1".into() });
    }
    let count = cur.u32("cloud count")?;
    let mut clouds = Vec::with_capacity(count.min(1 << 16) as usize);
    for _ in 0..count {
        let category = cur.u32("category")?;
        let pair_id = cur.u32("pair id")?;
        let start = cur.pos;
        let n = cur.u32("point count")? as usize;
        if n == 0 {
            return Err(Error::Format { offset: start, reason: "cloud with zero points".into() });
        }
        let bytes = cur.take(n * 12, "points")?;
        let points = bytes
            .chunks_exact(12)
            .map(|c| {
                let f = |i: usize| f32::from_le_bytes(c[i..i + 4].try_into().unwrap()) as f64;
                [f(0), f(4), f(8)]
            })
            .collect();
        let cloud = PointCloud::new(points)
            .map_err(|e| Error::Format { offset: start, reason: e.to_string() })?
            .with_category((category != NONE).then_some(category))
            .with_pair_id((pair_id != NONE).then_some(pair_id));
        clouds.push(cloud);
    }
    if cur.pos != buf.len() {
        return Err(Error::Format { offset: cur.pos, reason: "trailing bytes".into() });
    }
    Ok(clouds)
}

pub fn write_pcb(path: impl AsRef<Path>, clouds: &[PointCloud]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pcb(clouds)).map_err(|e| Error::io(path, e))
}

pub fn read_pcb(path: impl AsRef<Path>) -> Result<Vec<PointCloud>> {
    let path = path.as_ref();
    decode_pcb(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
