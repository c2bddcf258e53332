//! Synthetic data, role splits and file formats.

pub mod checkpoint;
pub mod partial;
pub mod pcb;
pub mod ply;
pub mod shapes;
pub mod split;

use std::fs;
use std::path::Path;

use rayon::prelude::*;

pub use checkpoint::{config_digest, digest_hex, load_checkpoint, save_checkpoint, Checkpoint, ConfigDigest};
pub use partial::{make_partial, make_partial_with, PartialView, ViewParams};
pub use pcb::{decode_pcb, encode_pcb, read_pcb, write_pcb};
pub use ply::{parse_ply, ply_to_string, read_ply, write_ply};
pub use shapes::{gen_complete, Primitive, ShapeSpec};
pub use split::{build_splits, item_id, plan_shapes, ManifestItem, SplitConfig, SplitManifest, SplitRole};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::sampling::derive_seed;

pub const CLOUDS_FILE: &str = "clouds.pcb";
pub const MANIFEST_FILE: &str = "manifest.csv";

/// Manifest plus one cloud per manifest item, in manifest order.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub manifest: SplitManifest,
    pub clouds: Vec<PointCloud>,
}

impl Dataset {
    pub fn role(&self, role: SplitRole) -> Vec<&PointCloud> {
        self.items(role).map(|(_, c)| c).collect()
    }

    pub fn items(&self, role: SplitRole) -> impl Iterator<Item = (&ManifestItem, &PointCloud)> {
        self.manifest.items.iter().zip(&self.clouds).filter(move |(i, _)| i.role == role)
    }

    /// (incomplete, complete) clouds of the pairs in one of the paired roles, ordered by pair id.
    pub fn pairs(&self, test: bool) -> Result<Vec<(&PointCloud, &PointCloud)>> {
        let (rc, ri) = if test {
            (SplitRole::TestComplete, SplitRole::TestIncomplete)
        } else {
            (SplitRole::PairedComplete, SplitRole::PairedIncomplete)
        };
        let mut complete: Vec<(u32, &PointCloud)> =
            self.items(rc).map(|(i, c)| (i.pair_id.unwrap_or(u32::MAX), c)).collect();
        complete.sort_by_key(|(p, _)| *p);
        let mut out = Vec::new();
        let mut partial: Vec<(u32, &PointCloud)> =
            self.items(ri).map(|(i, c)| (i.pair_id.unwrap_or(u32::MAX), c)).collect();
        partial.sort_by_key(|(p, _)| *p);
        for ((pa, a), (pb, b)) in partial.into_iter().zip(complete) {
            if pa != pb {
                return Err(Error::argument(format!("pair ids {pa} and {pb} do not line up")));
            }
            out.push((a, b));
        }
        Ok(out)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_pcb(dir.join(CLOUDS_FILE), &self.clouds)?;
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, self.manifest.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(MANIFEST_FILE);
        let manifest = SplitManifest::from_text(&fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?)?;
        manifest.validate()?;
        let clouds = read_pcb(dir.join(CLOUDS_FILE))?;
        if clouds.len() != manifest.items.len() {
            return Err(Error::argument(format!(
                "manifest lists {} items but {} holds {} clouds",
                manifest.items.len(),
                CLOUDS_FILE,
                clouds.len()
            )));
        }
        let clouds = clouds
            .into_iter()
            .zip(&manifest.items)
            .map(|(c, item)| {
                if c.category != Some(item.category) || c.pair_id != item.pair_id {
                    return Err(Error::argument(format!("cloud labels disagree with manifest for `{}`", item.id)));
                }
                Ok(c.with_id(item.id.clone()))
            })
            .collect::<Result<_>>()?;
        Ok(Self { manifest, clouds })
    }
}

fn gen_slot(slot: &split::ShapeSlot, num_points: usize, seed: u64) -> Result<Vec<PointCloud>> {
    let primitive = Primitive::from_category(slot.category)?;
    let shape_seed = derive_seed(seed, &[0x5348, slot.shape as u64]);
    let complete = gen_complete(&ShapeSpec::random(primitive, num_points, shape_seed))?.with_pair_id(slot.pair_id);
    let mut out = Vec::with_capacity(slot.roles.len());
    for &role in &slot.roles {
        let cloud = if role.is_complete() {
            complete.clone()
        } else {
            make_partial(&complete, derive_seed(shape_seed, &[1]))?.cloud
        };
        out.push(cloud.with_id(item_id(slot.shape, role)));
    }
    Ok(out)
}

/// Generates every cloud of a split. Shapes are independent, so `workers > 0`
/// spreads them over a thread pool; the result does not depend on `workers`.
/// The flag reports paired-fraction clamping.
pub fn generate_dataset(cfg: &SplitConfig, num_points: usize, workers: usize) -> Result<(Dataset, bool)> {
    if num_points == 0 {
        return Err(Error::argument("num_points must be positive"));
    }
    if cfg.num_categories as usize > Primitive::ALL.len() {
        return Err(Error::argument(format!("at most {} categories are available", Primitive::ALL.len())));
    }
    let (manifest, clamped) = build_splits(cfg)?;
    let (slots, _) = plan_shapes(cfg)?;
    let per_slot: Vec<Vec<PointCloud>> = if workers == 0 {
        slots.iter().map(|s| gen_slot(s, num_points, cfg.seed)).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::argument(format!("thread pool: {e}")))?;
        pool.install(|| slots.par_iter().map(|s| gen_slot(s, num_points, cfg.seed)).collect::<Result<_>>())?
    };
    let clouds: Vec<PointCloud> = per_slot.into_iter().flatten().collect();
    debug_assert_eq!(clouds.len(), manifest.items.len());
    Ok((Dataset { manifest, clouds }, clamped))
}
