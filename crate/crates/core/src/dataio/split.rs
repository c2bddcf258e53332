//! Assignment of synthetic shapes to paired, unpaired and test roles.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{derive_seed, rng_from_seed};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplitRole {
    PairedComplete,
    PairedIncomplete,
    UnpairedComplete,
    UnpairedIncomplete,
    TestComplete,
    TestIncomplete,
}

impl SplitRole {
    pub const ALL: [SplitRole; 6] = [
        SplitRole::PairedComplete,
        SplitRole::PairedIncomplete,
        SplitRole::UnpairedComplete,
        SplitRole::UnpairedIncomplete,
        SplitRole::TestComplete,
        SplitRole::TestIncomplete,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitRole::PairedComplete => "paired_complete",
            SplitRole::PairedIncomplete => "paired_incomplete",
            SplitRole::UnpairedComplete => "unpaired_complete",
            SplitRole::UnpairedIncomplete => "unpaired_incomplete",
            SplitRole::TestComplete => "test_complete",
            SplitRole::TestIncomplete => "test_incomplete",
        }
    }

    pub fn is_complete(self) -> bool {
        matches!(self, SplitRole::PairedComplete | SplitRole::UnpairedComplete | SplitRole::TestComplete)
    }
}

impl fmt::Display for SplitRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SplitRole::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::argument(format!("unknown role `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestItem {
    pub id: String,
    pub category: u32,
    pub role: SplitRole,
    pub pair_id: Option<u32>,
}

impl ManifestItem {
    /// Index of the underlying synthetic shape, encoded in the id.
    pub fn shape_index(&self) -> Option<u32> {
        self.id.strip_prefix("shape")?.split('_').next()?.parse().ok()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitManifest {
    pub items: Vec<ManifestItem>,
    pub paired_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    /// Training shapes; each yields a complete and an incomplete cloud.
    pub num_pairs: usize,
    pub paired_fraction: f64,
    pub extra_unpaired_complete: usize,
    pub extra_unpaired_incomplete: usize,
    pub num_test_pairs: usize,
    pub num_categories: u32,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            num_pairs: 200,
            paired_fraction: 0.1,
            extra_unpaired_complete: 0,
            extra_unpaired_incomplete: 0,
            num_test_pairs: 20,
            num_categories: 4,
            seed: 0,
        }
    }
}

/// Role plan for one synthetic shape.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShapeSlot {
    pub shape: u32,
    pub category: u32,
    pub roles: Vec<SplitRole>,
    pub pair_id: Option<u32>,
}

impl SplitManifest {
    pub fn count(&self, role: SplitRole) -> usize {
        self.items.iter().filter(|i| i.role == role).count()
    }

    pub fn role_counts(&self) -> BTreeMap<SplitRole, usize> {
        SplitRole::ALL.into_iter().map(|r| (r, self.count(r))).collect()
    }

    pub fn num_paired(&self) -> usize {
        self.count(SplitRole::PairedIncomplete)
    }

    /// Checks pairing and pool-disjointness invariants.
    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for item in &self.items {
            if !ids.insert(item.id.as_str()) {
                return Err(Error::argument(format!("duplicate manifest id `{}`", item.id)));
            }
        }
        for (c, i) in [
            (SplitRole::PairedComplete, SplitRole::PairedIncomplete),
            (SplitRole::TestComplete, SplitRole::TestIncomplete),
        ] {
            let mut counts: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
            for item in self.items.iter().filter(|x| x.role == c || x.role == i) {
                let pid = item.pair_id.ok_or_else(|| Error::argument(format!("`{}` lacks a pair id", item.id)))?;
                let e = counts.entry(pid).or_default();
                if item.role == c {
                    e.0 += 1
                } else {
                    e.1 += 1
                }
            }
            if let Some((pid, _)) = counts.iter().find(|(_, v)| **v != (1, 1)) {
                return Err(Error::argument(format!("pair {pid} is not exactly one complete + one incomplete")));
            }
        }
        let pool = |r: SplitRole| match r {
            SplitRole::PairedComplete | SplitRole::PairedIncomplete => 0,
            SplitRole::UnpairedComplete | SplitRole::UnpairedIncomplete => 1,
            _ => 2,
        };
        let mut owner: BTreeMap<u32, u8> = BTreeMap::new();
        for item in &self.items {
            if let Some(shape) = item.shape_index() {
                let p = pool(item.role);
                if *owner.entry(shape).or_insert(p) != p {
                    return Err(Error::argument(format!("shape {shape} appears in more than one pool")));
                }
            }
        }
        Ok(())
    }

    /// One line per item: `id,category,role,pair_id` (pair id empty when absent).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for item in &self.items {
            let pid = item.pair_id.map(|p| p.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", item.id, item.category, item.role, pid));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut items = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |reason: String| Error::Parse { line: n + 1, reason };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(parse_err(format!("expected 4 fields, got {}", fields.len())));
            }
            let category = fields[1].parse().map_err(|_| parse_err(format!("bad category `{}`", fields[1])))?;
            let role = fields[2].parse().map_err(|e: Error| parse_err(e.to_string()))?;
            let pair_id = if fields[3].is_empty() {
                None
            } else {
                Some(fields[3].parse().map_err(|_| parse_err(format!("bad pair id `{}`", fields[3])))?)
            };
            items.push(ManifestItem { id: fields[0].to_string(), category, role, pair_id });
        }
        let total_train =
            items.iter().filter(|i| !matches!(i.role, SplitRole::TestComplete | SplitRole::TestIncomplete)).count();
        let paired = items.iter().filter(|i| i.role == SplitRole::PairedIncomplete).count();
        let fraction = if total_train == 0 { 0.0 } else { paired as f64 * 2.0 / total_train as f64 };
        Ok(Self { items, paired_fraction: fraction })
    }
}

/// Number of paired shapes for a fraction, clamped to at least one.
pub fn paired_count(num_pairs: usize, fraction: f64) -> (usize, bool) {
    let k = (num_pairs as f64 * fraction).round() as usize;
    if k == 0 {
        (1.min(num_pairs), true)
    } else {
        (k.min(num_pairs), false)
    }
}

/// Deterministic role plan for every synthetic shape.
///
/// Shapes `0..num_pairs` are training shapes, with categories cycling so
/// every category is equally represented. A category-stratified subset of
/// size `round(fraction * num_pairs)` (at least 1) is paired; every other
/// training shape contributes one unpaired complete and one unpaired
/// incomplete cloud with the pairing hidden. Test shapes and the extra
/// unpaired shapes follow.
pub fn plan_shapes(cfg: &SplitConfig) -> Result<(Vec<ShapeSlot>, bool)> {
    if !(cfg.paired_fraction >= 0.0 && cfg.paired_fraction <= 1.0) {
        return Err(Error::argument(format!("paired fraction must lie in (0, 1], got {}", cfg.paired_fraction)));
    }
    if cfg.num_pairs == 0 || cfg.num_categories == 0 {
        return Err(Error::argument("need at least one training shape and one category"));
    }
    let (k, clamped) = paired_count(cfg.num_pairs, cfg.paired_fraction);
    if clamped {
        log::warn!("paired fraction {} yields no pairs; using 1 pair", cfg.paired_fraction);
    }
    let c = cfg.num_categories;
    let mut rng = rng_from_seed(derive_seed(cfg.seed, &[0x5350_4c49]));
    let mut by_cat: Vec<Vec<u32>> = vec![Vec::new(); c as usize];
    for s in 0..cfg.num_pairs as u32 {
        by_cat[(s % c) as usize].push(s);
    }
    for list in &mut by_cat {
        list.shuffle(&mut rng);
    }
    let mut paired = vec![false; cfg.num_pairs];
    let mut taken = 0;
    'outer: for round in 0.. {
        for list in &by_cat {
            if taken == k {
                break 'outer;
            }
            if let Some(&s) = list.get(round) {
                paired[s as usize] = true;
                taken += 1;
            }
        }
    }

    let mut slots = Vec::new();
    let mut next_pair = 0u32;
    for s in 0..cfg.num_pairs as u32 {
        let (roles, pair_id) = if paired[s as usize] {
            next_pair += 1;
            (vec![SplitRole::PairedComplete, SplitRole::PairedIncomplete], Some(next_pair - 1))
        } else {
            (vec![SplitRole::UnpairedComplete, SplitRole::UnpairedIncomplete], None)
        };
        slots.push(ShapeSlot { shape: s, category: s % c, roles, pair_id });
    }
    let mut s = cfg.num_pairs as u32;
    for _ in 0..cfg.num_test_pairs {
        slots.push(ShapeSlot {
            shape: s,
            category: s % c,
            roles: vec![SplitRole::TestComplete, SplitRole::TestIncomplete],
            pair_id: Some(next_pair),
        });
        next_pair += 1;
        s += 1;
    }
    for (n, role) in [
        (cfg.extra_unpaired_complete, SplitRole::UnpairedComplete),
        (cfg.extra_unpaired_incomplete, SplitRole::UnpairedIncomplete),
    ] {
        for _ in 0..n {
            slots.push(ShapeSlot { shape: s, category: s % c, roles: vec![role], pair_id: None });
            s += 1;
        }
    }
    Ok((slots, clamped))
}

pub fn item_id(shape: u32, role: SplitRole) -> String {
    format!("shape{shape:05}_{}", if role.is_complete() { "complete" } else { "partial" })
}

/// Manifest for a split configuration; the flag reports fraction clamping.
pub fn build_splits(cfg: &SplitConfig) -> Result<(SplitManifest, bool)> {
    let (slots, clamped) = plan_shapes(cfg)?;
    let items = slots
        .iter()
        .flat_map(|slot| {
            slot.roles.iter().map(move |&role| ManifestItem {
                id: item_id(slot.shape, role),
                category: slot.category,
                role,
                pair_id: slot.pair_id,
            })
        })
        .collect();
    let manifest = SplitManifest { items, paired_fraction: cfg.paired_fraction };
    manifest.validate()?;
    Ok((manifest, clamped))
}
