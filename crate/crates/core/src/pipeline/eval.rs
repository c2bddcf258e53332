use std::collections::BTreeMap;

use super::ordered_map;
use super::stage2::Generator;
use crate::error::{Error, Result};
use crate::geometry::{chamfer_distance, emd_distance, f1_score, MetricConfig, Point3, PointCloud};

/// Chamfer distances are reported multiplied by this factor.
pub const CD_SCALE: f64 = 1e4;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalItem {
    pub category: Option<u32>,
    pub cd: f64,
    pub f1: f64,
    pub emd: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CategoryStats {
    pub count: usize,
    pub cd_e4: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub count: usize,
    pub cd_e4: f64,
    pub f1: f64,
    pub emd: Option<f64>,
    pub per_category: BTreeMap<Option<u32>, CategoryStats>,
    pub items: Vec<EvalItem>,
}

/// Order-independent mean: values are sorted before summation.
fn mean(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Metrics of predictions against ground truth, with a per-category table.
/// Means do not depend on the order of `pairs`.
pub fn evaluate_predictions(pairs: &[(&[Point3], &PointCloud)], metric: &MetricConfig) -> Result<EvalReport> {
    metric.validate()?;
    if pairs.is_empty() {
        return Err(Error::argument("evaluation needs at least one test pair"));
    }
    let items = ordered_map(pairs, |(pred, gt)| {
        Ok(EvalItem {
            category: gt.category,
            cd: chamfer_distance(*pred, &gt.points, metric)?,
            f1: f1_score(*pred, &gt.points, metric)?,
            emd: if metric.emd_enabled { Some(emd_distance(*pred, &gt.points)?) } else { None },
        })
    })?;
    let mut groups: BTreeMap<Option<u32>, Vec<&EvalItem>> = BTreeMap::new();
    for it in &items {
        groups.entry(it.category).or_default().push(it);
    }
    let per_category = groups
        .into_iter()
        .map(|(k, v)| {
            let stats = CategoryStats {
                count: v.len(),
                cd_e4: CD_SCALE * mean(v.iter().map(|i| i.cd).collect()),
                f1: mean(v.iter().map(|i| i.f1).collect()),
            };
            (k, stats)
        })
        .collect();
    Ok(EvalReport {
        count: items.len(),
        cd_e4: CD_SCALE * mean(items.iter().map(|i| i.cd).collect()),
        f1: mean(items.iter().map(|i| i.f1).collect()),
        emd: metric.emd_enabled.then(|| mean(items.iter().filter_map(|i| i.emd).collect())),
        per_category,
        items,
    })
}

/// Completes every (partial, complete) pair with `gen` and scores it.
pub fn evaluate(gen: &Generator, pairs: &[(&PointCloud, &PointCloud)], metric: &MetricConfig) -> Result<EvalReport> {
    let preds = ordered_map(pairs, |(partial, _)| gen.complete(&partial.points))?;
    let joined: Vec<(&[Point3], &PointCloud)> =
        preds.iter().map(|p| p.as_slice()).zip(pairs.iter().map(|p| p.1)).collect();
    evaluate_predictions(&joined, metric)
}

/// Splits test pairs alternately into a validation half (even positions)
/// and a held-out half (odd positions). A single pair serves as both.
pub fn split_validation<T: Copy>(pairs: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    match pairs.len() {
        0 => Err(Error::argument("no test pairs for validation")),
        1 => Ok((pairs.to_vec(), pairs.to_vec())),
        _ => Ok((pairs.iter().step_by(2).copied().collect(), pairs.iter().skip(1).step_by(2).copied().collect())),
    }
}
