use std::fmt::Write;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stage1Record {
    pub epoch: u32,
    pub cd_complete: f64,
    pub cd_incomplete: f64,
}

/// Epoch means of the second-stage loss terms plus validation metrics.
/// Terms that the configured mode does not compute are `None`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: u32,
    pub loss_total: f64,
    pub z_paired: Option<f64>,
    pub z_unpaired: Option<f64>,
    pub cd_paired: f64,
    pub cd_unpaired: Option<f64>,
    pub g: Option<f64>,
    pub d: Option<f64>,
    pub val_cd_e4: f64,
    pub val_f1: f64,
}

pub const STAGE1_CSV_HEADER: &str = "epoch,cd_complete,cd_incomplete";
pub const STAGE2_CSV_HEADER: &str =
    "epoch,loss_total,loss_z_paired,loss_z_unpaired,loss_cd_paired,loss_cd_unpaired,loss_g,loss_d,val_cd_e4,val_f1";

fn num(v: f64) -> String {
    format!("{v:.9e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn stage1_csv(records: &[Stage1Record]) -> String {
    let mut out = format!("{STAGE1_CSV_HEADER}\n");
    for r in records {
        writeln!(out, "{},{},{}", r.epoch, num(r.cd_complete), num(r.cd_incomplete)).unwrap();
    }
    out
}

pub fn stage2_csv(records: &[EpochRecord]) -> String {
    let mut out = format!("{STAGE2_CSV_HEADER}\n");
    for r in records {
        let cols = [
            r.epoch.to_string(),
            num(r.loss_total),
            opt(r.z_paired),
            opt(r.z_unpaired),
            num(r.cd_paired),
            opt(r.cd_unpaired),
            opt(r.g),
            opt(r.d),
            num(r.val_cd_e4),
            num(r.val_f1),
        ];
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}
