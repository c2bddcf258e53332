//! Orthographic SVG renderings of point clouds.

use std::fmt::Write;
use std::str::FromStr;

use rapd_core::geometry::{dot, Point3};
use rapd_core::Error;

/// Axis the viewer looks from, towards the origin.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum View {
    PosX,
    NegX,
    PosY,
    NegY,
    #[default]
    PosZ,
    NegZ,
}

impl FromStr for View {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Ok(match s {
            "+x" | "x" => View::PosX,
            "-x" => View::NegX,
            "+y" | "y" => View::PosY,
            "-y" => View::NegY,
            "+z" | "z" => View::PosZ,
            "-z" => View::NegZ,
            _ => return Err(Error::Argument(format!("unknown view `{s}`, expected one of +x -x +y -y +z -z"))),
        })
    }
}

impl View {
    /// (right, up, towards viewer) unit vectors of the image plane.
    fn frame(self) -> (Point3, Point3, Point3) {
        let (x, y, z) = ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]);
        let neg = |v: Point3| [-v[0], -v[1], -v[2]];
        match self {
            View::PosX => (y, z, x),
            View::NegX => (neg(y), z, neg(x)),
            View::PosY => (neg(x), z, y),
            View::NegY => (x, z, neg(y)),
            View::PosZ => (x, y, z),
            View::NegZ => (neg(x), y, neg(z)),
        }
    }
}

/// One filled circle per point, painted far to near. Nearer points are
/// larger and darker. Output depends only on the inputs.
pub fn render_svg(points: &[Point3], view: View, size: u32) -> String {
    let (right, up, toward) = view.frame();
    let proj: Vec<(f64, f64, f64)> = points.iter().map(|p| (dot(*p, right), dot(*p, up), dot(*p, toward))).collect();
    let extent = proj.iter().map(|(u, v, _)| u.abs().max(v.abs())).fold(1e-9, f64::max);
    let (dmin, dmax) = proj.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.2), hi.max(p.2)));
    let span = (dmax - dmin).max(1e-12);
    let s = size as f64;
    let half = 0.5 * s;
    let scale = 0.45 * s / extent;
    let base = s / 160.0;

    let mut order: Vec<usize> = (0..proj.len()).collect();
    order.sort_by(|&a, &b| proj[a].2.total_cmp(&proj[b].2));

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="{size}" height="{size}" fill="white"/>"#).unwrap();
    for i in order {
        let (u, v, d) = proj[i];
        let t = (d - dmin) / span;
        let g = (200.0 - 160.0 * t).round() as u8;
        writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="rgb({g},{g},{g})"/>"#,
            half + scale * u,
            half - scale * v,
            base * (0.5 + t)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}
