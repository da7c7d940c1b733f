//! ASCII PLY export with per-vertex colours.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::PointCloud;
use crate::error::{Error, Result};

/// Upper end of the error heatmap, in degrees.
pub const HEATMAP_MAX_DEG: f64 = 60.0;
pub const HEATMAP_LOW: [u8; 3] = [0, 0, 255];
pub const HEATMAP_HIGH: [u8; 3] = [255, 255, 0];
pub const PLANE_COLOR: [u8; 3] = [220, 30, 30];
pub const OTHER_COLOR: [u8; 3] = [190, 190, 190];

pub enum Coloring<'a> {
    /// Angle errors in degrees, blue at 0 to yellow at 60 and above.
    Heatmap(&'a [f64]),
    /// Plane points red, others grey.
    Labels(&'a [bool]),
}

pub fn heatmap_color(deg: f64) -> [u8; 3] {
    let t = if deg.is_nan() { 1.0 } else { (deg / HEATMAP_MAX_DEG).clamp(0.0, 1.0) };
    let mut c = [0u8; 3];
    for k in 0..3 {
        let lo = HEATMAP_LOW[k] as f64;
        let hi = HEATMAP_HIGH[k] as f64;
        c[k] = (lo + (hi - lo) * t).round() as u8;
    }
    c
}

pub fn write_ply(cloud: &PointCloud, coloring: Coloring<'_>, path: impl AsRef<Path>) -> Result<()> {
    let n = cloud.len();
    let colors: Vec<[u8; 3]> = match coloring {
        Coloring::Heatmap(v) if v.len() == n => v.iter().map(|&d| heatmap_color(d)).collect(),
        Coloring::Labels(l) if l.len() == n => {
            l.iter().map(|&b| if b { PLANE_COLOR } else { OTHER_COLOR }).collect()
        }
        Coloring::Heatmap(v) => return Err(Error::invalid(format!("{} scalars for {n} points", v.len()))),
        Coloring::Labels(l) => return Err(Error::invalid(format!("{} labels for {n} points", l.len()))),
    };
    let mut s = String::with_capacity(64 * n + 256);
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "comment {}", cloud.name);
    let _ = writeln!(s, "element vertex {n}");
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    s.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n");
    for (p, c) in cloud.points.iter().zip(&colors) {
        let _ = writeln!(s, "{:?} {:?} {:?} {} {} {}", p[0], p[1], p[2], c[0], c[1], c[2]);
    }
    let path = path.as_ref();
    fs::write(path, s).map_err(|e| Error::io(path, e))
}
