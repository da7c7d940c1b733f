//! Synthetic shapes sampled uniformly by area, with analytic normals.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{PointCloud, Vec3};
use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShapeKind {
    /// Square `size × size` in the plane z = 0.
    Plane { size: f64 },
    Sphere { radius: f64 },
    /// Lateral surface plus both caps, axis along z.
    Cylinder { radius: f64, height: f64 },
    /// Axis-aligned, centred at the origin.
    Cube { side: f64 },
    /// Two `size × size` faces sharing the y axis as crease, with interior
    /// angle `angle_deg` between them. Face A lies in z = 0, x ≥ 0.
    Dihedral { angle_deg: f64, size: f64 },
}

impl ShapeKind {
    pub fn plane() -> Self {
        ShapeKind::Plane { size: 1.0 }
    }

    pub fn sphere() -> Self {
        ShapeKind::Sphere { radius: 1.0 }
    }

    pub fn cylinder() -> Self {
        ShapeKind::Cylinder { radius: 0.5, height: 1.0 }
    }

    pub fn cube() -> Self {
        ShapeKind::Cube { side: 1.0 }
    }

    pub fn dihedral(angle_deg: f64) -> Self {
        ShapeKind::Dihedral { angle_deg, size: 1.0 }
    }

    pub fn name(&self) -> String {
        match self {
            ShapeKind::Plane { .. } => "plane".into(),
            ShapeKind::Sphere { .. } => "sphere".into(),
            ShapeKind::Cylinder { .. } => "cylinder".into(),
            ShapeKind::Cube { .. } => "cube".into(),
            ShapeKind::Dihedral { angle_deg, .. } => format!("dihedral{angle_deg}"),
        }
    }

    /// Unit normals of the two dihedral faces (A, B).
    pub fn dihedral_face_normals(angle_deg: f64) -> (Vec3, Vec3) {
        let a = angle_deg.to_radians();
        ([0.0, 0.0, 1.0], [-a.sin(), 0.0, a.cos()])
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for ShapeKind {
    type Err = Error;

    /// `plane`, `sphere`, `cylinder`, `cube`, `dihedral` (90°) or `dihedral:<deg>`.
    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let kind = match head.to_ascii_lowercase().as_str() {
            "plane" => Self::plane(),
            "sphere" => Self::sphere(),
            "cylinder" => Self::cylinder(),
            "cube" => Self::cube(),
            "dihedral" => {
                let angle = match arg {
                    Some(a) => a
                        .parse()
                        .map_err(|_| Error::invalid(format!("bad dihedral angle `{a}`")))?,
                    None => 90.0,
                };
                return Ok(Self::dihedral(angle));
            }
            _ => return Err(Error::invalid(format!("unknown shape kind `{s}`"))),
        };
        if arg.is_some() {
            return Err(Error::invalid(format!("shape `{head}` takes no argument")));
        }
        Ok(kind)
    }
}

fn unit_gaussian(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v: Vec3 = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-9 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Samples `n_points` points uniformly by surface area.
pub fn gen_shape(kind: ShapeKind, n_points: usize, seed: u64) -> Result<PointCloud> {
    if n_points < MIN_POINTS {
        return Err(Error::invalid(format!("need at least {MIN_POINTS} points, got {n_points}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n_points);
    let mut normals = Vec::with_capacity(n_points);
    let mut push = |p: Vec3, n: Vec3| {
        points.push(p);
        normals.push(n);
    };
    match kind {
        ShapeKind::Plane { size } => {
            check_positive("plane size", size)?;
            for _ in 0..n_points {
                let x = (rng.random::<f64>() - 0.5) * size;
                let y = (rng.random::<f64>() - 0.5) * size;
                push([x, y, 0.0], [0.0, 0.0, 1.0]);
            }
        }
        ShapeKind::Sphere { radius } => {
            check_positive("sphere radius", radius)?;
            for _ in 0..n_points {
                let d = unit_gaussian(&mut rng);
                push([d[0] * radius, d[1] * radius, d[2] * radius], d);
            }
        }
        ShapeKind::Cylinder { radius, height } => {
            check_positive("cylinder radius", radius)?;
            check_positive("cylinder height", height)?;
            let lateral = 2.0 * PI * radius * height;
            let cap = PI * radius * radius;
            let total = lateral + 2.0 * cap;
            for _ in 0..n_points {
                let u = rng.random::<f64>() * total;
                if u < lateral {
                    let phi = rng.random::<f64>() * 2.0 * PI;
                    let z = (rng.random::<f64>() - 0.5) * height;
                    let (s, c) = phi.sin_cos();
                    push([radius * c, radius * s, z], [c, s, 0.0]);
                } else {
                    let top = u < lateral + cap;
                    let r = radius * rng.random::<f64>().sqrt();
                    let phi = rng.random::<f64>() * 2.0 * PI;
                    let (s, c) = phi.sin_cos();
                    let (z, nz) = if top { (height / 2.0, 1.0) } else { (-height / 2.0, -1.0) };
                    push([r * c, r * s, z], [0.0, 0.0, nz]);
                }
            }
        }
        ShapeKind::Cube { side } => {
            check_positive("cube side", side)?;
            let h = side / 2.0;
            for _ in 0..n_points {
                let face = rng.random_range(0..6usize);
                let axis = face / 2;
                let sign = if face % 2 == 0 { 1.0 } else { -1.0 };
                let a = (rng.random::<f64>() - 0.5) * side;
                let b = (rng.random::<f64>() - 0.5) * side;
                let mut p = [0.0; 3];
                let mut n = [0.0; 3];
                p[axis] = sign * h;
                p[(axis + 1) % 3] = a;
                p[(axis + 2) % 3] = b;
                n[axis] = sign;
                push(p, n);
            }
        }
        ShapeKind::Dihedral { angle_deg, size } => {
            if !(angle_deg > 0.0 && angle_deg < 180.0) {
                return Err(Error::invalid(format!("dihedral angle must lie in (0, 180), got {angle_deg}")));
            }
            check_positive("dihedral size", size)?;
            let (na, nb) = ShapeKind::dihedral_face_normals(angle_deg);
            let a = angle_deg.to_radians();
            let dir = [a.cos(), 0.0, a.sin()];
            for _ in 0..n_points {
                let s = rng.random::<f64>() * size;
                let y = (rng.random::<f64>() - 0.5) * size;
                if rng.random::<bool>() {
                    push([s, y, 0.0], na);
                } else {
                    push([s * dir[0], y, s * dir[2]], nb);
                }
            }
        }
    }
    let cloud = PointCloud::new(kind.name(), points);
    cloud.with_normals(normals)
}

fn check_positive(what: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} must be positive, got {v}")))
    }
}
