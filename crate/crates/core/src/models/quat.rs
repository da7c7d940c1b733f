use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MIN_QUAT_NORM: f64 = 1e-12;

/// Rotation matrix of the unit quaternion `q / ‖q‖`, with `q = (w, x, y, z)`.
pub fn rotation_matrix(q: [f64; 4]) -> Result<[[f64; 3]; 3]> {
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n < MIN_QUAT_NORM {
        return Err(Error::Degenerate(format!("quaternion norm {n:e} is too small")));
    }
    let [w, x, y, z] = q.map(|v| v / n);
    Ok([
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ])
}

/// `Rz(c) · Ry(b) · Rx(a)`.
pub fn rotation_from_euler(a: f64, b: f64, c: f64) -> [[f64; 3]; 3] {
    let (sa, ca) = a.sin_cos();
    let (sb, cb) = b.sin_cos();
    let (sc, cc) = c.sin_cos();
    [
        [cc * cb, cc * sb * sa - sc * ca, cc * sb * ca + sc * sa],
        [sc * cb, sc * sb * sa + cc * ca, sc * sb * ca - cc * sa],
        [-sb, cb * sa, cb * ca],
    ]
}

/// Differentiable batch version of [`rotation_matrix`]: `[B,4] → [B,3,3]`.
pub fn quat_to_rot(q: &Tensor) -> Result<Tensor> {
    let shape = q.shape();
    if shape.len() != 2 || shape[1] != 4 {
        return Err(Error::invalid(format!("quaternions must be [B,4], got {shape:?}")));
    }
    let batch = shape[0];
    if let Some(row) = q.values().chunks(4).position(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt() < MIN_QUAT_NORM) {
        return Err(Error::Degenerate(format!("quaternion {row} of the batch has near-zero norm")));
    }
    let u = q.l2_normalize()?;
    let [w, x, y, z] = [0, 1, 2, 3].map(|i| u.slice_last(i, 1).expect("width 4"));
    let two = |t: Tensor| t.scale(2.0);
    let m = |a: &Tensor, b: &Tensor| a.mul(b);
    let (xx, yy, zz) = (m(&x, &x)?, m(&y, &y)?, m(&z, &z)?);
    let (xy, xz, yz) = (m(&x, &y)?, m(&x, &z)?, m(&y, &z)?);
    let (wx, wy, wz) = (m(&w, &x)?, m(&w, &y)?, m(&w, &z)?);
    let one_minus = |a: &Tensor, b: &Tensor| -> Result<Tensor> { Ok(a.add(b)?.affine(-2.0, 1.0)) };
    let entries = [
        one_minus(&yy, &zz)?,
        two(xy.sub(&wz)?),
        two(xz.add(&wy)?),
        two(xy.add(&wz)?),
        one_minus(&xx, &zz)?,
        two(yz.sub(&wx)?),
        two(xz.sub(&wy)?),
        two(yz.add(&wx)?),
        one_minus(&xx, &yy)?,
    ];
    Ok(Tensor::concat(&entries)?.reshape(&[batch, 3, 3])?)
}
