//! Classical normal estimators: PCA plane fitting and order-2 jet fitting.

use crate::data::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    Ok,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineResult {
    pub normal: Vec3,
    /// Covariance eigenvalues, ascending (PCA only).
    pub eigenvalues: Option<[f64; 3]>,
    pub condition: Condition,
}

/// Ridge added to the jet normal-equation diagonal.
pub const JET_DAMPING: f64 = 1e-12;
const RANK_TOL: f64 = 1e-12;

/// Eigen-decomposition of a symmetric 3×3 matrix by cyclic Jacobi rotations.
/// Returns eigenvalues ascending and the matching eigenvectors.
pub fn symmetric_eigen3(m: [[f64; 3]; 3]) -> ([f64; 3], [Vec3; 3]) {
    let mut a = m;
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _sweep in 0..64 {
        let off = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
        let scale = a[0][0].powi(2) + a[1][1].powi(2) + a[2][2].powi(2);
        if off == 0.0 || off <= 1e-36 * scale {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q] == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let vp = row[p];
                let vq = row[q];
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
    let values = order.map(|i| a[i][i]);
    let vectors = order.map(|i| [v[0][i], v[1][i], v[2][i]]);
    (values, vectors)
}

/// Flips `n` so its first non-zero component among (z, y, x) is positive.
pub fn canonical_sign(n: Vec3) -> Vec3 {
    for a in [2, 1, 0] {
        if n[a] > 0.0 {
            return n;
        }
        if n[a] < 0.0 {
            return [-n[0], -n[1], -n[2]];
        }
    }
    n
}

fn covariance(points: &[Vec3]) -> [[f64; 3]; 3] {
    let n = points.len() as f64;
    let mut mean = [0.0; 3];
    for p in points {
        for a in 0..3 {
            mean[a] += p[a];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut c = [[0.0; 3]; 3];
    for p in points {
        let d = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
        for i in 0..3 {
            for j in i..3 {
                c[i][j] += d[i] * d[j];
            }
        }
    }
    for i in 0..3 {
        for j in i..3 {
            c[i][j] /= n;
            c[j][i] = c[i][j];
        }
    }
    c
}

struct Frame {
    values: [f64; 3],
    vectors: [Vec3; 3],
    degenerate: bool,
}

fn pca_frame(points: &[Vec3]) -> Frame {
    if points.len() < 3 {
        return Frame {
            values: [0.0; 3],
            vectors: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            degenerate: true,
        };
    }
    let (mut values, vectors) = symmetric_eigen3(covariance(points));
    values.iter_mut().for_each(|v| *v = v.max(0.0));
    // Rank < 2: collinear or coincident points.
    let degenerate = !(values[2] > 0.0) || values[1] <= RANK_TOL * values[2];
    Frame {
        values,
        vectors,
        degenerate,
    }
}

/// Normal of the least-squares plane: the eigenvector of the smallest
/// covariance eigenvalue.
pub fn pca_normal(points: &[Vec3]) -> BaselineResult {
    let frame = pca_frame(points);
    BaselineResult {
        normal: canonical_sign(frame.vectors[0]),
        eigenvalues: Some(frame.values),
        condition: if frame.degenerate { Condition::Degenerate } else { Condition::Ok },
    }
}

/// Solves the symmetric positive system `a x = b` by Gaussian elimination
/// with partial pivoting. `None` when a pivot vanishes.
fn solve<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Option<[f64; N]> {
    let scale = (0..N).map(|i| a[i][i].abs()).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return None;
    }
    for col in 0..N {
        let piv = (col..N).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-14 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..N {
            let f = a[row][col] / a[col][col];
            for k in col..N {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let s: f64 = (row + 1..N).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Order-2 jet: fits `h(u,v) = a0 + a1 u + a2 v + a3 u² + a4 uv + a5 v²` over
/// the PCA frame of the patch and returns the normal of that height field at
/// the origin (the patch centre). The points must already be centred there.
pub fn jet_normal(points: &[Vec3]) -> BaselineResult {
    let frame = pca_frame(points);
    let pca = BaselineResult {
        normal: canonical_sign(frame.vectors[0]),
        eigenvalues: None,
        condition: Condition::Degenerate,
    };
    if frame.degenerate || points.len() < 6 {
        return pca;
    }
    let [n, e1, e2] = [frame.vectors[0], frame.vectors[2], frame.vectors[1]];
    let dot = |a: Vec3, b: Vec3| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    // Scale-free coordinates keep the normal equations well conditioned.
    let extent = points.iter().map(|p| dot(*p, *p)).fold(0.0, f64::max).sqrt();
    if !(extent > 0.0) {
        return pca;
    }
    let inv = 1.0 / extent;
    let mut ata = [[0.0; 6]; 6];
    let mut atb = [0.0; 6];
    for p in points {
        let (u, v, h) = (dot(*p, e1) * inv, dot(*p, e2) * inv, dot(*p, n) * inv);
        let row = [1.0, u, v, u * u, u * v, v * v];
        for i in 0..6 {
            for j in 0..6 {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * h;
        }
    }
    for (i, r) in ata.iter_mut().enumerate() {
        r[i] += JET_DAMPING;
    }
    let Some(coef) = solve(ata, atb) else {
        return pca;
    };
    // h is dimensionless in the scaled frame, so its gradient is unchanged.
    let (a1, a2) = (coef[1], coef[2]);
    let raw = [0, 1, 2].map(|k| n[k] - a1 * e1[k] - a2 * e2[k]);
    let len = dot(raw, raw).sqrt();
    if !(len > 0.0 && len.is_finite()) {
        return pca;
    }
    BaselineResult {
        normal: canonical_sign(raw.map(|c| c / len)),
        eigenvalues: None,
        condition: Condition::Ok,
    }
}
