use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

/// One shape: positions, optional ground-truth normals and evaluation subset.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub name: String,
    pub points: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
    pub eval_indices: Option<Vec<usize>>,
    bbox_diagonal: f64,
}

/// Diagonal length of the axis-aligned bounding box; 0 for empty input.
pub fn bbox_diagonal(points: &[Vec3]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    (0..3).map(|a| (hi[a] - lo[a]).powi(2)).sum::<f64>().sqrt()
}

impl PointCloud {
    pub fn new(name: impl Into<String>, points: Vec<Vec3>) -> Self {
        let bbox_diagonal = bbox_diagonal(&points);
        PointCloud {
            name: name.into(),
            points,
            normals: None,
            eval_indices: None,
            bbox_diagonal,
        }
    }

    /// Attaches normals, re-normalizing each to unit length.
    pub fn with_normals(mut self, normals: Vec<Vec3>) -> Result<Self> {
        if normals.len() != self.points.len() {
            return Err(Error::invalid(format!(
                "{} normals for {} points",
                normals.len(),
                self.points.len()
            )));
        }
        let mut unit = Vec::with_capacity(normals.len());
        for (i, n) in normals.into_iter().enumerate() {
            let len = norm(n);
            if !(len > 0.0 && len.is_finite()) {
                return Err(Error::invalid(format!("normal {i} has zero or non-finite length")));
            }
            unit.push([n[0] / len, n[1] / len, n[2] / len]);
        }
        self.normals = Some(unit);
        Ok(self)
    }

    pub fn with_eval_indices(mut self, indices: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.points.len()) {
            return Err(Error::invalid(format!(
                "evaluation index {bad} out of range for {} points",
                self.points.len()
            )));
        }
        self.eval_indices = Some(indices);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bbox_diagonal(&self) -> f64 {
        self.bbox_diagonal
    }

    /// Evaluation indices if present, otherwise every point.
    pub fn eval_points(&self) -> Vec<usize> {
        match &self.eval_indices {
            Some(idx) => idx.clone(),
            None => (0..self.points.len()).collect(),
        }
    }

    /// Keeps the listed points (in order), carrying normals along. Evaluation
    /// indices do not survive re-indexing and are dropped.
    pub fn select(&self, keep: &[usize]) -> PointCloud {
        let points = keep.iter().map(|&i| self.points[i]).collect();
        let mut out = PointCloud::new(self.name.clone(), points);
        out.normals = self.normals.as_ref().map(|n| keep.iter().map(|&i| n[i]).collect());
        out
    }

    pub(crate) fn replace_points(&mut self, points: Vec<Vec3>) {
        self.bbox_diagonal = bbox_diagonal(&points);
        self.points = points;
    }
}

pub(crate) fn norm(v: Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[cfg(test)]
pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
