//! Unoriented angle error, per-shape RMSE and category reports.

use std::fmt::Write as _;
use std::path::Path;

use crate::baselines::{jet_normal, pca_normal, Condition};
use crate::data::{load_cloud, load_split, PointCloud, Vec3};
use crate::error::{Error, Result};
use crate::models::{MultiScaleModel, SingleScaleModel};
use crate::patch::{derive_seed, extract_patch, Patch, SpatialIndex};

/// Angle in degrees between the lines spanned by `a` and `b`, in `[0, 90]`.
pub fn unoriented_angle(a: Vec3, b: Vec3) -> Result<f64> {
    let na = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    let nb = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
    if !(na > 0.0 && nb > 0.0) || !na.is_finite() || !nb.is_finite() {
        return Err(Error::invalid(format!("angle between {a:?} and {b:?} is undefined")));
    }
    // Symmetric in a and b, and |·| makes it sign-blind, before any rounding.
    let dot = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).abs() / (na * nb);
    Ok(dot.clamp(0.0, 1.0).acos().to_degrees())
}

/// Root mean square of the angles.
pub fn rmse(angles: &[f64]) -> Result<f64> {
    if angles.is_empty() {
        return Err(Error::invalid("RMSE of an empty angle list"));
    }
    Ok((angles.iter().map(|a| a * a).sum::<f64>() / angles.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub normal: Vec3,
    /// Index of the chosen radius for multi-scale estimators.
    pub selected_scale: Option<usize>,
}

/// Anything that maps evaluation points of a cloud to normals. `None`
/// entries mark points the estimator could not handle.
pub trait Estimator: Sync {
    fn name(&self) -> String;

    /// Number of scales a multi-scale estimator chooses from.
    fn num_scales(&self) -> Option<usize> {
        None
    }

    fn estimate(&self, cloud: &PointCloud, index: &SpatialIndex, centers: &[usize]) -> Result<Vec<Option<Estimate>>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Pca,
    Jet,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Pca => "pca",
            BaselineKind::Jet => "jet",
        }
    }
}

/// PCA or jet over the full radius neighbourhood of each point.
#[derive(Debug, Clone, Copy)]
pub struct BaselineEstimator {
    pub kind: BaselineKind,
    /// Fraction of the bounding-box diagonal.
    pub radius: f64,
}

impl Estimator for BaselineEstimator {
    fn name(&self) -> String {
        format!("{} r={}", self.kind.name(), self.radius)
    }

    fn estimate(&self, cloud: &PointCloud, index: &SpatialIndex, centers: &[usize]) -> Result<Vec<Option<Estimate>>> {
        let r = self.radius * cloud.bbox_diagonal();
        if !(r > 0.0) {
            return Err(Error::invalid(format!("radius {} gives an empty neighbourhood", self.radius)));
        }
        Ok(centers
            .iter()
            .map(|&c| {
                let center = cloud.points[c];
                let coords: Vec<Vec3> = index
                    .radius_query(center, r)
                    .into_iter()
                    .map(|i| {
                        let p = cloud.points[i];
                        [(p[0] - center[0]) / r, (p[1] - center[1]) / r, (p[2] - center[2]) / r]
                    })
                    .collect();
                let res = match self.kind {
                    BaselineKind::Pca => pca_normal(&coords),
                    BaselineKind::Jet => jet_normal(&coords),
                };
                // A jet that fell back to PCA still has a usable normal unless
                // the PCA frame itself is degenerate.
                let usable = match self.kind {
                    BaselineKind::Pca => res.condition == Condition::Ok,
                    BaselineKind::Jet => res.condition == Condition::Ok || pca_normal(&coords).condition == Condition::Ok,
                };
                usable.then_some(Estimate {
                    normal: res.normal,
                    selected_scale: None,
                })
            })
            .collect())
    }
}

/// Returns the ground-truth normals; its RMSE is zero by construction.
#[derive(Debug, Clone, Copy, Default)]
pub struct GroundTruthEstimator;

impl Estimator for GroundTruthEstimator {
    fn name(&self) -> String {
        "ground-truth".into()
    }

    fn estimate(&self, cloud: &PointCloud, _: &SpatialIndex, centers: &[usize]) -> Result<Vec<Option<Estimate>>> {
        let normals = cloud.normals.as_ref().ok_or_else(|| Error::invalid("cloud has no normals"))?;
        Ok(centers
            .iter()
            .map(|&c| {
                Some(Estimate {
                    normal: normals[c],
                    selected_scale: None,
                })
            })
            .collect())
    }
}

/// Batch size used for network inference.
pub const INFERENCE_BATCH: usize = 64;

fn patches_for(
    cloud: &PointCloud,
    index: &SpatialIndex,
    centers: &[usize],
    radius: f64,
    k: usize,
    seed: u64,
    scale: usize,
) -> Result<Vec<Option<Patch>>> {
    centers
        .iter()
        .map(|&c| match extract_patch(cloud, index, c, radius, k, derive_seed(seed, c as u64, scale as u64)) {
            Ok(p) => Ok(Some(p)),
            Err(Error::Degenerate(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect()
}

pub struct SingleScaleEstimator<'a> {
    pub model: &'a SingleScaleModel,
    pub radius: f64,
    pub k: usize,
    /// Seeds the patch subsampling.
    pub seed: u64,
}

impl Estimator for SingleScaleEstimator<'_> {
    fn name(&self) -> String {
        format!("net r={}", self.radius)
    }

    fn estimate(&self, cloud: &PointCloud, index: &SpatialIndex, centers: &[usize]) -> Result<Vec<Option<Estimate>>> {
        let mut out = Vec::with_capacity(centers.len());
        for chunk in centers.chunks(INFERENCE_BATCH) {
            let patches = patches_for(cloud, index, chunk, self.radius, self.k, self.seed, 0)?;
            let ok: Vec<&Patch> = patches.iter().flatten().collect();
            let mut preds = if ok.is_empty() { Vec::new() } else { self.model.predict(&ok)? }.into_iter();
            for p in &patches {
                out.push(p.as_ref().map(|_| {
                    let pred = preds.next().expect("one prediction per patch");
                    Estimate {
                        normal: pred.normal,
                        selected_scale: None,
                    }
                }));
            }
        }
        Ok(out)
    }
}

pub struct MultiScaleEstimator<'a> {
    pub model: &'a MultiScaleModel,
    pub k: usize,
    pub seed: u64,
}

impl Estimator for MultiScaleEstimator<'_> {
    fn name(&self) -> String {
        let radii: Vec<String> = self.model.radii().iter().map(|r| r.to_string()).collect();
        format!("net-multi r={}", radii.join("/"))
    }

    fn num_scales(&self) -> Option<usize> {
        Some(self.model.num_scales())
    }

    fn estimate(&self, cloud: &PointCloud, index: &SpatialIndex, centers: &[usize]) -> Result<Vec<Option<Estimate>>> {
        let mut out = Vec::with_capacity(centers.len());
        for chunk in centers.chunks(INFERENCE_BATCH) {
            let per_scale = self
                .model
                .radii()
                .iter()
                .enumerate()
                .map(|(s, &r)| patches_for(cloud, index, chunk, r, self.k, self.seed, s))
                .collect::<Result<Vec<_>>>()?;
            // A point is usable only if every scale produced a patch.
            let usable: Vec<bool> = (0..chunk.len()).map(|i| per_scale.iter().all(|ps| ps[i].is_some())).collect();
            let batches: Vec<Vec<&Patch>> = per_scale
                .iter()
                .map(|ps| ps.iter().zip(&usable).filter(|(_, &u)| u).map(|(p, _)| p.as_ref().unwrap()).collect())
                .collect();
            let mut preds = if batches[0].is_empty() { Vec::new() } else { self.model.predict(&batches)? }.into_iter();
            for &u in &usable {
                out.push(u.then(|| {
                    let pred = preds.next().expect("one prediction per usable point");
                    Estimate {
                        normal: pred.normal,
                        selected_scale: pred.selected_scale,
                    }
                }));
            }
        }
        Ok(out)
    }
}

/// Evaluation of one cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeEval {
    pub name: String,
    /// RMSE in degrees over the non-excluded points.
    pub rmse: f64,
    /// Evaluated point indices, aligned with `angles`.
    pub points: Vec<usize>,
    /// Angle error per evaluated point; `None` where the estimator failed.
    pub angles: Vec<Option<f64>>,
    pub excluded: usize,
    /// Count of points per selected scale (multi-scale estimators only).
    pub scale_histogram: Option<Vec<usize>>,
}

impl ShapeEval {
    pub fn evaluated(&self) -> usize {
        self.angles.len() - self.excluded
    }
}

/// Runs `estimator` on every evaluation point of `cloud` using up to
/// `workers` threads and scores it against the ground-truth normals.
pub fn evaluate(cloud: &PointCloud, estimator: &dyn Estimator, workers: usize) -> Result<ShapeEval> {
    let normals = cloud
        .normals
        .as_ref()
        .ok_or_else(|| Error::invalid(format!("cloud `{}` has no ground-truth normals", cloud.name)))?;
    let index = SpatialIndex::build(&cloud.points)?;
    let centers = cloud.eval_points();
    let workers = workers.max(1).min(centers.len().max(1));
    let chunk = centers.len().div_ceil(workers).max(1);
    let parts: Vec<Result<Vec<Option<Estimate>>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = centers
            .chunks(chunk)
            .map(|c| scope.spawn(|| estimator.estimate(cloud, &index, c)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("estimator thread panicked")).collect()
    });
    let mut estimates = Vec::with_capacity(centers.len());
    for p in parts {
        estimates.extend(p?);
    }
    if estimates.len() != centers.len() {
        return Err(Error::invalid(format!(
            "estimator returned {} results for {} points",
            estimates.len(),
            centers.len()
        )));
    }

    let mut scale_histogram = estimator.num_scales().map(|s| vec![0usize; s]);
    let mut angles = Vec::with_capacity(centers.len());
    for (&c, e) in centers.iter().zip(&estimates) {
        let angle = match e {
            Some(e) => match unoriented_angle(normals[c], e.normal) {
                Ok(a) => {
                    if let (Some(h), Some(s)) = (scale_histogram.as_mut(), e.selected_scale) {
                        h[s] += 1;
                    }
                    Some(a)
                }
                Err(_) => None,
            },
            None => None,
        };
        angles.push(angle);
    }
    let scored: Vec<f64> = angles.iter().flatten().copied().collect();
    if scored.is_empty() {
        return Err(Error::Degenerate(format!(
            "{} produced no usable normal on `{}`",
            estimator.name(),
            cloud.name
        )));
    }
    Ok(ShapeEval {
        name: cloud.name.clone(),
        rmse: rmse(&scored)?,
        excluded: angles.len() - scored.len(),
        points: centers,
        angles,
        scale_histogram,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryEval {
    pub name: String,
    pub shapes: Vec<ShapeEval>,
    /// Arithmetic mean of the shapes' RMSE values.
    pub mean_rmse: f64,
    pub scale_histogram: Option<Vec<usize>>,
}

/// Per-shape and per-category results of one estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub estimator: String,
    pub categories: Vec<CategoryEval>,
    /// Mean of the category means.
    pub overall_average: f64,
    pub scale_histogram: Option<Vec<usize>>,
}

fn sum_histograms<'a>(hs: impl Iterator<Item = Option<&'a Vec<usize>>>) -> Option<Vec<usize>> {
    let mut acc: Option<Vec<usize>> = None;
    for h in hs.flatten() {
        match acc.as_mut() {
            Some(a) => a.iter_mut().zip(h).for_each(|(x, y)| *x += y),
            None => acc = Some(h.clone()),
        }
    }
    acc
}

impl EvalReport {
    /// Aggregates already-evaluated shapes grouped by category.
    pub fn from_categories(estimator: impl Into<String>, groups: Vec<(String, Vec<ShapeEval>)>) -> Result<EvalReport> {
        if groups.is_empty() || groups.iter().any(|(_, s)| s.is_empty()) {
            return Err(Error::invalid("every category needs at least one evaluated shape"));
        }
        let categories: Vec<CategoryEval> = groups
            .into_iter()
            .map(|(name, shapes)| {
                let mean_rmse = shapes.iter().map(|s| s.rmse).sum::<f64>() / shapes.len() as f64;
                let scale_histogram = sum_histograms(shapes.iter().map(|s| s.scale_histogram.as_ref()));
                CategoryEval {
                    name,
                    shapes,
                    mean_rmse,
                    scale_histogram,
                }
            })
            .collect();
        let overall_average = categories.iter().map(|c| c.mean_rmse).sum::<f64>() / categories.len() as f64;
        let scale_histogram = sum_histograms(categories.iter().map(|c| c.scale_histogram.as_ref()));
        Ok(EvalReport {
            estimator: estimator.into(),
            categories,
            overall_average,
            scale_histogram,
        })
    }

    pub fn per_shape(&self) -> Vec<(&str, f64)> {
        self.categories
            .iter()
            .flat_map(|c| c.shapes.iter().map(|s| (s.name.as_str(), s.rmse)))
            .collect()
    }

    pub fn per_category(&self) -> Vec<(&str, f64)> {
        self.categories.iter().map(|c| (c.name.as_str(), c.mean_rmse)).collect()
    }

    pub fn excluded(&self) -> usize {
        self.categories.iter().flat_map(|c| &c.shapes).map(|s| s.excluded).sum()
    }

    /// Fraction of points per selected scale, per category.
    pub fn scale_fractions(&self) -> Vec<(&str, Vec<f64>)> {
        self.categories
            .iter()
            .filter_map(|c| {
                let h = c.scale_histogram.as_ref()?;
                let total = h.iter().sum::<usize>().max(1) as f64;
                Some((c.name.as_str(), h.iter().map(|&n| n as f64 / total).collect()))
            })
            .collect()
    }

    /// Aligned table: one row per category plus the average, then the
    /// exclusion count and any scale-selection shares.
    pub fn to_text(&self) -> String {
        format_table(std::slice::from_ref(self))
    }

    /// `kind,category,shape,estimator,rmse_deg,evaluated,excluded` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,category,shape,estimator,rmse_deg,evaluated,excluded\n");
        let est = &self.estimator;
        for c in &self.categories {
            for s in &c.shapes {
                let _ = writeln!(out, "shape,{},{},{est},{:?},{},{}", c.name, s.name, s.rmse, s.evaluated(), s.excluded);
            }
            let evaluated: usize = c.shapes.iter().map(|s| s.evaluated()).sum();
            let excluded: usize = c.shapes.iter().map(|s| s.excluded).sum();
            let _ = writeln!(out, "category,{},,{est},{:?},{evaluated},{excluded}", c.name, c.mean_rmse);
        }
        let evaluated: usize = self.categories.iter().flat_map(|c| &c.shapes).map(|s| s.evaluated()).sum();
        let _ = writeln!(out, "overall,,,{est},{:?},{evaluated},{}", self.overall_average, self.excluded());
        out
    }
}

/// Side-by-side table of several reports over the same categories.
pub fn format_table(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    let Some(first) = reports.first() else {
        return out;
    };
    let width = reports.iter().map(|r| r.estimator.len()).max().unwrap_or(0).max(10);
    let _ = write!(out, "{:<16}", "Category");
    for r in reports {
        let _ = write!(out, " {:>width$}", r.estimator);
    }
    out.push('\n');
    for (i, c) in first.categories.iter().enumerate() {
        let _ = write!(out, "{:<16}", c.name);
        for r in reports {
            match r.categories.get(i) {
                Some(rc) => {
                    let _ = write!(out, " {:>width$.2}", rc.mean_rmse);
                }
                None => {
                    let _ = write!(out, " {:>width$}", "-");
                }
            }
        }
        out.push('\n');
    }
    let _ = write!(out, "{:<16}", "Average");
    for r in reports {
        let _ = write!(out, " {:>width$.2}", r.overall_average);
    }
    out.push('\n');
    for r in reports {
        let _ = writeln!(out, "excluded points ({}): {}", r.estimator, r.excluded());
        for (cat, fr) in r.scale_fractions() {
            let parts: Vec<String> = fr.iter().enumerate().map(|(s, f)| format!("s{s} {:.1}%", 100.0 * f)).collect();
            let _ = writeln!(out, "scale selection ({cat}): {}", parts.join(", "));
        }
    }
    out
}

/// Evaluates every cloud of every category.
pub fn evaluate_categories(
    categories: &[(String, Vec<PointCloud>)],
    estimator: &dyn Estimator,
    workers: usize,
) -> Result<EvalReport> {
    let mut groups = Vec::with_capacity(categories.len());
    for (name, clouds) in categories {
        let shapes = clouds
            .iter()
            .map(|c| evaluate(c, estimator, workers))
            .collect::<Result<Vec<_>>>()?;
        groups.push((name.clone(), shapes));
    }
    EvalReport::from_categories(estimator.name(), groups)
}

/// Runs a baseline at every radius. Returns all reports and the index of
/// the one with the lowest overall average.
pub fn baseline_sweep(
    categories: &[(String, Vec<PointCloud>)],
    kind: BaselineKind,
    radii: &[f64],
    workers: usize,
) -> Result<(Vec<EvalReport>, usize)> {
    if radii.is_empty() {
        return Err(Error::invalid("radius sweep needs at least one radius"));
    }
    let reports = radii
        .iter()
        .map(|&radius| evaluate_categories(categories, &BaselineEstimator { kind, radius }, workers))
        .collect::<Result<Vec<_>>>()?;
    let best = (0..reports.len())
        .min_by(|&a, &b| reports[a].overall_average.total_cmp(&reports[b].overall_average))
        .unwrap();
    Ok((reports, best))
}

/// Test-split files of the PCPNet benchmark and their category names.
pub const PCPNET_TEST_SPLITS: [(&str, &str); 6] = [
    ("No Noise", "testset_no_noise.txt"),
    ("Small Noise", "testset_low_noise.txt"),
    ("Middle Noise", "testset_med_noise.txt"),
    ("Large Noise", "testset_high_noise.txt"),
    ("Gradient", "testset_vardensity_gradient.txt"),
    ("Stripes", "testset_vardensity_striped.txt"),
];

/// Loads the six test categories from a PCPNet-layout directory.
pub fn load_pcpnet_categories(root: impl AsRef<Path>) -> Result<Vec<(String, Vec<PointCloud>)>> {
    let root = root.as_ref();
    PCPNET_TEST_SPLITS
        .iter()
        .map(|(cat, file)| {
            let names = load_split(root.join(file))?;
            let clouds = names.iter().map(|n| load_cloud(root, n)).collect::<Result<Vec<_>>>()?;
            Ok((cat.to_string(), clouds))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_shape, ShapeKind};

    #[test]
    fn angle_cases() {
        let z = [0.0, 0.0, 1.0];
        assert_eq!(unoriented_angle(z, [0.0, 0.0, -1.0]).unwrap(), 0.0);
        assert_eq!(unoriented_angle(z, [0.0, 1.0, 0.0]).unwrap(), 90.0);
        let t = 10f64.to_radians();
        assert!((unoriented_angle(z, [0.0, t.sin(), t.cos()]).unwrap() - 10.0).abs() < 1e-9);
        assert!(unoriented_angle(z, [0.0; 3]).is_err());
        // Non-unit inputs are normalised internally.
        assert!((unoriented_angle([0.0, 0.0, 5.0], [0.0, 3.0, 3.0]).unwrap() - 45.0).abs() < 1e-9);
    }

    #[test]
    fn rmse_cases() {
        assert_eq!(rmse(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[7.5]).unwrap(), 7.5);
        assert!((rmse(&[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!(rmse(&[]).is_err());
    }

    #[test]
    fn ground_truth_scores_zero_and_pca_plane_is_exact() {
        let plane = gen_shape(ShapeKind::plane(), 2000, 1).unwrap();
        assert_eq!(evaluate(&plane, &GroundTruthEstimator, 2).unwrap().rmse, 0.0);
        let pca = BaselineEstimator {
            kind: BaselineKind::Pca,
            radius: 0.05,
        };
        let e = evaluate(&plane, &pca, 3).unwrap();
        assert!(e.rmse < 1e-6);
        assert_eq!(e.excluded, 0);
        assert_eq!(e.angles.len(), 2000);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let s = gen_shape(ShapeKind::sphere(), 1500, 2).unwrap();
        let jet = BaselineEstimator {
            kind: BaselineKind::Jet,
            radius: 0.08,
        };
        assert_eq!(evaluate(&s, &jet, 1).unwrap(), evaluate(&s, &jet, 4).unwrap());
    }

    #[test]
    fn category_means_and_csv() {
        let mk = |name: &str, rmse: f64| ShapeEval {
            name: name.into(),
            rmse,
            points: vec![0],
            angles: vec![Some(rmse)],
            excluded: 0,
            scale_histogram: Some(vec![1, 0]),
        };
        let r = EvalReport::from_categories(
            "x",
            vec![("A".into(), vec![mk("a1", 1.0), mk("a2", 3.0)]), ("B".into(), vec![mk("b1", 6.0)])],
        )
        .unwrap();
        assert_eq!(r.per_category(), vec![("A", 2.0), ("B", 6.0)]);
        assert_eq!(r.overall_average, 4.0);
        assert_eq!(r.scale_histogram, Some(vec![3, 0]));
        let csv = r.to_csv();
        assert!(csv.starts_with("kind,category,shape,estimator,rmse_deg,evaluated,excluded\n"));
        assert!(csv.contains("category,A,,x,2.0,2,0\n"));
        assert!(r.to_text().contains("Average"));
    }
}
