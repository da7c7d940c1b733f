//! PCPNet text layout: `<name>.xyz` and `<name>.normals` hold one
//! whitespace-separated `x y z` row per point, `<name>.pidx` one integer
//! point index per line, and split files one shape name per line.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{PointCloud, Vec3};
use crate::error::{Error, Result};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Non-blank lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

pub(crate) fn parse_vec3_rows(path: &Path, text: &str) -> Result<Vec<Vec3>> {
    let mut rows = Vec::new();
    for (line, l) in content_lines(text) {
        let mut row = [0.0; 3];
        let mut toks = l.split_whitespace();
        for slot in row.iter_mut() {
            let tok = toks.next().ok_or_else(|| parse_err(path, line, "expected 3 values"))?;
            *slot = tok
                .parse()
                .map_err(|_| parse_err(path, line, format!("non-numeric token `{tok}`")))?;
        }
        if toks.next().is_some() {
            return Err(parse_err(path, line, "expected 3 values"));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(path, 1, "empty file"));
    }
    Ok(rows)
}

/// Loads positions; the cloud is named after the file stem.
pub fn load_xyz(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let points = parse_vec3_rows(path, &read(path)?)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(PointCloud::new(name, points))
}

pub fn load_normals(path: impl AsRef<Path>, cloud: PointCloud) -> Result<PointCloud> {
    let path = path.as_ref();
    let normals = parse_vec3_rows(path, &read(path)?)?;
    if normals.len() != cloud.len() {
        return Err(parse_err(
            path,
            normals.len(),
            format!("{} normals for {} points", normals.len(), cloud.len()),
        ));
    }
    cloud.with_normals(normals).map_err(|e| parse_err(path, 0, e.to_string()))
}

pub fn load_pidx(path: impl AsRef<Path>, cloud: PointCloud) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = read(path)?;
    let mut indices = Vec::new();
    for (line, l) in content_lines(&text) {
        let idx: usize = l
            .parse()
            .map_err(|_| parse_err(path, line, format!("non-integer index `{l}`")))?;
        if idx >= cloud.len() {
            return Err(parse_err(path, line, format!("index {idx} out of range for {} points", cloud.len())));
        }
        indices.push(idx);
    }
    if indices.is_empty() {
        return Err(parse_err(path, 1, "empty file"));
    }
    cloud.with_eval_indices(indices)
}

pub fn load_split(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let names: Vec<String> = content_lines(&read(path)?).map(|(_, l)| l.to_string()).collect();
    if names.is_empty() {
        return Err(parse_err(path, 1, "empty file"));
    }
    Ok(names)
}

/// Loads `<root>/<name>.xyz` plus `.normals` and `.pidx` when present.
pub fn load_cloud(root: impl AsRef<Path>, name: &str) -> Result<PointCloud> {
    let root = root.as_ref();
    let mut cloud = load_xyz(root.join(format!("{name}.xyz")))?;
    cloud.name = name.to_string();
    let normals = root.join(format!("{name}.normals"));
    if normals.exists() {
        cloud = load_normals(normals, cloud)?;
    }
    let pidx = root.join(format!("{name}.pidx"));
    if pidx.exists() {
        cloud = load_pidx(pidx, cloud)?;
    }
    Ok(cloud)
}

pub(crate) fn format_rows(rows: &[Vec3]) -> String {
    let mut s = String::with_capacity(rows.len() * 48);
    for r in rows {
        let _ = writeln!(s, "{:?} {:?} {:?}", r[0], r[1], r[2]);
    }
    s
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `.xyz` (and `.normals` / `.pidx` when present) next to `xyz_path`,
/// returning the paths written. Values are printed in shortest round-trip form.
pub fn save_cloud(cloud: &PointCloud, xyz_path: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let xyz_path = xyz_path.as_ref();
    let mut written = vec![xyz_path.to_path_buf()];
    write(xyz_path, &format_rows(&cloud.points))?;
    if let Some(normals) = &cloud.normals {
        let p = xyz_path.with_extension("normals");
        write(&p, &format_rows(normals))?;
        written.push(p);
    }
    if let Some(idx) = &cloud.eval_indices {
        let p = xyz_path.with_extension("pidx");
        let mut s = String::new();
        for i in idx {
            let _ = writeln!(s, "{i}");
        }
        write(&p, &s)?;
        written.push(p);
    }
    Ok(written)
}
