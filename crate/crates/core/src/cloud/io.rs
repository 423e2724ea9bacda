//! Plain-text point-cloud files.
//!
//! A cloud named `stem` is stored as `stem.xyz` (three floats per line) with
//! optional companions `stem.normals` (three floats), `stem.curv` (`k1 k2`) and
//! `stem.pidx` (one point index per line). Floats are written with 8
//! significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{Curvature, PointCloud, Vec3};
use crate::error::{Error, Result};

fn read_text(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn parse_rows<const N: usize>(path: &Path) -> Result<Vec<[f64; N]>> {
    let text = read_text(path)?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut row = [0.0; N];
        let mut fields = line.split_whitespace();
        for slot in row.iter_mut() {
            let field = fields
                .next()
                .ok_or_else(|| Error::parse(path, lineno + 1, format!("expected {N} values")))?;
            *slot = field
                .parse()
                .map_err(|_| Error::parse(path, lineno + 1, format!("bad number `{field}`")))?;
        }
        if fields.next().is_some() {
            return Err(Error::parse(path, lineno + 1, format!("expected {N} values")));
        }
        rows.push(row);
    }
    Ok(rows)
}

fn format_rows<const N: usize>(rows: impl Iterator<Item = [f64; N]>) -> String {
    let mut out = String::new();
    for row in rows {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{v:.7e}");
        }
        out.push('\n');
    }
    out
}

pub fn read_vectors(path: &Path) -> Result<Vec<Vec3>> {
    Ok(parse_rows::<3>(path)?
        .into_iter()
        .map(|[x, y, z]| Vec3::new(x, y, z))
        .collect())
}

pub fn write_vectors(path: &Path, vectors: &[Vec3]) -> Result<()> {
    write_text(path, &format_rows(vectors.iter().map(|v| [v.x, v.y, v.z])))
}

/// Reads `k1 k2` pairs, reordering each so that `k1 >= k2`.
pub fn read_curvatures(path: &Path) -> Result<Vec<Curvature>> {
    Ok(parse_rows::<2>(path)?
        .into_iter()
        .map(|[a, b]| Curvature::sorted(a, b))
        .collect())
}

pub fn write_curvatures(path: &Path, curvatures: &[Curvature]) -> Result<()> {
    write_text(path, &format_rows(curvatures.iter().map(|c| [c.k1, c.k2])))
}

pub fn read_indices(path: &Path) -> Result<Vec<usize>> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            l.trim()
                .parse()
                .map_err(|_| Error::parse(path, n + 1, format!("bad index `{}`", l.trim())))
        })
        .collect()
}

pub fn write_indices(path: &Path, indices: &[usize]) -> Result<()> {
    let mut out = String::new();
    for i in indices {
        let _ = writeln!(out, "{i}");
    }
    write_text(path, &out)
}

pub fn companion(dir: &Path, stem: &str, ext: &str) -> PathBuf {
    dir.join(format!("{stem}.{ext}"))
}

/// Loads `dir/stem.xyz` and, when requested, its `.normals` / `.curv` companions.
pub fn read_cloud(dir: &Path, stem: &str, normals: bool, curvatures: bool) -> Result<PointCloud> {
    let points = read_vectors(&companion(dir, stem, "xyz"))?;
    let mut cloud = PointCloud::new(stem, points);
    if normals {
        cloud = cloud.with_normals(read_vectors(&companion(dir, stem, "normals"))?)?;
    }
    if curvatures {
        cloud = cloud.with_curvatures(read_curvatures(&companion(dir, stem, "curv"))?)?;
    }
    Ok(cloud)
}

/// Writes `dir/<name>.xyz` plus a companion for every ground-truth attribute present.
pub fn write_cloud(dir: &Path, cloud: &PointCloud) -> Result<()> {
    write_vectors(&companion(dir, &cloud.name, "xyz"), &cloud.points)?;
    if let Some(n) = &cloud.gt_normals {
        write_vectors(&companion(dir, &cloud.name, "normals"), n)?;
    }
    if let Some(c) = &cloud.gt_curvatures {
        write_curvatures(&companion(dir, &cloud.name, "curv"), c)?;
    }
    Ok(())
}
