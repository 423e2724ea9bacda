use std::path::{Path, PathBuf};

use crate::baselines::{baseline_estimate, orient_output, Method};
use crate::cloud::io::{companion, read_curvatures, read_indices, read_vectors};
use crate::cloud::{Curvature, PatchSampler, PointCloud, SpatialIndex, SurfaceEstimate, Vec3};
use crate::error::{Error, Result};
use crate::network::{estimate_cloud, PcpModel};

/// Anything that produces per-point surface estimates for a test cloud.
pub trait Estimator: Sync {
    /// Method label used in reports.
    fn name(&self) -> String;

    /// Whether normal signs are meaningful; unoriented estimators are scored
    /// with the better of ±n.
    fn oriented(&self) -> bool;

    /// One entry per query; `None` marks a failed estimate.
    fn estimate(&self, cloud: &PointCloud, queries: &[usize], seed: u64) -> Result<Vec<Option<SurfaceEstimate>>>;
}

/// Returns the cloud's own ground truth.
#[derive(Debug, Clone, Copy, Default)]
pub struct GroundTruth;

impl Estimator for GroundTruth {
    fn name(&self) -> String {
        "gt".into()
    }

    fn oriented(&self) -> bool {
        true
    }

    fn estimate(&self, cloud: &PointCloud, queries: &[usize], _seed: u64) -> Result<Vec<Option<SurfaceEstimate>>> {
        Ok(queries
            .iter()
            .map(|&q| {
                Some(SurfaceEstimate {
                    normal: cloud.gt_normals.as_ref().map(|n| n[q]),
                    curvature: cloud.gt_curvatures.as_ref().map(|c| c[q]),
                })
            })
            .collect())
    }
}

/// Predicts the same normal everywhere.
#[derive(Debug, Clone, Copy)]
pub struct FixedNormal(pub Vec3);

impl Estimator for FixedNormal {
    fn name(&self) -> String {
        "fixed".into()
    }

    fn oriented(&self) -> bool {
        false
    }

    fn estimate(&self, _cloud: &PointCloud, queries: &[usize], _seed: u64) -> Result<Vec<Option<SurfaceEstimate>>> {
        let n = self.0.normalize();
        Ok(vec![Some(SurfaceEstimate { normal: Some(n), curvature: None }); queries.len()])
    }
}

/// PCA or jet fitting on k-NN neighborhoods, optionally MST-oriented.
#[derive(Debug, Clone)]
pub struct BaselineEstimator {
    pub method: Method,
    pub neighbors: usize,
    /// Neighbor count of the orientation graph, if orientation is requested.
    pub orient: Option<usize>,
    pub label: Option<String>,
}

impl Estimator for BaselineEstimator {
    fn name(&self) -> String {
        self.label.clone().unwrap_or_else(|| {
            let orient = if self.orient.is_some() { "_mst" } else { "" };
            format!("{}{}{orient}", self.method, self.neighbors)
        })
    }

    fn oriented(&self) -> bool {
        self.orient.is_some()
    }

    fn estimate(&self, cloud: &PointCloud, queries: &[usize], _seed: u64) -> Result<Vec<Option<SurfaceEstimate>>> {
        let index = SpatialIndex::build(cloud)?;
        let neighbors = self.neighbors.min(cloud.len());
        let mut output = baseline_estimate(cloud, &index, self.method, neighbors, queries)?;
        if let Some(k) = self.orient {
            orient_output(cloud, &mut output, k)?;
        }
        Ok(output.estimates)
    }
}

/// A trained network in 32-bit precision.
#[derive(Debug, Clone)]
pub struct ModelEstimator {
    pub model: PcpModel<f32>,
    pub label: String,
}

impl Estimator for ModelEstimator {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn oriented(&self) -> bool {
        self.model.config.output.oriented()
    }

    fn estimate(&self, cloud: &PointCloud, queries: &[usize], seed: u64) -> Result<Vec<Option<SurfaceEstimate>>> {
        let sampler = PatchSampler::new(cloud.clone())?;
        estimate_cloud(&self.model, &sampler, queries, seed)
    }
}

/// Predictions read from `dir/<stem>.normals` and `dir/<stem>.curv`.
///
/// A file with one row per cloud point is indexed directly; otherwise rows
/// must align with `dir/<stem>.pidx`. Rows containing NaN are failures.
#[derive(Debug, Clone)]
pub struct Precomputed {
    pub dir: PathBuf,
    pub label: String,
    pub oriented: bool,
}

impl Precomputed {
    fn lookup(&self, stem: &str, rows: usize, n: usize) -> Result<Option<Vec<usize>>> {
        if rows == n {
            return Ok(None);
        }
        let pidx_path = companion(&self.dir, stem, "pidx");
        if !pidx_path.exists() {
            return Err(Error::ShapeMismatch(format!(
                "{} prediction rows for `{stem}` with {n} points and no {}",
                rows,
                pidx_path.display()
            )));
        }
        let pidx = read_indices(&pidx_path)?;
        if pidx.len() != rows {
            return Err(Error::ShapeMismatch(format!("{rows} prediction rows for {} indices in {}", pidx.len(), pidx_path.display())));
        }
        let mut slot = vec![usize::MAX; n];
        for (row, &i) in pidx.iter().enumerate() {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            slot[i] = row;
        }
        Ok(Some(slot))
    }

    fn read_optional<T>(&self, path: &Path, read: fn(&Path) -> Result<Vec<T>>) -> Result<Option<Vec<T>>> {
        if path.exists() {
            read(path).map(Some)
        } else {
            Ok(None)
        }
    }
}

impl Estimator for Precomputed {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn oriented(&self) -> bool {
        self.oriented
    }

    fn estimate(&self, cloud: &PointCloud, queries: &[usize], _seed: u64) -> Result<Vec<Option<SurfaceEstimate>>> {
        let stem = &cloud.name;
        let normals = self.read_optional(&companion(&self.dir, stem, "normals"), read_vectors)?;
        let curvatures = self.read_optional(&companion(&self.dir, stem, "curv"), read_curvatures)?;
        if normals.is_none() && curvatures.is_none() {
            return Err(Error::MissingFile(companion(&self.dir, stem, "normals")));
        }
        let n = cloud.len();
        let normal_slots = match &normals {
            Some(v) => self.lookup(stem, v.len(), n)?,
            None => None,
        };
        let curvature_slots = match &curvatures {
            Some(v) => self.lookup(stem, v.len(), n)?,
            None => None,
        };
        let row = |slots: &Option<Vec<usize>>, q: usize| -> Result<usize> {
            match slots {
                None => Ok(q),
                Some(s) if s[q] != usize::MAX => Ok(s[q]),
                Some(_) => Err(Error::InvalidArgument(format!("no precomputed prediction for point {q} of `{stem}`"))),
            }
        };
        queries
            .iter()
            .map(|&q| {
                if q >= n {
                    return Err(Error::IndexOutOfRange { index: q, len: n });
                }
                let normal = match &normals {
                    Some(v) => Some(v[row(&normal_slots, q)?]).filter(|n: &Vec3| n.iter().all(|x| x.is_finite())),
                    None => None,
                };
                let curvature = match &curvatures {
                    Some(v) => Some(v[row(&curvature_slots, q)?]).filter(|c: &Curvature| c.k1.is_finite() && c.k2.is_finite()),
                    None => None,
                };
                let failed = (normals.is_some() && normal.is_none()) || (curvatures.is_some() && curvature.is_none());
                Ok((!failed).then_some(SurfaceEstimate { normal, curvature }))
            })
            .collect()
    }
}
