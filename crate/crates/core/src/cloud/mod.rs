//! Point clouds, spatial queries, and patch extraction.

mod index;
pub mod io;
mod patch;

pub use index::SpatialIndex;
pub use patch::{extract_patch, Patch, PatchSampler};

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Principal curvature pair with `k1 >= k2`.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct Curvature {
    pub k1: f64,
    pub k2: f64,
}

impl Curvature {
    /// Builds a pair, reordering so that `k1 >= k2`.
    pub fn sorted(a: f64, b: f64) -> Self {
        if a >= b {
            Curvature { k1: a, k2: b }
        } else {
            Curvature { k1: b, k2: a }
        }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Curvature::sorted(self.k1 * factor, self.k2 * factor)
    }
}

/// Per-point surface estimate in world units. Curvatures are signed with
/// respect to `normal`: positive where the surface bends away from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceEstimate {
    pub normal: Option<Vec3>,
    pub curvature: Option<Curvature>,
}

impl SurfaceEstimate {
    /// The same surface described with the opposite normal: the normal is
    /// negated and the principal curvatures become `(−κ2, −κ1)`.
    pub fn flipped(self) -> Self {
        SurfaceEstimate {
            normal: self.normal.map(|n| -n),
            curvature: self.curvature.map(|c| Curvature { k1: -c.k2, k2: -c.k1 }),
        }
    }
}

/// A point cloud with optional per-point ground truth.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub name: String,
    pub points: Vec<Vec3>,
    pub gt_normals: Option<Vec<Vec3>>,
    pub gt_curvatures: Option<Vec<Curvature>>,
}

impl PointCloud {
    pub fn new(name: impl Into<String>, points: Vec<Vec3>) -> Self {
        PointCloud {
            name: name.into(),
            points,
            gt_normals: None,
            gt_curvatures: None,
        }
    }

    pub fn with_normals(mut self, normals: Vec<Vec3>) -> Result<Self> {
        if normals.len() != self.points.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} normals for {} points",
                normals.len(),
                self.points.len()
            )));
        }
        self.gt_normals = Some(normals);
        Ok(self)
    }

    pub fn with_curvatures(mut self, curvatures: Vec<Curvature>) -> Result<Self> {
        if curvatures.len() != self.points.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} curvatures for {} points",
                curvatures.len(),
                self.points.len()
            )));
        }
        self.gt_curvatures = Some(curvatures);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Checks the attribute invariants: matching lengths, unit normals, `k1 >= k2`.
    pub fn validate(&self) -> Result<()> {
        if let Some(normals) = &self.gt_normals {
            if normals.len() != self.len() {
                return Err(Error::ShapeMismatch("normal count differs from point count".into()));
            }
            if let Some(i) = normals.iter().position(|n| (n.norm() - 1.0).abs() > 1e-6) {
                return Err(Error::InvalidArgument(format!("normal {i} is not unit length")));
            }
        }
        if let Some(curv) = &self.gt_curvatures {
            if curv.len() != self.len() {
                return Err(Error::ShapeMismatch(
                    "curvature count differs from point count".into(),
                ));
            }
            if let Some(i) = curv.iter().position(|c| c.k1 < c.k2) {
                return Err(Error::InvalidArgument(format!("curvature {i} has k1 < k2")));
            }
        }
        Ok(())
    }

    /// Keeps the points at `indices`, carrying ground truth along.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            name: self.name.clone(),
            points: indices.iter().map(|&i| self.points[i]).collect(),
            gt_normals: self
                .gt_normals
                .as_ref()
                .map(|n| indices.iter().map(|&i| n[i]).collect()),
            gt_curvatures: self
                .gt_curvatures
                .as_ref()
                .map(|c| indices.iter().map(|&i| c[i]).collect()),
        }
    }

    pub fn bbox(&self) -> Result<(Vec3, Vec3)> {
        let first = *self.points.first().ok_or(Error::EmptyCloud)?;
        Ok(self.points.iter().fold((first, first), |(lo, hi), p| {
            (lo.inf(p), hi.sup(p))
        }))
    }
}

/// Length of the axis-aligned bounding-box diagonal. This is the reference
/// length for every relative radius and noise level in the crate.
pub fn bbox_diagonal(cloud: &PointCloud) -> Result<f64> {
    let (lo, hi) = cloud.bbox()?;
    Ok((hi - lo).norm())
}
