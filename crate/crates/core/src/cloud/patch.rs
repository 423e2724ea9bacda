use rand::seq::index::sample;
use rand::Rng;

use super::{PointCloud, SpatialIndex, Vec3};
use crate::error::{Error, Result};

/// A fixed-size local neighborhood, translated to its center and scaled by `1/r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub center_index: usize,
    /// Patch radius in world units.
    pub radius_abs: f64,
    /// Exactly `n_points` entries; everything past `valid_count` is zero.
    pub points: Vec<Vec3>,
    pub valid_count: usize,
    /// Cloud indices of the first `valid_count` entries.
    pub source_indices: Vec<usize>,
}

impl Patch {
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn valid_points(&self) -> &[Vec3] {
        &self.points[..self.valid_count]
    }
}

/// Gathers the points within `radius` of the center point, normalizes them,
/// and pads or randomly subsamples to `n_points` entries. The center point is
/// always kept.
pub fn extract_patch<R: Rng + ?Sized>(
    cloud: &PointCloud,
    index: &SpatialIndex,
    center_index: usize,
    radius: f64,
    n_points: usize,
    rng: &mut R,
) -> Result<Patch> {
    if center_index >= cloud.len() {
        return Err(Error::IndexOutOfRange {
            index: center_index,
            len: cloud.len(),
        });
    }
    if n_points == 0 {
        return Err(Error::InvalidArgument("n_points must be at least 1".into()));
    }
    let center = cloud.points[center_index];
    let mut members = index.radius_query(&center, radius)?;
    members.retain(|&i| i != center_index);
    members.sort_unstable();

    let mut chosen = Vec::with_capacity(n_points.min(members.len() + 1));
    chosen.push(center_index);
    if members.len() + 1 > n_points {
        chosen.extend(
            sample(rng, members.len(), n_points - 1)
                .into_iter()
                .map(|j| members[j]),
        );
    } else {
        chosen.extend_from_slice(&members);
    }

    let inv_r = 1.0 / radius;
    let mut points: Vec<Vec3> = chosen
        .iter()
        .map(|&i| (cloud.points[i] - center) * inv_r)
        .collect();
    let valid_count = points.len();
    points.resize(n_points, Vec3::zeros());
    Ok(Patch {
        center_index,
        radius_abs: radius,
        points,
        valid_count,
        source_indices: chosen,
    })
}

/// A cloud with its spatial index and reference length, ready for repeated
/// multi-scale patch extraction.
#[derive(Debug, Clone)]
pub struct PatchSampler {
    pub cloud: PointCloud,
    pub index: SpatialIndex,
    /// Bounding-box diagonal; patch radii are fractions of it.
    pub diagonal: f64,
}

impl PatchSampler {
    pub fn new(cloud: PointCloud) -> Result<Self> {
        let diagonal = super::bbox_diagonal(&cloud)?;
        if !(diagonal > 0.0) {
            return Err(Error::InvalidArgument(format!("cloud `{}` has a degenerate bounding box", cloud.name)));
        }
        let index = SpatialIndex::build(&cloud)?;
        Ok(PatchSampler { cloud, index, diagonal })
    }

    /// World-unit radius of the largest scale; curvature outputs are
    /// expressed relative to it.
    pub fn reference_radius(&self, scales: &[f64]) -> f64 {
        scales.iter().copied().fold(0.0, f64::max) * self.diagonal
    }

    /// One patch per scale around `center_index`.
    pub fn patch_set<R: Rng + ?Sized>(&self, center_index: usize, scales: &[f64], n_points: usize, rng: &mut R) -> Result<Vec<Patch>> {
        scales
            .iter()
            .map(|s| extract_patch(&self.cloud, &self.index, center_index, s * self.diagonal, n_points, rng))
            .collect()
    }
}
