//! Classical comparison estimators: PCA normals, osculating jets and MST
//! normal orientation.

mod jet;
mod orient;
mod pca;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use jet::{coefficient_count, jet_fit, JetFit};
pub use orient::{minimum_spanning_forest, mst_orient, riemannian_graph, OrientationResult, WeightedEdge, EDGE_EPSILON};
pub use pca::{canonical_sign, pca_normal};

use crate::cloud::{PointCloud, SpatialIndex, SurfaceEstimate, Vec3};
use crate::error::{Error, Result};

/// Jet degree used for all comparisons.
pub const JET_DEGREE: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pca,
    Jet,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Pca => "pca",
            Method::Jet => "jet",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pca" => Ok(Method::Pca),
            "jet" => Ok(Method::Jet),
            _ => Err(Error::InvalidArgument(format!("unknown method `{s}` (expected pca or jet)"))),
        }
    }
}

/// Named neighborhood sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Small,
    Medium,
    Large,
}

impl Scale {
    pub fn neighbors(self) -> usize {
        match self {
            Scale::Small => 18,
            Scale::Medium => 112,
            Scale::Large => 450,
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Small => "small",
            Scale::Medium => "medium",
            Scale::Large => "large",
        })
    }
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small" => Ok(Scale::Small),
            "medium" => Ok(Scale::Medium),
            "large" => Ok(Scale::Large),
            _ => Err(Error::InvalidArgument(format!("unknown scale `{s}` (expected small, medium or large)"))),
        }
    }
}

/// Per-query baseline results; failed fits are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineOutput {
    pub method: Method,
    pub neighbors: usize,
    pub queries: Vec<usize>,
    pub estimates: Vec<Option<SurfaceEstimate>>,
    pub failures: usize,
}

/// Estimates one point from its neighborhood (query point first).
pub fn estimate_point(method: Method, neighbors: &[Vec3]) -> Result<SurfaceEstimate> {
    match method {
        Method::Pca => Ok(SurfaceEstimate { normal: Some(pca_normal(neighbors)?), curvature: None }),
        Method::Jet => {
            let fit = jet_fit(neighbors, JET_DEGREE)?;
            Ok(SurfaceEstimate { normal: Some(fit.normal), curvature: Some(fit.curvature) })
        }
    }
}

/// Runs `method` on the `neighbors`-NN neighborhood of every query point.
/// Per-point failures are counted, not propagated. Queries are processed in
/// parallel on the current rayon pool; results keep query order.
pub fn baseline_estimate(
    cloud: &PointCloud,
    index: &SpatialIndex,
    method: Method,
    neighbors: usize,
    queries: &[usize],
) -> Result<BaselineOutput> {
    if neighbors == 0 || neighbors > cloud.len() {
        return Err(Error::InvalidArgument(format!(
            "neighbor count {neighbors} out of range for a cloud of {} points",
            cloud.len()
        )));
    }
    if let Some(&q) = queries.iter().find(|&&q| q >= cloud.len()) {
        return Err(Error::IndexOutOfRange { index: q, len: cloud.len() });
    }
    let estimates: Vec<Option<SurfaceEstimate>> = queries
        .par_iter()
        .map(|&q| {
            let center = cloud.points[q];
            let mut idx = index.knn_query(&center, neighbors).ok()?;
            // The query point goes first; k-NN ties could otherwise put a
            // coincident duplicate ahead of it.
            if let Some(pos) = idx.iter().position(|&i| i == q) {
                idx.swap(0, pos);
            } else {
                idx.insert(0, q);
                idx.pop();
            }
            let pts: Vec<Vec3> = idx.iter().map(|&i| cloud.points[i]).collect();
            estimate_point(method, &pts).ok()
        })
        .collect();
    let failures = estimates.iter().filter(|e| e.is_none()).count();
    Ok(BaselineOutput {
        method,
        neighbors,
        queries: queries.to_vec(),
        estimates,
        failures,
    })
}

/// Orients the successful estimates of `output` by MST propagation over their
/// query positions. Flipping an estimate also flips its curvature signs.
/// Returns the number of connected components.
pub fn orient_output(cloud: &PointCloud, output: &mut BaselineOutput, k: usize) -> Result<usize> {
    let ok: Vec<usize> = (0..output.estimates.len()).filter(|&i| output.estimates[i].is_some_and(|e| e.normal.is_some())).collect();
    if ok.is_empty() {
        return Ok(0);
    }
    let points: Vec<Vec3> = ok.iter().map(|&i| cloud.points[output.queries[i]]).collect();
    let normals: Vec<Vec3> = ok.iter().map(|&i| output.estimates[i].unwrap().normal.unwrap()).collect();
    let result = mst_orient(&points, &normals, k)?;
    for (&i, &flip) in ok.iter().zip(&result.flipped) {
        if flip {
            output.estimates[i] = output.estimates[i].map(SurfaceEstimate::flipped);
        }
    }
    Ok(result.components)
}

/// Run description written next to baseline outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSidecar {
    pub method: Method,
    pub scale: Option<Scale>,
    pub neighbors: usize,
    pub queries: usize,
    pub failures: usize,
    pub oriented: bool,
    pub components: Option<usize>,
}
