//! Local surface property estimation for point clouds.
//!
//! The crate bundles a patch-based neural estimator for normals and principal
//! curvatures (single- and multi-scale), the classical PCA / jet-fitting /
//! MST-orientation baselines, labeled dataset generation from meshes and
//! analytic surfaces, and an evaluation harness that writes CSV/SVG reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cli;
pub mod cloud;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod network;
pub mod training;

pub use cloud::{bbox_diagonal, extract_patch, Curvature, Patch, PatchSampler, PointCloud, SpatialIndex, SurfaceEstimate, Vec3};
pub use error::{Error, Result};
