use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What the regression head predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputSpec {
    UnorientedNormal,
    OrientedNormal,
    Curvature,
    /// Unoriented normal followed by the two principal curvatures.
    Joint,
}

impl OutputSpec {
    pub fn dim(self) -> usize {
        match self {
            OutputSpec::UnorientedNormal | OutputSpec::OrientedNormal => 3,
            OutputSpec::Curvature => 2,
            OutputSpec::Joint => 5,
        }
    }

    pub fn has_normal(self) -> bool {
        !matches!(self, OutputSpec::Curvature)
    }

    pub fn has_curvature(self) -> bool {
        matches!(self, OutputSpec::Curvature | OutputSpec::Joint)
    }

    pub fn oriented(self) -> bool {
        matches!(self, OutputSpec::OrientedNormal)
    }

    /// Offset of the curvature pair inside the raw output vector.
    pub fn curvature_offset(self) -> Option<usize> {
        match self {
            OutputSpec::Curvature => Some(0),
            OutputSpec::Joint => Some(3),
            _ => None,
        }
    }
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub output: OutputSpec,
    /// Patch radii as fractions of the bounding-box diagonal.
    pub scales: Vec<f64>,
    pub n_points: usize,
    /// Number of point functions `k`.
    pub point_functions: usize,
    /// Per-point feature stack before the feature transform; the last width
    /// is the feature dimension.
    pub feature_widths: Vec<usize>,
    /// Hidden widths of the point-function stack between features and `k`.
    pub point_function_hidden: Vec<usize>,
    /// Per-point encoder widths used by both spatial transformers.
    pub stn_encoder: Vec<usize>,
    /// Hidden widths of the pooled regressors inside the spatial transformers.
    pub stn_head: Vec<usize>,
    /// Hidden widths of the final regression stack.
    pub regressor_hidden: Vec<usize>,
    pub use_point_stn: bool,
    pub use_feature_stn: bool,
}

impl ModelConfig {
    pub fn single_scale(output: OutputSpec) -> Self {
        ModelConfig {
            output,
            scales: vec![0.05],
            n_points: 500,
            point_functions: 1024,
            feature_widths: vec![64, 64],
            point_function_hidden: vec![128],
            stn_encoder: vec![64, 128, 1024],
            stn_head: vec![512, 256],
            regressor_hidden: vec![512, 256],
            use_point_stn: true,
            use_feature_stn: true,
        }
    }

    pub fn multi_scale(output: OutputSpec) -> Self {
        ModelConfig {
            scales: vec![0.01, 0.03, 0.07],
            point_functions: 3072,
            ..Self::single_scale(output)
        }
    }

    /// Down-scaled network with every layer type, for gradient checks.
    pub fn tiny(output: OutputSpec) -> Self {
        ModelConfig {
            output,
            scales: vec![0.05],
            n_points: 6,
            point_functions: 8,
            feature_widths: vec![5, 4],
            point_function_hidden: vec![6],
            stn_encoder: vec![5, 7, 6],
            stn_head: vec![5, 4],
            regressor_hidden: vec![7, 5],
            use_point_stn: true,
            use_feature_stn: true,
        }
    }

    pub fn feature_dim(&self) -> usize {
        *self.feature_widths.last().unwrap()
    }

    pub fn pooled_dim(&self) -> usize {
        self.point_functions * self.scales.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.scales.len();
        if n != 1 && n != 3 {
            return Err(Error::Config(format!("expected 1 or 3 scales, got {n}")));
        }
        if self.scales.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("scales must be positive".into()));
        }
        if self.point_functions == 0 || !self.point_functions.is_multiple_of(n) {
            return Err(Error::Config(format!(
                "point function count {} not divisible by {n} scales",
                self.point_functions
            )));
        }
        if self.n_points == 0 || self.feature_widths.is_empty() || self.stn_encoder.is_empty() {
            return Err(Error::Config("empty layer stack".into()));
        }
        let widths = [
            &self.feature_widths,
            &self.point_function_hidden,
            &self.stn_encoder,
            &self.stn_head,
            &self.regressor_hidden,
        ];
        if widths.iter().any(|w| w.contains(&0)) {
            return Err(Error::Config("zero layer width".into()));
        }
        Ok(())
    }

    /// Radius whose inverse rescales curvature outputs: the largest patch radius.
    pub fn curvature_scale(&self) -> f64 {
        self.scales.iter().cloned().fold(0.0, f64::max)
    }
}
