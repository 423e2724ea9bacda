use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::layers::{Mlp, MlpTrace};
use super::quaternion::{identity, quaternion_backward, unit_quaternion_matrix, Mat3};
use super::tensor::{mm_nn, mm_nt, mm_tn, Real, Tensor};
use crate::cloud::Patch;
use crate::error::{Error, Result};

/// Spatial transformer regressing a rotation as a quaternion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuaternionStn<T> {
    pub encoder: Mlp<T>,
    pub head: Mlp<T>,
}

/// Spatial transformer regressing a `d×d` feature transform added to identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStn<T> {
    pub dim: usize,
    pub encoder: Mlp<T>,
    pub head: Mlp<T>,
}

/// All learnable parameters of a single- or multi-scale network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcpModel<T> {
    pub config: ModelConfig,
    pub point_stn: Option<QuaternionStn<T>>,
    pub features: Mlp<T>,
    pub feature_stn: Option<FeatureStn<T>>,
    pub point_functions: Mlp<T>,
    pub regressor: Mlp<T>,
}

/// Network input for one query point: one point list per scale.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchInput<T> {
    pub scales: Vec<Vec<[T; 3]>>,
}

impl<T: Real> PatchInput<T> {
    pub fn from_patches(patches: &[Patch]) -> Self {
        PatchInput {
            scales: patches
                .iter()
                .map(|p| {
                    p.points
                        .iter()
                        .map(|v| [T::from_f64(v.x), T::from_f64(v.y), T::from_f64(v.z)])
                        .collect()
                })
                .collect(),
        }
    }

    pub fn from_points(scales: Vec<Vec<[f64; 3]>>) -> Self {
        PatchInput {
            scales: scales
                .into_iter()
                .map(|s| s.into_iter().map(|p| p.map(T::from_f64)).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
struct PointStnCache<T> {
    encoder: MlpTrace<T>,
    head: MlpTrace<T>,
    q_raw: [T; 4],
}

#[derive(Debug, Clone)]
struct FeatureStnCache<T> {
    encoder: MlpTrace<T>,
    head: MlpTrace<T>,
    transform: Vec<T>,
    features: Vec<T>,
}

/// Intermediate values of one forward pass for one patch set.
///
/// Padding entries (exact zero vectors) of each scale are collapsed into one
/// row carrying their multiplicity; every per-point function gives identical
/// values on identical inputs, so pooled sums are unchanged.
#[derive(Debug, Clone)]
pub struct SampleCache<T> {
    rows: usize,
    weights: Vec<T>,
    segments: Vec<(usize, usize)>,
    input: Vec<T>,
    point_stn: Option<PointStnCache<T>>,
    rotation: Mat3<T>,
    features: MlpTrace<T>,
    feature_stn: Option<FeatureStnCache<T>>,
    point_functions: MlpTrace<T>,
    regressor: MlpTrace<T>,
}

impl<T: Real> SampleCache<T> {
    /// Rotation applied by the point transformer (`identity` when disabled).
    pub fn rotation(&self) -> &Mat3<T> {
        &self.rotation
    }

    /// Concatenated per-scale sums of the point functions.
    pub fn pooled(&self) -> &[T] {
        &self.regressor.input
    }

    pub fn outputs(&self) -> &[T] {
        self.regressor.output()
    }

    /// Sign pattern of every ReLU layer; identical patterns mean the same
    /// piecewise-linear region.
    pub fn relu_pattern(&self) -> Vec<bool> {
        let mut traces: Vec<(&MlpTrace<T>, usize, bool)> = Vec::new();
        if let Some(p) = &self.point_stn {
            traces.push((&p.encoder, p.encoder.outputs.len(), true));
            traces.push((&p.head, p.head.outputs.len(), false));
        }
        traces.push((&self.features, self.features.outputs.len(), true));
        if let Some(f) = &self.feature_stn {
            traces.push((&f.encoder, f.encoder.outputs.len(), true));
            traces.push((&f.head, f.head.outputs.len(), false));
        }
        traces.push((&self.point_functions, self.point_functions.outputs.len(), true));
        traces.push((&self.regressor, self.regressor.outputs.len(), false));
        let mut out = Vec::new();
        for (trace, layers, relu_last) in traces {
            let relu_layers = if relu_last { layers } else { layers - 1 };
            for l in 0..relu_layers {
                out.extend(trace.outputs[l].iter().map(|v| *v > T::ZERO));
            }
        }
        out
    }

    /// Number of distinct rows that went through the per-point stacks.
    pub fn distinct_rows(&self) -> usize {
        self.rows
    }
}

/// Caches of a batched forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    pub samples: Vec<SampleCache<T>>,
}

/// Gradient of the objective w.r.t. one sample's raw outputs, plus an
/// optional gradient w.r.t. the point-transformer rotation (nonzero when the
/// objective is evaluated on outputs mapped back through that rotation).
#[derive(Debug, Clone, PartialEq)]
pub struct OutputGrad<T> {
    pub raw: Vec<T>,
    pub rotation: Option<Mat3<T>>,
}

fn pool<T: Real>(values: &[T], width: usize, weights: &[T], rows: (usize, usize)) -> Vec<T> {
    let mut out = vec![T::ZERO; width];
    for r in rows.0..rows.1 {
        let w = weights[r];
        for (o, v) in out.iter_mut().zip(&values[r * width..(r + 1) * width]) {
            *o += w * *v;
        }
    }
    out
}

fn unpool<T: Real>(d_pooled: &[T], weights: &[T], rows: (usize, usize), out: &mut [T]) {
    let width = d_pooled.len();
    for r in rows.0..rows.1 {
        let w = weights[r];
        for (o, d) in out[r * width..(r + 1) * width].iter_mut().zip(d_pooled) {
            *o = w * *d;
        }
    }
}

fn mlp_params<'a, T>(prefix: &str, mlp: &'a Mlp<T>, out: &mut Vec<(String, &'a Tensor<T>)>) {
    for (i, l) in mlp.layers.iter().enumerate() {
        out.push((format!("{prefix}.{i}.weight"), &l.weight));
        out.push((format!("{prefix}.{i}.bias"), &l.bias));
    }
}

fn mlp_params_mut<'a, T>(prefix: &str, mlp: &'a mut Mlp<T>, out: &mut Vec<(String, &'a mut Tensor<T>)>) {
    for (i, l) in mlp.layers.iter_mut().enumerate() {
        out.push((format!("{prefix}.{i}.weight"), &mut l.weight));
        out.push((format!("{prefix}.{i}.bias"), &mut l.bias));
    }
}

fn widths(first: usize, middle: &[usize], last: usize) -> Vec<usize> {
    let mut w = vec![first];
    w.extend_from_slice(middle);
    w.push(last);
    w
}

impl<T: Real> PcpModel<T> {
    /// Initializes a model: uniform `±1/sqrt(fan_in)` weights, with both
    /// transformer regressors starting at the identity transform.
    pub fn build(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.feature_dim();
        let enc_out = *config.stn_encoder.last().unwrap();

        let point_stn = config.use_point_stn.then(|| {
            let encoder = Mlp::uniform(&widths(3, &config.stn_encoder[..config.stn_encoder.len() - 1], enc_out), true, &mut rng);
            let mut head = Mlp::uniform(&widths(enc_out, &config.stn_head, 4), false, &mut rng);
            let last = head.layers.last_mut().unwrap();
            last.weight.fill(T::ZERO);
            last.bias.fill(T::ZERO);
            last.bias.data_mut()[0] = T::ONE;
            QuaternionStn { encoder, head }
        });
        let features = Mlp::uniform(&widths(3, &config.feature_widths[..config.feature_widths.len() - 1], d), true, &mut rng);
        let feature_stn = config.use_feature_stn.then(|| {
            let encoder = Mlp::uniform(&widths(d, &config.stn_encoder[..config.stn_encoder.len() - 1], enc_out), true, &mut rng);
            let mut head = Mlp::uniform(&widths(enc_out, &config.stn_head, d * d), false, &mut rng);
            let last = head.layers.last_mut().unwrap();
            last.weight.fill(T::ZERO);
            last.bias.fill(T::ZERO);
            FeatureStn { dim: d, encoder, head }
        });
        let point_functions = Mlp::uniform(&widths(d, &config.point_function_hidden, config.point_functions), true, &mut rng);
        let regressor = Mlp::uniform(&widths(config.pooled_dim(), &config.regressor_hidden, config.output.dim()), false, &mut rng);
        Ok(PcpModel {
            config,
            point_stn,
            features,
            feature_stn,
            point_functions,
            regressor,
        })
    }

    /// Same architecture with every parameter zero; used as a gradient buffer.
    pub fn zeros_like(&self) -> Self {
        PcpModel {
            config: self.config.clone(),
            point_stn: self.point_stn.as_ref().map(|s| QuaternionStn {
                encoder: s.encoder.zeros_like(),
                head: s.head.zeros_like(),
            }),
            features: self.features.zeros_like(),
            feature_stn: self.feature_stn.as_ref().map(|s| FeatureStn {
                dim: s.dim,
                encoder: s.encoder.zeros_like(),
                head: s.head.zeros_like(),
            }),
            point_functions: self.point_functions.zeros_like(),
            regressor: self.regressor.zeros_like(),
        }
    }

    /// Parameters in checkpoint order.
    pub fn params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        if let Some(s) = &self.point_stn {
            mlp_params("point_stn.encoder", &s.encoder, &mut out);
            mlp_params("point_stn.head", &s.head, &mut out);
        }
        mlp_params("features", &self.features, &mut out);
        if let Some(s) = &self.feature_stn {
            mlp_params("feature_stn.encoder", &s.encoder, &mut out);
            mlp_params("feature_stn.head", &s.head, &mut out);
        }
        mlp_params("point_functions", &self.point_functions, &mut out);
        mlp_params("regressor", &self.regressor, &mut out);
        out
    }

    pub fn params_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = Vec::new();
        if let Some(s) = &mut self.point_stn {
            mlp_params_mut("point_stn.encoder", &mut s.encoder, &mut out);
            mlp_params_mut("point_stn.head", &mut s.head, &mut out);
        }
        mlp_params_mut("features", &mut self.features, &mut out);
        if let Some(s) = &mut self.feature_stn {
            mlp_params_mut("feature_stn.encoder", &mut s.encoder, &mut out);
            mlp_params_mut("feature_stn.head", &mut s.head, &mut out);
        }
        mlp_params_mut("point_functions", &mut self.point_functions, &mut out);
        mlp_params_mut("regressor", &mut self.regressor, &mut out);
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }

    /// Adds `other` (same architecture) into `self`, parameter by parameter.
    pub fn accumulate(&mut self, other: &PcpModel<T>) {
        for ((_, a), (_, b)) in self.params_mut().into_iter().zip(other.params()) {
            a.add_assign(b);
        }
    }

    pub fn cast<U: Real>(&self) -> PcpModel<U> {
        let mut out = PcpModel::<U>::build(self.config.clone(), 0).expect("validated config");
        for ((_, dst), (_, src)) in out.params_mut().into_iter().zip(self.params()) {
            *dst = src.cast();
        }
        out
    }

    /// Batched forward pass; returns one raw output row per patch set.
    pub fn forward(&self, batch: &[PatchInput<T>]) -> Result<(Vec<Vec<T>>, ForwardCache<T>)> {
        let mut outputs = Vec::with_capacity(batch.len());
        let mut samples = Vec::with_capacity(batch.len());
        for input in batch {
            let cache = self.forward_sample(input)?;
            outputs.push(cache.outputs().to_vec());
            samples.push(cache);
        }
        Ok((outputs, ForwardCache { samples }))
    }

    /// Accumulates parameter gradients of a batched objective into `grads`.
    pub fn backward(&self, cache: &ForwardCache<T>, output_grads: &[OutputGrad<T>], grads: &mut PcpModel<T>) -> Result<()> {
        if cache.samples.len() != output_grads.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} output gradients for {} samples",
                output_grads.len(),
                cache.samples.len()
            )));
        }
        for (sample, g) in cache.samples.iter().zip(output_grads) {
            self.backward_sample(sample, g, grads)?;
        }
        Ok(())
    }

    pub fn forward_sample(&self, input: &PatchInput<T>) -> Result<SampleCache<T>> {
        let cfg = &self.config;
        if input.scales.len() != cfg.scales.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} scales, got {}",
                cfg.scales.len(),
                input.scales.len()
            )));
        }
        let mut x = Vec::new();
        let mut weights = Vec::new();
        let mut segments = Vec::with_capacity(input.scales.len());
        for pts in &input.scales {
            if pts.len() != cfg.n_points {
                return Err(Error::ShapeMismatch(format!(
                    "patch has {} points, model expects {}",
                    pts.len(),
                    cfg.n_points
                )));
            }
            let start = weights.len();
            let mut zeros = 0usize;
            for p in pts {
                if p.iter().all(|v| *v == T::ZERO) {
                    zeros += 1;
                } else {
                    x.extend_from_slice(p);
                    weights.push(T::ONE);
                }
            }
            if zeros > 0 {
                x.extend_from_slice(&[T::ZERO; 3]);
                weights.push(T::from_f64(zeros as f64));
            }
            segments.push((start, weights.len()));
        }
        let rows = weights.len();
        let all = (0, rows);

        let (point_stn, rotation, rotated) = match &self.point_stn {
            Some(stn) => {
                let encoder = stn.encoder.forward(x.clone(), rows);
                let pooled = pool(encoder.output(), stn.encoder.out_dim(), &weights, all);
                let head = stn.head.forward(pooled, 1);
                let o = head.output();
                let q_raw = [o[0], o[1], o[2], o[3]];
                let norm = q_raw.iter().map(|v| *v * *v).fold(T::ZERO, |a, b| a + b).sqrt();
                if !(norm.to_f64() > 1e-12) {
                    return Err(Error::DegenerateQuaternion);
                }
                let rotation = unit_quaternion_matrix(q_raw.map(|v| v / norm));
                let rot_flat: Vec<T> = rotation.iter().flatten().copied().collect();
                let mut y = vec![T::ZERO; rows * 3];
                mm_nt(&x, &rot_flat, &mut y, rows, 3, 3, false);
                (Some(PointStnCache { encoder, head, q_raw }), rotation, y)
            }
            None => (None, identity(), x.clone()),
        };

        let features = self.features.forward(rotated, rows);
        let d = self.features.out_dim();

        let (feature_stn, transformed) = match &self.feature_stn {
            Some(stn) => {
                let encoder = stn.encoder.forward(features.output().to_vec(), rows);
                let pooled = pool(encoder.output(), stn.encoder.out_dim(), &weights, all);
                let head = stn.head.forward(pooled, 1);
                let mut transform = head.output().to_vec();
                for i in 0..d {
                    transform[i * d + i] += T::ONE;
                }
                let mut out = vec![T::ZERO; rows * d];
                mm_nt(features.output(), &transform, &mut out, rows, d, d, false);
                (
                    Some(FeatureStnCache {
                        encoder,
                        head,
                        transform,
                        features: features.output().to_vec(),
                    }),
                    out,
                )
            }
            None => (None, features.output().to_vec()),
        };

        let point_functions = self.point_functions.forward(transformed, rows);
        let k = self.point_functions.out_dim();
        let mut pooled = Vec::with_capacity(k * segments.len());
        for seg in &segments {
            pooled.extend(pool(point_functions.output(), k, &weights, *seg));
        }
        let regressor = self.regressor.forward(pooled, 1);
        if !regressor.output().iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence("network output".into()));
        }
        Ok(SampleCache {
            rows,
            weights,
            segments,
            input: x,
            point_stn,
            rotation,
            features,
            feature_stn,
            point_functions,
            regressor,
        })
    }

    pub fn backward_sample(&self, cache: &SampleCache<T>, grad: &OutputGrad<T>, grads: &mut PcpModel<T>) -> Result<()> {
        if grad.raw.len() != self.regressor.out_dim() {
            return Err(Error::ShapeMismatch(format!(
                "output gradient of length {}, expected {}",
                grad.raw.len(),
                self.regressor.out_dim()
            )));
        }
        let rows = cache.rows;
        let all = (0, rows);
        let d_pooled = self
            .regressor
            .backward(&cache.regressor, grad.raw.clone(), &mut grads.regressor, true)
            .unwrap();

        let k = self.point_functions.out_dim();
        let mut d_h = vec![T::ZERO; rows * k];
        for (s, seg) in cache.segments.iter().enumerate() {
            unpool(&d_pooled[s * k..(s + 1) * k], &cache.weights, *seg, &mut d_h);
        }
        let d_transformed = self
            .point_functions
            .backward(&cache.point_functions, d_h, &mut grads.point_functions, true)
            .unwrap();

        let d = self.features.out_dim();
        let d_features = match (&self.feature_stn, &cache.feature_stn) {
            (Some(stn), Some(fc)) => {
                let gstn = grads.feature_stn.as_mut().expect("gradient buffer layout");
                // out = G · Tᵀ  =>  dG = dOut · T,  dT = dOutᵀ · G
                let mut d_g = vec![T::ZERO; rows * d];
                mm_nn(&d_transformed, &fc.transform, &mut d_g, rows, d, d, false);
                let mut d_t = vec![T::ZERO; d * d];
                mm_tn(&d_transformed, &fc.features, &mut d_t, d, rows, d, false);
                let d_pool = stn.head.backward(&fc.head, d_t, &mut gstn.head, true).unwrap();
                let enc_w = stn.encoder.out_dim();
                let mut d_enc = vec![T::ZERO; rows * enc_w];
                unpool(&d_pool, &cache.weights, all, &mut d_enc);
                let d_g2 = stn.encoder.backward(&fc.encoder, d_enc, &mut gstn.encoder, true).unwrap();
                for (a, b) in d_g.iter_mut().zip(d_g2) {
                    *a += b;
                }
                d_g
            }
            _ => d_transformed,
        };

        let need_rot = self.point_stn.is_some();
        let d_rotated = self
            .features
            .backward(&cache.features, d_features, &mut grads.features, need_rot);

        if let (Some(stn), Some(pc)) = (&self.point_stn, &cache.point_stn) {
            let gstn = grads.point_stn.as_mut().expect("gradient buffer layout");
            let d_y = d_rotated.unwrap();
            // y = R x per row  =>  dR = dYᵀ · X
            let mut d_r_flat = vec![T::ZERO; 9];
            mm_tn(&d_y, &cache.input, &mut d_r_flat, 3, rows, 3, false);
            let mut d_r = [[T::ZERO; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    d_r[i][j] = d_r_flat[i * 3 + j];
                }
            }
            if let Some(extra) = &grad.rotation {
                for i in 0..3 {
                    for j in 0..3 {
                        d_r[i][j] += extra[i][j];
                    }
                }
            }
            let d_q = quaternion_backward(pc.q_raw, &d_r);
            let d_pool = stn.head.backward(&pc.head, d_q.to_vec(), &mut gstn.head, true).unwrap();
            let enc_w = stn.encoder.out_dim();
            let mut d_enc = vec![T::ZERO; rows * enc_w];
            unpool(&d_pool, &cache.weights, all, &mut d_enc);
            stn.encoder.backward(&pc.encoder, d_enc, &mut gstn.encoder, false);
        }
        Ok(())
    }
}
