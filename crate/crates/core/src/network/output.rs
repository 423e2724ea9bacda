use super::config::OutputSpec;
use super::model::{OutputGrad, PatchInput, PcpModel};
use super::quaternion::{mat_vec, transpose, Mat3};
use super::tensor::Real;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cloud::{Curvature, Patch, PatchSampler, SurfaceEstimate, Vec3};
use crate::error::{Error, Result};

const NORM_FLOOR: f64 = 1e-12;

/// Raw outputs mapped to the (translated, scaled) patch frame: the normal is
/// normalized and rotated back by the inverse transformer rotation; curvatures
/// stay in normalized-patch units.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchFrameOutput<T> {
    pub normal: Option<[T; 3]>,
    pub curvature: Option<[T; 2]>,
}

fn norm3<T: Real>(v: [T; 3]) -> T {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt().max(T::from_f64(NORM_FLOOR))
}

pub fn patch_frame_outputs<T: Real>(raw: &[T], rotation: &Mat3<T>, spec: OutputSpec) -> PatchFrameOutput<T> {
    let normal = spec.has_normal().then(|| {
        let v = [raw[0], raw[1], raw[2]];
        let n = norm3(v);
        mat_vec(&transpose(rotation), v.map(|c| c / n))
    });
    let curvature = spec.curvature_offset().map(|o| [raw[o], raw[o + 1]]);
    PatchFrameOutput { normal, curvature }
}

/// Chains objective gradients w.r.t. [`patch_frame_outputs`] back to the raw
/// outputs and the rotation.
pub fn patch_frame_backward<T: Real>(
    raw: &[T],
    rotation: &Mat3<T>,
    spec: OutputSpec,
    d_normal: Option<[T; 3]>,
    d_curvature: Option<[T; 2]>,
) -> OutputGrad<T> {
    let mut d_raw = vec![T::ZERO; spec.dim()];
    let mut d_rot = None;
    if let (true, Some(g)) = (spec.has_normal(), d_normal) {
        let v = [raw[0], raw[1], raw[2]];
        let n = norm3(v);
        let u = v.map(|c| c / n);
        // out = Rᵀ u  =>  du = R g,  dR[a][b] = u[a] g[b]
        let du = mat_vec(rotation, g);
        let dot = u[0] * du[0] + u[1] * du[1] + u[2] * du[2];
        for i in 0..3 {
            d_raw[i] = (du[i] - u[i] * dot) / n;
        }
        let mut dr = [[T::ZERO; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                dr[a][b] = u[a] * g[b];
            }
        }
        d_rot = Some(dr);
    }
    if let (Some(o), Some(g)) = (spec.curvature_offset(), d_curvature) {
        d_raw[o] = g[0];
        d_raw[o + 1] = g[1];
    }
    OutputGrad { raw: d_raw, rotation: d_rot }
}

/// Runs the model and maps outputs to world units. `radius_abs[i]` is the
/// absolute radius that curvature outputs of sample `i` are divided by.
pub fn predict<T: Real>(model: &PcpModel<T>, inputs: &[PatchInput<T>], radius_abs: &[f64]) -> Result<Vec<SurfaceEstimate>> {
    if inputs.len() != radius_abs.len() {
        return Err(Error::ShapeMismatch("one radius per input required".into()));
    }
    let spec = model.config.output;
    let mut out = Vec::with_capacity(inputs.len());
    for (input, r) in inputs.iter().zip(radius_abs) {
        let cache = model.forward_sample(input)?;
        let frame = patch_frame_outputs(cache.outputs(), cache.rotation(), spec);
        out.push(SurfaceEstimate {
            normal: frame
                .normal
                .map(|n| Vec3::new(n[0].to_f64(), n[1].to_f64(), n[2].to_f64()).normalize()),
            curvature: frame
                .curvature
                .map(|c| Curvature::sorted(c[0].to_f64() / r, c[1].to_f64() / r)),
        });
    }
    Ok(out)
}

/// [`predict`] on extracted patches; each entry holds one patch per model scale.
/// Curvatures are rescaled by the largest patch radius of each set.
pub fn predict_patches<T: Real>(model: &PcpModel<T>, patch_sets: &[Vec<Patch>]) -> Result<Vec<SurfaceEstimate>> {
    let inputs: Vec<PatchInput<T>> = patch_sets.iter().map(|p| PatchInput::from_patches(p)).collect();
    let radii: Vec<f64> = patch_sets
        .iter()
        .map(|p| p.iter().map(|q| q.radius_abs).fold(0.0, f64::max))
        .collect();
    predict(model, &inputs, &radii)
}

/// Queries per parallel work unit in [`estimate_cloud`].
const INFER_CHUNK: usize = 64;

/// Runs the model at every query point of the sampler's cloud. Patch
/// subsampling for query `q` draws from ChaCha8 stream `q` of `seed`, so the
/// result does not depend on the thread count. Queries whose patch cannot be
/// extracted yield `None`.
pub fn estimate_cloud<T: Real>(model: &PcpModel<T>, sampler: &PatchSampler, queries: &[usize], seed: u64) -> Result<Vec<Option<SurfaceEstimate>>> {
    let n = sampler.cloud.len();
    if let Some(&q) = queries.iter().find(|&&q| q >= n) {
        return Err(Error::IndexOutOfRange { index: q, len: n });
    }
    let scales = &model.config.scales;
    let n_points = model.config.n_points;
    let chunks: Vec<Vec<Option<SurfaceEstimate>>> = queries
        .par_chunks(INFER_CHUNK)
        .map(|chunk| {
            let mut sets = Vec::with_capacity(chunk.len());
            let mut slots = Vec::with_capacity(chunk.len());
            for (slot, &q) in chunk.iter().enumerate() {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(q as u64);
                if let Ok(set) = sampler.patch_set(q, scales, n_points, &mut rng) {
                    sets.push(set);
                    slots.push(slot);
                }
            }
            let mut out = vec![None; chunk.len()];
            for (slot, est) in slots.into_iter().zip(predict_patches(model, &sets)?) {
                out[slot] = Some(est);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}
