use crate::network::{patch_frame_backward, patch_frame_outputs, ForwardCache, OutputGrad, OutputSpec, Real};

use super::loss::{grad_curvature, grad_normal_oriented, grad_normal_unoriented, loss_curvature, loss_normal_oriented, loss_normal_unoriented};

/// Regression target for one patch set, in the patch frame. Curvatures are
/// in normalized-patch units (world curvature times the patch radius).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub normal: Option<[f64; 3]>,
    pub curvature: Option<[f64; 2]>,
}

/// Mean batch loss and per-sample output gradients.
#[derive(Debug, Clone)]
pub struct BatchObjective<T> {
    pub loss: f64,
    pub grads: Vec<OutputGrad<T>>,
    /// Which branch of the unoriented loss each sample took (`true` = flipped).
    pub flips: Vec<bool>,
}

/// Mean loss over the batch and its gradients with respect to the raw outputs.
pub fn batch_objective<T: Real>(spec: OutputSpec, cache: &ForwardCache<T>, targets: &[Target], lambda: f64) -> BatchObjective<T> {
    partial_objective(spec, cache, targets, lambda, targets.len())
}

/// Objective of a slice of a larger batch: losses and gradients are divided
/// by `batch_len` instead of the slice length, so slices can be summed.
pub fn partial_objective<T: Real>(
    spec: OutputSpec,
    cache: &ForwardCache<T>,
    targets: &[Target],
    lambda: f64,
    batch_len: usize,
) -> BatchObjective<T> {
    assert_eq!(cache.samples.len(), targets.len(), "one target per sample");
    let denom = batch_len.max(1) as f64;
    let scale = T::from_f64(1.0 / denom);
    let lam = T::from_f64(lambda);
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(targets.len());
    let mut flips = Vec::with_capacity(targets.len());
    for (sample, target) in cache.samples.iter().zip(targets) {
        let raw = sample.outputs();
        let frame = patch_frame_outputs(raw, sample.rotation(), spec);
        let mut d_normal = None;
        let mut d_curv = None;
        let mut flipped = false;
        if let (Some(pred), Some(t)) = (frame.normal, target.normal) {
            let t = t.map(T::from_f64);
            let (l, g) = if spec.oriented() {
                (loss_normal_oriented(pred, t), grad_normal_oriented(pred, t))
            } else {
                let l = loss_normal_unoriented(pred, t);
                flipped = l < loss_normal_oriented(pred, t);
                (l, grad_normal_unoriented(pred, t))
            };
            total += l.to_f64();
            d_normal = Some(g.map(|v| v * scale));
        }
        if let (Some(pred), Some(t)) = (frame.curvature, target.curvature) {
            let t = t.map(T::from_f64);
            let weight = if spec.has_normal() { lam } else { T::ONE };
            total += (weight * loss_curvature(pred, t)).to_f64();
            d_curv = Some(grad_curvature(pred, t).map(|v| v * weight * scale));
        }
        grads.push(patch_frame_backward(raw, sample.rotation(), spec, d_normal, d_curv));
        flips.push(flipped);
    }
    BatchObjective {
        loss: total / denom,
        grads,
        flips,
    }
}
