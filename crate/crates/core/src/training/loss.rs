//! Per-sample losses and their gradients.

use crate::network::Real;

fn sq_dist<T: Real>(a: [T; 3], b: [T; 3]) -> T {
    (0..3).map(|i| (a[i] - b[i]) * (a[i] - b[i])).fold(T::ZERO, |x, y| x + y)
}

/// `|pred - target|²`.
pub fn loss_normal_oriented<T: Real>(pred: [T; 3], target: [T; 3]) -> T {
    sq_dist(pred, target)
}

/// `min(|pred - target|², |pred + target|²)`.
pub fn loss_normal_unoriented<T: Real>(pred: [T; 3], target: [T; 3]) -> T {
    let a = sq_dist(pred, target);
    let b = sq_dist(pred, target.map(|v| -v));
    if b < a {
        b
    } else {
        a
    }
}

pub fn grad_normal_oriented<T: Real>(pred: [T; 3], target: [T; 3]) -> [T; 3] {
    let two = T::from_f64(2.0);
    [0, 1, 2].map(|i| two * (pred[i] - target[i]))
}

/// Gradient of the branch selected by [`loss_normal_unoriented`].
pub fn grad_normal_unoriented<T: Real>(pred: [T; 3], target: [T; 3]) -> [T; 3] {
    let flipped = target.map(|v| -v);
    if sq_dist(pred, flipped) < sq_dist(pred, target) {
        grad_normal_oriented(pred, flipped)
    } else {
        grad_normal_oriented(pred, target)
    }
}

/// Rectified curvature error `|pred - target| / max(|target|, 1)`.
pub fn rectified_error(pred: f64, target: f64) -> f64 {
    ((pred - target) / target.abs().max(1.0)).abs()
}

/// Sum over both principal values of the squared rectified error.
pub fn loss_curvature<T: Real>(pred: [T; 2], target: [T; 2]) -> T {
    (0..2)
        .map(|i| {
            let d = (pred[i] - target[i]) / target[i].abs().max(T::ONE);
            d * d
        })
        .fold(T::ZERO, |a, b| a + b)
}

pub fn grad_curvature<T: Real>(pred: [T; 2], target: [T; 2]) -> [T; 2] {
    let two = T::from_f64(2.0);
    [0, 1].map(|i| {
        let s = target[i].abs().max(T::ONE);
        two * (pred[i] - target[i]) / (s * s)
    })
}

/// Normal loss plus `lambda` times curvature loss.
pub fn loss_joint<T: Real>(normal_loss: T, curvature_loss: T, lambda: T) -> T {
    normal_loss + lambda * curvature_loss
}
