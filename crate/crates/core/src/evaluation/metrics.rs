use crate::cloud::{Curvature, Vec3};
use crate::error::{Error, Result};
use crate::training::loss::rectified_error;

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!("{a} predictions for {b} ground-truth values")));
    }
    Ok(())
}

/// Angle between two vectors in degrees; with `oriented = false` the better
/// of `pred` and `−pred` is used. Computed as `atan2(|p×g|, p·g)`, which
/// equals `arccos(p·g)` for unit vectors without its loss of precision near
/// 0° and 180°.
pub fn angle_deg(pred: &Vec3, gt: &Vec3, oriented: bool) -> f64 {
    let theta = pred.cross(gt).norm().atan2(pred.dot(gt)).to_degrees();
    if oriented {
        theta
    } else {
        theta.min(180.0 - theta)
    }
}

/// Root-mean-square angle error in degrees.
pub fn rms_angle_error(pred: &[Vec3], gt: &[Vec3], oriented: bool) -> Result<f64> {
    check_lengths(pred.len(), gt.len())?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = pred.iter().zip(gt).map(|(p, g)| angle_deg(p, g, oriented).powi(2)).sum();
    Ok((sum / pred.len() as f64).sqrt())
}

/// Fraction of predictions pointing away from the ground truth (`pred·gt < 0`).
pub fn flip_fraction(pred: &[Vec3], gt: &[Vec3]) -> Result<f64> {
    check_lengths(pred.len(), gt.len())?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    let flipped = pred.iter().zip(gt).filter(|(p, g)| p.dot(g) < 0.0).count();
    Ok(flipped as f64 / pred.len() as f64)
}

/// RMS of the rectified error `|κ̃ − κ| / max(|κ|, 1)` for κ1 and κ2.
pub fn curvature_rms(pred: &[Curvature], gt: &[Curvature]) -> Result<(f64, f64)> {
    check_lengths(pred.len(), gt.len())?;
    if pred.is_empty() {
        return Ok((0.0, 0.0));
    }
    let n = pred.len() as f64;
    let (mut s1, mut s2) = (0.0, 0.0);
    for (p, g) in pred.iter().zip(gt) {
        s1 += rectified_error(p.k1, g.k1).powi(2);
        s2 += rectified_error(p.k2, g.k2).powi(2);
    }
    Ok(((s1 / n).sqrt(), (s2 / n).sqrt()))
}
