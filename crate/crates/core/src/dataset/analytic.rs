use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cloud::{Curvature, PointCloud, Vec3};
use crate::error::{Error, Result};

/// Gap between the two layers of a two-layer sheet, relative to its extent.
pub const SHEET_GAP_FRACTION: f64 = 0.02;

/// Surfaces with closed-form normals and curvatures. All are centered at the
/// origin; normals point outward, so convex shapes have positive curvature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AnalyticShape {
    Sphere { radius: f64 },
    /// Lateral surface only, axis along z.
    Cylinder { radius: f64, height: f64 },
    /// Square in the xy-plane. With `two_layer`, a second copy sits
    /// `SHEET_GAP_FRACTION × extent` below it with normals facing down.
    Sheet { extent: f64, two_layer: bool },
}

impl AnalyticShape {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        let valid = match *self {
            AnalyticShape::Sphere { radius } => ok(radius),
            AnalyticShape::Cylinder { radius, height } => ok(radius) && ok(height),
            AnalyticShape::Sheet { extent, .. } => ok(extent),
        };
        if valid {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("analytic shape dimensions must be positive: {self:?}")))
        }
    }

    /// One exact sample: position, unit normal, curvature.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec3, Vec3, Curvature) {
        match *self {
            AnalyticShape::Sphere { radius } => {
                let n = loop {
                    let d = Vec3::from_fn(|_, _| StandardNormal.sample(rng));
                    let len = d.norm();
                    if len > 1e-12 {
                        break d / len;
                    }
                };
                let k = 1.0 / radius;
                (n * radius, n, Curvature { k1: k, k2: k })
            }
            AnalyticShape::Cylinder { radius, height } => {
                let u = TAU * rng.random::<f64>();
                let z = height * (rng.random::<f64>() - 0.5);
                let n = Vec3::new(u.cos(), u.sin(), 0.0);
                (n * radius + Vec3::z() * z, n, Curvature { k1: 1.0 / radius, k2: 0.0 })
            }
            AnalyticShape::Sheet { extent, two_layer } => {
                let x = extent * (rng.random::<f64>() - 0.5);
                let y = extent * (rng.random::<f64>() - 0.5);
                let flat = Curvature { k1: 0.0, k2: 0.0 };
                if two_layer && rng.random::<bool>() {
                    (Vec3::new(x, y, -SHEET_GAP_FRACTION * extent), -Vec3::z(), flat)
                } else {
                    (Vec3::new(x, y, 0.0), Vec3::z(), flat)
                }
            }
        }
    }
}

/// `n` area-uniform samples with exact normals and curvatures.
pub fn analytic_shape<R: Rng + ?Sized>(shape: &AnalyticShape, n: usize, name: &str, rng: &mut R) -> Result<PointCloud> {
    shape.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut curvatures = Vec::with_capacity(n);
    for _ in 0..n {
        let (p, nrm, c) = shape.sample_one(rng);
        points.push(p);
        normals.push(nrm);
        curvatures.push(c);
    }
    PointCloud::new(name, points).with_normals(normals)?.with_curvatures(curvatures)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn sphere_labels() {
        let c = analytic_shape(&AnalyticShape::Sphere { radius: 1.0 }, 500, "s", &mut rng()).unwrap();
        c.validate().unwrap();
        for ((p, n), k) in c.points.iter().zip(c.gt_normals.unwrap()).zip(c.gt_curvatures.unwrap()) {
            assert!((n.norm() - 1.0).abs() < 1e-12);
            assert!((p - n).norm() < 1e-12);
            assert_eq!((k.k1, k.k2), (1.0, 1.0));
        }
    }

    #[test]
    fn sphere_is_area_uniform() {
        // Archimedes: z is uniform on [-R, R], so E[z²] = R²/3.
        let c = analytic_shape(&AnalyticShape::Sphere { radius: 2.0 }, 50_000, "s", &mut rng()).unwrap();
        let m = c.points.iter().map(|p| p.z * p.z).sum::<f64>() / c.len() as f64;
        assert!((m - 4.0 / 3.0).abs() < 0.03, "{m}");
    }

    #[test]
    fn cylinder_labels() {
        let shape = AnalyticShape::Cylinder { radius: 2.0, height: 3.0 };
        let c = analytic_shape(&shape, 500, "c", &mut rng()).unwrap();
        for ((p, n), k) in c.points.iter().zip(c.gt_normals.unwrap()).zip(c.gt_curvatures.unwrap()) {
            assert_eq!((k.k1, k.k2), (0.5, 0.0));
            assert!((p.xy().norm() - 2.0).abs() < 1e-12 && p.z.abs() <= 1.5);
            assert!((p.xy() / 2.0 - n.xy()).norm() < 1e-12 && n.z == 0.0);
        }
    }

    #[test]
    fn sheet_layers() {
        let two = AnalyticShape::Sheet { extent: 1.0, two_layer: true };
        let c = analytic_shape(&two, 2000, "s", &mut rng()).unwrap();
        let normals = c.gt_normals.as_ref().unwrap();
        let down = normals.iter().filter(|n| n.z < 0.0).count();
        assert!((800..1200).contains(&down), "{down}");
        for (p, n) in c.points.iter().zip(normals) {
            let expected = if n.z > 0.0 { 0.0 } else { -0.02 };
            assert_eq!(p.z, expected);
        }
        assert!(c.gt_curvatures.unwrap().iter().all(|k| k.k1 == 0.0 && k.k2 == 0.0));
        let one = AnalyticShape::Sheet { extent: 1.0, two_layer: false };
        let c = analytic_shape(&one, 200, "s", &mut rng()).unwrap();
        assert!(c.gt_normals.unwrap().iter().all(|n| *n == Vec3::z()));
    }

    #[test]
    fn invalid_dimensions() {
        for shape in [
            AnalyticShape::Sphere { radius: 0.0 },
            AnalyticShape::Cylinder { radius: -1.0, height: 1.0 },
            AnalyticShape::Sheet { extent: f64::NAN, two_layer: false },
        ] {
            assert!(analytic_shape(&shape, 10, "x", &mut rng()).is_err());
        }
    }

    #[test]
    fn serde_tagged() {
        let s: AnalyticShape = serde_json::from_str(r#"{"kind":"cylinder","radius":1,"height":2}"#).unwrap();
        assert_eq!(s, AnalyticShape::Cylinder { radius: 1.0, height: 2.0 });
    }
}
