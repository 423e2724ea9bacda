use nalgebra::{Matrix3, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cloud::{bbox_diagonal, PointCloud, Vec3};
use crate::error::{Error, Result};

/// Noise levels (σ relative to the bounding-box diagonal) of the standard
/// benchmark variants.
pub const NOISE_LEVELS: [f64; 3] = [0.0025, 0.012, 0.024];

/// Number of bands in the stripes scheme.
pub const STRIPE_BANDS: usize = 8;

/// Adds i.i.d. Gaussian noise with σ = `level` × bbox diagonal to every
/// coordinate. Ground-truth attributes are copied unchanged.
pub fn add_gaussian_noise<R: Rng + ?Sized>(cloud: &PointCloud, level: f64, rng: &mut R) -> Result<PointCloud> {
    if !(level >= 0.0 && level.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise level must be non-negative, got {level}")));
    }
    let mut out = cloud.clone();
    if level == 0.0 {
        return Ok(out);
    }
    let sigma = level * bbox_diagonal(cloud)?;
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    for p in &mut out.points {
        for c in p.iter_mut() {
            *c += normal.sample(rng);
        }
    }
    Ok(out)
}

/// Non-uniform resampling schemes along the cloud's first principal axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityScheme {
    /// Keep probability rises linearly from 0.05 to 1.0.
    Gradient,
    /// Eight equal bands alternating 0.1 (even bands) and 1.0 (odd bands).
    Stripes,
}

impl DensityScheme {
    pub fn name(self) -> &'static str {
        match self {
            DensityScheme::Gradient => "gradient",
            DensityScheme::Stripes => "stripes",
        }
    }

    /// Keep probability at normalized axis coordinate `t` ∈ [0, 1].
    pub fn keep_probability(self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        match self {
            DensityScheme::Gradient => 0.05 + 0.95 * t,
            DensityScheme::Stripes => {
                let band = ((t * STRIPE_BANDS as f64) as usize).min(STRIPE_BANDS - 1);
                if band.is_multiple_of(2) {
                    0.1
                } else {
                    1.0
                }
            }
        }
    }
}

impl std::str::FromStr for DensityScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gradient" => Ok(DensityScheme::Gradient),
            "stripes" => Ok(DensityScheme::Stripes),
            _ => Err(Error::InvalidArgument(format!("unknown density scheme `{s}` (expected gradient or stripes)"))),
        }
    }
}

/// Unit direction of largest positional variance. The sign is fixed so that the
/// largest-magnitude component is positive.
pub fn principal_axis(points: &[Vec3]) -> Vec3 {
    let n = points.len().max(1) as f64;
    let mean = points.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let cov = points.iter().fold(Matrix3::zeros(), |a, p| {
        let d = p - mean;
        a + d * d.transpose()
    }) / n;
    let eig = SymmetricEigen::new(cov);
    let i = eig.eigenvalues.imax();
    let axis: Vec3 = eig.eigenvectors.column(i).into_owned();
    if axis[axis.iamax()] < 0.0 {
        -axis
    } else {
        axis
    }
}

/// Per-point keep probabilities of a density scheme.
pub fn keep_probabilities(cloud: &PointCloud, scheme: DensityScheme) -> Result<Vec<f64>> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let axis = principal_axis(&cloud.points);
    let coords: Vec<f64> = cloud.points.iter().map(|p| p.dot(&axis)).collect();
    let lo = coords.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = coords.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    Ok(coords
        .iter()
        .map(|&c| {
            let t = if span > 0.0 { (c - lo) / span } else { 1.0 };
            scheme.keep_probability(t)
        })
        .collect())
}

/// Keeps each point independently with its scheme probability. Survivors
/// keep their ground truth.
pub fn density_variant<R: Rng + ?Sized>(cloud: &PointCloud, scheme: DensityScheme, rng: &mut R) -> Result<PointCloud> {
    let probs = keep_probabilities(cloud, scheme)?;
    let keep: Vec<usize> = probs
        .iter()
        .enumerate()
        .filter(|&(_, &p)| rng.random::<f64>() < p)
        .map(|(i, _)| i)
        .collect();
    Ok(cloud.select(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::Curvature;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn segment(n: usize) -> PointCloud {
        let points = (0..n).map(|i| Vec3::new(i as f64 / (n - 1) as f64, 0.0, 0.0)).collect();
        let normals = vec![Vec3::y(); n];
        let curv = (0..n).map(|i| Curvature { k1: i as f64, k2: -(i as f64) }).collect();
        PointCloud::new("seg", points).with_normals(normals).unwrap().with_curvatures(curv).unwrap()
    }

    fn cube_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n).map(|_| Vec3::from_fn(|_, _| rng.random::<f64>())).collect();
        PointCloud::new("box", pts).with_normals(vec![Vec3::x(); n]).unwrap()
    }

    #[test]
    fn zero_noise_is_identity() {
        let c = segment(50);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(add_gaussian_noise(&c, 0.0, &mut rng).unwrap(), c);
        assert!(add_gaussian_noise(&c, -0.1, &mut rng).is_err());
    }

    #[test]
    fn noise_sigma_matches_level() {
        let clean = cube_cloud(100_000, 5);
        let diag = bbox_diagonal(&clean).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let noisy = add_gaussian_noise(&clean, 0.012, &mut rng).unwrap();
        assert_eq!(noisy.gt_normals, clean.gt_normals);
        let n = clean.len() as f64;
        for axis in 0..3 {
            let d: Vec<f64> = noisy.points.iter().zip(&clean.points).map(|(a, b)| a[axis] - b[axis]).collect();
            let mean = d.iter().sum::<f64>() / n;
            let sd = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            assert!((sd / (0.012 * diag) - 1.0).abs() < 0.02, "axis {axis}: {sd}");
        }
    }

    #[test]
    fn gradient_endpoints() {
        let probs = keep_probabilities(&segment(11), DensityScheme::Gradient).unwrap();
        assert!((probs[0] - 0.05).abs() < 1e-12);
        assert!((probs[10] - 1.0).abs() < 1e-12);
        assert!((probs[5] - 0.525).abs() < 1e-12);
    }

    #[test]
    fn survivor_count_within_poisson_binomial_bounds() {
        let cloud = cube_cloud(20_000, 7);
        for scheme in [DensityScheme::Gradient, DensityScheme::Stripes] {
            let probs = keep_probabilities(&cloud, scheme).unwrap();
            let mean: f64 = probs.iter().sum();
            let sd = probs.iter().map(|p| p * (1.0 - p)).sum::<f64>().sqrt();
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            let out = density_variant(&cloud, scheme, &mut rng).unwrap();
            assert!((out.len() as f64 - mean).abs() < 3.0 * sd, "{scheme:?}: {} vs {mean}", out.len());
        }
    }

    #[test]
    fn stripes_alternate_one_to_ten() {
        let n = 80_000;
        let cloud = segment(n);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let out = density_variant(&cloud, DensityScheme::Stripes, &mut rng).unwrap();
        let mut counts = [0usize; STRIPE_BANDS];
        for p in &out.points {
            counts[((p.x * STRIPE_BANDS as f64) as usize).min(STRIPE_BANDS - 1)] += 1;
        }
        let per_band = (n / STRIPE_BANDS) as f64;
        for (b, &c) in counts.iter().enumerate() {
            let p = if b % 2 == 0 { 0.1 } else { 1.0 };
            let sd = (per_band * p * (1.0 - p)).sqrt().max(1.0);
            assert!((c as f64 - per_band * p).abs() < 3.0 * sd + 1.0, "band {b}: {c}");
        }
    }

    #[test]
    fn survivors_keep_ground_truth() {
        let cloud = segment(1000);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let out = density_variant(&cloud, DensityScheme::Gradient, &mut rng).unwrap();
        let curv = out.gt_curvatures.as_ref().unwrap();
        for (p, k) in out.points.iter().zip(curv) {
            let i = (p.x * 999.0).round() as usize;
            assert_eq!(k.k1, i as f64);
            assert_eq!(out.gt_normals.as_ref().unwrap()[0], Vec3::y());
        }
    }

    #[test]
    fn deterministic() {
        let cloud = cube_cloud(3000, 1);
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let n = add_gaussian_noise(&cloud, 0.024, &mut rng).unwrap();
            density_variant(&n, DensityScheme::Stripes, &mut rng).unwrap()
        };
        assert_eq!(run(), run());
    }
}
