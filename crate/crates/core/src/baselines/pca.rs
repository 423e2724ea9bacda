use nalgebra::{Matrix3, SymmetricEigen};

use crate::cloud::Vec3;
use crate::error::{Error, Result};

/// Relative eigenvalue floor below which a neighborhood counts as collinear.
const RANK_TOLERANCE: f64 = 1e-12;

/// Flips `n` so its largest-magnitude component is positive.
pub fn canonical_sign(n: Vec3) -> Vec3 {
    if n[n.iamax()] < 0.0 {
        -n
    } else {
        n
    }
}

/// Eigen-decomposition of the neighborhood covariance, eigenvalues ascending.
pub(crate) fn covariance_frame(neighbors: &[Vec3]) -> Result<(Vec3, [f64; 3], [Vec3; 3])> {
    if neighbors.len() < 3 {
        return Err(Error::DegenerateNeighborhood);
    }
    let n = neighbors.len() as f64;
    let mean = neighbors.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let cov = neighbors.iter().fold(Matrix3::zeros(), |a, p| {
        let d = p - mean;
        a + d * d.transpose()
    }) / n;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.map(|i| eig.eigenvalues[i]);
    let vectors = order.map(|i| eig.eigenvectors.column(i).into_owned());
    if !(values[1] > RANK_TOLERANCE * values[2]) || !values.iter().all(|v| v.is_finite()) {
        return Err(Error::DegenerateNeighborhood);
    }
    Ok((mean, values, vectors))
}

/// Direction of least variance of the neighborhood, canonically signed.
pub fn pca_normal(neighbors: &[Vec3]) -> Result<Vec3> {
    let (_, _, vectors) = covariance_frame(neighbors)?;
    Ok(canonical_sign(vectors[0].normalize()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn plane_normals() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<Vec3> = (0..50).map(|_| Vec3::new(rng.random(), rng.random(), 0.0)).collect();
        assert!((pca_normal(&pts).unwrap() - Vec3::z()).norm() < 1e-12);
        let tilted: Vec<Vec3> = (0..50)
            .map(|_| {
                let (a, b): (f64, f64) = (rng.random(), rng.random());
                Vec3::new(a, b, 1.0 - a - b)
            })
            .collect();
        let n = pca_normal(&tilted).unwrap();
        assert!((n - Vec3::repeat(1.0 / 3f64.sqrt())).norm() < 1e-9, "{n}");
    }

    #[test]
    fn noisy_plane_within_three_degrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let pts: Vec<Vec3> = (0..200)
            .map(|_| Vec3::new(rng.random(), rng.random(), noise.sample(&mut rng)))
            .collect();
        let n = pca_normal(&pts).unwrap();
        assert!(n.dot(&Vec3::z()).abs().acos().to_degrees() < 3.0);
    }

    #[test]
    fn degenerate_inputs() {
        let line: Vec<Vec3> = (0..10).map(|i| Vec3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        for pts in [line, vec![Vec3::zeros(); 5], vec![Vec3::x(), Vec3::y()]] {
            let err = pca_normal(&pts).unwrap_err();
            assert_eq!(err.to_string(), "degenerate neighborhood");
        }
    }

    #[test]
    fn canonical_sign_rule() {
        assert_eq!(canonical_sign(Vec3::new(0.1, -0.9, 0.2)), Vec3::new(-0.1, 0.9, -0.2));
        assert_eq!(canonical_sign(Vec3::new(0.1, 0.9, -0.2)), Vec3::new(0.1, 0.9, -0.2));
    }

    proptest::proptest! {
        #[test]
        fn rotation_equivariant(q in proptest::array::uniform4(-1.0f64..1.0), seed in 0u64..1000) {
            proptest::prop_assume!(q.iter().map(|v| v * v).sum::<f64>() > 0.01);
            let r = crate::network::quaternion_to_matrix(q).unwrap();
            let r = Matrix3::from_fn(|i, j| r[i][j]);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Vec3> = (0..40)
                .map(|_| Vec3::new(rng.random(), 0.3 * rng.random::<f64>(), 0.02 * rng.random::<f64>()))
                .collect();
            let rotated: Vec<Vec3> = pts.iter().map(|p| r * p).collect();
            let a = r * pca_normal(&pts).unwrap();
            let b = pca_normal(&rotated).unwrap();
            proptest::prop_assert!(a.dot(&b).abs() > 1.0 - 1e-10);
        }
    }
}
