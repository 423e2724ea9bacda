use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen};

use super::pca::covariance_frame;
use crate::cloud::{Curvature, Vec3};
use crate::error::{Error, Result};

/// Smallest accepted ratio of smallest to largest singular value.
const CONDITION_FLOOR: f64 = 1e-10;

/// Least-squares height-field fit `h(u, v)` over the PCA tangent plane of a
/// neighborhood, with the query point at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct JetFit {
    pub degree: usize,
    /// Orthonormal frame `[u, v, w]`; `w` is the PCA normal (canonical sign).
    pub basis: [Vec3; 3],
    /// Monomial coefficients in order `1, u, v, u², uv, v², u³, …`: by total
    /// degree, then by descending power of `u`.
    pub coefficients: Vec<f64>,
    /// Unit normal at the query point, world frame, on the `w` side.
    pub normal: Vec3,
    /// Principal curvatures signed with respect to `normal` (positive where the
    /// surface bends away from it).
    pub curvature: Curvature,
}

pub fn coefficient_count(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

fn monomials(u: f64, v: f64, degree: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(coefficient_count(degree));
    for d in 0..=degree {
        for j in 0..=d {
            out.push(u.powi((d - j) as i32) * v.powi(j as i32));
        }
    }
    out
}

/// Fits a degree-`degree` jet to `neighbors`, whose first entry is the query
/// point. The solve uses an SVD of the scaled design matrix.
pub fn jet_fit(neighbors: &[Vec3], degree: usize) -> Result<JetFit> {
    if degree == 0 {
        return Err(Error::InvalidArgument("jet degree must be at least 1".into()));
    }
    let m = coefficient_count(degree);
    if neighbors.len() < m {
        return Err(Error::InvalidArgument(format!(
            "a degree-{degree} jet needs at least {m} neighbors, got {}",
            neighbors.len()
        )));
    }
    let (_, _, vectors) = covariance_frame(neighbors)?;
    let w = super::pca::canonical_sign(vectors[0].normalize());
    let u = vectors[2].normalize();
    let v = w.cross(&u);
    let origin = neighbors[0];
    let local: Vec<Vec3> = neighbors
        .iter()
        .map(|p| {
            let d = p - origin;
            Vec3::new(d.dot(&u), d.dot(&v), d.dot(&w))
        })
        .collect();
    // Scale (u, v) to unit extent for conditioning.
    let scale = local.iter().map(|q| q.x.abs().max(q.y.abs())).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::IllConditionedFit);
    }
    let a = DMatrix::from_fn(local.len(), m, |i, j| monomials(local[i].x / scale, local[i].y / scale, degree)[j]);
    let b = DVector::from_iterator(local.len(), local.iter().map(|q| q.z));
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > CONDITION_FLOOR * smax) {
        return Err(Error::IllConditionedFit);
    }
    let scaled = svd.solve(&b, 0.0).map_err(|_| Error::IllConditionedFit)?;
    // Undo the scaling: a coefficient of total degree d is divided by scale^d.
    let mut coefficients = Vec::with_capacity(m);
    let mut k = 0;
    for d in 0..=degree {
        for _ in 0..=d {
            coefficients.push(scaled[k] / scale.powi(d as i32));
            k += 1;
        }
    }
    let (hu, hv) = (coefficients[1], coefficients[2]);
    let (huu, huv, hvv) = if degree >= 2 {
        (2.0 * coefficients[3], coefficients[4], 2.0 * coefficients[5])
    } else {
        (0.0, 0.0, 0.0)
    };
    let local_normal = Vec3::new(-hu, -hv, 1.0).normalize();
    let normal = (u * local_normal.x + v * local_normal.y + w * local_normal.z).normalize();
    // Shape operator I⁻¹·II of the graph surface with upward normal; the
    // leading minus makes bending away from the normal positive.
    let g = (1.0 + hu * hu + hv * hv).sqrt();
    let first = Matrix2::new(1.0 + hu * hu, hu * hv, hu * hv, 1.0 + hv * hv);
    let second = Matrix2::new(huu, huv, huv, hvv) / g;
    // Eigenvalues of I⁻¹II equal those of the symmetric L⁻¹ II L⁻ᵀ for I = L Lᵀ.
    let chol = first.cholesky().ok_or(Error::IllConditionedFit)?;
    let l_inv = chol.l().try_inverse().ok_or(Error::IllConditionedFit)?;
    let sym = l_inv * second * l_inv.transpose();
    let eig = SymmetricEigen::new((sym + sym.transpose()) / 2.0).eigenvalues;
    let curvature = Curvature::sorted(-eig[0], -eig[1]);
    if !(normal.iter().all(|c| c.is_finite()) && curvature.k1.is_finite() && curvature.k2.is_finite()) {
        return Err(Error::IllConditionedFit);
    }
    Ok(JetFit {
        degree,
        basis: [u, v, w],
        coefficients,
        normal,
        curvature,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::quaternion_to_matrix;
    use nalgebra::Matrix3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Query point first, then `n - 1` points on the unit sphere within
    /// `cap_deg` of the north pole.
    fn sphere_cap(n: usize, cap_deg: f64, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cos_max = cap_deg.to_radians().cos();
        let mut pts = vec![Vec3::z()];
        while pts.len() < n {
            let z = cos_max + (1.0 - cos_max) * rng.random::<f64>();
            let phi = std::f64::consts::TAU * rng.random::<f64>();
            let s = (1.0 - z * z).sqrt();
            pts.push(Vec3::new(s * phi.cos(), s * phi.sin(), z));
        }
        pts
    }

    #[test]
    fn coefficient_counts() {
        assert_eq!(coefficient_count(1), 3);
        assert_eq!(coefficient_count(2), 6);
        assert_eq!(coefficient_count(4), 15);
        assert_eq!(monomials(2.0, 3.0, 2), vec![1.0, 2.0, 3.0, 4.0, 6.0, 9.0]);
    }

    #[test]
    fn exact_plane() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = Vec3::new(1.0, -2.0, 0.5).normalize();
        let a = n.cross(&Vec3::x()).normalize();
        let b = n.cross(&a);
        let pts: Vec<Vec3> = (0..30).map(|_| a * rng.random::<f64>() + b * rng.random::<f64>()).collect();
        let fit = jet_fit(&pts, 2).unwrap();
        assert!(fit.normal.dot(&n).abs() > 1.0 - 1e-12);
        assert!(fit.curvature.k1.abs() < 1e-6 && fit.curvature.k2.abs() < 1e-6);
        let [u, v, w] = fit.basis;
        let gram = Matrix3::from_columns(&[u, v, w]);
        assert!((gram.transpose() * gram - Matrix3::identity()).norm() < 1e-8);
        assert_eq!(fit.coefficients.len(), 6);
    }

    /// Expected 2-jet curvature on a unit-sphere cap of half-angle θ with
    /// area-uniform samples. With t = 1 − z uniform on [0, T], T = 1 − cos θ,
    /// the fit regresses h = −t on r² = 2t − t², giving
    /// κ = 2 Cov(r², t) / Var(r²) = (1 − T/2) / (1 − T + 4T²/15).
    fn truncation_oracle(cap_deg: f64) -> f64 {
        let t = 1.0 - cap_deg.to_radians().cos();
        (1.0 - t / 2.0) / (1.0 - t + 4.0 * t * t / 15.0)
    }

    #[test]
    fn sphere_cap_matches_truncation_bias() {
        for (cap, seed) in [(20.0, 4), (10.0, 5)] {
            let fit = jet_fit(&sphere_cap(4000, cap, seed), 2).unwrap();
            // Canonical sign puts the normal at +z here, i.e. outward.
            assert!(fit.normal.z > 0.999);
            let expected = truncation_oracle(cap);
            for k in [fit.curvature.k1, fit.curvature.k2] {
                assert!((k - expected).abs() < 0.004, "{cap}°: {k} vs {expected}");
            }
        }
        assert!((truncation_oracle(20.0) - 1.031).abs() < 1e-3);
        let small = jet_fit(&sphere_cap(100, 10.0, 6), 2).unwrap().curvature;
        assert!((small.k1 - 1.0).abs() < 0.02 && (small.k2 - 1.0).abs() < 0.02, "{small:?}");
    }

    #[test]
    fn concave_side_is_negative() {
        // The inside of a cap, seen from +z.
        let inner: Vec<Vec3> = sphere_cap(400, 10.0, 4).iter().map(|p| Vec3::new(p.x, p.y, -p.z)).collect();
        let fit = jet_fit(&inner, 2).unwrap();
        assert!(fit.normal.z > 0.999);
        assert!((fit.curvature.k1 + 1.0).abs() < 0.02 && (fit.curvature.k2 + 1.0).abs() < 0.02);
    }

    #[test]
    fn cylinder_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut pts = vec![Vec3::new(2.0, 0.0, 0.0)];
        while pts.len() < 100 {
            let t = (rng.random::<f64>() - 0.5) * 0.7;
            let z = (rng.random::<f64>() - 0.5) * 1.4;
            pts.push(Vec3::new(2.0 * t.cos(), 2.0 * t.sin(), z));
        }
        let fit = jet_fit(&pts, 2).unwrap();
        assert!(fit.normal.x > 0.999);
        assert!((fit.curvature.k1 - 0.5).abs() < 0.02 && fit.curvature.k2.abs() < 0.02, "{:?}", fit.curvature);
    }

    #[test]
    fn degree_one_has_zero_curvature() {
        let fit = jet_fit(&sphere_cap(40, 30.0, 6), 1).unwrap();
        assert_eq!(fit.curvature, Curvature { k1: 0.0, k2: 0.0 });
        assert_eq!(fit.coefficients.len(), 3);
    }

    #[test]
    fn rotation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts = sphere_cap(60, 25.0, 8);
        let base = jet_fit(&pts, 2).unwrap();
        for _ in 0..20 {
            let q: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>() - 0.5);
            let r = quaternion_to_matrix(q).unwrap();
            let r = Matrix3::from_fn(|i, j| r[i][j]);
            let rotated: Vec<Vec3> = pts.iter().map(|p| r * p).collect();
            let fit = jet_fit(&rotated, 2).unwrap();
            let expected = r * base.normal;
            assert!(fit.normal.dot(&expected).abs() > 1.0 - 1e-10);
            let aligned = if fit.normal.dot(&expected) > 0.0 { fit.curvature } else { Curvature { k1: -fit.curvature.k2, k2: -fit.curvature.k1 } };
            assert!((aligned.k1 - base.curvature.k1).abs() < 1e-5 && (aligned.k2 - base.curvature.k2).abs() < 1e-5);
        }
    }

    #[test]
    fn too_few_or_degenerate_points() {
        assert!(jet_fit(&sphere_cap(5, 20.0, 1), 2).is_err());
        let line: Vec<Vec3> = (0..10).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        assert_eq!(jet_fit(&line, 2).unwrap_err().to_string(), "degenerate neighborhood");
        // Points on two lines through the query: rank-deficient in u², v².
        let mut cross = vec![Vec3::zeros()];
        for i in 1..6 {
            let t = i as f64 * 0.1;
            cross.extend([Vec3::new(t, 0.0, 0.0), Vec3::new(-t, 0.0, 0.0), Vec3::new(0.0, t, 0.0), Vec3::new(0.0, -t, 0.0)]);
        }
        assert_eq!(jet_fit(&cross, 2).unwrap_err().to_string(), "ill-conditioned fit");
    }
}
