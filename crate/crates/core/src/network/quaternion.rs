use super::tensor::Real;
use crate::error::{Error, Result};

pub type Mat3<T> = [[T; 3]; 3];

/// Rotation matrix of the quaternion `(w, x, y, z)`, normalized first.
pub fn quaternion_to_matrix<T: Real>(q: [T; 4]) -> Result<Mat3<T>> {
    let norm = q.iter().map(|v| *v * *v).fold(T::ZERO, |a, b| a + b).sqrt();
    if !(norm.to_f64() > 1e-12) {
        return Err(Error::DegenerateQuaternion);
    }
    let [w, x, y, z] = q.map(|v| v / norm);
    Ok(unit_quaternion_matrix([w, x, y, z]))
}

pub(crate) fn unit_quaternion_matrix<T: Real>([w, x, y, z]: [T; 4]) -> Mat3<T> {
    let one = T::ONE;
    let two = T::from_f64(2.0);
    [
        [one - two * (y * y + z * z), two * (x * y - w * z), two * (x * z + w * y)],
        [two * (x * y + w * z), one - two * (x * x + z * z), two * (y * z - w * x)],
        [two * (x * z - w * y), two * (y * z + w * x), one - two * (x * x + y * y)],
    ]
}

/// Gradient w.r.t. the raw (unnormalized) quaternion given the gradient
/// w.r.t. the rotation matrix it produces.
pub(crate) fn quaternion_backward<T: Real>(q_raw: [T; 4], d_r: &Mat3<T>) -> [T; 4] {
    let norm = q_raw.iter().map(|v| *v * *v).fold(T::ZERO, |a, b| a + b).sqrt();
    let [w, x, y, z] = q_raw.map(|v| v / norm);
    let two = T::from_f64(2.0);
    let four = T::from_f64(4.0);
    let g = d_r;
    let dw = two * (-z * g[0][1] + y * g[0][2] + z * g[1][0] - x * g[1][2] - y * g[2][0] + x * g[2][1]);
    let dx = two * (y * g[0][1] + z * g[0][2] + y * g[1][0] - w * g[1][2] + z * g[2][0] + w * g[2][1])
        - four * x * (g[1][1] + g[2][2]);
    let dy = two * (x * g[0][1] + w * g[0][2] + x * g[1][0] + z * g[1][2] - w * g[2][0] + z * g[2][1])
        - four * y * (g[0][0] + g[2][2]);
    let dz = two * (-w * g[0][1] + x * g[0][2] + w * g[1][0] + y * g[1][2] + x * g[2][0] + y * g[2][1])
        - four * z * (g[0][0] + g[1][1]);
    let dq = [dw, dx, dy, dz];
    let unit = [w, x, y, z];
    let dot = (0..4).map(|i| unit[i] * dq[i]).fold(T::ZERO, |a, b| a + b);
    [0, 1, 2, 3].map(|i| (dq[i] - unit[i] * dot) / norm)
}

pub(crate) fn transpose<T: Real>(m: &Mat3<T>) -> Mat3<T> {
    [
        [m[0][0], m[1][0], m[2][0]],
        [m[0][1], m[1][1], m[2][1]],
        [m[0][2], m[1][2], m[2][2]],
    ]
}

pub(crate) fn mat_vec<T: Real>(m: &Mat3<T>, v: [T; 3]) -> [T; 3] {
    [0, 1, 2].map(|r| m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2])
}

pub(crate) fn identity<T: Real>() -> Mat3<T> {
    let (o, z) = (T::ONE, T::ZERO);
    [[o, z, z], [z, o, z], [z, z, o]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn det(m: &Mat3<f64>) -> f64 {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    #[test]
    fn identity_and_half_turn() {
        assert_eq!(quaternion_to_matrix([1.0, 0.0, 0.0, 0.0]).unwrap(), identity::<f64>());
        let r = quaternion_to_matrix([0.0, 0.0, 0.0, 1.0f64]).unwrap();
        assert_eq!(r, [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]]);
    }

    #[test]
    fn degenerate_quaternion() {
        let err = quaternion_to_matrix([0.0f64; 4]).unwrap_err();
        assert_eq!(err.to_string(), "degenerate quaternion");
    }

    #[test]
    fn backward_matches_finite_differences() {
        let q = [0.3, -0.7, 0.2, 0.9];
        let g = [[0.1, -0.4, 0.7], [0.3, 0.2, -0.5], [-0.6, 0.8, 0.05]];
        let f = |q: [f64; 4]| {
            let r = quaternion_to_matrix(q).unwrap();
            (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| r[i][j] * g[i][j]).sum::<f64>()
        };
        let analytic = quaternion_backward(q, &g);
        for i in 0..4 {
            let mut p = q;
            p[i] += 1e-6;
            let mut m = q;
            m[i] -= 1e-6;
            let fd = (f(p) - f(m)) / 2e-6;
            assert!((fd - analytic[i]).abs() < 1e-8, "{i}: {fd} vs {}", analytic[i]);
        }
    }

    proptest! {
        #[test]
        #[allow(clippy::needless_range_loop)]
        fn always_proper_rotation(q in prop::array::uniform4(-10.0f64..10.0)) {
            prop_assume!(q.iter().map(|v| v * v).sum::<f64>() > 1e-6);
            let r = quaternion_to_matrix(q).unwrap();
            let rt = transpose(&r);
            for (i, row) in rt.iter().enumerate() {
                for j in 0..3 {
                    let v: f64 = (0..3).map(|k| row[k] * r[k][j]).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((v - want).abs() < 1e-12);
                }
            }
            prop_assert!((det(&r) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn scale_invariant(q in prop::array::uniform4(-3.0f64..3.0), s in 0.01f64..100.0) {
            prop_assume!(q.iter().map(|v| v * v).sum::<f64>() > 1e-6);
            let a = quaternion_to_matrix(q).unwrap();
            let b = quaternion_to_matrix(q.map(|v| v * s)).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert!((a[i][j] - b[i][j]).abs() < 1e-7);
                }
            }
        }
    }
}
