use nalgebra::{Matrix2, Matrix3, Rotation3, SymmetricEigen, Vector2};

use super::mesh::TriMesh;
use crate::cloud::{Curvature, Vec3};
use crate::error::{Error, Result};

/// Orthonormal tangent basis (u, v) with u × v = n.
fn tangent_frame(n: &Vec3) -> (Vec3, Vec3) {
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = helper.cross(n).normalize();
    (u, n.cross(&u))
}

/// Per-face second fundamental form from normal differences along the edges,
/// returned as a 3×3 tensor living in the face's tangent plane.
fn face_tensor(p: [Vec3; 3], n: [Vec3; 3], face_normal: &Vec3) -> Matrix3<f64> {
    let u = (p[1] - p[0]).normalize();
    let v = face_normal.cross(&u);
    // Rows: e_u a + e_v b = dn·u, e_u b + e_v c = dn·v.
    let mut ata = Matrix3::zeros();
    let mut atb = nalgebra::Vector3::zeros();
    for k in 0..3 {
        let (i, j) = ((k + 1) % 3, (k + 2) % 3);
        let e = p[j] - p[i];
        let dn = n[j] - n[i];
        let (eu, ev) = (e.dot(&u), e.dot(&v));
        let rows = [
            (nalgebra::Vector3::new(eu, ev, 0.0), dn.dot(&u)),
            (nalgebra::Vector3::new(0.0, eu, ev), dn.dot(&v)),
        ];
        for (a, b) in rows {
            ata += a * a.transpose();
            atb += a * b;
        }
    }
    let abc = ata.try_inverse().map(|inv| inv * atb).unwrap_or_else(nalgebra::Vector3::zeros);
    let uv = u * v.transpose();
    u * u.transpose() * abc[0] + (uv + uv.transpose()) * abc[1] + v * v.transpose() * abc[2]
}

/// Voronoi (mixed) area of each corner of a triangle.
fn corner_areas(p: [Vec3; 3]) -> [f64; 3] {
    let area = 0.5 * (p[1] - p[0]).cross(&(p[2] - p[0])).norm();
    let mut out = [0.0; 3];
    let dots: [f64; 3] = std::array::from_fn(|k| (p[(k + 1) % 3] - p[k]).dot(&(p[(k + 2) % 3] - p[k])));
    if let Some(obtuse) = (0..3).find(|&k| dots[k] < 0.0) {
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = if k == obtuse { area / 2.0 } else { area / 4.0 };
        }
        return out;
    }
    let cot = |k: usize| dots[k] / (p[(k + 1) % 3] - p[k]).cross(&(p[(k + 2) % 3] - p[k])).norm();
    for (k, slot) in out.iter_mut().enumerate() {
        let (i, j) = ((k + 1) % 3, (k + 2) % 3);
        *slot = ((p[i] - p[k]).norm_squared() * cot(j) + (p[j] - p[k]).norm_squared() * cot(i)) / 8.0;
    }
    out
}

/// Per-vertex principal curvatures after Rusinkiewicz (2004). Signs follow the
/// mesh normals: with outward normals a sphere of radius R gives +1/R.
///
/// Uses Max-weighted vertex normals as in Rusinkiewicz's reference code; the
/// mesh's own `vertex_normals` are left untouched. Stores the result on the
/// mesh and returns it.
pub fn vertex_curvatures_rusinkiewicz(mesh: &mut TriMesh) -> Result<Vec<Curvature>> {
    if let Some(f) = mesh.faces.iter().position(|f| f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) {
        return Err(Error::DegenerateMesh(format!("face {f} repeats a vertex")));
    }
    let normals = &mesh.max_weighted_normals();
    let frames: Vec<(Vec3, Vec3)> = normals.iter().map(tangent_frame).collect();
    let mut forms = vec![Matrix2::<f64>::zeros(); mesh.vertices.len()];
    let mut weights = vec![0.0; mesh.vertices.len()];
    for (fi, face) in mesh.faces.iter().enumerate() {
        let Some(fnormal) = mesh.face_normal(fi) else {
            continue;
        };
        let p = face.map(|v| mesh.vertices[v]);
        let tensor = face_tensor(p, face.map(|v| normals[v]), &fnormal);
        let areas = corner_areas(p);
        for (k, &vi) in face.iter().enumerate() {
            let rot = Rotation3::rotation_between(&fnormal, &normals[vi])
                .map(|r| *r.matrix())
                .unwrap_or_else(Matrix3::identity);
            let t = rot * tensor * rot.transpose();
            let (u, v) = frames[vi];
            let local = Matrix2::new(u.dot(&(t * u)), u.dot(&(t * v)), v.dot(&(t * u)), v.dot(&(t * v)));
            forms[vi] += local * areas[k];
            weights[vi] += areas[k];
        }
    }
    let mut isolated = 0;
    let curvatures: Vec<Curvature> = forms
        .into_iter()
        .zip(&weights)
        .map(|(form, &w)| {
            if w <= 0.0 {
                isolated += 1;
                return Curvature { k1: 0.0, k2: 0.0 };
            }
            let sym = (form + form.transpose()) / (2.0 * w);
            let eig = SymmetricEigen::new(sym).eigenvalues;
            let e: Vector2<f64> = eig;
            Curvature::sorted(e[0], e[1])
        })
        .collect();
    if isolated > 0 {
        log::warn!("{isolated} vertices have no incident faces; their curvature is set to zero");
    }
    mesh.vertex_curvatures = Some(curvatures.clone());
    Ok(curvatures)
}
