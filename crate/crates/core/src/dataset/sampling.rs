use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use super::mesh::TriMesh;
use crate::cloud::{Curvature, PointCloud};
use crate::error::{Error, Result};

/// Where a mesh sample came from: face and barycentric coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleProvenance {
    pub face: usize,
    pub barycentric: [f64; 3],
}

/// Uniform barycentric coordinates via the square-root transform.
pub fn uniform_barycentric<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    let s = rng.random::<f64>().sqrt();
    let r2 = rng.random::<f64>();
    let b1 = s * (1.0 - r2);
    let b2 = s * r2;
    [1.0 - b1 - b2, b1, b2]
}

/// Area-uniform surface samples labelled with face normals, plus
/// interpolated curvatures when the mesh carries vertex curvatures.
pub fn sample_mesh_uniform<R: Rng + ?Sized>(
    mesh: &TriMesh,
    n: usize,
    name: &str,
    rng: &mut R,
) -> Result<(PointCloud, Vec<SampleProvenance>)> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let areas: Vec<f64> = (0..mesh.faces.len())
        .map(|f| if mesh.is_degenerate(f) { 0.0 } else { mesh.face_area(f) })
        .collect();
    let picker = WeightedIndex::new(&areas)
        .map_err(|_| Error::DegenerateMesh("mesh has no non-degenerate face".into()))?;
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut provenance = Vec::with_capacity(n);
    for _ in 0..n {
        let face = picker.sample(rng);
        let b = uniform_barycentric(rng);
        let [i, j, k] = mesh.faces[face];
        points.push(mesh.vertices[i] * b[0] + mesh.vertices[j] * b[1] + mesh.vertices[k] * b[2]);
        normals.push(mesh.face_normal(face).expect("picked faces have positive area"));
        provenance.push(SampleProvenance { face, barycentric: b });
    }
    let mut cloud = PointCloud::new(name, points).with_normals(normals)?;
    if mesh.vertex_curvatures.is_some() {
        let curv = provenance.iter().map(|p| interpolate_curvature(mesh, p)).collect();
        cloud = cloud.with_curvatures(curv)?;
    }
    Ok((cloud, provenance))
}

/// Barycentric interpolation of κ1 and κ2 separately, re-sorted.
///
/// Panics if the mesh has no vertex curvatures.
pub fn interpolate_curvature(mesh: &TriMesh, prov: &SampleProvenance) -> Curvature {
    let curv = mesh
        .vertex_curvatures
        .as_ref()
        .expect("vertex curvatures must be computed before interpolation");
    let (mut k1, mut k2) = (0.0, 0.0);
    for (&v, &b) in mesh.faces[prov.face].iter().zip(&prov.barycentric) {
        k1 += b * curv[v].k1;
        k2 += b * curv[v].k2;
    }
    Curvature::sorted(k1, k2)
}
