//! Procedural meshes: test fixtures and the bundled training corpus.

use std::collections::HashMap;
use std::f64::consts::TAU;

use super::mesh::TriMesh;
use crate::cloud::Vec3;

pub fn icosphere(radius: f64, subdivisions: usize) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut mid = |a: usize, b: usize| {
                *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    vertices.push(((vertices[a] + vertices[b]) / 2.0).normalize());
                    vertices.len() - 1
                })
            };
            let (ab, bc, ca) = (mid(f[0], f[1]), mid(f[1], f[2]), mid(f[2], f[0]));
            next.extend([[f[0], ab, ca], [f[1], bc, ab], [f[2], ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    for v in &mut vertices {
        *v *= radius;
    }
    TriMesh::new(vertices, faces).expect("icosphere indices are valid")
}

/// Flat `nx × ny` quad grid of side `size` in the z = 0 plane, normals +z.
pub fn grid(nx: usize, ny: usize, size: f64) -> TriMesh {
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Vec3::new(
                size * (i as f64 / nx as f64 - 0.5),
                size * (j as f64 / ny as f64 - 0.5),
                0.0,
            ));
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut faces = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriMesh::new(vertices, faces).expect("grid indices are valid")
}

/// Surface of revolution about z from a profile of (radius, z) pairs ordered
/// bottom to top. Profile points with zero radius become single pole vertices.
/// Faces are oriented outward.
pub fn revolve(profile: &[(f64, f64)], segments: usize) -> TriMesh {
    let mut vertices = Vec::new();
    let mut rings: Vec<Vec<usize>> = Vec::with_capacity(profile.len());
    for &(r, z) in profile {
        if r == 0.0 {
            vertices.push(Vec3::new(0.0, 0.0, z));
            rings.push(vec![vertices.len() - 1; segments]);
        } else {
            let ring = (0..segments)
                .map(|i| {
                    let u = TAU * i as f64 / segments as f64;
                    vertices.push(Vec3::new(r * u.cos(), r * u.sin(), z));
                    vertices.len() - 1
                })
                .collect();
            rings.push(ring);
        }
    }
    let mut faces = Vec::new();
    for w in rings.windows(2) {
        let (lo, hi) = (&w[0], &w[1]);
        for i in 0..segments {
            let i1 = (i + 1) % segments;
            let quad = [lo[i], lo[i1], hi[i1], hi[i]];
            for tri in [[quad[0], quad[1], quad[2]], [quad[0], quad[2], quad[3]]] {
                if tri[0] != tri[1] && tri[1] != tri[2] && tri[0] != tri[2] {
                    faces.push(tri);
                }
            }
        }
    }
    TriMesh::new(vertices, faces).expect("revolution indices are valid")
}

fn linspace(a: f64, b: f64, steps: usize) -> impl Iterator<Item = f64> {
    (0..=steps).map(move |i| a + (b - a) * i as f64 / steps as f64)
}

/// Open tube (lateral surface only), centered at the origin along z.
pub fn tube(radius: f64, height: f64, segments: usize, rings: usize) -> TriMesh {
    let profile: Vec<_> = linspace(-height / 2.0, height / 2.0, rings).map(|z| (radius, z)).collect();
    revolve(&profile, segments)
}

/// Closed cylinder with flat caps.
pub fn cylinder(radius: f64, height: f64, segments: usize, rings: usize, cap_rings: usize) -> TriMesh {
    let (lo, hi) = (-height / 2.0, height / 2.0);
    let mut profile: Vec<_> = linspace(0.0, radius, cap_rings).map(|r| (r, lo)).collect();
    profile.extend(linspace(lo, hi, rings).skip(1).map(|z| (radius, z)));
    profile.extend(linspace(radius, 0.0, cap_rings).skip(1).map(|r| (r, hi)));
    revolve(&profile, segments)
}

/// Closed cone with its base centered below the origin.
pub fn cone(radius: f64, height: f64, segments: usize, rings: usize) -> TriMesh {
    let lo = -height / 2.0;
    let mut profile: Vec<_> = linspace(0.0, radius, rings).map(|r| (r, lo)).collect();
    profile.extend(linspace(0.0, 1.0, rings).skip(1).map(|t| (radius * (1.0 - t), lo + t * height)));
    revolve(&profile, segments)
}

/// Axis-aligned box centered at the origin; each face is an `n × n` grid.
pub fn cuboid(size: Vec3, n: usize) -> TriMesh {
    let mut index: HashMap<[usize; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut vid = |c: [usize; 3], vertices: &mut Vec<Vec3>| {
        *index.entry(c).or_insert_with(|| {
            let p = Vec3::from_fn(|k, _| size[k] * (c[k] as f64 / n as f64 - 0.5));
            vertices.push(p);
            vertices.len() - 1
        })
    };
    for axis in 0..3 {
        let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in [0, n] {
            for i in 0..n {
                for j in 0..n {
                    let corner = |di: usize, dj: usize| {
                        let mut c = [0; 3];
                        c[axis] = side;
                        c[a] = i + di;
                        c[b] = j + dj;
                        c
                    };
                    let q = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)].map(|c| vid(c, &mut vertices));
                    // (a, b, axis) is right-handed, so this winding faces +axis.
                    let (t0, t1) = ([q[0], q[1], q[2]], [q[0], q[2], q[3]]);
                    if side == n {
                        faces.extend([t0, t1]);
                    } else {
                        faces.extend([[t0[0], t0[2], t0[1]], [t1[0], t1[2], t1[1]]]);
                    }
                }
            }
        }
    }
    TriMesh::new(vertices, faces).expect("cuboid indices are valid")
}

/// Parametric closed torus around z.
pub fn torus_with(
    segments: usize,
    tube_segments: usize,
    surface: impl Fn(f64, f64) -> Vec3,
) -> TriMesh {
    let mut vertices = Vec::with_capacity(segments * tube_segments);
    for i in 0..segments {
        for j in 0..tube_segments {
            vertices.push(surface(TAU * i as f64 / segments as f64, TAU * j as f64 / tube_segments as f64));
        }
    }
    let id = |i: usize, j: usize| (i % segments) * tube_segments + j % tube_segments;
    let mut faces = Vec::with_capacity(2 * segments * tube_segments);
    for i in 0..segments {
        for j in 0..tube_segments {
            let q = [id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)];
            faces.push([q[0], q[1], q[2]]);
            faces.push([q[0], q[2], q[3]]);
        }
    }
    TriMesh::new(vertices, faces).expect("torus indices are valid")
}

pub fn torus(major: f64, minor: f64, segments: usize, tube_segments: usize) -> TriMesh {
    torus_with(segments, tube_segments, |u, v| {
        let r = major + minor * v.cos();
        Vec3::new(r * u.cos(), r * u.sin(), minor * v.sin())
    })
}

/// Icosphere displaced radially by `f(direction)`.
pub fn displaced_sphere(subdivisions: usize, f: impl Fn(&Vec3) -> f64) -> TriMesh {
    let mut mesh = icosphere(1.0, subdivisions);
    for v in &mut mesh.vertices {
        let d = *v;
        *v = d * f(&d);
    }
    mesh
}

/// Enclosed volume, positive for outward orientation.
pub fn signed_volume(mesh: &TriMesh) -> f64 {
    mesh.faces
        .iter()
        .map(|f| {
            let [a, b, c] = f.map(|v| mesh.vertices[v]);
            a.dot(&b.cross(&c)) / 6.0
        })
        .sum()
}

/// The eight bundled training/test meshes: four CSG-like primitives and four
/// smooth organic shapes, in a fixed order.
pub fn bundled_corpus() -> Vec<(&'static str, TriMesh)> {
    vec![
        ("cube", cuboid(Vec3::new(1.0, 1.0, 1.0), 24)),
        ("plank", cuboid(Vec3::new(1.6, 0.6, 0.25), 24)),
        ("cylinder", cylinder(0.5, 1.4, 96, 48, 12)),
        ("cone", cone(0.6, 1.2, 96, 32)),
        ("torus", torus(0.7, 0.25, 128, 48)),
        ("ellipsoid", {
            let mut m = icosphere(1.0, 5);
            for v in &mut m.vertices {
                v.component_mul_assign(&Vec3::new(1.0, 0.7, 0.45));
            }
            m
        }),
        ("blob", displaced_sphere(5, |d| {
            1.0 + 0.18 * (3.0 * d.x).sin() * (2.0 * d.y + 0.5).cos() + 0.12 * (4.0 * d.z).sin()
        })),
        ("bumpy_torus", torus_with(160, 64, |u, v| {
            let minor = 0.25 * (1.0 + 0.2 * (5.0 * u).sin() * (3.0 * v).cos());
            let r = 0.7 + minor * v.cos();
            Vec3::new(r * u.cos(), r * u.sin(), minor * v.sin())
        })),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn closed_meshes_are_outward_and_watertight() {
        for (name, mesh) in bundled_corpus().into_iter().chain([
            ("icosphere", icosphere(1.0, 2)),
            ("cylinder", cylinder(1.0, 2.0, 16, 4, 3)),
        ]) {
            assert!(signed_volume(&mesh) > 0.0, "{name} is inside out");
            let mut edges: HashMap<(usize, usize), i32> = HashMap::new();
            for f in &mesh.faces {
                for k in 0..3 {
                    *edges.entry((f[k], f[(k + 1) % 3])).or_default() += 1;
                }
            }
            for (&(a, b), &count) in &edges {
                assert_eq!(count, 1, "{name}: directed edge repeated");
                assert!(edges.contains_key(&(b, a)), "{name}: boundary edge {a}-{b}");
            }
            assert!((0..mesh.faces.len()).all(|f| !mesh.is_degenerate(f)), "{name}");
        }
    }

    #[test]
    fn volumes_match_closed_forms() {
        let v = signed_volume(&icosphere(1.0, 4));
        assert!((v - 4.0 / 3.0 * PI).abs() < 0.01 * v);
        let v = signed_volume(&cuboid(Vec3::new(1.0, 2.0, 3.0), 3));
        assert!((v - 6.0).abs() < 1e-9);
        let v = signed_volume(&cylinder(1.0, 2.0, 256, 2, 2));
        assert!((v - 2.0 * PI).abs() < 0.01 * v);
    }
}
