use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::cloud::{Curvature, Vec3};
use crate::error::{Error, Result};

/// Triangle mesh with optional per-vertex normals and principal curvatures.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
    pub vertex_normals: Option<Vec<Vec3>>,
    pub vertex_curvatures: Option<Vec<Curvature>>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        if let Some((fi, _)) = faces.iter().enumerate().find(|(_, f)| f.iter().any(|&v| v >= n)) {
            return Err(Error::DegenerateMesh(format!("face {fi} references a missing vertex")));
        }
        Ok(TriMesh {
            vertices,
            faces,
            vertex_normals: None,
            vertex_curvatures: None,
        })
    }

    fn corners(&self, f: usize) -> [Vec3; 3] {
        self.faces[f].map(|v| self.vertices[v])
    }

    /// Unnormalized normal with length twice the face area.
    pub fn face_cross(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.corners(f);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, f: usize) -> f64 {
        0.5 * self.face_cross(f).norm()
    }

    /// Unit face normal, `None` for zero-area faces.
    pub fn face_normal(&self, f: usize) -> Option<Vec3> {
        let c = self.face_cross(f);
        let n = c.norm();
        (n > 0.0 && n.is_finite()).then(|| c / n)
    }

    pub fn is_degenerate(&self, f: usize) -> bool {
        self.face_normal(f).is_none()
    }

    /// Area-weighted average of incident face normals. Vertices without a
    /// non-degenerate incident face get `+z`.
    pub fn compute_vertex_normals(&mut self) {
        let mut acc = vec![Vec3::zeros(); self.vertices.len()];
        for f in 0..self.faces.len() {
            let c = self.face_cross(f);
            for &v in &self.faces[f] {
                acc[v] += c;
            }
        }
        self.vertex_normals = Some(
            acc.into_iter()
                .map(|n| {
                    let len = n.norm();
                    if len > 0.0 {
                        n / len
                    } else {
                        Vec3::z()
                    }
                })
                .collect(),
        );
    }

    /// Vertex normals with the weights of Max (1999): each incident face
    /// contributes `(e1 × e2) / (|e1|² |e2|²)` for its two edges at the vertex.
    /// Exact for vertices whose neighbours lie on a common sphere.
    pub fn max_weighted_normals(&self) -> Vec<Vec3> {
        let mut acc = vec![Vec3::zeros(); self.vertices.len()];
        for f in &self.faces {
            for k in 0..3 {
                let p = self.vertices[f[k]];
                let e1 = self.vertices[f[(k + 1) % 3]] - p;
                let e2 = self.vertices[f[(k + 2) % 3]] - p;
                let denom = e1.norm_squared() * e2.norm_squared();
                if denom > 0.0 {
                    acc[f[k]] += e1.cross(&e2) / denom;
                }
            }
        }
        acc.into_iter()
            .map(|n| {
                let len = n.norm();
                if len > 0.0 {
                    n / len
                } else {
                    Vec3::z()
                }
            })
            .collect()
    }

    pub fn bbox_diagonal(&self) -> f64 {
        let Some(first) = self.vertices.first() else {
            return 0.0;
        };
        let (lo, hi) = self
            .vertices
            .iter()
            .fold((*first, *first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
        (hi - lo).norm()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("obj") => parse_obj(&text, path),
            Some("ply") => parse_ply(&text, path),
            _ => Err(Error::parse(path, 0, "unsupported mesh extension (expected .obj or .ply)")),
        }
    }

    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {:.9} {:.9} {:.9}", v.x, v.y, v.z);
        }
        for f in &self.faces {
            let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
        }
        out
    }

    pub fn write_obj(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_obj()).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}

fn fan(poly: &[usize], faces: &mut Vec<[usize; 3]>) {
    for i in 1..poly.len() - 1 {
        faces.push([poly[0], poly[i], poly[i + 1]]);
    }
}

/// ASCII Wavefront OBJ: `v` and `f` records; other records are ignored.
/// Polygons are fan-triangulated. Negative (relative) indices are accepted.
pub fn parse_obj(text: &str, path: &Path) -> Result<TriMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("v") => {
                let mut c = [0.0; 3];
                for slot in &mut c {
                    let f = fields
                        .next()
                        .ok_or_else(|| Error::parse(path, lineno, "vertex needs 3 coordinates"))?;
                    *slot = f
                        .parse()
                        .map_err(|_| Error::parse(path, lineno, format!("bad coordinate `{f}`")))?;
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for f in fields {
                    let idx = f.split('/').next().unwrap_or("");
                    let i: i64 = idx
                        .parse()
                        .map_err(|_| Error::parse(path, lineno, format!("bad face index `{f}`")))?;
                    let n = vertices.len() as i64;
                    let resolved = match i {
                        0 => return Err(Error::parse(path, lineno, "face index 0 (OBJ indices are 1-based)")),
                        i if i > 0 => i - 1,
                        i => n + i,
                    };
                    if resolved < 0 || resolved >= n {
                        return Err(Error::parse(path, lineno, format!("face index {i} out of range")));
                    }
                    poly.push(resolved as usize);
                }
                if poly.len() < 3 {
                    return Err(Error::parse(path, lineno, "face needs at least 3 vertices"));
                }
                fan(&poly, &mut faces);
            }
            _ => {}
        }
    }
    TriMesh::new(vertices, faces)
}

struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<String>,
    has_list: bool,
}

/// ASCII PLY with a `vertex` element (x, y, z) and a `face` element holding a
/// vertex index list. Other elements and properties are skipped.
pub fn parse_ply(text: &str, path: &Path) -> Result<TriMesh> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(Error::parse(path, 1, "missing `ply` magic")),
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut header_done = false;
    for (lineno, line) in lines.by_ref() {
        let mut f = line.split_whitespace();
        match f.next() {
            Some("format") => {
                if f.next() != Some("ascii") {
                    return Err(Error::parse(path, lineno, "only ASCII PLY is supported"));
                }
            }
            Some("element") => {
                let name = f.next().unwrap_or("").to_string();
                let count = f
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| Error::parse(path, lineno, "bad element count"))?;
                elements.push(PlyElement {
                    name,
                    count,
                    properties: Vec::new(),
                    has_list: false,
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(path, lineno, "property before element"))?;
                let parts: Vec<&str> = f.collect();
                if parts.first() == Some(&"list") {
                    el.has_list = true;
                }
                el.properties.push(parts.last().unwrap_or(&"").to_string());
            }
            Some("end_header") => {
                header_done = true;
                break;
            }
            _ => {}
        }
    }
    if !header_done {
        return Err(Error::parse(path, 0, "missing end_header"));
    }
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut body = lines.filter(|(_, l)| !l.trim().is_empty());
    for el in &elements {
        for _ in 0..el.count {
            let (lineno, line) = body
                .next()
                .ok_or_else(|| Error::parse(path, 0, format!("unexpected end of file in element `{}`", el.name)))?;
            let vals: Vec<&str> = line.split_whitespace().collect();
            match el.name.as_str() {
                "vertex" => {
                    let mut c = [0.0; 3];
                    for (k, axis) in ["x", "y", "z"].iter().enumerate() {
                        let pos = el
                            .properties
                            .iter()
                            .position(|p| p == axis)
                            .ok_or_else(|| Error::parse(path, lineno, format!("vertex lacks `{axis}`")))?;
                        let v = vals
                            .get(pos)
                            .ok_or_else(|| Error::parse(path, lineno, "short vertex record"))?;
                        c[k] = v
                            .parse()
                            .map_err(|_| Error::parse(path, lineno, format!("bad coordinate `{v}`")))?;
                    }
                    vertices.push(Vec3::new(c[0], c[1], c[2]));
                }
                "face" if el.has_list => {
                    let n: usize = vals
                        .first()
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| Error::parse(path, lineno, "bad face vertex count"))?;
                    if n < 3 || vals.len() < n + 1 {
                        return Err(Error::parse(path, lineno, "face needs at least 3 indices"));
                    }
                    let mut poly = Vec::with_capacity(n);
                    for v in &vals[1..=n] {
                        let i: usize = v
                            .parse()
                            .map_err(|_| Error::parse(path, lineno, format!("bad face index `{v}`")))?;
                        poly.push(i);
                    }
                    if let Some(bad) = poly.iter().find(|&&i| i >= vertices.len().max(count_of(&elements, "vertex"))) {
                        return Err(Error::parse(path, lineno, format!("face index {bad} out of range")));
                    }
                    fan(&poly, &mut faces);
                }
                _ => {}
            }
        }
    }
    TriMesh::new(vertices, faces)
}

fn count_of(elements: &[PlyElement], name: &str) -> usize {
    elements.iter().find(|e| e.name == name).map(|e| e.count).unwrap_or(0)
}
