use std::collections::VecDeque;

use crate::cloud::{SpatialIndex, Vec3};
use crate::error::{Error, Result};

/// Added to every edge weight so parallel normals do not produce zero-weight ties.
pub const EDGE_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct OrientationResult {
    /// Each entry is exactly ± the corresponding input normal.
    pub normals: Vec<Vec3>,
    /// Whether each normal was negated relative to the input.
    pub flipped: Vec<bool>,
    /// Spanning-forest edges `(parent, child)` in propagation order.
    pub edges: Vec<(usize, usize)>,
    pub components: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Symmetric k-NN graph with weights `1 − |nᵢ·nⱼ| + ε`, each edge once with
/// `a < b`, sorted by `(a, b)`.
pub fn riemannian_graph(points: &[Vec3], normals: &[Vec3], k: usize) -> Result<Vec<WeightedEdge>> {
    if points.len() != normals.len() {
        return Err(Error::ShapeMismatch(format!("{} normals for {} points", normals.len(), points.len())));
    }
    if k < 1 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if points.len() < 2 {
        return Ok(Vec::new());
    }
    let index = SpatialIndex::from_points(points)?;
    let k = (k + 1).min(points.len());
    let mut pairs = Vec::with_capacity(points.len() * k);
    for (i, p) in points.iter().enumerate() {
        for j in index.knn_query(p, k)? {
            if j != i {
                pairs.push((i.min(j), i.max(j)));
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    Ok(pairs
        .into_iter()
        .map(|(a, b)| WeightedEdge {
            a,
            b,
            weight: 1.0 - normals[a].dot(&normals[b]).abs() + EDGE_EPSILON,
        })
        .collect())
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet { parent: (0..n).collect(), rank: vec![0; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Kruskal's minimum spanning forest over `n` vertices. Ties are broken by
/// endpoint indices.
pub fn minimum_spanning_forest(n: usize, edges: &[WeightedEdge]) -> Vec<WeightedEdge> {
    let mut sorted = edges.to_vec();
    sorted.sort_by(|x, y| x.weight.total_cmp(&y.weight).then(x.a.cmp(&y.a)).then(x.b.cmp(&y.b)));
    let mut sets = DisjointSet::new(n);
    sorted.into_iter().filter(|e| sets.union(e.a, e.b)).collect()
}

/// Consistent normal orientation by propagation along a minimum spanning
/// forest of the k-NN Riemannian graph. In every connected component the point
/// with the largest z (lowest index on ties) is oriented towards +z first.
pub fn mst_orient(points: &[Vec3], normals: &[Vec3], k: usize) -> Result<OrientationResult> {
    if k < 2 {
        return Err(Error::InvalidArgument("k must be at least 2".into()));
    }
    let n = points.len();
    let graph = riemannian_graph(points, normals, k)?;
    let tree = minimum_spanning_forest(n, &graph);
    let mut adjacency = vec![Vec::new(); n];
    for e in &tree {
        adjacency[e.a].push(e.b);
        adjacency[e.b].push(e.a);
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| points[j].z.total_cmp(&points[i].z).then(i.cmp(&j)));
    let mut visited = vec![false; n];
    let mut flipped = vec![false; n];
    let mut edges = Vec::with_capacity(tree.len());
    let mut components = 0;
    for &seed in &order {
        if visited[seed] {
            continue;
        }
        components += 1;
        visited[seed] = true;
        flipped[seed] = normals[seed].z < 0.0;
        let mut queue = VecDeque::from([seed]);
        while let Some(parent) = queue.pop_front() {
            let oriented = if flipped[parent] { -normals[parent] } else { normals[parent] };
            for &child in &adjacency[parent] {
                if visited[child] {
                    continue;
                }
                visited[child] = true;
                flipped[child] = oriented.dot(&normals[child]) < 0.0;
                edges.push((parent, child));
                queue.push_back(child);
            }
        }
    }
    let normals = normals
        .iter()
        .zip(&flipped)
        .map(|(n, &f)| if f { -n } else { *n })
        .collect();
    Ok(OrientationResult {
        normals,
        flipped,
        edges,
        components,
    })
}
