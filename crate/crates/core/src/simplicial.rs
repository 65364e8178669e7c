//! Metric simplicial 2-complexes: triangles with prescribed side lengths,
//! glued along shared edges of equal length. Provides validation, the vertex
//! separation radius epsilon(x), star sets S(x) and S(A), quasiconformality
//! certificates, neighborhood inclusion radii, and OBJ export. The intrinsic
//! (string) metric is realized by the mesh graphs in [`mesh`].

pub mod mesh;

pub use mesh::{chain_nodes, intrinsic_distance, mesh_graph, MeshGraph, NodeKind, MESH_SLACK_C0};

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for shared-edge length consistency between incident triangles.
pub const EDGE_CONSISTENCY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Triangle {
    /// vertex indices
    pub v: [usize; 3],
    /// side lengths: len[0] = |v0 v1|, len[1] = |v1 v2|, len[2] = |v2 v0|
    pub len: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct Edge {
    /// endpoint vertex indices with a < b
    pub v: (usize, usize),
    pub len: f64,
    /// incident triangle indices
    pub tris: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct ComplexJson {
    vertices: Vec<String>,
    triangles: Vec<(usize, usize, usize, f64, f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    embedding: Option<Vec<[f64; 3]>>,
}

/// A validated metric simplicial 2-complex.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ComplexJson", into = "ComplexJson")]
pub struct MetricComplex {
    vertices: Vec<String>,
    triangles: Vec<Triangle>,
    edges: Vec<Edge>,
    edge_index: HashMap<(usize, usize), usize>,
    vertex_tris: Vec<Vec<usize>>,
    vertex_edges: Vec<Vec<usize>>,
    embedding: Option<Vec<[f64; 3]>>,
}

impl TryFrom<ComplexJson> for MetricComplex {
    type Error = Error;

    fn try_from(j: ComplexJson) -> Result<Self> {
        MetricComplex::build(j.vertices, j.triangles, j.embedding, true)
    }
}

impl From<MetricComplex> for ComplexJson {
    fn from(c: MetricComplex) -> Self {
        ComplexJson {
            vertices: c.vertices.clone(),
            triangles: c
                .triangles
                .iter()
                .map(|t| (t.v[0], t.v[1], t.v[2], t.len[0], t.len[1], t.len[2]))
                .collect(),
            embedding: c.embedding,
        }
    }
}

impl MetricComplex {
    /// Validates and builds a complex from triangle records
    /// (v1, v2, v3, l12, l23, l31). In strict mode an edge shared by more
    /// than two triangles is rejected; relaxed mode permits it.
    pub fn build(
        vertices: Vec<String>,
        triangles: Vec<(usize, usize, usize, f64, f64, f64)>,
        embedding: Option<Vec<[f64; 3]>>,
        strict: bool,
    ) -> Result<MetricComplex> {
        let nv = vertices.len();
        if let Some(em) = &embedding {
            if em.len() != nv {
                return Err(Error::invalid(format!(
                    "embedding has {} rows for {} vertices",
                    em.len(),
                    nv
                )));
            }
        }
        let mut tris = Vec::with_capacity(triangles.len());
        for (idx, &(a, b, c, l01, l12, l20)) in triangles.iter().enumerate() {
            for &v in &[a, b, c] {
                if v >= nv {
                    return Err(Error::invalid(format!(
                        "triangle {} references vertex {} of {}",
                        idx, v, nv
                    )));
                }
            }
            if a == b || b == c || a == c {
                return Err(Error::invalid(format!("triangle {} repeats a vertex", idx)));
            }
            let lens = [l01, l12, l20];
            for &l in &lens {
                if !(l > 0.0) || !l.is_finite() {
                    return Err(Error::invalid(format!(
                        "triangle {} has non-positive side length",
                        idx
                    )));
                }
            }
            // strict triangle inequalities: degenerate triangles are rejected
            for i in 0..3 {
                if lens[i] >= lens[(i + 1) % 3] + lens[(i + 2) % 3] {
                    return Err(Error::invalid(format!(
                        "triangle {} is degenerate: side {} >= sum of the others",
                        idx, lens[i]
                    )));
                }
            }
            tris.push(Triangle {
                v: [a, b, c],
                len: lens,
            });
        }

        let mut edges: Vec<Edge> = Vec::new();
        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        for (t, tri) in tris.iter().enumerate() {
            for side in 0..3 {
                let a = tri.v[side];
                let b = tri.v[(side + 1) % 3];
                let key = (a.min(b), a.max(b));
                let len = tri.len[side];
                match edge_index.get(&key) {
                    Some(&e) => {
                        let known = edges[e].len;
                        if (known - len).abs() > EDGE_CONSISTENCY_TOL * known.max(1.0) {
                            return Err(Error::invalid(format!(
                                "edge ({}, {}) has inconsistent lengths {} and {}",
                                key.0, key.1, known, len
                            )));
                        }
                        edges[e].tris.push(t);
                    }
                    None => {
                        edge_index.insert(key, edges.len());
                        edges.push(Edge {
                            v: key,
                            len,
                            tris: vec![t],
                        });
                    }
                }
            }
        }
        if strict {
            for e in &edges {
                if e.tris.len() > 2 {
                    return Err(Error::invalid(format!(
                        "edge ({}, {}) lies in {} triangles",
                        e.v.0,
                        e.v.1,
                        e.tris.len()
                    )));
                }
            }
        }
        let mut vertex_tris = vec![Vec::new(); nv];
        for (t, tri) in tris.iter().enumerate() {
            for &v in &tri.v {
                vertex_tris[v].push(t);
            }
        }
        let mut vertex_edges = vec![Vec::new(); nv];
        for (e, edge) in edges.iter().enumerate() {
            vertex_edges[edge.v.0].push(e);
            vertex_edges[edge.v.1].push(e);
        }
        Ok(MetricComplex {
            vertices,
            triangles: tris,
            edges,
            edge_index,
            vertex_tris,
            vertex_edges,
            embedding,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_ids(&self) -> &[String] {
        &self.vertices
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn vertex_triangles(&self, v: usize) -> &[usize] {
        &self.vertex_tris[v]
    }

    pub fn vertex_edges(&self, v: usize) -> &[usize] {
        &self.vertex_edges[v]
    }

    pub fn embedding(&self) -> Option<&[[f64; 3]]> {
        self.embedding.as_deref()
    }

    /// Adjacency lists of the 1-skeleton, sorted.
    pub fn skeleton_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for e in &self.edges {
            adj[e.v.0].push(e.v.1);
            adj[e.v.1].push(e.v.0);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// True when every edge shared by two triangles is traversed in opposite
    /// directions by their boundary cycles (consistent orientation).
    pub fn is_consistently_oriented(&self) -> bool {
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for side in 0..3 {
                let a = tri.v[side];
                let b = tri.v[(side + 1) % 3];
                *directed.entry((a, b)).or_insert(0) += 1;
            }
        }
        // consistent iff no directed edge is used twice
        directed.values().all(|&count| count == 1)
    }

    /// Area of a triangle from its side lengths (numerically stable Heron).
    pub fn triangle_area(&self, t: usize) -> f64 {
        let l = self.triangles[t].len;
        heron_area(l[0], l[1], l[2])
    }

    /// Longest side of a triangle.
    pub fn triangle_diam(&self, t: usize) -> f64 {
        let l = self.triangles[t].len;
        l[0].max(l[1]).max(l[2])
    }

    /// Planar coordinates of a triangle's three corners, first corner at the
    /// origin and the second on the positive x axis.
    pub fn planar_realization(&self, t: usize) -> [[f64; 2]; 3] {
        let l = self.triangles[t].len;
        planar_triangle(l[0], l[1], l[2])
    }

    /// Wavefront OBJ text for an embedded complex (1-based indices).
    pub fn export_obj(&self) -> Result<String> {
        let embedding = self
            .embedding
            .as_ref()
            .ok_or_else(|| Error::precondition("complex has no embedding"))?;
        let mut out = String::new();
        for p in embedding {
            out.push_str(&format!("v {} {} {}\n", p[0], p[1], p[2]));
        }
        for tri in &self.triangles {
            out.push_str(&format!(
                "f {} {} {}\n",
                tri.v[0] + 1,
                tri.v[1] + 1,
                tri.v[2] + 1
            ));
        }
        Ok(out)
    }
}

pub fn heron_area(a: f64, b: f64, c: f64) -> f64 {
    // Kahan's stable ordering: a >= b >= c
    let mut s = [a, b, c];
    s.sort_by(|x, y| y.total_cmp(x));
    let (a, b, c) = (s[0], s[1], s[2]);
    let t = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    0.25 * t.max(0.0).sqrt()
}

/// Places a triangle with |AB| = l01, |BC| = l12, |CA| = l20 in the plane:
/// A at the origin, B on the x axis, C above it.
pub fn planar_triangle(l01: f64, l12: f64, l20: f64) -> [[f64; 2]; 3] {
    let x = (l01 * l01 + l20 * l20 - l12 * l12) / (2.0 * l01);
    let y2 = l20 * l20 - x * x;
    [[0.0, 0.0], [l01, 0.0], [x, y2.max(0.0).sqrt()]]
}

/// Distance from point p to the closed segment [a, b].
pub fn dist_point_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

/// Separation radius of vertex x: the smallest distance, inside any incident
/// simplex, from x to the union of that simplex's faces not containing x.
/// For an edge that is the far endpoint (the edge length); for a triangle it
/// is the distance to the closed opposite side.
pub fn epsilon_x(c: &MetricComplex, x: usize) -> Result<f64> {
    if x >= c.vertex_count() {
        return Err(Error::invalid(format!("vertex {} out of range", x)));
    }
    if c.vertex_edges(x).is_empty() && c.vertex_triangles(x).is_empty() {
        return Err(Error::invalid(format!("vertex {} is isolated", x)));
    }
    let mut eps = f64::INFINITY;
    for &e in c.vertex_edges(x) {
        eps = eps.min(c.edges()[e].len);
    }
    for &t in c.vertex_triangles(x) {
        let tri = &c.triangles()[t];
        let corner = tri.v.iter().position(|&v| v == x).expect("incidence");
        let coords = c.planar_realization(t);
        let p = coords[corner];
        let a = coords[(corner + 1) % 3];
        let b = coords[(corner + 2) % 3];
        eps = eps.min(dist_point_segment(p, a, b));
    }
    Ok(eps)
}

/// A set of simplices of a complex, stored by dimension.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimplexSet {
    pub vertices: BTreeSet<usize>,
    pub edges: BTreeSet<usize>,
    pub triangles: BTreeSet<usize>,
}

impl SimplexSet {
    pub fn count(&self) -> usize {
        self.vertices.len() + self.edges.len() + self.triangles.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Simplex {
    Vertex(usize),
    Edge(usize),
    Triangle(usize),
}

fn simplex_vertices(c: &MetricComplex, s: &Simplex) -> Vec<usize> {
    match *s {
        Simplex::Vertex(v) => vec![v],
        Simplex::Edge(e) => {
            let (a, b) = c.edges()[e].v;
            vec![a, b]
        }
        Simplex::Triangle(t) => c.triangles()[t].v.to_vec(),
    }
}

/// S(x): all simplices containing the vertex x, including x itself.
pub fn simplex_star(c: &MetricComplex, x: usize) -> SimplexSet {
    let mut set = SimplexSet::default();
    set.vertices.insert(x);
    for &e in c.vertex_edges(x) {
        set.edges.insert(e);
    }
    for &t in c.vertex_triangles(x) {
        set.triangles.insert(t);
    }
    set
}

/// S(A): all simplices meeting the closed simplex A. In a simplicial complex
/// two closed simplices intersect exactly when they share a vertex, so this
/// is the union of S(v) over the vertices of A, plus A's own faces.
pub fn simplices_meeting(c: &MetricComplex, a: &Simplex) -> SimplexSet {
    let mut set = SimplexSet::default();
    for v in simplex_vertices(c, a) {
        let star = simplex_star(c, v);
        set.vertices.extend(star.vertices);
        set.edges.extend(star.edges);
        set.triangles.extend(star.triangles);
    }
    // faces of A itself (its vertices are already in)
    match *a {
        Simplex::Vertex(_) => {}
        Simplex::Edge(e) => {
            set.edges.insert(e);
        }
        Simplex::Triangle(t) => {
            set.triangles.insert(t);
            let tri = &c.triangles()[t];
            for side in 0..3 {
                let a = tri.v[side];
                let b = tri.v[(side + 1) % 3];
                set.edges
                    .insert(c.edge_between(a, b).expect("triangle edge exists"));
            }
        }
    }
    set
}

/// Vertices at combinatorial distance < K from v in the 1-skeleton.
pub fn k_star_vertices(c: &MetricComplex, v: usize, k: usize) -> Vec<usize> {
    let adj = c.skeleton_adjacency();
    let mut out: Vec<usize> = crate::graph::bfs_hops(&adj, v, k.saturating_sub(1))
        .into_iter()
        .map(|(u, _)| u)
        .collect();
    out.sort_unstable();
    out
}

/// Quasiconformality certificate of a complex.
///
/// - `m1`: max number of simplices containing a single vertex (the max over
///   all points of the complex is attained at a vertex for a 2-complex);
/// - `m2`: max over triangles of the bi-Lipschitz constant of the best
///   diameter-normalized linear map onto the standard (equilateral, side 1)
///   2-simplex, from the extreme singular values over the six vertex
///   assignments;
/// - `m3`: max over vertices of the diameter ratio of incident triangles
///   (top-dimensional simplices; a complex built from a single triangle shape
///   has m3 = 1 exactly);
/// - `m`: max of the three.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QCCertificate {
    pub m1: usize,
    pub m2: f64,
    pub m3: f64,
    pub m: f64,
    pub m1_witness: usize,
    pub m2_witness: usize,
    pub m3_witness: usize,
}

/// Singular values (max, min) of a 2x2 matrix.
fn singular_values(a: [[f64; 2]; 2]) -> (f64, f64) {
    let g11 = a[0][0] * a[0][0] + a[1][0] * a[1][0];
    let g22 = a[0][1] * a[0][1] + a[1][1] * a[1][1];
    let g12 = a[0][0] * a[0][1] + a[1][0] * a[1][1];
    let tr = g11 + g22;
    let det = g11 * g22 - g12 * g12;
    let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
    let smax2 = 0.5 * (tr + disc);
    let smin2 = 0.5 * (tr - disc);
    (smax2.max(0.0).sqrt(), smin2.max(0.0).sqrt())
}

/// Bi-Lipschitz constant of the best linear map from a triangle with the
/// given side lengths, rescaled to diameter 1, onto the standard 2-simplex.
pub fn triangle_shape_constant(l01: f64, l12: f64, l20: f64) -> f64 {
    let diam = l01.max(l12).max(l20);
    let src = planar_triangle(l01 / diam, l12 / diam, l20 / diam);
    let dst = [[0.0, 0.0], [1.0, 0.0], [0.5, 3.0f64.sqrt() / 2.0]];
    let perms: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut best = f64::INFINITY;
    for perm in perms {
        // A maps src edge vectors to dst edge vectors of the assigned corners
        let u1 = sub(src[1], src[0]);
        let u2 = sub(src[2], src[0]);
        let w1 = sub(dst[perm[1]], dst[perm[0]]);
        let w2 = sub(dst[perm[2]], dst[perm[0]]);
        let det = u1[0] * u2[1] - u1[1] * u2[0];
        if det.abs() < 1e-300 {
            continue;
        }
        let inv = [
            [u2[1] / det, -u2[0] / det],
            [-u1[1] / det, u1[0] / det],
        ];
        // A = [w1 w2] * inv([u1 u2])
        let a = [
            [
                w1[0] * inv[0][0] + w2[0] * inv[1][0],
                w1[0] * inv[0][1] + w2[0] * inv[1][1],
            ],
            [
                w1[1] * inv[0][0] + w2[1] * inv[1][0],
                w1[1] * inv[0][1] + w2[1] * inv[1][1],
            ],
        ];
        let (smax, smin) = singular_values(a);
        if smin > 0.0 {
            best = best.min(smax.max(1.0 / smin));
        }
    }
    best
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn qc_certificate(c: &MetricComplex) -> QCCertificate {
    let mut m1 = 0usize;
    let mut m1_witness = 0usize;
    let mut m3 = 1.0f64;
    let mut m3_witness = 0usize;
    for v in 0..c.vertex_count() {
        let count = simplex_star(c, v).count();
        if count > m1 {
            m1 = count;
            m1_witness = v;
        }
        let tris = c.vertex_triangles(v);
        if tris.len() >= 2 {
            let mut lo = f64::INFINITY;
            let mut hi = 0.0f64;
            for &t in tris {
                let d = c.triangle_diam(t);
                lo = lo.min(d);
                hi = hi.max(d);
            }
            if lo > 0.0 && hi / lo > m3 {
                m3 = hi / lo;
                m3_witness = v;
            }
        }
    }
    let mut m2 = 1.0f64;
    let mut m2_witness = 0usize;
    for t in 0..c.triangle_count() {
        let l = c.triangles()[t].len;
        let shape = triangle_shape_constant(l[0], l[1], l[2]);
        if shape > m2 {
            m2 = shape;
            m2_witness = t;
        }
    }
    QCCertificate {
        m1,
        m2,
        m3,
        m: (m1 as f64).max(m2).max(m3),
        m1_witness,
        m2_witness,
        m3_witness,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeighborhoodInclusion {
    /// largest sampled radius r with N(A, r) inside the union of S(A);
    /// infinite when the complex has no nodes outside that union
    pub r: f64,
    pub diam_a: f64,
    /// r / diam(A), infinite in the no-exterior case
    pub ratio: f64,
}

/// Scans the level-m mesh: every node within the reported r of A (in the mesh
/// metric) lies on a simplex of S(A). Realized as the minimum mesh distance
/// from A to a node outside the union.
pub fn check_neighborhood_inclusion(
    c: &MetricComplex,
    a: &Simplex,
    m: usize,
) -> Result<NeighborhoodInclusion> {
    let mesh = mesh_graph(c, m);
    let star = simplices_meeting(c, a);
    let mut inside = vec![false; mesh.node_count()];
    for &t in &star.triangles {
        for &n in mesh.triangle_nodes(t) {
            inside[n] = true;
        }
    }
    for &e in &star.edges {
        for &n in mesh.edge_nodes(e) {
            inside[n] = true;
        }
    }
    for &v in &star.vertices {
        inside[v] = true;
    }
    let source_nodes: Vec<(usize, f64)> = match *a {
        Simplex::Vertex(v) => vec![(v, 0.0)],
        Simplex::Edge(e) => {
            let mut s: Vec<(usize, f64)> = mesh.edge_nodes(e).iter().map(|&n| (n, 0.0)).collect();
            let (p, q) = c.edges()[e].v;
            s.push((p, 0.0));
            s.push((q, 0.0));
            s
        }
        Simplex::Triangle(t) => mesh.triangle_nodes(t).iter().map(|&n| (n, 0.0)).collect(),
    };
    let diam_a = match *a {
        Simplex::Vertex(_) => 0.0,
        Simplex::Edge(e) => c.edges()[e].len,
        Simplex::Triangle(t) => c.triangle_diam(t),
    };
    let mut scratch = crate::graph::DijkstraScratch::new(mesh.node_count());
    scratch.run(mesh.csr(), &source_nodes, f64::INFINITY, None, &[]);
    let mut r = f64::INFINITY;
    for n in 0..mesh.node_count() {
        if !inside[n] {
            r = r.min(scratch.dist(n));
        }
    }
    let ratio = if diam_a > 0.0 { r / diam_a } else { f64::INFINITY };
    Ok(NeighborhoodInclusion { r, diam_a, ratio })
}
