//! Piecewise-flat mesh graphs realizing the intrinsic metric of a complex.
//!
//! Level m places m nodes on every edge, in dyadic refinement order
//! (1/2, then 1/4, 3/4, then 1/8, 3/8, ...), plus a triangular lattice of
//! m(m-1)/2 nodes inside every triangle, then connects every node pair
//! within each closed triangle by an edge weighted with the flat in-triangle
//! distance. Shortest paths in this graph overestimate intrinsic distances:
//! every graph path concatenates straight in-triangle segments, and the
//! restriction is only that crossings of shared edges happen at edge nodes,
//! which perturbs an optimal path at second order in the node spacing.
//!
//! The dyadic order makes the edge-node set of a coarser level a subset of
//! every finer level, so refining never lengthens a shortest path: interior
//! nodes cannot shorten paths (the complete in-triangle edges already give
//! the straight-line distance between boundary nodes), and every coarser
//! path survives verbatim in the finer graph.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite_metric::FiniteMetric;
use crate::graph::{Csr, DijkstraScratch};
use crate::simplicial::MetricComplex;

/// Slack model constant: the reported lower hint at level m is
/// upper / (1 + MESH_SLACK_C0 / max(m, 1)). A heuristic error budget for the
/// lattice scheme, reported as a hint and never certified.
pub const MESH_SLACK_C0: f64 = 1.0;

/// Parameter of the k-th (1-based) edge node in dyadic refinement order,
/// measured from the edge's smaller vertex: 1/2, 1/4, 3/4, 1/8, 3/8, ...
pub fn dyadic_parameter(k: usize) -> f64 {
    debug_assert!(k >= 1);
    let p = usize::BITS - 1 - k.leading_zeros(); // floor(log2 k)
    let q = k - (1usize << p);
    (2 * q + 1) as f64 / (1usize << (p + 1)) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Vertex(usize),
    /// k-th node (1-based) on the edge in dyadic refinement order,
    /// parameter measured from its smaller vertex
    EdgeNode { edge: usize, index: usize },
    /// interior lattice node with barycentric weights
    /// (m + 1 - i - j, i, j) / (m + 1) on the triangle's corners
    Interior { tri: usize, i: usize, j: usize },
}

/// Level-m mesh graph of a complex. Nodes 0..vertex_count coincide with the
/// complex's vertices.
pub struct MeshGraph {
    pub m: usize,
    graph: Csr,
    vertex_count: usize,
    kinds: Vec<NodeKind>,
    tri_nodes: Vec<Vec<usize>>,
    edge_node_lists: Vec<Vec<usize>>,
    node_tris: Vec<Vec<usize>>,
    area_weight: Vec<f64>,
    positions: Option<Vec<[f64; 3]>>,
}

impl MeshGraph {
    pub fn node_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn csr(&self) -> &Csr {
        &self.graph
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    /// All nodes on the closed triangle t: corners, side nodes, interior.
    pub fn triangle_nodes(&self, t: usize) -> &[usize] {
        &self.tri_nodes[t]
    }

    /// Steiner nodes strictly inside edge e (empty at level 0).
    pub fn edge_nodes(&self, e: usize) -> &[usize] {
        &self.edge_node_lists[e]
    }

    /// Triangles whose closure contains the node.
    pub fn node_triangles(&self, n: usize) -> &[usize] {
        &self.node_tris[n]
    }

    /// Area quadrature weight of a node: each triangle's area is split
    /// evenly over the nodes in its closure. Weights sum to the total area.
    pub fn area_weight(&self, n: usize) -> f64 {
        self.area_weight[n]
    }

    pub fn area_weights(&self) -> &[f64] {
        &self.area_weight
    }

    /// Node positions in the ambient embedding, when the complex has one.
    pub fn positions(&self) -> Option<&[[f64; 3]]> {
        self.positions.as_deref()
    }

    /// Shortest-path distances from one node to every node.
    pub fn distances_from(&self, src: usize) -> Vec<f64> {
        DijkstraScratch::new(self.node_count()).distances_from(&self.graph, src)
    }

    /// Shortest-path distance between two nodes, with early exit.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let mut scratch = DijkstraScratch::new(self.node_count());
        scratch.run(&self.graph, &[(a, 0.0)], f64::INFINITY, None, &[b]);
        scratch.dist(b)
    }

    /// Mesh metric restricted to the given nodes, with the given point ids.
    /// Rows are computed in parallel for sources in the upper triangle and
    /// mirrored, so the result is exactly symmetric.
    pub fn metric_on(&self, nodes: &[usize], ids: Vec<String>) -> Result<FiniteMetric> {
        if ids.len() != nodes.len() {
            return Err(Error::invalid("one id per node required"));
        }
        let rows: Vec<Vec<f64>> = nodes
            .par_iter()
            .map_init(
                || DijkstraScratch::new(self.node_count()),
                |scratch, &src| {
                    scratch.run(&self.graph, &[(src, 0.0)], f64::INFINITY, None, &[]);
                    nodes.iter().map(|&dst| scratch.dist(dst)).collect()
                },
            )
            .collect();
        let n = nodes.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = rows[i][j];
                if !d.is_finite() {
                    return Err(Error::precondition(
                        "mesh is disconnected across the requested nodes",
                    ));
                }
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        Ok(FiniteMetric::from_flat(ids, dist))
    }
}

struct TriLocal {
    nodes: Vec<usize>,
    coords: Vec<[f64; 2]>,
}

/// Builds the level-m mesh graph of a complex.
pub fn mesh_graph(c: &MetricComplex, m: usize) -> MeshGraph {
    let nv = c.vertex_count();
    let ne = c.edges().len();
    let nt = c.triangle_count();
    let interior_per_tri = m * m.saturating_sub(1) / 2;
    let node_count = nv + ne * m + nt * interior_per_tri;

    let mut kinds = Vec::with_capacity(node_count);
    for v in 0..nv {
        kinds.push(NodeKind::Vertex(v));
    }
    for e in 0..ne {
        for i in 1..=m {
            kinds.push(NodeKind::EdgeNode { edge: e, index: i });
        }
    }
    for t in 0..nt {
        for i in 1..m {
            for j in 1..=(m - i) {
                kinds.push(NodeKind::Interior { tri: t, i, j });
            }
        }
    }
    debug_assert_eq!(kinds.len(), node_count);

    let edge_node_id = |e: usize, i: usize| nv + e * m + (i - 1);
    let mut interior_base = vec![0usize; nt];
    for t in 0..nt {
        interior_base[t] = nv + ne * m + t * interior_per_tri;
    }

    let locals: Vec<TriLocal> = (0..nt)
        .map(|t| {
            let tri = &c.triangles()[t];
            let corners = c.planar_realization(t);
            let mut nodes = Vec::new();
            let mut coords = Vec::new();
            for (k, &v) in tri.v.iter().enumerate() {
                nodes.push(v);
                coords.push(corners[k]);
            }
            for side in 0..3 {
                let a = tri.v[side];
                let b = tri.v[(side + 1) % 3];
                let e = c.edge_between(a, b).expect("triangle side is an edge");
                // edge parameters run from the smaller vertex index
                let (from, to) = if a < b { (side, (side + 1) % 3) } else { ((side + 1) % 3, side) };
                for i in 1..=m {
                    nodes.push(edge_node_id(e, i));
                    coords.push(lerp(corners[from], corners[to], dyadic_parameter(i)));
                }
            }
            let mut offset = 0usize;
            for i in 1..m {
                for j in 1..=(m - i) {
                    let wa = (m + 1 - i - j) as f64;
                    let (wb, wc) = (i as f64, j as f64);
                    let denom = (m + 1) as f64;
                    nodes.push(interior_base[t] + offset);
                    coords.push([
                        (wa * corners[0][0] + wb * corners[1][0] + wc * corners[2][0]) / denom,
                        (wa * corners[0][1] + wb * corners[1][1] + wc * corners[2][1]) / denom,
                    ]);
                    offset += 1;
                }
            }
            TriLocal { nodes, coords }
        })
        .collect();

    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for local in &locals {
        let k = local.nodes.len();
        for p in 0..k {
            for q in (p + 1)..k {
                let d = dist2(local.coords[p], local.coords[q]);
                edges.push((local.nodes[p], local.nodes[q], d));
            }
        }
    }
    let graph = Csr::from_edges(node_count, &edges);

    let tri_nodes: Vec<Vec<usize>> = locals.iter().map(|l| l.nodes.clone()).collect();
    let mut edge_node_lists = vec![Vec::new(); ne];
    for e in 0..ne {
        for i in 1..=m {
            edge_node_lists[e].push(edge_node_id(e, i));
        }
    }
    let mut node_tris = vec![Vec::new(); node_count];
    for (t, l) in locals.iter().enumerate() {
        for &n in &l.nodes {
            node_tris[n].push(t);
        }
    }
    let mut area_weight = vec![0.0; node_count];
    for (t, l) in locals.iter().enumerate() {
        let share = c.triangle_area(t) / l.nodes.len() as f64;
        for &n in &l.nodes {
            area_weight[n] += share;
        }
    }
    let positions = c.embedding().map(|em| {
        let mut pos = vec![[0.0f64; 3]; node_count];
        for (n, kind) in kinds.iter().enumerate() {
            pos[n] = match *kind {
                NodeKind::Vertex(v) => em[v],
                NodeKind::EdgeNode { edge, index } => {
                    let (a, b) = c.edges()[edge].v;
                    lerp3(em[a], em[b], dyadic_parameter(index))
                }
                NodeKind::Interior { tri, i, j } => {
                    let tv = c.triangles()[tri].v;
                    let wa = (m + 1 - i - j) as f64;
                    let denom = (m + 1) as f64;
                    let mut p = [0.0; 3];
                    for d in 0..3 {
                        p[d] = (wa * em[tv[0]][d]
                            + i as f64 * em[tv[1]][d]
                            + j as f64 * em[tv[2]][d])
                            / denom;
                    }
                    p
                }
            };
        }
        pos
    });

    MeshGraph {
        m,
        graph,
        vertex_count: nv,
        kinds,
        tri_nodes,
        edge_node_lists,
        node_tris,
        area_weight,
        positions,
    }
}

fn lerp(a: [f64; 2], b: [f64; 2], t: f64) -> [f64; 2] {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

fn lerp3(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [
        a[0] + t * (b[0] - a[0]),
        a[1] + t * (b[1] - a[1]),
        a[2] + t * (b[2] - a[2]),
    ]
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Intrinsic distance between two complex vertices at mesh level m.
/// Returns (upper, lower_hint): the level-m shortest path length, which is an
/// upper bound, and the heuristic hint upper / (1 + [`MESH_SLACK_C0`] / m).
pub fn intrinsic_distance(
    c: &MetricComplex,
    x: usize,
    y: usize,
    m: usize,
) -> Result<(f64, f64)> {
    if x >= c.vertex_count() || y >= c.vertex_count() {
        return Err(Error::invalid("vertex index out of range"));
    }
    let mesh = mesh_graph(c, m);
    let mut scratch = DijkstraScratch::new(mesh.node_count());
    scratch.run(mesh.csr(), &[(x, 0.0)], f64::INFINITY, None, &[y]);
    let upper = scratch.dist(y);
    if !upper.is_finite() && x != y {
        return Err(Error::precondition(format!(
            "vertices {} and {} lie in different components",
            x, y
        )));
    }
    let slack = MESH_SLACK_C0 / m.max(1) as f64;
    Ok((upper, upper / (1.0 + slack)))
}

/// Mesh nodes along a vertex chain: the chain vertices plus the edge nodes
/// of every consecutive edge. Errors when consecutive vertices share no edge.
pub fn chain_nodes(c: &MetricComplex, mesh: &MeshGraph, chain: &[usize]) -> Result<Vec<usize>> {
    let mut out: Vec<usize> = chain.to_vec();
    for win in chain.windows(2) {
        let e = c.edge_between(win[0], win[1]).ok_or_else(|| {
            Error::invalid(format!("no edge between vertices {} and {}", win[0], win[1]))
        })?;
        out.extend_from_slice(mesh.edge_nodes(e));
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids;
    use crate::sampling::seeded_rng;
    use rand::Rng;

    #[test]
    fn node_counts_match_the_lattice_formula() {
        let grid = grids::flat_grid(2, 1.0);
        let c = &grid.complex;
        for m in [0usize, 1, 2, 4] {
            let mesh = mesh_graph(c, m);
            let expect = c.vertex_count() + c.edges().len() * m
                + c.triangle_count() * m * m.saturating_sub(1) / 2;
            assert_eq!(mesh.node_count(), expect);
            for t in 0..c.triangle_count() {
                assert_eq!(mesh.triangle_nodes(t).len(), (m + 2) * (m + 3) / 2);
            }
        }
    }

    #[test]
    fn area_weights_sum_to_total_area() {
        let grid = grids::flat_grid(3, 1.0);
        let mesh = mesh_graph(&grid.complex, 3);
        let total: f64 = (0..grid.complex.triangle_count())
            .map(|t| grid.complex.triangle_area(t))
            .sum();
        let sum: f64 = mesh.area_weights().iter().sum();
        assert!((sum - total).abs() < 1e-12 * total);
    }

    #[test]
    fn adjacent_vertices_realize_the_side_length() {
        let c = MetricComplex::build(
            vec!["a".into(), "b".into(), "c".into()],
            vec![(0, 1, 2, 0.7, 1.1, 0.9)],
            None,
            true,
        )
        .unwrap();
        for m in [0usize, 3, 8] {
            let (d01, _) = intrinsic_distance(&c, 0, 1, m).unwrap();
            assert_eq!(d01, 0.7, "first side is exact by construction");
            let (d12, _) = intrinsic_distance(&c, 1, 2, m).unwrap();
            assert!((d12 - 1.1).abs() < 1e-12);
            let (d20, _) = intrinsic_distance(&c, 2, 0, m).unwrap();
            assert!((d20 - 0.9).abs() < 1e-12);
        }
    }

    #[test]
    fn square_diagonal_crossing_is_near_the_unfolded_geodesic() {
        // unit square, two right triangles sharing the diagonal (0, 2);
        // opposite corners 1 and 3 connect only across that diagonal, and the
        // unfolded geodesic has length sqrt(2)
        let s2 = 2.0f64.sqrt();
        let c = MetricComplex::build(
            (0..4).map(|k| k.to_string()).collect(),
            vec![(0, 1, 2, 1.0, 1.0, s2), (0, 2, 3, s2, 1.0, 1.0)],
            None,
            true,
        )
        .unwrap();
        let (upper, hint) = intrinsic_distance(&c, 1, 3, 8).unwrap();
        assert!(upper >= s2 - 1e-12, "mesh distance is an upper bound");
        assert!(upper <= 1.46, "upper = {}", upper);
        assert!(hint <= upper);
        // the diagonal midpoint is an edge node, so the crossing is optimal
        assert!((upper - s2).abs() < 1e-12);
        // level 1 only has the midpoint and already achieves it
        let (u1, _) = intrinsic_distance(&c, 1, 3, 1).unwrap();
        assert!((u1 - s2).abs() < 1e-12);
    }

    #[test]
    fn dyadic_parameters_nest_and_fill() {
        let expect = [0.5, 0.25, 0.75, 0.125, 0.375, 0.625, 0.875, 0.0625];
        for (k, &e) in expect.iter().enumerate() {
            assert_eq!(dyadic_parameter(k + 1), e);
        }
        // first 2^p - 1 parameters tile the interval uniformly
        let mut first15: Vec<f64> = (1..=15).map(dyadic_parameter).collect();
        first15.sort_by(f64::total_cmp);
        for (i, &v) in first15.iter().enumerate() {
            assert_eq!(v, (i + 1) as f64 / 16.0);
        }
    }

    #[test]
    fn cube_antipodal_distance_at_level_16() {
        let cube = grids::cube_surface();
        // vertices c000 (index 0) and c111 (index 7)
        let (upper, _) = intrinsic_distance(&cube, 0, 7, 16).unwrap();
        let true_geodesic = 5.0f64.sqrt();
        assert!(upper >= true_geodesic - 1e-12);
        assert!(upper <= true_geodesic + 0.02, "upper = {}", upper);
    }

    /// Random convex fan: a center vertex surrounded by a convex polygon with
    /// jittered radii and angles, triangulated as a fan.
    fn random_fan(seed: u64) -> MetricComplex {
        let mut rng = seeded_rng(seed);
        let k = 8 + (seed % 4) as usize;
        let mut pts: Vec<[f64; 2]> = Vec::new();
        for i in 0..k {
            let th = 2.0 * std::f64::consts::PI * (i as f64 + rng.gen_range(-0.2..0.2)) / k as f64;
            let r = rng.gen_range(0.8..1.3);
            pts.push([r * th.cos(), r * th.sin()]);
        }
        let d = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let mut vertices: Vec<String> = vec!["center".into()];
        vertices.extend((0..k).map(|i| format!("p{}", i)));
        let mut triangles = Vec::new();
        for i in 0..k {
            let (a, b) = (pts[i], pts[(i + 1) % k]);
            triangles.push((
                0,
                i + 1,
                (i + 1) % k + 1,
                d([0.0, 0.0], a),
                d(a, b),
                d(b, [0.0, 0.0]),
            ));
        }
        MetricComplex::build(vertices, triangles, None, true).unwrap()
    }

    #[test]
    fn refinement_does_not_increase_distances() {
        let levels = [0usize, 2, 4, 8, 16];
        for seed in 0..20u64 {
            let c = random_fan(seed);
            let x = 1;
            let y = 1 + c.vertex_count() / 2;
            let mut prev = f64::INFINITY;
            for &m in &levels {
                let (upper, _) = intrinsic_distance(&c, x, y, m).unwrap();
                assert!(
                    upper <= prev * (1.0 + 1e-9),
                    "seed {} level {}: {} > {}",
                    seed,
                    m,
                    upper,
                    prev
                );
                prev = prev.min(upper);
            }
        }
    }

    #[test]
    fn vertex_separation_brackets_distances_within_a_simplex() {
        // for distinct vertices x, y of a common triangle:
        // eps(x) <= d(x, y) <= diam of that triangle, checked with the
        // analytic eps and the mesh upper bound (which equals the side here)
        for seed in 0..10u64 {
            let c = random_fan(seed);
            let mesh = mesh_graph(&c, 2);
            let mut scratch = DijkstraScratch::new(mesh.node_count());
            for t in 0..c.triangle_count() {
                let tri = c.triangles()[t];
                let diam = c.triangle_diam(t);
                for a in 0..3 {
                    for b in 0..3 {
                        if a == b {
                            continue;
                        }
                        let (x, y) = (tri.v[a], tri.v[b]);
                        scratch.run(mesh.csr(), &[(x, 0.0)], f64::INFINITY, None, &[y]);
                        let d = scratch.dist(y);
                        let eps = crate::simplicial::epsilon_x(&c, x).unwrap();
                        assert!(eps <= d + 1e-12, "eps {} > d {}", eps, d);
                        assert!(d <= diam + 1e-12, "d {} > diam {}", d, diam);
                    }
                }
            }
        }
    }

    #[test]
    fn metric_on_is_symmetric_and_matches_single_pair_queries() {
        let grid = grids::flat_grid(3, 1.0);
        let mesh = mesh_graph(&grid.complex, 2);
        let nodes: Vec<usize> = (0..grid.complex.vertex_count()).collect();
        let ids = grid.complex.vertex_ids().to_vec();
        let fm = mesh.metric_on(&nodes, ids).unwrap();
        for i in 0..nodes.len() {
            for j in 0..nodes.len() {
                assert_eq!(fm.d(i, j), fm.d(j, i));
            }
        }
        let d = mesh.distance(nodes[0], nodes[5]);
        assert!((fm.d(0, 5) - d).abs() < 1e-12);
    }

    #[test]
    fn disconnected_components_are_reported() {
        let c = MetricComplex::build(
            (0..6).map(|k| k.to_string()).collect(),
            vec![
                (0, 1, 2, 1.0, 1.0, 1.0),
                (3, 4, 5, 1.0, 1.0, 1.0),
            ],
            None,
            true,
        )
        .unwrap();
        assert!(intrinsic_distance(&c, 0, 3, 2).is_err());
    }
}
