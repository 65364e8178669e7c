//! Graph-plus-cover approximations of metric spaces: a graph G, center
//! points p, radii r, and an open cover U, subject to the valence, ball
//! sandwich, overlap, and star-neighborhood axioms. Includes the derived
//! separation and comparability properties, skeleton approximations of
//! complexes with tight certified constants, images under point maps, and
//! the chain lemmas.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite_metric::FiniteMetric;
use crate::graph::DijkstraScratch;
use crate::simplicial::{epsilon_x, MeshGraph, MetricComplex};

thread_local! {
    static WITHIN_SCRATCH: std::cell::RefCell<Option<DijkstraScratch>> =
        const { std::cell::RefCell::new(None) };
}

/// The metric space an approximation lives over: either a finite metric
/// (distances by lookup) or a mesh graph (distances by shortest path).
/// Sample points are indices 0..len().
pub enum Host<'a> {
    Finite(&'a FiniteMetric),
    Mesh(&'a MeshGraph),
}

impl Host<'_> {
    pub fn len(&self) -> usize {
        match self {
            Host::Finite(m) => m.len(),
            Host::Mesh(g) => g.node_count(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Points within `cutoff` of the source set, as (point, distance).
    /// Sources carry initial offsets.
    pub fn within(&self, sources: &[(usize, f64)], cutoff: f64) -> Vec<(usize, f64)> {
        match self {
            Host::Finite(m) => {
                let mut out = Vec::new();
                for j in 0..m.len() {
                    let mut best = f64::INFINITY;
                    for &(s, off) in sources {
                        best = best.min(off + m.d(s, j));
                    }
                    if best <= cutoff {
                        out.push((j, best));
                    }
                }
                out
            }
            Host::Mesh(g) => {
                // truncated runs touch few nodes; reusing the stamped scratch
                // avoids an O(n) allocation per call
                WITHIN_SCRATCH.with(|cell| {
                    let mut slot = cell.borrow_mut();
                    let scratch = match slot.as_mut() {
                        Some(s) if s.node_count() == g.node_count() => s,
                        _ => slot.insert(DijkstraScratch::new(g.node_count())),
                    };
                    scratch.run(g.csr(), sources, cutoff, None, &[]);
                    let mut out: Vec<(usize, f64)> = scratch
                        .touched()
                        .iter()
                        .map(|&n| (n, scratch.dist(n)))
                        .filter(|&(_, d)| d <= cutoff)
                        .collect();
                    out.sort_unstable_by_key(|&(n, _)| n);
                    out
                })
            }
        }
    }

    /// Distance between two sample points.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        match self {
            Host::Finite(m) => m.d(a, b),
            Host::Mesh(g) => g.distance(a, b),
        }
    }

    /// Full distance vector from one point.
    pub fn distances_from(&self, src: usize) -> Vec<f64> {
        match self {
            Host::Finite(m) => m.row(src).to_vec(),
            Host::Mesh(g) => g.distances_from(src),
        }
    }

    /// Minimum distance to the source set, for every point.
    pub fn distances_from_set(&self, sources: &[usize]) -> Vec<f64> {
        let srcs: Vec<(usize, f64)> = sources.iter().map(|&s| (s, 0.0)).collect();
        match self {
            Host::Finite(m) => (0..m.len())
                .map(|j| {
                    srcs.iter()
                        .fold(f64::INFINITY, |acc, &(s, _)| acc.min(m.d(s, j)))
                })
                .collect(),
            Host::Mesh(g) => {
                let mut scratch = DijkstraScratch::new(g.node_count());
                scratch.run(g.csr(), &srcs, f64::INFINITY, None, &[]);
                (0..g.node_count()).map(|n| scratch.dist(n)).collect()
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ApproxJson {
    adjacency: Vec<(usize, usize)>,
    p: BTreeMap<String, usize>,
    r: BTreeMap<String, f64>,
    #[serde(rename = "U")]
    u: BTreeMap<String, Vec<usize>>,
}

/// A graph-plus-cover approximation: vertex v carries a center point p[v],
/// a radius r[v] > 0, and a point set u_sets[v] over the host's sample
/// points.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ApproxJson", into = "ApproxJson")]
pub struct Approximation {
    pub adjacency: Vec<Vec<usize>>,
    pub p: Vec<usize>,
    pub r: Vec<f64>,
    pub u_sets: Vec<Vec<usize>>,
}

impl TryFrom<ApproxJson> for Approximation {
    type Error = Error;

    fn try_from(j: ApproxJson) -> Result<Self> {
        let n = j.p.len();
        if j.r.len() != n || j.u.len() != n {
            return Err(Error::invalid("p, r, U must share the vertex set"));
        }
        let mut p = vec![0usize; n];
        let mut r = vec![0.0; n];
        let mut u_sets = vec![Vec::new(); n];
        for (key, &point) in &j.p {
            let v: usize = key
                .parse()
                .map_err(|_| Error::invalid(format!("bad vertex key {}", key)))?;
            if v >= n {
                return Err(Error::invalid(format!("vertex key {} out of range", v)));
            }
            p[v] = point;
        }
        for (key, &val) in &j.r {
            let v: usize = key
                .parse()
                .map_err(|_| Error::invalid(format!("bad vertex key {}", key)))?;
            r[v] = val;
        }
        for (key, pts) in j.u {
            let v: usize = key
                .parse()
                .map_err(|_| Error::invalid(format!("bad vertex key {}", key)))?;
            u_sets[v] = pts;
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &j.adjacency {
            if a >= n || b >= n {
                return Err(Error::invalid("adjacency references unknown vertex"));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        Approximation::new(adjacency, p, r, u_sets)
    }
}

impl From<Approximation> for ApproxJson {
    fn from(a: Approximation) -> Self {
        let mut adjacency = Vec::new();
        for (v, nb) in a.adjacency.iter().enumerate() {
            for &w in nb {
                if v < w {
                    adjacency.push((v, w));
                }
            }
        }
        ApproxJson {
            adjacency,
            p: a.p.iter().enumerate().map(|(v, &x)| (v.to_string(), x)).collect(),
            r: a.r.iter().enumerate().map(|(v, &x)| (v.to_string(), x)).collect(),
            u: a
                .u_sets
                .iter()
                .enumerate()
                .map(|(v, s)| (v.to_string(), s.clone()))
                .collect(),
        }
    }
}

impl Approximation {
    pub fn new(
        adjacency: Vec<Vec<usize>>,
        p: Vec<usize>,
        r: Vec<f64>,
        u_sets: Vec<Vec<usize>>,
    ) -> Result<Approximation> {
        let n = p.len();
        if adjacency.len() != n || r.len() != n || u_sets.len() != n {
            return Err(Error::invalid("component lengths disagree"));
        }
        if let Some(v) = r.iter().position(|&x| !(x > 0.0)) {
            return Err(Error::invalid(format!("radius of vertex {} not positive", v)));
        }
        let mut adjacency = adjacency;
        for (v, nb) in adjacency.iter_mut().enumerate() {
            nb.sort_unstable();
            nb.dedup();
            if nb.binary_search(&v).is_ok() {
                return Err(Error::invalid(format!("vertex {} has a self loop", v)));
            }
        }
        let mut u_sets = u_sets;
        for s in &mut u_sets {
            s.sort_unstable();
            s.dedup();
        }
        Ok(Approximation {
            adjacency,
            p,
            r,
            u_sets,
        })
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn contains(&self, v: usize, point: usize) -> bool {
        self.u_sets[v].binary_search(&point).is_ok()
    }

    /// Inverted index: for each host point, the vertices whose U contains it.
    pub fn owners(&self, host_len: usize) -> Vec<Vec<usize>> {
        let mut owners = vec![Vec::new(); host_len];
        for (v, s) in self.u_sets.iter().enumerate() {
            for &x in s {
                owners[x].push(v);
            }
        }
        owners
    }

    /// Hop counts from v up to max_hops, as a sparse map.
    fn hops_from(&self, v: usize, max_hops: usize) -> HashMap<usize, usize> {
        crate::graph::bfs_hops(&self.adjacency, v, max_hops)
            .into_iter()
            .collect()
    }
}

/// Combinatorial graph distance; None when disconnected.
pub fn comb_distance(a: &Approximation, u: usize, v: usize) -> Option<usize> {
    if u == v {
        return Some(0);
    }
    let hops = a.hops_from(u, a.len());
    hops.get(&v).copied()
}

/// K-star of v: the union of U_u over vertices with k(u,v) < K.
pub fn star(a: &Approximation, v: usize, k: usize) -> Vec<usize> {
    assert!(k >= 1, "star radius must be at least 1");
    let hops = a.hops_from(v, k - 1);
    let mut out = Vec::new();
    for (&u, _) in &hops {
        out.extend_from_slice(&a.u_sets[u]);
    }
    out.sort_unstable();
    out.dedup();
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub pass: bool,
    pub witness: Option<String>,
}

impl Check {
    fn ok() -> Check {
        Check {
            pass: true,
            witness: None,
        }
    }

    fn fail(witness: String) -> Check {
        Check {
            pass: false,
            witness: Some(witness),
        }
    }
}

/// Sampling budget for the quadratic derived property (A7-style
/// comparability); exhaustive enumeration over far pairs is quadratic in the
/// vertex count and cubic in U sizes, so the check runs on seeded samples.
#[derive(Debug, Clone, Copy)]
pub struct CheckBudget {
    pub far_pairs: usize,
    pub sources_per_set: usize,
    pub seed: u64,
}

impl Default for CheckBudget {
    fn default() -> Self {
        CheckBudget {
            far_pairs: 120,
            sources_per_set: 4,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxiomReport {
    /// valence bound
    pub a1: Check,
    /// r-ball inside U inside Lr-ball
    pub a2: Check,
    /// adjacency vs cover overlap, radius comparability
    pub a3: Check,
    /// r/L-neighborhood of U inside the K-star
    pub a4: Check,
    /// no U is the whole space
    pub fine: Check,
    /// graph connectivity
    pub connected: Check,
    /// far pairs have separated covers
    pub separation: Check,
    /// far-pair cross distances comparable to center distance,
    /// within factors (2L^2+1) and (2L+1)
    pub comparability: Check,
    /// conjunction of a1-a4 and fine
    pub pass: bool,
}

/// Verifies the approximation axioms at (K, L) over the host's sample
/// points, plus fineness, connectivity, and the two derived far-pair
/// properties (the latter on a seeded pair sample within `budget`).
pub fn check_axioms(
    a: &Approximation,
    host: &Host,
    k: usize,
    l: f64,
    tol: f64,
    budget: &CheckBudget,
) -> Result<AxiomReport> {
    if k < 1 || l < 1.0 {
        return Err(Error::invalid("need K >= 1 and L >= 1"));
    }
    let n = host.len();
    for (v, s) in a.u_sets.iter().enumerate() {
        if let Some(&x) = s.last() {
            if x >= n {
                return Err(Error::invalid(format!(
                    "U of vertex {} references point {} outside the host",
                    v, x
                )));
            }
        }
        if a.p[v] >= n {
            return Err(Error::invalid(format!("center of vertex {} outside host", v)));
        }
    }
    // cover check: U must cover the host sample
    let owners = a.owners(n);
    if let Some(x) = owners.iter().position(|o| o.is_empty()) {
        return Err(Error::invalid(format!("point {} not covered by any U", x)));
    }

    // A1
    let mut a1 = Check::ok();
    for v in 0..a.len() {
        if a.adjacency[v].len() > k {
            a1 = Check::fail(format!(
                "vertex {} has valence {} > {}",
                v,
                a.adjacency[v].len(),
                k
            ));
            break;
        }
    }

    // A2, per vertex, in parallel
    let a2_violation: Option<String> = (0..a.len())
        .into_par_iter()
        .find_map_first(|v| {
            let cutoff = l * a.r[v] + 2.0 * tol;
            let near = host.within(&[(a.p[v], 0.0)], cutoff.max(a.r[v] + 2.0 * tol));
            let mut seen = vec![false; a.u_sets[v].len()];
            for &(x, d) in &near {
                let member = a.contains(v, x);
                if !member && d < a.r[v] - tol {
                    return Some(format!(
                        "point {} at distance {:.6e} < r = {:.6e} of center {} \
                         is outside U of vertex {}",
                        x, d, a.r[v], a.p[v], v
                    ));
                }
                if member {
                    if let Ok(i) = a.u_sets[v].binary_search(&x) {
                        if d <= l * a.r[v] + tol {
                            seen[i] = true;
                        }
                    }
                }
            }
            if let Some(i) = seen.iter().position(|&s| !s) {
                let x = a.u_sets[v][i];
                return Some(format!(
                    "point {} of U of vertex {} lies outside the L*r = {:.6e} ball",
                    x,
                    v,
                    l * a.r[v]
                ));
            }
            None
        });
    let a2 = match a2_violation {
        Some(w) => Check::fail(w),
        None => Check::ok(),
    };

    // A3 part 1: adjacent pairs intersect and have comparable radii
    let mut a3 = Check::ok();
    'a3edges: for v in 0..a.len() {
        for &w in &a.adjacency[v] {
            if w < v {
                continue;
            }
            if intersection_empty(&a.u_sets[v], &a.u_sets[w]) {
                a3 = Check::fail(format!("adjacent vertices {} and {} have disjoint U", v, w));
                break 'a3edges;
            }
            let (ru, rv) = (a.r[v], a.r[w]);
            if rv > l * ru * (1.0 + tol) || rv < ru / l * (1.0 - tol) {
                a3 = Check::fail(format!(
                    "adjacent vertices {} and {} have radius ratio {:.6e} beyond L = {:.6e}",
                    v,
                    w,
                    rv / ru,
                    l
                ));
                break 'a3edges;
            }
        }
    }
    // A3 part 2: intersecting pairs are combinatorially close
    let mut intersecting: Vec<(usize, usize)> = Vec::new();
    {
        let mut seen: std::collections::HashSet<(usize, usize)> = std::collections::HashSet::new();
        for o in &owners {
            for i in 0..o.len() {
                for j in (i + 1)..o.len() {
                    let key = (o[i].min(o[j]), o[i].max(o[j]));
                    if seen.insert(key) {
                        intersecting.push(key);
                    }
                }
            }
        }
    }
    // hop maps to depth 2K, reused by A3 part 2, A4, and the derived checks
    let hop_maps: Vec<HashMap<usize, usize>> = (0..a.len())
        .into_par_iter()
        .map(|v| a.hops_from(v, 2 * k))
        .collect();
    if a3.pass {
        for &(u, v) in &intersecting {
            let kk = hop_maps[u].get(&v).copied();
            if kk.map_or(true, |x| x >= k) {
                a3 = Check::fail(format!(
                    "U of vertices {} and {} intersect but k(u,v) {} >= K = {}",
                    u,
                    v,
                    kk.map_or("inf".to_string(), |x| x.to_string()),
                    k
                ));
                break;
            }
        }
    }

    // A4 and the separation property share the neighborhood scan
    let near_sets: Vec<Vec<(usize, f64)>> = (0..a.len())
        .into_par_iter()
        .map(|v| {
            let sources: Vec<(usize, f64)> =
                a.u_sets[v].iter().map(|&x| (x, 0.0)).collect();
            host.within(&sources, a.r[v] / l + tol)
        })
        .collect();
    let mut a4 = Check::ok();
    'a4loop: for v in 0..a.len() {
        for &(x, d) in &near_sets[v] {
            if d >= a.r[v] / l - tol {
                continue;
            }
            // x must lie in st_K(v): some owner within K-1 hops of v
            let in_star = owners[x]
                .iter()
                .any(|&u| hop_maps[v].get(&u).map_or(false, |&h| h < k));
            if !in_star {
                a4 = Check::fail(format!(
                    "point {} at distance {:.6e} < r/L of U of vertex {} \
                     is outside its {}-star",
                    x, d, v, k
                ));
                break 'a4loop;
            }
        }
    }

    // fineness
    let mut fine = Check::ok();
    for (v, s) in a.u_sets.iter().enumerate() {
        if s.len() == n {
            fine = Check::fail(format!("U of vertex {} is the whole space", v));
            break;
        }
    }

    // connectivity of G
    let reach = a.hops_from(0, a.len());
    let connected = if a.len() > 0 && reach.len() < a.len() {
        Check::fail(format!(
            "graph has {} vertices reachable from 0 out of {}",
            reach.len(),
            a.len()
        ))
    } else {
        Check::ok()
    };

    // separation: k(u,v) >= 2K implies U_u misses the r_v/L neighborhood
    let mut separation = Check::ok();
    'seploop: for v in 0..a.len() {
        for &(x, d) in &near_sets[v] {
            if d >= a.r[v] / l - tol {
                continue;
            }
            for &u in &owners[x] {
                let far = hop_maps[v].get(&u).map_or(true, |&h| h >= 2 * k);
                if far {
                    separation = Check::fail(format!(
                        "U of vertex {} meets the r/L neighborhood of vertex {} \
                         despite k >= 2K",
                        u, v
                    ));
                    break 'seploop;
                }
            }
        }
    }

    // comparability on sampled far pairs:
    // d(p_u,p_v)/(2L^2+1) <= d(x,y) <= (2L+1) d(p_u,p_v)
    let comparability = {
        use rand::seq::SliceRandom;
        use rand::Rng;
        let mut rng = crate::sampling::seeded_rng(budget.seed);
        let mut pairs = Vec::new();
        let mut attempts = 0usize;
        while pairs.len() < budget.far_pairs && attempts < budget.far_pairs * 40 {
            attempts += 1;
            let u = rng.gen_range(0..a.len());
            let v = rng.gen_range(0..a.len());
            if u == v {
                continue;
            }
            let far = hop_maps[u].get(&v).map_or(true, |&h| h >= 2 * k);
            if far {
                pairs.push((u, v));
            }
        }
        let lower_factor = 2.0 * l * l + 1.0;
        let upper_factor = 2.0 * l + 1.0;
        let mut result = Check::ok();
        for &(u, v) in &pairs {
            let dpp = host.distance(a.p[u], a.p[v]);
            let from_u = host.distances_from_set(&a.u_sets[u]);
            let min_cross = a.u_sets[v]
                .iter()
                .fold(f64::INFINITY, |acc, &y| acc.min(from_u[y]));
            if min_cross < dpp / lower_factor - tol {
                result = Check::fail(format!(
                    "far pair ({}, {}): min cross distance {:.6e} below \
                     d(p_u,p_v)/(2L^2+1) = {:.6e}",
                    u,
                    v,
                    min_cross,
                    dpp / lower_factor
                ));
                break;
            }
            let mut sources: Vec<usize> = a.u_sets[u].clone();
            sources.shuffle(&mut rng);
            sources.truncate(budget.sources_per_set);
            let mut max_cross = 0.0f64;
            for &x in &sources {
                let dx = host.distances_from(x);
                for &y in &a.u_sets[v] {
                    max_cross = max_cross.max(dx[y]);
                }
            }
            if max_cross > upper_factor * dpp + tol {
                result = Check::fail(format!(
                    "far pair ({}, {}): cross distance {:.6e} above \
                     (2L+1) d(p_u,p_v) = {:.6e}",
                    u,
                    v,
                    max_cross,
                    upper_factor * dpp
                ));
                break;
            }
        }
        result
    };

    let pass = a1.pass && a2.pass && a3.pass && a4.pass && fine.pass;
    Ok(AxiomReport {
        a1,
        a2,
        a3,
        a4,
        fine,
        connected,
        separation,
        comparability,
        pass,
    })
}

fn intersection_empty(a: &[usize], b: &[usize]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return false,
        }
    }
    true
}

/// Skeleton approximation of a complex at a mesh level: graph = 1-skeleton,
/// centers = the vertices themselves, radii = separation radii, U = mesh
/// nodes of the closed vertex star (interiors collapsed at sample
/// resolution).
pub fn skeleton_approximation(c: &MetricComplex, mesh: &MeshGraph) -> Result<Approximation> {
    let nv = c.vertex_count();
    let adjacency = c.skeleton_adjacency();
    let p: Vec<usize> = (0..nv).collect();
    let mut r = Vec::with_capacity(nv);
    for v in 0..nv {
        r.push(epsilon_x(c, v)?);
    }
    let mut u_sets = Vec::with_capacity(nv);
    for v in 0..nv {
        let mut s = vec![v];
        for &t in c.vertex_triangles(v) {
            s.extend_from_slice(mesh.triangle_nodes(t));
        }
        for &e in c.vertex_edges(v) {
            s.extend_from_slice(mesh.edge_nodes(e));
            let (a, b) = c.edges()[e].v;
            s.push(a);
            s.push(b);
        }
        s.sort_unstable();
        s.dedup();
        u_sets.push(s);
    }
    Approximation::new(adjacency, p, r, u_sets)
}

/// Tight constants for a skeleton approximation: the smallest K passing the
/// valence and overlap axioms, and per-axiom lower bounds for L whose max is
/// the smallest passing L at sample resolution. `l_a4_upper` bounds the
/// star-neighborhood requirement using 3-stars (a superset requirement), so
/// l is exact whenever l_a4_upper does not exceed the other two.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkeletonCertificate {
    pub k: usize,
    pub l: f64,
    pub k_valence: usize,
    pub k_intersect: usize,
    pub l_ball: f64,
    pub l_radii: f64,
    pub l_a4_upper: f64,
}

pub fn certify_skeleton(
    a: &Approximation,
    host: &Host,
) -> Result<SkeletonCertificate> {
    let n = host.len();
    let owners = a.owners(n);
    let k_valence = a.adjacency.iter().map(|nb| nb.len()).max().unwrap_or(0);
    // max combinatorial distance over intersecting pairs
    let mut k_intersect = 0usize;
    {
        let mut seen: std::collections::HashSet<(usize, usize)> = std::collections::HashSet::new();
        let hop_maps: Vec<HashMap<usize, usize>> = (0..a.len())
            .into_par_iter()
            .map(|v| a.hops_from(v, 8))
            .collect();
        for o in &owners {
            for i in 0..o.len() {
                for j in (i + 1)..o.len() {
                    let key = (o[i].min(o[j]), o[i].max(o[j]));
                    if seen.insert(key) {
                        let h = hop_maps[key.0]
                            .get(&key.1)
                            .copied()
                            .ok_or_else(|| Error::precondition("intersecting pair beyond hop budget"))?;
                        k_intersect = k_intersect.max(h);
                    }
                }
            }
        }
    }
    let k = k_valence.max(k_intersect + 1).max(1);

    // L from the outer ball requirement; truncated searches with a doubling
    // cutoff keep each vertex local instead of running a full sweep
    let l_ball = (0..a.len())
        .into_par_iter()
        .map(|v| {
            let members = &a.u_sets[v];
            let sources = [(a.p[v], 0.0)];
            let mut cutoff = 2.0 * a.r[v];
            loop {
                let near = host.within(&sources, cutoff);
                let mut found = 0usize;
                let mut far = 0.0f64;
                let mut i = 0usize;
                for &x in members {
                    while i < near.len() && near[i].0 < x {
                        i += 1;
                    }
                    if i < near.len() && near[i].0 == x {
                        found += 1;
                        far = far.max(near[i].1);
                    }
                }
                if found == members.len() {
                    return far / a.r[v];
                }
                if near.len() == n {
                    return f64::INFINITY;
                }
                cutoff *= 2.0;
            }
        })
        .reduce(|| 1.0f64, f64::max);
    // L from adjacent radius comparability
    let mut l_radii = 1.0f64;
    for v in 0..a.len() {
        for &w in &a.adjacency[v] {
            l_radii = l_radii.max(a.r[v] / a.r[w]);
        }
    }
    // upper bound on the A4 requirement via 3-stars: if the r/L neighborhood
    // stays in the 3-star, it stays in the K-star for K >= 3
    let l_a4_upper = (0..a.len())
        .into_par_iter()
        .map(|v| {
            let hops = a.hops_from(v, 2);
            let mut inside: std::collections::HashSet<usize> = std::collections::HashSet::new();
            for (&u, _) in &hops {
                for &x in &a.u_sets[u] {
                    inside.insert(x);
                }
            }
            let sources: Vec<(usize, f64)> =
                a.u_sets[v].iter().map(|&x| (x, 0.0)).collect();
            // nearest sample point outside the 3-star
            let mut lo = a.r[v];
            loop {
                let near = host.within(&sources, lo);
                if let Some(d) = near
                    .iter()
                    .filter(|&&(x, _)| !inside.contains(&x))
                    .map(|&(_, d)| d)
                    .fold(None, |acc: Option<f64>, d| {
                        Some(acc.map_or(d, |a| a.min(d)))
                    })
                {
                    return a.r[v] / d;
                }
                if near.len() == n {
                    return 1.0; // no outside point at all
                }
                lo *= 2.0;
            }
        })
        .reduce(|| 1.0f64, f64::max);
    let l = l_ball.max(l_radii).max(l_a4_upper).max(1.0);
    Ok(SkeletonCertificate {
        k,
        l,
        k_valence,
        k_intersect,
        l_ball,
        l_radii,
        l_a4_upper,
    })
}

/// Image of an approximation under a point map into a finite metric. The
/// graph is unchanged; centers and covers are pushed forward; the new radius
/// is the exact minimum of d_Y(f(x), p'_v) over sample points x at
/// d_X(x, p_v) >= r_v.
pub fn image_approximation(
    a: &Approximation,
    x_host: &Host,
    f: &[usize],
    y: &FiniteMetric,
) -> Result<Approximation> {
    let n = x_host.len();
    if f.len() != n {
        return Err(Error::invalid("point map must cover every sample point"));
    }
    {
        let mut seen = vec![false; y.len()];
        for &img in f {
            if img >= y.len() {
                return Err(Error::invalid("point map leaves the target"));
            }
            if seen[img] {
                return Err(Error::invalid("point map is not injective on samples"));
            }
            seen[img] = true;
        }
    }
    let p: Vec<usize> = a.p.iter().map(|&v| f[v]).collect();
    let u_sets: Vec<Vec<usize>> = a
        .u_sets
        .iter()
        .map(|s| {
            let mut t: Vec<usize> = s.iter().map(|&x| f[x]).collect();
            t.sort_unstable();
            t
        })
        .collect();
    let r: Vec<f64> = (0..a.len())
        .into_par_iter()
        .map(|v| {
            let dx = x_host.distances_from(a.p[v]);
            // relative slack so points at the r-sphere qualify despite
            // last-bit differences between radius and sample distance
            let cut = a.r[v] * (1.0 - 1e-12);
            let mut best = f64::INFINITY;
            for x in 0..n {
                if dx[x] >= cut {
                    best = best.min(y.d(f[x], p[v]));
                }
            }
            best
        })
        .collect();
    if let Some(v) = r.iter().position(|x| !x.is_finite()) {
        return Err(Error::precondition(format!(
            "no sample point at distance >= r from center {}: approximation not fine",
            v
        )));
    }
    Approximation::new(a.adjacency.clone(), p, r, u_sets)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainReport {
    pub chain: Vec<usize>,
    /// diam of the chain's center points over d(p_u, p_v)
    pub ratio: f64,
}

/// Walks a connecting path through the cover, producing a vertex chain whose
/// consecutive covers intersect (so consecutive combinatorial distances stay
/// below K whenever the axioms hold). Reports the center-point diameter
/// relative to the endpoint distance.
pub fn chain_between(
    a: &Approximation,
    host: &Host,
    u: usize,
    v: usize,
) -> Result<ChainReport> {
    if u >= a.len() || v >= a.len() {
        return Err(Error::invalid("vertex out of range"));
    }
    if u == v {
        return Ok(ChainReport {
            chain: vec![u],
            ratio: 1.0,
        });
    }
    let owners = a.owners(host.len());
    let node_path: Vec<usize> = match host {
        Host::Mesh(g) => {
            let mut scratch = DijkstraScratch::new(g.node_count());
            scratch.run(g.csr(), &[(a.p[u], 0.0)], f64::INFINITY, None, &[a.p[v]]);
            let path = scratch.path_to(a.p[v]);
            if path.is_empty() {
                return Err(Error::precondition("host is disconnected"));
            }
            path
        }
        Host::Finite(_) => {
            // adjacency path through G, then read off the centers
            let path = crate::graph::bfs_path(&a.adjacency, u, v)
                .ok_or_else(|| Error::precondition("approximation graph is disconnected"))?;
            return finish_chain(a, host, path);
        }
    };
    let mut chain = vec![u];
    let mut current = u;
    for &node in &node_path {
        if a.contains(current, node) {
            continue;
        }
        // deterministic: smallest owner whose cover meets the current one
        let next = owners[node]
            .iter()
            .copied()
            .find(|&w| !intersection_empty(&a.u_sets[current], &a.u_sets[w]))
            .ok_or_else(|| {
                Error::precondition(format!(
                    "cover walk stuck at node {}: no overlapping owner",
                    node
                ))
            })?;
        chain.push(next);
        current = next;
    }
    if *chain.last().unwrap() != v {
        chain.push(v);
    }
    finish_chain(a, host, chain)
}

fn finish_chain(a: &Approximation, host: &Host, chain: Vec<usize>) -> Result<ChainReport> {
    let d_uv = host.distance(a.p[chain[0]], a.p[*chain.last().unwrap()]);
    let mut diam = 0.0f64;
    for i in 0..chain.len() {
        let di = host.distances_from(a.p[chain[i]]);
        for &w in &chain[i + 1..] {
            diam = diam.max(di[a.p[w]]);
        }
    }
    let ratio = if d_uv > 0.0 { diam / d_uv } else { 1.0 };
    Ok(ChainReport { chain, ratio })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuasiconvexReport {
    pub chain: Vec<usize>,
    pub sum_r: f64,
    /// sum of chain radii over d(p_u, p_v)
    pub ratio: f64,
}

/// Chain with consecutive vertices adjacent in G, following a host geodesic
/// and gap-filling combinatorially. Requires a length-space host and
/// k(u,v) >= K.
pub fn quasiconvex_chain(
    a: &Approximation,
    host: &Host,
    u: usize,
    v: usize,
    k: usize,
) -> Result<QuasiconvexReport> {
    if !matches!(host, Host::Mesh(_)) {
        return Err(Error::precondition(
            "quasiconvex chains need a length-space host",
        ));
    }
    let kk = comb_distance(a, u, v)
        .ok_or_else(|| Error::precondition("approximation graph is disconnected"))?;
    if kk < k {
        return Err(Error::precondition(format!(
            "k(u,v) = {} below the threshold K = {}",
            kk, k
        )));
    }
    let coarse = chain_between(a, host, u, v)?.chain;
    let mut chain = vec![coarse[0]];
    for win in coarse.windows(2) {
        let (from, to) = (win[0], win[1]);
        if from == to {
            continue;
        }
        let path = crate::graph::bfs_path(&a.adjacency, from, to)
            .ok_or_else(|| Error::precondition("approximation graph is disconnected"))?;
        chain.extend_from_slice(&path[1..]);
    }
    chain.dedup();
    let sum_r: f64 = chain.iter().map(|&w| a.r[w]).sum();
    let d_uv = host.distance(a.p[u], a.p[v]);
    let ratio = if d_uv > 0.0 { sum_r / d_uv } else { f64::INFINITY };
    Ok(QuasiconvexReport {
        chain,
        sum_r,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids;
    use crate::simplicial::{mesh_graph, simplex_star, simplices_meeting, Simplex};

    fn path_approximation(n: usize) -> (Approximation, FiniteMetric) {
        // points 0..n on a line at unit spacing; U_v = {v-1, v, v+1} clipped
        let coords: Vec<[f64; 3]> = (0..n).map(|i| [i as f64, 0.0, 0.0]).collect();
        let m = FiniteMetric::from_coords(&coords);
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n - 1 {
            adjacency[i].push(i + 1);
            adjacency[i + 1].push(i);
        }
        let p = (0..n).collect();
        let r = vec![1.0; n];
        let u_sets = (0..n)
            .map(|i| {
                let lo = i.saturating_sub(1);
                let hi = (i + 1).min(n - 1);
                (lo..=hi).collect()
            })
            .collect();
        (Approximation::new(adjacency, p, r, u_sets).unwrap(), m)
    }

    #[test]
    fn comb_distance_on_a_path() {
        let (a, _) = path_approximation(6);
        assert_eq!(comb_distance(&a, 2, 2), Some(0));
        assert_eq!(comb_distance(&a, 2, 3), Some(1));
        assert_eq!(comb_distance(&a, 0, 5), Some(5));
        let mut disconnected = a.clone();
        disconnected.adjacency[2].retain(|&w| w != 3);
        disconnected.adjacency[3].retain(|&w| w != 2);
        assert_eq!(comb_distance(&disconnected, 0, 5), None);
    }

    #[test]
    fn stars_grow_with_k() {
        let (a, _) = path_approximation(7);
        assert_eq!(star(&a, 3, 1), a.u_sets[3]);
        let s2 = star(&a, 3, 2);
        assert_eq!(s2, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn skeleton_star_matches_simplex_stars() {
        // the 2-star of v collects covers of v and its neighbors, which is
        // exactly the union of S(A) over simplices A containing v
        let grid = grids::flat_grid(4, 1.0);
        let mesh = mesh_graph(&grid.complex, 2);
        let a = skeleton_approximation(&grid.complex, &mesh).unwrap();
        let v = grid.interior_vertex().unwrap();
        let from_star = star(&a, v, 2);
        let mut expect = Vec::new();
        let sv = simplex_star(&grid.complex, v);
        for &t in &sv.triangles {
            let set = simplices_meeting(&grid.complex, &Simplex::Triangle(t));
            for &tt in &set.triangles {
                expect.extend_from_slice(mesh.triangle_nodes(tt));
            }
        }
        expect.sort_unstable();
        expect.dedup();
        assert_eq!(from_star, expect);
    }

    #[test]
    fn grid_skeleton_certificate_is_tight() {
        let grid = grids::flat_grid(4, 1.0);
        let mesh = mesh_graph(&grid.complex, 4);
        let a = skeleton_approximation(&grid.complex, &mesh).unwrap();
        let host = Host::Mesh(&mesh);
        let cert = certify_skeleton(&a, &host).unwrap();
        assert_eq!(cert.k, 6, "hexagonal valence");
        assert_eq!(cert.k_intersect, 2, "second neighbors share corner nodes");
        // outer ball: corner of the hexagon at distance 1 over r = sqrt(3)/2
        let expect_l = 2.0 / 3.0f64.sqrt();
        assert!((cert.l - expect_l).abs() < 1e-12, "l = {}", cert.l);
        assert!(cert.l_a4_upper <= cert.l_ball);
    }

    #[test]
    fn grid_skeleton_passes_at_certified_constants() {
        let grid = grids::flat_grid(4, 1.0);
        let mesh = mesh_graph(&grid.complex, 4);
        let a = skeleton_approximation(&grid.complex, &mesh).unwrap();
        let host = Host::Mesh(&mesh);
        let cert = certify_skeleton(&a, &host).unwrap();
        let budget = CheckBudget::default();
        let report = check_axioms(&a, &host, cert.k, cert.l, 1e-9, &budget).unwrap();
        assert!(report.pass, "{:?}", report);
        assert!(report.connected.pass);
        assert!(report.separation.pass, "{:?}", report.separation);
        assert!(report.comparability.pass, "{:?}", report.comparability);
        // monotone: larger constants still pass
        let relaxed = check_axioms(&a, &host, cert.k + 2, cert.l * 2.0, 1e-9, &budget).unwrap();
        assert!(relaxed.pass);
        // halving L produces a ball-sandwich witness
        let halved = check_axioms(&a, &host, cert.k, (cert.l / 2.0).max(1.0), 1e-9, &budget).unwrap();
        assert!(!halved.pass);
        assert!(!halved.a2.pass, "{:?}", halved);
        assert!(halved.a2.witness.is_some());
    }

    #[test]
    fn whole_space_cover_is_not_fine() {
        let (mut a, m) = path_approximation(4);
        a.u_sets[1] = (0..4).collect();
        let host = Host::Finite(&m);
        let report = check_axioms(&a, &host, 2, 2.0, 1e-9, &CheckBudget::default()).unwrap();
        assert!(!report.fine.pass);
    }

    #[test]
    fn image_under_identity_keeps_radii_at_sample_scale() {
        let grid = grids::flat_grid(3, 1.0);
        let mesh = mesh_graph(&grid.complex, 2);
        let a = skeleton_approximation(&grid.complex, &mesh).unwrap();
        let host = Host::Mesh(&mesh);
        let nodes: Vec<usize> = (0..mesh.node_count()).collect();
        let ids: Vec<String> = nodes.iter().map(|n| n.to_string()).collect();
        let fm = mesh.metric_on(&nodes, ids).unwrap();
        let f: Vec<usize> = nodes.clone();
        let img = image_approximation(&a, &host, &f, &fm).unwrap();
        for v in 0..a.len() {
            assert!(img.r[v] >= a.r[v] - 1e-12);
            // the height foot is a mesh node (edge midpoints exist at m >= 1),
            // so the infimum is attained and radii match exactly
            assert!((img.r[v] - a.r[v]).abs() < 1e-9, "{} vs {}", img.r[v], a.r[v]);
        }
        // scaling by 3 scales radii by 3
        let scaled = FiniteMetric::from_matrix(
            (0..fm.len())
                .map(|i| fm.row(i).iter().map(|d| 3.0 * d).collect())
                .collect(),
        )
        .unwrap();
        let img3 = image_approximation(&a, &host, &f, &scaled).unwrap();
        for v in 0..a.len() {
            assert!((img3.r[v] - 3.0 * img.r[v]).abs() < 1e-9);
        }
    }

    #[test]
    fn bilipschitz_image_scales_radii_and_passes_inflated_constants() {
        // flat convex region: intrinsic = Euclidean, so a plane map with
        // certified constant lambda gives a lambda-bi-Lipschitz sample map
        let grid = grids::flat_grid(4, 1.0);
        let mesh = mesh_graph(&grid.complex, 2);
        let a = skeleton_approximation(&grid.complex, &mesh).unwrap();
        let pos = mesh.positions().unwrap();
        let src_pts: Vec<[f64; 2]> = pos.iter().map(|p| [p[0], p[1]]).collect();
        let map = crate::sampling::PlaneMap::seeded(7, 1.0 / 3.0);
        let dst_pts: Vec<[f64; 2]> = src_pts.iter().map(|&p| map.eval(p)).collect();
        let src = FiniteMetric::from_coords2(&src_pts);
        let dst = FiniteMetric::from_coords2(&dst_pts);
        let x_host = Host::Finite(&src);
        let lambda = map.lambda_bound();

        let cert = certify_skeleton(&a, &x_host).unwrap();
        let base = check_axioms(&a, &x_host, cert.k, cert.l, 1e-9, &CheckBudget::default()).unwrap();
        assert!(base.pass, "{:?}", base);

        let f: Vec<usize> = (0..src.len()).collect();
        let img = image_approximation(&a, &x_host, &f, &dst).unwrap();
        for v in 0..a.len() {
            let ratio = img.r[v] / a.r[v];
            assert!(
                ratio >= 1.0 / lambda - 1e-9 && ratio <= lambda + 1e-9,
                "vertex {}: radius ratio {} outside [1/{}, {}]",
                v,
                ratio,
                lambda,
                lambda
            );
        }
        let y_host = Host::Finite(&dst);
        let inflated = check_axioms(
            &img,
            &y_host,
            cert.k,
            lambda * lambda * cert.l,
            1e-9,
            &CheckBudget::default(),
        )
        .unwrap();
        assert!(inflated.pass, "{:?}", inflated);
    }

    #[test]
    fn chains_between_grid_vertices() {
        let grid = grids::flat_grid(5, 1.0);
        let mesh = mesh_graph(&grid.complex, 2);
        let a = skeleton_approximation(&grid.complex, &mesh).unwrap();
        let host = Host::Mesh(&mesh);
        // adjacent pair
        let u = grid.vertex(1, 1);
        let v = grid.vertex(1, 2);
        let rep = chain_between(&a, &host, u, v).unwrap();
        assert_eq!(rep.chain.first(), Some(&u));
        assert_eq!(rep.chain.last(), Some(&v));
        assert!((rep.ratio - 1.0).abs() < 1e-12);
        // far pair along the lattice
        let w = grid.vertex(1, 5);
        let rep = chain_between(&a, &host, u, w).unwrap();
        assert!(rep.ratio <= 3.0, "ratio = {}", rep.ratio);
    }

    #[test]
    fn quasiconvex_chain_on_a_grid_line() {
        let grid = grids::flat_grid(6, 1.0);
        let mesh = mesh_graph(&grid.complex, 2);
        let a = skeleton_approximation(&grid.complex, &mesh).unwrap();
        let host = Host::Mesh(&mesh);
        let u = grid.vertex(0, 3);
        let v = grid.vertex(6, 3);
        let rep = quasiconvex_chain(&a, &host, u, v, 6).unwrap();
        for win in rep.chain.windows(2) {
            assert!(a.adjacency[win[0]].binary_search(&win[1]).is_ok());
        }
        assert!(rep.ratio <= 2.0, "ratio = {}", rep.ratio);
        assert!(rep.ratio >= 3.0f64.sqrt() / 2.0 * 0.9);
        // below the threshold: precondition signal
        let adjacent = quasiconvex_chain(&a, &host, u, grid.vertex(1, 3), 6);
        assert!(adjacent.is_err());
    }
}
