//! Discrete conformal 2-modulus of curve families on mesh graphs, the
//! annulus-crossing bound, the telescoping estimate for nested annuli, and
//! sampled Loewner profiling.
//!
//! Densities live on mesh nodes with flat-triangle area shares as weights
//! (the canonical weight for strongly curved complexes is an open question;
//! the flat share is what `MeshGraph` provides). A path integrates a density
//! by the trapezoid rule over its edges, with the Euclidean edge length as
//! the step.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplicial::{mesh_graph, MeshGraph, MetricComplex};

/// Curves joining E and F inside the node set G of a mesh graph.
pub struct CurveFamily<'a> {
    pub host: &'a MeshGraph,
    pub e: Vec<usize>,
    pub f: Vec<usize>,
    /// None means all of the host.
    pub allowed: Option<Vec<bool>>,
}

impl<'a> CurveFamily<'a> {
    pub fn new(
        host: &'a MeshGraph,
        e: Vec<usize>,
        f: Vec<usize>,
        g: Option<&[usize]>,
    ) -> Result<CurveFamily<'a>> {
        let n = host.node_count();
        let allowed = match g {
            Some(nodes) => {
                let mut mask = vec![false; n];
                for &x in nodes {
                    if x >= n {
                        return Err(Error::invalid(format!("domain node {} out of range", x)));
                    }
                    mask[x] = true;
                }
                Some(mask)
            }
            None => None,
        };
        if e.is_empty() || f.is_empty() {
            return Err(Error::invalid("source and sink sets must be nonempty"));
        }
        let mut e = e;
        let mut f = f;
        e.sort_unstable();
        e.dedup();
        f.sort_unstable();
        f.dedup();
        for &x in e.iter().chain(f.iter()) {
            if x >= n {
                return Err(Error::invalid(format!("node {} out of range", x)));
            }
            if let Some(mask) = &allowed {
                if !mask[x] {
                    return Err(Error::invalid(format!(
                        "node {} of E or F lies outside the domain",
                        x
                    )));
                }
            }
        }
        let mut i = 0;
        let mut j = 0;
        while i < e.len() && j < f.len() {
            match e[i].cmp(&f[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    return Err(Error::invalid(format!("E and F share node {}", e[i])))
                }
            }
        }
        Ok(CurveFamily {
            host,
            e,
            f,
            allowed,
        })
    }
}

/// Nonnegative node density with its area weights and energy sum w * rho^2.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityField {
    pub rho: Vec<f64>,
    pub area_weights: Vec<f64>,
    pub energy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModulusEstimate {
    /// Energy of the final density; with the admissibility certificate close
    /// to 1 this is the modulus of the mesh-path family up to solver
    /// tolerance.
    pub value: f64,
    pub density: DensityField,
    /// Active constraint paths, as node sequences.
    pub active_paths: Vec<Vec<usize>>,
    /// Independently recomputed rho-length of the shortest E-F path.
    pub min_path_length: f64,
    pub iterations: usize,
}

const OUTER_CAP: usize = 20_000;
/// most node-disjoint corridors added per pricing round
const BATCH_CAP: usize = 256;

struct PathOracle {
    dist: Vec<f64>,
    prev: Vec<usize>,
    heap: std::collections::BinaryHeap<OracleItem>,
}

#[derive(PartialEq)]
struct OracleItem {
    dist: f64,
    node: usize,
}

impl Eq for OracleItem {}

impl Ord for OracleItem {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // min-heap on distance
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for OracleItem {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

const NO_PREV: usize = usize::MAX;

impl PathOracle {
    fn new(n: usize) -> PathOracle {
        PathOracle {
            dist: vec![f64::INFINITY; n],
            prev: vec![NO_PREV; n],
            heap: std::collections::BinaryHeap::new(),
        }
    }

    /// Shortest path from E to F under edge costs len * (rho_a + rho_b) / 2.
    fn shortest(
        &mut self,
        fam: &CurveFamily,
        rho: &[f64],
        f_mark: &[bool],
        blocked: Option<&[bool]>,
    ) -> Option<(Vec<usize>, f64)> {
        let g = fam.host.csr();
        self.dist.fill(f64::INFINITY);
        self.prev.fill(NO_PREV);
        self.heap.clear();
        for &s in &fam.e {
            if blocked.map_or(false, |b| b[s]) {
                continue;
            }
            self.dist[s] = 0.0;
            self.heap.push(OracleItem { dist: 0.0, node: s });
        }
        while let Some(OracleItem { dist, node }) = self.heap.pop() {
            if dist > self.dist[node] {
                continue;
            }
            if f_mark[node] {
                let mut path = vec![node];
                let mut cur = node;
                while self.prev[cur] != NO_PREV {
                    cur = self.prev[cur];
                    path.push(cur);
                }
                path.reverse();
                return Some((path, dist));
            }
            for (next, len) in g.neighbors(node) {
                if let Some(mask) = &fam.allowed {
                    if !mask[next] {
                        continue;
                    }
                }
                if blocked.map_or(false, |b| b[next]) {
                    continue;
                }
                // clamp: a microscopically negative density would let Dijkstra
                // relax in cycles forever
                let nd = dist + (len * 0.5 * (rho[node] + rho[next])).max(0.0);
                if nd < self.dist[next] {
                    self.dist[next] = nd;
                    self.prev[next] = node;
                    self.heap.push(OracleItem {
                        dist: nd,
                        node: next,
                    });
                }
            }
        }
        None
    }
}

struct ConstraintRow {
    nodes: Vec<usize>,
    coef: Vec<f64>,
    /// diagonal of the dual quadratic form: sum coef^2 / w
    q_diag: f64,
    path: Vec<usize>,
}

fn path_row(host: &MeshGraph, path: &[usize], weights: &[f64]) -> ConstraintRow {
    // trapezoid rule: each path edge contributes half its length to both ends
    let mut coef_by_node: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
    let g = host.csr();
    for win in path.windows(2) {
        let len = g
            .neighbors(win[0])
            .find(|&(next, _)| next == win[1])
            .map(|(_, l)| l)
            .expect("path follows mesh edges");
        *coef_by_node.entry(win[0]).or_insert(0.0) += 0.5 * len;
        *coef_by_node.entry(win[1]).or_insert(0.0) += 0.5 * len;
    }
    let nodes: Vec<usize> = coef_by_node.keys().copied().collect();
    let coef: Vec<f64> = coef_by_node.values().copied().collect();
    let q_diag = nodes
        .iter()
        .zip(&coef)
        .map(|(&n, &c)| c * c / weights[n])
        .sum();
    ConstraintRow {
        nodes,
        coef,
        q_diag,
        path: path.to_vec(),
    }
}

fn row_dot(row: &ConstraintRow, rho: &[f64]) -> f64 {
    row.nodes
        .iter()
        .zip(&row.coef)
        .map(|(&n, &c)| c * rho[n])
        .sum()
}

/// Conformal 2-modulus of the mesh-path family by constraint generation:
/// alternate a rho-shortest-path oracle with a dual coordinate-ascent solve
/// of the active-set quadratic program min sum w rho^2 subject to unit
/// rho-length on every active path. Stops when the globally shortest path
/// has rho-length at least 1 - tol.
pub fn mod2(fam: &CurveFamily, tol: f64) -> Result<ModulusEstimate> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::invalid("tolerance must lie in (0, 1)"));
    }
    let n = fam.host.node_count();
    let weights = fam.host.area_weights();
    for (i, &w) in weights.iter().enumerate() {
        if !(w > 0.0) {
            return Err(Error::precondition(format!(
                "node {} has nonpositive area weight",
                i
            )));
        }
    }
    let mut f_mark = vec![false; n];
    for &x in &fam.f {
        f_mark[x] = true;
    }

    let mut oracle = PathOracle::new(n);
    let mut rho = vec![0.0f64; n];
    let mut rows: Vec<ConstraintRow> = Vec::new();
    let mut lambda: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut iterations = 0usize;
    let mut last_len = 0.0f64;
    let mut blocked = vec![false; n];

    for iter in 0..OUTER_CAP {
        iterations = iter;
        let found = oracle.shortest(fam, &rho, &f_mark, None);
        let (path, len) = match found {
            None => {
                // E and F in different components of the domain
                return Ok(ModulusEstimate {
                    value: 0.0,
                    density: DensityField {
                        rho: vec![0.0; n],
                        area_weights: weights.to_vec(),
                        energy: 0.0,
                    },
                    active_paths: Vec::new(),
                    min_path_length: f64::INFINITY,
                    iterations: iter,
                });
            }
            Some(x) => x,
        };
        last_len = len;
        if len >= 1.0 - tol {
            converged = true;
            break;
        }
        let first_new = rows.len();
        rows.push(path_row(fam.host, &path, weights));
        lambda.push(0.0);
        // harvest further node-disjoint violated corridors under the same
        // density; one dual solve then prices the whole batch
        blocked.fill(false);
        for &x in &path {
            blocked[x] = true;
        }
        while rows.len() - first_new < BATCH_CAP {
            match oracle.shortest(fam, &rho, &f_mark, Some(&blocked)) {
                Some((p, l)) if l < 1.0 - tol => {
                    for &x in &p {
                        blocked[x] = true;
                    }
                    rows.push(path_row(fam.host, &p, weights));
                    lambda.push(0.0);
                }
                _ => break,
            }
        }

        // dual coordinate ascent, warm started from the previous multipliers
        let sweep_cap = 10 * rows.len() + 1000;
        let inner_tol = 0.1 * tol;
        for sweep in 0..sweep_cap {
            let mut worst = 0.0f64;
            for (j, row) in rows.iter().enumerate() {
                let slack = 1.0 - row_dot(row, &rho);
                let step = (2.0 * slack / row.q_diag).max(-lambda[j]);
                if step != 0.0 {
                    lambda[j] += step;
                    for (&node, &c) in row.nodes.iter().zip(&row.coef) {
                        rho[node] = (rho[node] + step * c / (2.0 * weights[node])).max(0.0);
                    }
                }
                // violated rows must reach unit length; rows held by a
                // positive multiplier must sit on the boundary
                let residual = if lambda[j] > 0.0 { slack.abs() } else { slack.max(0.0) };
                worst = worst.max(residual);
            }
            if worst <= inner_tol {
                break;
            }
            // refresh rho from the multipliers periodically to cancel drift
            if sweep % 64 == 63 {
                rho.iter_mut().for_each(|x| *x = 0.0);
                for (j, row) in rows.iter().enumerate() {
                    for (&node, &c) in row.nodes.iter().zip(&row.coef) {
                        rho[node] += lambda[j] * c / (2.0 * weights[node]);
                    }
                }
            }
        }
        // make the new batch exactly admissible so the oracle must move on
        // even when the sweep cap cut the solve short
        for j in first_new..rows.len() {
            let row = &rows[j];
            let slack = 1.0 - row_dot(row, &rho);
            let step = (2.0 * slack / row.q_diag).max(-lambda[j]);
            if step != 0.0 {
                lambda[j] += step;
                for (&node, &c) in row.nodes.iter().zip(&row.coef) {
                    rho[node] = (rho[node] + step * c / (2.0 * weights[node])).max(0.0);
                }
            }
        }
    }

    // exact nonnegative density from the final multipliers
    rho.iter_mut().for_each(|x| *x = 0.0);
    for (j, row) in rows.iter().enumerate() {
        for (&node, &c) in row.nodes.iter().zip(&row.coef) {
            rho[node] += lambda[j] * c / (2.0 * weights[node]);
        }
    }
    let energy: f64 = rho
        .iter()
        .zip(weights)
        .map(|(&r, &w)| w * r * r)
        .sum();
    // independent admissibility certificate
    let cert = oracle
        .shortest(fam, &rho, &f_mark, None)
        .map(|(_, len)| len)
        .unwrap_or(f64::INFINITY);
    if !converged {
        return Err(Error::no_convergence(format!(
            "modulus solve hit the iteration cap: energy {:.6e}, shortest path {:.6e}, last {:.6e}",
            energy, cert, last_len
        )));
    }
    let active_paths: Vec<Vec<usize>> = rows
        .iter()
        .zip(&lambda)
        .filter(|(_, &l)| l > 0.0)
        .map(|(row, _)| row.path.clone())
        .collect();
    Ok(ModulusEstimate {
        value: energy,
        density: DensityField {
            rho,
            area_weights: weights.to_vec(),
            energy,
        },
        active_paths,
        min_path_length: cert,
        iterations,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnulusSample {
    pub center: usize,
    pub radius: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnulusReport {
    pub max_modulus: f64,
    pub witness: Option<AnnulusSample>,
    pub samples: Vec<AnnulusSample>,
}

/// Max over sampled balls of the modulus of curves crossing the annulus
/// B(a, L r) minus the closed ball B(a, r). Balls use mesh distances; radii
/// default to dyadic fractions of the center eccentricity below ecc / L.
/// A scale whose outer complement is empty contributes a zero sample.
pub fn annulus_condition(
    c: &MetricComplex,
    centers: &[usize],
    l: f64,
    m: usize,
    radii: Option<&[f64]>,
    tol: f64,
) -> Result<AnnulusReport> {
    if !(l > 1.0) {
        return Err(Error::invalid("annulus factor must exceed 1"));
    }
    for &a in centers {
        if a >= c.vertex_count() {
            return Err(Error::invalid(format!("center {} out of range", a)));
        }
    }
    let mesh = mesh_graph(c, m);
    let jobs: Vec<(usize, f64)> = centers
        .iter()
        .flat_map(|&a| {
            let rs: Vec<f64> = match radii {
                Some(given) => given.to_vec(),
                None => {
                    let ecc = mesh
                        .distances_from(a)
                        .into_iter()
                        .filter(|d| d.is_finite())
                        .fold(0.0f64, f64::max);
                    (1..=4).map(|k| ecc / l / f64::powi(2.0, k)).collect()
                }
            };
            rs.into_iter().map(move |r| (a, r)).collect::<Vec<_>>()
        })
        .collect();
    let samples: Vec<AnnulusSample> = jobs
        .par_iter()
        .map(|&(a, r)| {
            let d = mesh.distances_from(a);
            let e: Vec<usize> = (0..mesh.node_count()).filter(|&x| d[x] <= r).collect();
            let f: Vec<usize> = (0..mesh.node_count()).filter(|&x| d[x] >= l * r).collect();
            if e.is_empty() || f.is_empty() {
                return Ok(AnnulusSample {
                    center: a,
                    radius: r,
                    value: 0.0,
                });
            }
            let fam = CurveFamily::new(&mesh, e, f, None)?;
            let est = mod2(&fam, tol)?;
            Ok(AnnulusSample {
                center: a,
                radius: r,
                value: est.value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let witness = samples
        .iter()
        .cloned()
        .max_by(|a, b| a.value.total_cmp(&b.value));
    Ok(AnnulusReport {
        max_modulus: witness.as_ref().map_or(0.0, |w| w.value),
        witness,
        samples,
    })
}

/// Nested-annulus modulus bound M / N with N = max{k : L^k r <= R}.
pub fn telescoping_bound(per_annulus_bound: f64, l: f64, r: f64, big_r: f64) -> Result<f64> {
    if !(per_annulus_bound > 0.0 && l > 1.0 && r > 0.0) {
        return Err(Error::invalid("need M > 0, L > 1, r > 0"));
    }
    if big_r < l * r {
        return Err(Error::precondition(
            "outer radius below L * r: no full annulus to telescope",
        ));
    }
    let n = ((big_r / r).ln() / l.ln() + 1e-9).floor() as usize;
    Ok(per_annulus_bound / n as f64)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoewnerSample {
    pub delta: f64,
    pub modulus: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoewnerProfile {
    pub samples: Vec<LoewnerSample>,
    /// Coefficient of the candidate lower envelope phi(delta) =
    /// coefficient / log(1 + delta); a statement about the sampled pairs
    /// only.
    pub envelope_coefficient: f64,
}

/// Modulus against relative distance for sampled ball pairs. Each spec is
/// (vertex a, vertex b, s): the continua are mesh balls of radius
/// s * d(a, b). Degenerate (single-node) continua are skipped.
pub fn loewner_profile(
    c: &MetricComplex,
    m: usize,
    pair_specs: &[(usize, usize, f64)],
    tol: f64,
) -> Result<LoewnerProfile> {
    let mesh = mesh_graph(c, m);
    let mut samples = Vec::new();
    for &(a, b, s) in pair_specs {
        if a >= c.vertex_count() || b >= c.vertex_count() {
            return Err(Error::invalid("pair vertex out of range"));
        }
        if !(s > 0.0 && s < 0.5) {
            return Err(Error::invalid("ball fraction must lie in (0, 1/2)"));
        }
        let da = mesh.distances_from(a);
        let dab = da[b];
        if !dab.is_finite() || dab == 0.0 {
            continue;
        }
        let db = mesh.distances_from(b);
        let radius = s * dab;
        let e: Vec<usize> = (0..mesh.node_count()).filter(|&x| da[x] <= radius).collect();
        let f: Vec<usize> = (0..mesh.node_count()).filter(|&x| db[x] <= radius).collect();
        if e.len() < 2 || f.len() < 2 {
            continue;
        }
        if e.iter().any(|x| f.binary_search(x).is_ok()) {
            continue;
        }
        let dist_ef = e
            .iter()
            .map(|&x| db[x] - radius)
            .fold(f64::INFINITY, f64::min)
            .max(0.0);
        let diam_e = set_diameter(&mesh, &e);
        let diam_f = set_diameter(&mesh, &f);
        let denom = diam_e.min(diam_f);
        if denom == 0.0 {
            continue;
        }
        let fam = CurveFamily::new(&mesh, e, f, None)?;
        let est = mod2(&fam, tol)?;
        samples.push(LoewnerSample {
            delta: dist_ef / denom,
            modulus: est.value,
        });
    }
    samples.sort_by(|x, y| x.delta.total_cmp(&y.delta));
    let envelope_coefficient = samples
        .iter()
        .filter(|s| s.delta > 0.0)
        .map(|s| s.modulus * (1.0 + s.delta).ln())
        .fold(f64::INFINITY, f64::min);
    let envelope_coefficient = if envelope_coefficient.is_finite() {
        envelope_coefficient
    } else {
        0.0
    };
    Ok(LoewnerProfile {
        samples,
        envelope_coefficient,
    })
}

/// Two-sweep diameter estimate (exact on trees, a lower bound in general).
fn set_diameter(mesh: &MeshGraph, set: &[usize]) -> f64 {
    if set.len() < 2 {
        return 0.0;
    }
    let d0 = mesh.distances_from(set[0]);
    let far = *set
        .iter()
        .max_by(|&&x, &&y| d0[x].total_cmp(&d0[y]))
        .unwrap();
    let d1 = mesh.distances_from(far);
    set.iter().map(|&x| d1[x]).fold(0.0f64, f64::max)
}
