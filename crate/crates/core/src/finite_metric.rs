//! Finite metric spaces given by explicit distance matrices, and the
//! comparison machinery built on them: metric axiom checking, quasisymmetric
//! distortion profiles, bi-Lipschitz constants, diameter comparison bounds,
//! Hausdorff distance, approximate-isometry certificates, doubling constants,
//! linear local connectivity and bounded turning estimates.
//!
//! Conventions:
//! - distances are `f64`, symmetric, zero exactly on the diagonal;
//! - all quantified statements are checked over every point / pair / triple of
//!   the matrix unless an explicit budget is given;
//! - closed conditions (`<=`) carry a small tolerance, strict ones subtract it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Above this point count, triple enumeration in `qs_profile` switches from
/// exhaustive to seeded sampling.
pub const EXHAUSTIVE_TRIPLE_LIMIT: usize = 300;

/// Default comparison tolerance for metric axiom checks.
pub const DEFAULT_METRIC_TOL: f64 = 1e-9;

#[derive(Serialize, Deserialize)]
struct FiniteMetricJson {
    points: Vec<String>,
    dist: Vec<Vec<f64>>,
}

/// A finite metric space: point ids plus a dense symmetric distance matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "FiniteMetricJson", into = "FiniteMetricJson")]
pub struct FiniteMetric {
    points: Vec<String>,
    /// row-major n*n
    dist: Vec<f64>,
}

impl TryFrom<FiniteMetricJson> for FiniteMetric {
    type Error = Error;

    fn try_from(j: FiniteMetricJson) -> Result<Self> {
        FiniteMetric::new(j.points, j.dist)
    }
}

impl From<FiniteMetric> for FiniteMetricJson {
    fn from(m: FiniteMetric) -> Self {
        let rows = (0..m.len())
            .map(|i| (0..m.len()).map(|j| m.d(i, j)).collect())
            .collect();
        FiniteMetricJson {
            points: m.points,
            dist: rows,
        }
    }
}

impl FiniteMetric {
    /// Builds from explicit rows. Validates shape and entry finiteness, not
    /// the metric axioms; run [`check_metric`] for those.
    pub fn new(points: Vec<String>, rows: Vec<Vec<f64>>) -> Result<FiniteMetric> {
        let n = points.len();
        if rows.len() != n {
            return Err(Error::invalid(format!(
                "distance matrix has {} rows for {} points",
                rows.len(),
                n
            )));
        }
        let mut dist = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::invalid(format!(
                    "row {} has length {}, expected {}",
                    i,
                    row.len(),
                    n
                )));
            }
            for &v in row {
                if !v.is_finite() {
                    return Err(Error::invalid(format!("non-finite entry in row {}", i)));
                }
                dist.push(v);
            }
        }
        Ok(FiniteMetric { points, dist })
    }

    /// Builds from rows with point ids "0", "1", ...
    pub fn from_matrix(rows: Vec<Vec<f64>>) -> Result<FiniteMetric> {
        let points = (0..rows.len()).map(|i| i.to_string()).collect();
        FiniteMetric::new(points, rows)
    }

    /// Internal constructor from a flattened matrix already known to be valid.
    pub(crate) fn from_flat(points: Vec<String>, dist: Vec<f64>) -> FiniteMetric {
        debug_assert_eq!(points.len() * points.len(), dist.len());
        FiniteMetric { points, dist }
    }

    /// Euclidean metric of a 3d point cloud.
    pub fn from_coords(coords: &[[f64; 3]]) -> FiniteMetric {
        let n = coords.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = coords[i][0] - coords[j][0];
                let dy = coords[i][1] - coords[j][1];
                let dz = coords[i][2] - coords[j][2];
                let d = (dx * dx + dy * dy + dz * dz).sqrt();
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        FiniteMetric {
            points: (0..n).map(|i| i.to_string()).collect(),
            dist,
        }
    }

    /// Euclidean metric of a planar point cloud.
    pub fn from_coords2(coords: &[[f64; 2]]) -> FiniteMetric {
        let lifted: Vec<[f64; 3]> = coords.iter().map(|p| [p[0], p[1], 0.0]).collect();
        FiniteMetric::from_coords(&lifted)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.points
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.points.len() + j]
    }

    pub(crate) fn set_d(&mut self, i: usize, j: usize, v: f64) {
        let n = self.points.len();
        self.dist[i * n + j] = v;
        self.dist[j * n + i] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.points.len();
        &self.dist[i * n..(i + 1) * n]
    }

    /// Restriction to a point subset, in the given order.
    pub fn submetric(&self, indices: &[usize]) -> Result<FiniteMetric> {
        let n = self.len();
        for &i in indices {
            if i >= n {
                return Err(Error::invalid(format!("point index {} out of range", i)));
            }
        }
        let points = indices.iter().map(|&i| self.points[i].clone()).collect();
        let k = indices.len();
        let mut dist = Vec::with_capacity(k * k);
        for &i in indices {
            for &j in indices {
                dist.push(self.d(i, j));
            }
        }
        Ok(FiniteMetric { points, dist })
    }

    /// Max pairwise distance within an index set (0 for singletons).
    pub fn diam(&self, indices: &[usize]) -> f64 {
        let mut best = 0.0f64;
        for (a, &i) in indices.iter().enumerate() {
            for &j in &indices[a + 1..] {
                best = best.max(self.d(i, j));
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricAxiom {
    Symmetry,
    Diagonal,
    Positivity,
    Triangle,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricViolation {
    pub axiom: MetricAxiom,
    /// offending indices; the third entry is used by triangle violations only
    pub witness: (usize, usize, usize),
    /// how far past the tolerance the violation goes
    pub amount: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricCheck {
    pub pass: bool,
    pub violation: Option<MetricViolation>,
    /// min over triples of d(i,j)+d(j,k)-d(i,k); negative means a violation
    pub min_triangle_slack: f64,
}

/// Checks symmetry, zero diagonal, positivity off the diagonal, and the
/// triangle inequality over all ordered triples. Brute force, O(n^3).
pub fn check_metric(m: &FiniteMetric, tol: f64) -> MetricCheck {
    let n = m.len();
    let fail = |axiom, witness, amount| MetricCheck {
        pass: false,
        violation: Some(MetricViolation {
            axiom,
            witness,
            amount,
        }),
        min_triangle_slack: f64::INFINITY,
    };
    for i in 0..n {
        if m.d(i, i).abs() > tol {
            return fail(MetricAxiom::Diagonal, (i, i, i), m.d(i, i).abs());
        }
        for j in 0..n {
            let asym = (m.d(i, j) - m.d(j, i)).abs();
            if asym > tol {
                return fail(MetricAxiom::Symmetry, (i, j, j), asym);
            }
            if i != j && m.d(i, j) <= tol {
                return fail(MetricAxiom::Positivity, (i, j, j), tol - m.d(i, j));
            }
        }
    }
    let mut min_slack = f64::INFINITY;
    let mut min_witness = (0, 0, 0);
    for i in 0..n {
        for j in 0..n {
            if j == i {
                continue;
            }
            let dij = m.d(i, j);
            for k in 0..n {
                let slack = dij + m.d(j, k) - m.d(i, k);
                if slack < min_slack {
                    min_slack = slack;
                    min_witness = (i, j, k);
                }
            }
        }
    }
    if min_slack < -tol {
        let mut out = fail(MetricAxiom::Triangle, min_witness, -min_slack);
        out.min_triangle_slack = min_slack;
        return out;
    }
    MetricCheck {
        pass: true,
        violation: None,
        min_triangle_slack: min_slack,
    }
}

/// Empirical quasisymmetric distortion profile of a map between two finite
/// metric spaces: the monotone upper envelope of image ratios against source
/// ratios over point triples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistortionProfile {
    /// (t, H(t)) with both coordinates strictly increasing
    pub samples: Vec<(f64, f64)>,
    pub triples: usize,
    pub exhaustive: bool,
    pub seed: u64,
}

impl DistortionProfile {
    /// H(t): largest envelope value at a sample ratio <= t; 0 below the first
    /// sample.
    pub fn eval(&self, t: f64) -> f64 {
        let mut lo = 0usize;
        let mut hi = self.samples.len();
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.samples[mid].0 <= t {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        if lo == 0 {
            0.0
        } else {
            self.samples[lo - 1].1
        }
    }

    fn from_raw(mut raw: Vec<(f64, f64)>, triples: usize, exhaustive: bool, seed: u64) -> Self {
        raw.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut samples: Vec<(f64, f64)> = Vec::new();
        let mut cur = f64::NEG_INFINITY;
        let mut idx = 0;
        while idx < raw.len() {
            let t = raw[idx].0;
            let mut group_max = raw[idx].1;
            while idx + 1 < raw.len() && raw[idx + 1].0 == t {
                idx += 1;
                group_max = group_max.max(raw[idx].1);
            }
            if group_max > cur {
                cur = group_max;
                samples.push((t, cur));
            }
            idx += 1;
        }
        DistortionProfile {
            samples,
            triples,
            exhaustive,
            seed,
        }
    }
}

fn check_bijection(map: &[usize], src_n: usize, dst_n: usize) -> Result<()> {
    if map.len() != src_n {
        return Err(Error::invalid(format!(
            "map covers {} points, source has {}",
            map.len(),
            src_n
        )));
    }
    let mut hit = vec![false; dst_n];
    for &t in map {
        if t >= dst_n {
            return Err(Error::invalid(format!("map target {} out of range", t)));
        }
        if hit[t] {
            return Err(Error::invalid(format!("map target {} hit twice", t)));
        }
        hit[t] = true;
    }
    if src_n != dst_n {
        return Err(Error::invalid("map is not a bijection (size mismatch)"));
    }
    Ok(())
}

/// Builds the distortion profile of `map` (a bijection src -> dst given as a
/// target index per source index). Exhaustive over ordered triples of
/// pairwise-distinct points up to [`EXHAUSTIVE_TRIPLE_LIMIT`] points, then a
/// seeded uniform sample of `budget` triples.
pub fn qs_profile(
    src: &FiniteMetric,
    dst: &FiniteMetric,
    map: &[usize],
    budget: usize,
    seed: u64,
) -> Result<DistortionProfile> {
    check_bijection(map, src.len(), dst.len())?;
    let n = src.len();
    if n < 3 {
        return Ok(DistortionProfile {
            samples: vec![],
            triples: 0,
            exhaustive: true,
            seed,
        });
    }
    let mut raw = Vec::new();
    let mut push_triple = |x: usize, y: usize, z: usize| -> Result<()> {
        let dsrc = src.d(x, z);
        if dsrc <= 0.0 {
            return Err(Error::invalid(format!(
                "coincident distinct points {} and {} in source",
                x, z
            )));
        }
        let ddst = dst.d(map[x], map[z]);
        if ddst <= 0.0 {
            return Err(Error::invalid(format!(
                "coincident distinct points {} and {} in target",
                map[x], map[z]
            )));
        }
        let t = src.d(x, y) / dsrc;
        let q = dst.d(map[x], map[y]) / ddst;
        raw.push((t, q));
        Ok(())
    };
    let exhaustive = n <= EXHAUSTIVE_TRIPLE_LIMIT;
    if exhaustive {
        for x in 0..n {
            for y in 0..n {
                if y == x {
                    continue;
                }
                for z in 0..n {
                    if z == x || z == y {
                        continue;
                    }
                    push_triple(x, y, z)?;
                }
            }
        }
    } else {
        use rand::Rng;
        let mut rng = crate::sampling::seeded_rng(seed);
        let mut produced = 0usize;
        while produced < budget {
            let x = rng.gen_range(0..n);
            let y = rng.gen_range(0..n);
            let z = rng.gen_range(0..n);
            if x == y || y == z || x == z {
                continue;
            }
            push_triple(x, y, z)?;
            produced += 1;
        }
    }
    let count = raw.len();
    Ok(DistortionProfile::from_raw(raw, count, exhaustive, seed))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BilipReport {
    pub lambda: f64,
    /// pair realizing the largest expansion dst/src
    pub witness_expand: (usize, usize),
    /// pair realizing the largest contraction src/dst
    pub witness_contract: (usize, usize),
    pub max_expand: f64,
    pub max_contract: f64,
}

/// Smallest L with d_dst(f x, f y)/L <= d_src(x, y) <= L d_dst(f x, f y)
/// over all pairs. Always >= 1.
pub fn bilip_constant(src: &FiniteMetric, dst: &FiniteMetric, map: &[usize]) -> Result<BilipReport> {
    check_bijection(map, src.len(), dst.len())?;
    let n = src.len();
    let mut max_expand = 1.0f64;
    let mut max_contract = 1.0f64;
    let mut we = (0, 0);
    let mut wc = (0, 0);
    for i in 0..n {
        for j in (i + 1)..n {
            let a = src.d(i, j);
            let b = dst.d(map[i], map[j]);
            if a <= 0.0 || b <= 0.0 {
                return Err(Error::invalid(format!(
                    "coincident distinct points in pair ({}, {})",
                    i, j
                )));
            }
            let expand = b / a;
            let contract = a / b;
            if expand > max_expand {
                max_expand = expand;
                we = (i, j);
            }
            if contract > max_contract {
                max_contract = contract;
                wc = (i, j);
            }
        }
    }
    Ok(BilipReport {
        lambda: max_expand.max(max_contract),
        witness_expand: we,
        witness_contract: wc,
        max_expand,
        max_contract,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiamCheck {
    pub diam_a: f64,
    pub diam_b: f64,
    pub image_ratio: f64,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

/// Checks the two-sided diameter comparison for a subset pair A within B
/// under an eta-quasisymmetric map:
///   1 / (2 eta(diam B / diam A)) <= diam f(A) / diam f(B) <= eta(2 diam A / diam B).
pub fn check_diam_inequality(
    src: &FiniteMetric,
    dst: &FiniteMetric,
    map: &[usize],
    a_set: &[usize],
    b_set: &[usize],
    eta: impl Fn(f64) -> f64,
    tol: f64,
) -> Result<DiamCheck> {
    check_bijection(map, src.len(), dst.len())?;
    if a_set.is_empty() || b_set.is_empty() {
        return Err(Error::invalid("empty subset"));
    }
    let b_lookup: std::collections::HashSet<usize> = b_set.iter().copied().collect();
    if !a_set.iter().all(|i| b_lookup.contains(i)) {
        return Err(Error::precondition("A must be a subset of B"));
    }
    let diam_a = src.diam(a_set);
    let diam_b = src.diam(b_set);
    if diam_a <= 0.0 {
        return Err(Error::precondition("diam(A) must be positive"));
    }
    let fa: Vec<usize> = a_set.iter().map(|&i| map[i]).collect();
    let fb: Vec<usize> = b_set.iter().map(|&i| map[i]).collect();
    let img_a = dst.diam(&fa);
    let img_b = dst.diam(&fb);
    if img_b <= 0.0 {
        return Err(Error::precondition("diam(f(B)) must be positive"));
    }
    let ratio = img_a / img_b;
    let lower = 0.5 / eta(diam_b / diam_a);
    let upper = eta(2.0 * diam_a / diam_b);
    let pass = ratio >= lower - tol && ratio <= upper + tol;
    Ok(DiamCheck {
        diam_a,
        diam_b,
        image_ratio: ratio,
        lower,
        upper,
        pass,
    })
}

/// Hausdorff distance between two nonempty index sets of the same space.
pub fn hausdorff_distance(m: &FiniteMetric, e: &[usize], f: &[usize]) -> Result<f64> {
    if e.is_empty() || f.is_empty() {
        return Err(Error::invalid("hausdorff_distance of an empty set"));
    }
    let directed = |from: &[usize], to: &[usize]| -> f64 {
        let mut sup = 0.0f64;
        for &x in from {
            let mut inf = f64::INFINITY;
            for &y in to {
                inf = inf.min(m.d(x, y));
            }
            sup = sup.max(inf);
        }
        sup
    };
    Ok(directed(e, f).max(directed(f, e)))
}

/// Certificate that a map is an approximate isometry: worst additive distance
/// distortion plus worst distance from a target point to the image.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsIsometryCert {
    pub eps_distortion: f64,
    pub eps_density: f64,
    /// smallest eps (with the given slack added) certified by the data
    pub eps: f64,
    pub witness_distortion: (usize, usize),
    pub witness_density: usize,
}

/// `map` sends each source index to a target index; it need not be injective.
pub fn eps_isometry_cert(
    src: &FiniteMetric,
    dst: &FiniteMetric,
    map: &[usize],
    tol: f64,
) -> Result<EpsIsometryCert> {
    if map.len() != src.len() {
        return Err(Error::invalid("map length must equal the source size"));
    }
    for &t in map {
        if t >= dst.len() {
            return Err(Error::invalid(format!("map target {} out of range", t)));
        }
    }
    if src.is_empty() {
        return Err(Error::invalid("empty source"));
    }
    let n = src.len();
    let mut eps_distortion = 0.0f64;
    let mut wd = (0, 0);
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = (src.d(i, j) - dst.d(map[i], map[j])).abs();
            if gap > eps_distortion {
                eps_distortion = gap;
                wd = (i, j);
            }
        }
    }
    let mut eps_density = 0.0f64;
    let mut wdens = 0;
    for y in 0..dst.len() {
        let mut inf = f64::INFINITY;
        for &t in map {
            inf = inf.min(dst.d(y, t));
        }
        if inf > eps_density {
            eps_density = inf;
            wdens = y;
        }
    }
    Ok(EpsIsometryCert {
        eps_distortion,
        eps_density,
        eps: (eps_distortion + tol).max(eps_density + tol),
        witness_distortion: wd,
        witness_density: wdens,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DoublingReport {
    /// max over samples of the greedy cover count
    pub constant: usize,
    /// (center, radius) attaining it
    pub witness: (usize, f64),
    pub per_sample: Vec<(usize, f64, usize)>,
}

/// For each sampled (center, R): greedily covers the points of the closed
/// ball B(center, R) by closed balls of radius R/2 centered at points, taking
/// the lowest-index uncovered point as the next center. Returns the max count.
pub fn doubling_constant(m: &FiniteMetric, samples: &[(usize, f64)]) -> Result<DoublingReport> {
    if samples.is_empty() {
        return Err(Error::invalid("no (center, radius) samples given"));
    }
    let n = m.len();
    let mut best = 0usize;
    let mut witness = samples[0];
    let mut per_sample = Vec::with_capacity(samples.len());
    for &(center, radius) in samples {
        if center >= n {
            return Err(Error::invalid(format!("center {} out of range", center)));
        }
        if !(radius > 0.0) {
            return Err(Error::invalid("radius must be positive"));
        }
        let mut remaining: Vec<usize> = (0..n).filter(|&i| m.d(center, i) <= radius).collect();
        let mut count = 0usize;
        while let Some(&pivot) = remaining.first() {
            count += 1;
            remaining.retain(|&p| m.d(pivot, p) > radius / 2.0);
        }
        per_sample.push((center, radius, count));
        if count > best {
            best = count;
            witness = (center, radius);
        }
    }
    Ok(DoublingReport {
        constant: best,
        witness,
        per_sample,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LlcReport {
    pub llc1_pass: bool,
    pub llc2_pass: bool,
    /// (center, radius, disconnected pair) for the first failure of each kind
    pub witness_llc1: Option<(usize, f64, (usize, usize))>,
    pub witness_llc2: Option<(usize, f64, (usize, usize))>,
}

fn components_within(adj: &[Vec<usize>], allowed: &[bool]) -> Vec<usize> {
    let n = adj.len();
    let mut comp = vec![usize::MAX; n];
    let mut next = 0usize;
    for start in 0..n {
        if !allowed[start] || comp[start] != usize::MAX {
            continue;
        }
        comp[start] = next;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if allowed[u] && comp[u] == usize::MAX {
                    comp[u] = next;
                    stack.push(u);
                }
            }
        }
        next += 1;
    }
    comp
}

fn connectivity_witness(
    adj: &[Vec<usize>],
    required: &[usize],
    allowed: &[bool],
) -> Option<(usize, usize)> {
    if required.len() < 2 {
        return None;
    }
    let comp = components_within(adj, allowed);
    let c0 = comp[required[0]];
    required
        .iter()
        .skip(1)
        .find(|&&v| comp[v] != c0)
        .map(|&v| (required[0], v))
}

/// Linear local connectivity at constant M over sampled balls: points of
/// B(a, r) must connect within B(a, M r) (LLC1), and points outside B(a, r)
/// must connect outside B(a, r/M) (LLC2). Connectivity is through the given
/// adjacency graph restricted to the stated region.
pub fn llc_check(
    m: &FiniteMetric,
    adj: &[Vec<usize>],
    big_m: f64,
    samples: &[(usize, f64)],
    tol: f64,
) -> Result<LlcReport> {
    if adj.len() != m.len() {
        return Err(Error::invalid("adjacency size must match the point count"));
    }
    if !(big_m >= 1.0) {
        return Err(Error::invalid("LLC constant must be >= 1"));
    }
    let n = m.len();
    let mut report = LlcReport {
        llc1_pass: true,
        llc2_pass: true,
        witness_llc1: None,
        witness_llc2: None,
    };
    for &(a, r) in samples {
        if a >= n {
            return Err(Error::invalid(format!("center {} out of range", a)));
        }
        let ball: Vec<usize> = (0..n).filter(|&x| m.d(a, x) <= r + tol).collect();
        let allowed1: Vec<bool> = (0..n).map(|x| m.d(a, x) <= big_m * r + tol).collect();
        if report.llc1_pass {
            if let Some(pair) = connectivity_witness(adj, &ball, &allowed1) {
                report.llc1_pass = false;
                report.witness_llc1 = Some((a, r, pair));
            }
        }
        let outside: Vec<usize> = (0..n).filter(|&x| m.d(a, x) >= r - tol).collect();
        let allowed2: Vec<bool> = (0..n).map(|x| m.d(a, x) >= r / big_m - tol).collect();
        if report.llc2_pass {
            if let Some(pair) = connectivity_witness(adj, &outside, &allowed2) {
                report.llc2_pass = false;
                report.witness_llc2 = Some((a, r, pair));
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundedTurningReport {
    /// max over pairs of (connecting path length) / (distance)
    pub constant: f64,
    pub witness: (usize, usize),
}

/// Heuristic upper estimate of the bounded-turning constant: connects each
/// pair by a shortest path in the adjacency graph with metric edge weights
/// and compares the intrinsic diameter of that path (its length) with the
/// endpoint distance.
pub fn bounded_turning_constant(
    m: &FiniteMetric,
    adj: &[Vec<usize>],
) -> Result<BoundedTurningReport> {
    if adj.len() != m.len() {
        return Err(Error::invalid("adjacency size must match the point count"));
    }
    let n = m.len();
    let mut edges = Vec::new();
    for (v, nbrs) in adj.iter().enumerate() {
        for &u in nbrs {
            if u > v {
                edges.push((v, u, m.d(v, u)));
            }
        }
    }
    let g = crate::graph::Csr::from_edges(n, &edges);
    let mut scratch = crate::graph::DijkstraScratch::new(n);
    let mut best = 1.0f64;
    let mut witness = (0, 0);
    for i in 0..n {
        let d = scratch.distances_from(&g, i);
        for j in (i + 1)..n {
            if d[j].is_infinite() {
                return Err(Error::precondition(format!(
                    "adjacency graph disconnects {} from {}",
                    i, j
                )));
            }
            let dm = m.d(i, j);
            if dm <= 0.0 {
                return Err(Error::invalid(format!(
                    "coincident distinct points in pair ({}, {})",
                    i, j
                )));
            }
            let ratio = d[j] / dm;
            if ratio > best {
                best = ratio;
                witness = (i, j);
            }
        }
    }
    Ok(BoundedTurningReport {
        constant: best,
        witness,
    })
}
