//! Gluing a finite metric space (Y, d_Y) with a smaller metric d_S given on a
//! subset S, where d_S <= d_Y on S x S. The glued distance is
//!
//!   d~(x, y) = min( d_Y(x, y),
//!                   min_{u, v in S} d_Y(x, u) + d_S(u, v) + d_Y(v, y) )
//!
//! One hop through S suffices: multi-hop detours collapse because d_S is a
//! metric dominated by d_Y. Consequences verified by
//! [`verify_glue_clauses`]: d~ is a metric, restricts to d_S on S x S, is
//! locally untouched away from S, and is bi-Lipschitz to d_Y when d_S
//! compresses by a bounded factor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite_metric::{check_metric, FiniteMetric, MetricCheck};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GluedMetric {
    pub base: FiniteMetric,
    /// indices into `base` naming S, in the order of `sub_metric`
    pub subset: Vec<usize>,
    pub sub_metric: FiniteMetric,
    /// the glued metric on all points of `base`
    pub result: FiniteMetric,
}

/// Builds the glued metric. Validates that `sub_metric` is a metric and that
/// it is dominated by the base on S x S; the base itself is assumed to be a
/// metric (run `check_metric` separately when in doubt).
///
/// On S x S the defining minimum provably equals d_S, so those entries are
/// written from `sub_metric` directly; this keeps the restriction identity
/// exact in floating point.
pub fn glue(
    base: &FiniteMetric,
    subset: &[usize],
    sub_metric: &FiniteMetric,
    tol: f64,
) -> Result<GluedMetric> {
    let n = base.len();
    let k = subset.len();
    if k == 0 {
        return Err(Error::invalid("empty gluing subset"));
    }
    if sub_metric.len() != k {
        return Err(Error::invalid(format!(
            "sub-metric has {} points, subset has {}",
            sub_metric.len(),
            k
        )));
    }
    {
        let mut seen = std::collections::HashSet::new();
        for &s in subset {
            if s >= n {
                return Err(Error::invalid(format!("subset index {} out of range", s)));
            }
            if !seen.insert(s) {
                return Err(Error::invalid(format!("subset index {} repeated", s)));
            }
        }
    }
    let sub_check = check_metric(sub_metric, tol);
    if !sub_check.pass {
        return Err(Error::invalid(format!(
            "sub-metric is not a metric: {:?}",
            sub_check.violation
        )));
    }
    for a in 0..k {
        for b in 0..k {
            let ds = sub_metric.d(a, b);
            let dy = base.d(subset[a], subset[b]);
            if ds > dy + tol {
                return Err(Error::precondition(format!(
                    "d_S({a}, {b}) = {ds} exceeds d_Y = {dy} on subset pair ({}, {})",
                    subset[a], subset[b]
                )));
            }
        }
    }

    // bridge[x][v] = min_u d_Y(x, s_u) + d_S(u, v)
    let bridge: Vec<f64> = {
        use rayon::prelude::*;
        (0..n)
            .into_par_iter()
            .flat_map_iter(|x| {
                let mut row = vec![f64::INFINITY; k];
                for (u, &su) in subset.iter().enumerate() {
                    let dxu = base.d(x, su);
                    for (slot, val) in row.iter_mut().enumerate() {
                        let cand = dxu + sub_metric.d(u, slot);
                        if cand < *val {
                            *val = cand;
                        }
                    }
                }
                row.into_iter()
            })
            .collect()
    };

    let rows: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..n)
            .into_par_iter()
            .map(|x| {
                let mut row = vec![0.0f64; n];
                for (y, slot) in row.iter_mut().enumerate() {
                    if y < x {
                        continue; // filled by mirroring
                    }
                    let mut best = base.d(x, y);
                    for (v, &sv) in subset.iter().enumerate() {
                        let cand = bridge[x * k + v] + base.d(sv, y);
                        if cand < best {
                            best = cand;
                        }
                    }
                    *slot = best;
                }
                row
            })
            .collect()
    };

    let mut flat = vec![0.0f64; n * n];
    for x in 0..n {
        for y in x..n {
            flat[x * n + y] = rows[x][y];
            flat[y * n + x] = rows[x][y];
        }
    }
    let mut result = FiniteMetric::from_flat(base.ids().to_vec(), flat);
    for a in 0..k {
        for b in 0..k {
            result.set_d(subset[a], subset[b], sub_metric.d(a, b));
        }
    }
    Ok(GluedMetric {
        base: base.clone(),
        subset: subset.to_vec(),
        sub_metric: sub_metric.clone(),
        result,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlueClausesReport {
    /// the glued distance satisfies the metric axioms
    pub metric: MetricCheck,
    /// d~ == d_S on S x S bit-for-bit, and the defining formula agrees within tol
    pub restriction_exact: bool,
    pub restriction_formula_dev: f64,
    /// for x outside S and s in S: d~(x, s) = min_u d_Y(x, u) + d_S(u, s)
    pub projection_formula_dev: f64,
    /// d~ == d_Y on balls of radius r_x / 3 around each x, r_x the glued
    /// distance from x to S minus x
    pub locality_pass: bool,
    pub locality_witness: Option<(usize, usize, usize)>,
    /// max over S pairs of d_Y / d_S
    pub lambda: f64,
    /// d_Y / lambda <= d~ <= d_Y everywhere
    pub comparison_pass: bool,
    pub comparison_witness: Option<(usize, usize)>,
    pub pass: bool,
}

/// Full clause verification; O(n^2 |S|^2 + n^3), intended for moderate sizes.
pub fn verify_glue_clauses(g: &GluedMetric, tol: f64) -> GlueClausesReport {
    let n = g.base.len();
    let k = g.subset.len();
    let metric = check_metric(&g.result, tol);

    let mut restriction_exact = true;
    let mut restriction_formula_dev = 0.0f64;
    for a in 0..k {
        for b in 0..k {
            let stored = g.result.d(g.subset[a], g.subset[b]);
            if stored.to_bits() != g.sub_metric.d(a, b).to_bits() {
                restriction_exact = false;
            }
            let formula = raw_glue_value(g, g.subset[a], g.subset[b]);
            restriction_formula_dev =
                restriction_formula_dev.max((formula - g.sub_metric.d(a, b)).abs());
        }
    }

    let in_subset: Vec<bool> = {
        let mut mask = vec![false; n];
        for &s in &g.subset {
            mask[s] = true;
        }
        mask
    };
    let mut projection_formula_dev = 0.0f64;
    for x in 0..n {
        if in_subset[x] {
            continue;
        }
        for (b, &sb) in g.subset.iter().enumerate() {
            let mut formula = f64::INFINITY;
            for (u, &su) in g.subset.iter().enumerate() {
                formula = formula.min(g.base.d(x, su) + g.sub_metric.d(u, b));
            }
            projection_formula_dev = projection_formula_dev.max((g.result.d(x, sb) - formula).abs());
        }
    }

    let mut locality_pass = true;
    let mut locality_witness = None;
    'outer: for x in 0..n {
        let mut r = f64::INFINITY;
        for &s in &g.subset {
            if s != x {
                r = r.min(g.result.d(x, s));
            }
        }
        if !r.is_finite() || r <= 0.0 {
            continue;
        }
        let ball: Vec<usize> = (0..n)
            .filter(|&y| g.result.d(x, y) < r / 3.0 - tol)
            .collect();
        for &y in &ball {
            for &z in &ball {
                if (g.result.d(y, z) - g.base.d(y, z)).abs() > tol {
                    locality_pass = false;
                    locality_witness = Some((x, y, z));
                    break 'outer;
                }
            }
        }
    }

    let mut lambda = 1.0f64;
    for a in 0..k {
        for b in (a + 1)..k {
            let ds = g.sub_metric.d(a, b);
            if ds > 0.0 {
                lambda = lambda.max(g.base.d(g.subset[a], g.subset[b]) / ds);
            }
        }
    }
    let mut comparison_pass = true;
    let mut comparison_witness = None;
    'cmp: for x in 0..n {
        for y in 0..n {
            let dt = g.result.d(x, y);
            let dy = g.base.d(x, y);
            if dt > dy + tol || dt < dy / lambda - tol {
                comparison_pass = false;
                comparison_witness = Some((x, y));
                break 'cmp;
            }
        }
    }

    let pass = metric.pass
        && restriction_exact
        && restriction_formula_dev <= tol
        && projection_formula_dev <= tol
        && locality_pass
        && comparison_pass;
    GlueClausesReport {
        metric,
        restriction_exact,
        restriction_formula_dev,
        projection_formula_dev,
        locality_pass,
        locality_witness,
        lambda,
        comparison_pass,
        comparison_witness,
        pass,
    }
}

/// The defining minimum evaluated directly from the stored base and
/// sub-metric, without the S x S snap.
fn raw_glue_value(g: &GluedMetric, x: usize, y: usize) -> f64 {
    let mut best = g.base.d(x, y);
    for (u, &su) in g.subset.iter().enumerate() {
        let dxu = g.base.d(x, su);
        for (v, &sv) in g.subset.iter().enumerate() {
            let cand = dxu + g.sub_metric.d(u, v) + g.base.d(sv, y);
            if cand < best {
                best = cand;
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;

    /// 3 collinear points at unit spacing with a shortcut on the endpoints.
    fn three_point_example() -> GluedMetric {
        let base = FiniteMetric::from_matrix(vec![
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.0, 1.0],
            vec![2.0, 1.0, 0.0],
        ])
        .unwrap();
        let sub = FiniteMetric::from_matrix(vec![vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        glue(&base, &[0, 2], &sub, 1e-9).unwrap()
    }

    #[test]
    fn three_point_values_are_exact() {
        let g = three_point_example();
        assert_eq!(g.result.d(0, 2), 0.5);
        assert_eq!(g.result.d(0, 1), 1.0);
        assert_eq!(g.result.d(1, 2), 1.0);
        let report = verify_glue_clauses(&g, 1e-9);
        assert!(report.pass, "{:?}", report);
        assert_eq!(report.lambda, 4.0);
    }

    #[test]
    fn domination_precondition_is_enforced_with_witness() {
        let base = FiniteMetric::from_matrix(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let sub = FiniteMetric::from_matrix(vec![vec![0.0, 2.0], vec![2.0, 0.0]]).unwrap();
        let err = glue(&base, &[0, 1], &sub, 1e-9).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("precondition"), "{}", msg);
        assert!(msg.contains("exceeds"), "{}", msg);
    }

    #[test]
    fn non_metric_sub_input_is_rejected() {
        let base = sampling::random_metric_closure(5, 1);
        let bad = FiniteMetric::from_matrix(vec![
            vec![0.0, 0.1, 0.9],
            vec![0.1, 0.0, 0.1],
            vec![0.9, 0.1, 0.0],
        ])
        .unwrap();
        // 0.9 > 0.1 + 0.1 violates the triangle inequality
        assert!(glue(&base, &[0, 1, 2], &bad, 1e-9).is_err());
    }

    #[test]
    fn trivial_subset_glue_changes_nothing() {
        let base = sampling::random_metric_closure(8, 3);
        let sub = base.submetric(&[2]).unwrap();
        let g = glue(&base, &[2], &sub, 1e-9).unwrap();
        for x in 0..8 {
            for y in 0..8 {
                // one point cannot shortcut anything beyond the triangle inequality
                assert!((g.result.d(x, y) - base.d(x, y)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn glue_is_idempotent() {
        for seed in 0..10u64 {
            let base = sampling::random_metric_closure(12, seed);
            let subset = vec![0, 3, 5, 9];
            let sub = sampling::shrunk_submetric(&base, &subset, 0.4, seed + 100);
            let g = glue(&base, &subset, &sub, 1e-9).unwrap();
            let g2 = glue(&g.result, &subset, &sub, 1e-9).unwrap();
            for x in 0..12 {
                for y in 0..12 {
                    assert_eq!(
                        g.result.d(x, y).to_bits(),
                        g2.result.d(x, y).to_bits(),
                        "seed {} pair ({}, {})",
                        seed,
                        x,
                        y
                    );
                }
            }
        }
    }

    #[test]
    fn glue_is_monotone_in_the_sub_metric() {
        let base = sampling::random_metric_closure(10, 17);
        let subset = vec![1, 4, 6, 8];
        let sub = sampling::shrunk_submetric(&base, &subset, 0.5, 18);
        let mut smaller_rows = Vec::new();
        for a in 0..4 {
            smaller_rows.push((0..4).map(|b| 0.9 * sub.d(a, b)).collect::<Vec<_>>());
        }
        let smaller = FiniteMetric::from_matrix(smaller_rows).unwrap();
        let g = glue(&base, &subset, &sub, 1e-9).unwrap();
        let g_small = glue(&base, &subset, &smaller, 1e-9).unwrap();
        for x in 0..10 {
            for y in 0..10 {
                assert!(g_small.result.d(x, y) <= g.result.d(x, y));
            }
        }
    }

    #[test]
    fn clauses_hold_on_random_instances() {
        for seed in 0..15u64 {
            let n = 8 + (seed as usize % 8);
            let base = sampling::random_metric_closure(n, seed * 7 + 1);
            let subset: Vec<usize> = (0..n).step_by(3).collect();
            let sub = sampling::shrunk_submetric(&base, &subset, 0.3, seed * 7 + 2);
            let g = glue(&base, &subset, &sub, 1e-9).unwrap();
            let report = verify_glue_clauses(&g, 1e-9);
            assert!(report.pass, "seed {}: {:?}", seed, report);
            assert!(report.lambda >= 1.0);
        }
    }

    #[test]
    fn projection_formula_matches_on_euclidean_input() {
        let base = sampling::random_euclidean_metric(20, 2, 5);
        let subset = vec![0, 7, 13];
        let sub = sampling::shrunk_submetric(&base, &subset, 0.5, 6);
        let g = glue(&base, &subset, &sub, 1e-9).unwrap();
        let report = verify_glue_clauses(&g, 1e-9);
        assert!(report.projection_formula_dev <= 1e-12);
        assert!(report.restriction_exact);
    }
}
