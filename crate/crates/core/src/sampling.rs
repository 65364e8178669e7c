//! Seeded generators for test data: random point clouds, random metrics via
//! shortest-path closure, multiplicative perturbations, and smooth seeded
//! bi-Lipschitz plane maps with certified constants. Everything is driven by
//! an explicit u64 seed and is reproducible across runs and platforms.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::finite_metric::FiniteMetric;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Euclidean metric of n points drawn uniformly from the unit cube of the
/// given dimension (capped at 3).
pub fn random_euclidean_metric(n: usize, dim: usize, seed: u64) -> FiniteMetric {
    let mut rng = seeded_rng(seed);
    let dim = dim.clamp(1, 3);
    let coords: Vec<[f64; 3]> = (0..n)
        .map(|_| {
            let mut p = [0.0; 3];
            for c in p.iter_mut().take(dim) {
                *c = rng.gen_range(0.0..1.0);
            }
            p
        })
        .collect();
    FiniteMetric::from_coords(&coords)
}

/// Random metric on n points: uniform complete-graph edge weights followed by
/// a shortest-path closure, which enforces the triangle inequality exactly.
pub fn random_metric_closure(n: usize, seed: u64) -> FiniteMetric {
    let mut rng = seeded_rng(seed);
    let mut rows = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let w = rng.gen_range(0.5..2.0);
            rows[i][j] = w;
            rows[j][i] = w;
        }
    }
    floyd_warshall(&mut rows);
    FiniteMetric::from_matrix(rows).expect("closure matrix is square")
}

fn floyd_warshall(rows: &mut [Vec<f64>]) {
    let n = rows.len();
    for k in 0..n {
        for i in 0..n {
            let dik = rows[i][k];
            for j in 0..n {
                let alt = dik + rows[k][j];
                if alt < rows[i][j] {
                    rows[i][j] = alt;
                }
            }
        }
    }
}

/// Scales each off-diagonal entry by an independent factor in
/// [1 - delta, 1 + delta], keeping symmetry and the zero diagonal. The result
/// may violate the triangle inequality; intended for distortion-map tests.
pub fn perturb_multiplicative(m: &FiniteMetric, delta: f64, seed: u64) -> FiniteMetric {
    let mut rng = seeded_rng(seed);
    let n = m.len();
    let mut rows = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let f = rng.gen_range(1.0 - delta..1.0 + delta);
            rows[i][j] = m.d(i, j) * f;
            rows[j][i] = rows[i][j];
        }
    }
    FiniteMetric::from_matrix(rows).expect("perturbed matrix is square")
}

/// Sub-metric generator: shrinks the restriction of `m` to `subset` by
/// independent factors in [lo, 1], then applies a shortest-path closure over
/// the subset. The closure of shrunk weights never exceeds the shrunk weights
/// themselves, so the result is a metric dominated by the restriction of `m`.
pub fn shrunk_submetric(m: &FiniteMetric, subset: &[usize], lo: f64, seed: u64) -> FiniteMetric {
    let mut rng = seeded_rng(seed);
    let k = subset.len();
    let mut rows = vec![vec![0.0f64; k]; k];
    for a in 0..k {
        for b in (a + 1)..k {
            let f = rng.gen_range(lo..=1.0);
            let w = m.d(subset[a], subset[b]) * f;
            rows[a][b] = w;
            rows[b][a] = w;
        }
    }
    floyd_warshall(&mut rows);
    let ids = subset.iter().map(|&i| m.ids()[i].clone()).collect();
    FiniteMetric::new(ids, rows).expect("shrunk matrix is square")
}

/// Smooth plane map F(p) = p + sum_k a_k sin(w_k . p + phi_k) u_k with
/// sum_k a_k |w_k| = delta < 1, so every directional derivative of F - id has
/// norm at most delta. Its bi-Lipschitz constant is at most 1 / (1 - delta).
#[derive(Debug, Clone)]
pub struct PlaneMap {
    terms: Vec<([f64; 2], f64, [f64; 2], f64)>, // (w, phi, u, a)
    delta: f64,
}

impl PlaneMap {
    /// `delta` must lie in (0, 1); wavelengths are O(1) so the map is well
    /// resolved by unit-scale samples.
    pub fn seeded(seed: u64, delta: f64) -> PlaneMap {
        assert!(delta > 0.0 && delta < 1.0);
        let mut rng = seeded_rng(seed);
        let k = 4usize;
        let mut terms = Vec::with_capacity(k);
        let share = delta / k as f64;
        for _ in 0..k {
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let freq = rng.gen_range(0.6..1.8);
            let w = [freq * angle.cos(), freq * angle.sin()];
            let phi = rng.gen_range(0.0..std::f64::consts::TAU);
            let uangle = rng.gen_range(0.0..std::f64::consts::TAU);
            let u = [uangle.cos(), uangle.sin()];
            let a = share / freq;
            terms.push((w, phi, u, a));
        }
        PlaneMap { terms, delta }
    }

    pub fn eval(&self, p: [f64; 2]) -> [f64; 2] {
        let mut out = p;
        for &(w, phi, u, a) in &self.terms {
            let s = a * (w[0] * p[0] + w[1] * p[1] + phi).sin();
            out[0] += s * u[0];
            out[1] += s * u[1];
        }
        out
    }

    /// Certified upper bound for the bi-Lipschitz constant of the map.
    pub fn lambda_bound(&self) -> f64 {
        1.0 / (1.0 - self.delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite_metric::{bilip_constant, check_metric};

    #[test]
    fn metric_closure_is_a_metric() {
        for seed in 0..10 {
            let m = random_metric_closure(15, seed);
            assert!(check_metric(&m, 1e-12).pass, "seed {}", seed);
        }
    }

    #[test]
    fn shrunk_submetric_is_dominated_and_metric() {
        let m = random_metric_closure(20, 4);
        let subset: Vec<usize> = vec![1, 3, 5, 8, 13, 17];
        let sub = shrunk_submetric(&m, &subset, 0.3, 9);
        assert!(check_metric(&sub, 1e-12).pass);
        for a in 0..subset.len() {
            for b in 0..subset.len() {
                assert!(sub.d(a, b) <= m.d(subset[a], subset[b]) + 1e-12);
            }
        }
    }

    #[test]
    fn plane_map_respects_certified_bilip_bound() {
        let map = PlaneMap::seeded(11, 1.0 / 3.0);
        let mut src_pts = Vec::new();
        let mut dst_pts = Vec::new();
        for j in 0..12 {
            for i in 0..12 {
                let p = [i as f64 * 0.5, j as f64 * 0.5];
                src_pts.push(p);
                dst_pts.push(map.eval(p));
            }
        }
        let src = FiniteMetric::from_coords2(&src_pts);
        let dst = FiniteMetric::from_coords2(&dst_pts);
        let ident: Vec<usize> = (0..src.len()).collect();
        let report = bilip_constant(&src, &dst, &ident).unwrap();
        assert!(
            report.lambda <= map.lambda_bound() + 1e-9,
            "lambda {} exceeds bound {}",
            report.lambda,
            map.lambda_bound()
        );
    }

    #[test]
    fn generators_are_reproducible() {
        let a = random_metric_closure(10, 99);
        let b = random_metric_closure(10, 99);
        for i in 0..10 {
            for j in 0..10 {
                assert_eq!(a.d(i, j), b.d(i, j));
            }
        }
    }
}
