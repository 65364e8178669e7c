//! Explicit builders: the prescribed-side-length triangle complex, barycentric
//! 3-subdivision, replace-and-glue assembly over a base triangulation, and the
//! snowsphere generator.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::simplicial::MetricComplex;

/// Three triangles sharing an apex over a (possibly degenerate) planar
/// triangle with prescribed side lengths d1, d2, d3. Boundary edge i carries
/// exactly d_i; the apex sits at height `scale` over the barycenter, which
/// keeps every apex triangle uniformly non-degenerate.
pub struct TriangleComplexK {
    pub complex: MetricComplex,
    /// edge index in `complex` of the boundary edge of length d_i
    pub boundary_edges: [usize; 3],
    /// vertex indices of the base corners q1, q2, q3
    pub corners: [usize; 3],
    /// vertex index of the apex z0
    pub apex: usize,
    /// normalization scale (= d1)
    pub scale: f64,
    /// max(d_i) / min(d_i)
    pub ratio: f64,
}

impl TriangleComplexK {
    /// Lengths of the three apex edges z0-q_i.
    pub fn apex_edge_lengths(&self) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (k, &q) in self.corners.iter().enumerate() {
            let e = self
                .complex
                .edge_between(q, self.apex)
                .expect("apex edge exists");
            out[k] = self.complex.edges()[e].len;
        }
        out
    }
}

fn check_admissible(d: [f64; 3]) -> Result<()> {
    for &x in &d {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::invalid("side lengths must be positive"));
        }
    }
    for i in 0..3 {
        if d[i] > d[(i + 1) % 3] + d[(i + 2) % 3] {
            return Err(Error::invalid(format!(
                "side {} exceeds the sum of the others: not realizable",
                d[i]
            )));
        }
    }
    Ok(())
}

/// Planar coordinates of a possibly degenerate triangle with sides
/// |q1q2| = a, |q2q3| = b, |q3q1| = c; q1 at the origin, q2 on the x axis.
/// The height is clamped at zero, so collinear inputs land on the axis.
fn planar_clamped(a: f64, b: f64, c: f64) -> [[f64; 2]; 3] {
    let x = (a * a + c * c - b * b) / (2.0 * a);
    let y2 = c * c - x * x;
    [[0.0, 0.0], [a, 0.0], [x, y2.max(0.0).sqrt()]]
}

/// Builds the three-triangle apex complex over prescribed side lengths.
/// Degenerate bases (d_i = d_j + d_k) are allowed; the apex keeps the output
/// triangles non-degenerate.
pub fn triangle_complex(d1: f64, d2: f64, d3: f64) -> Result<TriangleComplexK> {
    let d = [d1, d2, d3];
    check_admissible(d)?;
    let scale = d1;
    // normalized base: |q1q2| = 1, |q2q3| = d2/d1, |q3q1| = d3/d1
    let q = planar_clamped(1.0, d2 / d1, d3 / d1);
    let bc = [
        (q[0][0] + q[1][0] + q[2][0]) / 3.0,
        (q[0][1] + q[1][1] + q[2][1]) / 3.0,
    ];
    // apex edge lengths: sqrt(1 + |q_i - bc|^2), rescaled
    let apex_len: Vec<f64> = q
        .iter()
        .map(|p| {
            let r2 = (p[0] - bc[0]).powi(2) + (p[1] - bc[1]).powi(2);
            scale * (1.0 + r2).sqrt()
        })
        .collect();
    let vertices = vec!["q1".into(), "q2".into(), "q3".into(), "z0".into()];
    let embedding = vec![
        [scale * q[0][0], scale * q[0][1], 0.0],
        [scale * q[1][0], scale * q[1][1], 0.0],
        [scale * q[2][0], scale * q[2][1], 0.0],
        [scale * bc[0], scale * bc[1], scale],
    ];
    // boundary lengths are the prescribed inputs exactly
    let triangles = vec![
        (0usize, 1usize, 3usize, d1, apex_len[1], apex_len[0]),
        (1, 2, 3, d2, apex_len[2], apex_len[1]),
        (2, 0, 3, d3, apex_len[0], apex_len[2]),
    ];
    let complex = MetricComplex::build(vertices, triangles, Some(embedding), true)?;
    let boundary_edges = [
        complex.edge_between(0, 1).expect("boundary edge"),
        complex.edge_between(1, 2).expect("boundary edge"),
        complex.edge_between(2, 0).expect("boundary edge"),
    ];
    let (lo, hi) = d.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    });
    Ok(TriangleComplexK {
        complex,
        boundary_edges,
        corners: [0, 1, 2],
        apex: 3,
        scale,
        ratio: hi / lo,
    })
}

/// Splits one non-degenerate triangle at its barycenter into three.
/// Boundary sides carry the inputs exactly; the barycenter sides come from
/// the planar realization.
pub fn subdivide3(l01: f64, l12: f64, l20: f64) -> Result<MetricComplex> {
    let c = MetricComplex::build(
        vec!["q1".into(), "q2".into(), "q3".into()],
        vec![(0, 1, 2, l01, l12, l20)],
        None,
        true,
    )?; // validates non-degeneracy
    let sub = subdivide_complex(&c)?;
    Ok(sub.complex)
}

/// Barycentric 3-subdivision applied to every triangle of a complex.
pub struct Subdivided {
    pub complex: MetricComplex,
    /// vertex index in the subdivided complex of triangle t's barycenter
    pub barycenters: Vec<usize>,
}

pub fn subdivide_complex(z: &MetricComplex) -> Result<Subdivided> {
    let nv = z.vertex_count();
    let mut vertices: Vec<String> = z.vertex_ids().to_vec();
    let mut triangles = Vec::with_capacity(3 * z.triangle_count());
    let mut barycenters = Vec::with_capacity(z.triangle_count());
    let mut embedding = z.embedding().map(|em| em.to_vec());
    for t in 0..z.triangle_count() {
        let tri = z.triangles()[t];
        let q = z.planar_realization(t);
        let bc = [
            (q[0][0] + q[1][0] + q[2][0]) / 3.0,
            (q[0][1] + q[1][1] + q[2][1]) / 3.0,
        ];
        let to_bc: Vec<f64> = q
            .iter()
            .map(|p| ((p[0] - bc[0]).powi(2) + (p[1] - bc[1]).powi(2)).sqrt())
            .collect();
        let b = vertices.len();
        vertices.push(format!("b{}", t));
        barycenters.push(b);
        if let Some(em) = &mut embedding {
            let tv = tri.v;
            em.push([
                (em[tv[0]][0] + em[tv[1]][0] + em[tv[2]][0]) / 3.0,
                (em[tv[0]][1] + em[tv[1]][1] + em[tv[2]][1]) / 3.0,
                (em[tv[0]][2] + em[tv[1]][2] + em[tv[2]][2]) / 3.0,
            ]);
        }
        for side in 0..3 {
            let u = tri.v[side];
            let v = tri.v[(side + 1) % 3];
            triangles.push((u, v, b, tri.len[side], to_bc[(side + 1) % 3], to_bc[side]));
        }
    }
    let complex = MetricComplex::build(vertices, triangles, embedding, true)?;
    debug_assert_eq!(complex.vertex_count(), nv + z.triangle_count());
    Ok(Subdivided {
        complex,
        barycenters,
    })
}

/// Result of replacing every triangle of a base complex Z with an apex
/// complex and gluing along shared boundary edges.
pub struct AssembledY {
    pub y: MetricComplex,
    /// vertex map from the 3-subdivision Z' of Z into Y: original vertices
    /// map to themselves, barycenter of triangle t maps to apex t
    pub zprime_to_y: Vec<usize>,
    /// vertex index in Y of triangle t's apex
    pub apexes: Vec<usize>,
}

/// Builds Y from a consistently oriented base Z and one prescribed length per
/// original edge of Z. Each triangle (u, v, w) of Z becomes an apex complex
/// over sides (d_uv, d_vw, d_wu); boundary edges carry the prescribed lengths
/// exactly, so shared edges glue isometrically.
pub fn assemble_y(z: &MetricComplex, edge_lengths: &[f64]) -> Result<AssembledY> {
    if edge_lengths.len() != z.edges().len() {
        return Err(Error::invalid(format!(
            "need {} edge lengths, got {}",
            z.edges().len(),
            edge_lengths.len()
        )));
    }
    for (e, &l) in edge_lengths.iter().enumerate() {
        if !(l > 0.0) || !l.is_finite() {
            let (a, b) = z.edges()[e].v;
            return Err(Error::invalid(format!(
                "edge ({}, {}) has non-positive prescribed length",
                a, b
            )));
        }
    }
    let nv = z.vertex_count();
    let mut vertices: Vec<String> = z.vertex_ids().to_vec();
    let mut triangles = Vec::with_capacity(3 * z.triangle_count());
    let mut apexes = Vec::with_capacity(z.triangle_count());
    for t in 0..z.triangle_count() {
        let tri = z.triangles()[t];
        let mut d = [0.0; 3];
        for side in 0..3 {
            let u = tri.v[side];
            let v = tri.v[(side + 1) % 3];
            let e = z.edge_between(u, v).expect("triangle side is an edge");
            d[side] = edge_lengths[e];
        }
        for i in 0..3 {
            if d[i] > d[(i + 1) % 3] + d[(i + 2) % 3] {
                return Err(Error::invalid(format!(
                    "prescribed lengths around triangle {} are not realizable: \
                     {} > {} + {}",
                    t,
                    d[i],
                    d[(i + 1) % 3],
                    d[(i + 2) % 3]
                )));
            }
        }
        let scale = d[0];
        let q = planar_clamped(1.0, d[1] / d[0], d[2] / d[0]);
        let bc = [
            (q[0][0] + q[1][0] + q[2][0]) / 3.0,
            (q[0][1] + q[1][1] + q[2][1]) / 3.0,
        ];
        let apex_len: Vec<f64> = q
            .iter()
            .map(|p| {
                let r2 = (p[0] - bc[0]).powi(2) + (p[1] - bc[1]).powi(2);
                scale * (1.0 + r2).sqrt()
            })
            .collect();
        let a = vertices.len();
        vertices.push(format!("z0_{}", t));
        apexes.push(a);
        for side in 0..3 {
            let u = tri.v[side];
            let v = tri.v[(side + 1) % 3];
            triangles.push((u, v, a, d[side], apex_len[(side + 1) % 3], apex_len[side]));
        }
    }
    let y = MetricComplex::build(vertices, triangles, None, true)?;
    let mut zprime_to_y: Vec<usize> = (0..nv).collect();
    zprime_to_y.extend(apexes.iter().copied());
    Ok(AssembledY {
        y,
        zprime_to_y,
        apexes,
    })
}

/// Snowsphere surface with its exact integer coordinate chart: coordinates
/// are integers at denominator 3^stage, so shared edges and cross-stage
/// vertex matches are exact.
pub struct Snowsphere {
    pub complex: MetricComplex,
    pub stage: usize,
    pub square_count: usize,
    /// integer coordinates; embedded position = int_coords / denom
    pub int_coords: Vec<[i64; 3]>,
    pub denom: i64,
}

/// Exponential blow-up guard: stage 5 would have 6 * 13^5 squares.
pub const SNOWSPHERE_MAX_STAGE: usize = 4;

fn cross_i(a: [i64; 3], b: [i64; 3]) -> [i64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn add_i(a: [i64; 3], b: [i64; 3]) -> [i64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub_i(a: [i64; 3], b: [i64; 3]) -> [i64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scale_i(a: [i64; 3], s: i64) -> [i64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn div3_i(a: [i64; 3]) -> [i64; 3] {
    debug_assert!(a.iter().all(|x| x % 3 == 0));
    [a[0] / 3, a[1] / 3, a[2] / 3]
}

/// Builds stage n of the snowsphere: the unit cube surface where every stage
/// subdivides each square into nine and replaces the middle one by an
/// outward cubical cap of five squares, everything finally split into two
/// right isoceles triangles along the square's own (c00, c11) diagonal.
///
/// Vertices are identified combinatorially through the construction, never
/// by coordinates: from stage 2 on, caps on adjacent perpendicular squares
/// touch in space, so distinct surface points can share coordinates. As a
/// consequence the first vertices of stage n+1 are exactly the stage-n
/// vertices, with coordinates multiplied by 3.
pub fn snowsphere(stage: usize) -> Result<Snowsphere> {
    if stage > SNOWSPHERE_MAX_STAGE {
        return Err(Error::invalid(format!(
            "stage {} exceeds the guard {} (6*13^n squares)",
            stage, SNOWSPHERE_MAX_STAGE
        )));
    }
    // stage 0: outward-oriented unit cube, squares as [c00, c10, c11, c01]
    let mut coords: Vec<[i64; 3]> = (0..8)
        .map(|k: i64| [k & 1, (k >> 1) & 1, (k >> 2) & 1])
        .collect();
    let v = |x: i64, y: i64, z: i64| (x + 2 * y + 4 * z) as usize;
    let mut squares: Vec<[usize; 4]> = vec![
        [v(0, 0, 0), v(0, 1, 0), v(1, 1, 0), v(1, 0, 0)], // bottom, -z
        [v(0, 0, 1), v(1, 0, 1), v(1, 1, 1), v(0, 1, 1)], // top, +z
        [v(0, 0, 0), v(1, 0, 0), v(1, 0, 1), v(0, 0, 1)], // front, -y
        [v(0, 1, 0), v(0, 1, 1), v(1, 1, 1), v(1, 1, 0)], // back, +y
        [v(0, 0, 0), v(0, 0, 1), v(0, 1, 1), v(0, 1, 0)], // left, -x
        [v(1, 0, 0), v(1, 1, 0), v(1, 1, 1), v(1, 0, 1)], // right, +x
    ];

    for _ in 0..stage {
        for c in &mut coords {
            *c = scale_i(*c, 3);
        }
        let mut edge_pts: HashMap<(usize, usize), [usize; 2]> = HashMap::new();
        let mut next = Vec::with_capacity(squares.len() * 13);
        for &[c00, c10, c11, c01] in &squares {
            let o = coords[c00];
            let a = div3_i(sub_i(coords[c10], o));
            let b = div3_i(sub_i(coords[c01], o));
            let at = |i: i64, j: i64| add_i(o, add_i(scale_i(a, i), scale_i(b, j)));
            // 4x4 lattice of vertex ids over the square
            let mut lat = [[usize::MAX; 4]; 4];
            lat[0][0] = c00;
            lat[3][0] = c10;
            lat[3][3] = c11;
            lat[0][3] = c01;
            {
                let mut edge = |p: usize, q: usize, coords: &mut Vec<[i64; 3]>| -> [usize; 2] {
                    let key = (p.min(q), p.max(q));
                    let pts = *edge_pts.entry(key).or_insert_with(|| {
                        let lo = coords[key.0];
                        let step = div3_i(sub_i(coords[key.1], lo));
                        let id = coords.len();
                        coords.push(add_i(lo, step));
                        coords.push(add_i(lo, scale_i(step, 2)));
                        [id, id + 1]
                    });
                    // returned in traversal order p -> q
                    if p == key.0 {
                        pts
                    } else {
                        [pts[1], pts[0]]
                    }
                };
                let s = edge(c00, c10, &mut coords);
                lat[1][0] = s[0];
                lat[2][0] = s[1];
                let s = edge(c10, c11, &mut coords);
                lat[3][1] = s[0];
                lat[3][2] = s[1];
                let s = edge(c01, c11, &mut coords);
                lat[1][3] = s[0];
                lat[2][3] = s[1];
                let s = edge(c00, c01, &mut coords);
                lat[0][1] = s[0];
                lat[0][2] = s[1];
            }
            for (i, j) in [(1i64, 1i64), (2, 1), (1, 2), (2, 2)] {
                lat[i as usize][j as usize] = coords.len();
                coords.push(at(i, j));
            }
            // eight kept sub-squares
            for i in 0..3usize {
                for j in 0..3usize {
                    if (i, j) == (1, 1) {
                        continue;
                    }
                    next.push([lat[i][j], lat[i + 1][j], lat[i + 1][j + 1], lat[i][j + 1]]);
                }
            }
            // cap over the middle square
            let n_hat = cross_i(a, b);
            let (m00, m10, m11, m01) = (lat[1][1], lat[2][1], lat[2][2], lat[1][2]);
            let tid = coords.len();
            for &m in &[m00, m10, m11, m01] {
                coords.push(add_i(coords[m], n_hat));
            }
            let (t00, t10, t11, t01) = (tid, tid + 1, tid + 2, tid + 3);
            next.push([m00, m10, t10, t00]); // wall facing -b
            next.push([m10, m11, t11, t10]); // wall facing +a
            next.push([m01, t01, t11, m11]); // wall facing +b
            next.push([m00, t00, t01, m01]); // wall facing -a
            next.push([t00, t10, t11, t01]); // cap top
        }
        squares = next;
    }

    let denom = 3i64.pow(stage as u32);
    let unit = 1.0 / denom as f64;
    let len = |p: usize, q: usize| -> f64 {
        let d = sub_i(coords[p], coords[q]);
        (((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) as f64).sqrt()) * unit
    };
    let mut triangles = Vec::with_capacity(squares.len() * 2);
    for &[c00, c10, c11, c01] in &squares {
        triangles.push((c00, c10, c11, len(c00, c10), len(c10, c11), len(c11, c00)));
        triangles.push((c00, c11, c01, len(c00, c11), len(c11, c01), len(c01, c00)));
    }
    let embedding: Vec<[f64; 3]> = coords
        .iter()
        .map(|c| [c[0] as f64 * unit, c[1] as f64 * unit, c[2] as f64 * unit])
        .collect();
    let vertices = (0..coords.len()).map(|k| format!("v{}", k)).collect();
    let complex = MetricComplex::build(vertices, triangles, Some(embedding), true)?;
    Ok(Snowsphere {
        complex,
        stage,
        square_count: squares.len(),
        int_coords: coords,
        denom,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplicial::heron_area;
    use crate::grids;
    use crate::sampling::seeded_rng;
    use crate::simplicial::{mesh_graph, qc_certificate};
    use rand::Rng;

    #[test]
    fn equilateral_apex_edges() {
        let k = triangle_complex(1.0, 1.0, 1.0).unwrap();
        let expect = 2.0 / 3.0f64.sqrt();
        for l in k.apex_edge_lengths() {
            assert!((l - expect).abs() < 1e-12, "apex edge {}", l);
        }
        for (i, &e) in k.boundary_edges.iter().enumerate() {
            assert_eq!(k.complex.edges()[e].len, 1.0, "boundary {}", i);
        }
        assert!(k.complex.is_consistently_oriented());
    }

    #[test]
    fn degenerate_base_still_yields_three_triangles() {
        let k = triangle_complex(1.0, 1.0, 2.0).unwrap();
        assert_eq!(k.complex.triangle_count(), 3);
        let cert = qc_certificate(&k.complex);
        assert!(cert.m.is_finite());
        // the not-realizable side is rejected
        assert!(triangle_complex(1.0, 1.0, 2.5).is_err());
        assert!(triangle_complex(0.0, 1.0, 1.0).is_err());
    }

    /// Admissible side triple with ratio at most `m`, random overall scale.
    fn random_sides(rng: &mut impl Rng, m: f64) -> [f64; 3] {
        loop {
            let scale = 10.0f64.powf(rng.gen_range(-2.0..2.0));
            let d = [
                scale * rng.gen_range(1.0..m),
                scale * rng.gen_range(1.0..m),
                scale * rng.gen_range(1.0..m),
            ];
            if (0..3).all(|i| d[i] <= d[(i + 1) % 3] + d[(i + 2) % 3]) {
                return d;
            }
        }
    }

    #[test]
    fn boundary_lengths_are_reproduced_exactly() {
        let mut rng = seeded_rng(07);
        for _ in 0..200 {
            let d = random_sides(&mut rng, 50.0);
            let k = triangle_complex(d[0], d[1], d[2]).unwrap();
            for (i, &e) in k.boundary_edges.iter().enumerate() {
                assert_eq!(k.complex.edges()[e].len, d[i]);
            }
            let scale = d[0];
            for l in k.apex_edge_lengths() {
                assert!(l >= scale * (1.0 - 1e-12));
                assert!(l <= scale * 2.0 * k.ratio * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn subdivide3_equilateral() {
        let s = subdivide3(1.0, 1.0, 1.0).unwrap();
        assert_eq!(s.triangle_count(), 3);
        let r = 1.0 / 3.0f64.sqrt();
        for t in 0..3 {
            let mut lens = s.triangles()[t].len;
            lens.sort_by(f64::total_cmp);
            assert!((lens[0] - r).abs() < 1e-12);
            assert!((lens[1] - r).abs() < 1e-12);
            assert!((lens[2] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn subdivision_preserves_area() {
        let mut rng = seeded_rng(11);
        for _ in 0..200 {
            let d = random_sides(&mut rng, 20.0);
            // skip near-degenerate bases: subdivide3 needs non-degenerate
            let q = planar_clamped(d[0], d[1], d[2]);
            if q[2][1] < 1e-3 * d[0] {
                continue;
            }
            let area = heron_area(d[0], d[1], d[2]);
            let s = subdivide3(d[0], d[1], d[2]).unwrap();
            let sum: f64 = (0..3).map(|t| s.triangle_area(t)).sum();
            assert!((sum - area).abs() <= 1e-12 * area, "{} vs {}", sum, area);
        }
    }

    #[test]
    fn subdivision_keeps_intrinsic_distances() {
        let grid = grids::flat_grid(2, 1.0);
        let z = &grid.complex;
        let sub = subdivide_complex(z).unwrap();
        let nodes: Vec<usize> = (0..z.vertex_count()).collect();
        let ids = z.vertex_ids().to_vec();
        let before = mesh_graph(z, 8).metric_on(&nodes, ids.clone()).unwrap();
        let after = mesh_graph(&sub.complex, 8).metric_on(&nodes, ids).unwrap();
        for i in 0..nodes.len() {
            for j in (i + 1)..nodes.len() {
                let (a, b) = (before.d(i, j), after.d(i, j));
                assert!((a - b).abs() <= 0.02 * a.max(b), "{} vs {}", a, b);
            }
        }
    }

    #[test]
    fn assemble_on_unit_grid_rescales_the_equilateral_complex() {
        let grid = grids::flat_grid(2, 1.0);
        let z = &grid.complex;
        let lengths = vec![1.0; z.edges().len()];
        let out = assemble_y(z, &lengths).unwrap();
        assert!(out.y.is_consistently_oriented());
        assert_eq!(
            out.y.vertex_count(),
            z.vertex_count() + z.triangle_count()
        );
        let expect_apex = 2.0 / 3.0f64.sqrt();
        for (t, &apex) in out.apexes.iter().enumerate() {
            for &q in &z.triangles()[t].v {
                let e = out.y.edge_between(q, apex).unwrap();
                assert!((out.y.edges()[e].len - expect_apex).abs() < 1e-12);
            }
        }
        // interior base vertex: 6 base edges + 6 apex edges + 12 triangles
        let cert = qc_certificate(&out.y);
        assert_eq!(cert.m1, 25);
        // zprime map is the identity layout
        let sub = subdivide_complex(z).unwrap();
        assert_eq!(out.zprime_to_y.len(), sub.complex.vertex_count());
        for (i, &img) in out.zprime_to_y.iter().enumerate() {
            assert_eq!(i, img);
        }
    }

    #[test]
    fn assemble_single_triangle_matches_triangle_complex() {
        let z = MetricComplex::build(
            vec!["a".into(), "b".into(), "c".into()],
            vec![(0, 1, 2, 2.0, 3.0, 4.0)],
            None,
            true,
        )
        .unwrap();
        let e01 = z.edge_between(0, 1).unwrap();
        let e12 = z.edge_between(1, 2).unwrap();
        let e20 = z.edge_between(2, 0).unwrap();
        let mut lengths = vec![0.0; 3];
        lengths[e01] = 2.0;
        lengths[e12] = 3.0;
        lengths[e20] = 4.0;
        let out = assemble_y(&z, &lengths).unwrap();
        let k = triangle_complex(2.0, 3.0, 4.0).unwrap();
        let mut got: Vec<f64> = out.y.edges().iter().map(|e| e.len).collect();
        let mut expect: Vec<f64> = k.complex.edges().iter().map(|e| e.len).collect();
        got.sort_by(f64::total_cmp);
        expect.sort_by(f64::total_cmp);
        for (g, e) in got.iter().zip(&expect) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn assemble_rejects_unrealizable_lengths() {
        let grid = grids::flat_grid(1, 1.0);
        let z = &grid.complex;
        let mut lengths = vec![1.0; z.edges().len()];
        lengths[0] = 10.0;
        assert!(assemble_y(z, &lengths).is_err());
        assert!(assemble_y(z, &lengths[1..]).is_err());
    }

    #[test]
    fn snowsphere_stage0_is_the_cube() {
        let s = snowsphere(0).unwrap();
        assert_eq!(s.square_count, 6);
        assert_eq!(s.complex.triangle_count(), 12);
        assert_eq!(s.complex.vertex_count(), 8);
        assert!(s.complex.is_consistently_oriented());
        let cert = qc_certificate(&s.complex);
        assert_eq!(cert.m1, 13);
        assert!((cert.m2 - 3.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(cert.m3, 1.0);
    }

    #[test]
    fn snowsphere_square_counts_and_validity() {
        for n in 0..=2usize {
            let s = snowsphere(n).unwrap();
            assert_eq!(s.square_count, 6 * 13usize.pow(n as u32));
            assert_eq!(s.complex.triangle_count(), 2 * s.square_count);
            assert!(s.complex.is_consistently_oriented());
            for e in s.complex.edges() {
                assert_eq!(e.tris.len(), 2, "closed surface");
            }
        }
        assert!(snowsphere(SNOWSPHERE_MAX_STAGE + 1).is_err());
    }

    #[test]
    fn snowsphere_stages_share_vertex_prefix() {
        let s1 = snowsphere(1).unwrap();
        let s2 = snowsphere(2).unwrap();
        assert!(s2.complex.vertex_count() > s1.complex.vertex_count());
        for v in 0..s1.complex.vertex_count() {
            let scaled = scale_i(s1.int_coords[v], 3);
            assert_eq!(scaled, s2.int_coords[v], "vertex {}", v);
        }
    }

    #[test]
    fn snowsphere_certificate_is_stable_from_stage_one() {
        let c1 = qc_certificate(&snowsphere(1).unwrap().complex);
        let c2 = qc_certificate(&snowsphere(2).unwrap().complex);
        assert_eq!(c1.m1, 17, "cap base corners");
        assert_eq!(c2.m1, 17);
        assert!((c1.m2 - 3.0f64.sqrt()).abs() < 1e-12);
        assert!((c2.m2 - c1.m2).abs() < 1e-12);
        assert_eq!(c1.m3, 1.0);
        assert_eq!(c2.m3, 1.0);
    }

    #[test]
    fn snowsphere_refinement_moves_vertex_metric_slightly() {
        // distances between stage-0 cube corners measured on stage 0 vs
        // stage 1 differ by a constant factor times 3^0
        let s0 = snowsphere(0).unwrap();
        let s1 = snowsphere(1).unwrap();
        let nodes: Vec<usize> = (0..8).collect();
        let ids: Vec<String> = (0..8).map(|k| k.to_string()).collect();
        let m0 = mesh_graph(&s0.complex, 2).metric_on(&nodes, ids.clone()).unwrap();
        let m1 = mesh_graph(&s1.complex, 2).metric_on(&nodes, ids).unwrap();
        let mut dev = 0.0f64;
        for i in 0..8 {
            for j in (i + 1)..8 {
                dev = dev.max((m0.d(i, j) - m1.d(i, j)).abs());
            }
        }
        assert!(dev > 0.0, "the cap detour changes distances");
        assert!(dev < 0.5, "but only at the cell scale, dev = {}", dev);
    }
}
