//! Stock complexes used across tests and fixtures: equilateral patches and
//! tori, the unit cube surface, rectangle strips, and planar annuli.

use crate::error::Result;
use crate::simplicial::MetricComplex;

/// Equilateral triangular lattice on a rhombus, `n` cells per side, every
/// edge of length `scale`. Interior vertices have valence 6.
pub struct FlatGrid {
    pub complex: MetricComplex,
    pub n: usize,
}

impl FlatGrid {
    pub fn vertex(&self, i: usize, j: usize) -> usize {
        i * (self.n + 1) + j
    }

    /// Some vertex with a full hexagonal star, if the grid has one.
    pub fn interior_vertex(&self) -> Option<usize> {
        if self.n >= 2 {
            Some(self.vertex(1, 1))
        } else {
            None
        }
    }
}

pub fn flat_grid(n: usize, scale: f64) -> FlatGrid {
    assert!(n >= 1, "grid needs at least one cell");
    let u = [scale, 0.0];
    let w = [scale * 0.5, scale * 3.0f64.sqrt() / 2.0];
    let idx = |i: usize, j: usize| i * (n + 1) + j;
    let mut vertices = Vec::new();
    let mut embedding = Vec::new();
    for i in 0..=n {
        for j in 0..=n {
            vertices.push(format!("v{}_{}", i, j));
            embedding.push([
                i as f64 * u[0] + j as f64 * w[0],
                i as f64 * u[1] + j as f64 * w[1],
                0.0,
            ]);
        }
    }
    let mut triangles = Vec::new();
    for i in 0..n {
        for j in 0..n {
            triangles.push((idx(i, j), idx(i + 1, j), idx(i, j + 1), scale, scale, scale));
            triangles.push((
                idx(i + 1, j),
                idx(i + 1, j + 1),
                idx(i, j + 1),
                scale,
                scale,
                scale,
            ));
        }
    }
    let complex = MetricComplex::build(vertices, triangles, Some(embedding), true)
        .expect("flat grid is always valid");
    FlatGrid { complex, n }
}

/// Equilateral lattice on a torus: the rhombus grid with both directions
/// wrapped mod `n`. Closed oriented surface, every vertex has valence 6.
pub fn flat_torus(n: usize, scale: f64) -> MetricComplex {
    assert!(n >= 3, "torus needs n >= 3 to stay simplicial");
    let idx = |i: usize, j: usize| (i % n) * n + (j % n);
    let vertices = (0..n * n).map(|k| format!("t{}", k)).collect();
    let mut triangles = Vec::new();
    for i in 0..n {
        for j in 0..n {
            triangles.push((idx(i, j), idx(i + 1, j), idx(i, j + 1), scale, scale, scale));
            triangles.push((
                idx(i + 1, j),
                idx(i + 1, j + 1),
                idx(i, j + 1),
                scale,
                scale,
                scale,
            ));
        }
    }
    MetricComplex::build(vertices, triangles, None, true).expect("flat torus is always valid")
}

/// Surface of the unit cube: 6 faces, each split along a diagonal, with a
/// consistent outward orientation. 8 vertices, 18 edges, 12 right isoceles
/// triangles.
pub fn cube_surface() -> MetricComplex {
    let mut embedding = Vec::with_capacity(8);
    let mut vertices = Vec::with_capacity(8);
    for k in 0..8usize {
        let p = [(k & 1) as f64, ((k >> 1) & 1) as f64, ((k >> 2) & 1) as f64];
        embedding.push(p);
        vertices.push(format!("c{}{}{}", k & 1, (k >> 1) & 1, (k >> 2) & 1));
    }
    let faces: [[usize; 3]; 12] = [
        [0, 2, 3],
        [0, 3, 1], // bottom, outward -z
        [4, 5, 7],
        [4, 7, 6], // top, outward +z
        [0, 1, 5],
        [0, 5, 4], // front, outward -y
        [2, 6, 7],
        [2, 7, 3], // back, outward +y
        [0, 4, 6],
        [0, 6, 2], // left, outward -x
        [1, 3, 7],
        [1, 7, 5], // right, outward +x
    ];
    let dist = |a: usize, b: usize| -> f64 {
        let (p, q) = (embedding[a], embedding[b]);
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
    };
    let triangles = faces
        .iter()
        .map(|&[a, b, c]| (a, b, c, dist(a, b), dist(b, c), dist(c, a)))
        .collect();
    MetricComplex::build(vertices, triangles, Some(embedding), true)
        .expect("cube surface is always valid")
}

/// Axis-aligned rectangle [0, w] x [0, h] triangulated on an nx-by-ny grid of
/// cells, each split along its diagonal.
pub struct RectGrid {
    pub complex: MetricComplex,
    pub nx: usize,
    pub ny: usize,
    pub w: f64,
    pub h: f64,
}

impl RectGrid {
    pub fn vertex(&self, i: usize, j: usize) -> usize {
        i * (self.ny + 1) + j
    }
}

pub fn rect_grid(w: f64, h: f64, nx: usize, ny: usize) -> RectGrid {
    assert!(nx >= 1 && ny >= 1);
    let idx = |i: usize, j: usize| i * (ny + 1) + j;
    let mut vertices = Vec::new();
    let mut embedding = Vec::new();
    for i in 0..=nx {
        for j in 0..=ny {
            vertices.push(format!("r{}_{}", i, j));
            embedding.push([w * i as f64 / nx as f64, h * j as f64 / ny as f64, 0.0]);
        }
    }
    let dist = |a: usize, b: usize| -> f64 {
        let (p, q): (&[f64; 3], &[f64; 3]) = (&embedding[a], &embedding[b]);
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
    };
    let mut triangles = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            triangles.push((a, b, c, dist(a, b), dist(b, c), dist(c, a)));
            triangles.push((a, c, d, dist(a, c), dist(c, d), dist(d, a)));
        }
    }
    let complex = MetricComplex::build(vertices, triangles, Some(embedding), true)
        .expect("rectangle grid is always valid");
    RectGrid {
        complex,
        nx,
        ny,
        w,
        h,
    }
}

/// Planar annulus r <= |z| <= big_r with `sectors` angular steps and `rings`
/// radial cells on a geometric radius progression; cells split into two
/// triangles, side lengths from the plane embedding.
pub struct AnnulusGrid {
    pub complex: MetricComplex,
    pub sectors: usize,
    pub rings: usize,
    pub radii: Vec<f64>,
}

impl AnnulusGrid {
    pub fn vertex(&self, ring: usize, sector: usize) -> usize {
        ring * self.sectors + (sector % self.sectors)
    }

    /// Vertex indices on the inner boundary circle.
    pub fn inner_boundary(&self) -> Vec<usize> {
        (0..self.sectors).map(|s| self.vertex(0, s)).collect()
    }

    /// Vertex indices on the outer boundary circle.
    pub fn outer_boundary(&self) -> Vec<usize> {
        (0..self.sectors).map(|s| self.vertex(self.rings, s)).collect()
    }
}

pub fn annulus_grid(r: f64, big_r: f64, sectors: usize, rings: usize) -> Result<AnnulusGrid> {
    if !(r > 0.0 && big_r > r) {
        return Err(crate::Error::invalid("annulus needs 0 < r < R"));
    }
    if sectors < 3 || rings < 1 {
        return Err(crate::Error::invalid("annulus needs sectors >= 3, rings >= 1"));
    }
    let radii: Vec<f64> = (0..=rings)
        .map(|k| r * (big_r / r).powf(k as f64 / rings as f64))
        .collect();
    let idx = |ring: usize, s: usize| ring * sectors + (s % sectors);
    let mut vertices = Vec::new();
    let mut embedding = Vec::new();
    for (ring, &rad) in radii.iter().enumerate() {
        for s in 0..sectors {
            let th = 2.0 * std::f64::consts::PI * s as f64 / sectors as f64;
            vertices.push(format!("a{}_{}", ring, s));
            embedding.push([rad * th.cos(), rad * th.sin(), 0.0]);
        }
    }
    let dist = |a: usize, b: usize| -> f64 {
        let (p, q): (&[f64; 3], &[f64; 3]) = (&embedding[a], &embedding[b]);
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
    };
    let mut triangles = Vec::new();
    for ring in 0..rings {
        for s in 0..sectors {
            let (a, b) = (idx(ring, s), idx(ring, s + 1));
            let (c, d) = (idx(ring + 1, s + 1), idx(ring + 1, s));
            triangles.push((a, b, c, dist(a, b), dist(b, c), dist(c, a)));
            triangles.push((a, c, d, dist(a, c), dist(c, d), dist(d, a)));
        }
    }
    let complex = MetricComplex::build(vertices, triangles, Some(embedding), true)?;
    Ok(AnnulusGrid {
        complex,
        sectors,
        rings,
        radii,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplicial::qc_certificate;

    #[test]
    fn flat_grid_shape() {
        let g = flat_grid(3, 1.0);
        assert_eq!(g.complex.vertex_count(), 16);
        assert_eq!(g.complex.triangle_count(), 18);
        assert!(g.complex.is_consistently_oriented());
    }

    #[test]
    fn flat_torus_is_closed_and_regular() {
        let t = flat_torus(4, 1.0);
        assert_eq!(t.vertex_count(), 16);
        assert_eq!(t.triangle_count(), 32);
        assert!(t.is_consistently_oriented());
        for e in t.edges() {
            assert_eq!(e.tris.len(), 2);
        }
        let cert = qc_certificate(&t);
        assert_eq!(cert.m1, 13);
        assert_eq!(cert.m, 13.0);
    }

    #[test]
    fn rect_grid_shape() {
        let g = rect_grid(3.0, 1.0, 6, 2);
        assert_eq!(g.complex.vertex_count(), 21);
        assert_eq!(g.complex.triangle_count(), 24);
        let em = g.complex.embedding().unwrap();
        assert_eq!(em[g.vertex(6, 2)], [3.0, 1.0, 0.0]);
    }

    #[test]
    fn annulus_grid_shape() {
        let a = annulus_grid(1.0, std::f64::consts::E, 8, 3).unwrap();
        assert_eq!(a.complex.vertex_count(), 32);
        assert_eq!(a.complex.triangle_count(), 48);
        assert!(a.complex.is_consistently_oriented());
        assert!((a.radii[3] - std::f64::consts::E).abs() < 1e-12);
        // interior ring radius follows the geometric progression
        assert!((a.radii[1] - std::f64::consts::E.powf(1.0 / 3.0)).abs() < 1e-12);
        assert!(annulus_grid(2.0, 1.0, 8, 3).is_err());
    }
}
