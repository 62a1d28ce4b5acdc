//! Graded triangulations of origin-centered discs.
//!
//! Nodes sit on concentric rings with radii `R0 (j/J)^g`, so elements shrink
//! toward the origin where the weight degenerates. Neighbouring rings are
//! stitched by an angular sweep, which keeps the triangulation conforming for
//! arbitrary node counts per ring.

mod locate;
mod region;
mod serial;

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};

pub use region::{region_quadrature, region_quadrature_all, QuadPoint, QuadratureOptions, RegionQuadrature, RegionSpec};
pub use serial::MeshDocument;

use locate::Locator;

pub type Point = [f64; 2];

/// Boundary partition label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMarker {
    /// Whole boundary, before any partition is applied.
    Boundary,
    /// The portion `Gamma` selected by [`mark_boundary`].
    Gamma,
    /// The complement of `Gamma` in the boundary.
    Complement,
}

impl BoundaryMarker {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundaryMarker::Boundary => "boundary",
            BoundaryMarker::Gamma => "gamma",
            BoundaryMarker::Complement => "complement",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "boundary" => Ok(Self::Boundary),
            "gamma" => Ok(Self::Gamma),
            "complement" => Ok(Self::Complement),
            other => Err(Error::Parse(format!("unknown boundary marker `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub marker: BoundaryMarker,
    /// Triangle owning the edge.
    pub triangle: usize,
}

/// Per-triangle affine data: area and gradients of the barycentric coordinates.
#[derive(Debug, Clone, Copy)]
pub struct TriangleGeometry {
    pub area: f64,
    pub grad: [[f64; 2]; 3],
}

#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
    radius: f64,
    h: f64,
    grading: f64,
    geometry: Vec<TriangleGeometry>,
    on_boundary: Vec<bool>,
    hash: String,
    locator: OnceLock<Locator>,
}

/// Builds a graded mesh of the disc of radius `radius` centered at the origin.
pub fn build_disc_mesh(radius: f64, h: f64, grading: f64) -> Result<Mesh> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(invalid(format!("disc radius must be positive, got {radius}")));
    }
    if !(h > 0.0 && h < radius) {
        return Err(invalid(format!("mesh size must lie in (0, R0), got {h}")));
    }
    if !(grading >= 1.0 && grading.is_finite()) {
        return Err(invalid(format!("grading exponent must be >= 1, got {grading}")));
    }

    // the small offset keeps R0/h = 20 from rounding up to 21 rings per unit grading
    let rings = ((grading * radius / h - 1e-9).ceil() as usize).max(2);
    let ring_radius = |j: usize| radius * (j as f64 / rings as f64).powf(grading);

    let mut nodes: Vec<Point> = vec![[0.0, 0.0]];
    let mut ring_start = vec![0usize];
    let mut ring_count = vec![1usize];
    for j in 1..=rings {
        let r = if j == rings { radius } else { ring_radius(j) };
        // arc spacing ~ radial spacing: 2 pi r_j / r'(j - 1/2) = 2 pi (j - 1/2) / g,
        // with no constant term so that doubling J at least quadruples the count
        let mut n = ((2.0 * PI * (j as f64 - 0.5) / grading).floor() as usize).max(6);
        if j == rings {
            // boundary chords no longer than h
            n = n.max((2.0 * PI * radius / h).ceil() as usize);
        }
        ring_start.push(nodes.len());
        ring_count.push(n);
        for i in 0..n {
            let t = 2.0 * PI * i as f64 / n as f64;
            nodes.push([r * t.cos(), r * t.sin()]);
        }
    }

    let mut triangles = Vec::new();
    // fan around the origin
    let (s1, n1) = (ring_start[1], ring_count[1]);
    for i in 0..n1 {
        triangles.push([0, s1 + i, s1 + (i + 1) % n1]);
    }
    for j in 1..rings {
        stitch(
            &mut triangles,
            (ring_start[j], ring_count[j]),
            (ring_start[j + 1], ring_count[j + 1]),
        );
    }

    let (so, no) = (ring_start[rings], ring_count[rings]);
    let boundary: Vec<[usize; 2]> = (0..no).map(|i| [so + i, so + (i + 1) % no]).collect();
    let markers = vec![BoundaryMarker::Boundary; boundary.len()];
    Mesh::assemble(nodes, triangles, boundary, markers, radius, h, grading)
}

/// Sweeps two rings by angle, emitting counter-clockwise triangles.
fn stitch(out: &mut Vec<[usize; 3]>, inner: (usize, usize), outer: (usize, usize)) {
    let (si, ni) = inner;
    let (so, no) = outer;
    let angle = |k: usize, n: usize| 2.0 * PI * k as f64 / n as f64;
    let (mut i, mut k) = (0usize, 0usize);
    while i < ni || k < no {
        let advance_outer = if i == ni {
            true
        } else if k == no {
            false
        } else {
            angle(k + 1, no) <= angle(i + 1, ni)
        };
        if advance_outer {
            out.push([si + i % ni, so + k % no, so + (k + 1) % no]);
            k += 1;
        } else {
            out.push([si + i % ni, so + k % no, si + (i + 1) % ni]);
            i += 1;
        }
    }
}

/// Half-open angular interval `[start, end)` in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularInterval {
    pub start: f64,
    pub end: f64,
}

impl AngularInterval {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) || end <= start {
            return Err(invalid(format!("empty angular interval [{start}, {end})")));
        }
        Ok(Self { start, end })
    }

    pub fn full() -> Self {
        Self {
            start: 0.0,
            end: 2.0 * PI,
        }
    }

    pub fn contains(&self, theta: f64) -> bool {
        let span = self.end - self.start;
        if span >= 2.0 * PI {
            return true;
        }
        (theta - self.start).rem_euclid(2.0 * PI) < span
    }
}

/// Marks boundary edges whose midpoint angle lies in `gamma` as `Gamma`, the
/// rest as `Complement`.
pub fn mark_boundary(mesh: &Mesh, gamma: AngularInterval) -> Result<Mesh> {
    if gamma.end <= gamma.start {
        return Err(invalid("empty angular interval"));
    }
    let mut out = mesh.clone();
    for e in out.boundary.iter_mut() {
        let a = mesh.nodes[e.nodes[0]];
        let b = mesh.nodes[e.nodes[1]];
        let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        let theta = mid[1].atan2(mid[0]);
        e.marker = if gamma.contains(theta) {
            BoundaryMarker::Gamma
        } else {
            BoundaryMarker::Complement
        };
    }
    Ok(out)
}

impl Mesh {
    fn assemble(
        nodes: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<[usize; 2]>,
        markers: Vec<BoundaryMarker>,
        radius: f64,
        h: f64,
        grading: f64,
    ) -> Result<Self> {
        let geometry = triangles
            .iter()
            .map(|t| triangle_geometry(nodes[t[0]], nodes[t[1]], nodes[t[2]]))
            .collect::<Vec<_>>();
        if let Some((i, g)) = geometry.iter().enumerate().find(|(_, g)| !(g.area > 0.0)) {
            return Err(invalid(format!(
                "triangle {i} has non-positive area {}",
                g.area
            )));
        }

        // edge -> owning triangles, for conformity and boundary ownership
        let mut edges: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (ti, t) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                edges.entry((a.min(b), a.max(b))).or_default().push(ti);
            }
        }
        let mut on_boundary = vec![false; nodes.len()];
        let mut bedges = Vec::with_capacity(boundary.len());
        for (e, marker) in boundary.iter().zip(markers) {
            let key = (e[0].min(e[1]), e[0].max(e[1]));
            let owners = edges.get(&key).ok_or_else(|| {
                invalid(format!("boundary edge {e:?} is not an edge of the triangulation"))
            })?;
            if owners.len() != 1 {
                return Err(invalid(format!("boundary edge {e:?} is shared by {} triangles", owners.len())));
            }
            on_boundary[e[0]] = true;
            on_boundary[e[1]] = true;
            bedges.push(BoundaryEdge {
                nodes: *e,
                marker,
                triangle: owners[0],
            });
        }
        let free_edges = edges.values().filter(|o| o.len() == 1).count();
        if free_edges != bedges.len() || edges.values().any(|o| o.len() > 2) {
            return Err(invalid("triangulation is not conforming"));
        }

        let hash = content_hash(&nodes, &triangles);
        Ok(Self {
            nodes,
            triangles,
            boundary: bedges,
            radius,
            h,
            grading,
            geometry,
            on_boundary,
            hash,
            locator: OnceLock::new(),
        })
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn geometry(&self) -> &[TriangleGeometry] {
        &self.geometry
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Radius `R0` of the disc.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn grading(&self) -> f64 {
        self.grading
    }

    pub fn is_boundary_node(&self, i: usize) -> bool {
        self.on_boundary[i]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.on_boundary
    }

    /// Content hash of node coordinates and connectivity.
    pub fn content_hash(&self) -> &str {
        &self.hash
    }

    pub fn total_area(&self) -> f64 {
        self.geometry.iter().map(|g| g.area).sum()
    }

    pub fn num_edges(&self) -> usize {
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| (t[k].min(t[(k + 1) % 3]), t[k].max(t[(k + 1) % 3]))))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges.len()
    }

    /// Distinct markers present on the boundary, sorted.
    pub fn markers(&self) -> Vec<BoundaryMarker> {
        let mut m: Vec<_> = self.boundary.iter().map(|e| e.marker).collect();
        m.sort();
        m.dedup();
        m
    }

    /// Marker of each boundary node; a node shared by differently marked
    /// edges takes the smaller marker in `BoundaryMarker` order.
    pub fn node_markers(&self) -> Vec<Option<BoundaryMarker>> {
        let mut out: Vec<Option<BoundaryMarker>> = vec![None; self.nodes.len()];
        for e in &self.boundary {
            for &n in &e.nodes {
                out[n] = Some(match out[n] {
                    Some(m) => m.min(e.marker),
                    None => e.marker,
                });
            }
        }
        out
    }

    /// Largest edge length among triangles that come within `radius` of the origin.
    pub fn local_size_near_origin(&self, radius: f64) -> f64 {
        let mut size: f64 = 0.0;
        for t in &self.triangles {
            let p = [self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]];
            if region::distance_to_triangle([0.0, 0.0], &p) < radius {
                for k in 0..3 {
                    size = size.max(dist(p[k], p[(k + 1) % 3]));
                }
            }
        }
        size
    }

    /// Triangle containing `x` with its barycentric coordinates.
    pub fn locate(&self, x: Point) -> Option<(usize, [f64; 3])> {
        self.locator.get_or_init(|| Locator::new(self)).locate(self, x)
    }

    /// Index of the node at the origin, if any.
    pub fn origin_node(&self) -> Option<usize> {
        self.nodes.iter().position(|p| p[0] == 0.0 && p[1] == 0.0)
    }
}

pub(crate) fn triangle_geometry(p0: Point, p1: Point, p2: Point) -> TriangleGeometry {
    let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let inv = 1.0 / det;
    TriangleGeometry {
        area: 0.5 * det,
        grad: [
            [(p1[1] - p2[1]) * inv, (p2[0] - p1[0]) * inv],
            [(p2[1] - p0[1]) * inv, (p0[0] - p2[0]) * inv],
            [(p0[1] - p1[1]) * inv, (p1[0] - p0[0]) * inv],
        ],
    }
}

#[inline]
pub(crate) fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn content_hash(nodes: &[Point], triangles: &[[usize; 3]]) -> String {
    let mut hasher = Sha256::new();
    for p in nodes {
        hasher.update(p[0].to_le_bytes());
        hasher.update(p[1].to_le_bytes());
    }
    for t in triangles {
        for &i in t {
            hasher.update((i as u64).to_le_bytes());
        }
    }
    let digest = hasher.finalize();
    hex::encode(&digest[..16])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn coarse_disc_area_within_five_percent() {
        let m = build_disc_mesh(1.0, 0.5, 1.0).unwrap();
        assert!(m.geometry().iter().all(|g| g.area > 0.0));
        assert_relative_eq!(m.total_area(), PI, max_relative = 0.05);
    }

    #[test]
    fn fine_graded_disc_area_within_half_percent() {
        let m = build_disc_mesh(1.0, 0.05, 2.0).unwrap();
        assert_relative_eq!(m.total_area(), PI, max_relative = 0.005);
        assert!(m.origin_node().is_some());
    }

    #[test]
    fn euler_characteristic_of_a_disc() {
        for (h, g) in [(0.5, 1.0), (0.2, 2.0), (0.05, 2.0), (0.1, 3.0)] {
            let m = build_disc_mesh(1.0, h, g).unwrap();
            let v = m.num_nodes() as i64;
            let e = m.num_edges() as i64;
            let f = m.num_triangles() as i64;
            assert_eq!(v - e + f, 1, "h={h} g={g}");
        }
    }

    #[test]
    fn boundary_edges_cover_the_circle() {
        let m = build_disc_mesh(2.0, 0.1, 2.0).unwrap();
        let len: f64 = m
            .boundary_edges()
            .iter()
            .map(|e| dist(m.nodes()[e.nodes[0]], m.nodes()[e.nodes[1]]))
            .sum();
        assert_relative_eq!(len, 4.0 * PI, max_relative = 1e-2);
        assert!(m.boundary_edges().iter().all(|e| e.marker == BoundaryMarker::Boundary));
        // every boundary node lies on the circle
        for (i, p) in m.nodes().iter().enumerate() {
            if m.is_boundary_node(i) {
                assert_relative_eq!((p[0] * p[0] + p[1] * p[1]).sqrt(), 2.0, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn ring_radii_follow_grading_rule() {
        let m = build_disc_mesh(1.0, 0.1, 2.0).unwrap();
        let mut radii: Vec<f64> = m.nodes().iter().map(|p| (p[0] * p[0] + p[1] * p[1]).sqrt()).collect();
        radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
        radii.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let rings = radii.len() - 1;
        for (j, r) in radii.iter().enumerate() {
            assert_relative_eq!(*r, (j as f64 / rings as f64).powi(2), epsilon = 1e-12);
        }
    }

    #[test]
    fn refinement_quadruples_and_halves_defect() {
        // h = R0/n keeps the ring count J = g R0 / h integral, so halving h doubles J
        for (n, g) in [(10, 1.0), (10, 2.0), (4, 1.0), (8, 2.0), (5, 3.0), (20, 2.0), (16, 1.5)] {
            let h = 1.0 / n as f64;
            let a = build_disc_mesh(1.0, h, g).unwrap();
            let b = build_disc_mesh(1.0, h / 2.0, g).unwrap();
            assert!(b.num_triangles() >= 4 * a.num_triangles(), "g={g}: {} vs {}", a.num_triangles(), b.num_triangles());
            let da = PI - a.total_area();
            let db = PI - b.total_area();
            assert!(db > 0.0 && 2.0 * db <= da);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_disc_mesh(1.0, 1.5, 2.0).is_err());
        assert!(build_disc_mesh(1.0, 0.0, 2.0).is_err());
        assert!(build_disc_mesh(-1.0, 0.1, 2.0).is_err());
        assert!(build_disc_mesh(1.0, 0.1, 0.5).is_err());
    }

    #[test]
    fn marking_full_and_half_circle() {
        let m = build_disc_mesh(1.0, 0.05, 2.0).unwrap();
        let full = mark_boundary(&m, AngularInterval::full()).unwrap();
        assert!(full.boundary_edges().iter().all(|e| e.marker == BoundaryMarker::Gamma));

        let half = mark_boundary(&m, AngularInterval::new(0.0, PI).unwrap()).unwrap();
        let arc: f64 = half
            .boundary_edges()
            .iter()
            .filter(|e| e.marker == BoundaryMarker::Gamma)
            .map(|e| dist(m.nodes()[e.nodes[0]], m.nodes()[e.nodes[1]]))
            .sum();
        assert!((arc - PI).abs() <= m.h());
        assert!(half.markers().contains(&BoundaryMarker::Complement));
        assert!(AngularInterval::new(1.0, 1.0).is_err());
    }

    #[test]
    fn locate_recovers_nodes() {
        let m = build_disc_mesh(1.0, 0.1, 2.0).unwrap();
        for &p in m.nodes().iter().step_by(17) {
            let (t, b) = m.locate(p).unwrap();
            let tri = m.triangles()[t];
            let x = (0..3).map(|k| b[k] * m.nodes()[tri[k]][0]).sum::<f64>();
            let y = (0..3).map(|k| b[k] * m.nodes()[tri[k]][1]).sum::<f64>();
            assert!((x - p[0]).abs() < 1e-12 && (y - p[1]).abs() < 1e-12);
        }
        assert!(m.locate([2.0, 0.0]).is_none());
    }
}
