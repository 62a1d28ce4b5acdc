//! Cut-cell quadrature over balls, annuli and boundary arcs.
//!
//! Every region is an intersection of circle level sets. Elements are
//! classified against each circle; cut elements are bisected into four
//! children down to a fixed depth, and the remaining cut leaves are clipped
//! against the circles (exact edge/circle intersections) and fan-triangulated.
//! Sub-triangles with a vertex at the origin use the collapsed rule so that
//! integrands like `|x|^(alpha-2)` stay accurate.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{dist, BoundaryMarker, Mesh, Point};
use crate::error::{invalid, Error, Result};
use crate::quadrature::{gauss_legendre_unit, CollapsedRule, TriangleRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionSpec {
    Ball { center: Point, radius: f64 },
    /// `inner < |x - center| < outer`.
    Annulus { center: Point, inner: f64, outer: f64 },
    BoundaryPart { marker: BoundaryMarker },
    /// The whole mesh domain.
    Domain,
}

impl RegionSpec {
    pub fn ball(center: Point, radius: f64) -> Self {
        RegionSpec::Ball { center, radius }
    }

    /// Origin-centered ball `B_r`.
    pub fn origin_ball(radius: f64) -> Self {
        RegionSpec::Ball {
            center: [0.0, 0.0],
            radius,
        }
    }

    pub fn annulus(center: Point, inner: f64, outer: f64) -> Self {
        RegionSpec::Annulus { center, inner, outer }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            RegionSpec::Ball { radius, .. } if !(radius > 0.0 && radius.is_finite()) => {
                Err(invalid(format!("ball radius must be positive, got {radius}")))
            }
            RegionSpec::Annulus { inner, outer, .. } if !(inner > 0.0 && outer > inner && outer.is_finite()) => {
                Err(invalid(format!("annulus radii must satisfy 0 < inner < outer, got ({inner}, {outer})")))
            }
            _ => Ok(()),
        }
    }

    /// True when the closed region lies in the disc of radius `r0` about the origin.
    pub fn inside_disc(&self, r0: f64) -> bool {
        let tol = 1e-12 * r0;
        match *self {
            RegionSpec::Ball { center, radius } => dist(center, [0.0, 0.0]) + radius <= r0 + tol,
            RegionSpec::Annulus { center, outer, .. } => dist(center, [0.0, 0.0]) + outer <= r0 + tol,
            _ => true,
        }
    }

    fn constraints(&self, out: &mut Vec<Circle>) {
        match *self {
            RegionSpec::Ball { center, radius } => out.push(Circle {
                center,
                radius,
                inside: true,
            }),
            RegionSpec::Annulus { center, inner, outer } => {
                out.push(Circle {
                    center,
                    radius: outer,
                    inside: true,
                });
                out.push(Circle {
                    center,
                    radius: inner,
                    inside: false,
                });
            }
            RegionSpec::BoundaryPart { .. } | RegionSpec::Domain => {}
        }
    }
}

impl fmt::Display for RegionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegionSpec::Ball { center, radius } => write!(f, "B({:?}, {radius})", center),
            RegionSpec::Annulus { center, inner, outer } => write!(f, "A({:?}, {inner}, {outer})", center),
            RegionSpec::BoundaryPart { marker } => write!(f, "boundary[{}]", marker.as_str()),
            RegionSpec::Domain => f.write_str("domain"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    pub order: usize,
    pub depth: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self { order: 4, depth: 5 }
    }
}

/// A quadrature point tagged with its host triangle, so P1 fields can be
/// evaluated without point location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub x: Point,
    pub weight: f64,
    pub triangle: usize,
    pub bary: [f64; 3],
}

#[derive(Debug, Clone, Default)]
pub struct RegionQuadrature {
    pub points: Vec<QuadPoint>,
}

impl RegionQuadrature {
    /// Area (or arc length for boundary parts) of the region.
    pub fn measure(&self) -> f64 {
        self.points.iter().map(|q| q.weight).sum()
    }

    pub fn integrate(&self, f: impl Fn(&QuadPoint) -> f64) -> f64 {
        self.points.iter().map(|q| q.weight * f(q)).sum()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Quadrature for a single region.
pub fn region_quadrature(mesh: &Mesh, region: &RegionSpec, opts: QuadratureOptions) -> Result<RegionQuadrature> {
    region_quadrature_all(mesh, std::slice::from_ref(region), opts)
}

/// Quadrature for the intersection of `regions`.
pub fn region_quadrature_all(mesh: &Mesh, regions: &[RegionSpec], opts: QuadratureOptions) -> Result<RegionQuadrature> {
    for r in regions {
        r.validate()?;
    }
    let name = || regions.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(" & ");
    let boundary: Vec<BoundaryMarker> = regions
        .iter()
        .filter_map(|r| match r {
            RegionSpec::BoundaryPart { marker } => Some(*marker),
            _ => None,
        })
        .collect();
    let quad = if boundary.is_empty() {
        let mut circles = Vec::new();
        for r in regions {
            r.constraints(&mut circles);
        }
        area_quadrature(mesh, &circles, opts)?
    } else {
        if boundary.len() != regions.len() {
            return Err(invalid("boundary parts cannot be intersected with area regions"));
        }
        boundary_quadrature(mesh, &boundary, opts.order)
    };
    if !(quad.measure() > 0.0) {
        return Err(Error::EmptyRegion(name()));
    }
    Ok(quad)
}

fn boundary_quadrature(mesh: &Mesh, markers: &[BoundaryMarker], order: usize) -> RegionQuadrature {
    let accepts = |m: BoundaryMarker| markers.iter().all(|&want| want == BoundaryMarker::Boundary || want == m);
    let (gx, gw) = gauss_legendre_unit(order / 2 + 1);
    let mut points = Vec::new();
    for e in mesh.boundary_edges() {
        if !accepts(e.marker) {
            continue;
        }
        let tri = mesh.triangles()[e.triangle];
        let slot = |n: usize| tri.iter().position(|&v| v == n).expect("edge node in owner");
        let (ia, ib) = (slot(e.nodes[0]), slot(e.nodes[1]));
        let a = mesh.nodes()[e.nodes[0]];
        let b = mesh.nodes()[e.nodes[1]];
        let len = dist(a, b);
        for (&t, &w) in gx.iter().zip(&gw) {
            let mut bary = [0.0; 3];
            bary[ia] = 1.0 - t;
            bary[ib] = t;
            points.push(QuadPoint {
                x: [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])],
                weight: w * len,
                triangle: e.triangle,
                bary,
            });
        }
    }
    RegionQuadrature { points }
}

#[derive(Debug, Clone, Copy)]
struct Circle {
    center: Point,
    radius: f64,
    /// Region side: `|x - c| <= r` when true, `>= r` otherwise.
    inside: bool,
}

impl Circle {
    /// Negative inside the region.
    fn level(&self, x: Point) -> f64 {
        let d = dist(x, self.center) - self.radius;
        if self.inside {
            d
        } else {
            -d
        }
    }

    fn classify(&self, tri: &[Point; 3]) -> Side {
        let dmax = tri.iter().map(|&p| dist(p, self.center)).fold(0.0, f64::max);
        let dmin = distance_to_triangle(self.center, tri);
        let (fully_in, fully_out) = if self.inside {
            (dmax <= self.radius, dmin >= self.radius)
        } else {
            (dmin >= self.radius, dmax <= self.radius)
        };
        if fully_out {
            Side::Out
        } else if fully_in {
            Side::In
        } else {
            Side::Cut
        }
    }

    /// Point on segment `a`-`b` where the level set crosses zero; endpoints
    /// are assumed to have opposite signs.
    fn crossing(&self, a: Point, b: Point) -> f64 {
        let d = [b[0] - a[0], b[1] - a[1]];
        let f = [a[0] - self.center[0], a[1] - self.center[1]];
        let qa = d[0] * d[0] + d[1] * d[1];
        let qb = 2.0 * (f[0] * d[0] + f[1] * d[1]);
        let qc = f[0] * f[0] + f[1] * f[1] - self.radius * self.radius;
        let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
        // stable roots
        let q = -0.5 * (qb + qb.signum() * disc);
        let mut roots = [f64::NAN; 2];
        if q != 0.0 {
            roots = [q / qa, qc / q];
        } else if qa > 0.0 {
            roots = [0.0, 0.0];
        }
        roots
            .into_iter()
            .filter(|t| t.is_finite())
            .min_by(|x, y| dist_to_unit(*x).total_cmp(&dist_to_unit(*y)))
            .map_or(0.5, |t| t.clamp(0.0, 1.0))
    }
}

fn dist_to_unit(t: f64) -> f64 {
    if t < 0.0 {
        -t
    } else if t > 1.0 {
        t - 1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    In,
    Out,
    Cut,
}

/// Vertex of a (sub)element: physical point plus barycentrics in the host triangle.
#[derive(Debug, Clone, Copy)]
struct Vertex {
    x: Point,
    b: [f64; 3],
}

fn lerp(a: &Vertex, b: &Vertex, t: f64) -> Vertex {
    Vertex {
        x: [a.x[0] + t * (b.x[0] - a.x[0]), a.x[1] + t * (b.x[1] - a.x[1])],
        b: [
            a.b[0] + t * (b.b[0] - a.b[0]),
            a.b[1] + t * (b.b[1] - a.b[1]),
            a.b[2] + t * (b.b[2] - a.b[2]),
        ],
    }
}

struct Emitter<'a> {
    base: &'a TriangleRule,
    collapsed: &'a CollapsedRule,
    triangle: usize,
    out: &'a mut Vec<QuadPoint>,
}

impl Emitter<'_> {
    fn emit(&mut self, v: [Vertex; 3]) {
        let area = 0.5
            * ((v[1].x[0] - v[0].x[0]) * (v[2].x[1] - v[0].x[1]) - (v[2].x[0] - v[0].x[0]) * (v[1].x[1] - v[0].x[1]))
                .abs();
        if area == 0.0 {
            return;
        }
        let at_origin = |p: &Vertex| p.x[0] == 0.0 && p.x[1] == 0.0;
        let (verts, points, weights) = match v.iter().position(at_origin) {
            Some(k) => (
                [v[k], v[(k + 1) % 3], v[(k + 2) % 3]],
                &self.collapsed.points,
                &self.collapsed.weights,
            ),
            None => (v, &self.base.points, &self.base.weights),
        };
        for (l, &w) in points.iter().zip(weights) {
            let mut x = [0.0; 2];
            let mut b = [0.0; 3];
            for k in 0..3 {
                for d in 0..2 {
                    x[d] += l[k] * verts[k].x[d];
                }
                for d in 0..3 {
                    b[d] += l[k] * verts[k].b[d];
                }
            }
            self.out.push(QuadPoint {
                x,
                weight: w * area,
                triangle: self.triangle,
                bary: b,
            });
        }
    }
}

fn area_quadrature(mesh: &Mesh, circles: &[Circle], opts: QuadratureOptions) -> Result<RegionQuadrature> {
    let base = TriangleRule::of_order(opts.order)
        .ok_or_else(|| invalid(format!("quadrature order {} is not available (max 5)", opts.order)))?;
    let collapsed = CollapsedRule::for_order(opts.order);
    let mut points = Vec::new();
    for (ti, t) in mesh.triangles().iter().enumerate() {
        let x = t.map(|i| mesh.nodes()[i]);
        // cheap rejection for ball-type constraints
        if circles.iter().any(|c| c.inside && bbox_misses(&x, c)) {
            continue;
        }
        let verts = [
            Vertex { x: x[0], b: [1.0, 0.0, 0.0] },
            Vertex { x: x[1], b: [0.0, 1.0, 0.0] },
            Vertex { x: x[2], b: [0.0, 0.0, 1.0] },
        ];
        let mut em = Emitter {
            base: &base,
            collapsed: &collapsed,
            triangle: ti,
            out: &mut points,
        };
        refine(&mut em, circles, verts, opts.depth);
    }
    Ok(RegionQuadrature { points })
}

fn bbox_misses(x: &[Point; 3], c: &Circle) -> bool {
    (0..2).any(|d| {
        let lo = x.iter().map(|p| p[d]).fold(f64::INFINITY, f64::min);
        let hi = x.iter().map(|p| p[d]).fold(f64::NEG_INFINITY, f64::max);
        lo > c.center[d] + c.radius || hi < c.center[d] - c.radius
    })
}

fn refine(em: &mut Emitter<'_>, circles: &[Circle], v: [Vertex; 3], depth: usize) {
    let x = [v[0].x, v[1].x, v[2].x];
    let mut cut = Vec::new();
    for c in circles {
        match c.classify(&x) {
            Side::Out => return,
            Side::Cut => cut.push(*c),
            Side::In => {}
        }
    }
    if cut.is_empty() {
        em.emit(v);
        return;
    }
    if depth > 0 {
        let m01 = lerp(&v[0], &v[1], 0.5);
        let m12 = lerp(&v[1], &v[2], 0.5);
        let m20 = lerp(&v[2], &v[0], 0.5);
        for child in [[v[0], m01, m20], [m01, v[1], m12], [m20, m12, v[2]], [m01, m12, m20]] {
            refine(em, &cut, child, depth - 1);
        }
        return;
    }
    let mut poly = v.to_vec();
    for c in &cut {
        poly = clip(&poly, c);
        if poly.len() < 3 {
            return;
        }
    }
    // fan from the origin when it is a vertex, so the collapsed rule applies
    let start = poly.iter().position(|p| p.x == [0.0, 0.0]).unwrap_or(0);
    poly.rotate_left(start);
    for k in 1..poly.len() - 1 {
        em.emit([poly[0], poly[k], poly[k + 1]]);
    }
}

fn clip(poly: &[Vertex], c: &Circle) -> Vec<Vertex> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    let n = poly.len();
    for k in 0..n {
        let a = &poly[k];
        let b = &poly[(k + 1) % n];
        let (fa, fb) = (c.level(a.x), c.level(b.x));
        if fa <= 0.0 {
            out.push(*a);
        }
        if (fa <= 0.0) != (fb <= 0.0) {
            out.push(lerp(a, b, c.crossing(a.x, b.x)));
        }
    }
    out
}

/// Euclidean distance from `p` to the closed triangle.
pub(crate) fn distance_to_triangle(p: Point, tri: &[Point; 3]) -> f64 {
    let orient = |a: Point, b: Point, c: Point| (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let s = orient(tri[0], tri[1], tri[2]).signum();
    let inside = (0..3).all(|k| s * orient(tri[k], tri[(k + 1) % 3], p) >= 0.0);
    if inside {
        return 0.0;
    }
    (0..3)
        .map(|k| segment_distance(p, tri[k], tri[(k + 1) % 3]))
        .fold(f64::INFINITY, f64::min)
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist(p, [a[0] + t * d[0], a[1] + t * d[1]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_disc_mesh, mark_boundary, AngularInterval};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn unit_mesh() -> Mesh {
        build_disc_mesh(1.0, 0.05, 2.0).unwrap()
    }

    #[test]
    fn ball_area_at_depth_four() {
        let m = unit_mesh();
        let q = region_quadrature(&m, &RegionSpec::origin_ball(0.5), QuadratureOptions { order: 4, depth: 4 }).unwrap();
        assert_relative_eq!(q.measure(), PI / 4.0, max_relative = 1e-3);
    }

    #[test]
    fn off_center_ball_and_annulus_areas() {
        let m = unit_mesh();
        let opts = QuadratureOptions::default();
        let q = region_quadrature(&m, &RegionSpec::ball([0.3, -0.2], 0.25), opts).unwrap();
        assert_relative_eq!(q.measure(), PI * 0.0625, max_relative = 1e-5);
        let q = region_quadrature(&m, &RegionSpec::annulus([0.0, 0.0], 0.75, 1.0), opts).unwrap();
        // the outer circle coincides with the polygonal boundary, so the
        // defect there is the mesh's own area defect
        let defect = PI - m.total_area();
        assert!((q.measure() - PI * (1.0 - 0.5625)).abs() <= defect + 1e-6);
        let q = region_quadrature(&m, &RegionSpec::annulus([0.0, 0.0], 0.3, 0.6), opts).unwrap();
        assert_relative_eq!(q.measure(), PI * (0.36 - 0.09), max_relative = 1e-5);
    }

    #[test]
    fn intersection_of_ball_and_annulus() {
        let m = unit_mesh();
        let regions = [RegionSpec::origin_ball(0.6), RegionSpec::annulus([0.0, 0.0], 0.3, 0.9)];
        let q = region_quadrature_all(&m, &regions, QuadratureOptions::default()).unwrap();
        assert_relative_eq!(q.measure(), PI * (0.36 - 0.09), max_relative = 1e-5);
    }

    #[test]
    fn region_outside_domain_is_empty() {
        let m = unit_mesh();
        let err = region_quadrature(&m, &RegionSpec::ball([5.0, 0.0], 0.5), QuadratureOptions::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyRegion(_)));
    }

    #[test]
    fn exact_on_polynomials_over_uncut_elements() {
        let m = build_disc_mesh(1.0, 0.2, 2.0).unwrap();
        let q = region_quadrature(&m, &RegionSpec::Domain, QuadratureOptions::default()).unwrap();
        let fine = region_quadrature(&m, &RegionSpec::Domain, QuadratureOptions { order: 5, depth: 0 }).unwrap();
        for (a, b) in [(0, 0), (2, 0), (1, 1), (4, 0), (2, 2), (3, 1)] {
            let f = |p: &QuadPoint| p.x[0].powi(a) * p.x[1].powi(b);
            assert_relative_eq!(q.integrate(f), fine.integrate(f), epsilon = 1e-13);
        }
    }

    #[test]
    fn singular_weight_integral_on_ball() {
        // int_{B_r} |x|^(a-2) = 2 pi r^a / a
        let m = unit_mesh();
        let r: f64 = 0.5;
        let q = region_quadrature(&m, &RegionSpec::origin_ball(r), QuadratureOptions::default()).unwrap();
        for a in [0.5, 1.0, 1.5] {
            let v = q.integrate(|p| dist(p.x, [0.0, 0.0]).powf(a - 2.0));
            assert_relative_eq!(v, 2.0 * PI * r.powf(a) / a, max_relative = 1e-4);
        }
    }

    #[test]
    fn disc_mass_of_radial_weight() {
        let m = unit_mesh();
        let q = region_quadrature(&m, &RegionSpec::origin_ball(0.8), QuadratureOptions::default()).unwrap();
        let v = q.integrate(|p| dist(p.x, [0.0, 0.0]));
        assert_relative_eq!(v, 2.0 * PI * 0.8f64.powi(3) / 3.0, max_relative = 1e-6);
    }

    #[test]
    fn barycentrics_reproduce_points() {
        let m = unit_mesh();
        let q = region_quadrature(&m, &RegionSpec::annulus([0.1, 0.0], 0.2, 0.4), QuadratureOptions::default()).unwrap();
        for p in q.points.iter().step_by(7) {
            let t = m.triangles()[p.triangle];
            let x: f64 = (0..3).map(|k| p.bary[k] * m.nodes()[t[k]][0]).sum();
            let y: f64 = (0..3).map(|k| p.bary[k] * m.nodes()[t[k]][1]).sum();
            assert!((x - p.x[0]).abs() < 1e-12 && (y - p.x[1]).abs() < 1e-12);
            assert!(p.bary.iter().all(|&b| b > -1e-12));
        }
    }

    #[test]
    fn boundary_part_length() {
        let m = mark_boundary(&unit_mesh(), AngularInterval::new(0.0, PI).unwrap()).unwrap();
        let all = region_quadrature(&m, &RegionSpec::BoundaryPart { marker: BoundaryMarker::Boundary }, QuadratureOptions::default()).unwrap();
        let gamma = region_quadrature(&m, &RegionSpec::BoundaryPart { marker: BoundaryMarker::Gamma }, QuadratureOptions::default()).unwrap();
        assert_relative_eq!(all.measure(), 2.0 * PI, max_relative = 1e-3);
        assert!((gamma.measure() - PI).abs() < m.h());
    }
}
