//! P1 finite elements for `-div(w grad u) = f` with Dirichlet data.
//!
//! Stiffness entries are `(int_T w) grad phi_i . grad phi_j`; the weight
//! integral per triangle is computed with the cut-cell quadrature split at
//! `|x| = eps`, so the kink of the regularized weight never sits inside a
//! quadrature cell and the origin vertex is handled by the collapsed rule.

mod field;
mod sparse;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

pub use field::{Field, FieldDocument, Provenance, WeightRecord};
pub use sparse::{pcg, BandCholesky, CgOutcome, SparseMatrix};

use crate::error::{invalid, Error, Result};
use crate::mesh::{region_quadrature_all, BoundaryMarker, Mesh, Point, QuadratureOptions, RegionQuadrature, RegionSpec};
use crate::weights::WeightSpec;

/// A labelled scalar function of position; the label goes into provenance records.
#[derive(Clone)]
pub struct ScalarFn {
    label: String,
    f: Arc<dyn Fn(Point) -> f64 + Send + Sync>,
}

impl ScalarFn {
    pub fn new(label: impl Into<String>, f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    #[inline]
    pub fn eval(&self, x: Point) -> f64 {
        (self.f)(x)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarFn({})", self.label)
    }
}

#[derive(Debug, Clone)]
pub enum Source {
    Zero,
    Constant(f64),
    Function(ScalarFn),
}

impl Source {
    pub fn eval(&self, x: Point) -> f64 {
        match self {
            Source::Zero => 0.0,
            Source::Constant(c) => *c,
            Source::Function(f) => f.eval(x),
        }
    }

    fn describe(&self) -> String {
        match self {
            Source::Zero => "0".into(),
            Source::Constant(c) => format!("{c}"),
            Source::Function(f) => f.label().into(),
        }
    }
}

/// Dirichlet datum on one boundary marker.
pub type BoundaryData = Source;

#[derive(Debug, Clone)]
pub enum InteriorConstraint {
    /// Adds `strength * int_region w u v` to the bilinear form.
    Penalty { region: RegionSpec, strength: f64 },
    /// Pins every node in the closed region to zero.
    Exact { region: RegionSpec },
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub weight: WeightSpec,
    pub rhs: Source,
    pub dirichlet: BTreeMap<BoundaryMarker, BoundaryData>,
    pub constraint: Option<InteriorConstraint>,
}

impl ProblemSpec {
    /// Homogeneous problem: `f = 0`, `g = 0` on the whole boundary.
    pub fn new(weight: WeightSpec) -> Self {
        Self {
            weight,
            rhs: Source::Zero,
            dirichlet: BTreeMap::from([(BoundaryMarker::Boundary, Source::Zero)]),
            constraint: None,
        }
    }

    pub fn with_rhs(mut self, rhs: Source) -> Self {
        self.rhs = rhs;
        self
    }

    /// Same datum on the whole boundary.
    pub fn with_boundary(mut self, g: BoundaryData) -> Self {
        self.dirichlet = BTreeMap::from([(BoundaryMarker::Boundary, g)]);
        self
    }

    /// Separate data on `Gamma` and its complement.
    pub fn with_split_boundary(mut self, gamma: BoundaryData, complement: BoundaryData) -> Self {
        self.dirichlet = BTreeMap::from([(BoundaryMarker::Gamma, gamma), (BoundaryMarker::Complement, complement)]);
        self
    }

    pub fn with_constraint(mut self, c: InteriorConstraint) -> Self {
        self.constraint = Some(c);
        self
    }

    pub fn with_weight(mut self, weight: WeightSpec) -> Self {
        self.weight = weight;
        self
    }

    pub fn describe(&self) -> String {
        let g: Vec<String> = self
            .dirichlet
            .iter()
            .map(|(m, d)| format!("{}={}", m.as_str(), d.describe()))
            .collect();
        let mut s = format!(
            "alpha={} eps={} f={} g[{}]",
            self.weight.alpha(),
            self.weight.epsilon(),
            self.rhs.describe(),
            g.join(",")
        );
        match &self.constraint {
            Some(InteriorConstraint::Penalty { region, strength }) => s += &format!(" penalty({region}, {strength})"),
            Some(InteriorConstraint::Exact { region }) => s += &format!(" pinned({region})"),
            None => {}
        }
        s
    }

    /// Boundary values per node (`None` for interior nodes).
    fn boundary_values(&self, mesh: &Mesh) -> Result<Vec<Option<f64>>> {
        let whole = self.dirichlet.get(&BoundaryMarker::Boundary);
        if whole.is_some() && self.dirichlet.len() > 1 {
            return Err(invalid("boundary data given both for the whole boundary and for a part"));
        }
        let markers = mesh.node_markers();
        let mut out = vec![None; mesh.num_nodes()];
        for (i, m) in markers.iter().enumerate() {
            let Some(m) = m else { continue };
            let datum = whole.or_else(|| self.dirichlet.get(m)).ok_or_else(|| {
                invalid(format!("no boundary datum for marker `{}`", m.as_str()))
            })?;
            let v = datum.eval(mesh.nodes()[i]);
            if !v.is_finite() {
                return Err(invalid(format!("boundary datum is not finite at node {i}")));
            }
            out[i] = Some(v);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative residual target `||b - Ax|| / ||b||`.
    pub tol: f64,
    /// Iteration cap for CG; defaults to `20 n + 100`.
    pub max_iter: Option<usize>,
    pub quadrature: QuadratureOptions,
    /// Systems smaller than this fall back to banded Cholesky when CG stalls.
    pub direct_threshold: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iter: None,
            quadrature: QuadratureOptions::default(),
            direct_threshold: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Trivial,
    Cg,
    Cholesky,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub method: SolveMethod,
    pub iterations: usize,
    pub relative_residual: f64,
    pub free_unknowns: usize,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub field: Field,
    pub stats: SolveStats,
}

/// Quadrature over the intersection of `regions`, split at `|x| = eps` when
/// the weight is regularized.
pub fn weighted_quadrature(mesh: &Mesh, regions: &[RegionSpec], weight: &WeightSpec, opts: QuadratureOptions) -> Result<RegionQuadrature> {
    let eps = weight.epsilon();
    if eps == 0.0 {
        return region_quadrature_all(mesh, regions, opts);
    }
    let far = 1e6 * mesh.radius();
    let mut points = Vec::new();
    for split in [RegionSpec::origin_ball(eps), RegionSpec::annulus([0.0, 0.0], eps, far)] {
        let mut parts = regions.to_vec();
        parts.push(split);
        match region_quadrature_all(mesh, &parts, opts) {
            Ok(q) => points.extend(q.points),
            Err(Error::EmptyRegion(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if points.is_empty() {
        let name = regions.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(" & ");
        return Err(Error::EmptyRegion(name));
    }
    Ok(RegionQuadrature { points })
}

/// `int_T w` for every triangle.
pub fn element_weight_integrals(mesh: &Mesh, weight: &WeightSpec, opts: QuadratureOptions) -> Result<Vec<f64>> {
    let q = weighted_quadrature(mesh, &[RegionSpec::Domain], weight, opts)?;
    let mut out = vec![0.0; mesh.num_triangles()];
    for p in &q.points {
        out[p.triangle] += p.weight * weight.value(&p.x);
    }
    Ok(out)
}

fn node_pattern(mesh: &Mesh) -> Vec<Vec<usize>> {
    let mut rows: Vec<Vec<usize>> = (0..mesh.num_nodes()).map(|i| vec![i]).collect();
    for t in mesh.triangles() {
        for &a in t {
            for &b in t {
                rows[a].push(b);
            }
        }
    }
    for r in rows.iter_mut() {
        r.sort_unstable();
        r.dedup();
    }
    rows
}

pub fn assemble_stiffness(mesh: &Mesh, weight: &WeightSpec) -> Result<SparseMatrix> {
    assemble_stiffness_with(mesh, weight, QuadratureOptions::default())
}

pub fn assemble_stiffness_with(mesh: &Mesh, weight: &WeightSpec, opts: QuadratureOptions) -> Result<SparseMatrix> {
    let wint = element_weight_integrals(mesh, weight, opts)?;
    let mut k = SparseMatrix::with_pattern(node_pattern(mesh));
    for (ti, t) in mesh.triangles().iter().enumerate() {
        let g = &mesh.geometry()[ti].grad;
        for a in 0..3 {
            for b in 0..3 {
                let v = wint[ti] * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                k.add(t[a], t[b], v);
            }
        }
    }
    Ok(k)
}

/// `int_region w phi_i phi_j`, assembled into `k` scaled by `strength`.
fn add_penalty(k: &mut SparseMatrix, mesh: &Mesh, weight: &WeightSpec, region: &RegionSpec, strength: f64, opts: QuadratureOptions) -> Result<()> {
    let q = weighted_quadrature(mesh, std::slice::from_ref(region), weight, opts)?;
    for p in &q.points {
        let t = mesh.triangles()[p.triangle];
        let s = strength * p.weight * weight.value(&p.x);
        for a in 0..3 {
            for b in 0..3 {
                k.add(t[a], t[b], s * p.bary[a] * p.bary[b]);
            }
        }
    }
    Ok(())
}

fn load_vector(mesh: &Mesh, problem: &ProblemSpec, opts: QuadratureOptions) -> Result<Vec<f64>> {
    let mut b = vec![0.0; mesh.num_nodes()];
    if matches!(problem.rhs, Source::Zero) {
        return Ok(b);
    }
    let q = weighted_quadrature(mesh, &[RegionSpec::Domain], &problem.weight, opts)?;
    for p in &q.points {
        let f = problem.rhs.eval(p.x);
        if !f.is_finite() {
            return Err(invalid(format!("source is not finite at {:?}", p.x)));
        }
        let t = mesh.triangles()[p.triangle];
        for a in 0..3 {
            b[t[a]] += p.weight * f * p.bary[a];
        }
    }
    Ok(b)
}

pub fn solve_dirichlet(mesh: &Mesh, problem: &ProblemSpec, opts: &SolverOptions) -> Result<Solution> {
    if !(opts.tol > 0.0) {
        return Err(invalid(format!("solver tolerance must be positive, got {}", opts.tol)));
    }
    let mut k = assemble_stiffness_with(mesh, &problem.weight, opts.quadrature)?;
    let b = load_vector(mesh, problem, opts.quadrature)?;

    let mut fixed = problem.boundary_values(mesh)?;
    match &problem.constraint {
        Some(InteriorConstraint::Penalty { region, strength }) => {
            if !(*strength >= 0.0) {
                return Err(invalid("penalty strength must be nonnegative"));
            }
            add_penalty(&mut k, mesh, &problem.weight, region, *strength, opts.quadrature)?;
        }
        Some(InteriorConstraint::Exact { region }) => {
            let mut pinned = 0;
            for (i, &p) in mesh.nodes().iter().enumerate() {
                if fixed[i].is_none() && region_contains(region, p) {
                    fixed[i] = Some(0.0);
                    pinned += 1;
                }
            }
            if pinned == 0 {
                return Err(Error::EmptyRegion(region.to_string()));
            }
        }
        None => {}
    }

    let free: Vec<usize> = (0..mesh.num_nodes()).filter(|&i| fixed[i].is_none()).collect();
    let mut u: Vec<f64> = fixed.iter().map(|v| v.unwrap_or(0.0)).collect();
    // reduced right-hand side b_I - K_IB g_B
    let rhs: Vec<f64> = free
        .iter()
        .map(|&i| {
            let coupling: f64 = k.row(i).filter(|(j, _)| fixed[*j].is_some()).map(|(j, v)| v * u[j]).sum();
            b[i] - coupling
        })
        .collect();
    let a = k.principal(&free);
    let n = free.len();

    let stats = if n == 0 {
        SolveStats {
            method: SolveMethod::Trivial,
            iterations: 0,
            relative_residual: 0.0,
            free_unknowns: 0,
        }
    } else {
        let max_iter = opts.max_iter.unwrap_or(20 * n + 100);
        let mut x = vec![0.0; n];
        let cg = pcg(&a, &rhs, &mut x, opts.tol, max_iter);
        if cg.converged {
            free.iter().zip(&x).for_each(|(&i, &v)| u[i] = v);
            SolveStats {
                method: SolveMethod::Cg,
                iterations: cg.iterations,
                relative_residual: cg.relative_residual,
                free_unknowns: n,
            }
        } else if n < opts.direct_threshold {
            let x = BandCholesky::factor(&a)?.solve(&rhs);
            let ax = a.mul(&x);
            let res = sparse::norm2(&rhs.iter().zip(&ax).map(|(p, q)| p - q).collect::<Vec<_>>()) / sparse::norm2(&rhs);
            free.iter().zip(&x).for_each(|(&i, &v)| u[i] = v);
            SolveStats {
                method: SolveMethod::Cholesky,
                iterations: cg.iterations,
                relative_residual: res,
                free_unknowns: n,
            }
        } else {
            return Err(Error::SolverDivergence {
                iterations: cg.iterations,
                residual: cg.relative_residual,
                tol: opts.tol,
            });
        }
    };
    Ok(Solution {
        field: Field::new(mesh, u)?,
        stats,
    })
}

fn region_contains(region: &RegionSpec, p: Point) -> bool {
    let d = |c: Point| ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt();
    match *region {
        RegionSpec::Ball { center, radius } => d(center) <= radius,
        RegionSpec::Annulus { center, inner, outer } => (inner..=outer).contains(&d(center)),
        RegionSpec::Domain => true,
        RegionSpec::BoundaryPart { .. } => false,
    }
}

/// Squared weighted quantities `int u^2 w`, `int |grad u|^2 w`, `int u^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedNorms {
    pub l2w: f64,
    pub h1w_seminorm: f64,
    pub l2: f64,
}

pub fn weighted_norms(mesh: &Mesh, field: &Field, weight: &WeightSpec, opts: QuadratureOptions) -> Result<WeightedNorms> {
    field.check_mesh(mesh)?;
    let q = weighted_quadrature(mesh, &[RegionSpec::Domain], weight, opts)?;
    let (mut l2w, mut l2) = (0.0, 0.0);
    for p in &q.points {
        let u = field.eval(mesh, p);
        l2w += p.weight * u * u * weight.value(&p.x);
        l2 += p.weight * u * u;
    }
    let wint = element_weight_integrals(mesh, weight, opts)?;
    let h1 = (0..mesh.num_triangles())
        .map(|t| {
            let g = field.gradient(mesh, t);
            wint[t] * (g[0] * g[0] + g[1] * g[1])
        })
        .sum();
    Ok(WeightedNorms {
        l2w,
        h1w_seminorm: h1,
        l2,
    })
}

/// `int f^2 / w` over the domain: the source norm in the stability estimate.
pub fn source_norm_inverse_weight(mesh: &Mesh, source: &Source, weight: &WeightSpec, opts: QuadratureOptions) -> Result<f64> {
    let q = weighted_quadrature(mesh, &[RegionSpec::Domain], weight, opts)?;
    Ok(q.integrate(|p| {
        let f = source.eval(p.x);
        f * f / weight.value(&p.x)
    }))
}

/// `||u - v||_{L2}` for fields on the same mesh.
pub fn l2_distance(mesh: &Mesh, u: &Field, v: &Field, opts: QuadratureOptions) -> Result<f64> {
    let d = u.axpy(-1.0, v)?;
    let q = region_quadrature_all(mesh, &[RegionSpec::Domain], opts)?;
    Ok(q.integrate(|p| d.eval(mesh, p).powi(2)).sqrt())
}

/// Interior Galerkin residual of `field` relative to its natural scale:
/// `||(K u)_I|| / ||(sum_j |K_ij u_j|)_I||` over non-boundary nodes, restricted
/// to `|x| < within` when given. Zero fields score 0.
pub fn harmonicity_residual(mesh: &Mesh, weight: &WeightSpec, field: &Field, within: Option<f64>, opts: QuadratureOptions) -> Result<f64> {
    field.check_mesh(mesh)?;
    let k = assemble_stiffness_with(mesh, weight, opts)?;
    let ku = k.mul(field.values());
    let scale = k.abs_mul(field.values());
    let (mut num, mut den) = (0.0, 0.0);
    for (i, p) in mesh.nodes().iter().enumerate() {
        if mesh.is_boundary_node(i) {
            continue;
        }
        if let Some(r) = within {
            if (p[0] * p[0] + p[1] * p[1]).sqrt() >= r {
                continue;
            }
        }
        num += ku[i] * ku[i];
        den += scale[i] * scale[i];
    }
    Ok(if den == 0.0 { 0.0 } else { (num / den).sqrt() })
}

/// Residual threshold for a field to count as a discrete solution.
pub const HARMONICITY_GATE: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct ApproximationSequence {
    pub ks: Vec<u32>,
    pub fields: Vec<Field>,
    /// Solution with the exact degenerate weight.
    pub base: Field,
    /// `||u_k - u_0||_{L2}` per `k`.
    pub distances: Vec<f64>,
    pub stats: Vec<SolveStats>,
}

/// Solves with `w_{1/k}` for each `k`, plus the degenerate limit.
pub fn approximation_sequence(mesh: &Mesh, problem: &ProblemSpec, ks: &[u32], opts: &SolverOptions) -> Result<ApproximationSequence> {
    if problem.weight.is_regularized() {
        return Err(invalid("approximation sequence needs the degenerate weight (eps = 0)"));
    }
    if ks.is_empty() || ks[0] == 0 || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid(format!("ks must be positive and strictly increasing, got {ks:?}")));
    }
    for &k in ks {
        let eps = 1.0 / k as f64;
        let size = mesh.local_size_near_origin(eps);
        if eps < 2.0 * size {
            return Err(Error::Resolution {
                radius: eps,
                local_size: size,
                factor: 2.0,
            });
        }
    }
    let base = solve_dirichlet(mesh, problem, opts)?;
    let mut fields = Vec::with_capacity(ks.len());
    let mut distances = Vec::with_capacity(ks.len());
    let mut stats = Vec::with_capacity(ks.len() + 1);
    for &k in ks {
        let weight = problem.weight.with_epsilon(1.0 / k as f64)?;
        let sol = solve_dirichlet(mesh, &problem.clone().with_weight(weight), opts)?;
        distances.push(l2_distance(mesh, &sol.field, &base.field, opts.quadrature)?);
        stats.push(sol.stats);
        fields.push(sol.field);
    }
    stats.push(base.stats);
    Ok(ApproximationSequence {
        ks: ks.to_vec(),
        fields,
        base: base.field,
        distances,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_disc_mesh;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn weight(alpha: f64, eps: f64) -> WeightSpec {
        WeightSpec::new(alpha, eps, 2, 1.0).unwrap()
    }

    #[test]
    fn stiffness_is_symmetric_with_zero_row_sums() {
        let m = build_disc_mesh(1.0, 0.1, 2.0).unwrap();
        for w in [weight(1.0, 0.0), weight(0.5, 0.1), weight(1.5, 0.0)] {
            let k = assemble_stiffness(&m, &w).unwrap();
            assert_eq!(k.max_asymmetry(), 0.0);
            let ones = vec![1.0; m.num_nodes()];
            let scale = k.diagonal().iter().fold(0.0f64, |a, &b| a.max(b));
            assert!(k.mul(&ones).iter().all(|r| r.abs() <= 1e-12 * scale));
            assert!(k.diagonal().iter().all(|&d| d > 0.0));
        }
    }

    #[test]
    fn element_weight_matches_centroid_far_from_origin() {
        // far from the origin |x| is nearly affine, so int_T |x| ~ |T| w(centroid)
        let m = build_disc_mesh(1.0, 0.05, 2.0).unwrap();
        let wint = element_weight_integrals(&m, &weight(1.0, 0.0), QuadratureOptions::default()).unwrap();
        for (t, tri) in m.triangles().iter().enumerate().step_by(97) {
            let c = [0, 1].map(|d| tri.iter().map(|&i| m.nodes()[i][d]).sum::<f64>() / 3.0);
            let r = (c[0] * c[0] + c[1] * c[1]).sqrt();
            if r > 0.5 {
                let area = m.geometry()[t].area;
                assert_relative_eq!(wint[t], area * r, max_relative = 1e-3);
            }
        }
    }

    #[test]
    fn constant_data_gives_constant_solution() {
        let m = build_disc_mesh(1.0, 0.1, 2.0).unwrap();
        let p = ProblemSpec::new(weight(1.0, 0.0)).with_boundary(Source::Constant(2.5));
        let s = solve_dirichlet(&m, &p, &SolverOptions::default()).unwrap();
        assert!(s.field.values().iter().all(|&v| (v - 2.5).abs() < 1e-9));
        let z = solve_dirichlet(&m, &ProblemSpec::new(weight(1.0, 0.0)), &SolverOptions::default()).unwrap();
        assert!(z.field.values().iter().all(|&v| v == 0.0));
        assert_eq!(z.stats.method, SolveMethod::Cg);
    }

    #[test]
    fn cholesky_fallback_matches_cg() {
        let m = build_disc_mesh(1.0, 0.1, 2.0).unwrap();
        let p = ProblemSpec::new(weight(1.0, 0.0)).with_rhs(Source::Constant(1.0));
        let cg = solve_dirichlet(&m, &p, &SolverOptions::default()).unwrap();
        let direct = solve_dirichlet(
            &m,
            &p,
            &SolverOptions {
                max_iter: Some(1),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(direct.stats.method, SolveMethod::Cholesky);
        for (a, b) in cg.field.values().iter().zip(direct.field.values()) {
            assert_relative_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn divergence_is_reported_above_direct_threshold() {
        let m = build_disc_mesh(1.0, 0.1, 2.0).unwrap();
        let p = ProblemSpec::new(weight(1.0, 0.0)).with_rhs(Source::Constant(1.0));
        let opts = SolverOptions {
            max_iter: Some(2),
            direct_threshold: 0,
            ..Default::default()
        };
        assert!(matches!(solve_dirichlet(&m, &p, &opts), Err(Error::SolverDivergence { .. })));
    }

    #[test]
    fn poisson_residual_and_gate() {
        let m = build_disc_mesh(1.0, 0.1, 2.0).unwrap();
        let w = weight(1.0, 0.0);
        let p = ProblemSpec::new(w).with_rhs(Source::Constant(1.0));
        let s = solve_dirichlet(&m, &p, &SolverOptions::default()).unwrap();
        assert!(s.stats.relative_residual <= 1e-11);
        // f = 1 is not w-harmonic, so the gate rejects it
        assert!(harmonicity_residual(&m, &w, &s.field, None, QuadratureOptions::default()).unwrap() > 1e-3);
        let h = ProblemSpec::new(w).with_boundary(Source::Function(ScalarFn::new("x", |x| x[0])));
        let s = solve_dirichlet(&m, &h, &SolverOptions::default()).unwrap();
        assert!(harmonicity_residual(&m, &w, &s.field, None, QuadratureOptions::default()).unwrap() < HARMONICITY_GATE);
        let zero = Field::zeros(&m);
        assert_eq!(harmonicity_residual(&m, &w, &zero, None, QuadratureOptions::default()).unwrap(), 0.0);
    }

    #[test]
    fn unit_field_weighted_mass() {
        let m = build_disc_mesh(1.0, 0.05, 2.0).unwrap();
        let n = weighted_norms(&m, &Field::constant(&m, 1.0), &weight(1.0, 0.0), QuadratureOptions::default()).unwrap();
        assert_relative_eq!(n.l2w, 2.0 * PI / 3.0, max_relative = 1e-3);
        assert!(n.h1w_seminorm < 1e-20);
        assert_relative_eq!(n.l2, m.total_area(), max_relative = 1e-12);
        let z = weighted_norms(&m, &Field::zeros(&m), &weight(1.0, 0.0), QuadratureOptions::default()).unwrap();
        assert_eq!((z.l2w, z.h1w_seminorm, z.l2), (0.0, 0.0, 0.0));
    }

    #[test]
    fn norms_are_quadratic() {
        let m = build_disc_mesh(1.0, 0.1, 2.0).unwrap();
        let w = weight(0.5, 0.2);
        let u = Field::interpolate(&m, |x| x[0] * x[1] + 0.3 * x[0]).unwrap();
        let a = weighted_norms(&m, &u, &w, QuadratureOptions::default()).unwrap();
        let b = weighted_norms(&m, &u.scaled(2.0), &w, QuadratureOptions::default()).unwrap();
        assert_relative_eq!(b.l2w, 4.0 * a.l2w, max_relative = 1e-14);
        assert_relative_eq!(b.h1w_seminorm, 4.0 * a.h1w_seminorm, max_relative = 1e-14);
        assert_relative_eq!(b.l2, 4.0 * a.l2, max_relative = 1e-14);
    }

    #[test]
    fn degenerate_energy_is_below_regularized() {
        let m = build_disc_mesh(1.0, 0.05, 2.0).unwrap();
        let w0 = weight(1.0, 0.0);
        let p = ProblemSpec::new(w0).with_rhs(Source::Constant(1.0));
        let seq = approximation_sequence(&m, &p, &[4, 8], &SolverOptions::default()).unwrap();
        for (k, u) in seq.ks.iter().zip(&seq.fields) {
            let wk = w0.with_epsilon(1.0 / *k as f64).unwrap();
            let e0 = weighted_norms(&m, u, &w0, QuadratureOptions::default()).unwrap().h1w_seminorm;
            let ek = weighted_norms(&m, u, &wk, QuadratureOptions::default()).unwrap().h1w_seminorm;
            assert!(e0 <= ek);
        }
    }

    #[test]
    fn approximation_sequence_preconditions() {
        let m = build_disc_mesh(1.0, 0.1, 2.0).unwrap();
        let p = ProblemSpec::new(weight(1.0, 0.0));
        let opts = SolverOptions::default();
        assert!(approximation_sequence(&m, &p, &[8, 4], &opts).is_err());
        assert!(approximation_sequence(&m, &p.clone().with_weight(weight(1.0, 0.1)), &[4], &opts).is_err());
        assert!(matches!(approximation_sequence(&m, &p, &[4, 1000], &opts), Err(Error::Resolution { .. })));
        let c = approximation_sequence(&m, &p.with_boundary(Source::Constant(3.0)), &[2, 4], &opts).unwrap();
        assert!(c.distances.iter().all(|&d| d < 1e-9));
    }

    #[test]
    fn split_boundary_requires_both_markers() {
        use crate::mesh::{mark_boundary, AngularInterval};
        let m = build_disc_mesh(1.0, 0.1, 2.0).unwrap();
        let marked = mark_boundary(&m, AngularInterval::new(0.0, PI).unwrap()).unwrap();
        let mut p = ProblemSpec::new(weight(1.0, 0.0));
        p.dirichlet = BTreeMap::from([(BoundaryMarker::Gamma, Source::Zero)]);
        assert!(solve_dirichlet(&marked, &p, &SolverOptions::default()).is_err());
        let p = p.with_split_boundary(Source::Zero, Source::Constant(1.0));
        let s = solve_dirichlet(&marked, &p, &SolverOptions::default()).unwrap();
        for (i, mk) in marked.node_markers().iter().enumerate() {
            match mk {
                Some(BoundaryMarker::Gamma) => assert_eq!(s.field.values()[i], 0.0),
                Some(BoundaryMarker::Complement) => assert_eq!(s.field.values()[i], 1.0),
                _ => {}
            }
        }
    }

    #[test]
    fn exact_constraint_pins_region() {
        let m = build_disc_mesh(1.0, 0.1, 2.0).unwrap();
        let region = RegionSpec::ball([0.5, 0.0], 0.2);
        let p = ProblemSpec::new(weight(1.0, 0.0))
            .with_boundary(Source::Constant(1.0))
            .with_constraint(InteriorConstraint::Exact { region: region.clone() });
        let s = solve_dirichlet(&m, &p, &SolverOptions::default()).unwrap();
        for (i, x) in m.nodes().iter().enumerate() {
            if region_contains(&region, *x) {
                assert_eq!(s.field.values()[i], 0.0);
            }
        }
        assert!(s.field.max_abs() > 0.5);
    }

    #[test]
    fn field_json_round_trip() {
        let m = build_disc_mesh(1.0, 0.2, 2.0).unwrap();
        let u = Field::interpolate(&m, |x| (x[0] + 0.1).exp() / 3.0).unwrap();
        let doc = u.to_document(
            Some(&weight(1.0, 0.1)),
            Some(Provenance {
                problem: "test".into(),
                tol: 1e-11,
                iterations: 3,
            }),
        );
        let text = serde_json::to_string(&doc).unwrap();
        let back = Field::from_document(serde_json::from_str(&text).unwrap(), &m).unwrap();
        assert_eq!(back, u);
        let other = build_disc_mesh(1.0, 0.25, 2.0).unwrap();
        assert!(Field::from_document(serde_json::from_str(&text).unwrap(), &other).is_err());
    }
}
