//! The desk-scale acceptance suite: eight criteria, each reduced to one or
//! more [`CheckReport`]s. Shared by the `all` subcommand and the acceptance
//! test target.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::checks::{
    assignment_verdict, caccioppoli_check, derivative_identity_check, frequency_monotonicity_check, mu_exponent,
    remainder_decay_check, three_sphere_check, CheckReport, THREE_SPHERE_TOL,
};
use crate::error::Result;
use crate::functionals::Functionals;
use crate::mesh::{build_disc_mesh, mark_boundary, AngularInterval, Mesh, Point, RegionSpec};
use crate::propagation::{plan_chain, propagate_check, wucp_probe, WucpProbe};
use crate::radial_oracle::ModeSolution;
use crate::solver::{
    harmonicity_residual, solve_dirichlet, weighted_quadrature, Field, InteriorConstraint, ProblemSpec, ScalarFn,
    SolverOptions, Source, HARMONICITY_GATE,
};
use crate::weights::WeightSpec;

pub const HARDY_TOL_BASE: f64 = 2e-2;
pub const HARDY_TOL_FINE: f64 = 5e-3;
pub const HARDY_FIELDS_PER_ALPHA: usize = 17;
pub const CONVERGENCE_KS: [u32; 4] = [4, 8, 16, 32];
pub const FLOOR_FACTOR: f64 = 3.0;
/// Mass-gap radius for the remainder decay check; must exceed `2/k` for the first `k`.
pub const DECAY_RADIUS: f64 = 0.75;
pub const REMAINDER_CLOSED_FORM_TOL: f64 = 5e-2;
pub const MODE_RATE: f64 = 1.5;
pub const PHI_TOL: f64 = 1e-2;
pub const MONOTONICITY_KS: [u32; 3] = [8, 16, 32];
pub const THREE_SPHERE_CASES: usize = 100;
pub const SYMMETRIC_MU_TOL: f64 = 1e-12;
pub const CONSTANT_CACCIOPPOLI_TOL: f64 = 2e-2;
pub const OMEGA_FRACTION_TOL: f64 = 1e-4;
pub const PENALTY_STRENGTH: f64 = 1e6;
/// Spread allowed for the observed interpolation constant across the family.
pub const PROPAGATION_SPREAD: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteConfig {
    /// Disc radius.
    pub r0: f64,
    /// Baseline mesh size.
    pub h: f64,
    pub grading: f64,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            r0: 1.0,
            h: 0.05,
            grading: 2.0,
            seed: 20_240_519,
            solver: SolverOptions::default(),
        }
    }
}

impl SuiteConfig {
    fn mesh(&self, refine: u32) -> Result<Mesh> {
        build_disc_mesh(self.r0, self.h / f64::from(1u32 << refine), self.grading)
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub summary: String,
    pub reports: Vec<CheckReport>,
}

impl CriterionOutcome {
    fn new(id: u8, title: &'static str, summary: String, reports: Vec<CheckReport>) -> Self {
        Self {
            id,
            title,
            passed: reports.iter().all(|r| r.passed),
            summary,
            reports,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "criterion {} [{}] {}: {}",
            self.id,
            self.title,
            if self.passed { "PASS" } else { "FAIL" },
            self.summary
        )
    }
}

/// Trigonometric polynomial in the polar angle.
#[derive(Debug, Clone)]
pub struct Fourier {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl Fourier {
    pub fn random(rng: &mut impl Rng, degree: usize) -> Self {
        let mut c = |l: usize| rng.random_range(-1.0..1.0) / (1.0 + l as f64);
        let cos: Vec<f64> = (0..=degree).map(&mut c).collect();
        let sin: Vec<f64> = (0..=degree).map(|l| if l == 0 { 0.0 } else { c(l) }).collect();
        Self { cos, sin }
    }

    pub fn eval_angle(&self, t: f64) -> f64 {
        let mut s = 0.0;
        for l in 0..self.cos.len() {
            s += self.cos[l] * (l as f64 * t).cos() + self.sin[l] * (l as f64 * t).sin();
        }
        s
    }

    pub fn source(&self) -> Source {
        let me = self.clone();
        Source::Function(ScalarFn::new("fourier", move |x| me.eval_angle(x[1].atan2(x[0]))))
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|j| a + (b - a) * j as f64 / (n - 1) as f64).collect()
}

fn solve(mesh: &Mesh, problem: &ProblemSpec, cfg: &SuiteConfig) -> Result<Field> {
    Ok(solve_dirichlet(mesh, problem, &cfg.solver)?.field)
}

/// Zero-trace test function for the Hardy suite. Every third one is the
/// near-extremal profile `max(r, rho)^-s - 1` with `s` close to `(N-2+alpha)/2`.
fn hardy_field(mesh: &Mesh, rng: &mut impl Rng, alpha: f64, index: usize) -> Result<Field> {
    if index % 3 == 0 {
        let s = rng.random_range(0.5..0.95) * alpha / 2.0;
        let rho = 0.5 * mesh.h();
        let tilt = rng.random_range(-0.5..0.5);
        Field::interpolate(mesh, move |x| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            let outer = mesh_radius_profile(r, s, rho);
            outer * (1.0 + tilt * x[0])
        })
    } else {
        let f = Fourier::random(rng, 3);
        let shift = [rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)];
        Field::interpolate(mesh, move |x| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            let y: Point = [x[0] - shift[0], x[1] - shift[1]];
            (1.0 - r2).max(0.0) * (f.eval_angle(y[1].atan2(y[0])) + (y[0] * y[0] + y[1] * y[1]).sqrt())
        })
    }
}

fn mesh_radius_profile(r: f64, s: f64, rho: f64) -> f64 {
    (r.max(rho).powf(-s) - 1.0).max(0.0)
}

/// Zeroes the boundary nodes (the interpolants above vanish there up to
/// rounding).
fn with_zero_trace(mesh: &Mesh, u: Field) -> Result<Field> {
    let mut v = u.into_values();
    for (i, x) in v.iter_mut().enumerate() {
        if mesh.is_boundary_node(i) {
            *x = 0.0;
        }
    }
    Field::new(mesh, v)
}

pub fn criterion_1_hardy(cfg: &SuiteConfig) -> Result<CriterionOutcome> {
    let mut reports = Vec::new();
    let mut worst = [0.0f64; 2];
    for (level, tol) in [(0u32, HARDY_TOL_BASE), (1, HARDY_TOL_FINE)] {
        let mesh = cfg.mesh(level)?;
        let mut rep = CheckReport::new(format!("hardy_h{}", level), tol);
        for (ai, alpha) in [0.5, 1.0, 1.5].into_iter().enumerate() {
            let mut rng = cfg.rng(100 + ai as u64);
            let weight = WeightSpec::new(alpha, 1.0 / 16.0, 2, cfg.r0)?;
            for i in 0..HARDY_FIELDS_PER_ALPHA {
                let u = with_zero_trace(&mesh, hardy_field(&mesh, &mut rng, alpha, i)?)?;
                let h = Functionals::new(&mesh, &u, &weight)?.hardy_report()?;
                for (name, ratio) in h.ratios() {
                    worst[level as usize] = worst[level as usize].max(ratio);
                    rep.push(format!("alpha={alpha} field={i} {name}"), 1.0 - ratio, &[("ratio", ratio)]);
                }
            }
        }
        reports.push(rep);
    }
    let n = 3 * HARDY_FIELDS_PER_ALPHA;
    Ok(CriterionOutcome::new(
        1,
        "Hardy suite",
        format!(
            "{n} fields per level; max ratio {:.6} at h (limit {}), {:.6} at h/2 (limit {})",
            worst[0],
            1.0 + HARDY_TOL_BASE,
            worst[1],
            1.0 + HARDY_TOL_FINE
        ),
        reports,
    ))
}

/// Transfers a P1 field to another mesh of the same disc by point evaluation;
/// nodes outside the source polygon are pulled radially inward.
pub fn transfer(from: &Mesh, u: &Field, to: &Mesh) -> Result<Field> {
    Field::interpolate(to, |x| {
        let mut y = x;
        for _ in 0..64 {
            if let Some(v) = u.value_at(from, y) {
                return v;
            }
            y = [y[0] * (1.0 - 1e-3), y[1] * (1.0 - 1e-3)];
        }
        0.0
    })
}

pub fn criterion_2_convergence(cfg: &SuiteConfig) -> Result<CriterionOutcome> {
    let mesh = cfg.mesh(0)?;
    let weight = WeightSpec::degenerate(1.0, cfg.r0)?;
    let problem = ProblemSpec::new(weight).with_rhs(Source::Constant(1.0));
    let decay = remainder_decay_check(&mesh, &problem, &CONVERGENCE_KS, DECAY_RADIUS * cfg.r0, &cfg.solver)?;

    // discretization floor by Richardson comparison of two mesh levels (P1: order 2)
    let fine = cfg.mesh(1)?;
    let coarse_u0 = solve(&mesh, &problem, cfg)?;
    let fine_u0 = solve(&fine, &problem, cfg)?;
    let moved = transfer(&mesh, &coarse_u0, &fine)?;
    let q = weighted_quadrature(&fine, &[RegionSpec::Domain], &weight, cfg.solver.quadrature)?;
    let d = q.integrate(|p| (moved.eval(&fine, p) - fine_u0.eval(&fine, p)).powi(2)).sqrt();
    let floor = d * 4.0 / 3.0;

    let dist: Vec<f64> = CONVERGENCE_KS
        .iter()
        .map(|k| decay.fitted_constants[&format!("l2_distance[k={k}]")])
        .collect();
    let mut conv = CheckReport::new("convergence", 0.0);
    conv.fit("discretization_floor", floor);
    for i in 1..dist.len() {
        conv.push(
            format!("distance k={}->{}", CONVERGENCE_KS[i - 1], CONVERGENCE_KS[i]),
            (dist[i - 1] - dist[i]) / dist[0].max(f64::MIN_POSITIVE),
            &[("distance", dist[i])],
        );
    }
    let last = *dist.last().unwrap();
    conv.push("final distance vs floor", (FLOOR_FACTOR * floor - last) / floor, &[("distance", last), ("floor", floor)]);

    // constant boundary data: R_k = (2 pi / 3) eps^3 c^2
    let c = 1.5;
    let constant = ProblemSpec::new(weight).with_boundary(Source::Constant(c));
    let mut closed = remainder_decay_check(&mesh, &constant, &CONVERGENCE_KS, DECAY_RADIUS * cfg.r0, &cfg.solver)?;
    closed.name = "remainder_decay_constant_data".into();
    let mut cf = CheckReport::new("remainder_closed_form", REMAINDER_CLOSED_FORM_TOL);
    let mut worst_rel: f64 = 0.0;
    for k in CONVERGENCE_KS {
        let eps = 1.0 / f64::from(k);
        let expect = 2.0 * PI / 3.0 * eps.powi(3) * c * c;
        let got = closed.fitted_constants[&format!("R[k={k}]")];
        let rel = (got / expect - 1.0).abs();
        worst_rel = worst_rel.max(rel);
        cf.push(format!("k={k}"), -rel, &[("R", got), ("closed_form", expect)]);
    }
    let literal = closed.fitted_constants["R[k=32]"] / (PI / 3.0 * (1.0f64 / 32.0).powi(3) * c * c);
    cf.fit("ratio_to_pi_eps3_over_3_at_k32", literal);
    cf.note(format!("R_k / (pi eps^3 c^2 / 3) = {literal:.4} at k = 32"));
    let summary = format!(
        "||u_k-u_0|| = {:?}, floor {:.3e}; R_k decay worst margin {:.2e}; constant-data R_k within {:.2e} of 2 pi eps^3 c^2 / 3",
        dist.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>(),
        floor,
        decay.worst_margin,
        worst_rel
    );
    Ok(CriterionOutcome::new(2, "convergence", summary, vec![decay, conv, cf, closed]))
}

pub fn criterion_3_modes(cfg: &SuiteConfig) -> Result<CriterionOutcome> {
    let meshes = [cfg.mesh(0)?, cfg.mesh(1)?, cfg.mesh(2)?];
    let coarse = build_disc_mesh(cfg.r0, 2.0 * cfg.h, cfg.grading)?;
    let mut rates = CheckReport::new("mode_convergence", 0.0);
    let mut phi = CheckReport::new("mode_frequency", PHI_TOL);
    let mut worst_rate = f64::INFINITY;
    let mut worst_phi: f64 = 0.0;
    for alpha in [0.5, 1.0, 1.5] {
        let weight = WeightSpec::degenerate(alpha, cfg.r0)?;
        for l in [1u32, 2] {
            let mode = ModeSolution::new(2, alpha, l)?;
            let problem = ProblemSpec::new(weight).with_boundary(mode.as_source());
            let mut errs = Vec::new();
            for (i, mesh) in std::iter::once(&coarse).chain(meshes.iter()).enumerate() {
                let u = solve(mesh, &problem, cfg)?;
                let q = weighted_quadrature(mesh, &[RegionSpec::Domain], &weight, cfg.solver.quadrature)?;
                errs.push(q.integrate(|p| (u.eval(mesh, p) - mode.eval(p.x)).powi(2) * weight.value(&p.x)).sqrt());
                if i == 1 {
                    let f = Functionals::new(mesh, &u, &weight)?;
                    for j in 1..=9 {
                        let r = 0.1 * j as f64 * cfg.r0;
                        let rel = (f.frequency(r)? / (2.0 * mode.beta()) - 1.0).abs();
                        worst_phi = worst_phi.max(rel);
                        phi.push(format!("alpha={alpha} l={l} r={r:.1}"), -rel, &[("phi", f.frequency(r)?)]);
                    }
                }
            }
            for i in 1..errs.len() {
                let rate = errs[i - 1] / errs[i];
                worst_rate = worst_rate.min(rate);
                rates.push(
                    format!("alpha={alpha} l={l} level {i}"),
                    (rate - MODE_RATE) / MODE_RATE,
                    &[("error", errs[i]), ("rate", rate)],
                );
            }
        }
    }
    Ok(CriterionOutcome::new(
        3,
        "exact modes",
        format!("worst L2(w) error ratio per halving {worst_rate:.3} (need >= {MODE_RATE}); worst |Phi/2beta - 1| {worst_phi:.2e}"),
        vec![rates, phi],
    ))
}

pub fn criterion_4_monotonicity(cfg: &SuiteConfig) -> Result<CriterionOutcome> {
    let mesh = cfg.mesh(0)?;
    let mut rng = cfg.rng(400);
    let random: Vec<Fourier> = (0..3).map(|_| Fourier::random(&mut rng, 4)).collect();
    let mut parts = Vec::new();
    for k in MONOTONICITY_KS {
        let eps = 1.0 / f64::from(k);
        let grid = linspace((2.5 * eps).max(0.1) * cfg.r0, 0.95 * cfg.r0, 20);
        for alpha in [0.5, 1.0, 1.5] {
            let weight = WeightSpec::new(alpha, eps, 2, cfg.r0)?;
            let mut data: Vec<(String, Source)> = [1u32, 2]
                .iter()
                .map(|&l| Ok((format!("mode l={l}"), ModeSolution::new(2, alpha, l)?.as_source())))
                .collect::<Result<_>>()?;
            data.extend(random.iter().enumerate().map(|(i, f)| (format!("random {i}"), f.source())));
            for (label, g) in data {
                let u = solve(&mesh, &ProblemSpec::new(weight).with_boundary(g), cfg)?;
                let rep = frequency_monotonicity_check(&Functionals::new(&mesh, &u, &weight)?, &grid)?;
                parts.push((format!("k={k} alpha={alpha} {label}"), rep));
            }
        }
    }
    let rep = CheckReport::merge("frequency_monotonicity", crate::checks::MONOTONICITY_TOL, parts);
    Ok(CriterionOutcome::new(
        4,
        "frequency monotonicity",
        format!("{} consecutive pairs, worst relative step {:.3e}", rep.rows.len(), rep.worst_margin),
        vec![rep],
    ))
}

pub fn criterion_5_three_sphere(cfg: &SuiteConfig) -> Result<CriterionOutcome> {
    let mesh = cfg.mesh(0)?;
    let mut rng = cfg.rng(500);
    let mut parts = Vec::new();
    let mut gate = CheckReport::new("harmonicity_gate", 0.0);
    let fields = 10;
    let per_field = THREE_SPHERE_CASES.div_ceil(fields) + 2;
    for i in 0..fields {
        let alpha = [0.5, 1.0, 1.5][i % 3];
        let weight = WeightSpec::degenerate(alpha, cfg.r0)?;
        let g = Fourier::random(&mut rng, 4);
        let u = solve(&mesh, &ProblemSpec::new(weight).with_boundary(g.source()), cfg)?;
        let res = harmonicity_residual(&mesh, &weight, &u, None, cfg.solver.quadrature)?;
        gate.push(format!("field {i}"), (HARMONICITY_GATE - res) / HARMONICITY_GATE, &[("residual", res)]);
        let f = Functionals::new(&mesh, &u, &weight)?;
        for j in 0..per_field {
            let mut r = [0.0; 3];
            loop {
                for x in r.iter_mut() {
                    *x = rng.random_range(0.05..0.95) * cfg.r0;
                }
                r.sort_by(f64::total_cmp);
                if r[1] - r[0] > 0.05 && r[2] - r[1] > 0.05 {
                    break;
                }
            }
            parts.push((format!("field {i} alpha={alpha} triple {j}"), three_sphere_check(&f, r[0], r[1], r[2])?));
        }
    }
    let rep = CheckReport::merge("three_sphere", THREE_SPHERE_TOL, parts);
    let verdict = assignment_verdict(&rep, THREE_SPHERE_TOL);

    let mut formula = CheckReport::new("symmetric_exponent", SYMMETRIC_MU_TOL);
    for alpha in [0.25, 0.5, 1.0, 1.5, 1.75] {
        let mu = mu_exponent(0.25, 0.5, 1.0, alpha)?.mu_paper;
        let closed = (4f64.powf(alpha) - 2f64.powf(alpha)) / (4f64.powf(alpha) - 1.0);
        formula.push(format!("alpha={alpha}"), -(mu - closed).abs(), &[("mu", mu)]);
    }

    let exactly_one = (verdict.mu_paper_holds == verdict.cases) != (verdict.mu_derived_holds == verdict.cases);
    let mut assign = CheckReport::new("exponent_assignment", 0.0);
    assign.fit("cases", verdict.cases as f64);
    assign.fit("mu_paper_holds", verdict.mu_paper_holds as f64);
    assign.fit("mu_derived_holds", verdict.mu_derived_holds as f64);
    assign.push("exactly one assignment holds everywhere", if exactly_one { 0.0 } else { -1.0 }, &[]);
    let which = if verdict.mu_derived_holds == verdict.cases { "mu_derived" } else { "mu_paper" };
    assign.note(format!("assignment holding on every case: {which}"));

    let mut enough = CheckReport::new("three_sphere_case_count", 0.0);
    enough.push("cases", verdict.cases as f64 - THREE_SPHERE_CASES as f64, &[]);

    Ok(CriterionOutcome::new(
        5,
        "three-sphere inequality",
        format!(
            "{} cases, worst log margin {:.3e}; product form holds with mu_paper on {}/{} and mu_derived on {}/{} -> {}",
            verdict.cases, rep.worst_margin, verdict.mu_paper_holds, verdict.cases, verdict.mu_derived_holds, verdict.cases, which
        ),
        vec![rep, gate, formula, assign, enough],
    ))
}

pub fn criterion_6_identities(cfg: &SuiteConfig) -> Result<CriterionOutcome> {
    let grid = [0.3 * cfg.r0, 0.5 * cfg.r0, 0.7 * cfg.r0];
    let eps = 1.0 / 16.0;
    let mut worst = [0.0f64; 2];
    let mut reports = Vec::new();
    let mut rng = cfg.rng(600);
    let g = Fourier::random(&mut rng, 3);
    for level in 0..2u32 {
        let mesh = cfg.mesh(level)?;
        let mut parts = Vec::new();
        for alpha in [0.5, 1.0, 1.5] {
            let weight = WeightSpec::new(alpha, eps, 2, cfg.r0)?;
            let mode = ModeSolution::new(2, alpha, 1)?;
            for (label, data) in [("mode l=1", mode.as_source()), ("random", g.source())] {
                let u = solve(&mesh, &ProblemSpec::new(weight).with_boundary(data), cfg)?;
                let rep = derivative_identity_check(&Functionals::new(&mesh, &u, &weight)?, &grid)?;
                worst[level as usize] = worst[level as usize].max(-rep.worst_margin);
                parts.push((format!("alpha={alpha} {label}"), rep));
            }
        }
        reports.push(CheckReport::merge(format!("derivative_identities_h{level}"), crate::checks::IDENTITY_TOL, parts));
    }
    let mut refine = CheckReport::new("identity_refinement", 0.0);
    refine.push("defect halves", (0.5 * worst[0] - worst[1]) / worst[0], &[("h", worst[0]), ("h/2", worst[1])]);
    reports.push(refine);

    let mesh = cfg.mesh(0)?;
    let weight = WeightSpec::new(1.0, eps, 2, cfg.r0)?;
    let v = Field::interpolate(&mesh, |x| x[0] * x[0] + x[1] * x[1] + 0.3 * x[0])?;
    let control = derivative_identity_check(&Functionals::new(&mesh, &v, &weight)?, &grid)?;
    let mut neg = CheckReport::new("negative_control", 0.0);
    neg.push("non-harmonic field fails", if control.passed { -1.0 } else { 0.0 }, &[("defect", -control.worst_margin)]);
    reports.push(neg);

    Ok(CriterionOutcome::new(
        6,
        "derivative identities",
        format!(
            "worst relative defect {:.3e} at h, {:.3e} at h/2 (ratio {:.2}); negative control defect {:.3e}",
            worst[0],
            worst[1],
            worst[1] / worst[0],
            -control.worst_margin
        ),
        reports,
    ))
}

pub fn criterion_7_caccioppoli(cfg: &SuiteConfig) -> Result<CriterionOutcome> {
    let mesh = cfg.mesh(0)?;
    let r_list: Vec<f64> = [0.125, 0.25, 0.375, 0.5].iter().map(|r| r * cfg.r0).collect();
    let mut reports = Vec::new();
    let mut spreads = Vec::new();

    let weight1 = WeightSpec::degenerate(1.0, cfg.r0)?;
    let constant = caccioppoli_check(&Functionals::new(&mesh, &Field::constant(&mesh, 1.0), &weight1)?, &r_list)?;
    let mut closed = CheckReport::new("caccioppoli_constant_closed_form", CONSTANT_CACCIOPPOLI_TOL);
    for row in &constant.rows {
        let rel = (row.values["c_over_r2"] / (8.0 / 37.0) - 1.0).abs();
        closed.push(row.case.clone(), -rel, &[("c_over_r2", row.values["c_over_r2"])]);
    }
    spreads.push(("constant".to_string(), constant.fitted_constants["spread"]));
    reports.push(constant);
    reports.push(closed);

    let mut rng = cfg.rng(700);
    for alpha in [0.5, 1.0, 1.5] {
        let weight = WeightSpec::degenerate(alpha, cfg.r0)?;
        for l in [1u32, 2] {
            let mode = ModeSolution::new(2, alpha, l)?;
            let u = solve(&mesh, &ProblemSpec::new(weight).with_boundary(mode.as_source()), cfg)?;
            let mut rep = caccioppoli_check(&Functionals::new(&mesh, &u, &weight)?, &r_list)?;
            rep.name = format!("caccioppoli alpha={alpha} mode l={l}");
            spreads.push((rep.name.clone(), rep.fitted_constants["spread"]));
            reports.push(rep);
        }
        // low-mode random data around a nonzero mean
        let mut g = Fourier::random(&mut rng, 2);
        g.cos[0] = 1.0 + g.cos[0].abs();
        let u = solve(&mesh, &ProblemSpec::new(weight).with_boundary(g.source()), cfg)?;
        let mut rep = caccioppoli_check(&Functionals::new(&mesh, &u, &weight)?, &r_list)?;
        rep.name = format!("caccioppoli alpha={alpha} random");
        spreads.push((rep.name.clone(), rep.fitted_constants["spread"]));
        reports.push(rep);
    }
    let worst = spreads.iter().map(|s| s.1).fold(0.0, f64::max);
    Ok(CriterionOutcome::new(
        7,
        "Caccioppoli",
        format!("worst max/min of C_obs/r^2 {worst:.3} (limit 3); constant field within {:.2e} of 8/37", -reports[1].worst_margin),
        reports,
    ))
}

/// Boundary bump of half-width `width` centred at angle 0.
pub fn bump(width: f64) -> Source {
    Source::Function(ScalarFn::new(format!("bump({width})"), move |x| {
        let t = x[1].atan2(x[0]);
        let s = (t / width).abs();
        if s < 1.0 {
            (1.0 - s * s).powi(2)
        } else {
            0.0
        }
    }))
}

pub fn criterion_8_propagation(cfg: &SuiteConfig) -> Result<CriterionOutcome> {
    let alpha = 1.0;
    let r0 = 0.1 * cfg.r0;
    let omega = RegionSpec::ball([0.0, 0.0], r0);
    let target = RegionSpec::ball([3.0 * r0, 0.0], r0);
    let plan = plan_chain(cfg.r0, &omega, &target, r0, alpha)?;
    let mu1 = crate::propagation::chain_step_mu(r0)?;
    let mut exponent = CheckReport::new("composite_exponent", 0.0);
    let expect = mu1.powi(3) * (2.0 / 3.0);
    exponent.push(
        "3-step chain",
        if plan.steps() == 3 && plan.composite_mu == expect { 0.0 } else { -1.0 },
        &[("composite_mu", plan.composite_mu), ("expected", expect)],
    );

    // Gamma = left half of the boundary carries zero data; the bump lives on the right
    let base = cfg.mesh(0)?;
    let mesh = mark_boundary(&base, AngularInterval::new(0.5 * PI, 1.5 * PI)?)?;
    let weight = WeightSpec::degenerate(alpha, cfg.r0)?;
    let family: Vec<Field> = (0..10)
        .map(|i| {
            let width = 0.5 * PI * 0.8f64.powi(i);
            solve(&mesh, &ProblemSpec::new(weight).with_split_boundary(Source::Zero, bump(width)), cfg)
        })
        .collect::<Result<_>>()?;
    let prop = propagate_check(&mesh, &family, &weight, &plan, &omega, &target, None)?;
    let c_obs: Vec<f64> = prop.rows.iter().filter_map(|r| r.values.get("c_obs").copied()).collect();
    let spread = c_obs.iter().fold(0.0f64, |m, &c| m.max(c)) / c_obs.iter().fold(f64::INFINITY, |m, &c| m.min(c));
    let mut bounded = CheckReport::new("propagation_bounded", 0.0);
    bounded.push("family spread", (PROPAGATION_SPREAD / spread).ln(), &[("spread", spread)]);

    let constrained = ProblemSpec::new(weight)
        .with_split_boundary(Source::Zero, bump(0.5 * PI))
        .with_constraint(InteriorConstraint::Penalty {
            region: omega.clone(),
            strength: PENALTY_STRENGTH,
        });
    let probe = WucpProbe {
        mesh: &mesh,
        weight: &weight,
        omega: omega.clone(),
        target: target.clone(),
        family: &family,
        constrained: &constrained,
        mu: plan.composite_mu,
        omega_tol: OMEGA_FRACTION_TOL,
        positivity_floor: 1e-12,
    };
    let (probe_report, _) = wucp_probe(&probe, &cfg.solver)?;
    let (mut target_bound, wucp) = split_rows(probe_report, "wucp_target_bound", |case| case == "constrained target");
    target_bound.note("the penalized field is not a solution inside omega; its observed constant grows with the penalty strength");
    let summary = format!(
        "composite mu {:.6} (= mu1^3 * 2/3); C_obs in [{:.3e}, {:.3e}], scaling worst margin {:.2e}; constrained omega fraction {:.3e}, target fraction {:.3e}",
        plan.composite_mu,
        c_obs.iter().fold(f64::INFINITY, |m, &c| m.min(c)),
        c_obs.iter().fold(0.0f64, |m, &c| m.max(c)),
        prop.worst_margin,
        wucp.fitted_constants.get("constrained_omega_fraction").copied().unwrap_or(0.0),
        wucp.fitted_constants.get("constrained_target_fraction").copied().unwrap_or(0.0),
    );
    Ok(CriterionOutcome::new(8, "propagation and WUCP", summary, vec![exponent, prop, bounded, wucp, target_bound]))
}

/// Moves the rows selected by `pick` into a report of their own.
fn split_rows(rep: CheckReport, name: &str, pick: impl Fn(&str) -> bool) -> (CheckReport, CheckReport) {
    let mut picked = CheckReport::new(name, rep.tolerance);
    let mut rest = CheckReport::new(rep.name.clone(), rep.tolerance);
    for (label, value) in &rep.fitted_constants {
        rest.fit(label.clone(), *value);
        picked.fit(label.clone(), *value);
    }
    for n in &rep.notes {
        rest.note(n.clone());
    }
    for row in rep.rows {
        let values: Vec<(&str, f64)> = row.values.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        let into = if pick(&row.case) { &mut picked } else { &mut rest };
        into.push(row.case.clone(), row.margin, &values);
    }
    (picked, rest)
}

pub type CriterionFn = fn(&SuiteConfig) -> Result<CriterionOutcome>;

pub const CRITERIA: [(u8, CriterionFn); 8] = [
    (1, criterion_1_hardy),
    (2, criterion_2_convergence),
    (3, criterion_3_modes),
    (4, criterion_4_monotonicity),
    (5, criterion_5_three_sphere),
    (6, criterion_6_identities),
    (7, criterion_7_caccioppoli),
    (8, criterion_8_propagation),
];

/// Runs every criterion in order.
pub fn run_all(cfg: &SuiteConfig) -> Vec<(u8, Result<CriterionOutcome>)> {
    CRITERIA.iter().map(|(id, f)| (*id, f(cfg))).collect()
}
