//! Inequality and identity checks on computed fields.
//!
//! Every check produces a [`CheckReport`] whose rows carry a signed margin on
//! the scale the inequality is naturally stated on; a row passes when its
//! margin is at least `-tolerance`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::format::{real, ser_real, ser_real_map};
use crate::functionals::{Functionals, MASS_FLOOR};
use crate::mesh::{Mesh, RegionSpec};
use crate::quadrature::gauss_legendre_unit;
use crate::solver::{approximation_sequence, weighted_quadrature, ProblemSpec, SolverOptions};

pub const THREE_SPHERE_TOL: f64 = 2e-2;
pub const MONOTONICITY_TOL: f64 = 1e-2;
pub const IDENTITY_TOL: f64 = 5e-2;
/// Allowed max/min spread of `C_obs(r) / r^2`.
pub const CACCIOPPOLI_SPREAD: f64 = 3.0;
/// Relative slack for "nonincreasing" across an approximation sequence.
pub const DECAY_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub case: String,
    #[serde(serialize_with = "ser_real")]
    pub margin: f64,
    pub pass: bool,
    #[serde(serialize_with = "ser_real_map")]
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    #[serde(serialize_with = "ser_real")]
    pub worst_margin: f64,
    #[serde(serialize_with = "ser_real")]
    pub tolerance: f64,
    #[serde(serialize_with = "ser_real_map")]
    pub fitted_constants: BTreeMap<String, f64>,
    pub rows: Vec<CheckRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: true,
            worst_margin: 0.0,
            tolerance,
            fitted_constants: BTreeMap::new(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, case: impl Into<String>, margin: f64, values: &[(&str, f64)]) {
        let pass = margin >= -self.tolerance;
        if self.rows.is_empty() || margin < self.worst_margin || margin.is_nan() {
            self.worst_margin = margin;
        }
        self.passed &= pass;
        self.rows.push(CheckRow {
            case: case.into(),
            margin,
            pass,
            values: values.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        });
    }

    pub fn fit(&mut self, label: impl Into<String>, value: f64) {
        self.fitted_constants.insert(label.into(), value);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// Concatenates reports of one kind; cases are prefixed by their origin.
    pub fn merge(name: impl Into<String>, tolerance: f64, parts: impl IntoIterator<Item = (String, CheckReport)>) -> Self {
        let mut out = Self::new(name, tolerance);
        for (prefix, part) in parts {
            for row in part.rows {
                let values: Vec<(&str, f64)> = row.values.iter().map(|(k, v)| (k.as_str(), *v)).collect();
                out.push(format!("{prefix}/{}", row.case), row.margin, &values);
            }
            for (k, v) in part.fitted_constants {
                out.fit(format!("{prefix}/{k}"), v);
            }
            out.notes.extend(part.notes.into_iter().map(|n| format!("{prefix}: {n}")));
        }
        out
    }

    /// Re-grades every row against a new tolerance.
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        for row in self.rows.iter_mut() {
            row.pass = row.margin >= -tolerance;
        }
        self.passed = self.rows.iter().all(|r| r.pass);
        self
    }

    /// One-line summary in the driver's output contract.
    pub fn summary_line(&self) -> String {
        format!(
            "CHECK {} {} margin={}",
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            real(self.worst_margin)
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// CSV twin with columns `case,margin,pass`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["case", "margin", "pass"])?;
        for row in &self.rows {
            w.write_record([row.case.as_str(), &real(row.margin), if row.pass { "true" } else { "false" }])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `<stem>.json` and `<stem>.csv` into `dir`.
    pub fn write_files(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::write(dir.join(format!("{stem}.json")), self.to_json()?)?;
        self.write_csv(std::fs::File::create(dir.join(format!("{stem}.csv")))?)
    }
}

/// The two candidate exponents for the product form of the three-sphere
/// inequality; they sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuExponents {
    /// `(r1^-a - r2^-a) / (r1^-a - r3^-a)`.
    pub mu_paper: f64,
    /// `(r2^-a - r3^-a) / (r1^-a - r3^-a)`, the weight on `H(r1)` that the
    /// log-difference-quotient form actually implies.
    pub mu_derived: f64,
}

pub fn mu_exponent(r1: f64, r2: f64, r3: f64, alpha: f64) -> Result<MuExponents> {
    if !(0.0 < r1 && r1 < r2 && r2 < r3 && r3.is_finite()) {
        return Err(invalid(format!("radii must satisfy 0 < r1 < r2 < r3, got ({r1}, {r2}, {r3})")));
    }
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(invalid(format!("alpha must lie in (0,2), got {alpha}")));
    }
    let (a, b) = gaps(r1, r2, r3, alpha);
    Ok(MuExponents {
        mu_paper: a / (a + b),
        mu_derived: b / (a + b),
    })
}

/// `(r1^-a - r2^-a, r2^-a - r3^-a)`.
fn gaps(r1: f64, r2: f64, r3: f64, alpha: f64) -> (f64, f64) {
    let p = |r: f64| r.powf(-alpha);
    (p(r1) - p(r2), p(r2) - p(r3))
}

/// `(1/2) int_{ra}^{rb} R / (r H(r)) dr`, by 6-point Gauss-Legendre.
fn remainder_correction(f: &Functionals, r_eps: f64, ra: f64, rb: f64) -> Result<f64> {
    if r_eps == 0.0 {
        return Ok(0.0);
    }
    let (x, w) = gauss_legendre_unit(6);
    let mut s = 0.0;
    for (t, wt) in x.iter().zip(&w) {
        let r = ra + t * (rb - ra);
        s += wt * (rb - ra) * r_eps / (r * f.sphere_mass(r)?);
    }
    Ok(0.5 * s)
}

/// Log-difference-quotient form of the three-sphere inequality at one triple,
/// with the product form evaluated under both exponent assignments.
///
/// For a regularized weight the remainder corrections are included on both
/// sides. Harmonicity is a precondition the caller gates on.
pub fn three_sphere_check(f: &Functionals, r1: f64, r2: f64, r3: f64) -> Result<CheckReport> {
    let alpha = f.weight.alpha();
    let mu = mu_exponent(r1, r2, r3, alpha)?;
    let eps = f.weight.epsilon();
    if eps > 0.0 && r1 <= 2.0 * eps {
        return Err(invalid(format!("r1 = {r1} must exceed 2 eps = {}", 2.0 * eps)));
    }
    let case = format!("({},{},{})", r1, r2, r3);
    let mut rep = CheckReport::new("three_sphere", THREE_SPHERE_TOL);
    rep.fit("mu_paper", mu.mu_paper);
    rep.fit("mu_derived", mu.mu_derived);
    let h = [f.sphere_mass(r1)?, f.sphere_mass(r2)?, f.sphere_mass(r3)?];
    if h.iter().any(|&x| x < MASS_FLOOR) {
        rep.note(format!("degenerate at {case}: H vanishes"));
        rep.push(case, 0.0, &[("degenerate", 1.0)]);
        return Ok(rep);
    }
    let r_eps = if eps > 0.0 { f.remainder()?.value } else { 0.0 };
    let (a, b) = gaps(r1, r2, r3, alpha);
    let lhs = ((h[1] / h[0]).ln() + remainder_correction(f, r_eps, r1, r2)?) / a;
    let rhs = ((h[2] / h[1]).ln() + remainder_correction(f, r_eps, r2, r3)?) / b;
    let product = |m: f64| m * h[0].ln() + (1.0 - m) * h[2].ln() - h[1].ln();
    rep.push(
        case,
        rhs - lhs,
        &[
            ("lhs", lhs),
            ("rhs", rhs),
            ("product_margin_mu_paper", product(mu.mu_paper)),
            ("product_margin_mu_derived", product(mu.mu_derived)),
        ],
    );
    Ok(rep)
}

/// Which product-form assignment held on every non-degenerate row of a
/// (possibly merged) three-sphere report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssignmentVerdict {
    pub cases: usize,
    pub mu_paper_holds: usize,
    pub mu_derived_holds: usize,
}

pub fn assignment_verdict(report: &CheckReport, tol: f64) -> AssignmentVerdict {
    let mut v = AssignmentVerdict {
        cases: 0,
        mu_paper_holds: 0,
        mu_derived_holds: 0,
    };
    for row in &report.rows {
        let (Some(p), Some(d)) = (row.values.get("product_margin_mu_paper"), row.values.get("product_margin_mu_derived")) else {
            continue;
        };
        v.cases += 1;
        v.mu_paper_holds += usize::from(*p >= -tol);
        v.mu_derived_holds += usize::from(*d >= -tol);
    }
    v
}

/// Below this `r^alpha Phi` is rounding noise of a constant field.
const PHI_FLOOR: f64 = 1e-10;

/// `r^alpha Phi(r)` nondecreasing along `r_grid`, relative to its largest value.
pub fn frequency_monotonicity_check(f: &Functionals, r_grid: &[f64]) -> Result<CheckReport> {
    check_grid(r_grid, 2.0 * f.weight.epsilon())?;
    let alpha = f.weight.alpha();
    let g: Vec<f64> = r_grid
        .iter()
        .map(|&r| Ok(r.powf(alpha) * f.frequency(r)?))
        .collect::<Result<_>>()?;
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rep = CheckReport::new("frequency_monotonicity", MONOTONICITY_TOL);
    rep.fit("max_r_alpha_phi", scale);
    for j in 0..g.len().saturating_sub(1) {
        let margin = if scale > PHI_FLOOR { (g[j + 1] - g[j]) / scale } else { 0.0 };
        rep.push(
            format!("{}->{}", r_grid[j], r_grid[j + 1]),
            margin,
            &[("r", r_grid[j + 1]), ("r_alpha_phi", g[j + 1])],
        );
    }
    Ok(rep)
}

fn check_grid(r_grid: &[f64], lower: f64) -> Result<()> {
    if r_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("radius grid must be strictly increasing"));
    }
    if let Some(&r) = r_grid.first() {
        if r <= lower {
            return Err(invalid(format!("radius grid must start above {lower}, got {r}")));
        }
    }
    Ok(())
}

/// Relative step of the central differences for `H'` and `D'`.
const FD_STEP: f64 = 1e-2;

/// The mass-derivative identity `r H' = (N+alpha) H + D - R/2`, the virial form
/// `D = 2 int w v grad v . y`, and `D' = 2 r int_{B_r} w |grad v|^2`, at each
/// radius. Margins are minus the relative defects.
pub fn derivative_identity_check(f: &Functionals, r_grid: &[f64]) -> Result<CheckReport> {
    let eps = f.weight.epsilon();
    check_grid(r_grid, 2.0 * eps)?;
    let n_alpha = f.weight.dimension() as f64 + f.weight.alpha();
    let r_eps = if eps > 0.0 { f.remainder()?.value } else { 0.0 };
    let r0 = f.mesh.radius();
    let mut rep = CheckReport::new("derivative_identities", IDENTITY_TOL);
    let grads: Vec<[f64; 2]> = (0..f.mesh.num_triangles()).map(|t| f.field.gradient(f.mesh, t)).collect();
    for &r in r_grid {
        let delta = (FD_STEP * r).min(0.5 * (r0 - r));
        if !(delta > 0.0) {
            return Err(invalid(format!("radius {r} leaves no room for a central difference inside R0 = {r0}")));
        }
        let h = f.sphere_mass(r)?;
        if h < MASS_FLOOR {
            rep.push(format!("r={r}"), 0.0, &[("degenerate", 1.0)]);
            continue;
        }
        let dh = (f.sphere_mass(r + delta)? - f.sphere_mass(r - delta)?) / (2.0 * delta);
        let d = f.dirichlet_kernel(r)?;
        let dd = (f.dirichlet_kernel(r + delta)? - f.dirichlet_kernel(r - delta)?) / (2.0 * delta);
        let e = f.energy_in_ball(r)?;

        let mass_defect = (r * dh - n_alpha * h - d + 0.5 * r_eps).abs() / (r * dh).abs().max(MASS_FLOOR);

        let q = weighted_quadrature(f.mesh, &[RegionSpec::origin_ball(r)], f.weight, f.opts)?;
        let virial = 2.0
            * q.integrate(|p| {
                let g = grads[p.triangle];
                f.weight.value(&p.x) * f.field.eval(f.mesh, p) * (g[0] * p.x[0] + g[1] * p.x[1])
            });
        let virial_defect = (d - virial).abs() / d.abs().max(virial.abs()).max(1e-12 * h);

        let kernel_defect = (dd - 2.0 * r * e).abs() / (2.0 * r * e).max(1e-12 * h / r);

        let worst = mass_defect.max(virial_defect).max(kernel_defect);
        rep.push(
            format!("r={r}"),
            -worst,
            &[
                ("mass_identity_defect", mass_defect),
                ("virial_identity_defect", virial_defect),
                ("kernel_derivative_defect", kernel_defect),
                ("H", h),
                ("D", d),
                ("R_eps", r_eps),
            ],
        );
    }
    Ok(rep)
}

/// `C_obs(r) = r^2 H(r/2) / int_{B_r \ B_{3r/4}} u^2 w` per radius; the rows
/// test that `C_obs(r)/r^2` varies by at most [`CACCIOPPOLI_SPREAD`].
pub fn caccioppoli_check(f: &Functionals, r_list: &[f64]) -> Result<CheckReport> {
    let r0 = f.mesh.radius();
    if let Some(&r) = r_list.iter().find(|&&r| !(r > 0.0 && r <= r0)) {
        return Err(invalid(format!("Caccioppoli radius {r} outside (0, {r0}]")));
    }
    let mut rep = CheckReport::new("caccioppoli", CACCIOPPOLI_SPREAD.ln());
    let mut c = Vec::with_capacity(r_list.len());
    for &r in r_list {
        let inner = f.sphere_mass(0.5 * r)?;
        let ring = f.mass_in(&[RegionSpec::annulus([0.0, 0.0], 0.75 * r, r)])?;
        c.push(if ring < MASS_FLOOR { None } else { Some((r, r * r * inner / ring, inner, ring)) });
    }
    let live: Vec<_> = c.iter().flatten().copied().collect();
    if live.is_empty() {
        rep.note("annulus integral vanishes at every radius: vacuous");
        for &r in r_list {
            rep.push(format!("r={r}"), 0.0, &[("degenerate", 1.0)]);
        }
        return Ok(rep);
    }
    let ratio = |&(r, cobs, _, _): &(f64, f64, f64, f64)| cobs / (r * r);
    let cmin = live.iter().map(ratio).fold(f64::INFINITY, f64::min);
    let cmax = live.iter().map(ratio).fold(0.0, f64::max);
    rep.fit("sup_c_obs", live.iter().map(|x| x.1).fold(0.0, f64::max));
    rep.fit("c_over_r2_min", cmin);
    rep.fit("c_over_r2_max", cmax);
    rep.fit("spread", cmax / cmin);
    for (k, &r) in r_list.iter().enumerate() {
        match c[k] {
            None => rep.push(format!("r={r}"), 0.0, &[("degenerate", 1.0)]),
            Some(x) => {
                let cr = ratio(&x);
                rep.push(
                    format!("r={r}"),
                    -(cr / cmin).ln(),
                    &[("c_obs", x.1), ("c_over_r2", cr), ("inner_mass", x.2), ("annulus_mass", x.3)],
                );
            }
        }
    }
    Ok(rep)
}

/// Runs the approximation sequence and checks that `R_k` and the `B_eta` mass
/// gap `|int_{B_eta} w_k u_k^2 - int_{B_eta} w u_0^2|` do not increase beyond
/// [`DECAY_FLOOR`] (relative to their first values).
pub fn remainder_decay_check(mesh: &Mesh, problem: &ProblemSpec, ks: &[u32], eta: f64, opts: &SolverOptions) -> Result<CheckReport> {
    if let Some(&k) = ks.first() {
        if !(eta > 2.0 / k as f64) {
            return Err(invalid(format!("eta = {eta} must exceed 2/k = {}", 2.0 / k as f64)));
        }
    }
    let seq = approximation_sequence(mesh, problem, ks, opts)?;
    let base = Functionals::new(mesh, &seq.base, &problem.weight)?.with_options(opts.quadrature);
    let m0 = base.sphere_mass(eta)?;
    let mut rems = Vec::with_capacity(ks.len());
    let mut gaps = Vec::with_capacity(ks.len());
    let mut rep = CheckReport::new("remainder_decay", DECAY_FLOOR);
    rep.fit("base_mass_eta", m0);
    for (i, &k) in ks.iter().enumerate() {
        let w = problem.weight.with_epsilon(1.0 / k as f64)?;
        let fk = Functionals::new(mesh, &seq.fields[i], &w)?.with_options(opts.quadrature);
        let r = fk.remainder()?;
        let gap = (fk.sphere_mass(eta)? - m0).abs();
        rep.fit(format!("R[k={k}]"), r.value);
        rep.fit(format!("mass_gap[k={k}]"), gap);
        rep.fit(format!("l2_distance[k={k}]"), seq.distances[i]);
        rems.push(r.value);
        gaps.push(gap);
    }
    let rel = |a: f64, b: f64, scale: f64| if scale > 0.0 { (a - b) / scale } else { 0.0 };
    for i in 1..ks.len() {
        let case = format!("k={}->{}", ks[i - 1], ks[i]);
        rep.push(format!("remainder {case}"), rel(rems[i - 1], rems[i], rems[0]), &[("R", rems[i])]);
        rep.push(format!("mass_gap {case}"), rel(gaps[i - 1], gaps[i], gaps[0].max(1e-12 * m0)), &[("gap", gaps[i])]);
    }
    Ok(rep)
}
