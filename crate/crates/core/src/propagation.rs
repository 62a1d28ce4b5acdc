//! Chains of balls from an observation region to a target, composite
//! three-ball exponents, and quantitative unique-continuation probes.

use std::f64::consts::PI;

use serde::Serialize;

use crate::checks::{mu_exponent, CheckReport};
use crate::error::{invalid, Error, Result};
use crate::format::{ser_opt_real, ser_point, ser_points, ser_real, ser_reals};
use crate::functionals::Functionals;
use crate::mesh::{Mesh, Point, RegionSpec};
use crate::solver::{solve_dirichlet, Field, ProblemSpec, SolverOptions};
use crate::weights::WeightSpec;

/// Angles sampled on `dB(0, 5/2 r0)` when locating the annulus maximizer.
pub const MAXIMIZER_SAMPLES: usize = 256;

/// Allowed relative change of `C_obs` under `u -> 2u`.
pub const SCALING_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseTag {
    OriginInsideOmega,
    OriginOutsideOmega,
}

/// The origin step of a plan whose observation region avoids the origin:
/// `B(0, 2 r0)` is bounded by the annulus `5/2 r0 < |x| < 3 r0`, the annulus
/// by `cover_count` balls `B(q, r0)` centered on `|q| = 5/2 r0`, and those by
/// the best one, at `maximizer`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnulusStep {
    #[serde(serialize_with = "ser_real")]
    pub inner: f64,
    #[serde(serialize_with = "ser_real")]
    pub outer: f64,
    #[serde(serialize_with = "ser_point")]
    pub maximizer: Point,
    /// True once the maximizer was located on an actual field.
    pub sampled: bool,
    pub cover_count: usize,
    /// Chain from the start of the plan to the maximizer.
    #[serde(serialize_with = "ser_points")]
    pub route: Vec<Point>,
    #[serde(serialize_with = "ser_real")]
    pub route_mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainPlan {
    #[serde(serialize_with = "ser_real")]
    pub r0: f64,
    #[serde(serialize_with = "ser_real")]
    pub alpha: f64,
    #[serde(serialize_with = "ser_points")]
    pub centers: Vec<Point>,
    pub case_tag: CaseTag,
    #[serde(serialize_with = "ser_reals")]
    pub per_step_mu: Vec<f64>,
    /// Exponent of the degenerate step at the origin ball (origin inside omega).
    #[serde(serialize_with = "ser_opt_real")]
    pub degenerate_mu: Option<f64>,
    #[serde(serialize_with = "ser_real")]
    pub composite_mu: f64,
    pub annulus_step: Option<AnnulusStep>,
    /// Whether the chain ends in the annulus step rather than at the target.
    pub ends_at_origin: bool,
}

impl ChainPlan {
    /// Largest `|q_{j+1} - q_j|`; nesting needs it `<= r0`.
    pub fn max_gap(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for w in self.centers.windows(2) {
            worst = worst.max(dist(w[0], w[1]));
        }
        if let Some(a) = &self.annulus_step {
            for w in a.route.windows(2) {
                worst = worst.max(dist(w[0], w[1]));
            }
        }
        worst
    }

    pub fn steps(&self) -> usize {
        self.centers.len().saturating_sub(1)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn norm(a: Point) -> f64 {
    dist(a, [0.0, 0.0])
}

/// Working exponent of the non-degenerate three-ball step: the harmonic
/// (Hadamard) value `log(r3/r2) / log(r3/r1)` on the small ball.
pub fn hadamard_exponent(r1: f64, r2: f64, r3: f64) -> Result<f64> {
    if !(0.0 < r1 && r1 < r2 && r2 < r3) {
        return Err(invalid(format!("radii must satisfy 0 < r1 < r2 < r3, got ({r1}, {r2}, {r3})")));
    }
    Ok((r3 / r2).ln() / (r3 / r1).ln())
}

/// Exponent of one nested chain step with balls `(r0, 2 r0, 4 r0)`.
pub fn chain_step_mu(r0: f64) -> Result<f64> {
    hadamard_exponent(r0, 2.0 * r0, 4.0 * r0)
}

/// Exponent of the origin-ball step: the symmetric three-sphere exponent
/// `(4^a - 2^a) / (4^a - 1)`.
pub fn origin_step_mu(alpha: f64) -> Result<f64> {
    Ok(mu_exponent(0.5, 1.0, 2.0, alpha)?.mu_paper)
}

fn ball_of(region: &RegionSpec, what: &str) -> Result<(Point, f64)> {
    region.validate()?;
    match *region {
        RegionSpec::Ball { center, radius } => Ok((center, radius)),
        _ => Err(invalid(format!("{what} must be a ball, got {region}"))),
    }
}

/// Evenly spaced centers from `a` to `b` with gaps at most `step`.
fn straight_chain(a: Point, b: Point, step: f64) -> Vec<Point> {
    let d = dist(a, b);
    let k = (d / step - 1e-12).ceil().max(0.0) as usize;
    if k == 0 {
        return vec![a];
    }
    (0..=k)
        .map(|j| {
            let t = j as f64 / k as f64;
            [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
        })
        .collect()
}

/// Smallest number of equally spaced balls `B(q, r0)`, `|q| = 5/2 r0`, whose
/// union contains the sampled annulus `5/2 r0 <= |x| <= 3 r0`.
fn annulus_cover_count(r0: f64) -> usize {
    let rc = 2.5 * r0;
    for n in 3..1000 {
        let sector = 2.0 * PI / n as f64;
        let covered = (0..=16).all(|i| {
            let rho = r0 * (2.5 + 0.5 * i as f64 / 16.0);
            (0..=64).all(|j| {
                let theta = sector * j as f64 / 64.0;
                let x = [rho * theta.cos(), rho * theta.sin()];
                let near = [rc, 0.0];
                let next = [rc * sector.cos(), rc * sector.sin()];
                dist(x, near) <= r0 || dist(x, next) <= r0
            })
        });
        if covered {
            return n;
        }
    }
    unreachable!("an annulus of width r0/2 is covered by finitely many r0-balls")
}

/// Plans a straight-line chain of balls of radius `r0` in the disc of radius
/// `domain_radius` from `omega` to `target`.
///
/// With the origin in `omega` the chain starts at the origin and the first
/// application is the degenerate three-sphere step. Otherwise it starts at the
/// center of `omega`; if the target reaches into `B(0, 2 r0)` the chain ends at
/// the annulus maximizer and the origin ball is handled by the annulus step.
/// Until a field is supplied (see [`locate_annulus_maximizer`]) the maximizer
/// is the point of `|q| = 5/2 r0` facing the start.
pub fn plan_chain(domain_radius: f64, omega: &RegionSpec, target: &RegionSpec, r0: f64, alpha: f64) -> Result<ChainPlan> {
    plan_with_maximizer(domain_radius, omega, target, r0, alpha, None)
}

fn plan_with_maximizer(
    domain_radius: f64,
    omega: &RegionSpec,
    target: &RegionSpec,
    r0: f64,
    alpha: f64,
    maximizer: Option<Point>,
) -> Result<ChainPlan> {
    if !(r0 > 0.0 && r0 < domain_radius / 8.0) {
        return Err(Error::InfeasibleGeometry(format!("r0 = {r0} must lie in (0, R0/8) with R0 = {domain_radius}")));
    }
    let mu2 = origin_step_mu(alpha)?;
    let (wc, wr) = ball_of(omega, "omega")?;
    let (tc, tr) = ball_of(target, "target")?;
    for (name, region) in [("omega", omega), ("target", target)] {
        if !region.inside_disc(domain_radius) {
            return Err(Error::RegionOutsideDomain {
                region: format!("{name} {region}"),
                domain_radius,
            });
        }
    }
    let mu1 = chain_step_mu(r0)?;
    let fits = |q: Point| norm(q) + 2.0 * r0 <= domain_radius * (1.0 + 1e-12);
    let touching = dist(wc, tc) <= wr + tr;

    if norm(wc) < wr {
        if wr < r0 {
            return Err(Error::InfeasibleGeometry(format!("B(0, r0) is not inside omega (radius {wr} < r0 = {r0})")));
        }
        let centers = if touching { vec![[0.0, 0.0]] } else { straight_chain([0.0, 0.0], tc, r0) };
        if let Some(q) = centers.iter().find(|&&q| !fits(q)) {
            return Err(Error::InfeasibleGeometry(format!("B({q:?}, 2 r0) leaves the domain")));
        }
        let k = centers.len() - 1;
        let per_step_mu = vec![mu1; k];
        let (degenerate_mu, composite_mu) = if k == 0 { (None, 1.0) } else { (Some(mu2), mu1.powi(k as i32) * mu2) };
        return Ok(ChainPlan {
            r0,
            alpha,
            centers,
            case_tag: CaseTag::OriginInsideOmega,
            per_step_mu,
            degenerate_mu,
            composite_mu,
            annulus_step: None,
            ends_at_origin: false,
        });
    }

    if norm(wc) < 2.0 * r0 {
        return Err(Error::InfeasibleGeometry(format!(
            "omega center {wc:?} is closer than 2 r0 to the origin, so B(q0, r0) meets B(0, r0)"
        )));
    }
    let rc = 2.5 * r0;
    let maximizer = maximizer.unwrap_or([rc * wc[0] / norm(wc), rc * wc[1] / norm(wc)]);
    let route = straight_chain(wc, maximizer, r0);
    let route_mu = mu1.powi(route.len() as i32 - 1);
    let ends_at_origin = norm(tc) - tr < 2.0 * r0;
    let centers = if ends_at_origin {
        route.clone()
    } else if touching {
        vec![wc]
    } else {
        straight_chain(wc, tc, r0)
    };
    if let Some(q) = centers.iter().chain(&route).find(|&&q| !fits(q)) {
        return Err(Error::InfeasibleGeometry(format!("B({q:?}, 2 r0) leaves the domain")));
    }
    let k = centers.len() - 1;
    Ok(ChainPlan {
        r0,
        alpha,
        case_tag: CaseTag::OriginOutsideOmega,
        per_step_mu: vec![mu1; k],
        degenerate_mu: None,
        composite_mu: mu1.powi(k as i32),
        annulus_step: Some(AnnulusStep {
            inner: rc,
            outer: 3.0 * r0,
            maximizer,
            sampled: false,
            cover_count: annulus_cover_count(r0),
            route,
            route_mu,
        }),
        ends_at_origin,
        centers,
    })
}

/// Angle in `[0, 2 pi)` maximizing `int_{B(q, r0) cap A} v^2 w` over
/// `q = 5/2 r0 (cos t, sin t)`, sampled at [`MAXIMIZER_SAMPLES`] angles;
/// ties go to the smallest angle.
pub fn locate_annulus_maximizer(f: &Functionals, r0: f64) -> Result<(Point, f64)> {
    let ring = RegionSpec::annulus([0.0, 0.0], 2.5 * r0, 3.0 * r0);
    let mut best = (f64::NEG_INFINITY, [0.0, 0.0]);
    for j in 0..MAXIMIZER_SAMPLES {
        let t = 2.0 * PI * j as f64 / MAXIMIZER_SAMPLES as f64;
        let q = [2.5 * r0 * t.cos(), 2.5 * r0 * t.sin()];
        let v = match f.mass_in(&[RegionSpec::ball(q, r0), ring.clone()]) {
            Ok(v) => v,
            Err(Error::EmptyRegion(_)) => 0.0,
            Err(e) => return Err(e),
        };
        if v > best.0 {
            best = (v, q);
        }
    }
    Ok((best.1, best.0))
}

/// Re-plans with the annulus maximizer of `f` (no-op for origin-inside plans).
pub fn plan_chain_for_field(f: &Functionals, omega: &RegionSpec, target: &RegionSpec, r0: f64) -> Result<ChainPlan> {
    let domain = f.mesh.radius();
    let plan = plan_chain(domain, omega, target, r0, f.weight.alpha())?;
    if plan.case_tag == CaseTag::OriginInsideOmega {
        return Ok(plan);
    }
    let (q, _) = locate_annulus_maximizer(f, r0)?;
    let mut plan = plan_with_maximizer(domain, omega, target, r0, f.weight.alpha(), Some(q))?;
    if let Some(a) = plan.annulus_step.as_mut() {
        a.sampled = true;
    }
    Ok(plan)
}

/// `(A, B, E) = (int_D u^2 w, int_omega u^2 w, int_Omega u^2 w)`.
pub fn observation_masses(f: &Functionals, omega: &RegionSpec, target: &RegionSpec) -> Result<[f64; 3]> {
    Ok([f.mass_in(std::slice::from_ref(target))?, f.mass_in(std::slice::from_ref(omega))?, f.mass_in(&[RegionSpec::Domain])?])
}

/// `A / (B^mu E^(1-mu))`, or `None` when `E = 0`.
pub fn observed_constant(masses: [f64; 3], mu: f64) -> Option<f64> {
    let [a, b, e] = masses;
    if e <= 0.0 {
        return None;
    }
    if a == 0.0 {
        return Some(0.0);
    }
    Some(a / (b.powf(mu) * e.powf(1.0 - mu)))
}

/// Observed constants of the interpolation inequality across a family.
///
/// Each member contributes a bound row, `ln(C_limit / C_obs)` with `C_limit`
/// either `c_max` or the family maximum, and a scaling row comparing `u` with
/// `2u`.
pub fn propagate_check(
    mesh: &Mesh,
    family: &[Field],
    weight: &WeightSpec,
    plan: &ChainPlan,
    omega: &RegionSpec,
    target: &RegionSpec,
    c_max: Option<f64>,
) -> Result<CheckReport> {
    let mu = plan.composite_mu;
    let mut rep = CheckReport::new("propagate", 0.0);
    rep.fit("mu", mu);
    let mut observed = Vec::with_capacity(family.len());
    for u in family {
        let f = Functionals::new(mesh, u, weight)?;
        let m = observation_masses(&f, omega, target)?;
        let doubled = u.scaled(2.0);
        let m2 = observation_masses(&Functionals::new(mesh, &doubled, weight)?, omega, target)?;
        observed.push((m, observed_constant(m, mu), observed_constant(m2, mu)));
    }
    let fitted = observed.iter().filter_map(|o| o.1).fold(0.0, f64::max);
    let limit = c_max.unwrap_or(fitted);
    rep.fit("c_fit", fitted);
    rep.fit("c_limit", limit);
    for (i, (m, c, c2)) in observed.iter().enumerate() {
        match (c, c2) {
            (Some(c), Some(c2)) => {
                let bound = if *c == 0.0 { 0.0 } else { (limit / c).ln() };
                rep.push(format!("member {i}"), bound, &[("A", m[0]), ("B", m[1]), ("E", m[2]), ("c_obs", *c)]);
                let defect = if *c == 0.0 { 0.0 } else { (c2 / c - 1.0).abs() };
                rep.push(format!("member {i} scaling"), 1.0 - defect / SCALING_TOL, &[("defect", defect)]);
            }
            _ => {
                rep.note(format!("member {i}: E = 0, vacuous"));
                rep.push(format!("member {i}"), 0.0, &[("degenerate", 1.0)]);
            }
        }
    }
    Ok(rep)
}

/// Checks the product form `A <= C B^mu E^(1-mu)` against its rearrangement
/// `A <= C^(1/mu) B (E/A)^((1-mu)/mu)` and the two-parameter form
/// `A <= C^(1/mu) eps^(-(1-mu)/mu) B + eps E` at `eps` and at `eps = A/(2E)`.
///
/// `c` defaults to the observed constant `A / (B^mu E^(1-mu))`. Margins are
/// log ratios of the right-hand to the left-hand side.
pub fn epsilon_tradeoff(a: f64, b: f64, e: f64, mu: f64, c: Option<f64>, eps: f64) -> Result<CheckReport> {
    if !(a >= 0.0 && b >= 0.0 && e >= 0.0) {
        return Err(Error::Domain(format!("masses must be nonnegative, got A={a}, B={b}, E={e}")));
    }
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::Domain(format!("mu must lie in (0,1), got {mu}")));
    }
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    let mut rep = CheckReport::new("epsilon_tradeoff", 1e-12);
    if a == 0.0 {
        rep.note("A = 0: every form holds");
        for case in ["product", "rearranged", "eps_form", "eps_form_at_A_over_2E"] {
            rep.push(case, 0.0, &[]);
        }
        return Ok(rep);
    }
    let c = match c {
        Some(c) => c,
        None => observed_constant([a, b, e], mu).ok_or_else(|| Error::Domain("E = 0 with A > 0".into()))?,
    };
    let p = (1.0 - mu) / mu;
    let c_eps = c.powf(1.0 / mu);
    rep.fit("c_product", c);
    rep.fit("c_eps_form", c_eps);
    let eps_form = |t: f64| c_eps * t.powf(-p) * b + t * e;
    let log_ratio = |rhs: f64| (rhs / a).ln();
    rep.push("product", log_ratio(c * b.powf(mu) * e.powf(1.0 - mu)), &[]);
    rep.push("rearranged", log_ratio(c_eps * b * (e / a).powf(p)), &[]);
    rep.push("eps_form", log_ratio(eps_form(eps)), &[("eps", eps)]);
    let half = 0.5 * a / e;
    rep.push("eps_form_at_A_over_2E", log_ratio(eps_form(half)), &[("eps", half)]);
    Ok(rep)
}

/// Two-sided unique-continuation probe.
#[derive(Debug, Clone)]
pub struct WucpProbe<'a> {
    pub mesh: &'a Mesh,
    pub weight: &'a WeightSpec,
    pub omega: RegionSpec,
    pub target: RegionSpec,
    /// Genuine solutions: their mass on omega must stay away from zero.
    pub family: &'a [Field],
    /// Problem whose constraint forces `u ~ 0` on omega.
    pub constrained: &'a ProblemSpec,
    pub mu: f64,
    /// Largest admissible `int_omega u^2 w / int u^2 w` for the constrained solve.
    pub omega_tol: f64,
    /// Smallest admissible omega mass fraction across the family.
    pub positivity_floor: f64,
}

/// Rows: per family member `ln(B/E / floor)`; for the constrained solve
/// `ln(omega_tol / (B/E))` and `ln(C_fit B^mu E^(1-mu) / A)` with `C_fit` the
/// family's largest observed constant.
pub fn wucp_probe(p: &WucpProbe, opts: &SolverOptions) -> Result<(CheckReport, Field)> {
    let mut rep = CheckReport::new("wucp", 0.0);
    rep.fit("mu", p.mu);
    let mut c_fit: f64 = 0.0;
    let mut min_fraction = f64::INFINITY;
    for (i, u) in p.family.iter().enumerate() {
        let m = observation_masses(&Functionals::new(p.mesh, u, p.weight)?, &p.omega, &p.target)?;
        if m[2] == 0.0 {
            rep.push(format!("member {i}"), 0.0, &[("degenerate", 1.0)]);
            continue;
        }
        let fraction = m[1] / m[2];
        min_fraction = min_fraction.min(fraction);
        c_fit = c_fit.max(observed_constant(m, p.mu).unwrap_or(0.0));
        rep.push(format!("member {i}"), (fraction / p.positivity_floor).ln(), &[("omega_fraction", fraction)]);
    }
    rep.fit("c_fit", c_fit);
    rep.fit("min_omega_fraction", min_fraction);

    let sol = solve_dirichlet(p.mesh, p.constrained, opts)?;
    let m = observation_masses(&Functionals::new(p.mesh, &sol.field, p.weight)?, &p.omega, &p.target)?;
    let [a, b, e] = m;
    if e == 0.0 {
        rep.note("constrained solution vanishes identically");
        rep.push("constrained omega", 0.0, &[("degenerate", 1.0)]);
        return Ok((rep, sol.field));
    }
    let fraction = b / e;
    rep.fit("constrained_omega_fraction", fraction);
    rep.fit("constrained_target_fraction", a / e);
    rep.push(
        "constrained omega",
        if fraction == 0.0 { f64::MAX.ln() } else { (p.omega_tol / fraction).ln() },
        &[("omega_fraction", fraction)],
    );
    let bound = c_fit * b.powf(p.mu) * e.powf(1.0 - p.mu);
    rep.push(
        "constrained target",
        if a == 0.0 { 0.0 } else { (bound / a).ln() },
        &[("A", a), ("bound", bound)],
    );
    Ok((rep, sol.field))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_disc_mesh;
    use crate::radial_oracle::{exact_mode_field, ModeSolution};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn straight_chain_from_origin() {
        let r0 = 0.1;
        let omega = RegionSpec::ball([0.0, 0.0], r0);
        let target = RegionSpec::ball([0.3, 0.0], r0);
        let plan = plan_chain(1.0, &omega, &target, r0, 1.0).unwrap();
        assert_eq!(plan.case_tag, CaseTag::OriginInsideOmega);
        assert_eq!(plan.steps(), 3);
        for w in plan.centers.windows(2) {
            assert_relative_eq!(dist(w[0], w[1]), r0, epsilon = 1e-12);
        }
        assert_relative_eq!(plan.composite_mu, 0.5f64.powi(3) * 2.0 / 3.0, epsilon = 1e-15);
        assert!(plan.annulus_step.is_none());
    }

    #[test]
    fn touching_regions_need_no_chain() {
        let omega = RegionSpec::ball([0.0, 0.0], 0.2);
        let target = RegionSpec::ball([0.3, 0.0], 0.15);
        let plan = plan_chain(1.0, &omega, &target, 0.1, 1.0).unwrap();
        assert_eq!(plan.steps(), 0);
        assert_eq!(plan.composite_mu, 1.0);
    }

    #[test]
    fn origin_outside_omega_uses_annulus() {
        let r0 = 0.1;
        let omega = RegionSpec::ball([0.6, 0.0], 0.2);
        let far = RegionSpec::ball([0.0, 0.6], 0.1);
        let plan = plan_chain(1.0, &omega, &far, r0, 1.0).unwrap();
        assert_eq!(plan.case_tag, CaseTag::OriginOutsideOmega);
        let a = plan.annulus_step.as_ref().unwrap();
        assert!(a.cover_count >= 3 && !plan.ends_at_origin);
        assert_relative_eq!(norm(a.maximizer), 2.5 * r0, epsilon = 1e-12);
        let near = RegionSpec::ball([0.0, 0.0], 0.1);
        let plan = plan_chain(1.0, &omega, &near, r0, 1.0).unwrap();
        assert!(plan.ends_at_origin);
        assert_eq!(*plan.centers.last().unwrap(), plan.annulus_step.as_ref().unwrap().maximizer);
        assert!(plan.max_gap() <= r0 * (1.0 + 1e-12));
    }

    #[test]
    fn infeasible_plans() {
        let omega = RegionSpec::ball([0.0, 0.0], 0.2);
        let target = RegionSpec::ball([0.5, 0.0], 0.1);
        assert!(matches!(plan_chain(1.0, &omega, &target, 0.2, 1.0), Err(Error::InfeasibleGeometry(_))));
        let edge = RegionSpec::ball([0.85, 0.0], 0.1);
        assert!(matches!(plan_chain(1.0, &omega, &edge, 0.1, 1.0), Err(Error::InfeasibleGeometry(_))));
        let close = RegionSpec::ball([0.15, 0.0], 0.05);
        assert!(matches!(plan_chain(1.0, &close, &target, 0.1, 1.0), Err(Error::InfeasibleGeometry(_))));
    }

    proptest! {
        #[test]
        fn plans_nest_and_exponents_shrink(x in -0.5f64..0.5, y in -0.5f64..0.5, r0 in 0.05f64..0.12) {
            let omega = RegionSpec::ball([0.0, 0.0], r0);
            let target = RegionSpec::ball([x, y], 0.05);
            if let Ok(plan) = plan_chain(1.0, &omega, &target, r0, 1.0) {
                prop_assert!(plan.max_gap() <= r0 * (1.0 + 1e-12));
                prop_assert!(plan.centers.iter().all(|&q| norm(q) + 2.0 * r0 <= 1.0 + 1e-12));
                let k = plan.steps();
                if k > 0 {
                    let expect = plan.per_step_mu.iter().product::<f64>() * plan.degenerate_mu.unwrap();
                    prop_assert_eq!(plan.composite_mu, expect);
                    prop_assert!(plan.composite_mu > 0.0 && plan.composite_mu < 1.0);
                    let farther = RegionSpec::ball([x * 1.3, y * 1.3], 0.05);
                    if let Ok(p2) = plan_chain(1.0, &omega, &farther, r0, 1.0) {
                        if p2.steps() > k {
                            prop_assert!(p2.composite_mu < plan.composite_mu);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn tradeoff_examples() {
        let rep = epsilon_tradeoff(0.0, 1.0, 2.0, 0.3, None, 0.1).unwrap();
        assert!(rep.passed);
        let rep = epsilon_tradeoff(1.0, 0.01, 100.0, 0.5, Some(1.0), 0.005).unwrap();
        assert!(rep.passed);
        assert_relative_eq!(rep.fitted_constants["c_eps_form"], 1.0);
        assert_relative_eq!(rep.rows[0].margin, 0.0, epsilon = 1e-12);
        let rep = epsilon_tradeoff(2.0, 3.0, 3.0, 0.4, Some(1.0), 1.0).unwrap();
        assert!(rep.passed);
        assert!(epsilon_tradeoff(-1.0, 1.0, 1.0, 0.5, None, 1.0).is_err());
        assert!(epsilon_tradeoff(1.0, 1.0, 1.0, 1.0, None, 1.0).is_err());
    }

    #[test]
    fn observed_constant_is_scale_free() {
        let m = build_disc_mesh(1.0, 0.05, 2.0).unwrap();
        let w = WeightSpec::degenerate(1.0, 1.0).unwrap();
        let mode = ModeSolution::new(2, 1.0, 1).unwrap();
        let u = exact_mode_field(&m, &mode).unwrap();
        let omega = RegionSpec::ball([0.0, 0.0], 0.1);
        let target = RegionSpec::ball([0.4, 0.0], 0.1);
        let plan = plan_chain(1.0, &omega, &target, 0.1, 1.0).unwrap();
        let family = vec![u.clone(), u.scaled(5.0), Field::zeros(&m)];
        let rep = propagate_check(&m, &family, &w, &plan, &omega, &target, None).unwrap();
        assert!(rep.passed, "{:?}", rep.rows);
        let c0 = rep.rows[0].values["c_obs"];
        let c1 = rep.rows[2].values["c_obs"];
        assert_relative_eq!(c0, c1, max_relative = 1e-10);
    }

    #[test]
    fn maximizer_faces_the_field() {
        let m = build_disc_mesh(1.0, 0.05, 2.0).unwrap();
        let w = WeightSpec::degenerate(1.0, 1.0).unwrap();
        // mass concentrated toward +y
        let u = Field::interpolate(&m, |x| (1.0 + x[1]).powi(3)).unwrap();
        let f = Functionals::new(&m, &u, &w).unwrap();
        let (q, v) = locate_annulus_maximizer(&f, 0.1).unwrap();
        assert!(v > 0.0 && q[1] > 0.24, "{q:?}");
        let omega = RegionSpec::ball([0.6, 0.0], 0.2);
        let target = RegionSpec::ball([0.0, 0.0], 0.1);
        let plan = plan_chain_for_field(&f, &omega, &target, 0.1).unwrap();
        let a = plan.annulus_step.unwrap();
        assert!(a.sampled && a.maximizer == q);
    }
}
