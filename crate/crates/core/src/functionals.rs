//! Sphere functionals of a P1 field: weighted mass `H(r)`, kernelized energy
//! `D(r)`, frequency `Phi = D/H`, the `B_eps` remainder, and Hardy ratios.

use std::io::Write;

use crate::error::{Error, Result};
use crate::format::real;
use crate::mesh::{Mesh, QuadratureOptions, RegionSpec};
use crate::quadrature::gauss_legendre_unit;
use crate::solver::{element_weight_integrals, weighted_quadrature, Field};
use crate::weights::WeightSpec;

/// Below this, `H` counts as zero and `Phi` is reported as 0.
pub const MASS_FLOOR: f64 = 1e-30;

/// Minimum number of element layers across `B_eps` for the remainder.
pub const REMAINDER_LAYERS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereSample {
    pub r: f64,
    pub h: f64,
    pub d: f64,
    pub phi: f64,
    pub r_eps: f64,
}

/// Evaluation context: a field on its mesh under one weight.
#[derive(Debug, Clone, Copy)]
pub struct Functionals<'a> {
    pub mesh: &'a Mesh,
    pub field: &'a Field,
    pub weight: &'a WeightSpec,
    pub opts: QuadratureOptions,
}

impl<'a> Functionals<'a> {
    pub fn new(mesh: &'a Mesh, field: &'a Field, weight: &'a WeightSpec) -> Result<Self> {
        field.check_mesh(mesh)?;
        Ok(Self {
            mesh,
            field,
            weight,
            opts: QuadratureOptions::default(),
        })
    }

    pub fn with_options(mut self, opts: QuadratureOptions) -> Self {
        self.opts = opts;
        self
    }

    fn ball(&self, r: f64) -> Result<RegionSpec> {
        let region = RegionSpec::origin_ball(r);
        region.validate()?;
        if !region.inside_disc(self.mesh.radius()) {
            return Err(Error::RegionOutsideDomain {
                region: region.to_string(),
                domain_radius: self.mesh.radius(),
            });
        }
        Ok(region)
    }

    /// `int_region w v^2`.
    pub fn mass_in(&self, regions: &[RegionSpec]) -> Result<f64> {
        let q = weighted_quadrature(self.mesh, regions, self.weight, self.opts)?;
        Ok(q.integrate(|p| {
            let v = self.field.eval(self.mesh, p);
            self.weight.value(&p.x) * v * v
        }))
    }

    /// `H(r) = int_{B_r} w v^2`.
    pub fn sphere_mass(&self, r: f64) -> Result<f64> {
        let ball = self.ball(r)?;
        self.mass_in(&[ball])
    }

    /// `D(r) = int_{B_r} w |grad v|^2 (r^2 - |y|^2)`.
    pub fn dirichlet_kernel(&self, r: f64) -> Result<f64> {
        let ball = self.ball(r)?;
        let q = weighted_quadrature(self.mesh, &[ball], self.weight, self.opts)?;
        let grads = self.gradient_squares();
        Ok(q.integrate(|p| {
            let y2 = p.x[0] * p.x[0] + p.x[1] * p.x[1];
            self.weight.value(&p.x) * grads[p.triangle] * (r * r - y2)
        }))
    }

    /// `E(r) = int_{B_r} w |grad v|^2`, so that `D'(r) = 2 r E(r)`.
    pub fn energy_in_ball(&self, r: f64) -> Result<f64> {
        let ball = self.ball(r)?;
        let q = weighted_quadrature(self.mesh, &[ball], self.weight, self.opts)?;
        let grads = self.gradient_squares();
        Ok(q.integrate(|p| self.weight.value(&p.x) * grads[p.triangle]))
    }

    /// `D(r)` by integrating `D'(s) = 2 s E(s)` from 0, with composite
    /// Gauss-Legendre over `panels` pieces.
    pub fn dirichlet_kernel_integrated(&self, r: f64, panels: usize) -> Result<f64> {
        self.ball(r)?;
        let (x, w) = gauss_legendre_unit(4);
        let mut total = 0.0;
        for k in 0..panels.max(1) {
            let a = r * k as f64 / panels as f64;
            let b = r * (k + 1) as f64 / panels as f64;
            for (t, wt) in x.iter().zip(&w) {
                let s = a + t * (b - a);
                total += wt * (b - a) * 2.0 * s * self.energy_in_ball(s)?;
            }
        }
        Ok(total)
    }

    /// `D/H`, or 0 when `H` is below [`MASS_FLOOR`].
    pub fn frequency(&self, r: f64) -> Result<f64> {
        let h = self.sphere_mass(r)?;
        if h < MASS_FLOOR {
            return Ok(0.0);
        }
        Ok(self.dirichlet_kernel(r)? / h)
    }

    /// `R_eps = (alpha/2) eps^2 int_{B_eps} (3/4|y|^2 + 1/4 eps^2)^(alpha/2 - 1) v^2`.
    pub fn remainder(&self) -> Result<RemainderReport> {
        let eps = self.weight.epsilon();
        if eps <= 0.0 {
            return Err(Error::InvalidParameter("the remainder needs a regularized weight (eps > 0)".into()));
        }
        let size = self.mesh.local_size_near_origin(eps);
        if eps < REMAINDER_LAYERS * size {
            return Err(Error::Resolution {
                radius: eps,
                local_size: size,
                factor: REMAINDER_LAYERS,
            });
        }
        let ball = self.ball(eps)?;
        let q = weighted_quadrature(self.mesh, std::slice::from_ref(&ball), self.weight, self.opts)?;
        let alpha = self.weight.alpha();
        let mut value = 0.0;
        let mut mass = 0.0;
        for p in &q.points {
            let v = self.field.eval(self.mesh, p);
            let r = (p.x[0] * p.x[0] + p.x[1] * p.x[1]).sqrt();
            value += p.weight * self.weight.inner_base(r).powf(0.5 * alpha - 1.0) * v * v;
            mass += p.weight * self.weight.value(&p.x) * v * v;
        }
        Ok(RemainderReport {
            value: 0.5 * alpha * eps * eps * value,
            bound: 2.0 * alpha * mass,
        })
    }

    /// Remainder, or 0 for the unregularized weight.
    fn remainder_or_zero(&self) -> Result<f64> {
        if self.weight.is_regularized() {
            Ok(self.remainder()?.value)
        } else {
            Ok(0.0)
        }
    }

    pub fn sample(&self, r: f64) -> Result<SphereSample> {
        let r_eps = self.remainder_or_zero()?;
        self.sample_with_remainder(r, r_eps)
    }

    fn sample_with_remainder(&self, r: f64, r_eps: f64) -> Result<SphereSample> {
        let h = self.sphere_mass(r)?;
        let d = self.dirichlet_kernel(r)?;
        let phi = if h < MASS_FLOOR { 0.0 } else { d / h };
        Ok(SphereSample { r, h, d, phi, r_eps })
    }

    /// Samples on an increasing radius grid.
    pub fn profile(&self, radii: &[f64]) -> Result<Vec<SphereSample>> {
        if radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("radius grid must be strictly increasing".into()));
        }
        if radii.is_empty() {
            return Ok(Vec::new());
        }
        let r_eps = self.remainder_or_zero()?;
        radii.iter().map(|&r| self.sample_with_remainder(r, r_eps)).collect()
    }

    /// `|grad v|^2` per triangle.
    fn gradient_squares(&self) -> Vec<f64> {
        (0..self.mesh.num_triangles())
            .map(|t| {
                let g = self.field.gradient(self.mesh, t);
                g[0] * g[0] + g[1] * g[1]
            })
            .collect()
    }

    /// Left/right ratios of the four weighted Hardy inequalities.
    pub fn hardy_report(&self) -> Result<HardyReport> {
        for (i, &v) in self.field.values().iter().enumerate() {
            if self.mesh.is_boundary_node(i) && v != 0.0 {
                return Err(Error::Trace { node: i, value: v });
            }
        }
        let degenerate = WeightSpec::new(
            self.weight.alpha(),
            0.0,
            self.weight.dimension(),
            self.weight.domain_radius(),
        )?;
        let alpha = self.weight.alpha();
        let grads = self.gradient_squares();

        let energy = |w: &WeightSpec| -> Result<f64> {
            let wint = element_weight_integrals(self.mesh, w, self.opts)?;
            Ok(wint.iter().zip(&grads).map(|(a, b)| a * b).sum())
        };
        let all = [RegionSpec::Domain];
        let q0 = weighted_quadrature(self.mesh, &all, &degenerate, self.opts)?;
        let qe = weighted_quadrature(self.mesh, &all, self.weight, self.opts)?;
        let (mut hardy0, mut l2) = (0.0, 0.0);
        for p in &q0.points {
            let v = self.field.eval(self.mesh, p);
            let r = (p.x[0] * p.x[0] + p.x[1] * p.x[1]).sqrt();
            hardy0 += p.weight * r.powf(alpha - 2.0) * v * v;
            l2 += p.weight * v * v;
        }
        let (mut hardy_e, mut l2w_e) = (0.0, 0.0);
        for p in &qe.points {
            let v = self.field.eval(self.mesh, p);
            let r = (p.x[0] * p.x[0] + p.x[1] * p.x[1]).sqrt();
            hardy_e += p.weight * self.weight.hardy_factor_at_radius(r) * v * v;
            l2w_e += p.weight * self.weight.value_at_radius(r) * v * v;
        }
        let e0 = energy(&degenerate)?;
        let ee = energy(self.weight)?;
        let c = degenerate.hardy_constants();
        let ce = self.weight.regularized_hardy_constants();
        let ratio = |lhs: f64, constant: f64, rhs: f64| {
            if lhs == 0.0 {
                0.0
            } else {
                lhs.sqrt() / (constant * rhs.sqrt())
            }
        };
        Ok(HardyReport {
            degenerate_gradient: ratio(hardy0, c.gradient_form, e0),
            degenerate_l2: ratio(l2, c.l2_form, e0),
            regularized_gradient: ratio(hardy_e, ce.gradient_form, ee),
            regularized_l2: ratio(l2w_e, ce.l2_form, ee),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemainderReport {
    pub value: f64,
    /// `2 alpha H_eps(eps)`.
    pub bound: f64,
}

/// Each entry is `LHS / (C * RHS)`; the inequality holds iff the ratio is at most 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardyReport {
    /// `| |x|^(alpha/2-1) u | <= 2/(N-2+alpha) | |x|^(alpha/2) grad u |`.
    pub degenerate_gradient: f64,
    /// `|u| <= 2 m^(1-alpha/2)/(N-2+alpha) | |x|^(alpha/2) grad u |`.
    pub degenerate_l2: f64,
    /// `|w_eps^(1/2-1/alpha) u| <= 2/(N+alpha-2) |grad u|_{L2(w_eps)}`.
    pub regularized_gradient: f64,
    /// `|u|_{L2(w_eps)} <= 2m/(N+alpha-2) |grad u|_{L2(w_eps)}`.
    pub regularized_l2: f64,
}

impl HardyReport {
    pub fn ratios(&self) -> [(&'static str, f64); 4] {
        [
            ("degenerate_gradient", self.degenerate_gradient),
            ("degenerate_l2", self.degenerate_l2),
            ("regularized_gradient", self.regularized_gradient),
            ("regularized_l2", self.regularized_l2),
        ]
    }

    pub fn max_ratio(&self) -> f64 {
        self.ratios().iter().map(|r| r.1).fold(0.0, f64::max)
    }
}

/// Writes `r,H,D,Phi,R_eps` rows with 17 significant digits.
pub fn write_profile_csv<W: Write>(samples: &[SphereSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["r", "H", "D", "Phi", "R_eps"])?;
    for s in samples {
        w.write_record([real(s.r), real(s.h), real(s.d), real(s.phi), real(s.r_eps)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_disc_mesh;
    use crate::radial_oracle::{exact_mode_field, mode_functionals, ModeSolution};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn weight(alpha: f64, eps: f64) -> WeightSpec {
        WeightSpec::new(alpha, eps, 2, 1.0).unwrap()
    }

    #[test]
    fn unit_field_mass_and_energy() {
        let m = build_disc_mesh(1.0, 0.05, 2.0).unwrap();
        let u = Field::constant(&m, 1.0);
        let w = weight(1.0, 0.0);
        let f = Functionals::new(&m, &u, &w).unwrap();
        assert_relative_eq!(f.sphere_mass(1.0).unwrap(), 2.0 * PI / 3.0, max_relative = 1e-3);
        assert_relative_eq!(f.sphere_mass(0.5).unwrap(), 2.0 * PI / 24.0, max_relative = 1e-6);
        assert!(f.dirichlet_kernel(0.5).unwrap().abs() < 1e-20);
        assert!(f.frequency(0.5).unwrap() < 1e-18);
        assert!(matches!(f.sphere_mass(1.5), Err(Error::RegionOutsideDomain { .. })));
    }

    #[test]
    fn zero_field_conventions() {
        let m = build_disc_mesh(1.0, 0.1, 2.0).unwrap();
        let u = Field::zeros(&m);
        let w = weight(1.0, 0.2);
        let f = Functionals::new(&m, &u, &w).unwrap();
        assert_eq!(f.sphere_mass(0.5).unwrap(), 0.0);
        assert_eq!(f.frequency(0.5).unwrap(), 0.0);
        assert_eq!(f.remainder().unwrap().value, 0.0);
        let h = f.hardy_report().unwrap();
        assert_eq!(h.max_ratio(), 0.0);
        assert!(f.profile(&[]).unwrap().is_empty());
    }

    #[test]
    fn mode_functionals_match_closed_form() {
        let m = build_disc_mesh(1.0, 0.025, 2.0).unwrap();
        let mode = ModeSolution::new(2, 1.0, 1).unwrap();
        let u = exact_mode_field(&m, &mode).unwrap();
        let w = weight(1.0, 0.0);
        let f = Functionals::new(&m, &u, &w).unwrap();
        let exact = mode_functionals(&mode, 0.5).unwrap();
        assert_relative_eq!(f.sphere_mass(0.5).unwrap(), exact.h, max_relative = 1e-3);
        assert_relative_eq!(f.dirichlet_kernel(0.5).unwrap(), exact.d, max_relative = 1e-2);
        assert_relative_eq!(f.frequency(0.5).unwrap(), exact.phi, max_relative = 1e-2);
    }

    #[test]
    fn kernel_two_ways_agree() {
        let m = build_disc_mesh(1.0, 0.05, 2.0).unwrap();
        let u = Field::interpolate(&m, |x| x[0] * x[0] - 0.5 * x[1] + 0.2).unwrap();
        let w = weight(0.5, 0.1);
        let f = Functionals::new(&m, &u, &w).unwrap();
        let a = f.dirichlet_kernel(0.7).unwrap();
        let b = f.dirichlet_kernel_integrated(0.7, 16).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-4);
    }

    #[test]
    fn remainder_of_unit_field() {
        // (alpha/2) eps^2 int_{B_eps} (3/4 r^2 + eps^2/4)^(-1/2) = 2 pi eps^3 / 3 at alpha = 1
        let m = build_disc_mesh(1.0, 0.05, 2.0).unwrap();
        let u = Field::constant(&m, 1.0);
        let w = weight(1.0, 0.3);
        let rep = Functionals::new(&m, &u, &w).unwrap().remainder().unwrap();
        assert_relative_eq!(rep.value, 2.0 * PI * 0.027 / 3.0, max_relative = 1e-6);
        // H_eps(eps) = 7 pi eps^3 / 9
        assert_relative_eq!(rep.bound, 2.0 * 7.0 * PI * 0.027 / 9.0, max_relative = 1e-6);
        assert!(rep.value <= rep.bound);
    }

    #[test]
    fn remainder_preconditions() {
        let m = build_disc_mesh(1.0, 0.1, 1.0).unwrap();
        let u = Field::constant(&m, 1.0);
        let w = weight(1.0, 0.0);
        assert!(Functionals::new(&m, &u, &w).unwrap().remainder().is_err());
        let w = weight(1.0, 0.05);
        assert!(matches!(Functionals::new(&m, &u, &w).unwrap().remainder(), Err(Error::Resolution { .. })));
    }

    #[test]
    fn hardy_tent_and_trace() {
        let m = build_disc_mesh(1.0, 0.1, 2.0).unwrap();
        let mut v = vec![0.0; m.num_nodes()];
        let node = m.nodes().iter().position(|p| (p[0] - 0.5).abs() < 0.1 && p[1].abs() < 0.1 && !(p[0] == 0.0)).unwrap();
        v[node] = 1.0;
        let tent = Field::new(&m, v).unwrap();
        let w = weight(1.0, 0.1);
        let rep = Functionals::new(&m, &tent, &w).unwrap().hardy_report().unwrap();
        assert!(rep.degenerate_l2 <= 1.0 && rep.max_ratio() <= 1.0, "{rep:?}");
        let one = Field::constant(&m, 1.0);
        assert!(matches!(Functionals::new(&m, &one, &w).unwrap().hardy_report(), Err(Error::Trace { .. })));
    }

    #[test]
    fn profile_csv_layout() {
        let m = build_disc_mesh(1.0, 0.1, 2.0).unwrap();
        let u = Field::constant(&m, 1.0);
        let w = weight(1.0, 0.0);
        let p = Functionals::new(&m, &u, &w).unwrap().profile(&[0.25, 0.5, 0.75]).unwrap();
        assert!(p.windows(2).all(|s| s[0].h < s[1].h));
        let mut buf = Vec::new();
        write_profile_csv(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("r,H,D,Phi,R_eps\n"));
        assert_eq!(text.lines().count(), 4);
        assert!(Functionals::new(&m, &u, &w).unwrap().profile(&[0.5, 0.25]).is_err());
    }
}
