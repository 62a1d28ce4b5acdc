//! Separable `w`-harmonic modes `r^beta Y_l` and a 1-D radial solver.
//!
//! Substituting `r^beta Y_l` into `div(|x|^alpha grad u) = 0` gives the
//! indicial equation `beta (beta + N + alpha - 2) = l (l + N - 2)`. The modes
//! serve as exact references for the 2-D solver and the sphere functionals.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::mesh::{Mesh, Point};
use crate::quadrature::gauss_legendre_unit;
use crate::solver::{Field, ScalarFn, Source};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSolution {
    dimension: usize,
    alpha: f64,
    l: u32,
    beta: f64,
}

/// Nonnegative root of `beta (beta + N + alpha - 2) = l (l + N - 2)`.
pub fn indicial_exponent(dimension: usize, alpha: f64, l: u32) -> Result<f64> {
    if dimension < 2 {
        return Err(invalid(format!("dimension must be >= 2, got {dimension}")));
    }
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(invalid(format!("alpha must lie in (0,2), got {alpha}")));
    }
    let lambda = eigenvalue(dimension, l);
    let b = dimension as f64 + alpha - 2.0;
    // rationalized form of (-b + sqrt(b^2 + 4 lambda)) / 2, free of cancellation
    Ok(2.0 * lambda / (b + (b * b + 4.0 * lambda).sqrt()))
}

/// Eigenvalue `l (l + N - 2)` of the spherical Laplacian.
fn eigenvalue(dimension: usize, l: u32) -> f64 {
    let l = l as f64;
    l * (l + dimension as f64 - 2.0)
}

impl ModeSolution {
    pub fn new(dimension: usize, alpha: f64, l: u32) -> Result<Self> {
        let beta = indicial_exponent(dimension, alpha, l)?;
        Ok(Self {
            dimension,
            alpha,
            l,
            beta,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn l(&self) -> u32 {
        self.l
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn eigenvalue(&self) -> f64 {
        eigenvalue(self.dimension, self.l)
    }

    /// `int_{S^{N-1}} Y_l^2`. In the plane `Y_l = cos(l theta)`; for `N > 2`
    /// the harmonic is taken unit-normalized.
    pub fn angular_norm(&self) -> f64 {
        match (self.dimension, self.l) {
            (2, 0) => 2.0 * PI,
            (2, _) => PI,
            _ => 1.0,
        }
    }

    /// `N + alpha + 2 beta`, the homogeneity degree of `H`.
    pub fn mass_degree(&self) -> f64 {
        self.dimension as f64 + self.alpha + 2.0 * self.beta
    }

    /// `r^beta cos(l theta)` at a planar point.
    pub fn eval(&self, x: Point) -> f64 {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        if self.l == 0 {
            return 1.0;
        }
        if r == 0.0 {
            return 0.0;
        }
        r.powf(self.beta) * (self.l as f64 * x[1].atan2(x[0])).cos()
    }

    pub fn as_source(&self) -> Source {
        let mode = *self;
        Source::Function(ScalarFn::new(
            format!("mode(l={}, beta={})", self.l, self.beta),
            move |x| mode.eval(x),
        ))
    }
}

/// Nodal interpolant of `r^beta cos(l theta)`.
pub fn exact_mode_field(mesh: &Mesh, mode: &ModeSolution) -> Result<Field> {
    if mode.dimension != 2 {
        return Err(invalid("mode fields on a mesh need N = 2"));
    }
    Field::interpolate(mesh, |x| mode.eval(x))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeFunctionals {
    pub h: f64,
    pub d: f64,
    pub phi: f64,
}

/// Closed-form `H`, `D`, `Phi` of a mode on `B_r`.
pub fn mode_functionals(mode: &ModeSolution, r: f64) -> Result<ModeFunctionals> {
    if !(r > 0.0) {
        return Err(invalid(format!("radius must be positive, got {r}")));
    }
    let a = mode.angular_norm();
    let p = mode.mass_degree();
    let rp = r.powf(p);
    let h = a * rp / p;
    let d = a * (mode.beta * mode.beta + mode.eigenvalue()) * 2.0 * rp / ((p - 2.0) * p);
    Ok(ModeFunctionals {
        h,
        d,
        phi: 2.0 * mode.beta,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub r: Vec<f64>,
    pub u: Vec<f64>,
}

impl RadialProfile {
    /// Largest nodal deviation from `exact`, relative to `max |exact|`.
    pub fn relative_error(&self, exact: impl Fn(f64) -> f64) -> f64 {
        let scale = self.r.iter().map(|&r| exact(r).abs()).fold(0.0, f64::max);
        let err = self.r.iter().zip(&self.u).map(|(&r, &u)| (u - exact(r)).abs()).fold(0.0, f64::max);
        if scale > 0.0 {
            err / scale
        } else {
            err
        }
    }
}

/// Options for [`radial_solve_mode`]; the grid is `r_j = R0 (j/J)^grading`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    pub r0: f64,
    pub cells: usize,
    pub grading: f64,
}

impl RadialGrid {
    /// Grid for a mode with exponent `beta`: grading `max(2, 2/beta)`.
    ///
    /// Near the origin the scheme's error is of the size of the solution on
    /// the first cells, about `J^(-grading * beta)`; this choice keeps that
    /// part second order.
    pub fn for_mode(mode: &ModeSolution, r0: f64, cells: usize) -> Self {
        let grading = if mode.beta() > 0.0 { (2.0 / mode.beta()).max(2.0) } else { 2.0 };
        Self { r0, cells, grading }
    }
}

/// Finite-volume solve of
/// `(r^(N-1+alpha) u')' - l(l+N-2) r^(N-3+alpha) u = -r^(N-1) f` on `(0, R0)`
/// with `u(R0) = boundary`.
///
/// Face fluxes use the exact two-point conductance
/// `1 / int r^-(N-1+alpha) dr`. That conductance vanishes on the first cell,
/// where the flux is closed with the local regular solution instead; the
/// origin condition (zero flux for `l = 0`, `u(0) = 0` otherwise) is built in.
pub fn radial_solve_mode(
    dimension: usize,
    alpha: f64,
    l: u32,
    rhs: impl Fn(f64) -> f64,
    boundary: f64,
    grid: RadialGrid,
) -> Result<RadialProfile> {
    let mode = ModeSolution::new(dimension, alpha, l)?;
    let cells = grid.cells;
    if cells < 16 {
        return Err(invalid(format!("radial grid needs at least 16 cells, got {cells}")));
    }
    if !(grid.r0 > 0.0 && grid.grading >= 1.0) {
        return Err(invalid("radial grid needs R0 > 0 and grading >= 1"));
    }
    let nf = dimension as f64;
    let q = nf - 1.0 + alpha;
    let lambda = mode.eigenvalue();
    let r: Vec<f64> = (0..=cells)
        .map(|j| grid.r0 * (j as f64 / cells as f64).powf(grid.grading))
        .collect();

    // antiderivative of r^p (p > -1 assumed for the reaction and source terms)
    let power_integral = |p: f64, a: f64, b: f64| (b.powf(p + 1.0) - a.powf(p + 1.0)) / (p + 1.0);
    let resistance = |a: f64, b: f64| {
        if a == 0.0 {
            f64::INFINITY
        } else if (q - 1.0).abs() < 1e-14 {
            (b / a).ln()
        } else {
            (a.powf(1.0 - q) - b.powf(1.0 - q)) / (q - 1.0)
        }
    };
    let conductance: Vec<f64> = (0..cells).map(|j| 1.0 / resistance(r[j], r[j + 1])).collect();
    let (gx, gw) = gauss_legendre_unit(4);
    let source = |a: f64, b: f64| -> f64 {
        gx.iter()
            .zip(&gw)
            .map(|(t, w)| {
                let s = a + t * (b - a);
                w * (b - a) * s.powf(nf - 1.0) * rhs(s)
            })
            .sum()
    };

    // Inside the first cell the solution is the regular mode c r^beta, which
    // fixes the flux through the inner face of node 1 in terms of u_1
    // (zero for l = 0).
    let m_half = 0.5 * (r[0] + r[1]);
    let inner_flux = mode.beta() * m_half.powf(q - 1.0) * (m_half / r[1]).powf(mode.beta());

    // unknowns u_1 .. u_{J-1}
    let n = cells - 1;
    let (mut lower, mut diag, mut upper, mut b) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for k in 0..n {
        let j = k + 1;
        let left = if j == 1 && l == 0 { 0.0 } else { 0.5 * (r[j - 1] + r[j]) };
        let right = 0.5 * (r[j] + r[j + 1]);
        diag[k] = conductance[j] + lambda * power_integral(nf - 3.0 + alpha, left, right);
        b[k] = source(left, right);
        if k > 0 {
            diag[k] += conductance[j - 1];
            lower[k] = -conductance[j - 1];
        } else {
            diag[k] += inner_flux;
        }
        if k + 1 < n {
            upper[k] = -conductance[j];
        } else {
            b[k] += conductance[j] * boundary;
        }
    }
    let inner = thomas(&lower, &diag, &upper, &b)?;
    let mut u = Vec::with_capacity(cells + 1);
    u.push(if l == 0 { inner[0] } else { 0.0 });
    u.extend(inner);
    u.push(boundary);
    Ok(RadialProfile { r, u })
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 0..n {
        let m = diag[i] - if i > 0 { lower[i] * c[i - 1] } else { 0.0 };
        if !(m.abs() > 0.0) || !m.is_finite() {
            return Err(Error::SingularSystem(format!("zero pivot in radial system at row {i}")));
        }
        c[i] = upper[i] / m;
        d[i] = (b[i] - if i > 0 { lower[i] * d[i - 1] } else { 0.0 }) / m;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}
