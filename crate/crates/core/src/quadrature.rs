//! Reference quadrature rules on triangles and intervals.

use std::f64::consts::PI;

/// Barycentric points and weights on the reference triangle; weights sum to 1.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub order: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

fn perms3(a: f64, b: f64) -> [[f64; 3]; 3] {
    [[a, b, b], [b, a, b], [b, b, a]]
}

impl TriangleRule {
    /// Symmetric rule exact for polynomials of total degree `order`.
    /// Orders 1, 2, 4, 5 are tabulated; 3 maps to 4. Returns `None` above 5.
    pub fn of_order(order: usize) -> Option<Self> {
        let (points, weights): (Vec<[f64; 3]>, Vec<f64>) = match order {
            0 | 1 => (vec![[1.0 / 3.0; 3]], vec![1.0]),
            2 => (
                perms3(2.0 / 3.0, 1.0 / 6.0).to_vec(),
                vec![1.0 / 3.0; 3],
            ),
            3 | 4 => {
                let mut p = perms3(0.108_103_018_168_070_2, 0.445_948_490_915_964_9).to_vec();
                p.extend(perms3(0.816_847_572_980_458_5, 0.091_576_213_509_770_7));
                let mut w = vec![0.223_381_589_678_011_5; 3];
                w.extend([0.109_951_743_655_321_8; 3]);
                (p, w)
            }
            5 => {
                let mut p = vec![[1.0 / 3.0; 3]];
                p.extend(perms3(0.059_715_871_789_769_8, 0.470_142_064_105_115_1));
                p.extend(perms3(0.797_426_985_353_087_3, 0.101_286_507_323_456_3));
                let mut w = vec![0.225];
                w.extend([0.132_394_152_788_506_2; 3]);
                w.extend([0.125_939_180_544_827_1; 3]);
                (p, w)
            }
            _ => return None,
        };
        Some(Self {
            order: order.max(1),
            points,
            weights,
        })
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    (
        x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
        w.iter().map(|v| 0.5 * v).collect(),
    )
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

/// Collapsed (Duffy) rule for a triangle with a vertex at the origin.
///
/// Maps `(s, t)` to `s (b + t (c - b))` with `s = sigma^4`, which turns
/// integrands like `|x|^(a-2)` (`a > 1/4`) into smooth functions of `sigma`.
/// Returned points are `(lambda_origin, lambda_b, lambda_c)` barycentrics and
/// weights relative to the triangle area (sum to 1).
#[derive(Debug, Clone)]
pub struct CollapsedRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

pub const COLLAPSE_POWER: i32 = 4;

impl CollapsedRule {
    pub fn new(radial: usize, angular: usize) -> Self {
        let (sx, sw) = gauss_legendre_unit(radial);
        let (tx, tw) = gauss_legendre_unit(angular);
        let q = COLLAPSE_POWER as f64;
        let mut points = Vec::with_capacity(radial * angular);
        let mut weights = Vec::with_capacity(radial * angular);
        for (&sigma, &ws) in sx.iter().zip(&sw) {
            let s = sigma.powi(COLLAPSE_POWER);
            // ds = q sigma^(q-1) dsigma; area element s ds dt relative to 2|T|
            let jac = 2.0 * s * q * sigma.powi(COLLAPSE_POWER - 1);
            for (&t, &wt) in tx.iter().zip(&tw) {
                points.push([1.0 - s, s * (1.0 - t), s * t]);
                weights.push(jac * ws * wt);
            }
        }
        Self { points, weights }
    }

    /// Exact for polynomials of total degree `order` on the triangle.
    pub fn for_order(order: usize) -> Self {
        let order = order.max(2);
        Self::new(2 * order + 4, order + 6)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // integral of l1^i l2^j l3^k over the reference triangle relative to its area
    fn monomial_exact(i: u32, j: u32, k: u32) -> f64 {
        let f = |n: u32| (1..=n).map(|v| v as f64).product::<f64>();
        2.0 * f(i) * f(j) * f(k) / f(i + j + k + 2)
    }

    #[test]
    fn triangle_rules_are_exact_to_their_order() {
        for order in [1usize, 2, 4, 5] {
            let rule = TriangleRule::of_order(order).unwrap();
            assert_relative_eq!(rule.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
            for i in 0..=order as u32 {
                for j in 0..=(order as u32 - i) {
                    let k = order as u32 - i - j;
                    let q: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(p, w)| w * p[0].powi(i as i32) * p[1].powi(j as i32) * p[2].powi(k as i32))
                        .sum();
                    assert_relative_eq!(q, monomial_exact(i, j, k), epsilon = 1e-13);
                }
            }
        }
        assert!(TriangleRule::of_order(6).is_none());
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1usize, 2, 5, 6, 12, 13, 40] {
            let (x, w) = gauss_legendre_unit(n);
            for p in 0..(2 * n as i32) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
                assert_relative_eq!(q, 1.0 / (p as f64 + 1.0), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn collapsed_rule_handles_singular_power() {
        // triangle (0,0),(1,0),(0,1): integral of |x|^(a-2) in polar form
        let rule = CollapsedRule::for_order(4);
        assert_relative_eq!(rule.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-13);
        let a: f64 = 0.5;
        let area = 0.5;
        let q: f64 = rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| {
                let x = p[1];
                let y = p[2];
                w * area * (x * x + y * y).sqrt().powf(a - 2.0)
            })
            .sum();
        // int_0^{pi/2} int_0^{1/(cos+sin)} r^(a-1) dr dtheta
        let (tx, tw) = gauss_legendre_unit(40);
        let exact: f64 = tx
            .iter()
            .zip(&tw)
            .map(|(t, w)| {
                let th = t * PI / 2.0;
                w * PI / 2.0 * (1.0 / (th.cos() + th.sin())).powf(a) / a
            })
            .sum();
        assert_relative_eq!(q, exact, max_relative = 1e-6);
    }
}
