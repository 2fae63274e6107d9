//! Gauss-type quadrature on every reference element.
//!
//! Tensor kinds use Gauss–Legendre products. Simplices and the pyramid use
//! collapsed coordinates with the Jacobian of the collapse absorbed into
//! Gauss–Jacobi rules in the collapsed directions; the prism is a triangle
//! rule times a Gauss–Legendre rule.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::geometry::{reference_element, ElementKind};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub kind: ElementKind,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Polynomial degree integrated exactly.
    pub exactness: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(x))
            .sum()
    }
}

/// Jacobi polynomial `P_n^{(a,b)}(x)` and its derivative.
fn jacobi_with_derivative(n: usize, a: f64, b: f64, x: f64) -> (f64, f64) {
    let p = crate::basis::jacobi(n, a, b, x);
    let dp = if n == 0 {
        0.0
    } else {
        0.5 * (n as f64 + a + b + 1.0) * crate::basis::jacobi(n - 1, a + 1.0, b + 1.0, x)
    };
    (p, dp)
}

/// `n`-point Gauss–Legendre rule on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre_1d(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "a Gauss rule needs at least one point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, z);
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

pub(crate) fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    // derivative from P_n and P_{n-1}; only used away from ±1
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// `n`-point Gauss–Jacobi rule for the weight `(1-x)^a` on `[-1, 1]`.
pub fn gauss_jacobi_1d(n: usize, a: u32) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "a Gauss rule needs at least one point");
    if a == 0 {
        return gauss_legendre_1d(n);
    }
    let (af, bf) = (a as f64, 0.0);
    let mut t = DMatrix::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let s = 2.0 * kf + af + bf;
        t[(k, k)] = if k == 0 {
            (bf - af) / (af + bf + 2.0)
        } else {
            (bf * bf - af * af) / (s * (s + 2.0))
        };
        if k + 1 < n {
            let k1 = kf + 1.0;
            let s1 = 2.0 * k1 + af + bf;
            let beta = 4.0 * k1 * (k1 + af) * (k1 + bf) * (k1 + af + bf)
                / (s1 * s1 * (s1 + 1.0) * (s1 - 1.0));
            t[(k, k + 1)] = beta.sqrt();
            t[(k + 1, k)] = beta.sqrt();
        }
    }
    let mut x: Vec<f64> = SymmetricEigen::new(t).eigenvalues.iter().copied().collect();
    x.sort_by(f64::total_cmp);
    let scale = 2f64.powi(a as i32 + 1);
    let w = x
        .iter_mut()
        .map(|z| {
            for _ in 0..20 {
                let (p, dp) = jacobi_with_derivative(n, af, bf, *z);
                let dz = p / dp;
                *z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = jacobi_with_derivative(n, af, bf, *z);
            scale / ((1.0 - *z * *z) * dp * dp)
        })
        .collect();
    (x, w)
}

fn build(kind: ElementKind, degree: usize) -> QuadratureRule {
    use ElementKind::*;
    let n = degree / 2 + 1;
    let (gx, gw) = gauss_legendre_1d(n);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match kind {
        Line => {
            for (x, w) in gx.iter().zip(&gw) {
                points.push(vec![*x]);
                weights.push(*w);
            }
        }
        Quadrilateral => {
            for (x, wx) in gx.iter().zip(&gw) {
                for (y, wy) in gx.iter().zip(&gw) {
                    points.push(vec![*x, *y]);
                    weights.push(wx * wy);
                }
            }
        }
        Hexahedron => {
            for (x, wx) in gx.iter().zip(&gw) {
                for (y, wy) in gx.iter().zip(&gw) {
                    for (z, wz) in gx.iter().zip(&gw) {
                        points.push(vec![*x, *y, *z]);
                        weights.push(wx * wy * wz);
                    }
                }
            }
        }
        Triangle | Prism => {
            let (bx, bw) = gauss_jacobi_1d(n, 1);
            for (a, wa) in gx.iter().zip(&gw) {
                for (b, wb) in bx.iter().zip(&bw) {
                    let x = 0.5 * (1.0 + a) * (1.0 - b) - 1.0;
                    if kind == Triangle {
                        points.push(vec![x, *b]);
                        weights.push(0.5 * wa * wb);
                    } else {
                        for (z, wz) in gx.iter().zip(&gw) {
                            points.push(vec![x, *b, *z]);
                            weights.push(0.5 * wa * wb * wz);
                        }
                    }
                }
            }
        }
        Tetrahedron => {
            let (bx, bw) = gauss_jacobi_1d(n, 1);
            let (cx, cw) = gauss_jacobi_1d(n, 2);
            for (a, wa) in gx.iter().zip(&gw) {
                for (b, wb) in bx.iter().zip(&bw) {
                    for (c, wc) in cx.iter().zip(&cw) {
                        let x = 0.25 * (1.0 + a) * (1.0 - b) * (1.0 - c) - 1.0;
                        let y = 0.5 * (1.0 + b) * (1.0 - c) - 1.0;
                        points.push(vec![x, y, *c]);
                        weights.push(0.125 * wa * wb * wc);
                    }
                }
            }
        }
        Pyramid => {
            let (cx, cw) = gauss_jacobi_1d(n + 1, 2);
            for (a, wa) in gx.iter().zip(&gw) {
                for (b, wb) in gx.iter().zip(&gw) {
                    for (c, wc) in cx.iter().zip(&cw) {
                        let s = 0.5 * (1.0 - c);
                        points.push(vec![a * s, b * s, *c]);
                        weights.push(0.25 * wa * wb * wc);
                    }
                }
            }
        }
    }
    let rule = QuadratureRule {
        kind,
        points,
        weights,
        exactness: degree,
    };
    debug_assert!({
        let elem = reference_element(kind);
        let total: f64 = rule.weights.iter().sum();
        (total - kind.measure()).abs() < 1e-12 * kind.measure()
            && rule.weights.iter().all(|w| *w > 0.0)
            && rule.points.iter().all(|x| elem.contains(x, 1e-10))
    });
    rule
}

/// Rule on `kind` exact for polynomials of the given degree. Rules are
/// cached, so repeated requests share one allocation.
pub fn quadrature_rule(kind: ElementKind, degree: usize) -> Arc<QuadratureRule> {
    static CACHE: OnceLock<Mutex<HashMap<(ElementKind, usize), Arc<QuadratureRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().unwrap().get(&(kind, degree)) {
        return Arc::clone(rule);
    }
    let rule = Arc::new(build(kind, degree));
    Arc::clone(cache.lock().unwrap().entry((kind, degree)).or_insert(rule))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_examples() {
        let (x, w) = gauss_legendre_1d(1);
        assert_eq!((x, w), (vec![0.0], vec![2.0]));
        let (x, w) = gauss_legendre_1d(2);
        let r = 1.0 / 3f64.sqrt();
        assert!((x[0] + r).abs() < 1e-15 && (x[1] - r).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15 && (w[1] - 1.0).abs() < 1e-15);
        let (x, w) = gauss_legendre_1d(3);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert!((s - 0.4).abs() < 1e-15);
    }

    #[test]
    fn line_degree_three_is_two_point_rule() {
        let rule = quadrature_rule(ElementKind::Line, 3);
        assert_eq!(rule.len(), 2);
    }

    #[test]
    fn weight_sums() {
        for kind in ElementKind::ALL {
            for degree in [0, 1, 4, 9] {
                let rule = quadrature_rule(kind, degree);
                let total: f64 = rule.weights.iter().sum();
                assert!((total - kind.measure()).abs() < 1e-13, "{kind} {degree}: {total}");
            }
        }
    }

    #[test]
    fn jacobi_rule_moments() {
        // ∫ (1-x)^2 x^k for k = 0..2n-1
        let (x, w) = gauss_jacobi_1d(4, 2);
        for k in 0..8 {
            let exact: f64 = {
                let n = 2000;
                let (gx, gw) = gauss_legendre_1d(n / 100);
                gx.iter().zip(&gw).map(|(t, wt)| wt * (1.0 - t).powi(2) * t.powi(k)).sum()
            };
            let got: f64 = x.iter().zip(&w).map(|(t, wt)| wt * t.powi(k)).sum();
            assert!((got - exact).abs() < 1e-13, "k={k}: {got} vs {exact}");
        }
    }
}
