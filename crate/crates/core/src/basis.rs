//! Local function spaces, Vandermonde matrices and Lagrange bases.
//!
//! The orthogonal bases are
//! - tensor Legendre on line, quadrilateral and hexahedron;
//! - Dubiner (collapsed Jacobi) on triangle and tetrahedron;
//! - Dubiner × Legendre on the prism;
//! - `P_i(x/s) P_j(y/s) s^c P_k^{(2c+2,0)}(z)` with `s = (1-z)/2`,
//!   `c = max(i, j)` on the pyramid.
//!
//! Collapsed factors are evaluated in homogeneous form,
//! `s^n P_n(u/s)`, which is a polynomial in `(u, s)` and never divides by
//! `s`. The pyramid still divides by `s^min(i,j)`; at the apex the value
//! is taken as the limit `0` (and the derivative as `0`).
//!
//! Every orthogonal basis function is scaled to unit `L²` norm, so the
//! Gram matrix of the basis is the identity up to roundoff.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{node_count, reference_element, ElementKind, CONTAINS_TOL};
use crate::quadrature::quadrature_rule;

/// Arithmetic needed by the basis recurrences.
pub trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn cst(v: f64) -> Self;
    fn value(self) -> f64;

    fn scale(self, v: f64) -> Self {
        self * Self::cst(v)
    }
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }

    fn value(self) -> f64 {
        self
    }

    fn scale(self, v: f64) -> Self {
        self * v
    }
}

/// Forward-mode dual number carrying partials with respect to up to three
/// Cartesian coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: [f64; 3],
}

impl Dual {
    pub fn variable(v: f64, axis: usize) -> Self {
        let mut d = [0.0; 3];
        d[axis] = 1.0;
        Dual { v, d }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual {
            v: self.v + o.v,
            d: [self.d[0] + o.d[0], self.d[1] + o.d[1], self.d[2] + o.d[2]],
        }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual {
            v: self.v - o.v,
            d: [self.d[0] - o.d[0], self.d[1] - o.d[1], self.d[2] - o.d[2]],
        }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual {
            v: self.v * o.v,
            d: [
                self.d[0] * o.v + self.v * o.d[0],
                self.d[1] * o.v + self.v * o.d[1],
                self.d[2] * o.v + self.v * o.d[2],
            ],
        }
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        let inv = 1.0 / o.v;
        let q = self.v * inv;
        Dual {
            v: q,
            d: [
                (self.d[0] - q * o.d[0]) * inv,
                (self.d[1] - q * o.d[1]) * inv,
                (self.d[2] - q * o.d[2]) * inv,
            ],
        }
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual {
            v: -self.v,
            d: [-self.d[0], -self.d[1], -self.d[2]],
        }
    }
}

impl Scalar for Dual {
    fn cst(v: f64) -> Self {
        Dual { v, d: [0.0; 3] }
    }

    fn value(self) -> f64 {
        self.v
    }

    fn scale(self, s: f64) -> Self {
        Dual {
            v: self.v * s,
            d: [self.d[0] * s, self.d[1] * s, self.d[2] * s],
        }
    }
}

/// Jacobi polynomial `P_n^{(a,b)}(x)`, orthogonal for `(1-x)^a (1+x)^b`.
pub fn jacobi(n: usize, a: f64, b: f64, x: f64) -> f64 {
    *jacobi_hom_all(n, a, b, x, 1.0).last().unwrap()
}

/// `s^k P_k^{(a,b)}(u/s)` for `k = 0..=n`, by the homogenized three-term
/// recurrence.
pub fn jacobi_hom_all<T: Scalar>(n: usize, a: f64, b: f64, u: T, s: T) -> Vec<T> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(T::cst(1.0));
    if n == 0 {
        return out;
    }
    out.push(u.scale(0.5 * (a + b + 2.0)) + s.scale(0.5 * (a - b)));
    let s2 = s * s;
    for k in 1..n {
        let kf = k as f64;
        let t = 2.0 * kf + a + b;
        let a0 = 2.0 * (kf + 1.0) * (kf + a + b + 1.0) * t;
        let a1 = (t + 1.0) * (t + 2.0) * t;
        let a2 = (t + 1.0) * (a * a - b * b);
        let a3 = 2.0 * (kf + a) * (kf + b) * (t + 2.0);
        let next = (u.scale(a1 / a0) + s.scale(a2 / a0)) * out[k] - s2 * out[k - 1].scale(a3 / a0);
        out.push(next);
    }
    out
}

fn jacobi_all<T: Scalar>(n: usize, a: f64, b: f64, x: T) -> Vec<T> {
    jacobi_hom_all(n, a, b, x, T::cst(1.0))
}

fn powers<T: Scalar>(n: usize, x: T) -> Vec<T> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(T::cst(1.0));
    for k in 0..n {
        out.push(out[k] * x);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum BasisMode {
    #[default]
    Orthogonal,
    /// Plain monomials; poorly conditioned, intended for debugging.
    Monomial,
}

/// Dimension of the local space of `kind` at degree `p`.
pub fn space_dim(kind: ElementKind, p: usize) -> usize {
    use ElementKind::*;
    match kind {
        Line => p + 1,
        Triangle => (p + 1) * (p + 2) / 2,
        Quadrilateral => (p + 1).pow(2),
        Tetrahedron => (p + 1) * (p + 2) * (p + 3) / 6,
        Hexahedron => (p + 1).pow(3),
        Prism => (p + 1) * (p + 1) * (p + 2) / 2,
        Pyramid => (0..=p).map(|c| (2 * c + 1) * (p - c + 1)).sum(),
    }
}

/// Unnormalized basis at `x`, appended to `out`.
fn eval_raw<T: Scalar>(kind: ElementKind, p: usize, mode: BasisMode, x: &[T], out: &mut Vec<T>) {
    use ElementKind::*;
    let one = T::cst(1.0);
    let half = |v: T| v.scale(0.5);
    match (kind, mode) {
        (Line, BasisMode::Orthogonal) => out.extend(jacobi_all(p, 0.0, 0.0, x[0])),
        (Line, BasisMode::Monomial) => out.extend(powers(p, x[0])),
        (Quadrilateral | Hexahedron, _) => {
            let f = |t: T| match mode {
                BasisMode::Orthogonal => jacobi_all(p, 0.0, 0.0, t),
                BasisMode::Monomial => powers(p, t),
            };
            let px = f(x[0]);
            let py = f(x[1]);
            if kind == Quadrilateral {
                for a in &px {
                    for b in &py {
                        out.push(*a * *b);
                    }
                }
            } else {
                let pz = f(x[2]);
                for a in &px {
                    for b in &py {
                        let ab = *a * *b;
                        for c in &pz {
                            out.push(ab * *c);
                        }
                    }
                }
            }
        }
        (Triangle | Prism, _) => {
            let tri = triangle_values(p, mode, x[0], x[1]);
            if kind == Triangle {
                out.extend(tri);
            } else {
                let pz = match mode {
                    BasisMode::Orthogonal => jacobi_all(p, 0.0, 0.0, x[2]),
                    BasisMode::Monomial => powers(p, x[2]),
                };
                for t in &tri {
                    for z in &pz {
                        out.push(*t * *z);
                    }
                }
            }
        }
        (Tetrahedron, BasisMode::Orthogonal) => {
            let (xx, y, z) = (x[0], x[1], x[2]);
            let s1 = -half(y + z);
            let u1 = one + xx + half(y + z);
            let s2 = half(one - z);
            let u2 = half(one + y + y + z);
            let j1 = jacobi_hom_all(p, 0.0, 0.0, u1, s1);
            for (i, ji) in j1.iter().enumerate() {
                let j2 = jacobi_hom_all(p - i, 2.0 * i as f64 + 1.0, 0.0, u2, s2);
                for (j, jj) in j2.iter().enumerate() {
                    let ij = *ji * *jj;
                    let pk = jacobi_all(p - i - j, 2.0 * (i + j) as f64 + 2.0, 0.0, z);
                    for k in pk {
                        out.push(ij * k);
                    }
                }
            }
        }
        (Tetrahedron, BasisMode::Monomial) => {
            let (px, py, pz) = (powers(p, x[0]), powers(p, x[1]), powers(p, x[2]));
            for i in 0..=p {
                for j in 0..=p - i {
                    for k in 0..=p - i - j {
                        out.push(px[i] * py[j] * pz[k]);
                    }
                }
            }
        }
        (Pyramid, _) => {
            let s = half(one - x[2]);
            let (jx, jy) = match mode {
                BasisMode::Orthogonal => (
                    jacobi_hom_all(p, 0.0, 0.0, x[0], s),
                    jacobi_hom_all(p, 0.0, 0.0, x[1], s),
                ),
                BasisMode::Monomial => (powers(p, x[0]), powers(p, x[1])),
            };
            let spow = powers(p, s);
            let apex = s.value() == 0.0;
            for i in 0..=p {
                for j in 0..=p {
                    let c = i.max(j);
                    let m = i.min(j);
                    let xy = if m == 0 {
                        jx[i] * jy[j]
                    } else if apex {
                        T::cst(0.0)
                    } else {
                        jx[i] * jy[j] / spow[m]
                    };
                    let pk = match mode {
                        BasisMode::Orthogonal => jacobi_all(p - c, 2.0 * c as f64 + 2.0, 0.0, x[2]),
                        BasisMode::Monomial => powers(p - c, x[2]),
                    };
                    for k in pk {
                        out.push(xy * k);
                    }
                }
            }
        }
    }
}

fn triangle_values<T: Scalar>(p: usize, mode: BasisMode, x: T, y: T) -> Vec<T> {
    let one = T::cst(1.0);
    let mut out = Vec::with_capacity((p + 1) * (p + 2) / 2);
    match mode {
        BasisMode::Orthogonal => {
            let s = (one - y).scale(0.5);
            let u = (one + x + x + y).scale(0.5);
            let ji = jacobi_hom_all(p, 0.0, 0.0, u, s);
            for (i, a) in ji.iter().enumerate() {
                for b in jacobi_all(p - i, 2.0 * i as f64 + 1.0, 0.0, y) {
                    out.push(*a * b);
                }
            }
        }
        BasisMode::Monomial => {
            let (px, py) = (powers(p, x), powers(p, y));
            for i in 0..=p {
                for j in 0..=p - i {
                    out.push(px[i] * py[j]);
                }
            }
        }
    }
    out
}

/// The local function space of an element kind at a fixed degree.
#[derive(Debug)]
pub struct FunctionSpace {
    pub kind: ElementKind,
    pub degree: usize,
    pub dim: usize,
    pub mode: BasisMode,
    scale: Vec<f64>,
    gram: OnceLock<DMatrix<f64>>,
}

impl fmt::Display for FunctionSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} degree {} ({:?}, dim {})", self.kind, self.degree, self.mode, self.dim)
    }
}

impl FunctionSpace {
    pub fn new(kind: ElementKind, degree: usize, mode: BasisMode) -> Result<Self> {
        let dim = node_count(kind, degree)?;
        debug_assert_eq!(dim, space_dim(kind, degree));
        let mut space = FunctionSpace {
            kind,
            degree,
            dim,
            mode,
            scale: vec![1.0; dim],
            gram: OnceLock::new(),
        };
        if mode == BasisMode::Orthogonal {
            let rule = quadrature_rule(kind, 2 * degree);
            let mut norms = vec![0.0; dim];
            let mut buf = Vec::with_capacity(dim);
            for (x, w) in rule.points.iter().zip(&rule.weights) {
                buf.clear();
                eval_raw(kind, degree, mode, x, &mut buf);
                for (n, v) in norms.iter_mut().zip(&buf) {
                    *n += w * v * v;
                }
            }
            space.scale = norms.iter().map(|n| 1.0 / n.sqrt()).collect();
        }
        Ok(space)
    }

    /// Shared instance for `(kind, degree, mode)`.
    pub fn shared(kind: ElementKind, degree: usize, mode: BasisMode) -> Result<Arc<FunctionSpace>> {
        type Cache = Mutex<HashMap<(ElementKind, usize, BasisMode), Arc<FunctionSpace>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(s) = cache.lock().unwrap().get(&(kind, degree, mode)) {
            return Ok(Arc::clone(s));
        }
        let space = Arc::new(FunctionSpace::new(kind, degree, mode)?);
        Ok(Arc::clone(
            cache.lock().unwrap().entry((kind, degree, mode)).or_insert(space),
        ))
    }

    pub fn orthogonal(kind: ElementKind, degree: usize) -> Result<Arc<FunctionSpace>> {
        FunctionSpace::shared(kind, degree, BasisMode::Orthogonal)
    }

    /// Basis values at `x` after checking that `x` lies in the element.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let elem = reference_element(self.kind);
        if x.len() != self.kind.dim() || !elem.contains(x, CONTAINS_TOL) {
            return Err(Error::Domain(format!("point {x:?} lies outside the {}", self.kind)));
        }
        Ok(self.eval_unchecked(x))
    }

    pub fn eval_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim);
        self.eval_into(x, &mut out);
        out
    }

    pub fn eval_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        eval_raw(self.kind, self.degree, self.mode, x, out);
        for (v, s) in out.iter_mut().zip(&self.scale) {
            *v *= s;
        }
    }

    /// Basis values and Cartesian gradients at `x` (gradients padded to 3).
    pub fn eval_with_gradient(&self, x: &[f64]) -> (Vec<f64>, Vec<[f64; 3]>) {
        let xd: Vec<Dual> = x.iter().enumerate().map(|(i, v)| Dual::variable(*v, i)).collect();
        let mut out = Vec::with_capacity(self.dim);
        eval_raw(self.kind, self.degree, self.mode, &xd, &mut out);
        let vals = out.iter().zip(&self.scale).map(|(d, s)| d.v * s).collect();
        let grads = out
            .iter()
            .zip(&self.scale)
            .map(|(d, s)| [d.d[0] * s, d.d[1] * s, d.d[2] * s])
            .collect();
        (vals, grads)
    }

    /// Row-per-point matrix of basis values.
    pub fn eval_matrix(&self, points: &[Vec<f64>]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(points.len(), self.dim);
        let mut buf = Vec::with_capacity(self.dim);
        for (r, x) in points.iter().enumerate() {
            self.eval_into(x, &mut buf);
            for (c, v) in buf.iter().enumerate() {
                m[(r, c)] = *v;
            }
        }
        m
    }

    /// `∫ φ_i φ_j` over the element, by a rule exact to degree `2p`.
    pub fn gram(&self) -> &DMatrix<f64> {
        self.gram.get_or_init(|| {
            let rule = quadrature_rule(self.kind, 2 * self.degree);
            let phi = self.eval_matrix(&rule.points);
            let mut weighted = phi.clone();
            for (r, w) in rule.weights.iter().enumerate() {
                weighted.row_mut(r).scale_mut(*w);
            }
            let g = phi.transpose() * weighted;
            (&g + g.transpose()) * 0.5
        })
    }
}

/// `V[i][j] = φ_j(node_i)`.
pub fn vandermonde(space: &FunctionSpace, nodes: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if nodes.len() != space.dim {
        return Err(Error::Argument(format!(
            "node count mismatch: {space} needs {} nodes, got {}",
            space.dim,
            nodes.len()
        )));
    }
    Ok(space.eval_matrix(nodes))
}

/// Condition threshold above which a node set is treated as not unisolvent.
pub const UNISOLVENCY_THRESHOLD: f64 = 1e12;

/// One-norm condition number `‖V‖₁ ‖V⁻¹‖₁`, or infinity when singular.
pub fn condition_1norm(v: &DMatrix<f64>, inverse: Option<&DMatrix<f64>>) -> f64 {
    let norm1 = |m: &DMatrix<f64>| {
        m.column_iter()
            .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    match inverse {
        Some(inv) => norm1(v) * norm1(inv),
        None => match v.clone().lu().try_inverse() {
            Some(inv) => norm1(v) * norm1(&inv),
            None => f64::INFINITY,
        },
    }
}

/// Lagrange basis of a node set: `ℓ(x) = V⁻ᵀ φ(x)`.
#[derive(Debug, Clone)]
pub struct LagrangeBasis {
    pub space: Arc<FunctionSpace>,
    pub vandermonde: DMatrix<f64>,
    /// `V⁻¹`, whose column `i` holds the coefficients of `ℓ_i`.
    pub coefficients: DMatrix<f64>,
    pub condition: f64,
}

impl LagrangeBasis {
    pub fn new(space: Arc<FunctionSpace>, nodes: &[Vec<f64>]) -> Result<Self> {
        let v = vandermonde(&space, nodes)?;
        // LU of Vᵀ with row pivoting is column pivoting of V
        let inv_t = v
            .transpose()
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::Unisolvency("Vandermonde matrix is singular".into()))?;
        let coefficients = inv_t.transpose();
        let condition = condition_1norm(&v, Some(&coefficients));
        if !condition.is_finite() || condition >= UNISOLVENCY_THRESHOLD {
            return Err(Error::Unisolvency(format!(
                "Vandermonde condition estimate {condition:.3e}"
            )));
        }
        Ok(LagrangeBasis {
            space,
            vandermonde: v,
            coefficients,
            condition,
        })
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let phi = self.space.eval(x)?;
        Ok(self.from_basis_values(&phi))
    }

    pub fn from_basis_values(&self, phi: &[f64]) -> Vec<f64> {
        let n = self.space.dim;
        let mut out = vec![0.0; n];
        for (j, pj) in phi.iter().enumerate() {
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.coefficients[(j, i)] * pj;
            }
        }
        out
    }

    /// Lagrange values at many points, one row per point.
    pub fn eval_matrix(&self, points: &[Vec<f64>]) -> DMatrix<f64> {
        self.space.eval_matrix(points) * &self.coefficients
    }
}

/// Convenience wrapper: Lagrange values of `nodes` at `x`.
pub fn lagrange_eval(space: Arc<FunctionSpace>, nodes: &[Vec<f64>], x: &[f64]) -> Result<Vec<f64>> {
    LagrangeBasis::new(space, nodes)?.eval(x)
}
