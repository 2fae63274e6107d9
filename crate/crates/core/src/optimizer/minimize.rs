//! Sequential quadratic programming over linearly constrained parameters.
//!
//! Equality rows are eliminated through an orthonormal null-space basis
//! `Z`, so iterates are `x = x₀ + Z z` with `x₀` the projection of the
//! starting point. Each major iteration solves a convex QP with a damped
//! BFGS Hessian and the remaining inequality rows, then backtracks along
//! the step until the Armijo condition holds.

use nalgebra::{DMatrix, DVector};

use super::{equality_null_space, equality_rows, ConvergenceStatus, OptimizerConfig};
use crate::error::{Error, Result};
use crate::qp;
use crate::symmetry::LinearConstraintSet;

/// A smooth function on a linearly constrained parameter space.
pub trait Objective: Sync {
    fn constraints(&self) -> &LinearConstraintSet;
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;
}

#[derive(Debug, Clone)]
pub struct MinimizeOutcome {
    pub x: Vec<f64>,
    /// `+∞` when the starting point could not be evaluated.
    pub value: f64,
    pub initial_value: f64,
    pub status: ConvergenceStatus,
    pub iterations: usize,
    /// `‖Proj(z - ∇f) - z‖∞` at the returned point.
    pub kkt: f64,
}

const ARMIJO_C1: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;
const ROUNDOFF: f64 = 8.0 * f64::EPSILON;

/// Inequality rows of the constraints expressed in null-space coordinates.
struct Reduced {
    base: DVector<f64>,
    z: DMatrix<f64>,
    c: DMatrix<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Reduced {
    fn new(set: &LinearConstraintSet, base: Vec<f64>) -> Self {
        let z = equality_null_space(set);
        let base = DVector::from_vec(base);
        let eq = equality_rows(set);
        let mut rows = Vec::new();
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for r in (0..set.rows()).filter(|r| !eq.contains(r)) {
            let full = set.matrix.row(r);
            let reduced = full * &z;
            if reduced.amax() <= 1e-12 * full.amax().max(1.0) {
                // constant on the feasible affine subspace, already satisfied
                continue;
            }
            let at_base = (full * &base)[0];
            rows.push(reduced);
            lo.push(set.lower[r] - at_base);
            hi.push(set.upper[r] - at_base);
        }
        let mut c = DMatrix::zeros(rows.len(), z.ncols());
        for (i, r) in rows.iter().enumerate() {
            c.set_row(i, r);
        }
        Reduced { base, z, c, lo, hi }
    }

    fn dim(&self) -> usize {
        self.z.ncols()
    }

    fn full(&self, z: &DVector<f64>) -> Vec<f64> {
        if self.dim() == 0 {
            return self.base.iter().copied().collect();
        }
        (&self.base + &self.z * z).iter().copied().collect()
    }

    fn shifted_bounds(&self, z: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
        let cz = &self.c * z;
        let lo = self.lo.iter().zip(cz.iter()).map(|(l, v)| l - v).collect();
        let hi = self.hi.iter().zip(cz.iter()).map(|(h, v)| h - v).collect();
        (lo, hi)
    }

    fn kkt(&self, z: &DVector<f64>, g: &DVector<f64>) -> Result<f64> {
        let p = qp::project(&(z - g), &self.c, &self.lo, &self.hi)?;
        Ok((p - z).amax())
    }
}

/// Minimize `obj` from `x0` (projected onto the feasible set first).
pub fn minimize<O: Objective + ?Sized>(obj: &O, x0: &[f64], config: &OptimizerConfig) -> Result<MinimizeOutcome> {
    let set = obj.constraints();
    if x0.len() != set.cols() {
        return Err(Error::Argument(format!(
            "starting point has {} entries, expected {}",
            x0.len(),
            set.cols()
        )));
    }
    let start = set.project(x0)?;
    let red = Reduced::new(set, start);
    let n = red.dim();
    let mut z = DVector::zeros(n);
    let mut x = red.full(&z);

    let (mut f, gfull) = match obj.value_and_gradient(&x) {
        Ok(v) => v,
        Err(_) => {
            return Ok(MinimizeOutcome {
                x,
                value: f64::INFINITY,
                initial_value: f64::INFINITY,
                status: ConvergenceStatus::EvaluationFailed,
                iterations: 0,
                kkt: f64::INFINITY,
            })
        }
    };
    let initial_value = f;
    let reduce = |g: &[f64]| -> DVector<f64> { red.z.transpose() * DVector::from_column_slice(g) };
    let mut g = reduce(&gfull);
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut h_is_identity = true;
    let mut status = ConvergenceStatus::IterationLimited;
    let mut kkt = if n == 0 { 0.0 } else { red.kkt(&z, &g)? };
    let mut iterations = 0;

    while iterations < config.max_major_iterations {
        if kkt <= config.kkt_tol {
            status = ConvergenceStatus::KktConverged;
            break;
        }
        let (lo, hi) = red.shifted_bounds(&z);
        let step = qp::solve_qp(&h, &g, &red.c, &lo, &hi).ok().map(|s| s.x);
        let slope = step.as_ref().map(|d| g.dot(d)).unwrap_or(0.0);
        let Some(d) = step.filter(|d| slope < 0.0 && d.amax() > 0.0) else {
            if h_is_identity {
                break;
            }
            h = DMatrix::identity(n, n);
            h_is_identity = true;
            continue;
        };
        iterations += 1;

        let mut t = 1.0;
        let mut accepted = None;
        while t * d.amax() >= MIN_STEP {
            let zt = &z + &d * t;
            let xt = red.full(&zt);
            let ft = obj.value(&xt).unwrap_or(f64::INFINITY);
            let armijo = ft <= f + ARMIJO_C1 * t * slope;
            // Close to a minimizer the predicted decrease drops below the
            // rounding error of f; accept then if f is flat to rounding
            // and the slope along d has shrunk.
            let flat = ft <= f + ROUNDOFF * f.abs().max(1.0);
            if ft.is_finite() && (armijo || flat) {
                if let Ok((ft, gt)) = obj.value_and_gradient(&xt) {
                    let gt = reduce(&gt);
                    if armijo || gt.dot(&d).abs() <= 0.5 * slope.abs() {
                        accepted = Some((zt, xt, ft, gt));
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        let Some((zn, xn, fn_, gn)) = accepted else {
            if h_is_identity {
                break;
            }
            h = DMatrix::identity(n, n);
            h_is_identity = true;
            continue;
        };

        let s = &zn - &z;
        let y = &gn - &g;
        damped_bfgs_update(&mut h, &s, &y);
        h_is_identity = false;
        z = zn;
        x = xn;
        f = fn_;
        g = gn;
        kkt = red.kkt(&z, &g)?;
    }
    if kkt <= config.kkt_tol {
        status = ConvergenceStatus::KktConverged;
    }
    Ok(MinimizeOutcome {
        x,
        value: f,
        initial_value,
        status,
        iterations,
        kkt,
    })
}

/// Powell-damped BFGS update, which keeps `h` positive definite.
fn damped_bfgs_update(h: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) {
    let hs = &*h * s;
    let shs = s.dot(&hs);
    if !(shs > 0.0) {
        return;
    }
    let sy = s.dot(y);
    let theta = if sy >= 0.2 * shs { 1.0 } else { 0.8 * shs / (shs - sy) };
    let r = y * theta + &hs * (1.0 - theta);
    let sr = s.dot(&r);
    if !(sr > 0.0) {
        return;
    }
    *h -= &hs * hs.transpose() / shs;
    *h += &r * r.transpose() / sr;
}
