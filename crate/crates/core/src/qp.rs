//! Dense strictly convex quadratic programs with two-sided linear constraints.
//!
//! Solves `min ½ xᵀGx + aᵀx  s.t.  lo ≤ Cx ≤ hi` with the dual active-set
//! method of Goldfarb and Idnani. The method starts from the unconstrained
//! minimizer, so no feasible starting point is required, and it detects
//! infeasibility when a violated constraint can no longer be reached.
//! Problem sizes here are small (tens to a few hundred variables), so the
//! factorization is rebuilt from scratch whenever the active set changes.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

struct Row {
    normal: DVector<f64>,
    rhs: f64,
    equality: bool,
}

/// Solution of a QP together with the rows of `C` active at the solution.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub active_rows: Vec<usize>,
}

fn one_sided_rows(c: &DMatrix<f64>, lo: &[f64], hi: &[f64]) -> Result<(Vec<Row>, Vec<usize>)> {
    let mut rows = Vec::new();
    let mut origin = Vec::new();
    for r in 0..c.nrows() {
        let normal: DVector<f64> = c.row(r).transpose();
        let (l, h) = (lo[r], hi[r]);
        if l > h + 1e-13 * (1.0 + l.abs()) {
            return Err(Error::ConstraintConflict(format!(
                "row {r} has lower bound {l} above upper bound {h}"
            )));
        }
        if normal.norm() == 0.0 {
            let ok = (l <= 1e-12 || !l.is_finite()) && (h >= -1e-12 || !h.is_finite());
            if !ok {
                return Err(Error::ConstraintConflict(format!(
                    "zero row {r} requires {l} ≤ 0 ≤ {h}"
                )));
            }
            continue;
        }
        if l.is_finite() && h.is_finite() && (h - l).abs() <= 1e-15 * (1.0 + l.abs()) {
            rows.push(Row {
                normal,
                rhs: 0.5 * (l + h),
                equality: true,
            });
            origin.push(r);
            continue;
        }
        if l.is_finite() {
            rows.push(Row {
                normal: normal.clone(),
                rhs: l,
                equality: false,
            });
            origin.push(r);
        }
        if h.is_finite() {
            rows.push(Row {
                normal: -normal,
                rhs: -h,
                equality: false,
            });
            origin.push(r);
        }
    }
    Ok((rows, origin))
}

struct Factor {
    j: DMatrix<f64>,
    r: DMatrix<f64>,
}

fn refactor(linv: &DMatrix<f64>, rows: &[Row], active: &[usize]) -> Factor {
    let n = linv.nrows();
    let q = active.len();
    if q == 0 {
        return Factor {
            j: linv.transpose(),
            r: DMatrix::zeros(0, 0),
        };
    }
    let mut aug = DMatrix::zeros(n, q + n);
    for (col, &idx) in active.iter().enumerate() {
        let b = linv * &rows[idx].normal;
        aug.set_column(col, &b);
    }
    aug.view_mut((0, q), (n, n)).fill_with_identity();
    let qr = aug.qr();
    let qmat = qr.q();
    let rfull = qr.r();
    Factor {
        j: linv.transpose() * qmat,
        r: rfull.view((0, 0), (q, q)).into_owned(),
    }
}

fn back_substitute(r: &DMatrix<f64>, rhs: &[f64]) -> Vec<f64> {
    let q = rhs.len();
    let mut out = vec![0.0; q];
    for i in (0..q).rev() {
        let mut s = rhs[i];
        for k in i + 1..q {
            s -= r[(i, k)] * out[k];
        }
        out[i] = s / r[(i, i)];
    }
    out
}

/// Minimize `½ xᵀGx + aᵀx` subject to `lo ≤ Cx ≤ hi` (entries may be ±∞;
/// equal finite bounds make an equality).
pub fn solve_qp(
    g: &DMatrix<f64>,
    a: &DVector<f64>,
    c: &DMatrix<f64>,
    lo: &[f64],
    hi: &[f64],
) -> Result<QpSolution> {
    let n = g.nrows();
    if c.ncols() != n && c.nrows() > 0 {
        return Err(Error::Argument("constraint matrix width mismatch".into()));
    }
    let (rows, origin) = one_sided_rows(c, lo, hi)?;
    let chol = Cholesky::new(g.clone())
        .ok_or_else(|| Error::Numerical("QP Hessian is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let mut x = -chol.solve(a);
    let mut active: Vec<usize> = Vec::new();
    let mut mult: Vec<f64> = Vec::new();
    let mut skipped = vec![false; rows.len()];
    let mut fac = refactor(&linv, &rows, &active);
    let max_iter = 20 * (n + rows.len()) + 100;
    let mut iter = 0;

    let slack = |row: &Row, x: &DVector<f64>| row.normal.dot(x) - row.rhs;
    let tol_of = |row: &Row, x: &DVector<f64>| {
        1e-13 * (1.0 + row.rhs.abs() + row.normal.amax() * x.amax())
    };

    loop {
        // pick the next constraint: pending equalities first, then the most violated inequality
        let mut pick = None;
        for (idx, row) in rows.iter().enumerate() {
            if row.equality && !skipped[idx] && !active.contains(&idx) {
                pick = Some(idx);
                break;
            }
        }
        if pick.is_none() {
            let mut worst = 0.0;
            for (idx, row) in rows.iter().enumerate() {
                if row.equality || active.contains(&idx) {
                    continue;
                }
                let s = slack(row, &x);
                if s < -tol_of(row, &x) {
                    let scaled = s / row.normal.norm();
                    if scaled < worst {
                        worst = scaled;
                        pick = Some(idx);
                    }
                }
            }
        }
        let Some(p) = pick else {
            let active_rows = active.iter().map(|&i| origin[i]).collect();
            return Ok(QpSolution { x, active_rows });
        };

        let flip = rows[p].equality && slack(&rows[p], &x) > 0.0;
        let sign = if flip { -1.0 } else { 1.0 };
        let np = &rows[p].normal * sign;
        let bp = rows[p].rhs * sign;
        let mut new_mult = 0.0;

        loop {
            iter += 1;
            if iter > max_iter {
                return Err(Error::Numerical("QP active-set iteration limit reached".into()));
            }
            let s = np.dot(&x) - bp;
            let q = active.len();
            let d = fac.j.transpose() * &np;
            let d1: Vec<f64> = d.rows(0, q).iter().copied().collect();
            let d2 = d.rows(q, n - q).into_owned();
            let dependent = d2.norm() <= 1e-11 * d.norm();
            let z = if dependent {
                DVector::zeros(n)
            } else {
                fac.j.columns(q, n - q) * &d2
            };
            let rr = back_substitute(&fac.r, &d1);

            if rows[p].equality && dependent && s.abs() <= tol_of(&rows[p], &x) * 10.0 {
                skipped[p] = true;
                break;
            }

            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for (i, &idx) in active.iter().enumerate() {
                if !rows[idx].equality && rr[i] > 1e-14 {
                    let ratio = mult[i] / rr[i];
                    if ratio < t1 {
                        t1 = ratio;
                        drop = Some(i);
                    }
                }
            }
            let t2 = if dependent {
                f64::INFINITY
            } else {
                -s / z.dot(&np)
            };
            let t = t1.min(t2);
            if !t.is_finite() {
                return Err(Error::ConstraintConflict(
                    "linear constraints have an empty intersection".into(),
                ));
            }
            if t2.is_infinite() {
                for i in 0..q {
                    mult[i] -= t * rr[i];
                }
                new_mult += t;
                let k = drop.expect("finite partial step has a blocking constraint");
                active.remove(k);
                mult.remove(k);
                fac = refactor(&linv, &rows, &active);
                continue;
            }
            x += &z * t;
            for i in 0..q {
                mult[i] -= t * rr[i];
            }
            new_mult += t;
            if t2 <= t1 {
                active.push(p);
                mult.push(new_mult);
                fac = refactor(&linv, &rows, &active);
                break;
            }
            let k = drop.expect("partial step has a blocking constraint");
            active.remove(k);
            mult.remove(k);
            fac = refactor(&linv, &rows, &active);
        }
    }
}

/// Euclidean projection of `point` onto `{x | lo ≤ Cx ≤ hi}`.
pub fn project(point: &DVector<f64>, c: &DMatrix<f64>, lo: &[f64], hi: &[f64]) -> Result<DVector<f64>> {
    let n = point.len();
    if n == 0 {
        // still validate constant rows
        one_sided_rows(c, lo, hi)?;
        return Ok(DVector::zeros(0));
    }
    let g = DMatrix::identity(n, n);
    Ok(solve_qp(&g, &(-point), c, lo, hi)?.x)
}

/// Largest violation of `lo ≤ Cx ≤ hi`.
pub fn violation(x: &DVector<f64>, c: &DMatrix<f64>, lo: &[f64], hi: &[f64]) -> f64 {
    if c.nrows() == 0 {
        return 0.0;
    }
    let v = if c.ncols() == 0 {
        DVector::zeros(c.nrows())
    } else {
        c * x
    };
    let mut worst: f64 = 0.0;
    for r in 0..c.nrows() {
        if lo[r].is_finite() {
            worst = worst.max(lo[r] - v[r]);
        }
        if hi[r].is_finite() {
            worst = worst.max(v[r] - hi[r]);
        }
    }
    worst
}
