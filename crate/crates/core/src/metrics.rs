//! Interpolation quality measures of a node set.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::basis::{condition_1norm, FunctionSpace, LagrangeBasis, UNISOLVENCY_THRESHOLD};
use crate::error::{Error, Result};
use crate::geometry::{reference_element, ElementKind};
use crate::parallel::{map_range, ExecMode};
use crate::quadrature::{quadrature_rule, QuadratureRule};
use crate::symmetry::NodalDistribution;

/// Resolution used by the unisolvency screen.
pub const COARSE_RESOLUTION: usize = 20;

/// Lattice points evaluated per batch when sampling.
const SAMPLE_CHUNK: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub lebesgue_constant: f64,
    pub lebesgue_objective: f64,
    pub mass_condition: f64,
    pub unisolvent: bool,
    pub sampler_resolution: usize,
}

/// Default lattice resolution per dimension: 1000, 300 and 60 for
/// dimensions 1, 2 and 3.
pub fn default_resolution(kind: ElementKind) -> usize {
    match kind.dim() {
        1 => 1000,
        2 => 300,
        _ => 60,
    }
}

/// Sample set for the Lebesgue constant: a uniform lattice with
/// `resolution` points per coordinate over `[-1, 1]^d` restricted to the
/// element, followed by the vertices and the points of the degree `2p`
/// quadrature rule.
pub fn sample_points(kind: ElementKind, degree: usize, resolution: usize) -> Vec<Vec<f64>> {
    let elem = reference_element(kind);
    let d = kind.dim();
    let mut pts = Vec::new();
    if resolution >= 2 {
        let coord = |i: usize| -1.0 + 2.0 * i as f64 / (resolution - 1) as f64;
        let total = resolution.pow(d as u32);
        for flat in 0..total {
            let mut rem = flat;
            let mut x = vec![0.0; d];
            for c in (0..d).rev() {
                x[c] = coord(rem % resolution);
                rem /= resolution;
            }
            if elem.contains(&x, 1e-12) {
                pts.push(x);
            }
        }
    } else if resolution == 1 {
        pts.push(elem.vertices.iter().fold(vec![0.0; d], |mut acc, v| {
            for (a, b) in acc.iter_mut().zip(v) {
                *a += b / elem.vertices.len() as f64;
            }
            acc
        }));
    }
    pts.extend(elem.vertices.iter().cloned());
    pts.extend(quadrature_rule(kind, 2 * degree).points.iter().cloned());
    pts
}

/// `max_x Σ_i |ℓ_i(x)|` over `points`.
pub fn lebesgue_on_points(basis: &LagrangeBasis, points: &[Vec<f64>], mode: ExecMode) -> f64 {
    let chunks = points.len().div_ceil(SAMPLE_CHUNK);
    let maxima = map_range(mode, chunks, |c| {
        let lo = c * SAMPLE_CHUNK;
        let hi = (lo + SAMPLE_CHUNK).min(points.len());
        let l = basis.eval_matrix(&points[lo..hi]);
        l.row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    });
    maxima.into_iter().fold(0.0, f64::max)
}

fn basis_for(space: &Arc<FunctionSpace>, dist: &NodalDistribution) -> Result<LagrangeBasis> {
    if dist.kind != space.kind || dist.degree != space.degree {
        return Err(Error::Argument(format!(
            "distribution is {} degree {}, space is {space}",
            dist.kind, dist.degree
        )));
    }
    LagrangeBasis::new(Arc::clone(space), &dist.nodes)
}

/// Lebesgue constant estimated by deterministic sampling.
pub fn lebesgue_constant(space: &Arc<FunctionSpace>, dist: &NodalDistribution, resolution: usize) -> Result<f64> {
    lebesgue_constant_with(space, dist, resolution, ExecMode::default())
}

pub fn lebesgue_constant_with(
    space: &Arc<FunctionSpace>,
    dist: &NodalDistribution,
    resolution: usize,
    mode: ExecMode,
) -> Result<f64> {
    let basis = basis_for(space, dist)?;
    let pts = sample_points(space.kind, space.degree, resolution);
    Ok(lebesgue_on_points(&basis, &pts, mode))
}

fn check_rule(space: &FunctionSpace, rule: &QuadratureRule) -> Result<()> {
    if rule.kind != space.kind {
        return Err(Error::Argument("quadrature rule is for another element".into()));
    }
    if rule.exactness < 2 * space.degree {
        return Err(Error::Argument(format!(
            "quadrature exactness {} is below {}",
            rule.exactness,
            2 * space.degree
        )));
    }
    Ok(())
}

/// Lagrange values at the quadrature points, one row per point.
fn lagrange_at_rule(basis: &LagrangeBasis, rule: &QuadratureRule) -> DMatrix<f64> {
    basis.eval_matrix(&rule.points)
}

/// `Σ_i ∫ ℓ_i²`, evaluated by the quadrature rule.
pub fn lebesgue_objective(space: &Arc<FunctionSpace>, dist: &NodalDistribution, rule: &QuadratureRule) -> Result<f64> {
    check_rule(space, rule)?;
    let basis = basis_for(space, dist)?;
    let l = lagrange_at_rule(&basis, rule);
    Ok(l.row_iter()
        .zip(&rule.weights)
        .map(|(r, w)| w * r.iter().map(|v| v * v).sum::<f64>())
        .sum())
}

/// Lagrange mass matrix `M_ij = ∫ ℓ_i ℓ_j` and its spectral condition number.
pub fn mass_matrix(
    space: &Arc<FunctionSpace>,
    dist: &NodalDistribution,
    rule: &QuadratureRule,
) -> Result<(DMatrix<f64>, f64)> {
    check_rule(space, rule)?;
    let basis = basis_for(space, dist)?;
    let l = lagrange_at_rule(&basis, rule);
    let mut wl = l.clone();
    for (r, w) in rule.weights.iter().enumerate() {
        wl.row_mut(r).scale_mut(*w);
    }
    let m = l.transpose() * wl;
    let sym = (&m + m.transpose()) * 0.5;
    let cond = spd_condition(&sym)?;
    Ok((sym, cond))
}

/// Ratio of extreme eigenvalues of a symmetric positive definite matrix.
pub fn spd_condition(m: &DMatrix<f64>) -> Result<f64> {
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let max = eig.max();
    let min = eig.min();
    if min <= 0.0 || max <= 0.0 {
        return Err(Error::Numerical(format!(
            "mass matrix is not positive definite (eigenvalues in [{min:.3e}, {max:.3e}])"
        )));
    }
    Ok(max / min)
}

/// Vandermonde condition below the threshold and a coarse Lebesgue
/// estimate below the same threshold.
pub fn is_unisolvent(space: &Arc<FunctionSpace>, dist: &NodalDistribution) -> bool {
    unisolvency_estimates(space, dist, ExecMode::default())
        .map(|(v, l)| v < UNISOLVENCY_THRESHOLD && l < UNISOLVENCY_THRESHOLD)
        .unwrap_or(false)
}

/// `(Vandermonde condition, coarse Lebesgue constant)`; infinite when the
/// Vandermonde matrix is singular.
pub fn unisolvency_estimates(
    space: &Arc<FunctionSpace>,
    dist: &NodalDistribution,
    mode: ExecMode,
) -> Result<(f64, f64)> {
    let v = crate::basis::vandermonde(space, &dist.nodes)?;
    let Some(inv_t) = v.transpose().lu().try_inverse() else {
        return Ok((f64::INFINITY, f64::INFINITY));
    };
    let coefficients = inv_t.transpose();
    let cond = condition_1norm(&v, Some(&coefficients));
    if !cond.is_finite() {
        return Ok((f64::INFINITY, f64::INFINITY));
    }
    let basis = LagrangeBasis {
        space: Arc::clone(space),
        vandermonde: v,
        coefficients,
        condition: cond,
    };
    let pts = sample_points(space.kind, space.degree, COARSE_RESOLUTION);
    Ok((cond, lebesgue_on_points(&basis, &pts, mode)))
}

/// All metrics at the given sampler resolution.
pub fn evaluate(dist: &NodalDistribution, resolution: usize, mode: ExecMode) -> Result<MetricReport> {
    let space = FunctionSpace::orthogonal(dist.kind, dist.degree)?;
    let unisolvent = is_unisolvent(&space, dist);
    if !unisolvent {
        return Err(Error::Unisolvency(format!(
            "{} degree {} node set fails the unisolvency screen",
            dist.kind, dist.degree
        )));
    }
    let rule = quadrature_rule(dist.kind, 2 * dist.degree);
    let lebesgue_constant = lebesgue_constant_with(&space, dist, resolution, mode)?;
    let lebesgue_objective = lebesgue_objective(&space, dist, &rule)?;
    let (_, mass_condition) = mass_matrix(&space, dist, &rule)?;
    Ok(MetricReport {
        lebesgue_constant,
        lebesgue_objective,
        mass_condition,
        unisolvent,
        sampler_resolution: resolution,
    })
}
