//! Symmetry orbits, their parameter bounds, and orbit collections.
//!
//! An orbit of kind `k` maps `l` parameters `ξ` to `m` natural coordinates
//! `S_i ξ + σ_i`. The tables are generated from the first point of each
//! orbit and the symmetry group of the element acting on natural
//! coordinates; distinct images are kept in group-enumeration order, so
//! point 1 is always the untransformed template.
//!
//! Group enumeration order per kind (identity first):
//! - line: sign `+`, then `-`;
//! - triangle / tetrahedron: permutations of the barycentric coordinates in
//!   lexicographic order;
//! - quadrilateral / hexahedron: coordinate permutations in lexicographic
//!   order, each followed by the sign patterns `(+…+), …, (-…-)` in
//!   binary counting order (last coordinate flips fastest);
//! - prism: permutations of the first three coordinates, each with the
//!   extruded coordinate `+` then `-`;
//! - pyramid: the quadrilateral pattern on `(x, y)` with `z` fixed.

use std::fmt;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{node_count_unchecked, reference_element, ElementKind, ReferenceElement};
use crate::qp;

/// Minimum Cartesian distance between two distinct nodes.
pub const DUPLICATE_NODE_TOL: f64 = 1e-8;

/// Feasibility slack used when checking parameter vectors.
pub const PARAM_FEAS_TOL: f64 = 1e-10;

/// Two-sided linear constraints `lower ≤ B ξ ≤ upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraintSet {
    pub matrix: DMatrix<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearConstraintSet {
    pub fn empty(cols: usize) -> Self {
        LinearConstraintSet {
            matrix: DMatrix::zeros(0, cols),
            lower: Vec::new(),
            upper: Vec::new(),
        }
    }

    pub fn new(matrix: DMatrix<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != matrix.nrows() || upper.len() != matrix.nrows() {
            return Err(Error::Argument("constraint bound length mismatch".into()));
        }
        for (r, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if l > u {
                return Err(Error::Argument(format!("row {r}: lower bound {l} exceeds upper bound {u}")));
            }
        }
        Ok(LinearConstraintSet { matrix, lower, upper })
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.rows() == 0
    }

    pub fn violation(&self, x: &[f64]) -> f64 {
        qp::violation(&DVector::from_column_slice(x), &self.matrix, &self.lower, &self.upper)
    }

    /// Rows of `self` followed by the rows of `other` (same column count).
    pub fn stacked(&self, other: &LinearConstraintSet) -> LinearConstraintSet {
        assert_eq!(self.cols(), other.cols());
        let mut m = DMatrix::zeros(self.rows() + other.rows(), self.cols());
        m.view_mut((0, 0), (self.rows(), self.cols())).copy_from(&self.matrix);
        m.view_mut((self.rows(), 0), (other.rows(), self.cols()))
            .copy_from(&other.matrix);
        let mut lower = self.lower.clone();
        lower.extend_from_slice(&other.lower);
        let mut upper = self.upper.clone();
        upper.extend_from_slice(&other.upper);
        LinearConstraintSet { matrix: m, lower, upper }
    }

    /// Block-diagonal assembly of independent constraint sets.
    pub fn block_diagonal(blocks: &[LinearConstraintSet]) -> LinearConstraintSet {
        let rows: usize = blocks.iter().map(|b| b.rows()).sum();
        let cols: usize = blocks.iter().map(|b| b.cols()).sum();
        let mut m = DMatrix::zeros(rows, cols);
        let (mut r0, mut c0) = (0, 0);
        let mut lower = Vec::with_capacity(rows);
        let mut upper = Vec::with_capacity(rows);
        for b in blocks {
            m.view_mut((r0, c0), (b.rows(), b.cols())).copy_from(&b.matrix);
            lower.extend_from_slice(&b.lower);
            upper.extend_from_slice(&b.upper);
            r0 += b.rows();
            c0 += b.cols();
        }
        LinearConstraintSet { matrix: m, lower, upper }
    }

    /// Euclidean projection onto the feasible set.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        let p = qp::project(&DVector::from_column_slice(x), &self.matrix, &self.lower, &self.upper)?;
        Ok(p.iter().copied().collect())
    }
}

/// Affine map `ξ ↦ S ξ + σ` producing one point of an orbit.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePoint {
    pub s: DMatrix<f64>,
    pub sigma: DVector<f64>,
}

impl AffinePoint {
    pub fn apply(&self, xi: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.sigma.iter().copied().collect();
        for (r, o) in out.iter_mut().enumerate() {
            for (c, x) in xi.iter().enumerate() {
                *o += self.s[(r, c)] * x;
            }
        }
        out
    }

    /// Least-squares solution of `S ξ = λ - σ` and its residual norm.
    pub fn solve(&self, lambda: &[f64]) -> (Vec<f64>, f64) {
        let l = self.s.ncols();
        let rhs = DVector::from_column_slice(lambda) - &self.sigma;
        if l == 0 {
            return (Vec::new(), rhs.norm());
        }
        let st = self.s.transpose();
        let xi = (&st * &self.s)
            .cholesky()
            .expect("orbit maps have full column rank")
            .solve(&(&st * &rhs));
        let resid = (&self.s * &xi - rhs).norm();
        (xi.iter().copied().collect(), resid)
    }
}

#[derive(Debug, Clone)]
pub struct SymmetryOrbit {
    pub kind: ElementKind,
    /// One-based orbit index.
    pub index: usize,
    pub params: usize,
    pub points: Vec<AffinePoint>,
    /// Simplified parameter bounds.
    pub bounds: LinearConstraintSet,
}

impl SymmetryOrbit {
    pub fn multiplicity(&self) -> usize {
        self.points.len()
    }

    /// Natural coordinates of all points without a feasibility check.
    pub fn natural_points(&self, xi: &[f64]) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.apply(xi)).collect()
    }

    pub fn cartesian_points(&self, xi: &[f64]) -> Vec<Vec<f64>> {
        let elem = reference_element(self.kind);
        self.points
            .iter()
            .map(|p| elem.map_natural(&p.apply(xi)))
            .collect()
    }
}

impl fmt::Display for SymmetryOrbit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} orbit {} (l={}, m={})", self.kind, self.index, self.params, self.multiplicity())
    }
}

#[derive(Debug, Clone)]
struct SignedPerm {
    perm: Vec<usize>,
    sign: Vec<f64>,
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for i in 0..n {
            if !prefix.contains(&i) {
                prefix.push(i);
                rec(prefix, n, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), n, &mut out);
    out
}

fn sign_patterns(n: usize) -> Vec<Vec<f64>> {
    (0..1usize << n)
        .map(|bits| {
            (0..n)
                .map(|t| if bits >> (n - 1 - t) & 1 == 1 { -1.0 } else { 1.0 })
                .collect()
        })
        .collect()
}

/// Symmetry group of the element acting on natural coordinates as
/// `λ'_t = sign_t · λ_{perm_t}`.
fn natural_group(kind: ElementKind) -> Vec<SignedPerm> {
    use ElementKind::*;
    let plain = |n: usize| {
        permutations(n)
            .into_iter()
            .map(|perm| SignedPerm { perm, sign: vec![1.0; n] })
            .collect::<Vec<_>>()
    };
    let signed = |n: usize, fixed: usize| {
        let mut out = Vec::new();
        for perm in permutations(n) {
            for sign in sign_patterns(n) {
                let mut p = perm.clone();
                let mut s = sign.clone();
                for f in 0..fixed {
                    p.push(n + f);
                    s.push(1.0);
                }
                out.push(SignedPerm { perm: p, sign: s });
            }
        }
        out
    };
    match kind {
        Line => vec![
            SignedPerm { perm: vec![0], sign: vec![1.0] },
            SignedPerm { perm: vec![0], sign: vec![-1.0] },
        ],
        Triangle => plain(3),
        Tetrahedron => plain(4),
        Quadrilateral => signed(2, 0),
        Hexahedron => signed(3, 0),
        Pyramid => signed(2, 1),
        Prism => {
            let mut out = Vec::new();
            for perm in permutations(3) {
                for s in [1.0, -1.0] {
                    let mut p = perm.clone();
                    p.push(3);
                    out.push(SignedPerm { perm: p, sign: vec![1.0, 1.0, 1.0, s] });
                }
            }
            out
        }
    }
}

/// `(parameter count, rows of the first point as (coefficients, constant))`.
type Template = (usize, Vec<(Vec<f64>, f64)>);

fn templates(kind: ElementKind) -> Vec<Template> {
    use ElementKind::*;
    let c = |v: f64| (vec![], v);
    let third = 1.0 / 3.0;
    match kind {
        Line => vec![(0, vec![c(0.0)]), (1, vec![(vec![1.0], 0.0)])],
        Triangle => vec![
            (0, vec![c(third), c(third), c(third)]),
            (1, vec![(vec![1.0], 0.0), (vec![1.0], 0.0), (vec![-2.0], 1.0)]),
            (
                2,
                vec![(vec![1.0, 0.0], 0.0), (vec![0.0, 1.0], 0.0), (vec![-1.0, -1.0], 1.0)],
            ),
        ],
        Quadrilateral => vec![
            (0, vec![c(0.0), c(0.0)]),
            (1, vec![(vec![1.0], 0.0), (vec![0.0], 0.0)]),
            (1, vec![(vec![1.0], 0.0), (vec![1.0], 0.0)]),
            (2, vec![(vec![1.0, 0.0], 0.0), (vec![0.0, 1.0], 0.0)]),
        ],
        Tetrahedron => vec![
            (0, vec![c(0.25), c(0.25), c(0.25), c(0.25)]),
            (
                1,
                vec![(vec![1.0], 0.0), (vec![1.0], 0.0), (vec![1.0], 0.0), (vec![-3.0], 1.0)],
            ),
            (
                1,
                vec![(vec![1.0], 0.0), (vec![1.0], 0.0), (vec![-1.0], 0.5), (vec![-1.0], 0.5)],
            ),
            (
                2,
                vec![
                    (vec![1.0, 0.0], 0.0),
                    (vec![1.0, 0.0], 0.0),
                    (vec![0.0, 1.0], 0.0),
                    (vec![-2.0, -1.0], 1.0),
                ],
            ),
            (
                3,
                vec![
                    (vec![1.0, 0.0, 0.0], 0.0),
                    (vec![0.0, 1.0, 0.0], 0.0),
                    (vec![0.0, 0.0, 1.0], 0.0),
                    (vec![-1.0, -1.0, -1.0], 1.0),
                ],
            ),
        ],
        Hexahedron => vec![
            (0, vec![c(0.0), c(0.0), c(0.0)]),
            (1, vec![(vec![1.0], 0.0), (vec![0.0], 0.0), (vec![0.0], 0.0)]),
            (1, vec![(vec![1.0], 0.0), (vec![1.0], 0.0), (vec![1.0], 0.0)]),
            (1, vec![(vec![1.0], 0.0), (vec![1.0], 0.0), (vec![0.0], 0.0)]),
            (
                2,
                vec![(vec![1.0, 0.0], 0.0), (vec![0.0, 1.0], 0.0), (vec![0.0, 0.0], 0.0)],
            ),
            (
                2,
                vec![(vec![1.0, 0.0], 0.0), (vec![1.0, 0.0], 0.0), (vec![0.0, 1.0], 0.0)],
            ),
            (
                3,
                vec![
                    (vec![1.0, 0.0, 0.0], 0.0),
                    (vec![0.0, 1.0, 0.0], 0.0),
                    (vec![0.0, 0.0, 1.0], 0.0),
                ],
            ),
        ],
        Prism => vec![
            (0, vec![c(third), c(third), c(third), c(0.0)]),
            (
                1,
                vec![(vec![0.0], third), (vec![0.0], third), (vec![0.0], third), (vec![1.0], 0.0)],
            ),
            (
                1,
                vec![(vec![1.0], 0.0), (vec![1.0], 0.0), (vec![-2.0], 1.0), (vec![0.0], 0.0)],
            ),
            (
                2,
                vec![
                    (vec![1.0, 0.0], 0.0),
                    (vec![1.0, 0.0], 0.0),
                    (vec![-2.0, 0.0], 1.0),
                    (vec![0.0, 1.0], 0.0),
                ],
            ),
            (
                2,
                vec![
                    (vec![1.0, 0.0], 0.0),
                    (vec![0.0, 1.0], 0.0),
                    (vec![-1.0, -1.0], 1.0),
                    (vec![0.0, 0.0], 0.0),
                ],
            ),
            (
                3,
                vec![
                    (vec![1.0, 0.0, 0.0], 0.0),
                    (vec![0.0, 1.0, 0.0], 0.0),
                    (vec![-1.0, -1.0, 0.0], 1.0),
                    (vec![0.0, 0.0, 1.0], 0.0),
                ],
            ),
        ],
        Pyramid => vec![
            (1, vec![(vec![0.0], 0.0), (vec![0.0], 0.0), (vec![1.0], 0.0)]),
            (
                2,
                vec![(vec![1.0, 0.0], 0.0), (vec![0.0, 0.0], 0.0), (vec![0.0, 1.0], 0.0)],
            ),
            (
                2,
                vec![(vec![1.0, 0.0], 0.0), (vec![1.0, 0.0], 0.0), (vec![0.0, 1.0], 0.0)],
            ),
            (
                3,
                vec![
                    (vec![1.0, 0.0, 0.0], 0.0),
                    (vec![0.0, 1.0, 0.0], 0.0),
                    (vec![0.0, 0.0, 1.0], 0.0),
                ],
            ),
        ],
    }
}

fn build_orbits(kind: ElementKind) -> Vec<SymmetryOrbit> {
    let elem = reference_element(kind);
    let group = natural_group(kind);
    templates(kind)
        .into_iter()
        .enumerate()
        .map(|(idx, (l, rows))| {
            let dn = rows.len();
            let mut s = DMatrix::zeros(dn, l);
            let mut sigma = DVector::zeros(dn);
            for (r, (coef, cst)) in rows.iter().enumerate() {
                for (c, v) in coef.iter().enumerate() {
                    s[(r, c)] = *v;
                }
                sigma[r] = *cst;
            }
            let mut points: Vec<AffinePoint> = Vec::new();
            for g in &group {
                let mut gs = DMatrix::zeros(dn, l);
                let mut gsig = DVector::zeros(dn);
                for t in 0..dn {
                    gs.set_row(t, &(s.row(g.perm[t]) * g.sign[t]));
                    gsig[t] = sigma[g.perm[t]] * g.sign[t] + 0.0;
                }
                let cand = AffinePoint { s: gs, sigma: gsig };
                let dup = points.iter().any(|p| {
                    (&p.s - &cand.s).amax() < 1e-14 && (&p.sigma - &cand.sigma).amax() < 1e-14
                });
                if !dup {
                    points.push(cand);
                }
            }
            let mut orbit = SymmetryOrbit {
                kind,
                index: idx + 1,
                params: l,
                points,
                bounds: LinearConstraintSet::empty(l),
            };
            orbit.bounds = orbit_parameter_bounds(elem, &orbit)
                .expect("orbit tables produce consistent bounds");
            orbit
        })
        .collect()
}

/// All symmetry orbits of `kind`, in table order.
pub fn orbits(kind: ElementKind) -> &'static [SymmetryOrbit] {
    static TABLE: OnceLock<Vec<Vec<SymmetryOrbit>>> = OnceLock::new();
    let table = TABLE.get_or_init(|| ElementKind::ALL.iter().map(|&k| build_orbits(k)).collect());
    &table[kind as usize]
}

pub fn orbit(kind: ElementKind, index: usize) -> Result<&'static SymmetryOrbit> {
    let all = orbits(kind);
    if index == 0 || index > all.len() {
        return Err(Error::Argument(format!("{kind} has no orbit {index}")));
    }
    Ok(&all[index - 1])
}

/// Parameter bounds `Bλ S₁ ξ ∈ [vl - Bλ σ₁, vu - Bλ σ₁]`, simplified.
///
/// Rows are scaled so that their first nonzero coefficient is `+1`; rows
/// that become identical are merged by intersecting their bounds, and
/// all-zero rows are dropped after checking the constant bound.
pub fn orbit_parameter_bounds(elem: &ReferenceElement, orbit: &SymmetryOrbit) -> Result<LinearConstraintSet> {
    let first = &orbit.points[0];
    let b = &elem.b_lambda * &first.s;
    let shift = &elem.b_lambda * &first.sigma;
    let l = orbit.params;
    let mut rows: Vec<(Vec<f64>, f64, f64)> = Vec::new();
    for r in 0..b.nrows() {
        let mut coef: Vec<f64> = b.row(r).iter().copied().collect();
        let mut lo = elem.v_lower[r] - shift[r];
        let mut hi = elem.v_upper[r] - shift[r];
        let lead = coef.iter().copied().find(|v| v.abs() > 1e-14);
        match lead {
            None => {
                if lo > 1e-14 || hi < -1e-14 {
                    return Err(Error::Internal(format!(
                        "{orbit}: constant bound row {r} is violated"
                    )));
                }
            }
            Some(lead) => {
                for v in coef.iter_mut() {
                    *v /= lead;
                    if *v == 0.0 {
                        *v = 0.0;
                    }
                }
                lo /= lead;
                hi /= lead;
                if lead < 0.0 {
                    std::mem::swap(&mut lo, &mut hi);
                }
                if let Some(existing) = rows
                    .iter_mut()
                    .find(|(c, _, _)| c.iter().zip(&coef).all(|(a, b)| (a - b).abs() < 1e-14))
                {
                    existing.1 = existing.1.max(lo);
                    existing.2 = existing.2.min(hi);
                } else {
                    rows.push((coef, lo, hi));
                }
            }
        }
    }
    let mut m = DMatrix::zeros(rows.len(), l);
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for (r, (coef, lo, hi)) in rows.into_iter().enumerate() {
        for (c, v) in coef.into_iter().enumerate() {
            m[(r, c)] = v;
        }
        if lo > hi + 1e-14 {
            return Err(Error::Internal(format!("{orbit}: empty parameter interval")));
        }
        lower.push(lo);
        upper.push(hi);
    }
    Ok(LinearConstraintSet { matrix: m, lower, upper })
}

/// Evaluate an orbit at `ξ`, returning its natural coordinates.
pub fn evaluate_orbit(orbit: &SymmetryOrbit, xi: &[f64]) -> Result<Vec<Vec<f64>>> {
    check_params(orbit, &orbit.bounds, xi)?;
    Ok(orbit.natural_points(xi))
}

fn check_params(orbit: &SymmetryOrbit, set: &LinearConstraintSet, xi: &[f64]) -> Result<()> {
    if xi.len() != orbit.params {
        return Err(Error::Argument(format!(
            "{orbit} takes {} parameters, got {}",
            orbit.params,
            xi.len()
        )));
    }
    let v = set.violation(xi);
    if v > PARAM_FEAS_TOL {
        return Err(Error::Domain(format!(
            "parameters {xi:?} of {orbit} are infeasible (violation {v:.3e})"
        )));
    }
    Ok(())
}

/// An orbit restricted by additional linear constraints on its parameters.
#[derive(Debug, Clone)]
pub struct ConstrainedOrbit {
    pub orbit: &'static SymmetryOrbit,
    pub extra: LinearConstraintSet,
}

impl ConstrainedOrbit {
    pub fn standard(orbit: &'static SymmetryOrbit) -> Self {
        ConstrainedOrbit {
            orbit,
            extra: LinearConstraintSet::empty(orbit.params),
        }
    }

    /// Orbit bounds followed by the extra constraints.
    pub fn feasible_set(&self) -> LinearConstraintSet {
        self.orbit.bounds.stacked(&self.extra)
    }

    pub fn is_constrained(&self) -> bool {
        !self.extra.is_empty()
    }

    pub fn evaluate(&self, xi: &[f64]) -> Result<Vec<Vec<f64>>> {
        check_params(self.orbit, &self.feasible_set(), xi)?;
        Ok(self.orbit.natural_points(xi))
    }
}

/// Attach `bl ≤ A ξ ≤ bu` to an orbit after checking joint feasibility.
pub fn attach_constraints(
    orbit: &'static SymmetryOrbit,
    a: DMatrix<f64>,
    bl: Vec<f64>,
    bu: Vec<f64>,
) -> Result<ConstrainedOrbit> {
    if a.nrows() > 0 && a.ncols() != orbit.params {
        return Err(Error::Argument(format!(
            "constraint matrix has {} columns but {orbit} has {} parameters",
            a.ncols(),
            orbit.params
        )));
    }
    let a = if a.nrows() == 0 {
        DMatrix::zeros(0, orbit.params)
    } else {
        a
    };
    let extra = LinearConstraintSet::new(a, bl, bu)?;
    let entry = ConstrainedOrbit { orbit, extra };
    let set = entry.feasible_set();
    let probe = set.project(&vec![0.0; orbit.params]).map_err(|e| match e {
        Error::ConstraintConflict(msg) => Error::ConstraintConflict(format!("{orbit}: {msg}")),
        other => other,
    })?;
    if set.violation(&probe) > PARAM_FEAS_TOL {
        return Err(Error::ConstraintConflict(format!(
            "{orbit}: additional constraints do not intersect the orbit bounds"
        )));
    }
    Ok(entry)
}

/// Ordered orbit collection with the layout of the stacked parameter vector.
#[derive(Debug, Clone)]
pub struct OrbitCollection {
    pub kind: ElementKind,
    pub degree: usize,
    pub entries: Vec<ConstrainedOrbit>,
    offsets: Vec<usize>,
}

impl OrbitCollection {
    pub fn new(kind: ElementKind, degree: usize, entries: Vec<ConstrainedOrbit>) -> Result<Self> {
        if entries.iter().any(|e| e.orbit.kind != kind) {
            return Err(Error::Argument("collection mixes element kinds".into()));
        }
        let mut offsets = Vec::with_capacity(entries.len() + 1);
        let mut acc = 0;
        for e in &entries {
            offsets.push(acc);
            acc += e.orbit.params;
        }
        offsets.push(acc);
        Ok(OrbitCollection {
            kind,
            degree,
            entries,
            offsets,
        })
    }

    /// Collection of standard (unconstrained) orbits from one-based indices.
    pub fn from_indices(kind: ElementKind, degree: usize, indices: &[usize]) -> Result<Self> {
        let entries = indices
            .iter()
            .map(|&k| orbit(kind, k).map(ConstrainedOrbit::standard))
            .collect::<Result<Vec<_>>>()?;
        OrbitCollection::new(kind, degree, entries)
    }

    pub fn indices(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.orbit.index).collect()
    }

    pub fn param_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn node_total(&self) -> usize {
        self.entries.iter().map(|e| e.orbit.multiplicity()).sum()
    }

    pub fn is_admissible(&self) -> bool {
        self.degree >= 1 && self.node_total() == node_count_unchecked(self.kind, self.degree)
    }

    pub fn offset(&self, j: usize) -> usize {
        self.offsets[j]
    }

    pub fn slice<'a>(&self, xi: &'a [f64], j: usize) -> &'a [f64] {
        &xi[self.offsets[j]..self.offsets[j + 1]]
    }

    /// Block-diagonal stack of every entry's bounds and extra constraints.
    pub fn stacked_constraints(&self) -> LinearConstraintSet {
        let blocks: Vec<_> = self.entries.iter().map(|e| e.feasible_set()).collect();
        LinearConstraintSet::block_diagonal(&blocks)
    }
}

impl fmt::Display for OrbitCollection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let idx: Vec<String> = self.indices().iter().map(|i| i.to_string()).collect();
        write!(f, "{}[{}]", self.kind, idx.join(","))
    }
}

/// Where a node set came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Optimized,
    Baseline(String),
    File(String),
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Optimized => f.write_str("optimized"),
            Source::Baseline(name) => f.write_str(name),
            Source::File(path) => write!(f, "file:{path}"),
        }
    }
}

/// A realized node set in Cartesian coordinates.
#[derive(Debug, Clone)]
pub struct NodalDistribution {
    pub kind: ElementKind,
    pub degree: usize,
    pub nodes: Vec<Vec<f64>>,
    pub source: Source,
    pub parameters: Option<(OrbitCollection, Vec<f64>)>,
}

impl NodalDistribution {
    /// Build a distribution after checking count, containment and distinctness.
    pub fn new(kind: ElementKind, degree: usize, nodes: Vec<Vec<f64>>, source: Source) -> Result<Self> {
        let expected = crate::geometry::node_count(kind, degree)?;
        if nodes.len() != expected {
            return Err(Error::Argument(format!(
                "node count mismatch: {kind} degree {degree} needs {expected} nodes, got {}",
                nodes.len()
            )));
        }
        let elem = reference_element(kind);
        for (i, x) in nodes.iter().enumerate() {
            if x.len() != kind.dim() {
                return Err(Error::Argument(format!("node {i} has {} coordinates", x.len())));
            }
            if !elem.contains(x, crate::geometry::CONTAINS_TOL) {
                return Err(Error::Domain(format!("node {i} {x:?} lies outside the {kind}")));
            }
        }
        check_distinct(&nodes)?;
        Ok(NodalDistribution {
            kind,
            degree,
            nodes,
            source,
            parameters: None,
        })
    }

    /// Build without validation; used for deliberately degenerate inputs.
    pub fn unchecked(kind: ElementKind, degree: usize, nodes: Vec<Vec<f64>>, source: Source) -> Self {
        NodalDistribution {
            kind,
            degree,
            nodes,
            source,
            parameters: None,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Smallest pairwise distance and the pair attaining it.
pub fn min_pair_distance(nodes: &[Vec<f64>]) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            let d2: f64 = nodes[i].iter().zip(&nodes[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.is_none_or(|(_, _, b)| d2 < b) {
                best = Some((i, j, d2));
            }
        }
    }
    best.map(|(i, j, d2)| (i, j, d2.sqrt()))
}

pub fn check_distinct(nodes: &[Vec<f64>]) -> Result<()> {
    if let Some((i, j, d)) = min_pair_distance(nodes) {
        if d <= DUPLICATE_NODE_TOL {
            return Err(Error::DegenerateDistribution {
                first: i,
                second: j,
                distance: d,
            });
        }
    }
    Ok(())
}

/// Nodes of a collection at `ξ̄`, in collection order then orbit order.
pub fn collection_nodes(collection: &OrbitCollection, xi: &[f64]) -> Result<Vec<Vec<f64>>> {
    if xi.len() != collection.param_dim() {
        return Err(Error::Argument(format!(
            "collection {collection} takes {} parameters, got {}",
            collection.param_dim(),
            xi.len()
        )));
    }
    let elem = reference_element(collection.kind);
    let mut nodes = Vec::with_capacity(collection.node_total());
    for (j, entry) in collection.entries.iter().enumerate() {
        for lambda in entry.evaluate(collection.slice(xi, j))? {
            nodes.push(elem.map_natural(&lambda));
        }
    }
    Ok(nodes)
}

pub fn evaluate_collection(collection: &OrbitCollection, xi: &[f64]) -> Result<NodalDistribution> {
    let nodes = collection_nodes(collection, xi)?;
    check_distinct(&nodes)?;
    Ok(NodalDistribution {
        kind: collection.kind,
        degree: collection.degree,
        nodes,
        source: Source::Optimized,
        parameters: Some((collection.clone(), xi.to_vec())),
    })
}

/// Multisets of orbit indices whose multiplicities sum to the space
/// dimension, in lexicographic order of the sorted index lists. Orbits
/// without parameters occur at most once, since repeating them would
/// duplicate nodes.
pub fn enumerate_admissible_collections(kind: ElementKind, p: usize, cap: usize) -> Result<Vec<OrbitCollection>> {
    Ok(enumerate_admissible_indices(kind, p, cap)?
        .into_iter()
        .map(|idx| OrbitCollection::from_indices(kind, p, &idx).expect("valid indices"))
        .collect())
}

pub fn enumerate_admissible_indices(kind: ElementKind, p: usize, cap: usize) -> Result<Vec<Vec<usize>>> {
    let target = crate::geometry::node_count(kind, p)?;
    if cap == 0 {
        return Err(Error::Argument("collection cap must be at least 1".into()));
    }
    let table = orbits(kind);
    let mult: Vec<usize> = table.iter().map(|o| o.multiplicity()).collect();
    let once: Vec<bool> = table.iter().map(|o| o.params == 0).collect();
    let norb = table.len();
    // reach[k][s]: can `s` be written with orbits of index ≥ k
    let mut reach = vec![vec![false; target + 1]; norb + 1];
    reach[norb][0] = true;
    for k in (0..norb).rev() {
        for s in 0..=target {
            let mut ok = reach[k + 1][s];
            if !ok && s >= mult[k] {
                let next = if once[k] { k + 1 } else { k };
                ok = reach[next][s - mult[k]];
            }
            reach[k][s] = ok;
        }
    }
    let mut out = Vec::new();
    let mut stack = Vec::new();
    fn dfs(
        k: usize,
        rem: usize,
        mult: &[usize],
        once: &[bool],
        reach: &[Vec<bool>],
        stack: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
        cap: usize,
    ) {
        if out.len() >= cap {
            return;
        }
        if rem == 0 {
            out.push(stack.iter().map(|i| i + 1).collect());
            return;
        }
        for j in k..mult.len() {
            if mult[j] > rem {
                continue;
            }
            let next = if once[j] { j + 1 } else { j };
            if !reach[next][rem - mult[j]] {
                continue;
            }
            stack.push(j);
            dfs(next, rem - mult[j], mult, once, reach, stack, out, cap);
            stack.pop();
            if out.len() >= cap {
                return;
            }
        }
    }
    dfs(0, target, &mult, &once, &reach, &mut stack, &mut out, cap);
    Ok(out)
}

/// Identify which orbit and parameters generate the point with natural
/// coordinates `lambda`, preferring the lowest orbit index whose orbit at
/// the solved parameters has `m` distinct points.
pub fn classify_point(kind: ElementKind, lambda: &[f64], tol: f64) -> Option<(usize, Vec<f64>)> {
    for orbit in orbits(kind) {
        for pt in &orbit.points {
            let (xi, resid) = pt.solve(lambda);
            if resid > tol || orbit.bounds.violation(&xi) > PARAM_FEAS_TOL {
                continue;
            }
            let pts = orbit.cartesian_points(&xi);
            if min_pair_distance(&pts).is_none_or(|(_, _, d)| d > DUPLICATE_NODE_TOL) {
                return Some((orbit.index, xi));
            }
        }
    }
    None
}

/// Decompose a symmetric node set into a collection of standard orbits and
/// the parameters reproducing it. Entries are sorted by orbit index, then
/// by parameters.
pub fn decompose(kind: ElementKind, degree: usize, nodes: &[Vec<f64>]) -> Result<(OrbitCollection, Vec<f64>)> {
    let elem = reference_element(kind);
    let tol = 1e-9;
    let mut assigned = vec![false; nodes.len()];
    let mut found: Vec<(usize, Vec<f64>)> = Vec::new();
    for i in 0..nodes.len() {
        if assigned[i] {
            continue;
        }
        let lambda = elem.cartesian_to_natural(&nodes[i])?;
        let (k, xi) = classify_point(kind, &lambda, tol).ok_or_else(|| {
            Error::Domain(format!("node {i} cannot be generated by any {kind} orbit"))
        })?;
        let orbit = &orbits(kind)[k - 1];
        for x in orbit.cartesian_points(&xi) {
            let hit = (0..nodes.len()).find(|&t| {
                !assigned[t] && nodes[t].iter().zip(&x).all(|(a, b)| (a - b).abs() <= tol)
            });
            match hit {
                Some(t) => assigned[t] = true,
                None => {
                    return Err(Error::Domain(format!(
                        "node set is not symmetric: image {x:?} of node {i} is missing"
                    )))
                }
            }
        }
        found.push((k, xi));
    }
    found.sort_by(|a, b| {
        a.0.cmp(&b.0).then_with(|| {
            a.1.iter()
                .zip(&b.1)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let indices: Vec<usize> = found.iter().map(|(k, _)| *k).collect();
    let collection = OrbitCollection::from_indices(kind, degree, &indices)?;
    let xi = found.into_iter().flat_map(|(_, x)| x).collect();
    Ok((collection, xi))
}
