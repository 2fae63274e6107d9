//! Constrained minimization of the integrated squared Lagrange basis.
//!
//! For nodes `x_k` with Vandermonde matrix `V[k][j] = φ_j(x_k)` and
//! `B = V⁻¹`, the Lagrange functions are `ℓ_i = Σ_j B[j][i] φ_j`, so
//! `Σ_i ∫ ℓ_i² = tr(Bᵀ A B)` with `A` the Gram matrix of the basis. The
//! orthonormal bases make `A = I`. Differentiating through the inverse,
//! `∂f/∂V = -2 M Bᵀ` with `M = Bᵀ A B`, and `∂f/∂x_k = Σ_j (∂f/∂V)[k][j]
//! ∇φ_j(x_k)`, which is chained through the affine orbit maps.

mod minimize;
mod pipeline;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub use minimize::{minimize, MinimizeOutcome, Objective};
pub use pipeline::{initial_point, optimize_nodes, OptimizedResult};

use crate::basis::{BasisMode, FunctionSpace};
use crate::error::{Error, Result};
use crate::geometry::reference_element;
use crate::parallel::ExecMode;
use crate::quadrature::QuadratureRule;
use crate::symmetry::{LinearConstraintSet, OrbitCollection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientMode {
    #[default]
    Analytic,
    /// Central differences along the null space of the equality constraints.
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceStatus {
    KktConverged,
    /// Stopped at the iteration cap, or when no further decrease was found
    /// before the optimality tolerance was met.
    IterationLimited,
    /// The objective could not be evaluated at the starting point.
    EvaluationFailed,
}

impl ConvergenceStatus {
    pub fn name(self) -> &'static str {
        match self {
            ConvergenceStatus::KktConverged => "kkt-converged",
            ConvergenceStatus::IterationLimited => "iteration-limited",
            ConvergenceStatus::EvaluationFailed => "evaluation-failed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub kkt_tol: f64,
    pub max_major_iterations: usize,
    pub gradient_mode: GradientMode,
    pub fd_step: f64,
    /// Jittered restarts in addition to the unperturbed start.
    pub multistart_count: usize,
    pub seed: u64,
    /// Upper bound on enumerated admissible collections.
    pub collection_cap: usize,
    /// Collections that pass screening and are actually optimized.
    pub max_candidates: usize,
    pub exec: ExecMode,
    /// Lattice resolution for the final metrics; `None` uses the default
    /// for the element dimension.
    pub metrics_resolution: Option<usize>,
    pub compute_metrics: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kkt_tol: 1e-10,
            max_major_iterations: 50,
            gradient_mode: GradientMode::Analytic,
            fd_step: 1e-6,
            multistart_count: 3,
            seed: 0,
            collection_cap: 64,
            max_candidates: 3,
            exec: ExecMode::default(),
            metrics_resolution: None,
            compute_metrics: true,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kkt_tol > 0.0) {
            return Err(Error::Argument("KKT tolerance must be positive".into()));
        }
        if self.max_major_iterations == 0 {
            return Err(Error::Argument("at least one major iteration is required".into()));
        }
        if !(self.fd_step > 0.0) {
            return Err(Error::Argument("finite-difference step must be positive".into()));
        }
        if self.collection_cap == 0 || self.max_candidates == 0 {
            return Err(Error::Argument("collection limits must be at least 1".into()));
        }
        Ok(())
    }
}

/// Affine map from the stacked parameters to one Cartesian node.
#[derive(Debug, Clone)]
struct NodeMap {
    offset: usize,
    /// `N S_i`, `d × l`.
    jacobian: DMatrix<f64>,
    /// `N σ_i + ν`.
    shift: DVector<f64>,
}

/// The linearly constrained node-placement problem of one collection.
#[derive(Debug, Clone)]
pub struct OptimizationProblem {
    pub collection: OrbitCollection,
    pub space: Arc<FunctionSpace>,
    pub rule: Arc<QuadratureRule>,
    pub constraints: LinearConstraintSet,
    pub gradient_mode: GradientMode,
    pub fd_step: f64,
    maps: Vec<NodeMap>,
}

/// Stack the collection's bounds and extra constraints into one problem.
pub fn assemble_problem(
    collection: &OrbitCollection,
    space: Arc<FunctionSpace>,
    rule: Arc<QuadratureRule>,
) -> Result<OptimizationProblem> {
    let kind = collection.kind;
    if space.kind != kind || space.degree != collection.degree {
        return Err(Error::Argument(format!("space {space} does not match collection {collection}")));
    }
    if rule.kind != kind || rule.exactness < 2 * collection.degree {
        return Err(Error::Argument("quadrature rule lacks degree 2p exactness".into()));
    }
    if collection.node_total() != space.dim {
        return Err(Error::Argument(format!(
            "collection {collection} has {} nodes, the space needs {}",
            collection.node_total(),
            space.dim
        )));
    }
    let constraints = collection.stacked_constraints();
    let probe = constraints.project(&vec![0.0; constraints.cols()])?;
    if constraints.violation(&probe) > 1e-10 {
        return Err(Error::ConstraintConflict(format!(
            "stacked constraints of {collection} are infeasible"
        )));
    }
    let elem = reference_element(kind);
    let mut maps = Vec::with_capacity(space.dim);
    for (j, entry) in collection.entries.iter().enumerate() {
        for pt in &entry.orbit.points {
            maps.push(NodeMap {
                offset: collection.offset(j),
                jacobian: &elem.n_map * &pt.s,
                shift: &elem.n_map * &pt.sigma + &elem.nu,
            });
        }
    }
    Ok(OptimizationProblem {
        collection: collection.clone(),
        space,
        rule,
        constraints,
        gradient_mode: GradientMode::Analytic,
        fd_step: 1e-6,
        maps,
    })
}

impl OptimizationProblem {
    pub fn param_dim(&self) -> usize {
        self.constraints.cols()
    }

    /// Cartesian nodes at `xi`, without feasibility checks.
    pub fn nodes(&self, xi: &[f64]) -> Vec<Vec<f64>> {
        self.maps
            .iter()
            .map(|m| {
                let l = m.jacobian.ncols();
                let local = DVector::from_column_slice(&xi[m.offset..m.offset + l]);
                (&m.jacobian * local + &m.shift).iter().copied().collect()
            })
            .collect()
    }

    fn check_distinct(nodes: &[Vec<f64>]) -> Result<()> {
        crate::symmetry::check_distinct(nodes)
    }

    /// `(V⁻¹, M)` at the given nodes.
    fn inverse_and_mass(&self, nodes: &[Vec<f64>]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let v = self.space.eval_matrix(nodes);
        let b = v
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::Unisolvency("Vandermonde matrix is singular".into()))?;
        let m = if self.space.mode == BasisMode::Orthogonal {
            b.transpose() * &b
        } else {
            b.transpose() * self.space.gram() * &b
        };
        Ok((b, m))
    }

    pub fn objective(&self, xi: &[f64]) -> Result<f64> {
        let nodes = self.nodes(xi);
        Self::check_distinct(&nodes)?;
        let (_, m) = self.inverse_and_mass(&nodes)?;
        let f = m.trace();
        if !f.is_finite() {
            return Err(Error::Numerical("objective is not finite".into()));
        }
        Ok(f)
    }

    /// Objective and gradient with respect to the stacked parameters.
    pub fn objective_and_gradient(&self, xi: &[f64]) -> Result<(f64, Vec<f64>)> {
        match self.gradient_mode {
            GradientMode::Analytic => self.analytic_gradient(xi),
            GradientMode::FiniteDifference => {
                let f = self.objective(xi)?;
                let z = equality_null_space(&self.constraints);
                Ok((f, self.fd_gradient(xi, &z)?))
            }
        }
    }

    pub fn analytic_gradient(&self, xi: &[f64]) -> Result<(f64, Vec<f64>)> {
        let nodes = self.nodes(xi);
        Self::check_distinct(&nodes)?;
        let (b, m) = self.inverse_and_mass(&nodes)?;
        let f = m.trace();
        if !f.is_finite() {
            return Err(Error::Numerical("objective is not finite".into()));
        }
        // ∂f/∂V = -2 M Bᵀ
        let dv = (&m * b.transpose()) * -2.0;
        let d = self.space.kind.dim();
        let mut g = vec![0.0; xi.len()];
        for (k, (x, map)) in nodes.iter().zip(&self.maps).enumerate() {
            let (_, grads) = self.space.eval_with_gradient(x);
            let mut gx = [0.0; 3];
            for (j, gj) in grads.iter().enumerate() {
                let w = dv[(k, j)];
                for a in 0..d {
                    gx[a] += w * gj[a];
                }
            }
            for c in 0..map.jacobian.ncols() {
                let mut s = 0.0;
                for (a, ga) in gx.iter().enumerate().take(d) {
                    s += map.jacobian[(a, c)] * ga;
                }
                g[map.offset + c] += s;
            }
        }
        Ok((f, g))
    }

    /// Central differences along the columns of `z`, mapped back to the
    /// full parameter space as `Z (Zᵀ∇f)`.
    pub fn fd_gradient(&self, xi: &[f64], z: &DMatrix<f64>) -> Result<Vec<f64>> {
        let h = self.fd_step;
        let mut gz = DVector::zeros(z.ncols());
        for t in 0..z.ncols() {
            let col = z.column(t);
            let plus: Vec<f64> = xi.iter().zip(col.iter()).map(|(x, c)| x + h * c).collect();
            let minus: Vec<f64> = xi.iter().zip(col.iter()).map(|(x, c)| x - h * c).collect();
            gz[t] = (self.objective(&plus)? - self.objective(&minus)?) / (2.0 * h);
        }
        Ok((z * gz).iter().copied().collect())
    }
}

impl Objective for OptimizationProblem {
    fn constraints(&self) -> &LinearConstraintSet {
        &self.constraints
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.objective(x)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.objective_and_gradient(x)
    }
}

/// Rows of `set` with equal lower and upper bounds.
pub(crate) fn equality_rows(set: &LinearConstraintSet) -> Vec<usize> {
    (0..set.rows())
        .filter(|&r| set.lower[r].is_finite() && set.lower[r] == set.upper[r])
        .collect()
}

/// Orthonormal basis of the null space of the equality rows of `set`.
pub fn equality_null_space(set: &LinearConstraintSet) -> DMatrix<f64> {
    let n = set.cols();
    let rows = equality_rows(set);
    if rows.is_empty() {
        return DMatrix::identity(n, n);
    }
    let mut e = DMatrix::zeros(rows.len(), n);
    for (i, &r) in rows.iter().enumerate() {
        e.set_row(i, &set.matrix.row(r));
    }
    let eig = SymmetricEigen::new(e.transpose() * &e);
    let max = eig.eigenvalues.amax().max(1e-300);
    let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] <= 1e-20 * max).collect();
    let mut z = DMatrix::zeros(n, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        z.set_column(c, &eig.eigenvectors.column(i));
    }
    z
}
