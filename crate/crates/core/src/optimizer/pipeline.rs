//! Per-element driver: candidate collections, screening, multistart
//! optimization and selection of the winner.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{assemble_problem, minimize, ConvergenceStatus, MinimizeOutcome, OptimizationProblem, OptimizerConfig};
use crate::baselines::{baseline_distribution, BaselineKind};
use crate::basis::FunctionSpace;
use crate::compatibility::{build_compatibility_constraints, FacePrescription};
use crate::error::{Error, Result};
use crate::geometry::{reference_element, ElementKind};
use crate::metrics::{self, MetricReport};
use crate::parallel::map_slice;
use crate::quadrature::quadrature_rule;
use crate::symmetry::{
    check_distinct, decompose, enumerate_admissible_collections, evaluate_collection, ConstrainedOrbit,
    NodalDistribution, OrbitCollection, Source,
};

/// Relative jitter applied to each parameter's feasible width on restarts.
const JITTER_FRACTION: f64 = 0.05;
/// Weight of the projected Halton point against the feasible-set center.
const HALTON_WEIGHT: f64 = 0.7;
/// Objectives closer than this (relative) count as ties.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct OptimizedResult {
    pub dist: NodalDistribution,
    pub parameters: Vec<f64>,
    pub objective: f64,
    pub initial_objective: f64,
    pub collection: OrbitCollection,
    pub status: ConvergenceStatus,
    pub iterations: usize,
    pub kkt: f64,
    pub metrics: Option<MetricReport>,
    /// Collections that passed screening and were optimized.
    pub candidates: usize,
}

/// Parameters of one baseline orbit, used to seed free entries.
#[derive(Debug, Clone)]
struct Seed {
    index: usize,
    xi: Vec<f64>,
    interior: bool,
}

fn baseline_seeds(kind: ElementKind, p: usize) -> Result<(OrbitCollection, Vec<Seed>)> {
    let base = baseline_distribution(kind, p, BaselineKind::initializer(kind))?;
    let (coll, xi) = decompose(kind, p, &base.nodes)?;
    let elem = reference_element(kind);
    let seeds = coll
        .entries
        .iter()
        .enumerate()
        .map(|(j, e)| {
            let x = coll.slice(&xi, j).to_vec();
            let interior = e
                .orbit
                .cartesian_points(&x)
                .iter()
                .all(|pt| elem.faces.iter().all(|f| f.plane_distance(pt) > 1e-10));
            Seed {
                index: e.orbit.index,
                xi: x,
                interior,
            }
        })
        .collect();
    Ok((coll, seeds))
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const HALTON_BASES: [u64; 3] = [2, 3, 5];

/// A feasible point of one entry, pulled towards the middle of its set.
fn generic_entry_point(entry: &ConstrainedOrbit, counter: u64) -> Result<Vec<f64>> {
    let l = entry.orbit.params;
    if l == 0 {
        return Ok(Vec::new());
    }
    let set = entry.feasible_set();
    let h: Vec<f64> = (0..l)
        .map(|t| 2.0 * radical_inverse(counter, HALTON_BASES[t]) - 1.0)
        .collect();
    let h = set.project(&h)?;
    let mut center = vec![0.0; l];
    let corners = 1usize << l;
    for mask in 0..corners {
        let c: Vec<f64> = (0..l).map(|t| if mask >> t & 1 == 1 { 1.0 } else { -1.0 }).collect();
        for (acc, v) in center.iter_mut().zip(set.project(&c)?) {
            *acc += v / corners as f64;
        }
    }
    Ok(h.iter()
        .zip(&center)
        .map(|(a, b)| HALTON_WEIGHT * a + (1.0 - HALTON_WEIGHT) * b)
        .collect())
}

/// Starting parameters for `collection`: free entries reuse baseline
/// parameters of the same orbit type (interior ones first; boundary ones
/// only without face prescriptions), the rest get a generic point.
pub fn initial_point(collection: &OrbitCollection, with_prescriptions: bool) -> Result<Vec<f64>> {
    let (_, seeds) = baseline_seeds(collection.kind, collection.degree)?;
    let mut used = vec![false; seeds.len()];
    let mut xi = Vec::with_capacity(collection.param_dim());
    let mut counter = 1;
    for entry in &collection.entries {
        let mut pick = None;
        if !entry.is_constrained() {
            let want_interior = [true, false];
            let allowed = if with_prescriptions { &want_interior[..1] } else { &want_interior[..] };
            for &interior in allowed {
                pick = (0..seeds.len())
                    .find(|&s| !used[s] && seeds[s].index == entry.orbit.index && seeds[s].interior == interior);
                if pick.is_some() {
                    break;
                }
            }
        }
        match pick {
            Some(s) => {
                used[s] = true;
                xi.extend_from_slice(&seeds[s].xi);
            }
            None => {
                xi.extend(generic_entry_point(entry, counter)?);
                counter += 1;
            }
        }
    }
    collection.stacked_constraints().project(&xi)
}

/// Candidate collections in search order: the one matching the baseline
/// first, then the enumerated ones in lexicographic order.
fn candidate_collections(kind: ElementKind, p: usize, cap: usize) -> Result<Vec<OrbitCollection>> {
    let (base, _) = baseline_seeds(kind, p)?;
    let mut seen = BTreeSet::new();
    seen.insert(base.indices());
    let mut out = vec![base];
    for c in enumerate_admissible_collections(kind, p, cap)? {
        if seen.insert(c.indices()) {
            out.push(c);
        }
    }
    Ok(out)
}

struct Candidate {
    problem: OptimizationProblem,
    start: Vec<f64>,
}

fn screen(
    collection: &OrbitCollection,
    prescriptions: &[FacePrescription],
    space: &std::sync::Arc<FunctionSpace>,
    config: &OptimizerConfig,
) -> Result<Option<Candidate>> {
    let constrained = if prescriptions.is_empty() {
        collection.clone()
    } else {
        match build_compatibility_constraints(collection, prescriptions) {
            Ok(c) => c,
            Err(Error::IncompatibleCollection(_)) | Err(Error::ConstraintConflict(_)) => return Ok(None),
            Err(e) => return Err(e),
        }
    };
    let rule = quadrature_rule(collection.kind, 2 * collection.degree);
    let mut problem = match assemble_problem(&constrained, std::sync::Arc::clone(space), rule) {
        Ok(p) => p,
        Err(Error::ConstraintConflict(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    problem.gradient_mode = config.gradient_mode;
    problem.fd_step = config.fd_step;
    let start = initial_point(&constrained, !prescriptions.is_empty())?;
    let nodes = problem.nodes(&start);
    if check_distinct(&nodes).is_err() {
        return Ok(None);
    }
    let dist = NodalDistribution::unchecked(collection.kind, collection.degree, nodes, Source::Optimized);
    if !metrics::is_unisolvent(space, &dist) || problem.objective(&start).is_err() {
        return Ok(None);
    }
    Ok(Some(Candidate { problem, start }))
}

/// Half-widths of the feasible interval of each parameter around `x`.
fn feasible_widths(problem: &OptimizationProblem, x: &[f64]) -> Result<Vec<f64>> {
    let set = &problem.constraints;
    (0..x.len())
        .map(|t| {
            let mut up = x.to_vec();
            up[t] += 10.0;
            let mut down = x.to_vec();
            down[t] -= 10.0;
            Ok(set.project(&up)?[t] - set.project(&down)?[t])
        })
        .collect()
}

fn jittered_start(problem: &OptimizationProblem, x: &[f64], seed: u64) -> Result<Vec<f64>> {
    let widths = feasible_widths(problem, x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let moved: Vec<f64> = x
        .iter()
        .zip(&widths)
        .map(|(v, w)| v + JITTER_FRACTION * w * rng.random_range(-1.0..=1.0))
        .collect();
    problem.constraints.project(&moved)
}

fn run_seed(base: u64, candidate: usize, restart: usize) -> u64 {
    base ^ ((candidate as u64) << 32) ^ (restart as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Optimize a node set of degree `p` on `kind`, with the boundary pinned
/// to `prescriptions` (empty for an unconstrained run).
pub fn optimize_nodes(
    kind: ElementKind,
    p: usize,
    prescriptions: &[FacePrescription],
    config: &OptimizerConfig,
) -> Result<OptimizedResult> {
    config.validate()?;
    crate::geometry::node_count(kind, p)?;
    let space = FunctionSpace::orthogonal(kind, p)?;

    let mut viable: Vec<Candidate> = Vec::new();
    for coll in candidate_collections(kind, p, config.collection_cap)? {
        if let Some(c) = screen(&coll, prescriptions, &space, config)? {
            viable.push(c);
            if viable.len() >= config.max_candidates {
                break;
            }
        }
    }
    if viable.is_empty() {
        return Err(Error::NoViableCollection { kind, degree: p });
    }

    // (candidate, restart, start point)
    let mut runs: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    for (ci, cand) in viable.iter().enumerate() {
        runs.push((ci, 0, cand.start.clone()));
        if super::equality_null_space(&cand.problem.constraints).ncols() == 0 {
            continue;
        }
        for r in 1..=config.multistart_count {
            let x = jittered_start(&cand.problem, &cand.start, run_seed(config.seed, ci, r))?;
            runs.push((ci, r, x));
        }
    }
    let outcomes: Vec<Result<MinimizeOutcome>> = map_slice(config.exec, &runs, |(ci, _, x)| {
        minimize(&viable[*ci].problem, x, config)
    });

    let mut finished: Vec<(usize, MinimizeOutcome)> = Vec::new();
    for ((ci, _, _), out) in runs.iter().zip(outcomes) {
        if let Ok(o) = out {
            if o.value.is_finite() && o.status != ConvergenceStatus::EvaluationFailed {
                finished.push((*ci, o));
            }
        }
    }
    if finished.is_empty() {
        return Err(Error::NoViableCollection { kind, degree: p });
    }

    let best_value = finished.iter().map(|(_, o)| o.value).fold(f64::INFINITY, f64::min);
    let tied: Vec<usize> = (0..finished.len())
        .filter(|&i| finished[i].1.value - best_value <= TIE_TOL * best_value.abs().max(1.0))
        .collect();
    let winner = if tied.len() == 1 {
        tied[0]
    } else {
        let scored: Vec<(usize, f64)> = tied
            .iter()
            .map(|&i| {
                let (ci, o) = &finished[i];
                let nodes = viable[*ci].problem.nodes(&o.x);
                let dist = NodalDistribution::unchecked(kind, p, nodes, Source::Optimized);
                let lam = metrics::unisolvency_estimates(&space, &dist, config.exec)
                    .map(|(_, l)| l)
                    .unwrap_or(f64::INFINITY);
                (i, lam)
            })
            .collect();
        scored
            .into_iter()
            .min_by(|a, b| {
                a.1.total_cmp(&b.1).then_with(|| {
                    let ca = viable[finished[a.0].0].problem.collection.indices();
                    let cb = viable[finished[b.0].0].problem.collection.indices();
                    ca.cmp(&cb)
                })
            })
            .map(|(i, _)| i)
            .expect("at least one tied run")
    };
    let (ci, outcome) = finished.swap_remove(winner);
    let problem = &viable[ci].problem;
    let dist = evaluate_collection(&problem.collection, &outcome.x)?;
    let metrics = if config.compute_metrics {
        let res = config
            .metrics_resolution
            .unwrap_or_else(|| metrics::default_resolution(kind));
        Some(metrics::evaluate(&dist, res, config.exec)?)
    } else {
        None
    };
    Ok(OptimizedResult {
        dist,
        parameters: outcome.x,
        objective: outcome.value,
        initial_objective: outcome.initial_value,
        collection: problem.collection.clone(),
        status: outcome.status,
        iterations: outcome.iterations,
        kkt: outcome.kkt,
        metrics,
        candidates: viable.len(),
    })
}
