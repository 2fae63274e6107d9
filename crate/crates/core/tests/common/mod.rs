//! Oracles shared by the integration tests. Nothing here calls into the
//! library's orbit tables or quadrature, so the checks stay independent.

#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::Mutex;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use symnodes::compatibility::{prescriptions_for, FacePrescription};
use symnodes::optimizer::{optimize_nodes, OptimizedResult, OptimizerConfig};
use symnodes::symmetry::NodalDistribution;
use symnodes::ElementKind;

pub type Point = Vec<f64>;
type Map = fn(&[f64]) -> Point;

// Barycentric helpers for the reference triangle (-1,-1), (1,-1), (-1,1).
fn tri_bary(x: f64, y: f64) -> [f64; 3] {
    let l1 = (x + 1.0) / 2.0;
    let l2 = (y + 1.0) / 2.0;
    [1.0 - l1 - l2, l1, l2]
}

fn tri_cart(l: [f64; 3]) -> (f64, f64) {
    (2.0 * l[1] - 1.0, 2.0 * l[2] - 1.0)
}

fn tri_cycle(p: &[f64]) -> Point {
    let l = tri_bary(p[0], p[1]);
    let (x, y) = tri_cart([l[2], l[0], l[1]]);
    let mut out = vec![x, y];
    out.extend_from_slice(&p[2..]);
    out
}

fn tri_swap(p: &[f64]) -> Point {
    let mut out = vec![p[1], p[0]];
    out.extend_from_slice(&p[2..]);
    out
}

fn tet_bary(p: &[f64]) -> [f64; 4] {
    let l1 = (p[0] + 1.0) / 2.0;
    let l2 = (p[1] + 1.0) / 2.0;
    let l3 = (p[2] + 1.0) / 2.0;
    [1.0 - l1 - l2 - l3, l1, l2, l3]
}

fn tet_cart(l: [f64; 4]) -> Point {
    vec![2.0 * l[1] - 1.0, 2.0 * l[2] - 1.0, 2.0 * l[3] - 1.0]
}

fn tet_transpose(p: &[f64]) -> Point {
    let l = tet_bary(p);
    tet_cart([l[1], l[0], l[2], l[3]])
}

fn tet_cycle(p: &[f64]) -> Point {
    let l = tet_bary(p);
    tet_cart([l[3], l[0], l[1], l[2]])
}

fn flip_x(p: &[f64]) -> Point {
    let mut q = p.to_vec();
    q[0] = -q[0];
    q
}

fn flip_z(p: &[f64]) -> Point {
    let mut q = p.to_vec();
    q[2] = -q[2];
    q
}

fn swap_xy(p: &[f64]) -> Point {
    let mut q = p.to_vec();
    q.swap(0, 1);
    q
}

fn cycle_xyz(p: &[f64]) -> Point {
    vec![p[1], p[2], p[0]]
}

/// Generators of the symmetry group of each reference element, written
/// directly as Cartesian maps.
pub fn generators(kind: ElementKind) -> Vec<Map> {
    match kind {
        ElementKind::Line => vec![flip_x],
        ElementKind::Triangle => vec![tri_cycle, tri_swap],
        ElementKind::Quadrilateral => vec![flip_x, swap_xy],
        ElementKind::Tetrahedron => vec![tet_transpose, tet_cycle],
        ElementKind::Hexahedron => vec![flip_x, swap_xy, cycle_xyz],
        ElementKind::Prism => vec![tri_cycle, tri_swap, flip_z],
        ElementKind::Pyramid => vec![flip_x, swap_xy],
    }
}

/// Largest distance from an image of a node to its nearest node.
pub fn symmetry_defect(kind: ElementKind, nodes: &[Point]) -> f64 {
    let mut worst: f64 = 0.0;
    for g in generators(kind) {
        for x in nodes {
            let y = g(x);
            let d = nodes
                .iter()
                .map(|n| n.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
    }
    worst
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn factorial(n: u32) -> BigInt {
    (1..=n as u64).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

fn binomial(n: u32, k: u32) -> BigInt {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Coefficients of `(2u - 1)^a` in powers of `u`.
fn shifted_power(a: u32) -> Vec<BigRational> {
    (0..=a)
        .map(|i| {
            let sign = if (a - i).is_multiple_of(2) { 1 } else { -1 };
            let c = binomial(a, i) * BigInt::from(2).pow(i) * BigInt::from(sign);
            BigRational::from_integer(c)
        })
        .collect()
}

fn line_moment(a: u32) -> BigRational {
    if a % 2 == 1 {
        BigRational::zero()
    } else {
        rat(2, a as i64 + 1)
    }
}

/// `∫ u^i v^j (w^k) over the unit simplex` = i! j! k! / (i + j + k + d)!.
fn simplex_moment(exps: &[u32]) -> BigRational {
    let num = exps.iter().fold(BigInt::one(), |acc, e| acc * factorial(*e));
    let total: u32 = exps.iter().sum::<u32>() + exps.len() as u32;
    BigRational::new(num, factorial(total))
}

/// Exact integral of `x^e[0] y^e[1] z^e[2]` over the reference element.
pub fn exact_monomial(kind: ElementKind, e: &[u32]) -> BigRational {
    match kind {
        ElementKind::Line => line_moment(e[0]),
        ElementKind::Quadrilateral => line_moment(e[0]) * line_moment(e[1]),
        ElementKind::Hexahedron => line_moment(e[0]) * line_moment(e[1]) * line_moment(e[2]),
        ElementKind::Triangle | ElementKind::Tetrahedron => {
            // x_k = 2u_k - 1 maps the unit simplex, Jacobian 2^d
            let d = e.len();
            let polys: Vec<Vec<BigRational>> = e.iter().map(|a| shifted_power(*a)).collect();
            let mut sum = BigRational::zero();
            let mut idx = vec![0usize; d];
            loop {
                let coeff = idx
                    .iter()
                    .enumerate()
                    .fold(BigRational::one(), |acc, (k, i)| acc * polys[k][*i].clone());
                let exps: Vec<u32> = idx.iter().map(|i| *i as u32).collect();
                sum += coeff * simplex_moment(&exps);
                let mut k = 0;
                loop {
                    if k == d {
                        return sum * BigRational::from_integer(BigInt::from(1u32 << d));
                    }
                    idx[k] += 1;
                    if idx[k] < polys[k].len() {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
            }
        }
        ElementKind::Prism => exact_monomial(ElementKind::Triangle, &e[..2]) * line_moment(e[2]),
        ElementKind::Pyramid => {
            // cross-section at height z is [-s, s]^2 with s = (1 - z)/2;
            // with z = 1 - 2s the integral becomes
            // 8/((a+1)(b+1)) ∫_0^1 (1 - 2s)^c s^(a+b+2) ds for even a, b
            let (a, b, c) = (e[0], e[1], e[2]);
            if a % 2 == 1 || b % 2 == 1 {
                return BigRational::zero();
            }
            let mut s = BigRational::zero();
            for k in 0..=c {
                let sign = if k % 2 == 0 { 1 } else { -1 };
                let coeff = binomial(c, k) * BigInt::from(2).pow(k) * BigInt::from(sign);
                s += BigRational::new(coeff, BigInt::from(k + a + b + 3));
            }
            s * rat(8, ((a + 1) * (b + 1)) as i64)
        }
    }
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap()
}

/// Exponent tuples a rule of the given degree must integrate exactly:
/// maximal degree on tensor elements, total degree on simplices and the
/// pyramid, triangle total times line maximal on the prism.
pub fn monomials(kind: ElementKind, degree: u32) -> Vec<Vec<u32>> {
    let n = degree;
    let mut out = Vec::new();
    match kind.dim() {
        1 => (0..=n).for_each(|a| out.push(vec![a])),
        2 => {
            for a in 0..=n {
                for b in 0..=n {
                    if kind.is_tensor() || a + b <= n {
                        out.push(vec![a, b]);
                    }
                }
            }
        }
        _ => {
            for a in 0..=n {
                for b in 0..=n {
                    for c in 0..=n {
                        let ok = match kind {
                            ElementKind::Hexahedron => true,
                            ElementKind::Prism => a + b <= n,
                            _ => a + b + c <= n,
                        };
                        if ok {
                            out.push(vec![a, b, c]);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Orbit multiplicities and whether the orbit has no free parameters.
pub fn orbit_table(kind: ElementKind) -> Vec<(usize, bool)> {
    match kind {
        ElementKind::Line => vec![(1, true), (2, false)],
        ElementKind::Triangle => vec![(1, true), (3, false), (6, false)],
        ElementKind::Quadrilateral => vec![(1, true), (4, false), (4, false), (8, false)],
        ElementKind::Tetrahedron => vec![(1, true), (4, false), (6, false), (12, false), (24, false)],
        ElementKind::Hexahedron => vec![
            (1, true),
            (6, false),
            (8, false),
            (12, false),
            (24, false),
            (24, false),
            (48, false),
        ],
        ElementKind::Prism => vec![(1, true), (2, false), (3, false), (6, false), (6, false), (12, false)],
        ElementKind::Pyramid => vec![(1, false), (4, false), (4, false), (8, false)],
    }
}

/// Every sorted multiset of orbit indices (one-based) whose multiplicities
/// sum to `n`, parameter-free orbits at most once, in lexicographic order.
pub fn brute_force_collections(kind: ElementKind, n: usize) -> Vec<Vec<usize>> {
    let table = orbit_table(kind);
    let mut out = Vec::new();
    fn rec(table: &[(usize, bool)], start: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for k in start..table.len() {
            let (m, fixed) = table[k];
            if m > left || (fixed && cur.last() == Some(&(k + 1))) {
                continue;
            }
            cur.push(k + 1);
            rec(table, k, left - m, cur, out);
            cur.pop();
        }
    }
    rec(&table, 0, n, &mut Vec::new(), &mut out);
    out.sort();
    out
}

/// Node count from closed-form dimension formulas.
pub fn expected_count(kind: ElementKind, p: usize) -> usize {
    match kind {
        ElementKind::Line => p + 1,
        ElementKind::Triangle => (p + 1) * (p + 2) / 2,
        ElementKind::Quadrilateral => (p + 1) * (p + 1),
        ElementKind::Tetrahedron => (p + 1) * (p + 2) * (p + 3) / 6,
        ElementKind::Hexahedron => (p + 1).pow(3),
        ElementKind::Prism => (p + 1) * (p + 1) * (p + 2) / 2,
        ElementKind::Pyramid => (p + 1) * (p + 2) * (2 * p + 3) / 6,
    }
}

/// Optimized node sets built bottom-up (line, then faces, then volumes),
/// memoized for the whole test binary.
pub struct Library {
    config: OptimizerConfig,
    /// Used for 3D degrees above 6, where a full search takes many minutes.
    high: OptimizerConfig,
    cache: Mutex<HashMap<(ElementKind, usize), OptimizedResult>>,
}

impl Library {
    pub fn new(config: OptimizerConfig) -> Self {
        let high = OptimizerConfig {
            multistart_count: 0,
            max_candidates: 1,
            max_major_iterations: 10,
            ..config.clone()
        };
        Library {
            config,
            high,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn prescriptions(&self, kind: ElementKind, p: usize) -> Vec<FacePrescription> {
        if kind == ElementKind::Line {
            return vec![FacePrescription::Vertex];
        }
        let faces: Vec<NodalDistribution> = kind
            .face_kinds()
            .into_iter()
            .flatten()
            .map(|fk| self.get(fk, p).dist)
            .collect();
        prescriptions_for(kind, &faces).expect("face prescriptions")
    }

    pub fn get(&self, kind: ElementKind, p: usize) -> OptimizedResult {
        if let Some(r) = self.cache.lock().unwrap().get(&(kind, p)) {
            return r.clone();
        }
        let pres = self.prescriptions(kind, p);
        let cfg = if kind.dim() == 3 && p > 6 { &self.high } else { &self.config };
        let r = optimize_nodes(kind, p, &pres, cfg)
            .unwrap_or_else(|e| panic!("optimizing {kind} p={p}: {e}"));
        self.cache.lock().unwrap().insert((kind, p), r.clone());
        r
    }

    /// Everything optimized so far.
    pub fn all(&self) -> Vec<((ElementKind, usize), OptimizedResult)> {
        let mut v: Vec<_> = self
            .cache
            .lock()
            .unwrap()
            .iter()
            .map(|(k, r)| (*k, r.clone()))
            .collect();
        v.sort_by_key(|((k, p), _)| (k.name(), *p));
        v
    }
}
