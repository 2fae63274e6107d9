//! Reference node sets: Gauss–Legendre–Lobatto and equispaced lattices.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{node_count, reference_element, ElementKind};
use crate::quadrature::legendre_with_derivative;
use crate::symmetry::{NodalDistribution, Source};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    /// Tensor products of 1D GLL nodes (line, quadrilateral, hexahedron).
    Gll,
    Uniform,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Gll => "gll",
            BaselineKind::Uniform => "uniform",
        }
    }

    /// Baseline used to initialize the optimizer for `kind`.
    pub fn initializer(kind: ElementKind) -> Self {
        if kind.is_tensor() {
            BaselineKind::Gll
        } else {
            BaselineKind::Uniform
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gll" => Ok(BaselineKind::Gll),
            "uniform" | "equispaced" => Ok(BaselineKind::Uniform),
            other => Err(Error::Argument(format!("unknown baseline '{other}'"))),
        }
    }
}

/// The `p + 1` Gauss–Legendre–Lobatto nodes, ascending.
pub fn gll_1d(p: usize) -> Vec<f64> {
    assert!(p >= 1, "GLL nodes need degree at least 1");
    let pf = p as f64;
    let mut x: Vec<f64> = (0..=p)
        .map(|i| -(std::f64::consts::PI * i as f64 / pf).cos())
        .collect();
    // roots of x P_p - P_{p-1}, i.e. of (1 - x²) P_p'
    for xi in x.iter_mut().take(p).skip(1) {
        for _ in 0..100 {
            let (pp, _) = legendre_with_derivative(p, *xi);
            let (pm, _) = legendre_with_derivative(p - 1, *xi);
            let dx = (*xi * pp - pm) / ((pf + 1.0) * pp);
            *xi -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
    }
    x[0] = -1.0;
    x[p] = 1.0;
    for i in 0..=p / 2 {
        let s = 0.5 * (x[p - i] - x[i]);
        x[i] = -s;
        x[p - i] = s;
    }
    if p.is_multiple_of(2) {
        x[p / 2] = 0.0;
    }
    x
}

fn uniform_1d(p: usize) -> Vec<f64> {
    (0..=p).map(|i| -1.0 + 2.0 * i as f64 / p as f64).collect()
}

fn tensor(axis: &[f64], dim: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![vec![]];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |v| {
                    let mut x = prefix.clone();
                    x.push(*v);
                    x
                })
            })
            .collect();
    }
    out
}

fn simplex_lattice(kind: ElementKind, p: usize) -> Vec<Vec<f64>> {
    let elem = reference_element(kind);
    let pf = p as f64;
    let mut out = Vec::new();
    match kind {
        ElementKind::Triangle => {
            for j in 0..=p {
                for i in 0..=p - j {
                    let l = [(p - i - j) as f64 / pf, i as f64 / pf, j as f64 / pf];
                    out.push(elem.map_natural(&l));
                }
            }
        }
        ElementKind::Tetrahedron => {
            for k in 0..=p {
                for j in 0..=p - k {
                    for i in 0..=p - j - k {
                        let l = [
                            (p - i - j - k) as f64 / pf,
                            i as f64 / pf,
                            j as f64 / pf,
                            k as f64 / pf,
                        ];
                        out.push(elem.map_natural(&l));
                    }
                }
            }
        }
        _ => unreachable!("not a simplex"),
    }
    out
}

fn pyramid_lattice(p: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for k in 0..=p {
        let z = -1.0 + 2.0 * k as f64 / p as f64;
        let m = p - k;
        if m == 0 {
            out.push(vec![0.0, 0.0, 1.0]);
            continue;
        }
        let s = m as f64 / p as f64;
        for b in 0..=m {
            for a in 0..=m {
                let x = s * (-1.0 + 2.0 * a as f64 / m as f64);
                let y = s * (-1.0 + 2.0 * b as f64 / m as f64);
                out.push(vec![x, y, z]);
            }
        }
    }
    out
}

pub fn baseline_distribution(kind: ElementKind, p: usize, which: BaselineKind) -> Result<NodalDistribution> {
    node_count(kind, p)?;
    let nodes = match which {
        BaselineKind::Gll => {
            if !kind.is_tensor() {
                return Err(Error::UnsupportedBaseline {
                    baseline: which.name().into(),
                    kind,
                });
            }
            tensor(&gll_1d(p), kind.dim())
        }
        BaselineKind::Uniform => match kind {
            ElementKind::Line | ElementKind::Quadrilateral | ElementKind::Hexahedron => {
                tensor(&uniform_1d(p), kind.dim())
            }
            ElementKind::Triangle | ElementKind::Tetrahedron => simplex_lattice(kind, p),
            ElementKind::Prism => {
                let tri = simplex_lattice(ElementKind::Triangle, p);
                let mut out = Vec::new();
                for z in uniform_1d(p) {
                    for t in &tri {
                        out.push(vec![t[0], t[1], z]);
                    }
                }
                out
            }
            ElementKind::Pyramid => pyramid_lattice(p),
        },
    };
    NodalDistribution::new(kind, p, nodes, Source::Baseline(which.name().into()))
}
