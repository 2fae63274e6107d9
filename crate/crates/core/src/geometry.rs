//! Bi-unit reference elements and their natural coordinates.
//!
//! Every element is described by an affine map `x = N λ + ν` from natural
//! coordinates `λ` (barycentric for the simplex-like directions, Cartesian
//! otherwise) to Cartesian coordinates `x`, together with the two-sided
//! linear bounds `vl ≤ Bλ λ ≤ vu` whose image is exactly the element.
//!
//! Vertex and face conventions (used consistently across the crate):
//!
//! | kind     | vertices                                                        |
//! |----------|-----------------------------------------------------------------|
//! | line     | -1, 1                                                           |
//! | triangle | (-1,-1), (1,-1), (-1,1)                                         |
//! | quad     | (-1,-1), (1,-1), (1,1), (-1,1)                                  |
//! | tet      | (-1,-1,-1), (1,-1,-1), (-1,1,-1), (-1,-1,1)                     |
//! | hex      | bottom square z=-1 counter-clockwise, then the top square       |
//! | prism    | triangle at z=-1, then the triangle at z=1                      |
//! | pyramid  | base square z=-1 counter-clockwise, then the apex (0,0,1)       |
//!
//! Faces are listed by vertex tuples; a face tuple is mapped onto the face
//! reference element by matching its vertices in order with the reference
//! vertices of the face kind.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default absolute tolerance on constraint residuals for containment tests.
pub const CONTAINS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ElementKind {
    Line,
    Triangle,
    Quadrilateral,
    Tetrahedron,
    Hexahedron,
    Prism,
    Pyramid,
}

impl ElementKind {
    pub const ALL: [ElementKind; 7] = [
        ElementKind::Line,
        ElementKind::Triangle,
        ElementKind::Quadrilateral,
        ElementKind::Tetrahedron,
        ElementKind::Hexahedron,
        ElementKind::Prism,
        ElementKind::Pyramid,
    ];

    /// Cartesian dimension `d`.
    pub fn dim(self) -> usize {
        match self {
            ElementKind::Line => 1,
            ElementKind::Triangle | ElementKind::Quadrilateral => 2,
            _ => 3,
        }
    }

    /// Natural-coordinate dimension `d'`.
    pub fn natural_dim(self) -> usize {
        match self {
            ElementKind::Line => 1,
            ElementKind::Triangle => 3,
            ElementKind::Quadrilateral => 2,
            ElementKind::Tetrahedron => 4,
            ElementKind::Hexahedron => 3,
            ElementKind::Prism => 4,
            ElementKind::Pyramid => 3,
        }
    }

    /// Lebesgue measure of the bi-unit element.
    pub fn measure(self) -> f64 {
        match self {
            ElementKind::Line => 2.0,
            ElementKind::Triangle => 2.0,
            ElementKind::Quadrilateral => 4.0,
            ElementKind::Tetrahedron => 4.0 / 3.0,
            ElementKind::Hexahedron => 8.0,
            ElementKind::Prism => 4.0,
            ElementKind::Pyramid => 8.0 / 3.0,
        }
    }

    pub fn is_tensor(self) -> bool {
        matches!(
            self,
            ElementKind::Line | ElementKind::Quadrilateral | ElementKind::Hexahedron
        )
    }

    /// Short lowercase name used in file names and on the command line.
    pub fn name(self) -> &'static str {
        match self {
            ElementKind::Line => "line",
            ElementKind::Triangle => "tri",
            ElementKind::Quadrilateral => "quad",
            ElementKind::Tetrahedron => "tet",
            ElementKind::Hexahedron => "hex",
            ElementKind::Prism => "prism",
            ElementKind::Pyramid => "pyramid",
        }
    }

    /// Face geometries in the order they are processed when building
    /// compatibility constraints: vertices, lines and triangles before
    /// quadrilaterals. `None` stands for a point (the ends of a line).
    pub fn face_kinds(self) -> Vec<Option<ElementKind>> {
        match self {
            ElementKind::Line => vec![None],
            ElementKind::Triangle | ElementKind::Quadrilateral => vec![Some(ElementKind::Line)],
            ElementKind::Tetrahedron => vec![Some(ElementKind::Triangle)],
            ElementKind::Hexahedron => vec![Some(ElementKind::Quadrilateral)],
            ElementKind::Prism | ElementKind::Pyramid => {
                vec![Some(ElementKind::Triangle), Some(ElementKind::Quadrilateral)]
            }
        }
    }

    /// Largest degree generated by default for this kind.
    pub fn default_degree_cap(self) -> usize {
        match self {
            ElementKind::Line => 30,
            ElementKind::Triangle | ElementKind::Quadrilateral => 23,
            _ => 9,
        }
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ElementKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "line" | "segment" => Ok(ElementKind::Line),
            "tri" | "triangle" => Ok(ElementKind::Triangle),
            "quad" | "quadrilateral" => Ok(ElementKind::Quadrilateral),
            "tet" | "tetrahedron" => Ok(ElementKind::Tetrahedron),
            "hex" | "hexahedron" => Ok(ElementKind::Hexahedron),
            "prism" | "wedge" => Ok(ElementKind::Prism),
            "pyramid" | "pyr" => Ok(ElementKind::Pyramid),
            other => Err(Error::Argument(format!("unknown element kind '{other}'"))),
        }
    }
}

/// Affine map `x = origin + tangents · r` from face reference coordinates
/// into the parent element.
#[derive(Debug, Clone)]
pub struct FaceEmbedding {
    /// Face geometry; `None` for the point faces of a line.
    pub face_kind: Option<ElementKind>,
    /// Parent vertex indices spanning the face.
    pub vertices: Vec<usize>,
    /// `d × (d-1)` matrix.
    pub tangents: DMatrix<f64>,
    pub origin: DVector<f64>,
    /// Unit normal of the face hyperplane.
    pub normal: DVector<f64>,
}

impl FaceEmbedding {
    pub fn map(&self, r: &[f64]) -> Vec<f64> {
        let r = DVector::from_column_slice(r);
        (&self.origin + &self.tangents * r).iter().copied().collect()
    }

    /// Distance from `x` to the face hyperplane.
    pub fn plane_distance(&self, x: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x);
        (x - &self.origin).dot(&self.normal).abs()
    }

    /// Face reference coordinates of a point on the face (least squares).
    pub fn pull_back(&self, x: &[f64]) -> Vec<f64> {
        if self.tangents.ncols() == 0 {
            return Vec::new();
        }
        let rhs = DVector::from_column_slice(x) - &self.origin;
        let t = &self.tangents;
        let normal_eq = t.transpose() * t;
        let r = normal_eq
            .lu()
            .solve(&(t.transpose() * rhs))
            .expect("face tangents are linearly independent");
        r.iter().copied().collect()
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceElement {
    pub kind: ElementKind,
    pub dim: usize,
    pub natural_dim: usize,
    /// `d × d'` natural-to-Cartesian matrix.
    pub n_map: DMatrix<f64>,
    pub nu: DVector<f64>,
    /// `c × d'` bound matrix.
    pub b_lambda: DMatrix<f64>,
    pub v_lower: Vec<f64>,
    pub v_upper: Vec<f64>,
    pub vertices: Vec<Vec<f64>>,
    pub faces: Vec<FaceEmbedding>,
    // Inverse of [N; closure row] (or of N when d' = d).
    inverse: DMatrix<f64>,
    closure: Option<DVector<f64>>,
}

fn mat(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, data)
}

fn build(kind: ElementKind) -> ReferenceElement {
    use ElementKind::*;
    let inf = f64::INFINITY;
    let (n_map, nu, b_lambda, v_lower, v_upper, closure): (_, _, _, Vec<f64>, Vec<f64>, Option<Vec<f64>>) =
        match kind {
            Line => (mat(1, 1, &[1.0]), vec![0.0], mat(1, 1, &[1.0]), vec![-1.0], vec![1.0], None),
            Triangle => (
                mat(2, 3, &[-1.0, 1.0, -1.0, -1.0, -1.0, 1.0]),
                vec![0.0, 0.0],
                mat(4, 3, &[1., 0., 0., 0., 1., 0., 0., 0., 1., 1., 1., 1.]),
                vec![0.0, 0.0, 0.0, 1.0],
                vec![1.0, 1.0, 1.0, 1.0],
                Some(vec![1.0, 1.0, 1.0]),
            ),
            Quadrilateral => (
                DMatrix::identity(2, 2),
                vec![0.0, 0.0],
                DMatrix::identity(2, 2),
                vec![-1.0, -1.0],
                vec![1.0, 1.0],
                None,
            ),
            Tetrahedron => (
                mat(
                    3,
                    4,
                    &[-1., 1., -1., -1., -1., -1., 1., -1., -1., -1., -1., 1.],
                ),
                vec![0.0, 0.0, 0.0],
                mat(
                    5,
                    4,
                    &[
                        1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 1., 1., 1., 1., 1.,
                    ],
                ),
                vec![0.0, 0.0, 0.0, 0.0, 1.0],
                vec![1.0; 5],
                Some(vec![1.0, 1.0, 1.0, 1.0]),
            ),
            Hexahedron => (
                DMatrix::identity(3, 3),
                vec![0.0; 3],
                DMatrix::identity(3, 3),
                vec![-1.0; 3],
                vec![1.0; 3],
                None,
            ),
            Prism => (
                mat(3, 4, &[-1., 1., -1., 0., -1., -1., 1., 0., 0., 0., 0., 1.]),
                vec![0.0; 3],
                mat(
                    5,
                    4,
                    &[
                        1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 1., 0., 1., 1., 1., 0., 0., 0., 0., 1.,
                    ],
                ),
                vec![0.0, 0.0, 0.0, 1.0, -1.0],
                vec![1.0; 5],
                Some(vec![1.0, 1.0, 1.0, 0.0]),
            ),
            Pyramid => (
                DMatrix::identity(3, 3),
                vec![0.0; 3],
                mat(
                    5,
                    3,
                    &[2., 0., 1., 2., 0., -1., 0., 2., 1., 0., 2., -1., 0., 0., 1.],
                ),
                vec![-inf, -1.0, -inf, -1.0, -1.0],
                vec![1.0, inf, 1.0, inf, 1.0],
                None,
            ),
        };

    let vertices: Vec<Vec<f64>> = match kind {
        Line => vec![vec![-1.0], vec![1.0]],
        Triangle => vec![vec![-1.0, -1.0], vec![1.0, -1.0], vec![-1.0, 1.0]],
        Quadrilateral => vec![
            vec![-1.0, -1.0],
            vec![1.0, -1.0],
            vec![1.0, 1.0],
            vec![-1.0, 1.0],
        ],
        Tetrahedron => vec![
            vec![-1.0, -1.0, -1.0],
            vec![1.0, -1.0, -1.0],
            vec![-1.0, 1.0, -1.0],
            vec![-1.0, -1.0, 1.0],
        ],
        Hexahedron => vec![
            vec![-1.0, -1.0, -1.0],
            vec![1.0, -1.0, -1.0],
            vec![1.0, 1.0, -1.0],
            vec![-1.0, 1.0, -1.0],
            vec![-1.0, -1.0, 1.0],
            vec![1.0, -1.0, 1.0],
            vec![1.0, 1.0, 1.0],
            vec![-1.0, 1.0, 1.0],
        ],
        Prism => vec![
            vec![-1.0, -1.0, -1.0],
            vec![1.0, -1.0, -1.0],
            vec![-1.0, 1.0, -1.0],
            vec![-1.0, -1.0, 1.0],
            vec![1.0, -1.0, 1.0],
            vec![-1.0, 1.0, 1.0],
        ],
        Pyramid => vec![
            vec![-1.0, -1.0, -1.0],
            vec![1.0, -1.0, -1.0],
            vec![1.0, 1.0, -1.0],
            vec![-1.0, 1.0, -1.0],
            vec![0.0, 0.0, 1.0],
        ],
    };

    let face_tuples: Vec<Vec<usize>> = match kind {
        Line => vec![vec![0], vec![1]],
        Triangle => vec![vec![0, 1], vec![1, 2], vec![2, 0]],
        Quadrilateral => vec![vec![0, 1], vec![1, 2], vec![2, 3], vec![3, 0]],
        Tetrahedron => vec![vec![0, 1, 2], vec![0, 1, 3], vec![0, 2, 3], vec![1, 2, 3]],
        Hexahedron => vec![
            vec![0, 1, 2, 3],
            vec![4, 5, 6, 7],
            vec![0, 1, 5, 4],
            vec![1, 2, 6, 5],
            vec![2, 3, 7, 6],
            vec![3, 0, 4, 7],
        ],
        Prism => vec![
            vec![0, 1, 2],
            vec![3, 4, 5],
            vec![0, 1, 4, 3],
            vec![1, 2, 5, 4],
            vec![2, 0, 3, 5],
        ],
        Pyramid => vec![
            vec![0, 1, 2, 3],
            vec![0, 1, 4],
            vec![1, 2, 4],
            vec![2, 3, 4],
            vec![3, 0, 4],
        ],
    };

    let dim = kind.dim();
    let centroid = {
        let mut c = DVector::zeros(dim);
        for v in &vertices {
            c += DVector::from_column_slice(v);
        }
        c / vertices.len() as f64
    };
    let faces = face_tuples
        .into_iter()
        .map(|tuple| face_embedding(&vertices, tuple, &centroid))
        .collect();

    let natural_dim = kind.natural_dim();
    let closure = closure.map(DVector::from_vec);
    let square = match &closure {
        Some(row) => {
            let mut m = DMatrix::zeros(natural_dim, natural_dim);
            m.view_mut((0, 0), (dim, natural_dim)).copy_from(&n_map);
            m.set_row(dim, &row.transpose());
            m
        }
        None => n_map.clone(),
    };
    let inverse = square
        .try_inverse()
        .expect("natural-to-Cartesian map is invertible");

    ReferenceElement {
        kind,
        dim,
        natural_dim,
        n_map,
        nu: DVector::from_vec(nu),
        b_lambda,
        v_lower,
        v_upper,
        vertices,
        faces,
        inverse,
        closure,
    }
}

fn face_embedding(vertices: &[Vec<f64>], tuple: Vec<usize>, centroid: &DVector<f64>) -> FaceEmbedding {
    let v = |i: usize| DVector::from_column_slice(&vertices[tuple[i]]);
    let dim = centroid.len();
    let (face_kind, tangents, origin) = match tuple.len() {
        1 => (None, DMatrix::zeros(dim, 0), v(0)),
        2 => {
            let (a, b) = (v(0), v(1));
            let t = (&b - &a) / 2.0;
            (Some(ElementKind::Line), DMatrix::from_columns(&[t]), (a + b) / 2.0)
        }
        3 => {
            let (a, b, c) = (v(0), v(1), v(2));
            let t1 = (&b - &a) / 2.0;
            let t2 = (&c - &a) / 2.0;
            (Some(ElementKind::Triangle), DMatrix::from_columns(&[t1, t2]), (b + c) / 2.0)
        }
        4 => {
            let (a, b, c, d) = (v(0), v(1), v(2), v(3));
            let t1 = (&b - &a) / 2.0;
            let t2 = (&d - &a) / 2.0;
            (Some(ElementKind::Quadrilateral), DMatrix::from_columns(&[t1, t2]), (a + c) / 2.0)
        }
        _ => unreachable!("faces have one to four vertices"),
    };
    let mut normal = match dim {
        1 => DVector::from_element(1, 1.0),
        2 => {
            let t = tangents.column(0);
            DVector::from_vec(vec![t[1], -t[0]])
        }
        _ => {
            let a = tangents.column(0).into_owned();
            let b = tangents.column(1).into_owned();
            let a3 = nalgebra::Vector3::new(a[0], a[1], a[2]);
            let b3 = nalgebra::Vector3::new(b[0], b[1], b[2]);
            let n = a3.cross(&b3);
            DVector::from_vec(vec![n[0], n[1], n[2]])
        }
    };
    normal /= normal.norm();
    // orient outward
    if (&origin - centroid).dot(&normal) < 0.0 {
        normal = -normal;
    }
    FaceEmbedding {
        face_kind,
        vertices: tuple,
        tangents,
        origin,
        normal,
    }
}

/// The reference element of `kind`. Tables are built once and shared.
pub fn reference_element(kind: ElementKind) -> &'static ReferenceElement {
    static TABLE: OnceLock<Vec<ReferenceElement>> = OnceLock::new();
    let table = TABLE.get_or_init(|| ElementKind::ALL.iter().map(|&k| build(k)).collect());
    &table[kind as usize]
}

impl ReferenceElement {
    /// Largest violation of `vl ≤ Bλ λ ≤ vu`; infinite sides are skipped.
    pub fn natural_violation(&self, lambda: &[f64]) -> f64 {
        let l = DVector::from_column_slice(lambda);
        let v = &self.b_lambda * l;
        let mut worst: f64 = 0.0;
        for (r, val) in v.iter().enumerate() {
            if self.v_lower[r].is_finite() {
                worst = worst.max(self.v_lower[r] - val);
            }
            if self.v_upper[r].is_finite() {
                worst = worst.max(val - self.v_upper[r]);
            }
        }
        worst
    }

    /// `N λ + ν` without a feasibility check.
    pub fn map_natural(&self, lambda: &[f64]) -> Vec<f64> {
        let l = DVector::from_column_slice(lambda);
        (&self.n_map * l + &self.nu).iter().copied().collect()
    }

    /// Inverse of [`map_natural`](Self::map_natural) without a containment check.
    pub fn unmap_cartesian(&self, x: &[f64]) -> Vec<f64> {
        let mut rhs = DVector::zeros(self.natural_dim);
        for i in 0..self.dim {
            rhs[i] = x[i] - self.nu[i];
        }
        if self.closure.is_some() {
            rhs[self.dim] = 1.0;
        }
        (&self.inverse * rhs).iter().copied().collect()
    }

    pub fn natural_to_cartesian(&self, lambda: &[f64]) -> Result<Vec<f64>> {
        if lambda.len() != self.natural_dim {
            return Err(Error::Argument(format!(
                "{} expects {} natural coordinates, got {}",
                self.kind,
                self.natural_dim,
                lambda.len()
            )));
        }
        let viol = self.natural_violation(lambda);
        if viol > CONTAINS_TOL {
            return Err(Error::Domain(format!(
                "natural coordinate {lambda:?} violates the {} bounds by {viol:.3e}",
                self.kind
            )));
        }
        if let Some(row) = &self.closure {
            let s: f64 = row.iter().zip(lambda).map(|(a, b)| a * b).sum();
            if (s - 1.0).abs() > CONTAINS_TOL {
                return Err(Error::Domain(format!(
                    "barycentric coordinates {lambda:?} do not sum to one"
                )));
            }
        }
        Ok(self.map_natural(lambda))
    }

    pub fn cartesian_to_natural(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::Argument(format!(
                "{} expects {} Cartesian coordinates, got {}",
                self.kind,
                self.dim,
                x.len()
            )));
        }
        let lambda = self.unmap_cartesian(x);
        let back = self.map_natural(&lambda);
        let residual = back
            .iter()
            .zip(x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if residual > 1e-12 * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
            return Err(Error::Internal(format!(
                "inconsistent natural coordinate system for {}",
                self.kind
            )));
        }
        let viol = self.natural_violation(&lambda);
        if viol > CONTAINS_TOL {
            return Err(Error::Domain(format!(
                "point {x:?} lies outside the {} (violation {viol:.3e})",
                self.kind
            )));
        }
        Ok(lambda)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        self.natural_violation(&self.unmap_cartesian(x)) <= tol
    }

    /// Indices of the faces of the given geometry, in face-list order.
    pub fn faces_of_kind(&self, face_kind: Option<ElementKind>) -> Vec<usize> {
        self.faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.face_kind == face_kind)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Closed-form node count, equal to the dimension of the local space.
pub fn node_count(kind: ElementKind, p: usize) -> Result<usize> {
    if p < 1 {
        return Err(Error::Argument("polynomial degree must be at least 1".into()));
    }
    Ok(node_count_unchecked(kind, p))
}

pub(crate) fn node_count_unchecked(kind: ElementKind, p: usize) -> usize {
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

/// Nodes on a face geometry (a point face carries exactly one node).
pub fn face_node_count(face_kind: Option<ElementKind>, p: usize) -> usize {
    match face_kind {
        None => 1,
        Some(k) => node_count_unchecked(k, p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn line_table() {
        let e = reference_element(ElementKind::Line);
        assert_eq!(e.n_map, mat(1, 1, &[1.0]));
        assert_eq!(e.nu[0], 0.0);
        assert_eq!(e.v_lower, vec![-1.0]);
        assert_eq!(e.v_upper, vec![1.0]);
    }

    #[test]
    fn triangle_bounds_have_partition_row() {
        let e = reference_element(ElementKind::Triangle);
        assert_eq!(e.b_lambda.nrows(), 4);
        assert_eq!(e.b_lambda.row(3).iter().copied().collect::<Vec<_>>(), vec![1.0, 1.0, 1.0]);
        assert_eq!(e.v_lower, vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(e.v_upper, vec![1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn pyramid_bounds_are_one_sided() {
        let e = reference_element(ElementKind::Pyramid);
        let row0: Vec<f64> = e.b_lambda.row(0).iter().copied().collect();
        assert_eq!(row0, vec![2.0, 0.0, 1.0]);
        assert_eq!(e.v_upper[0], 1.0);
        assert_eq!(e.v_lower[0], f64::NEG_INFINITY);
    }

    #[test]
    fn natural_to_cartesian_examples() {
        let tri = reference_element(ElementKind::Triangle);
        let c = tri.natural_to_cartesian(&[1.0 / 3.0; 3]).unwrap();
        assert!(close(&c, &[-1.0 / 3.0, -1.0 / 3.0], 1e-15));
        assert!(close(&tri.natural_to_cartesian(&[1.0, 0.0, 0.0]).unwrap(), &[-1.0, -1.0], 0.0));
        let hex = reference_element(ElementKind::Hexahedron);
        assert!(close(&hex.natural_to_cartesian(&[0.2, -0.3, 0.9]).unwrap(), &[0.2, -0.3, 0.9], 0.0));
        assert!(matches!(tri.natural_to_cartesian(&[1.2, -0.2, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn cartesian_to_natural_examples() {
        let tri = reference_element(ElementKind::Triangle);
        assert!(close(&tri.cartesian_to_natural(&[-1.0, -1.0]).unwrap(), &[1.0, 0.0, 0.0], 1e-15));
        let prism = reference_element(ElementKind::Prism);
        let l = prism.cartesian_to_natural(&[-1.0 / 3.0, -1.0 / 3.0, 0.5]).unwrap();
        assert!(close(&l, &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.5], 1e-15));
        let line = reference_element(ElementKind::Line);
        assert!(close(&line.cartesian_to_natural(&[0.7]).unwrap(), &[0.7], 0.0));
        assert!(matches!(tri.cartesian_to_natural(&[0.1, 0.1]), Err(Error::Domain(_))));
    }

    #[test]
    fn containment_examples() {
        let tri = reference_element(ElementKind::Triangle);
        assert!(tri.contains(&[-1.0 / 3.0, -1.0 / 3.0], 1e-12));
        assert!(!tri.contains(&[0.1, 0.1], 1e-12));
        let pyr = reference_element(ElementKind::Pyramid);
        assert!(pyr.contains(&[0.0, 0.0, 1.0], 1e-12));
        assert!(!pyr.contains(&[0.5, 0.0, 0.5], 1e-12));
    }

    #[test]
    fn node_count_examples() {
        assert_eq!(node_count(ElementKind::Triangle, 7).unwrap(), 36);
        assert_eq!(node_count(ElementKind::Pyramid, 4).unwrap(), 55);
        assert_eq!(node_count(ElementKind::Hexahedron, 4).unwrap(), 125);
        assert!(matches!(node_count(ElementKind::Line, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn face_counts_and_kinds() {
        let expect = [
            (ElementKind::Line, 2, 0, 0),
            (ElementKind::Triangle, 3, 0, 0),
            (ElementKind::Quadrilateral, 4, 0, 0),
            (ElementKind::Tetrahedron, 4, 4, 0),
            (ElementKind::Hexahedron, 6, 0, 6),
            (ElementKind::Prism, 5, 2, 3),
            (ElementKind::Pyramid, 5, 4, 1),
        ];
        for (kind, total, tris, quads) in expect {
            let e = reference_element(kind);
            assert_eq!(e.faces.len(), total, "{kind}");
            if kind.dim() == 3 {
                assert_eq!(e.faces_of_kind(Some(ElementKind::Triangle)).len(), tris);
                assert_eq!(e.faces_of_kind(Some(ElementKind::Quadrilateral)).len(), quads);
            }
        }
    }

    #[test]
    fn face_images_lie_on_boundary() {
        for kind in ElementKind::ALL {
            let e = reference_element(kind);
            for face in &e.faces {
                let samples: Vec<Vec<f64>> = match face.face_kind {
                    None => vec![vec![]],
                    Some(fk) => reference_element(fk).vertices.clone(),
                };
                for r in samples {
                    let x = face.map(&r);
                    assert!(e.contains(&x, 1e-10), "{kind} face {:?}", face.vertices);
                    assert!(face.plane_distance(&x) < 1e-14);
                    assert!(close(&face.pull_back(&x), &r, 1e-14));
                }
                // the face vertices are parent vertices
                for &vi in &face.vertices {
                    assert!(face.plane_distance(&e.vertices[vi]) < 1e-14);
                }
            }
        }
    }
}
