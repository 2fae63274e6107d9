//! Face-compatibility constraints.
//!
//! Given a node distribution prescribed on each face geometry of an
//! element, entries of an orbit collection are pinned so that the nodes
//! they generate on the element boundary coincide with the prescribed
//! face nodes. Adjacent elements sharing a face then share node locations.
//!
//! Prescribed nodes are mapped to one face of each kind (the first one by
//! default), converted to natural coordinates, and matched against orbit
//! points in collection order. Triangle faces are processed before
//! quadrilateral faces; nodes already produced by pinned orbits count as
//! covered.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{face_node_count, reference_element, ElementKind, FaceEmbedding, ReferenceElement};
use crate::symmetry::{
    attach_constraints, decompose, min_pair_distance, NodalDistribution, OrbitCollection, DUPLICATE_NODE_TOL,
};

/// Residual allowed when solving an orbit point for a prescribed node.
pub const SOLVE_TOL: f64 = 1e-10;
/// Feasibility margin for solved orbit parameters.
pub const FEASIBILITY_TOL: f64 = 1e-12;
/// Distance below which a node counts as lying on a face, or as matching
/// a prescribed node.
pub const MATCH_TOL: f64 = 1e-10;

/// Node distribution required on every face of one geometry.
#[derive(Debug, Clone)]
pub enum FacePrescription {
    /// The end points of a line: each carries exactly one node.
    Vertex,
    /// A distribution on a line, triangle or quadrilateral face.
    Face(NodalDistribution),
}

impl FacePrescription {
    /// Wrap a face distribution after checking that it is symmetric under
    /// the symmetry group of its own geometry.
    pub fn face(dist: NodalDistribution) -> Result<Self> {
        if dist.kind.dim() > 2 {
            return Err(Error::Argument(format!("{} is not a face geometry", dist.kind)));
        }
        decompose(dist.kind, dist.degree, &dist.nodes).map_err(|e| {
            Error::Argument(format!("prescribed {} distribution is not symmetric: {e}", dist.kind))
        })?;
        Ok(FacePrescription::Face(dist))
    }

    pub fn face_kind(&self) -> Option<ElementKind> {
        match self {
            FacePrescription::Vertex => None,
            FacePrescription::Face(d) => Some(d.kind),
        }
    }

    fn local_nodes(&self) -> Vec<Vec<f64>> {
        match self {
            FacePrescription::Vertex => vec![vec![]],
            FacePrescription::Face(d) => d.nodes.clone(),
        }
    }

    fn degree(&self) -> Option<usize> {
        match self {
            FacePrescription::Vertex => None,
            FacePrescription::Face(d) => Some(d.degree),
        }
    }
}

/// Which face of each kind receives the prescribed nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FaceChoice {
    #[default]
    First,
    /// The `k`-th face of each kind, modulo the number of such faces.
    Index(usize),
}

fn find_prescription(prescriptions: &[FacePrescription], face_kind: Option<ElementKind>) -> Result<&FacePrescription> {
    prescriptions
        .iter()
        .find(|p| p.face_kind() == face_kind)
        .ok_or_else(|| {
            let name = face_kind.map_or("vertex".to_string(), |k| k.to_string());
            Error::Argument(format!("missing {name} face prescription"))
        })
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

fn on_face<'a>(face: &'a FaceEmbedding, pts: &'a [Vec<f64>]) -> impl Iterator<Item = &'a Vec<f64>> + 'a {
    pts.iter().filter(move |x| face.plane_distance(x) <= MATCH_TOL)
}

/// Pin entries of `collection` so that its boundary nodes reproduce the
/// prescribed face distributions.
pub fn build_compatibility_constraints(
    collection: &OrbitCollection,
    prescriptions: &[FacePrescription],
) -> Result<OrbitCollection> {
    build_compatibility_constraints_on(collection, prescriptions, FaceChoice::First)
}

pub fn build_compatibility_constraints_on(
    collection: &OrbitCollection,
    prescriptions: &[FacePrescription],
    choice: FaceChoice,
) -> Result<OrbitCollection> {
    let kind = collection.kind;
    let elem = reference_element(kind);
    for p in prescriptions {
        if let Some(deg) = p.degree() {
            if deg != collection.degree {
                return Err(Error::Argument(format!(
                    "prescription degree {deg} differs from collection degree {}",
                    collection.degree
                )));
            }
        }
    }
    let mut entries = collection.entries.clone();
    let mut pinned: Vec<Option<Vec<f64>>> = vec![None; entries.len()];

    for face_kind in kind.face_kinds() {
        let presc = find_prescription(prescriptions, face_kind)?;
        let faces = elem.faces_of_kind(face_kind);
        let face_idx = match choice {
            FaceChoice::First => faces[0],
            FaceChoice::Index(k) => faces[k % faces.len()],
        };
        let face = &elem.faces[face_idx];
        let prescribed: Vec<Vec<f64>> = presc.local_nodes().iter().map(|r| face.map(r)).collect();
        let mut worklist: Vec<usize> = (0..prescribed.len()).collect();

        let cover = |pts: &[Vec<f64>], worklist: &mut Vec<usize>, strict: bool| -> bool {
            for x in on_face(face, pts) {
                match prescribed.iter().position(|y| close(x, y, MATCH_TOL)) {
                    Some(r) => worklist.retain(|&w| w != r),
                    None if strict => return false,
                    None => {}
                }
            }
            true
        };

        for (j, xi) in pinned.iter().enumerate() {
            if let Some(xi) = xi {
                let pts = entries[j].orbit.cartesian_points(xi);
                if !cover(&pts, &mut worklist, true) {
                    return Err(Error::IncompatibleCollection(format!(
                        "entry {j} ({}) places a node on face {face_idx} that is not prescribed",
                        entries[j].orbit
                    )));
                }
            }
        }

        while let Some(&r) = worklist.first() {
            let lambda = elem.cartesian_to_natural(&prescribed[r])?;
            let mut found = None;
            'entries: for (j, entry) in entries.iter().enumerate() {
                if pinned[j].is_some() || entry.is_constrained() {
                    continue;
                }
                let orbit = entry.orbit;
                for pt in &orbit.points {
                    let (xi, resid) = pt.solve(&lambda);
                    if resid > SOLVE_TOL || orbit.bounds.violation(&xi) > FEASIBILITY_TOL {
                        continue;
                    }
                    let pts = orbit.cartesian_points(&xi);
                    if min_pair_distance(&pts).is_some_and(|(_, _, d)| d <= DUPLICATE_NODE_TOL) {
                        continue;
                    }
                    let all_prescribed =
                        on_face(face, &pts).all(|x| prescribed.iter().any(|y| close(x, y, MATCH_TOL)));
                    if all_prescribed {
                        found = Some((j, xi, pts));
                        break 'entries;
                    }
                }
            }
            let Some((j, xi, pts)) = found else {
                return Err(Error::IncompatibleCollection(format!(
                    "no free entry of {collection} can place prescribed node {:?}",
                    prescribed[r]
                )));
            };
            let orbit = entries[j].orbit;
            let (a, target) = pin_matrix(&orbit.points[0].s, &xi);
            entries[j] = attach_constraints(orbit, a, target.clone(), target)?;
            cover(&pts, &mut worklist, false);
            pinned[j] = Some(xi);
        }
    }
    OrbitCollection::new(kind, collection.degree, entries)
}

/// Nodes of `nodes` lying on `face`, pulled back to face coordinates.
pub fn face_nodes(face: &FaceEmbedding, nodes: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    nodes
        .iter()
        .filter(|x| face.plane_distance(x) <= tol)
        .map(|x| face.pull_back(x))
        .collect()
}

/// True iff every face carries exactly the prescribed distribution.
pub fn verify_face_match(
    elem: &ReferenceElement,
    dist: &NodalDistribution,
    prescriptions: &[FacePrescription],
    tol: f64,
) -> bool {
    for face in &elem.faces {
        let Ok(presc) = find_prescription(prescriptions, face.face_kind) else {
            return false;
        };
        let expected = presc.local_nodes();
        let got = face_nodes(face, &dist.nodes, tol);
        if got.len() != expected.len() || got.len() != face_node_count(face.face_kind, dist.degree) {
            return false;
        }
        let mut used = vec![false; expected.len()];
        for x in &got {
            let hit = (0..expected.len()).find(|&k| !used[k] && close(x, &expected[k], tol));
            match hit {
                Some(k) => used[k] = true,
                None => return false,
            }
        }
    }
    true
}

/// Prescriptions for the faces of `kind` assembled from per-geometry
/// distributions (ignored when `kind` is a line).
pub fn prescriptions_for(kind: ElementKind, face_dists: &[NodalDistribution]) -> Result<Vec<FacePrescription>> {
    let mut out = Vec::new();
    for fk in kind.face_kinds() {
        match fk {
            None => out.push(FacePrescription::Vertex),
            Some(k) => {
                let d = face_dists
                    .iter()
                    .find(|d| d.kind == k)
                    .ok_or_else(|| Error::Argument(format!("missing {k} face distribution")))?;
                out.push(FacePrescription::face(d.clone())?);
            }
        }
    }
    Ok(out)
}

/// Equality constraints `S₁ ξ = S₁ ξ*` pinning an orbit to `ξ*`.
fn pin_matrix(s1: &DMatrix<f64>, xi: &[f64]) -> (DMatrix<f64>, Vec<f64>) {
    let target = (s1 * nalgebra::DVector::from_column_slice(xi)).iter().copied().collect();
    (s1.clone(), target)
}
