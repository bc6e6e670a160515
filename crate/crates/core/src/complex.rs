//! Combinatorial input: a loopless multigraph embedded in a closed surface,
//! described by face boundary walks, with an intersection angle per edge.
//!
//! Vertices and edges are dense indices. Faces are cyclic sequences of edge
//! ids; a closed surface requires every edge to be walked exactly twice.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A single failed invariant of a [`SurfaceComplex`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoVertices,
    /// Both endpoints coincide.
    Loop { edge: usize },
    /// Edge walked a number of times other than two across all faces.
    EdgeCoverage { edge: usize, count: usize },
    EmptyFace { face: usize },
    /// Consecutive edges of the walk do not share endpoints.
    OpenFaceWalk { face: usize },
    Disconnected { components: usize },
    /// Intersection angle outside `(0, pi/2]`.
    PhiOutOfRange { edge: usize, phi: f64 },
    EulerCharacteristic { chi: i64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoVertices => write!(f, "complex has no vertices"),
            Violation::Loop { edge } => write!(f, "edge {edge} is a loop"),
            Violation::EdgeCoverage { edge, count } => {
                write!(f, "edge {edge} covered {count} times by face walks (expected 2)")
            }
            Violation::EmptyFace { face } => write!(f, "face {face} has an empty boundary walk"),
            Violation::OpenFaceWalk { face } => {
                write!(f, "face {face} boundary walk is not a closed walk")
            }
            Violation::Disconnected { components } => {
                write!(f, "graph is disconnected ({components} components)")
            }
            Violation::PhiOutOfRange { edge, phi } => {
                write!(f, "edge {edge} has intersection angle {phi} outside (0, pi/2]")
            }
            Violation::EulerCharacteristic { chi } => {
                write!(f, "Euler characteristic {chi} exceeds 2")
            }
        }
    }
}

/// Outcome of [`SurfaceComplex::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub euler_characteristic: i64,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Graph on a closed surface with per-edge intersection angles.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceComplex<T> {
    n_vertices: usize,
    edges: Vec<[usize; 2]>,
    faces: Vec<Vec<usize>>,
    phi: Vec<T>,
    // vertex -> incident edge ids, one entry per endpoint occurrence
    incidence: Vec<Vec<usize>>,
}

impl<T: Real> SurfaceComplex<T> {
    /// Builds a complex, checking only that every index refers to something
    /// that exists. Geometric and topological invariants are left to
    /// [`validate`](Self::validate).
    pub fn new(
        n_vertices: usize,
        edges: Vec<[usize; 2]>,
        faces: Vec<Vec<usize>>,
        phi: Vec<T>,
    ) -> Result<Self> {
        if phi.len() != edges.len() {
            return Err(Error::Input(format!(
                "{} intersection angles given for {} edges",
                phi.len(),
                edges.len()
            )));
        }
        let mut incidence = vec![Vec::new(); n_vertices];
        for (e, ends) in edges.iter().enumerate() {
            for &v in ends {
                if v >= n_vertices {
                    return Err(Error::Input(format!(
                        "edge {e} references unknown vertex {v}"
                    )));
                }
            }
            incidence[ends[0]].push(e);
            if ends[1] != ends[0] {
                incidence[ends[1]].push(e);
            }
        }
        for (f, walk) in faces.iter().enumerate() {
            if let Some(&e) = walk.iter().find(|&&e| e >= edges.len()) {
                return Err(Error::Input(format!("face {f} references unknown edge {e}")));
            }
        }
        Ok(Self {
            n_vertices,
            edges,
            faces,
            phi,
            incidence,
        })
    }

    /// [`new`](Self::new) followed by [`validate`](Self::validate); any
    /// violation becomes [`Error::InvalidComplex`].
    pub fn validated(
        n_vertices: usize,
        edges: Vec<[usize; 2]>,
        faces: Vec<Vec<usize>>,
        phi: Vec<T>,
    ) -> Result<Self> {
        let c = Self::new(n_vertices, edges, faces, phi)?;
        c.ensure_valid()?;
        Ok(c)
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidComplex(report.violations))
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> [usize; 2] {
        self.edges[e]
    }

    pub fn faces(&self) -> &[Vec<usize>] {
        &self.faces
    }

    pub fn phi(&self) -> &[T] {
        &self.phi
    }

    /// Edge ids incident to `v`; parallel edges appear separately.
    pub fn incident_edges(&self, v: usize) -> &[usize] {
        &self.incidence[v]
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices as i64 - self.edges.len() as i64 + self.faces.len() as i64
    }

    /// Number of edges having `v` as an endpoint, counting parallel edges.
    pub fn degree(&self, v: usize) -> Result<usize> {
        self.check_vertex(v)?;
        Ok(self.incidence[v].len())
    }

    /// `E(W)`: the edges with at least one endpoint in `w`.
    pub fn edge_neighborhood(&self, w: &[usize]) -> Result<BTreeSet<usize>> {
        let mut out = BTreeSet::new();
        for &v in w {
            self.check_vertex(v)?;
            out.extend(self.incidence[v].iter().copied());
        }
        Ok(out)
    }

    /// Whether some edge joins `v` and `w`.
    pub fn adjacent(&self, v: usize, w: usize) -> bool {
        v != w
            && self.incidence[v]
                .iter()
                .any(|&e| self.edges[e].contains(&w))
    }

    /// Vertex sequence traced by a face walk, starting at the endpoint of its
    /// first edge that makes the walk close. `None` if the walk is not closed.
    pub fn face_vertex_cycle(&self, f: usize) -> Option<Vec<usize>> {
        let walk = self.faces.get(f)?;
        let first = *walk.first()?;
        for start in self.edges[first] {
            let mut at = start;
            let mut cycle = Vec::with_capacity(walk.len());
            let mut ok = true;
            for &e in walk {
                let [a, b] = self.edges[e];
                cycle.push(at);
                if at == a {
                    at = b;
                } else if at == b {
                    at = a;
                } else {
                    ok = false;
                    break;
                }
            }
            if ok && at == start {
                return Some(cycle);
            }
        }
        None
    }

    /// Checks every invariant and reports all violations found.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        if self.n_vertices == 0 {
            violations.push(Violation::NoVertices);
        }
        for (e, [a, b]) in self.edges.iter().enumerate() {
            if a == b {
                violations.push(Violation::Loop { edge: e });
            }
        }

        let mut coverage = vec![0usize; self.edges.len()];
        for walk in &self.faces {
            for &e in walk {
                coverage[e] += 1;
            }
        }
        for (e, &count) in coverage.iter().enumerate() {
            if count != 2 {
                violations.push(Violation::EdgeCoverage { edge: e, count });
            }
        }

        for (f, walk) in self.faces.iter().enumerate() {
            if walk.is_empty() {
                violations.push(Violation::EmptyFace { face: f });
            } else if self.face_vertex_cycle(f).is_none() {
                violations.push(Violation::OpenFaceWalk { face: f });
            }
        }

        let components = self.component_count();
        if components > 1 {
            violations.push(Violation::Disconnected { components });
        }

        let half_pi = T::FRAC_PI_2();
        for (e, &phi) in self.phi.iter().enumerate() {
            if !(phi > T::zero() && phi <= half_pi) {
                violations.push(Violation::PhiOutOfRange {
                    edge: e,
                    phi: phi.as_f64(),
                });
            }
        }

        let chi = self.euler_characteristic();
        if chi > 2 {
            violations.push(Violation::EulerCharacteristic { chi });
        }

        ValidationReport {
            violations,
            euler_characteristic: chi,
        }
    }

    fn component_count(&self) -> usize {
        let mut seen = vec![false; self.n_vertices];
        let mut components = 0;
        let mut stack = Vec::new();
        for root in 0..self.n_vertices {
            if seen[root] {
                continue;
            }
            components += 1;
            seen[root] = true;
            stack.push(root);
            while let Some(v) = stack.pop() {
                for &e in &self.incidence[v] {
                    for w in self.edges[e] {
                        if !seen[w] {
                            seen[w] = true;
                            stack.push(w);
                        }
                    }
                }
            }
        }
        components
    }

    fn check_vertex(&self, v: usize) -> Result<()> {
        if v < self.n_vertices {
            Ok(())
        } else {
            Err(Error::Input(format!(
                "unknown vertex {v} (complex has {} vertices)",
                self.n_vertices
            )))
        }
    }

    /// Same combinatorics with the intersection angles replaced.
    pub fn with_phi(&self, phi: Vec<T>) -> Result<Self> {
        Self::new(self.n_vertices, self.edges.clone(), self.faces.clone(), phi)
    }
}

/// Prescribed total geodesic curvatures, one strictly positive value per
/// vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Prescription<T>(Vec<T>);

impl<T: Real> Prescription<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some((v, x)) = values
            .iter()
            .enumerate()
            .find(|(_, x)| !(x.is_finite() && **x > T::zero()))
        {
            return Err(Error::Input(format!(
                "prescribed curvature at vertex {v} must be positive and finite, got {x}"
            )));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub(crate) fn check_dim(&self, complex: &SurfaceComplex<T>) -> Result<()> {
        if self.0.len() == complex.n_vertices() {
            Ok(())
        } else {
            Err(Error::Input(format!(
                "prescription has {} entries for {} vertices",
                self.0.len(),
                complex.n_vertices()
            )))
        }
    }
}

impl<T> std::ops::Index<usize> for Prescription<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}
