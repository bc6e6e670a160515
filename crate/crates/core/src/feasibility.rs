//! Existence check for prescribed total geodesic curvatures.
//!
//! A prescription is realizable iff for every nonempty vertex subset `W`
//!
//! ```text
//! sum_{v in W} L_hat_v < 2 sum_{e in E(W)} phi(e)
//! ```
//!
//! where `E(W)` are the edges touching `W`. We maximize the margin
//! `f(W) = sum_W L_hat - 2 sum_{E(W)} phi` over nonempty `W`; the
//! prescription is feasible iff the maximum is negative.

use std::fmt;

use crate::complex::{Prescription, SurfaceComplex};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Margins this close to zero are treated as violating the strict
/// inequality.
pub const BOUNDARY_SLACK: f64 = 1e-12;

/// Enumeration guard for [`check_bruteforce`].
pub const BRUTE_FORCE_LIMIT: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    BruteForce,
    MinCut,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::BruteForce => "brute-force",
            Method::MinCut => "min-cut",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityVerdict<T> {
    pub feasible: bool,
    /// Margin within [`BOUNDARY_SLACK`] of zero.
    pub boundary: bool,
    /// A nonempty maximizer of the margin, sorted.
    pub worst_subset: Vec<usize>,
    pub worst_margin: T,
    pub method: Method,
}

impl<T: Real> FeasibilityVerdict<T> {
    fn from_worst(worst_subset: Vec<usize>, worst_margin: T, method: Method) -> Self {
        let slack = T::lit(BOUNDARY_SLACK);
        Self {
            feasible: worst_margin < -slack,
            boundary: worst_margin.abs() <= slack,
            worst_subset,
            worst_margin,
            method,
        }
    }
}

/// `f(W) = sum_W L_hat - 2 sum_{E(W)} phi`, evaluated directly.
pub fn subset_margin<T: Real>(
    complex: &SurfaceComplex<T>,
    lhat: &Prescription<T>,
    subset: &[usize],
) -> Result<T> {
    lhat.check_dim(complex)?;
    let edges = complex.edge_neighborhood(subset)?;
    let mut seen = vec![false; complex.n_vertices()];
    let mut margin = T::zero();
    for &v in subset {
        if !std::mem::replace(&mut seen[v], true) {
            margin = margin + lhat[v];
        }
    }
    let two = T::lit(2.0);
    Ok(edges
        .into_iter()
        .fold(margin, |m, e| m - two * complex.phi()[e]))
}

/// Exact maximization over all `2^|V| - 1` nonempty subsets, visited in
/// Gray-code order so each step adds or removes one vertex.
pub fn check_bruteforce<T: Real>(
    complex: &SurfaceComplex<T>,
    lhat: &Prescription<T>,
) -> Result<FeasibilityVerdict<T>> {
    complex.ensure_valid()?;
    lhat.check_dim(complex)?;
    let n = complex.n_vertices();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::Size {
            method: "brute-force feasibility (use min-cut)",
            size: n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let two = T::lit(2.0);
    let phi = complex.phi();
    // endpoints of each edge currently inside W
    let mut inside = vec![0u8; complex.n_edges()];
    let mut margin = T::zero();
    let mut best_mask = 0u32;
    let mut best = T::neg_infinity();
    let mut mask = 0u32;
    for step in 1u32..(1u32 << n) {
        let v = step.trailing_zeros() as usize;
        mask ^= 1 << v;
        if mask & (1 << v) != 0 {
            margin = margin + lhat[v];
            for &e in complex.incident_edges(v) {
                if inside[e] == 0 {
                    margin = margin - two * phi[e];
                }
                inside[e] += 1;
            }
        } else {
            margin = margin - lhat[v];
            for &e in complex.incident_edges(v) {
                inside[e] -= 1;
                if inside[e] == 0 {
                    margin = margin + two * phi[e];
                }
            }
        }
        if margin > best {
            best = margin;
            best_mask = mask;
        }
    }
    let subset: Vec<usize> = (0..n).filter(|v| best_mask & (1 << v) != 0).collect();
    // recompute without the running-sum drift
    let exact = subset_margin(complex, lhat, &subset)?;
    Ok(FeasibilityVerdict::from_worst(subset, exact, Method::BruteForce))
}

/// Polynomial-time equivalent of [`check_bruteforce`].
///
/// Selection network: source -> v with capacity `L_hat_v`, v -> edge node
/// (unbounded) for each incident edge, edge node -> sink with capacity
/// `2 phi(e)`. For a source side `W` the cut is
/// `sum_{v not in W} L_hat_v + 2 sum_{E(W)} phi`, so
/// `max f(W) = sum L_hat - min cut`. One max-flow per forced vertex `u`
/// (source -> u unbounded) keeps `W` nonempty.
pub fn check_mincut<T: Real>(
    complex: &SurfaceComplex<T>,
    lhat: &Prescription<T>,
) -> Result<FeasibilityVerdict<T>> {
    complex.ensure_valid()?;
    lhat.check_dim(complex)?;
    let n = complex.n_vertices();
    let m = complex.n_edges();
    let two = T::lit(2.0);
    let total: T = lhat.values().iter().fold(T::zero(), |s, x| s + *x)
        + complex.phi().iter().fold(T::zero(), |s, x| s + two * *x);
    let unbounded = total * T::lit(4.0) + T::one();
    let (source, sink) = (n + m, n + m + 1);

    let mut best: Option<(Vec<usize>, T)> = None;
    for forced in 0..n {
        let mut net = MaxFlow::new(n + m + 2, T::lit(BOUNDARY_SLACK));
        for v in 0..n {
            let cap = if v == forced { unbounded } else { lhat[v] };
            net.add_edge(source, v, cap);
        }
        for (e, [a, b]) in complex.edges().iter().enumerate() {
            net.add_edge(*a, n + e, unbounded);
            net.add_edge(*b, n + e, unbounded);
            net.add_edge(n + e, sink, two * complex.phi()[e]);
        }
        net.max_flow(source, sink);
        let side = net.source_side(source);
        let subset: Vec<usize> = (0..n).filter(|&v| side[v]).collect();
        let margin = subset_margin(complex, lhat, &subset)?;
        if best.as_ref().is_none_or(|(_, b)| margin > *b) {
            best = Some((subset, margin));
        }
    }
    let (subset, margin) = best.ok_or_else(|| Error::Input("complex has no vertices".into()))?;
    Ok(FeasibilityVerdict::from_worst(subset, margin, Method::MinCut))
}

/// Dinic's algorithm over real capacities. Residuals at or below `slack`
/// count as saturated.
struct MaxFlow<T> {
    // to, capacity, index of reverse arc in adj[to]
    adj: Vec<Vec<(usize, T, usize)>>,
    slack: T,
}

impl<T: Real> MaxFlow<T> {
    fn new(nodes: usize, slack: T) -> Self {
        Self {
            adj: vec![Vec::new(); nodes],
            slack,
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: T) {
        let (rf, rt) = (self.adj[to].len(), self.adj[from].len());
        self.adj[from].push((to, cap, rf));
        self.adj[to].push((from, T::zero(), rt));
    }

    fn levels(&self, s: usize) -> Vec<Option<usize>> {
        let mut level = vec![None; self.adj.len()];
        level[s] = Some(0);
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(x) = queue.pop_front() {
            let next = level[x].map(|l| l + 1);
            for &(y, cap, _) in &self.adj[x] {
                if cap > self.slack && level[y].is_none() {
                    level[y] = next;
                    queue.push_back(y);
                }
            }
        }
        level
    }

    fn augment(
        &mut self,
        x: usize,
        t: usize,
        limit: T,
        level: &[Option<usize>],
        iter: &mut [usize],
    ) -> T {
        if x == t {
            return limit;
        }
        while iter[x] < self.adj[x].len() {
            let (y, cap, rev) = self.adj[x][iter[x]];
            let forward = matches!((level[x], level[y]), (Some(a), Some(b)) if b == a + 1);
            if cap > self.slack && forward {
                let pushed = self.augment(y, t, limit.min(cap), level, iter);
                if pushed > T::zero() {
                    self.adj[x][iter[x]].1 = cap - pushed;
                    self.adj[y][rev].1 = self.adj[y][rev].1 + pushed;
                    return pushed;
                }
            }
            iter[x] += 1;
        }
        T::zero()
    }

    fn max_flow(&mut self, s: usize, t: usize) -> T {
        let mut flow = T::zero();
        loop {
            let level = self.levels(s);
            if level[t].is_none() {
                return flow;
            }
            let mut iter = vec![0; self.adj.len()];
            loop {
                let pushed = self.augment(s, t, T::infinity(), &level, &mut iter);
                if pushed <= T::zero() {
                    break;
                }
                flow = flow + pushed;
            }
        }
    }

    /// Nodes reachable from `s` in the residual graph.
    fn source_side(&self, s: usize) -> Vec<bool> {
        self.levels(s).into_iter().map(|l| l.is_some()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::fixtures;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn tet_lhat(first: f64) -> Prescription<f64> {
        Prescription::new(vec![first, 4.053192, 4.053192, 4.053192]).unwrap()
    }

    #[test]
    fn tetrahedron_feasible() {
        let tet = fixtures::tetrahedron(FRAC_PI_2);
        let lhat = tet_lhat(4.053192);
        for verdict in [check_bruteforce(&tet, &lhat).unwrap(), check_mincut(&tet, &lhat).unwrap()] {
            assert!(verdict.feasible && !verdict.boundary);
            assert!(verdict.worst_margin < 0.0);
        }
        // W = V: 4 * 4.053192 against 2 * 6 * pi/2
        let all = subset_margin(&tet, &lhat, &[0, 1, 2, 3]).unwrap();
        assert!((all - (4.0 * 4.053192 - 6.0 * PI)).abs() < 1e-12);
        // brute force and min-cut see the same maximum, attained at W = V
        let b = check_bruteforce(&tet, &lhat).unwrap();
        let m = check_mincut(&tet, &lhat).unwrap();
        assert!((b.worst_margin - m.worst_margin).abs() < 1e-12);
        assert_eq!(b.worst_subset, vec![0, 1, 2, 3]);
        assert!((b.worst_margin - all).abs() < 1e-12);
    }

    #[test]
    fn tetrahedron_single_vertex_violation() {
        let tet = fixtures::tetrahedron(FRAC_PI_2);
        let lhat = tet_lhat(10.0);
        let single = subset_margin(&tet, &lhat, &[0]).unwrap();
        assert!((single - (10.0 - 3.0 * PI)).abs() < 1e-12);
        // the whole vertex set violates by more than {v0} alone
        let whole = 10.0 + 3.0 * 4.053192 - 6.0 * PI;
        for verdict in [check_bruteforce(&tet, &lhat).unwrap(), check_mincut(&tet, &lhat).unwrap()] {
            assert!(!verdict.feasible);
            assert_eq!(verdict.worst_subset, vec![0, 1, 2, 3]);
            assert!((verdict.worst_margin - whole).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_boundary_is_infeasible() {
        let tet = fixtures::tetrahedron(FRAC_PI_2);
        // every proper subset is strictly feasible, W = V sits at equality
        let lhat = Prescription::new(vec![1.5 * PI; 4]).unwrap();
        for verdict in [check_bruteforce(&tet, &lhat).unwrap(), check_mincut(&tet, &lhat).unwrap()] {
            assert!(!verdict.feasible);
            assert!(verdict.boundary);
        }
        // single-vertex equality L_hat_0 = 3 pi
        let lhat = Prescription::new(vec![3.0 * PI, 0.1, 0.1, 0.1]).unwrap();
        let verdict = check_mincut(&tet, &lhat).unwrap();
        assert!(verdict.boundary && !verdict.feasible);
        assert_eq!(verdict.worst_subset, vec![0]);
    }

    #[test]
    fn disconnected_worst_subset() {
        // octahedron: vertices 0 and 5 are antipodal (non-adjacent)
        let oct = fixtures::octahedron(FRAC_PI_2);
        assert!(!oct.adjacent(0, 5));
        let mut values = vec![0.5; 6];
        values[0] = 4.0 * PI + 0.3;
        values[5] = 4.0 * PI + 0.3;
        let lhat = Prescription::new(values).unwrap();
        let b = check_bruteforce(&oct, &lhat).unwrap();
        let m = check_mincut(&oct, &lhat).unwrap();
        assert_eq!(b.worst_subset, vec![0, 5]);
        assert_eq!(m.worst_subset, vec![0, 5]);
        assert!((b.worst_margin - 0.6).abs() < 1e-12);
        assert!((m.worst_margin - b.worst_margin).abs() < 1e-12);
    }

    #[test]
    fn size_guard() {
        let big = fixtures::torus_quadrangulation(5, 5, 1.0);
        let lhat = Prescription::new(vec![1.0; 25]).unwrap();
        assert!(matches!(check_bruteforce(&big, &lhat), Err(Error::Size { .. })));
        assert!(check_mincut(&big, &lhat).unwrap().feasible);
    }
}
