//! Independent checks: central finite differences, a counter-based random
//! source for reproducible fixtures, fixture complexes and planted-solution
//! instances.

use crate::complex::{Prescription, SurfaceComplex};
use crate::curvature::Evaluator;
use crate::error::Result;
use crate::linalg::DenseMatrix;
use crate::scalar::Real;

/// Default central-difference step in `K`.
pub const FD_STEP: f64 = 1e-5;

/// Floor for relative-error denominators.
pub const REL_FLOOR: f64 = 1e-8;

/// `|a - b| / max(|a|, |b|, REL_FLOOR)`
pub fn relative_error<T: Real>(a: T, b: T) -> T {
    (a - b).abs() / a.abs().max(b.abs()).max(T::lit(REL_FLOOR))
}

pub fn max_relative_error<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |m, (x, y)| m.max(relative_error(*x, *y)))
}

/// Entrywise relative error, each entry scaled by the matrix's largest
/// magnitude on that row (so structural zeros are compared absolutely
/// against the row scale).
pub fn matrix_relative_error<T: Real>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> T {
    let n = a.dim();
    let mut worst = T::zero();
    for i in 0..n {
        let scale = (0..n)
            .fold(T::zero(), |s, j| s.max(a[(i, j)].abs()).max(b[(i, j)].abs()))
            .max(T::lit(REL_FLOOR));
        for j in 0..n {
            worst = worst.max((a[(i, j)] - b[(i, j)]).abs() / scale);
        }
    }
    worst
}

/// `(f(K + h e_i) - f(K - h e_i)) / 2h` for each `i`.
pub fn fd_gradient<T: Real>(mut f: impl FnMut(&[T]) -> T, k: &[T], h: T) -> Vec<T> {
    let mut x = k.to_vec();
    (0..k.len())
        .map(|i| {
            x[i] = k[i] + h;
            let up = f(&x);
            x[i] = k[i] - h;
            let down = f(&x);
            x[i] = k[i];
            (up - down) / (T::lit(2.0) * h)
        })
        .collect()
}

/// Central-difference Jacobian of `L(K)`, column by column.
pub fn fd_jacobian<T: Real>(
    complex: &SurfaceComplex<T>,
    k: &[T],
    h: T,
) -> Result<DenseMatrix<T>> {
    let eval = Evaluator::new(complex)?;
    let n = k.len();
    let mut jac = DenseMatrix::zeros(n);
    let mut x = k.to_vec();
    for j in 0..n {
        x[j] = k[j] + h;
        let up = eval.curvatures(&x)?;
        x[j] = k[j] - h;
        let down = eval.curvatures(&x)?;
        x[j] = k[j];
        for i in 0..n {
            jac[(i, j)] = (up[i] - down[i]) / (T::lit(2.0) * h);
        }
    }
    Ok(jac)
}

/// Central second differences of a scalar field.
pub fn fd_hessian<T: Real>(mut f: impl FnMut(&[T]) -> T, k: &[T], h: T) -> DenseMatrix<T> {
    let n = k.len();
    let mut hess = DenseMatrix::zeros(n);
    let mut x = k.to_vec();
    let four_h2 = T::lit(4.0) * h * h;
    for i in 0..n {
        for j in i..n {
            let mut corner = |si: T, sj: T| {
                x.copy_from_slice(k);
                x[i] = x[i] + si * h;
                x[j] = x[j] + sj * h;
                f(&x)
            };
            let one = T::one();
            let value = (corner(one, one) - corner(one, -one) - corner(-one, one)
                + corner(-one, -one))
                / four_h2;
            hess[(i, j)] = value;
            hess[(j, i)] = value;
        }
    }
    hess
}

/// SplitMix64 evaluated at `seed + counter * golden`: every draw depends only
/// on `(seed, counter)`, so sequences are identical on every platform.
#[derive(Debug, Clone)]
pub struct CounterRng {
    seed: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        let mut z = self
            .seed
            .wrapping_add(self.counter.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn uniform_vec<T: Real>(&mut self, n: usize, lo: f64, hi: f64) -> Vec<T> {
        (0..n).map(|_| T::lit(self.uniform(lo, hi))).collect()
    }
}

/// Feasible instance with a known solution `k_bar`.
#[derive(Debug, Clone)]
pub struct SyntheticInstance<T> {
    pub complex: SurfaceComplex<T>,
    pub k_bar: Vec<T>,
    pub lhat: Prescription<T>,
    pub seed: u64,
}

/// Samples `k_bar` uniformly from `range` per vertex and sets
/// `L_hat := L(k_bar)`.
pub fn make_synthetic<T: Real>(
    complex: &SurfaceComplex<T>,
    seed: u64,
    range: (f64, f64),
) -> Result<SyntheticInstance<T>> {
    let mut rng = CounterRng::new(seed);
    let k_bar = rng.uniform_vec(complex.n_vertices(), range.0, range.1);
    planted(complex, k_bar, seed)
}

/// Instance whose solution is exactly the given `k_bar`.
pub fn planted<T: Real>(
    complex: &SurfaceComplex<T>,
    k_bar: Vec<T>,
    seed: u64,
) -> Result<SyntheticInstance<T>> {
    let l = Evaluator::new(complex)?.curvatures(&k_bar)?;
    Ok(SyntheticInstance {
        complex: complex.clone(),
        k_bar,
        lhat: Prescription::new(l)?,
        seed,
    })
}

/// Fixture complexes.
pub mod fixtures {
    use std::collections::HashMap;

    use super::CounterRng;
    use crate::complex::SurfaceComplex;
    use crate::scalar::Real;

    /// Builds a simple complex from faces given as vertex cycles; one edge
    /// per unordered vertex pair, numbered in order of first appearance.
    pub fn from_vertex_cycles<T: Real>(n: usize, cycles: &[Vec<usize>], phi: T) -> SurfaceComplex<T> {
        let mut ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        let faces = cycles
            .iter()
            .map(|cycle| {
                (0..cycle.len())
                    .map(|i| {
                        let (a, b) = (cycle[i], cycle[(i + 1) % cycle.len()]);
                        *ids.entry((a.min(b), a.max(b))).or_insert_with(|| {
                            edges.push([a.min(b), a.max(b)]);
                            edges.len() - 1
                        })
                    })
                    .collect()
            })
            .collect();
        let m = edges.len();
        SurfaceComplex::new(n, edges, faces, vec![phi; m]).expect("fixture indices")
    }

    /// Boundary of a tetrahedron: edges 01, 12, 02, 13, 03, 23.
    pub fn tetrahedron<T: Real>(phi: T) -> SurfaceComplex<T> {
        from_vertex_cycles(
            4,
            &[vec![0, 1, 2], vec![0, 1, 3], vec![0, 2, 3], vec![1, 2, 3]],
            phi,
        )
    }

    /// Two vertices, two parallel edges, two bigon faces.
    pub fn bigon<T: Real>(phi: T) -> SurfaceComplex<T> {
        SurfaceComplex::new(2, vec![[0, 1], [0, 1]], vec![vec![0, 1], vec![0, 1]], vec![phi; 2])
            .expect("fixture indices")
    }

    /// Poles 0 and 5, equator 1..=4.
    pub fn octahedron<T: Real>(phi: T) -> SurfaceComplex<T> {
        let mut cycles = Vec::new();
        for i in 1..=4 {
            let j = i % 4 + 1;
            cycles.push(vec![0, i, j]);
            cycles.push(vec![5, j, i]);
        }
        from_vertex_cycles(6, &cycles, phi)
    }

    /// Cube graph: vertex `x + 2y + 4z`.
    pub fn cube<T: Real>(phi: T) -> SurfaceComplex<T> {
        let mut cycles = Vec::new();
        for axis in 0..3 {
            let (a, b) = (1 << ((axis + 1) % 3), 1 << ((axis + 2) % 3));
            for side in [0, 1 << axis] {
                cycles.push(vec![side, side + a, side + a + b, side + b]);
            }
        }
        from_vertex_cycles(8, &cycles, phi)
    }

    /// `rows x cols` grid on the torus (both at least 3), quadrilateral faces.
    pub fn torus_quadrangulation<T: Real>(rows: usize, cols: usize, phi: T) -> SurfaceComplex<T> {
        assert!(rows >= 3 && cols >= 3, "torus grid needs at least 3x3");
        let id = |i: usize, j: usize| (i % rows) * cols + (j % cols);
        let mut cycles = Vec::new();
        for i in 0..rows {
            for j in 0..cols {
                cycles.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        from_vertex_cycles(rows * cols, &cycles, phi)
    }

    /// Adds an edge parallel to `e`, separated from it by a new bigon face.
    pub fn double_edge<T: Real>(c: &SurfaceComplex<T>, e: usize) -> SurfaceComplex<T> {
        let mut edges = c.edges().to_vec();
        let mut faces = c.faces().to_vec();
        let mut phi = c.phi().to_vec();
        let twin = edges.len();
        edges.push(c.edge(e));
        phi.push(c.phi()[e]);
        // swap the second occurrence of e for its twin
        let mut seen = 0;
        'outer: for walk in faces.iter_mut() {
            for slot in walk.iter_mut() {
                if *slot == e {
                    seen += 1;
                    if seen == 2 {
                        *slot = twin;
                        break 'outer;
                    }
                }
            }
        }
        faces.push(vec![e, twin]);
        SurfaceComplex::new(c.n_vertices(), edges, faces, phi).expect("derived indices")
    }

    /// Inserts a vertex inside face `f`, joined to every corner.
    pub fn stellar_subdivide<T: Real>(c: &SurfaceComplex<T>, f: usize, spoke_phi: &[T]) -> SurfaceComplex<T> {
        let cycle = c.face_vertex_cycle(f).expect("closed face walk");
        let walk = c.faces()[f].clone();
        let m = walk.len();
        let x = c.n_vertices();
        let mut edges = c.edges().to_vec();
        let mut phi = c.phi().to_vec();
        let first_spoke = edges.len();
        for (i, &u) in cycle.iter().enumerate() {
            edges.push([x, u]);
            phi.push(spoke_phi[i % spoke_phi.len()]);
        }
        let spoke = |i: usize| first_spoke + i % m;
        let mut faces = c.faces().to_vec();
        faces[f] = vec![walk[0], spoke(1), spoke(0)];
        for i in 1..m {
            faces.push(vec![walk[i], spoke(i + 1), spoke(i)]);
        }
        SurfaceComplex::new(x + 1, edges, faces, phi).expect("derived indices")
    }

    /// Random sphere complex with `n >= 2` vertices: repeated stellar
    /// subdivision of a tetrahedron (or a bigon for `n < 4`), with some edges
    /// doubled. Intersection angles uniform in `phi_range`.
    pub fn random_sphere<T: Real>(n: usize, seed: u64, phi_range: (f64, f64)) -> SurfaceComplex<T> {
        assert!(n >= 2);
        let mut rng = CounterRng::new(seed);
        let draw = |rng: &mut CounterRng| T::lit(rng.uniform(phi_range.0, phi_range.1));
        let mut c = if n >= 4 { tetrahedron(T::one()) } else { bigon(T::one()) };
        let phi: Vec<T> = (0..c.n_edges()).map(|_| draw(&mut rng)).collect();
        c = c.with_phi(phi).expect("same edge count");
        while c.n_vertices() < n {
            let f = rng.below(c.n_faces());
            let spokes: Vec<T> = (0..c.faces()[f].len()).map(|_| draw(&mut rng)).collect();
            c = stellar_subdivide(&c, f, &spokes);
        }
        let doublings = rng.below(3);
        for _ in 0..doublings {
            let e = rng.below(c.n_edges());
            c = double_edge(&c, e);
            let last = c.n_edges() - 1;
            let mut phi = c.phi().to_vec();
            phi[last] = draw(&mut rng);
            c = c.with_phi(phi).expect("same edge count");
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn counter_rng_is_reproducible() {
        let a: Vec<u64> = {
            let mut r = CounterRng::new(42);
            (0..5).map(|_| r.next_u64()).collect()
        };
        let mut r = CounterRng::new(42);
        let b: Vec<u64> = (0..5).map(|_| r.next_u64()).collect();
        assert_eq!(a, b);
        assert_ne!(CounterRng::new(43).next_u64(), a[0]);
        // SplitMix64 reference output for seed 0 (first draw)
        assert_eq!(CounterRng::new(0).next_u64(), 0xE220_A839_7B1D_CDAF);
        let u = CounterRng::new(7).unit();
        assert!((0.0..1.0).contains(&u));
    }

    #[test]
    fn fd_of_linear_function_is_exact() {
        let c = [1.5, -2.0, 0.25];
        let g = fd_gradient(|x: &[f64]| x.iter().zip(&c).map(|(a, b)| a * b).sum(), &[0.3, 0.1, -4.0], 1e-3);
        for (a, b) in g.iter().zip(&c) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fd_hessian_of_quadratic() {
        let h = fd_hessian(|x: &[f64]| x[0] * x[0] + 3.0 * x[0] * x[1] - x[1] * x[1], &[0.2, 0.7], 1e-3);
        assert!((h[(0, 0)] - 2.0).abs() < 1e-8);
        assert!((h[(0, 1)] - 3.0).abs() < 1e-8);
        assert!((h[(1, 1)] + 2.0).abs() < 1e-8);
    }

    #[test]
    fn synthetic_is_deterministic() {
        let tet = fixtures::tetrahedron(FRAC_PI_2);
        let a = make_synthetic(&tet, 9, (-1.5, 1.5)).unwrap();
        let b = make_synthetic(&tet, 9, (-1.5, 1.5)).unwrap();
        assert_eq!(a.k_bar, b.k_bar);
        assert_eq!(a.lhat, b.lhat);
        assert!(a.k_bar.iter().all(|k| (-1.5..1.5).contains(k)));
    }

    #[test]
    fn planted_zero_on_tetrahedron() {
        let tet = fixtures::tetrahedron(FRAC_PI_2);
        let inst = planted(&tet, vec![0.0; 4], 0).unwrap();
        for v in 0..4 {
            assert!((inst.lhat[v] - 4.053_065_153_136_239_778).abs() < 1e-13);
        }
    }

    #[test]
    fn random_spheres_are_valid() {
        for seed in 0..50 {
            let n = 2 + (seed as usize % 11);
            let c = fixtures::random_sphere::<f64>(n, seed, (0.1, FRAC_PI_2));
            let r = c.validate();
            assert!(r.is_valid(), "seed {seed}: {:?}", r.violations);
            assert_eq!(r.euler_characteristic, 2);
            assert_eq!(c.n_vertices(), n);
        }
    }

    #[test]
    fn fixture_shapes() {
        let cube = fixtures::cube(1.0f64);
        assert_eq!((cube.n_vertices(), cube.n_edges(), cube.n_faces()), (8, 12, 6));
        let oct = fixtures::octahedron(1.0f64);
        assert_eq!((oct.n_vertices(), oct.n_edges(), oct.n_faces()), (6, 12, 8));
        let torus = fixtures::torus_quadrangulation(3, 4, 1.0f64);
        assert_eq!((torus.n_vertices(), torus.n_edges(), torus.n_faces()), (12, 24, 12));
    }
}
