#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

use spherical_calabi::oracle::{fixtures, make_synthetic, CounterRng, SyntheticInstance};
use spherical_calabi::{Prescription, SurfaceComplex};

pub const PHI_RANGE: (f64, f64) = (0.3, FRAC_PI_2);

pub fn with_random_phi(c: SurfaceComplex<f64>, rng: &mut CounterRng) -> SurfaceComplex<f64> {
    let phi = (0..c.n_edges())
        .map(|_| rng.uniform(PHI_RANGE.0, PHI_RANGE.1))
        .collect();
    c.with_phi(phi).unwrap()
}

/// The four planted families, cycled: tetrahedron, cube, bigon, 3x3 torus.
pub fn planted_suite(count: usize) -> Vec<(&'static str, SyntheticInstance<f64>)> {
    (0..count)
        .map(|i| {
            let seed = 1000 + i as u64;
            let mut rng = CounterRng::new(seed ^ 0x5eed);
            let (name, base) = match i % 4 {
                0 => ("tetrahedron", fixtures::tetrahedron(1.0)),
                1 => ("cube", fixtures::cube(1.0)),
                2 => ("bigon", fixtures::bigon(1.0)),
                _ => ("torus", fixtures::torus_quadrangulation(3, 3, 1.0)),
            };
            let complex = with_random_phi(base, &mut rng);
            (name, make_synthetic(&complex, seed, (-1.5, 1.5)).unwrap())
        })
        .collect()
}

/// Random sphere complex with `2..=max_n` vertices.
pub fn random_complex(seed: u64, max_n: usize) -> SurfaceComplex<f64> {
    let mut rng = CounterRng::new(seed);
    let n = 2 + rng.below(max_n - 1);
    fixtures::random_sphere(n, seed, (0.1, FRAC_PI_2))
}

/// `L_hat_v = u_v * sum of phi over edges at v`, `u_v` uniform in `range`.
/// With `u = 1` everywhere the whole vertex set sits exactly at the
/// feasibility boundary.
pub fn random_prescription(c: &SurfaceComplex<f64>, seed: u64, range: (f64, f64)) -> Prescription<f64> {
    let mut rng = CounterRng::new(seed);
    let values = (0..c.n_vertices())
        .map(|v| {
            let s: f64 = c.incident_edges(v).iter().map(|&e| c.phi()[e]).sum();
            rng.uniform(range.0, range.1) * s
        })
        .collect();
    Prescription::new(values).unwrap()
}

/// Sum of phi over the edges at `v`, counting parallel edges separately.
pub fn star_phi(c: &SurfaceComplex<f64>, v: usize) -> f64 {
    c.incident_edges(v).iter().map(|&e| c.phi()[e]).sum()
}
