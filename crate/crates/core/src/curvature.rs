//! Global quantities over a complex: total geodesic curvatures `L(K)`, cone
//! angles, the Jacobian `J = dL/dK`, Calabi energies and the convex
//! potential whose gradient is `L - L_hat`.

use crate::complex::{Prescription, SurfaceComplex};
use crate::error::{Error, Result};
use crate::geometry::{edge_geometry, k_to_r, RadiusTrig};
use crate::linalg::DenseMatrix;
use crate::scalar::{norm2, Real};

/// Everything derived from one coordinate vector `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureState<T> {
    pub k: Vec<T>,
    pub r: Vec<T>,
    /// Per edge: `[theta at edge end 0, theta at edge end 1]`.
    pub theta: Vec<[T; 2]>,
    pub l: Vec<T>,
    pub alpha_v: Vec<T>,
    pub alpha_f: Vec<T>,
    /// `J[(i, j)] = dL_i / dK_j`
    pub jacobian: DenseMatrix<T>,
}

/// Evaluates curvature quantities on a fixed, validated complex.
///
/// Validation and the per-edge `sin/cos phi` are done once at construction,
/// so repeated evaluation inside flows only pays for the trigonometry.
#[derive(Debug, Clone)]
pub struct Evaluator<'a, T> {
    complex: &'a SurfaceComplex<T>,
    sin_phi: Vec<T>,
    cos_phi: Vec<T>,
    alpha_f: Vec<T>,
}

impl<'a, T: Real> Evaluator<'a, T> {
    pub fn new(complex: &'a SurfaceComplex<T>) -> Result<Self> {
        complex.ensure_valid()?;
        let (sin_phi, cos_phi) = complex.phi().iter().map(|p| p.sin_cos()).unzip();
        Ok(Self {
            complex,
            sin_phi,
            cos_phi,
            alpha_f: face_cone_angles(complex),
        })
    }

    pub fn complex(&self) -> &'a SurfaceComplex<T> {
        self.complex
    }

    pub fn n(&self) -> usize {
        self.complex.n_vertices()
    }

    fn check_k(&self, k: &[T]) -> Result<Vec<RadiusTrig<T>>> {
        if k.len() != self.n() {
            return Err(Error::Input(format!(
                "K has {} entries for {} vertices",
                k.len(),
                self.n()
            )));
        }
        if let Some(x) = k.iter().find(|x| !x.is_finite()) {
            return Err(Error::Domain {
                what: "K",
                value: x.as_f64(),
                range: "finite reals",
            });
        }
        Ok(k.iter().map(|&x| RadiusTrig::from_k(x)).collect())
    }

    /// `L(K)` only.
    pub fn curvatures(&self, k: &[T]) -> Result<Vec<T>> {
        let trig = self.check_k(k)?;
        let mut l = vec![T::zero(); self.n()];
        for (e, &[v, w]) in self.complex.edges().iter().enumerate() {
            let g = edge_geometry(&trig[v], &trig[w], self.sin_phi[e], self.cos_phi[e]);
            l[v] = l[v] + g.l_v;
            l[w] = l[w] + g.l_w;
        }
        Ok(l)
    }

    /// `L(K)` and `J(K)`; the hot path of every flow.
    pub fn curvatures_and_jacobian(&self, k: &[T]) -> Result<(Vec<T>, DenseMatrix<T>)> {
        let trig = self.check_k(k)?;
        let n = self.n();
        let mut l = vec![T::zero(); n];
        let mut jac = DenseMatrix::zeros(n);
        for (e, &[v, w]) in self.complex.edges().iter().enumerate() {
            let g = edge_geometry(&trig[v], &trig[w], self.sin_phi[e], self.cos_phi[e]);
            l[v] = l[v] + g.l_v;
            l[w] = l[w] + g.l_w;
            jac[(v, v)] = jac[(v, v)] + g.d_self_v();
            jac[(w, w)] = jac[(w, w)] + g.d_self_w();
            jac[(v, w)] = jac[(v, w)] + g.d_cross;
            jac[(w, v)] = jac[(w, v)] + g.d_cross;
        }
        Ok((l, jac))
    }

    pub fn state(&self, k: &[T]) -> Result<CurvatureState<T>> {
        let trig = self.check_k(k)?;
        let n = self.n();
        let mut l = vec![T::zero(); n];
        let mut alpha_v = vec![T::zero(); n];
        let mut jac = DenseMatrix::zeros(n);
        let mut theta = Vec::with_capacity(self.complex.n_edges());
        for (e, &[v, w]) in self.complex.edges().iter().enumerate() {
            let g = edge_geometry(&trig[v], &trig[w], self.sin_phi[e], self.cos_phi[e]);
            theta.push([g.theta_v, g.theta_w]);
            alpha_v[v] = alpha_v[v] + g.theta_v;
            alpha_v[w] = alpha_v[w] + g.theta_w;
            l[v] = l[v] + g.l_v;
            l[w] = l[w] + g.l_w;
            jac[(v, v)] = jac[(v, v)] + g.d_self_v();
            jac[(w, w)] = jac[(w, w)] + g.d_self_w();
            jac[(v, w)] = jac[(v, w)] + g.d_cross;
            jac[(w, v)] = jac[(w, v)] + g.d_cross;
        }
        let r = k.iter().map(|&x| k_to_r(x)).collect::<Result<_>>()?;
        Ok(CurvatureState {
            k: k.to_vec(),
            r,
            theta,
            l,
            alpha_v,
            alpha_f: self.alpha_f.clone(),
            jacobian: jac,
        })
    }
}

/// One-shot evaluation; validates the complex on every call.
pub fn evaluate<T: Real>(complex: &SurfaceComplex<T>, k: &[T]) -> Result<CurvatureState<T>> {
    Evaluator::new(complex)?.state(k)
}

/// Cone angle at each face centre: `sum over the boundary walk of (pi - phi)`.
pub fn face_cone_angles<T: Real>(complex: &SurfaceComplex<T>) -> Vec<T> {
    complex
        .faces()
        .iter()
        .map(|walk| {
            walk.iter()
                .fold(T::zero(), |s, &e| s + T::PI() - complex.phi()[e])
        })
        .collect()
}

/// `||L||^2 / 2`
pub fn calabi_energy<T: Real>(l: &[T]) -> T {
    T::lit(0.5) * l.iter().fold(T::zero(), |s, x| s + *x * *x)
}

/// `||L - L_hat||^2 / 2`
pub fn prescribed_calabi_energy<T: Real>(l: &[T], lhat: &[T]) -> Result<T> {
    if l.len() != lhat.len() {
        return Err(Error::Input(format!(
            "curvature vector has {} entries, prescription {}",
            l.len(),
            lhat.len()
        )));
    }
    Ok(T::lit(0.5)
        * l.iter()
            .zip(lhat)
            .fold(T::zero(), |s, (a, b)| s + (*a - *b) * (*a - *b)))
}

/// Upper bound on `||dK/dt||_2` along the Calabi flow:
/// `4 sqrt(|V|) max_v{d_v pi + sum_{e at v} 1/sin phi(e)} max_v{2 d_v pi + L_hat_v}`.
pub fn velocity_bound<T: Real>(complex: &SurfaceComplex<T>, lhat: &Prescription<T>) -> Result<T> {
    complex.ensure_valid()?;
    lhat.check_dim(complex)?;
    let pi = T::PI();
    let mut geometric = T::zero();
    let mut curvature = T::zero();
    for v in 0..complex.n_vertices() {
        let edges = complex.incident_edges(v);
        let d = T::from_count(edges.len());
        let inv_sin = edges
            .iter()
            .fold(T::zero(), |s, &e| s + complex.phi()[e].sin().recip());
        geometric = geometric.max(d * pi + inv_sin);
        curvature = curvature.max(T::lit(2.0) * d * pi + lhat[v]);
    }
    Ok(T::lit(4.0) * T::from_count(complex.n_vertices()).sqrt() * geometric * curvature)
}

/// Adaptive quadrature settings for [`potential_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    pub abs_tol: f64,
    pub max_depth: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            max_depth: 20,
        }
    }
}

/// `E(K) = integral from base to K of sum_i (L_i - L_hat_i) dK_i` along the
/// straight segment. The 1-form is closed, so any path gives the same value.
pub fn potential<T: Real>(
    complex: &SurfaceComplex<T>,
    lhat: &Prescription<T>,
    k: &[T],
    base: &[T],
) -> Result<T> {
    potential_with(complex, lhat, k, base, QuadratureOptions::default())
}

pub fn potential_with<T: Real>(
    complex: &SurfaceComplex<T>,
    lhat: &Prescription<T>,
    k: &[T],
    base: &[T],
    opts: QuadratureOptions,
) -> Result<T> {
    let eval = Evaluator::new(complex)?;
    lhat.check_dim(complex)?;
    if base.len() != k.len() {
        return Err(Error::Input("K and base point differ in length".into()));
    }
    let dir: Vec<T> = k.iter().zip(base).map(|(a, b)| *a - *b).collect();
    if norm2(&dir) == T::zero() {
        return Ok(T::zero());
    }
    let integrand = |s: T| -> Result<T> {
        let point: Vec<T> = base.iter().zip(&dir).map(|(b, d)| *b + s * *d).collect();
        let l = eval.curvatures(&point)?;
        Ok(l.iter()
            .zip(lhat.values())
            .zip(&dir)
            .fold(T::zero(), |acc, ((li, hi), di)| acc + (*li - *hi) * *di))
    };
    // tolerances below the scalar's resolution can never be met
    let tol = T::lit(opts.abs_tol).max(T::lit(1e3) * T::epsilon());
    adaptive_gauss_legendre(integrand, T::zero(), T::one(), tol, opts.max_depth)
}

// 10-point Gauss-Legendre on [-1, 1]
const GL_NODES: [f64; 5] = [
    0.148_874_338_981_631_210_9,
    0.433_395_394_129_247_190_8,
    0.679_409_568_299_024_406_2,
    0.865_063_366_688_984_510_7,
    0.973_906_528_517_171_720_1,
];
const GL_WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_870_2,
    0.269_266_719_309_996_355_1,
    0.219_086_362_515_982_043_9,
    0.149_451_349_150_580_593_1,
    0.066_671_344_308_688_137_6,
];

fn gauss_legendre<T: Real>(f: &impl Fn(T) -> Result<T>, a: T, b: T) -> Result<T> {
    let half = T::lit(0.5) * (b - a);
    let mid = T::lit(0.5) * (a + b);
    let mut sum = T::zero();
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
        let dx = half * T::lit(*x);
        sum = sum + T::lit(w) * (f(mid - dx)? + f(mid + dx)?);
    }
    Ok(sum * half)
}

/// Bisects until each panel's one-level refinement changes it by less than
/// its share of `tol`. Fails with the achieved estimate if a panel still
/// disagrees at `max_depth`.
pub(crate) fn adaptive_gauss_legendre<T: Real>(
    f: impl Fn(T) -> Result<T>,
    a: T,
    b: T,
    tol: T,
    max_depth: usize,
) -> Result<T> {
    let mut total = T::zero();
    let mut worst_excess = T::zero();
    let whole = gauss_legendre(&f, a, b)?;
    let mut stack = vec![(a, b, whole, tol, 0usize)];
    while let Some((lo, hi, coarse, panel_tol, depth)) = stack.pop() {
        let mid = T::lit(0.5) * (lo + hi);
        let left = gauss_legendre(&f, lo, mid)?;
        let right = gauss_legendre(&f, mid, hi)?;
        let fine = left + right;
        let diff = (fine - coarse).abs();
        if diff <= panel_tol {
            total = total + fine;
        } else if depth >= max_depth {
            total = total + fine;
            worst_excess = worst_excess.max(diff);
        } else {
            let half_tol = T::lit(0.5) * panel_tol;
            stack.push((mid, hi, right, half_tol, depth + 1));
            stack.push((lo, mid, left, half_tol, depth + 1));
        }
    }
    if worst_excess > T::zero() {
        return Err(Error::Numerical {
            message: format!(
                "quadrature did not reach tolerance {tol} within {max_depth} bisections \
                 (panel error {worst_excess})"
            ),
            estimate: Some(total.as_f64()),
        });
    }
    Ok(total)
}
