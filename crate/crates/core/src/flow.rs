//! Curvature flows toward prescribed total geodesic curvatures.
//!
//! * Calabi flow: `dK/dt = -J^T (L - L_hat)`, the negative gradient flow of
//!   the Calabi energy `||L - L_hat||^2 / 2`.
//! * Curvature flow: `dr/dt = (L - L_hat) sin(2r) / 2`, integrated in `K`
//!   where it reads `dK/dt = -(L - L_hat)`.
//! * Newton: damped Newton iteration on the convex potential, whose Hessian
//!   is `J^T`.
//!
//! All three converge to the same `K` exactly when the prescription is
//! feasible; otherwise `K` escapes to infinity.

use std::fmt;

use crate::complex::{Prescription, SurfaceComplex};
use crate::curvature::{prescribed_calabi_energy, Evaluator};
use crate::error::{Error, Result};
use crate::feasibility::{check_bruteforce, check_mincut, FeasibilityVerdict};
use crate::geometry::{k_to_r, RADIUS_FLOOR};
use crate::linalg::DenseMatrix;
use crate::ode::{error_norm, next_step_factor, rk4_step, rkf45_step};
use crate::scalar::{norm2, norm_inf, sub, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowMethod {
    Calabi,
    Curvature,
    Newton,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    Rk4,
    Rkf45,
}

impl fmt::Display for FlowMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FlowMethod::Calabi => "calabi",
            FlowMethod::Curvature => "curvature",
            FlowMethod::Newton => "newton",
        })
    }
}

impl fmt::Display for Integrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Integrator::Rk4 => "rk4",
            Integrator::Rkf45 => "rkf45",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig<T> {
    pub method: FlowMethod,
    pub integrator: Integrator,
    /// Initial (adaptive) or fixed (rk4) step in flow time.
    pub step: T,
    /// Converged once `||L - L_hat||_inf` drops below this.
    pub tol_curvature: T,
    /// Local error tolerance of the adaptive integrator.
    pub tol_ode: T,
    /// Flow-time budget.
    pub max_time: T,
    /// Accepted-step (or Newton iteration) budget.
    pub max_iters: usize,
    /// Diverged once `||K||_inf` exceeds this.
    pub divergence_k: T,
    /// Record the smallest eigenvalue of `J` at every sample.
    pub probe_eigen: bool,
}

impl<T: Real> Default for FlowConfig<T> {
    fn default() -> Self {
        Self {
            method: FlowMethod::Calabi,
            integrator: Integrator::Rkf45,
            step: T::lit(1e-2),
            tol_curvature: T::lit(1e-10),
            tol_ode: T::lit(1e-9),
            max_time: T::lit(1e4),
            max_iters: 1_000_000,
            divergence_k: T::lit(50.0),
            probe_eigen: true,
        }
    }
}

impl<T: Real> FlowConfig<T> {
    /// Local error tolerance actually used by rkf45: `tol_ode`, capped at
    /// `tol_curvature / 100`. Near the fixed point the step size sits at the
    /// stability limit and the residual hovers at the local tolerance, so a
    /// looser value would never reach `tol_curvature`.
    pub fn effective_tol_ode(&self) -> T {
        self.tol_ode.min(self.tol_curvature * T::lit(0.01))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("step", self.step),
            ("tol_curvature", self.tol_curvature),
            ("tol_ode", self.tol_ode),
            ("max_time", self.max_time),
            ("divergence_k", self.divergence_k),
        ];
        for (name, x) in positive {
            if !(x > T::zero()) {
                return Err(Error::Input(format!("{name} must be positive, got {x}")));
            }
        }
        if !self.step.is_finite() || !self.tol_curvature.is_finite() || !self.tol_ode.is_finite() {
            return Err(Error::Input("step and tolerances must be finite".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Input("max_iters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Converged,
    Diverged,
    BudgetExhausted,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Converged => "converged",
            Verdict::Diverged => "diverged",
            Verdict::BudgetExhausted => "budget-exhausted",
        })
    }
}

/// Evidence behind a [`Verdict::Diverged`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Divergence {
    /// `||K||_inf` crossed `divergence_k`.
    Threshold,
    /// The budget ran out while `||K||_inf` was still growing and the
    /// prescription is certified infeasible. Under the Calabi flow `J`
    /// flattens along the escape direction and `||K||_inf` grows only like
    /// `ln t / 2`, so the threshold is out of reach of any finite budget.
    Escape,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Divergence::Threshold => "threshold",
            Divergence::Escape => "escape",
        })
    }
}

/// State recorded at `t = 0` and after every accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSample<T> {
    /// Flow time; the iteration index for Newton.
    pub t: T,
    pub k: Vec<T>,
    /// `||L - L_hat||_inf`
    pub residual: T,
    /// `||L - L_hat||^2 / 2`
    pub energy: T,
    /// `||dK/dt||_2` (Newton: length of the next step).
    pub speed: T,
    pub min_eigenvalue: Option<T>,
}

/// Least-squares fit of `ln(energy)` against `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit<T> {
    pub slope: T,
    pub intercept: T,
    pub r_squared: T,
    pub window: usize,
    /// No decay visible: non-negative slope or flat energy.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrace<T> {
    pub method: FlowMethod,
    pub samples: Vec<FlowSample<T>>,
    pub verdict: Verdict,
    /// Present iff converged with enough samples for a fit.
    pub fitted_rate: Option<DecayFit<T>>,
    /// Attached to divergent runs: the violated feasibility condition.
    pub certificate: Option<FeasibilityVerdict<T>>,
    /// How divergence was detected.
    pub divergence: Option<Divergence>,
    /// Some radius left `[RADIUS_FLOOR, pi/2 - RADIUS_FLOOR]`.
    pub saturated: bool,
    pub rejected_steps: usize,
}

impl<T: Real> FlowTrace<T> {
    fn new(method: FlowMethod) -> Self {
        Self {
            method,
            samples: Vec::new(),
            verdict: Verdict::BudgetExhausted,
            fitted_rate: None,
            certificate: None,
            divergence: None,
            saturated: false,
            rejected_steps: 0,
        }
    }

    pub fn last(&self) -> Option<&FlowSample<T>> {
        self.samples.last()
    }

    /// Final coordinates.
    pub fn final_k(&self) -> Option<&[T]> {
        self.samples.last().map(|s| s.k.as_slice())
    }
}

/// A run that stopped on an error, with everything integrated up to it.
#[derive(Debug, Clone)]
pub struct FlowFailure<T> {
    pub error: Error,
    pub partial: FlowTrace<T>,
}

impl<T> fmt::Display for FlowFailure<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.error.fmt(f)
    }
}

impl<T: fmt::Debug> std::error::Error for FlowFailure<T> {}

/// `dK/dt = -J^T (L(K) - L_hat)`.
pub fn calabi_rhs<T: Real>(
    complex: &SurfaceComplex<T>,
    lhat: &Prescription<T>,
    k: &[T],
) -> Result<Vec<T>> {
    lhat.check_dim(complex)?;
    let (l, jac) = Evaluator::new(complex)?.curvatures_and_jacobian(k)?;
    Ok(calabi_velocity(&l, lhat.values(), &jac))
}

fn calabi_velocity<T: Real>(l: &[T], lhat: &[T], jac: &DenseMatrix<T>) -> Vec<T> {
    jac.tr_mul_vec(&sub(l, lhat)).into_iter().map(|x| -x).collect()
}

/// `dr_v/dt = (L_v - L_hat_v) sin(2 r_v) / 2`.
pub fn curvature_rhs<T: Real>(
    complex: &SurfaceComplex<T>,
    lhat: &Prescription<T>,
    r: &[T],
) -> Result<Vec<T>> {
    lhat.check_dim(complex)?;
    let k = r
        .iter()
        .map(|&x| crate::geometry::r_to_k(x))
        .collect::<Result<Vec<_>>>()?;
    let l = Evaluator::new(complex)?.curvatures(&k)?;
    let half = T::lit(0.5);
    Ok(r.iter()
        .zip(l.iter().zip(lhat.values()))
        .map(|(ri, (li, hi))| (*li - *hi) * half * (T::lit(2.0) * *ri).sin())
        .collect())
}

/// Velocity field plus the per-sample diagnostics.
struct Dynamics<'a, T> {
    eval: Evaluator<'a, T>,
    lhat: &'a [T],
    method: FlowMethod,
}

struct Point<T> {
    l: Vec<T>,
    jac: Option<DenseMatrix<T>>,
    velocity: Vec<T>,
}

impl<'a, T: Real> Dynamics<'a, T> {
    fn velocity(&self, k: &[T]) -> Result<Vec<T>> {
        match self.method {
            FlowMethod::Calabi => {
                let (l, jac) = self.eval.curvatures_and_jacobian(k)?;
                Ok(calabi_velocity(&l, self.lhat, &jac))
            }
            _ => {
                let l = self.eval.curvatures(k)?;
                Ok(l.iter().zip(self.lhat).map(|(a, b)| *b - *a).collect())
            }
        }
    }

    fn point(&self, k: &[T], want_jac: bool) -> Result<Point<T>> {
        if self.method == FlowMethod::Calabi || want_jac {
            let (l, jac) = self.eval.curvatures_and_jacobian(k)?;
            let velocity = match self.method {
                FlowMethod::Calabi => calabi_velocity(&l, self.lhat, &jac),
                _ => l.iter().zip(self.lhat).map(|(a, b)| *b - *a).collect(),
            };
            Ok(Point {
                l,
                jac: Some(jac),
                velocity,
            })
        } else {
            let l = self.eval.curvatures(k)?;
            let velocity = l.iter().zip(self.lhat).map(|(a, b)| *b - *a).collect();
            Ok(Point {
                l,
                jac: None,
                velocity,
            })
        }
    }

    fn sample(&self, t: T, k: &[T], p: &Point<T>, probe: bool) -> Result<FlowSample<T>> {
        let diff = sub(&p.l, self.lhat);
        Ok(FlowSample {
            t,
            k: k.to_vec(),
            residual: norm_inf(&diff),
            energy: prescribed_calabi_energy(&p.l, self.lhat)?,
            speed: norm2(&p.velocity),
            min_eigenvalue: if probe {
                p.jac.as_ref().map(|j| j.min_symmetric_eigenvalue())
            } else {
                None
            },
        })
    }
}

fn is_saturated<T: Real>(k: &[T]) -> bool {
    let floor = T::lit(RADIUS_FLOOR);
    k.iter().any(|&x| match k_to_r(x) {
        Ok(r) => r < floor || r > T::FRAC_PI_2() - floor,
        Err(_) => true,
    })
}

/// Integrates (or iterates) from `k0` until convergence, divergence or the
/// budget runs out.
pub fn run<T: Real>(
    complex: &SurfaceComplex<T>,
    lhat: &Prescription<T>,
    k0: &[T],
    config: &FlowConfig<T>,
) -> std::result::Result<FlowTrace<T>, FlowFailure<T>> {
    let mut trace = FlowTrace::new(config.method);
    let fail = |error: Error, partial: FlowTrace<T>| FlowFailure { error, partial };
    if let Err(e) = config
        .validate()
        .and_then(|_| lhat.check_dim(complex))
        .and_then(|_| complex.ensure_valid())
    {
        return Err(fail(e, trace));
    }
    let outcome = match config.method {
        FlowMethod::Newton => newton_loop(complex, lhat, k0, config, &mut trace),
        _ => integrate(complex, lhat, k0, config, &mut trace),
    };
    match outcome {
        Ok(verdict) => {
            trace.verdict = verdict;
            finish(complex, lhat, &mut trace);
            Ok(trace)
        }
        Err(e) => {
            trace.saturated = trace.samples.iter().any(|s| is_saturated(&s.k));
            Err(fail(e, trace))
        }
    }
}

fn finish<T: Real>(complex: &SurfaceComplex<T>, lhat: &Prescription<T>, trace: &mut FlowTrace<T>) {
    trace.saturated = trace.samples.iter().any(|s| is_saturated(&s.k));
    match trace.verdict {
        Verdict::Converged => {
            let window = decay_window(trace.samples.len());
            trace.fitted_rate = fit_decay_rate(trace, window).ok();
        }
        Verdict::Diverged => {
            trace.divergence = Some(Divergence::Threshold);
            trace.certificate = certify(complex, lhat).ok();
        }
        Verdict::BudgetExhausted => {
            if !escaping(&trace.samples) {
                return;
            }
            if let Ok(cert) = certify(complex, lhat) {
                if !cert.feasible {
                    trace.verdict = Verdict::Diverged;
                    trace.divergence = Some(Divergence::Escape);
                    trace.certificate = Some(cert);
                }
            }
        }
    }
}

/// `||K||_inf` increases across the trailing window and over its last step.
fn escaping<T: Real>(samples: &[FlowSample<T>]) -> bool {
    let n = samples.len();
    if n < 10 {
        return false;
    }
    let start = n - decay_window(n).min(n);
    let size = |i: usize| norm_inf(&samples[i].k);
    size(n - 1) > size(start) && size(n - 1) >= size(n - 2)
}

/// Trailing 30% of the samples, at least ten.
pub fn decay_window(samples: usize) -> usize {
    ((samples as f64 * 0.3).ceil() as usize).max(10)
}

/// Feasibility verdict by enumeration for small complexes, min-cut beyond.
pub fn certify<T: Real>(
    complex: &SurfaceComplex<T>,
    lhat: &Prescription<T>,
) -> Result<FeasibilityVerdict<T>> {
    if complex.n_vertices() <= 16 {
        check_bruteforce(complex, lhat)
    } else {
        check_mincut(complex, lhat)
    }
}

fn integrate<T: Real>(
    complex: &SurfaceComplex<T>,
    lhat: &Prescription<T>,
    k0: &[T],
    config: &FlowConfig<T>,
    trace: &mut FlowTrace<T>,
) -> Result<Verdict> {
    let dynamics = Dynamics {
        eval: Evaluator::new(complex)?,
        lhat: lhat.values(),
        method: config.method,
    };
    let mut field = |k: &[T]| dynamics.velocity(k);
    let probe = config.probe_eigen;

    let mut t = T::zero();
    let mut k = k0.to_vec();
    let mut point = dynamics.point(&k, probe)?;
    trace.samples.push(dynamics.sample(t, &k, &point, probe)?);
    let mut h = config.step;
    let mut steps = 0usize;
    let tol_local = config.effective_tol_ode();

    loop {
        let last = trace.samples.last().expect("initial sample");
        if last.residual < config.tol_curvature {
            return Ok(Verdict::Converged);
        }
        if norm_inf(&k) > config.divergence_k {
            return Ok(Verdict::Diverged);
        }
        if steps >= config.max_iters || t >= config.max_time {
            return Ok(Verdict::BudgetExhausted);
        }

        let remaining = config.max_time - t;
        let next = match config.integrator {
            Integrator::Rk4 => {
                let step = h.min(remaining);
                let y = rk4_step(&mut field, &k, &point.velocity, step)?;
                (y, step)
            }
            Integrator::Rkf45 => loop {
                let step = h.min(remaining);
                let floor = T::epsilon() * T::lit(16.0) * t.abs().max(T::one());
                if step < floor {
                    return Err(Error::Numerical {
                        message: format!("step size underflow at t = {t} (h = {step})"),
                        estimate: Some(t.as_f64()),
                    });
                }
                let attempt = rkf45_step(&mut field, &k, &point.velocity, step)?;
                let err = error_norm(&attempt.error, &k, &attempt.y, tol_local);
                let factor = if err.is_finite() {
                    next_step_factor(err)
                } else {
                    T::lit(0.2)
                };
                if err <= T::one() {
                    h = step * factor;
                    break (attempt.y, step);
                }
                trace.rejected_steps += 1;
                h = step * factor;
            },
        };
        let (y, step) = next;
        t = if step == remaining { config.max_time } else { t + step };
        k = y;
        steps += 1;
        point = dynamics.point(&k, probe)?;
        trace.samples.push(dynamics.sample(t, &k, &point, probe)?);
    }
}

fn newton_loop<T: Real>(
    complex: &SurfaceComplex<T>,
    lhat: &Prescription<T>,
    k0: &[T],
    config: &FlowConfig<T>,
    trace: &mut FlowTrace<T>,
) -> Result<Verdict> {
    let eval = Evaluator::new(complex)?;
    let mut newton = Newton::new(&eval, lhat.values(), k0)?;
    loop {
        let (step, min_eig) = newton.direction(config.probe_eigen)?;
        trace.samples.push(FlowSample {
            t: T::from_count(newton.iterations),
            k: newton.k.clone(),
            residual: norm_inf(&newton.diff),
            energy: newton.energy(),
            speed: norm2(&step),
            min_eigenvalue: min_eig,
        });
        if norm_inf(&newton.diff) < config.tol_curvature {
            return Ok(Verdict::Converged);
        }
        if norm_inf(&newton.k) > config.divergence_k {
            return Ok(Verdict::Diverged);
        }
        if newton.iterations >= config.max_iters {
            return Ok(Verdict::BudgetExhausted);
        }
        newton.advance(&step)?;
    }
}

/// Damped Newton state.
struct Newton<'a, 'b, T> {
    eval: &'b Evaluator<'a, T>,
    lhat: &'b [T],
    k: Vec<T>,
    diff: Vec<T>,
    jac: DenseMatrix<T>,
    iterations: usize,
}

impl<'a, 'b, T: Real> Newton<'a, 'b, T> {
    fn new(eval: &'b Evaluator<'a, T>, lhat: &'b [T], k0: &[T]) -> Result<Self> {
        let (l, jac) = eval.curvatures_and_jacobian(k0)?;
        Ok(Self {
            eval,
            lhat,
            k: k0.to_vec(),
            diff: sub(&l, lhat),
            jac,
            iterations: 0,
        })
    }

    fn energy(&self) -> T {
        T::lit(0.5) * crate::scalar::dot(&self.diff, &self.diff)
    }

    /// Full Newton step `J^{-T} (L - L_hat)`, to be subtracted.
    fn direction(&self, probe: bool) -> Result<(Vec<T>, Option<T>)> {
        let step = self.jac.transpose().cholesky_solve(&self.diff)?;
        let eig = probe.then(|| self.jac.min_symmetric_eigenvalue());
        Ok((step, eig))
    }

    /// Backtracks `s = 1, 1/2, 1/4, ...` until `||L - L_hat||_2` decreases.
    /// Trials longer than [`NEWTON_MAX_STEP`] in `K` are skipped.
    fn advance(&mut self, step: &[T]) -> Result<()> {
        let merit = norm2(&self.diff);
        let mut s = T::one();
        let len = norm_inf(step);
        if !len.is_finite() {
            return Err(Error::Numerical {
                message: format!("non-finite Newton step at iteration {}", self.iterations),
                estimate: Some(merit.as_f64()),
            });
        }
        while s * len > T::lit(NEWTON_MAX_STEP) {
            s = s * T::lit(0.5);
        }
        for _ in 0..60 {
            let trial: Vec<T> = self.k.iter().zip(step).map(|(k, d)| *k - s * *d).collect();
            if let Ok((l, jac)) = self.eval.curvatures_and_jacobian(&trial) {
                let diff = sub(&l, self.lhat);
                if norm2(&diff) < merit {
                    self.k = trial;
                    self.diff = diff;
                    self.jac = jac;
                    self.iterations += 1;
                    return Ok(());
                }
            }
            s = s * T::lit(0.5);
        }
        Err(Error::Numerical {
            message: format!(
                "line search failed at iteration {} (residual {merit})",
                self.iterations
            ),
            estimate: Some(merit.as_f64()),
        })
    }
}

/// Outcome of [`newton_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport<T> {
    pub k: Vec<T>,
    pub iterations: usize,
    /// `||L - L_hat||_inf` before each iteration and at the end.
    pub residuals: Vec<T>,
}

pub const NEWTON_MAX_ITERS: usize = 200;

/// Longest Newton trial step, in `K`.
pub const NEWTON_MAX_STEP: f64 = 2.0;

/// Damped Newton on the potential: `K <- K - s J^{-T} (L - L_hat)` until
/// `||L - L_hat||_inf <= tol`.
pub fn newton_solve<T: Real>(
    complex: &SurfaceComplex<T>,
    lhat: &Prescription<T>,
    k0: &[T],
    tol: T,
) -> Result<NewtonReport<T>> {
    lhat.check_dim(complex)?;
    let eval = Evaluator::new(complex)?;
    let mut newton = Newton::new(&eval, lhat.values(), k0)?;
    let mut residuals = vec![norm_inf(&newton.diff)];
    while norm_inf(&newton.diff) > tol {
        if newton.iterations >= NEWTON_MAX_ITERS {
            return Err(Error::NonConvergence {
                iterations: newton.iterations,
                residual: norm_inf(&newton.diff).as_f64(),
            });
        }
        let (step, _) = newton.direction(false)?;
        newton.advance(&step)?;
        residuals.push(norm_inf(&newton.diff));
    }
    Ok(NewtonReport {
        k: newton.k,
        iterations: newton.iterations,
        residuals,
    })
}

/// Fits `ln(energy) = intercept + slope t` over the last `window` samples.
pub fn fit_decay_rate<T: Real>(trace: &FlowTrace<T>, window: usize) -> Result<DecayFit<T>> {
    if trace.verdict != Verdict::Converged {
        return Err(Error::Input(format!(
            "decay fit needs a converged trace, got {}",
            trace.verdict
        )));
    }
    if window < 10 || trace.samples.len() < window {
        return Err(Error::Input(format!(
            "decay fit needs a window of at least 10 samples (window {window}, trace has {})",
            trace.samples.len()
        )));
    }
    let tail = &trace.samples[trace.samples.len() - window..];
    if tail.iter().any(|s| !(s.energy > T::zero())) {
        return Err(Error::Input("decay fit window contains zero energy".into()));
    }
    let n = T::from_count(window);
    let ts: Vec<T> = tail.iter().map(|s| s.t).collect();
    let ys: Vec<T> = tail.iter().map(|s| s.energy.ln()).collect();
    let t_mean = ts.iter().fold(T::zero(), |a, b| a + *b) / n;
    let y_mean = ys.iter().fold(T::zero(), |a, b| a + *b) / n;
    let (mut stt, mut sty, mut syy) = (T::zero(), T::zero(), T::zero());
    for (t, y) in ts.iter().zip(&ys) {
        let (dt, dy) = (*t - t_mean, *y - y_mean);
        stt = stt + dt * dt;
        sty = sty + dt * dy;
        syy = syy + dy * dy;
    }
    if !(stt > T::zero()) {
        return Err(Error::Input("decay fit window spans no time".into()));
    }
    let slope = sty / stt;
    let flat = syy <= T::epsilon() * T::epsilon() * (T::one() + y_mean * y_mean) * n;
    let r_squared = if flat {
        T::zero()
    } else {
        (sty * sty) / (stt * syy)
    };
    Ok(DecayFit {
        slope,
        intercept: y_mean - slope * t_mean,
        r_squared,
        window,
        degenerate: flat || slope >= T::zero(),
    })
}
