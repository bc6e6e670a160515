//! Explicit Runge-Kutta steppers for autonomous systems `y' = f(y)`.

use crate::error::Result;
use crate::scalar::{axpy, Real};

/// Classic fourth-order step. `k1` is `f(y)` when the caller already has it.
pub fn rk4_step<T: Real>(
    f: &mut impl FnMut(&[T]) -> Result<Vec<T>>,
    y: &[T],
    k1: &[T],
    h: T,
) -> Result<Vec<T>> {
    let half = T::lit(0.5) * h;
    let k2 = f(&axpy(y, half, k1))?;
    let k3 = f(&axpy(y, half, &k2))?;
    let k4 = f(&axpy(y, h, &k3))?;
    let sixth = h / T::lit(6.0);
    let two = T::lit(2.0);
    Ok((0..y.len())
        .map(|i| y[i] + sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
        .collect())
}

// Fehlberg tableau
const A: [[f64; 5]; 5] = [
    [1.0 / 4.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 32.0, 9.0 / 32.0, 0.0, 0.0, 0.0],
    [1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0, 0.0, 0.0],
    [439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0, 0.0],
    [-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0],
];
const B5: [f64; 6] = [
    16.0 / 135.0,
    0.0,
    6656.0 / 12825.0,
    28561.0 / 56430.0,
    -9.0 / 50.0,
    2.0 / 55.0,
];
const B4: [f64; 6] = [
    25.0 / 216.0,
    0.0,
    1408.0 / 2565.0,
    2197.0 / 4104.0,
    -1.0 / 5.0,
    0.0,
];

/// Result of one embedded step.
pub struct EmbeddedStep<T> {
    /// Fifth-order solution (propagated).
    pub y: Vec<T>,
    /// Difference between the fifth- and fourth-order solutions.
    pub error: Vec<T>,
}

/// Runge-Kutta-Fehlberg 4(5) step with local extrapolation.
pub fn rkf45_step<T: Real>(
    f: &mut impl FnMut(&[T]) -> Result<Vec<T>>,
    y: &[T],
    k1: &[T],
    h: T,
) -> Result<EmbeddedStep<T>> {
    let n = y.len();
    let mut stages: Vec<Vec<T>> = vec![k1.to_vec()];
    for row in A.iter() {
        let mut arg = y.to_vec();
        for (s, a) in stages.iter().zip(row) {
            if *a != 0.0 {
                let ha = h * T::lit(*a);
                for i in 0..n {
                    arg[i] = arg[i] + ha * s[i];
                }
            }
        }
        stages.push(f(&arg)?);
    }
    let mut y5 = y.to_vec();
    let mut error = vec![T::zero(); n];
    for (s, (b5, b4)) in stages.iter().zip(B5.iter().zip(B4.iter())) {
        let w5 = h * T::lit(*b5);
        let we = h * T::lit(b5 - b4);
        for i in 0..n {
            y5[i] = y5[i] + w5 * s[i];
            error[i] = error[i] + we * s[i];
        }
    }
    Ok(EmbeddedStep { y: y5, error })
}

/// Scaled error norm: `max_i |err_i| / (tol (1 + max(|y_i|, |y_new_i|)))`.
/// Steps with norm at most one are accepted.
pub fn error_norm<T: Real>(error: &[T], y: &[T], y_new: &[T], tol: T) -> T {
    error
        .iter()
        .zip(y.iter().zip(y_new))
        .fold(T::zero(), |m, (e, (a, b))| {
            m.max(e.abs() / (tol * (T::one() + a.abs().max(b.abs()))))
        })
}

/// Standard step-size update with safety factor 0.9, clamped to `[0.2, 5]`.
pub fn next_step_factor<T: Real>(err: T) -> T {
    if err == T::zero() {
        return T::lit(5.0);
    }
    (T::lit(0.9) * err.powf(T::lit(-0.2)))
        .max(T::lit(0.2))
        .min(T::lit(5.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(y: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![-y[0], -2.0 * y[1]])
    }

    fn rk4_error(h: f64) -> f64 {
        let mut f = decay;
        let mut y = vec![1.0, 1.0];
        for _ in 0..(1.0 / h).round() as usize {
            let k1 = f(&y).unwrap();
            y = rk4_step(&mut f, &y, &k1, h).unwrap();
        }
        (y[0] - (-1f64).exp()).abs()
    }

    #[test]
    fn rk4_is_fourth_order() {
        let order = (rk4_error(0.1) / rk4_error(0.05)).log2();
        assert!((order - 4.0).abs() < 0.2, "observed order {order}");
    }

    #[test]
    fn rkf45_error_estimate_tracks_true_error() {
        let mut f = decay;
        let y = [1.0, 1.0];
        let k1 = f(&y).unwrap();
        let step = rkf45_step(&mut f, &y, &k1, 0.1).unwrap();
        let exact = [(-0.1f64).exp(), (-0.2f64).exp()];
        // fifth-order result far more accurate than the embedded estimate
        for i in 0..2 {
            let actual = (step.y[i] - exact[i]).abs();
            assert!(actual < 0.2 * step.error[i].abs());
            assert!(step.error[i].abs() < 1e-6);
        }
    }

    #[test]
    fn tableau_rows_are_consistent() {
        // each stage node c_i equals its row sum
        let c = [0.25, 3.0 / 8.0, 12.0 / 13.0, 1.0, 0.5];
        for (row, ci) in A.iter().zip(c) {
            assert!((row.iter().sum::<f64>() - ci).abs() < 1e-14);
        }
        assert!((B5.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!((B4.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn step_factor_bounds() {
        assert_eq!(next_step_factor(0.0), 5.0);
        assert_eq!(next_step_factor(1e9), 0.2);
        assert!(next_step_factor(1.0) < 1.0);
    }
}
