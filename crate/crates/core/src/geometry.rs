//! Spherical trigonometry of a single edge quadrilateral.
//!
//! For an edge `e = {v, w}` with circle radii `r_v`, `r_w` meeting at
//! intersection angle `phi`, the quadrilateral spanned by the two circle
//! centres and the two face centres has angle `theta_v` at `v` given by
//!
//! ```text
//! cot(theta_v / 2) = (cot r_w sin r_v + cos r_v cos phi) / sin phi
//! ```
//!
//! The arc of circle `v` inside the quadrilateral has total geodesic
//! curvature `theta_v cos r_v`. Derivatives are taken in the log-cotangent
//! coordinate `K = ln cot r`.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Radius bounds used to flag collapsed circles in long flow runs.
pub const RADIUS_FLOOR: f64 = 1e-12;

/// `sin r`, `cos r` and `cot r` of one circle radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusTrig<T> {
    pub sin: T,
    pub cos: T,
    pub cot: T,
}

impl<T: Real> RadiusTrig<T> {
    pub fn from_radius(r: T) -> Self {
        let (sin, cos) = r.sin_cos();
        Self {
            sin,
            cos,
            cot: cos / sin,
        }
    }

    /// Trig values straight from `K = ln cot r`, never forming `r`; accurate
    /// on both ends of the radius range.
    pub fn from_k(k: T) -> Self {
        let e = (-k.abs()).exp();
        let s = (T::one() + e * e).sqrt().recip();
        let (sin, cos) = if k >= T::zero() { (e * s, s) } else { (s, e * s) };
        Self {
            sin,
            cos,
            cot: k.exp(),
        }
    }
}

/// Angles, side curvatures and the analytic partials for one edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeSideGeometry<T> {
    pub theta_v: T,
    pub theta_w: T,
    /// `theta_v cos r_v`
    pub l_v: T,
    pub l_w: T,
    /// `dL_(e,v)/dK_w`, equal to `dL_(e,w)/dK_v`.
    pub d_cross: T,
    /// `d(L_(e,v) + L_(e,w))/dK_v`
    pub d_pair_v: T,
    /// `d(L_(e,v) + L_(e,w))/dK_w`
    pub d_pair_w: T,
}

impl<T: Real> EdgeSideGeometry<T> {
    /// `dL_(e,v)/dK_v`
    pub fn d_self_v(&self) -> T {
        self.d_pair_v - self.d_cross
    }

    /// `dL_(e,w)/dK_w`
    pub fn d_self_w(&self) -> T {
        self.d_pair_w - self.d_cross
    }

    /// The same edge seen from `w`.
    pub fn swapped(&self) -> Self {
        Self {
            theta_v: self.theta_w,
            theta_w: self.theta_v,
            l_v: self.l_w,
            l_w: self.l_v,
            d_cross: self.d_cross,
            d_pair_v: self.d_pair_w,
            d_pair_w: self.d_pair_v,
        }
    }
}

fn check_radius<T: Real>(what: &'static str, r: T) -> Result<()> {
    if r > T::zero() && r < T::FRAC_PI_2() {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value: r.as_f64(),
            range: "(0, pi/2)",
        })
    }
}

fn check_phi<T: Real>(phi: T) -> Result<()> {
    if phi > T::zero() && phi <= T::FRAC_PI_2() {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "phi",
            value: phi.as_f64(),
            range: "(0, pi/2]",
        })
    }
}

/// `K = ln cot r`.
pub fn r_to_k<T: Real>(r: T) -> Result<T> {
    check_radius("r", r)?;
    let (s, c) = r.sin_cos();
    Ok(c.ln() - s.ln())
}

/// `r = arccot(exp K)`, split by sign of `K` so the exponential never
/// overflows.
pub fn k_to_r<T: Real>(k: T) -> Result<T> {
    if !k.is_finite() {
        return Err(Error::Domain {
            what: "K",
            value: k.as_f64(),
            range: "finite reals",
        });
    }
    Ok(if k >= T::zero() {
        (-k).exp().atan()
    } else {
        T::FRAC_PI_2() - k.exp().atan()
    })
}

/// Angle `theta_(e,v)` of the edge quadrilateral at `v`, in `(0, pi)`.
pub fn quad_angle<T: Real>(r_v: T, r_w: T, phi: T) -> Result<T> {
    check_radius("r_v", r_v)?;
    check_radius("r_w", r_w)?;
    check_phi(phi)?;
    let v = RadiusTrig::from_radius(r_v);
    let w = RadiusTrig::from_radius(r_w);
    let (sp, cp) = phi.sin_cos();
    Ok(half_angle(&v, &w, sp, cp).0 * T::lit(2.0))
}

/// `L_(e,v) = theta cos r`.
pub fn side_curvature<T: Real>(theta: T, r: T) -> Result<T> {
    if !(theta > T::zero() && theta < T::TAU()) {
        return Err(Error::Domain {
            what: "theta",
            value: theta.as_f64(),
            range: "(0, 2pi)",
        });
    }
    check_radius("r", r)?;
    Ok(theta * r.cos())
}

/// Full per-edge geometry from radii.
pub fn edge_side_geometry<T: Real>(r_v: T, r_w: T, phi: T) -> Result<EdgeSideGeometry<T>> {
    check_radius("r_v", r_v)?;
    check_radius("r_w", r_w)?;
    check_phi(phi)?;
    let (sp, cp) = phi.sin_cos();
    Ok(edge_geometry(
        &RadiusTrig::from_radius(r_v),
        &RadiusTrig::from_radius(r_w),
        sp,
        cp,
    ))
}

/// Full per-edge geometry from log-cotangent coordinates.
pub fn edge_side_geometry_k<T: Real>(k_v: T, k_w: T, phi: T) -> Result<EdgeSideGeometry<T>> {
    for (what, k) in [("K_v", k_v), ("K_w", k_w)] {
        if !k.is_finite() {
            return Err(Error::Domain {
                what,
                value: k.as_f64(),
                range: "finite reals",
            });
        }
    }
    check_phi(phi)?;
    let (sp, cp) = phi.sin_cos();
    Ok(edge_geometry(
        &RadiusTrig::from_k(k_v),
        &RadiusTrig::from_k(k_w),
        sp,
        cp,
    ))
}

/// Half angle at `v` and its sine. `atan2` keeps the result accurate when
/// the cotangent is near zero (theta near pi).
#[inline]
fn half_angle<T: Real>(v: &RadiusTrig<T>, w: &RadiusTrig<T>, sin_phi: T, cos_phi: T) -> (T, T) {
    let x = w.cot * v.sin + v.cos * cos_phi;
    let half = sin_phi.atan2(x);
    (half, sin_phi / sin_phi.hypot(x))
}

/// Unchecked kernel shared by the curvature assembly.
#[inline]
pub fn edge_geometry<T: Real>(
    v: &RadiusTrig<T>,
    w: &RadiusTrig<T>,
    sin_phi: T,
    cos_phi: T,
) -> EdgeSideGeometry<T> {
    let two = T::lit(2.0);
    let (half_v, sin_half_v) = half_angle(v, w, sin_phi, cos_phi);
    let (half_w, sin_half_w) = half_angle(w, v, sin_phi, cos_phi);
    let theta_v = two * half_v;
    let theta_w = two * half_w;
    EdgeSideGeometry {
        theta_v,
        theta_w,
        l_v: theta_v * v.cos,
        l_w: theta_w * w.cos,
        d_cross: -two * v.cos * w.cos * sin_half_v * sin_half_w / sin_phi,
        d_pair_v: v.sin * v.sin * v.cos * theta_minus_sin(theta_v),
        d_pair_w: w.sin * w.sin * w.cos * theta_minus_sin(theta_w),
    }
}

/// `x - sin x` without cancellation for small `x`.
pub fn theta_minus_sin<T: Real>(x: T) -> T {
    if x.abs() < T::lit(0.25) {
        // x^3/3! - x^5/5! + x^7/7! - x^9/9! + x^11/11!
        let x2 = x * x;
        let mut term = x * x2 / T::lit(6.0);
        let mut sum = term;
        for k in [20.0, 42.0, 72.0, 110.0] {
            term = -term * x2 / T::lit(k);
            sum = sum + term;
        }
        sum
    } else {
        x - x.sin()
    }
}
