//! Scalar building blocks shared by every potential and controller term:
//! the vector saturation `sat`/`kappa` pair, a C^1 cubic bump, and a smooth
//! approximation of `min(x, 1)`.

use crate::vec2::Vec2;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("bump breakpoints must satisfy 0 < d1 < d2 (got d1={d1}, d2={d2})")]
    InvalidBumpRange { d1: f64, d2: f64 },
    #[error("smooth saturation epsilon {0} outside [0, {max}]", max = SMOOTH_SAT_EPS_MAX)]
    EpsilonOutOfRange(f64),
}

/// Saturate `v` to norm at most `v_m`, preserving direction.
pub fn sat(v: Vec2, v_m: f64) -> Vec2 {
    v * kappa(v, v_m)
}

/// Scale factor of the saturation: 1 when `‖v‖ <= v_m`, else `v_m / ‖v‖`.
/// Defined as 1 at `v = 0` so that `kappa(v) * v` is continuous.
pub fn kappa(v: Vec2, v_m: f64) -> f64 {
    let n = v.norm();
    if n <= v_m {
        1.0
    } else {
        v_m / n
    }
}

/// C^1 cubic bump: 1 on `(-inf, d1]`, 0 on `[d2, inf)`, monotone
/// non-increasing in between, with zero slope at both breakpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpParams {
    pub d1: f64,
    pub d2: f64,
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl BumpParams {
    pub fn new(d1: f64, d2: f64) -> Result<Self, FieldError> {
        if !(d1 > 0.0 && d2 > d1 && d1.is_finite() && d2.is_finite()) {
            return Err(FieldError::InvalidBumpRange { d1, d2 });
        }
        let u3 = (d1 - d2).powi(3);
        Ok(BumpParams {
            d1,
            d2,
            a: -2.0 / u3,
            b: 3.0 * (d1 + d2) / u3,
            c: -6.0 * d1 * d2 / u3,
            d: d2 * d2 * (3.0 * d1 - d2) / u3,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.d1 {
            1.0
        } else if x >= self.d2 {
            0.0
        } else {
            ((self.a * x + self.b) * x + self.c) * x + self.d
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        if x <= self.d1 || x >= self.d2 {
            0.0
        } else {
            (3.0 * self.a * x + 2.0 * self.b) * x + self.c
        }
    }
}

/// Largest admissible epsilon for [`SmoothSatParams`]; beyond it the circular
/// blend would start left of the origin.
pub const SMOOTH_SAT_EPS_MAX: f64 = TAN_67_5 / (TAN_67_5 * SIN_45 - 1.0);

const SIN_45: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Smooth saturation `s(x, eps)`: identity up to `x1`, a circular arc blend
/// on `[x1, x2]`, and 1 beyond. Satisfies `s(x) <= min(x, 1)` and
/// `|ds/dx| <= 1` everywhere; converges uniformly to `min(x, 1)` as
/// `eps -> 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothSatParams {
    pub eps: f64,
    pub x1: f64,
    pub x2: f64,
}

impl SmoothSatParams {
    pub fn new(eps: f64) -> Result<Self, FieldError> {
        if !(eps.is_finite() && (0.0..=SMOOTH_SAT_EPS_MAX).contains(&eps)) {
            return Err(FieldError::EpsilonOutOfRange(eps));
        }
        // theta_s = 67.5 deg fixes the blend geometry.
        let x2 = 1.0 + eps / TAN_67_5;
        let x1 = x2 - eps * SIN_45;
        Ok(SmoothSatParams { eps, x1, x2 })
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.x1 {
            x
        } else if x >= self.x2 {
            1.0
        } else {
            let dx = x - self.x2;
            (1.0 - self.eps) + (self.eps * self.eps - dx * dx).max(0.0).sqrt()
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        1.0 - self.one_minus_deriv(x)
    }

    /// `x - s(x)`, computed branch-exactly: identically zero on the linear
    /// branch instead of suffering `x - x` cancellation at epsilon scale.
    /// Barrier denominators of the form `(1 + e) x - a s(x / a)` reduce to
    /// `e x + a gap(x / a)`, which keeps them accurate to machine precision
    /// even when `e` is tiny.
    pub fn gap(&self, x: f64) -> f64 {
        if x <= self.x1 {
            0.0
        } else if x >= self.x2 {
            x - 1.0
        } else {
            let dx = x - self.x2;
            x - (1.0 - self.eps) - (self.eps * self.eps - dx * dx).max(0.0).sqrt()
        }
    }

    /// `1 - ds/dx`, branch-exact (zero on the linear branch).
    pub fn one_minus_deriv(&self, x: f64) -> f64 {
        if x <= self.x1 {
            0.0
        } else if x >= self.x2 {
            1.0
        } else {
            let dx = self.x2 - x;
            1.0 - dx / (self.eps * self.eps - dx * dx).max(1e-300).sqrt()
        }
    }
}

const TAN_67_5: f64 = 2.414213562373095; // tan 67.5 deg = 1 + sqrt(2)
