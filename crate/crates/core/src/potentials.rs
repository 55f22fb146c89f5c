//! Lyapunov and barrier fields: the line-integral Lyapunov function driving
//! robots toward the finishing line, the pairwise avoidance barrier, panel
//! potentials for the tube boundary, and the unified tube-keeping barrier
//! used by the modified controller.

use crate::fields::{BumpParams, FieldError, SmoothSatParams};
use crate::quad;
use crate::tube::VirtualTube;
use crate::vec2::{point_segment_distance, Vec2};
use thiserror::Error;

/// Finite-difference step for derivatives taken through the projection.
pub const FD_STEP: f64 = 1e-6;

/// Absolute tolerance for panel quadrature. Tight enough that quadrature
/// noise stays invisible to 1e-6-step central finite differences.
pub const PANEL_QUAD_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("robot positions coincide; the pairwise barrier is undefined")]
    CoincidentPositions,
    #[error("panel integrand touches the query point (distance {distance:.6} <= threshold {threshold:.6})")]
    PanelTouchesPoint { distance: f64, threshold: f64 },
    #[error("directional constraint violated at station {station} ({side:?} side): forward dot {dot:.3e} < 0")]
    DirectionalConstraintViolated {
        station: usize,
        side: Side,
        dot: f64,
    },
    #[error("query point does not project into the tube")]
    ProjectionFailed,
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Line-integral Lyapunov function for the saturated line-approaching field,
/// evaluated through its 1-D reduction: with `w = |l(x)|` along the offset
/// curve through `y`,
///
/// `V(y) = ∫_0^{|l(y)|} min(k1 w, v_m / eta(w)) dw`.
///
/// Zero exactly on the finishing cross section, positive on both sides.
pub fn line_integral_lyapunov(
    tube: &VirtualTube,
    y: Vec2,
    k1: f64,
    v_m: f64,
) -> Result<f64, PotentialError> {
    let proj = tube.project(y);
    if !proj.l.is_finite() {
        return Err(PotentialError::ProjectionFailed);
    }
    let total = proj.l.abs();
    if total == 0.0 {
        return Ok(0.0);
    }
    let sign = proj.l.signum();
    let lambda = proj.lambda;
    let integrand = |w: f64| -> f64 {
        let eta = tube.eta_at_l(sign * w, lambda);
        (k1 * w).min(v_m / eta)
    };
    // Integrate station piece by station piece: eta is smooth inside a piece,
    // so the adaptive rule only refines around the saturation kink.
    let spacing = tube.spacing();
    let mut acc = 0.0;
    let mut w0 = 0.0;
    while w0 < total {
        let w1 = (w0 + spacing).min(total);
        acc += quad::integrate(integrand, w0, w1, 1e-12);
        w0 = w1;
    }
    Ok(acc)
}

/// Parameters of the pairwise avoidance barrier.
#[derive(Debug, Clone, Copy)]
pub struct AvoidanceParams {
    pub k2: f64,
    pub eps_m: f64,
    pub r_s: f64,
    pub r_a: f64,
    sigma_m: BumpParams,
    ssat: SmoothSatParams,
}

impl AvoidanceParams {
    pub fn new(k2: f64, eps_m: f64, eps_s: f64, r_s: f64, r_a: f64) -> Result<Self, FieldError> {
        assert!(k2 > 0.0 && eps_m > 0.0, "k2 and eps_m must be positive");
        assert!(r_s > 0.0 && r_a > r_s, "need r_a > r_s > 0");
        Ok(AvoidanceParams {
            k2,
            eps_m,
            r_s,
            r_a,
            // Active strictly between conflict (2 r_s) and gate (r_s + r_a).
            sigma_m: BumpParams::new(2.0 * r_s, r_s + r_a)?,
            ssat: SmoothSatParams::new(eps_s)?,
        })
    }

    /// Activation cutoff: the barrier is exactly zero beyond `r_s + r_a`.
    pub fn cutoff(&self) -> f64 {
        self.r_s + self.r_a
    }
}

/// Pairwise barrier value and its radial factor `b`.
#[derive(Debug, Clone, Copy)]
pub struct PairBarrier {
    pub v_m: f64,
    /// `b = -(dV/d‖p̃‖) / ‖p̃‖ >= 0`; the avoidance velocity term is `b p̃`.
    pub b: f64,
}

/// Barrier between robots at `p_i`, `p_j`: zero beyond the activation gate,
/// growing like `k2 / (eps_m ‖p̃‖)` once the conflict distance is crossed.
pub fn pair_barrier(
    p_i: Vec2,
    p_j: Vec2,
    params: &AvoidanceParams,
) -> Result<PairBarrier, PotentialError> {
    let x = p_i.dist(p_j);
    if x <= 1e-12 {
        return Err(PotentialError::CoincidentPositions);
    }
    if x >= params.cutoff() {
        return Ok(PairBarrier { v_m: 0.0, b: 0.0 });
    }
    let sigma = params.sigma_m.eval(x);
    let dsigma = params.sigma_m.deriv(x);
    let two_rs = 2.0 * params.r_s;
    // Cancellation-free forms: (1+e) x - 2 r_s s(x / 2 r_s) = e x + 2 r_s gap.
    let den = params.eps_m * x + two_rs * params.ssat.gap(x / two_rs);
    let dden = params.eps_m + params.ssat.one_minus_deriv(x / two_rs);
    let v_m = params.k2 * sigma / den;
    let dv_dx = params.k2 * (dsigma * den - sigma * dden) / (den * den);
    Ok(PairBarrier {
        v_m,
        b: -dv_dx / x,
    })
}

/// A straight source panel: the segment `[a + g1 t, a + g2 t]` with log
/// kernel offset by the threshold distance `d`. The integral is oriented,
/// so swapping `g1` and `g2` flips the sign of the potential — the tube
/// barriers rely on this to turn the log source into a repulsive wall.
#[derive(Debug, Clone, Copy)]
pub struct PanelParams {
    pub a: Vec2,
    pub t: Vec2,
    pub g1: f64,
    pub g2: f64,
    pub d: f64,
}

impl PanelParams {
    pub fn new(a: Vec2, t: Vec2, g1: f64, g2: f64, d: f64) -> Self {
        let t = t.normalized().expect("panel direction must be non-zero");
        assert!(d >= 0.0);
        PanelParams { a, t, g1, g2, d }
    }

    fn check_clearance(&self, p: Vec2) -> Result<(), PotentialError> {
        let lo = self.g1.min(self.g2);
        let hi = self.g1.max(self.g2);
        let dist = point_segment_distance(p, self.a + self.t * lo, self.a + self.t * hi);
        if dist <= self.d + 1e-12 {
            return Err(PotentialError::PanelTouchesPoint {
                distance: dist,
                threshold: self.d,
            });
        }
        Ok(())
    }
}

/// `φ(p) = ∫_{g1}^{g2} ln(‖p - (a + x t)‖ - d) dx` by adaptive quadrature.
pub fn panel_potential(p: Vec2, panel: &PanelParams) -> Result<f64, PotentialError> {
    panel.check_clearance(p)?;
    let f = |x: f64| {
        let r = (p - panel.a - panel.t * x).norm();
        (r - panel.d).ln()
    };
    Ok(quad::integrate(f, panel.g1, panel.g2, PANEL_QUAD_TOL))
}

/// Gradient of [`panel_potential`] with respect to `p`, by differentiating
/// under the integral sign with the same quadrature.
pub fn panel_gradient(p: Vec2, panel: &PanelParams) -> Result<Vec2, PotentialError> {
    panel.check_clearance(p)?;
    let kernel = |x: f64| -> Vec2 {
        let rel = p - panel.a - panel.t * x;
        let r = rel.norm();
        rel / (r * (r - panel.d))
    };
    let gx = quad::integrate(|x| kernel(x).x, panel.g1, panel.g2, PANEL_QUAD_TOL);
    let gy = quad::integrate(|x| kernel(x).y, panel.g1, panel.g2, PANEL_QUAD_TOL);
    Ok(Vec2::new(gx, gy))
}

/// Panel extents along each boundary tangent, forward (`> 0`) and backward
/// (`< 0`) from the anchor cross section.
///
/// The backward extent is deliberately much longer than the forward one: the
/// per-panel directional constraint demands that no panel in the interaction
/// window ever pushes a robot backward, and a panel whose mass sits mostly
/// ahead of the robot does exactly that. A backward surplus of `2 r_a` makes
/// every panel's tilt non-negative on straight tubes; the extra margin keeps
/// the tilt ratio above the tangent rotation `kappa r_a` that curvature can
/// introduce between the robot and the window's far panels.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PanelExtents {
    pub left_back: f64,
    pub left_fwd: f64,
    pub right_back: f64,
    pub right_fwd: f64,
}

impl PanelExtents {
    pub fn default_for(r_a: f64) -> Self {
        PanelExtents {
            left_back: -8.0 * r_a,
            left_fwd: 2.0 * r_a,
            right_back: -8.0 * r_a,
            right_fwd: 2.0 * r_a,
        }
    }

    pub fn validate(&self) -> bool {
        self.left_fwd > 0.0 && self.right_fwd > 0.0 && self.left_back < 0.0 && self.right_back < 0.0
    }
}

/// Parameters of the tube-keeping barriers (both the panel sums of the full
/// controller and the unified barrier of the modified controller).
#[derive(Debug, Clone, Copy)]
pub struct TubeKeepParams {
    pub k3: f64,
    pub eps_t: f64,
    pub r_s_prime: f64,
    pub r_a: f64,
    /// Log-kernel threshold for boundary panels (the safety radius).
    pub panel_threshold: f64,
    pub extents: PanelExtents,
    sigma_t: BumpParams,
    ssat: SmoothSatParams,
}

impl TubeKeepParams {
    pub fn new(
        k3: f64,
        eps_t: f64,
        eps_s: f64,
        r_s_prime: f64,
        r_a: f64,
        panel_threshold: f64,
        extents: PanelExtents,
    ) -> Result<Self, FieldError> {
        assert!(k3 > 0.0 && eps_t > 0.0, "k3 and eps_t must be positive");
        assert!(
            r_s_prime > 0.0 && r_a > r_s_prime,
            "need r_a > r_s' > 0 (got r_s'={r_s_prime}, r_a={r_a})"
        );
        assert!(extents.validate(), "panel extents must straddle zero");
        Ok(TubeKeepParams {
            k3,
            eps_t,
            r_s_prime,
            r_a,
            panel_threshold,
            extents,
            sigma_t: BumpParams::new(r_s_prime, r_a)?,
            ssat: SmoothSatParams::new(eps_s)?,
        })
    }
}

/// Output of [`tube_boundary_barriers`].
#[derive(Debug, Clone, Copy)]
pub struct TubeBarriers {
    pub v_tl: f64,
    pub v_tr: f64,
    pub grad_l: Vec2,
    pub grad_r: Vec2,
}

/// Sum of boundary panel potentials over the cross sections within `r_a` of
/// the robot, one panel per station per side, weighted by the station
/// spacing. Each panel's directional constraint (its negative gradient must
/// not point backward) is verified and reported as an error on violation.
pub fn tube_boundary_barriers(
    tube: &VirtualTube,
    p_i: Vec2,
    params: &TubeKeepParams,
) -> Result<TubeBarriers, PotentialError> {
    let proj = tube.project(p_i);
    let t_c = proj.tangent;
    let (lo, hi) = tube
        .section_window(p_i, params.r_a)
        .ok_or(PotentialError::ProjectionFailed)?;
    let weight = params.k3 * tube.spacing();

    let mut out = TubeBarriers {
        v_tl: 0.0,
        v_tr: 0.0,
        grad_l: Vec2::ZERO,
        grad_r: Vec2::ZERO,
    };
    for k in lo..=hi {
        let st = &tube.stations()[k];
        for side in [Side::Left, Side::Right] {
            let (anchor, dir, fwd, back) = match side {
                Side::Left => (
                    st.boundary_l(),
                    tube.boundary_tangent_l(k),
                    params.extents.left_fwd,
                    params.extents.left_back,
                ),
                Side::Right => (
                    st.boundary_r(),
                    tube.boundary_tangent_r(k),
                    params.extents.right_fwd,
                    params.extents.right_back,
                ),
            };
            // Oriented forward-to-backward: flips the log source into a wall
            // whose negative gradient repels.
            let panel = PanelParams::new(anchor, dir, fwd, back, params.panel_threshold);
            let phi = panel_potential(p_i, &panel)?;
            let grad = panel_gradient(p_i, &panel)?;
            let dot = -t_c.dot(grad);
            if dot < -1e-9 * (1.0 + grad.norm()) {
                return Err(PotentialError::DirectionalConstraintViolated {
                    station: k,
                    side,
                    dot,
                });
            }
            match side {
                Side::Left => {
                    out.v_tl += weight * phi;
                    out.grad_l += grad * weight;
                }
                Side::Right => {
                    out.v_tr += weight * phi;
                    out.grad_r += grad * weight;
                }
            }
        }
    }
    Ok(out)
}

/// Output of [`unified_tube_barrier`].
#[derive(Debug, Clone, Copy)]
pub struct UnifiedBarrier {
    pub v_t: f64,
    /// Gradient of the barrier with respect to the robot position.
    pub c: Vec2,
    pub d_t: f64,
}

/// Unified tube-keeping barrier on the cross-section clearance
/// `d_t = r_t - ‖p - m‖`: zero for `d_t > r_a`, growing like
/// `k3 / (eps_t d_t)` below `r_s'`. The clearance derivative is assembled
/// from `∂r_t/∂p` and `∂m/∂p`, both taken by central finite differences
/// through the projection.
pub fn unified_tube_barrier(
    tube: &VirtualTube,
    p_i: Vec2,
    params: &TubeKeepParams,
) -> Result<UnifiedBarrier, PotentialError> {
    let proj = tube.project(p_i);
    unified_tube_barrier_at(tube, p_i, &proj, params)
}

/// As [`unified_tube_barrier`], reusing an already-computed projection of
/// `p_i` (the controller's hot path).
pub fn unified_tube_barrier_at(
    tube: &VirtualTube,
    p_i: Vec2,
    proj: &crate::tube::Projection,
    params: &TubeKeepParams,
) -> Result<UnifiedBarrier, PotentialError> {
    let d_t = proj.d_t;
    if d_t >= params.r_a {
        return Ok(UnifiedBarrier {
            v_t: 0.0,
            c: Vec2::ZERO,
            d_t,
        });
    }

    // Clearance floor keeps the barrier finite if a disturbance pushes the
    // evaluation point onto (or past) the eroded boundary.
    let dte = d_t.max(1e-9);
    let sigma = params.sigma_t.eval(dte);
    let dsigma = params.sigma_t.deriv(dte);
    let rsp = params.r_s_prime;
    // Cancellation-free denominator, as in the pairwise barrier.
    let den = params.eps_t * dte + rsp * params.ssat.gap(dte / rsp);
    let dden = params.eps_t + params.ssat.one_minus_deriv(dte / rsp);
    let v_t = params.k3 * sigma / den;
    let dv_dd = params.k3 * (dsigma * den - sigma * dden) / (den * den);

    match clearance_gradient_at(tube, p_i, proj) {
        // At the middle point the unit vector is undefined; the derivative
        // factor vanishes there for any section wider than r_a, so c = 0.
        None => Ok(UnifiedBarrier {
            v_t,
            c: Vec2::ZERO,
            d_t,
        }),
        Some(row) => Ok(UnifiedBarrier {
            v_t,
            c: row * dv_dd,
            d_t,
        }),
    }
}

/// Gradient of the cross-section clearance `d_t(p) = r_t - ‖p - m‖`,
/// assembled as `∂r_t/∂p - uᵀ (I - ∂m/∂p)` with `∂r_t/∂p` and `∂m/∂p`
/// taken by central finite differences through the projection. `None` at
/// the middle point, where the unit vector `u` is undefined.
pub fn clearance_gradient(tube: &VirtualTube, p: Vec2) -> Option<Vec2> {
    let proj = tube.project(p);
    clearance_gradient_at(tube, p, &proj)
}

/// As [`clearance_gradient`] with the point's projection precomputed.
pub fn clearance_gradient_at(
    tube: &VirtualTube,
    p: Vec2,
    proj: &crate::tube::Projection,
) -> Option<Vec2> {
    let rel = p - proj.middle;
    let rel_norm = rel.norm();
    if rel_norm <= 1e-12 {
        return None;
    }
    let u = rel / rel_norm;

    let h = FD_STEP;
    let px_p = tube.project(p + Vec2::new(h, 0.0));
    let px_m = tube.project(p - Vec2::new(h, 0.0));
    let py_p = tube.project(p + Vec2::new(0.0, h));
    let py_m = tube.project(p - Vec2::new(0.0, h));
    let drt = Vec2::new(
        (px_p.r_t - px_m.r_t) / (2.0 * h),
        (py_p.r_t - py_m.r_t) / (2.0 * h),
    );
    // Columns of ∂m/∂p.
    let dm_dx = (px_p.middle - px_m.middle) / (2.0 * h);
    let dm_dy = (py_p.middle - py_m.middle) / (2.0 * h);

    Some(Vec2::new(
        drt.x - (u.x - u.dot(dm_dx)),
        drt.y - (u.y - u.dot(dm_dy)),
    ))
}
