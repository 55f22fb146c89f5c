//! Distributed swarm controllers: the saturated three-term velocity command
//! (line approaching + robot avoidance + tube keeping) in its full
//! panel-barrier form and the modified constant-speed form, plus the
//! composite Lyapunov monitor.

use crate::fields::{kappa, sat};
use crate::potentials::{
    line_integral_lyapunov, pair_barrier, tube_boundary_barriers, unified_tube_barrier,
    unified_tube_barrier_at, AvoidanceParams, PotentialError, TubeKeepParams,
};
use crate::tube::VirtualTube;
use crate::vec2::Vec2;

/// Per-robot physical parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RobotParams {
    pub id: usize,
    /// Safety radius: two robots conflict when closer than the sum of their
    /// safety radii.
    pub r_s: f64,
    /// Avoidance radius: avoidance control engages when another robot's
    /// safety area overlaps this robot's avoidance area. Must exceed `r_s`.
    pub r_a: f64,
    /// Maximum permitted speed, m/s.
    pub v_m: f64,
}

impl RobotParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.r_s > 0.0 && self.r_a > self.r_s) {
            return Err(format!(
                "robot {}: need r_a > r_s > 0 (r_s={}, r_a={})",
                self.id, self.r_s, self.r_a
            ));
        }
        if !(self.v_m > 0.0) {
            return Err(format!("robot {}: need v_m > 0", self.id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerVariant {
    /// Gradient controller with panel-sum tube keeping; descends the
    /// composite Lyapunov function but slows to rest on the finishing line.
    Full,
    /// Constant-speed line term (finishing line shifted forward by `rho`)
    /// with the non-potential tube-keeping projection; the default.
    Modified,
}

/// Assembled controller configuration shared by all robots.
#[derive(Debug, Clone)]
pub struct ControllerConfig {
    pub variant: ControllerVariant,
    pub k1: f64,
    pub avoidance: AvoidanceParams,
    pub tube_keep: TubeKeepParams,
    /// Forward shift of the modified finishing line, m.
    pub rho: f64,
    /// Arrival threshold: a robot is finished once `l >= -eps_arrive`.
    pub eps_arrive: f64,
}

impl ControllerConfig {
    /// The modified line term equals `v_m t_c` exactly only when the shifted
    /// length keeps the inner saturation engaged: `k1 rho eta_min >= v_m`.
    pub fn validate_rho(&self, v_m_max: f64, eta_min: f64) -> Result<(), String> {
        if self.k1 * self.rho * eta_min < v_m_max * (1.0 - 1e-9) {
            return Err(format!(
                "rho too small: need k1*rho*eta_min >= max robot speed ({} < {})",
                self.k1 * self.rho * eta_min,
                v_m_max
            ));
        }
        if !(self.eps_arrive > 0.0) {
            return Err("eps_arrive must be positive".into());
        }
        Ok(())
    }
}

/// Swarm snapshot: positions plus the monotone finished latches.
#[derive(Debug, Clone)]
pub struct SwarmState {
    pub params: Vec<RobotParams>,
    pub positions: Vec<Vec2>,
    pub finished: Vec<bool>,
}

impl SwarmState {
    pub fn new(params: Vec<RobotParams>, positions: Vec<Vec2>) -> Self {
        let n = positions.len();
        assert_eq!(params.len(), n);
        SwarmState {
            params,
            positions,
            finished: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn all_finished(&self) -> bool {
        self.finished.iter().all(|&f| f)
    }

    /// Latch arrival flags from current positions. Once set, a flag stays
    /// set even if the robot later reads `l < -eps_arrive` again.
    pub fn update_finished(&mut self, tube: &VirtualTube, eps_arrive: f64) {
        for i in 0..self.len() {
            if !self.finished[i] && has_arrived(tube, self.positions[i], eps_arrive) {
                self.finished[i] = true;
            }
        }
    }
}

/// Arrival predicate: the robot's cross section is within `eps_arrive` of
/// the finishing line (or past it).
pub fn has_arrived(tube: &VirtualTube, p: Vec2, eps_arrive: f64) -> bool {
    tube.project(p).l >= -eps_arrive
}

/// Indices of robots whose safety area intersects robot `i`'s avoidance
/// area. Finished robots have quit the tube and are excluded.
pub fn neighbor_set(state: &SwarmState, i: usize) -> Vec<usize> {
    let p_i = state.positions[i];
    let r_a = state.params[i].r_a;
    (0..state.len())
        .filter(|&j| {
            j != i
                && !state.finished[j]
                && p_i.dist(state.positions[j]) <= r_a + state.params[j].r_s
        })
        .collect()
}

/// Velocity command with its pre-saturation term breakdown. The applied
/// command is `v = -sat(line + avoid + tube, v_m)`, so `kappa` is the outer
/// saturation factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlCommand {
    pub v: Vec2,
    pub line_term: Vec2,
    pub avoid_term: Vec2,
    pub tube_term: Vec2,
    pub kappa: f64,
}

impl ControlCommand {
    fn from_stack(line: Vec2, avoid: Vec2, tube: Vec2, v_m: f64) -> Self {
        let stack = line + avoid + tube;
        ControlCommand {
            v: -sat(stack, v_m),
            line_term: line,
            avoid_term: avoid,
            tube_term: tube,
            kappa: kappa(stack, v_m),
        }
    }
}

fn avoidance_term(
    state: &SwarmState,
    i: usize,
    params: &AvoidanceParams,
) -> Result<Vec2, PotentialError> {
    let mut acc = Vec2::ZERO;
    for j in neighbor_set(state, i) {
        let pb = pair_barrier(state.positions[i], state.positions[j], params)?;
        let rel = state.positions[i] - state.positions[j];
        acc += rel * (-pb.b);
    }
    Ok(acc)
}

fn flyout_command(tube: &VirtualTube, p: Vec2, v_m: f64) -> ControlCommand {
    // Finished robots are removed from the interaction graph and leave the
    // cap region at full speed along the moving direction.
    let t = tube.project(p).tangent;
    ControlCommand {
        v: t * v_m,
        line_term: t * (-v_m),
        avoid_term: Vec2::ZERO,
        tube_term: Vec2::ZERO,
        kappa: 1.0,
    }
}

/// Full controller: saturated line-approaching gradient plus pairwise
/// avoidance plus the two boundary panel sums.
pub fn full_command(
    tube: &VirtualTube,
    state: &SwarmState,
    i: usize,
    config: &ControllerConfig,
) -> Result<ControlCommand, PotentialError> {
    let me = &state.params[i];
    let p = state.positions[i];
    if state.finished[i] {
        return Ok(flyout_command(tube, p, me.v_m));
    }
    let proj = tube.project(p);
    let line = sat(proj.tangent * (config.k1 * proj.l * proj.eta), me.v_m);
    let avoid = avoidance_term(state, i, &config.avoidance)?;
    let bars = tube_boundary_barriers(tube, p, &config.tube_keep)?;
    Ok(ControlCommand::from_stack(
        line,
        avoid,
        bars.grad_l + bars.grad_r,
        me.v_m,
    ))
}

/// Modified controller: constant-speed line term and the tangent-orthogonal
/// projection of the unified barrier gradient.
pub fn modified_command(
    tube: &VirtualTube,
    state: &SwarmState,
    i: usize,
    config: &ControllerConfig,
) -> Result<ControlCommand, PotentialError> {
    let me = &state.params[i];
    let p = state.positions[i];
    if state.finished[i] {
        return Ok(flyout_command(tube, p, me.v_m));
    }
    let proj = tube.project(p);
    let line = proj.tangent * (-me.v_m);
    let avoid = avoidance_term(state, i, &config.avoidance)?;
    let ub = unified_tube_barrier_at(tube, p, &proj, &config.tube_keep)?;
    // Non-potential tube keeping: strip the tangential component so the
    // correction is always orthogonal to the moving direction.
    let tube_term = ub.c - proj.tangent * proj.tangent.dot(ub.c);
    Ok(ControlCommand::from_stack(line, avoid, tube_term, me.v_m))
}

/// Dispatch on the configured variant.
pub fn command(
    tube: &VirtualTube,
    state: &SwarmState,
    i: usize,
    config: &ControllerConfig,
) -> Result<ControlCommand, PotentialError> {
    match config.variant {
        ControllerVariant::Full => full_command(tube, state, i, config),
        ControllerVariant::Modified => modified_command(tube, state, i, config),
    }
}

/// Composite Lyapunov value and its derivative along the commanded motion,
/// assembled from the same term evaluations the controller uses. Finished
/// robots are removed from every sum.
///
/// Under the full controller the derivative is `-sum_i kappa_i ‖stack_i‖^2`,
/// hence non-positive; under the modified controller the same quantities are
/// reported as monitors without a sign guarantee.
pub fn lyapunov_and_derivative(
    tube: &VirtualTube,
    state: &SwarmState,
    config: &ControllerConfig,
) -> Result<(f64, f64), PotentialError> {
    let mut v_total = 0.0;
    let mut v_dot = 0.0;
    for i in 0..state.len() {
        if state.finished[i] {
            continue;
        }
        let me = &state.params[i];
        let p = state.positions[i];
        let proj = tube.project(p);

        v_total += line_integral_lyapunov(tube, p, config.k1, me.v_m)?;
        let neighbors = neighbor_set(state, i);
        let mut avoid = Vec2::ZERO;
        for j in 0..state.len() {
            if j == i || state.finished[j] {
                continue;
            }
            let pb = pair_barrier(p, state.positions[j], &config.avoidance)?;
            v_total += 0.5 * pb.v_m;
            if neighbors.contains(&j) {
                avoid += (p - state.positions[j]) * (-pb.b);
            }
        }

        let line_grad = sat(proj.tangent * (config.k1 * proj.l * proj.eta), me.v_m);
        let (tube_value, tube_grad, cmd_tube_term) = match config.variant {
            ControllerVariant::Full => {
                let bars = tube_boundary_barriers(tube, p, &config.tube_keep)?;
                let g = bars.grad_l + bars.grad_r;
                (bars.v_tl + bars.v_tr, g, g)
            }
            ControllerVariant::Modified => {
                let ub = unified_tube_barrier(tube, p, &config.tube_keep)?;
                let t = proj.tangent;
                (ub.v_t, ub.c, ub.c - t * t.dot(ub.c))
            }
        };
        v_total += tube_value;

        let grad_stack = line_grad + avoid + tube_grad;
        let cmd_stack = match config.variant {
            ControllerVariant::Full => grad_stack,
            ControllerVariant::Modified => proj.tangent * (-me.v_m) + avoid + cmd_tube_term,
        };
        let v_cmd = -sat(cmd_stack, me.v_m);
        v_dot += grad_stack.dot(v_cmd);
    }
    Ok((v_total, v_dot))
}
