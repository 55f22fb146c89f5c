//! Barrier-constrained QP baseline and the calculation-speed comparison
//! harness.
//!
//! The baseline converts the controller objectives into a quadratic program:
//! the constant-speed line term becomes the nominal command, pairwise
//! clearance and boundary clearance become linear half-plane constraints on
//! the commanded velocity (`a·u >= b` rows from squared-distance barriers
//! with a class-K gain). Distributed robots solve a 2-D QP each with half
//! responsibility per pair; the centralized variant stacks all robots into
//! one program.

use crate::controller::{neighbor_set, ControllerConfig, SwarmState};
use crate::potentials::clearance_gradient_at;
use crate::scenario::{ControllerSpec, RobotSpec, Scenario, ScenarioConfig, TubeSource};
use crate::sim::SimError;
use crate::tube::{HalfWidths, VirtualTube};
use crate::vec2::Vec2;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CbfError {
    #[error("constraint rows are contradictory; the QP has no feasible point")]
    Infeasible,
}

/// Linear inequality `a·u >= b` on the commanded velocity.
#[derive(Debug, Clone, Copy)]
pub struct HalfPlane {
    pub a: Vec2,
    pub b: f64,
}

/// A single robot's QP: minimize `‖u - u_nom‖^2` subject to the rows.
/// The speed cap is applied by radial post-scaling, keeping the program
/// linear-constrained.
#[derive(Debug, Clone)]
pub struct QpProblem {
    pub u_nom: Vec2,
    pub rows: Vec<HalfPlane>,
    pub v_m: f64,
}

fn feasible(u: Vec2, rows: &[HalfPlane]) -> bool {
    rows.iter()
        .all(|r| r.a.dot(u) >= r.b - 1e-9 * (1.0 + r.a.norm() * u.norm() + r.b.abs()))
}

/// Exact minimizer of the 2-D QP by enumerating active sets of size <= 2:
/// the unconstrained point, every single-row boundary projection, and every
/// pair vertex.
pub fn active_set_solve(problem: &QpProblem) -> Result<Vec2, CbfError> {
    let rows = &problem.rows;
    let u0 = problem.u_nom;
    let mut best: Option<(f64, Vec2)> = None;
    let mut consider = |u: Vec2| {
        if u.is_finite() && feasible(u, rows) {
            let cost = (u - u0).norm_sq();
            if best.map_or(true, |(c, _)| cost < c) {
                best = Some((cost, u));
            }
        }
    };

    consider(u0);
    for r in rows.iter() {
        let nsq = r.a.norm_sq();
        if nsq > 1e-300 {
            consider(u0 + r.a * ((r.b - r.a.dot(u0)) / nsq));
        }
    }
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let (ri, rj) = (rows[i], rows[j]);
            let det = ri.a.cross(rj.a);
            if det.abs() <= 1e-12 * ri.a.norm() * rj.a.norm() {
                continue;
            }
            let u = Vec2::new(
                (ri.b * rj.a.y - rj.b * ri.a.y) / det,
                (ri.a.x * rj.b - rj.a.x * ri.b) / det,
            );
            consider(u);
        }
    }
    best.map(|(_, u)| u).ok_or(CbfError::Infeasible)
}

// ---------------------------------------------------------------------------
// Dense identity-Hessian active-set solver for the centralized program.
// ---------------------------------------------------------------------------

/// Minimize `‖u - u0‖^2` subject to dense rows `a·u >= b` by a primal
/// active-set iteration (add most-violated row, drop rows with negative
/// multipliers). Exact for consistent problems; iteration exhaustion or a
/// dependent active set is reported as infeasible.
fn dense_identity_qp(u0: &[f64], rows: &[(Vec<f64>, f64)]) -> Result<Vec<f64>, CbfError> {
    let n = u0.len();
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let mut working: Vec<usize> = Vec::new();
    let mut u = u0.to_vec();
    let max_iter = 4 * (rows.len() + n) + 16;

    for _ in 0..max_iter {
        // Equality-constrained solve on the working set:
        // u = u0 + A_Wᵀ nu with (A_W A_Wᵀ) nu = b_W - A_W u0.
        let w = working.len();
        let mut nu = vec![0.0; w];
        if w > 0 {
            let mut gram = vec![vec![0.0; w + 1]; w];
            for (wi, &ri) in working.iter().enumerate() {
                for (wj, &rj) in working.iter().enumerate() {
                    gram[wi][wj] = dot(&rows[ri].0, &rows[rj].0);
                }
                gram[wi][w] = rows[ri].1 - dot(&rows[ri].0, u0);
            }
            nu = gauss_solve(&mut gram).ok_or(CbfError::Infeasible)?;
            for x in u.iter_mut() {
                *x = 0.0;
            }
            for (wi, &ri) in working.iter().enumerate() {
                for (k, &aik) in rows[ri].0.iter().enumerate() {
                    u[k] += nu[wi] * aik;
                }
            }
            for k in 0..n {
                u[k] += u0[k];
            }
        } else {
            u.copy_from_slice(u0);
        }

        // Most violated row outside the working set.
        let mut worst: Option<(usize, f64)> = None;
        for (ri, row) in rows.iter().enumerate() {
            if working.contains(&ri) {
                continue;
            }
            let slack = dot(&row.0, &u) - row.1;
            if slack < -1e-9 && worst.map_or(true, |(_, s)| slack < s) {
                worst = Some((ri, slack));
            }
        }
        if let Some((ri, _)) = worst {
            working.push(ri);
            continue;
        }
        // Feasible; check multiplier signs.
        if let Some((wi, _)) = nu
            .iter()
            .enumerate()
            .filter(|(_, &v)| v < -1e-9)
            .min_by(|a, b| a.1.total_cmp(b.1))
        {
            working.remove(wi);
            continue;
        }
        return Ok(u);
    }
    Err(CbfError::Infeasible)
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn gauss_solve(aug: &mut [Vec<f64>]) -> Option<Vec<f64>> {
    let n = aug.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs()))?;
        if aug[piv][col].abs() < 1e-12 {
            return None;
        }
        aug.swap(col, piv);
        for row in col + 1..n {
            let f = aug[row][col] / aug[col][col];
            for k in col..=n {
                aug[row][k] -= f * aug[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = aug[row][n];
        for k in row + 1..n {
            acc -= aug[row][k] * x[k];
        }
        x[row] = acc / aug[row][row];
    }
    Some(x)
}

// ---------------------------------------------------------------------------
// Barrier rows.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct CbfConfig {
    /// Class-K gain on the barrier decay constraints, 1/s.
    pub gamma: f64,
}

impl Default for CbfConfig {
    fn default() -> Self {
        CbfConfig { gamma: 1.0 }
    }
}

/// Assemble the distributed QP for robot `i`: nominal command `v_m t_c`,
/// one half-responsibility row per gated neighbor
/// (`h = ‖p̃‖^2 - (r_s,i + r_s,j)^2`), and a boundary row
/// (`h = d_t^2 - r_s'^2`) when the clearance is inside the avoidance radius.
pub fn qp_problem_for(
    tube: &VirtualTube,
    state: &SwarmState,
    i: usize,
    controller: &ControllerConfig,
    cbf: &CbfConfig,
) -> QpProblem {
    let me = &state.params[i];
    let p = state.positions[i];
    let proj = tube.project(p);
    let mut rows = Vec::new();
    for j in neighbor_set(state, i) {
        let rel = p - state.positions[j];
        let h = rel.norm_sq() - (me.r_s + state.params[j].r_s).powi(2);
        rows.push(HalfPlane {
            a: rel * 2.0,
            b: -0.5 * cbf.gamma * h,
        });
    }
    if proj.d_t < controller.tube_keep.r_a {
        if let Some(grad) = clearance_gradient_at(tube, p, &proj) {
            let h = proj.d_t * proj.d_t - controller.tube_keep.r_s_prime.powi(2);
            rows.push(HalfPlane {
                a: grad * (2.0 * proj.d_t),
                b: -cbf.gamma * h,
            });
        }
    }
    QpProblem {
        u_nom: proj.tangent * me.v_m,
        rows,
        v_m: me.v_m,
    }
}

fn cap(u: Vec2, v_m: f64) -> Vec2 {
    let n = u.norm();
    if n > v_m {
        u * (v_m / n)
    } else {
        u
    }
}

/// Distributed baseline command. Returns the command and an infeasibility
/// flag; contradictory rows fall back to `u = 0`.
///
/// Solved with the same general-purpose active-set iteration as the
/// centralized variant (the representative cost of a QP-based stack); the
/// specialized 2-D enumeration [`active_set_solve`] stays available as the
/// exact cross-check.
pub fn cbf_command(
    tube: &VirtualTube,
    state: &SwarmState,
    i: usize,
    controller: &ControllerConfig,
    cbf: &CbfConfig,
) -> (Vec2, bool) {
    if state.finished[i] {
        return (tube.project(state.positions[i]).tangent * state.params[i].v_m, false);
    }
    let problem = qp_problem_for(tube, state, i, controller, cbf);
    let rows: Vec<(Vec<f64>, f64)> = problem
        .rows
        .iter()
        .map(|r| (vec![r.a.x, r.a.y], r.b))
        .collect();
    match dense_identity_qp(&[problem.u_nom.x, problem.u_nom.y], &rows) {
        Ok(u) => (cap(Vec2::new(u[0], u[1]), problem.v_m), false),
        Err(CbfError::Infeasible) => (Vec2::ZERO, true),
    }
}

/// Centralized baseline: one 2M-dimensional QP over all unfinished robots
/// with full pair rows. Returns per-robot commands plus an infeasibility
/// flag (fallback `u = 0` for everyone on failure).
pub fn cbf_centralized_step(
    tube: &VirtualTube,
    state: &SwarmState,
    controller: &ControllerConfig,
    cbf: &CbfConfig,
) -> (Vec<Vec2>, bool) {
    let act: Vec<usize> = (0..state.len()).filter(|&i| !state.finished[i]).collect();
    let n = 2 * act.len();
    let mut u0 = vec![0.0; n];
    let mut tangents = vec![Vec2::ZERO; state.len()];
    for (slot, &i) in act.iter().enumerate() {
        let proj = tube.project(state.positions[i]);
        tangents[i] = proj.tangent;
        let nom = proj.tangent * state.params[i].v_m;
        u0[2 * slot] = nom.x;
        u0[2 * slot + 1] = nom.y;
    }

    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (si, &i) in act.iter().enumerate() {
        let p_i = state.positions[i];
        // Pair rows (full responsibility, one per unordered pair).
        for (sj, &j) in act.iter().enumerate().skip(si + 1) {
            let rel = p_i - state.positions[j];
            let gate = state.params[i].r_a.max(state.params[j].r_a)
                + state.params[i].r_s.max(state.params[j].r_s);
            if rel.norm() > gate {
                continue;
            }
            let h = rel.norm_sq() - (state.params[i].r_s + state.params[j].r_s).powi(2);
            let mut a = vec![0.0; n];
            a[2 * si] = 2.0 * rel.x;
            a[2 * si + 1] = 2.0 * rel.y;
            a[2 * sj] = -2.0 * rel.x;
            a[2 * sj + 1] = -2.0 * rel.y;
            rows.push((a, -cbf.gamma * h));
        }
        // Boundary row.
        let proj = tube.project(p_i);
        if proj.d_t < controller.tube_keep.r_a {
            if let Some(grad) = clearance_gradient_at(tube, p_i, &proj) {
                let h = proj.d_t * proj.d_t - controller.tube_keep.r_s_prime.powi(2);
                let mut a = vec![0.0; n];
                a[2 * si] = 2.0 * proj.d_t * grad.x;
                a[2 * si + 1] = 2.0 * proj.d_t * grad.y;
                rows.push((a, -cbf.gamma * h));
            }
        }
    }

    let mut commands = vec![Vec2::ZERO; state.len()];
    for i in 0..state.len() {
        if state.finished[i] {
            commands[i] = tube.project(state.positions[i]).tangent * state.params[i].v_m;
        }
    }
    match dense_identity_qp(&u0, &rows) {
        Ok(u) => {
            for (slot, &i) in act.iter().enumerate() {
                commands[i] = cap(
                    Vec2::new(u[2 * slot], u[2 * slot + 1]),
                    state.params[i].v_m,
                );
            }
            (commands, false)
        }
        Err(CbfError::Infeasible) => {
            let _ = tangents;
            (commands, true)
        }
    }
}

// ---------------------------------------------------------------------------
// Timing comparison.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchVariant {
    /// Modified controller, per-robot average compute per step.
    OursDistributed,
    /// Modified controller, whole-swarm compute per step.
    OursCentralizedSum,
    /// Per-robot QP, per-robot average compute per step.
    CbfDistributed,
    /// One stacked QP per step.
    CbfCentralized,
}

impl BenchVariant {
    pub const ALL: [BenchVariant; 4] = [
        BenchVariant::OursDistributed,
        BenchVariant::OursCentralizedSum,
        BenchVariant::CbfDistributed,
        BenchVariant::CbfCentralized,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BenchVariant::OursDistributed => "ours-distributed",
            BenchVariant::OursCentralizedSum => "ours-centralized-sum",
            BenchVariant::CbfDistributed => "cbf-distributed",
            BenchVariant::CbfCentralized => "cbf-centralized",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub m: usize,
    pub variant: BenchVariant,
    pub mean_step_ns: f64,
    pub p99_step_ns: u64,
    pub infeasible_steps: usize,
}

/// Crowded straight-corridor scenario of `m` robots used for the timing
/// comparison: alternating fast/slow columns keep the avoidance constraints
/// active throughout.
pub fn bench_scenario(m: usize) -> ScenarioConfig {
    // Outer rows sit inside the boundary activation band so both methods
    // exercise their tube-keeping machinery, not just the pair terms.
    let rows = [-1.9f64, -0.95, 0.0, 0.95, 1.9];
    let mut robots = Vec::new();
    let mut id = 0;
    let cols = m.div_ceil(rows.len());
    'outer: for c in 0..cols {
        for &lat in rows.iter() {
            id += 1;
            robots.push(RobotSpec {
                id,
                start: Vec2::new(1.0 + c as f64, lat),
                r_s: 0.4,
                r_a: 0.8,
                v_m: if c % 2 == 0 { 1.8 } else { 0.9 },
            });
            if robots.len() == m {
                break 'outer;
            }
        }
    }
    ScenarioConfig {
        name: format!("bench_m{m}"),
        tube: TubeSource::Waypoints {
            waypoints: vec![Vec2::ZERO, Vec2::new(20.0, 0.0)],
            half_widths: HalfWidths::Constant(2.6),
            resample_spacing: 0.1,
        },
        robots,
        controller: ControllerSpec {
            variant: crate::controller::ControllerVariant::Modified,
            k1: 1.0,
            k2: 1.0,
            k3: 1.0,
            eps_m: 1e-6,
            eps_t: 1e-6,
            eps_s: 1e-6,
            rho: None,
            eps_arrive: 0.1,
            panel_extents: None,
        },
        dt: 0.01,
        duration: 60.0,
        metric_stride: 1,
    }
}

fn advance(state: &mut SwarmState, commands: &[Vec2], tube: &VirtualTube, dt: f64, eps_arrive: f64) {
    for i in 0..state.len() {
        state.positions[i] += commands[i] * dt;
    }
    state.update_finished(tube, eps_arrive);
}

/// Measure mean per-step compute for each variant at each swarm size.
/// Distributed rows report per-robot averages, centralized rows whole-step
/// totals; infeasible QP steps fall back to zero commands and are counted.
///
/// Every variant is timed against the same reference trajectory (the state
/// sequence produced by the modified controller), so the workloads are
/// identical and only compute cost differs.
pub fn timing_benchmark(sizes: &[usize], steps: usize) -> Result<Vec<BenchRow>, SimError> {
    let cbf = CbfConfig::default();
    let mut out = Vec::new();
    for &m in sizes {
        let scenario = bench_scenario(m).build()?;
        out.extend(run_size(&scenario, steps, &cbf)?);
    }
    Ok(out)
}

/// Measure all four variants interleaved, step by step, along one shared
/// reference trajectory: machine-load phases then hit every variant
/// equally, and each step's cost is the best of three identical
/// evaluations to suppress scheduler spikes.
fn run_size(scenario: &Scenario, steps: usize, cbf: &CbfConfig) -> Result<Vec<BenchRow>, SimError> {
    const REPEATS: usize = 3;
    let tube = &scenario.tube;
    let cfg = &scenario.controller;
    let mut state = scenario.initial_state();
    let m = state.len() as u64;
    let mut samples: Vec<Vec<u64>> = (0..4).map(|_| Vec::with_capacity(steps)).collect();
    let mut infeasible = [0usize; 4];

    for step in 0..steps + 1 {
        let warmup = step == 0;
        let mut best_ours_total = u64::MAX;
        let mut best_cbf_dist = u64::MAX;
        let mut best_cbf_central = u64::MAX;
        for rep in 0..REPEATS {
            let count_flags = rep == 0 && !warmup;

            let t0 = Instant::now();
            for i in 0..state.len() {
                std::hint::black_box(crate::controller::modified_command(tube, &state, i, cfg)?);
            }
            best_ours_total = best_ours_total.min(t0.elapsed().as_nanos() as u64);

            let t0 = Instant::now();
            for i in 0..state.len() {
                let (u, inf) = cbf_command(tube, &state, i, cfg, cbf);
                std::hint::black_box(u);
                if count_flags {
                    infeasible[2] += usize::from(inf);
                }
            }
            best_cbf_dist = best_cbf_dist.min(t0.elapsed().as_nanos() as u64);

            let t0 = Instant::now();
            let (u, inf) = cbf_centralized_step(tube, &state, cfg, cbf);
            std::hint::black_box(u);
            if count_flags {
                infeasible[3] += usize::from(inf);
            }
            best_cbf_central = best_cbf_central.min(t0.elapsed().as_nanos() as u64);
        }
        if !warmup {
            samples[0].push(best_ours_total / m);
            samples[1].push(best_ours_total);
            samples[2].push(best_cbf_dist / m);
            samples[3].push(best_cbf_central);
        }

        // Advance along the shared reference trajectory.
        let mut reference = Vec::with_capacity(state.len());
        for i in 0..state.len() {
            reference.push(crate::controller::modified_command(tube, &state, i, cfg)?.v);
        }
        advance(&mut state, &reference, tube, scenario.dt, cfg.eps_arrive);
    }

    Ok(BenchVariant::ALL
        .iter()
        .enumerate()
        .map(|(vi, &variant)| {
            let mut s = samples[vi].clone();
            s.sort_unstable();
            let mean = s.iter().sum::<u64>() as f64 / s.len().max(1) as f64;
            let p99 = s[((s.len() as f64 * 0.99).ceil() as usize - 1).min(s.len() - 1)];
            BenchRow {
                m: m as usize,
                variant,
                mean_step_ns: mean,
                p99_step_ns: p99,
                infeasible_steps: infeasible[vi],
            }
        })
        .collect())
}

/// Benchmark CSV: `M,variant,mean_step_ns,p99_step_ns,infeasible_steps`.
pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("M,variant,mean_step_ns,p99_step_ns,infeasible_steps\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.0},{},{}\n",
            r.m,
            r.variant.as_str(),
            r.mean_step_ns,
            r.p99_step_ns,
            r.infeasible_steps
        ));
    }
    out
}
