//! Deterministic simulation engine: explicit Euler integration of the
//! commanded velocities, per-step safety monitors, and plot-ready CSV
//! output.
//!
//! Determinism: commands are evaluated sequentially from one state snapshot
//! per step and reduced in fixed robot order, so identical scenarios produce
//! bit-identical trajectory and metrics output. Controller wall-clock
//! timings are kept out of those artifacts.

use crate::controller::{command, lyapunov_and_derivative, ControlCommand, SwarmState};
use crate::potentials::PotentialError;
use crate::scenario::Scenario;
use crate::tube::{Longitudinal, TubeError};
use crate::vec2::Vec2;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Geometry(#[from] TubeError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("initial conditions violated:\n  {}", .0.join("\n  "))]
    InvalidInitial(Vec<String>),
    #[error("safety violated at t={t:.3}s: {detail}")]
    SafetyViolation { t: f64, detail: String },
}

/// Simulation failure carrying everything logged up to the abort.
#[derive(Debug)]
pub struct SimAbort {
    pub error: SimError,
    pub log: SimulationLog,
}

/// One sampled metrics row.
#[derive(Debug, Clone, Copy)]
pub struct MetricsRow {
    pub t: f64,
    /// Minimum pairwise distance among unfinished robots since the previous
    /// sampled row (monitors run every step, rows may be strided).
    pub min_pair: f64,
    /// Minimum boundary-polyline distance among unfinished robots since the
    /// previous sampled row.
    pub min_boundary: f64,
    pub v: f64,
    pub v_dot: f64,
    pub finished_count: usize,
}

#[derive(Debug, Clone, Default)]
pub struct SimulationLog {
    pub name: String,
    pub dt: f64,
    pub robot_ids: Vec<usize>,
    /// Times of the recorded trajectory rows (every step, plus t = 0).
    pub times: Vec<f64>,
    /// `positions[k][i]`: robot `i` at `times[k]`.
    pub positions: Vec<Vec<Vec2>>,
    /// Commands applied over `[times[k], times[k] + dt)`; the final row
    /// keeps zeros since no further step was taken.
    pub velocities: Vec<Vec<Vec2>>,
    pub finished: Vec<Vec<bool>>,
    /// Per-step safety monitors (length = number of integration steps + 1;
    /// entry 0 describes the initial state).
    pub step_min_pair: Vec<f64>,
    pub step_min_boundary: Vec<f64>,
    /// Strided metric rows (always includes the initial and final states).
    pub metrics: Vec<MetricsRow>,
    /// Controller wall time in nanoseconds, per step per robot. Not part of
    /// the deterministic CSV artifacts.
    pub cmd_ns: Vec<Vec<u64>>,
}

/// Check the initial-condition assumptions; returns human-readable
/// diagnostics (empty means pass): pairwise clearance, containment of each
/// safety area, and starting behind the finishing line.
pub fn validate_initial(scenario: &Scenario) -> Vec<String> {
    let state = scenario.initial_state();
    let mut diags = Vec::new();
    for i in 0..state.len() {
        for j in i + 1..state.len() {
            let d = state.positions[i].dist(state.positions[j]);
            let need = state.params[i].r_s + state.params[j].r_s;
            if d <= need {
                diags.push(format!(
                    "robots {} and {} start {:.3} m apart (need > {:.3})",
                    state.params[i].id, state.params[j].id, d, need
                ));
            }
        }
    }
    for i in 0..state.len() {
        let id = state.params[i].id;
        let p = state.positions[i];
        let r_s = state.params[i].r_s;
        let proj = scenario.tube.project(p);
        if proj.longitudinal != Longitudinal::Within || !proj.inside {
            diags.push(format!("robot {id} starts outside the tube"));
            continue;
        }
        if proj.l >= 0.0 {
            diags.push(format!("robot {id} starts at or past the finishing line"));
        }
        let bd = scenario.tube.boundary_distance(p);
        if bd <= r_s {
            diags.push(format!(
                "robot {id} starts {bd:.3} m from the boundary (need > {r_s:.3})"
            ));
        }
        let s_foot = proj.l + scenario.tube.length();
        if s_foot < r_s {
            diags.push(format!("robot {id}'s safety area sticks out of the tube entry"));
        }
    }
    diags
}

struct Monitor {
    min_pair: f64,
    min_boundary: f64,
}

fn observe(scenario: &Scenario, state: &SwarmState) -> Monitor {
    let mut min_pair = f64::INFINITY;
    let mut min_boundary = f64::INFINITY;
    for i in 0..state.len() {
        if state.finished[i] {
            continue;
        }
        min_boundary = min_boundary.min(scenario.tube.boundary_distance(state.positions[i]));
        for j in i + 1..state.len() {
            if state.finished[j] {
                continue;
            }
            min_pair = min_pair.min(state.positions[i].dist(state.positions[j]));
        }
    }
    Monitor {
        min_pair,
        min_boundary,
    }
}

fn violation(scenario: &Scenario, state: &SwarmState) -> Option<String> {
    for i in 0..state.len() {
        if state.finished[i] {
            continue;
        }
        let bd = scenario.tube.boundary_distance(state.positions[i]);
        if bd <= state.params[i].r_s {
            return Some(format!(
                "robot {} is {:.4} m from the tube boundary (safety radius {:.3})",
                state.params[i].id, bd, state.params[i].r_s
            ));
        }
        for j in i + 1..state.len() {
            if state.finished[j] {
                continue;
            }
            let d = state.positions[i].dist(state.positions[j]);
            let need = state.params[i].r_s + state.params[j].r_s;
            if d <= need {
                return Some(format!(
                    "robots {} and {} are {:.4} m apart (conflict at {:.3})",
                    state.params[i].id, state.params[j].id, d, need
                ));
            }
        }
    }
    None
}

/// Advance the swarm by one step: every command is computed from the same
/// state snapshot, positions integrate explicitly, and the arrival latches
/// update from the new positions. Returns the applied commands.
pub fn step(
    state: &mut SwarmState,
    tube: &crate::tube::VirtualTube,
    config: &crate::controller::ControllerConfig,
    dt: f64,
) -> Result<Vec<ControlCommand>, PotentialError> {
    step_timed(state, tube, config, dt).map(|(commands, _)| commands)
}

fn step_timed(
    state: &mut SwarmState,
    tube: &crate::tube::VirtualTube,
    config: &crate::controller::ControllerConfig,
    dt: f64,
) -> Result<(Vec<ControlCommand>, Vec<u64>), PotentialError> {
    let mut commands = Vec::with_capacity(state.len());
    let mut ns = Vec::with_capacity(state.len());
    for i in 0..state.len() {
        let t0 = Instant::now();
        commands.push(command(tube, state, i, config)?);
        ns.push(t0.elapsed().as_nanos() as u64);
    }
    for i in 0..state.len() {
        state.positions[i] += commands[i].v * dt;
    }
    state.update_finished(tube, config.eps_arrive);
    Ok((commands, ns))
}

/// Run a scenario to its duration (or until every robot has finished).
/// Aborts with the partial log on any safety violation: the claims under
/// test are exactly "no violation", so nothing is silently corrected.
pub fn run(scenario: &Scenario) -> Result<SimulationLog, Box<SimAbort>> {
    let mut log = SimulationLog {
        name: scenario.name.clone(),
        dt: scenario.dt,
        robot_ids: scenario.robots.iter().map(|r| r.id).collect(),
        ..Default::default()
    };

    let diags = validate_initial(scenario);
    if !diags.is_empty() {
        return Err(Box::new(SimAbort {
            error: SimError::InvalidInitial(diags),
            log,
        }));
    }

    let mut state = scenario.initial_state();
    state.update_finished(&scenario.tube, scenario.controller.eps_arrive);

    let record_metrics =
        |log: &mut SimulationLog, scenario: &Scenario, state: &SwarmState, t: f64, window: &Monitor| -> Result<(), PotentialError> {
            let (v, v_dot) = lyapunov_and_derivative(&scenario.tube, state, &scenario.controller)?;
            log.metrics.push(MetricsRow {
                t,
                min_pair: window.min_pair,
                min_boundary: window.min_boundary,
                v,
                v_dot,
                finished_count: state.finished.iter().filter(|&&f| f).count(),
            });
            Ok(())
        };

    let m0 = observe(scenario, &state);
    log.step_min_pair.push(m0.min_pair);
    log.step_min_boundary.push(m0.min_boundary);
    log.times.push(0.0);
    log.positions.push(state.positions.clone());
    log.finished.push(state.finished.clone());
    if let Err(e) = record_metrics(&mut log, scenario, &state, 0.0, &m0) {
        return Err(Box::new(SimAbort {
            error: e.into(),
            log,
        }));
    }
    if let Some(detail) = violation(scenario, &state) {
        return Err(Box::new(SimAbort {
            error: SimError::SafetyViolation { t: 0.0, detail },
            log,
        }));
    }

    let n_steps = (scenario.duration / scenario.dt).round() as usize;
    let mut window = Monitor {
        min_pair: f64::INFINITY,
        min_boundary: f64::INFINITY,
    };
    for k in 0..n_steps {
        let (commands, ns_row) =
            match step_timed(&mut state, &scenario.tube, &scenario.controller, scenario.dt) {
                Ok(out) => out,
                Err(e) => {
                    return Err(Box::new(SimAbort {
                        error: e.into(),
                        log,
                    }))
                }
            };
        log.cmd_ns.push(ns_row);
        log.velocities.push(commands.iter().map(|c| c.v).collect());

        let t = (k + 1) as f64 * scenario.dt;
        let m = observe(scenario, &state);
        log.step_min_pair.push(m.min_pair);
        log.step_min_boundary.push(m.min_boundary);
        window.min_pair = window.min_pair.min(m.min_pair);
        window.min_boundary = window.min_boundary.min(m.min_boundary);

        log.times.push(t);
        log.positions.push(state.positions.clone());
        log.finished.push(state.finished.clone());

        let done = state.all_finished() || k + 1 == n_steps;
        if (k + 1) % scenario.metric_stride == 0 || done {
            if let Err(e) = record_metrics(&mut log, scenario, &state, t, &window) {
                return Err(Box::new(SimAbort {
                    error: e.into(),
                    log,
                }));
            }
            window.min_pair = f64::INFINITY;
            window.min_boundary = f64::INFINITY;
        }
        if let Some(detail) = violation(scenario, &state) {
            return Err(Box::new(SimAbort {
                error: SimError::SafetyViolation { t, detail },
                log,
            }));
        }
        if done {
            break;
        }
    }
    // Velocities column for the final row: no further step was taken.
    log.velocities.push(vec![Vec2::ZERO; state.len()]);
    Ok(log)
}

/// Post-run summary of the logged series.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub min_pair: f64,
    pub min_boundary: f64,
    pub finished_count: usize,
    /// First time each robot's latch is set, by log order.
    pub finish_times: Vec<Option<f64>>,
    pub mean_cmd_ns: f64,
    pub p99_cmd_ns: u64,
    pub steps: usize,
}

pub fn summarize(log: &SimulationLog) -> RunSummary {
    let min_pair = log.step_min_pair.iter().copied().fold(f64::INFINITY, f64::min);
    let min_boundary = log
        .step_min_boundary
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let n = log.robot_ids.len();
    let mut finish_times = vec![None; n];
    for (k, flags) in log.finished.iter().enumerate() {
        for i in 0..n {
            if flags[i] && finish_times[i].is_none() {
                finish_times[i] = Some(log.times[k]);
            }
        }
    }
    let mut all_ns: Vec<u64> = log.cmd_ns.iter().flatten().copied().collect();
    all_ns.sort_unstable();
    let mean = if all_ns.is_empty() {
        0.0
    } else {
        all_ns.iter().sum::<u64>() as f64 / all_ns.len() as f64
    };
    let p99 = if all_ns.is_empty() {
        0
    } else {
        all_ns[((all_ns.len() as f64 * 0.99).ceil() as usize - 1).min(all_ns.len() - 1)]
    };
    RunSummary {
        min_pair,
        min_boundary,
        finished_count: log.finished.last().map_or(0, |f| f.iter().filter(|&&x| x).count()),
        finish_times,
        mean_cmd_ns: mean,
        p99_cmd_ns: p99,
        steps: log.times.len().saturating_sub(1),
    }
}

/// Fixed decimal formatting with nine significant digits, for reproducible
/// CSV diffs.
pub fn fmt9(x: f64) -> String {
    if x == 0.0 {
        return "0.0".into();
    }
    format!("{x:.8e}")
}

/// Trajectory CSV: `t,robot_id,x,y,vx,vy,finished`, one row per robot per
/// recorded step.
pub fn trajectory_csv(log: &SimulationLog) -> String {
    let mut out = String::from("t,robot_id,x,y,vx,vy,finished\n");
    for (k, t) in log.times.iter().enumerate() {
        for (i, &id) in log.robot_ids.iter().enumerate() {
            let p = log.positions[k][i];
            // Aborted runs have no command row for the final state.
            let v = log.velocities.get(k).map_or(Vec2::ZERO, |row| row[i]);
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                fmt9(*t),
                id,
                fmt9(p.x),
                fmt9(p.y),
                fmt9(v.x),
                fmt9(v.y),
                u8::from(log.finished[k][i]),
            ));
        }
    }
    out
}

/// Metrics CSV: `t,min_pair_dist,min_boundary_dist,V,Vdot,finished_count`.
pub fn metrics_csv(log: &SimulationLog) -> String {
    let mut out = String::from("t,min_pair_dist,min_boundary_dist,V,Vdot,finished_count\n");
    for row in &log.metrics {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt9(row.t),
            fmt9(row.min_pair),
            fmt9(row.min_boundary),
            fmt9(row.v),
            fmt9(row.v_dot),
            row.finished_count,
        ));
    }
    out
}
