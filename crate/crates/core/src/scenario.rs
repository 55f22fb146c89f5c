//! Scenario files: tube sources, robot rosters, and controller settings,
//! plus the built-in scenario constructors the shipped JSON files are
//! generated from.

use crate::controller::{ControllerConfig, ControllerVariant, RobotParams, SwarmState};
use crate::potentials::{AvoidanceParams, PanelExtents, TubeKeepParams};
use crate::sim::SimError;
use crate::tube::{HalfWidths, VirtualTube};
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};

/// How the tube geometry is specified in a scenario file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TubeSource {
    Waypoints {
        waypoints: Vec<Vec2>,
        half_widths: HalfWidths,
        resample_spacing: f64,
    },
    /// Sinusoidal centerline `y = amplitude * sin(2 pi x / period + phase)`
    /// for `x` in `[0, length]`, with a sinusoidal half-width profile over
    /// arc length.
    Sine {
        length: f64,
        amplitude: f64,
        period: f64,
        #[serde(default)]
        phase: f64,
        width_base: f64,
        #[serde(default)]
        width_amplitude: f64,
        #[serde(default = "default_width_period")]
        width_period: f64,
        #[serde(default)]
        width_phase: f64,
        resample_spacing: f64,
    },
    /// Teach-and-repeat source: a recorded trajectory widened up to the
    /// nearest obstacle on each side (or the clearance cap).
    Trajectory {
        trajectory: Vec<Vec2>,
        obstacles: Vec<Vec2>,
        clearance_cap: f64,
        resample_spacing: f64,
    },
}

fn default_width_period() -> f64 {
    1.0
}

impl TubeSource {
    pub fn build(&self) -> Result<VirtualTube, crate::tube::TubeError> {
        match self {
            TubeSource::Waypoints {
                waypoints,
                half_widths,
                resample_spacing,
            } => VirtualTube::from_waypoints(waypoints, half_widths, *resample_spacing),
            TubeSource::Sine {
                length,
                amplitude,
                period,
                phase,
                width_base,
                width_amplitude,
                width_period,
                width_phase,
                resample_spacing,
            } => {
                let n = 4000;
                let pts: Vec<Vec2> = (0..=n)
                    .map(|i| {
                        let x = length * (i as f64) / (n as f64);
                        Vec2::new(x, sine_y(x, *amplitude, *period, *phase))
                    })
                    .collect();
                let (wa, wp, wph, wb) = (*width_amplitude, *width_period, *width_phase, *width_base);
                let width_at = move |s: f64| {
                    let w = wb + wa * (2.0 * std::f64::consts::PI * s / wp + wph).sin();
                    (w, w)
                };
                VirtualTube::from_path(&pts, &width_at, *resample_spacing)
            }
            TubeSource::Trajectory {
                trajectory,
                obstacles,
                clearance_cap,
                resample_spacing,
            } => VirtualTube::from_trajectory(trajectory, obstacles, *clearance_cap, *resample_spacing),
        }
    }
}

fn sine_y(x: f64, amplitude: f64, period: f64, phase: f64) -> f64 {
    amplitude * (2.0 * std::f64::consts::PI * x / period + phase).sin()
}

/// Point and left normal of the sine centerline, used to place robots in
/// tube-frame coordinates when constructing scenarios.
fn sine_frame(x: f64, amplitude: f64, period: f64, phase: f64) -> (Vec2, Vec2) {
    let w = 2.0 * std::f64::consts::PI / period;
    let p = Vec2::new(x, sine_y(x, amplitude, period, phase));
    let tangent = Vec2::new(1.0, amplitude * w * (w * x + phase).cos())
        .normalized()
        .unwrap();
    (p, tangent.perp())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct RobotSpec {
    pub id: usize,
    pub start: Vec2,
    pub r_s: f64,
    pub r_a: f64,
    pub v_m: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ControllerSpec {
    pub variant: ControllerVariant,
    #[serde(default = "default_gain")]
    pub k1: f64,
    #[serde(default = "default_gain")]
    pub k2: f64,
    #[serde(default = "default_gain")]
    pub k3: f64,
    #[serde(default = "default_eps")]
    pub eps_m: f64,
    #[serde(default = "default_eps")]
    pub eps_t: f64,
    #[serde(default = "default_eps")]
    pub eps_s: f64,
    /// Forward shift of the modified finishing line; defaults to
    /// `v_m_max / (k1 eta_min)` so the shifted line term saturates exactly.
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default = "default_eps_arrive")]
    pub eps_arrive: f64,
    #[serde(default)]
    pub panel_extents: Option<PanelExtents>,
}

fn default_gain() -> f64 {
    1.0
}

fn default_eps() -> f64 {
    1e-6
}

fn default_eps_arrive() -> f64 {
    0.1
}

fn default_stride() -> usize {
    1
}

/// A complete scenario file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub tube: TubeSource,
    pub robots: Vec<RobotSpec>,
    pub controller: ControllerSpec,
    pub dt: f64,
    pub duration: f64,
    #[serde(default = "default_stride")]
    pub metric_stride: usize,
}

/// A built scenario, ready to simulate.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub tube: VirtualTube,
    pub robots: Vec<RobotParams>,
    pub starts: Vec<Vec2>,
    pub controller: ControllerConfig,
    pub dt: f64,
    pub duration: f64,
    pub metric_stride: usize,
}

impl Scenario {
    pub fn initial_state(&self) -> SwarmState {
        SwarmState::new(self.robots.clone(), self.starts.clone())
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::InvalidScenario(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization cannot fail")
    }

    pub fn build(&self) -> Result<Scenario, SimError> {
        if self.robots.is_empty() {
            return Err(SimError::InvalidScenario("no robots".into()));
        }
        if !(self.dt > 0.0 && self.duration >= 0.0) {
            return Err(SimError::InvalidScenario("need dt > 0 and duration >= 0".into()));
        }
        if self.metric_stride == 0 {
            return Err(SimError::InvalidScenario("metric_stride must be >= 1".into()));
        }
        let mut ids = std::collections::BTreeSet::new();
        for r in &self.robots {
            if !ids.insert(r.id) {
                return Err(SimError::InvalidScenario(format!("duplicate robot id {}", r.id)));
            }
        }

        let mut tube = self.tube.build()?;
        let robots: Vec<RobotParams> = self
            .robots
            .iter()
            .map(|r| RobotParams {
                id: r.id,
                r_s: r.r_s,
                r_a: r.r_a,
                v_m: r.v_m,
            })
            .collect();
        for r in &robots {
            r.validate().map_err(SimError::InvalidScenario)?;
        }

        let r_s = robots.iter().map(|r| r.r_s).fold(0.0, f64::max);
        let r_a = robots.iter().map(|r| r.r_a).fold(0.0, f64::max);
        let v_m_max = robots.iter().map(|r| r.v_m).fold(0.0, f64::max);

        let r_s_prime = tube.modified_safety_radius(r_s)?;
        tube.set_r_s_prime(r_s_prime);

        let c = &self.controller;
        let avoidance = AvoidanceParams::new(c.k2, c.eps_m, c.eps_s, r_s, r_a)
            .map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        let extents = c.panel_extents.unwrap_or_else(|| PanelExtents::default_for(r_a));
        let tube_keep = TubeKeepParams::new(c.k3, c.eps_t, c.eps_s, r_s_prime, r_a, r_s, extents)
            .map_err(|e| SimError::InvalidScenario(e.to_string()))?;

        let (eta_min, _) = tube.eta_bounds();
        let rho = c.rho.unwrap_or(v_m_max / (c.k1 * eta_min));
        let controller = ControllerConfig {
            variant: c.variant,
            k1: c.k1,
            avoidance,
            tube_keep,
            rho,
            eps_arrive: c.eps_arrive,
        };
        controller
            .validate_rho(v_m_max, eta_min)
            .map_err(SimError::InvalidScenario)?;

        Ok(Scenario {
            name: self.name.clone(),
            tube,
            robots,
            starts: self.robots.iter().map(|r| r.start).collect(),
            controller,
            dt: self.dt,
            duration: self.duration,
            metric_stride: self.metric_stride,
        })
    }
}

/// Input file for the teach step: a recorded trajectory plus the obstacle
/// points the tube must clear.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TeachInput {
    pub trajectory: Vec<Vec2>,
    pub obstacles: Vec<Vec2>,
    pub clearance_cap: f64,
    pub resample_spacing: f64,
}

impl TeachInput {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::InvalidScenario(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("teach input serialization cannot fail")
    }

    pub fn build(&self) -> Result<VirtualTube, crate::tube::TubeError> {
        VirtualTube::from_trajectory(
            &self.trajectory,
            &self.obstacles,
            self.clearance_cap,
            self.resample_spacing,
        )
    }
}

// ---------------------------------------------------------------------------
// Built-in scenarios. The JSON files under scenarios/ are generated from
// these constructors so that file-driven runs and in-code tests agree.
// ---------------------------------------------------------------------------

/// Twenty robots in four speed groups pass a sinusoidal, varying-width tube
/// under the modified controller.
pub fn passage_m20() -> ScenarioConfig {
    // Phase puts the start grid near an inflection of the sine: the frame
    // normals rotate little there, so lateral grid columns stay separated.
    // Curvature and width variation are kept moderate so the boundary
    // tangents rotate slowly compared with the panels' forward tilt (the
    // per-panel directional constraints must hold throughout the tube).
    let (amplitude, period, phase) = (1.0, 17.0, -2.0 * std::f64::consts::PI * 3.0 / 17.0);
    let columns = [
        (1.2, 3.0), // rearmost column is the fastest group
        (2.5, 2.3),
        (3.8, 1.6),
        (5.1, 0.9),
    ];
    let rows = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let mut robots = Vec::new();
    for (ci, &(x, v_m)) in columns.iter().enumerate() {
        let (p, n) = sine_frame(x, amplitude, period, phase);
        for (ri, &lat) in rows.iter().enumerate() {
            robots.push(RobotSpec {
                id: ci * rows.len() + ri + 1,
                start: p + n * lat,
                r_s: 0.4,
                r_a: 0.8,
                v_m,
            });
        }
    }
    ScenarioConfig {
        name: "passage_m20".into(),
        tube: TubeSource::Sine {
            length: 22.0,
            amplitude,
            period,
            phase,
            width_base: 3.0,
            width_amplitude: 0.4,
            width_period: 18.0,
            width_phase: 1.0,
            resample_spacing: 0.05,
        },
        robots,
        controller: ControllerSpec {
            variant: ControllerVariant::Modified,
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
        duration: 25.0,
        metric_stride: 10,
    }
}

/// Six slow robots in a lab-sized tube, modified controller.
pub fn lab_m6() -> ScenarioConfig {
    let (amplitude, period, phase) = (0.5, 7.0, -2.0 * std::f64::consts::PI * 0.75 / 7.0);
    let columns = [0.5, 1.05];
    let rows = [-0.5, 0.0, 0.5];
    let mut robots = Vec::new();
    for (ci, &x) in columns.iter().enumerate() {
        let (p, n) = sine_frame(x, amplitude, period, phase);
        for (ri, &lat) in rows.iter().enumerate() {
            robots.push(RobotSpec {
                id: ci * rows.len() + ri + 1,
                start: p + n * lat,
                r_s: 0.2,
                r_a: 0.4,
                v_m: 0.5,
            });
        }
    }
    ScenarioConfig {
        name: "lab_m6".into(),
        tube: TubeSource::Sine {
            length: 7.0,
            amplitude,
            period,
            phase,
            width_base: 0.9,
            width_amplitude: 0.1,
            width_period: 4.0,
            width_phase: 0.5,
            resample_spacing: 0.05,
        },
        robots,
        controller: ControllerSpec {
            variant: ControllerVariant::Modified,
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
        duration: 22.0,
        metric_stride: 5,
    }
}

/// Three robots in a straight corridor under the full (gradient) controller;
/// used for Lyapunov-descent monitoring.
///
/// The corridor is wide and the tube-keeping gain tiny: the logged composite
/// function then tracks the line-approaching and avoidance terms, whose
/// descent is the property under test, without the station-grained jitter of
/// the panel sums (the sum over cross sections within the avoidance radius
/// changes its support as robots advance, which is invisible to the gradient
/// and scales with k3).
pub fn corridor_full_m3() -> ScenarioConfig {
    let robot = |id, start| RobotSpec {
        id,
        start,
        r_s: 0.4,
        r_a: 0.8,
        v_m: 1.0,
    };
    ScenarioConfig {
        name: "corridor_full_m3".into(),
        tube: TubeSource::Waypoints {
            waypoints: vec![Vec2::ZERO, Vec2::new(14.0, 0.0)],
            half_widths: HalfWidths::Constant(6.0),
            resample_spacing: 0.05,
        },
        robots: vec![
            robot(1, Vec2::new(1.0, -0.55)),
            robot(2, Vec2::new(1.3, 0.55)),
            robot(3, Vec2::new(2.2, 0.0)),
        ],
        controller: ControllerSpec {
            variant: ControllerVariant::Full,
            k1: 0.8,
            k2: 1.0,
            k3: 1e-5,
            eps_m: 1e-6,
            eps_t: 1e-6,
            eps_s: 1e-6,
            rho: None,
            eps_arrive: 0.1,
            panel_extents: None,
        },
        dt: 0.005,
        duration: 25.0,
        metric_stride: 1,
    }
}

/// Teach-and-repeat input: a smooth waypoint loop flown once, with an
/// obstacle ring around it. Passing this to the teach step yields a proper
/// tube that contains the repeat swarm's eight start positions.
pub fn teach_corridor_input() -> TeachInput {
    // Dense control polygon through the four loop waypoints; widely spaced
    // controls would give the spline corner curvatures the tube widths
    // cannot sustain.
    let control = [
        Vec2::new(17.0, 0.0),
        Vec2::new(20.0, 0.0),
        Vec2::new(23.5, -1.8),
        Vec2::new(27.5, -4.7),
        Vec2::new(32.0, -8.0),
        Vec2::new(36.5, -6.5),
        Vec2::new(39.8, -3.3),
        Vec2::new(41.0, 0.0),
        Vec2::new(39.0, 3.6),
        Vec2::new(35.2, 5.8),
        Vec2::new(31.0, 7.0),
    ];
    let trajectory = catmull_rom(&control, 30);

    // Synthetic obstacle ring: offset points on both sides of the flown
    // path, with a slowly varying clearance.
    let mut obstacles = Vec::new();
    for i in (0..trajectory.len().saturating_sub(1)).step_by(4) {
        let p = trajectory[i];
        let q = trajectory[(i + 1).min(trajectory.len() - 1)];
        if let Some(t) = (q - p).normalized() {
            let n = t.perp();
            let clear = 2.5 + 0.25 * (0.21 * p.x).sin();
            obstacles.push(p + n * clear);
            obstacles.push(p - n * clear);
        }
    }
    TeachInput {
        trajectory,
        obstacles,
        clearance_cap: 2.2,
        resample_spacing: 0.2,
    }
}

/// Start positions of the repeat swarm for the teach-and-repeat corridor.
pub fn teach_repeat_starts() -> Vec<Vec2> {
    vec![
        Vec2::new(18.0, 0.5),
        Vec2::new(18.0, -0.5),
        Vec2::new(19.0, 0.2),
        Vec2::new(19.0, -0.8),
        Vec2::new(20.0, -0.5),
        Vec2::new(20.0, -1.5),
        Vec2::new(21.0, -1.0),
        Vec2::new(21.0, -2.0),
    ]
}

/// Uniform Catmull-Rom sampling through the control points (endpoint ghosts
/// by reflection, which avoids the lateral bulge duplication causes),
/// `per_segment` samples per span.
fn catmull_rom(control: &[Vec2], per_segment: usize) -> Vec<Vec2> {
    assert!(control.len() >= 2);
    let n = control.len() as isize;
    let mut pts = Vec::new();
    let get = |i: isize| -> Vec2 {
        if i < 0 {
            control[0] * 2.0 - control[1]
        } else if i >= n {
            control[(n - 1) as usize] * 2.0 - control[(n - 2) as usize]
        } else {
            control[i as usize]
        }
    };
    for seg in 0..control.len() - 1 {
        let (p0, p1, p2, p3) = (
            get(seg as isize - 1),
            get(seg as isize),
            get(seg as isize + 1),
            get(seg as isize + 2),
        );
        let last_seg = seg == control.len() - 2;
        let steps = if last_seg { per_segment + 1 } else { per_segment };
        for k in 0..steps {
            let t = (k as f64) / (per_segment as f64);
            let t2 = t * t;
            let t3 = t2 * t;
            let x = 0.5
                * ((2.0 * p1.x)
                    + (-p0.x + p2.x) * t
                    + (2.0 * p0.x - 5.0 * p1.x + 4.0 * p2.x - p3.x) * t2
                    + (-p0.x + 3.0 * p1.x - 3.0 * p2.x + p3.x) * t3);
            let y = 0.5
                * ((2.0 * p1.y)
                    + (-p0.y + p2.y) * t
                    + (2.0 * p0.y - 5.0 * p1.y + 4.0 * p2.y - p3.y) * t2
                    + (-p0.y + 3.0 * p1.y - 3.0 * p2.y + p3.y) * t3);
            pts.push(Vec2::new(x, y));
        }
    }
    pts
}
