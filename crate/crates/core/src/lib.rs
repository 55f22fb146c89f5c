//! Swarm navigation through curve virtual tubes.
//!
//! A *curve virtual tube* is an obstacle-free corridor swept by cross
//! sections perpendicular to a planar centerline. This crate provides:
//!
//! - [`tube`]: tube construction (waypoints, analytic paths, or recorded
//!   trajectories widened up to obstacles), validation of the proper-tube
//!   condition, cross-section projection queries, and the tube JSON format;
//! - [`fields`]: saturation, bump, and smooth-saturation primitives;
//! - [`potentials`]: the line-integral Lyapunov function, pairwise
//!   avoidance barrier, boundary panel potentials, and the unified
//!   tube-keeping barrier, all with analytic gradients;
//! - [`controller`]: the distributed swarm controllers (full gradient form
//!   and the constant-speed modified form) and the Lyapunov monitor;
//! - [`sim`]: a deterministic explicit-Euler simulator with per-step safety
//!   monitors and CSV output;
//! - [`cbf`]: a barrier-constrained QP baseline and the calculation-speed
//!   comparison harness;
//! - [`scenario`]: scenario/teach file formats and the built-in scenarios;
//! - [`gradcheck`]: the finite-difference gradient verification battery.

pub mod cbf;
pub mod controller;
pub mod fields;
pub mod gradcheck;
pub mod potentials;
pub mod quad;
pub mod scenario;
pub mod sim;
pub mod tube;
pub mod vec2;

pub use controller::{ControlCommand, ControllerConfig, ControllerVariant, RobotParams, SwarmState};
pub use scenario::{Scenario, ScenarioConfig, TeachInput};
pub use sim::{run, summarize, SimError, SimulationLog};
pub use tube::{Projection, TubeError, VirtualTube};
pub use vec2::Vec2;
