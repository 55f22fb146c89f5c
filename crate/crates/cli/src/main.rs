//! Operator entry point: build and validate tubes, run scenarios to CSV,
//! regenerate the timing comparison, and run the gradient battery.
//!
//! Exit codes: 0 success, 1 safety/property violation, 2 configuration
//! error, 3 geometry error.

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use tubeswarm::cbf;
use tubeswarm::gradcheck::run_gradient_battery;
use tubeswarm::scenario::TeachInput;
use tubeswarm::sim;
use tubeswarm::{ControllerVariant, ScenarioConfig, SimError, VirtualTube};

const EXIT_VIOLATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_GEOMETRY: u8 = 3;

#[derive(Parser)]
#[command(name = "tubeswarm", version, about = "Curve virtual-tube swarm navigation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a tube file against the proper-tube condition.
    ValidateTube {
        /// Tube JSON file.
        tube: PathBuf,
    },
    /// Simulate a scenario file and write trajectory/metrics CSVs.
    Run {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Output directory for trajectory.csv and metrics.csv.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Override the integration step, s.
        #[arg(long)]
        dt: Option<f64>,
        /// Override the duration, s.
        #[arg(long)]
        duration: Option<f64>,
        /// Override the controller variant (full | modified).
        #[arg(long)]
        variant: Option<String>,
    },
    /// Build a tube from a recorded trajectory plus obstacle points.
    Teach {
        /// Teach input JSON ({trajectory, obstacles, clearance_cap, resample_spacing}).
        input: PathBuf,
        /// Output tube JSON file.
        #[arg(long, default_value = "tube.json")]
        out: PathBuf,
        /// Safety radius used to stamp the modified safety radius into the file.
        #[arg(long)]
        r_s: Option<f64>,
    },
    /// Run the calculation-speed comparison and write its CSV.
    Bench {
        /// Comma-separated swarm sizes.
        #[arg(long, default_value = "5,10,20,40,80", value_delimiter = ',')]
        sizes: Vec<usize>,
        /// Steps per variant per size.
        #[arg(long, default_value_t = 150)]
        steps: usize,
        /// Output CSV path.
        #[arg(long, default_value = "bench.csv")]
        out: PathBuf,
    },
    /// Run the gradient verification battery and print per-potential error.
    Gradcheck {
        /// Sample points per potential.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

type Failure = (u8, String);

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| (EXIT_CONFIG, format!("{}: {e}", path.display())))
}

fn write(path: &Path, content: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)
                .map_err(|e| (EXIT_CONFIG, format!("{}: {e}", dir.display())))?;
        }
    }
    std::fs::write(path, content).map_err(|e| (EXIT_CONFIG, format!("{}: {e}", path.display())))
}

fn sim_error_code(err: &SimError) -> u8 {
    match err {
        SimError::SafetyViolation { .. } => EXIT_VIOLATION,
        SimError::Geometry(_) | SimError::Potential(_) => EXIT_GEOMETRY,
        SimError::InvalidScenario(_) | SimError::InvalidInitial(_) => EXIT_CONFIG,
    }
}

fn dispatch(command: Command) -> Result<ExitCode, Failure> {
    match command {
        Command::ValidateTube { tube } => {
            let text = read(&tube)?;
            let tube = VirtualTube::from_json(&text)
                .map_err(|e| (EXIT_GEOMETRY, e.to_string()))?;
            let report = tube.validate_proper();
            if report.pass() {
                println!(
                    "PASS: {} stations, length {:.3} m, proper tube",
                    tube.n_stations(),
                    tube.length()
                );
                Ok(ExitCode::SUCCESS)
            } else {
                for (i, j) in report.intersecting_pairs.iter().take(20) {
                    eprintln!("cross sections {i} and {j} intersect inside the tube");
                }
                for k in report.curvature_violations.iter().take(20) {
                    eprintln!("curvature bound violated across the section at station {k}");
                }
                eprintln!(
                    "FAIL: {} intersecting pairs, {} curvature violations",
                    report.intersecting_pairs.len(),
                    report.curvature_violations.len()
                );
                Ok(ExitCode::from(EXIT_GEOMETRY))
            }
        }

        Command::Run {
            scenario,
            out_dir,
            dt,
            duration,
            variant,
        } => {
            let mut config = ScenarioConfig::from_json(&read(&scenario)?)
                .map_err(|e| (EXIT_CONFIG, e.to_string()))?;
            if let Some(dt) = dt {
                config.dt = dt;
            }
            if let Some(duration) = duration {
                config.duration = duration;
            }
            if let Some(variant) = variant {
                config.controller.variant = match variant.as_str() {
                    "full" => ControllerVariant::Full,
                    "modified" => ControllerVariant::Modified,
                    other => {
                        return Err((EXIT_CONFIG, format!("unknown variant '{other}'")));
                    }
                };
            }
            let built = config.build().map_err(|e| (sim_error_code(&e), e.to_string()))?;
            let (log, outcome) = match sim::run(&built) {
                Ok(log) => (log, None),
                Err(abort) => (abort.log, Some(abort.error)),
            };
            write(&out_dir.join("trajectory.csv"), &sim::trajectory_csv(&log))?;
            write(&out_dir.join("metrics.csv"), &sim::metrics_csv(&log))?;
            match outcome {
                None => {
                    let summary = sim::summarize(&log);
                    println!(
                        "{}: {} steps, {}/{} finished, min pair {:.3} m, min boundary {:.3} m",
                        built.name,
                        summary.steps,
                        summary.finished_count,
                        built.robots.len(),
                        summary.min_pair,
                        summary.min_boundary
                    );
                    Ok(ExitCode::SUCCESS)
                }
                Some(err) => {
                    eprintln!("{err}");
                    Ok(ExitCode::from(sim_error_code(&err)))
                }
            }
        }

        Command::Teach { input, out, r_s } => {
            let teach = TeachInput::from_json(&read(&input)?)
                .map_err(|e| (EXIT_CONFIG, e.to_string()))?;
            let mut tube = teach.build().map_err(|e| (EXIT_GEOMETRY, e.to_string()))?;
            if let Some(r_s) = r_s {
                let rsp = tube
                    .modified_safety_radius(r_s)
                    .map_err(|e| (EXIT_GEOMETRY, e.to_string()))?;
                tube.set_r_s_prime(rsp);
            }
            write(&out, &tube.to_json())?;
            println!(
                "wrote {} ({} stations, length {:.3} m, r_s' {:.4})",
                out.display(),
                tube.n_stations(),
                tube.length(),
                tube.r_s_prime()
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::Bench { sizes, steps, out } => {
            let rows = cbf::timing_benchmark(&sizes, steps)
                .map_err(|e| (sim_error_code(&e), e.to_string()))?;
            write(&out, &cbf::bench_csv(&rows))?;
            for row in &rows {
                println!(
                    "M={:<3} {:<22} mean {:>12.0} ns/step  p99 {:>12} ns  infeasible {}",
                    row.m,
                    row.variant.as_str(),
                    row.mean_step_ns,
                    row.p99_step_ns,
                    row.infeasible_steps
                );
            }
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }

        Command::Gradcheck { samples } => {
            let report = run_gradient_battery(samples);
            println!(
                "pairwise barrier  max relative error: {:.3e}",
                report.pair_barrier_max_rel
            );
            println!(
                "panel potential   max relative error: {:.3e}",
                report.panel_max_rel
            );
            println!(
                "unified barrier   max relative error: {:.3e}",
                report.unified_max_rel
            );
            println!("samples per potential: {}", report.samples_per_potential);
            if report.max_rel() < 1e-5 {
                println!("PASS (tolerance 1e-5)");
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("FAIL (tolerance 1e-5)");
                Ok(ExitCode::from(EXIT_VIOLATION))
            }
        }
    }
}
