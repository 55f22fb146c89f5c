//! Gradient verification battery: every analytic gradient in the potentials
//! module is compared against central finite differences of its potential at
//! deterministically sampled valid points.

use crate::potentials::{
    pair_barrier, panel_gradient, panel_potential, unified_tube_barrier, AvoidanceParams,
    PanelExtents, PanelParams, TubeKeepParams,
};
use crate::tube::VirtualTube;
use crate::vec2::Vec2;

const FD_H: f64 = 1e-6;

/// Deterministic generator (splitmix64); the battery is seed-free by design.
pub struct Sampler {
    state: u64,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler { state: seed }
    }

    pub fn next_f64(&mut self) -> f64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z = z ^ (z >> 31);
        (z >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn in_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    pub pair_barrier_max_rel: f64,
    pub panel_max_rel: f64,
    pub unified_max_rel: f64,
    pub samples_per_potential: usize,
}

impl GradCheckReport {
    pub fn max_rel(&self) -> f64 {
        self.pair_barrier_max_rel
            .max(self.panel_max_rel)
            .max(self.unified_max_rel)
    }
}

fn rel_err(fd: Vec2, analytic: Vec2) -> f64 {
    (fd - analytic).norm() / fd.norm().max(analytic.norm()).max(1e-6)
}

/// Run the battery with `samples` points per potential. Sampling avoids the
/// C^1 breakpoints of the bump and smooth-saturation pieces (finite
/// differences straddling a curvature jump are meaningless there).
pub fn run_gradient_battery(samples: usize) -> GradCheckReport {
    let mut rng = Sampler::new(0x5EED_0001);

    // Pairwise barrier via its radial factor b.
    let av = AvoidanceParams::new(1.0, 1e-6, 1e-6, 0.4, 0.8).unwrap();
    let mut pair_max: f64 = 0.0;
    let mut taken = 0;
    while taken < samples {
        let x = rng.in_range(0.45, 1.25);
        if (x - 0.8).abs() < 5e-3 || (x - 1.2).abs() < 5e-3 {
            continue;
        }
        taken += 1;
        let ang = rng.in_range(0.0, std::f64::consts::TAU);
        let p_j = Vec2::new(rng.in_range(-1.0, 1.0), rng.in_range(-1.0, 1.0));
        let p_i = p_j + Vec2::new(ang.cos(), ang.sin()) * x;
        let pb = pair_barrier(p_i, p_j, &av).unwrap();
        let analytic = (p_i - p_j) * (-pb.b);
        let v = |q: Vec2| pair_barrier(q, p_j, &av).unwrap().v_m;
        let fd = central_fd(v, p_i);
        pair_max = pair_max.max(rel_err(fd, analytic));
    }

    // Panel potential gradient.
    let mut panel_max: f64 = 0.0;
    taken = 0;
    while taken < samples {
        let ang = rng.in_range(0.0, std::f64::consts::TAU);
        let panel = PanelParams::new(
            Vec2::new(rng.in_range(-1.0, 1.0), rng.in_range(-1.0, 1.0)),
            Vec2::new(ang.cos(), ang.sin()),
            rng.in_range(-3.0, -0.2),
            rng.in_range(0.2, 3.0),
            rng.in_range(0.0, 0.4),
        );
        let p = Vec2::new(rng.in_range(-4.0, 4.0), rng.in_range(-4.0, 4.0));
        if panel_potential(p, &panel).is_err()
            || panel_potential(p + Vec2::new(2.0 * FD_H, 2.0 * FD_H), &panel).is_err()
        {
            continue;
        }
        // Keep clear of the log singularity so finite differences converge.
        let lo = panel.g1.min(panel.g2);
        let hi = panel.g1.max(panel.g2);
        let dist = crate::vec2::point_segment_distance(p, panel.a + panel.t * lo, panel.a + panel.t * hi);
        if dist < panel.d + 0.05 {
            continue;
        }
        taken += 1;
        let analytic = panel_gradient(p, &panel).unwrap();
        let v = |q: Vec2| panel_potential(q, &panel).unwrap();
        let fd = central_fd(v, p);
        panel_max = panel_max.max(rel_err(fd, analytic));
    }

    // Unified tube barrier gradient on a gently curved tube.
    let pts: Vec<Vec2> = (0..=800)
        .map(|i| {
            let x = 16.0 * (i as f64) / 800.0;
            Vec2::new(x, 0.8 * (0.5 * x).sin())
        })
        .collect();
    let tube = VirtualTube::from_path(&pts, &|_| (2.0, 2.0), 0.05).unwrap();
    let tk = TubeKeepParams::new(1.0, 1e-6, 1e-6, 0.4, 0.8, 0.4, PanelExtents::default_for(0.8)).unwrap();
    let mut unified_max: f64 = 0.0;
    taken = 0;
    while taken < samples {
        let k = rng.in_range(0.1, 0.9) * (tube.n_stations() - 1) as f64;
        let st = &tube.stations()[k as usize];
        // Clearance strictly inside the active band, away from its edges.
        let d_t = rng.in_range(0.43, 0.77);
        let side = if rng.next_f64() < 0.5 { -1.0 } else { 1.0 };
        let p = st.p + st.n * (side * (2.0 - d_t));
        let proj = tube.project(p);
        if proj.d_t < 0.42 || proj.d_t > 0.78 {
            continue;
        }
        taken += 1;
        let ub = unified_tube_barrier(&tube, p, &tk).unwrap();
        let v = |q: Vec2| unified_tube_barrier(&tube, q, &tk).unwrap().v_t;
        let fd = central_fd(v, p);
        unified_max = unified_max.max(rel_err(fd, ub.c));
    }

    GradCheckReport {
        pair_barrier_max_rel: pair_max,
        panel_max_rel: panel_max,
        unified_max_rel: unified_max,
        samples_per_potential: samples,
    }
}

fn central_fd(f: impl Fn(Vec2) -> f64, p: Vec2) -> Vec2 {
    Vec2::new(
        (f(p + Vec2::new(FD_H, 0.0)) - f(p - Vec2::new(FD_H, 0.0))) / (2.0 * FD_H),
        (f(p + Vec2::new(0.0, FD_H)) - f(p - Vec2::new(0.0, FD_H))) / (2.0 * FD_H),
    )
}
