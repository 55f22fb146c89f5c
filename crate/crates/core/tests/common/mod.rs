//! Shared test-side oracles, written independently of the library paths they
//! check: brute-force segment intersection, point-to-polyline distance, and
//! a deterministic RNG.

// Each integration-test binary compiles this module separately and uses a
// different subset of it.
#![allow(dead_code)]

use tubeswarm::tube::VirtualTube;
use tubeswarm::vec2::Vec2;

/// xorshift64*; deterministic, seed-free tests derive all randomness here.
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(seed.max(1))
    }

    pub fn f64(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0.wrapping_mul(0x2545F4914F6CDD1D) >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.f64()
    }
}

/// Independent closed-form segment crossing test: solves the 2x2 system for
/// the intersection parameters and demands both strictly interior.
pub fn segments_cross_strictly(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> bool {
    let (dxa, dya) = (a1.x - a0.x, a1.y - a0.y);
    let (dxb, dyb) = (b1.x - b0.x, b1.y - b0.y);
    let det = dxa * dyb - dya * dxb;
    if det.abs() < 1e-12 {
        return false;
    }
    let (rx, ry) = (b0.x - a0.x, b0.y - a0.y);
    let s = (rx * dyb - ry * dxb) / det;
    let t = (rx * dya - ry * dxa) / det;
    let eps = 1e-9;
    s > eps && s < 1.0 - eps && t > eps && t < 1.0 - eps
}

/// Brute-force pairwise cross-section intersection oracle.
pub fn brute_force_section_intersections(tube: &VirtualTube) -> Vec<(usize, usize)> {
    let sections: Vec<(Vec2, Vec2)> = tube
        .stations()
        .iter()
        .map(|st| (st.boundary_l(), st.boundary_r()))
        .collect();
    let mut pairs = Vec::new();
    for i in 0..sections.len() {
        for j in i + 1..sections.len() {
            if segments_cross_strictly(sections[i].0, sections[i].1, sections[j].0, sections[j].1)
            {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Independent point-to-polyline distance (used against the library's
/// boundary_distance and for the erosion checks).
pub fn polyline_distance(p: Vec2, chain: &[Vec2]) -> f64 {
    let mut best = f64::INFINITY;
    for w in chain.windows(2) {
        let (a, b) = (w[0], w[1]);
        let ab = b - a;
        let len2 = ab.norm_sq();
        let t = if len2 > 0.0 {
            ((p - a).dot(ab) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let q = a + ab * t;
        best = best.min(p.dist(q));
    }
    best
}

/// Distance from a point to both tube boundary polylines.
pub fn boundary_distance_oracle(tube: &VirtualTube, p: Vec2) -> f64 {
    polyline_distance(p, tube.boundary_points_l()).min(polyline_distance(p, tube.boundary_points_r()))
}

/// Uniformly sample a point strictly inside the tube (by station/lateral
/// rejection-free construction).
pub fn sample_in_tube(tube: &VirtualTube, rng: &mut Rng, lateral_margin: f64) -> Vec2 {
    let n = tube.n_stations();
    let k = 1 + (rng.f64() * (n as f64 - 2.0)) as usize;
    let st = &tube.stations()[k.min(n - 2)];
    let lam = rng.range(st.lambda_l + lateral_margin, st.lambda_r - lateral_margin);
    st.p + st.n * lam
}
