//! Curve virtual tube: an arc-length resampled centerline with per-station
//! frames and lateral extents, swept by cross sections perpendicular to the
//! centerline tangent.
//!
//! The tube is immutable after construction; every query is pure, so shared
//! references can be used freely across threads.
//!
//! Conventions fixed here and relied on everywhere else:
//! - `n` is the +90 degree rotation of the unit tangent `t` (left of travel);
//! - lateral offsets are signed along `n`: `lambda_l <= 0 <= lambda_r`;
//! - the length coordinate `l = s - total_length` is negative behind the
//!   finishing cross section, zero on it, and extrapolates positive past it;
//! - signed curvature `kappa` is positive when the centerline turns left.

use crate::vec2::{point_segment_distance, segment_intersection_params, Vec2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default bounds for the arc-length scaling factor `eta`.
pub const DEFAULT_ETA_MIN: f64 = 0.2;
pub const DEFAULT_ETA_MAX: f64 = 5.0;

/// Margin used by the proper-tube curvature test `1 - kappa * lambda > margin`.
pub const PROPER_MARGIN: f64 = 1e-6;

/// Geometric tolerance for projections and round-trip reconstruction.
pub const GEOM_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TubeError {
    #[error("centerline is self-intersecting or closed")]
    SelfIntersectingCurve,
    #[error("cross sections intersect inside the tube near station {station}")]
    ImproperTube { station: usize },
    #[error("resample spacing {spacing} is degenerate for a centerline of length {length}")]
    DegenerateSpacing { spacing: f64, length: f64 },
    #[error("trajectory needs at least two distinct points")]
    EmptyTrajectory,
    #[error("non-positive lateral extent at station {station}")]
    InvalidWidth { station: usize },
    #[error("tube half-width at station {station} does not exceed the safety radius")]
    TubeTooNarrow { station: usize },
    #[error("tube file is malformed: {0}")]
    MalformedFile(String),
}

/// One resampled centerline sample with its frame and lateral extents.
#[derive(Debug, Clone, Copy)]
pub struct Station {
    pub p: Vec2,
    /// Unit tangent, pointing in the moving direction.
    pub t: Vec2,
    /// Unit left normal (`t` rotated +90 degrees).
    pub n: Vec2,
    /// Signed curvature, 1/m.
    pub kappa: f64,
    /// Arc length from the start, m.
    pub s: f64,
    /// Length to the finishing cross section, `s - total_length`, m.
    pub l: f64,
    pub lambda_l: f64,
    pub lambda_r: f64,
}

impl Station {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.lambda_r - self.lambda_l)
    }

    pub fn middle(&self) -> Vec2 {
        self.p + self.n * (0.5 * (self.lambda_l + self.lambda_r))
    }

    pub fn boundary_l(&self) -> Vec2 {
        self.p + self.n * self.lambda_l
    }

    pub fn boundary_r(&self) -> Vec2 {
        self.p + self.n * self.lambda_r
    }
}

/// Where a query point sits along the tube axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Longitudinal {
    Within,
    BeforeStart,
    BeyondFinish,
}

/// Result of locating the unique cross section through a point.
#[derive(Debug, Clone, Copy)]
pub struct Projection {
    /// Segment index `k` (between stations `k` and `k+1`) of the foot point.
    pub seg: usize,
    /// Interpolation fraction within the segment.
    pub frac: f64,
    /// Foot point on the centerline (orthogonality residual below [`GEOM_TOL`]).
    pub foot: Vec2,
    /// Tangent and left normal at the foot point.
    pub tangent: Vec2,
    pub normal: Vec2,
    /// Signed lateral offset of the query point along `normal`.
    pub lambda: f64,
    /// Length to the finishing cross section at the foot point.
    pub l: f64,
    /// Arc-length scaling factor, clamped to the tube's eta bounds.
    pub eta: f64,
    /// Interpolated curvature and lateral extents at the foot point.
    pub kappa: f64,
    pub lambda_l: f64,
    pub lambda_r: f64,
    /// Cross-section half width and middle point.
    pub r_t: f64,
    pub middle: Vec2,
    /// Cross-section clearance `r_t - ‖y - middle‖`.
    pub d_t: f64,
    pub inside: bool,
    pub longitudinal: Longitudinal,
}

/// Half-width specification for [`VirtualTube::from_waypoints`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum HalfWidths {
    Constant(f64),
    PerWaypoint(Vec<f64>),
}

/// Diagnostics from [`VirtualTube::validate_proper`].
#[derive(Debug, Clone, Default)]
pub struct ProperReport {
    /// Station pairs whose cross sections intersect strictly inside the tube.
    pub intersecting_pairs: Vec<(usize, usize)>,
    /// Stations where `1 - kappa * lambda` drops below [`PROPER_MARGIN`]
    /// somewhere across the section.
    pub curvature_violations: Vec<usize>,
}

impl ProperReport {
    pub fn pass(&self) -> bool {
        self.intersecting_pairs.is_empty() && self.curvature_violations.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct VirtualTube {
    stations: Vec<Station>,
    spacing: f64,
    boundary_l: Vec<Vec2>,
    boundary_r: Vec<Vec2>,
    tangent_l: Vec<Vec2>,
    tangent_r: Vec<Vec2>,
    eta_min: f64,
    eta_max: f64,
    r_s_prime: f64,
}

impl VirtualTube {
    /// Build from a waypoint polyline with symmetric half-widths.
    pub fn from_waypoints(
        waypoints: &[Vec2],
        half_widths: &HalfWidths,
        resample_spacing: f64,
    ) -> Result<Self, TubeError> {
        if waypoints.len() < 2 {
            return Err(TubeError::EmptyTrajectory);
        }
        let cleaned = dedupe(waypoints);
        if cleaned.len() < 2 {
            return Err(TubeError::EmptyTrajectory);
        }
        let cum = cumulative_lengths(&cleaned);
        let total = *cum.last().unwrap();
        let width_at = |s: f64| -> (f64, f64) {
            let w = match half_widths {
                HalfWidths::Constant(w) => *w,
                HalfWidths::PerWaypoint(ws) => {
                    // Piecewise-linear in arc length over the waypoint knots.
                    let ws = if ws.len() == cleaned.len() {
                        ws.clone()
                    } else {
                        vec![ws.first().copied().unwrap_or(1.0); cleaned.len()]
                    };
                    interp_knots(&cum, &ws, s)
                }
            };
            (w, w)
        };
        if let HalfWidths::PerWaypoint(ws) = half_widths {
            if ws.len() != cleaned.len() {
                return Err(TubeError::MalformedFile(format!(
                    "expected {} per-waypoint widths, got {}",
                    cleaned.len(),
                    ws.len()
                )));
            }
        }
        let _ = total;
        Self::from_path(&cleaned, &width_at, resample_spacing)
    }

    /// Build from an arbitrary sampled path and a width profile over arc
    /// length. `width_at(s)` returns positive half-widths toward the
    /// `lambda_l` and `lambda_r` sides respectively.
    pub fn from_path(
        points: &[Vec2],
        width_at: &dyn Fn(f64) -> (f64, f64),
        resample_spacing: f64,
    ) -> Result<Self, TubeError> {
        let center = resample_centerline(points, resample_spacing)?;
        let widths: Vec<(f64, f64)> = center.iter().map(|st| width_at(st.s)).collect();
        assemble(center, widths)
    }

    /// Build from a recorded trajectory: per-station lateral extents come
    /// from the nearest obstacle on each side, capped at `clearance_cap`.
    pub fn from_trajectory(
        trajectory: &[Vec2],
        obstacles: &[Vec2],
        clearance_cap: f64,
        resample_spacing: f64,
    ) -> Result<Self, TubeError> {
        if trajectory.len() < 2 || dedupe(trajectory).len() < 2 {
            return Err(TubeError::EmptyTrajectory);
        }
        if !(clearance_cap > 0.0) {
            return Err(TubeError::InvalidWidth { station: 0 });
        }
        let center = resample_centerline(trajectory, resample_spacing)?;
        let widths: Vec<(f64, f64)> = center
            .iter()
            .map(|st| {
                let mut left = clearance_cap; // toward lambda_l (negative n side)
                let mut right = clearance_cap; // toward lambda_r (positive n side)
                for &o in obstacles {
                    let d = st.p.dist(o);
                    if (o - st.p).dot(st.n) >= 0.0 {
                        right = right.min(d);
                    } else {
                        left = left.min(d);
                    }
                }
                (left, right)
            })
            .collect();
        assemble(center, widths)
    }

    pub fn stations(&self) -> &[Station] {
        &self.stations
    }

    pub fn n_stations(&self) -> usize {
        self.stations.len()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn length(&self) -> f64 {
        self.stations.last().unwrap().s
    }

    pub fn start(&self) -> Vec2 {
        self.stations[0].p
    }

    pub fn finish(&self) -> Vec2 {
        self.stations.last().unwrap().p
    }

    pub fn eta_bounds(&self) -> (f64, f64) {
        (self.eta_min, self.eta_max)
    }

    pub fn set_eta_bounds(&mut self, eta_min: f64, eta_max: f64) {
        assert!(eta_min > 0.0 && eta_max > eta_min && eta_max.is_finite());
        self.eta_min = eta_min;
        self.eta_max = eta_max;
    }

    /// Modified safety radius stored with the tube (0 until computed).
    pub fn r_s_prime(&self) -> f64 {
        self.r_s_prime
    }

    pub fn set_r_s_prime(&mut self, value: f64) {
        self.r_s_prime = value;
    }

    /// Boundary polyline points on the `lambda_l` / `lambda_r` sides.
    pub fn boundary_points_l(&self) -> &[Vec2] {
        &self.boundary_l
    }

    pub fn boundary_points_r(&self) -> &[Vec2] {
        &self.boundary_r
    }

    /// Unit tangents of the boundary polylines (forward direction).
    pub fn boundary_tangent_l(&self, k: usize) -> Vec2 {
        self.tangent_l[k]
    }

    pub fn boundary_tangent_r(&self, k: usize) -> Vec2 {
        self.tangent_r[k]
    }

    /// Distance from `y` to the nearest point of either boundary polyline.
    pub fn boundary_distance(&self, y: Vec2) -> f64 {
        let mut best = f64::INFINITY;
        for chain in [&self.boundary_l, &self.boundary_r] {
            for w in chain.windows(2) {
                best = best.min(point_segment_distance(y, w[0], w[1]));
            }
        }
        best
    }

    /// Distance from `y` to the cross-section segment of station `k`.
    pub fn section_distance(&self, k: usize, y: Vec2) -> f64 {
        point_segment_distance(y, self.boundary_l[k], self.boundary_r[k])
    }

    /// Inclusive station index range whose cross sections lie within
    /// `radius` of `y`, or `None` when no section qualifies.
    pub fn section_window(&self, y: Vec2, radius: f64) -> Option<(usize, usize)> {
        let mut lo = None;
        let mut hi = None;
        for k in 0..self.stations.len() {
            if self.section_distance(k, y) < radius {
                if lo.is_none() {
                    lo = Some(k);
                }
                hi = Some(k);
            }
        }
        lo.map(|l| (l, hi.unwrap()))
    }

    /// Scaling factor at length coordinate `l_query` for a path parallel to
    /// the centerline at lateral offset `lambda`. Outside the tube's
    /// longitudinal range the frame extrapolates straight, so `eta = 1`.
    pub fn eta_at_l(&self, l_query: f64, lambda: f64) -> f64 {
        let n = self.stations.len();
        let (first, last) = (self.stations[0].l, self.stations[n - 1].l);
        let kappa = if l_query <= first || l_query >= last {
            0.0
        } else {
            // Uniform arc-length grid: direct index.
            let x = (l_query - first) / self.spacing;
            let k = (x.floor() as usize).min(n - 2);
            let u = (x - k as f64).clamp(0.0, 1.0);
            lerp(self.stations[k].kappa, self.stations[k + 1].kappa, u)
        };
        self.clamp_eta(kappa, lambda)
    }

    fn clamp_eta(&self, kappa: f64, lambda: f64) -> f64 {
        let denom = 1.0 - kappa * lambda;
        let raw = if denom > 1e-12 {
            1.0 / denom
        } else {
            f64::INFINITY
        };
        raw.clamp(self.eta_min, self.eta_max)
    }

    /// Locate the unique cross section through `y`.
    ///
    /// Candidate feet are roots of the orthogonality residual
    /// `(y - p)ᵀ t(p)` between adjacent stations; ties are broken by the
    /// smallest `|lambda|`, then the smallest station index. Points that
    /// project past either end are reported via `longitudinal` with the end
    /// frame extrapolated linearly.
    pub fn project(&self, y: Vec2) -> Projection {
        let n = self.stations.len();
        let mut residuals = Vec::with_capacity(n);
        for st in &self.stations {
            residuals.push((y - st.p).dot(st.t));
        }

        let mut best: Option<(usize, f64, f64)> = None; // (seg, frac, lambda)
        let mut consider = |seg: usize, frac: f64, lambda: f64| {
            let better = match best {
                None => true,
                Some((bseg, _, blam)) => {
                    lambda.abs() + 1e-12 < blam.abs()
                        || (lambda.abs() - blam.abs()).abs() <= 1e-12 && seg < bseg
                }
            };
            if better {
                best = Some((seg, frac, lambda));
            }
        };

        for k in 0..n - 1 {
            let (g0, g1) = (residuals[k], residuals[k + 1]);
            if g0 == 0.0 {
                let lam = (y - self.stations[k].p).dot(self.stations[k].n);
                consider(k, 0.0, lam);
            }
            if g0 * g1 < 0.0 {
                let u = self.solve_residual(k, y, g0, g1);
                let t = self.seg_tangent(k, u);
                let lam = (y - self.seg_point(k, u)).dot(t.perp());
                consider(k, u, lam);
            }
        }
        if residuals[n - 1] == 0.0 {
            let lam = (y - self.stations[n - 1].p).dot(self.stations[n - 1].n);
            consider(n - 2, 1.0, lam);
        }

        if let Some((seg, frac, _)) = best {
            return self.projection_at(seg, frac, y, Longitudinal::Within);
        }

        // No interior root: the point projects past one of the end caps.
        let before = residuals[0] < 0.0;
        let beyond = residuals[n - 1] > 0.0;
        if before && (!beyond || residuals[0].abs() <= residuals[n - 1].abs()) {
            self.extrapolated(0, y, Longitudinal::BeforeStart)
        } else if beyond {
            self.extrapolated(n - 1, y, Longitudinal::BeyondFinish)
        } else {
            // Residual grazes zero without a strict sign change; snap to the
            // station with the smallest residual.
            let k = (0..n)
                .min_by(|&a, &b| residuals[a].abs().total_cmp(&residuals[b].abs()))
                .unwrap();
            let seg = k.min(n - 2);
            let frac = if k == n - 1 { 1.0 } else { 0.0 };
            self.projection_at(seg, frac, y, Longitudinal::Within)
        }
    }

    fn solve_residual(&self, seg: usize, y: Vec2, g_lo: f64, g_hi: f64) -> f64 {
        let mut lo = 0.0f64;
        let mut hi = 1.0f64;
        let (mut glo, mut ghi) = (g_lo, g_hi);
        for iter in 0..100 {
            // Bisection with a secant proposal on alternate iterations; the
            // forced bisection guarantees bracket shrinkage even when the
            // residual is numerically flat near a bracket end.
            let mut mid = 0.5 * (lo + hi);
            if iter % 2 == 1 && (ghi - glo).abs() > 1e-300 {
                let s = lo - glo * (hi - lo) / (ghi - glo);
                if s > lo + 0.01 * (hi - lo) && s < hi - 0.01 * (hi - lo) {
                    mid = s;
                }
            }
            let gm = (y - self.seg_point(seg, mid)).dot(self.seg_tangent(seg, mid));
            if gm == 0.0 {
                return mid;
            }
            if gm.signum() == glo.signum() {
                lo = mid;
                glo = gm;
            } else {
                hi = mid;
                ghi = gm;
            }
            if hi - lo < 1e-16 {
                break;
            }
        }
        // Return the bracket end with the smaller residual.
        if glo.abs() <= ghi.abs() {
            lo
        } else {
            hi
        }
    }

    fn seg_point(&self, seg: usize, u: f64) -> Vec2 {
        let a = self.stations[seg].p;
        let b = self.stations[seg + 1].p;
        a + (b - a) * u
    }

    fn seg_tangent(&self, seg: usize, u: f64) -> Vec2 {
        let a = self.stations[seg].t;
        let b = self.stations[seg + 1].t;
        (a + (b - a) * u).normalized().unwrap_or(a)
    }

    fn projection_at(&self, seg: usize, frac: f64, y: Vec2, longitudinal: Longitudinal) -> Projection {
        let (s0, s1) = (&self.stations[seg], &self.stations[seg + 1]);
        let tangent = self.seg_tangent(seg, frac);
        let normal = tangent.perp();
        let foot = self.seg_point(seg, frac);
        let lambda = (y - foot).dot(normal);
        let l = lerp(s0.l, s1.l, frac);
        let kappa = lerp(s0.kappa, s1.kappa, frac);
        let lambda_l = lerp(s0.lambda_l, s1.lambda_l, frac);
        let lambda_r = lerp(s0.lambda_r, s1.lambda_r, frac);
        let r_t = 0.5 * (lambda_r - lambda_l);
        let middle = foot + normal * (0.5 * (lambda_l + lambda_r));
        let d_t = r_t - y.dist(middle);
        let inside =
            longitudinal == Longitudinal::Within && lambda >= lambda_l && lambda <= lambda_r;
        Projection {
            seg,
            frac,
            foot,
            tangent,
            normal,
            lambda,
            l,
            eta: self.clamp_eta(kappa, lambda),
            kappa,
            lambda_l,
            lambda_r,
            r_t,
            middle,
            d_t,
            inside,
            longitudinal,
        }
    }

    fn extrapolated(&self, station: usize, y: Vec2, longitudinal: Longitudinal) -> Projection {
        let st = &self.stations[station];
        let along = (y - st.p).dot(st.t);
        let foot = st.p + st.t * along;
        let lambda = (y - st.p).dot(st.n);
        let r_t = st.half_width();
        let middle = foot + st.n * (0.5 * (st.lambda_l + st.lambda_r));
        let d_t = r_t - y.dist(middle);
        Projection {
            seg: station.min(self.stations.len() - 2),
            frac: if station == 0 { 0.0 } else { 1.0 },
            foot,
            tangent: st.t,
            normal: st.n,
            lambda,
            l: st.l + along,
            // Straight extrapolation of the end frame.
            eta: 1.0f64.clamp(self.eta_min, self.eta_max),
            kappa: 0.0,
            lambda_l: st.lambda_l,
            lambda_r: st.lambda_r,
            r_t,
            middle,
            d_t,
            inside: false,
            longitudinal,
        }
    }

    /// Check Assumption-1 properness: no two cross sections may intersect
    /// strictly inside the tube, and `1 - kappa * lambda` must stay positive
    /// across every section.
    pub fn validate_proper(&self) -> ProperReport {
        let mut report = ProperReport::default();
        for (k, st) in self.stations.iter().enumerate() {
            if 1.0 - st.kappa * st.lambda_l <= PROPER_MARGIN
                || 1.0 - st.kappa * st.lambda_r <= PROPER_MARGIN
            {
                report.curvature_violations.push(k);
            }
        }
        report.intersecting_pairs = section_intersections(
            &self
                .stations
                .iter()
                .map(|st| (st.boundary_l(), st.boundary_r()))
                .collect::<Vec<_>>(),
        );
        report
    }

    /// Modified safety radius: the discrete infimum over stations of the
    /// distance from the `r_s`-eroded cross-section segment to the boundary
    /// polylines. Equals `r_s` for constant-width tubes and shrinks when the
    /// width tapers.
    pub fn modified_safety_radius(&self, r_s: f64) -> Result<f64, TubeError> {
        let mut inf = f64::INFINITY;
        for (k, st) in self.stations.iter().enumerate() {
            if st.half_width() <= r_s + 1e-12 {
                return Err(TubeError::TubeTooNarrow { station: k });
            }
            let lo = st.lambda_l + r_s;
            let hi = st.lambda_r - r_s;
            const SAMPLES: usize = 9;
            for i in 0..SAMPLES {
                let lam = lo + (hi - lo) * (i as f64) / ((SAMPLES - 1) as f64);
                let p = st.p + st.n * lam;
                inf = inf.min(self.boundary_distance(p));
            }
        }
        if !(inf > 0.0) {
            return Err(TubeError::TubeTooNarrow { station: 0 });
        }
        Ok(inf)
    }

    /// Serialize to the tube file JSON format.
    pub fn to_json(&self) -> String {
        let file = TubeFile {
            stations: self
                .stations
                .iter()
                .map(|st| StationRecord {
                    p: st.p,
                    t_c: st.t,
                    n_c: st.n,
                    kappa: st.kappa,
                    s: st.s,
                    l: st.l,
                    lambda_l: st.lambda_l,
                    lambda_r: st.lambda_r,
                })
                .collect(),
            r_s_prime: self.r_s_prime,
            eta_min: self.eta_min,
            eta_max: self.eta_max,
        };
        serde_json::to_string_pretty(&file).expect("tube serialization cannot fail")
    }

    /// Deserialize from the tube file JSON format. Stored station fields are
    /// kept verbatim so save/load round-trips are bit-exact; derived boundary
    /// data is recomputed deterministically.
    pub fn from_json(text: &str) -> Result<Self, TubeError> {
        let file: TubeFile =
            serde_json::from_str(text).map_err(|e| TubeError::MalformedFile(e.to_string()))?;
        if file.stations.len() < 2 {
            return Err(TubeError::MalformedFile("need at least two stations".into()));
        }
        let stations: Vec<Station> = file
            .stations
            .iter()
            .map(|r| Station {
                p: r.p,
                t: r.t_c,
                n: r.n_c,
                kappa: r.kappa,
                s: r.s,
                l: r.l,
                lambda_l: r.lambda_l,
                lambda_r: r.lambda_r,
            })
            .collect();
        for (k, st) in stations.iter().enumerate() {
            let finite = st.p.is_finite()
                && st.t.is_finite()
                && st.n.is_finite()
                && st.kappa.is_finite()
                && st.s.is_finite()
                && st.l.is_finite();
            if !finite {
                return Err(TubeError::MalformedFile(format!("non-finite station {k}")));
            }
            if k > 0 && st.s <= stations[k - 1].s {
                return Err(TubeError::MalformedFile(format!(
                    "arc length not increasing at station {k}"
                )));
            }
        }
        let spacing = stations[1].s - stations[0].s;
        let mut tube = VirtualTube {
            spacing,
            boundary_l: Vec::new(),
            boundary_r: Vec::new(),
            tangent_l: Vec::new(),
            tangent_r: Vec::new(),
            eta_min: file.eta_min,
            eta_max: file.eta_max,
            r_s_prime: file.r_s_prime,
            stations,
        };
        tube.rebuild_boundaries();
        Ok(tube)
    }

    fn rebuild_boundaries(&mut self) {
        self.boundary_l = self.stations.iter().map(|st| st.boundary_l()).collect();
        self.boundary_r = self.stations.iter().map(|st| st.boundary_r()).collect();
        self.tangent_l = polyline_tangents(&self.boundary_l);
        self.tangent_r = polyline_tangents(&self.boundary_r);
    }
}

#[derive(Serialize, Deserialize)]
struct StationRecord {
    p: Vec2,
    t_c: Vec2,
    n_c: Vec2,
    kappa: f64,
    s: f64,
    l: f64,
    lambda_l: f64,
    lambda_r: f64,
}

#[derive(Serialize, Deserialize)]
struct TubeFile {
    stations: Vec<StationRecord>,
    r_s_prime: f64,
    eta_min: f64,
    eta_max: f64,
}

fn lerp(a: f64, b: f64, u: f64) -> f64 {
    a + (b - a) * u
}

fn dedupe(points: &[Vec2]) -> Vec<Vec2> {
    let mut out: Vec<Vec2> = Vec::with_capacity(points.len());
    for &p in points {
        if out.last().map_or(true, |&q| p.dist(q) > 1e-12) {
            out.push(p);
        }
    }
    out
}

fn cumulative_lengths(points: &[Vec2]) -> Vec<f64> {
    let mut cum = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    cum.push(0.0);
    for w in points.windows(2) {
        acc += w[0].dist(w[1]);
        cum.push(acc);
    }
    cum
}

fn interp_knots(knots: &[f64], values: &[f64], x: f64) -> f64 {
    if x <= knots[0] {
        return values[0];
    }
    if x >= *knots.last().unwrap() {
        return *values.last().unwrap();
    }
    let i = knots.partition_point(|&k| k <= x).min(knots.len() - 1) - 1;
    let span = knots[i + 1] - knots[i];
    let u = if span > 0.0 { (x - knots[i]) / span } else { 0.0 };
    lerp(values[i], values[i + 1], u)
}

/// Centerline sample before widths are attached.
struct CenterSample {
    p: Vec2,
    t: Vec2,
    n: Vec2,
    kappa: f64,
    s: f64,
    l: f64,
}

fn resample_centerline(points: &[Vec2], spacing: f64) -> Result<Vec<CenterSample>, TubeError> {
    let pts = dedupe(points);
    if pts.len() < 2 {
        return Err(TubeError::EmptyTrajectory);
    }
    for p in &pts {
        if !p.is_finite() {
            return Err(TubeError::MalformedFile("non-finite input point".into()));
        }
    }
    let cum = cumulative_lengths(&pts);
    let total = *cum.last().unwrap();
    if !(spacing > 0.0 && spacing.is_finite()) || total < 2.0 * spacing {
        return Err(TubeError::DegenerateSpacing {
            spacing,
            length: total,
        });
    }

    let n = ((total / spacing).round() as usize).max(2) + 1;
    let step = total / (n - 1) as f64;
    let mut positions = Vec::with_capacity(n);
    let mut seg = 0usize;
    for k in 0..n {
        let target = (k as f64 * step).min(total);
        while seg + 2 < cum.len() && cum[seg + 1] < target {
            seg += 1;
        }
        let span = cum[seg + 1] - cum[seg];
        let u = if span > 0.0 { (target - cum[seg]) / span } else { 0.0 };
        positions.push(pts[seg] + (pts[seg + 1] - pts[seg]) * u);
    }

    // Chord angles, unwrapped; a chord of a constant-curvature arc points
    // along the tangent at its midpoint, which makes the frames below exact
    // for circular arcs.
    let mut phi = Vec::with_capacity(n - 1);
    for w in positions.windows(2) {
        let d = w[1] - w[0];
        let mut a = d.y.atan2(d.x);
        if let Some(&prev) = phi.last() {
            while a - prev > std::f64::consts::PI {
                a -= 2.0 * std::f64::consts::PI;
            }
            while prev - a > std::f64::consts::PI {
                a += 2.0 * std::f64::consts::PI;
            }
        }
        phi.push(a);
    }

    let theta = |k: usize| -> f64 {
        if k == 0 {
            if phi.len() >= 2 {
                phi[0] - 0.5 * (phi[1] - phi[0])
            } else {
                phi[0]
            }
        } else if k == n - 1 {
            if phi.len() >= 2 {
                phi[n - 2] + 0.5 * (phi[n - 2] - phi[n - 3])
            } else {
                phi[0]
            }
        } else {
            0.5 * (phi[k - 1] + phi[k])
        }
    };

    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let kappa = if n < 3 {
            0.0
        } else if k == 0 {
            (phi[1] - phi[0]) / step
        } else if k == n - 1 {
            (phi[n - 2] - phi[n - 3]) / step
        } else {
            (phi[k] - phi[k - 1]) / step
        };
        let ang = theta(k);
        let t = Vec2::new(ang.cos(), ang.sin());
        out.push(CenterSample {
            p: positions[k],
            t,
            n: t.perp(),
            kappa,
            s: k as f64 * step,
            l: k as f64 * step - total,
        });
    }
    // Snap the final length coordinate to exactly zero.
    out.last_mut().unwrap().l = 0.0;
    Ok(out)
}

fn assemble(center: Vec<CenterSample>, widths: Vec<(f64, f64)>) -> Result<VirtualTube, TubeError> {
    let mut stations = Vec::with_capacity(center.len());
    for (k, (c, (wl, wr))) in center.into_iter().zip(widths).enumerate() {
        if !(wl > 0.0 && wr > 0.0 && wl.is_finite() && wr.is_finite()) {
            return Err(TubeError::InvalidWidth { station: k });
        }
        stations.push(Station {
            p: c.p,
            t: c.t,
            n: c.n,
            kappa: c.kappa,
            s: c.s,
            l: c.l,
            lambda_l: -wl,
            lambda_r: wr,
        });
    }
    let spacing = stations[1].s - stations[0].s;

    // Simple and not closed.
    if stations[0].p.dist(stations.last().unwrap().p) <= spacing * 0.5 {
        return Err(TubeError::SelfIntersectingCurve);
    }
    let pts: Vec<Vec2> = stations.iter().map(|st| st.p).collect();
    if polyline_self_intersects(&pts) {
        return Err(TubeError::SelfIntersectingCurve);
    }

    let mut tube = VirtualTube {
        stations,
        spacing,
        boundary_l: Vec::new(),
        boundary_r: Vec::new(),
        tangent_l: Vec::new(),
        tangent_r: Vec::new(),
        eta_min: DEFAULT_ETA_MIN,
        eta_max: DEFAULT_ETA_MAX,
        r_s_prime: 0.0,
    };
    tube.rebuild_boundaries();

    let report = tube.validate_proper();
    if let Some(&k) = report.curvature_violations.first() {
        return Err(TubeError::ImproperTube { station: k });
    }
    if let Some(&(k, _)) = report.intersecting_pairs.first() {
        return Err(TubeError::ImproperTube { station: k });
    }
    Ok(tube)
}

fn polyline_tangents(points: &[Vec2]) -> Vec<Vec2> {
    let n = points.len();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let d = if k == 0 {
            points[1] - points[0]
        } else if k == n - 1 {
            points[n - 1] - points[n - 2]
        } else {
            points[k + 1] - points[k - 1]
        };
        out.push(d.normalized().unwrap_or(Vec2::new(1.0, 0.0)));
    }
    out
}

fn polyline_self_intersects(pts: &[Vec2]) -> bool {
    let n = pts.len();
    for i in 0..n - 1 {
        for j in i + 2..n - 1 {
            if let Some((s, t)) = segment_intersection_params(pts[i], pts[i + 1], pts[j], pts[j + 1])
            {
                let eps = 1e-9;
                if (-eps..=1.0 + eps).contains(&s) && (-eps..=1.0 + eps).contains(&t) {
                    return true;
                }
            }
        }
    }
    false
}

/// Strictly-interior pairwise intersections among cross-section segments.
/// Shared helper for both the build-time check and `validate_proper`.
fn section_intersections(sections: &[(Vec2, Vec2)]) -> Vec<(usize, usize)> {
    let n = sections.len();
    let boxes: Vec<(Vec2, Vec2)> = sections
        .iter()
        .map(|&(a, b)| {
            (
                Vec2::new(a.x.min(b.x), a.y.min(b.y)),
                Vec2::new(a.x.max(b.x), a.y.max(b.y)),
            )
        })
        .collect();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (alo, ahi) = boxes[i];
            let (blo, bhi) = boxes[j];
            if alo.x > bhi.x || blo.x > ahi.x || alo.y > bhi.y || blo.y > ahi.y {
                continue;
            }
            let (a, b) = sections[i];
            let (c, d) = sections[j];
            if let Some((s, t)) = segment_intersection_params(a, b, c, d) {
                let eps = 1e-9;
                if (eps..=1.0 - eps).contains(&s) && (eps..=1.0 - eps).contains(&t) {
                    pairs.push((i, j));
                }
            }
        }
    }
    pairs
}
