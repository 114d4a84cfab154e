//! Geodesics on the totally geodesic 2-plane slices `dr² + f(r)² dφ²` of a
//! model, minimizing distances by shooting, and the convexity check for
//! `(C/2)s² - b²` along minimal geodesics.
//!
//! A geodesic leaving `(r₀, φ₀)` at angle `θ` from the outward radial
//! direction has Clairaut constant `L = f(r₀) sin θ`, so `f² φ' = L` and
//! `r'' = L² f'/f³`. Unit speed reads `r'² + L²/f² = 1`.

use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::green::{GreenError, RadialGreenProfile};
use crate::models::{ModelManifold, Profile};
use crate::ode::{self, Settings, State, Stop};
use crate::par::Exec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeodesicError {
    #[error("radius {0} is not positive")]
    Radius(f64),
    #[error("geodesic length {0} is not positive")]
    Length(f64),
    #[error("lambda {0} outside [0, 1]")]
    Lambda(f64),
    #[error("shooting did not bracket the target: angles [{lo:.6e}, {hi:.6e}] reach radii [{r_lo:.6e}, {r_hi:.6e}], target {target:.6e}")]
    NoBracket {
        lo: f64,
        hi: f64,
        r_lo: f64,
        r_hi: f64,
        target: f64,
    },
    #[error("integrator gave up after {0} steps")]
    StepLimit(usize),
    #[error("geodesic leaves the profile grid: {0}")]
    LeftGrid(#[from] GreenError),
    #[error("cannot write corollary table: {0}")]
    Io(String),
}

/// Point of a slice in polar coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlicePoint {
    pub r: f64,
    pub phi: f64,
}

impl SlicePoint {
    /// Normalizes `phi` into `[0, 2π)`.
    pub fn new(r: f64, phi: f64) -> Result<Self, GeodesicError> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(GeodesicError::Radius(r));
        }
        Ok(SlicePoint {
            r,
            phi: phi.rem_euclid(TAU),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicOptions {
    /// Paths reaching this radius are truncated and flagged.
    pub r_floor: f64,
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        GeodesicOptions {
            r_floor: 1e-4,
            rtol: 1e-13,
            atol: 1e-15,
            max_steps: 1_000_000,
        }
    }
}

impl GeodesicOptions {
    fn settings(&self, cap: f64) -> Settings {
        Settings {
            rtol: self.rtol,
            atol: self.atol,
            floor: self.r_floor,
            cap,
            max_steps: self.max_steps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathPoint {
    pub s: f64,
    pub r: f64,
    pub phi: f64,
    pub dr: f64,
    pub dphi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicPath {
    pub points: Vec<PathPoint>,
    /// The path reached `r_floor` before its full length.
    pub truncated: bool,
    /// Clairaut constant `f² φ'`.
    pub clairaut: f64,
    /// `max |r'² + f² φ'² - 1|` over the accepted steps.
    pub max_speed_defect: f64,
}

impl GeodesicPath {
    pub fn end(&self) -> PathPoint {
        self.points[self.points.len() - 1]
    }

    pub fn end_point(&self) -> SlicePoint {
        let e = self.end();
        SlicePoint {
            r: e.r,
            phi: e.phi.rem_euclid(TAU),
        }
    }
}

/// Integrate the unit-speed geodesic from `start` for arclength `length`.
pub fn shoot_geodesic(
    model: &ModelManifold,
    start: SlicePoint,
    angle: f64,
    length: f64,
    opts: &GeodesicOptions,
) -> Result<GeodesicPath, GeodesicError> {
    if !(start.r > 0.0) {
        return Err(GeodesicError::Radius(start.r));
    }
    if !(length > 0.0) || !length.is_finite() {
        return Err(GeodesicError::Length(length));
    }
    let l = model.f(start.r) * angle.sin();
    // state (r, φ, r')
    let rhs = |y: &State| {
        let j = model.jet(y[0]);
        [y[2], l / (j.f * j.f), l * l * j.fp / (j.f * j.f * j.f)]
    };
    let run = ode::integrate(
        &rhs,
        [start.r, start.phi, angle.cos()],
        length,
        &opts.settings(f64::INFINITY),
        true,
    );
    if run.stop == Stop::StepLimit {
        return Err(GeodesicError::StepLimit(opts.max_steps));
    }
    let mut defect: f64 = 0.0;
    let points = run
        .trace
        .iter()
        .map(|(s, y)| {
            let f = model.f(y[0]);
            let dphi = l / (f * f);
            defect = defect.max((y[2] * y[2] + f * f * dphi * dphi - 1.0).abs());
            PathPoint {
                s: *s,
                r: y[0],
                phi: y[1],
                dr: y[2],
                dphi,
            }
        })
        .collect();
    Ok(GeodesicPath {
        points,
        truncated: run.stop == Stop::Floor,
        clairaut: l,
        max_speed_defect: defect,
    })
}

/// Angular separation of `z` from `y`, wrapped to `(-π, π]`.
fn sweep(y: SlicePoint, z: SlicePoint) -> f64 {
    let d = (z.phi - y.phi).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// Distance on the unrolled wedge of a cone (`c = 1` is the plane). Beyond
/// `cΔφ ≥ π` the straight segment leaves the wedge and the path runs
/// through the tip.
pub fn unrolled_distance(c: f64, y: SlicePoint, z: SlicePoint) -> f64 {
    let a = c * sweep(y, z).abs();
    if a >= PI {
        return y.r + z.r;
    }
    let d2 = y.r * y.r + z.r * z.r - 2.0 * y.r * z.r * a.cos();
    // the cancellation form keeps nearby points accurate
    let d2_alt = (y.r - z.r).powi(2) + 4.0 * y.r * z.r * (0.5 * a).sin().powi(2);
    if d2 < 0.5 * (y.r * y.r + z.r * z.r) {
        d2_alt.sqrt()
    } else {
        d2.max(0.0).sqrt()
    }
}

fn closed_form_scale(model: &ModelManifold) -> Option<f64> {
    match model.profile() {
        Profile::Euclidean => Some(1.0),
        Profile::Cone { c } => Some(*c),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distance {
    pub d: f64,
    /// Initial angle at `y` from the outward radial direction, signed
    /// toward `z`.
    pub angle: f64,
    /// Signed angular separation `φ_z - φ_y` in `(-π, π]`.
    pub sweep: f64,
    /// The minimizer runs through the pole region.
    pub via_pole: bool,
    /// Smallest radius met along the geodesic.
    pub min_r: f64,
    /// Unrolled closed form on flat and conical slices.
    pub oracle: Option<f64>,
    pub iterations: usize,
}

enum Landing {
    Pole,
    Escaped,
    At { r: f64, s: f64, min_r: f64 },
}

/// Follow the geodesic with angle `theta ∈ (0, π)` until it has swept `a`,
/// using `φ` as the parameter: `dr/dφ = r' f²/L`, `dr'/dφ = L f'/f`,
/// `ds/dφ = f²/L`.
fn land(
    model: &ModelManifold,
    y: SlicePoint,
    theta: f64,
    a: f64,
    cap: f64,
    opts: &GeodesicOptions,
) -> Result<Landing, GeodesicError> {
    let l = model.f(y.r) * theta.sin();
    let rhs = |st: &State| {
        let j = model.jet(st[0]);
        let f2 = j.f * j.f;
        [st[1] * f2 / l, l * j.fp / j.f, f2 / l]
    };
    let run = ode::integrate(&rhs, [y.r, theta.cos(), 0.0], a, &opts.settings(cap), true);
    Ok(match run.stop {
        Stop::Completed => Landing::At {
            r: run.y[0],
            s: run.y[2],
            min_r: run.trace.iter().fold(f64::INFINITY, |m, (_, st)| m.min(st[0])),
        },
        Stop::Floor => Landing::Pole,
        Stop::Cap => Landing::Escaped,
        Stop::StepLimit => return Err(GeodesicError::StepLimit(opts.max_steps)),
    })
}

/// Shooting angle, length and closest approach to the pole of one hit.
type Hit = (f64, f64, f64);

/// Angles scanned for brackets before bisection.
const ANGLE_SCAN: usize = 24;

/// Bisect `[lo, hi]` for the angle landing on `target`; `lo_above` says which
/// side of the target the `lo` end lands on.
#[allow(clippy::too_many_arguments)]
fn bisect(
    model: &ModelManifold,
    y: SlicePoint,
    target: f64,
    a: f64,
    cap: f64,
    opts: &GeodesicOptions,
    mut lo: f64,
    mut hi: f64,
    lo_above: bool,
    key: &dyn Fn(&Landing) -> f64,
) -> Result<(Option<Hit>, usize), GeodesicError> {
    let mut best = None;
    let mut iterations = 0;
    while hi - lo > 4.0 * f64::EPSILON * hi {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let landing = land(model, y, mid, a, cap, opts)?;
        if let Landing::At { r, s, min_r } = landing {
            best = Some((mid, s, min_r));
            if (r - target).abs() <= 1e-15 * target {
                break;
            }
        }
        if (key(&landing) > target) == lo_above {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((best, iterations))
}

/// Length of the minimizing geodesic from `y` to `z` within their slice.
pub fn distance(
    model: &ModelManifold,
    y: SlicePoint,
    z: SlicePoint,
    opts: &GeodesicOptions,
) -> Result<Distance, GeodesicError> {
    for p in [y, z] {
        if !(p.r > 0.0) {
            return Err(GeodesicError::Radius(p.r));
        }
    }
    let sw = sweep(y, z);
    let a = sw.abs();
    let sign = if sw < 0.0 { -1.0 } else { 1.0 };
    let oracle = closed_form_scale(model).map(|c| unrolled_distance(c, y, z));
    if a < 1e-12 {
        return Ok(Distance {
            d: (y.r - z.r).abs(),
            angle: if z.r < y.r { PI } else { 0.0 },
            sweep: sw,
            via_pole: false,
            min_r: y.r.min(z.r),
            oracle,
            iterations: 0,
        });
    }
    let pole = Distance {
        d: y.r + z.r,
        angle: PI,
        sweep: sw,
        via_pole: true,
        min_r: 0.0,
        oracle,
        iterations: 0,
    };
    let cap = 1e3 * y.r.max(z.r);
    // order landings: escaped beyond everything, pole below everything
    let key = |l: &Landing| match l {
        Landing::Escaped => f64::INFINITY,
        Landing::Pole => f64::NEG_INFINITY,
        Landing::At { r, .. } => *r,
    };
    let mut lo = 0.5 * a.min(0.5 * PI);
    let mut iterations = 0;
    while key(&land(model, y, lo, a, cap, opts)?) <= z.r {
        lo *= 0.5;
        iterations += 1;
        if lo < 1e-300 {
            return Err(GeodesicError::NoBracket {
                lo,
                hi: PI,
                r_lo: z.r,
                r_hi: 0.0,
                target: z.r,
            });
        }
    }
    let hi = PI - 1e-9;
    let hi_landing = land(model, y, hi, a, cap, opts)?;
    // landing radius need not be monotone in the angle when f' changes sign,
    // so bisect every sign change on a scan and keep the shortest hit
    let mut thetas: Vec<f64> = (0..=ANGLE_SCAN)
        .map(|k| lo + (hi - lo) * k as f64 / ANGLE_SCAN as f64)
        .collect();
    thetas[ANGLE_SCAN] = hi;
    let mut above = vec![true];
    for &t in &thetas[1..ANGLE_SCAN] {
        above.push(key(&land(model, y, t, a, cap, opts)?) > z.r);
    }
    above.push(key(&hi_landing) > z.r);
    let mut best: Option<Hit> = None;
    for k in 0..ANGLE_SCAN {
        if above[k] == above[k + 1] {
            continue;
        }
        let (hit, steps) = bisect(model, y, z.r, a, cap, opts, thetas[k], thetas[k + 1], above[k], &key)?;
        iterations += steps;
        if let Some(h) = hit {
            if best.is_none_or(|b| h.1 < b.1) {
                best = Some(h);
            }
        }
    }
    let Some((theta, d, min_r)) = best else {
        // every smooth candidate overshoots: the pole path is the only way in
        if let Landing::At { r, .. } = hi_landing {
            return Err(GeodesicError::NoBracket {
                lo,
                hi,
                r_lo: f64::INFINITY,
                r_hi: r,
                target: z.r,
            });
        }
        return Ok(Distance { iterations, ..pole });
    };
    if pole.d < d {
        return Ok(Distance { iterations, ..pole });
    }
    Ok(Distance {
        d,
        angle: sign * theta,
        sweep: sw,
        via_pole: min_r <= opts.r_floor,
        min_r,
        oracle,
        iterations,
    })
}

/// One `λ` of the corollary check between `y` and `z`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicTriple {
    pub y: SlicePoint,
    pub z: SlicePoint,
    pub lambda: f64,
    pub w: SlicePoint,
    pub d_yz: f64,
    pub d_yw: f64,
    pub d_wz: f64,
    pub b2_y: f64,
    pub b2_z: f64,
    pub b2_w: f64,
    /// `(1-λ) b(y)² + λ b(z)² - (C/2) λ(1-λ) d(y,z)²`.
    pub rhs: f64,
    /// `b(w)² - rhs`.
    pub slack: f64,
    pub triangle_defect: f64,
    /// The minimizer passes through the pole region; not adjudicated.
    pub via_pole: bool,
    pub min_r: f64,
}

/// Point at arclength `s` along the minimizer described by `dist`.
fn point_along(
    model: &ModelManifold,
    y: SlicePoint,
    z: SlicePoint,
    dist: &Distance,
    s: f64,
    opts: &GeodesicOptions,
) -> Result<SlicePoint, GeodesicError> {
    if s <= 0.0 {
        return Ok(y);
    }
    if s >= dist.d {
        return Ok(z);
    }
    if dist.via_pole && dist.min_r == 0.0 {
        return Ok(if s <= y.r {
            SlicePoint { r: y.r - s, phi: y.phi }
        } else {
            SlicePoint { r: s - y.r, phi: z.phi }
        });
    }
    Ok(shoot_geodesic(model, y, dist.angle, s, opts)?.end_point())
}

/// Slack of the convexity inequality at each `λ`.
pub fn corollary_check(
    model: &ModelManifold,
    profile: &RadialGreenProfile,
    y: SlicePoint,
    z: SlicePoint,
    c: f64,
    lambdas: &[f64],
    opts: &GeodesicOptions,
) -> Result<Vec<GeodesicTriple>, GeodesicError> {
    if let Some(&l) = lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(GeodesicError::Lambda(l));
    }
    let dist = distance(model, y, z, opts)?;
    let d = dist.d;
    let b2_y = profile.at(y.r)?.b2;
    let b2_z = profile.at(z.r)?.b2;
    lambdas
        .iter()
        .map(|&lambda| {
            let w = point_along(model, y, z, &dist, lambda * d, opts)?;
            let b2_w = profile.at(w.r)?.b2;
            let d_wz = if lambda == 1.0 {
                0.0
            } else {
                distance(model, w, z, opts)?.d
            };
            let d_yw = lambda * d;
            let rhs = (1.0 - lambda) * b2_y + lambda * b2_z - 0.5 * c * lambda * (1.0 - lambda) * d * d;
            Ok(GeodesicTriple {
                y,
                z,
                lambda,
                w,
                d_yz: d,
                d_yw,
                d_wz,
                b2_y,
                b2_z,
                b2_w,
                rhs,
                slack: b2_w - rhs,
                triangle_defect: d_yw + d_wz - d,
                via_pole: dist.via_pole,
                min_r: dist.min_r,
            })
        })
        .collect()
}

/// [`corollary_check`] over many endpoint pairs. Pairs are independent, so
/// they fan out under `Exec::Parallel`; output order follows `pairs`.
pub fn corollary_batch(
    model: &ModelManifold,
    profile: &RadialGreenProfile,
    pairs: &[(SlicePoint, SlicePoint)],
    c: f64,
    lambdas: &[f64],
    opts: &GeodesicOptions,
    exec: Exec,
) -> Result<Vec<Vec<GeodesicTriple>>, GeodesicError> {
    exec.try_map(pairs, |&(y, z)| corollary_check(model, profile, y, z, c, lambdas, opts))
}

/// Most negative second difference of `λ ↦ (C/2) s² - b(w)²` along one
/// pair's triples, which must be sorted by an evenly spaced `λ`.
pub fn convexity_defect(triples: &[GeodesicTriple], c: f64) -> f64 {
    let v: Vec<f64> = triples.iter().map(|t| 0.5 * c * t.d_yw * t.d_yw - t.b2_w).collect();
    v.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).fold(0.0, f64::min)
}

/// Write `lambda,d_yz,b2_w,rhs,slack`.
pub fn write_corollary_csv<W: Write>(triples: &[GeodesicTriple], out: W) -> Result<(), GeodesicError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| GeodesicError::Io(e.to_string());
    w.write_record(["lambda", "d_yz", "b2_w", "rhs", "slack"]).map_err(io)?;
    for t in triples {
        let row = [t.lambda, t.d_yz, t.b2_w, t.rhs, t.slack].map(|v| format!("{v:.16e}"));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| GeodesicError::Io(e.to_string()))
}

pub fn export_corollary_csv(triples: &[GeodesicTriple], path: &Path) -> Result<(), GeodesicError> {
    let file = std::fs::File::create(path).map_err(|e| GeodesicError::Io(format!("{}: {e}", path.display())))?;
    write_corollary_csv(triples, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green::compute_profile;
    use crate::models::log_grid;

    fn pt(r: f64, phi: f64) -> SlicePoint {
        SlicePoint::new(r, phi).unwrap()
    }

    #[test]
    fn straight_line_in_the_plane() {
        let m = ModelManifold::euclidean(4).unwrap();
        let path = shoot_geodesic(&m, pt(1.0, 0.0), PI / 2.0, 1.5, &GeodesicOptions::default()).unwrap();
        let e = path.end_point();
        // from (1, 0) heading along +y
        let (x, y) = (e.r * e.phi.cos(), e.r * e.phi.sin());
        assert!((x - 1.0).abs() < 1e-9 && (y - 1.5).abs() < 1e-9, "{x} {y}");
        assert!(path.max_speed_defect < 1e-9);
        assert!(!path.truncated);
    }

    #[test]
    fn tangential_on_cone_matches_unrolling() {
        let c = 0.5;
        let m = ModelManifold::cone(4, c).unwrap();
        let len = 2f64.sqrt();
        let path = shoot_geodesic(&m, pt(1.0, 0.0), PI / 2.0, len, &GeodesicOptions::default()).unwrap();
        let e = path.end_point();
        // unrolled: start (1, 0), direction (0, 1)
        assert!((e.r - 3f64.sqrt()).abs() < 1e-9);
        assert!((c * e.phi - len.atan()).abs() < 1e-9);
        assert!(path.max_speed_defect < 1e-9);
    }

    #[test]
    fn radial_paths() {
        let m = ModelManifold::smoothed_cone(4, 0.5, 1.0).unwrap();
        let path = shoot_geodesic(&m, pt(0.3, 1.0), 0.0, 2.0, &GeodesicOptions::default()).unwrap();
        assert!((path.end().r - 2.3).abs() < 1e-12);
        let inward = shoot_geodesic(&m, pt(0.3, 1.0), PI, 2.0, &GeodesicOptions::default()).unwrap();
        assert!(inward.truncated);
        assert!((inward.end().r - 1e-4).abs() < 1e-12);
    }

    #[test]
    fn distance_examples() {
        let o = GeodesicOptions::default();
        let e = ModelManifold::euclidean(4).unwrap();
        let d = distance(&e, pt(1.0, 0.0), pt(1.0, PI / 2.0), &o).unwrap();
        assert!((d.d - 2f64.sqrt()).abs() < 1e-12, "{}", d.d);
        assert!((d.oracle.unwrap() - d.d).abs() < 1e-12);
        assert_eq!(distance(&e, pt(2.0, 0.0), pt(3.0, 0.0), &o).unwrap().d, 1.0);
        let cone = ModelManifold::cone(4, 0.5).unwrap();
        let d = distance(&cone, pt(1.0, 0.0), pt(1.0, PI), &o).unwrap();
        assert!((d.d - 2f64.sqrt()).abs() < 1e-12, "{}", d.d);
    }

    #[test]
    fn distance_is_symmetric() {
        let o = GeodesicOptions::default();
        let m = ModelManifold::smoothed_cone(4, 0.5, 1.0).unwrap();
        let (y, z) = (pt(0.4, 0.3), pt(2.5, 2.9));
        let a = distance(&m, y, z, &o).unwrap().d;
        let b = distance(&m, z, y, &o).unwrap().d;
        assert!((a - b).abs() < 1e-10, "{a} {b}");
    }

    #[test]
    fn corollary_on_flat_space() {
        let m = ModelManifold::euclidean(4).unwrap();
        let p = compute_profile(&m, &log_grid(0.01, 10.0, 8), Exec::Sequential).unwrap();
        let (y, z) = (pt(1.0, 0.0), pt(1.0, PI / 2.0));
        let o = GeodesicOptions::default();
        let t = corollary_check(&m, &p, y, z, 2.0, &[0.5], &o).unwrap();
        assert!((t[0].b2_w - 0.5).abs() < 1e-12);
        assert!((t[0].rhs - 0.5).abs() < 1e-12);
        assert!(t[0].slack.abs() < 1e-12);
        let t = corollary_check(&m, &p, y, z, 10.0, &[0.0, 0.5], &o).unwrap();
        assert_eq!(t[0].slack, 0.0);
        assert!((t[1].slack - 2.0).abs() < 1e-12);
        assert!(t[1].triangle_defect.abs() < 1e-10);
    }

    #[test]
    fn corollary_csv_columns() {
        let m = ModelManifold::euclidean(3).unwrap();
        let p = compute_profile(&m, &log_grid(0.1, 10.0, 4), Exec::Sequential).unwrap();
        let t = corollary_check(
            &m,
            &p,
            pt(1.0, 0.0),
            pt(2.0, 1.0),
            2.0,
            &[0.0, 1.0],
            &GeodesicOptions::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_corollary_csv(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("lambda,d_yz,b2_w,rhs,slack\n"));
        assert_eq!(text.lines().count(), 3);
    }
}
