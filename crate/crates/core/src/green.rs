//! Minimal positive Green function with pole at the tip, normalized so that
//! `G ~ r^{2-n}` near the pole.
//!
//! `G(r) = (n-2) ∫_r^∞ f(s)^{1-n} ds`, so `G' = -(n-2) f^{1-n}` and
//! `G'' = (n-2)(n-1) f^{-n} f'` are exact. Only `G` itself needs quadrature,
//! and only where `f` is not a pure power law.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::models::{log_grid, ModelError, ModelManifold, PowerLaw, Profile};
use crate::par::Exec;
use crate::quadrature::{integrate, QuadError, Tolerance};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GreenError {
    #[error("model is parabolic: f^(1-n) decays like r^{tail_exponent}, not faster than 1/r")]
    Parabolic { tail_exponent: f64 },
    #[error("grid point {0} is not positive")]
    NonPositiveRadius(f64),
    #[error("grid must be strictly increasing and non-empty")]
    Grid,
    #[error("radius {r} outside the profile range [{lo}, {hi}]")]
    OutOfRange { r: f64, lo: f64, hi: f64 },
    #[error("tail start {0} is below the analytic tail threshold {1}")]
    TailStart(f64, f64),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Model(#[from] Box<ModelError>),
    #[error("cannot write profile: {0}")]
    Io(String),
}

/// `n/(n-2)` in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Rational {
    pub num: u64,
    pub den: u64,
}

impl Rational {
    pub fn alpha(n: usize) -> Self {
        let (mut a, mut b) = (n as u64, n as u64 - 2);
        while b != 0 {
            (a, b) = (b, a % b);
        }
        Rational {
            num: n as u64 / a,
            den: (n as u64 - 2) / a,
        }
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// Green function and the quantities derived from it at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GreenSample {
    pub r: f64,
    pub g: f64,
    pub gp: f64,
    pub gpp: f64,
    pub b: f64,
    pub b2: f64,
    pub b2p: f64,
    pub b2pp: f64,
    pub grad_b: f64,
    pub mu_rad: f64,
    pub mu_tan: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonParabolicityReport {
    pub varopoulos_integral_finite: bool,
    /// Decay exponent of `f^{1-n}` at infinity.
    pub tail_exponent: f64,
    pub diagnostic: Option<String>,
}

const EXPONENT_TOL: f64 = 1e-9;

fn quad_tol() -> Tolerance {
    Tolerance {
        rel: 1e-13,
        abs: 0.0,
        max_intervals: 4000,
    }
}

/// Radius beyond which `f` is an exact power law, and that power law.
fn analytic_tail(model: &ModelManifold) -> (f64, PowerLaw) {
    match model.profile() {
        Profile::Euclidean => (0.0, PowerLaw { a: 1.0, p: 1.0 }),
        Profile::Cone { c } => (0.0, PowerLaw { a: *c, p: 1.0 }),
        Profile::SmoothedCone { c, r0 } => (*r0, PowerLaw { a: *c, p: 1.0 }),
        Profile::Custom(t) => (t.domain().1, t.tail()),
    }
}

/// `∫_x^∞ (a s^p)^{1-n} ds` for `x > 0`.
fn power_tail(pl: PowerLaw, n: f64, x: f64) -> Result<f64, GreenError> {
    let e = pl.p * (1.0 - n) + 1.0;
    if e >= -EXPONENT_TOL {
        return Err(GreenError::Parabolic {
            tail_exponent: pl.p * (1.0 - n),
        });
    }
    Ok(-pl.a.powf(1.0 - n) * x.powf(e) / e)
}

/// `∫_lo^hi (a s^p)^{1-n} ds`.
fn power_segment(pl: PowerLaw, n: f64, lo: f64, hi: f64) -> f64 {
    let e = pl.p * (1.0 - n) + 1.0;
    if e.abs() < 1e-14 {
        pl.a.powf(1.0 - n) * (hi / lo).ln()
    } else {
        pl.a.powf(1.0 - n) * (hi.powf(e) - lo.powf(e)) / e
    }
}

/// `∫_lo^hi f^{1-n}` by adaptive quadrature, panel by panel between `cuts`.
fn quad_segment(model: &ModelManifold, lo: f64, hi: f64, cuts: &[f64]) -> Result<f64, GreenError> {
    if hi <= lo {
        return Ok(0.0);
    }
    let m = 1.0 - model.n() as f64;
    let mut points = vec![lo];
    points.extend(cuts.iter().copied().filter(|&c| c > lo && c < hi));
    points.push(hi);
    let mut total = 0.0;
    for w in points.windows(2) {
        total += integrate(|s| model.f(s).powf(m), w[0], w[1], quad_tol())?.value;
    }
    Ok(total)
}

/// `∫_r^∞ f^{1-n}`, integrating numerically up to `tail_start` (at least the
/// analytic threshold) and in closed form beyond it.
fn tail_integral(model: &ModelManifold, r: f64, tail_start: Option<f64>) -> Result<f64, GreenError> {
    let n = model.n() as f64;
    let (threshold, asym) = analytic_tail(model);
    let s = match tail_start {
        Some(s) if s < threshold => return Err(GreenError::TailStart(s, threshold)),
        Some(s) => s,
        None => threshold,
    };
    if r >= s {
        return power_tail(asym, n, r);
    }
    let closed = power_tail(asym, n, s)?;
    let inner = match model.profile() {
        Profile::Euclidean | Profile::Cone { .. } => quad_segment(model, r, s, &[])?,
        Profile::SmoothedCone { r0, .. } => {
            let half = 0.5 * r0;
            let flat = if r < half {
                power_segment(PowerLaw { a: 1.0, p: 1.0 }, n, r, half)
            } else {
                0.0
            };
            flat + quad_segment(model, r.max(half), s, &[*r0])?
        }
        Profile::Custom(t) => {
            let (lo, _) = t.domain();
            let head = if r < lo { power_segment(t.head(), n, r, lo) } else { 0.0 };
            head + quad_segment(model, r.max(lo), s, t.spline_knots())?
        }
    };
    Ok(inner + closed)
}

/// Evaluate the Green function and derived quantities at `r`.
pub fn green_at(model: &ModelManifold, r: f64) -> Result<GreenSample, GreenError> {
    green_at_with_tail(model, r, None)
}

/// As [`green_at`], moving the start of the closed-form tail to `tail_start`.
pub fn green_at_with_tail(model: &ModelManifold, r: f64, tail_start: Option<f64>) -> Result<GreenSample, GreenError> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(GreenError::NonPositiveRadius(r));
    }
    let n = model.n() as f64;
    let jet = model.jet(r);
    let g = match model.profile() {
        Profile::Euclidean => r.powf(2.0 - n),
        Profile::Cone { c } => c.powf(1.0 - n) * r.powf(2.0 - n),
        _ => (n - 2.0) * tail_integral(model, r, tail_start)?,
    };
    let gp = -(n - 2.0) * jet.f.powf(1.0 - n);
    let gpp = (n - 2.0) * (n - 1.0) * jet.f.powf(-n) * jet.fp;
    Ok(derive(n, r, g, gp, gpp, jet.fp / jet.f))
}

/// `b`, `b²` and their radial derivatives from `G, G', G''`.
fn derive(n: f64, r: f64, g: f64, gp: f64, gpp: f64, log_slope: f64) -> GreenSample {
    let k = 2.0 / (2.0 - n);
    let alpha = n / (n - 2.0);
    let b = g.powf(1.0 / (2.0 - n));
    let b2 = g.powf(k);
    let b2p = k * g.powf(-alpha) * gp;
    let b2pp = k * ((k - 1.0) * g.powf(k - 2.0) * gp * gp + g.powf(-alpha) * gpp);
    let grad_b = (g.powf(1.0 / (2.0 - n) - 1.0) * gp / (2.0 - n)).abs();
    GreenSample {
        r,
        g,
        gp,
        gpp,
        b,
        b2,
        b2p,
        b2pp,
        grad_b,
        mu_rad: b2pp,
        mu_tan: b2p * log_slope,
    }
}

/// Green function sampled on a grid.
#[derive(Debug, Clone)]
pub struct RadialGreenProfile {
    pub model: ModelManifold,
    pub alpha: Rational,
    pub samples: Vec<GreenSample>,
}

impl RadialGreenProfile {
    pub fn grid(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.r).collect()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.samples[0].r, self.samples[self.samples.len() - 1].r)
    }

    pub fn n(&self) -> usize {
        self.model.n()
    }

    /// Exact evaluation at any `r` inside the grid range.
    pub fn at(&self, r: f64) -> Result<GreenSample, GreenError> {
        let (lo, hi) = self.range();
        if !(r >= lo && r <= hi) {
            return Err(GreenError::OutOfRange { r, lo, hi });
        }
        green_at(&self.model, r)
    }

    /// Eigenvalues of `Hess b²`: radial (multiplicity 1), tangential (n-1).
    pub fn hess_b2_eigs(&self, r: f64) -> Result<(f64, f64), GreenError> {
        let s = self.at(r)?;
        Ok((s.mu_rad, s.mu_tan))
    }

    /// `|Δ(G^β) - β(β-1) G^{β-2} |∇G|²|`, with `Δu = u'' + (n-1)(f'/f) u'`.
    pub fn check_power_laplacian(&self, r: f64, beta: f64) -> Result<f64, GreenError> {
        let s = self.at(r)?;
        let jet = self.model.jet(r);
        let n = self.n() as f64;
        let up = beta * s.g.powf(beta - 1.0) * s.gp;
        let upp = beta * (beta - 1.0) * s.g.powf(beta - 2.0) * s.gp * s.gp + beta * s.g.powf(beta - 1.0) * s.gpp;
        let lap = upp + (n - 1.0) * jet.fp / jet.f * up;
        let rhs = beta * (beta - 1.0) * s.g.powf(beta - 2.0) * s.gp * s.gp;
        Ok((lap - rhs).abs())
    }

    /// `b2p` computed as `2 b b'`, for the chain-rule cross-check.
    pub fn b2p_via_b(&self, r: f64) -> Result<f64, GreenError> {
        let s = self.at(r)?;
        let n = self.n() as f64;
        let bp = s.g.powf(1.0 / (2.0 - n) - 1.0) * s.gp / (2.0 - n);
        Ok(2.0 * s.b * bp)
    }

    /// Write `r,G,Gp,Gpp,b,b2,grad_b,mu_rad,mu_tan`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), GreenError> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| GreenError::Io(e.to_string());
        w.write_record(["r", "G", "Gp", "Gpp", "b", "b2", "grad_b", "mu_rad", "mu_tan"])
            .map_err(io)?;
        for s in &self.samples {
            let row = [s.r, s.g, s.gp, s.gpp, s.b, s.b2, s.grad_b, s.mu_rad, s.mu_tan].map(|v| format!("{v:.16e}"));
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| GreenError::Io(e.to_string()))
    }

    pub fn export_csv(&self, path: &Path) -> Result<(), GreenError> {
        let file = std::fs::File::create(path).map_err(|e| GreenError::Io(format!("{}: {e}", path.display())))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Default grid: 512 log-spaced radii on `[1e-2, 1e2]`.
pub fn default_grid() -> Vec<f64> {
    log_grid(1e-2, 1e2, 512)
}

pub fn compute_profile(model: &ModelManifold, grid: &[f64], exec: Exec) -> Result<RadialGreenProfile, GreenError> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(GreenError::Grid);
    }
    if let Some(&r) = grid.iter().find(|&&r| !(r > 0.0)) {
        return Err(GreenError::NonPositiveRadius(r));
    }
    let np = nonparabolic_check(model, grid[0])?;
    if !np.varopoulos_integral_finite {
        return Err(GreenError::Parabolic {
            tail_exponent: np.tail_exponent,
        });
    }
    let samples = exec.try_map(grid, |&r| green_at(model, r))?;
    Ok(RadialGreenProfile {
        model: model.clone(),
        alpha: Rational::alpha(model.n()),
        samples,
    })
}

/// Varopoulos test: `∫_s^∞ t / Vol B(t) dt < ∞` iff `f^{1-n}` decays faster than `1/t`.
pub fn nonparabolic_check(model: &ModelManifold, s: f64) -> Result<NonParabolicityReport, GreenError> {
    if !(s > 0.0) {
        return Err(GreenError::NonPositiveRadius(s));
    }
    let n = model.n() as f64;
    let p = model.asymptotic_power();
    let tail_exponent = (1.0 - n) * p;
    let diagnostic = if (p - 1.0).abs() > 1e-6 {
        Some(format!(
            "profile grows like r^{p:.6} at infinity, not linearly; the Euclidean-volume-growth route to non-parabolicity does not apply"
        ))
    } else {
        None
    };
    Ok(NonParabolicityReport {
        varopoulos_integral_finite: tail_exponent < -1.0 - EXPONENT_TOL,
        tail_exponent,
        diagnostic,
    })
}
