//! Rotationally symmetric model manifolds `dr² + f(r)²·g_{S^{n-1}}`.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::fd_oracle::{self, OracleError};
use crate::green::{self, GreenError};
use crate::quadrature::{integrate, QuadError, Tolerance};
use crate::spline::{CubicSpline, Jet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dimension n = {0} is below 3")]
    Dimension(usize),
    #[error("cone aperture c = {0} is outside (0, 1]")]
    Aperture(f64),
    #[error("smoothing radius r0 = {0} must be positive and finite")]
    SmoothingRadius(f64),
    #[error("custom table: {0}")]
    Table(String),
    #[error("radius {0} must be positive")]
    Radius(f64),
    #[error("invalid radius range [{0}, {1}]")]
    Range(f64, f64),
    #[error("unknown model id `{0}` (expected euclidean, cone:<c>, smoothed-cone:<c>:<r0> or custom:<path>)")]
    UnknownId(String),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Green(#[from] Box<GreenError>),
}

/// `f(r) = a·r^p`, used to extend custom tables past their ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw {
    pub a: f64,
    pub p: f64,
}

impl PowerLaw {
    /// The power law matching value and log-slope of `jet` at `r`.
    fn matching(r: f64, jet: Jet) -> Self {
        let p = r * jet.fp / jet.f;
        PowerLaw {
            a: jet.f / r.powf(p),
            p,
        }
    }

    fn jet(&self, r: f64) -> Jet {
        let f = self.a * r.powf(self.p);
        let p = self.p;
        Jet {
            f,
            fp: p * f / r,
            fpp: p * (p - 1.0) * f / (r * r),
            fppp: p * (p - 1.0) * (p - 2.0) * f / (r * r * r),
        }
    }
}

/// A sampled warping function with columns `r, f, fp, fpp`.
#[derive(Debug, Clone)]
pub struct CustomTable {
    pub source: String,
    pub r: Vec<f64>,
    pub f: Vec<f64>,
    pub fp: Vec<f64>,
    pub fpp: Vec<f64>,
    spline: CubicSpline,
    head: PowerLaw,
    tail: PowerLaw,
}

impl CustomTable {
    pub fn new(
        source: impl Into<String>,
        r: Vec<f64>,
        f: Vec<f64>,
        fp: Vec<f64>,
        fpp: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let len = r.len();
        if len < 4 || f.len() != len || fp.len() != len || fpp.len() != len {
            return Err(ModelError::Table(format!("need at least 4 complete rows, got {len}")));
        }
        if r.iter().chain(&f).chain(&fp).chain(&fpp).any(|v| !v.is_finite()) {
            return Err(ModelError::Table("non-finite entry".into()));
        }
        if r[0] <= 0.0 || r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ModelError::Table(
                "radii must be positive and strictly increasing".into(),
            ));
        }
        if let Some(i) = f.iter().position(|&v| v <= 0.0) {
            return Err(ModelError::Table(format!(
                "f must be positive, row {} has f = {}",
                i + 1,
                f[i]
            )));
        }
        let spline = CubicSpline::clamped(r.clone(), f.clone(), fp[0], fp[len - 1]);
        let head = PowerLaw::matching(r[0], spline.eval(r[0]));
        let tail = PowerLaw::matching(r[len - 1], spline.eval(r[len - 1]));
        Ok(CustomTable {
            source: source.into(),
            r,
            f,
            fp,
            fpp,
            spline,
            head,
            tail,
        })
    }

    /// Read a CSV with header `r,f,fp,fpp`.
    pub fn from_csv(path: &Path) -> Result<Self, ModelError> {
        let mut reader =
            csv::Reader::from_path(path).map_err(|e| ModelError::Table(format!("{}: {e}", path.display())))?;
        let headers = reader
            .headers()
            .map_err(|e| ModelError::Table(e.to_string()))?
            .iter()
            .map(str::trim)
            .collect::<Vec<_>>();
        if headers != ["r", "f", "fp", "fpp"] {
            return Err(ModelError::Table(format!(
                "header must be r,f,fp,fpp, got {}",
                headers.join(",")
            )));
        }
        let mut cols: [Vec<f64>; 4] = Default::default();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| ModelError::Table(e.to_string()))?;
            for (k, col) in cols.iter_mut().enumerate() {
                let field = rec.get(k).unwrap_or("").trim();
                let v = field
                    .parse::<f64>()
                    .map_err(|_| ModelError::Table(format!("row {}: cannot parse `{field}`", line + 1)))?;
                col.push(v);
            }
        }
        let [r, f, fp, fpp] = cols;
        CustomTable::new(path.display().to_string(), r, f, fp, fpp)
    }

    /// Sample a closed-form profile on `[r_lo, r_hi]` (log-spaced rows).
    pub fn sample(
        source: &str,
        rows: usize,
        r_lo: f64,
        r_hi: f64,
        f: impl Fn(f64) -> (f64, f64, f64),
    ) -> Result<Self, ModelError> {
        let r: Vec<f64> = log_grid(r_lo, r_hi, rows);
        let (mut fv, mut fpv, mut fppv) = (vec![], vec![], vec![]);
        for &x in &r {
            let (a, b, c) = f(x);
            fv.push(a);
            fpv.push(b);
            fppv.push(c);
        }
        CustomTable::new(source, r, fv, fpv, fppv)
    }

    fn jet(&self, r: f64) -> Jet {
        let (lo, hi) = self.spline.domain();
        if r < lo {
            self.head.jet(r)
        } else if r > hi {
            self.tail.jet(r)
        } else {
            self.spline.eval(r)
        }
    }

    pub fn head(&self) -> PowerLaw {
        self.head
    }

    pub fn tail(&self) -> PowerLaw {
        self.tail
    }

    pub fn domain(&self) -> (f64, f64) {
        self.spline.domain()
    }

    pub fn spline_knots(&self) -> &[f64] {
        self.spline.knots()
    }

    /// Largest gap between the tabulated `fp` and the spline slope at the knots.
    pub fn slope_mismatch(&self) -> f64 {
        self.r
            .iter()
            .zip(&self.fp)
            .map(|(&x, &d)| (self.spline.eval(x).fp - d).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub enum Profile {
    Euclidean,
    Cone { c: f64 },
    SmoothedCone { c: f64, r0: f64 },
    Custom(Box<CustomTable>),
}

#[derive(Debug, Clone)]
pub struct ModelManifold {
    n: usize,
    profile: Profile,
}

/// Quintic smoothstep and its first three derivatives.
fn smoothstep(t: f64) -> [f64; 4] {
    let t = t.clamp(0.0, 1.0);
    [
        t * t * t * (10.0 + t * (-15.0 + 6.0 * t)),
        30.0 * t * t * (1.0 - t) * (1.0 - t),
        60.0 * t * (1.0 - t) * (1.0 - 2.0 * t),
        60.0 - 360.0 * t + 360.0 * t * t,
    ]
}

/// Radii at which the closed-form curvature hypotheses are scanned.
const CURVATURE_SCAN: usize = 4096;

pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| {
            if i == points - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (points - 1) as f64).exp()
            }
        })
        .collect()
}

/// Area of the unit sphere `S^{m}`.
pub fn sphere_area(m: usize) -> f64 {
    // ω_m = 2π^{(m+1)/2} / Γ((m+1)/2)
    let k = m + 1;
    let gamma_half = if k.is_multiple_of(2) {
        (1..k / 2).map(|i| i as f64).product::<f64>()
    } else {
        // Γ(k/2) = √π · (k-2)!! / 2^{(k-1)/2}
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while x < k as f64 / 2.0 - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    };
    2.0 * PI.powf(k as f64 / 2.0) / gamma_half
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureSample {
    pub r: f64,
    pub k_rad: f64,
    pub k_tan: f64,
    pub ric_rad: f64,
    pub ric_tan: f64,
}

/// A boolean hypothesis together with the margin it was decided from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Check {
    pub holds: bool,
    pub margin: f64,
    pub tol: f64,
}

impl Check {
    pub fn from_margin(margin: f64, tol: f64) -> Self {
        Check {
            holds: margin >= -tol,
            margin,
            tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypothesisTolerances {
    /// Absolute tolerance on curvature margins.
    pub curvature: f64,
    /// Tolerance on the scale-free `r³·‖∇Ric‖`.
    pub parallel_ricci: f64,
    /// Step of the finite-difference oracle, relative to the probe radius.
    pub oracle_step: f64,
}

impl Default for HypothesisTolerances {
    fn default() -> Self {
        HypothesisTolerances {
            curvature: 1e-9,
            parallel_ricci: 1e-5,
            oracle_step: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub nonneg_sectional_along_grad_g: Check,
    pub nonneg_ricci: Check,
    /// `sup ‖∇Ric‖` over the probes, from the finite-difference oracle.
    pub parallel_ricci_residual: f64,
    /// The same supremum of the scale-free `r³‖∇Ric‖`; the boolean uses this.
    pub parallel_ricci_scaled: f64,
    pub parallel_ricci: bool,
    /// Margin is `inf Vol B(t)/tⁿ` over the probes; also requires linear growth of `f`.
    pub euclidean_volume_growth: Check,
    pub nonparabolic: bool,
    pub tail_exponent: f64,
    /// Raw cones with `c < 1` are not smooth at the tip.
    pub singular_tip: bool,
}

impl HypothesisReport {
    /// Hypotheses of the theorem: curvature along `∇G`, parallel Ricci,
    /// non-parabolicity, and a smooth complete model.
    pub fn theorem_hypotheses_hold(&self) -> bool {
        self.nonneg_sectional_along_grad_g.holds && self.parallel_ricci && self.nonparabolic && !self.singular_tip
    }

    /// Names of the unmet hypotheses, in a fixed order.
    pub fn unmet(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.nonneg_sectional_along_grad_g.holds {
            out.push("nonneg_sectional_along_grad_g");
        }
        if !self.nonneg_ricci.holds {
            out.push("nonneg_ricci");
        }
        if !self.parallel_ricci {
            out.push("parallel_ricci");
        }
        if !self.euclidean_volume_growth.holds {
            out.push("euclidean_volume_growth");
        }
        if !self.nonparabolic {
            out.push("nonparabolic");
        }
        if self.singular_tip {
            out.push("singular_tip");
        }
        out
    }
}

impl ModelManifold {
    pub fn new(n: usize, profile: Profile) -> Result<Self, ModelError> {
        if n < 3 {
            return Err(ModelError::Dimension(n));
        }
        match &profile {
            Profile::Cone { c } | Profile::SmoothedCone { c, .. } if !(*c > 0.0 && *c <= 1.0) => {
                return Err(ModelError::Aperture(*c))
            }
            Profile::SmoothedCone { r0, .. } if !(*r0 > 0.0 && r0.is_finite()) => {
                return Err(ModelError::SmoothingRadius(*r0))
            }
            _ => {}
        }
        Ok(ModelManifold { n, profile })
    }

    pub fn euclidean(n: usize) -> Result<Self, ModelError> {
        Self::new(n, Profile::Euclidean)
    }

    pub fn cone(n: usize, c: f64) -> Result<Self, ModelError> {
        Self::new(n, Profile::Cone { c })
    }

    pub fn smoothed_cone(n: usize, c: f64, r0: f64) -> Result<Self, ModelError> {
        Self::new(n, Profile::SmoothedCone { c, r0 })
    }

    /// Parse `euclidean`, `cone:<c>`, `smoothed-cone:<c>:<r0>` or `custom:<path>`.
    pub fn from_id(id: &str, n: usize) -> Result<Self, ModelError> {
        let bad = || ModelError::UnknownId(id.to_string());
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        let parts: Vec<&str> = id.splitn(2, ':').collect();
        match parts.as_slice() {
            ["euclidean"] => Self::euclidean(n),
            ["cone", c] => Self::cone(n, num(c)?),
            ["smoothed-cone", rest] => match rest.split(':').collect::<Vec<_>>().as_slice() {
                [c, r0] => Self::smoothed_cone(n, num(c)?, num(r0)?),
                _ => Err(bad()),
            },
            ["custom", path] => Self::new(n, Profile::Custom(Box::new(CustomTable::from_csv(Path::new(path))?))),
            _ => Err(bad()),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    /// The id string this model parses from.
    pub fn id(&self) -> String {
        match &self.profile {
            Profile::Euclidean => "euclidean".into(),
            Profile::Cone { c } => format!("cone:{c}"),
            Profile::SmoothedCone { c, r0 } => format!("smoothed-cone:{c}:{r0}"),
            Profile::Custom(t) => format!("custom:{}", t.source),
        }
    }

    pub fn is_singular_tip(&self) -> bool {
        matches!(self.profile, Profile::Cone { c } if c < 1.0)
    }

    /// `f` and its first three derivatives at `r > 0`.
    pub fn jet(&self, r: f64) -> Jet {
        match &self.profile {
            Profile::Euclidean => Jet {
                f: r,
                fp: 1.0,
                fpp: 0.0,
                fppp: 0.0,
            },
            Profile::Cone { c } => Jet {
                f: c * r,
                fp: *c,
                fpp: 0.0,
                fppp: 0.0,
            },
            Profile::SmoothedCone { c, r0 } => {
                let half = 0.5 * r0;
                if r <= half {
                    return Jet {
                        f: r,
                        fp: 1.0,
                        fpp: 0.0,
                        fppp: 0.0,
                    };
                }
                if r >= *r0 {
                    return Jet {
                        f: c * r,
                        fp: *c,
                        fpp: 0.0,
                        fppp: 0.0,
                    };
                }
                // f = r·φ with φ = 1 + (c-1)·s((r - r0/2)/(r0/2))
                let k = 1.0 / half;
                let [s, s1, s2, s3] = smoothstep((r - half) * k);
                let d = c - 1.0;
                let phi = 1.0 + d * s;
                let phi1 = d * s1 * k;
                let phi2 = d * s2 * k * k;
                let phi3 = d * s3 * k * k * k;
                Jet {
                    f: r * phi,
                    fp: phi + r * phi1,
                    fpp: 2.0 * phi1 + r * phi2,
                    fppp: 3.0 * phi2 + r * phi3,
                }
            }
            Profile::Custom(t) => t.jet(r),
        }
    }

    pub fn f(&self, r: f64) -> f64 {
        self.jet(r).f
    }

    /// Growth exponent `p` of `f ~ a·r^p` at infinity.
    pub fn asymptotic_power(&self) -> f64 {
        match &self.profile {
            Profile::Custom(t) => t.tail.p,
            _ => 1.0,
        }
    }

    pub fn curvature_at(&self, r: f64) -> Result<CurvatureSample, ModelError> {
        if !(r > 0.0) {
            return Err(ModelError::Radius(r));
        }
        let j = self.jet(r);
        let n = self.n as f64;
        let k_rad = -j.fpp / j.f;
        let k_tan = (1.0 - j.fp * j.fp) / (j.f * j.f);
        Ok(CurvatureSample {
            r,
            k_rad,
            k_tan,
            ric_rad: (n - 1.0) * k_rad,
            ric_tan: k_rad + (n - 2.0) * k_tan,
        })
    }

    /// `‖∇Ric‖` from the warped-product formulas (needs `f'''`).
    pub fn parallel_ricci_norm_closed(&self, r: f64) -> f64 {
        let j = self.jet(r);
        let n = self.n as f64;
        let k_rad = -j.fpp / j.f;
        let k_tan = (1.0 - j.fp * j.fp) / (j.f * j.f);
        let dk_rad = -(j.fppp * j.f - j.fpp * j.fp) / (j.f * j.f);
        let dk_tan = -2.0 * j.fp * (j.fpp * j.f + 1.0 - j.fp * j.fp) / (j.f * j.f * j.f);
        let ric_rad = (n - 1.0) * k_rad;
        let ric_tan = k_rad + (n - 2.0) * k_tan;
        let d_rad = (n - 1.0) * dk_rad;
        let d_tan = dk_rad + (n - 2.0) * dk_tan;
        let w = j.fp / j.f;
        (d_rad * d_rad + (n - 1.0) * d_tan * d_tan + 2.0 * (n - 1.0) * w * w * (ric_rad - ric_tan).powi(2)).sqrt()
    }

    /// `∫_0^t f^{n-1}`.
    fn radial_volume(&self, t: f64) -> Result<f64, ModelError> {
        let m = (self.n - 1) as f64;
        let tol = Tolerance {
            rel: 1e-13,
            ..Tolerance::default()
        };
        let power = |pl: PowerLaw, lo: f64, hi: f64| {
            // ∫_lo^hi (a s^p)^m ds
            let e = pl.p * m + 1.0;
            pl.a.powf(m) * (hi.powf(e) - lo.powf(e)) / e
        };
        let quad = |lo: f64, hi: f64| -> Result<f64, ModelError> {
            if hi <= lo {
                return Ok(0.0);
            }
            Ok(integrate(|s| self.f(s).powf(m), lo, hi, tol)?.value)
        };
        Ok(match &self.profile {
            Profile::Euclidean => t.powf(m + 1.0) / (m + 1.0),
            Profile::Cone { c } => c.powf(m) * t.powf(m + 1.0) / (m + 1.0),
            Profile::SmoothedCone { c, r0 } => {
                let half = 0.5 * r0;
                let inner = t.min(half).powf(m + 1.0) / (m + 1.0);
                let blend = quad(half, t.min(*r0))?;
                let outer = if t > *r0 {
                    c.powf(m) * (t.powf(m + 1.0) - r0.powf(m + 1.0)) / (m + 1.0)
                } else {
                    0.0
                };
                inner + blend + outer
            }
            Profile::Custom(tab) => {
                let (lo, hi) = tab.domain();
                if tab.head.p * m + 1.0 <= 0.0 {
                    return Err(ModelError::Table(
                        "volume near r = 0 diverges for the head extrapolation".into(),
                    ));
                }
                let head = power(tab.head, 0.0, t.min(lo));
                // integrate knot by knot so the spline's kinks in f''' never sit inside a panel
                let mut mid = 0.0;
                for w in tab.spline.knots().windows(2) {
                    let (a, b) = (w[0], w[1].min(t));
                    if b <= a {
                        break;
                    }
                    mid += quad(a, b)?;
                }
                let tail = if t > hi { power(tab.tail, hi, t) } else { 0.0 };
                head + mid + tail
            }
        })
    }

    /// `ω_{n-1} ∫_0^t f^{n-1} / tⁿ`.
    pub fn volume_growth(&self, t: f64) -> Result<f64, ModelError> {
        if !(t > 0.0) {
            return Err(ModelError::Radius(t));
        }
        Ok(sphere_area(self.n - 1) * self.radial_volume(t)? / t.powi(self.n as i32))
    }

    pub fn hypothesis_report(
        &self,
        r_min: f64,
        r_max: f64,
        probes: usize,
        tol: &HypothesisTolerances,
    ) -> Result<HypothesisReport, ModelError> {
        if !(r_min > 0.0 && r_max > r_min && r_max.is_finite()) || probes < 2 {
            return Err(ModelError::Range(r_min, r_max));
        }
        let radii = log_grid(r_min, r_max, probes);
        let mut sectional = f64::INFINITY;
        let mut ricci = f64::INFINITY;
        let mut volume = f64::INFINITY;
        let mut pr_raw: f64 = 0.0;
        let mut pr_scaled: f64 = 0.0;
        // closed-form curvature is cheap, so scan densely enough not to step over a blend
        for r in log_grid(r_min, r_max, CURVATURE_SCAN.max(probes)) {
            let k = self.curvature_at(r)?;
            sectional = sectional.min(k.k_rad);
            ricci = ricci.min(k.ric_rad.min(k.ric_tan));
        }
        for &r in &radii {
            volume = volume.min(self.volume_growth(r)?);
            let chart = fd_oracle::Chart::warped(self.clone());
            let point = chart.default_point(r);
            let steps = chart.steps_at(&point, tol.oracle_step);
            let norm = fd_oracle::check_parallel_ricci_steps(&chart, &point, &steps)?;
            pr_raw = pr_raw.max(norm);
            pr_scaled = pr_scaled.max(norm * r * r * r);
        }
        let np = green::nonparabolic_check(self, r_min).map_err(Box::new)?;
        // linear growth of f is required on top of a positive ratio
        let growth_margin = if self.asymptotic_power() >= 1.0 - 1e-9 {
            volume
        } else {
            -volume.abs().max(1.0)
        };
        Ok(HypothesisReport {
            nonneg_sectional_along_grad_g: Check::from_margin(sectional, tol.curvature),
            nonneg_ricci: Check::from_margin(ricci, tol.curvature),
            parallel_ricci_residual: pr_raw,
            parallel_ricci_scaled: pr_scaled,
            parallel_ricci: pr_scaled <= tol.parallel_ricci,
            euclidean_volume_growth: Check::from_margin(growth_margin, tol.curvature),
            nonparabolic: np.varopoulos_integral_finite,
            tail_exponent: np.tail_exponent,
            singular_tip: self.is_singular_tip(),
        })
    }
}

impl fmt::Display for ModelManifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (n = {})", self.id(), self.n)
    }
}

/// Preset ids with a one-line description, for `models list`.
pub fn presets() -> Vec<(&'static str, &'static str)> {
    vec![
        ("euclidean", "flat space, f(r) = r"),
        (
            "cone:<c>",
            "cone of aperture c in (0, 1], f(r) = c·r; singular tip for c < 1",
        ),
        (
            "smoothed-cone:<c>:<r0>",
            "f(r) = r on [0, r0/2], c·r on [r0, ∞), quintic C² blend between",
        ),
        (
            "custom:<path>",
            "CSV table with header r,f,fp,fpp; cubic spline with power-law ends",
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_their_definitions() {
        let e = ModelManifold::euclidean(4).unwrap();
        let j = e.jet(2.0);
        assert_eq!((j.f, j.fp, j.fpp), (2.0, 1.0, 0.0));
        let c = ModelManifold::cone(4, 0.5).unwrap();
        assert_eq!((c.f(1.0), c.jet(1.0).fp), (0.5, 0.5));
        assert!(matches!(ModelManifold::cone(2, 0.5), Err(ModelError::Dimension(2))));
        assert!(matches!(ModelManifold::cone(4, 1.5), Err(ModelError::Aperture(_))));
        assert!(matches!(ModelManifold::cone(4, 0.0), Err(ModelError::Aperture(_))));
    }

    #[test]
    fn ids_round_trip() {
        for id in ["euclidean", "cone:0.5", "smoothed-cone:0.5:1"] {
            let m = ModelManifold::from_id(id, 4).unwrap();
            assert_eq!(m.id(), id);
        }
        assert!(ModelManifold::from_id("sphere", 4).is_err());
        assert!(ModelManifold::from_id("cone:x", 4).is_err());
    }

    #[test]
    fn curvature_examples() {
        let k = ModelManifold::euclidean(4).unwrap().curvature_at(2.0).unwrap();
        assert_eq!((k.k_rad, k.k_tan), (0.0, 0.0));
        let k = ModelManifold::cone(4, 0.5).unwrap().curvature_at(1.0).unwrap();
        assert_eq!(k.k_rad, 0.0);
        assert!((k.k_tan - 3.0).abs() < 1e-15);
        let k = ModelManifold::smoothed_cone(4, 0.5, 1.0)
            .unwrap()
            .curvature_at(2.0)
            .unwrap();
        assert!((k.k_tan - 0.75).abs() < 1e-15);
        assert!(ModelManifold::euclidean(4).unwrap().curvature_at(0.0).is_err());
    }

    #[test]
    fn smoothed_cone_is_c2_at_the_joins() {
        let m = ModelManifold::smoothed_cone(4, 0.5, 1.0).unwrap();
        for r in [0.5, 1.0] {
            let (a, b) = (m.jet(r - 1e-9), m.jet(r + 1e-9));
            assert!((a.f - b.f).abs() < 1e-8);
            assert!((a.fp - b.fp).abs() < 1e-7);
            assert!((a.fpp - b.fpp).abs() < 1e-6);
        }
        // the blend never steepens past the Euclidean slope
        for i in 0..=100 {
            let r = 0.5 + 0.005 * i as f64;
            assert!(m.jet(r).fp <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn volume_growth_examples() {
        let e = ModelManifold::euclidean(4).unwrap();
        assert!((e.volume_growth(3.0).unwrap() - PI * PI / 2.0).abs() < 1e-12);
        let c = ModelManifold::cone(4, 0.5).unwrap();
        let v1 = c.volume_growth(1.0).unwrap();
        assert!((v1 - PI * PI / 16.0).abs() < 1e-12);
        assert!(((c.volume_growth(10.0).unwrap() - v1) / v1).abs() < 1e-9);
        // unit-ball volumes π^{n/2}/Γ(n/2+1) in dimensions 3 and 5
        let b3 = ModelManifold::euclidean(3).unwrap().volume_growth(1.0).unwrap();
        assert!((b3 - 4.0 * PI / 3.0).abs() < 1e-12);
        let b5 = ModelManifold::euclidean(5).unwrap().volume_growth(1.0).unwrap();
        assert!((b5 - 8.0 * PI * PI / 15.0).abs() < 1e-12);
    }

    #[test]
    fn smoothed_volume_joins_cone_ratio() {
        let m = ModelManifold::smoothed_cone(4, 0.5, 1.0).unwrap();
        let q = m.volume_growth(1e6).unwrap();
        assert!((q - PI * PI / 16.0).abs() < 1e-6);
    }

    #[test]
    fn custom_table_tracks_sampled_profile() {
        let t = CustomTable::sample("r2", 400, 0.05, 20.0, |r| (r * r, 2.0 * r, 2.0)).unwrap();
        let m = ModelManifold::new(4, Profile::Custom(Box::new(t))).unwrap();
        let k = m.curvature_at(1.3).unwrap();
        assert!((k.k_rad + 2.0 / (1.3 * 1.3)).abs() < 1e-3);
        assert!((m.asymptotic_power() - 2.0).abs() < 1e-6);
        // power-law ends are exact for a pure power
        assert!((m.f(100.0) - 1e4).abs() / 1e4 < 1e-6);
        assert!((m.f(0.01) - 1e-4).abs() / 1e-4 < 1e-6);
    }

    #[test]
    fn custom_table_rejects_bad_rows() {
        let r = vec![1.0, 2.0, 3.0, 4.0];
        assert!(CustomTable::new("x", r.clone(), vec![1.0, -1.0, 1.0, 1.0], vec![0.0; 4], vec![0.0; 4]).is_err());
        assert!(CustomTable::new("x", vec![1.0, 3.0, 2.0, 4.0], vec![1.0; 4], vec![0.0; 4], vec![0.0; 4]).is_err());
        assert!(CustomTable::new("x", vec![1.0, 2.0], vec![1.0; 2], vec![0.0; 2], vec![0.0; 2]).is_err());
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(2) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_area(4) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn closed_form_parallel_ricci_on_cone() {
        let c = ModelManifold::cone(4, 0.5).unwrap();
        assert!((c.parallel_ricci_norm_closed(1.0) - 648f64.sqrt()).abs() < 1e-12);
        assert_eq!(
            ModelManifold::euclidean(5).unwrap().parallel_ricci_norm_closed(3.0),
            0.0
        );
    }
}
