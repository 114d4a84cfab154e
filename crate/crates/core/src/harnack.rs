//! The Harnack quantity `H̃ = Hess G - α B + ((n-2)/2) C G^α g` with
//! `B = ∇G⊗∇G / G`, its lowest eigenvalue `Λ`, and the term groups of the
//! maximum-principle argument.
//!
//! On a warped product `H̃` is diagonal in the radial/tangential frame, and
//! `H̃ = ((n-2)/2) G^α (C g - Hess b²)`, so `Λ ≥ 0` is exactly `Hess b² ≤ C g`.

use serde::Serialize;
use thiserror::Error;

use crate::green::{compute_profile, green_at, GreenError, GreenSample, RadialGreenProfile};
use crate::models::{log_grid, HypothesisReport, HypothesisTolerances, ModelError, ModelManifold};
use crate::par::Exec;

/// Smallest constant for which the theorem is stated.
pub const THEOREM_C: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnackError {
    #[error(transparent)]
    Green(#[from] GreenError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("C = {0} is negative")]
    NegativeC(f64),
    #[error("C = {0} is below {THEOREM_C}; pass the exploratory flag to test it anyway")]
    BelowTheorem(f64),
    #[error("invalid radius range [{0}, {1}] or grid size")]
    Range(f64, f64),
}

impl From<Box<GreenError>> for HarnackError {
    fn from(e: Box<GreenError>) -> Self {
        HarnackError::Green(*e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Radial,
    Tangential,
    /// Both eigenvalues agree to roundoff.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HarnackPoint {
    pub r: f64,
    pub mu_rad: f64,
    pub mu_tan: f64,
    pub h_rad: f64,
    pub h_tan: f64,
    pub lambda: f64,
    pub minimizer: Direction,
    /// Top eigenvalue `|∇G|²/G` of `B`.
    pub b_top: f64,
}

fn c_term(n: f64, c: f64, s: &GreenSample) -> f64 {
    0.5 * (n - 2.0) * c * s.g.powf(n / (n - 2.0))
}

fn point(model: &ModelManifold, s: &GreenSample, c: f64) -> HarnackPoint {
    let n = model.n() as f64;
    let jet = model.jet(s.r);
    let ct = c_term(n, c, s);
    let h_rad = s.gpp + n / (2.0 - n) * s.gp * s.gp / s.g + ct;
    let h_tan = s.gp * jet.fp / jet.f + ct;
    let scale = h_rad.abs().max(h_tan.abs()).max(f64::MIN_POSITIVE);
    let minimizer = if (h_rad - h_tan).abs() <= 1e-12 * scale {
        Direction::Both
    } else if h_rad < h_tan {
        Direction::Radial
    } else {
        Direction::Tangential
    };
    HarnackPoint {
        r: s.r,
        mu_rad: s.mu_rad,
        mu_tan: s.mu_tan,
        h_rad,
        h_tan,
        lambda: h_rad.min(h_tan),
        minimizer,
        b_top: s.gp * s.gp / s.g,
    }
}

/// `(h_rad, h_tan)` at `r`.
pub fn htilde_eigs(profile: &RadialGreenProfile, r: f64, c: f64) -> Result<(f64, f64), HarnackError> {
    let p = harnack_point(profile, r, c)?;
    Ok((p.h_rad, p.h_tan))
}

/// `Λ` at `r` and the direction attaining it.
pub fn lambda_min(profile: &RadialGreenProfile, r: f64, c: f64) -> Result<(f64, Direction), HarnackError> {
    let p = harnack_point(profile, r, c)?;
    Ok((p.lambda, p.minimizer))
}

pub fn harnack_point(profile: &RadialGreenProfile, r: f64, c: f64) -> Result<HarnackPoint, HarnackError> {
    if c < 0.0 {
        return Err(HarnackError::NegativeC(c));
    }
    Ok(point(&profile.model, &profile.at(r)?, c))
}

/// Per-grid-point Harnack data for one constant.
#[derive(Debug, Clone)]
pub struct HarnackState {
    pub c: f64,
    pub points: Vec<HarnackPoint>,
}

pub fn harnack_state(profile: &RadialGreenProfile, c: f64, exec: Exec) -> Result<HarnackState, HarnackError> {
    if c < 0.0 {
        return Err(HarnackError::NegativeC(c));
    }
    let points = exec.map(&profile.samples, |s| point(&profile.model, s, c));
    Ok(HarnackState { c, points })
}

/// `max |mu - (2 - (2/(n-2)) G^{-α} h_H)|` over both eigendirections, where
/// `h_H` are the eigenvalues of `H = H̃` at `C = 2`.
pub fn consistency_hess_vs_h(profile: &RadialGreenProfile, r: f64) -> Result<f64, HarnackError> {
    let s = profile.at(r)?;
    let n = profile.n() as f64;
    let p = point(&profile.model, &s, 2.0);
    let k = 2.0 / (n - 2.0) * s.g.powf(-n / (n - 2.0));
    let rad = (s.mu_rad - (2.0 - k * p.h_rad)).abs();
    let tan = (s.mu_tan - (2.0 - k * p.h_tan)).abs();
    Ok(rad.max(tan))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunOptions {
    pub r_min: f64,
    pub r_max: f64,
    pub grid_size: usize,
    /// Absolute tolerance on `C - max mu`.
    pub tol: f64,
    /// Allow `C < 10`.
    pub exploratory: bool,
    /// A known uniform bound `Hess b² ≤ D g`, for the `Λ` lower-bound check.
    pub uniform_bound: Option<f64>,
    pub hypothesis_probes: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            r_min: 1e-2,
            r_max: 1e2,
            grid_size: 512,
            tol: 1e-8,
            exploratory: false,
            uniform_bound: None,
            hypothesis_probes: 9,
        }
    }
}

impl RunOptions {
    fn grid(&self) -> Result<Vec<f64>, HarnackError> {
        if !(self.r_min > 0.0 && self.r_max > self.r_min && self.r_max.is_finite()) || self.grid_size < 2 {
            return Err(HarnackError::Range(self.r_min, self.r_max));
        }
        Ok(log_grid(self.r_min, self.r_max, self.grid_size))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// The theorem does not apply (hypotheses unmet or `C < 10`); the
    /// conclusion was measured anyway and `pass` records the outcome.
    Exploratory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub r: f64,
    pub mu_rad: f64,
    pub mu_tan: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinimalC {
    pub value: f64,
    /// Radius where the supremum is attained.
    pub r: f64,
    /// Supremum over the grid points alone, before refinement.
    pub grid_value: f64,
}

/// Eigenvalues at the ends of the grid; the condition at the pole is read
/// as the `r → r_min` trend of these values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryDiagnostics {
    pub inner_r: f64,
    pub inner_mu: (f64, f64),
    pub inner_lambda: f64,
    pub outer_r: f64,
    pub outer_mu: (f64, f64),
    pub outer_lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarnackReport {
    pub model: String,
    pub n: usize,
    #[serde(rename = "C")]
    pub c: f64,
    pub verdict: Verdict,
    pub pass: bool,
    pub worst_margin: f64,
    #[serde(rename = "minimal_C")]
    pub minimal_c: MinimalC,
    pub violations: Vec<Violation>,
    /// Grid points where `Hess b² ≤ Cg` and `Λ ≥ 0` disagree (always empty
    /// unless something is badly wrong).
    pub equivalence_mismatches: Vec<f64>,
    /// `Λ ≥ ((n-2)/2)(C-D) G^α` at every grid point, when `D` was supplied.
    pub lambda_lower_bound_holds: Option<bool>,
    pub boundary: BoundaryDiagnostics,
    pub hypothesis_flags: HypothesisReport,
    pub unmet_hypotheses: Vec<&'static str>,
}

fn max_mu(p: &HarnackPoint) -> f64 {
    p.mu_rad.max(p.mu_tan)
}

/// Golden-section search for the maximum of `max(mu_rad, mu_tan)` on `[a, b]`.
fn refine_max(model: &ModelManifold, a: f64, b: f64) -> Result<(f64, f64), HarnackError> {
    let eval = |r: f64| -> Result<f64, HarnackError> {
        let s = green_at(model, r)?;
        Ok(s.mu_rad.max(s.mu_tan))
    };
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (a.ln(), b.ln());
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (eval(x1.exp())?, eval(x2.exp())?);
    for _ in 0..80 {
        if hi - lo < 1e-12 {
            break;
        }
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = eval(x1.exp())?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = eval(x2.exp())?;
        }
    }
    Ok(if f1 >= f2 { (x1.exp(), f1) } else { (x2.exp(), f2) })
}

fn minimal_c_from(model: &ModelManifold, points: &[HarnackPoint]) -> Result<MinimalC, HarnackError> {
    let (i, best) = points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, max_mu(p)))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    let a = points[i.saturating_sub(1)].r;
    let b = points[(i + 1).min(points.len() - 1)].r;
    let (r, v) = refine_max(model, a, b)?;
    Ok(if v > best {
        MinimalC {
            value: v,
            r,
            grid_value: best,
        }
    } else {
        MinimalC {
            value: best,
            r: points[i].r,
            grid_value: best,
        }
    })
}

/// Smallest `C` with `Hess b² ≤ C g` on `[r_min, r_max]`, refined between grid points.
pub fn minimal_c(model: &ModelManifold, opts: &RunOptions, exec: Exec) -> Result<MinimalC, HarnackError> {
    let profile = compute_profile(model, &opts.grid()?, exec)?;
    let state = harnack_state(&profile, 0.0, exec)?;
    minimal_c_from(model, &state.points)
}

pub fn verify_theorem(
    model: &ModelManifold,
    c: f64,
    opts: &RunOptions,
    exec: Exec,
) -> Result<HarnackReport, HarnackError> {
    if c < 0.0 {
        return Err(HarnackError::NegativeC(c));
    }
    if c < THEOREM_C && !opts.exploratory {
        return Err(HarnackError::BelowTheorem(c));
    }
    let profile = compute_profile(model, &opts.grid()?, exec)?;
    let state = harnack_state(&profile, c, exec)?;
    let n = model.n() as f64;
    let mut worst_margin = f64::INFINITY;
    let mut violations = Vec::new();
    let mut mismatches = Vec::new();
    let mut lower_bound = opts.uniform_bound.map(|_| true);
    for (p, s) in state.points.iter().zip(&profile.samples) {
        let margin = c - max_mu(p);
        worst_margin = worst_margin.min(margin);
        let ok = margin >= -opts.tol;
        if !ok {
            violations.push(Violation {
                r: p.r,
                mu_rad: p.mu_rad,
                mu_tan: p.mu_tan,
            });
        }
        let scale = 0.5 * (n - 2.0) * s.g.powf(n / (n - 2.0));
        if (p.lambda / scale >= -opts.tol) != ok {
            mismatches.push(p.r);
        }
        if let (Some(d), Some(flag)) = (opts.uniform_bound, lower_bound.as_mut()) {
            *flag &= p.lambda >= scale * (c - d) - opts.tol * scale;
        }
    }
    let minimal = minimal_c_from(model, &state.points)?;
    let hyp = model.hypothesis_report(
        opts.r_min,
        opts.r_max,
        opts.hypothesis_probes,
        &HypothesisTolerances::default(),
    )?;
    let pass = violations.is_empty();
    let verdict = match (hyp.theorem_hypotheses_hold() && c >= THEOREM_C, pass) {
        (true, true) => Verdict::Pass,
        (true, false) => Verdict::Fail,
        (false, _) => Verdict::Exploratory,
    };
    let (first, last) = (state.points[0], state.points[state.points.len() - 1]);
    Ok(HarnackReport {
        model: model.id(),
        n: model.n(),
        c,
        verdict,
        pass,
        worst_margin,
        minimal_c: minimal,
        violations,
        equivalence_mismatches: mismatches,
        lambda_lower_bound_holds: lower_bound,
        boundary: BoundaryDiagnostics {
            inner_r: first.r,
            inner_mu: (first.mu_rad, first.mu_tan),
            inner_lambda: first.lambda,
            outer_r: last.r,
            outer_mu: (last.mu_rad, last.mu_tan),
            outer_lambda: last.lambda,
        },
        unmet_hypotheses: hyp.unmet(),
        hypothesis_flags: hyp,
    })
}

/// Which audited groups leaned on a hypothesis the model does not satisfy at `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AuditFlags {
    /// Nonnegative sectional curvature of planes containing `V`.
    pub curv1: bool,
    /// Nonnegative curvature of planes containing `∇G`.
    pub curv2: bool,
    /// Gradient estimate `|∇b| ≤ 1` (from nonnegative Ricci).
    pub csq: bool,
    pub mixed: bool,
    /// The expansion of `Δ H̃` itself assumes parallel Ricci.
    pub parallel_ricci: bool,
}

impl AuditFlags {
    pub fn any(&self) -> bool {
        self.curv1 || self.curv2 || self.csq || self.mixed || self.parallel_ricci
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TermAudit {
    pub r: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub lambda: f64,
    pub direction: Direction,
    /// `2 Σ_k R_{VkVk}(Λ - λ_k)`.
    pub group_curv1: f64,
    /// `-(2n/(n-2)) R(∇G, V, ∇G, V) / G`.
    pub group_curv2: f64,
    /// `-(2n/((n-2)G)) (H̃²)_{VV}`.
    pub group_hsq: f64,
    /// The `C²` and `B` terms; bounded by `csq_bound`.
    pub group_csq: f64,
    pub csq_bound: f64,
    /// The `H̃ M + M H̃` terms while the barrier is active (`Λ < 0`), else 0.
    pub group_mixed: f64,
    pub group_mixed_raw: f64,
    pub barrier_active: bool,
    /// `-(n(n-2)/2) C (C-10) G^{2α-1}`.
    pub final_bound: f64,
    /// `Δ(H̃_{VV})` assembled from the expansion (raw mixed group).
    pub lap_htilde_expansion: f64,
    /// `Δ` of the eigenvalue curve by finite differences; equals the
    /// expansion when `H̃` is a multiple of `g`.
    pub lap_htilde_fd: f64,
    pub isotropic: bool,
    pub hypothesis_flags: AuditFlags,
}

/// Radial Laplacian `u'' + (n-1)(f'/f) u'` of the eigenvalue curve of `dir`,
/// central differences with step `1e-4·r` and one Richardson step.
fn lap_eigen_fd(model: &ModelManifold, r: f64, c: f64, dir: Direction) -> Result<f64, HarnackError> {
    let u = |x: f64| -> Result<f64, HarnackError> {
        let p = point(model, &green_at(model, x)?, c);
        Ok(match dir {
            Direction::Tangential => p.h_tan,
            _ => p.h_rad,
        })
    };
    let u0 = u(r)?;
    let derivs = |h: f64| -> Result<(f64, f64), HarnackError> {
        let (a, b) = (u(r + h)?, u(r - h)?);
        Ok(((a - b) / (2.0 * h), (a - 2.0 * u0 + b) / (h * h)))
    };
    let h = 1e-4 * r;
    let (d1a, d2a) = derivs(h)?;
    let (d1b, d2b) = derivs(0.5 * h)?;
    let d1 = (4.0 * d1b - d1a) / 3.0;
    let d2 = (4.0 * d2b - d2a) / 3.0;
    let jet = model.jet(r);
    Ok(d2 + (model.n() as f64 - 1.0) * jet.fp / jet.f * d1)
}

pub fn audit_proof_terms(profile: &RadialGreenProfile, r: f64, c: f64) -> Result<TermAudit, HarnackError> {
    let model = &profile.model;
    let s = profile.at(r)?;
    let p = point(model, &s, c);
    let k = model.curvature_at(r)?;
    let n = model.n() as f64;
    let alpha = n / (n - 2.0);
    let g = s.g;
    let grad2 = s.gp * s.gp;
    let lam = p.lambda;
    let radial = p.minimizer != Direction::Tangential;
    let group_curv1 = if radial {
        2.0 * (n - 1.0) * k.k_rad * (lam - p.h_tan)
    } else {
        2.0 * k.k_rad * (lam - p.h_rad)
    };
    let group_curv2 = if radial {
        0.0
    } else {
        -(2.0 * n / (n - 2.0)) * k.k_rad * grad2 / g
    };
    let group_hsq = -(2.0 * n / ((n - 2.0) * g)) * lam * lam;
    let b_vv = if radial { grad2 / g } else { 0.0 };
    let group_csq = -0.5 * n * (n - 2.0) * c * c * g.powf(2.0 * alpha - 1.0)
        + (4.0 * n / (n - 2.0)) * (c * g.powf(alpha - 1.0) - 2.0 * grad2 / ((n - 2.0).powi(2) * g * g)) * b_vv;
    let csq_bound = -0.5 * n * (n - 2.0) * c * (c - 8.0) * g.powf(2.0 * alpha - 1.0);
    let m_vv = -(2.0 / (n - 2.0)) * b_vv + 0.5 * (n - 2.0) * c * g.powf(alpha);
    let group_mixed_raw = (2.0 * n / ((n - 2.0) * g)) * 2.0 * lam * m_vv;
    let barrier_active = lam < 0.0;
    let lap_g_alpha = 2.0 * n / (n - 2.0).powi(2) * g.powf(alpha - 2.0) * grad2;
    let lap_htilde_expansion =
        group_curv1 + group_curv2 + group_hsq + group_csq + group_mixed_raw + 0.5 * (n - 2.0) * c * lap_g_alpha;
    let dir = if radial {
        Direction::Radial
    } else {
        Direction::Tangential
    };
    let lap_htilde_fd = lap_eigen_fd(model, r, c, dir)?;
    let tol = 1e-9;
    let flags = AuditFlags {
        curv1: k.k_rad < -tol || (!radial && k.k_tan < -tol),
        curv2: k.k_rad < -tol,
        csq: k.ric_rad.min(k.ric_tan) < -tol || s.grad_b > 1.0 + 1e-8,
        mixed: k.ric_rad.min(k.ric_tan) < -tol || s.grad_b > 1.0 + 1e-8,
        parallel_ricci: model.parallel_ricci_norm_closed(r) * r.powi(3)
            > HypothesisTolerances::default().parallel_ricci,
    };
    Ok(TermAudit {
        r,
        c,
        lambda: lam,
        direction: p.minimizer,
        group_curv1,
        group_curv2,
        group_hsq,
        group_csq,
        csq_bound,
        group_mixed: if barrier_active { group_mixed_raw } else { 0.0 },
        group_mixed_raw,
        barrier_active,
        final_bound: -0.5 * n * (n - 2.0) * c * (c - THEOREM_C) * g.powf(2.0 * alpha - 1.0),
        lap_htilde_expansion,
        lap_htilde_fd,
        isotropic: p.minimizer == Direction::Both,
        hypothesis_flags: flags,
    })
}
