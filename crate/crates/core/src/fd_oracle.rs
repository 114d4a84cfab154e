//! Finite-difference curvature on coordinate charts.
//!
//! Christoffel symbols come from central differences of the metric, and their
//! first and second derivatives from central differences of those. Test
//! functions carry exact partials, so only the geometry is differenced.
//!
//! Curvature convention: `R(X,Y,Z,W) = g(∇_Y∇_X Z - ∇_X∇_Y Z + ∇_{[X,Y]}Z, W)`,
//! i.e. `R_{ijkl} = g(R_std(e_j, e_i) e_k, e_l)` in terms of the usual
//! `R_std(X,Y) = [∇_X, ∇_Y] - ∇_{[X,Y]}`. With this sign the round sphere has
//! `R_{ijij} = +1` and `Ric(X,Y) = Σ_k R(X, e_k, Y, e_k)`.
//!
//! Derivative strings follow `f_{i₁…i_k} = e_{i_k}(⋯e_{i₁}(f))` at the centre
//! of a normal frame, which is `(∇^k f)` with the last index outermost.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::models::ModelManifold;
use crate::par::Exec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("metric is not positive definite at {0:?}")]
    SingularMetric(Vec<f64>),
    #[error("point has {got} coordinates, chart has dimension {want}")]
    Dimension { got: usize, want: usize },
    #[error("step {0} is too small: fourth-order differences are roundoff dominated")]
    StepTooSmall(f64),
    #[error("non-finite metric component at {0:?}")]
    NonFinite(Vec<f64>),
    #[error("unknown chart `{0}` (expected euclidean:<n>, sphere:<R>, s2xr2, cone:<c>:<n>)")]
    UnknownChart(String),
}

/// Smallest step accepted by the oracle.
pub const MIN_STEP: f64 = 1e-5;

/// Scalar test function with exact partial derivatives.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
}

impl Expr {
    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    pub fn c(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn sin(self) -> Expr {
        match self {
            Expr::Const(v) => Expr::Const(v.sin()),
            e => Expr::Sin(Box::new(e)),
        }
    }

    pub fn cos(self) -> Expr {
        match self {
            Expr::Const(v) => Expr::Const(v.cos()),
            e => Expr::Cos(Box::new(e)),
        }
    }

    pub fn exp(self) -> Expr {
        match self {
            Expr::Const(v) => Expr::Const(v.exp()),
            e => Expr::Exp(Box::new(e)),
        }
    }

    pub fn pow(self, k: u32) -> Expr {
        (1..k).fold(self.clone(), |acc, _| acc * self.clone())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const(v) => *v,
            Expr::Var(i) => x[*i],
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Neg(a) => -a.eval(x),
            Expr::Sin(a) => a.eval(x).sin(),
            Expr::Cos(a) => a.eval(x).cos(),
            Expr::Exp(a) => a.eval(x).exp(),
        }
    }

    pub fn diff(&self, i: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(j) => Expr::Const(if *j == i { 1.0 } else { 0.0 }),
            Expr::Add(a, b) => a.diff(i) + b.diff(i),
            Expr::Mul(a, b) => a.diff(i) * (**b).clone() + (**a).clone() * b.diff(i),
            Expr::Neg(a) => -a.diff(i),
            Expr::Sin(a) => (**a).clone().cos() * a.diff(i),
            Expr::Cos(a) => -((**a).clone().sin() * a.diff(i)),
            Expr::Exp(a) => self.clone() * a.diff(i),
        }
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, o: Expr) -> Expr {
        match (self, o) {
            (Expr::Const(a), Expr::Const(b)) => Expr::Const(a + b),
            (Expr::Const(z), e) | (e, Expr::Const(z)) if z == 0.0 => e,
            (a, b) => Expr::Add(Box::new(a), Box::new(b)),
        }
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, o: Expr) -> Expr {
        self + (-o)
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, o: Expr) -> Expr {
        match (self, o) {
            (Expr::Const(a), Expr::Const(b)) => Expr::Const(a * b),
            (Expr::Const(z), _) | (_, Expr::Const(z)) if z == 0.0 => Expr::Const(0.0),
            (Expr::Const(one), e) | (e, Expr::Const(one)) if one == 1.0 => e,
            (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match self {
            Expr::Const(v) => Expr::Const(-v),
            Expr::Neg(a) => *a,
            e => Expr::Neg(Box::new(e)),
        }
    }
}

/// All partials of `f` up to order 4 at one point, indexed by sorted multi-index.
struct Partials {
    table: HashMap<Vec<usize>, f64>,
}

impl Partials {
    fn new(f: &Expr, d: usize, x: &[f64]) -> Self {
        let mut exprs: HashMap<Vec<usize>, Expr> = HashMap::new();
        exprs.insert(vec![], f.clone());
        let mut layer = vec![vec![]];
        for _ in 0..4 {
            let mut next = Vec::new();
            for key in &layer {
                let start = key.last().copied().unwrap_or(0);
                for i in start..d {
                    let mut k = key.clone();
                    k.push(i);
                    let e = exprs[key].diff(i);
                    exprs.insert(k.clone(), e);
                    next.push(k);
                }
            }
            layer = next;
        }
        let table = exprs.into_iter().map(|(k, e)| (k, e.eval(x))).collect();
        Partials { table }
    }

    fn get(&self, idx: &[usize]) -> f64 {
        let mut k = idx.to_vec();
        k.sort_unstable();
        self.table[&k]
    }
}

#[derive(Debug, Clone)]
pub enum Chart {
    /// Cartesian coordinates on `ℝⁿ`.
    Euclidean(usize),
    /// `(θ, φ)` on the sphere of radius `R`.
    RoundSphere(f64),
    /// `(θ, φ, x, y)` on `S² × ℝ²`.
    S2xR2,
    /// `(r, θ₁, …, θ_{n-1})` on a warped product.
    Warped(ModelManifold),
}

impl Chart {
    pub fn euclidean(n: usize) -> Self {
        Chart::Euclidean(n)
    }

    pub fn round_sphere(radius: f64) -> Self {
        Chart::RoundSphere(radius)
    }

    pub fn s2xr2() -> Self {
        Chart::S2xR2
    }

    pub fn cone(c: f64, n: usize) -> Result<Self, crate::models::ModelError> {
        Ok(Chart::Warped(ModelManifold::cone(n, c)?))
    }

    pub fn warped(model: ModelManifold) -> Self {
        Chart::Warped(model)
    }

    /// Parse `euclidean:<n>`, `sphere:<R>`, `s2xr2`, `cone:<c>:<n>`.
    pub fn from_id(id: &str) -> Result<Self, OracleError> {
        let bad = || OracleError::UnknownChart(id.to_string());
        let parts: Vec<&str> = id.split(':').collect();
        match parts.as_slice() {
            ["euclidean", n] => {
                let n: usize = n.parse().map_err(|_| bad())?;
                if n == 0 {
                    return Err(bad());
                }
                Ok(Chart::Euclidean(n))
            }
            ["sphere"] | ["round_sphere"] => Ok(Chart::RoundSphere(1.0)),
            ["sphere", r] | ["round_sphere", r] => {
                let r: f64 = r.parse().map_err(|_| bad())?;
                if !(r > 0.0) {
                    return Err(bad());
                }
                Ok(Chart::RoundSphere(r))
            }
            ["s2xr2"] => Ok(Chart::S2xR2),
            ["cone", c, n] => {
                let c: f64 = c.parse().map_err(|_| bad())?;
                let n: usize = n.parse().map_err(|_| bad())?;
                Chart::cone(c, n).map_err(|_| bad())
            }
            _ => Err(bad()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Chart::Euclidean(n) => *n,
            Chart::RoundSphere(_) => 2,
            Chart::S2xR2 => 4,
            Chart::Warped(m) => m.n(),
        }
    }

    /// Metric components, row-major.
    pub fn metric(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut g = vec![0.0; d * d];
        match self {
            Chart::Euclidean(_) => {
                for i in 0..d {
                    g[i * d + i] = 1.0;
                }
            }
            Chart::RoundSphere(r) => {
                g[0] = r * r;
                g[3] = r * r * x[0].sin().powi(2);
            }
            Chart::S2xR2 => {
                g[0] = 1.0;
                g[5] = x[0].sin().powi(2);
                g[10] = 1.0;
                g[15] = 1.0;
            }
            Chart::Warped(m) => {
                g[0] = 1.0;
                let mut w = m.f(x[0]).powi(2);
                for i in 1..d {
                    g[i * d + i] = w;
                    w *= x[i].sin().powi(2);
                }
            }
        }
        g
    }

    /// A probe point away from coordinate degeneracies. `r` is used as the
    /// radius on warped charts.
    pub fn default_point(&self, r: f64) -> Vec<f64> {
        match self {
            Chart::Euclidean(n) => (0..*n).map(|i| 0.3 - 0.17 * i as f64).collect(),
            Chart::RoundSphere(_) => vec![PI / 3.0, 0.4],
            Chart::S2xR2 => vec![PI / 3.0, 0.4, 0.2, -0.3],
            Chart::Warped(m) => {
                let mut p = vec![r];
                p.extend((1..m.n()).map(|i| 1.1 + 0.1 * (i % 3) as f64));
                p
            }
        }
    }

    /// Per-coordinate steps for a nominal step `h`: the radial step on warped
    /// charts scales with `r` so the relative resolution is the same at every radius.
    pub fn steps_at(&self, x: &[f64], h: f64) -> Vec<f64> {
        let mut s = vec![h; self.dim()];
        if let Chart::Warped(_) = self {
            s[0] = h * x[0];
        }
        s
    }

    /// Seeded probe points inside the chart's safe region.
    pub fn probe_points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut unif = move || rng.gen::<f64>();
        (0..count)
            .map(|_| match self {
                Chart::Euclidean(n) => (0..*n).map(|_| 2.0 * unif() - 1.0).collect(),
                Chart::RoundSphere(_) => vec![0.3 + (PI - 0.6) * unif(), 2.0 * PI * unif()],
                Chart::S2xR2 => vec![
                    0.3 + (PI - 0.6) * unif(),
                    2.0 * PI * unif(),
                    2.0 * unif() - 1.0,
                    2.0 * unif() - 1.0,
                ],
                Chart::Warped(m) => {
                    let mut p = vec![(0.3f64.ln() + unif() * (10f64.ln() - 0.3f64.ln())).exp()];
                    p.extend((1..m.n()).map(|_| 0.3 + (PI - 0.6) * unif()));
                    p
                }
            })
            .collect()
    }

    /// Default smooth test function for commutator checks.
    pub fn default_function(&self) -> Expr {
        let d = self.dim();
        match self {
            Chart::Euclidean(_) if d >= 2 => Expr::var(0).pow(2) * Expr::var(1),
            Chart::RoundSphere(_) => Expr::var(0).cos(),
            Chart::S2xR2 => {
                Expr::var(0).cos() * (-(Expr::var(2).pow(2))).exp()
                    + Expr::var(1).sin() * Expr::var(3) * Expr::var(0).sin()
            }
            _ => {
                let mut e = Expr::var(0).pow(2) * Expr::var(1 % d).cos();
                if d > 2 {
                    e = e + Expr::var(0) * Expr::var(2).sin();
                }
                e
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            Chart::Euclidean(n) => format!("euclidean:{n}"),
            Chart::RoundSphere(r) => format!("sphere:{r}"),
            Chart::S2xR2 => "s2xr2".into(),
            Chart::Warped(m) => format!("warped:{}:{}", m.id(), m.n()),
        }
    }
}

impl fmt::Display for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

fn check_point(chart: &Chart, x: &[f64]) -> Result<(), OracleError> {
    if x.len() != chart.dim() {
        return Err(OracleError::Dimension {
            got: x.len(),
            want: chart.dim(),
        });
    }
    Ok(())
}

fn shifted(x: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut y = x.to_vec();
    for &(i, dx) in moves {
        y[i] += dx;
    }
    y
}

fn inverse(chart: &Chart, x: &[f64], g: &[f64]) -> Result<Vec<f64>, OracleError> {
    let d = chart.dim();
    if g.iter().any(|v| !v.is_finite()) {
        return Err(OracleError::NonFinite(x.to_vec()));
    }
    let m = DMatrix::from_row_slice(d, d, g);
    let chol = m.cholesky().ok_or_else(|| OracleError::SingularMetric(x.to_vec()))?;
    let inv = chol.inverse();
    Ok((0..d * d).map(|k| inv[(k / d, k % d)]).collect())
}

/// `Γ^l_{jk}` at `x`, flattened as `[l][j][k]`.
fn gamma(chart: &Chart, x: &[f64], steps: &[f64]) -> Result<Vec<f64>, OracleError> {
    let d = chart.dim();
    let g = chart.metric(x);
    let ginv = inverse(chart, x, &g)?;
    // dg[a][m][k] = ∂_a g_mk
    let mut dg = vec![0.0; d * d * d];
    for a in 0..d {
        let h = steps[a];
        let gp = chart.metric(&shifted(x, &[(a, h)]));
        let gm = chart.metric(&shifted(x, &[(a, -h)]));
        for k in 0..d * d {
            dg[a * d * d + k] = (gp[k] - gm[k]) / (2.0 * h);
        }
    }
    let mut out = vec![0.0; d * d * d];
    for l in 0..d {
        for j in 0..d {
            for k in 0..d {
                let mut s = 0.0;
                for m in 0..d {
                    let lower = dg[j * d * d + m * d + k] + dg[k * d * d + m * d + j] - dg[m * d * d + j * d + k];
                    s += ginv[l * d + m] * lower;
                }
                out[(l * d + j) * d + k] = 0.5 * s;
            }
        }
    }
    Ok(out)
}

/// Coordinate geometry at a point: metric, Γ, ∂Γ and ∂²Γ.
struct Geometry {
    d: usize,
    g: Vec<f64>,
    gam: Vec<f64>,
    /// `[a][l][j][k]` = ∂_a Γ^l_jk
    dgam: Vec<f64>,
    /// `[a][b][l][j][k]` = ∂_a ∂_b Γ^l_jk
    ddgam: Vec<f64>,
}

impl Geometry {
    fn new(chart: &Chart, x: &[f64], steps: &[f64]) -> Result<Self, OracleError> {
        check_point(chart, x)?;
        // steps are compared relative to the chart's natural scale at x
        let scale = chart.steps_at(x, 1.0);
        if let Some((h, s)) = steps
            .iter()
            .zip(&scale)
            .find(|(h, s)| !(**h >= MIN_STEP * **s * 0.999_999))
        {
            return Err(OracleError::StepTooSmall(h / s));
        }
        let d = chart.dim();
        let d3 = d * d * d;
        let g = chart.metric(x);
        let gam = gamma(chart, x, steps)?;
        let mut plus = Vec::with_capacity(d);
        let mut minus = Vec::with_capacity(d);
        for a in 0..d {
            plus.push(gamma(chart, &shifted(x, &[(a, steps[a])]), steps)?);
            minus.push(gamma(chart, &shifted(x, &[(a, -steps[a])]), steps)?);
        }
        let mut dgam = vec![0.0; d * d3];
        for a in 0..d {
            for k in 0..d3 {
                dgam[a * d3 + k] = (plus[a][k] - minus[a][k]) / (2.0 * steps[a]);
            }
        }
        let mut ddgam = vec![0.0; d * d * d3];
        for a in 0..d {
            for b in a..d {
                let block: Vec<f64> = if a == b {
                    (0..d3)
                        .map(|k| (plus[a][k] - 2.0 * gam[k] + minus[a][k]) / (steps[a] * steps[a]))
                        .collect()
                } else {
                    let (ha, hb) = (steps[a], steps[b]);
                    let pp = gamma(chart, &shifted(x, &[(a, ha), (b, hb)]), steps)?;
                    let pm = gamma(chart, &shifted(x, &[(a, ha), (b, -hb)]), steps)?;
                    let mp = gamma(chart, &shifted(x, &[(a, -ha), (b, hb)]), steps)?;
                    let mm = gamma(chart, &shifted(x, &[(a, -ha), (b, -hb)]), steps)?;
                    (0..d3)
                        .map(|k| (pp[k] - pm[k] - mp[k] + mm[k]) / (4.0 * ha * hb))
                        .collect()
                };
                for k in 0..d3 {
                    ddgam[(a * d + b) * d3 + k] = block[k];
                    ddgam[(b * d + a) * d3 + k] = block[k];
                }
            }
        }
        Ok(Geometry { d, g, gam, dgam, ddgam })
    }

    fn gam(&self, l: usize, j: usize, k: usize) -> f64 {
        self.gam[(l * self.d + j) * self.d + k]
    }

    fn dgam(&self, a: usize, l: usize, j: usize, k: usize) -> f64 {
        let d = self.d;
        self.dgam[((a * d + l) * d + j) * d + k]
    }

    fn ddgam(&self, a: usize, b: usize, l: usize, j: usize, k: usize) -> f64 {
        let d = self.d;
        self.ddgam[(((a * d + b) * d + l) * d + j) * d + k]
    }

    /// `R_std^l_{ijk}`, flattened `[l][i][j][k]`.
    fn riemann_std(&self) -> Vec<f64> {
        let d = self.d;
        let mut out = vec![0.0; d * d * d * d];
        for l in 0..d {
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        let mut v = self.dgam(i, l, j, k) - self.dgam(j, l, i, k);
                        for m in 0..d {
                            v += self.gam(l, i, m) * self.gam(m, j, k) - self.gam(l, j, m) * self.gam(m, i, k);
                        }
                        out[((l * d + i) * d + j) * d + k] = v;
                    }
                }
            }
        }
        out
    }

    /// `∂_a R_std^l_{ijk}`, flattened `[a][l][i][j][k]`.
    fn d_riemann_std(&self) -> Vec<f64> {
        let d = self.d;
        let d4 = d * d * d * d;
        let mut out = vec![0.0; d * d4];
        for a in 0..d {
            for l in 0..d {
                for i in 0..d {
                    for j in 0..d {
                        for k in 0..d {
                            let mut v = self.ddgam(a, i, l, j, k) - self.ddgam(a, j, l, i, k);
                            for m in 0..d {
                                v += self.dgam(a, l, i, m) * self.gam(m, j, k)
                                    + self.gam(l, i, m) * self.dgam(a, m, j, k)
                                    - self.dgam(a, l, j, m) * self.gam(m, i, k)
                                    - self.gam(l, j, m) * self.dgam(a, m, i, k);
                            }
                            out[a * d4 + ((l * d + i) * d + j) * d + k] = v;
                        }
                    }
                }
            }
        }
        out
    }

    /// Lowered-index convention `R_{ijkl} = g_{lm} R_std^m_{jik}` in coordinates.
    fn riemann_lowered(&self, rstd: &[f64]) -> Vec<f64> {
        let d = self.d;
        let mut out = vec![0.0; d * d * d * d];
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let mut v = 0.0;
                        for m in 0..d {
                            v += self.g[l * d + m] * rstd[((m * d + j) * d + i) * d + k];
                        }
                        out[((i * d + j) * d + k) * d + l] = v;
                    }
                }
            }
        }
        out
    }

    /// `Ric_{jk} = R_std^i_{ijk}`.
    fn ricci(&self, rstd: &[f64]) -> Vec<f64> {
        let d = self.d;
        let mut out = vec![0.0; d * d];
        for j in 0..d {
            for k in 0..d {
                out[j * d + k] = (0..d).map(|i| rstd[((i * d + i) * d + j) * d + k]).sum();
            }
        }
        out
    }

    /// `∇_a Ric_{jk}` flattened `[j][k][a]` (derivative index last).
    fn nabla_ricci(&self) -> Vec<f64> {
        let d = self.d;
        let rstd = self.riemann_std();
        let ric = self.ricci(&rstd);
        let drs = self.d_riemann_std();
        let d4 = d * d * d * d;
        let mut out = vec![0.0; d * d * d];
        for a in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let mut v: f64 = (0..d).map(|i| drs[a * d4 + ((i * d + i) * d + j) * d + k]).sum();
                    for m in 0..d {
                        v -= self.gam(m, a, j) * ric[m * d + k] + self.gam(m, a, k) * ric[j * d + m];
                    }
                    out[(j * d + k) * d + a] = v;
                }
            }
        }
        out
    }
}

/// Gram–Schmidt orthonormal frame; column `a` is `e_a` in coordinates.
/// `order` lists the coordinate vectors in the order they are orthogonalized.
fn frame(g: &[f64], d: usize, order: &[usize]) -> Vec<f64> {
    let ip = |u: &[f64], v: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += u[i] * g[i * d + j] * v[j];
            }
        }
        s
    };
    let mut vecs: Vec<Vec<f64>> = Vec::new();
    for &c in order {
        let mut v = vec![0.0; d];
        v[c] = 1.0;
        for u in &vecs {
            let p = ip(&v, u);
            for i in 0..d {
                v[i] -= p * u[i];
            }
        }
        let norm = ip(&v, &v).sqrt();
        vecs.push(v.iter().map(|x| x / norm).collect());
    }
    let mut e = vec![0.0; d * d];
    for (a, v) in vecs.iter().enumerate() {
        for mu in 0..d {
            e[mu * d + a] = v[mu];
        }
    }
    e
}

/// Express a covariant tensor of rank `rank` in the frame `e`.
fn to_frame(t: &[f64], rank: usize, d: usize, e: &[f64]) -> Vec<f64> {
    let mut cur = t.to_vec();
    let total = d.pow(rank as u32);
    for slot in 0..rank {
        let stride = d.pow((rank - 1 - slot) as u32);
        let mut next = vec![0.0; total];
        for idx in 0..total {
            let a = (idx / stride) % d;
            let base = idx - a * stride;
            let mut s = 0.0;
            for mu in 0..d {
                s += e[mu * d + a] * cur[base + mu * stride];
            }
            next[idx] = s;
        }
        cur = next;
    }
    cur
}

#[derive(Debug, Clone, PartialEq)]
pub struct Christoffels {
    pub dim: usize,
    data: Vec<f64>,
}

impl Christoffels {
    /// `Γ^l_{jk}`.
    pub fn get(&self, l: usize, j: usize, k: usize) -> f64 {
        self.data[(l * self.dim + j) * self.dim + k]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn christoffels(chart: &Chart, x: &[f64], h: f64) -> Result<Christoffels, OracleError> {
    check_point(chart, x)?;
    let steps = chart.steps_at(x, h);
    Ok(Christoffels {
        dim: chart.dim(),
        data: gamma(chart, x, &steps)?,
    })
}

/// Curvature in an orthonormal frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameCurvature {
    pub dim: usize,
    riem: Vec<f64>,
    ric: Vec<f64>,
}

impl FrameCurvature {
    pub fn riem(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let d = self.dim;
        self.riem[((i * d + j) * d + k) * d + l]
    }

    pub fn ric(&self, i: usize, j: usize) -> f64 {
        self.ric[i * self.dim + j]
    }

    /// Sectional curvature of the plane `e_a ∧ e_b`.
    pub fn sectional(&self, a: usize, b: usize) -> f64 {
        self.riem(a, b, a, b)
    }
}

/// Identity frame ordering `0, 1, …, d-1`.
pub fn natural_order(d: usize) -> Vec<usize> {
    (0..d).collect()
}

/// Reversed frame ordering, for frame-independence checks.
pub fn reversed_order(d: usize) -> Vec<usize> {
    (0..d).rev().collect()
}

pub fn riemann(chart: &Chart, x: &[f64], h: f64) -> Result<FrameCurvature, OracleError> {
    riemann_in_frame(chart, x, h, &natural_order(chart.dim()))
}

pub fn riemann_in_frame(chart: &Chart, x: &[f64], h: f64, order: &[usize]) -> Result<FrameCurvature, OracleError> {
    check_point(chart, x)?;
    let steps = chart.steps_at(x, h);
    let geo = Geometry::new(chart, x, &steps)?;
    let d = geo.d;
    let e = frame(&geo.g, d, order);
    let rstd = geo.riemann_std();
    let riem = to_frame(&geo.riemann_lowered(&rstd), 4, d, &e);
    let ric = to_frame(&geo.ricci(&rstd), 2, d, &e);
    Ok(FrameCurvature { dim: d, riem, ric })
}

/// Frame Hessian of a function given its coordinate gradient and Hessian.
pub fn hessian_in_frame(chart: &Chart, x: &[f64], h: f64, grad: &[f64], hess: &[f64]) -> Result<Vec<f64>, OracleError> {
    check_point(chart, x)?;
    let d = chart.dim();
    let steps = chart.steps_at(x, h);
    let gam = gamma(chart, x, &steps)?;
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let corr: f64 = (0..d).map(|m| gam[(m * d + i) * d + j] * grad[m]).sum();
            out[i * d + j] = hess[i * d + j] - corr;
        }
    }
    let e = frame(&chart.metric(x), d, &natural_order(d));
    Ok(to_frame(&out, 2, d, &e))
}

fn frobenius(t: &[f64]) -> f64 {
    t.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `∇Ric` in the frame, derivative index last.
fn nabla_ricci_frame(chart: &Chart, x: &[f64], steps: &[f64]) -> Result<Vec<f64>, OracleError> {
    let geo = Geometry::new(chart, x, steps)?;
    let e = frame(&geo.g, geo.d, &natural_order(geo.d));
    Ok(to_frame(&geo.nabla_ricci(), 3, geo.d, &e))
}

/// `‖∇Ric‖` with explicit per-coordinate steps, no extrapolation.
pub fn parallel_ricci_norm(chart: &Chart, x: &[f64], steps: &[f64]) -> Result<f64, OracleError> {
    check_point(chart, x)?;
    Ok(frobenius(&nabla_ricci_frame(chart, x, steps)?))
}

/// `‖∇Ric‖` from steps `s` and `s/2` combined by one Richardson step.
pub fn check_parallel_ricci_steps(chart: &Chart, x: &[f64], steps: &[f64]) -> Result<f64, OracleError> {
    check_point(chart, x)?;
    let coarse = nabla_ricci_frame(chart, x, steps)?;
    let half: Vec<f64> = steps.iter().map(|s| 0.5 * s).collect();
    let fine = nabla_ricci_frame(chart, x, &half)?;
    let extrapolated: Vec<f64> = fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect();
    Ok(frobenius(&extrapolated))
}

/// Frobenius norm of `∇Ric` in an orthonormal frame.
pub fn check_parallel_ricci(chart: &Chart, x: &[f64], h: f64) -> Result<f64, OracleError> {
    check_point(chart, x)?;
    check_parallel_ricci_steps(chart, x, &chart.steps_at(x, h))
}

/// Residual tensors of the five commutator identities, in the frame.
fn commutator_tensors(
    chart: &Chart,
    f: &Expr,
    x: &[f64],
    steps: &[f64],
    order: &[usize],
) -> Result<[Vec<f64>; 5], OracleError> {
    let geo = Geometry::new(chart, x, steps)?;
    let d = geo.d;
    let p = Partials::new(f, d, x);
    let gam = |l, j, k| geo.gam(l, j, k);
    // coordinate tensors: df, H = ∇²f, T3 = ∇³f, T4 = ∇⁴f
    let df: Vec<f64> = (0..d).map(|i| p.get(&[i])).collect();
    let idx2 = |i: usize, j: usize| i * d + j;
    let idx3 = |i: usize, j: usize, k: usize| (i * d + j) * d + k;
    let idx4 = |i: usize, j: usize, k: usize, l: usize| ((i * d + j) * d + k) * d + l;
    let mut hess = vec![0.0; d * d];
    let mut dh = vec![0.0; d * d * d]; // ∂_k H_ij at [i][j][k]
    let mut ddh = vec![0.0; d * d * d * d]; // ∂_l ∂_k H_ij at [i][j][k][l]
    for i in 0..d {
        for j in 0..d {
            let mut h = p.get(&[i, j]);
            for m in 0..d {
                h -= gam(m, i, j) * df[m];
            }
            hess[idx2(i, j)] = h;
            for k in 0..d {
                let mut v = p.get(&[i, j, k]);
                for m in 0..d {
                    v -= geo.dgam(k, m, i, j) * df[m] + gam(m, i, j) * p.get(&[m, k]);
                }
                dh[idx3(i, j, k)] = v;
                for l in 0..d {
                    let mut w = p.get(&[i, j, k, l]);
                    for m in 0..d {
                        w -= geo.ddgam(l, k, m, i, j) * df[m]
                            + geo.dgam(k, m, i, j) * p.get(&[m, l])
                            + geo.dgam(l, m, i, j) * p.get(&[m, k])
                            + gam(m, i, j) * p.get(&[m, k, l]);
                    }
                    ddh[idx4(i, j, k, l)] = w;
                }
            }
        }
    }
    let mut t3 = vec![0.0; d * d * d];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let mut v = dh[idx3(i, j, k)];
                for m in 0..d {
                    v -= gam(m, k, i) * hess[idx2(m, j)] + gam(m, k, j) * hess[idx2(i, m)];
                }
                t3[idx3(i, j, k)] = v;
            }
        }
    }
    // ∂_l T3_ijk
    let mut t4 = vec![0.0; d * d * d * d];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let mut dt3 = ddh[idx4(i, j, k, l)];
                    for m in 0..d {
                        dt3 -= geo.dgam(l, m, k, i) * hess[idx2(m, j)]
                            + gam(m, k, i) * dh[idx3(m, j, l)]
                            + geo.dgam(l, m, k, j) * hess[idx2(i, m)]
                            + gam(m, k, j) * dh[idx3(i, m, l)];
                    }
                    let mut v = dt3;
                    for m in 0..d {
                        v -= gam(m, l, i) * t3[idx3(m, j, k)]
                            + gam(m, l, j) * t3[idx3(i, m, k)]
                            + gam(m, l, k) * t3[idx3(i, j, m)];
                    }
                    t4[idx4(i, j, k, l)] = v;
                }
            }
        }
    }
    let e = frame(&geo.g, d, order);
    let rstd = geo.riemann_std();
    let rm = to_frame(&geo.riemann_lowered(&rstd), 4, d, &e);
    let ric = to_frame(&geo.ricci(&rstd), 2, d, &e);
    let df = to_frame(&df, 1, d, &e);
    let h2 = to_frame(&hess, 2, d, &e);
    let t3 = to_frame(&t3, 3, d, &e);
    let t4 = to_frame(&t4, 4, d, &e);

    let mut r1 = vec![0.0; d * d];
    let mut r3 = vec![0.0; d];
    let mut r2 = vec![0.0; d * d * d];
    let mut r4 = vec![0.0; d * d * d * d];
    let mut r5 = vec![0.0; d * d];
    for i in 0..d {
        let mut lap_i = 0.0;
        let mut ric_f = 0.0;
        for k in 0..d {
            lap_i += t3[idx3(i, k, k)] - t3[idx3(k, k, i)];
            ric_f += ric[idx2(i, k)] * df[k];
        }
        r3[i] = lap_i - ric_f;
        for j in 0..d {
            r1[idx2(i, j)] = h2[idx2(i, j)] - h2[idx2(j, i)];
            for k in 0..d {
                let mut v = t3[idx3(i, j, k)] - t3[idx3(i, k, j)];
                for l in 0..d {
                    v -= rm[idx4(j, k, l, i)] * df[l];
                }
                r2[idx3(i, j, k)] = v;
                for l in 0..d {
                    let mut w = t4[idx4(i, j, k, l)] - t4[idx4(i, j, l, k)];
                    for m in 0..d {
                        w -= rm[idx4(k, l, m, j)] * h2[idx2(i, m)] + rm[idx4(k, l, m, i)] * h2[idx2(j, m)];
                    }
                    r4[idx4(i, j, k, l)] = w;
                }
            }
            let mut v = 0.0;
            for k in 0..d {
                v += t4[idx4(i, j, k, k)] - t4[idx4(k, k, i, j)];
                v -= ric[idx2(j, k)] * h2[idx2(i, k)] + ric[idx2(i, k)] * h2[idx2(j, k)];
                for l in 0..d {
                    v += 2.0 * rm[idx4(i, k, j, l)] * h2[idx2(k, l)];
                }
            }
            r5[idx2(i, j)] = v;
        }
    }
    Ok([r1, r2, r3, r4, r5])
}

fn max_abs(t: &[f64]) -> f64 {
    t.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Residuals below this are exact zeros up to roundoff.
pub const RESIDUAL_FLOOR: f64 = 1e-12;

/// A ratio is only measured when the residual exceeds this multiple of the
/// estimated roundoff noise, which keeps the noise contribution to the ratio
/// below about 6%.
pub const NOISE_MARGIN: f64 = 20.0;

/// Relative step perturbation used to expose roundoff: truncation error moves
/// by about twice this fraction, roundoff decorrelates completely.
const JITTER: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommutatorReport {
    pub h: f64,
    /// Max-abs residual of each identity at step `h`.
    pub residuals: [f64; 5],
    /// The same at `2h`.
    pub residuals_double: [f64; 5],
    /// Estimated roundoff noise in the residuals at `h`.
    pub noise: [f64; 5],
    /// `residual(2h) / residual(h)`; `None` at the roundoff floor.
    pub ratios: [Option<f64>; 5],
    /// Error constants `K = residual(h) / h²`.
    pub constants: [f64; 5],
    /// Residuals after one Richardson step on the `2h`, `h` residual tensors.
    pub extrapolated: [f64; 5],
    /// Halving the step made a residual above the floor grow.
    pub roundoff_dominated: [bool; 5],
}

impl CommutatorReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, v| m.max(*v))
    }
}

pub fn check_commutators(chart: &Chart, f: &Expr, x: &[f64], h: f64) -> Result<CommutatorReport, OracleError> {
    check_commutators_in_frame(chart, f, x, h, &natural_order(chart.dim()))
}

/// Evaluates the five commutator identities for `f` at `x` with steps `2h` and
/// `h`, so the reported residuals belong to `h` and the convergence ratio comes
/// from halving `2h`. A third evaluation at a slightly jittered `h` estimates
/// the roundoff floor.
pub fn check_commutators_in_frame(
    chart: &Chart,
    f: &Expr,
    x: &[f64],
    h: f64,
    order: &[usize],
) -> Result<CommutatorReport, OracleError> {
    check_point(chart, x)?;
    let steps = chart.steps_at(x, h);
    let scaled = |k: f64| -> Vec<f64> { steps.iter().map(|s| k * s).collect() };
    let coarse = commutator_tensors(chart, f, x, &scaled(2.0), order)?;
    let fine = commutator_tensors(chart, f, x, &steps, order)?;
    let jitter = commutator_tensors(chart, f, x, &scaled(1.0 + JITTER), order)?;
    let mut rep = CommutatorReport {
        h,
        residuals: [0.0; 5],
        residuals_double: [0.0; 5],
        noise: [0.0; 5],
        ratios: [None; 5],
        constants: [0.0; 5],
        extrapolated: [0.0; 5],
        roundoff_dominated: [false; 5],
    };
    for k in 0..5 {
        let (a, b) = (max_abs(&coarse[k]), max_abs(&fine[k]));
        let diff: Vec<f64> = fine[k].iter().zip(&jitter[k]).map(|(p, q)| p - q).collect();
        let noise = max_abs(&diff);
        rep.residuals[k] = b;
        rep.residuals_double[k] = a;
        rep.noise[k] = noise;
        rep.constants[k] = b / (h * h);
        if a > RESIDUAL_FLOOR {
            rep.roundoff_dominated[k] = b > a;
            if b > NOISE_MARGIN * noise {
                rep.ratios[k] = Some(a / b);
            }
        }
        let ex: Vec<f64> = fine[k]
            .iter()
            .zip(&coarse[k])
            .map(|(f, c)| (4.0 * f - c) / 3.0)
            .collect();
        rep.extrapolated[k] = max_abs(&ex);
    }
    Ok(rep)
}

/// [`check_commutators`] at every probe point; points are independent.
pub fn check_commutators_probes(
    chart: &Chart,
    f: &Expr,
    points: &[Vec<f64>],
    h: f64,
    exec: Exec,
) -> Result<Vec<CommutatorReport>, OracleError> {
    exec.try_map(points, |x| check_commutators(chart, f, x, h))
}
