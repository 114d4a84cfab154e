//! Clamped cubic spline through sampled values.

/// Value and first three derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub f: f64,
    pub fp: f64,
    pub fpp: f64,
    pub fppp: f64,
}

#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    /// Spline with prescribed end slopes. `x` must be strictly increasing
    /// with at least two knots.
    pub fn clamped(x: Vec<f64>, y: Vec<f64>, slope_start: f64, slope_end: f64) -> Self {
        let n = x.len();
        assert!(n >= 2 && y.len() == n, "spline needs matching knots and values");
        // tridiagonal system for the knot second derivatives
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        diag[0] = h[0] / 3.0;
        upper[0] = h[0] / 6.0;
        rhs[0] = (y[1] - y[0]) / h[0] - slope_start;
        for i in 1..n - 1 {
            diag[i] = (h[i - 1] + h[i]) / 3.0;
            upper[i] = h[i] / 6.0;
            rhs[i] = (y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1];
        }
        diag[n - 1] = h[n - 2] / 3.0;
        rhs[n - 1] = slope_end - (y[n - 1] - y[n - 2]) / h[n - 2];
        // Thomas algorithm; the lower band equals the upper band shifted by one
        let lower = |i: usize| h[i - 1] / 6.0;
        for i in 1..n {
            let w = lower(i) / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut m = vec![0.0; n];
        m[n - 1] = rhs[n - 1] / diag[n - 1];
        for i in (0..n - 1).rev() {
            m[i] = (rhs[i] - upper[i] * m[i + 1]) / diag[i];
        }
        CubicSpline { x, y, m }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    /// Evaluate inside the domain; points outside use the end cubic.
    pub fn eval(&self, t: f64) -> Jet {
        let n = self.x.len();
        let i = match self.x.partition_point(|&k| k <= t) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        Jet {
            f: a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0,
            fp: (y1 - y0) / h + ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0,
            fpp: a * m0 + b * m1,
            fppp: (m1 - m0) / h,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubics_exactly() {
        let f = |x: f64| 2.0 * x * x * x - x + 1.0;
        let fp = |x: f64| 6.0 * x * x - 1.0;
        let xs: Vec<f64> = (0..7).map(|i| 0.5 + 0.3 * i as f64 + 0.01 * (i * i) as f64).collect();
        let ys = xs.iter().map(|&x| f(x)).collect();
        let s = CubicSpline::clamped(xs.clone(), ys, fp(xs[0]), fp(xs[6]));
        for t in [0.55, 1.0, 1.37, 2.2] {
            let j = s.eval(t);
            assert!((j.f - f(t)).abs() < 1e-12);
            assert!((j.fp - fp(t)).abs() < 1e-11);
            assert!((j.fpp - 12.0 * t).abs() < 1e-10);
            assert!((j.fppp - 12.0).abs() < 1e-9);
        }
    }

    #[test]
    fn smooth_function_converges() {
        let xs: Vec<f64> = (0..=200).map(|i| 1.0 + i as f64 * 0.02).collect();
        let ys = xs.iter().map(|x| x.ln()).collect();
        let s = CubicSpline::clamped(xs, ys, 1.0, 1.0 / 5.0);
        let j = s.eval(2.345);
        assert!((j.f - 2.345f64.ln()).abs() < 1e-9);
        assert!((j.fpp + 1.0 / (2.345f64 * 2.345)).abs() < 1e-4);
    }
}
