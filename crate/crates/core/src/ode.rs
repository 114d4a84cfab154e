//! Adaptive Dormand–Prince 5(4) for small autonomous systems. The stage
//! nodes are not needed since the right-hand side has no time argument.
//!
//! Component 0 is treated as a radius: steps that would cross `floor` are
//! shortened until they land on it, and a run stops once it exceeds `cap`.

const A: [&[f64]; 6] = [
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ],
    &[
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Fifth-order weights minus the embedded fourth-order ones.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

pub type State = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub rtol: f64,
    pub atol: f64,
    pub floor: f64,
    pub cap: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stop {
    Completed,
    Floor,
    Cap,
    StepLimit,
}

#[derive(Debug, Clone)]
pub struct Run {
    pub t: f64,
    pub y: State,
    pub stop: Stop,
    /// Accepted states, starting with the initial one.
    pub trace: Vec<(f64, State)>,
}

fn axpy(y: &State, h: f64, terms: &[f64], k: &[State; 7]) -> State {
    let mut out = *y;
    for (j, a) in terms.iter().enumerate() {
        for i in 0..3 {
            out[i] += h * a * k[j][i];
        }
    }
    out
}

/// One step of size `h`. Returns the new state and the scaled error norm.
fn step(rhs: &dyn Fn(&State) -> State, y: &State, k1: State, h: f64, s: &Settings) -> (State, f64, State) {
    let mut k = [[0.0; 3]; 7];
    k[0] = k1;
    for st in 0..6 {
        let yi = axpy(y, h, A[st], &k);
        k[st + 1] = rhs(&yi);
    }
    let y5 = axpy(y, h, A[5], &k);
    let mut acc = 0.0;
    for i in 0..3 {
        let e: f64 = (0..7).map(|j| E[j] * k[j][i]).sum::<f64>() * h;
        let sc = s.atol + s.rtol * y[i].abs().max(y5[i].abs());
        acc += (e / sc).powi(2);
    }
    // FSAL: the last stage is the derivative at the new state
    (y5, (acc / 3.0).sqrt(), k[6])
}

/// Integrate from `t = 0` to `t_end > 0`.
pub fn integrate(rhs: &dyn Fn(&State) -> State, y0: State, t_end: f64, s: &Settings, record: bool) -> Run {
    let mut t = 0.0;
    let mut y = y0;
    let mut k1 = rhs(&y);
    let mut h = (t_end * 1e-3).min(1e-2 * y0[0].abs().max(s.floor));
    let mut trace = if record { vec![(t, y)] } else { Vec::new() };
    let mut stop = Stop::StepLimit;
    for _ in 0..s.max_steps {
        let last = t + h >= t_end;
        let hh = if last { t_end - t } else { h };
        let (yn, err, kn) = step(rhs, &y, k1, hh, s);
        if !err.is_finite() || !yn.iter().all(|v| v.is_finite()) {
            h = 0.25 * hh;
            continue;
        }
        if err > 1.0 {
            h = hh * (0.9 * err.powf(-0.2)).max(0.2);
            continue;
        }
        if yn[0] < s.floor * (1.0 - 1e-12) {
            // aim at the floor by secant on the radius
            let frac = (y[0] - s.floor) / (y[0] - yn[0]);
            h = hh * frac.clamp(1e-3, 1.0 - 1e-12);
            if y[0] - s.floor <= 1e-9 * s.floor {
                stop = Stop::Floor;
                break;
            }
            continue;
        }
        t = if last { t_end } else { t + hh };
        y = yn;
        k1 = kn;
        if record {
            trace.push((t, y));
        }
        if y[0] <= s.floor * (1.0 + 1e-9) {
            stop = Stop::Floor;
            break;
        }
        if y[0] > s.cap {
            stop = Stop::Cap;
            break;
        }
        if last {
            stop = Stop::Completed;
            break;
        }
        let grow = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = hh * grow;
    }
    Run { t, y, stop, trace }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> Settings {
        Settings {
            rtol: 1e-12,
            atol: 1e-14,
            floor: 1e-4,
            cap: 1e6,
            max_steps: 100_000,
        }
    }

    #[test]
    fn harmonic_oscillator() {
        // r stays near 2, the other components rotate
        let rhs = |y: &State| [0.0, y[2], -y[1]];
        let run = integrate(&rhs, [2.0, 0.0, 1.0], 10.0, &settings(), false);
        assert_eq!(run.stop, Stop::Completed);
        assert!((run.t - 10.0).abs() < 1e-15);
        assert!((run.y[1] - 10f64.sin()).abs() < 1e-10);
        assert!((run.y[2] - 10f64.cos()).abs() < 1e-10);
    }

    #[test]
    fn lands_on_floor() {
        let rhs = |_: &State| [-1.0, 0.0, 0.0];
        let run = integrate(&rhs, [1.0, 0.0, 0.0], 5.0, &settings(), true);
        assert_eq!(run.stop, Stop::Floor);
        assert!((run.y[0] - 1e-4).abs() < 1e-12);
        assert!((run.t - (1.0 - 1e-4)).abs() < 1e-12);
    }
}
