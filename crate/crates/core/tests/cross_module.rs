//! Finite-difference oracle against the closed forms of the model and Green
//! modules, and frame independence of the oracle itself.

use harnack_core::fd_oracle::{
    check_commutators_in_frame, hessian_in_frame, natural_order, reversed_order, riemann, riemann_in_frame, Chart,
};
use harnack_core::green::compute_profile;
use harnack_core::models::{CustomTable, ModelManifold, Profile};
use harnack_core::par::Exec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn presets(n: usize) -> Vec<ModelManifold> {
    // a sampled profile close to the smoothed cone, to exercise the spline path
    let table = CustomTable::sample("sampled", 200, 0.05, 50.0, |r| {
        let m = ModelManifold::smoothed_cone(n, 0.7, 2.0).unwrap();
        let j = m.jet(r);
        (j.f, j.fp, j.fpp)
    })
    .unwrap();
    vec![
        ModelManifold::euclidean(n).unwrap(),
        ModelManifold::cone(n, 0.5).unwrap(),
        ModelManifold::smoothed_cone(n, 0.5, 1.0).unwrap(),
        ModelManifold::new(n, Profile::Custom(Box::new(table))).unwrap(),
    ]
}

fn random_radii(seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..5).map(|_| (rng.gen_range(0.1f64.ln()..10f64.ln())).exp()).collect()
}

/// Error of the oracle at steps `h` and `h/2`.
fn errors(f: impl Fn(f64) -> f64, exact: f64, h: f64) -> (f64, f64) {
    ((f(h) - exact).abs(), (f(0.5 * h) - exact).abs())
}

/// Second order: small at `h`, and either at roundoff level or shrinking
/// by roughly four when `h` is halved. Spline profiles are only C², so
/// stencils straddling a knot lose the clean ratio and only the size counts.
fn assert_second_order(label: &str, (e1, e2): (f64, f64), scale: f64, smooth: bool) {
    let s = scale.max(1.0);
    assert!(e1 <= 1e-4 * s, "{label}: error {e1:e} at h");
    if smooth && e2 > 1e-9 * s {
        let ratio = e1 / e2;
        assert!((3.0..5.0).contains(&ratio), "{label}: ratio {ratio} ({e1:e} -> {e2:e})");
    }
}

#[test]
fn curvature_matches_closed_form() {
    for n in [3, 4] {
        for (k, model) in presets(n).into_iter().enumerate() {
            let chart = Chart::warped(model.clone());
            let smooth = !matches!(model.profile(), Profile::Custom(_));
            for r in random_radii(17 + k as u64) {
                let x = chart.default_point(r);
                let exact = model.curvature_at(r).unwrap();
                let label = format!("{} n={n} r={r}", model.id());
                let fd = |h: f64| riemann(&chart, &x, h).unwrap();
                // angular steps are fixed, so errors scale with 1/r² even where the model is flat
                let scale = exact.k_rad.abs().max(exact.k_tan.abs()).max(1.0 / (r * r));
                assert_second_order(
                    &format!("{label} k_rad"),
                    errors(|h| fd(h).sectional(0, 1), exact.k_rad, 1e-3),
                    scale,
                    smooth,
                );
                assert_second_order(
                    &format!("{label} ric_rad"),
                    errors(|h| fd(h).ric(0, 0), exact.ric_rad, 1e-3),
                    scale,
                    smooth,
                );
                assert_second_order(
                    &format!("{label} ric_tan"),
                    errors(|h| fd(h).ric(1, 1), exact.ric_tan, 1e-3),
                    scale,
                    smooth,
                );
                if n > 2 {
                    assert_second_order(
                        &format!("{label} k_tan"),
                        errors(|h| fd(h).sectional(1, 2), exact.k_tan, 1e-3),
                        scale,
                        smooth,
                    );
                }
            }
        }
    }
}

#[test]
fn hessian_of_b2_matches_closed_form() {
    for n in [3, 4, 5] {
        for (k, model) in presets(n).into_iter().enumerate() {
            let radii = random_radii(101 + k as u64);
            let mut grid = radii.clone();
            grid.sort_by(f64::total_cmp);
            let profile = compute_profile(&model, &grid, Exec::Sequential).unwrap();
            let chart = Chart::warped(model.clone());
            let smooth = !matches!(model.profile(), Profile::Custom(_));
            let d = chart.dim();
            for &r in &radii {
                let s = profile.at(r).unwrap();
                let x = chart.default_point(r);
                // b² depends on r alone
                let mut grad = vec![0.0; d];
                grad[0] = s.b2p;
                let mut hess = vec![0.0; d * d];
                hess[0] = s.b2pp;
                let fd = |h: f64| hessian_in_frame(&chart, &x, h, &grad, &hess).unwrap();
                let label = format!("{} n={n} r={r}", model.id());
                let scale = s.mu_rad.abs().max(s.mu_tan.abs()).max(s.b2 / (r * r));
                assert_second_order(
                    &format!("{label} mu_rad"),
                    errors(|h| fd(h)[0], s.mu_rad, 1e-3),
                    scale,
                    smooth,
                );
                assert_second_order(
                    &format!("{label} mu_tan"),
                    errors(|h| fd(h)[d + 1], s.mu_tan, 1e-3),
                    scale,
                    smooth,
                );
                assert!(fd(1e-3)[1].abs() < 1e-9, "{label}: off-diagonal");
            }
        }
    }
}

#[test]
fn scalar_curvatures_do_not_depend_on_the_frame() {
    for chart in [Chart::round_sphere(1.0), Chart::s2xr2(), Chart::cone(0.5, 4).unwrap()] {
        let d = chart.dim();
        let x = chart.default_point(1.3);
        let a = riemann_in_frame(&chart, &x, 1e-3, &natural_order(d)).unwrap();
        let b = riemann_in_frame(&chart, &x, 1e-3, &reversed_order(d)).unwrap();
        let trace = |k: &harnack_core::fd_oracle::FrameCurvature| (0..d).map(|i| k.ric(i, i)).sum::<f64>();
        let full = |k: &harnack_core::fd_oracle::FrameCurvature| {
            let mut s = 0.0;
            for i in 0..d {
                for j in 0..d {
                    for p in 0..d {
                        for q in 0..d {
                            s += k.riem(i, j, p, q).powi(2);
                        }
                    }
                }
            }
            s
        };
        assert!((trace(&a) - trace(&b)).abs() < 1e-9, "{}", chart.name());
        assert!((full(&a) - full(&b)).abs() < 1e-8, "{}", chart.name());
    }
}

#[test]
fn commutator_residuals_do_not_depend_on_the_frame() {
    for chart in [Chart::round_sphere(1.0), Chart::s2xr2()] {
        let d = chart.dim();
        let f = chart.default_function();
        for x in chart.probe_points(4, 7) {
            let a = check_commutators_in_frame(&chart, &f, &x, 1e-3, &natural_order(d)).unwrap();
            let b = check_commutators_in_frame(&chart, &f, &x, 1e-3, &reversed_order(d)).unwrap();
            assert!(a.max_residual() <= 1e-4 && b.max_residual() <= 1e-4, "{a:?} {b:?}");
        }
    }
}
