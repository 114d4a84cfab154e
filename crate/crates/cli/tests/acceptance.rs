//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Run with `cargo test -p harnack-cli --test acceptance`.

use std::process::Command;
use std::time::{Duration, Instant};

use harnack_cli::commands::sample_pairs;
use harnack_cli::RunConfig;
use harnack_core::fd_oracle::{check_commutators_probes, check_parallel_ricci, Chart};
use harnack_core::geodesic::{corollary_batch, GeodesicOptions};
use harnack_core::green::{compute_profile, default_grid};
use harnack_core::harnack::{audit_proof_terms, consistency_hess_vs_h, minimal_c, RunOptions};
use harnack_core::models::{log_grid, CustomTable, ModelManifold, Profile};
use harnack_core::par::Exec;
use harnack_symbolic::verify_identity;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

const CONES: [f64; 4] = [0.3, 0.5, 0.8, 1.0];

/// Every preset family, including a spline table sampled from a smoothed cone.
fn presets(n: usize) -> Vec<ModelManifold> {
    let mut out = vec![ModelManifold::euclidean(n).unwrap()];
    out.extend(CONES.iter().map(|&c| ModelManifold::cone(n, c).unwrap()));
    out.push(ModelManifold::smoothed_cone(n, 0.5, 1.0).unwrap());
    let table = CustomTable::sample("sampled", 200, 0.05, 50.0, |r| {
        let j = ModelManifold::smoothed_cone(n, 0.7, 2.0).unwrap().jet(r);
        (j.f, j.fp, j.fpp)
    })
    .unwrap();
    out.push(ModelManifold::new(n, Profile::Custom(Box::new(table))).unwrap());
    out
}

fn euclidean_exactness() -> Outcome {
    let opts = RunOptions {
        r_min: 0.1,
        r_max: 50.0,
        ..RunOptions::default()
    };
    let mut worst: f64 = 0.0;
    for n in 3..=6 {
        let m = ModelManifold::euclidean(n).map_err(err)?;
        let p = compute_profile(&m, &log_grid(opts.r_min, opts.r_max, opts.grid_size), Exec::default()).map_err(err)?;
        for s in &p.samples {
            worst = worst.max((s.mu_rad - 2.0).abs()).max((s.mu_tan - 2.0).abs());
        }
        let mc = minimal_c(&m, &opts, Exec::default()).map_err(err)?;
        ensure((mc.value - 2.0).abs() <= 1e-6, || {
            format!("n={n}: minimal_C = {}", mc.value)
        })?;
    }
    ensure(worst <= 1e-6, || format!("eigenvalue error {worst:e}"))?;
    Ok(format!("max |mu - 2| = {worst:.2e}"))
}

fn gradient_estimate() -> Outcome {
    let grid = default_grid();
    let mut worst: f64 = 0.0;
    for n in 3..=5 {
        let mut models = vec![
            ModelManifold::euclidean(n).unwrap(),
            ModelManifold::smoothed_cone(n, 0.5, 1.0).unwrap(),
        ];
        models.extend(CONES.iter().map(|&c| ModelManifold::cone(n, c).unwrap()));
        for m in &models {
            let p = compute_profile(m, &grid, Exec::default()).map_err(err)?;
            let g = p.samples.iter().map(|s| s.grad_b).fold(0.0, f64::max);
            ensure(g <= 1.0 + 1e-8, || format!("{m}: max |grad b| = {g}"))?;
            worst = worst.max(g);
        }
    }
    Ok(format!("max |grad b| = {worst:.16}"))
}

fn cone_closed_form() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 3..=5 {
        for c in CONES {
            let m = ModelManifold::cone(n, c).map_err(err)?;
            let mc = minimal_c(&m, &RunOptions::default(), Exec::default()).map_err(err)?;
            // G = c^{1-n} r^{2-n} gives b² = c^{2(n-1)/(n-2)} r², a multiple of the flat b²
            let nf = n as f64;
            let b2_scale = c.powf(1.0 - nf).powf(2.0 / (2.0 - nf));
            let err = (mc.value - 2.0 * b2_scale).abs();
            ensure(err <= 1e-6, || {
                format!("cone({c}, {n}): {} vs {}", mc.value, 2.0 * b2_scale)
            })?;
            worst = worst.max(err);
        }
    }
    Ok(format!("max |minimal_C - 2c^(2(n-1)/(n-2))| = {worst:.2e}"))
}

fn symbolic_zero_reduction() -> Outcome {
    let names = [
        "misc.1",
        "misc.2",
        "misc.3",
        "misc.4",
        "misc.5",
        "power_rule",
        "b_squared",
        "lap_of_harnack",
        "lap_of_harnack.step1",
        "lap_of_harnack.step2",
        "lap_of_harnack.step3",
    ];
    for name in names {
        let v = verify_identity(name).map_err(err)?;
        ensure(v.outcome.is_zero(), || format!("{name}: {}", v.outcome))?;
    }
    Ok(format!("{} identities reduce to 0", names.len()))
}

fn commutator_oracle() -> Outcome {
    let mut worst_res: f64 = 0.0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for chart in [Chart::round_sphere(1.0), Chart::s2xr2()] {
        let f = chart.default_function();
        let mut points = vec![chart.default_point(1.0)];
        points.extend(chart.probe_points(8, 0));
        let reports = check_commutators_probes(&chart, &f, &points, 1e-3, Exec::default()).map_err(err)?;
        for k in 0..5 {
            let ratios: Vec<f64> = reports.iter().filter_map(|r| r.ratios[k]).collect();
            let max_res = reports.iter().map(|r| r.residuals[k]).fold(0.0, f64::max);
            // the first identity is exact in the discretisation, so it has no ratio
            ensure(!ratios.is_empty() || max_res <= 1e-10, || {
                format!("{}: identity {} never measurable", chart.name(), k + 1)
            })?;
            for q in ratios {
                ensure((3.5..=4.5).contains(&q), || {
                    format!("{}: identity {} ratio {q}", chart.name(), k + 1)
                })?;
                lo = lo.min(q);
                hi = hi.max(q);
            }
            ensure(max_res <= 1e-4, || {
                format!("{}: identity {} residual {max_res:e}", chart.name(), k + 1)
            })?;
            worst_res = worst_res.max(max_res);
        }
        if matches!(chart, Chart::S2xR2) {
            for x in &points {
                let pr = check_parallel_ricci(&chart, x, 1e-3).map_err(err)?;
                ensure(pr <= 1e-5, || format!("parallel Ricci residual {pr:e} at {x:?}"))?;
            }
        }
    }
    Ok(format!("max residual {worst_res:.2e}, ratios in [{lo:.3}, {hi:.3}]"))
}

fn power_identity() -> Outcome {
    let grid = default_grid();
    let mut worst: f64 = 0.0;
    for n in 3..=5 {
        let nf = n as f64;
        let alpha = nf / (nf - 2.0);
        for m in presets(n) {
            let p = compute_profile(&m, &grid, Exec::default()).map_err(err)?;
            for s in &p.samples {
                let rhs = 2.0 * nf / (2.0 - nf).powi(2) * s.g.powf(alpha - 2.0) * s.gp * s.gp;
                let rel = p.check_power_laplacian(s.r, alpha).map_err(err)? / rhs.abs();
                ensure(rel <= 1e-6, || format!("{m} at r={}: relative residual {rel:e}", s.r))?;
                worst = worst.max(rel);
            }
        }
    }
    Ok(format!("max relative residual {worst:.2e}"))
}

fn corollary() -> Outcome {
    let lambdas = [0.0, 0.25, 0.5, 0.75, 1.0];
    let opts = GeodesicOptions::default();
    let cfg = RunConfig::default();
    let pairs = sample_pairs(&cfg);
    let grid = log_grid(cfg.r_min, cfg.r_max, cfg.grid_size);

    let flat = ModelManifold::euclidean(4).map_err(err)?;
    let p = compute_profile(&flat, &grid, Exec::default()).map_err(err)?;
    let batches = corollary_batch(&flat, &p, &pairs, 2.0, &lambdas, &opts, Exec::default()).map_err(err)?;
    let flat_worst = batches.iter().flatten().map(|t| t.slack.abs()).fold(0.0, f64::max);
    ensure(flat_worst <= 1e-6, || format!("euclidean |slack| = {flat_worst:e}"))?;

    let cone = ModelManifold::cone(4, 0.5).map_err(err)?;
    let c = minimal_c(&cone, &RunOptions::default(), Exec::default())
        .map_err(err)?
        .value;
    let p = compute_profile(&cone, &grid, Exec::default()).map_err(err)?;
    let batches = corollary_batch(&cone, &p, &pairs, c, &lambdas, &opts, Exec::default()).map_err(err)?;
    let kept: Vec<_> = batches
        .iter()
        .filter(|b| !b.iter().any(|t| t.via_pole))
        .flatten()
        .collect();
    let cone_min = kept.iter().map(|t| t.slack).fold(f64::INFINITY, f64::min);
    ensure(cone_min >= -1e-6, || format!("cone slack {cone_min:e}"))?;
    Ok(format!(
        "euclidean max |slack| {flat_worst:.2e}; cone min slack {cone_min:.2e} over {} of {} pairs away from the tip",
        kept.len() / lambdas.len(),
        pairs.len()
    ))
}

fn proof_term_audit() -> Outcome {
    let m = ModelManifold::euclidean(4).map_err(err)?;
    let radii = log_grid(1e-1, 1e1, 9);
    let p = compute_profile(&m, &radii, Exec::default()).map_err(err)?;
    let mut worst: f64 = 0.0;
    for &r in &radii {
        let a = audit_proof_terms(&p, r, 10.0).map_err(err)?;
        let groups = [a.group_curv1, a.group_curv2, a.group_hsq, a.group_csq, a.group_mixed];
        for (k, g) in groups.into_iter().enumerate() {
            ensure(g <= 1e-10, || format!("r={r}: group {k} = {g:e}"))?;
        }
        ensure(a.final_bound.abs() <= 1e-10, || {
            format!("r={r}: final_bound {:e}", a.final_bound)
        })?;
        worst = worst.max(a.final_bound.abs());
    }
    let p = compute_profile(&m, &[1.0], Exec::default()).map_err(err)?;
    let fb = audit_proof_terms(&p, 1.0, 12.0).map_err(err)?.final_bound;
    ensure((fb + 96.0).abs() <= 1e-6, || format!("C=12 final_bound {fb}"))?;
    Ok(format!("C=10 max |final_bound| {worst:.2e}; C=12 final_bound {fb}"))
}

fn consistency() -> Outcome {
    let grid = default_grid();
    let mut worst: f64 = 0.0;
    for n in 3..=5 {
        for m in presets(n) {
            let p = compute_profile(&m, &grid, Exec::default()).map_err(err)?;
            for s in &p.samples {
                let res = consistency_hess_vs_h(&p, s.r).map_err(err)?;
                ensure(res <= 1e-9, || format!("{m} at r={}: {res:e}", s.r))?;
                worst = worst.max(res);
            }
        }
    }
    Ok(format!("max residual {worst:.2e}"))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let config = dir.path().join("run.json");
    std::fs::write(
        &config,
        r#"{"model": "smoothed-cone:0.5:1", "n": 4, "C": 10, "grid_size": 256}"#,
    )
    .map_err(err)?;
    // same output dir both times: it is part of the echoed config
    let out_dir = dir.path().join("out");
    let run = || {
        let o = Command::new(env!("CARGO_BIN_EXE_harnack-lab"))
            .arg("--config")
            .arg(&config)
            .arg("--output-dir")
            .arg(&out_dir)
            .arg("verify")
            .output()
            .map_err(err)?;
        let file = std::fs::read(out_dir.join("verify.json")).map_err(err)?;
        Ok::<_, String>((o.status.code(), o.stdout, file))
    };
    let a = run()?;
    let b = run()?;
    ensure(a.0 == b.0, || format!("exit codes {:?} vs {:?}", a.0, b.0))?;
    ensure(!a.1.is_empty() && a.1 == b.1, || "stdout differs".into())?;
    ensure(a.2 == b.2, || "report files differ".into())?;
    ensure(a.1 == a.2, || "stdout and report file differ".into())?;
    Ok(format!("{} identical bytes, exit {:?}", a.1.len(), a.0))
}

type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn main() {
    let criteria: [Criterion; 10] = [
        ("euclidean exactness", euclidean_exactness, Some(Duration::from_secs(5))),
        ("gradient estimate", gradient_estimate, Some(Duration::from_secs(10))),
        ("cone closed form", cone_closed_form, None),
        (
            "symbolic zero reduction",
            symbolic_zero_reduction,
            Some(Duration::from_secs(30)),
        ),
        ("commutator oracle", commutator_oracle, None),
        ("power identity", power_identity, None),
        ("corollary", corollary, None),
        ("proof-term audit", proof_term_audit, None),
        ("consistency", consistency, None),
        ("determinism", determinism, None),
    ];
    let mut failed = 0;
    for (k, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut outcome = check();
        let took = start.elapsed();
        if let (Ok(_), Some(limit)) = (&outcome, limit) {
            if took > *limit {
                outcome = Err(format!("took {took:.2?}, limit {limit:?}"));
            }
        }
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail}; {took:.2?})", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({detail}; {took:.2?})", k + 1);
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
