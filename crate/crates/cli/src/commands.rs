use std::f64::consts::TAU;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use harnack_core::fd_oracle::{
    check_commutators_probes, check_parallel_ricci, Chart, CommutatorReport, NOISE_MARGIN, RESIDUAL_FLOOR,
};
use harnack_core::geodesic::{
    convexity_defect, corollary_batch, write_corollary_csv, GeodesicOptions, GeodesicTriple, SlicePoint,
};
use harnack_core::green::{compute_profile, RadialGreenProfile};
use harnack_core::harnack::{
    audit_proof_terms, consistency_hess_vs_h, harnack_state, minimal_c, verify_theorem, RunOptions, TermAudit, Verdict,
    THEOREM_C,
};
use harnack_core::models::{log_grid, presets, HypothesisReport, HypothesisTolerances, ModelManifold, Profile};
use harnack_core::par::Exec;
use harnack_symbolic::catalogue::verify_lap_of_harnack;
use harnack_symbolic::{verify_all, Reading};

use crate::config::RunConfig;
use crate::report::{Check, Envelope, Timing};
use crate::{CliError, Command, Output};

fn value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn model(cfg: &RunConfig) -> Result<ModelManifold, CliError> {
    Ok(ModelManifold::from_id(&cfg.model, cfg.n)?)
}

fn run_options(cfg: &RunConfig) -> RunOptions {
    RunOptions {
        r_min: cfg.r_min,
        r_max: cfg.r_max,
        grid_size: cfg.grid_size,
        tol: cfg.tolerances.inequality,
        exploratory: cfg.exploratory,
        uniform_bound: cfg.uniform_bound,
        hypothesis_probes: cfg.hypothesis_probes,
    }
}

fn grid(cfg: &RunConfig) -> Vec<f64> {
    log_grid(cfg.r_min, cfg.r_max, cfg.grid_size)
}

fn hypotheses(cfg: &RunConfig, m: &ModelManifold) -> Result<HypothesisReport, CliError> {
    Ok(m.hypothesis_report(
        cfg.r_min,
        cfg.r_max,
        cfg.hypothesis_probes,
        &HypothesisTolerances::default(),
    )?)
}

fn unmet(h: &HypothesisReport) -> Vec<String> {
    h.unmet().into_iter().map(String::from).collect()
}

fn require_theorem_c(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.c < THEOREM_C && !cfg.exploratory {
        return Err(CliError::Precondition(format!(
            "C = {} is below 10; pass --exploratory to measure anyway",
            cfg.c
        )));
    }
    Ok(())
}

pub fn execute(command: &Command, cfg: &RunConfig) -> Result<Output, CliError> {
    let exec = Exec::default();
    let start = Instant::now();
    let mut out = match command {
        Command::Verify => verify(cfg, exec)?,
        Command::MinC => min_c(cfg, exec)?,
        Command::Corollary => corollary(cfg, exec)?,
        Command::Audit => audit(cfg, exec)?,
        Command::Symbolic { .. } => symbolic(cfg)?,
        Command::Oracle { .. } => oracle(cfg, exec)?,
        Command::Models { .. } => models(cfg),
        Command::ExportProfile => export_profile(cfg, exec)?,
    };
    if cfg.timing {
        if let Some(env) = out.envelope.as_mut() {
            env.timing = Some(Timing {
                wall_seconds: start.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(out)
}

fn report(env: Envelope) -> Output {
    Output {
        envelope: Some(env),
        csv: None,
    }
}

fn verify(cfg: &RunConfig, exec: Exec) -> Result<Output, CliError> {
    let m = model(cfg)?;
    let rep = verify_theorem(&m, cfg.c, &run_options(cfg), exec)?;
    let profile = compute_profile(&m, &grid(cfg), exec)?;
    let n = m.n() as f64;
    let alpha = n / (n - 2.0);
    let rows = exec.try_map(&profile.samples, |s| -> Result<(f64, f64), CliError> {
        let consistency = consistency_hess_vs_h(&profile, s.r)?;
        let scale = (alpha * (alpha - 1.0) * s.g.powf(alpha - 2.0) * s.gp * s.gp).abs();
        Ok((consistency, profile.check_power_laplacian(s.r, alpha)? / scale))
    })?;
    let worst = |f: fn(&(f64, f64)) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let tol = &cfg.tolerances;
    let exploratory = rep.verdict == Verdict::Exploratory;
    let mut conclusion = Check::at_least("hess_b2_le_C", rep.worst_margin, -tol.inequality);
    if exploratory {
        conclusion = conclusion.advisory();
    }
    let mut checks = vec![
        conclusion,
        Check::flag("lambda_equivalence", rep.equivalence_mismatches.is_empty()),
        Check::at_most("consistency_hess_vs_h", worst(|r| r.0), tol.identity),
        Check::at_most("power_laplacian_alpha", worst(|r| r.1), tol.power_identity),
    ];
    if let Some(ok) = rep.lambda_lower_bound_holds {
        checks.push(Check::flag("lambda_lower_bound", ok));
    }
    let mut unmet: Vec<String> = rep.unmet_hypotheses.iter().map(|s| s.to_string()).collect();
    if cfg.c < THEOREM_C {
        unmet.push("C_below_10".into());
    }
    let flags = value(&rep.hypothesis_flags);
    Ok(report(
        Envelope::new("verify", cfg, checks, unmet, exploratory, value(&rep)).with_hypotheses(flags),
    ))
}

fn min_c(cfg: &RunConfig, exec: Exec) -> Result<Output, CliError> {
    let m = model(cfg)?;
    let mc = minimal_c(&m, &run_options(cfg), exec)?;
    let hyp = hypotheses(cfg, &m)?;
    let n = m.n() as f64;
    let closed_form = match m.profile() {
        Profile::Euclidean => Some(2.0),
        Profile::Cone { c } => Some(2.0 * c.powf(2.0 * (n - 1.0) / (n - 2.0))),
        _ => None,
    };
    let result = json!({ "model": m.id(), "n": m.n(), "minimal_C": value(&mc), "closed_form": closed_form });
    Ok(report(
        Envelope::new("min-c", cfg, vec![], unmet(&hyp), false, result).with_hypotheses(value(&hyp)),
    ))
}

/// Seeded endpoint pairs: log-uniform radii, uniform angles.
pub fn sample_pairs(cfg: &RunConfig) -> Vec<(SlicePoint, SlicePoint)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lo, hi) = (cfg.triple_r_min.ln(), cfg.triple_r_max.ln());
    let mut point = move || {
        let r = if hi > lo {
            rng.gen_range(lo..hi).exp()
        } else {
            cfg.triple_r_min
        };
        SlicePoint::new(r, rng.gen_range(0.0..TAU)).expect("sampled radius is positive")
    };
    (0..cfg.triples).map(|_| (point(), point())).collect()
}

fn evenly_spaced(l: &[f64]) -> bool {
    l.len() >= 3 && l.windows(3).all(|w| ((w[2] - w[1]) - (w[1] - w[0])).abs() <= 1e-12)
}

fn corollary(cfg: &RunConfig, exec: Exec) -> Result<Output, CliError> {
    let m = model(cfg)?;
    let profile = compute_profile(&m, &grid(cfg), exec)?;
    let state = harnack_state(&profile, cfg.c, exec)?;
    let margin = state
        .points
        .iter()
        .map(|p| cfg.c - p.mu_rad.max(p.mu_tan))
        .fold(f64::INFINITY, f64::min);
    if margin < -cfg.tolerances.inequality {
        return Err(CliError::Precondition(format!(
            "Hess b² ≤ C g fails on the grid (worst margin {margin:e}); use C at least the measured minimal C"
        )));
    }
    let pairs = sample_pairs(cfg);
    let batches = corollary_batch(
        &m,
        &profile,
        &pairs,
        cfg.c,
        &cfg.lambdas,
        &GeodesicOptions::default(),
        exec,
    )?;
    let counted: Vec<&Vec<GeodesicTriple>> = batches
        .iter()
        .filter(|b| !b.first().is_some_and(|t| t.via_pole))
        .collect();
    let triples: Vec<&GeodesicTriple> = counted.iter().flat_map(|b| b.iter()).collect();
    let min_slack = triples.iter().map(|t| t.slack).fold(f64::INFINITY, f64::min);
    let max_abs_slack = triples.iter().map(|t| t.slack.abs()).fold(0.0, f64::max);
    let max_triangle = triples.iter().map(|t| t.triangle_defect.abs()).fold(0.0, f64::max);
    let tol = &cfg.tolerances;
    let mut checks = vec![
        Check::at_least(
            "slack_nonnegative",
            if triples.is_empty() { 0.0 } else { min_slack },
            -tol.slack,
        ),
        Check::at_most("triangle_consistency", max_triangle, tol.triangle),
    ];
    let mut min_convexity = None;
    if evenly_spaced(&cfg.lambdas) {
        let v = counted.iter().map(|b| convexity_defect(b, cfg.c)).fold(0.0, f64::min);
        min_convexity = Some(v);
        checks.push(Check::at_least("convexity", v, -tol.slack));
    }
    let hyp = hypotheses(cfg, &m)?;
    let flat: Vec<GeodesicTriple> = batches.iter().flatten().cloned().collect();
    let mut csv = Vec::new();
    write_corollary_csv(&flat, &mut csv)?;
    let result = json!({
        "pairs": pairs.len(),
        "tip_flagged": batches.len() - counted.len(),
        "min_slack": min_slack,
        "max_abs_slack": max_abs_slack,
        "max_triangle_defect": max_triangle,
        "min_convexity": min_convexity,
        "triples": value(&flat),
    });
    let env = Envelope::new("corollary", cfg, checks, unmet(&hyp), false, result).with_hypotheses(value(&hyp));
    Ok(Output {
        envelope: Some(env),
        csv: Some(("corollary.csv".into(), String::from_utf8(csv).expect("csv is UTF-8"))),
    })
}

/// Per-group sign checks over the audited radii. Radii where the group's
/// hypothesis fails go into a separate advisory check.
fn group_checks(name: &str, rows: &[(f64, bool)], tol: f64) -> Vec<Check> {
    let worst = |flagged: bool| {
        rows.iter()
            .filter(|r| r.1 == flagged)
            .map(|r| r.0)
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
    };
    let mut out = Vec::new();
    if let Some(v) = worst(false) {
        out.push(Check::at_most(name, v, tol));
    }
    if let Some(v) = worst(true) {
        out.push(Check::at_most(format!("{name}_hypothesis_unmet"), v, tol).advisory());
    }
    out
}

fn audit(cfg: &RunConfig, exec: Exec) -> Result<Output, CliError> {
    require_theorem_c(cfg)?;
    let m = model(cfg)?;
    let mut radii = if cfg.audit_radii.is_empty() {
        log_grid(cfg.r_min, cfg.r_max, 9)
    } else {
        cfg.audit_radii.clone()
    };
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    let profile: RadialGreenProfile = compute_profile(&m, &radii, exec)?;
    let audits: Vec<TermAudit> = exec.try_map(&radii, |&r| audit_proof_terms(&profile, r, cfg.c))?;
    let n = m.n() as f64;
    let alpha = n / (n - 2.0);
    let scales: Vec<f64> = audits
        .iter()
        .zip(&profile.samples)
        .map(|(_, s)| (0.5 * n * (n - 2.0) * cfg.c * cfg.c * s.g.powf(2.0 * alpha - 1.0)).max(1.0))
        .collect();
    let rows = |f: &dyn Fn(&TermAudit) -> (f64, bool)| -> Vec<(f64, bool)> {
        audits
            .iter()
            .zip(&scales)
            .map(|(a, s)| {
                let (v, flagged) = f(a);
                (v / s, flagged)
            })
            .collect()
    };
    let tol = cfg.tolerances.audit;
    let mut checks = Vec::new();
    checks.extend(group_checks(
        "group_curv1",
        &rows(&|a| (a.group_curv1, a.hypothesis_flags.curv1)),
        tol,
    ));
    checks.extend(group_checks(
        "group_curv2",
        &rows(&|a| (a.group_curv2, a.hypothesis_flags.curv2)),
        tol,
    ));
    checks.extend(group_checks("group_hsq", &rows(&|a| (a.group_hsq, false)), tol));
    checks.extend(group_checks(
        "group_csq_le_bound",
        &rows(&|a| (a.group_csq - a.csq_bound, a.hypothesis_flags.csq)),
        tol,
    ));
    checks.extend(group_checks(
        "group_mixed",
        &rows(&|a| (a.group_mixed, a.hypothesis_flags.mixed)),
        tol,
    ));
    let mut final_bound = group_checks("final_bound", &rows(&|a| (a.final_bound, false)), tol);
    if cfg.c < THEOREM_C {
        final_bound = final_bound.into_iter().map(Check::advisory).collect();
    }
    checks.extend(final_bound);
    // where H̃ is a multiple of g the expansion must reproduce Δ of the eigenvalue
    let iso: Vec<(f64, bool)> = audits
        .iter()
        .filter(|a| a.isotropic)
        .map(|a| {
            (
                (a.lap_htilde_expansion - a.lap_htilde_fd).abs() / a.lap_htilde_fd.abs().max(1.0),
                a.hypothesis_flags.parallel_ricci,
            )
        })
        .collect();
    checks.extend(group_checks("expansion_matches_fd", &iso, 1e-6));
    let hyp = hypotheses(cfg, &m)?;
    let result = json!({ "model": m.id(), "n": m.n(), "C": cfg.c, "audits": value(&audits) });
    Ok(report(
        Envelope::new("audit", cfg, checks, unmet(&hyp), cfg.c < THEOREM_C, result).with_hypotheses(value(&hyp)),
    ))
}

fn symbolic(cfg: &RunConfig) -> Result<Output, CliError> {
    let all = verify_all()?;
    let checks = all
        .iter()
        .map(|v| Check::flag(v.name.clone(), v.outcome.is_zero()))
        .collect();
    let identities: Vec<Value> = all
        .iter()
        .map(|v| json!({ "name": v.name, "outcome": v.outcome.to_string(), "transcript": v.transcript }))
        .collect();
    let readings = Reading::ALL
        .iter()
        .map(|&r| -> Result<Value, CliError> {
            let v = verify_lap_of_harnack(r)?;
            Ok(json!({ "reading": r.name(), "zero": v.outcome.is_zero(), "outcome": v.outcome.to_string() }))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let result = json!({ "identities": identities, "lap_of_harnack_readings": readings });
    Ok(report(Envelope::new(
        "symbolic verify-all",
        cfg,
        checks,
        vec![],
        false,
        result,
    )))
}

/// Charts with parallel Ricci curvature, where every identity must converge.
fn has_parallel_ricci(chart: &Chart) -> bool {
    matches!(chart, Chart::Euclidean(_) | Chart::RoundSphere(_) | Chart::S2xR2)
}

/// Checks for one chart; identity `k` is 0-based.
fn oracle_checks(id: &str, reports: &[CommutatorReport], cfg: &RunConfig, parallel: bool) -> Vec<Check> {
    let tol = &cfg.tolerances;
    let mut checks = Vec::new();
    for k in 0..5 {
        // only the last identity needs ∇Ric = 0
        let binding = parallel || k < 4;
        let max_res = reports.iter().map(|r| r.residuals[k]).fold(0.0, f64::max);
        // a point without a ratio must sit at the roundoff floor, else it is unexplained
        let converges = reports.iter().all(|r| match r.ratios[k] {
            Some(q) => (tol.ratio_min..=tol.ratio_max).contains(&q),
            None => r.residuals_double[k] <= RESIDUAL_FLOOR || r.residuals[k] <= NOISE_MARGIN * r.noise[k],
        });
        let mut list = vec![
            Check::at_most(format!("{id}.identity{}.residual", k + 1), max_res, tol.oracle_residual),
            Check::flag(format!("{id}.identity{}.ratio_in_range", k + 1), converges),
        ];
        if !binding {
            list = list.into_iter().map(Check::advisory).collect();
        }
        checks.extend(list);
    }
    checks
}

fn oracle(cfg: &RunConfig, exec: Exec) -> Result<Output, CliError> {
    let mut checks = Vec::new();
    let mut charts = Vec::new();
    for id in &cfg.charts {
        let chart = Chart::from_id(id)?;
        let f = chart.default_function();
        let mut points = vec![chart.default_point(1.0)];
        points.extend(chart.probe_points(cfg.probes, cfg.seed));
        let reports = check_commutators_probes(&chart, &f, &points, cfg.oracle_h, exec)?;
        let parallel = has_parallel_ricci(&chart);
        checks.extend(oracle_checks(id, &reports, cfg, parallel));
        let pr = check_parallel_ricci(&chart, &points[0], cfg.oracle_h)?;
        let mut c = Check::at_most(format!("{id}.parallel_ricci"), pr, cfg.tolerances.parallel_ricci);
        if !parallel {
            c = c.advisory();
        }
        checks.push(c);
        charts.push(json!({ "chart": chart.name(), "id": id, "points": points, "reports": value(&reports), "parallel_ricci": pr }));
    }
    let result = json!({ "h": cfg.oracle_h, "charts": charts });
    Ok(report(Envelope::new(
        "oracle commutators",
        cfg,
        checks,
        vec![],
        false,
        result,
    )))
}

fn models(cfg: &RunConfig) -> Output {
    let list: Vec<Value> = presets()
        .iter()
        .map(|(id, about)| json!({ "id": id, "description": about }))
        .collect();
    report(Envelope::new(
        "models list",
        cfg,
        vec![],
        vec![],
        false,
        json!({ "models": list }),
    ))
}

fn export_profile(cfg: &RunConfig, exec: Exec) -> Result<Output, CliError> {
    let m = model(cfg)?;
    let profile = compute_profile(&m, &grid(cfg), exec)?;
    let mut csv = Vec::new();
    profile.write_csv(&mut csv)?;
    let body = String::from_utf8(csv).expect("csv is UTF-8");
    let envelope = cfg.output_dir.as_ref().map(|_| {
        let result = json!({ "model": m.id(), "n": m.n(), "points": profile.samples.len(), "file": "profile.csv" });
        Envelope::new("export-profile", cfg, vec![], vec![], false, result)
    });
    Ok(Output {
        envelope,
        csv: Some(("profile.csv".into(), body)),
    })
}
