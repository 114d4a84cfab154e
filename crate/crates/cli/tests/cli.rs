use std::process::{Command, Output};

use harnack_cli::{report, RunConfig};
use harnack_core::green::compute_profile;
use harnack_core::models::{log_grid, ModelManifold};
use harnack_core::par::Exec;
use harnack_symbolic::verify_identity;
use proptest::prelude::*;
use serde_json::Value;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_harnack-lab"))
        .args(args)
        .output()
        .unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

#[test]
fn euclidean_verify_passes_with_margin_eight() {
    let o = lab(&["--grid-size", "64", "verify"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["status"], "pass");
    let margin = v["result"]["worst_margin"].as_f64().unwrap();
    assert!((margin - 8.0).abs() < 1e-9, "{margin}");
}

#[test]
fn cone_is_exploratory() {
    let o = lab(&["--model", "cone:0.5", "--grid-size", "64", "verify"]);
    assert_eq!(o.status.code(), Some(3));
    let v = json(&o);
    let unmet: Vec<&str> = v["unmet_hypotheses"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_str().unwrap())
        .collect();
    assert!(unmet.contains(&"singular_tip"), "{unmet:?}");
}

#[test]
fn smoothed_cone_blend_breaks_curvature_hypotheses() {
    let v = json(&lab(&["--model", "smoothed-cone:0.5:1", "--grid-size", "64", "verify"]));
    let unmet = v["unmet_hypotheses"].to_string();
    assert!(unmet.contains("sectional"), "{unmet}");
}

#[test]
fn invalid_input_exits_two() {
    assert_eq!(lab(&["--bogus", "verify"]).status.code(), Some(2));
    assert_eq!(lab(&["--n", "2", "verify"]).status.code(), Some(2));
    assert_eq!(lab(&["--model", "torus", "verify"]).status.code(), Some(2));
    assert_eq!(lab(&["--C", "3", "audit"]).status.code(), Some(2));
    // the corollary needs Hess b² <= C g on the grid
    assert_eq!(
        lab(&["--model", "cone:0.5", "--C", "0.1", "--triples", "2", "corollary"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn below_ten_needs_the_exploratory_flag() {
    let o = lab(&["--C", "3", "--grid-size", "64", "verify"]);
    assert_eq!(o.status.code(), Some(2));
    let o = lab(&["--C", "3", "--grid-size", "64", "--exploratory", "verify"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(json(&o)["result"]["pass"], true);
}

#[test]
fn reports_and_csv_are_persisted() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = lab(&["--output-dir", d, "--triples", "3", "corollary"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read(dir.path().join("corollary.json")).unwrap(), o.stdout);
    let csv = std::fs::read_to_string(dir.path().join("corollary.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("lambda,d_yz,b2_w,rhs,slack"));
    assert_eq!(csv.lines().count(), 1 + 3 * 5);

    let o = lab(&["--grid-size", "8", "export-profile"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 9);
}

#[test]
fn every_command_runs() {
    for args in [
        vec!["models", "list"],
        vec!["symbolic", "verify-all"],
        vec!["oracle", "commutators", "--probes", "2"],
        vec!["audit"],
        vec!["min-c", "--model", "cone:0.5", "--grid-size", "64"],
    ] {
        let o = lab(&args);
        let code = o.status.code().unwrap();
        assert!(
            code == 0 || code == 3,
            "{args:?} exited {code}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert_eq!(json(&o)["tool"], "harnack-lab");
    }
}

#[test]
fn min_c_matches_cone_closed_form() {
    let v = json(&lab(&["--model", "cone:0.5", "--n", "5", "--grid-size", "64", "min-c"]));
    let measured = v["result"]["minimal_C"]["value"].as_f64().unwrap();
    let closed = v["result"]["closed_form"].as_f64().unwrap();
    assert!((measured - closed).abs() < 1e-9);
    assert!((closed - 2.0 * 0.5f64.powf(8.0 / 3.0)).abs() < 1e-15);
}

#[test]
fn timing_is_opt_in() {
    let v = json(&lab(&["models", "list"]));
    assert!(v.get("timing").is_none());
    let v = json(&lab(&["--timing", "models", "list"]));
    assert!(v["timing"]["wall_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn config_file_and_flags_layer() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(&path, r#"{"model": "cone:0.8", "grid_size": 32, "seed": 7}"#).unwrap();
    let v = json(&lab(&[
        "--config",
        path.to_str().unwrap(),
        "--seed",
        "9",
        "models",
        "list",
    ]));
    assert_eq!(v["config"]["model"], "cone:0.8");
    assert_eq!(v["config"]["grid_size"], 32);
    assert_eq!(v["config"]["seed"], 9);
    std::fs::write(&path, r#"{"grid": 32}"#).unwrap();
    assert_eq!(
        lab(&["--config", path.to_str().unwrap(), "models", "list"])
            .status
            .code(),
        Some(2)
    );
}

/// The power rule holds symbolically for every exponent; spot-check the
/// numeric Green profile against it at exponents other than α.
#[test]
fn symbolic_power_rule_agrees_with_numbers() {
    assert!(verify_identity("power_rule").unwrap().outcome.is_zero());
    let m = ModelManifold::smoothed_cone(4, 0.7, 2.0).unwrap();
    let p = compute_profile(&m, &log_grid(0.1, 10.0, 16), Exec::default()).unwrap();
    for s in &p.samples {
        for beta in [0.5, 2.0, 3.5] {
            // ΔG = 0 away from the pole, so only the gradient term survives
            let expected = beta * (beta - 1.0) * s.g.powf(beta - 2.0) * s.gp * s.gp;
            let res = p.check_power_laplacian(s.r, beta).unwrap();
            assert!(res <= 1e-8 * expected.abs().max(1.0), "r={} beta={beta}: {res:e}", s.r);
        }
    }
}

fn config() -> impl Strategy<Value = RunConfig> {
    (
        prop::sample::select(vec!["euclidean", "cone:0.5", "smoothed-cone:0.3:2"]),
        3usize..8,
        0.0f64..50.0,
        1e-3f64..1.0,
        2usize..2000,
        any::<u64>(),
        prop::collection::vec(0.0f64..=1.0, 0..6),
        any::<bool>(),
    )
        .prop_map(
            |(model, n, c, r_min, grid_size, seed, lambdas, exploratory)| RunConfig {
                model: model.into(),
                n,
                c,
                r_min,
                grid_size,
                seed,
                lambdas,
                exploratory,
                ..RunConfig::default()
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The echoed config parses back to the same run, floats included.
    #[test]
    fn config_echo_round_trips(cfg in config()) {
        let text = report::to_json(&cfg);
        let back = RunConfig::from_json(&text).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
