use std::process::{Command, Output};

fn ehopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ehopt"))
        .args(args)
        .env("EHOPT_THREADS", "1")
        .output()
        .expect("spawn ehopt")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn solve_pi_reports_policy_for_every_state() {
    let v = stdout_json(&ehopt(&["solve", "--method", "pi"]));
    assert_eq!(v["n_states"], 48);
    assert_eq!(v["policy"].as_array().unwrap().len(), 48);
    assert!(v["expected_value"].as_f64().unwrap() > 0.0);
}

#[test]
fn greedy_without_discount_reports_gain() {
    let v = stdout_json(&ehopt(&["solve", "--method", "greedy", "--discount", "1"]));
    assert!(v["gain"].as_f64().unwrap() > 0.0);
    assert!(v.get("expected_value").is_none());
}

#[test]
fn offline_methods_agree_on_small_instance() {
    let run = |m: &str| {
        let v = stdout_json(&ehopt(&["offline", "--seed", "3", "--horizon", "12", "--method", m, "--timeout", "0"]));
        v["solution"]["value"].as_f64().unwrap()
    };
    let bab = run("bab");
    assert_eq!(bab, run("exhaustive"));
    assert!((bab - run("dp")).abs() <= 1e-9 * bab.max(1.0));
    assert!(run("lp") >= bab - 1e-6);
}

#[test]
fn offline_instance_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inst.json");
    std::fs::write(
        &path,
        r#"{"harvests":[2,0,0],"packet_bits":[100,1000,100],"costs":[1,2,1],"b_max":5,"b0":0,"discount":0.9}"#,
    )
    .unwrap();
    let v = stdout_json(&ehopt(&["offline", "--instance", path.to_str().unwrap(), "--method", "exhaustive"]));
    assert_eq!(v["solution"]["x"], serde_json::json!([0, 1, 0]));
    assert!((v["solution"]["value"].as_f64().unwrap() - 900.0).abs() < 1e-9);
}

#[test]
fn offline_without_seed_or_instance_is_invalid() {
    assert_eq!(ehopt(&["offline"]).status.code(), Some(2));
}

#[test]
fn presets_require_seed() {
    let out = ehopt(&["experiment", "fig3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn bad_scenario_override_exits_two() {
    assert_eq!(ehopt(&["solve", "--p-h", "1.5"]).status.code(), Some(2));
    assert_eq!(ehopt(&["solve", "--scenario", "/nonexistent.json"]).status.code(), Some(2));
    assert_eq!(ehopt(&["solve", "--method", "nope"]).status.code(), Some(2));
}

#[test]
fn experiment_csv_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |p: &std::path::Path| {
        vec![
            "experiment".to_string(),
            "fig4".into(),
            "--seed".into(),
            "7".into(),
            "--realizations".into(),
            "10".into(),
            "--horizon".into(),
            "15".into(),
            "--runs".into(),
            "2".into(),
            "--slots".into(),
            "500".into(),
            "--out".into(),
            p.to_str().unwrap().into(),
        ]
    };
    for p in [&a, &b] {
        let argv = args(p);
        let out = ehopt(&argv.iter().map(String::as_str).collect::<Vec<_>>());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "experiment,grid_param,grid_value,method,metric,estimate,sigma_hat,eps_T,eps_N,lo,hi,seed,n_realizations"
    );
    // 5 capacities x 5 methods
    assert_eq!(lines.count(), 25);
}

#[test]
fn custom_spec_round_trips_through_dump() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    let csv = dir.path().join("out.csv");
    let first = ehopt(&[
        "experiment", "fig5", "--seed", "2", "--realizations", "5", "--horizon", "10", "--runs", "1",
        "--slots", "200", "--methods", "rvi,greedy", "--dump-spec", spec.to_str().unwrap(),
        "--out", csv.to_str().unwrap(),
    ]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let again = ehopt(&["experiment", "custom", "--spec", spec.to_str().unwrap()]);
    assert!(again.status.success());
    assert_eq!(String::from_utf8(again.stdout).unwrap(), std::fs::read_to_string(&csv).unwrap());
}

#[test]
fn failing_method_exits_three_with_partial_csv() {
    let out = ehopt(&[
        "experiment", "fig3", "--seed", "1", "--realizations", "3", "--horizon", "25",
        "--methods", "greedy,exhaustive",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.contains(",greedy,") && !l.contains(",,")));
    assert!(text.lines().any(|l| l.contains(",exhaustive,")));
}

#[test]
fn evaluate_writes_values_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("values.csv");
    let v = stdout_json(&ehopt(&[
        "evaluate", "--method", "pi", "--seed", "4", "--realizations", "30", "--horizon", "20",
        "--values-csv", path.to_str().unwrap(),
    ]));
    let report = &v["report"];
    assert!(report["lo"].as_f64().unwrap() <= report["estimate"].as_f64().unwrap());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,seed,metric,value");
    assert_eq!(text.lines().count(), 31);
}

#[test]
fn learn_is_seed_deterministic() {
    let run = || stdout_json(&ehopt(&["learn", "--method", "qlearn", "--slots", "2000", "--seed", "9"]));
    assert_eq!(run(), run());
    let r = stdout_json(&ehopt(&["learn", "--method", "rlearn", "--slots", "2000", "--seed", "9"]));
    assert!(r["rho"].as_f64().unwrap().is_finite());
}
