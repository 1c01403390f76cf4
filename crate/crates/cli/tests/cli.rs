use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pocsize")).args(args).output().unwrap()
}

fn json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn close(v: &Value, want: f64) {
    let got = v.as_f64().unwrap();
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
}

const WORKED: &str = "0.55,0.35,0.30,0.20,0.10,0.40";

#[test]
fn plan_defaults() {
    let v = json(&["plan", "--epsilon", "0.05", "--alpha", "0.05", "--ratio", "1"]);
    assert_eq!(v["m"], 1921);
    assert_eq!(v["n"], 1921);
    assert_eq!(v["method"], "worst-case");
    let v = json(&["plan", "--epsilon", "0.1"]);
    assert_eq!(v["m"], 481);
    let v = json(&["plan", "--epsilon", "0.2"]);
    assert_eq!(v["m"], 121);
}

#[test]
fn plan_as_csv() {
    let out = run(&["--format", "csv", "plan"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "epsilon,alpha,ratio,z,m,n,method,arm_fraction,base_factor"
    );
    assert!(lines.next().unwrap().contains(",1921,1921,worst-case,"));
}

#[test]
fn variance_plan_needs_a_pilot() {
    assert_eq!(run(&["plan", "--method", "variance"]).status.code(), Some(2));
    let v = json(&[
        "plan",
        "--method",
        "variance",
        "--pilot",
        "0.5,0.52,0.15,0.34,0.15,0.36",
    ]);
    assert_eq!(v["method"], "variance-based");
    assert!(v["m"].as_u64().unwrap() <= 1921);
    // A tied pilot is refused rather than planned.
    let tied = run(&["plan", "--method", "variance", "--pilot", "0.5,0.5,0.25,0.25,0.25,0.25"]);
    assert_eq!(tied.status.code(), Some(2));
}

#[test]
fn bounds_of_the_worked_example() {
    let v = json(&["bounds", "--theta", WORKED]);
    close(&v["lower"], 0.2);
    close(&v["upper"], 0.5);
    assert_eq!(v["active_sets"]["lower_active"], serde_json::json!([1]));
    assert_eq!(v["active_sets"]["upper_active"], serde_json::json!([3]));

    let v = json(&["bounds", "--quantity", "pn", "--theta", WORKED]);
    close(&v["lower"], 1.0 / 6.0);
    close(&v["upper"], 5.0 / 6.0);
    let v = json(&["bounds", "--quantity", "ps", "--theta", WORKED]);
    close(&v["lower"], 0.375);
    close(&v["upper"], 0.625);
}

#[test]
fn bounds_from_theta_files() {
    let dir = tempfile::tempdir().unwrap();
    let j = dir.path().join("theta.json");
    std::fs::write(
        &j,
        r#"{"xp_yp": 0.40, "y_x": 0.55, "y_xp": 0.35, "x_y": 0.30, "x_yp": 0.20, "xp_y": 0.10}"#,
    )
    .unwrap();
    let t = dir.path().join("theta.toml");
    std::fs::write(
        &t,
        "y_x = 0.55\ny_xp = 0.35\nx_y = 0.30\nx_yp = 0.20\nxp_y = 0.10\nxp_yp = 0.40\n",
    )
    .unwrap();
    for path in [&j, &t] {
        let v = json(&["bounds", "--theta-file", path.to_str().unwrap()]);
        close(&v["lower"], 0.2);
        close(&v["upper"], 0.5);
    }
}

#[test]
fn bounds_csv_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.csv");
    let status = run(&[
        "--format",
        "csv",
        "--out",
        out.to_str().unwrap(),
        "bounds",
        "--theta",
        WORKED,
    ])
    .status;
    assert!(status.success());
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.starts_with("lower,upper,lower_active,upper_active,lower_gap,upper_gap\n"));
}

#[test]
fn validation_errors_exit_2() {
    assert_eq!(run(&["bounds", "--theta", "0.5,0.5"]).status.code(), Some(2));
    assert_eq!(
        run(&["bounds", "--theta", "0.5,0.5,0.3,0.3,0.3,0.3"]).status.code(),
        Some(2)
    );
    assert_eq!(run(&["plan", "--epsilon", "0"]).status.code(), Some(2));
    assert_eq!(
        run(&["ci", "--exp", "1,2,3", "--obs", "1,1,1,1"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["enumerate", "--spec", "/nonexistent.toml"]).status.code(),
        Some(2)
    );
    // Unknown flags are rejected by the argument parser with the same code.
    assert_eq!(run(&["plan", "--bogus"]).status.code(), Some(2));
}

#[test]
fn numerical_errors_exit_3() {
    // Smooth intervals at an exact four-way tie.
    let tie = run(&[
        "ci",
        "--method",
        "smooth",
        "--exp",
        "25,25,25,25",
        "--obs",
        "25,25,25,25",
    ]);
    assert_eq!(tie.status.code(), Some(3));
    // PN with P(x,y) = 0.
    let degenerate = run(&["bounds", "--quantity", "pn", "--theta", "0.5,0.5,0,0.5,0.25,0.25"]);
    assert_eq!(degenerate.status.code(), Some(3));
}

#[test]
fn ci_records_and_seed() {
    let args = [
        "--seed",
        "9",
        "ci",
        "--exp",
        "300,200,150,350",
        "--obs",
        "200,300,100,400",
        "--method",
        "numdelta",
    ];
    let a = json(&args);
    let b = json(&args);
    assert_eq!(a, b);
    let upper = &a[0];
    assert_eq!(upper["endpoint"], "upper");
    assert_eq!(upper["method"], "numerical-delta");
    assert_eq!(upper["B"], 1000);
    assert_eq!(upper["seed"], 9);
    let lo = upper["ci_low"].as_f64().unwrap();
    let hi = upper["ci_high"].as_f64().unwrap();
    assert!(lo <= hi);

    // Unique optimizers at both endpoints, so the smooth method applies.
    let s = json(&[
        "ci",
        "--exp",
        "250,250,50,450",
        "--obs",
        "300,300,50,350",
        "--method",
        "smooth",
    ]);
    assert_eq!(s[1]["method"], "smooth-delta");
    assert!(s[1]["se"].as_f64().unwrap() > 0.0);
}

#[test]
fn enumerate_bundled_model() {
    let v = json(&["enumerate", "--spec", "model2"]);
    assert!((v["pns_true"].as_f64().unwrap() - 0.427388).abs() < 5e-7);
    assert!(v["pns_lower"].as_f64().unwrap() <= v["pns_true"].as_f64().unwrap());
}

#[test]
fn simulate_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.toml");
    std::fs::write(
        &cfg,
        "specs = [\"model1\", \"random:4\"]\nsizes = [100, 200]\nreplications = 3\ndraws = 50\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let res = run(&[
        "--seed",
        "2",
        "--out",
        out.to_str().unwrap(),
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let rows = std::fs::read_to_string(out.join("replications.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 2 * 2 * 3);
    let aggs: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(aggs.as_array().unwrap().len(), 4);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "specs = [\"model1\"]\nreplications = 0\n").unwrap();
    assert_eq!(
        run(&["simulate", "--config", bad.to_str().unwrap()]).status.code(),
        Some(2)
    );
}

#[test]
fn small_reproduce_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fresh");
    let res = run(&[
        "--out",
        out.to_str().unwrap(),
        "reproduce",
        "--replications",
        "4",
        "--random-specs",
        "2",
        "--draws",
        "50",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let summary: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(summary["plan"]["m"], 1921);
    close(&summary["reference_ratio"], 1921.0 / 6147.0);
    for f in [
        "sample_size.csv",
        "scatter_model1.csv",
        "error_curve_random.csv",
        "summary.json",
        "manifest.json",
    ] {
        assert!(out.join(f).exists(), "{f} missing");
    }
}
