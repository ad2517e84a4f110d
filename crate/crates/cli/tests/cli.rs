use std::path::{Path, PathBuf};

use energy_calib::simulate::{ForwardCurve, MonthlyCurve, SimModel};
use energy_calib::timeseries::parse_timestamp;
use energy_calib_cli::report::{Report, Results};
use energy_calib_cli::{run, Outcome};
use serde_json::Value;

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn cli(args: &[&str]) -> Outcome {
    run(std::iter::once("energy-calib").chain(args.iter().copied()))
}

fn ok_report(args: &[&str]) -> (String, Report) {
    let out = cli(args);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let r: Report = serde_json::from_str(&out.stdout).unwrap();
    (out.stdout, r)
}

fn mr_args(input: &str) -> Vec<&str> {
    vec![
        "calibrate-mr",
        "--input",
        input,
        "--level-granularity",
        "calendar-month",
    ]
}

#[test]
fn mr_fixture_recovers_rate() {
    let input = format!("power={}:price", fixture("mr_a40.csv"));
    let (_, r) = ok_report(&mr_args(&input));
    let Results::Mr { series } = &r.results else {
        panic!("wrong results")
    };
    let p = &series[0].params;
    assert!(p.a > 32.0 && p.a < 48.0, "{}", p.a);
    assert_eq!(p.sigma.len(), 12);
    for v in p.sigma.values() {
        let ci = v.ci.unwrap();
        assert!(
            ci.lower.is_finite()
                && ci.upper.is_finite()
                && ci.lower < v.sigma
                && v.sigma < ci.upper
        );
    }
    assert_eq!(r.inputs[0].sha256.len(), 64);
    assert_eq!(r.interpolation, "step");
    assert!(series[0].fit.is_some());
}

#[test]
fn joint_fixture_recovers_correlation() {
    let a = format!("gas={}:price", fixture("gas.csv"));
    let b = format!("power={}:price", fixture("power.csv"));
    let (_, r) = ok_report(&[
        "calibrate-joint",
        "--input",
        &a,
        "--input",
        &b,
        "--level-granularity",
        "calendar-month",
    ]);
    let Results::Joint(j) = &r.results else {
        panic!("wrong results")
    };
    let c = j.model.get("gas", "power", 0).unwrap();
    assert!(
        c.ci.estimate > 0.6 && c.ci.estimate < 0.8,
        "{}",
        c.ci.estimate
    );
    assert!(matches!(j.simulation, SimModel::Joint { .. }));
}

#[test]
fn spot_prompt_fixture() {
    let s = format!("gas={}:spot", fixture("spot_index.csv"));
    let i = format!("gas_index={}:index", fixture("spot_index.csv"));
    let (_, r) = ok_report(&[
        "calibrate-sp",
        "--input",
        &s,
        "--input",
        &i,
        "--vol-granularity",
        "flat",
    ]);
    let Results::Sp(sp) = &r.results else {
        panic!("wrong results")
    };
    assert!(sp.params.rho[&0].rho.abs() <= 1.0);
    assert!((sp.params.a / 150.0 - 1.0).abs() < 0.5, "{}", sp.params.a);
    // the two inputs share one file
    assert_eq!(r.inputs[0].sha256, r.inputs[1].sha256);

    // joint model with the spot-prompt pair plus a one-factor series
    let g = format!("power={}:price", fixture("power.csv"));
    let (_, r) = ok_report(&[
        "calibrate-joint",
        "--input",
        &s,
        "--input",
        &i,
        "--input",
        &g,
        "--pair",
        "gas=gas_index",
        "--vol-granularity",
        "flat",
    ]);
    let Results::Joint(j) = &r.results else {
        panic!("wrong results")
    };
    assert_eq!(j.model.labels(), ["gas:spot", "gas:index", "power"]);
}

fn zero_vol_model(dir: &Path) -> PathBuf {
    let model = SimModel::MrRiskNeutral {
        a: 12.0,
        sigma: MonthlyCurve::flat(0.0),
        curve: ForwardCurve::flat(parse_timestamp("2020-01-01").unwrap(), 5.0).unwrap(),
    };
    let path = dir.join("model.json");
    std::fs::write(&path, serde_json::to_string(&model).unwrap()).unwrap();
    path
}

#[test]
fn zero_vol_simulation_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let model = zero_vol_model(dir.path());
    let out_dir = dir.path().join("paths");
    let (_, r) = ok_report(&[
        "simulate",
        "--sim-model",
        model.to_str().unwrap(),
        "--grid",
        "2020-01-01:2020-12-31:weekdays",
        "--paths",
        "50",
        "--seed",
        "9",
        "--paths-out",
        out_dir.to_str().unwrap(),
    ]);
    let Results::Simulation(s) = &r.results else {
        panic!("wrong results")
    };
    let spot = s.sets.iter().find(|x| x.label == "spot").unwrap();
    assert!(spot.mean.iter().all(|v| *v == 5.0));
    assert!(spot.stderr.as_ref().unwrap().iter().all(|v| *v == 0.0));
    let text = std::fs::read_to_string(out_dir.join("spot.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("path,2020-01-01"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 50);
    assert!(rows.iter().all(|l| l.split(',').skip(1).all(|v| v == "5")));
}

#[test]
fn simulate_from_calibration_report() {
    let dir = tempfile::tempdir().unwrap();
    let rep = dir.path().join("mr.json");
    let input = format!("power={}:price", fixture("mr_a40.csv"));
    let mut args = mr_args(&input);
    args.extend(["--out", rep.to_str().unwrap()]);
    let out = cli(&args);
    assert_eq!((out.code, out.stdout.as_str()), (0, ""));
    let (_, r) = ok_report(&[
        "simulate",
        "--sim-model",
        rep.to_str().unwrap(),
        "--grid",
        "2021-01-01:2021-03-01:daily",
        "--paths",
        "20",
    ]);
    let Results::Simulation(s) = &r.results else {
        panic!("wrong results")
    };
    assert_eq!(s.sets[0].label, "x");
    assert_eq!(s.sets[0].n_times, 60);
}

#[test]
fn every_command_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let model = zero_vol_model(dir.path());
    let mr = format!("power={}:price", fixture("mr_a40.csv"));
    let a = format!("gas={}:price", fixture("gas.csv"));
    let s = format!("gas={}:spot", fixture("spot_index.csv"));
    let i = format!("gas_index={}:index", fixture("spot_index.csv"));
    let runs: Vec<Vec<&str>> = vec![
        vec!["calibrate-mr", "--input", &mr],
        vec!["calibrate-bs", "--input", &mr],
        vec!["calibrate-sp", "--input", &s, "--input", &i],
        vec![
            "calibrate-joint",
            "--input",
            &mr,
            "--input",
            &a,
            "--trim",
            "0.01",
        ],
        vec![
            "simulate",
            "--sim-model",
            model.to_str().unwrap(),
            "--grid",
            "2020-01-01:2020-02-01:daily",
            "--paths",
            "10",
            "--seed",
            "3",
        ],
        vec!["selftest"],
    ];
    for args in runs {
        let first = cli(&args);
        let second = cli(&args);
        assert_eq!(first.code, 0, "{args:?}: {}", first.stderr);
        assert_eq!(first.stdout, second.stdout, "{args:?}");
        // the report round-trips through its own schema
        let r: Report = serde_json::from_str(&first.stdout).unwrap();
        assert_eq!(r.to_json().unwrap(), first.stdout, "{args:?}");
    }
}

#[test]
fn text_and_json_carry_the_same_numbers() {
    let input = format!("power={}:price", fixture("mr_a40.csv"));
    let (json, r) = ok_report(&mr_args(&input));
    let mut args = mr_args(&input);
    args.extend(["--format", "text"]);
    let text = cli(&args).stdout;
    let Results::Mr { series } = &r.results else {
        panic!("wrong results")
    };
    let a = serde_json::to_value(series[0].params.a)
        .unwrap()
        .to_string();
    assert!(json.contains(&a) && text.contains(&format!("a: {a}")));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let input = fixture("mr_a40.csv");
    let doc = serde_json::json!({
        "inputs": [{"label": "power", "path": input, "column": "price"}],
        "vol_granularity": "flat",
        "level_granularity": "calendar-month",
        "alpha": 0.1
    });
    std::fs::write(&cfg, doc.to_string()).unwrap();
    let (_, r) = ok_report(&[
        "calibrate-mr",
        "--config",
        cfg.to_str().unwrap(),
        "--alpha",
        "0.01",
    ]);
    assert_eq!(r.config.alpha, 0.01);
    let Results::Mr { series } = &r.results else {
        panic!("wrong results")
    };
    assert_eq!(series[0].params.sigma.len(), 1);
    assert_eq!(series[0].params.sigma[&0].ci.unwrap().alpha, 0.01);
}

fn error_of(out: &Outcome) -> Value {
    assert!(out.stdout.is_empty());
    serde_json::from_str::<Value>(&out.stderr).unwrap()["error"].clone()
}

#[test]
fn failures_are_machine_readable() {
    let out = cli(&["calibrate-mr", "--input", "x=/no/such/file.csv"]);
    assert_eq!(out.code, 1);
    let e = error_of(&out);
    assert_eq!(e["command"], "calibrate-mr");
    assert!(e["message"].as_str().unwrap().contains("does not exist"));

    let out = cli(&[
        "calibrate-mr",
        "--input",
        &format!("x={}:nope", fixture("mr_a40.csv")),
    ]);
    assert_eq!(error_of(&out)["kind"], "missing-column");

    let out = cli(&["calibrate-mr", "--alpha", "1.5"]);
    assert_eq!(out.code, 1);

    let out = cli(&["calibrate-mr", "--trim", "0.2"]);
    assert!(error_of(&out)["message"].as_str().unwrap().contains("trim"));

    let out = cli(&["frobnicate"]);
    assert_eq!(out.code, 2);
    assert!(error_of(&out)["command"].is_null());

    let out = cli(&[
        "calibrate-sp",
        "--input",
        &format!("x={}:spot", fixture("spot_index.csv")),
    ]);
    assert!(error_of(&out)["message"]
        .as_str()
        .unwrap()
        .contains("exactly two"));
}

#[test]
fn selftest_passes() {
    let (_, r) = ok_report(&["selftest"]);
    let Results::Selftest(s) = &r.results else {
        panic!("wrong results")
    };
    assert_eq!(s.failed, 0, "{:?}", s.checks);
    assert!(s.passed >= 9);
}

#[test]
fn help_and_version() {
    let out = cli(&["--version"]);
    assert_eq!(out.code, 0);
    assert!(out.stdout.contains(env!("CARGO_PKG_VERSION")));
}
