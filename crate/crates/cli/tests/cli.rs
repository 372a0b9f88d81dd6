use std::collections::HashMap;
use std::process::{Command, Output};

use relaylab_cli::{CliError, CSV_HEADER};

fn relaylab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relaylab"))
        .args(args)
        .env_remove("RELAYLAB_SEED")
        .output()
        .expect("binary runs")
}

fn json(bytes: &[u8]) -> serde_json::Value {
    serde_json::from_slice(bytes).expect("valid JSON")
}

#[test]
fn eval_single_user_broadcast_rate() {
    let out = relaylab(&["eval", "--strategy", "bound:broadcast_lb", "--ps-db", "0"]);
    assert!(out.status.success());
    let v = json(&out.stdout);
    assert!((v["rate"].as_f64().unwrap() - 0.266_652_609_325_656_5).abs() < 1e-12);
    assert_eq!(v["units"], "nats");

    let out = relaylab(&[
        "eval",
        "--strategy",
        "bound:broadcast_lb",
        "--ps-db",
        "0",
        "--units",
        "bits",
    ]);
    let v = json(&out.stdout);
    assert!((v["rate"].as_f64().unwrap() - 0.384_698_397_114_226_8).abs() < 1e-12);
    assert_eq!(v["units"], "bits");
}

#[test]
fn eval_reports_outage_threshold_and_metadata() {
    let out = relaylab(&[
        "eval",
        "--strategy",
        "cf:naive_nb_outage",
        "--ps-db",
        "10",
        "--pr-rel-db",
        "-6",
    ]);
    assert!(out.status.success());
    let v = json(&out.stdout);
    assert!(v["threshold"].as_f64().unwrap() > 0.0);
    assert_eq!(v["pr_db"].as_f64().unwrap(), 4.0);
    assert_eq!(v["coop_mode"], "narrow_band");

    let out = relaylab(&["eval", "--strategy", "af:naive", "--pr-db", "3"]);
    assert_eq!(json(&out.stdout)["pr_db"].as_f64().unwrap(), 3.0);
}

#[test]
fn seed_comes_from_flag_or_environment() {
    let args = ["eval", "--strategy", "cf:separate", "--samples", "500"];
    let default = json(&relaylab(&args).stdout);
    assert_eq!(default["seed"], 1);
    assert_eq!(default["n_samples"], 500);

    let out = Command::new(env!("CARGO_BIN_EXE_relaylab"))
        .args(args)
        .env("RELAYLAB_SEED", "77")
        .output()
        .unwrap();
    let from_env = json(&out.stdout);
    assert_eq!(from_env["seed"], 77);
    assert_ne!(from_env["rate"], default["rate"]);

    let mut flagged = args.to_vec();
    flagged.extend(["--seed", "77"]);
    assert_eq!(json(&relaylab(&flagged).stdout)["rate"], from_env["rate"]);
}

#[test]
fn configuration_errors_exit_2_with_json() {
    for args in [
        vec!["eval", "--strategy", "af:bogus"],
        vec!["eval", "--strategy", "af:naive", "--coop-mode", "xb"],
        vec![
            "eval",
            "--strategy",
            "af:naive",
            "--pr-db",
            "1",
            "--pr-rel-db",
            "1",
        ],
        vec!["eval", "--strategy", "af:naive", "--samples", "0"],
        vec!["eval", "--strategy", "af:naive@foo"],
        vec![
            "sweep",
            "--axis",
            "ps_db",
            "--start",
            "4",
            "--stop",
            "0",
            "--step",
            "1",
            "--strategies",
            "af:naive",
        ],
        vec!["frobnicate"],
    ] {
        let out = relaylab(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = json(&out.stderr);
        assert_eq!(err["error"], "config", "{args:?}");
        assert!(!err["message"].as_str().unwrap().is_empty());
    }
}

#[test]
fn numerical_failures_map_to_exit_3() {
    let e = CliError::from(relaylab::Error::Integration {
        estimate: 1.0,
        error: 1.0,
    });
    assert_eq!(e.exit_code(), 3);
    let e = CliError::from(relaylab::Error::UnknownStrategy("x".into()));
    assert_eq!(e.exit_code(), 2);
}

fn parse_csv(text: &str) -> Vec<HashMap<String, String>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    r.records()
        .map(|rec| {
            header
                .iter()
                .cloned()
                .zip(rec.unwrap().iter().map(String::from))
                .collect()
        })
        .collect()
}

#[test]
fn figure_style_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig4.csv");
    let out = relaylab(&[
        "sweep",
        "--axis",
        "ps_db",
        "--start",
        "0",
        "--stop",
        "40",
        "--step",
        "2",
        "--pr-rel-db",
        "-6",
        "--strategies",
        "bounds,af:naive,af:separate,af:multisession,cf:naive_nb",
        "--samples",
        "20000",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
    let rows = parse_csv(&text);
    assert_eq!(rows.len(), 8 * 21);

    // Strategy-major, then the axis.
    let order: Vec<_> = rows
        .iter()
        .map(|r| (r["strategy"].clone(), r["ps_db"].clone()))
        .collect();
    assert_eq!(order[0], ("bound:outage_lb".to_string(), "0".to_string()));
    assert_eq!(order[20], ("bound:outage_lb".to_string(), "40".to_string()));
    assert_eq!(order[21].0, "bound:broadcast_lb");
    assert_eq!(order[167], ("cf:naive_nb".to_string(), "40".to_string()));

    for r in &rows {
        let rate: f64 = r["rate"].parse().unwrap();
        assert!(rate >= 0.0);
        let digits = r["rate"].trim_start_matches("0.").replace('.', "");
        assert!(digits.trim_start_matches('0').len() <= 9, "{}", r["rate"]);
        assert_eq!(r["units"], "nats");
        let pr: f64 = r["pr_db"].parse().unwrap();
        let ps: f64 = r["ps_db"].parse().unwrap();
        assert!((pr - ps + 6.0).abs() < 1e-9);
    }

    // At 40 dB naive CF is on top, up to Monte Carlo error.
    let at40: HashMap<_, _> = rows
        .iter()
        .filter(|r| r["ps_db"] == "40")
        .map(|r| (r["strategy"].as_str(), r))
        .collect();
    let value = |s: &str| -> (f64, f64) {
        let r = at40[s];
        (
            r["rate"].parse().unwrap(),
            r["stderr"].parse().unwrap_or(0.0),
        )
    };
    let (cf, _) = value("cf:naive_nb");
    for s in ["af:naive", "af:separate", "af:multisession"] {
        let (r, se) = value(s);
        assert!(cf >= r - 3.0 * se, "{s}: {r} > {cf}");
    }
    let (lb, _) = value("bound:broadcast_lb");
    let (ub, _) = value("bound:broadcast_ub");
    assert!(lb <= cf && cf <= ub);
}

#[test]
fn sweep_is_deterministic_and_crosses_allocations() {
    let args = [
        "sweep",
        "--axis",
        "pr_rel_db",
        "--start",
        "-6",
        "--stop",
        "6",
        "--step",
        "3",
        "--ps-db",
        "10",
        "--strategies",
        "cf:separate,df:wb",
        "--allocs",
        "su,joint,sel",
        "--samples",
        "3000",
        "--seed",
        "5",
    ];
    let a = relaylab(&args);
    let b = relaylab(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let rows = parse_csv(std::str::from_utf8(&a.stdout).unwrap());
    assert_eq!(rows.len(), 6 * 5);
    let allocs: Vec<_> = rows
        .iter()
        .step_by(5)
        .map(|r| (r["strategy"].as_str(), r["alloc"].as_str()))
        .collect();
    assert_eq!(
        allocs,
        [
            ("cf:separate@su", "su"),
            ("cf:separate@joint", "joint"),
            ("cf:separate@sel", "sel"),
            ("df:wb@su", "su"),
            ("df:wb@joint", "joint"),
            ("df:wb@sel", "sel")
        ]
    );
    assert!(rows
        .iter()
        .filter(|r| r["strategy"].starts_with("df"))
        .all(|r| r["coop_mode"] == "wide_band"));
    assert!(rows
        .iter()
        .filter(|r| r["strategy"].starts_with("cf"))
        .all(|r| r["seed"] == "5"));
}

#[test]
fn validate_fast_names_the_adjudicated_forms() {
    let out = relaylab(&["validate", "--level", "fast"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("separate AF cdf integrand: TwoBranch"));
    assert!(text.contains("multi-session AF Z integrand: Limit"));
    assert!(!text.contains("[FAIL]"));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = relaylab(&["validate", "--json", "--report", path.to_str().unwrap()]);
    assert!(out.status.success());
    let v = json(&out.stdout);
    assert_eq!(v["passed"], true);
    assert_eq!(v["forms"]["sep_af_cdf"], "two_branch");
    assert_eq!(v["forms"]["multisession_z"], "limit");
    assert_eq!(json(&std::fs::read(&path).unwrap()), v);
}

#[test]
fn list_covers_the_registry() {
    let out = relaylab(&["list"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "bound:broadcast_lb",
        "af:multisession",
        "cf:naive_wb",
        "df:wb",
        "af:naive+rte",
    ] {
        assert!(text.lines().any(|l| l == name), "{name}");
    }
}
