use std::process::{Command, Output};

use data_pricing::cli::render::parse_outcomes_csv;
use data_pricing::model::FeasibilityReport;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_data-pricing")).args(args).output().expect("run binary")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8(bytes.to_vec()).unwrap()
}

fn scratch_dir(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("data-pricing-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn feasibility_reports_each_threshold() {
    let o = cli(&["feasibility", "--v", "3", "--r", "0.5", "--d", "1", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let report: FeasibilityReport = serde_json::from_slice(&o.stdout).unwrap();
    for e in &report.entries {
        assert_eq!(e.satisfied, e.mechanism.id() != "b2", "{e:?}");
    }
    let b2 = report.entries.iter().find(|e| e.mechanism.id() == "b2").unwrap();
    assert!((b2.threshold - 4.0).abs() < 1e-12);

    let table = text(&cli(&["feasibility", "--v", "3", "--r", "0.5", "--d", "1"]).stdout);
    let row = table.lines().find(|l| l.starts_with("bargain_both")).unwrap();
    assert!(row.contains("threshold=4.00000") && row.ends_with("fail"), "{row}");

    let o = cli(&["feasibility", "--v", "10", "--r", "0.5", "--d", "1", "--format", "json"]);
    let report: FeasibilityReport = serde_json::from_slice(&o.stdout).unwrap();
    assert!(report.all_satisfied());

    let o = cli(&["feasibility", "--v", "10", "--r", "0.5", "--d", "0", "--format", "json"]);
    let report: FeasibilityReport = serde_json::from_slice(&o.stdout).unwrap();
    assert!(report.entries.iter().all(|e| e.threshold == 0.0 && e.satisfied));
}

#[test]
fn feasibility_rejects_malformed_input() {
    assert_eq!(cli(&["feasibility", "--v", "abc", "--r", "0.5", "--d", "1"]).status.code(), Some(1));
    assert_eq!(cli(&["feasibility", "--v", "-1", "--r", "0.5", "--d", "1"]).status.code(), Some(1));
    assert_eq!(cli(&["feasibility", "--v", "10", "--r", "0.5"]).status.code(), Some(1));
}

#[test]
fn verify_exit_codes() {
    let o = cli(&["verify", "--samples", "1", "--seed", "7", "--tol", "1e-15"]);
    assert_eq!(o.status.code(), Some(3));
    let out = text(&o.stdout);
    assert!(out.contains("FAIL sample 0") && out.contains("rel "), "{out}");

    let o = cli(&["verify", "--samples", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("samples"));

    assert_eq!(cli(&["verify", "--samples", "2", "--mc-samples", "10"]).status.code(), Some(1));
    assert_eq!(cli(&["verify", "--samples", "2", "--grid-n", "20"]).status.code(), Some(1));
}

#[test]
fn sweep_errors_and_skipping() {
    let args = ["sweep", "--param", "v", "--from", "2", "--to", "10", "--steps", "5", "--r", "0.5", "--d", "1", "--format", "csv"];
    let o = cli(&args);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("infeasible"));

    let mut skipping = args.to_vec();
    skipping.push("--skip-infeasible");
    let o = cli(&skipping);
    assert_eq!(o.status.code(), Some(0));
    let rows = parse_outcomes_csv(&text(&o.stdout)).unwrap();
    // v = 2, 4, 6, 8, 10: B1 needs v > 8/3 and B2 needs v > 4.
    let count = |id: &str| rows.iter().filter(|r| r.mechanism.id() == id).count();
    assert_eq!((count("d"), count("c"), count("b1"), count("b2"), count("rs")), (5, 5, 4, 3, 0));

    assert_eq!(cli(&["sweep", "--param", "r", "--from", "0", "--to", "0.5", "--steps", "1", "--v", "10", "--d", "1"]).status.code(), Some(1));
    assert_eq!(cli(&["sweep", "--param", "r", "--from", "0.5", "--to", "0.5", "--steps", "3", "--v", "10", "--d", "1"]).status.code(), Some(1));
    // r = 1.5 is outside [0, 1]
    assert_eq!(cli(&["sweep", "--param", "r", "--from", "0", "--to", "1.5", "--steps", "3", "--v", "10", "--d", "1"]).status.code(), Some(1));
}

#[test]
fn sweep_rows_follow_sweep_order() {
    let o = cli(&["sweep", "--param", "d", "--from", "0", "--to", "1", "--steps", "3", "--v", "10", "--r", "0.5", "--rho", "0.5", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = parse_outcomes_csv(&text(&o.stdout)).unwrap();
    let keys: Vec<(f64, &str)> = rows.iter().map(|r| (r.params.d(), r.mechanism.id())).collect();
    let expected: Vec<(f64, &str)> = [0.0, 0.5, 1.0]
        .iter()
        .flat_map(|&d| ["d", "c", "b1", "b2", "rs"].map(move |m| (d, m)))
        .collect();
    assert_eq!(keys, expected);
}

#[test]
fn identical_runs_are_byte_identical() {
    for args in [
        &["sweep", "--param", "rho", "--from", "0.1", "--to", "0.9", "--steps", "5", "--v", "10", "--r", "0.5", "--d", "1", "--format", "json"][..],
        &["verify", "--samples", "3", "--seed", "11", "--format", "json"][..],
        &["compare", "--v", "10", "--r", "0.5", "--d", "1", "--rho", "0.3"][..],
    ] {
        let a = cli(args);
        let b = cli(args);
        assert_eq!(a.status.code(), Some(0), "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn csv_header_is_exact() {
    let o = cli(&["solve", "--mechanism", "c", "--v", "10", "--r", "0.5", "--d", "1", "--format", "csv"]);
    let out = text(&o.stdout);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("mechanism,v,r,d,rho,w,w_prime,alpha,p,demand,pi1,pi2,pi_chain,cs"));
    assert_eq!(lines.next(), Some("centralized,10,0.5,1,,,,,3.25,0.5666666666666667,,,2.408333333333333,1.2041666666666666"));
}

#[test]
fn negative_wholesale_price_is_flagged() {
    // d large relative to the market: w = (A - 2d)/4 < 0.
    let o = cli(&["solve", "--mechanism", "d", "--v", "4", "--r", "0.5", "--d", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let out = text(&o.stdout);
    assert!(out.contains("w=-0.500000") && out.contains("note: the wholesale price is negative"), "{out}");
}

#[test]
fn config_file_and_out_path() {
    let dir = scratch_dir("cli");
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "# base market\nv = 10\nr = 0.5\nd = 1\nformat = csv\n").unwrap();
    let out = dir.join("compare.csv");
    let o = cli(&["compare", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let rows = parse_outcomes_csv(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(rows.len(), 4);

    // A flag beats the file.
    let o = cli(&["compare", "--config", cfg.to_str().unwrap(), "--v", "3"]);
    let rows = parse_outcomes_csv(&text(&o.stdout)).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.params.v() == 3.0));

    std::fs::write(&cfg, "v = 10\nflavour = mint\n").unwrap();
    assert_eq!(cli(&["compare", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(cli(&["compare", "--config", dir.join("missing.cfg").to_str().unwrap()]).status.code(), Some(1));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn help_and_version_exit_zero() {
    let o = cli(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(text(&o.stdout).contains("feasibility"));
    assert_eq!(cli(&["--version"]).status.code(), Some(0));
    assert_eq!(cli(&[]).status.code(), Some(1));
}
