use std::path::PathBuf;
use std::process::{Command, Output};

use quadprice::pricing::PriceResult;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_quadprice"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn tmp(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

const HUNDRED: [&str; 10] = [
    "--params",
    "0.98,8,0.8,1e-6,-0.75,0.75,1.4,0.2,0.9",
    "--tau",
    "0.34",
    "--strike",
    "12500",
    "--rate",
    "0.017",
    "--spot",
    "10000",
];

#[test]
fn price_hundred_dollar_auto() {
    let mut args = vec!["price", "--switch", "auto"];
    args.extend(HUNDRED);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let line = stdout(&o).lines().find(|l| l.starts_with("price")).unwrap().to_string();
    let price: f64 = line.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!((price - 3999.167).abs() < 0.01, "{line}");
}

#[test]
fn price_json_round_trips() {
    let path = tmp("price.json");
    let mut args = vec!["price", "--switch", "off", "--json", path.to_str().unwrap()];
    args.extend(HUNDRED);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["schema_version"], 1);
    let r: PriceResult = serde_json::from_value(v.clone()).unwrap();
    assert!((r.price - 4115.31).abs() < 1.0, "{}", r.price);
    let mut again = serde_json::to_value(&r).unwrap();
    again["schema_version"] = 1.into();
    assert_eq!(again, v);
}

#[test]
fn compare_has_extended_reference_row() {
    let o = run(&["compare", "tc1-sigma=0.001", "--max-fevals", "100000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("quadrature,value,error,time_s,fevals,converged"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 15);
    let reference: Vec<&str> = rows[0].split(',').collect();
    assert_eq!(reference[0], "integral-extended");
    let v: f64 = reference[1].parse().unwrap();
    assert!((v - 0.77681478).abs() <= 1e-8, "{v}");
    for label in ["integral-working", "integral-opt", "quadl-working", "trapz(0.001)-extended"] {
        assert!(rows.iter().any(|r| r.starts_with(&format!("{label},"))), "{label}");
    }
}

#[test]
fn compare_rejects_unknown_case() {
    let o = run(&["compare", "tc9-sigma=0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tc9-sigma=0.1"));
}

#[test]
fn census_is_deterministic() {
    let args = ["switch-census", "--n", "2000", "--seed", "5", "--threads", "2"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).starts_with("bin,count\n"));
    let total: u64 = stdout(&a).lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(total, 2000);
}

#[test]
fn census_summary_json() {
    let path = tmp("census.json");
    let o = run(&["switch-census", "--n", "100", "--json", path.to_str().unwrap(), "--out", tmp("h.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["total"], 100);
}

#[test]
fn failure_demo_columns() {
    let o = run(&["failure-demo", "--level", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(
        lines.next(),
        Some("level,eps,leaves,fevals,value,exact,true_error,error_estimate,converged,deceived")
    );
    assert_eq!(lines.count(), 4);
}

#[test]
fn calibrate_empty_chain_is_input_error() {
    let path = tmp("empty.csv");
    std::fs::write(&path, "# nothing quoted\ntau,strike,rate,spot,mid,bid,ask\n").unwrap();
    let o = run(&["calibrate", "--chain", path.to_str().unwrap(), "--model", "heston"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no option rows"), "{}", stderr(&o));
}

#[test]
fn malformed_chain_names_line_and_token() {
    let path = tmp("bad.csv");
    std::fs::write(&path, "tau,strike,rate,spot,mid,bid,ask\n0.5,100,0.01,100,5,4.9,5.1\n0.5,1o0,0.01,100,5,4.9,5.1\n").unwrap();
    let o = run(&["calibrate", "--chain", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("line 3") && e.contains("'1o0'") && e.contains("strike"), "{e}");

    std::fs::write(&path, "tau,strike,rate,spot,mid,bid\n").unwrap();
    let e = stderr(&run(&["calibrate", "--chain", path.to_str().unwrap()]));
    assert!(e.contains("missing column 'ask'"), "{e}");

    std::fs::write(&path, "tau,strike,rate,spot,mid,bid,ask\n0.5,100,0.01,100,5,5.2,5.1\n").unwrap();
    let e = stderr(&run(&["calibrate", "--chain", path.to_str().unwrap()]));
    assert!(e.contains("line 2") && e.contains("bid"), "{e}");
}

#[test]
fn unknown_flag_is_usage_error() {
    let o = run(&["price", "--bogus", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--bogus"));
}

#[test]
fn digits_env_override() {
    let mut args = vec!["price", "--switch", "on"];
    args.extend(HUNDRED);
    let o = bin().args(&args).env("QUADPRICE_DIGITS", "lots").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("QUADPRICE_DIGITS"));
    let o = bin().args(&args).env("QUADPRICE_DIGITS", "40").output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("extended:40"));
}

#[test]
fn synthetic_chain_calibrates() {
    let chain = tmp("synth.csv");
    let o = run(&["synth-chain", "--model", "heston", "--params", "0.04,1.5,0.06,0.4,-0.6", "--out", chain.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = tmp("report.json");
    let o = run(&[
        "calibrate",
        "--chain",
        chain.to_str().unwrap(),
        "--model",
        "heston",
        "--switch",
        "off",
        "--population",
        "20",
        "--generations",
        "2",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(matches!(o.status.code(), Some(0) | Some(3)), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["switch_stats"]["switched_to_extended"], 0);
    assert_eq!(v["residuals"].as_array().unwrap().len(), 20);
}
