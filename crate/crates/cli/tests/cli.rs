use std::collections::HashMap;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dse")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn exponent_prints_six_decimals() {
    let out = dse(&["exponent", "--scheme", "it-bound", "--m", "3", "--n", "4", "--l", "1", "--b", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).trim(), "8.000000");

    let out = dse(&["exponent", "--scheme", "bs", "--m", "3", "--n", "4", "--l", "1", "--b", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).trim(), "1.500000");
}

#[test]
fn exponent_json_has_fields() {
    let out = dse(&["exponent", "--scheme", "lsblend", "--m", "2", "--n", "2", "--b", "2", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    for key in ["scheme", "m_tx", "n_rx", "blocks", "b", "exponent", "params"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["blocks"], 1);
    let e = v["exponent"].as_f64().unwrap();
    assert!(e > 0.0 && e <= 4.0);
}

#[test]
fn precondition_failures_exit_two() {
    let out = dse(&["exponent", "--scheme", "lsblend", "--m", "2", "--n", "2", "--l", "1", "--b", "0.4", "--k", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("b must exceed b_k = 0.5"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(dse(&["exponent", "--scheme", "bs", "--m", "2"]).status.code(), Some(1));
    assert_eq!(dse(&["exponent", "--scheme", "nope", "--m", "2", "--n", "2", "--b", "1"]).status.code(), Some(1));
    assert_eq!(dse(&["exponent", "--scheme", "bs", "--m", "0", "--n", "2", "--b", "1"]).status.code(), Some(1));
    assert_eq!(dse(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn sweep_it_bound_saturates() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("it.csv");
    let out = dse(&[
        "sweep", "--scheme", "it-bound", "--m", "3", "--n", "4", "--b-min", "0.1", "--b-max", "20", "--points", "50", "--out",
        path(&file),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = std::fs::read_to_string(&file).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "b,exponent,scheme,m_tx,n_rx,blocks");
    assert_eq!(lines.len(), 51);
    let last: Vec<&str> = lines[50].split(',').collect();
    assert_eq!(last[0].parse::<f64>().unwrap(), 20.0);
    assert_eq!(last[1].parse::<f64>().unwrap(), 12.0);
    assert!(!text.contains('\r'));
}

#[test]
fn sweep_all_stays_below_bound_and_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.csv");
    let second = dir.path().join("b.csv");
    for f in [&first, &second] {
        let out = dse(&[
            "sweep", "--scheme", "all", "--m", "2", "--n", "2", "--b-min", "0.2", "--b-max", "6", "--points", "12", "--nt", "8",
            "--ns", "6", "--out", path(f),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    let text = std::fs::read_to_string(&first).unwrap();
    assert_eq!(text, std::fs::read_to_string(&second).unwrap());

    let mut bound: HashMap<String, f64> = HashMap::new();
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let e: f64 = f[1].parse().unwrap();
        if f[2] == "it_bound" {
            bound.insert(f[0].to_string(), e);
        } else {
            rows.push((f[0].to_string(), f[2].to_string(), e));
        }
    }
    assert_eq!(bound.len(), 12);
    let schemes: std::collections::HashSet<&str> = rows.iter().map(|r| r.1.as_str()).collect();
    assert!(schemes.len() >= 3, "{schemes:?}");
    for (b, scheme, e) in rows {
        assert!(e <= bound[&b] + 1e-6, "{scheme} at b={b}: {e} > {}", bound[&b]);
    }
}

#[test]
fn sweep_json_matches_records() {
    let out = dse(&["sweep", "--scheme", "bs", "--m", "3", "--n", "6", "--b-min", "0.1", "--b-max", "10", "--points", "5", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0]["scheme"], "bs_limit");
    assert_eq!(rows[4]["m_tx"], 3);
}

#[test]
fn sweep_to_unwritable_path_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("missing").join("out.csv");
    let out = dse(&["sweep", "--scheme", "it-bound", "--m", "1", "--n", "1", "--b-min", "0.1", "--b-max", "1", "--out", path(&bad)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn allocation_geometric_levels() {
    let out = dse(&[
        "allocation", "--m", "3", "--n", "4", "--b", "2", "--k", "1", "--ns", "3", "--epsilon", "0",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let gammas: Vec<f64> = v["gammas"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    for (g, want) in gammas.iter().zip([0.5, 0.25, 0.125]) {
        assert!((g - want).abs() < 1e-12, "{gammas:?}");
    }
    assert_eq!(v["rates"].as_array().unwrap().len(), 3);

    // a zero back-off puts each rate exactly on a jump of the layer tradeoff
    let out = dse(&[
        "allocation", "--m", "3", "--n", "4", "--b", "2", "--k", "1", "--ns", "3", "--epsilon", "1e-9",
    ]);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let per_layer = v["per_layer_exponents"].as_array().unwrap();
    assert_eq!(per_layer.len(), 4);
    for e in &per_layer[..3] {
        assert!((e.as_f64().unwrap() - 4.0).abs() < 1e-6, "{per_layer:?}");
    }
}

#[test]
fn allocation_reports_flat_band() {
    let out = dse(&["allocation", "--m", "3", "--n", "4", "--b", "0.8", "--ns", "4"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["flat_band"], true);
    let eff = v["effective_b"].as_f64().unwrap();
    assert!(eff < 0.8 && eff > 0.0);
}

#[test]
fn allocation_outside_band_exits_two() {
    let out = dse(&["allocation", "--m", "3", "--n", "4", "--b", "0.8", "--k", "1", "--ns", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

fn slope_of(csv: &str) -> f64 {
    let line = csv.lines().find(|l| l.starts_with("# slope=")).unwrap();
    line.trim_start_matches("# slope=").split_whitespace().next().unwrap().parse().unwrap()
}

#[test]
fn montecarlo_siso_outage_slope() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.csv");
    let second = dir.path().join("b.csv");
    for f in [&first, &second] {
        let out = dse(&[
            "montecarlo", "--target", "outage", "--m", "1", "--n", "1", "--r", "0.5", "--snr-db", "20,25,30,35,40",
            "--trials", "100000", "--seed", "7", "--out", path(f),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    let text = std::fs::read_to_string(&first).unwrap();
    assert_eq!(text, std::fs::read_to_string(&second).unwrap());
    assert!(text.starts_with("snr_db,estimate,stderr,trials,seed\n"));
    let slope = slope_of(&text);
    assert!((0.35..=0.65).contains(&slope), "slope {slope}");
}

#[test]
fn montecarlo_unresolved_exits_two() {
    let out = dse(&[
        "montecarlo", "--target", "outage", "--m", "2", "--n", "2", "--r", "0.1", "--snr-db", "30,40,50", "--trials", "10",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unresolved") || stdout(&out).contains("unresolved"));
}
