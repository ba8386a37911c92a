use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dunkl(args: &[&str], cache: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dunkl"))
        .args(args)
        .env("DUNKL_CACHE_DIR", cache)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cache: &Path) -> Output {
    let out = dunkl(args, cache);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Data rows of a CSV artifact, header comments stripped.
fn data_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(String::from)
        .collect()
}

#[test]
fn rates_example_passes_table_invariants() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("rates.json");
    let args = [
        "rates",
        "--system",
        "A",
        "--n",
        "3",
        "--beta",
        "8",
        "--samples",
        "1000000",
        "--seed",
        "7",
        "--out",
    ];
    ok(
        &[&args[..], &[out.to_str().unwrap()]].concat(),
        &d.path().join("cache"),
    );
    let v = json(&out);
    assert_eq!(v["N"], 3);
    assert_eq!(v["seed"], 7);
    let entries = v["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 3);
    let sum: f64 = entries.iter().map(|e| e["lambda"].as_f64().unwrap()).sum();
    assert!(entries.iter().all(|e| e["lambda"].as_f64().unwrap() > 0.0));
    assert!((sum - v["total"].as_f64().unwrap()).abs() < 1e-12);
    let (total, se) = (
        v["total"].as_f64().unwrap(),
        v["total_stderr"].as_f64().unwrap(),
    );
    assert!((total - 6.0 / 7.0).abs() < 3.0 * se, "{total} ± {se}");
    assert_eq!(v["header"]["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn freeze_example_has_three_half_modes() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("freeze.json");
    ok(
        &[
            "freeze",
            "--system",
            "A",
            "--n",
            "4",
            "--out",
            out.to_str().unwrap(),
        ],
        d.path(),
    );
    let v = json(&out);
    assert_eq!(v["pf_spectrum"]["half_multiplicity"], 3);
    assert!(v["residual"].as_f64().unwrap() < 1e-10);
    let ver = &v["verifications"];
    assert!(ver["exchange_dev"].as_f64().unwrap() < 1e-12);
    assert!(ver["commutator_dev"].as_f64().unwrap() < 1e-10);
    assert_eq!(ver["subspace_report"]["valid_lowering"], 3);
}

#[test]
fn phase_example_reaches_one_half() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("phase.csv");
    let p = out.to_str().unwrap();
    ok(
        &[
            "phase",
            "--system",
            "B",
            "--beta",
            "2",
            "--n-max",
            "20",
            "--mode",
            "closed_form",
            "--out",
            p,
        ],
        d.path(),
    );
    let rows = data_rows(&out);
    assert_eq!(rows[0], "N,beta,rate_per_particle,theory,mode");
    let last: Vec<&str> = rows.last().unwrap().split(',').collect();
    assert_eq!(last[0], "20");
    let rate: f64 = last[2].parse().unwrap();
    assert!((rate - 0.5).abs() < 0.05);
}

#[test]
fn exit_codes_follow_error_class() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("x.csv");
    let p = out.to_str().unwrap();
    let regime = dunkl(
        &[
            "phase", "--system", "A", "--beta", "1", "--n-max", "4", "--out", p,
        ],
        d.path(),
    );
    assert_eq!(regime.status.code(), Some(2));
    let regime = dunkl(
        &[
            "rates", "--system", "A", "--n", "2", "--beta", "0.5", "--seed", "1", "--out", p,
        ],
        d.path(),
    );
    assert_eq!(regime.status.code(), Some(2));
    let no_seed = dunkl(
        &[
            "rates", "--system", "A", "--n", "2", "--beta", "4", "--out", p,
        ],
        d.path(),
    );
    assert_eq!(no_seed.status.code(), Some(1));
    let cfg = d.path().join("bad.json");
    fs::write(&cfg, r#"{"system": {"family": "A"}, "colour": 1}"#).unwrap();
    let bad = dunkl(
        &["freeze", "--config", cfg.to_str().unwrap(), "--n", "3"],
        d.path(),
    );
    assert_eq!(bad.status.code(), Some(1));
    fs::write(&cfg, r#"{"experiment": {"kind": "rates"}}"#).unwrap();
    let wrong_kind = dunkl(
        &[
            "freeze",
            "--config",
            cfg.to_str().unwrap(),
            "--system",
            "A",
            "--n",
            "3",
        ],
        d.path(),
    );
    assert_eq!(wrong_kind.status.code(), Some(1));
}

#[test]
fn config_file_with_flag_override() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"system": {"family": "A", "N": 2, "beta": 4},
            "experiment": {"kind": "rates"},
            "sampling": {"nsamples": 20000},
            "seed": 3}"#,
    )
    .unwrap();
    let out = d.path().join("r.json");
    let c = cfg.to_str().unwrap();
    ok(
        &[
            "rates",
            "--config",
            c,
            "--beta",
            "8",
            "--out",
            out.to_str().unwrap(),
        ],
        d.path(),
    );
    let v = json(&out);
    assert_eq!(v["beta"], 8.0);
    assert_eq!(v["entries"][0]["n"], 20000);
    assert_eq!(v["header"]["config"]["system"]["beta"], 8.0);
}

#[test]
fn reruns_and_cache_hits_are_byte_identical() {
    let d = tempfile::tempdir().unwrap();
    let cache = d.path().join("cache");
    let base = [
        "spectrum",
        "--system",
        "B",
        "--n",
        "2",
        "--beta",
        "6",
        "--samples",
        "50000",
        "--seed",
        "9",
    ];
    let run = |name: &str, extra: &[&str]| {
        let p = d.path().join(name);
        let mut args: Vec<&str> = base.to_vec();
        args.extend_from_slice(extra);
        let ps = p.to_str().unwrap().to_string();
        args.extend_from_slice(&["--out", &ps]);
        ok(&args, &cache);
        fs::read(&p).unwrap()
    };
    let cold = run("cold.csv", &["--no-cache"]);
    let fill = run("fill.csv", &[]);
    assert!(fs::read_dir(&cache).unwrap().count() == 1);
    let hit = run("hit.csv", &[]);
    let threads = run("threads.csv", &["--no-cache", "--threads", "1"]);
    assert_eq!(cold, fill);
    assert_eq!(cold, hit);
    assert_eq!(cold, threads);
}

#[test]
fn simulate_writes_consistent_paths_and_trajectory() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path().join("sim");
    let args = [
        "simulate", "--system", "B", "--n", "3", "--beta", "4", "--t-end", "0.5", "--seed", "4",
        "--out",
    ];
    ok(&[&args[..], &[dir.to_str().unwrap()]].concat(), d.path());
    let paths = data_rows(&dir.join("paths.csv"));
    assert_eq!(paths[0], "t,x_1,x_2,x_3");
    let first: Vec<f64> = paths[1].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first, vec![0.0, 1.0, 2.0, 3.0]);
    let traj = data_rows(&dir.join("trajectory.csv"));
    assert_eq!(traj[0], "t,event_root_i,event_root_j,group_index");
    assert!(
        traj.len() > 1,
        "expected jumps from a start this close to the walls"
    );
    for row in &traj[1..] {
        let f: Vec<i64> = row.split(',').skip(1).map(|v| v.parse().unwrap()).collect();
        let (i, j) = (f[0], f[1]);
        assert!((1..=3).contains(&j));
        assert!(i.abs() < j);
        assert!((0..48).contains(&f[2]));
    }
    // The final state is a signed permutation of a chamber point.
    let last: Vec<f64> = paths
        .last()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(last[0], 0.5);
    assert!(last[1..].iter().all(|v| v.abs() > 0.0));
}

#[test]
fn relax_reports_the_two_state_exponent() {
    let d = tempfile::tempdir().unwrap();
    let rates = d.path().join("rates.json");
    ok(
        &[
            "rates",
            "--system",
            "A",
            "--n",
            "2",
            "--beta",
            "4",
            "--samples",
            "200000",
            "--seed",
            "2",
            "--out",
        ]
        .iter()
        .copied()
        .chain([rates.to_str().unwrap()])
        .collect::<Vec<_>>(),
        d.path(),
    );
    let out = d.path().join("relax.csv");
    let r = rates.to_str().unwrap();
    ok(
        &[
            "relax",
            "--rates",
            r,
            "--seed",
            "5",
            "--replicas",
            "20000",
            "--out",
            out.to_str().unwrap(),
        ],
        d.path(),
    );
    let text = fs::read_to_string(&out).unwrap();
    let fit: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("# fit_exponent_theory: "))
        .unwrap()
        .parse()
        .unwrap();
    let lambda = json(&rates)["total"].as_f64().unwrap();
    assert!(
        (fit + 2.0 * lambda).abs() < 1e-9,
        "{fit} vs {}",
        -2.0 * lambda
    );
    let rows = data_rows(&out);
    assert_eq!(rows[0], "t,tau_index,p_emp,p_theory");
    assert_eq!(rows.len(), 1 + 25 * 2);
}

#[test]
fn perturb_and_verify_run() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("perturb.json");
    ok(
        &[
            "perturb",
            "--system",
            "A",
            "--n",
            "2",
            "--no-measure",
            "--out",
            out.to_str().unwrap(),
        ],
        d.path(),
    );
    let v = json(&out);
    assert!((v["ctilde"]["corrected"]["e2-e1"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((v["ctilde"]["paper"]["e2-e1"].as_f64().unwrap() - 53.0 / 48.0).abs() < 1e-12);
    assert!((v["sum_rule_residuals"]["paper"].as_f64().unwrap() - 5.0 / 192.0).abs() < 1e-12);
    assert!(v["predictions"].as_array().unwrap().is_empty());

    let report = d.path().join("verify.json");
    let out = ok(&["verify", "--out", report.to_str().unwrap()], d.path());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().all(|l| l.starts_with("PASS ")), "{stdout}");
    assert!(json(&report)["failed"].as_array().unwrap().is_empty());
}
