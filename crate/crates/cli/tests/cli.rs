use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dlpp_core::fixtures;
use dlpp_core::network::instance_to_json;

fn dlpp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dlpp")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_t1(dir: &Path) -> PathBuf {
    let p = dir.join("t1.json");
    fs::write(&p, instance_to_json(&fixtures::t1_with_reference())).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_modes_on_t1() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_t1(dir.path());
    for mode in ["mip", "gdo", "greedy"] {
        let out = dir.path().join(format!("{mode}.json"));
        let o = dlpp(&["solve", "--mode", mode, "--instance", s(&inst), "--time-limit", "30", "--out", s(&out)]);
        assert!(o.status.success(), "{mode}: {}", String::from_utf8_lossy(&o.stderr));
        let text = stdout(&o);
        if mode != "greedy" {
            assert!(text.starts_with("cost=150 "), "{text}");
        }
        assert!(text.contains("distance="));
        let plan: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
        assert!(plan["y"].is_array());
    }
    let o = dlpp(&["solve", "--mode", "gdo", "--instance", s(&inst), "--node-limit", "1000", "--out", s(&dir.path().join("g.json"))]);
    assert!(stdout(&o).contains("hamming=1"), "{}", stdout(&o));
}

#[test]
fn reference_override_from_plan_file() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_t1(dir.path());
    let plan = dir.path().join("mip.json");
    assert!(dlpp(&["solve", "--mode", "mip", "--instance", s(&inst), "--out", s(&plan)]).status.success());
    let o = dlpp(&["solve", "--mode", "gdo", "--instance", s(&inst), "--reference", s(&plan), "--out", s(&dir.path().join("g.json"))]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("hamming=0"), "{}", stdout(&o));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // Usage error.
    assert_eq!(dlpp(&["solve", "--mode", "nope"]).status.code(), Some(1));
    assert_eq!(dlpp(&["frobnicate"]).status.code(), Some(1));
    // Missing file.
    assert_eq!(dlpp(&["solve", "--mode", "mip", "--instance", "/nonexistent.json"]).status.code(), Some(1));
    // Invalid document.
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"sort_pairs": 3}"#).unwrap();
    assert_eq!(dlpp(&["solve", "--mode", "mip", "--instance", s(&bad)]).status.code(), Some(1));
    // Proxy without a model.
    let inst = write_t1(dir.path());
    assert_eq!(dlpp(&["solve", "--mode", "proxy", "--instance", s(&inst)]).status.code(), Some(1));
    assert_eq!(dlpp(&["--help"]).status.code(), Some(0));
}

#[test]
fn restrict_primary_only_drops_alternates() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_t1(dir.path());
    let o = dlpp(&["restrict", "--instance", s(&inst), "--scenario", "primary-only"]);
    assert!(o.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for c in doc["commodities"].as_array().unwrap() {
        assert!(c.get("alternates").is_none_or(|a| a.as_array().unwrap().is_empty()), "{c}");
    }
}

#[test]
fn sweep_rows_are_ordered_by_volume() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_t1(dir.path());
    let out = dir.path().join("sweep.csv");
    let o = dlpp(&["sweep", "--ref", s(&inst), "--steps", "50", "--noise-seed", "3", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 50);
    let vols: Vec<f64> = rows.iter().map(|r| r.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(vols.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn datagen_train_eval_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_t1(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = dlpp(&["datagen", "--ref", s(&inst), "--n", "20", "--seed", "4", "--out-dir", s(d), "--jobs", "2"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("train=16 validation=2 test=2"), "{}", stdout(&o));
    }
    for f in ["manifest.json", "labels.json", "reference.json", "instances/00007.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }

    let (m1, m2) = (dir.path().join("m1.json"), dir.path().join("m2.json"));
    for m in [&m1, &m2] {
        let o = dlpp(&["train", "--data", s(&a), "--seed", "1", "--epochs", "20", "--out-model", s(m)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(&m1).unwrap(), fs::read(&m2).unwrap());

    let report = dir.path().join("report.csv");
    let o = dlpp(&[
        "eval", "--data", s(&a), "--methods", "mip,gdo,greedy,proxy", "--model", s(&m1), "--split", "all",
        "--report", s(&report),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    for m in ["mip,", "gdo,", "greedy,", "proxy,", "proxy_predicted_capacity_share_geomean"] {
        assert!(text.contains(m), "{text}");
    }
    assert_eq!(fs::read_to_string(&report).unwrap().lines().count(), 1 + 4 * 20);

    let plan = dir.path().join("proxy.json");
    let o = dlpp(&["solve", "--mode", "proxy", "--instance", s(&inst), "--model", s(&m1), "--out", s(&plan)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("restored_pairs="));
}
