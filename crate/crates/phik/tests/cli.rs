use std::path::Path;
use std::process::{Command, Output};

use phik::io::{self, write_ensemble, BoundReportJson};
use phik_core::ensemble::{Ensemble, Fidelity};
use phik_core::grid::Grid;

fn phik(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phik")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn ks_low_smoke_run_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = phik(&["simulate", "--config", "ks-paper", "--fidelity", "low", "--members", "2", "--seed", "1", "--out", s(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let (e, m) = io::read_ensemble(&a).unwrap();
    assert_eq!(e.len(), 2);
    assert_eq!(e.fidelity(), Fidelity::Low);
    assert_eq!(m.integrators, vec!["if-rk4".to_string()]);
    let ma = std::fs::read(a.join("manifest.json")).unwrap();
    assert_eq!(ma, std::fs::read(b.join("manifest.json")).unwrap());
    assert!(a.join("timing.json").exists());
}

#[test]
fn branin_simulate_writes_members_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = phik(&["simulate", "--config", "branin-paper", "--fidelity", "both", "--out", s(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let high = dir.path().join("high");
    let csvs = std::fs::read_dir(&high)
        .unwrap()
        .filter(|f| f.as_ref().unwrap().file_name().to_string_lossy().ends_with(".csv"))
        .count();
    assert_eq!(csvs, 300);
    let (low, _) = io::read_ensemble(&dir.path().join("low")).unwrap();
    assert_eq!(low.grid().len(), 21 * 21);
}

#[test]
fn branin_kriging_is_worse_than_phik() {
    let dir = tempfile::tempdir().unwrap();
    let mut err = Vec::new();
    for m in ["kriging", "phik"] {
        let out = dir.path().join(m);
        let o = phik(&["fit", "--config", "branin-paper", "--method", m, "--out", s(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        let v: serde_json::Value = io::read_json(&out.join("metrics.json")).unwrap();
        err.push(v["rel_l2"].as_f64().unwrap());
        assert!(out.join("posterior.csv").exists() && out.join("manifest.json").exists());
    }
    assert!(err[0] > err[1], "{err:?}");
}

#[test]
fn biphik_fit_writes_selection_and_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let o = phik(&["fit", "--config", "branin-paper", "--method", "biphik", "--out", s(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sel: serde_json::Value = io::read_json(&dir.path().join("selection.json")).unwrap();
    assert_eq!(sel["pivots"].as_array().unwrap().len(), 21);
    let b: BoundReportJson = io::read_json(&dir.path().join("bounds.json")).unwrap();
    assert!(b.all_hold);
    assert!(b.delta1 > 0.0 && b.delta2 > 0.0);
}

#[test]
fn identical_ensembles_give_zero_deltas() {
    let dir = tempfile::tempdir().unwrap();
    let high = dir.path().join("high");
    let o = phik(&["simulate", "--config", "branin-paper", "--members", "30", "--out", s(&high)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("b");
    let o = phik(&[
        "bounds", "--config", "branin-paper", "--members", "30", "--high", s(&high), "--bifi", s(&high), "--out", s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let b: BoundReportJson = io::read_json(&out.join("bounds.json")).unwrap();
    assert_eq!((b.delta1, b.delta2), (0.0, 0.0));
    assert!(b.all_hold);
}

#[test]
fn active_history_has_one_row_per_fit() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = phik(&["active", "--config", "branin-paper", "--method", "phik", "--n-max", "10", "--out", s(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let text = std::fs::read_to_string(a.join("history.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "step,method,n_obs,x,y,rel_error");
    assert_eq!(lines.len(), 1 + 3);
    assert!(lines[1].starts_with("0,phik,8,,,"));
    assert_eq!(text, std::fs::read_to_string(b.join("history.csv")).unwrap());

    let c = dir.path().join("c");
    let o = phik(&["active", "--config", "branin-paper", "--method", "kriging", "--n-max", "8", "--out", s(&c)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(c.join("history.csv")).unwrap().lines().count(), 2);
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "problem = \"ks\"\nunknown = 3\n").unwrap();
    let o = phik(&["simulate", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = phik(&["fit", "--config", "branin-paper", "--method", "nope", "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unstable_integrator_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "problem = \"ks\"\n[ks]\nmembers = 2\nintegrator = \"rk4\"\n").unwrap();
    let o = phik(&["simulate", "--config", s(&cfg), "--fidelity", "low", "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("blew up"));
}

#[test]
fn single_member_cophik_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let o = phik(&["fit", "--config", "branin-paper", "--method", "cophik", "--members", "1", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("ensemble must have at least two members"), "{}", stderr(&o));
    let o = phik(&["fit", "--config", "branin-paper", "--method", "phik", "--high", "/nonexistent", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn overflowing_ensemble_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Grid::uniform(&[(0.0, 1.0), (0.0, 1.0)], &[41, 41]).unwrap();
    let members = vec![vec![1e300; grid.len()], vec![-1e300; grid.len()]];
    let e = Ensemble::new(grid, members, vec![vec![], vec![]], Fidelity::High).unwrap();
    let high = dir.path().join("high");
    write_ensemble(&high, &e, "branin", 7, "x", &[]).unwrap();
    let o = phik(&[
        "fit", "--config", "branin-paper", "--members", "2", "--method", "phik", "--high", s(&high), "--out", s(&dir.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
}
