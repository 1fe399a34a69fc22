//! End-to-end runs of the `scvx` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use scvx::conic::ConicProgram;
use scvx::QuadrotorScenario;
use serde_json::Value;

fn scvx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scvx")).args(args).output().unwrap()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn write_scenario(dir: &Path, name: &str, sc: &QuadrotorScenario) -> String {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(sc).unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

/// Disk of radius 20 between endpoints 41 m apart with 60 m of reach: the
/// straight line is reachable, the detour is not.
fn blocked_corridor() -> QuadrotorScenario {
    QuadrotorScenario {
        t_f: 30.0,
        p0: [-20.5, 0.0, 0.0],
        pf: [20.5, 0.0, 0.5],
        obstacles: vec![scvx::Obstacle { p_c: [0.0, 0.0], r: 20.0 }],
        ..Default::default()
    }
}

#[test]
fn builtin_benchmark() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = scvx(&["run", "--builtin", "quadrotor", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("converged: cost 245.4"), "{stdout}");

    let r = report(&out);
    assert_eq!(r["status"]["state"], "converged");
    let cost = r["cost"].as_f64().unwrap();
    assert!((242.9..=247.8).contains(&cost));
    assert!(r["successions"].as_u64().unwrap() <= 10);
    assert!(r["checks"]["min_margin"].as_f64().unwrap() >= -1e-7);
    assert!(r["checks"]["max_defect"].as_f64().unwrap() <= 1e-7);
    assert!(r["checks"]["max_pin_error"].as_f64().unwrap() <= 1e-7);
    assert_eq!(r["checks"]["above_floor"], true);
    assert!(!fs::read_to_string(out.join("report.json")).unwrap().contains("seconds"));

    let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let lines: Vec<&str> = traj.lines().collect();
    assert_eq!(lines[0], "t,px,py,pz,vx,vy,vz,ux,uy,uz,margin_0,margin_1");
    assert_eq!(lines.len(), 26);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 12));
    let curve = fs::read_to_string(out.join("cost_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), r["successions"].as_u64().unwrap() as usize + 2);
    let ground = fs::read_to_string(out.join("ground_track.csv")).unwrap();
    assert_eq!(ground.lines().filter(|l| l.starts_with("path,")).count(), 25);
    assert_eq!(ground.lines().filter(|l| l.starts_with("obstacle_1,")).count(), 65);
    assert_eq!(fs::read_to_string(out.join("path3d.csv")).unwrap().lines().count(), 26);
}

#[test]
fn outputs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for d in [&a, &b] {
        let o = scvx(&["run", "--builtin", "quadrotor", "--out", d.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["report.json", "trajectory.csv", "ground_track.csv", "path3d.csv", "cost_curve.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn no_obstacles_takes_one_succession() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("free");
    let o = scvx(&["run", "--builtin", "quadrotor", "--no-obstacles", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["successions"], 1);
    let cost = r["cost"].as_f64().unwrap();
    let floor = r["relaxation_floor"].as_f64().unwrap();
    assert!((cost - floor).abs() <= 1e-7, "{cost} vs {floor}");
    let header = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(header.starts_with("t,px,py,pz,vx,vy,vz,ux,uy,uz\n"));
}

#[test]
fn blocked_corridor_is_infeasible() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_scenario(tmp.path(), "corridor.json", &blocked_corridor());
    let out = tmp.path().join("c");
    let o = scvx(&["run", &path, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("infeasible"));
    assert!(!out.join("report.json").exists());

    // the same corridor without the disk is fine
    let o = scvx(&["run", &path, "--no-obstacles", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn bad_inputs_exit_4() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let out = out.to_str().unwrap();

    let o = scvx(&["run", "/nonexistent/scenario.json", "--out", out]);
    assert_eq!(o.status.code(), Some(4));

    let junk = tmp.path().join("junk.json");
    fs::write(&junk, r#"{"N": 25, "bogus": 1}"#).unwrap();
    assert_eq!(scvx(&["run", junk.to_str().unwrap(), "--out", out]).status.code(), Some(4));

    let inside = QuadrotorScenario {
        p0: [-1.0, 0.5, 0.0],
        ..Default::default()
    };
    let p = write_scenario(tmp.path(), "inside.json", &inside);
    let o = scvx(&["run", &p, "--out", out]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("inside obstacle"));

    assert_eq!(scvx(&["run", "--out", out]).status.code(), Some(4));
    assert_eq!(scvx(&["run", "--builtin", "quadrotor", "--epsilon", "-1"]).status.code(), Some(4));
    assert_eq!(scvx(&["run", "--frobnicate"]).status.code(), Some(4));
    assert_eq!(scvx(&["run", &p, &p, "--out", out]).status.code(), Some(4));
}

#[test]
fn succession_cap_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cap");
    let o = scvx(&["run", "--builtin", "quadrotor", "--max-iter", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["status"]["state"], "max-successions");
    assert_eq!(r["successions"], 2);
}

#[test]
fn subproblem_dump_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("dump");
    let o = scvx(&["run", "--builtin", "quadrotor", "--dump-subproblems", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let solves = report(&out)["subproblem_solves"].as_u64().unwrap() as usize;
    let mut files: Vec<_> = fs::read_dir(out.join("subproblems")).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert_eq!(files.len(), solves);
    let p = ConicProgram::from_triplet_text(&fs::read_to_string(&files[0]).unwrap()).unwrap();
    assert_eq!(p.num_vars(), 222 + 24);
}

#[test]
fn sweep_runs_isolated_scenarios() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write_scenario(tmp.path(), "table.json", &QuadrotorScenario::default());
    let b = write_scenario(tmp.path(), "open.json", &QuadrotorScenario::default().without_obstacles());
    let out = tmp.path().join("sweep");
    let o = scvx(&["run", "--sweep", &a, &b, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(report(&out.join("table"))["successions"].as_u64().unwrap() > 1);
    assert_eq!(report(&out.join("open"))["successions"], 1);

    // the worst exit code wins
    let c = write_scenario(tmp.path(), "corridor.json", &blocked_corridor());
    let o = scvx(&["run", "--sweep", &a, &c, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
