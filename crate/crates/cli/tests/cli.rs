use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kinetic(dir: &Path, args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kinetic"));
    cmd.current_dir(dir).args(args);
    match threads {
        Some(t) => cmd.env("KINETIC_THREADS", t),
        None => cmd.env_remove("KINETIC_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn validate_suite_passes_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = kinetic(dir.path(), &["validate"], None);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let junit = fs::read_to_string(dir.path().join("validate_junit.xml")).unwrap();
    assert!(junit.contains("failures=\"0\""), "{junit}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("validate_report.json")).unwrap()).unwrap();
    assert_eq!(report["provenance"]["seed"], 0);
    assert!(report["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn escape_sweep_writes_one_row_per_temperature() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["escape", "--seed", "11", "--samples", "500", "--eps", "1", "--eps", "0.8", "--eps", "0.6", "--eps", "0.5"];
    let out = kinetic(dir.path(), &args, None);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("escape.csv")).unwrap();
    assert!(text.starts_with("# kinetic "));
    assert!(text.lines().next().unwrap().contains("seed=11"));
    let lines = data_lines(&text);
    assert_eq!(lines[0], "eps,mean_tau,predicted_tau,p_left,predicted_p_left,ks_exp");
    assert_eq!(lines.len(), 5);
    for row in &lines[1..] {
        let fields: Vec<f64> = row.split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields.len(), 6);
        assert!(fields[1] > 0.0 && (0.0..=1.0).contains(&fields[3]));
    }
}

#[test]
fn config_errors_exit_with_code_two_and_name_every_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.cfg"), "delta=abc\n# fine\nbogus = 3\nsteps = -1\n").unwrap();
    let out = kinetic(dir.path(), &["hybrid", "--config", "bad.cfg"], None);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    for needle in ["line 1", "line 3", "line 4", "bogus"] {
        assert!(err.contains(needle), "missing {needle} in {err}");
    }
    assert!(!dir.path().join("hybrid_traj.csv").exists());
}

#[test]
fn semantic_config_errors_also_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = kinetic(dir.path(), &["escape", "--a", "1", "--seed", "1"], None);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    fs::write(dir.path().join("h.cfg"), "R = 3\nseed = 1\n").unwrap();
    let out = kinetic(dir.path(), &["hybrid", "--config", "h.cfg"], None);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn failed_oracle_exits_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = kinetic(dir.path(), &["validate-invariance", "--torus", "6", "--tolerance", "-1"], None);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

#[test]
fn invariance_residual_is_printed() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["validate-invariance", "--dim", "2", "--torus", "6", "--potential", "abs:0.5", "--factorized", "--order", "random"];
    let out = kinetic(dir.path(), &args, None);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let first = String::from_utf8(out.stdout).unwrap();
    let residual: f64 = first.lines().next().unwrap().parse().unwrap();
    assert!(residual < 1e-12);
}

#[test]
fn missing_seed_is_warned_about() {
    let dir = tempfile::tempdir().unwrap();
    let out = kinetic(dir.path(), &["zzd", "--steps", "3"], None);
    assert_eq!(out.status.code(), Some(0));
    assert!(stderr(&out).contains("no seed"));
    let quiet = kinetic(dir.path(), &["zzd", "--steps", "3", "--seed", "4"], None);
    assert!(!stderr(&quiet).contains("no seed"));
}

#[test]
fn zzd_trajectories_have_the_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["zzd", "--dim", "3", "--steps", "40", "--every", "10", "--chains", "2", "--torus", "8", "--seed", "9"];
    let out = kinetic(dir.path(), &args, None);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    for c in 0..2 {
        let text = fs::read_to_string(dir.path().join(format!("zzd_traj_c{c}.csv"))).unwrap();
        let lines = data_lines(&text);
        assert_eq!(lines[0], "step,x1,x2,x3,v1,v2,v3");
        assert_eq!(lines.len(), 6);
        for row in &lines[1..] {
            let v: Vec<i64> = row.split(',').map(|f| f.parse().unwrap()).collect();
            assert!(v[1..4].iter().all(|x| (-4..4).contains(x)));
            assert!(v[4..].iter().all(|s| s.abs() == 1));
        }
    }
}

fn run_hybrid(dir: &Path, threads: &str) -> [String; 3] {
    let out = kinetic(dir, &["hybrid", "--config", "run.cfg"], Some(threads));
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    ["run_traj.csv", "run_stats.jsonl", "run_cost.csv"].map(|f| fs::read_to_string(dir.join(f)).unwrap())
}

#[test]
fn hybrid_outputs_are_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.cfg"),
        "M = 8\nsteps = 300\ntraj_every = 50\nblock = 100\nseed = 17\nout_prefix = run\nlambda = 0.5\n",
    )
    .unwrap();
    let single = run_hybrid(dir.path(), "1");
    let many = run_hybrid(dir.path(), "4");
    assert_eq!(single, many);
    let cost = data_lines(&single[2]);
    assert_eq!(cost[0], "step,f0_evals,gij_evals,proposals,accepts");
    assert_eq!(cost.len(), 4);
    let stats: Vec<serde_json::Value> = single[1].lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(stats.len(), 4);
    assert_eq!(stats[0]["provenance"]["seed"], 17);
    assert!(stats[1]["kinetic_energy"].as_f64().unwrap() > 0.0);
    assert_eq!(data_lines(&single[0]).len(), 1 + 7);
    let entries: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(entries.len(), 4, "stray files: {entries:?}");
}

#[test]
fn hybrid_reads_initial_positions_from_xyz() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("start.xyz"), "2\n6.0\n1.0 1.0 1.0\n2.2 1.0 1.0\n").unwrap();
    fs::write(dir.path().join("run.cfg"), "xyz_in = start.xyz\nsteps = 10\nR = 2\nseed = 1\nout_prefix = run\n").unwrap();
    let out = kinetic(dir.path(), &["hybrid", "--config", "run.cfg"], None);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let traj = fs::read_to_string(dir.path().join("run_traj.csv")).unwrap();
    let header = data_lines(&traj)[0];
    assert_eq!(header.split(',').count(), 2 + 12);
    let first: Vec<f64> = data_lines(&traj)[1].split(',').map(|f| f.parse().unwrap()).collect();
    assert_eq!(&first[2..5], &[1.0, 1.0, 1.0]);

    fs::write(dir.path().join("bad.cfg"), "xyz_in = start.xyz\nM = 3\nseed = 1\n").unwrap();
    let out = kinetic(dir.path(), &["hybrid", "--config", "bad.cfg"], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scaling_writes_an_eps_column() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["scaling", "--seed", "5", "--eps", "0.5", "--eps", "0.25", "--samples", "400", "--t", "1", "--coupling", "shared"];
    let out = kinetic(dir.path(), &args, None);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("scaling.csv")).unwrap();
    let lines = data_lines(&text);
    assert_eq!(lines[0], "eps,w1");
    assert_eq!(lines[1].split(',').next().unwrap(), "5.0000000000000000e-1");
    assert_eq!(lines.len(), 3);
}
