use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ehcomm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ehcomm"))
        .args(args)
        .output()
        .expect("spawn ehcomm")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn field(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no {key} in output:\n{text}"))
        .to_string()
}

#[test]
fn allocate_inline_profile() {
    let o = ehcomm(&["allocate", "--p-in", "3,1,2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert_eq!(field(&s, "p_tr"), "2.000000,2.000000,2.000000");
    assert_eq!(field(&s, "breakpoints"), "0,3");
    assert_eq!(field(&s, "t_opt"), "0.792481");
    assert_eq!(field(&s, "t_ub"), "0.792481");
    assert_eq!(field(&s, "t_lb"), "0.764160");
}

#[test]
fn allocate_single_slot_and_decreasing() {
    let o = ehcomm(&["allocate", "--p-in", "4"]);
    assert!(o.status.success());
    assert_eq!(field(&stdout(&o), "p_tr"), "4.000000");

    let o = ehcomm(&["allocate", "--p-in", "1,2,3"]);
    assert!(o.status.success());
    assert_eq!(field(&stdout(&o), "p_tr"), "1.000000,2.000000,3.000000");
}

#[test]
fn allocate_from_file_and_csv_output() {
    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("p.txt");
    std::fs::write(&profile, "# rates\n3\n1\n\n2\n").unwrap();
    let out = dir.path().join("alloc.csv");
    let o = ehcomm(&[
        "allocate",
        "--p-in-file",
        profile.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "slot,p_in,p_tr,cum_in,cum_tr,rate_bits");
    assert_eq!(lines.count(), 3);

    let json = dir.path().join("summary.json");
    let o = ehcomm(&[
        "allocate",
        "--p-in-file",
        profile.to_str().unwrap(),
        "--format",
        "json",
        "--out",
        json.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["breakpoints"], serde_json::json!([0, 3]));
}

#[test]
fn allocate_input_errors() {
    let o = ehcomm(&["allocate", "--p-in-file", "/definitely/not/here.txt"]);
    assert_eq!(o.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "1.0\n2.0\nabc\n").unwrap();
    let o = ehcomm(&["allocate", "--p-in-file", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains('3'), "line number missing: {}", stderr(&o));

    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "# nothing\n").unwrap();
    let o = ehcomm(&["allocate", "--p-in-file", empty.to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn allocate_usage_errors() {
    assert_eq!(ehcomm(&["allocate"]).status.code(), Some(1));
    assert_eq!(
        ehcomm(&["allocate", "--p-in", "1", "--p-in-file", "x"]).status.code(),
        Some(1)
    );
    assert_eq!(ehcomm(&["allocate", "--p-in", "1,-2"]).status.code(), Some(1));
    assert_eq!(ehcomm(&["allocate", "--p-in", "1,x"]).status.code(), Some(1));
    assert_eq!(ehcomm(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn help_and_version_succeed() {
    assert!(ehcomm(&["--help"]).status.success());
    assert!(ehcomm(&["--version"]).status.success());
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (path, jobs) in [(&a, "1"), (&b, "4")] {
        let o = ehcomm(&[
            "simulate", "--scheme", "sat", "--n", "500", "--p", "5", "--trials", "30", "--seed", "7",
            "--jobs", jobs, "--out", path.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = std::fs::read(&a).unwrap();
    assert_eq!(a, std::fs::read(&b).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "trial,scheme,n,h,P,var,msg,decoded,error,infeasible_count,first_violation"
    );
    assert_eq!(text.lines().count(), 31);
}

#[test]
fn simulate_bet_second_half_is_clean() {
    let o = ehcomm(&["simulate", "--scheme", "bet", "--n", "20000", "--p", "10", "--trials", "20"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let frac: f64 = field(&stdout(&o), "second_half_infeasible_fraction").parse().unwrap();
    assert!(frac < 0.05, "second-half drop fraction {frac}");
}

#[test]
fn simulate_usage_errors() {
    let base = ["simulate", "--scheme", "sat", "--p", "1"];
    let mut args = base.to_vec();
    args.extend(["--n", "0"]);
    assert_eq!(ehcomm(&args).status.code(), Some(1));

    assert_eq!(
        ehcomm(&["simulate", "--scheme", "qam", "--n", "10", "--p", "1"]).status.code(),
        Some(1)
    );
    assert_eq!(
        ehcomm(&["simulate", "--scheme", "bet", "--n", "10", "--p", "1", "--eps", "2"]).status.code(),
        Some(1)
    );
    assert_eq!(
        ehcomm(&["simulate", "--scheme", "sat", "--n", "10", "--p", "-1"]).status.code(),
        Some(1)
    );
}

#[test]
fn sweep_bundled_fig5_config() {
    let cfg = configs_dir().join("fig5.cfg");
    let o = ehcomm(&["sweep", cfg.to_str().unwrap(), "--trials", "20"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    let mut lines = s.lines();
    assert_eq!(
        lines.next().unwrap(),
        "std,trials,t_lb_mean,t_lb_se,t_opt_mean,t_opt_se,t_ub_mean,t_ub_se"
    );
    let stds: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(stds, vec![0.0, 2.0, 5.0, 10.0]);
}

#[test]
fn sweep_jobs_do_not_change_output() {
    let cfg = configs_dir().join("fig5.cfg");
    let cfg = cfg.to_str().unwrap();
    let one = ehcomm(&["sweep", cfg, "--trials", "50", "--jobs", "1"]);
    let four = ehcomm(&["sweep", cfg, "--trials", "50", "--jobs", "4"]);
    assert!(one.status.success() && four.status.success());
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn sweep_dry_run_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let cfg = configs_dir().join("fig5.cfg");
    let o = ehcomm(&["sweep", cfg.to_str().unwrap(), "--dry-run", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    assert!(!out.exists());
}

#[test]
fn sweep_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    };

    let empty = write("empty.cfg", "[fig5]\nslots = 4\nmean = 1.0\nstd_values = []\ntrials = 3\n");
    let o = ehcomm(&["sweep", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("std_values"));

    let unknown = write(
        "unknown.cfg",
        "[fig5]\nslots = 4\nmean = 1.0\nstd_values = [1.0]\ntrials = 3\ncolour = \"red\"\n",
    );
    let o = ehcomm(&["sweep", unknown.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"));

    let syntax = write("syntax.cfg", "[fig5\nslots = 4\n");
    assert_eq!(ehcomm(&["sweep", syntax.to_str().unwrap()]).status.code(), Some(2));

    assert_eq!(ehcomm(&["sweep", "/no/such.cfg"]).status.code(), Some(2));
}

#[test]
fn sweep_feasibility_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("f.cfg");
    std::fs::write(
        &cfg,
        "[feasibility]\nscheme = \"sat\"\npower = 5.0\nn_values = [50, 200]\ntrials = 10\n",
    )
    .unwrap();
    let out = dir.path().join("f.json");
    let o = ehcomm(&["sweep", cfg.to_str().unwrap(), "--format", "json", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn trace_writes_requested_length() {
    let o = ehcomm(&["trace", "--dist", "constant", "--mean", "2.5", "--n", "4"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "e_i\n2.5\n2.5\n2.5\n2.5\n");

    let o = ehcomm(&["trace", "--dist", "bernoulli-scaled", "--mean", "1", "--p-success", "0.25", "--n", "1000"]);
    assert!(o.status.success());
    let s = stdout(&o);
    for v in s.lines().skip(1) {
        let v: f64 = v.parse().unwrap();
        assert!(v == 0.0 || v == 4.0, "{v}");
    }

    assert_eq!(
        ehcomm(&["trace", "--dist", "gamma", "--mean", "1", "--n", "3"]).status.code(),
        Some(1)
    );
}
