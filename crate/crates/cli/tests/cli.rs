use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn weakdep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weakdep"))
        .args(args)
        .output()
        .expect("run weakdep")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const DOUBLING: &str = r#"{
  "model": {"variant": "doubling_map"},
  "observable": {"id": "centered_identity"},
  "n": 1000,
  "x_grid": [0.5, 1, 2],
  "theorem": ["thm1", "thm2", "hoeffding"],
  "reps": 4000,
  "base_seed": 42
}"#;

#[test]
fn bounds_table_for_doubling_map() {
    let text = stdout(&weakdep(&[
        "bounds",
        "--model",
        "doubling-map",
        "--n",
        "1000",
        "--x-grid",
        "1",
    ]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "x,iid_eq1,thm1,k_star,thm2,k_star_prime,hoeffding"
    );
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields[3], "1");
    assert_eq!(fields[5], "5");
}

#[test]
fn profile_csv() {
    let text = stdout(&weakdep(&[
        "profile",
        "--model",
        "lipschitz-kernel:0.5",
        "--n",
        "5",
    ]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[0], "r,delta,kind");
    assert!(lines[1].starts_with("1,0.75,linf_type"));
}

#[test]
fn simulate_trajectory_and_coupled_block() {
    let text = stdout(&weakdep(&[
        "simulate",
        "--model",
        "doubling-map",
        "--n",
        "10",
        "--seed",
        "3",
    ]));
    assert_eq!(text.lines().count(), 11);
    assert_eq!(text.lines().next(), Some("t,x_t"));
    let again = stdout(&weakdep(&[
        "simulate",
        "--model",
        "doubling-map",
        "--n",
        "10",
        "--seed",
        "3",
    ]));
    assert_eq!(text, again);

    let text = stdout(&weakdep(&[
        "simulate",
        "--coupled-j",
        "4",
        "--coupled-r",
        "3",
        "--seed",
        "1",
    ]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "i,x_i,x_star_i,dist");
    assert_eq!(lines.len(), 4);
}

#[test]
fn estimate_variance_rows() {
    let text = stdout(&weakdep(&[
        "estimate-variance",
        "--k-list",
        "1,5",
        "--reps",
        "2000",
        "--seed",
        "5",
        "--threads",
        "2",
    ]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "model,f,k_or_n,statistic,estimate,se_or_ci_low,ci_high,reps,seed"
    );
    assert_eq!(lines.len(), 3);
    let estimate: f64 = lines[2].split(',').nth(4).unwrap().parse().unwrap();
    assert!((estimate - 0.185_416_666).abs() < 0.03);
}

#[test]
fn estimate_coupling_within_contraction() {
    let text = stdout(&weakdep(&[
        "estimate-coupling",
        "--r-max",
        "4",
        "--j-list",
        "1,10",
        "--reps",
        "500",
    ]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 4 * 2);
    for line in &lines[1..] {
        let f: Vec<&str> = line.split(',').collect();
        let r: i32 = f[0].parse().unwrap();
        let d: f64 = f[3].parse().unwrap();
        assert!(d <= 0.5f64.powi(r - 1));
    }
}

#[test]
fn verify_is_deterministic_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), DOUBLING);
    let mut reports = Vec::new();
    for (i, threads) in ["1", "1", "8"].iter().enumerate() {
        let out = dir.path().join(format!("report{i}.csv"));
        let status = weakdep(&[
            "verify",
            "--config",
            &config,
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(
            status.status.success(),
            "{}",
            String::from_utf8_lossy(&status.stderr)
        );
        reports.push(fs::read(&out).unwrap());
        assert!(dir.path().join(format!("report{i}.meta.json")).exists());
    }
    assert_eq!(reports[0], reports[1]);
    assert_eq!(reports[0], reports[2]);
    let text = String::from_utf8(reports.remove(0)).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 3);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",pass")));
}

#[test]
fn verify_fails_on_bound_violation() {
    // The iid baseline on the doubling map uses sigma_1^2 = 1/12 while the
    // long-run variance is 1/4, so the bound breaks once x is large enough.
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"model":{"variant":"doubling_map"},"observable":{"id":"centered_identity"},
            "n":1000,"x_grid":[4],"theorem":"iid_eq1","reps":5000,"base_seed":1}"#,
    );
    let out = weakdep(&["verify", "--config", &config]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains(",fail"));
}

#[test]
fn verify_rejects_unknown_config_key() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &DOUBLING.replace("\"n\": 1000", "\"n\": 1000, \"nn\": 3"),
    );
    let out = weakdep(&["verify", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nn"));
}

#[test]
fn asymptotics_report() {
    let out = weakdep(&["asymptotics", "--family", "geometric:1:0.5"]);
    let text = stdout(&out);
    assert_eq!(text.lines().next(), Some("family,v,k_star,reference,ratio"));
    assert_eq!(text.lines().count(), 8);
    assert!(String::from_utf8_lossy(&out.stderr).contains("ratio spread"));
}

#[test]
fn bad_arguments_are_reported() {
    assert!(!weakdep(&["profile", "--model", "warp-drive"])
        .status
        .success());
    assert!(!weakdep(&["bounds", "--x-grid", "2:1:0.5"]).status.success());
}
