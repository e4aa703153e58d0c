use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL_S1: &str = "nsub = 8\ny_a = -0.3\ny_b = 0.1\ny_d = 1\nalpha = 1e-2\nb_random = 10\n";

struct Env {
    dir: TempDir,
}

impl Env {
    fn new() -> Self {
        Env {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn config(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_obstacle-ocp"))
            .current_dir(self.dir.path())
            .args(args)
            .output()
            .unwrap()
    }
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn text(p: &Path) -> String {
    fs::read_to_string(p).unwrap()
}

fn solve(env: &Env, cfg: &str, out: &str) -> Output {
    let c = env.config(&format!("{out}.cfg"), cfg);
    env.run(&["solve", "--config", c.to_str().unwrap(), "--out", out])
}

#[test]
fn solve_writes_artifacts() {
    let env = Env::new();
    let o = solve(&env, SMALL_S1, "s1");
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = text(&env.path("s1/path.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(obstacle_ocp::ocp::CSV_HEADER));
    assert!(lines.count() >= 1);
    for f in ["u", "y", "p", "xi", "nu", "mu", "lambda"] {
        assert!(env.path(&format!("s1/fields/{f}.txt")).exists(), "{f}");
    }
    let summary = text(&env.path("s1/summary.txt"));
    let kkt: f64 = summary
        .lines()
        .find_map(|l| l.strip_prefix("kkt_residual "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(kkt <= 1e-8);
    assert!(summary.contains("c_stationarity pass"));
}

#[test]
fn verify_reproduces_the_solve_report() {
    let env = Env::new();
    let cfg = env.config("s.cfg", SMALL_S1);
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&env.run(&["solve", "--config", c, "--out", "o"])), 0);
    let v = env.run(&["verify", "--which", "c", "--config", c, "--out", "o"]);
    assert_eq!(code(&v), 0);
    assert_eq!(fs::read(env.path("o/stationarity_c.txt")).unwrap(), fs::read(env.path("o/verify_c.txt")).unwrap());
    for which in ["b", "normal-cone"] {
        assert_eq!(code(&env.run(&["verify", "--which", which, "--config", c, "--out", "o"])), 0, "{which}");
    }
}

#[test]
fn tampered_nu_fails_verification() {
    let env = Env::new();
    let cfg = env.config("s.cfg", SMALL_S1);
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&env.run(&["solve", "--config", c, "--out", "o"])), 0);
    let nu_path = env.path("o/fields/nu.txt");
    let nu = text(&nu_path);
    // header, then one "index value" line per interior node
    let mut lines: Vec<String> = nu.lines().map(String::from).collect();
    assert!(lines[1].starts_with("0 "));
    lines[1] = "0 -0.5".into();
    fs::write(&nu_path, lines.join("\n") + "\n").unwrap();
    let v = env.run(&["verify", "--which", "c", "--config", c, "--out", "o"]);
    assert_eq!(code(&v), 1);
    let report = text(&env.path("o/verify_c.txt"));
    let line = report.lines().find(|l| l.starts_with("nu_nonneg ")).unwrap();
    assert!(line.contains("fail"), "{line}");
}

#[test]
fn strong_with_box_is_not_applicable() {
    let env = Env::new();
    let cfg = env.config("b.cfg", "nsub = 6\ny_a = -0.05\ny_b = 1\ny_d = -1\nalpha = 1e-2\nu_low = -3\n");
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&env.run(&["solve", "--config", c, "--out", "o"])), 0);
    let v = env.run(&["verify", "--which", "strong", "--config", c, "--out", "o"]);
    assert_eq!(code(&v), 0);
    let stdout = String::from_utf8_lossy(&v.stdout);
    assert!(stdout.contains("not-applicable"));
    assert!(stdout.contains("warning"));
}

#[test]
fn usage_errors_exit_2() {
    let env = Env::new();
    let bad = env.config("bad.cfg", "nsub = 8\ngamma_factor = 0.5\n");
    assert_eq!(code(&env.run(&["solve", "--config", bad.to_str().unwrap()])), 2);
    let unknown = env.config("unknown.cfg", "nsub = 8\ncolour = red\n");
    assert_eq!(code(&env.run(&["solve", "--config", unknown.to_str().unwrap()])), 2);
    assert_eq!(code(&env.run(&["frobnicate"])), 2);
    assert_eq!(code(&env.run(&["verify", "--which", "d"])), 2);
    assert_eq!(code(&env.run(&["solve", "--config", "missing.cfg"])), 2);
    assert_eq!(code(&env.run(&["solve", "--gamma-max", "0.1"])), 2);
    assert_eq!(code(&env.run(&["slater"])), 2);

    let big = env.config("o16.cfg", "nsub = 16\n");
    assert_eq!(code(&env.run(&["oracle", "--config", big.to_str().unwrap()])), 2);
}

#[test]
fn verify_rejects_other_mesh() {
    let env = Env::new();
    let cfg = env.config("s.cfg", SMALL_S1);
    assert_eq!(code(&env.run(&["solve", "--config", cfg.to_str().unwrap(), "--out", "o"])), 0);
    let other = env.config("t.cfg", &SMALL_S1.replace("nsub = 8", "nsub = 9"));
    let v = env.run(&["verify", "--which", "c", "--config", other.to_str().unwrap(), "--out", "o"]);
    assert_eq!(code(&v), 2);
}

#[test]
fn oracle_suite_is_deterministic() {
    let env = Env::new();
    let cfg = env.config("o.cfg", "nsub = 4\nu_ref = lq\noracle_instances = 20\n");
    let c = cfg.to_str().unwrap();
    let a = env.run(&["oracle", "--config", c, "--seed", "5"]);
    let b = env.run(&["oracle", "--config", c, "--seed", "5"]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stdout));
    assert_eq!(a.stdout, b.stdout);
    let out = String::from_utf8_lossy(&a.stdout);
    assert!(out.lines().any(|l| l.starts_with("enumeration") && l.ends_with("pass")));
    assert!(out.lines().any(|l| l.starts_with("derivative") && l.ends_with("pass")));
}

#[test]
fn slater_command() {
    let env = Env::new();
    let good = env.config("g.cfg", "nsub = 8\ny_a = -0.05\ny_b = 1\nu_hat = construct\n");
    let o = env.run(&["slater", "--config", good.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("slater_tau "));
}
