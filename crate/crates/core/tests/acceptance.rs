//! Acceptance criteria 1–10. Each test prints one `criterion N ... PASS|FAIL`
//! line (visible with `--nocapture`) and then asserts.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use obstacle_ocp::fem::linalg;
use obstacle_ocp::ocp::{evaluate, path_follow, OcpProblem, PathHistory, Penalty};
use obstacle_ocp::oracle::{biactive_instance, enumerate_vi, fd_directional, lq_kkt_solve};
use obstacle_ocp::stationarity::{
    check_b_stationarity, check_c_stationarity, check_strong_stationarity, multipliers_from_iterate,
    normal_cone_certificate, recover_multipliers, sample_directions, DirectionSampling, Tolerances,
};
use obstacle_ocp::vi::{directional_derivative, solve_vi_interior};

use common::*;

fn criterion(k: u32, title: &str, ok: bool, detail: &str) {
    println!("criterion {k:>2} {title}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {k} ({title}) failed: {detail}");
}

struct Run {
    problem: OcpProblem,
    history: PathHistory,
    elapsed: Duration,
}

fn run_scenario(text: &str) -> Run {
    let start = Instant::now();
    let cfg = config(text);
    let problem = cfg.problem().expect("problem builds");
    let history = path_follow(&problem, &cfg.path_options().unwrap()).expect("path converges");
    Run {
        problem,
        history,
        elapsed: start.elapsed(),
    }
}

fn s1() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| run_scenario(S1))
}

fn s2() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| run_scenario(S2))
}

fn endpoint(run: &Run) -> Vec<f64> {
    run.history.last().unwrap().u.interior(run.problem.mesh())
}

#[test]
fn criterion_01_enumeration_oracle() {
    let start = Instant::now();
    let op = laplace(4);
    let n = op.dim();
    let mut rng = rng(1);
    let mut worst = 0.0_f64;
    let mut mismatched_sets = 0;
    let mut nonempty = 0;
    for _ in 0..50 {
        let u = gaussian(&mut rng, n, 4.0);
        let y_a = uniform(&mut rng, n, -0.2, 0.0);
        let e = enumerate_vi(&op, &u, &y_a).unwrap();
        let s = solve_vi_interior(&op, &u, &y_a).unwrap();
        worst = worst.max(max_diff(&e.y, s.y_interior()));
        if e.active_set != s.active {
            mismatched_sets += 1;
        }
        if !s.active.is_empty() {
            nonempty += 1;
        }
    }
    let t = start.elapsed().as_secs_f64();
    let ok = worst <= 1e-10 && mismatched_sets == 0 && t <= 10.0;
    criterion(
        1,
        "active-set solver matches enumeration",
        ok,
        &format!("max|y-y*| {worst:.2e}, set mismatches {mismatched_sets}, {nonempty}/50 with contact, {t:.2}s"),
    );
}

#[test]
fn criterion_02_vi_properties() {
    let start = Instant::now();
    let op = laplace(8);
    let n = op.dim();
    let tol = 1e-9;
    let count = |a: &[f64], b: &[f64]| (0..a.len()).filter(|&i| a[i] > b[i] + tol).count();
    let mut rng = rng(2);
    let (mut mono, mut conv, mut lin, mut sub) = (0, 0, 0, 0);
    for k in 0..100 {
        let y_a = uniform(&mut rng, n, -0.2, 0.0);
        let u1 = gaussian(&mut rng, n, 4.0);
        let bump: Vec<f64> = gaussian(&mut rng, n, 2.0).iter().map(|v| v.abs()).collect();
        let u2 = axpy(1.0, &bump, &u1);
        let s1 = solve_vi_interior(&op, &u1, &y_a).unwrap();
        let s2 = solve_vi_interior(&op, &u2, &y_a).unwrap();
        mono += count(s1.y_interior(), s2.y_interior());

        let v = gaussian(&mut rng, n, 4.0);
        let a: f64 = uniform(&mut rng, 1, 0.05, 0.95)[0];
        let mix: Vec<f64> = (0..n).map(|i| a * u1[i] + (1.0 - a) * v[i]).collect();
        let sm = solve_vi_interior(&op, &mix, &y_a).unwrap();
        let sv = solve_vi_interior(&op, &v, &y_a).unwrap();
        let bound: Vec<f64> = (0..n)
            .map(|i| a * s1.y_interior()[i] + (1.0 - a) * sv.y_interior()[i])
            .collect();
        conv += count(sm.y_interior(), &bound);

        // derivative properties on instances with biactive nodes
        let inst = biactive_instance(&op, 1000 + k);
        let sol = solve_vi_interior(&op, &inst.u, &inst.y_a).unwrap();
        let h1 = gaussian(&mut rng, n, 2.0);
        let h2 = gaussian(&mut rng, n, 2.0);
        let z1 = directional_derivative(&op, &sol, &h1).unwrap();
        let z2 = directional_derivative(&op, &sol, &h2).unwrap();
        let z12 = directional_derivative(&op, &sol, &axpy(1.0, &h1, &h2)).unwrap();
        let shifted = solve_vi_interior(&op, &axpy(1.0, &h1, &inst.u), &inst.y_a).unwrap();
        lin += count(&axpy(1.0, &z1, sol.y_interior()), shifted.y_interior());
        sub += count(&z12, &axpy(1.0, &z1, &z2));
    }
    let t = start.elapsed().as_secs_f64();
    let ok = mono + conv + lin + sub == 0 && t <= 60.0;
    criterion(
        2,
        "monotone, convex, S(u)+S'(u;h) <= S(u+h), sublinear S'",
        ok,
        &format!("violations {mono}/{conv}/{lin}/{sub}, {t:.2}s"),
    );
}

#[test]
fn criterion_03_derivative_vs_difference_quotients() {
    let op = laplace(8);
    let n = op.dim();
    let mut rng = rng(3);
    let mut worst = 0.0_f64;
    let mut worst_hom = 0.0_f64;
    let mut with_biactive = 0;
    for k in 0..10 {
        let inst = biactive_instance(&op, k);
        let sol = solve_vi_interior(&op, &inst.u, &inst.y_a).unwrap();
        if !sol.biactive.is_empty() {
            with_biactive += 1;
        }
        let h = gaussian(&mut rng, n, 1.0);
        let z = directional_derivative(&op, &sol, &h).unwrap();
        let fd = fd_directional(&op, &inst.u, &inst.y_a, &h, &[1e-2, 1e-3, 1e-4, 1e-5, 1e-6]).unwrap();
        worst = worst.max(max_diff(&z, &fd.extrapolated));
        for s in [0.5, 2.0, 10.0] {
            let hs: Vec<f64> = h.iter().map(|v| s * v).collect();
            let zs = directional_derivative(&op, &sol, &hs).unwrap();
            let scaled: Vec<f64> = z.iter().map(|v| s * v).collect();
            worst_hom = worst_hom.max(max_diff(&zs, &scaled));
        }
    }
    let ok = worst <= 1e-7 && worst_hom <= 1e-10 && with_biactive == 10;
    criterion(
        3,
        "directional derivative on biactive instances",
        ok,
        &format!("max|z-fd| {worst:.2e}, homogeneity {worst_hom:.2e}, {with_biactive}/10 biactive"),
    );
}

#[test]
fn criterion_04_lq_oracle() {
    let cfg = config(
        "nsub = 16\ny_a = -1\ny_b = 1\ny_d = 2*sin(3*x)*y\nalpha = 1e-2\nu_ref = 0.5*cos(2*y)\n",
    );
    let problem = cfg.problem().unwrap();
    let lq = lq_kkt_solve(&problem).expect("bounds are inactive at the LQ solution");
    let history = path_follow(&problem, &cfg.path_options().unwrap()).unwrap();
    let u = history.last().unwrap().u.interior(problem.mesh());
    let diff: Vec<f64> = u.iter().zip(&lq.u).map(|(a, b)| a - b).collect();
    let d = problem.disc().l2_lumped(&diff);
    let scale = problem.disc().l2_lumped(&lq.u);
    criterion(
        4,
        "path endpoint matches the linear KKT solve",
        d <= 1e-8 && scale > 0.0,
        &format!("|u-u*|_L2 {d:.2e}, |u*|_L2 {scale:.2e}"),
    );
}

#[test]
fn criterion_05_path_diagnostics_s1() {
    let run = s1();
    let d = &run.history.diagnostics;
    let last = d.last().unwrap();
    let gap_ok = last.gamma == 1e8 && last.penalty_gap <= 1e-6;
    let at_1e4 = d.iter().find(|s| s.gamma == 1e4).map(|s| s.nu_mass).unwrap_or(f64::NAN);
    let max_nu = d.iter().map(|s| s.nu_mass).fold(0.0_f64, f64::max);
    let nu_ok = at_1e4 > 0.0 && max_nu <= 2.0 * at_1e4;
    let min_rho = d.iter().map(|s| s.rho).fold(f64::INFINITY, f64::min);
    let rho_ok = min_rho >= 0.05;
    let t = run.elapsed.as_secs_f64();
    criterion(
        5,
        "S1 path: complementarity limit, bounded nu, separation",
        gap_ok && nu_ok && rho_ok && t <= 120.0,
        &format!(
            "(a) gamma {:.0e} gap {:.2e}; (b) max nu {max_nu:.4} vs 2x{at_1e4:.4}; (c) min rho {min_rho:.3}; {t:.1}s",
            last.gamma, last.penalty_gap
        ),
    );
}

#[test]
fn criterion_06_c_stationarity_s1() {
    let run = s1();
    let it = run.history.last().unwrap();
    let (_, mults) = multipliers_from_iterate(&run.problem, it).unwrap();
    let u = endpoint(run);
    let tol = Tolerances::for_problem(&run.problem);
    let report = check_c_stationarity(&run.problem, &u, &mults, &tol).unwrap();
    let summary: Vec<String> = report
        .residuals
        .iter()
        .map(|r| format!("{} {:.1e}", r.key, r.value))
        .collect();
    let nu_mass = linalg::weighted_dot(run.problem.lumped(), &mults.nu, &vec![1.0; u.len()]);
    criterion(
        6,
        "C-stationarity at the S1 endpoint",
        report.passed() && tol.stat == 1e-6 && tol.sign == 1e-8 && nu_mass > 0.0,
        &summary.join(", "),
    );
}

#[test]
fn criterion_07_strong_vs_b_s2() {
    let run = s2();
    let problem = &run.problem;
    let mut tol = Tolerances::for_problem(problem);
    tol.b = 1e-5;
    let obj = problem.effective_objective();
    let sampling = DirectionSampling::default();

    let it = run.history.last().unwrap();
    let (vi, mults) = multipliers_from_iterate(problem, it).unwrap();
    let u = endpoint(run);
    let strong = check_strong_stationarity(problem, &u, &mults, &tol).unwrap();
    let dirs = sample_directions(problem, &u, &vi, &obj, &sampling, true, &tol);
    let b = check_b_stationarity(problem, &u, &obj, &dirs, &tol).unwrap();
    let strict = vi.strict.len();

    let bad: Vec<f64> = u.iter().map(|v| v + 0.1).collect();
    let (vi_bad, mults_bad) = recover_multipliers(problem, &bad, None).unwrap();
    let strong_bad = check_strong_stationarity(problem, &bad, &mults_bad, &tol).unwrap();
    let dirs_bad = sample_directions(problem, &bad, &vi_bad, &obj, &sampling, true, &tol);
    let b_bad = check_b_stationarity(problem, &bad, &obj, &dirs_bad, &tol).unwrap();

    let ok = strict > 0
        && strong.passed()
        && b.admitted >= 500
        && b.min_value >= -1e-5
        && !strong_bad.passed()
        && !b_bad.report.passed();
    criterion(
        7,
        "strong stationarity agrees with sampled B-stationarity on S2",
        ok,
        &format!(
            "strict contact {strict}; strong {}, B min {:.2e} over {}; perturbed: strong fails on {:?}, B min {:.2e}",
            if strong.passed() { "pass" } else { "fail" },
            b.min_value,
            b.admitted,
            strong_bad.failures(),
            b_bad.min_value
        ),
    );
}

#[test]
fn criterion_08_normal_cone_certificate() {
    let sampling = DirectionSampling::default();
    let mut lines = Vec::new();
    let mut ok = true;

    let zero_u = |run: &Run| vec![0.0; run.problem.dim()];
    for (name, run, u) in [
        ("S1 endpoint", s1(), endpoint(s1())),
        ("S1 u=0", s1(), zero_u(s1())),
        ("S2 endpoint", s2(), endpoint(s2())),
    ] {
        let tol = Tolerances::for_problem(&run.problem);
        let rep = normal_cone_certificate(&run.problem, &u, &vec![0.0; u.len()], &sampling, &tol).unwrap();
        ok &= rep.passed();
        lines.push(format!("tau=0 at {name}: {}", if rep.passed() { "pass" } else { "fail" }));
    }

    let mut g = rng(8);
    for (name, run, u) in [("S1 u=0", s1(), zero_u(s1())), ("S2 endpoint", s2(), endpoint(s2()))] {
        let tol = Tolerances::for_problem(&run.problem);
        let vi = solve_vi_interior(run.problem.op(), &u, run.problem.y_a_int()).unwrap();
        let interior = (0..u.len()).all(|i| vi.y_interior()[i] < run.problem.y_b_int()[i] - tol.eps_b);
        let tau = gaussian(&mut g, u.len(), 1.0);
        let rep = normal_cone_certificate(&run.problem, &u, &tau, &sampling, &tol).unwrap();
        ok &= interior && !rep.passed();
        lines.push(format!(
            "random tau at {name} (interior {interior}): {}",
            if rep.passed() { "pass" } else { "fail" }
        ));
    }

    let run = s1();
    let it = run.history.last().unwrap();
    let m = run.problem.lumped();
    let load: Vec<f64> = it.nu.values().iter().zip(m).map(|(n, m)| -m * n).collect();
    let tau: Vec<f64> = run.problem.op().solve_adjoint(&load).iter().map(|p| -p).collect();
    let tol = Tolerances::for_problem(&run.problem);
    let rep = normal_cone_certificate(&run.problem, &endpoint(run), &tau, &sampling, &tol).unwrap();
    ok &= rep.passed() && linalg::max_abs(&tau) > 0.0;
    lines.push(format!(
        "-p_nu at S1 endpoint: {} (value {:.1e})",
        if rep.passed() { "pass" } else { "fail" },
        rep.value("normal_cone").unwrap_or(f64::NAN)
    ));
    criterion(8, "normal-cone certificate", ok, &lines.join("; "));
}

#[test]
fn criterion_09_gradient_check() {
    let cfg = config("nsub = 8\ny_a = -0.3\ny_b = 0.1\ny_d = 1\nalpha = 1e-2\nu_ref = 0.3*sin(3*x)\n");
    let problem = cfg.problem().unwrap();
    let n = problem.dim();
    let m = problem.lumped();
    let pen = Penalty::slaved(1e2);
    let step = 1e-5;
    let mut worst = 0.0_f64;
    let mut g = rng(9);
    for _ in 0..5 {
        // a smooth part pushes y above y_b on the left and below y_a on the right
        let noise = gaussian(&mut g, n, 5.0);
        let coords = problem.mesh().interior_coords();
        let u: Vec<f64> = (0..n)
            .map(|i| 40.0 * (2.0 * std::f64::consts::PI * coords[i][0]).sin() + noise[i])
            .collect();
        let ev = evaluate(&problem, &u, pen, None).unwrap();
        let engaged = ev.nu.iter().any(|v| *v > 0.0) && ev.state.xi.iter().any(|v| *v > 0.0);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[i] += step;
            dn[i] -= step;
            let jp = evaluate(&problem, &up, pen, None).unwrap().value;
            let jm = evaluate(&problem, &dn, pen, None).unwrap().value;
            let fd = (jp - jm) / (2.0 * step) / m[i];
            num += m[i] * (fd - ev.grad[i]).powi(2);
            den += m[i] * ev.grad[i].powi(2);
        }
        let rel = (num / den).sqrt();
        worst = worst.max(if engaged { rel } else { f64::INFINITY });
    }
    criterion(
        9,
        "reduced gradient vs central differences",
        worst <= 1e-5,
        &format!("max relative error {worst:.2e} over 5 controls"),
    );
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let key = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(key, fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn criterion_10_cli_determinism() {
    let bin = env!("CARGO_BIN_EXE_obstacle-ocp");
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("s.cfg");
    fs::write(&cfg, "nsub = 8\ny_a = -0.3\ny_b = 0.1\ny_d = 1\nalpha = 1e-2\nb_random = 10\n").unwrap();
    let run = |args: &[&str], out: &Path| {
        let o = Command::new(bin)
            .args(args)
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .args(["--seed", "7"])
            .output()
            .unwrap();
        (o.status.code(), o.stdout)
    };
    let mut outputs = Vec::new();
    let mut trees = Vec::new();
    for k in 0..2 {
        let out = tmp.path().join(format!("run{k}"));
        let solve = run(&["solve"], &out);
        let verify = run(&["verify", "--which", "b"], &out);
        let normal = run(&["verify", "--which", "normal-cone"], &out);
        outputs.push((solve, verify, normal));
        trees.push(snapshot(&out));
    }
    let files = trees[0].len();
    let has_csv = trees[0].contains_key("path.csv");
    let same = trees[0] == trees[1] && outputs[0] == outputs[1];
    let codes = (outputs[0].0 .0, outputs[0].1 .0, outputs[0].2 .0);
    criterion(
        10,
        "repeated CLI runs are byte-identical",
        same && has_csv && codes == (Some(0), Some(0), Some(0)),
        &format!("{files} artifact files compared, exit codes {codes:?}"),
    );
}
