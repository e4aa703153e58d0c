use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fem::{write_vtk, DualField, FieldKind, NodalField};
use crate::ocp::{
    construct_slater_candidate, path_follow, slater_check, OcpIterate, OcpProblem, PathHistory,
    ProxCenter,
};
use crate::oracle::{biactive_instance, enumerate_vi, fd_directional, lq_kkt_solve, MAX_ENUMERATION_NODES};
use crate::stationarity::{
    check_b_stationarity, check_c_stationarity, check_strong_stationarity, normal_cone_certificate,
    recover_multipliers, sample_directions, Multipliers, StationarityReport,
};
use crate::vi::{directional_derivative, solve_vi_interior};

use super::config::{ScenarioConfig, UHatSpec};
use super::{EXIT_FAIL, EXIT_PASS, EXIT_SOLVER, EXIT_USAGE};

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_)
        | Error::InvalidCoefficients(_)
        | Error::InvalidData(_)
        | Error::Parse { .. }
        | Error::Io(_) => EXIT_USAGE,
        Error::OracleInapplicable(_) => EXIT_FAIL,
        Error::SolverFailure { .. } | Error::Internal(_) => EXIT_SOLVER,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    B,
    C,
    Strong,
    NormalCone,
}

impl FromStr for Which {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "b" => Ok(Which::B),
            "c" => Ok(Which::C),
            "strong" => Ok(Which::Strong),
            "normal-cone" => Ok(Which::NormalCone),
            _ => Err(Error::InvalidArgument(format!(
                "unknown check '{s}', expected b, c, strong or normal-cone"
            ))),
        }
    }
}

impl Which {
    fn tag(self) -> &'static str {
        match self {
            Which::B => "b",
            Which::C => "c",
            Which::Strong => "strong",
            Which::NormalCone => "normal-cone",
        }
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_history(out: &Path, history: &PathHistory) -> Result<()> {
    write_file(&out.join("path.csv"), |w| history.write_csv(w))?;
    let steps = out.join("steps");
    fs::create_dir_all(&steps)?;
    for (k, it) in history.iterates.iter().enumerate() {
        write_file(&steps.join(format!("{k:02}_u.txt")), |w| it.u.write_to(w))?;
        write_file(&steps.join(format!("{k:02}_y.txt")), |w| it.y.write_to(w))?;
        write_file(&steps.join(format!("{k:02}_p.txt")), |w| it.p.write_to(w))?;
        write_file(&steps.join(format!("{k:02}_nu.txt")), |w| it.nu.write_to(w))?;
        write_file(&steps.join(format!("{k:02}_mu.txt")), |w| it.mu.write_to(w))?;
    }
    Ok(())
}

fn write_fields(dir: &Path, problem: &OcpProblem, it: &OcpIterate) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_file(&dir.join("u.txt"), |w| it.u.write_to(w))?;
    write_file(&dir.join("y.txt"), |w| it.y.write_to(w))?;
    write_file(&dir.join("p.txt"), |w| it.p.write_to(w))?;
    write_file(&dir.join("xi.txt"), |w| it.xi.write_to(w))?;
    write_file(&dir.join("nu.txt"), |w| it.nu.write_to(w))?;
    write_file(&dir.join("mu.txt"), |w| it.mu.write_to(w))?;
    write_file(&dir.join("lambda.txt"), |w| it.lambda.write_to(w))?;
    write_file(&dir.join("u_ref.txt"), |w| it.u_ref.write_to(w))?;
    write_file(&dir.join("fields.vtk"), |w| {
        write_vtk(
            problem.mesh(),
            &[
                ("u", &it.u),
                ("y", &it.y),
                ("p", &it.p),
                ("y_a", problem.y_a()),
                ("y_b", problem.y_b()),
            ],
            w,
        )
    })
}

fn slater_control(cfg: &ScenarioConfig, problem: &OcpProblem) -> Result<Option<Vec<f64>>> {
    Ok(match &cfg.u_hat {
        None => None,
        Some(UHatSpec::Construct) => Some(construct_slater_candidate(problem)?),
        Some(UHatSpec::Expr(e)) => Some(cfg.field(problem.mesh(), e, FieldKind::Control).interior(problem.mesh())),
    })
}

/// Multipliers of the final iterate in the form the verifier reads back.
fn iterate_multipliers(problem: &OcpProblem, it: &OcpIterate) -> Result<Multipliers> {
    let u = it.u.interior(problem.mesh());
    let (_, mut m) = recover_multipliers(problem, &u, Some(it))?;
    m.lambda = it.lambda.values().to_vec();
    Ok(m)
}

/// Runs the penalty path and writes `path.csv`, `steps/`, `fields/`,
/// `summary.txt` and `stationarity_c.txt` below `out`.
pub fn run_solve(cfg: &ScenarioConfig, out: &Path, log: &mut dyn Write) -> Result<i32> {
    fs::create_dir_all(out)?;
    let problem = cfg.problem()?;
    let opts = cfg.path_options()?;
    let history = match path_follow(&problem, &opts) {
        Ok(h) => h,
        Err(failure) => {
            write_history(out, &failure.partial)?;
            if let Some(it) = failure.partial.last() {
                write_fields(&out.join("fields"), &problem, it)?;
            }
            writeln!(log, "solver failure: {failure}")?;
            return Ok(exit_code(&failure.error).max(EXIT_SOLVER));
        }
    };
    write_history(out, &history)?;
    let it = history
        .last()
        .ok_or_else(|| Error::Internal("path produced no iterate".into()))?;
    let d = *history.diagnostics.last().expect("one diagnostic per iterate");
    write_fields(&out.join("fields"), &problem, it)?;

    let tol = cfg.tolerances(&problem);
    let mults = iterate_multipliers(&problem, it)?;
    let u = it.u.interior(problem.mesh());
    let report = check_c_stationarity(&problem, &u, &mults, &tol)?;
    write_file(&out.join("stationarity_c.txt"), |w| report.write_kv(w))?;

    let tau = match slater_control(cfg, &problem)? {
        Some(u_hat) => Some(slater_check(&problem, &u_hat)?),
        None => None,
    };
    let mut summary = Vec::new();
    {
        let s = &mut summary;
        writeln!(s, "nsub {}", cfg.nsub)?;
        writeln!(s, "steps {}", history.iterates.len())?;
        writeln!(s, "gamma {:e}", d.gamma)?;
        writeln!(s, "gamma_a {:e}", d.gamma_a)?;
        writeln!(s, "coupling gamma_a = gamma, delta = 1/gamma_a")?;
        writeln!(s, "J {:e}", d.objective)?;
        let uref = problem.u_ref_int();
        let prox: f64 = (0..u.len()).map(|i| problem.lumped()[i] * (u[i] - uref[i]).powi(2)).sum();
        writeln!(s, "J_prox {:e}", d.objective + 0.5 * prox)?;
        writeln!(s, "kkt_residual {:e}", d.kkt_residual)?;
        writeln!(s, "violation_l2 {:e}", d.violation_l2)?;
        writeln!(s, "penalty_gap {:e}", d.penalty_gap)?;
        writeln!(s, "nu_mass {:e}", d.nu_mass)?;
        writeln!(s, "mu_hm1 {:e}", d.mu_hm1)?;
        writeln!(s, "rho {:e}", d.rho)?;
        writeln!(s, "complementarity_gap {:e}", d.complementarity_gap)?;
        if let Some(t) = tau {
            writeln!(s, "slater_tau {t:e}")?;
        }
        writeln!(s, "c_stationarity {}", if report.passed() { "pass" } else { "fail" })?;
    }
    fs::write(out.join("summary.txt"), &summary)?;
    log.write_all(&summary)?;
    Ok(EXIT_PASS)
}

fn read_nodal(path: &Path) -> Result<NodalField> {
    NodalField::read_from(BufReader::new(File::open(path)?))
}

fn read_dual(path: &Path) -> Result<DualField> {
    DualField::read_from(BufReader::new(File::open(path)?))
}

fn same_mesh(n: usize, cfg: &ScenarioConfig, name: &str) -> Result<()> {
    if n != cfg.nsub {
        return Err(Error::InvalidData(format!(
            "{name} was written for nsub={n}, config has nsub={}",
            cfg.nsub
        )));
    }
    Ok(())
}

/// Checks the requested stationarity concept at the control in
/// `fields/u.txt`, writing `verify_<which>.txt` to `out`.
pub fn run_verify(cfg: &ScenarioConfig, fields: &Path, which: Which, out: &Path, log: &mut dyn Write) -> Result<i32> {
    let u_field = read_nodal(&fields.join("u.txt"))?;
    same_mesh(u_field.n_sub(), cfg, "u.txt")?;
    let ref_path = fields.join("u_ref.txt");
    let problem = if ref_path.exists() {
        let r = read_nodal(&ref_path)?;
        same_mesh(r.n_sub(), cfg, "u_ref.txt")?;
        cfg.problem_with_center(ProxCenter::Field(r))?
    } else {
        cfg.problem()?
    };
    let mesh = problem.mesh().clone();
    let u = u_field.interior(&mesh);
    let tol = cfg.tolerances(&problem);
    let dual = |name: &str| -> Result<Vec<f64>> {
        let f = read_dual(&fields.join(name))?;
        same_mesh(f.n_sub(), cfg, name)?;
        Ok(f.values().to_vec())
    };
    let report: StationarityReport = match which {
        Which::C | Which::Strong => {
            let p = read_nodal(&fields.join("p.txt"))?;
            same_mesh(p.n_sub(), cfg, "p.txt")?;
            let vi = solve_vi_interior(problem.op(), &u, problem.y_a_int())?;
            let mults = Multipliers {
                y: vi.y_interior().to_vec(),
                xi: vi.xi.values().to_vec(),
                p: p.interior(&mesh),
                nu: dual("nu.txt")?,
                mu: dual("mu.txt")?,
                lambda: dual("lambda.txt")?,
            };
            if which == Which::C {
                check_c_stationarity(&problem, &u, &mults, &tol)?
            } else {
                check_strong_stationarity(&problem, &u, &mults, &tol)?
            }
        }
        Which::B => {
            let vi = solve_vi_interior(problem.op(), &u, problem.y_a_int())?;
            let obj = problem.effective_objective();
            let dirs = sample_directions(&problem, &u, &vi, &obj, &cfg.sampling(), true, &tol);
            check_b_stationarity(&problem, &u, &obj, &dirs, &tol)?.report
        }
        Which::NormalCone => {
            let tau_path = fields.join("tau.txt");
            let tau = if tau_path.exists() {
                let t = read_nodal(&tau_path)?;
                same_mesh(t.n_sub(), cfg, "tau.txt")?;
                t.interior(&mesh)
            } else {
                let nu = dual("nu.txt")?;
                let m = problem.lumped();
                let load: Vec<f64> = nu.iter().zip(m).map(|(n, m)| -m * n).collect();
                problem.op().solve_adjoint(&load).iter().map(|p| -p).collect()
            };
            normal_cone_certificate(&problem, &u, &tau, &cfg.sampling(), &tol)?
        }
    };
    fs::create_dir_all(out)?;
    write_file(&out.join(format!("verify_{}.txt", which.tag())), |w| report.write_kv(w))?;
    let mut table = Vec::new();
    report.write_table(&mut table)?;
    log.write_all(&table)?;
    if report.has_not_applicable() {
        writeln!(log, "warning: some conditions are not applicable to this scenario")?;
    }
    Ok(if report.passed() { EXIT_PASS } else { EXIT_FAIL })
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Cross-validates the solvers against the dense oracles and prints one
/// line per check.
pub fn run_oracle(cfg: &ScenarioConfig, log: &mut dyn Write) -> Result<i32> {
    let problem = cfg.problem_with_center(match cfg.prox_center()? {
        ProxCenter::Continuation => ProxCenter::Lq,
        c => c,
    })?;
    let op = problem.op();
    let n = op.dim();
    if cfg.oracle_enumerate && n > MAX_ENUMERATION_NODES {
        return Err(Error::InvalidArgument(format!(
            "enumeration requested on {n} interior nodes; the limit is {MAX_ENUMERATION_NODES} (nsub ≤ 4)"
        )));
    }
    let mut all_pass = true;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    if cfg.oracle_enumerate {
        let mut passed = 0;
        let mut worst = 0.0_f64;
        for _ in 0..cfg.oracle_instances {
            let u: Vec<f64> = (0..n)
                .map(|_| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    4.0 * g
                })
                .collect();
            let y_a: Vec<f64> = (0..n).map(|_| rng.random_range(-0.2..0.0)).collect();
            let e = enumerate_vi(op, &u, &y_a)?;
            let s = solve_vi_interior(op, &u, &y_a)?;
            let d = max_diff(&e.y, s.y_interior());
            worst = worst.max(d);
            if d <= 1e-10 && e.active_set == s.active {
                passed += 1;
            }
        }
        let ok = passed == cfg.oracle_instances;
        all_pass &= ok;
        writeln!(
            log,
            "enumeration   {passed}/{} max|y-y*| {worst:.3e} {}",
            cfg.oracle_instances,
            if ok { "pass" } else { "fail" }
        )?;
    }

    let count = cfg.oracle_instances.min(10);
    let mut passed = 0;
    let mut worst = 0.0_f64;
    for k in 0..count {
        let inst = biactive_instance(op, cfg.seed.wrapping_add(k as u64));
        let h: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let sol = solve_vi_interior(op, &inst.u, &inst.y_a)?;
        let z = directional_derivative(op, &sol, &h)?;
        let fd = fd_directional(op, &inst.u, &inst.y_a, &h, &[1e-2, 1e-3, 1e-4])?;
        let d = max_diff(&z, &fd.extrapolated);
        worst = worst.max(d);
        if d <= 1e-7 {
            passed += 1;
        }
    }
    let ok = passed == count;
    all_pass &= ok;
    writeln!(
        log,
        "derivative    {passed}/{count} max|z-fd| {worst:.3e} {}",
        if ok { "pass" } else { "fail" }
    )?;

    match lq_kkt_solve(&problem) {
        Err(Error::OracleInapplicable(why)) => writeln!(log, "lq-kkt        n/a ({why})")?,
        Err(e) => return Err(e),
        Ok(lq) => {
            let history = path_follow(&problem, &cfg.path_options()?).map_err(|f| f.error)?;
            let it = history.last().ok_or_else(|| Error::Internal("empty path".into()))?;
            let u = it.u.interior(problem.mesh());
            let diff: Vec<f64> = u.iter().zip(&lq.u).map(|(a, b)| a - b).collect();
            let d = problem.disc().l2_lumped(&diff);
            let ok = d <= 1e-8;
            all_pass &= ok;
            writeln!(log, "lq-kkt        |u-u*|_L2 {d:.3e} {}", if ok { "pass" } else { "fail" })?;
        }
    }
    Ok(if all_pass { EXIT_PASS } else { EXIT_FAIL })
}

/// Evaluates the Slater margin of the configured `u_hat`.
pub fn run_slater(cfg: &ScenarioConfig, log: &mut dyn Write) -> Result<i32> {
    if cfg.u_hat.is_none() {
        return Err(Error::InvalidArgument("the slater command needs u_hat in the config".into()));
    }
    let problem = cfg.problem_with_center(ProxCenter::Field(NodalField::constant(
        &cfg.mesh()?,
        FieldKind::Control,
        0.0,
    )))?;
    let u_hat = slater_control(cfg, &problem)?.expect("checked above");
    let tau = slater_check(&problem, &u_hat)?;
    writeln!(log, "slater_tau {tau:e}")?;
    Ok(if tau > 0.0 { EXIT_PASS } else { EXIT_FAIL })
}
