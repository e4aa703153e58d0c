use crate::error::{Error, Result};
use crate::fem::linalg;
use crate::fem::{DualField, DualKind, FieldKind, NodalField};

use super::problem::{coupled_solve, Objective, OcpProblem};
use super::state::{smoothed_state_solve, SmoothedState};

/// Penalty parameters of one regularized problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalty {
    /// State-bound penalty `γ`.
    pub gamma: f64,
    /// Obstacle penalty `γ_a`.
    pub gamma_a: f64,
    /// Smoothing width `δ`.
    pub delta: f64,
}

impl Penalty {
    /// `γ_a = γ`, `δ = 1/γ_a`.
    pub fn slaved(gamma: f64) -> Self {
        Penalty {
            gamma,
            gamma_a: gamma,
            delta: 1.0 / gamma,
        }
    }
}

/// Reduced objective, adjoint and gradient at a control.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub state: SmoothedState,
    pub value: f64,
    /// `γ max(0, y − y_b)`
    pub nu: Vec<f64>,
    pub p: Vec<f64>,
    /// Gradient density `J̃_u − p`.
    pub grad: Vec<f64>,
}

/// Evaluates the smoothed reduced objective of the regularized problem
/// `J(y,u) + γ/2‖max(0, y − y_b)‖² + ½‖u − u_ref‖²`.
pub fn evaluate(problem: &OcpProblem, u: &[f64], pen: Penalty, warm: Option<&[f64]>) -> Result<Evaluation> {
    let state = smoothed_state_solve(problem, u, pen.gamma_a, pen.delta, warm)?;
    let m = problem.lumped();
    let yb = problem.y_b_int();
    let obj = problem.effective_objective();
    let y = &state.y;
    let nu: Vec<f64> = (0..y.len()).map(|i| pen.gamma * (y[i] - yb[i]).max(0.0)).collect();
    let penalty: f64 = (0..y.len())
        .map(|i| {
            let v = (y[i] - yb[i]).max(0.0);
            0.5 * pen.gamma * m[i] * v * v
        })
        .sum();
    let value = obj.value(m, y, u) + penalty;
    let jy = obj.grad_y(y, u);
    let load: Vec<f64> = (0..y.len()).map(|i| -m[i] * (jy[i] + nu[i])).collect();
    let p = state.lu_t.solve(&load);
    let ju = obj.grad_u(y, u);
    let grad = ju.iter().zip(&p).map(|(j, p)| j - p).collect();
    Ok(Evaluation {
        state,
        value,
        nu,
        p,
        grad,
    })
}

pub fn reduced_objective(problem: &OcpProblem, u: &[f64], pen: Penalty) -> Result<f64> {
    Ok(evaluate(problem, u, pen, None)?.value)
}

/// Gradient density of the reduced objective (Riesz representative in the
/// lumped inner product).
pub fn reduced_gradient(problem: &OcpProblem, u: &[f64], pen: Penalty) -> Result<Vec<f64>> {
    Ok(evaluate(problem, u, pen, None)?.grad)
}

/// Converged iterate of one regularized problem.
#[derive(Debug, Clone, PartialEq)]
pub struct OcpIterate {
    pub u: NodalField,
    pub y: NodalField,
    pub p: NodalField,
    pub xi: DualField,
    pub nu: DualField,
    pub mu: DualField,
    pub lambda: DualField,
    pub u_ref: NodalField,
    pub gamma: f64,
    pub gamma_a: f64,
    pub delta: f64,
    pub kkt_residual: f64,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Inner stopping tolerance on the projected gradient.
    pub tol: f64,
    /// Residual that must be reached for the iterate to count as converged.
    pub tol_accept: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            tol_accept: 1e-8,
            max_iter: 200,
        }
    }
}

fn kkt_residual(problem: &OcpProblem, u: &[f64], grad: &[f64]) -> f64 {
    let trial: Vec<f64> = u.iter().zip(grad).map(|(u, g)| u - g).collect();
    let proj = problem.project(&trial);
    let d: Vec<f64> = u.iter().zip(&proj).map(|(u, p)| u - p).collect();
    linalg::weighted_dot(problem.lumped(), &d, &d).sqrt()
}

/// Semismooth Newton on the reduced regularized problem with a projected
/// Armijo line search and a projected-gradient fallback.
pub fn solve_pgamma(problem: &OcpProblem, pen: Penalty, u0: &[f64], opts: SolveOptions) -> Result<OcpIterate> {
    solve_pgamma_warm(problem, pen, u0, None, opts)
}

pub(crate) fn solve_pgamma_warm(
    problem: &OcpProblem,
    pen: Penalty,
    u0: &[f64],
    warm_y: Option<&[f64]>,
    opts: SolveOptions,
) -> Result<OcpIterate> {
    let n = problem.dim();
    if u0.len() != n {
        return Err(Error::InvalidArgument(format!("initial control has {} values, expected {n}", u0.len())));
    }
    let m = problem.lumped().to_vec();
    let obj = problem.effective_objective();
    let a_eff = obj.alpha;
    let (lo, hi) = (problem.lower_int(), problem.upper_int());
    let yb = problem.y_b_int();

    let mut u = problem.project(u0);
    let mut ev = evaluate(problem, &u, pen, warm_y)?;
    let mut kkt = kkt_residual(problem, &u, &ev.grad);
    let mut iterations = 0;
    while kkt > opts.tol && iterations < opts.max_iter {
        iterations += 1;
        // Newton direction
        let mut d_free = vec![0.0; n];
        let mut c = vec![0.0; n];
        for i in 0..n {
            let t = (ev.p[i] - obj.g[i]) / a_eff;
            if t >= hi[i] {
                c[i] = hi[i] - u[i];
            } else if t <= lo[i] {
                c[i] = lo[i] - u[i];
            } else {
                d_free[i] = 1.0;
                c[i] = t - u[i];
            }
        }
        let y = &ev.state.y;
        let s: Vec<f64> = (0..n).map(|i| m[i] * d_free[i] / a_eff).collect();
        let w: Vec<f64> = (0..n)
            .map(|i| {
                let active = if y[i] > yb[i] { pen.gamma } else { 0.0 };
                m[i] * (1.0 + active + (-ev.state.curvature[i] * ev.p[i]).max(0.0))
            })
            .collect();
        let r1: Vec<f64> = (0..n).map(|i| m[i] * c[i]).collect();
        let r2 = vec![0.0; n];
        let (_, dp) = coupled_solve(
            &ev.state.linearized,
            &ev.state.linearized_t,
            &s,
            &w,
            &r1,
            &r2,
        )?;
        let du: Vec<f64> = (0..n).map(|i| c[i] + d_free[i] * dp[i] / a_eff).collect();

        match line_search(problem, pen, &u, &ev, kkt, &du, 1.0)? {
            Some((nu_, nev)) => {
                u = nu_;
                ev = nev;
            }
            None => {
                let dg: Vec<f64> = ev.grad.iter().map(|g| -g / a_eff).collect();
                match line_search(problem, pen, &u, &ev, kkt, &dg, 1.0)? {
                    Some((nu_, nev)) => {
                        u = nu_;
                        ev = nev;
                    }
                    None => break,
                }
            }
        }
        kkt = kkt_residual(problem, &u, &ev.grad);
    }
    if !(kkt <= opts.tol_accept) {
        return Err(Error::solver(
            format!("regularized problem at gamma = {:e}", pen.gamma),
            kkt,
        ));
    }
    Ok(build_iterate(problem, pen, &u, &ev, kkt, iterations))
}

/// Projected Armijo search along `u + s d`; returns `None` when no step is
/// accepted.
fn line_search(
    problem: &OcpProblem,
    pen: Penalty,
    u: &[f64],
    ev: &Evaluation,
    kkt: f64,
    d: &[f64],
    s0: f64,
) -> Result<Option<(Vec<f64>, Evaluation)>> {
    let m = problem.lumped();
    let mut s = s0;
    for _ in 0..40 {
        let trial: Vec<f64> = u.iter().zip(d).map(|(u, d)| u + s * d).collect();
        let trial = problem.project(&trial);
        let step: Vec<f64> = trial.iter().zip(u).map(|(a, b)| a - b).collect();
        let slope = linalg::weighted_dot(m, &ev.grad, &step);
        let nev = match evaluate(problem, &trial, pen, Some(&ev.state.y)) {
            Ok(e) => e,
            Err(Error::SolverFailure { .. }) => {
                s *= 0.5;
                continue;
            }
            Err(e) => return Err(e),
        };
        let flat = (nev.value - ev.value).abs() <= 1e-13 * (1.0 + ev.value.abs());
        if slope < 0.0 && nev.value <= ev.value + 1e-4 * slope {
            return Ok(Some((trial, nev)));
        }
        if flat && kkt_residual(problem, &trial, &nev.grad) < kkt {
            return Ok(Some((trial, nev)));
        }
        s *= 0.5;
    }
    Ok(None)
}

fn build_iterate(
    problem: &OcpProblem,
    pen: Penalty,
    u: &[f64],
    ev: &Evaluation,
    kkt: f64,
    iterations: usize,
) -> OcpIterate {
    let mesh = problem.mesh();
    let n = u.len();
    let obj = problem.effective_objective();
    let ju = obj.grad_u(&ev.state.y, u);
    let mu: Vec<f64> = (0..n).map(|i| ev.state.slope[i] * ev.p[i]).collect();
    let lambda: Vec<f64> = (0..n).map(|i| ev.p[i] - ju[i]).collect();
    let ns = mesh.n_sub();
    OcpIterate {
        u: NodalField::from_interior(mesh, FieldKind::Control, u),
        y: NodalField::from_interior(mesh, FieldKind::Primal, &ev.state.y),
        p: NodalField::from_interior(mesh, FieldKind::Primal, &ev.p),
        xi: DualField::new(ns, DualKind::Measure, ev.state.xi.clone()),
        nu: DualField::new(ns, DualKind::Measure, ev.nu.clone()),
        mu: DualField::new(ns, DualKind::Residual, mu),
        lambda: DualField::new(ns, DualKind::Residual, lambda),
        u_ref: problem.u_ref().clone(),
        gamma: pen.gamma,
        gamma_a: pen.gamma_a,
        delta: pen.delta,
        kkt_residual: kkt,
        newton_iterations: iterations,
    }
}
