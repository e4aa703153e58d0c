use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::fem::linalg;

use super::problem::{Objective, OcpProblem};
use super::solve::{solve_pgamma_warm, OcpIterate, Penalty, SolveOptions};

/// Increasing sequence of penalty parameters `γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    gammas: Vec<f64>,
}

impl Schedule {
    pub fn new(gammas: Vec<f64>) -> Result<Self> {
        if gammas.is_empty() {
            return Err(Error::InvalidArgument("empty penalty schedule".into()));
        }
        if gammas.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
            return Err(Error::InvalidArgument("penalties must be positive and finite".into()));
        }
        if gammas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("penalty schedule must increase strictly".into()));
        }
        Ok(Schedule { gammas })
    }

    /// `start · factorᵏ` up to `end` (inclusive, with relative slack for
    /// rounding).
    pub fn geometric(start: f64, end: f64, factor: f64) -> Result<Self> {
        if !(factor > 1.0) {
            return Err(Error::InvalidArgument(format!("schedule factor {factor} must exceed 1")));
        }
        if !(start > 0.0) || !(end >= start) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < gamma_start ≤ gamma_end, got {start}, {end}"
            )));
        }
        let mut gammas = Vec::new();
        let mut k = 0;
        loop {
            let g = start * factor.powi(k);
            if g > end * (1.0 + 1e-12) {
                break;
            }
            gammas.push(g);
            k += 1;
        }
        Schedule::new(gammas)
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::geometric(1.0, 1e8, 10.0).expect("default schedule is valid")
    }
}

/// How the proximal center evolves along the path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum URefPolicy {
    #[default]
    Fixed,
    /// Re-center at the converged control of the previous step.
    Previous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathOptions {
    pub schedule: Schedule,
    pub policy: URefPolicy,
    pub solve: SolveOptions,
    /// Stop when successive controls differ by less than this in L².
    pub stall_tol: f64,
    /// Initial control; the prox center when absent.
    pub u0: Option<Vec<f64>>,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions {
            schedule: Schedule::default(),
            policy: URefPolicy::Fixed,
            solve: SolveOptions::default(),
            stall_tol: 1e-9,
            u0: None,
        }
    }
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub gamma: f64,
    pub gamma_a: f64,
    /// Tracking objective `J(y, u)` without penalty or prox terms.
    pub objective: f64,
    /// `‖max(0, y − y_b)‖_{L²}`
    pub violation_l2: f64,
    /// `γ ‖max(0, y − y_b)‖²_{L²}`
    pub penalty_gap: f64,
    /// Total mass of `ν`.
    pub nu_mass: f64,
    pub mu_hm1: f64,
    /// `H¹` seminorm of `p`, standing in for its `W^{1,s}` norm.
    pub p_norm: f64,
    /// Distance between the near-contact sets of the two bounds.
    pub rho: f64,
    /// `|⟨ν, y_b − y⟩|`
    pub complementarity_gap: f64,
    pub kkt_residual: f64,
    pub step_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathHistory {
    pub iterates: Vec<OcpIterate>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub schedule: Vec<f64>,
}

pub const CSV_HEADER: &str = "gamma,J,viol_l2,nu_l1,mu_hm1,rho,kkt_residual";

impl PathHistory {
    pub fn last(&self) -> Option<&OcpIterate> {
        self.iterates.last()
    }

    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for d in &self.diagnostics {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                d.gamma, d.objective, d.violation_l2, d.nu_mass, d.mu_hm1, d.rho, d.kkt_residual
            )?;
        }
        Ok(())
    }
}

/// Solver failure together with the steps completed before it.
#[derive(Debug)]
pub struct PathFailure {
    pub error: Error,
    pub partial: PathHistory,
}

impl fmt::Display for PathFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (after {} completed steps)",
            self.error,
            self.partial.iterates.len()
        )
    }
}

impl std::error::Error for PathFailure {}

/// Minimum distance between interior nodes with `y ≤ y_a + ε` and nodes with
/// `y ≥ y_b − ε`; infinite when either set is empty.
pub fn separation(problem: &OcpProblem, y: &[f64], eps: f64) -> f64 {
    let coords = problem.mesh().interior_coords();
    let (ya, yb) = (problem.y_a_int(), problem.y_b_int());
    let lower: Vec<usize> = (0..y.len()).filter(|&i| y[i] <= ya[i] + eps).collect();
    let upper: Vec<usize> = (0..y.len()).filter(|&i| y[i] >= yb[i] - eps).collect();
    let mut best = f64::INFINITY;
    for &i in &lower {
        for &j in &upper {
            let dx = coords[i][0] - coords[j][0];
            let dy = coords[i][1] - coords[j][1];
            best = best.min((dx * dx + dy * dy).sqrt());
        }
    }
    best
}

/// Tolerance used for the near-contact sets in path diagnostics.
pub fn contact_tolerance(problem: &OcpProblem) -> f64 {
    1e-6 * (1.0 + linalg::max_abs(problem.y_b_int()))
}

pub fn diagnostics(problem: &OcpProblem, it: &OcpIterate, step_l2: f64) -> StepDiagnostics {
    let mesh = problem.mesh();
    let disc = problem.disc();
    let m = problem.lumped();
    let u = it.u.interior(mesh);
    let y = it.y.interior(mesh);
    let p = it.p.interior(mesh);
    let yb = problem.y_b_int();
    let viol2: f64 = (0..y.len()).map(|i| m[i] * (y[i] - yb[i]).max(0.0).powi(2)).sum();
    let nu = it.nu.values();
    StepDiagnostics {
        gamma: it.gamma,
        gamma_a: it.gamma_a,
        objective: problem.objective().value(m, &y, &u),
        violation_l2: viol2.sqrt(),
        penalty_gap: it.gamma * viol2,
        nu_mass: it.nu.measure_norm(mesh),
        mu_hm1: disc.h_minus1_density(it.mu.values()),
        p_norm: disc.energy(&p),
        rho: separation(problem, &y, contact_tolerance(problem)),
        complementarity_gap: (0..y.len()).map(|i| m[i] * nu[i] * (yb[i] - y[i])).sum::<f64>().abs(),
        kkt_residual: it.kkt_residual,
        step_l2,
    }
}

/// Warm-started continuation over the schedule with slaved obstacle
/// penalty `γ_a = γ` and smoothing `δ = 1/γ_a`.
pub fn path_follow(problem: &OcpProblem, opts: &PathOptions) -> std::result::Result<PathHistory, PathFailure> {
    let m = problem.lumped();
    let mut history = PathHistory {
        schedule: opts.schedule.gammas().to_vec(),
        ..Default::default()
    };
    let mut current = problem.clone();
    let mut u: Vec<f64> = match &opts.u0 {
        Some(u0) => u0.clone(),
        None => problem.u_ref_int().to_vec(),
    };
    let mut warm_y: Option<Vec<f64>> = None;
    for &gamma in opts.schedule.gammas() {
        let pen = Penalty::slaved(gamma);
        let it = match solve_pgamma_warm(&current, pen, &u, warm_y.as_deref(), opts.solve) {
            Ok(it) => it,
            Err(error) => {
                return Err(PathFailure {
                    error,
                    partial: history,
                })
            }
        };
        let next_u = it.u.interior(problem.mesh());
        let diff: Vec<f64> = next_u.iter().zip(&u).map(|(a, b)| a - b).collect();
        let step = linalg::weighted_dot(m, &diff, &diff).sqrt();
        history.diagnostics.push(diagnostics(&current, &it, step));
        warm_y = Some(it.y.interior(problem.mesh()));
        history.iterates.push(it);
        let stalled = history.iterates.len() > 1 && step < opts.stall_tol;
        u = next_u;
        if opts.policy == URefPolicy::Previous {
            current = current.with_u_ref(&u);
        }
        if stalled {
            break;
        }
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_schedule() {
        let s = Schedule::default();
        assert_eq!(s.gammas().len(), 9);
        assert_eq!(s.gammas()[8], 1e8);
        assert!(Schedule::geometric(1.0, 10.0, 0.5).is_err());
        assert!(Schedule::new(vec![1.0, 1.0]).is_err());
    }
}
