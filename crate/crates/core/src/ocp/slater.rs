use crate::error::{Error, Result};
use crate::vi::solve_vi_interior;

use super::problem::OcpProblem;

/// `τ = min over nodes of (y_b − S(û))`; positive values certify a Slater
/// point. Boundary nodes contribute `y_b` since states vanish there.
pub fn slater_check(problem: &OcpProblem, u_hat: &[f64]) -> Result<f64> {
    let n = problem.dim();
    if u_hat.len() != n {
        return Err(Error::InvalidArgument(format!("u_hat has {} values, expected {n}", u_hat.len())));
    }
    let (lo, hi) = (problem.lower_int(), problem.upper_int());
    if (0..n).any(|i| u_hat[i] < lo[i] || u_hat[i] > hi[i]) {
        return Err(Error::InvalidArgument("u_hat violates the control box".into()));
    }
    let sol = solve_vi_interior(problem.op(), u_hat, problem.y_a_int())?;
    let mesh = problem.mesh();
    let y = mesh.extend(sol.y_interior());
    Ok(problem
        .y_b()
        .values()
        .iter()
        .zip(&y)
        .map(|(b, y)| b - y)
        .fold(f64::INFINITY, f64::min))
}

/// Builds `ỹ = max(y_a, 0) + ε·bubble` with `ε` half the nodal gap
/// `min(y_b − max(y_a, 0))` and returns `û = M_L⁻¹ K ỹ`, so that `S(û) = ỹ`.
pub fn construct_slater_candidate(problem: &OcpProblem) -> Result<Vec<f64>> {
    if problem.has_box() {
        return Err(Error::InvalidArgument(
            "Slater construction assumes unconstrained controls".into(),
        ));
    }
    let gap = problem
        .y_a()
        .values()
        .iter()
        .zip(problem.y_b().values())
        .map(|(a, b)| b - a.max(0.0))
        .fold(f64::INFINITY, f64::min);
    if !(gap > 0.0) {
        return Err(Error::InvalidData(format!("nodal gap {gap} is not positive")));
    }
    let eps = 0.5 * gap;
    let mesh = problem.mesh();
    let ya = problem.y_a_int();
    let y_tilde: Vec<f64> = mesh
        .interior_coords()
        .iter()
        .zip(ya)
        .map(|(p, a)| a.max(0.0) + eps * 16.0 * p[0] * (1.0 - p[0]) * p[1] * (1.0 - p[1]))
        .collect();
    let ky = problem.op().apply(&y_tilde);
    Ok(ky.iter().zip(problem.lumped()).map(|(k, m)| k / m).collect())
}
