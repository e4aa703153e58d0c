use crate::error::{Error, Result};
use crate::fem::linalg::{self, BandLu, Csr};
use crate::vi::solve_vi_interior;

use super::problem::OcpProblem;

/// C¹ smoothing of `max(0, s)`.
pub fn m_delta(s: f64, delta: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s < delta {
        s * s / (2.0 * delta)
    } else {
        s - 0.5 * delta
    }
}

pub fn m_delta_prime(s: f64, delta: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s < delta {
        s / delta
    } else {
        1.0
    }
}

pub fn m_delta_second(s: f64, delta: f64) -> f64 {
    if s > 0.0 && s < delta {
        1.0 / delta
    } else {
        0.0
    }
}

/// Solution of `K y = M_L (u + γ_a m_δ(y_a − y))`.
#[derive(Debug, Clone)]
pub struct SmoothedState {
    pub y: Vec<f64>,
    /// `γ_a m_δ(y_a − y)`
    pub xi: Vec<f64>,
    /// `γ_a m_δ′(y_a − y)`
    pub slope: Vec<f64>,
    /// `γ_a m_δ″(y_a − y)`
    pub curvature: Vec<f64>,
    /// `K + diag(mᵢ γ_a m_δ′)`
    pub linearized: Csr,
    pub linearized_t: Csr,
    pub lu: BandLu,
    pub lu_t: BandLu,
    pub iterations: usize,
    pub residual: f64,
}

const MAX_NEWTON: usize = 100;

fn residual(problem: &OcpProblem, u: &[f64], y: &[f64], gamma_a: f64, delta: f64) -> Vec<f64> {
    let m = problem.lumped();
    let ya = problem.y_a_int();
    let ky = problem.op().apply(y);
    (0..y.len())
        .map(|i| ky[i] - m[i] * (u[i] + gamma_a * m_delta(ya[i] - y[i], delta)))
        .collect()
}

fn density_norm(r: &[f64], m: &[f64]) -> f64 {
    r.iter().zip(m).map(|(r, m)| (r / m).powi(2)).sum::<f64>().sqrt()
}

fn linearization(problem: &OcpProblem, y: &[f64], gamma_a: f64, delta: f64) -> (Vec<f64>, Csr) {
    let m = problem.lumped();
    let ya = problem.y_a_int();
    let slope: Vec<f64> = (0..y.len())
        .map(|i| gamma_a * m_delta_prime(ya[i] - y[i], delta))
        .collect();
    let diag: Vec<f64> = slope.iter().zip(m).map(|(s, m)| s * m).collect();
    let l = linalg::add_diagonal(problem.op().matrix(), &diag);
    (slope, l)
}

/// Damped Newton on the smoothed state equation. Without a warm start the
/// iteration starts from the exact obstacle solution, shifted into the
/// penalty regime on the contact set.
pub fn smoothed_state_solve(
    problem: &OcpProblem,
    u: &[f64],
    gamma_a: f64,
    delta: f64,
    warm: Option<&[f64]>,
) -> Result<SmoothedState> {
    if !(gamma_a > 0.0 && delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need gamma_a > 0 and delta > 0, got {gamma_a}, {delta}"
        )));
    }
    let n = problem.dim();
    if u.len() != n {
        return Err(Error::InvalidArgument(format!("control has {} values, expected {n}", u.len())));
    }
    let m = problem.lumped();
    let ya = problem.y_a_int();
    let mut y = match warm {
        Some(w) => w.to_vec(),
        None => {
            let vi = solve_vi_interior(problem.op(), u, ya)?;
            let mut y = vi.y_interior().to_vec();
            for &i in &vi.active {
                y[i] = ya[i] - vi.xi.values()[i] / gamma_a - 0.5 * delta;
            }
            y
        }
    };
    let tol = 1e-11 * (1.0 + linalg::max_abs(u));
    let mut r = residual(problem, u, &y, gamma_a, delta);
    let mut rn = density_norm(&r, m);
    let mut iterations = 0;
    while rn > tol {
        if iterations >= MAX_NEWTON {
            return Err(Error::solver("smoothed state: Newton iteration limit", rn));
        }
        iterations += 1;
        let (_, l) = linearization(problem, &y, gamma_a, delta);
        let lu = BandLu::factor(&l)?;
        let dy = lu.solve(&r.iter().map(|v| -v).collect::<Vec<_>>());
        if linalg::max_abs(&dy) <= 1e-14 * (1.0 + linalg::max_abs(&y)) {
            break;
        }
        let mut s = 1.0;
        let mut accepted = false;
        for _ in 0..50 {
            let trial: Vec<f64> = y.iter().zip(&dy).map(|(y, d)| y + s * d).collect();
            let rt = residual(problem, u, &trial, gamma_a, delta);
            let rtn = density_norm(&rt, m);
            if rtn <= (1.0 - 1e-4 * s) * rn {
                y = trial;
                r = rt;
                rn = rtn;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            // no decrease possible: accept only if already at roundoff level
            let m_min = m.iter().cloned().fold(f64::INFINITY, f64::min);
            let ky = linalg::max_abs(&problem.op().apply(&y)) / m_min;
            let scale = 1.0 + linalg::max_abs(u) + ky + gamma_a * linalg::max_abs(&y);
            if rn <= 1e3 * f64::EPSILON * (n as f64).sqrt() * scale {
                break;
            }
            return Err(Error::solver("smoothed state: line search", rn));
        }
    }
    let (slope, l) = linearization(problem, &y, gamma_a, delta);
    let xi = (0..n).map(|i| gamma_a * m_delta(ya[i] - y[i], delta)).collect();
    let curvature = (0..n)
        .map(|i| gamma_a * m_delta_second(ya[i] - y[i], delta))
        .collect();
    let lt = linalg::transpose(&l);
    let lu = BandLu::factor(&l)?;
    let lu_t = BandLu::factor(&lt)?;
    Ok(SmoothedState {
        y,
        xi,
        slope,
        curvature,
        linearized: l,
        linearized_t: lt,
        lu,
        lu_t,
        iterations,
        residual: rn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothing_is_c1() {
        let d = 0.3;
        for &s in &[0.0, d] {
            let e = 1e-9;
            assert!((m_delta(s + e, d) - m_delta(s - e, d)).abs() < 1e-8);
            assert!((m_delta_prime(s + e, d) - m_delta_prime(s - e, d)).abs() < 1e-7);
        }
        assert_eq!(m_delta(2.0, d), 2.0 - 0.15);
    }
}
