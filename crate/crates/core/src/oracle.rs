//! Brute-force references built on dense linear algebra: active-set
//! enumeration for tiny obstacle problems, difference quotients of the
//! solution operator, and the KKT system of the unconstrained
//! linear-quadratic problem.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::linalg::Csr;
use crate::fem::SparseOperator;
use crate::ocp::OcpProblem;

/// Largest problem [`enumerate_vi`] accepts.
pub const MAX_ENUMERATION_NODES: usize = 14;

const FEAS_TOL: f64 = 1e-12;

pub fn to_dense(a: &Csr) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(a.rows(), a.cols());
    for (i, row) in a.outer_iterator().enumerate() {
        for (j, &v) in row.iter() {
            d[(i, j)] += v;
        }
    }
    d
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationResult {
    pub y: Vec<f64>,
    pub xi: Vec<f64>,
    /// Interior ordinals of the reported (lowest-index feasible) active set.
    pub active_set: Vec<usize>,
    pub sets_tried: usize,
    pub feasible_sets: usize,
}

/// Solution for the active set `mask`, or `None` when the reduced system is
/// singular.
fn solve_for_set(k: &DMatrix<f64>, m: &[f64], u: &[f64], y_a: &[f64], mask: u32) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = u.len();
    let act = |i: usize| mask >> i & 1 == 1;
    let free: Vec<usize> = (0..n).filter(|&i| !act(i)).collect();
    let mut y = vec![0.0; n];
    for i in 0..n {
        if act(i) {
            y[i] = y_a[i];
        }
    }
    if !free.is_empty() {
        let kff = DMatrix::from_fn(free.len(), free.len(), |r, c| k[(free[r], free[c])]);
        let rhs = DVector::from_iterator(
            free.len(),
            free.iter().map(|&i| {
                m[i] * u[i] - (0..n).filter(|&j| act(j)).map(|j| k[(i, j)] * y_a[j]).sum::<f64>()
            }),
        );
        let sol = kff.lu().solve(&rhs)?;
        for (r, &i) in free.iter().enumerate() {
            y[i] = sol[r];
        }
    }
    let xi = (0..n)
        .map(|i| {
            if act(i) {
                (0..n).map(|j| k[(i, j)] * y[j]).sum::<f64>() / m[i] - u[i]
            } else {
                0.0
            }
        })
        .collect();
    Some((y, xi))
}

/// Tries every active set `A` of the discrete obstacle problem
/// `K y = M_L(u + ξ)`: `y = y_a` on `A`, `ξ = 0` off `A`; accepts `A` iff
/// `ξ ≥ −1e-12` on `A` and `y ≥ y_a − 1e-12` off it.
pub fn enumerate_vi(op: &SparseOperator, u: &[f64], y_a: &[f64]) -> Result<EnumerationResult> {
    let n = op.dim();
    if n > MAX_ENUMERATION_NODES {
        return Err(Error::InvalidArgument(format!(
            "enumeration is limited to {MAX_ENUMERATION_NODES} interior nodes, got {n}"
        )));
    }
    if u.len() != n || y_a.len() != n {
        return Err(Error::InvalidArgument("u and y_a must have one value per interior node".into()));
    }
    let k = to_dense(op.matrix());
    let m = op.lumped();
    let sets = 1u32 << n;
    let feasible: Vec<(u32, Vec<f64>, Vec<f64>)> = (0..sets)
        .into_par_iter()
        .filter_map(|mask| {
            let (y, xi) = solve_for_set(&k, m, u, y_a, mask)?;
            let ok = (0..n).all(|i| {
                if mask >> i & 1 == 1 {
                    xi[i] >= -FEAS_TOL
                } else {
                    y[i] >= y_a[i] - FEAS_TOL
                }
            });
            ok.then_some((mask, y, xi))
        })
        .collect();
    let Some((mask, y, xi)) = feasible.first().cloned() else {
        return Err(Error::Internal("no active set is feasible".into()));
    };
    let scale = 1.0 + y.iter().chain(&xi).fold(0.0_f64, |a, v| a.max(v.abs()));
    for (_, y2, xi2) in &feasible[1..] {
        let d = y.iter().zip(y2).chain(xi.iter().zip(xi2)).fold(0.0_f64, |a, (p, q)| a.max((p - q).abs()));
        if d > 1e-12 * scale {
            return Err(Error::Internal(format!(
                "two feasible active sets give different solutions (gap {d:e})"
            )));
        }
    }
    Ok(EnumerationResult {
        y,
        xi,
        active_set: (0..n).filter(|&i| mask >> i & 1 == 1).collect(),
        sets_tried: sets as usize,
        feasible_sets: feasible.len(),
    })
}

/// Dense obstacle solve: enumeration when small, otherwise a dense
/// primal-dual active set iteration.
fn dense_vi(k: &DMatrix<f64>, op: &SparseOperator, u: &[f64], y_a: &[f64]) -> Result<Vec<f64>> {
    let n = u.len();
    if n <= MAX_ENUMERATION_NODES {
        return Ok(enumerate_vi(op, u, y_a)?.y);
    }
    let m = op.lumped();
    let mut mask = vec![false; n];
    for _ in 0..200 {
        let free: Vec<usize> = (0..n).filter(|&i| !mask[i]).collect();
        let mut y: Vec<f64> = (0..n).map(|i| if mask[i] { y_a[i] } else { 0.0 }).collect();
        if !free.is_empty() {
            let kff = DMatrix::from_fn(free.len(), free.len(), |r, c| k[(free[r], free[c])]);
            let rhs = DVector::from_iterator(
                free.len(),
                free.iter().map(|&i| {
                    m[i] * u[i] - (0..n).filter(|&j| mask[j]).map(|j| k[(i, j)] * y_a[j]).sum::<f64>()
                }),
            );
            let sol = kff
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Internal("singular reduced stiffness".into()))?;
            for (r, &i) in free.iter().enumerate() {
                y[i] = sol[r];
            }
        }
        let ky = k * DVector::from_column_slice(&y);
        let next: Vec<bool> = (0..n)
            .map(|i| {
                let xi = if mask[i] { ky[i] / m[i] - u[i] } else { 0.0 };
                xi + (y_a[i] - y[i]) > 1e-13 * (1.0 + y_a[i].abs() + xi.abs())
            })
            .collect();
        if next == mask {
            return Ok(y);
        }
        mask = next;
    }
    Err(Error::Internal("dense active set iteration did not settle".into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdDerivative {
    /// `(S(u + t h) − S(u))/t` for each `t`, in the given order.
    pub quotients: Vec<Vec<f64>>,
    /// Richardson extrapolation from the two smallest steps.
    pub extrapolated: Vec<f64>,
}

/// One-sided difference quotients of the obstacle solution operator along
/// the density `h`.
pub fn fd_directional(op: &SparseOperator, u: &[f64], y_a: &[f64], h: &[f64], t_list: &[f64]) -> Result<FdDerivative> {
    let n = op.dim();
    if u.len() != n || y_a.len() != n || h.len() != n {
        return Err(Error::InvalidArgument("u, y_a and h must have one value per interior node".into()));
    }
    if t_list.is_empty() || t_list.iter().any(|t| !(*t > 0.0)) || t_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("t_list must be positive and strictly decreasing".into()));
    }
    let k = to_dense(op.matrix());
    let y0 = dense_vi(&k, op, u, y_a)?;
    let quotients: Vec<Vec<f64>> = t_list
        .iter()
        .map(|&t| {
            let ut: Vec<f64> = u.iter().zip(h).map(|(u, h)| u + t * h).collect();
            let yt = dense_vi(&k, op, &ut, y_a)?;
            Ok(yt.iter().zip(&y0).map(|(a, b)| (a - b) / t).collect())
        })
        .collect::<Result<_>>()?;
    let last = quotients.len() - 1;
    let extrapolated = if last == 0 {
        quotients[0].clone()
    } else {
        let r = t_list[last - 1] / t_list[last];
        quotients[last]
            .iter()
            .zip(&quotients[last - 1])
            .map(|(q1, q2)| (r * q1 - q2) / (r - 1.0))
            .collect()
    };
    Ok(FdDerivative { quotients, extrapolated })
}

/// Control density `u = M_L⁻¹ K y* − ξ*` for which `(y*, ξ*)` solves the
/// obstacle problem, provided `y* ≥ y_a`, `ξ* ≥ 0` and `ξ*(y* − y_a) = 0`.
pub fn control_for_state(op: &SparseOperator, y_star: &[f64], xi_star: &[f64]) -> Vec<f64> {
    let ky = op.apply(y_star);
    ky.iter()
        .zip(op.lumped())
        .zip(xi_star)
        .map(|((k, m), x)| k / m - x)
        .collect()
}

/// Obstacle problem whose solution is known by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstructedInstance {
    pub u: Vec<f64>,
    pub y_a: Vec<f64>,
    pub y_star: Vec<f64>,
    pub xi_star: Vec<f64>,
    pub strict: Vec<usize>,
    pub biactive: Vec<usize>,
}

/// Random instance with every node strictly active, biactive or inactive
/// with a clear margin, and at least one biactive node.
pub fn biactive_instance(op: &SparseOperator, seed: u64) -> ConstructedInstance {
    let n = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y_a = vec![0.0; n];
    let mut y_star = vec![0.0; n];
    let mut xi_star = vec![0.0; n];
    let mut strict = Vec::new();
    let mut biactive = Vec::new();
    let forced = rng.random_range(0..n);
    for i in 0..n {
        y_a[i] = rng.random_range(-0.5..-0.1);
        let class = if i == forced { 1 } else { rng.random_range(0..3) };
        match class {
            0 => {
                y_star[i] = y_a[i];
                xi_star[i] = rng.random_range(0.5..1.5);
                strict.push(i);
            }
            1 => {
                y_star[i] = y_a[i];
                biactive.push(i);
            }
            _ => y_star[i] = y_a[i] + rng.random_range(0.05..0.3),
        }
    }
    ConstructedInstance {
        u: control_for_state(op, &y_star, &xi_star),
        y_a,
        y_star,
        xi_star,
        strict,
        biactive,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqSolution {
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub p: Vec<f64>,
    /// Max-norms of the three equation residuals, in density form.
    pub residuals: [f64; 3],
}

/// Solves the optimality system of the regularized objective with all
/// constraints dropped,
/// `K y = M_L u`, `Kᵀ p = −M_L (y − y_d)`, `(α+1) u + g − u_ref = p`,
/// as one dense system, then checks that the obstacle, the state bound and
/// the control box are all satisfied by the result.
pub fn lq_kkt_solve(problem: &OcpProblem) -> Result<LqSolution> {
    let n = problem.dim();
    let k = to_dense(problem.op().matrix());
    let m = problem.lumped();
    let a = problem.alpha() + 1.0;
    let (yd, g, uref) = (problem.y_d_int(), problem.g_int(), problem.u_ref_int());
    // unknowns ordered (u, y, p)
    let mut sys = DMatrix::<f64>::zeros(3 * n, 3 * n);
    let mut rhs = DVector::<f64>::zeros(3 * n);
    for i in 0..n {
        for j in 0..n {
            sys[(i, n + j)] = k[(i, j)];
            sys[(n + i, 2 * n + j)] = k[(j, i)];
        }
        sys[(i, i)] = -m[i];
        sys[(n + i, n + i)] = m[i];
        rhs[n + i] = m[i] * yd[i];
        sys[(2 * n + i, i)] = a;
        sys[(2 * n + i, 2 * n + i)] = -1.0;
        rhs[2 * n + i] = uref[i] - g[i];
    }
    let x = sys
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Internal("singular optimality system".into()))?;
    let u: Vec<f64> = x.rows(0, n).iter().copied().collect();
    let y: Vec<f64> = x.rows(n, n).iter().copied().collect();
    let p: Vec<f64> = x.rows(2 * n, n).iter().copied().collect();

    let (yv, pv) = (DVector::from_column_slice(&y), DVector::from_column_slice(&p));
    let ky = &k * &yv;
    let ktp = k.transpose() * &pv;
    let mut res = [0.0_f64; 3];
    for i in 0..n {
        res[0] = res[0].max(((ky[i] - m[i] * u[i]) / m[i]).abs());
        res[1] = res[1].max((ktp[i] / m[i] + y[i] - yd[i]).abs());
        res[2] = res[2].max((a * u[i] + g[i] - uref[i] - p[i]).abs());
    }

    let (ya, yb) = (problem.y_a_int(), problem.y_b_int());
    let (lo, hi) = (problem.lower_int(), problem.upper_int());
    if let Some(i) = (0..n).find(|&i| y[i] < ya[i]) {
        return Err(Error::OracleInapplicable(format!("obstacle violated at interior node {i}")));
    }
    if let Some(i) = (0..n).find(|&i| y[i] > yb[i]) {
        return Err(Error::OracleInapplicable(format!("state bound violated at interior node {i}")));
    }
    if let Some(i) = (0..n).find(|&i| u[i] < lo[i] || u[i] > hi[i]) {
        return Err(Error::OracleInapplicable(format!("control box violated at interior node {i}")));
    }
    Ok(LqSolution { u, y, p, residuals: res })
}
