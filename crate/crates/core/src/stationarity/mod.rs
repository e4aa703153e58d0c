//! Verification of B-, C- and strong stationarity at a given control, and a
//! primal certificate for membership in the normal cone of the feasible set.
//!
//! All multipliers are interior nodal densities; pairings use the lumped
//! weights.

mod report;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::linalg;
use crate::ocp::{evaluate, LinearObjective, Objective, OcpIterate, OcpProblem, Penalty};
use crate::vi::{directional_derivative, solve_vi_interior, DerivativeOperator, ViSolution};

pub use report::{ReportKind, Residual, StationarityReport, Verdict};

/// Penalty used when multipliers have to be recomputed at a bare control.
pub const RECOVERY_GAMMA: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// `Ω_a = {y ≤ y_a + eps_a}`
    pub eps_a: f64,
    /// `Ω_b = {y ≥ y_b − eps_b}`
    pub eps_b: f64,
    /// `Ω_s = Ω_a ∩ {ξ ≥ eps_s}`
    pub eps_s: f64,
    /// Residual tolerance for equations and support conditions.
    pub stat: f64,
    /// Tolerance for sign conditions.
    pub sign: f64,
    /// Slack in the linearized state constraint on `Ω_b`.
    pub tangent: f64,
    /// Lower bound on the normalized directional derivative.
    pub b: f64,
    /// Admitted violation `S(u) − y_b` for a control to count as feasible.
    pub feas: f64,
}

impl Tolerances {
    pub fn for_problem(problem: &OcpProblem) -> Self {
        let eps = 1e-6 * (1.0 + linalg::max_abs(problem.y_b_int()));
        Tolerances {
            eps_a: eps,
            eps_b: eps,
            eps_s: eps,
            stat: 1e-6,
            sign: 1e-8,
            tangent: 1e-9,
            b: 1e-6,
            feas: 10.0 * eps,
        }
    }
}

/// Interior densities of the state, the obstacle multiplier and the
/// multipliers of the stationarity systems.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    pub y: Vec<f64>,
    pub xi: Vec<f64>,
    pub p: Vec<f64>,
    pub nu: Vec<f64>,
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
}

/// `y, ξ` come from the exact obstacle problem at `u`. `p, ν, μ` are taken
/// from `iterate` when given, otherwise from the regularized optimality
/// system at `γ = γ_a = RECOVERY_GAMMA` evaluated at this `u`. `λ = p − J̃_u`.
pub fn recover_multipliers(
    problem: &OcpProblem,
    u: &[f64],
    iterate: Option<&OcpIterate>,
) -> Result<(ViSolution, Multipliers)> {
    check_len(problem, u, "control")?;
    let vi = solve_vi_interior(problem.op(), u, problem.y_a_int())?;
    let mesh = problem.mesh();
    let (p, nu, mu) = match iterate {
        Some(it) => {
            if it.u.n_sub() != mesh.n_sub() {
                return Err(Error::InvalidArgument("iterate lives on a different mesh".into()));
            }
            (it.p.interior(mesh), it.nu.values().to_vec(), it.mu.values().to_vec())
        }
        None => {
            let ev = evaluate(problem, u, Penalty::slaved(RECOVERY_GAMMA), None)?;
            let mu = (0..u.len()).map(|i| ev.state.slope[i] * ev.p[i]).collect();
            (ev.p, ev.nu, mu)
        }
    };
    let y = vi.y_interior().to_vec();
    let ju = problem.effective_objective().grad_u(&y, u);
    let lambda = (0..u.len()).map(|i| p[i] - ju[i]).collect();
    let xi = vi.xi.values().to_vec();
    Ok((vi, Multipliers { y, xi, p, nu, mu, lambda }))
}

/// `|⟨ν, y_b − y⟩|`
pub fn complementarity_gap(problem: &OcpProblem, nu: &[f64], y: &[f64]) -> f64 {
    let m = problem.lumped();
    let yb = problem.y_b_int();
    (0..y.len()).map(|i| m[i] * nu[i] * (yb[i] - y[i])).sum::<f64>().abs()
}

/// Contact sets (interior ordinals) at a state.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactSets {
    pub omega_a: Vec<usize>,
    pub omega_s: Vec<usize>,
    pub omega_b: Vec<usize>,
    /// Neighbourhood of `Ω_a` kept away from `Ω_b`.
    pub hat_a: Vec<bool>,
    pub rho: f64,
}

pub fn contact_sets(problem: &OcpProblem, y: &[f64], xi: &[f64], tol: &Tolerances) -> ContactSets {
    let (ya, yb) = (problem.y_a_int(), problem.y_b_int());
    let n = y.len();
    let omega_a: Vec<usize> = (0..n).filter(|&i| y[i] <= ya[i] + tol.eps_a).collect();
    let omega_s: Vec<usize> = omega_a.iter().copied().filter(|&i| xi[i] >= tol.eps_s).collect();
    let omega_b: Vec<usize> = (0..n).filter(|&i| y[i] >= yb[i] - tol.eps_b).collect();
    let coords = problem.mesh().interior_coords();
    let dist = |i: usize, j: usize| {
        let (a, b) = (coords[i], coords[j]);
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    };
    let mut rho = f64::INFINITY;
    for &i in &omega_a {
        for &j in &omega_b {
            rho = rho.min(dist(i, j));
        }
    }
    let reach = if rho.is_finite() { 0.5 * rho } else { 2.0 * problem.mesh().h() };
    let hat_a = (0..n)
        .map(|i| omega_b.iter().all(|&j| dist(i, j) > reach))
        .collect();
    ContactSets {
        omega_a,
        omega_s,
        omega_b,
        hat_a,
        rho,
    }
}

/// Nonnegative nodal test functions `Φ` used for the sign condition
/// `⟨μ, Φ p⟩ ≥ 0`, stored sparsely as `(interior ordinal, value)` lists.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TestFunctionFamily {
    pub functions: Vec<Vec<(usize, f64)>>,
}

impl TestFunctionFamily {
    /// Hats at every node of `support`, the indicator of `support`, and
    /// tents and plateaus of radius `r` centered at `centers`, all cut off
    /// outside `support`.
    pub fn build(problem: &OcpProblem, support: &[bool], centers: &[usize], r: f64) -> Self {
        let coords = problem.mesh().interior_coords();
        let inside: Vec<usize> = (0..support.len()).filter(|&i| support[i]).collect();
        let mut functions: Vec<Vec<(usize, f64)>> = inside.iter().map(|&i| vec![(i, 1.0)]).collect();
        if !inside.is_empty() {
            functions.push(inside.iter().map(|&i| (i, 1.0)).collect());
        }
        for &c in centers {
            let mut tent = Vec::new();
            let mut plateau = Vec::new();
            for &i in &inside {
                let d = ((coords[i][0] - coords[c][0]).powi(2) + (coords[i][1] - coords[c][1]).powi(2)).sqrt();
                let t = 1.0 - d / r;
                if t > 0.0 {
                    tent.push((i, t));
                }
                let q = (2.0 - d / r).min(1.0);
                if q > 0.0 {
                    plateau.push((i, q));
                }
            }
            functions.push(tent);
            functions.push(plateau);
        }
        TestFunctionFamily { functions }
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    /// `min_k ⟨μ, Φ_k p⟩` and its index.
    pub fn min_pairing(&self, lumped: &[f64], mu: &[f64], p: &[f64]) -> Option<(f64, usize)> {
        self.functions
            .iter()
            .enumerate()
            .map(|(k, phi)| (phi.iter().map(|&(i, v)| lumped[i] * mu[i] * v * p[i]).sum::<f64>(), k))
            .fold(None, |best, (v, k)| match best {
                Some((b, _)) if b <= v => best,
                _ => Some((v, k)),
            })
    }
}

fn check_len(problem: &OcpProblem, v: &[f64], what: &str) -> Result<()> {
    if v.len() != problem.dim() {
        return Err(Error::InvalidArgument(format!(
            "{what} has {} values, expected {}",
            v.len(),
            problem.dim()
        )));
    }
    Ok(())
}

fn check_mults(problem: &OcpProblem, mults: &Multipliers) -> Result<()> {
    for (v, name) in [
        (&mults.y, "y"),
        (&mults.xi, "xi"),
        (&mults.p, "p"),
        (&mults.nu, "nu"),
        (&mults.mu, "mu"),
        (&mults.lambda, "lambda"),
    ] {
        check_len(problem, v, name)?;
    }
    Ok(())
}

fn global_ids(problem: &OcpProblem, set: &[usize]) -> Vec<usize> {
    let nodes = problem.mesh().interior_nodes();
    set.iter().map(|&i| nodes[i]).collect()
}

/// Largest entry of `f` over `set`, with its position.
fn max_over(set: impl Iterator<Item = usize>, f: impl Fn(usize) -> f64) -> (f64, Option<usize>) {
    set.fold((0.0, None), |(best, arg), i| {
        let v = f(i);
        if v > best {
            (v, Some(i))
        } else {
            (best, arg)
        }
    })
}

const BOX_ACTIVE_REL: f64 = 1e-10;

fn at_lower(lo: f64, u: f64) -> bool {
    lo.is_finite() && u <= lo + BOX_ACTIVE_REL * (1.0 + lo.abs())
}

fn at_upper(hi: f64, u: f64) -> bool {
    hi.is_finite() && u >= hi - BOX_ACTIVE_REL * (1.0 + hi.abs())
}

/// Distance of `λ` from the normal cone of the control box at `u`, nodewise.
fn box_cone_violation(problem: &OcpProblem, u: &[f64], lambda: &[f64]) -> Vec<f64> {
    let (lo, hi) = (problem.lower_int(), problem.upper_int());
    (0..u.len())
        .map(|i| {
            let (l, h) = (at_lower(lo[i], u[i]), at_upper(hi[i], u[i]));
            match (l, h) {
                (true, true) => 0.0,
                (true, false) => lambda[i].max(0.0),
                (false, true) => (-lambda[i]).max(0.0),
                (false, false) => lambda[i].abs(),
            }
        })
        .collect()
}

/// Shared C-stationarity residuals; returns the report and the contact sets.
fn c_residuals(
    problem: &OcpProblem,
    u: &[f64],
    mults: &Multipliers,
    tol: &Tolerances,
    kind: ReportKind,
) -> Result<(StationarityReport, ContactSets)> {
    check_len(problem, u, "control")?;
    check_mults(problem, mults)?;
    let mesh = problem.mesh();
    let disc = problem.disc();
    let m = problem.lumped();
    let n = u.len();
    let nodes = mesh.interior_nodes();
    let Multipliers { y, xi, p, nu, mu, lambda } = mults;
    let sets = contact_sets(problem, y, xi, tol);
    let mut rep = StationarityReport::new(kind, (tol.eps_a, tol.eps_b, tol.eps_s));
    rep.omega_a = global_ids(problem, &sets.omega_a);
    rep.omega_s = global_ids(problem, &sets.omega_s);
    rep.omega_b = global_ids(problem, &sets.omega_b);

    let obj = problem.effective_objective();
    let jy = obj.grad_y(y, u);
    let ju = obj.grad_u(y, u);

    // Kᵀp + M(J_y + ν + μ) = 0 in H⁻¹
    let ktp = problem.op().apply_adjoint(p);
    let res: Vec<f64> = (0..n).map(|i| ktp[i] + m[i] * (jy[i] + nu[i] + mu[i])).collect();
    rep.push("c_stat_1", disc.h_minus1_load(&res), tol.stat, None);

    let gap: Vec<f64> = (0..n).map(|i| ju[i] + lambda[i] - p[i]).collect();
    rep.push("c_stat_2", disc.l2_lumped(&gap), tol.stat, None);

    let (v, w) = max_over(sets.omega_s.iter().copied(), |i| p[i].abs());
    rep.push("c_stat_3", v, tol.stat, w.map(|i| nodes[i]));

    let ya = problem.y_a_int();
    let (v, w) = max_over((0..n).filter(|&i| y[i] > ya[i] + tol.eps_a), |i| (m[i] * mu[i]).abs());
    rep.push("c_stat_4", v, tol.stat, w.map(|i| nodes[i]));

    let r = (2.0 * mesh.h()).min(sets.rho / 3.0);
    let family = TestFunctionFamily::build(problem, &sets.hat_a, &sets.omega_a, r);
    let (v, w) = match family.min_pairing(m, mu, p) {
        Some((v, k)) => ((-v).max(0.0), Some(k)),
        None => (0.0, None),
    };
    let everywhere = vec![true; n];
    let global = TestFunctionFamily::build(problem, &everywhere, &sets.omega_a, 2.0 * mesh.h());
    let (gv, gw) = match global.min_pairing(m, mu, p) {
        Some((v, k)) => ((-v).max(0.0), Some(k)),
        None => (0.0, None),
    };
    if kind == ReportKind::Strong {
        rep.push_info("c_stat_45", v, tol.sign, w);
        rep.push("c_stat_45_global", gv, tol.sign, gw);
    } else {
        rep.push("c_stat_45", v, tol.sign, w);
        rep.push_info("c_stat_45_global", gv, tol.sign, gw);
    }

    let yb = problem.y_b_int();
    let off_b: f64 = (0..n).filter(|&i| y[i] < yb[i] - tol.eps_b).map(|i| m[i] * nu[i].abs()).sum();
    rep.push("c_stat_5", off_b, tol.stat, None);

    let viol = box_cone_violation(problem, u, lambda);
    rep.push("c_stat_6", disc.l2_lumped(&viol), tol.stat, None);

    let (v, w) = max_over(0..n, |i| -nu[i]);
    rep.push("nu_nonneg", v, tol.sign, w.map(|i| nodes[i]));
    Ok((rep, sets))
}

pub fn check_c_stationarity(
    problem: &OcpProblem,
    u: &[f64],
    mults: &Multipliers,
    tol: &Tolerances,
) -> Result<StationarityReport> {
    Ok(c_residuals(problem, u, mults, tol, ReportKind::C)?.0)
}

/// C-stationarity plus `p ≤ 0` on `Ω_a`, `μ` in the polar of the critical
/// cone, and the sign condition over unrestricted test functions. Only
/// defined for unconstrained controls; with a control box the strong
/// conditions are reported as not applicable.
pub fn check_strong_stationarity(
    problem: &OcpProblem,
    u: &[f64],
    mults: &Multipliers,
    tol: &Tolerances,
) -> Result<StationarityReport> {
    let (mut rep, sets) = c_residuals(problem, u, mults, tol, ReportKind::Strong)?;
    if problem.has_box() {
        rep.push_not_applicable("strong_p_sign");
        rep.push_not_applicable("strong_mu_polar");
        rep.notes.push("strong stationarity is only characterized for unconstrained controls".into());
        return Ok(rep);
    }
    let nodes = problem.mesh().interior_nodes();
    let m = problem.lumped();
    let (p, mu) = (&mults.p, &mults.mu);
    let (v, w) = max_over(sets.omega_a.iter().copied(), |i| p[i]);
    rep.push("strong_p_sign", v, tol.stat, w.map(|i| nodes[i]));
    let mut in_a = vec![false; u.len()];
    let mut in_s = vec![false; u.len()];
    for &i in &sets.omega_a {
        in_a[i] = true;
    }
    for &i in &sets.omega_s {
        in_s[i] = true;
    }
    let (v, w) = max_over(0..u.len(), |i| {
        if in_s[i] {
            0.0
        } else if in_a[i] {
            m[i] * mu[i]
        } else {
            (m[i] * mu[i]).abs()
        }
    });
    rep.push("strong_mu_polar", v, tol.stat, w.map(|i| nodes[i]));
    Ok(rep)
}

/// Sources of candidate directions for the primal stationarity checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DirectionSampling {
    /// `± e_i` for every interior node.
    pub hats: bool,
    /// Gaussian nodal fields.
    pub random: usize,
    /// `M⁻¹ K w` with `w ≤ 0` on `Ω_b`, whose linearized state is `w` when
    /// no contact interferes.
    pub shaped: usize,
    /// `−J_u` and the negative reduced gradient ignoring the obstacle.
    pub steepest: bool,
    pub seed: u64,
}

impl Default for DirectionSampling {
    fn default() -> Self {
        DirectionSampling {
            hats: true,
            random: 50,
            shaped: 20,
            steepest: true,
            seed: 42,
        }
    }
}

/// Candidate directions at `u`, projected onto the tangent cone of the
/// control box when `use_box` is set. Zero directions are dropped.
pub fn sample_directions(
    problem: &OcpProblem,
    u: &[f64],
    vi: &ViSolution,
    objective: &dyn Objective,
    sampling: &DirectionSampling,
    use_box: bool,
    tol: &Tolerances,
) -> Vec<Vec<f64>> {
    let n = u.len();
    let m = problem.lumped();
    let y = vi.y_interior();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    if sampling.steepest {
        let ju = objective.grad_u(y, u);
        let jy = objective.grad_y(y, u);
        let load: Vec<f64> = (0..n).map(|i| -m[i] * jy[i]).collect();
        let p0 = problem.op().solve_adjoint(&load);
        dirs.push(ju.iter().map(|v| -v).collect());
        dirs.push((0..n).map(|i| p0[i] - ju[i]).collect());
    }
    if sampling.hats {
        for i in 0..n {
            for s in [1.0, -1.0] {
                let mut h = vec![0.0; n];
                h[i] = s;
                dirs.push(h);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    for _ in 0..sampling.random {
        dirs.push((0..n).map(|_| StandardNormal.sample(&mut rng)).collect());
    }
    let yb = problem.y_b_int();
    for _ in 0..sampling.shaped {
        let w: Vec<f64> = (0..n)
            .map(|i| {
                let g: f64 = StandardNormal.sample(&mut rng);
                if y[i] >= yb[i] - tol.eps_b {
                    -g.abs()
                } else {
                    g
                }
            })
            .collect();
        let kw = problem.op().apply(&w);
        dirs.push((0..n).map(|i| kw[i] / m[i]).collect());
    }
    if use_box && problem.has_box() {
        let (lo, hi) = (problem.lower_int(), problem.upper_int());
        for h in dirs.iter_mut() {
            for i in 0..n {
                if at_lower(lo[i], u[i]) {
                    h[i] = h[i].max(0.0);
                }
                if at_upper(hi[i], u[i]) {
                    h[i] = h[i].min(0.0);
                }
            }
        }
    }
    dirs.retain(|h| h.iter().any(|v| *v != 0.0));
    dirs
}

fn require_feasible(problem: &OcpProblem, vi: &ViSolution, tol: &Tolerances) -> Result<Vec<bool>> {
    let yb = problem.y_b_int();
    let y = vi.y_interior();
    if let Some(i) = (0..y.len()).find(|&i| y[i] > yb[i] + tol.feas) {
        return Err(Error::InvalidArgument(format!(
            "control is infeasible: S(u) exceeds y_b by {:e} at node {}",
            y[i] - yb[i],
            problem.mesh().interior_nodes()[i]
        )));
    }
    Ok((0..y.len()).map(|i| y[i] >= yb[i] - tol.eps_b).collect())
}

fn in_box_tangent(problem: &OcpProblem, u: &[f64], h: &[f64]) -> bool {
    let (lo, hi) = (problem.lower_int(), problem.upper_int());
    (0..u.len()).all(|i| !(at_lower(lo[i], u[i]) && h[i] < 0.0) && !(at_upper(hi[i], u[i]) && h[i] > 0.0))
}

/// True iff `S′(u; h) ≤ tol.tangent` on `Ω_b` (and `h` is tangent to the
/// control box). Requires `S(u) ≤ y_b + feas`.
pub fn tangent_cone_membership(problem: &OcpProblem, u: &[f64], h: &[f64], tol: &Tolerances) -> Result<bool> {
    check_len(problem, u, "control")?;
    check_len(problem, h, "direction")?;
    let vi = solve_vi_interior(problem.op(), u, problem.y_a_int())?;
    let omega_b = require_feasible(problem, &vi, tol)?;
    if !in_box_tangent(problem, u, h) {
        return Ok(false);
    }
    let z = directional_derivative(problem.op(), &vi, h)?;
    Ok((0..z.len()).all(|i| !omega_b[i] || z[i] <= tol.tangent))
}

/// Outcome of a sampled B-stationarity test.
#[derive(Debug, Clone, PartialEq)]
pub struct BStationarity {
    pub report: StationarityReport,
    /// Smallest normalized directional derivative over admitted directions.
    pub min_value: f64,
    /// Position of the minimizer within the admitted directions.
    pub argmin: Option<usize>,
    pub admitted: usize,
    pub rejected: usize,
}

/// Directional derivatives `(⟨J_y, S′(u;h)⟩ + ⟨J_u, h⟩)/‖h‖` over the
/// directions that lie in the linearized tangent cone.
fn directional_minimum(
    problem: &OcpProblem,
    u: &[f64],
    vi: &ViSolution,
    objective: &dyn Objective,
    directions: &[Vec<f64>],
    omega_b: &[bool],
    use_box: bool,
    tol: &Tolerances,
) -> Result<(f64, Option<usize>, usize)> {
    let m = problem.lumped();
    let y = vi.y_interior();
    let jy = objective.grad_y(y, u);
    let ju = objective.grad_u(y, u);
    let deriv = DerivativeOperator::new(problem.op(), vi)?;
    let values: Vec<Option<f64>> = directions
        .par_iter()
        .map(|h| -> Result<Option<f64>> {
            check_len(problem, h, "direction")?;
            if use_box && !in_box_tangent(problem, u, h) {
                return Ok(None);
            }
            let z = deriv.apply(h)?;
            if (0..z.len()).any(|i| omega_b[i] && z[i] > tol.tangent) {
                return Ok(None);
            }
            let norm = linalg::weighted_dot(m, h, h).sqrt();
            let d = linalg::weighted_dot(m, &jy, &z) + linalg::weighted_dot(m, &ju, h);
            Ok(Some(d / norm))
        })
        .collect::<Result<_>>()?;
    let mut best = f64::INFINITY;
    let mut arg = None;
    let mut admitted = 0;
    for v in values.into_iter().flatten() {
        if v < best {
            best = v;
            arg = Some(admitted);
        }
        admitted += 1;
    }
    Ok((best, arg, admitted))
}

/// Sampled B-stationarity: the directional derivative of the reduced
/// objective must be nonnegative on the linearized tangent cone.
pub fn check_b_stationarity(
    problem: &OcpProblem,
    u: &[f64],
    objective: &dyn Objective,
    directions: &[Vec<f64>],
    tol: &Tolerances,
) -> Result<BStationarity> {
    check_len(problem, u, "control")?;
    let vi = solve_vi_interior(problem.op(), u, problem.y_a_int())?;
    let omega_b = require_feasible(problem, &vi, tol)?;
    let (min_value, argmin, admitted) =
        directional_minimum(problem, u, &vi, objective, directions, &omega_b, true, tol)?;
    let mut report = StationarityReport::new(ReportKind::B, (tol.eps_a, tol.eps_b, tol.eps_s));
    fill_sets(problem, &vi, tol, &mut report);
    if admitted == 0 {
        report.push_not_applicable("b_stat");
        report.notes.push("no sampled direction lies in the tangent cone".into());
    } else {
        report.push("b_stat", (-min_value).max(0.0), tol.b, argmin);
    }
    report.notes.push(format!(
        "{admitted} of {} directions admitted, min {min_value:e}",
        directions.len()
    ));
    Ok(BStationarity {
        report,
        min_value,
        argmin,
        admitted,
        rejected: directions.len() - admitted,
    })
}

fn fill_sets(problem: &OcpProblem, vi: &ViSolution, tol: &Tolerances, rep: &mut StationarityReport) {
    let sets = contact_sets(problem, vi.y_interior(), vi.xi.values(), tol);
    rep.omega_a = global_ids(problem, &sets.omega_a);
    rep.omega_s = global_ids(problem, &sets.omega_s);
    rep.omega_b = global_ids(problem, &sets.omega_b);
}

/// Tests `τ ∈ N(U_state; u)` with controls otherwise unconstrained by
/// sampling `−⟨τ, h⟩ ≥ 0` over the tangent cone. The multipliers implied by
/// `p = −τ`, with `ν + μ = M⁻¹Kᵀτ` split between the neighbourhood of `Ω_a`
/// and the rest, are reported for information.
pub fn normal_cone_certificate(
    problem: &OcpProblem,
    u: &[f64],
    tau: &[f64],
    sampling: &DirectionSampling,
    tol: &Tolerances,
) -> Result<StationarityReport> {
    check_len(problem, u, "control")?;
    check_len(problem, tau, "tau")?;
    let vi = solve_vi_interior(problem.op(), u, problem.y_a_int())?;
    let omega_b = require_feasible(problem, &vi, tol)?;
    let objective = LinearObjective { tau: tau.to_vec() };
    let dirs = sample_directions(problem, u, &vi, &objective, sampling, false, tol);
    let (min_value, argmin, admitted) =
        directional_minimum(problem, u, &vi, &objective, &dirs, &omega_b, false, tol)?;
    let mut rep = StationarityReport::new(ReportKind::NormalCone, (tol.eps_a, tol.eps_b, tol.eps_s));
    fill_sets(problem, &vi, tol, &mut rep);
    if admitted == 0 {
        rep.push_not_applicable("normal_cone");
    } else {
        rep.push("normal_cone", (-min_value).max(0.0), tol.b, argmin);
    }
    rep.notes.push(format!("{admitted} of {} directions admitted", dirs.len()));

    let m = problem.lumped();
    let n = u.len();
    let nodes = problem.mesh().interior_nodes();
    let kt = problem.op().apply_adjoint(tau);
    let sets = contact_sets(problem, vi.y_interior(), vi.xi.values(), tol);
    let total: Vec<f64> = (0..n).map(|i| kt[i] / m[i]).collect();
    let nu: Vec<f64> = (0..n).map(|i| if sets.hat_a[i] { 0.0 } else { total[i] }).collect();
    let (v, w) = max_over(0..n, |i| -nu[i]);
    rep.push_info("nc_nu_nonneg", v, tol.stat, w.map(|i| nodes[i]));
    let off_b: f64 = (0..n).filter(|&i| !omega_b[i]).map(|i| m[i] * nu[i].abs()).sum();
    rep.push_info("nc_nu_support", off_b, tol.stat, None);
    let (v, w) = max_over(sets.omega_a.iter().copied(), |i| -tau[i]);
    rep.push_info("nc_p_sign", v, tol.stat, w.map(|i| nodes[i]));
    Ok(rep)
}

/// Multipliers of a path iterate paired with the exact state at its control.
pub fn multipliers_from_iterate(problem: &OcpProblem, it: &OcpIterate) -> Result<(ViSolution, Multipliers)> {
    let u = it.u.interior(problem.mesh());
    recover_multipliers(problem, &u, Some(it))
}
