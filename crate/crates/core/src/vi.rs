//! The obstacle problem: find `y ≥ y_a` with `K y = M_L (u + ξ)`, `ξ ≥ 0`,
//! `ξ (y − y_a) = 0`, and its directional derivative on the critical cone.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fem::linalg::{self, BandLu, Csr};
use crate::fem::{DualField, DualKind, FieldKind, NodalField, SparseOperator};

pub const PDAS_MAX_ITER: usize = 100;

/// Relative margin a node must exceed to enter the active set. Without it,
/// biactive nodes (`η = 0` and `x = lower` up to rounding) can make the
/// iteration alternate between two sets.
const ACTIVATION_SLACK: f64 = 1e-13;

/// Result of the bound-constrained kernel: `x` and the density `η` with
/// `K x = b + M_L η`.
pub(crate) struct BoundSolution {
    pub x: Vec<f64>,
    pub eta: Vec<f64>,
    pub iterations: usize,
}

/// Primal-dual active set method with `c = 1` for
/// `K x = b + M_L η`, `x ≥ lower`, `η ≥ 0`, `η (x − lower) = 0`.
/// Nodes with `fixed[i]` are pinned to zero with `η` free; `lower = −∞` marks
/// unconstrained nodes.
pub(crate) fn pdas(
    k: &Csr,
    load: &[f64],
    lumped: &[f64],
    lower: &[f64],
    fixed: &[bool],
    max_iter: usize,
) -> Result<BoundSolution> {
    let n = load.len();
    let mut active = vec![false; n];
    for it in 1..=max_iter {
        let mut x = vec![0.0; n];
        for i in 0..n {
            if active[i] {
                x[i] = lower[i];
            }
        }
        let free: Vec<usize> = (0..n).filter(|&i| !active[i] && !fixed[i]).collect();
        if !free.is_empty() {
            let kx = linalg::mat_vec(k, &x);
            let rhs: Vec<f64> = free.iter().map(|&i| load[i] - kx[i]).collect();
            let sub = linalg::principal_submatrix(k, &free);
            let xf = BandLu::factor(&sub)?.solve(&rhs);
            for (&i, v) in free.iter().zip(xf) {
                x[i] = v;
            }
        }
        let kx = linalg::mat_vec(k, &x);
        let mut eta = vec![0.0; n];
        for i in 0..n {
            if active[i] || fixed[i] {
                eta[i] = (kx[i] - load[i]) / lumped[i];
            }
        }
        let next: Vec<bool> = (0..n)
            .map(|i| {
                let thr = ACTIVATION_SLACK * (1.0 + lower[i].abs() + eta[i].abs());
                !fixed[i] && lower[i] > f64::NEG_INFINITY && eta[i] + (lower[i] - x[i]) > thr
            })
            .collect();
        if next == active {
            return finish(x, eta, lower, fixed, it);
        }
        active = next;
    }
    Err(Error::solver(
        "primal-dual active set: iteration limit reached",
        f64::NAN,
    ))
}

fn finish(x: Vec<f64>, eta: Vec<f64>, lower: &[f64], fixed: &[bool], iterations: usize) -> Result<BoundSolution> {
    let scale = 1.0 + linalg::max_abs(&x).max(linalg::max_abs(&eta));
    let mut res = 0.0_f64;
    for i in 0..x.len() {
        if fixed[i] || lower[i] == f64::NEG_INFINITY {
            continue;
        }
        res = res.max(eta[i].min(x[i] - lower[i]).abs());
    }
    if !(res <= 1e-10 * scale) {
        return Err(Error::solver("primal-dual active set: complementarity", res));
    }
    Ok(BoundSolution { x, eta, iterations })
}

/// Solution of the discrete obstacle problem with classified index sets.
/// Index sets hold interior ordinals in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct ViSolution {
    pub y: NodalField,
    pub xi: DualField,
    pub active: Vec<usize>,
    pub strict: Vec<usize>,
    pub biactive: Vec<usize>,
    pub eps_y: f64,
    pub eps_xi: f64,
    pub iterations: usize,
    y_int: Vec<f64>,
    y_a_int: Vec<f64>,
}

impl ViSolution {
    pub fn y_interior(&self) -> &[f64] {
        &self.y_int
    }

    pub fn obstacle_interior(&self) -> &[f64] {
        &self.y_a_int
    }

    pub fn critical_cone(&self) -> CriticalCone {
        let n = self.y_int.len();
        let mut tag = vec![0u8; n];
        for &i in &self.strict {
            tag[i] = 1;
        }
        for &i in &self.biactive {
            tag[i] = 2;
        }
        CriticalCone {
            zero_indices: self.strict.clone(),
            nonneg_indices: self.biactive.clone(),
            free_indices: (0..n).filter(|&i| tag[i] == 0).collect(),
        }
    }

    /// `max_i |min(ξᵢ, yᵢ − y_a,i)|`.
    pub fn complementarity_residual(&self) -> f64 {
        self.xi
            .values()
            .iter()
            .zip(&self.y_int)
            .zip(&self.y_a_int)
            .map(|((xi, y), ya)| xi.min(y - ya).abs())
            .fold(0.0, f64::max)
    }

    /// Writes `y`, `ξ` and an `active_sets` section.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        self.y.write_to(w)?;
        writeln!(w)?;
        self.xi.write_to(w)?;
        writeln!(w)?;
        writeln!(w, "active_sets")?;
        writeln!(w, "eps_y {:?}", self.eps_y)?;
        writeln!(w, "eps_xi {:?}", self.eps_xi)?;
        for (name, set) in [("A", &self.active), ("A_s", &self.strict), ("B", &self.biactive)] {
            write!(w, "{name}")?;
            for i in set {
                write!(w, " {i}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Discrete critical cone: `v = 0` on the strict set, `v ≥ 0` on the biactive
/// set, free elsewhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CriticalCone {
    pub zero_indices: Vec<usize>,
    pub nonneg_indices: Vec<usize>,
    pub free_indices: Vec<usize>,
}

fn check_obstacle(y_a: &NodalField, op: &SparseOperator) -> Result<()> {
    let mesh = op.mesh();
    if y_a.values().len() != mesh.n_nodes() {
        return Err(Error::InvalidArgument("obstacle does not match mesh".into()));
    }
    for (v, &b) in y_a.values().iter().zip(mesh.boundary_mask()) {
        if b && *v > 0.0 {
            return Err(Error::InvalidData(format!(
                "obstacle is positive ({v}) on the boundary"
            )));
        }
    }
    Ok(())
}

/// Solves the obstacle problem for a control given as a nodal field.
pub fn solve_vi(op: &SparseOperator, u: &NodalField, y_a: &NodalField) -> Result<ViSolution> {
    check_obstacle(y_a, op)?;
    let mesh = op.mesh();
    if u.values().len() != mesh.n_nodes() {
        return Err(Error::InvalidArgument("control does not match mesh".into()));
    }
    solve_vi_interior(op, &u.interior(mesh), &y_a.interior(mesh))
}

/// Solves the obstacle problem for an interior control density and obstacle.
pub fn solve_vi_interior(op: &SparseOperator, u: &[f64], y_a: &[f64]) -> Result<ViSolution> {
    let n = op.dim();
    if u.len() != n || y_a.len() != n {
        return Err(Error::InvalidArgument(format!(
            "expected {n} interior values, got u: {}, y_a: {}",
            u.len(),
            y_a.len()
        )));
    }
    let load = op.load(u);
    let sol = pdas(op.matrix(), &load, op.lumped(), y_a, &vec![false; n], PDAS_MAX_ITER)?;
    Ok(classify(op, sol.x, sol.eta, y_a.to_vec(), sol.iterations))
}

pub(crate) fn classify(
    op: &SparseOperator,
    y: Vec<f64>,
    xi: Vec<f64>,
    y_a: Vec<f64>,
    iterations: usize,
) -> ViSolution {
    let mesh = op.mesh();
    let eps_y = 1e-9 * (1.0 + linalg::max_abs(&y_a));
    let eps_xi = 1e-9 * (1.0 + linalg::max_abs(&xi));
    let mut active = Vec::new();
    let mut strict = Vec::new();
    let mut biactive = Vec::new();
    for i in 0..y.len() {
        if y[i] <= y_a[i] + eps_y {
            active.push(i);
            if xi[i] >= eps_xi {
                strict.push(i);
            } else {
                biactive.push(i);
            }
        }
    }
    ViSolution {
        y: NodalField::from_interior(mesh, FieldKind::Primal, &y),
        xi: DualField::new(mesh.n_sub(), DualKind::Measure, xi),
        active,
        strict,
        biactive,
        eps_y,
        eps_xi,
        iterations,
        y_int: y,
        y_a_int: y_a,
    }
}

/// `S′(u; h)` for an interior density `h`: the solution of the VI on the
/// critical cone, `K z = M_L (h + η)`.
pub fn directional_derivative(op: &SparseOperator, sol: &ViSolution, h: &[f64]) -> Result<Vec<f64>> {
    let n = op.dim();
    if h.len() != n {
        return Err(Error::InvalidArgument(format!(
            "direction has {} values, expected {n}",
            h.len()
        )));
    }
    let mut lower = vec![f64::NEG_INFINITY; n];
    let mut fixed = vec![false; n];
    for &i in &sol.strict {
        fixed[i] = true;
    }
    for &i in &sol.biactive {
        lower[i] = 0.0;
    }
    let load = op.load(h);
    Ok(pdas(op.matrix(), &load, op.lumped(), &lower, &fixed, PDAS_MAX_ITER)?.x)
}

/// `S′(u; ·)` at a fixed solution, for many directions. Without biactive
/// nodes the derivative is linear and a single factorization is reused.
pub struct DerivativeOperator<'a> {
    op: &'a SparseOperator,
    sol: &'a ViSolution,
    linear: Option<(Vec<usize>, BandLu)>,
}

impl<'a> DerivativeOperator<'a> {
    pub fn new(op: &'a SparseOperator, sol: &'a ViSolution) -> Result<Self> {
        let linear = if sol.biactive.is_empty() {
            let mut fixed = vec![false; op.dim()];
            for &i in &sol.strict {
                fixed[i] = true;
            }
            let free: Vec<usize> = (0..op.dim()).filter(|&i| !fixed[i]).collect();
            let lu = BandLu::factor(&linalg::principal_submatrix(op.matrix(), &free))?;
            Some((free, lu))
        } else {
            None
        };
        Ok(DerivativeOperator { op, sol, linear })
    }

    pub fn apply(&self, h: &[f64]) -> Result<Vec<f64>> {
        match &self.linear {
            None => directional_derivative(self.op, self.sol, h),
            Some((free, lu)) => {
                let n = self.op.dim();
                if h.len() != n {
                    return Err(Error::InvalidArgument(format!(
                        "direction has {} values, expected {n}",
                        h.len()
                    )));
                }
                let load = self.op.load(h);
                let rhs: Vec<f64> = free.iter().map(|&i| load[i]).collect();
                let mut z = vec![0.0; n];
                for (&i, v) in free.iter().zip(lu.solve(&rhs)) {
                    z[i] = v;
                }
                Ok(z)
            }
        }
    }
}

/// True iff `S(u1) ≤ S(u2) + 1e-10` nodewise; requires `u1 ≤ u2`.
pub fn check_monotonicity(op: &SparseOperator, u1: &[f64], u2: &[f64], y_a: &[f64]) -> Result<bool> {
    if u1.iter().zip(u2).any(|(a, b)| a > b) {
        return Err(Error::InvalidArgument("monotonicity needs u1 ≤ u2".into()));
    }
    let s1 = solve_vi_interior(op, u1, y_a)?;
    let s2 = solve_vi_interior(op, u2, y_a)?;
    Ok(s1
        .y_interior()
        .iter()
        .zip(s2.y_interior())
        .all(|(a, b)| *a <= b + 1e-10))
}

/// True iff `S(αu1 + (1−α)u2) ≤ αS(u1) + (1−α)S(u2) + 1e-10` nodewise.
pub fn check_convexity(
    op: &SparseOperator,
    u1: &[f64],
    u2: &[f64],
    alpha: f64,
    y_a: &[f64],
) -> Result<bool> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} is not in (0, 1)")));
    }
    let mix: Vec<f64> = u1.iter().zip(u2).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect();
    let s = solve_vi_interior(op, &mix, y_a)?;
    let s1 = solve_vi_interior(op, u1, y_a)?;
    let s2 = solve_vi_interior(op, u2, y_a)?;
    Ok((0..mix.len()).all(|i| {
        s.y_interior()[i] <= alpha * s1.y_interior()[i] + (1.0 - alpha) * s2.y_interior()[i] + 1e-10
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_operator, build_structured_mesh, OperatorSpec};
    use std::sync::Arc;

    fn laplace(n: usize) -> SparseOperator {
        let mesh = Arc::new(build_structured_mesh(n).unwrap());
        assemble_operator(&mesh, &OperatorSpec::laplacian()).unwrap()
    }

    #[test]
    fn inactive_obstacle() {
        let op = laplace(4);
        let n = op.dim();
        let sol = solve_vi_interior(&op, &vec![0.0; n], &vec![-1.0; n]).unwrap();
        assert!(sol.y_interior().iter().all(|&v| v == 0.0));
        assert!(sol.xi.values().iter().all(|&v| v == 0.0));
        assert!(sol.active.is_empty());
    }

    #[test]
    fn fully_contact() {
        let op = laplace(4);
        let n = op.dim();
        let sol = solve_vi_interior(&op, &vec![-1.0; n], &vec![0.0; n]).unwrap();
        assert!(sol.y_interior().iter().all(|&v| v == 0.0));
        for &xi in sol.xi.values() {
            assert!((xi - 1.0).abs() < 1e-12);
        }
        assert_eq!(sol.active.len(), n);
        assert_eq!(sol.strict.len(), n);
        let z = directional_derivative(&op, &sol, &vec![3.0; n]).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_positive_boundary_obstacle() {
        let op = laplace(3);
        let mesh = op.mesh().clone();
        let y_a = NodalField::from_fn(&mesh, FieldKind::Primal, |_, _| 0.1);
        let u = NodalField::constant(&mesh, FieldKind::Control, 0.0);
        assert!(matches!(solve_vi(&op, &u, &y_a), Err(Error::InvalidData(_))));
    }

    #[test]
    fn derivative_without_contact_is_linear_solve() {
        let op = laplace(5);
        let n = op.dim();
        let sol = solve_vi_interior(&op, &vec![1.0; n], &vec![-10.0; n]).unwrap();
        let h: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let z = directional_derivative(&op, &sol, &h).unwrap();
        let expect = op.solve_density(&h);
        for (a, b) in z.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn serialization_lists_sets() {
        let op = laplace(3);
        let n = op.dim();
        let sol = solve_vi_interior(&op, &vec![-1.0; n], &vec![-0.001; n]).unwrap();
        let mut buf = Vec::new();
        sol.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("active_sets\n"));
        assert!(text.contains("\nA 0 1 2 3\n"));
    }

    #[test]
    fn alpha_outside_interval() {
        let op = laplace(3);
        let z = vec![0.0; op.dim()];
        assert!(check_convexity(&op, &z, &z, 1.0, &z).is_err());
    }
}
