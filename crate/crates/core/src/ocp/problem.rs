use std::sync::Arc;

use super::path::{path_follow, PathOptions, URefPolicy};
use crate::error::{Error, Result};
use crate::fem::linalg::{self, BandLu, Csr};
use crate::fem::{
    assemble_operator, build_structured_mesh, Discretization, FieldKind, Mesh, NodalField,
    OperatorSpec, SparseOperator,
};

/// Pointwise control bounds defining `U_ad`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlBox {
    pub lower: NodalField,
    pub upper: NodalField,
}

/// Center of the proximal term `½‖u − u_ref‖²`.
#[derive(Debug, Clone, PartialEq)]
pub enum ProxCenter {
    /// Optimum of the tracking problem without obstacle, state bound or box.
    Lq,
    /// Endpoint of a preliminary path that starts at the `Lq` center and
    /// re-centers at every step.
    Continuation,
    Field(NodalField),
}

#[derive(Debug, Clone)]
pub struct ProblemData {
    pub y_a: NodalField,
    pub y_b: NodalField,
    pub y_d: NodalField,
    pub alpha: f64,
    pub g: Option<NodalField>,
    pub u_box: Option<ControlBox>,
    pub u_ref: ProxCenter,
}

/// Tracking-type control problem for the obstacle problem with the state
/// bound `y ≤ y_b`. All interior quantities are densities paired through the
/// lumped weights.
#[derive(Debug, Clone)]
pub struct OcpProblem {
    disc: Arc<Discretization>,
    op: Arc<SparseOperator>,
    spec: OperatorSpec,
    y_a: NodalField,
    y_b: NodalField,
    y_d: NodalField,
    g: NodalField,
    alpha: f64,
    u_box: Option<ControlBox>,
    u_ref: NodalField,
    pub slater_margin: Option<f64>,
    ya_i: Vec<f64>,
    yb_i: Vec<f64>,
    yd_i: Vec<f64>,
    g_i: Vec<f64>,
    lo_i: Vec<f64>,
    hi_i: Vec<f64>,
    uref_i: Vec<f64>,
}

fn check_len(name: &str, f: &NodalField, mesh: &Mesh) -> Result<()> {
    if f.values().len() != mesh.n_nodes() {
        return Err(Error::InvalidData(format!(
            "{name} has {} values, mesh has {} nodes",
            f.values().len(),
            mesh.n_nodes()
        )));
    }
    Ok(())
}

impl OcpProblem {
    pub fn new(n_sub: usize, spec: OperatorSpec, data: ProblemData) -> Result<Self> {
        let mesh = Arc::new(build_structured_mesh(n_sub)?);
        let disc = Arc::new(Discretization::new(mesh.clone())?);
        let op = Arc::new(assemble_operator(&mesh, &spec)?);
        Self::from_parts(disc, op, spec, data)
    }

    pub fn from_parts(
        disc: Arc<Discretization>,
        op: Arc<SparseOperator>,
        spec: OperatorSpec,
        data: ProblemData,
    ) -> Result<Self> {
        let mesh = disc.mesh().clone();
        for (name, f) in [("y_a", &data.y_a), ("y_b", &data.y_b), ("y_d", &data.y_d)] {
            check_len(name, f, &mesh)?;
        }
        if !(data.alpha >= 0.0) || !data.alpha.is_finite() {
            return Err(Error::InvalidData(format!("alpha = {} must be ≥ 0", data.alpha)));
        }
        for ((a, b), &bd) in data.y_a.values().iter().zip(data.y_b.values()).zip(mesh.boundary_mask()) {
            if !(b - a > 0.0) {
                return Err(Error::InvalidData(format!(
                    "bounds are not separated: y_a = {a}, y_b = {b}"
                )));
            }
            if bd && (*a > 0.0 || *b <= 0.0) {
                return Err(Error::InvalidData(
                    "need y_a ≤ 0 and y_b > 0 on the boundary".into(),
                ));
            }
        }
        let g = match data.g {
            Some(g) => {
                check_len("g", &g, &mesh)?;
                g
            }
            None => NodalField::constant(&mesh, FieldKind::Control, 0.0),
        };
        let n = mesh.n_interior();
        let (lo_i, hi_i) = match &data.u_box {
            Some(b) => {
                check_len("u_low", &b.lower, &mesh)?;
                check_len("u_high", &b.upper, &mesh)?;
                let lo = b.lower.interior(&mesh);
                let hi = b.upper.interior(&mesh);
                if lo.iter().zip(&hi).any(|(l, h)| !(l <= h)) {
                    return Err(Error::InvalidData("control box has u_low > u_high".into()));
                }
                (lo, hi)
            }
            None => (vec![f64::NEG_INFINITY; n], vec![f64::INFINITY; n]),
        };
        let mut problem = OcpProblem {
            ya_i: data.y_a.interior(&mesh),
            yb_i: data.y_b.interior(&mesh),
            yd_i: data.y_d.interior(&mesh),
            g_i: g.interior(&mesh),
            lo_i,
            hi_i,
            uref_i: vec![0.0; n],
            disc,
            op,
            spec,
            y_a: data.y_a,
            y_b: data.y_b,
            y_d: data.y_d,
            g,
            alpha: data.alpha,
            u_box: data.u_box,
            u_ref: NodalField::constant(&mesh, FieldKind::Control, 0.0),
            slater_margin: None,
        };
        let u_ref = match data.u_ref {
            ProxCenter::Lq => {
                let u = problem.lq_optimum()?;
                NodalField::from_interior(&mesh, FieldKind::Control, &u)
            }
            ProxCenter::Continuation => {
                problem.uref_i = problem.lq_optimum()?;
                let opts = PathOptions {
                    policy: URefPolicy::Previous,
                    ..PathOptions::default()
                };
                let history = path_follow(&problem, &opts).map_err(|f| f.error)?;
                let last = history
                    .last()
                    .ok_or_else(|| Error::Internal("empty preliminary path".into()))?;
                last.u.clone()
            }
            ProxCenter::Field(f) => {
                check_len("u_ref", &f, &mesh)?;
                f
            }
        };
        problem.uref_i = u_ref.interior(&mesh);
        problem.u_ref = u_ref;
        Ok(problem)
    }

    /// Same problem with a different proximal center.
    pub fn with_u_ref(&self, u_ref: &[f64]) -> Self {
        let mut p = self.clone();
        p.uref_i = u_ref.to_vec();
        p.u_ref = NodalField::from_interior(self.mesh(), FieldKind::Control, u_ref);
        p
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.disc.mesh()
    }

    pub fn disc(&self) -> &Arc<Discretization> {
        &self.disc
    }

    pub fn op(&self) -> &Arc<SparseOperator> {
        &self.op
    }

    pub fn spec(&self) -> &OperatorSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn lumped(&self) -> &[f64] {
        self.op.lumped()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn y_a(&self) -> &NodalField {
        &self.y_a
    }

    pub fn y_b(&self) -> &NodalField {
        &self.y_b
    }

    pub fn y_d(&self) -> &NodalField {
        &self.y_d
    }

    pub fn g(&self) -> &NodalField {
        &self.g
    }

    pub fn u_box(&self) -> Option<&ControlBox> {
        self.u_box.as_ref()
    }

    pub fn u_ref(&self) -> &NodalField {
        &self.u_ref
    }

    pub fn y_a_int(&self) -> &[f64] {
        &self.ya_i
    }

    pub fn y_b_int(&self) -> &[f64] {
        &self.yb_i
    }

    pub fn y_d_int(&self) -> &[f64] {
        &self.yd_i
    }

    pub fn g_int(&self) -> &[f64] {
        &self.g_i
    }

    pub fn u_ref_int(&self) -> &[f64] {
        &self.uref_i
    }

    pub fn lower_int(&self) -> &[f64] {
        &self.lo_i
    }

    pub fn upper_int(&self) -> &[f64] {
        &self.hi_i
    }

    pub fn has_box(&self) -> bool {
        self.u_box.is_some()
    }

    pub fn project(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.lo_i)
            .zip(&self.hi_i)
            .map(|((u, lo), hi)| u.max(*lo).min(*hi))
            .collect()
    }

    /// Tracking objective without the proximal term.
    pub fn objective(&self) -> TrackingObjective {
        TrackingObjective {
            y_d: self.yd_i.clone(),
            alpha: self.alpha,
            g: self.g_i.clone(),
        }
    }

    /// Objective including `½‖u − u_ref‖²` (up to the constant `½‖u_ref‖²`).
    pub fn effective_objective(&self) -> TrackingObjective {
        TrackingObjective {
            y_d: self.yd_i.clone(),
            alpha: self.alpha + 1.0,
            g: self.g_i.iter().zip(&self.uref_i).map(|(g, r)| g - r).collect(),
        }
    }

    /// Minimizer of the tracking objective over all controls, ignoring the
    /// obstacle and the state bound.
    pub fn lq_optimum(&self) -> Result<Vec<f64>> {
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidArgument(
                "the linear-quadratic prox center needs alpha > 0".into(),
            ));
        }
        let n = self.dim();
        let m = self.lumped();
        let scale: Vec<f64> = m.iter().map(|m| m / self.alpha).collect();
        let rhs1: Vec<f64> = (0..n).map(|i| -m[i] * self.g_i[i] / self.alpha).collect();
        let rhs2: Vec<f64> = (0..n).map(|i| m[i] * self.yd_i[i]).collect();
        let w: Vec<f64> = m.to_vec();
        let (_, p) = coupled_solve(self.op.matrix(), self.op.adjoint(), &scale, &w, &rhs1, &rhs2)?;
        Ok((0..n).map(|i| (p[i] - self.g_i[i]) / self.alpha).collect())
    }
}

/// Solves `L a − diag(s) b = r1`, `diag(w) a + Lᵀ b = r2` as one banded
/// system with interleaved unknowns.
pub(crate) fn coupled_solve(
    l: &Csr,
    lt: &Csr,
    s: &[f64],
    w: &[f64],
    r1: &[f64],
    r2: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = s.len();
    let mut triplets = Vec::with_capacity(2 * (l.nnz() + n) + 2 * n);
    for (i, row) in l.outer_iterator().enumerate() {
        for (j, &v) in row.iter() {
            triplets.push((2 * i, 2 * j, v));
        }
    }
    for (i, row) in lt.outer_iterator().enumerate() {
        for (j, &v) in row.iter() {
            triplets.push((2 * i + 1, 2 * j + 1, v));
        }
    }
    for i in 0..n {
        triplets.push((2 * i, 2 * i + 1, -s[i]));
        triplets.push((2 * i + 1, 2 * i, w[i]));
    }
    let a = linalg::csr_from_triplets(2 * n, 2 * n, &triplets);
    let mut rhs = vec![0.0; 2 * n];
    for i in 0..n {
        rhs[2 * i] = r1[i];
        rhs[2 * i + 1] = r2[i];
    }
    let lu = BandLu::factor(&a)?;
    let mut x = lu.solve(&rhs);
    // one refinement step
    let ax = linalg::mat_vec(&a, &x);
    let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let dx = lu.solve(&r);
    x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
    let a_part = (0..n).map(|i| x[2 * i]).collect();
    let b_part = (0..n).map(|i| x[2 * i + 1]).collect();
    Ok((a_part, b_part))
}

/// Objective `J(y, u) = Σ mᵢ jᵢ(yᵢ, uᵢ)` given by pointwise densities.
pub trait Objective: Sync {
    fn value(&self, lumped: &[f64], y: &[f64], u: &[f64]) -> f64;
    fn grad_y(&self, y: &[f64], u: &[f64]) -> Vec<f64>;
    fn grad_u(&self, y: &[f64], u: &[f64]) -> Vec<f64>;
}

/// `½(y − y_d)² + α/2 u² + g u`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingObjective {
    pub y_d: Vec<f64>,
    pub alpha: f64,
    pub g: Vec<f64>,
}

impl Objective for TrackingObjective {
    fn value(&self, lumped: &[f64], y: &[f64], u: &[f64]) -> f64 {
        (0..y.len())
            .map(|i| {
                let e = y[i] - self.y_d[i];
                lumped[i] * (0.5 * e * e + 0.5 * self.alpha * u[i] * u[i] + self.g[i] * u[i])
            })
            .sum()
    }

    fn grad_y(&self, y: &[f64], _u: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.y_d).map(|(y, d)| y - d).collect()
    }

    fn grad_u(&self, _y: &[f64], u: &[f64]) -> Vec<f64> {
        u.iter().zip(&self.g).map(|(u, g)| self.alpha * u + g).collect()
    }
}

/// `−⟨τ, u⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearObjective {
    pub tau: Vec<f64>,
}

impl Objective for LinearObjective {
    fn value(&self, lumped: &[f64], _y: &[f64], u: &[f64]) -> f64 {
        -linalg::weighted_dot(lumped, &self.tau, u)
    }

    fn grad_y(&self, y: &[f64], _u: &[f64]) -> Vec<f64> {
        vec![0.0; y.len()]
    }

    fn grad_u(&self, _y: &[f64], _u: &[f64]) -> Vec<f64> {
        self.tau.iter().map(|t| -t).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(n: usize, yb: f64) -> (Arc<Mesh>, ProblemData) {
        let mesh = Arc::new(build_structured_mesh(n).unwrap());
        let d = ProblemData {
            y_a: NodalField::constant(&mesh, FieldKind::Primal, -1.0),
            y_b: NodalField::from_fn(&mesh, FieldKind::Primal, |_, _| yb),
            y_d: NodalField::from_fn(&mesh, FieldKind::Primal, |x, y| x * y),
            alpha: 0.1,
            g: None,
            u_box: None,
            u_ref: ProxCenter::Lq,
        };
        (mesh, d)
    }

    #[test]
    fn lq_optimum_satisfies_optimality_system() {
        let (_, d) = data(6, 1.0);
        let p = OcpProblem::new(6, OperatorSpec::laplacian(), d).unwrap();
        let u = p.lq_optimum().unwrap();
        let op = p.op();
        let y = op.solve_density(&u);
        let load: Vec<f64> = (0..p.dim())
            .map(|i| -p.lumped()[i] * (y[i] - p.y_d_int()[i]))
            .collect();
        let adj = op.solve_adjoint(&load);
        for i in 0..p.dim() {
            assert!((p.alpha() * u[i] - adj[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_touching_bounds() {
        let (_, mut d) = data(4, 1.0);
        d.y_a = d.y_b.clone();
        assert!(matches!(
            OcpProblem::new(4, OperatorSpec::laplacian(), d),
            Err(Error::InvalidData(_))
        ));
    }
}
