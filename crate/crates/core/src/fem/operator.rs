use std::sync::Arc;

use super::field::{DualField, FieldKind, NodalField};
use super::linalg::{self, BandLu, Csr};
use super::mesh::Mesh;
use crate::error::{Error, Result};

/// A coefficient that is either constant or given by its nodal values.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient<T> {
    Constant(T),
    Nodal(Vec<T>),
}

impl<T: Copy> Coefficient<T> {
    fn values(&self) -> Box<dyn Iterator<Item = T> + '_> {
        match self {
            Coefficient::Constant(v) => Box::new(std::iter::once(*v)),
            Coefficient::Nodal(v) => Box::new(v.iter().copied()),
        }
    }

    fn is_constant(&self) -> bool {
        matches!(self, Coefficient::Constant(_))
    }

    fn nodal_len(&self) -> Option<usize> {
        match self {
            Coefficient::Constant(_) => None,
            Coefficient::Nodal(v) => Some(v.len()),
        }
    }
}

trait Average: Sized + Copy {
    fn mean3(a: Self, b: Self, c: Self) -> Self;
}

impl Average for f64 {
    fn mean3(a: f64, b: f64, c: f64) -> f64 {
        (a + b + c) / 3.0
    }
}

impl Average for [f64; 2] {
    fn mean3(a: Self, b: Self, c: Self) -> Self {
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }
}

impl Average for [[f64; 2]; 2] {
    fn mean3(a: Self, b: Self, c: Self) -> Self {
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = (a[i][j] + b[i][j] + c[i][j]) / 3.0;
            }
        }
        out
    }
}

/// Value at the centroid of triangle `tri` (linear interpolation of nodal data).
fn at_centroid<T: Average>(c: &Coefficient<T>, tri: &[usize; 3]) -> T {
    match c {
        Coefficient::Constant(v) => *v,
        Coefficient::Nodal(v) => T::mean3(v[tri[0]], v[tri[1]], v[tri[2]]),
    }
}

/// Coefficients of the elliptic operator
/// `⟨Ay, v⟩ = ∫ ∇vᵀ a ∇y + y (b·∇v) + v (c·∇y) + d y v`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    pub a: Coefficient<[[f64; 2]; 2]>,
    pub b: Coefficient<[f64; 2]>,
    pub c: Coefficient<[f64; 2]>,
    pub d: Coefficient<f64>,
    gamma0: f64,
}

/// Smallest eigenvalue of the symmetric part of a 2x2 matrix.
fn min_sym_eigenvalue(a: &[[f64; 2]; 2]) -> f64 {
    let off = 0.5 * (a[0][1] + a[1][0]);
    let mean = 0.5 * (a[0][0] + a[1][1]);
    let half_diff = 0.5 * (a[0][0] - a[1][1]);
    mean - (half_diff * half_diff + off * off).sqrt()
}

impl OperatorSpec {
    pub fn new(
        a: Coefficient<[[f64; 2]; 2]>,
        b: Coefficient<[f64; 2]>,
        c: Coefficient<[f64; 2]>,
        d: Coefficient<f64>,
    ) -> Result<Self> {
        let gamma0 = a
            .values()
            .map(|m| min_sym_eigenvalue(&m))
            .fold(f64::INFINITY, f64::min);
        if !(gamma0 > 0.0) {
            return Err(Error::InvalidCoefficients(format!(
                "principal part is not strictly elliptic (smallest eigenvalue {gamma0})"
            )));
        }
        Ok(OperatorSpec { a, b, c, d, gamma0 })
    }

    /// `-Δ`.
    pub fn laplacian() -> Self {
        OperatorSpec {
            a: Coefficient::Constant([[1.0, 0.0], [0.0, 1.0]]),
            b: Coefficient::Constant([0.0, 0.0]),
            c: Coefficient::Constant([0.0, 0.0]),
            d: Coefficient::Constant(0.0),
            gamma0: 1.0,
        }
    }

    /// Ellipticity constant of the principal part.
    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    pub fn is_constant(&self) -> bool {
        self.a.is_constant() && self.b.is_constant() && self.c.is_constant() && self.d.is_constant()
    }

    fn check_lengths(&self, n_nodes: usize) -> Result<()> {
        let lens = [
            self.a.nodal_len(),
            self.b.nodal_len(),
            self.c.nodal_len(),
            self.d.nodal_len(),
        ];
        for len in lens.into_iter().flatten() {
            if len != n_nodes {
                return Err(Error::InvalidCoefficients(format!(
                    "nodal coefficient has {len} values, mesh has {n_nodes} nodes"
                )));
            }
        }
        Ok(())
    }
}

/// Barycentric gradients of a P1 triangle.
pub(crate) fn barycentric_gradients(p: [[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let grads = [
        [(p[1][1] - p[2][1]) / det, (p[2][0] - p[1][0]) / det],
        [(p[2][1] - p[0][1]) / det, (p[0][0] - p[2][0]) / det],
        [(p[0][1] - p[1][1]) / det, (p[1][0] - p[0][0]) / det],
    ];
    (grads, 0.5 * det)
}

/// The assembled operator restricted to interior nodes (homogeneous
/// Dirichlet conditions), together with its transpose and factorizations.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    mesh: Arc<Mesh>,
    matrix: Csr,
    transpose: Csr,
    lumped: Vec<f64>,
    lu: BandLu,
    lu_t: BandLu,
}

impl SparseOperator {
    fn from_matrix(mesh: Arc<Mesh>, matrix: Csr) -> Result<Self> {
        let transpose = linalg::transpose(&matrix);
        let lu = BandLu::factor(&matrix)?;
        let lu_t = BandLu::factor(&transpose)?;
        let lumped = mesh.lumped_interior();
        Ok(SparseOperator {
            mesh,
            matrix,
            transpose,
            lumped,
            lu,
            lu_t,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &Csr {
        &self.matrix
    }

    /// The discrete adjoint, i.e. the exact transpose of [`Self::matrix`].
    pub fn adjoint(&self) -> &Csr {
        &self.transpose
    }

    /// Lumped mass weights of the interior nodes.
    pub fn lumped(&self) -> &[f64] {
        &self.lumped
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        linalg::mat_vec(&self.matrix, x)
    }

    pub fn apply_adjoint(&self, x: &[f64]) -> Vec<f64> {
        linalg::mat_vec(&self.transpose, x)
    }

    /// Solves `K x = b` for a load vector `b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.lu.solve(b)
    }

    /// Solves `Kᵀ x = b` for a load vector `b`.
    pub fn solve_adjoint(&self, b: &[f64]) -> Vec<f64> {
        self.lu_t.solve(b)
    }

    /// Load vector `M_L f` of a density `f`.
    pub fn load(&self, density: &[f64]) -> Vec<f64> {
        self.lumped.iter().zip(density).map(|(m, f)| m * f).collect()
    }

    /// Solves `K x = M_L f` for a density `f`.
    pub fn solve_density(&self, density: &[f64]) -> Vec<f64> {
        self.solve(&self.load(density))
    }

    /// Coercivity margin: smallest generalized eigenvalue of
    /// `sym(K) x = λ K₀ x` with `K₀` the Laplacian, so that
    /// `xᵀKx ≥ γ₁ |x|²_{H¹}`.
    pub fn coercivity_margin(&self) -> Result<f64> {
        let sym = linalg::symmetric_part(&self.matrix);
        if !linalg::is_positive_definite(&sym) {
            return Ok(f64::NEG_INFINITY);
        }
        let laplace = assemble_operator(&self.mesh, &OperatorSpec::laplacian())?;
        let k0 = laplace.matrix();
        let sym_lu = BandLu::factor(&sym)?;
        let mut x = vec![1.0; self.dim()];
        let mut lambda = f64::INFINITY;
        for _ in 0..500 {
            let k0x = linalg::mat_vec(k0, &x);
            let mut z = sym_lu.solve(&k0x);
            let norm = linalg::dot(&z, &linalg::mat_vec(k0, &z)).sqrt();
            z.iter_mut().for_each(|v| *v /= norm);
            let next = linalg::dot(&z, &linalg::mat_vec(&sym, &z));
            x = z;
            let done = (next - lambda).abs() <= 1e-12 * next.abs();
            lambda = next;
            if done {
                break;
            }
        }
        Ok(lambda)
    }
}

fn element_entries(
    spec: &OperatorSpec,
    tri: &[usize; 3],
    grads: &[[f64; 2]; 3],
    area: f64,
) -> [[f64; 3]; 3] {
    let a = at_centroid(&spec.a, tri);
    let b = at_centroid(&spec.b, tri);
    let c = at_centroid(&spec.c, tri);
    let d = at_centroid(&spec.d, tri);
    let a_sym = 0.5 * (a[0][1] + a[1][0]);
    let a_skew = 0.5 * (a[0][1] - a[1][0]);
    let mut local = [[0.0; 3]; 3];
    for i in 0..3 {
        let gi = grads[i];
        let b_dot_gi = b[0] * gi[0] + b[1] * gi[1];
        for j in 0..3 {
            let gj = grads[j];
            // split into symmetric and skew parts so that symmetric `a`
            // yields a bitwise symmetric matrix
            let diffusion = a[0][0] * (gi[0] * gj[0])
                + a[1][1] * (gi[1] * gj[1])
                + a_sym * (gi[0] * gj[1] + gi[1] * gj[0])
                + a_skew * (gi[0] * gj[1] - gi[1] * gj[0]);
            let c_dot_gj = c[0] * gj[0] + c[1] * gj[1];
            let mass = if i == j { area / 6.0 } else { area / 12.0 };
            local[i][j] =
                area * diffusion + b_dot_gi * area / 3.0 + c_dot_gj * area / 3.0 + d * mass;
        }
    }
    local
}

/// P1 assembly of `⟨Ay, v⟩` on interior nodes. Row `i` is the test
/// function `φᵢ`, column `j` the trial function `φⱼ`.
pub fn assemble_operator(mesh: &Arc<Mesh>, spec: &OperatorSpec) -> Result<SparseOperator> {
    spec.check_lengths(mesh.n_nodes())?;
    let mut triplets = Vec::with_capacity(mesh.triangles().len() * 9);
    for tri in mesh.triangles() {
        let pts = [mesh.nodes()[tri[0]], mesh.nodes()[tri[1]], mesh.nodes()[tri[2]]];
        let (grads, area) = barycentric_gradients(pts);
        let local = element_entries(spec, tri, &grads, area);
        for (li, &gi) in tri.iter().enumerate() {
            let Some(i) = mesh.interior_index(gi) else {
                continue;
            };
            for (lj, &gj) in tri.iter().enumerate() {
                if let Some(j) = mesh.interior_index(gj) {
                    triplets.push((i, j, local[li][lj]));
                }
            }
        }
    }
    let n = mesh.n_interior();
    let matrix = linalg::csr_from_triplets(n, n, &triplets);
    let sym = linalg::symmetric_part(&matrix);
    if !linalg::is_positive_definite(&sym) {
        return Err(Error::InvalidCoefficients(
            "assembled bilinear form is not coercive".into(),
        ));
    }
    SparseOperator::from_matrix(mesh.clone(), matrix)
}

/// Consistent P1 mass matrix over all nodes with its lumped weights.
#[derive(Debug, Clone)]
pub struct MassMatrix {
    pub consistent: Csr,
    pub lumped: Vec<f64>,
}

pub fn assemble_mass(mesh: &Mesh) -> MassMatrix {
    let mut triplets = Vec::with_capacity(mesh.triangles().len() * 9);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.triangle_area(t);
        for &gi in tri {
            for &gj in tri {
                let v = if gi == gj { area / 6.0 } else { area / 12.0 };
                triplets.push((gi, gj, v));
            }
        }
    }
    let n = mesh.n_nodes();
    MassMatrix {
        consistent: linalg::csr_from_triplets(n, n, &triplets),
        lumped: mesh.lumped_weights().to_vec(),
    }
}

/// Solves `K x = M_L r`, with one step of iterative refinement.
pub fn solve_linear(op: &SparseOperator, rhs: &DualField) -> Result<NodalField> {
    let mesh = op.mesh();
    if rhs.values().len() != op.dim() {
        return Err(Error::InvalidArgument(format!(
            "right-hand side has {} values, operator dimension is {}",
            rhs.values().len(),
            op.dim()
        )));
    }
    let b = op.load(rhs.values());
    let mut x = op.solve(&b);
    let kx = op.apply(&x);
    let r: Vec<f64> = b.iter().zip(&kx).map(|(b, k)| b - k).collect();
    let dx = op.solve(&r);
    x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
    let kx = op.apply(&x);
    let res = b.iter().zip(&kx).map(|(b, k)| (b - k).powi(2)).sum::<f64>().sqrt();
    let bn = linalg::dot(&b, &b).sqrt();
    if !(res <= 1e-12 * (1.0 + bn)) {
        return Err(Error::solver("solve_linear", res));
    }
    Ok(NodalField::from_interior(mesh, FieldKind::Primal, &x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::field::DualKind;
    use crate::fem::mesh::build_structured_mesh;

    fn mesh(n: usize) -> Arc<Mesh> {
        Arc::new(build_structured_mesh(n).unwrap())
    }

    #[test]
    fn laplacian_single_interior_entry() {
        let op = assemble_operator(&mesh(2), &OperatorSpec::laplacian()).unwrap();
        assert_eq!(op.dim(), 1);
        assert!((op.matrix().get(0, 0).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn symmetric_without_first_order_terms() {
        let spec = OperatorSpec::new(
            Coefficient::Constant([[2.0, 0.3], [0.3, 1.0]]),
            Coefficient::Constant([0.0, 0.0]),
            Coefficient::Constant([0.0, 0.0]),
            Coefficient::Constant(0.7),
        )
        .unwrap();
        let op = assemble_operator(&mesh(5), &spec).unwrap();
        let k = op.matrix();
        let kt = op.adjoint();
        for i in 0..op.dim() {
            for j in 0..op.dim() {
                assert_eq!(k.get(i, j), kt.get(i, j));
            }
        }
    }

    #[test]
    fn rejects_non_elliptic() {
        let err = OperatorSpec::new(
            Coefficient::Constant([[1.0, 0.0], [0.0, -0.1]]),
            Coefficient::Constant([0.0, 0.0]),
            Coefficient::Constant([0.0, 0.0]),
            Coefficient::Constant(0.0),
        );
        assert!(matches!(err, Err(Error::InvalidCoefficients(_))));
    }

    #[test]
    fn mass_weights() {
        let m = mesh(2);
        let mass = assemble_mass(&m);
        let center = m.interior_nodes()[0];
        assert!((mass.lumped[center] - 0.25).abs() < 1e-15);
        let ones = vec![1.0; m.n_nodes()];
        let area = linalg::dot(&ones, &linalg::mat_vec(&mass.consistent, &ones));
        assert!((area - 1.0).abs() < 1e-14);
        assert!((mass.lumped.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(mass.lumped.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn poisson_on_one_unknown() {
        let m = mesh(2);
        let op = assemble_operator(&m, &OperatorSpec::laplacian()).unwrap();
        let rhs = DualField::new(2, DualKind::Residual, vec![1.0]);
        let y = solve_linear(&op, &rhs).unwrap();
        assert!((y.values()[m.interior_nodes()[0]] - 0.0625).abs() < 1e-15);
        let zero = DualField::new(2, DualKind::Residual, vec![0.0]);
        assert!(solve_linear(&op, &zero).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn laplacian_coercivity_is_one() {
        let op = assemble_operator(&mesh(6), &OperatorSpec::laplacian()).unwrap();
        assert!((op.coercivity_margin().unwrap() - 1.0).abs() < 1e-10);
    }
}
