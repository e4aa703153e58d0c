use std::sync::Arc;

use super::field::{DualField, NodalField};
use super::linalg::{self, Csr};
use super::mesh::Mesh;
use super::operator::{
    assemble_mass, assemble_operator, barycentric_gradients, MassMatrix, OperatorSpec,
    SparseOperator,
};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldNorms {
    pub l2: f64,
    pub h1_semi: f64,
    pub linf: f64,
    pub h_minus1: f64,
}

/// Mesh together with the matrices that define the discrete norms.
#[derive(Debug, Clone)]
pub struct Discretization {
    mesh: Arc<Mesh>,
    mass: MassMatrix,
    stiffness_full: Csr,
    laplace: SparseOperator,
}

fn full_stiffness(mesh: &Mesh) -> Csr {
    let mut triplets = Vec::with_capacity(mesh.triangles().len() * 9);
    for tri in mesh.triangles() {
        let pts = [mesh.nodes()[tri[0]], mesh.nodes()[tri[1]], mesh.nodes()[tri[2]]];
        let (g, area) = barycentric_gradients(pts);
        for i in 0..3 {
            for j in 0..3 {
                let v = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                triplets.push((tri[i], tri[j], v));
            }
        }
    }
    let n = mesh.n_nodes();
    linalg::csr_from_triplets(n, n, &triplets)
}

impl Discretization {
    pub fn new(mesh: Arc<Mesh>) -> Result<Self> {
        let mass = assemble_mass(&mesh);
        let stiffness_full = full_stiffness(&mesh);
        let laplace = assemble_operator(&mesh, &OperatorSpec::laplacian())?;
        Ok(Discretization {
            mesh,
            mass,
            stiffness_full,
            laplace,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn mass(&self) -> &MassMatrix {
        &self.mass
    }

    /// The −Δ stiffness on interior nodes, `K₀`.
    pub fn laplace(&self) -> &SparseOperator {
        &self.laplace
    }

    /// `sqrt(bᵀ K₀⁻¹ b)` for an interior load vector `b`.
    pub fn h_minus1_load(&self, load: &[f64]) -> f64 {
        let z = self.laplace.solve(load);
        linalg::dot(load, &z).max(0.0).sqrt()
    }

    /// H⁻¹ norm of an interior density, paired through the lumped weights.
    pub fn h_minus1_density(&self, density: &[f64]) -> f64 {
        self.h_minus1_load(&self.laplace.load(density))
    }

    /// `sqrt(xᵀ K₀ x)` for an interior vector.
    pub fn energy(&self, interior: &[f64]) -> f64 {
        linalg::dot(interior, &self.laplace.apply(interior)).max(0.0).sqrt()
    }

    /// Lumped L² norm of an interior vector.
    pub fn l2_lumped(&self, interior: &[f64]) -> f64 {
        linalg::weighted_dot(self.laplace.lumped(), interior, interior)
            .max(0.0)
            .sqrt()
    }

    pub fn nodal_norms(&self, field: &NodalField) -> FieldNorms {
        let v = field.values();
        let l2 = linalg::dot(v, &linalg::mat_vec(&self.mass.consistent, v)).max(0.0).sqrt();
        let h1_semi = linalg::dot(v, &linalg::mat_vec(&self.stiffness_full, v))
            .max(0.0)
            .sqrt();
        FieldNorms {
            l2,
            h1_semi,
            linf: linalg::max_abs(v),
            h_minus1: self.h_minus1_density(&field.interior(&self.mesh)),
        }
    }

    /// Norms of a dual field; `l2` is the lumped L² norm of the density and
    /// `h1_semi` that of its zero-extension.
    pub fn dual_norms(&self, field: &DualField) -> FieldNorms {
        let v = field.values();
        FieldNorms {
            l2: self.l2_lumped(v),
            h1_semi: self.energy(v),
            linf: linalg::max_abs(v),
            h_minus1: self.h_minus1_density(v),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::field::{DualKind, FieldKind};
    use crate::fem::mesh::build_structured_mesh;

    #[test]
    fn examples() {
        let mesh = Arc::new(build_structured_mesh(2).unwrap());
        let d = Discretization::new(mesh.clone()).unwrap();
        let zero = NodalField::constant(&mesh, FieldKind::Control, 0.0);
        let n = d.nodal_norms(&zero);
        assert_eq!((n.l2, n.h1_semi, n.linf, n.h_minus1), (0.0, 0.0, 0.0, 0.0));
        let one = NodalField::constant(&mesh, FieldKind::Control, 1.0);
        let n = d.nodal_norms(&one);
        assert!((n.l2 - 1.0).abs() < 1e-14);
        assert!(n.h1_semi.abs() < 1e-7);
        let f = DualField::new(2, DualKind::Residual, vec![1.0]);
        assert!((d.dual_norms(&f).h_minus1 - 0.125).abs() < 1e-15);
    }
}
