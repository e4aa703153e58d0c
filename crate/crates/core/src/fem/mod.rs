//! P1 finite elements on a structured triangulation of the unit square.

pub mod field;
pub mod linalg;
pub mod mesh;
pub mod norms;
pub mod operator;

pub use field::{write_vtk, DualField, DualKind, FieldKind, NodalField};
pub use mesh::{build_structured_mesh, Mesh};
pub use norms::{Discretization, FieldNorms};
pub use operator::{
    assemble_mass, assemble_operator, solve_linear, Coefficient, MassMatrix, OperatorSpec,
    SparseOperator,
};
