use crate::error::{Error, Result};

/// Structured triangulation of the unit square.
///
/// Nodes are numbered lexicographically by `(row, col)`, i.e. node
/// `row * (n_sub + 1) + col` sits at `(col * h, row * h)`. Every grid square
/// is split along its south-west/north-east diagonal into two right
/// triangles, both counter-clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    n_sub: usize,
    h: f64,
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    interior: Vec<usize>,
    interior_index: Vec<Option<usize>>,
    lumped: Vec<f64>,
}

impl Mesh {
    pub fn n_sub(&self) -> usize {
        self.n_sub
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    /// Global node ids of the interior nodes, ascending.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    pub fn interior_index(&self, node: usize) -> Option<usize> {
        self.interior_index[node]
    }

    /// Row sums of the consistent mass matrix, one per node.
    pub fn lumped_weights(&self) -> &[f64] {
        &self.lumped
    }

    pub fn lumped_interior(&self) -> Vec<f64> {
        self.interior.iter().map(|&g| self.lumped[g]).collect()
    }

    pub fn interior_coords(&self) -> Vec<[f64; 2]> {
        self.interior.iter().map(|&g| self.nodes[g]).collect()
    }

    /// Restricts an all-node vector to interior nodes.
    pub fn restrict(&self, values: &[f64]) -> Vec<f64> {
        self.interior.iter().map(|&g| values[g]).collect()
    }

    /// Extends an interior vector to all nodes, with zeros on the boundary.
    pub fn extend(&self, interior: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_nodes()];
        for (&g, &v) in self.interior.iter().zip(interior) {
            out[g] = v;
        }
        out
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }
}

pub fn build_structured_mesh(n_sub: usize) -> Result<Mesh> {
    if n_sub < 2 {
        return Err(Error::InvalidArgument(format!(
            "n_sub must be at least 2, got {n_sub}"
        )));
    }
    let np = n_sub + 1;
    let h = 1.0 / n_sub as f64;
    let mut nodes = Vec::with_capacity(np * np);
    let mut boundary = Vec::with_capacity(np * np);
    for row in 0..np {
        for col in 0..np {
            nodes.push([col as f64 / n_sub as f64, row as f64 / n_sub as f64]);
            boundary.push(row == 0 || col == 0 || row == n_sub || col == n_sub);
        }
    }
    let id = |row: usize, col: usize| row * np + col;
    let mut triangles = Vec::with_capacity(2 * n_sub * n_sub);
    for row in 0..n_sub {
        for col in 0..n_sub {
            let sw = id(row, col);
            let se = id(row, col + 1);
            let nw = id(row + 1, col);
            let ne = id(row + 1, col + 1);
            triangles.push([sw, se, ne]);
            triangles.push([sw, ne, nw]);
        }
    }
    let mut interior = Vec::new();
    let mut interior_index = vec![None; np * np];
    for (g, &b) in boundary.iter().enumerate() {
        if !b {
            interior_index[g] = Some(interior.len());
            interior.push(g);
        }
    }
    let mut mesh = Mesh {
        n_sub,
        h,
        nodes,
        triangles,
        boundary,
        interior,
        interior_index,
        lumped: Vec::new(),
    };
    let mut lumped = vec![0.0; mesh.n_nodes()];
    for t in 0..mesh.triangles.len() {
        let share = mesh.triangle_area(t) / 3.0;
        for &v in &mesh.triangles[t] {
            lumped[v] += share;
        }
    }
    mesh.lumped = lumped;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        let m = build_structured_mesh(2).unwrap();
        assert_eq!(m.n_nodes(), 9);
        assert_eq!(m.triangles().len(), 8);
        assert_eq!(m.n_interior(), 1);
        assert_eq!(build_structured_mesh(4).unwrap().n_interior(), 9);
        assert_eq!(build_structured_mesh(32).unwrap().n_interior(), 961);
    }

    #[test]
    fn rejects_coarse() {
        assert!(matches!(
            build_structured_mesh(1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn orientation_and_area() {
        let m = build_structured_mesh(5).unwrap();
        let h = m.h();
        for t in 0..m.triangles().len() {
            assert!((m.triangle_area(t) - 0.5 * h * h).abs() < 1e-15);
        }
    }

    #[test]
    fn boundary_mask_matches_square() {
        let m = build_structured_mesh(6).unwrap();
        for (p, &b) in m.nodes().iter().zip(m.boundary_mask()) {
            let on = p[0] == 0.0 || p[1] == 0.0 || p[0] == 1.0 || p[1] == 1.0;
            assert_eq!(on, b);
        }
        let total: f64 = m.lumped_weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }
}
