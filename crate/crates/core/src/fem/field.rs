//! Nodal and dual fields and their plain-text serialization.
//!
//! Text format: a header line `nsub=<n> kind=<tag>` followed by one
//! `index value` pair per line. Nodal fields list every mesh node by global
//! id; dual fields list interior nodes by interior ordinal. Values are
//! written in shortest round-trip form.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use super::linalg;
use super::mesh::Mesh;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// H¹₀ function (state, adjoint, obstacle data): zero on the boundary.
    Primal,
    /// L² control.
    Control,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualKind {
    Residual,
    Measure,
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FieldKind::Primal => "primal",
            FieldKind::Control => "control",
        })
    }
}

impl fmt::Display for DualKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DualKind::Residual => "h-1-residual",
            DualKind::Measure => "nodal-measure",
        })
    }
}

impl FromStr for FieldKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "primal" => Ok(FieldKind::Primal),
            "control" => Ok(FieldKind::Control),
            other => Err(Error::InvalidData(format!("unknown nodal field kind '{other}'"))),
        }
    }
}

impl FromStr for DualKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "h-1-residual" => Ok(DualKind::Residual),
            "nodal-measure" => Ok(DualKind::Measure),
            other => Err(Error::InvalidData(format!("unknown dual field kind '{other}'"))),
        }
    }
}

/// One value per mesh node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    n_sub: usize,
    kind: FieldKind,
    values: Vec<f64>,
}

impl NodalField {
    pub fn new(n_sub: usize, kind: FieldKind, values: Vec<f64>) -> Result<Self> {
        let expected = (n_sub + 1) * (n_sub + 1);
        if values.len() != expected {
            return Err(Error::InvalidData(format!(
                "nodal field for nsub={n_sub} needs {expected} values, got {}",
                values.len()
            )));
        }
        Ok(NodalField { n_sub, kind, values })
    }

    pub fn constant(mesh: &Mesh, kind: FieldKind, value: f64) -> Self {
        let mut values = vec![value; mesh.n_nodes()];
        if kind == FieldKind::Primal {
            for (v, &b) in values.iter_mut().zip(mesh.boundary_mask()) {
                if b {
                    *v = 0.0;
                }
            }
        }
        NodalField {
            n_sub: mesh.n_sub(),
            kind,
            values,
        }
    }

    /// Evaluates `f(x, y)` at every node; no boundary masking.
    pub fn from_fn(mesh: &Mesh, kind: FieldKind, f: impl Fn(f64, f64) -> f64) -> Self {
        NodalField {
            n_sub: mesh.n_sub(),
            kind,
            values: mesh.nodes().iter().map(|p| f(p[0], p[1])).collect(),
        }
    }

    pub fn from_interior(mesh: &Mesh, kind: FieldKind, interior: &[f64]) -> Self {
        NodalField {
            n_sub: mesh.n_sub(),
            kind,
            values: mesh.extend(interior),
        }
    }

    pub fn n_sub(&self) -> usize {
        self.n_sub
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn interior(&self, mesh: &Mesh) -> Vec<f64> {
        mesh.restrict(&self.values)
    }

    /// Largest absolute value on boundary nodes.
    pub fn boundary_max_abs(&self, mesh: &Mesh) -> f64 {
        self.values
            .iter()
            .zip(mesh.boundary_mask())
            .filter(|(_, &b)| b)
            .fold(0.0_f64, |m, (v, _)| m.max(v.abs()))
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "nsub={} kind={}", self.n_sub, self.kind)?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{i} {v:?}")?;
        }
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let (n_sub, kind, values) = read_block(r, |n| (n + 1) * (n + 1))?;
        NodalField::new(n_sub, kind.parse()?, values)
    }
}

/// One density value per interior node, paired through the lumped weights:
/// `⟨ξ, v⟩ = Σᵢ ξᵢ vᵢ mᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualField {
    n_sub: usize,
    kind: DualKind,
    values: Vec<f64>,
}

impl DualField {
    pub fn new(n_sub: usize, kind: DualKind, values: Vec<f64>) -> Self {
        DualField { n_sub, kind, values }
    }

    pub fn zeros(mesh: &Mesh, kind: DualKind) -> Self {
        DualField::new(mesh.n_sub(), kind, vec![0.0; mesh.n_interior()])
    }

    pub fn n_sub(&self) -> usize {
        self.n_sub
    }

    pub fn kind(&self) -> DualKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `⟨self, v⟩` for an interior vector `v`.
    pub fn pair(&self, mesh: &Mesh, v: &[f64]) -> f64 {
        linalg::weighted_dot(&mesh.lumped_interior(), &self.values, v)
    }

    /// Total variation `Σ mᵢ |ξᵢ|`; for a nonnegative measure its total mass.
    pub fn measure_norm(&self, mesh: &Mesh) -> f64 {
        mesh.lumped_interior()
            .iter()
            .zip(&self.values)
            .map(|(m, v)| m * v.abs())
            .sum()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "nsub={} kind={}", self.n_sub, self.kind)?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{i} {v:?}")?;
        }
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let (n_sub, kind, values) = read_block(r, |n| (n - 1) * (n - 1))?;
        Ok(DualField::new(n_sub, kind.parse()?, values))
    }
}

fn read_block(r: impl BufRead, count: impl Fn(usize) -> usize) -> Result<(usize, String, Vec<f64>)> {
    let mut lines = r.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, line)) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
            None => {
                return Err(Error::Parse {
                    line: 1,
                    message: "missing header".into(),
                })
            }
        }
    };
    let mut n_sub = None;
    let mut kind = None;
    for tok in header.split_whitespace() {
        match tok.split_once('=') {
            Some(("nsub", v)) => {
                n_sub = Some(v.parse::<usize>().map_err(|e| Error::Parse {
                    line: 1,
                    message: format!("bad nsub: {e}"),
                })?)
            }
            Some(("kind", v)) => kind = Some(v.to_string()),
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("unexpected header token '{tok}'"),
                })
            }
        }
    }
    let (Some(n_sub), Some(kind)) = (n_sub, kind) else {
        return Err(Error::Parse {
            line: 1,
            message: "header needs nsub= and kind=".into(),
        });
    };
    if n_sub < 2 {
        return Err(Error::InvalidData(format!("nsub={n_sub} is too small")));
    }
    let expected = count(n_sub);
    let mut values = vec![f64::NAN; expected];
    let mut seen = vec![false; expected];
    for (lineno, line) in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let perr = |message: String| Error::Parse {
            line: lineno + 1,
            message,
        };
        let mut parts = line.split_whitespace();
        let (Some(i), Some(v), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(perr(format!("expected 'index value', got '{line}'")));
        };
        let i: usize = i.parse().map_err(|e| perr(format!("bad index: {e}")))?;
        let v: f64 = v.parse().map_err(|e| perr(format!("bad value: {e}")))?;
        if i >= expected || seen[i] {
            return Err(perr(format!("index {i} out of range or repeated")));
        }
        seen[i] = true;
        values[i] = v;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidData(format!("missing value for index {missing}")));
    }
    Ok((n_sub, kind, values))
}

/// Legacy ASCII VTK export of nodal fields on the mesh.
pub fn write_vtk(mesh: &Mesh, fields: &[(&str, &NodalField)], w: &mut impl Write) -> Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "obstacle-ocp nodal fields")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.n_nodes())?;
    for p in mesh.nodes() {
        writeln!(w, "{:?} {:?} 0", p[0], p[1])?;
    }
    let nt = mesh.triangles().len();
    writeln!(w, "CELLS {} {}", nt, 4 * nt)?;
    for t in mesh.triangles() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(w, "5")?;
    }
    writeln!(w, "POINT_DATA {}", mesh.n_nodes())?;
    for (name, field) in fields {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in field.values() {
            writeln!(w, "{v:?}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::mesh::build_structured_mesh;

    #[test]
    fn header_and_kinds() {
        let mesh = build_structured_mesh(2).unwrap();
        let f = NodalField::constant(&mesh, FieldKind::Primal, 3.0);
        assert_eq!(f.values().iter().filter(|&&v| v == 3.0).count(), 1);
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("nsub=2 kind=primal\n0 0.0\n"));
    }

    #[test]
    fn rejects_missing_and_repeated_entries() {
        let text = "nsub=2 kind=nodal-measure\n";
        assert!(DualField::read_from(text.as_bytes()).is_err());
        let text = "nsub=2 kind=nodal-measure\n0 1.0\n0 2.0\n";
        assert!(DualField::read_from(text.as_bytes()).is_err());
        let text = "nsub=2 kind=bogus\n0 1.0\n";
        assert!(DualField::read_from(text.as_bytes()).is_err());
    }
}
