//! Sparse matrix helpers and a banded LU factorization.
//!
//! Every system assembled on the structured mesh is banded once the unknowns
//! are numbered lexicographically, and principal submatrices (used by the
//! active-set solvers) keep that band. A dense band factorization with
//! partial pivoting is therefore a direct sparse solver that is exact in
//! structure and fully deterministic.

use sprs::{CsMat, TriMat};

use crate::error::{Error, Result};

/// Sparse matrix type used throughout the crate.
pub type Csr = CsMat<f64>;

pub fn csr_from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Csr {
    let mut tri = TriMat::with_capacity((nrows, ncols), triplets.len());
    for &(i, j, v) in triplets {
        tri.add_triplet(i, j, v);
    }
    tri.to_csr()
}

pub fn mat_vec(a: &Csr, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.cols(), x.len());
    a.outer_iterator()
        .map(|row| row.iter().map(|(j, &v)| v * x[j]).sum())
        .collect()
}

pub fn transpose(a: &Csr) -> Csr {
    a.transpose_view().to_csr()
}

/// Lower and upper bandwidth `(kl, ku)`.
pub fn bandwidth(a: &Csr) -> (usize, usize) {
    let mut kl = 0;
    let mut ku = 0;
    for (i, row) in a.outer_iterator().enumerate() {
        for (j, &v) in row.iter() {
            if v == 0.0 {
                continue;
            }
            if j < i {
                kl = kl.max(i - j);
            } else {
                ku = ku.max(j - i);
            }
        }
    }
    (kl, ku)
}

/// Rows and columns `idx` (sorted ascending) of a square matrix.
pub fn principal_submatrix(a: &Csr, idx: &[usize]) -> Csr {
    let mut pos = vec![usize::MAX; a.rows()];
    for (k, &i) in idx.iter().enumerate() {
        pos[i] = k;
    }
    let mut triplets = Vec::new();
    for (k, &i) in idx.iter().enumerate() {
        if let Some(row) = a.outer_view(i) {
            for (j, &v) in row.iter() {
                if pos[j] != usize::MAX {
                    triplets.push((k, pos[j], v));
                }
            }
        }
    }
    csr_from_triplets(idx.len(), idx.len(), &triplets)
}

/// `a + diag(d)`.
pub fn add_diagonal(a: &Csr, d: &[f64]) -> Csr {
    let mut triplets = Vec::with_capacity(a.nnz() + d.len());
    for (i, row) in a.outer_iterator().enumerate() {
        for (j, &v) in row.iter() {
            triplets.push((i, j, v));
        }
    }
    for (i, &v) in d.iter().enumerate() {
        if v != 0.0 {
            triplets.push((i, i, v));
        }
    }
    csr_from_triplets(a.rows(), a.cols(), &triplets)
}

/// `(a + aᵀ)/2`.
pub fn symmetric_part(a: &Csr) -> Csr {
    let at = transpose(a);
    let mut triplets = Vec::with_capacity(2 * a.nnz());
    for m in [a, &at] {
        for (i, row) in m.outer_iterator().enumerate() {
            for (j, &v) in row.iter() {
                triplets.push((i, j, 0.5 * v));
            }
        }
    }
    csr_from_triplets(a.rows(), a.cols(), &triplets)
}

/// LU factorization with partial pivoting of a banded matrix, stored row-wise.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn factor(a: &Csr) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(Error::InvalidArgument(format!(
                "matrix is {}x{}, expected square",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        let (kl, ku) = bandwidth(a);
        let width = 2 * kl + ku + 1;
        let mut lu = BandLu {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
            pivots: vec![0; n],
        };
        let mut scale = 0.0_f64;
        for (i, row) in a.outer_iterator().enumerate() {
            for (j, &v) in row.iter() {
                if v == 0.0 {
                    continue;
                }
                *lu.at_mut(i, j) += v;
                scale = scale.max(v.abs());
            }
        }
        lu.eliminate(scale)?;
        Ok(lu)
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[self.offset(i, j)]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let k = self.offset(i, j);
        &mut self.data[k]
    }

    fn eliminate(&mut self, scale: f64) -> Result<()> {
        let n = self.n;
        let tiny = 1e-14 * scale.max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let last_col = (k + self.kl + self.ku).min(n - 1);
            let mut p = k;
            let mut best = self.at(k, k).abs();
            for r in k + 1..=last_row {
                let v = self.at(r, k).abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > tiny) || !best.is_finite() {
                return Err(Error::solver(
                    format!("band LU: singular pivot at column {k}"),
                    best,
                ));
            }
            self.pivots[k] = p;
            if p != k {
                for j in k..=last_col {
                    let a = self.offset(k, j);
                    let b = self.offset(p, j);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.at(k, k);
            for r in k + 1..=last_row {
                let l = self.at(r, k) / pivot;
                *self.at_mut(r, k) = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let v = self.at(k, j);
                        *self.at_mut(r, j) -= l * v;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        assert_eq!(x.len(), n, "right-hand side has wrong length");
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != 0.0 {
                for r in k + 1..=(k + self.kl).min(n.saturating_sub(1)) {
                    x[r] -= self.at(r, k) * xk;
                }
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..=(i + self.kl + self.ku).min(n - 1) {
                s -= self.at(i, j) * x[j];
            }
            x[i] = s / self.at(i, i);
        }
    }
}

/// True iff the symmetric matrix `a` is positive definite (LDLᵀ without pivoting).
pub fn is_positive_definite(a: &Csr) -> bool {
    let n = a.rows();
    let (kl, _) = bandwidth(a);
    let w = kl + 1;
    // lower band: row i holds columns i-kl..=i
    let mut l = vec![0.0; n * w];
    let idx = |i: usize, j: usize| i * w + (j + kl - i);
    for (i, row) in a.outer_iterator().enumerate() {
        for (j, &v) in row.iter() {
            if j <= i && j + kl >= i {
                l[idx(i, j)] += v;
            }
        }
    }
    let mut d = vec![0.0; n];
    for i in 0..n {
        let lo = i.saturating_sub(kl);
        for j in lo..i {
            let mut s = l[idx(i, j)];
            for k in i.saturating_sub(kl).max(j.saturating_sub(kl))..j {
                s -= l[idx(i, k)] * l[idx(j, k)] * d[k];
            }
            l[idx(i, j)] = s / d[j];
        }
        let mut s = l[idx(i, i)];
        for k in lo..i {
            s -= l[idx(i, k)] * l[idx(i, k)] * d[k];
        }
        if !(s > 0.0) {
            return false;
        }
        d[i] = s;
    }
    true
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lumped pairing `Σ wᵢ aᵢ bᵢ`.
pub fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, x), y)| w * x * y).sum()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize, lo: f64, d: f64, up: f64) -> Csr {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, d));
            if i > 0 {
                t.push((i, i - 1, lo));
            }
            if i + 1 < n {
                t.push((i, i + 1, up));
            }
        }
        csr_from_triplets(n, n, &t)
    }

    #[test]
    fn band_lu_solves_nonsymmetric_tridiagonal() {
        let a = tridiag(7, -1.3, 2.0, -0.4);
        let x: Vec<f64> = (0..7).map(|i| (i as f64).sin() + 0.5).collect();
        let b = mat_vec(&a, &x);
        let lu = BandLu::factor(&a).unwrap();
        let y = lu.solve(&b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn band_lu_pivots_on_zero_diagonal() {
        // [[0, 1], [1, 0]] needs a row swap
        let a = csr_from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0)]);
        let lu = BandLu::factor(&a).unwrap();
        let x = lu.solve(&[2.0, 3.0]);
        assert_eq!(x, vec![3.0, 2.0]);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = csr_from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        assert!(matches!(BandLu::factor(&a), Err(Error::SolverFailure { .. })));
    }

    #[test]
    fn positive_definiteness() {
        assert!(is_positive_definite(&tridiag(5, -1.0, 2.0, -1.0)));
        assert!(!is_positive_definite(&tridiag(5, -1.0, 1.0, -1.0)));
    }

    #[test]
    fn submatrix_keeps_entries() {
        let a = tridiag(5, -1.0, 2.0, -0.5);
        let s = principal_submatrix(&a, &[1, 2, 4]);
        assert_eq!(s.get(0, 1), Some(&-0.5));
        assert_eq!(s.get(1, 0), Some(&-1.0));
        assert_eq!(s.get(1, 2), None);
        assert_eq!(s.get(2, 2), Some(&2.0));
    }
}
