//! Dense kernels on `2^n`-dimensional spin spaces.
//!
//! Basis index bits are ordered by site position: position 0 of the volume is
//! the most significant bit.
//!
//! Matrices are stored in nalgebra containers; dense products and
//! eigensolvers run on faer through zero-copy views, sequentially.

use faer::linalg::matmul::matmul as gemm;
use faer::{Accum, MatMut, MatRef, Par, Side};

use crate::error::{Error, Result};
use crate::{CMatrix, C64};

/// Bit layout of a subsystem inside a volume of `n` spin-1/2 sites.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    /// Full-index bit pattern of every local basis state.
    scatter: Vec<usize>,
    /// Full indices whose subsystem bits are all zero.
    rest: Vec<usize>,
}

impl Layout {
    /// `positions` are sorted positions of the subsystem sites within the volume.
    pub fn new(n: usize, positions: &[usize]) -> Self {
        let k = positions.len();
        let scatter = (0..1usize << k)
            .map(|local| {
                positions.iter().enumerate().fold(0usize, |acc, (q, &p)| {
                    if local >> (k - 1 - q) & 1 == 1 {
                        acc | 1 << (n - 1 - p)
                    } else {
                        acc
                    }
                })
            })
            .collect::<Vec<_>>();
        let mask = scatter.last().copied().unwrap_or(0);
        let rest = (0..1usize << n).filter(|i| i & mask == 0).collect();
        Self { scatter, rest }
    }

    pub fn local_dim(&self) -> usize {
        self.scatter.len()
    }

    pub fn full_dim(&self) -> usize {
        self.scatter.len() * self.rest.len()
    }
}

/// `target += scale · (local ⊗ 1)`.
pub(crate) fn add_embedded(target: &mut CMatrix, local: &CMatrix, layout: &Layout, scale: C64) {
    let s = &layout.scatter;
    for &r in &layout.rest {
        for (lj, &bj) in s.iter().enumerate() {
            for (li, &bi) in s.iter().enumerate() {
                let v = local[(li, lj)];
                if v != C64::new(0.0, 0.0) {
                    target[(r | bi, r | bj)] += scale * v;
                }
            }
        }
    }
}

/// `local ⊗ 1` as a dense matrix.
pub(crate) fn embed(local: &CMatrix, layout: &Layout) -> CMatrix {
    let dim = layout.full_dim();
    let mut out = CMatrix::zeros(dim, dim);
    add_embedded(&mut out, local, layout, C64::new(1.0, 0.0));
    out
}

/// `m · (local ⊗ 1)` without forming the embedded operator.
pub(crate) fn mul_right_local(m: &CMatrix, local: &CMatrix, layout: &Layout) -> CMatrix {
    let dim = m.nrows();
    let s = &layout.scatter;
    let mut out = CMatrix::zeros(dim, dim);
    for &r in &layout.rest {
        for (lj, &bj) in s.iter().enumerate() {
            let col = r | bj;
            for (lk, &bk) in s.iter().enumerate() {
                let w = local[(lk, lj)];
                if w == C64::new(0.0, 0.0) {
                    continue;
                }
                let src = r | bk;
                for i in 0..dim {
                    out[(i, col)] += m[(i, src)] * w;
                }
            }
        }
    }
    out
}

/// `(local ⊗ 1) · m` without forming the embedded operator.
pub(crate) fn mul_left_local(local: &CMatrix, m: &CMatrix, layout: &Layout) -> CMatrix {
    let dim = m.nrows();
    let s = &layout.scatter;
    let mut out = CMatrix::zeros(dim, dim);
    for j in 0..dim {
        for &r in &layout.rest {
            for (li, &bi) in s.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (lk, &bk) in s.iter().enumerate() {
                    let w = local[(li, lk)];
                    if w != C64::new(0.0, 0.0) {
                        acc += w * m[(r | bk, j)];
                    }
                }
                out[(r | bi, j)] = acc;
            }
        }
    }
    out
}

/// Normalized partial trace of `m` over everything outside the subsystem.
pub(crate) fn reduce(m: &CMatrix, layout: &Layout) -> CMatrix {
    let d = layout.local_dim();
    let s = &layout.scatter;
    let norm = 1.0 / layout.rest.len() as f64;
    CMatrix::from_fn(d, d, |li, lj| {
        let sum: C64 = layout.rest.iter().map(|&r| m[(r | s[li], r | s[lj])]).sum();
        sum * norm
    })
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entrywise deviation from hermiticity.
pub(crate) fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Same as [`hermitian_defect`] for `m + m†`.
fn antihermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] + m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Connected components of the nonzero pattern of a hermitian matrix, each
/// sorted; components are ordered by their smallest index.
pub(crate) fn blocks(m: &CMatrix) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let zero = C64::new(0.0, 0.0);
    for j in 0..n {
        for i in 0..j {
            if m[(i, j)] != zero || m[(j, i)] != zero {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(i);
    }
    groups
}

pub(crate) fn gather(m: &CMatrix, rows: &[usize], cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), cols.len(), |a, b| m[(rows[a], cols[b])])
}

pub(crate) fn is_zero(m: &CMatrix) -> bool {
    m.iter().all(|z| *z == C64::new(0.0, 0.0))
}

/// Eigenpairs of one diagonal block of a hermitian matrix.
#[derive(Debug, Clone)]
pub(crate) struct EigenBlock {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

/// Eigendecomposition of a hermitian matrix, split along its exact block structure.
pub(crate) fn hermitian_eigen(m: &CMatrix) -> Result<Vec<EigenBlock>> {
    let h = hermitian_part(m);
    blocks(&h)
        .into_iter()
        .map(|indices| {
            let sub = gather(&h, &indices, &indices);
            let eig = view(&sub)
                .self_adjoint_eigen(Side::Lower)
                .map_err(|e| Error::Internal(format!("eigensolver failed: {e:?}")))?;
            let (u, s) = (eig.U(), eig.S());
            let n = indices.len();
            Ok(EigenBlock {
                indices,
                values: (0..n).map(|k| s[k].re).collect(),
                vectors: CMatrix::from_fn(n, n, |i, j| u[(i, j)]),
            })
        })
        .collect()
}

/// Eigenvalues of a hermitian matrix (block-wise, unordered).
pub(crate) fn hermitian_eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    let h = hermitian_part(m);
    let mut out = Vec::with_capacity(h.nrows());
    for indices in blocks(&h) {
        if indices.len() == 1 {
            out.push(h[(indices[0], indices[0])].re);
            continue;
        }
        let sub = gather(&h, &indices, &indices);
        let vals = view(&sub)
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Internal(format!("eigensolver failed: {e:?}")))?;
        out.extend(vals);
    }
    Ok(out)
}

/// Largest singular value, or NaN if the solver does not converge.
///
/// Hermitian and anti-hermitian inputs (up to rounding) go through the
/// block-wise eigenvalues of the matrix itself.
pub(crate) fn spectral_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let scale = max_abs(m);
    if scale == 0.0 {
        return 0.0;
    }
    let tol = 64.0 * f64::EPSILON * scale.max(1.0);
    let largest = |vals: Result<Vec<f64>>| match vals {
        Ok(v) => v.into_iter().map(f64::abs).fold(0.0, f64::max),
        Err(_) => f64::NAN,
    };
    if hermitian_defect(m) <= tol {
        largest(hermitian_eigenvalues(m))
    } else if antihermitian_defect(m) <= tol {
        largest(hermitian_eigenvalues(&(m * C64::new(0.0, 1.0))))
    } else {
        largest(view(m).singular_values().map_err(|e| Error::Internal(format!("{e:?}"))))
    }
}

fn view(m: &CMatrix) -> MatRef<'_, C64> {
    MatRef::from_column_major_slice(m.as_slice(), m.nrows(), m.ncols())
}

fn product(lhs: MatRef<'_, C64>, rhs: MatRef<'_, C64>, adjoint_lhs: bool, adjoint_rhs: bool) -> CMatrix {
    let rows = if adjoint_lhs { lhs.ncols() } else { lhs.nrows() };
    let cols = if adjoint_rhs { rhs.nrows() } else { rhs.ncols() };
    let mut out = CMatrix::zeros(rows, cols);
    let dst = MatMut::from_column_major_slice_mut(out.as_mut_slice(), rows, cols);
    let one = C64::new(1.0, 0.0);
    match (adjoint_lhs, adjoint_rhs) {
        (false, false) => gemm(dst, Accum::Replace, lhs, rhs, one, Par::Seq),
        (true, false) => gemm(dst, Accum::Replace, lhs.adjoint(), rhs, one, Par::Seq),
        (false, true) => gemm(dst, Accum::Replace, lhs, rhs.adjoint(), one, Par::Seq),
        (true, true) => gemm(dst, Accum::Replace, lhs.adjoint(), rhs.adjoint(), one, Par::Seq),
    }
    out
}

/// `a b`
pub(crate) fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    product(view(a), view(b), false, false)
}

/// `a† b`
pub(crate) fn matmul_adj_lhs(a: &CMatrix, b: &CMatrix) -> CMatrix {
    product(view(a), view(b), true, false)
}

/// `a b†`
pub(crate) fn matmul_adj_rhs(a: &CMatrix, b: &CMatrix) -> CMatrix {
    product(view(a), view(b), false, true)
}

/// Reassembles the dense eigenvector matrix; column order follows the blocks.
pub(crate) fn assemble_vectors(blocks: &[EigenBlock], dim: usize) -> CMatrix {
    let mut v = CMatrix::zeros(dim, dim);
    let mut offset = 0;
    for b in blocks {
        for (a, &row) in b.indices.iter().enumerate() {
            for k in 0..b.indices.len() {
                v[(row, offset + k)] = b.vectors[(a, k)];
            }
        }
        offset += b.indices.len();
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sample(dim: usize, seed: u64) -> CMatrix {
        CMatrix::from_fn(dim, dim, |i, j| {
            let x = ((i * 31 + j * 17 + seed as usize * 7) % 13) as f64 - 6.0;
            let y = ((i * 5 + j * 11 + seed as usize) % 7) as f64 - 3.0;
            c(x / 7.0, y / 5.0)
        })
    }

    /// Kronecker product with the layout's factor order, built naively.
    fn kron_embed(local: &CMatrix, n: usize, positions: &[usize]) -> CMatrix {
        let id2 = CMatrix::identity(2, 2);
        // Only contiguous or single positions are needed here.
        let k = positions.len();
        let before = positions[0];
        let after = n - positions[k - 1] - 1;
        let mut m = CMatrix::identity(1 << before, 1 << before).kronecker(local);
        for _ in 0..after {
            m = m.kronecker(&id2);
        }
        m
    }

    #[test]
    fn embed_matches_kronecker() {
        let local = sample(4, 3);
        for start in 0..3 {
            let layout = Layout::new(4, &[start, start + 1]);
            let dense = embed(&local, &layout);
            assert_eq!(dense, kron_embed(&local, 4, &[start, start + 1]));
        }
    }

    #[test]
    fn local_products_match_dense() {
        let m = sample(16, 1);
        let local = sample(4, 2);
        let layout = Layout::new(4, &[0, 2]);
        let dense = embed(&local, &layout);
        assert!(max_abs(&(mul_right_local(&m, &local, &layout) - &m * &dense)) < 1e-12);
        assert!(max_abs(&(mul_left_local(&local, &m, &layout) - &dense * &m)) < 1e-12);
    }

    #[test]
    fn reduce_inverts_embed() {
        let local = sample(2, 4);
        let layout = Layout::new(3, &[1]);
        assert!(max_abs(&(reduce(&embed(&local, &layout), &layout) - &local)) < 1e-15);
    }

    #[test]
    fn block_detection() {
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 3)] = c(1.0, 0.0);
        m[(3, 0)] = c(1.0, 0.0);
        m[(1, 1)] = c(2.0, 0.0);
        assert_eq!(blocks(&m), vec![vec![0, 3], vec![1], vec![2]]);
    }

    #[test]
    fn norms_of_structured_matrices() {
        let a = sample(8, 5);
        let herm = &a + a.adjoint();
        let anti = &a - a.adjoint();
        let dense = |m: &CMatrix| {
            let vals = (m.adjoint() * m).symmetric_eigenvalues();
            vals.iter().fold(0.0f64, |acc, v| acc.max(*v)).sqrt()
        };
        for m in [&a, &herm, &anti] {
            assert!((spectral_norm(m) - dense(m)).abs() < 1e-10);
        }
    }
}
