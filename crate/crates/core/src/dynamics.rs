//! Exact Heisenberg-picture dynamics `τ_t(A) = e^{itH} A e^{-itH}`.
//!
//! The Hamiltonian is diagonalized once. Its exact block structure (for
//! example conserved magnetization sectors) is detected from the zero pattern
//! and each block is diagonalized separately, which keeps both the
//! decomposition and every subsequent basis change block-sparse.

use crate::algebra::{self, Observable};
use crate::error::{domain, Error, Result};
use crate::exec::Execution;
use crate::linalg::{self, EigenBlock};
use crate::{CMatrix, C64, TOL_UNITARY};

/// Accuracy target for the truncated commutator series.
pub const TAYLOR_TARGET: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct DynamicsEngine {
    hamiltonian: Observable,
    blocks: Vec<EigenBlock>,
}

impl DynamicsEngine {
    /// Diagonalizes a hermitian Hamiltonian; the volume is its support.
    pub fn diagonalize(h: &Observable) -> Result<Self> {
        let defect = linalg::hermitian_defect(h.matrix());
        if defect > TOL_UNITARY {
            return Err(domain(format!("hamiltonian is not hermitian (defect {defect:e})")));
        }
        let blocks = linalg::hermitian_eigen(h.matrix())?;
        if blocks.iter().any(|b| b.values.iter().any(|v| !v.is_finite())) {
            return Err(Error::Internal("eigensolver returned non-finite eigenvalues".into()));
        }
        Ok(Self { hamiltonian: h.clone(), blocks })
    }

    pub fn hamiltonian(&self) -> &Observable {
        &self.hamiltonian
    }

    pub fn volume(&self) -> &[usize] {
        self.hamiltonian.support()
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    /// Sizes of the independently diagonalized blocks.
    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.indices.len()).collect()
    }

    /// Eigenvalues in block order, matching the columns of [`Self::eigenvectors`].
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.values.iter().copied()).collect()
    }

    /// The dense unitary whose columns are eigenvectors.
    pub fn eigenvectors(&self) -> CMatrix {
        linalg::assemble_vectors(&self.blocks, self.dim())
    }

    /// `max |V†V - 1|` entrywise.
    pub fn unitarity_defect(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                let n = b.indices.len();
                linalg::max_abs(&(b.vectors.adjoint() * &b.vectors - CMatrix::identity(n, n)))
            })
            .fold(0.0, f64::max)
    }

    /// `‖V diag(λ) V† - H‖` in spectral norm.
    pub fn reconstruction_error(&self) -> f64 {
        let v = self.eigenvectors();
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.dim(),
            self.eigenvalues().into_iter().map(|x| C64::new(x, 0.0)),
        ));
        linalg::spectral_norm(&(&v * d * v.adjoint() - self.hamiltonian.matrix()))
    }

    /// Prepares `A` for evaluation at many times.
    pub fn heisenberg(&self, a: &Observable) -> Result<HeisenbergOperator<'_>> {
        let full = algebra::embed(a, self.volume())?;
        let nb = self.blocks.len();
        let mut pieces = Vec::with_capacity(nb * nb);
        for bi in &self.blocks {
            for bj in &self.blocks {
                let sub = linalg::gather(full.matrix(), &bi.indices, &bj.indices);
                pieces.push(if linalg::is_zero(&sub) {
                    None
                } else {
                    Some(linalg::matmul(&linalg::matmul_adj_lhs(&bi.vectors, &sub), &bj.vectors))
                });
            }
        }
        Ok(HeisenbergOperator { engine: self, pieces, initial: full })
    }

    /// `τ_t(A)`, declared on the whole volume.
    pub fn evolve(&self, a: &Observable, t: f64) -> Result<Observable> {
        Ok(self.heisenberg(a)?.at(t))
    }
}

/// An observable expressed in the eigenbasis, ready for evaluation at any time.
#[derive(Debug, Clone)]
pub struct HeisenbergOperator<'a> {
    engine: &'a DynamicsEngine,
    /// Block pieces `V_I† A_{IJ} V_J`, row-major over block pairs.
    pieces: Vec<Option<CMatrix>>,
    initial: Observable,
}

impl HeisenbergOperator<'_> {
    /// `τ_t(A)`. At `t = 0` the embedded input is returned unchanged.
    pub fn at(&self, t: f64) -> Observable {
        if t == 0.0 {
            return self.initial.clone();
        }
        let blocks = &self.engine.blocks;
        let nb = blocks.len();
        let dim = self.engine.dim();
        let mut out = CMatrix::zeros(dim, dim);
        for (i, bi) in blocks.iter().enumerate() {
            for (j, bj) in blocks.iter().enumerate() {
                let Some(piece) = &self.pieces[i * nb + j] else { continue };
                let rotated = CMatrix::from_fn(piece.nrows(), piece.ncols(), |a, b| {
                    let phase = t * (bi.values[a] - bj.values[b]);
                    piece[(a, b)] * C64::new(phase.cos(), phase.sin())
                });
                let back = linalg::matmul_adj_rhs(&linalg::matmul(&bi.vectors, &rotated), &bj.vectors);
                for (a, &row) in bi.indices.iter().enumerate() {
                    for (b, &col) in bj.indices.iter().enumerate() {
                        out[(row, col)] = back[(a, b)];
                    }
                }
            }
        }
        Observable::new(out, self.engine.volume().to_vec()).expect("volume dimension")
    }
}

/// Result of the truncated series `Σ_{k ≤ order} (it)^k / k! ad_H^k(A)`.
#[derive(Debug, Clone)]
pub struct TaylorEvolution {
    pub observable: Observable,
    /// `2‖A‖ (2|t|‖H‖)^{order+1} / (order+1)!`.
    pub remainder_bound: f64,
    pub order: usize,
}

/// Independent oracle for [`DynamicsEngine::evolve`] at short times.
pub fn evolve_taylor(h: &Observable, a: &Observable, t: f64, order: usize) -> Result<TaylorEvolution> {
    if order == 0 {
        return Err(domain("series order must be positive"));
    }
    let lambda = h.support();
    let a_full = algebra::embed(a, lambda)?;
    let h_norm = h.norm();
    let a_norm = a_full.norm();
    let x = 2.0 * t.abs() * h_norm;
    let remainder_bound = 2.0 * a_norm * (1..=order + 1).fold(1.0, |acc, k| acc * x / k as f64);
    if remainder_bound > TAYLOR_TARGET {
        return Err(Error::TaylorRemainder { bound: remainder_bound, target: TAYLOR_TARGET });
    }
    if t == 0.0 {
        return Ok(TaylorEvolution { observable: a_full, remainder_bound, order });
    }
    let hm = h.matrix();
    let mut term = a_full.matrix().clone();
    let mut sum = term.clone();
    let mut coeff = C64::new(1.0, 0.0);
    for k in 1..=order {
        term = linalg::matmul(hm, &term) - linalg::matmul(&term, hm);
        coeff *= C64::new(0.0, t / k as f64);
        sum += &term * coeff;
    }
    Ok(TaylorEvolution { observable: Observable::new(sum, lambda.to_vec())?, remainder_bound, order })
}

/// `‖[τ_t(A), B]‖` for each time.
pub fn commutator_norm_grid(
    engine: &DynamicsEngine,
    a: &Observable,
    b: &Observable,
    times: &[f64],
    exec: Execution,
) -> Result<Vec<(f64, f64)>> {
    let sweep = commutator_norm_sweep(engine, a, std::slice::from_ref(b), times, exec)?;
    Ok(times.iter().copied().zip(sweep.into_iter().next().unwrap_or_default()).collect())
}

/// `‖[τ_t(A), B_k]‖` for every probe `B_k` and time, indexed `[probe][time]`.
///
/// Each time is evolved once and shared by all probes. Cells are independent,
/// so sequential and parallel execution give identical results.
pub fn commutator_norm_sweep(
    engine: &DynamicsEngine,
    a: &Observable,
    probes: &[Observable],
    times: &[f64],
    exec: Execution,
) -> Result<Vec<Vec<f64>>> {
    let lambda = engine.volume();
    for p in probes {
        algebra::positions(p.support(), lambda)?;
    }
    let op = engine.heisenberg(a)?;
    let rows: Vec<Result<Vec<f64>>> = exec.map(times, |&t| {
        let evolved = op.at(t);
        probes
            .iter()
            .map(|b| Ok(algebra::commutator(&evolved, b, lambda)?.norm()))
            .collect()
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((0..probes.len())
        .map(|k| rows.iter().map(|r| r[k]).collect())
        .collect())
}

/// `points` equally spaced times from 0 to `t_max` inclusive.
pub fn time_grid(t_max: f64, points: usize) -> Result<Vec<f64>> {
    match points {
        0 => Err(domain("time grid needs at least one point")),
        1 => Ok(vec![0.0]),
        _ => Ok((0..points)
            .map(|k| t_max * k as f64 / (points - 1) as f64)
            .collect()),
    }
}

/// Default number of grid points.
pub const DEFAULT_TIME_POINTS: usize = 64;
