//! Spin-1/2 observables on finite volumes.
//!
//! An [`Observable`] is a dense matrix together with the sorted list of site
//! indices it acts on. Volumes (`lambda` arguments) are sorted site-index lists;
//! tensor factors follow that order, the first site being the most significant.

use crate::error::{domain, Error, Result};
use crate::linalg::{self, Layout};
use crate::{CMatrix, C64};

/// Hilbert-space dimension of one site.
pub const SITE_DIM: usize = 2;

/// The Pauli matrices `S^1, S^2, S^3`.
pub fn pauli(k: usize) -> Result<CMatrix> {
    let (o, z, i) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 1.0));
    let entries = match k {
        1 => [z, o, o, z],
        2 => [z, -i, i, z],
        3 => [o, z, z, -o],
        _ => return Err(domain(format!("pauli index must be 1, 2 or 3, got {k}"))),
    };
    Ok(CMatrix::from_row_slice(2, 2, &entries))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    matrix: CMatrix,
    support: Vec<usize>,
}

impl Observable {
    pub fn new(matrix: CMatrix, support: Vec<usize>) -> Result<Self> {
        check_volume(&support, "support")?;
        let dim = SITE_DIM
            .checked_pow(support.len() as u32)
            .ok_or_else(|| domain("support too large"))?;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(domain(format!(
                "matrix is {}x{} but a support of {} sites needs {dim}x{dim}",
                matrix.nrows(),
                matrix.ncols(),
                support.len()
            )));
        }
        Ok(Self { matrix, support })
    }

    /// A single-site observable.
    pub fn local(matrix: CMatrix, site: usize) -> Result<Self> {
        Self::new(matrix, vec![site])
    }

    pub fn pauli(k: usize, site: usize) -> Result<Self> {
        Self::local(pauli(k)?, site)
    }

    pub fn identity(support: Vec<usize>) -> Result<Self> {
        let dim = 1 << support.len();
        Self::new(CMatrix::identity(dim, dim), support)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        linalg::hermitian_defect(&self.matrix) <= tol
    }

    pub fn adjoint(&self) -> Self {
        Self { matrix: self.matrix.adjoint(), support: self.support.clone() }
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self { matrix: &self.matrix * factor, support: self.support.clone() }
    }

    /// Operator (spectral) norm.
    pub fn norm(&self) -> f64 {
        operator_norm(self)
    }

    /// Entrywise maximum modulus; used for exact-zero checks.
    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.matrix)
    }

    /// Difference of two observables with the same support.
    pub fn sub(&self, other: &Observable) -> Result<Observable> {
        if self.support != other.support {
            return Err(domain("subtracting observables with different supports"));
        }
        Ok(Self { matrix: &self.matrix - &other.matrix, support: self.support.clone() })
    }

    /// Product of two observables with the same support.
    pub fn mul(&self, other: &Observable) -> Result<Observable> {
        if self.support != other.support {
            return Err(domain("multiplying observables with different supports"));
        }
        Ok(Self { matrix: linalg::matmul(&self.matrix, &other.matrix), support: self.support.clone() })
    }
}

pub(crate) fn check_volume(sites: &[usize], what: &str) -> Result<()> {
    if sites.windows(2).any(|w| w[0] >= w[1]) {
        return Err(domain(format!("{what} must be strictly increasing, got {sites:?}")));
    }
    Ok(())
}

/// Positions of `subset` inside the volume `lambda`.
pub(crate) fn positions(subset: &[usize], lambda: &[usize]) -> Result<Vec<usize>> {
    subset
        .iter()
        .map(|s| {
            lambda
                .binary_search(s)
                .map_err(|_| domain(format!("site {s} is not in the volume {lambda:?}")))
        })
        .collect()
}

pub(crate) fn layout_in(subset: &[usize], lambda: &[usize]) -> Result<Layout> {
    check_volume(lambda, "volume")?;
    Ok(Layout::new(lambda.len(), &positions(subset, lambda)?))
}

/// `A ⊗ 1_{Λ∖supp(A)}` with factors ordered by `lambda`. The result is declared
/// on all of `lambda`.
pub fn embed(a: &Observable, lambda: &[usize]) -> Result<Observable> {
    if a.support == lambda {
        return Ok(a.clone());
    }
    let layout = layout_in(&a.support, lambda)?;
    Observable::new(linalg::embed(&a.matrix, &layout), lambda.to_vec())
}

/// `[A, B]` on the volume `lambda`.
pub fn commutator(a: &Observable, b: &Observable, lambda: &[usize]) -> Result<Observable> {
    check_volume(lambda, "volume")?;
    let full = |o: &Observable| o.support == lambda;
    let matrix = match (full(a), full(b)) {
        (true, true) => linalg::matmul(&a.matrix, &b.matrix) - linalg::matmul(&b.matrix, &a.matrix),
        (true, false) => {
            let lb = layout_in(&b.support, lambda)?;
            linalg::mul_right_local(&a.matrix, &b.matrix, &lb)
                - linalg::mul_left_local(&b.matrix, &a.matrix, &lb)
        }
        (false, true) => {
            let la = layout_in(&a.support, lambda)?;
            linalg::mul_left_local(&a.matrix, &b.matrix, &la)
                - linalg::mul_right_local(&b.matrix, &a.matrix, &la)
        }
        (false, false) => {
            let big = embed(a, lambda)?;
            return commutator(&big, b, lambda);
        }
    };
    if matrix.nrows() != 1 << lambda.len() {
        return Err(Error::Internal("commutator dimension mismatch".into()));
    }
    Observable::new(matrix, lambda.to_vec())
}

/// Largest singular value of the observable's matrix.
pub fn operator_norm(a: &Observable) -> f64 {
    linalg::spectral_norm(&a.matrix)
}

/// Normalized partial trace of `A` (embedded in `lambda`) over `lambda ∖ keep`.
///
/// This is a norm-contracting projection onto the observables supported in
/// `keep`; it maps hermitian observables to hermitian observables.
pub fn conditional_expectation(a: &Observable, keep: &[usize], lambda: &[usize]) -> Result<Observable> {
    check_volume(keep, "kept set")?;
    let layout = layout_in(keep, lambda)?;
    let full = embed(a, lambda)?;
    Observable::new(linalg::reduce(&full.matrix, &layout), keep.to_vec())
}
