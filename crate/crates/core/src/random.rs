//! Seeded random instances for property checks.
//!
//! Every randomized check in the crate draws from [`rng`], a ChaCha8 stream keyed
//! by an integer seed, so runs are reproducible across platforms.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::algebra::Observable;
use crate::{CMatrix, C64};

/// The deterministic generator used for all randomized checks.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian<R: Rng>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Complex Ginibre matrix with unit-variance entries.
pub fn matrix<R: Rng>(rng: &mut R, dim: usize) -> CMatrix {
    CMatrix::from_fn(dim, dim, |_, _| gaussian(rng))
}

/// Hermitian matrix scaled so that its spectral norm is of order one.
pub fn hermitian<R: Rng>(rng: &mut R, dim: usize) -> CMatrix {
    let g = matrix(rng, dim);
    (&g + g.adjoint()) * C64::new(0.5 / (dim as f64).sqrt(), 0.0)
}

/// Haar-distributed unitary (QR of a Ginibre matrix with the phase ambiguity fixed).
pub fn unitary<R: Rng>(rng: &mut R, dim: usize) -> CMatrix {
    let qr = matrix(rng, dim).qr();
    let r = qr.r();
    let mut q = qr.q();
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, k)] *= phase;
        }
    }
    q
}

pub fn hermitian_observable<R: Rng>(rng: &mut R, support: Vec<usize>) -> Observable {
    let dim = 1 << support.len();
    Observable::new(hermitian(rng, dim), support).expect("dimension matches support")
}

pub fn observable<R: Rng>(rng: &mut R, support: Vec<usize>) -> Observable {
    let dim = 1 << support.len();
    Observable::new(matrix(rng, dim), support).expect("dimension matches support")
}
