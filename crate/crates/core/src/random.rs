//! Seeded random generators for matrices, states and directions.
//!
//! All randomness in the crate flows through [`Rng`], SplitMix64 (64-bit
//! state), so runs with the same seed reproduce bit-exactly.

use rand::{Rng as _, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::SplitMix64;

use crate::density::DensityMatrix;
use crate::hermitian::HermitianMatrix;
use crate::linalg::{gram_schmidt, CMatrix, C64};

pub type Rng = SplitMix64;

pub fn rng(seed: u64) -> Rng {
    SplitMix64::seed_from_u64(seed)
}

/// Seed for the `index`-th independent sub-task of a run seeded by `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut g = rng(master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    g.random()
}

pub fn normal(g: &mut Rng) -> f64 {
    g.sample(StandardNormal)
}

fn complex_normal(g: &mut Rng) -> C64 {
    C64::new(normal(g), normal(g)) * std::f64::consts::FRAC_1_SQRT_2
}

/// Ginibre matrix with i.i.d. standard complex normal entries.
pub fn ginibre(n: usize, g: &mut Rng) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| complex_normal(g))
}

/// Hermitian matrix with Gaussian entries of standard deviation ~`scale`.
pub fn random_hermitian(n: usize, scale: f64, g: &mut Rng) -> HermitianMatrix {
    let m = ginibre(n, g).scale(scale);
    HermitianMatrix::symmetrize(&m + &m.adjoint()).scale(0.5)
}

/// Real diagonal matrix with standard normal diagonal entries.
pub fn random_diagonal(n: usize, scale: f64, g: &mut Rng) -> HermitianMatrix {
    let d: Vec<f64> = (0..n).map(|_| scale * normal(g)).collect();
    HermitianMatrix::from_real_diag(&d)
}

/// Full-rank random state `G G*/tr(G G*)` for a Ginibre `G`.
pub fn random_density(n: usize, g: &mut Rng) -> DensityMatrix {
    let m = ginibre(n, g);
    DensityMatrix::from_positive(HermitianMatrix::symmetrize(m.matmul(&m.adjoint())))
}

/// State of rank at most `r`.
pub fn random_density_of_rank(n: usize, r: usize, g: &mut Rng) -> DensityMatrix {
    let m = CMatrix::from_fn(n, r, |_, _| complex_normal(g));
    DensityMatrix::from_positive(HermitianMatrix::symmetrize(m.matmul(&m.adjoint())))
}

pub fn random_vector(n: usize, g: &mut Rng) -> Vec<C64> {
    (0..n).map(|_| complex_normal(g)).collect()
}

/// Haar-distributed unitary, up to the phase convention of Gram–Schmidt.
pub fn random_unitary(n: usize, g: &mut Rng) -> CMatrix {
    let mut cols: Vec<Vec<C64>> = (0..n).map(|_| random_vector(n, g)).collect();
    gram_schmidt(&mut cols);
    CMatrix::from_columns(&cols)
}

/// Uniform point on the unit sphere in ℝᵏ.
pub fn random_unit_vector(k: usize, g: &mut Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..k).map(|_| normal(g)).collect();
        let n = crate::linalg::norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}
