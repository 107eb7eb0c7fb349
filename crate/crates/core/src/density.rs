//! Density matrices, entropies and state distances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::HermitianMatrix;
use crate::linalg::{outer, vnorm, CMatrix, C64};
use crate::spectral::{spectral_decompose, SpectralDecomposition, RANK_THRESHOLD};

/// Most negative eigenvalue accepted (and clamped to zero) at construction.
pub const NEGATIVITY_TOL: f64 = 1e-10;
/// Accepted deviation of the trace from one before renormalization.
pub const TRACE_TOL: f64 = 1e-10;
/// Range-inclusion tolerance for the relative entropy support test.
pub const SUPPORT_TOL: f64 = 1e-9;

/// Positive semidefinite unit-trace matrix with its spectral decomposition
/// computed once at construction.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    matrix: HermitianMatrix,
    spectrum: SpectralDecomposition,
}

impl PartialEq for DensityMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.matrix == other.matrix
    }
}

impl DensityMatrix {
    /// Validates positivity and unit trace, clamps negative rounding dust
    /// and renormalizes the trace exactly.
    pub fn new(matrix: HermitianMatrix) -> Result<Self> {
        let spectrum = spectral_decompose(&matrix);
        let min = spectrum.eigenvalues.last().copied().unwrap_or(0.0);
        if matrix.dim() == 0 {
            return Err(Error::InvalidDensity("empty matrix".into()));
        }
        if min < -NEGATIVITY_TOL {
            return Err(Error::InvalidDensity(format!("eigenvalue {min:.3e} is negative")));
        }
        let tr = matrix.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidDensity(format!("trace {tr} differs from one")));
        }
        Ok(Self::finish(matrix, spectrum))
    }

    /// Normalizes a positive semidefinite matrix produced internally (no
    /// trace validation; negative dust is clamped).
    pub fn from_positive(matrix: HermitianMatrix) -> Self {
        let spectrum = spectral_decompose(&matrix);
        Self::finish(matrix, spectrum)
    }

    fn finish(matrix: HermitianMatrix, mut spectrum: SpectralDecomposition) -> Self {
        let negative = spectrum.eigenvalues.iter().any(|&x| x < 0.0);
        let matrix = if negative {
            for x in spectrum.eigenvalues.iter_mut() {
                *x = x.max(0.0);
            }
            spectrum.reconstruct()
        } else {
            matrix
        };
        let tr = matrix.trace();
        if tr == 1.0 {
            return Self { matrix, spectrum };
        }
        for x in spectrum.eigenvalues.iter_mut() {
            *x /= tr;
        }
        Self {
            matrix: matrix.scale(1.0 / tr),
            spectrum,
        }
    }

    /// Pure state `|v⟩⟨v|/⟨v|v⟩`.
    pub fn pure(v: &[C64]) -> Self {
        let n = vnorm(v);
        let w: Vec<C64> = v.iter().map(|z| z / n).collect();
        Self::from_positive(HermitianMatrix::symmetrize(outer(&w, &w)))
    }

    /// `1ₙ/n`
    pub fn maximally_mixed(n: usize) -> Self {
        Self::from_positive(HermitianMatrix::identity(n).scale(1.0 / n as f64))
    }

    /// Convex combination `t·self + (1−t)·other`.
    pub fn mix(&self, t: f64, other: &Self) -> Self {
        let m = self.matrix.scale(t).add(&other.matrix.scale(1.0 - t));
        Self::from_positive(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.matrix
    }

    pub fn as_cmatrix(&self) -> &CMatrix {
        self.matrix.as_cmatrix()
    }

    pub fn spectrum(&self) -> &SpectralDecomposition {
        &self.spectrum
    }

    /// Eigenvalues, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.spectrum.eigenvalues
    }

    /// Number of eigenvalues above [`RANK_THRESHOLD`].
    pub fn rank(&self) -> usize {
        self.eigenvalues().iter().filter(|&&x| x > RANK_THRESHOLD).count()
    }

    /// Projector onto the numerical support.
    pub fn support_projector(&self) -> HermitianMatrix {
        self.spectrum.projector(0..self.rank())
    }

    pub fn expectation(&self, a: &HermitianMatrix) -> f64 {
        crate::hermitian::hs_inner_unchecked(&self.matrix, a)
    }
}

impl Serialize for DensityMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.matrix.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = HermitianMatrix::deserialize(d)?;
        DensityMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// `H(ρ) = −tr ρ log ρ`, with `0·log 0 = 0`.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    let h: f64 = -rho.eigenvalues().iter().map(|&x| xlogx(x)).sum::<f64>();
    h.max(0.0)
}

/// Umegaki relative entropy `tr ρ(log ρ − log σ)`. Returns `+∞` when the
/// support of `ρ` is not contained in the support of `σ`.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> f64 {
    assert_eq!(rho.dim(), sigma.dim(), "relative entropy of mismatched states");
    let n = rho.dim();
    let s = sigma.spectrum();
    let r = sigma.rank();

    if r < n {
        // (1 − P_σ) ρ (1 − P_σ)
        let q = HermitianMatrix::identity(n).sub(&s.projector(0..r));
        let leak = q.as_cmatrix().matmul(rho.as_cmatrix()).matmul(q.as_cmatrix());
        if leak.frobenius_norm() > SUPPORT_TOL {
            return f64::INFINITY;
        }
    }

    let neg_h: f64 = rho.eigenvalues().iter().map(|&x| xlogx(x)).sum();
    let cross: f64 = (0..r)
        .map(|j| {
            let u = s.vector(j);
            rho.matrix().expectation(&u) * s.eigenvalues[j].ln()
        })
        .sum();
    (neg_h - cross).max(0.0)
}

/// `½‖ρ − σ‖₁`
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> f64 {
    0.5 * rho
        .matrix()
        .sub(sigma.matrix())
        .eigenvalues()
        .iter()
        .map(|x| x.abs())
        .sum::<f64>()
}

/// `‖ρ − σ‖_F`
pub fn frobenius_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> f64 {
    rho.matrix().sub(sigma.matrix()).frobenius_norm()
}
