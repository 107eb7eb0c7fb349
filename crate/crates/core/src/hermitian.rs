//! Self-adjoint matrices: observables, log-priors and the carrier of states.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::spectral::{spectral_decompose, SpectralDecomposition};

/// Construction-time asymmetry tolerance, relative to `max(1, max |a_ij|)`.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Dense complex self-adjoint matrix. Entries satisfy `a_ij = conj(a_ji)`
/// exactly (inputs are validated, then symmetrized).
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    /// Validates self-adjointness to [`HERMITIAN_TOL`] and symmetrizes.
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotSquare {
                rows: m.rows(),
                cols: m.cols(),
            });
        }
        let n = m.rows();
        let mut asym = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                asym = asym.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        if asym > HERMITIAN_TOL * m.max_abs().max(1.0) {
            return Err(Error::NotHermitian(asym));
        }
        Ok(Self::symmetrize(m))
    }

    /// Replaces `m` by `(m + m*)/2`. For internally produced matrices that
    /// are Hermitian up to rounding.
    pub fn symmetrize(mut m: CMatrix) -> Self {
        let n = m.rows();
        for i in 0..n {
            m[(i, i)] = C64::new(m[(i, i)].re, 0.0);
            for j in i + 1..n {
                let z = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        Self(m)
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n))
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        Self(CMatrix::from_real_diag(diag))
    }

    /// Builds from separate real and imaginary row-major parts.
    pub fn from_parts(re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<Self> {
        let n = re.len();
        if im.len() != n || re.iter().chain(im).any(|row| row.len() != n) {
            return Err(Error::InvalidInput(
                "re/im must both be square with matching size".into(),
            ));
        }
        if re.iter().chain(im).flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite matrix entry".into()));
        }
        Self::new(CMatrix::from_fn(n, n, |i, j| C64::new(re[i][j], im[i][j])))
    }

    /// Block-diagonal direct sum `self ⊕ other`.
    pub fn direct_sum(&self, other: &HermitianMatrix) -> HermitianMatrix {
        let (a, b) = (self.dim(), other.dim());
        let m = CMatrix::from_fn(a + b, a + b, |i, j| match (i < a, j < a) {
            (true, true) => self.0[(i, j)],
            (false, false) => other.0[(i - a, j - a)],
            _ => C64::new(0.0, 0.0),
        });
        Self(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn as_cmatrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_cmatrix(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.frobenius_norm()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(&self.0 - &other.0)
    }

    /// `self += s * other`
    pub fn add_scaled(&mut self, s: f64, other: &Self) {
        self.0.add_scaled(s, &other.0);
    }

    /// `Σ cᵢ mᵢ` over equally sized matrices; `base` supplies the dimension.
    pub fn linear_combination(base: &Self, coeffs: &[f64], mats: &[Self]) -> Self {
        let mut out = base.clone();
        for (c, m) in coeffs.iter().zip(mats) {
            if *c != 0.0 {
                out.add_scaled(*c, m);
            }
        }
        out
    }

    /// Compression `B* A B` onto the column space of an isometry `B`.
    pub fn compress(&self, basis: &CMatrix) -> Self {
        Self::symmetrize(basis.sandwich(&self.0))
    }

    /// Embedding `B A B*` of a compressed matrix back into the big space.
    pub fn embed(&self, basis: &CMatrix) -> Self {
        Self::symmetrize(basis.matmul(&self.0).matmul(&basis.adjoint()))
    }

    pub fn spectral(&self) -> SpectralDecomposition {
        spectral_decompose(self)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        crate::spectral::jacobi_eigen(&self.0).0
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_norm(&self) -> f64 {
        self.eigenvalues().iter().fold(0.0_f64, |a, x| a.max(x.abs()))
    }

    /// `⟨v|A|v⟩`, real for Hermitian `A`.
    pub fn expectation(&self, v: &[C64]) -> f64 {
        let av = self.0.mul_vec(v);
        crate::linalg::vdot(v, &av).re
    }
}

/// Hilbert–Schmidt inner product `tr(AB)`.
pub fn hs_inner(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(hs_inner_unchecked(a, b))
}

#[inline]
pub(crate) fn hs_inner_unchecked(a: &HermitianMatrix, b: &HermitianMatrix) -> f64 {
    let n = a.dim();
    let (x, y) = (a.as_cmatrix().as_slice(), b.as_cmatrix().as_slice());
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            // tr(AB) = Σ A_ij B_ji, and B_ji = conj(B_ij)
            let p = x[i * n + j];
            let q = y[i * n + j];
            s += p.re * q.re + p.im * q.im;
        }
    }
    s
}

/// JSON wire form `{"dim": n, "re": [[...]], "im": [[...]]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&HermitianMatrix> for MatrixJson {
    fn from(m: &HermitianMatrix) -> Self {
        let n = m.dim();
        let re = (0..n).map(|i| (0..n).map(|j| m.get(i, j).re).collect()).collect();
        let im = (0..n).map(|i| (0..n).map(|j| m.get(i, j).im).collect()).collect();
        Self { dim: n, re, im }
    }
}

impl TryFrom<MatrixJson> for HermitianMatrix {
    type Error = Error;

    fn try_from(j: MatrixJson) -> Result<Self> {
        let m = HermitianMatrix::from_parts(&j.re, &j.im)?;
        if m.dim() != j.dim {
            return Err(Error::DimensionMismatch {
                expected: j.dim,
                got: m.dim(),
            });
        }
        Ok(m)
    }
}

impl Serialize for HermitianMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for HermitianMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = MatrixJson::deserialize(d)?;
        HermitianMatrix::try_from(j).map_err(serde::de::Error::custom)
    }
}
