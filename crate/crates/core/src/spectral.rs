//! Cyclic Jacobi eigensolver for complex Hermitian matrices and the
//! spectral calculus built on it.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::hermitian::HermitianMatrix;
use crate::linalg::{gram_schmidt, CMatrix, C64};

const MAX_SWEEPS: usize = 64;

/// Relative eigenvalue gap below which eigenvectors are treated as one
/// cluster (only the cluster projector is meaningful).
pub const CLUSTER_GAP: f64 = 1e-9;

/// Raw cyclic Jacobi on a Hermitian `a`. Returns eigenvalues in descending
/// order and the matching eigenvectors as columns.
///
/// The sweep order is fixed (row-major over the strict upper triangle), so
/// identical input gives bit-identical output on the same platform.
pub fn jacobi_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = a.rows();
    debug_assert!(a.is_square());
    let mut m = a.clone();
    let mut v = CMatrix::identity(n);
    let scale = m.frobenius_norm();
    if n <= 1 || scale == 0.0 {
        let vals = (0..n).map(|i| m[(i, i)].re).collect();
        return (vals, v);
    }

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-17 * scale {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut m, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].re.total_cmp(&m[(i, i)].re).then(i.cmp(&j)));
    let vals: Vec<f64> = order.iter().map(|&i| m[(i, i)].re).collect();
    let vecs = CMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (vals, vecs)
}

/// One complex Jacobi rotation annihilating `m[p][q]`.
///
/// The off-diagonal element is first made real by rephasing column/row `q`,
/// then a real rotation is applied.
fn rotate(m: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = m[(p, q)];
    let abs = apq.norm();
    if abs <= f64::MIN_POSITIVE {
        return;
    }
    let n = m.rows();
    let ph = (apq / abs).conj();
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;

    let theta = (aqq - app) / (2.0 * abs);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = m[(k, p)];
        let akq = m[(k, q)] * ph;
        let nkp = akp * c - akq * s;
        let nkq = akp * s + akq * c;
        m[(k, p)] = nkp;
        m[(k, q)] = nkq;
        m[(p, k)] = nkp.conj();
        m[(q, k)] = nkq.conj();
    }
    m[(p, p)] = C64::new(app - t * abs, 0.0);
    m[(q, q)] = C64::new(aqq + t * abs, 0.0);
    m[(p, q)] = C64::new(0.0, 0.0);
    m[(q, p)] = C64::new(0.0, 0.0);

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)] * ph;
        v[(k, p)] = vkp * c - vkq * s;
        v[(k, q)] = vkp * s + vkq * c;
    }
}

/// Eigen-decomposition `A = U Λ U*` of a Hermitian matrix, eigenvalues
/// descending.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns.
    pub eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Spectral scale used for relative cluster thresholds.
    pub fn scale(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
    }

    pub fn vector(&self, j: usize) -> Vec<C64> {
        self.eigenvectors.column(j)
    }

    /// Index ranges of eigenvalue clusters. Consecutive (sorted) eigenvalues
    /// closer than `rel_gap · max(1, ‖A‖)` are merged.
    pub fn clusters(&self, rel_gap: f64) -> Vec<Range<usize>> {
        let tol = rel_gap * self.scale().max(1.0);
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.dim() {
            if i == self.dim() || self.eigenvalues[i - 1] - self.eigenvalues[i] >= tol {
                out.push(start..i);
                start = i;
            }
        }
        out
    }

    /// Range of the eigenvectors belonging to the largest-eigenvalue cluster.
    pub fn top_cluster(&self, rel_gap: f64) -> Range<usize> {
        self.clusters(rel_gap)
            .into_iter()
            .next()
            .unwrap_or(0..0)
    }

    /// Orthogonal projector onto the span of the given eigenvectors.
    pub fn projector(&self, idx: Range<usize>) -> HermitianMatrix {
        let n = self.dim();
        let mut p = CMatrix::zeros(n, n);
        for j in idx {
            let v = self.vector(j);
            for r in 0..n {
                for c in 0..n {
                    p[(r, c)] += v[r] * v[c].conj();
                }
            }
        }
        HermitianMatrix::symmetrize(p)
    }

    /// `U f(Λ) U*` for real eigenvalue weights.
    pub fn compose(&self, values: &[f64]) -> HermitianMatrix {
        let n = self.dim();
        let u = &self.eigenvectors;
        let mut out = CMatrix::zeros(n, n);
        for (j, &w) in values.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for r in 0..n {
                let ur = u[(r, j)] * w;
                for c in 0..n {
                    out[(r, c)] += ur * u[(c, j)].conj();
                }
            }
        }
        HermitianMatrix::symmetrize(out)
    }

    pub fn reconstruct(&self) -> HermitianMatrix {
        self.compose(&self.eigenvalues)
    }
}

/// Spectral decomposition with descending eigenvalues. Eigenvectors inside
/// a cluster (relative gap below [`CLUSTER_GAP`]) are re-orthonormalized by
/// Gram–Schmidt in column order.
pub fn spectral_decompose(a: &HermitianMatrix) -> SpectralDecomposition {
    let (vals, vecs) = jacobi_eigen(a.as_cmatrix());
    let mut dec = SpectralDecomposition {
        eigenvalues: vals,
        eigenvectors: vecs,
    };
    for cl in dec.clusters(CLUSTER_GAP) {
        if cl.len() < 2 {
            continue;
        }
        let mut cols: Vec<Vec<C64>> = cl.clone().map(|j| dec.vector(j)).collect();
        gram_schmidt(&mut cols);
        for (j, col) in cl.zip(cols) {
            dec.eigenvectors.set_column(j, &col);
        }
    }
    dec
}

/// Applies a real scalar function through the spectral decomposition.
/// Fails with [`Error::Domain`] if `f` is not finite at some eigenvalue.
pub fn matrix_function(a: &HermitianMatrix, f: impl Fn(f64) -> f64) -> Result<HermitianMatrix> {
    let dec = spectral_decompose(a);
    let mut vals = Vec::with_capacity(dec.dim());
    for &x in &dec.eigenvalues {
        let y = f(x);
        if !y.is_finite() {
            return Err(Error::Domain(x));
        }
        vals.push(y);
    }
    Ok(dec.compose(&vals))
}

/// Eigenvalues at or below this are treated as zero (rank and support tests).
pub const RANK_THRESHOLD: f64 = 1e-11;

/// Matrix exponential of a Hermitian matrix.
pub fn matrix_exp(a: &HermitianMatrix) -> HermitianMatrix {
    let dec = spectral_decompose(a);
    let vals: Vec<f64> = dec.eigenvalues.iter().map(|x| x.exp()).collect();
    dec.compose(&vals)
}

/// Matrix logarithm; every eigenvalue must exceed [`RANK_THRESHOLD`].
pub fn matrix_log(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    matrix_function(a, |x| if x > RANK_THRESHOLD { x.ln() } else { f64::NAN })
}
