//! The moment map, the body of expected values as a support-function
//! oracle, point classification, boundary sampling, least-squares
//! projection and measurement simulation.

use std::f64::consts::PI;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::family::GibbsKernel;
use crate::hermitian::{hs_inner_unchecked, HermitianMatrix, MatrixJson};
use crate::linalg::{self, CMatrix, C64};
use crate::random;
use crate::spectral::{jacobi_eigen, spectral_decompose, CLUSTER_GAP};

/// Default absolute tolerance of [`ExpectedValueBody::classify`].
pub const CLASSIFY_TOL: f64 = 1e-8;
/// Default number of grid directions for two observables.
pub const PLANAR_GRID: usize = 720;
/// Default number of quasi-random grid directions for three or more.
pub const SPATIAL_GRID: usize = 10_000;
/// Smallest accepted grid for three or more observables.
pub const MIN_SPATIAL_GRID: usize = 1_000;
/// Linear independence threshold for `{1, a₁, …, a_k}`, relative to the
/// squared norm of each observable.
pub const INDEPENDENCE_TOL: f64 = 1e-10;
/// Absolute floor of the non-constant part of an independent observable.
pub const INDEPENDENCE_FLOOR: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Observables and expected values
// ---------------------------------------------------------------------------

/// Ordered observables `a₁, …, a_k` on `ℂⁿ` together with the prior
/// exponent `θ` (prior state `e^θ / tr e^θ`).
#[derive(Clone, Debug, PartialEq)]
pub struct ObservableSet {
    dim: usize,
    observables: Vec<HermitianMatrix>,
    theta: HermitianMatrix,
    independent: bool,
}

impl ObservableSet {
    pub fn new(observables: Vec<HermitianMatrix>, theta: HermitianMatrix) -> Result<Self> {
        let dim = theta.dim();
        if dim == 0 {
            return Err(Error::InvalidInput("observables act on an empty space".into()));
        }
        for a in &observables {
            if a.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: a.dim(),
                });
            }
        }
        let independent = affine_basis(dim, &observables).len() == observables.len();
        Ok(Self {
            dim,
            observables,
            theta,
            independent,
        })
    }

    /// Observables with the uniform prior `θ = 0`.
    pub fn uniform(observables: Vec<HermitianMatrix>) -> Result<Self> {
        let dim = observables
            .first()
            .map(HermitianMatrix::dim)
            .ok_or_else(|| Error::InvalidInput("at least one observable is required".into()))?;
        Self::new(observables, HermitianMatrix::zeros(dim))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of observables `k`.
    #[inline]
    pub fn len(&self) -> usize {
        self.observables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observables.is_empty()
    }

    pub fn observables(&self) -> &[HermitianMatrix] {
        &self.observables
    }

    pub fn theta(&self) -> &HermitianMatrix {
        &self.theta
    }

    /// Whether `{1ₙ, a₁, …, a_k}` is linearly independent.
    pub fn is_independent(&self) -> bool {
        self.independent
    }

    /// `Σ cᵢ aᵢ`
    pub fn combination(&self, coeffs: &[f64]) -> HermitianMatrix {
        HermitianMatrix::linear_combination(&HermitianMatrix::zeros(self.dim), coeffs, &self.observables)
    }

    /// `θ + Σ λᵢ aᵢ`
    pub fn exponent(&self, lambda: &[f64]) -> HermitianMatrix {
        HermitianMatrix::linear_combination(&self.theta, lambda, &self.observables)
    }

    /// Prior state `e^θ / tr e^θ`.
    pub fn prior(&self) -> DensityMatrix {
        GibbsKernel::new(&self.theta).state()
    }

    /// Observables and prior exponent compressed by an isometry `B`
    /// (`B* aᵢ B`, `B* θ B`).
    pub fn compress(&self, basis: &CMatrix) -> ObservableSet {
        let observables = self.observables.iter().map(|a| a.compress(basis)).collect();
        ObservableSet::new(observables, self.theta.compress(basis))
            .expect("compression preserves dimensions")
    }

    /// Sub-family with the given observable indices.
    pub fn select(&self, indices: &[usize]) -> ObservableSet {
        let observables = indices.iter().map(|&i| self.observables[i].clone()).collect();
        ObservableSet::new(observables, self.theta.clone()).expect("same dimension")
    }

    /// Same observables with another prior exponent.
    pub fn with_theta(&self, theta: HermitianMatrix) -> Result<Self> {
        Self::new(self.observables.clone(), theta)
    }

    /// Spectral norms `‖aᵢ‖`.
    pub fn operator_norms(&self) -> Vec<f64> {
        self.observables.iter().map(HermitianMatrix::spectral_norm).collect()
    }

    pub fn to_config(&self) -> ObservableConfig {
        ObservableConfig {
            dim: self.dim,
            observables: self.observables.iter().map(MatrixJson::from).collect(),
            theta: MatrixJson::from(&self.theta),
        }
    }

    pub fn from_config(cfg: ObservableConfig) -> Result<Self> {
        let observables = cfg
            .observables
            .into_iter()
            .map(HermitianMatrix::try_from)
            .collect::<Result<Vec<_>>>()?;
        let theta = HermitianMatrix::try_from(cfg.theta)?;
        let set = Self::new(observables, theta)?;
        if set.dim != cfg.dim {
            return Err(Error::DimensionMismatch {
                expected: cfg.dim,
                got: set.dim,
            });
        }
        Ok(set)
    }
}

/// Config-file form `{"dim": n, "observables": [matrix…], "theta": matrix}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ObservableConfig {
    pub dim: usize,
    pub observables: Vec<MatrixJson>,
    pub theta: MatrixJson,
}

/// Indices of a maximal subset of `observables` that is linearly
/// independent together with `1ₙ`, chosen greedily in order.
pub(crate) fn affine_basis(dim: usize, observables: &[HermitianMatrix]) -> Vec<usize> {
    affine_decomposition(dim, observables).0
}

/// Greedy Gram–Schmidt of `{1ₙ, a₁, …}` in the trace inner product.
/// Returns the kept indices, for every observable its coefficients
/// `(c₀, c_S)` in `aⱼ ≈ c₀·1 + Σ_{i∈S} cᵢ aᵢ` (exact for kept ones), and
/// the Hilbert–Schmidt norm of the remainder.
pub(crate) fn affine_decomposition(
    dim: usize,
    observables: &[HermitianMatrix],
) -> (Vec<usize>, Vec<(f64, Vec<f64>)>, Vec<f64>) {
    let id = HermitianMatrix::identity(dim);
    let mut kept: Vec<usize> = Vec::new();
    // generators: identity then kept observables
    let mut gens: Vec<&HermitianMatrix> = vec![&id];
    let mut gram: Vec<Vec<f64>> = vec![vec![dim as f64]];
    let mut expansions = Vec::with_capacity(observables.len());
    let mut remainders = Vec::with_capacity(observables.len());

    for (j, a) in observables.iter().enumerate() {
        let rhs: Vec<f64> = gens.iter().map(|g| hs_inner_unchecked(g, a)).collect();
        let coef = linalg::solve_linear(&gram, &rhs).unwrap_or_else(|| vec![0.0; gens.len()]);
        let norm2 = hs_inner_unchecked(a, a);
        let resid2 = (norm2 - linalg::dot(&coef, &rhs)).max(0.0);
        let independent = resid2 > INDEPENDENCE_TOL * norm2 && resid2 > INDEPENDENCE_FLOOR * INDEPENDENCE_FLOOR;
        if independent {
            let pos = kept.len();
            kept.push(j);
            gens.push(a);
            for (row, g) in gram.iter_mut().zip(&rhs) {
                row.push(*g);
            }
            let mut last = rhs.clone();
            last.push(norm2);
            gram.push(last);
            let mut c = vec![0.0; pos];
            c.push(1.0);
            expansions.push((0.0, c));
            remainders.push(0.0);
        } else {
            expansions.push((coef[0], coef[1..].to_vec()));
            remainders.push(resid2.sqrt());
        }
    }
    // pad coefficient vectors to the final subset size
    for e in expansions.iter_mut() {
        e.1.resize(kept.len(), 0.0);
    }
    (kept, expansions, remainders)
}

/// A point of `ℝᵏ`, typically an expected value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExpectedValue {
    pub coords: Vec<f64>,
}

impl ExpectedValue {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn distance(&self, other: &ExpectedValue) -> f64 {
        linalg::norm(&linalg::sub(&self.coords, &other.coords))
    }
}

impl From<Vec<f64>> for ExpectedValue {
    fn from(coords: Vec<f64>) -> Self {
        Self { coords }
    }
}

impl std::ops::Index<usize> for ExpectedValue {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.coords[i]
    }
}

/// `E(ρ) = (tr ρa₁, …, tr ρa_k)`
pub fn moment_map(obs: &ObservableSet, rho: &DensityMatrix) -> Result<ExpectedValue> {
    if rho.dim() != obs.dim() {
        return Err(Error::DimensionMismatch {
            expected: obs.dim(),
            got: rho.dim(),
        });
    }
    Ok(moments_of(obs, rho.matrix()))
}

pub(crate) fn moments_of(obs: &ObservableSet, m: &HermitianMatrix) -> ExpectedValue {
    ExpectedValue::new(obs.observables().iter().map(|a| hs_inner_unchecked(m, a)).collect())
}

fn moments_of_vector(obs: &ObservableSet, v: &[C64]) -> Vec<f64> {
    obs.observables().iter().map(|a| a.expectation(v)).collect()
}

// ---------------------------------------------------------------------------
// The body of expected values
// ---------------------------------------------------------------------------

/// Exposed face of the state space in direction `u`: states supported on
/// the top eigenspace of `u·a`.
#[derive(Clone, Debug)]
pub struct ExposedFace {
    pub direction: Vec<f64>,
    /// `h(u) = λ_max(u·a)`
    pub support: f64,
    /// Orthonormal basis of the top eigenspace as columns (n × r).
    pub basis: CMatrix,
}

impl ExposedFace {
    pub fn rank(&self) -> usize {
        self.basis.cols()
    }

    pub fn projector(&self) -> HermitianMatrix {
        HermitianMatrix::symmetrize(self.basis.matmul(&self.basis.adjoint()))
    }

    /// The tracial state `P / tr P` of the face.
    pub fn center(&self) -> DensityMatrix {
        DensityMatrix::from_positive(self.projector())
    }
}

/// Top eigenspace of `u·a`.
pub fn exposed_face(obs: &ObservableSet, u: &[f64]) -> ExposedFace {
    exposed_face_with(obs, u, CLUSTER_GAP)
}

/// Top eigenspace of `u·a`, eigenvalues within `rel_gap` of the largest
/// counted as equal.
pub(crate) fn exposed_face_with(obs: &ObservableSet, u: &[f64], rel_gap: f64) -> ExposedFace {
    let dec = spectral_decompose(&obs.combination(u));
    let top = dec.top_cluster(rel_gap);
    let cols: Vec<Vec<C64>> = top.map(|j| dec.vector(j)).collect();
    ExposedFace {
        direction: u.to_vec(),
        support: dec.eigenvalues[0],
        basis: CMatrix::from_columns(&cols),
    }
}

fn lambda_max(m: &HermitianMatrix) -> (f64, Vec<C64>) {
    let (vals, vecs) = jacobi_eigen(m.as_cmatrix());
    (vals[0], vecs.column(0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PointStatus {
    Interior,
    Boundary,
    Outside,
}

/// Result of [`ExpectedValueBody::classify`].
#[derive(Clone, Debug)]
pub struct BoundaryClassification {
    pub status: PointStatus,
    /// Smallest support gap `h(u) − ⟨u, m⟩` found.
    pub gap: f64,
    /// The direction attaining `gap`.
    pub supporting_direction: Option<Vec<f64>>,
    /// Face of `u·a` for BOUNDARY points.
    pub face: Option<ExposedFace>,
}

impl BoundaryClassification {
    pub fn face_projector(&self) -> Option<HermitianMatrix> {
        self.face.as_ref().map(ExposedFace::projector)
    }
}

/// The body `𝕄 = E(𝒮)` represented through its support function
/// `h(u) = λ_max(Σ uᵢ aᵢ)` and a cached table over a direction grid.
#[derive(Clone, Debug)]
pub struct ExpectedValueBody {
    obs: ObservableSet,
    directions: Vec<Vec<f64>>,
    support: Vec<f64>,
    lipschitz: f64,
}

impl ExpectedValueBody {
    /// Body with the default grid (exact `±1` for `k = 1`, 720 angles for
    /// `k = 2`, 10,000 quasi-random directions otherwise).
    pub fn new(obs: &ObservableSet) -> Self {
        let n = match obs.len() {
            0 | 1 => 2,
            2 => PLANAR_GRID,
            _ => SPATIAL_GRID,
        };
        Self::with_grid(obs, n).expect("default grid is fine enough")
    }

    pub fn with_grid(obs: &ObservableSet, num_directions: usize) -> Result<Self> {
        let k = obs.len();
        if k > 2 && num_directions < MIN_SPATIAL_GRID {
            return Err(Error::GridTooCoarse {
                k,
                got: num_directions,
                min: MIN_SPATIAL_GRID,
            });
        }
        let directions = match k {
            0 => Vec::new(),
            1 => vec![vec![1.0], vec![-1.0]],
            2 => (0..num_directions.max(8))
                .map(|j| {
                    let phi = 2.0 * PI * j as f64 / num_directions.max(8) as f64;
                    vec![phi.cos(), phi.sin()]
                })
                .collect(),
            _ => quasi_random_directions(k, num_directions),
        };
        let support = directions
            .iter()
            .map(|u| lambda_max(&obs.combination(u)).0)
            .collect();
        let lipschitz = obs
            .operator_norms()
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt();
        Ok(Self {
            obs: obs.clone(),
            directions,
            support,
            lipschitz,
        })
    }

    pub fn observables(&self) -> &ObservableSet {
        &self.obs
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    /// Cached `h(u)` for every grid direction.
    pub fn cached_support(&self) -> &[f64] {
        &self.support
    }

    /// `h(u) = λ_max(u·a)`.
    pub fn support_function(&self, u: &[f64]) -> f64 {
        lambda_max(&self.obs.combination(u)).0
    }

    fn gap(&self, u: &[f64], m: &[f64]) -> f64 {
        self.support_function(u) - linalg::dot(u, m)
    }

    /// Classifies `m` as interior, boundary or outside of `𝕄`.
    ///
    /// OUTSIDE is certified by an explicit separating direction. For
    /// `k ≥ 3` INTERIOR is relative to the grid plus local refinement.
    pub fn classify(&self, m: &[f64], tol: f64) -> Result<BoundaryClassification> {
        let k = self.obs.len();
        if m.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: m.len(),
            });
        }
        if k == 0 {
            return Ok(BoundaryClassification {
                status: PointStatus::Interior,
                gap: f64::INFINITY,
                supporting_direction: None,
                face: None,
            });
        }
        let gaps: Vec<f64> = self
            .directions
            .iter()
            .zip(&self.support)
            .map(|(u, h)| h - linalg::dot(u, m))
            .collect();
        let (mut best_u, mut best) = argmin(&self.directions, &gaps);

        if k == 2 && best > tol {
            // grid values are within L·|Δu| of the true minimum
            let spacing = 2.0 * (PI / self.directions.len() as f64).sin();
            let lip = self.lipschitz + linalg::norm(m);
            if best > lip * spacing + tol {
                return Ok(self.finish(PointStatus::Interior, best, best_u, tol));
            }
        }

        if k >= 2 {
            let candidates = grid_minima(k, &gaps, 3);
            for j in candidates {
                let (u, g) = if k == 2 {
                    self.refine_planar(j, m)
                } else {
                    self.refine_smoothed(&self.directions[j], m)
                };
                if g < best {
                    best = g;
                    best_u = u;
                }
            }
        }

        let status = if best < -tol {
            PointStatus::Outside
        } else if best <= tol {
            PointStatus::Boundary
        } else {
            PointStatus::Interior
        };
        Ok(self.finish(status, best, best_u, tol))
    }

    fn finish(&self, status: PointStatus, gap: f64, u: Vec<f64>, _tol: f64) -> BoundaryClassification {
        let face = (status == PointStatus::Boundary).then(|| exposed_face(&self.obs, &u));
        BoundaryClassification {
            status,
            gap,
            supporting_direction: Some(u),
            face,
        }
    }

    /// Minimizes the gap over angles near grid index `j` by bisection on
    /// its derivative `⟨x(φ) − m, u⊥(φ)⟩`, with golden-section fallback.
    fn refine_planar(&self, j: usize, m: &[f64]) -> (Vec<f64>, f64) {
        let n = self.directions.len() as f64;
        let step = 2.0 * PI / n;
        let phi0 = 2.0 * PI * j as f64 / n;
        let dir = |phi: f64| vec![phi.cos(), phi.sin()];
        let deriv = |phi: f64| {
            let u = dir(phi);
            let (_, v) = lambda_max(&self.obs.combination(&u));
            let x = moments_of_vector(&self.obs, &v);
            -(x[0] - m[0]) * phi.sin() + (x[1] - m[1]) * phi.cos()
        };
        let (mut lo, mut hi) = (phi0 - step, phi0 + step);
        let phi = if deriv(lo) < 0.0 && deriv(hi) > 0.0 {
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if deriv(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        } else {
            golden_section(|p| self.gap(&dir(p), m), lo, hi, 200)
        };
        let u = dir(phi);
        let g = self.gap(&u, m);
        (u, g)
    }

    /// For `k ≥ 3`: minimizes the convex function `h(u) − ⟨u, m⟩` on the
    /// affine plane `⟨u, u₀⟩ = 1`, with `h` replaced by the smoothed
    /// `β⁻¹ log tr e^{β u·a}` for increasing `β`.
    fn refine_smoothed(&self, u0: &[f64], m: &[f64]) -> (Vec<f64>, f64) {
        let k = u0.len();
        let tangent = orthonormal_complement(u0);
        let point = |z: &[f64]| -> Vec<f64> {
            let mut u = u0.to_vec();
            for (t, zi) in tangent.iter().zip(z) {
                for (a, b) in u.iter_mut().zip(t) {
                    *a += zi * b;
                }
            }
            u
        };
        let mut z = vec![0.0; k - 1];
        let mut beta = 10.0;
        while beta <= 1e10 {
            let f = |u: &[f64]| {
                let kern = GibbsKernel::new(&self.obs.combination(&u.iter().map(|x| x * beta).collect::<Vec<_>>()));
                kern.log_partition() / beta - linalg::dot(u, m)
            };
            for _ in 0..60 {
                let u = point(&z);
                let scaled: Vec<f64> = u.iter().map(|x| x * beta).collect();
                let kern = GibbsKernel::new(&self.obs.combination(&scaled));
                let e = kern.moments(self.obs.observables());
                let cov = kern.hessian(self.obs.observables());
                let r = linalg::sub(&e, m);
                let grad: Vec<f64> = tangent.iter().map(|t| linalg::dot(t, &r)).collect();
                let gn = linalg::norm(&grad);
                if gn < 1e-14 {
                    break;
                }
                let hess: Vec<Vec<f64>> = tangent
                    .iter()
                    .map(|ti| {
                        tangent
                            .iter()
                            .map(|tj| {
                                let mut s = 0.0;
                                for a in 0..k {
                                    for b in 0..k {
                                        s += ti[a] * cov[a][b] * tj[b];
                                    }
                                }
                                beta * s
                            })
                            .collect()
                    })
                    .collect();
                let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
                let mut dz = linalg::solve_linear(&hess, &neg)
                    .filter(|d| linalg::dot(d, &grad) < 0.0)
                    .unwrap_or(neg.clone());
                let dn = linalg::norm(&dz);
                if dn > 1.0 {
                    dz.iter_mut().for_each(|x| *x /= dn);
                }
                let f0 = kern.log_partition() / beta - linalg::dot(&u, m);
                let slope = linalg::dot(&grad, &dz);
                let mut t = 1.0;
                let mut accepted = false;
                for _ in 0..50 {
                    let cand = linalg::axpy(&z, t, &dz);
                    if f(&point(&cand)) <= f0 + 1e-4 * t * slope {
                        z = cand;
                        accepted = true;
                        break;
                    }
                    t *= 0.5;
                }
                if !accepted || t * linalg::norm(&dz) < 1e-16 {
                    break;
                }
                if linalg::norm(&z) > 1e3 {
                    break;
                }
            }
            beta *= 10.0;
        }
        let u = point(&z);
        let nrm = linalg::norm(&u);
        let u: Vec<f64> = u.iter().map(|x| x / nrm).collect();
        let g = self.gap(&u, m);
        (u, g)
    }
}

fn argmin(dirs: &[Vec<f64>], gaps: &[f64]) -> (Vec<f64>, f64) {
    let mut j = 0;
    for (i, g) in gaps.iter().enumerate() {
        if *g < gaps[j] {
            j = i;
        }
    }
    (dirs[j].clone(), gaps[j])
}

/// Up to `count` candidate grid indices: planar local minima (cyclic), or
/// the smallest values for higher dimensions.
fn grid_minima(k: usize, gaps: &[f64], count: usize) -> Vec<usize> {
    let n = gaps.len();
    let mut idx: Vec<usize> = if k == 2 {
        (0..n)
            .filter(|&j| {
                let prev = gaps[(j + n - 1) % n];
                let next = gaps[(j + 1) % n];
                gaps[j] <= prev && gaps[j] <= next
            })
            .collect()
    } else {
        (0..n).collect()
    };
    idx.sort_by(|&a, &b| gaps[a].total_cmp(&gaps[b]).then(a.cmp(&b)));
    idx.truncate(count);
    idx
}

pub(crate) fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if b - a <= f64::EPSILON * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        c
    } else {
        d
    }
}

/// Orthonormal basis of `u⊥` in `ℝᵏ` (Gram–Schmidt on the standard basis).
fn orthonormal_complement(u: &[f64]) -> Vec<Vec<f64>> {
    let k = u.len();
    let mut basis: Vec<Vec<f64>> = vec![u.to_vec()];
    for i in 0..k {
        let mut v = vec![0.0; k];
        v[i] = 1.0;
        for b in &basis {
            let c = linalg::dot(b, &v);
            v = linalg::axpy(&v, -c, b);
        }
        let n = linalg::norm(&v);
        if n > 1e-8 {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
        if basis.len() == k {
            break;
        }
    }
    basis.remove(0);
    basis
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Halton points mapped to Gaussian vectors by Box–Muller and normalized.
fn quasi_random_directions(k: usize, count: usize) -> Vec<Vec<f64>> {
    let pairs = k.div_ceil(2);
    assert!(2 * pairs <= PRIMES.len(), "too many observables for the direction grid");
    let mut out = Vec::with_capacity(count);
    let mut i = 1u64;
    while out.len() < count {
        let mut v = Vec::with_capacity(2 * pairs);
        for p in 0..pairs {
            let u1 = radical_inverse(i, PRIMES[2 * p]).max(1e-300);
            let u2 = radical_inverse(i, PRIMES[2 * p + 1]);
            let r = (-2.0 * u1.ln()).sqrt();
            v.push(r * (2.0 * PI * u2).cos());
            v.push(r * (2.0 * PI * u2).sin());
        }
        v.truncate(k);
        i += 1;
        let n = linalg::norm(&v);
        if n > 1e-9 {
            out.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    out
}

pub fn support_function(body: &ExpectedValueBody, u: &[f64]) -> f64 {
    body.support_function(u)
}

pub fn classify_point(
    body: &ExpectedValueBody,
    m: &ExpectedValue,
    tol: f64,
) -> Result<BoundaryClassification> {
    body.classify(&m.coords, tol)
}

// ---------------------------------------------------------------------------
// Planar boundary sampling
// ---------------------------------------------------------------------------

/// One sample of the planar boundary.
#[derive(Clone, Debug)]
pub struct BoundaryPoint {
    /// Angle of the outer normal `u = (cos φ, sin φ)`.
    pub phi: f64,
    pub m: ExpectedValue,
    /// Dimension of the exposed face of `𝕄` at `φ` (0 point, 1 segment).
    pub face_dim: usize,
    /// Face of the state space whose image contains `m`.
    pub face: ExposedFace,
}

/// Exposed points of `𝕄` for normal angles on a uniform grid of
/// `num_points` angles, in counter-clockwise order.
///
/// Angles where the top eigenvalue is degenerate are located between grid
/// angles and added. Where `𝕄` has a segment face both endpoints are
/// emitted.
pub fn boundary_curve(body: &ExpectedValueBody, num_points: usize) -> Result<Vec<BoundaryPoint>> {
    let obs = body.observables();
    if obs.len() != 2 {
        return Err(Error::NotPlanar(obs.len()));
    }
    if num_points < 8 {
        return Err(Error::InvalidInput("boundary curve needs at least 8 points".into()));
    }
    let n = num_points;
    let grid: Vec<f64> = (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect();
    let top_gap = |phi: f64| {
        let (vals, _) = jacobi_eigen(obs.combination(&[phi.cos(), phi.sin()]).as_cmatrix());
        if vals.len() < 2 {
            f64::INFINITY
        } else {
            vals[0] - vals[1]
        }
    };
    let gaps: Vec<f64> = grid.iter().map(|&p| top_gap(p)).collect();
    let scale = body.lipschitz.max(1.0);

    let mut angles = grid.clone();
    for j in 0..n {
        let (prev, next) = (gaps[(j + n - 1) % n], gaps[(j + 1) % n]);
        if gaps[j] <= prev && gaps[j] <= next && gaps[j] > EXPOSED_GAP * scale {
            let step = 2.0 * PI / n as f64;
            let phi = golden_section(top_gap, grid[j] - step, grid[j] + step, 200);
            if top_gap(phi) <= CLUSTER_GAP * scale {
                angles.push(phi.rem_euclid(2.0 * PI));
            }
        }
    }
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-13);

    let mut out = Vec::with_capacity(angles.len() + 8);
    for phi in angles {
        out.extend(exposed_points(obs, phi));
    }
    Ok(out)
}

/// Relative eigenvalue gap below which the top eigenvalue of `u·a` counts
/// as degenerate when sampling the boundary at exact angles.
pub const EXPOSED_GAP: f64 = 1e-13;

/// Exposed point(s) of `𝕄` for normal angle `φ`, ordered counter-clockwise.
pub fn exposed_points(obs: &ObservableSet, phi: f64) -> Vec<BoundaryPoint> {
    let u = [phi.cos(), phi.sin()];
    let face = exposed_face_with(obs, &u, EXPOSED_GAP);
    if face.rank() == 1 {
        let v = face.basis.column(0);
        let m = ExpectedValue::new(moments_of_vector(obs, &v));
        return vec![BoundaryPoint { phi, m, face_dim: 0, face }];
    }
    // extremes of the tangent direction u⊥ over the face
    let w = obs.combination(&[-phi.sin(), phi.cos()]).compress(&face.basis);
    let end = |sign: f64| -> (ExpectedValue, ExposedFace) {
        let dec = spectral_decompose(&w.scale(sign));
        let cl = dec.top_cluster(CLUSTER_GAP);
        let cols: Vec<Vec<C64>> = cl
            .map(|j| face.basis.mul_vec(&dec.vector(j)))
            .collect();
        let sub = ExposedFace {
            direction: u.to_vec(),
            support: face.support,
            basis: CMatrix::from_columns(&cols),
        };
        let m = moments_of(obs, sub.center().matrix());
        (m, sub)
    };
    let (m_lo, f_lo) = end(-1.0);
    let (m_hi, f_hi) = end(1.0);
    if m_lo.distance(&m_hi) <= 1e-7 * obs.operator_norms().iter().fold(1.0, |a: f64, b| a.max(*b)) {
        let m = moments_of(obs, face.center().matrix());
        return vec![BoundaryPoint { phi, m, face_dim: 0, face }];
    }
    vec![
        BoundaryPoint {
            phi,
            m: m_lo,
            face_dim: 1,
            face: f_lo,
        },
        BoundaryPoint {
            phi,
            m: m_hi,
            face_dim: 1,
            face: f_hi,
        },
    ]
}

// ---------------------------------------------------------------------------
// Least-squares projection
// ---------------------------------------------------------------------------

/// Iteration cap of the projection solver.
pub const PROJECTION_MAX_ITER: usize = 5_000;
/// Frank–Wolfe gap at which the projection stops.
pub const PROJECTION_TOL: f64 = 1e-9;

/// Euclidean nearest point of `𝕄` to `y` (identity on `𝕄`).
///
/// Wolfe's minimum-norm-point method over exposed points, i.e. fully
/// corrective Frank–Wolfe whose linear subproblem is one eigenvector.
pub fn project_to_body(body: &ExpectedValueBody, y: &[f64]) -> Result<ExpectedValue> {
    if y.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite point".into()));
    }
    let cls = body.classify(y, CLASSIFY_TOL)?;
    if cls.status != PointStatus::Outside {
        return Ok(ExpectedValue::new(y.to_vec()));
    }
    let obs = body.observables();
    // atoms are exposed points shifted by −y
    let atom = |dir: &[f64]| -> Vec<f64> {
        let (_, v) = lambda_max(&obs.combination(dir));
        linalg::sub(&moments_of_vector(obs, &v), y)
    };
    let u0 = cls.supporting_direction.clone().unwrap_or_else(|| vec![1.0; y.len()]);
    let mut atoms: Vec<Vec<f64>> = vec![atom(&u0)];
    let mut w: Vec<f64> = vec![1.0];
    let mut x = atoms[0].clone();

    for it in 0..PROJECTION_MAX_ITER {
        let xn = linalg::norm(&x);
        if xn == 0.0 {
            break;
        }
        let dir: Vec<f64> = x.iter().map(|v| -v / xn).collect();
        let p = atom(&dir);
        let fw_gap = linalg::dot(&x, &x) - linalg::dot(&x, &p);
        if fw_gap <= PROJECTION_TOL {
            return Ok(ExpectedValue::new(linalg::axpy(y, 1.0, &x)));
        }
        if it + 1 == PROJECTION_MAX_ITER {
            return Err(Error::ConvergenceFailure {
                what: "projection onto the body",
                iterations: it + 1,
                residual: fw_gap,
            });
        }
        atoms.push(p);
        w.push(0.0);
        // minor cycle: affine minimizer, step back into the hull
        loop {
            let alpha = match affine_min_norm(&atoms) {
                Some(a) => a,
                None => {
                    // affinely dependent corral: drop the lightest old atom
                    let j = (0..atoms.len() - 1)
                        .min_by(|&a, &b| w[a].total_cmp(&w[b]))
                        .unwrap_or(0);
                    atoms.remove(j);
                    w.remove(j);
                    continue;
                }
            };
            if alpha.iter().all(|&a| a > 1e-14) {
                w = alpha;
                break;
            }
            let mut theta = 1.0_f64;
            for (a, b) in alpha.iter().zip(&w) {
                if *a <= 1e-14 {
                    theta = theta.min(b / (b - a));
                }
            }
            for (wi, a) in w.iter_mut().zip(&alpha) {
                *wi = theta * a + (1.0 - theta) * *wi;
            }
            let mut j = 0;
            while j < w.len() {
                if w[j] <= 1e-14 {
                    w.remove(j);
                    atoms.remove(j);
                } else {
                    j += 1;
                }
            }
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
            if atoms.len() <= 1 {
                break;
            }
        }
        x = vec![0.0; y.len()];
        for (a, wi) in atoms.iter().zip(&w) {
            x = linalg::axpy(&x, *wi, a);
        }
    }
    unreachable!("loop returns on its last iteration")
}

/// Minimizer of `‖Σ αᵢ pᵢ‖` subject to `Σ αᵢ = 1`.
fn affine_min_norm(points: &[Vec<f64>]) -> Option<Vec<f64>> {
    let r = points.len();
    let mut a = vec![vec![0.0; r + 1]; r + 1];
    for i in 0..r {
        for j in 0..r {
            a[i][j] = linalg::dot(&points[i], &points[j]);
        }
        a[i][r] = 1.0;
        a[r][i] = 1.0;
    }
    let mut b = vec![0.0; r + 1];
    b[r] = 1.0;
    let sol = linalg::solve_linear(&a, &b)?;
    Some(sol[..r].to_vec())
}

// ---------------------------------------------------------------------------
// Measurement simulation
// ---------------------------------------------------------------------------

/// Sample means of `shots` projective measurements of every observable on
/// copies of `ρ`. Outcome `λ` of `aᵢ` occurs with probability `⟨ρ, p_λ⟩`.
pub fn simulate_sample_mean(
    obs: &ObservableSet,
    rho: &DensityMatrix,
    shots_per_observable: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    if rho.dim() != obs.dim() {
        return Err(Error::DimensionMismatch {
            expected: obs.dim(),
            got: rho.dim(),
        });
    }
    if shots_per_observable == 0 {
        return Err(Error::InvalidInput("at least one shot is required".into()));
    }
    let mut g = random::rng(seed);
    let mut means = Vec::with_capacity(obs.len());
    for a in obs.observables() {
        let dec = spectral_decompose(a);
        let mut outcomes = Vec::new();
        let mut probs = Vec::new();
        for cl in dec.clusters(CLUSTER_GAP) {
            let lam = cl.clone().map(|j| dec.eigenvalues[j]).sum::<f64>() / cl.len() as f64;
            let p: f64 = cl.map(|j| rho.matrix().expectation(&dec.vector(j))).sum();
            outcomes.push(lam);
            probs.push(if p < 1e-14 { 0.0 } else { p });
        }
        let total: f64 = probs.iter().sum();
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p / total;
            cdf.push(acc);
        }
        let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        let mut counts = vec![0u64; outcomes.len()];
        for _ in 0..shots_per_observable {
            let r: f64 = g.random();
            let j = cdf.iter().position(|&c| r < c).unwrap_or(last).min(last);
            counts[j] += 1;
        }
        let n = shots_per_observable as f64;
        let mean = counts
            .iter()
            .zip(&outcomes)
            .filter(|(c, _)| **c > 0)
            .map(|(c, l)| (*c as f64 / n) * l)
            .sum();
        means.push(mean);
    }
    Ok(means)
}
