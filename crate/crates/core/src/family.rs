//! The exponential family `R(λ) = e^{θ + λ·a} / tr e^{θ + λ·a}`, its
//! log-partition function and the Newton inversion of `λ ↦ E(R(λ))`.

use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::hermitian::HermitianMatrix;
use crate::linalg::{self, CMatrix};
use crate::moments::{ExpectedValue, ObservableSet};
use crate::spectral::{spectral_decompose, SpectralDecomposition};

/// Largest accepted `‖θ + λ·a‖` for [`gibbs_state`] and [`log_partition`].
pub const OVERFLOW_BOUND: f64 = 700.0;

/// Multipliers `λ = (λ₁, …, λ_k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NaturalParameters {
    pub lambda: Vec<f64>,
}

impl NaturalParameters {
    pub fn new(lambda: Vec<f64>) -> Self {
        Self { lambda }
    }

    pub fn zeros(k: usize) -> Self {
        Self::new(vec![0.0; k])
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.lambda)
    }
}

/// Spectral data of `e^H` for a Hermitian exponent `H = U D U*`, with
/// exponentials shifted by `max D` so nothing overflows.
pub(crate) struct GibbsKernel {
    dec: SpectralDecomposition,
    shift: f64,
    /// `e^{dₚ − shift}`
    weights: Vec<f64>,
    /// `Σ weights`
    z: f64,
}

impl GibbsKernel {
    pub fn new(h: &HermitianMatrix) -> Self {
        let dec = spectral_decompose(h);
        let shift = dec.eigenvalues[0];
        let weights: Vec<f64> = dec.eigenvalues.iter().map(|d| (d - shift).exp()).collect();
        let z = weights.iter().sum();
        Self {
            dec,
            shift,
            weights,
            z,
        }
    }

    /// Largest absolute eigenvalue of the exponent.
    pub fn exponent_norm(&self) -> f64 {
        self.dec.scale()
    }

    pub fn log_partition(&self) -> f64 {
        self.shift + self.z.ln()
    }

    pub fn state(&self) -> DensityMatrix {
        let p: Vec<f64> = self.weights.iter().map(|w| w / self.z).collect();
        DensityMatrix::from_positive(self.dec.compose(&p))
    }

    /// `Ã = U* a U`
    fn rotate(&self, a: &HermitianMatrix) -> CMatrix {
        self.dec.eigenvectors.sandwich(a.as_cmatrix())
    }

    /// `tr(R aᵢ)` for every observable.
    pub fn moments(&self, obs: &[HermitianMatrix]) -> Vec<f64> {
        let n = self.weights.len();
        obs.iter()
            .map(|a| {
                let u = &self.dec.eigenvectors;
                let mut s = 0.0;
                for p in 0..n {
                    if self.weights[p] == 0.0 {
                        continue;
                    }
                    let v = u.column(p);
                    s += self.weights[p] * a.expectation(&v);
                }
                s / self.z
            })
            .collect()
    }

    /// Hessian of `log tr e^{H + Σ tᵢ aᵢ}` at `t = 0` through the
    /// divided differences of `exp` on the spectrum of `H`.
    pub fn hessian(&self, obs: &[HermitianMatrix]) -> Vec<Vec<f64>> {
        let n = self.weights.len();
        let d: Vec<f64> = self.dec.eigenvalues.iter().map(|x| x - self.shift).collect();
        let mut phi = vec![0.0; n * n];
        for p in 0..n {
            for q in 0..n {
                phi[p * n + q] = divided_difference(d[p], d[q]);
            }
        }
        let rot: Vec<CMatrix> = obs.iter().map(|a| self.rotate(a)).collect();
        let e: Vec<f64> = rot
            .iter()
            .map(|r| (0..n).map(|p| self.weights[p] * r[(p, p)].re).sum::<f64>() / self.z)
            .collect();
        let k = obs.len();
        let mut h = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in i..k {
                let (ai, aj) = (&rot[i], &rot[j]);
                let mut s = 0.0;
                for p in 0..n {
                    for q in 0..n {
                        let f = phi[p * n + q];
                        if f != 0.0 {
                            s += f * (ai[(q, p)] * aj[(p, q)]).re;
                        }
                    }
                }
                let v = s / self.z - e[i] * e[j];
                h[i][j] = v;
                h[j][i] = v;
            }
        }
        h
    }
}

/// `(e^x − e^y)/(x − y)`, continued by `e^y` on the diagonal.
fn divided_difference(x: f64, y: f64) -> f64 {
    let delta = x - y;
    if delta.abs() < 1e-7 {
        y.exp() * (1.0 + 0.5 * delta)
    } else if delta.abs() < 1.0 {
        y.exp() * delta.exp_m1() / delta
    } else {
        (x.exp() - y.exp()) / delta
    }
}

fn check_params(obs: &ObservableSet, lambda: &NaturalParameters) -> Result<()> {
    if lambda.lambda.len() != obs.len() {
        return Err(Error::DimensionMismatch {
            expected: obs.len(),
            got: lambda.lambda.len(),
        });
    }
    if lambda.lambda.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite natural parameter".into()));
    }
    Ok(())
}

fn guarded_kernel(obs: &ObservableSet, lambda: &NaturalParameters) -> Result<GibbsKernel> {
    check_params(obs, lambda)?;
    let kern = GibbsKernel::new(&obs.exponent(&lambda.lambda));
    let norm = kern.exponent_norm();
    if norm > OVERFLOW_BOUND {
        return Err(Error::OverflowGuard {
            norm,
            bound: OVERFLOW_BOUND,
        });
    }
    Ok(kern)
}

/// `R(λ)`
pub fn gibbs_state(obs: &ObservableSet, lambda: &NaturalParameters) -> Result<DensityMatrix> {
    Ok(guarded_kernel(obs, lambda)?.state())
}

/// `log tr e^{θ + λ·a}`
pub fn log_partition(obs: &ObservableSet, lambda: &NaturalParameters) -> Result<f64> {
    Ok(guarded_kernel(obs, lambda)?.log_partition())
}

/// Gradient of the log-partition function, `E(R(λ))`.
pub fn dual_gradient(obs: &ObservableSet, lambda: &NaturalParameters) -> Result<Vec<f64>> {
    check_params(obs, lambda)?;
    Ok(GibbsKernel::new(&obs.exponent(&lambda.lambda)).moments(obs.observables()))
}

/// Hessian of the log-partition function (covariance of the observables
/// in the Kubo–Mori sense).
pub fn dual_hessian(obs: &ObservableSet, lambda: &NaturalParameters) -> Result<Vec<Vec<f64>>> {
    check_params(obs, lambda)?;
    Ok(GibbsKernel::new(&obs.exponent(&lambda.lambda)).hessian(obs.observables()))
}

/// Settings of [`solve_dual_with`].
#[derive(Clone, Debug)]
pub struct DualOptions {
    /// Target for `‖E(R(λ)) − m‖`.
    pub tol: f64,
    pub max_iter: usize,
    /// Iterates with `‖λ‖` above this are taken as divergence.
    pub lambda_bound: f64,
    pub max_step: f64,
    /// Hessians with a larger condition number get a gradient step.
    pub max_condition: f64,
    pub record_trace: bool,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 500,
            lambda_bound: 1e4,
            max_step: 100.0,
            max_condition: 1e12,
            record_trace: false,
        }
    }
}

/// One Newton iteration, as written to solver traces.
#[derive(Clone, Debug, Serialize)]
pub struct NewtonStep {
    pub iteration: usize,
    pub lambda: Vec<f64>,
    pub residual: f64,
    pub step_size: f64,
}

#[derive(Clone, Debug)]
pub struct DualSolution {
    pub lambda: NaturalParameters,
    pub state: DensityMatrix,
    pub residual: f64,
    pub iterations: usize,
    pub trace: Vec<NewtonStep>,
}

/// Finds `λ` with `E(R(λ)) = m` for `m` interior to the body.
pub fn solve_dual(obs: &ObservableSet, m: &ExpectedValue, tol: f64) -> Result<DualSolution> {
    solve_dual_with(
        obs,
        m,
        &DualOptions {
            tol,
            ..DualOptions::default()
        },
    )
}

/// Damped Newton on the convex dual `λ ↦ log Z(λ) − ⟨λ, m⟩`.
pub fn solve_dual_with(obs: &ObservableSet, m: &ExpectedValue, opts: &DualOptions) -> Result<DualSolution> {
    let k = obs.len();
    if m.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: m.len(),
        });
    }
    if !obs.is_independent() {
        return Err(Error::SingularHessian);
    }
    let a = obs.observables();
    let target = &m.coords;
    let eval = |lam: &[f64]| {
        let kern = GibbsKernel::new(&obs.exponent(lam));
        let g = linalg::sub(&kern.moments(a), target);
        (kern, g)
    };
    let objective = |kern: &GibbsKernel, lam: &[f64]| kern.log_partition() - linalg::dot(lam, target);

    let mut lam = vec![0.0; k];
    let (mut kern, mut grad) = eval(&lam);
    let mut res = linalg::norm(&grad);
    let mut trace = Vec::new();
    let mut last_step = 0.0;
    let mut polish = 0;

    for it in 0..opts.max_iter {
        if opts.record_trace {
            trace.push(NewtonStep {
                iteration: it,
                lambda: lam.clone(),
                residual: res,
                step_size: last_step,
            });
        }
        if !res.is_finite() {
            break;
        }
        if res <= opts.tol {
            // a couple of extra Newton steps sharpen λ at no real cost
            if polish == 2 {
                return Ok(DualSolution {
                    lambda: NaturalParameters::new(lam),
                    state: kern.state(),
                    residual: res,
                    iterations: it,
                    trace,
                });
            }
            polish += 1;
        }
        let lam_norm = linalg::norm(&lam);
        if lam_norm > opts.lambda_bound {
            return Err(Error::NotInterior { lambda_norm: lam_norm });
        }

        let hess = kern.hessian(a);
        let eig = linalg::symmetric_eigenvalues(&hess);
        let (hi, lo) = (eig[0], eig[k - 1]);
        let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
        let well_posed = lo > 0.0 && hi / lo <= opts.max_condition;
        let mut dir = if hi > 0.0 {
            // ill-conditioned Hessians are shifted to the condition bound,
            // which keeps the step a descent direction
            let mut h = hess.clone();
            if !well_posed {
                let mu = hi / opts.max_condition - lo.min(0.0);
                for (i, row) in h.iter_mut().enumerate() {
                    row[i] += mu;
                }
            }
            linalg::solve_linear(&h, &neg)
                .filter(|d| linalg::dot(d, &grad) < 0.0)
                .unwrap_or_else(|| neg.iter().map(|g| g / hi).collect())
        } else {
            // a flat dual gets the longest gradient step
            neg.iter().map(|g| g * opts.max_step / res).collect()
        };
        let is_newton = well_posed;
        let dn = linalg::norm(&dir);
        if dn > opts.max_step {
            dir.iter_mut().for_each(|x| *x *= opts.max_step / dn);
        }

        let f0 = objective(&kern, &lam);
        let slope = linalg::dot(&grad, &dir);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = linalg::axpy(&lam, t, &dir);
            let (ck, cg) = eval(&cand);
            let f1 = objective(&ck, &cand);
            let r1 = linalg::norm(&cg);
            let armijo = f1 <= f0 + 1e-4 * t * slope;
            // near the solution objective differences drown in rounding
            if armijo || (is_newton && r1 < res) {
                accepted = Some((cand, ck, cg, r1));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((l, kk, g, r)) => {
                if polish > 0 && r >= res {
                    // no further progress possible
                    return Ok(DualSolution {
                        lambda: NaturalParameters::new(lam),
                        state: kern.state(),
                        residual: res,
                        iterations: it,
                        trace,
                    });
                }
                lam = l;
                kern = kk;
                grad = g;
                res = r;
                last_step = t;
            }
            None if res <= opts.tol => {
                return Ok(DualSolution {
                    lambda: NaturalParameters::new(lam),
                    state: kern.state(),
                    residual: res,
                    iterations: it,
                    trace,
                });
            }
            None => break,
        }
    }
    if res <= opts.tol {
        return Ok(DualSolution {
            lambda: NaturalParameters::new(lam),
            state: kern.state(),
            residual: res,
            iterations: opts.max_iter,
            trace,
        });
    }
    let lam_norm = linalg::norm(&lam);
    if lam_norm > opts.lambda_bound {
        return Err(Error::NotInterior { lambda_norm: lam_norm });
    }
    Err(Error::ConvergenceFailure {
        what: "dual Newton solve",
        iterations: opts.max_iter,
        residual: res,
    })
}

/// Reduction of an observable set to a maximal subset `S` such that
/// `{1, a_i : i ∈ S}` is linearly independent. Every dropped observable is
/// an affine combination of the kept ones.
#[derive(Clone, Debug)]
pub struct AffineReduction {
    pub kept: Vec<usize>,
    /// `(c₀, c)` with `aⱼ = c₀·1 + Σ cᵢ a_{S[i]}` for each observable `j`.
    pub expansions: Vec<(f64, Vec<f64>)>,
    /// Norm of `aⱼ` minus its expansion; bounds the error of the
    /// predicted expected value.
    pub remainders: Vec<f64>,
}

impl AffineReduction {
    pub fn new(obs: &ObservableSet) -> Self {
        let (kept, expansions, remainders) = crate::moments::affine_decomposition(obs.dim(), obs.observables());
        Self {
            kept,
            expansions,
            remainders,
        }
    }

    /// Restricts `m` to the kept coordinates after checking that the
    /// dropped coordinates agree with the affine relations within `tol`
    /// (scaled by the size of the relation). Returns the largest violation
    /// as an error otherwise.
    pub fn reduce(&self, m: &[f64], tol: f64) -> Result<Vec<f64>> {
        let ms: Vec<f64> = self.kept.iter().map(|&i| m[i]).collect();
        let mut worst = 0.0_f64;
        for (j, (c0, c)) in self.expansions.iter().enumerate() {
            if self.kept.contains(&j) {
                continue;
            }
            let predicted = c0 + linalg::dot(c, &ms);
            let scale = 1.0 + c0.abs() + c.iter().map(|x| x.abs()).sum::<f64>();
            let off = (m[j] - predicted).abs();
            if off > tol * scale + self.remainders[j] {
                worst = worst.max(off);
            }
        }
        if worst > 0.0 {
            return Err(Error::OutsideBody { gap: -worst });
        }
        Ok(ms)
    }

    /// Multipliers for the full set: zero on dropped observables.
    pub fn expand(&self, k: usize, lambda_s: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; k];
        for (&i, &l) in self.kept.iter().zip(lambda_s) {
            out[i] = l;
        }
        out
    }
}
