//! The inference map `Ψ`: interior points through the dual Newton solve,
//! boundary points through recursive compression onto exposed faces. Also
//! an independent first-order primal solver used to cross-check `Ψ`.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::density::{relative_entropy, DensityMatrix};
use crate::error::{Error, Result};
use crate::family::{solve_dual_with, AffineReduction, DualOptions, GibbsKernel, NaturalParameters};
use crate::hermitian::{hs_inner_unchecked, HermitianMatrix};
use crate::linalg::{self, CMatrix, C64};
use crate::moments::{
    moments_of, BoundaryClassification, ExpectedValue, ExpectedValueBody, ExposedFace, ObservableSet,
    PointStatus, CLASSIFY_TOL,
};
use crate::random::{self, Rng};
use crate::spectral::{spectral_decompose, RANK_THRESHOLD};

/// How `Ψ(m)` was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InferencePath {
    InteriorDual,
    /// After `depth` successive face compressions.
    FaceCompressed(usize),
}

impl fmt::Display for InferencePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InferencePath::InteriorDual => write!(f, "INTERIOR_DUAL"),
            InferencePath::FaceCompressed(d) => write!(f, "FACE_COMPRESSED({d})"),
        }
    }
}

impl Serialize for InferencePath {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InferenceResult {
    pub state: DensityMatrix,
    pub path: InferencePath,
    /// Multipliers, for interior points only.
    pub lambda: Option<NaturalParameters>,
    /// `‖E(state) − m‖`
    pub residual: f64,
    /// `S(state, σ)`
    pub objective: f64,
}

/// Observables compressed onto the range of a face projector.
#[derive(Clone, Debug)]
pub struct CompressedProblem {
    pub projector: HermitianMatrix,
    /// Orthonormal columns spanning the range of `projector`.
    pub basis: CMatrix,
    pub observables: ObservableSet,
}

/// Compression `B* aᵢ B`, `B* θ B` onto the face of a BOUNDARY
/// classification.
pub fn compress_to_face(obs: &ObservableSet, cls: &BoundaryClassification) -> Result<CompressedProblem> {
    let face = match (&cls.status, &cls.face) {
        (PointStatus::Boundary, Some(f)) => f,
        _ => {
            return Err(Error::InvalidInput(
                "face compression needs a boundary classification".into(),
            ))
        }
    };
    compress_onto(obs, face)
}

fn compress_onto(obs: &ObservableSet, face: &ExposedFace) -> Result<CompressedProblem> {
    if face.rank() == 0 {
        return Err(Error::DegenerateFace);
    }
    Ok(CompressedProblem {
        projector: face.projector(),
        basis: face.basis.clone(),
        observables: obs.compress(&face.basis),
    })
}

#[derive(Clone, Debug)]
pub struct InferenceOptions {
    pub dual: DualOptions,
    /// Tolerance of the interior / boundary / outside decision.
    pub classify_tol: f64,
}

impl Default for InferenceOptions {
    fn default() -> Self {
        Self {
            dual: DualOptions::default(),
            classify_tol: CLASSIFY_TOL,
        }
    }
}

impl InferenceOptions {
    pub fn with_tol(tol: f64) -> Self {
        let mut o = Self::default();
        o.dual.tol = tol;
        o
    }

    /// Allowed violation of affine relations between dependent coordinates.
    fn consistency_tol(&self) -> f64 {
        10.0 * self.classify_tol
    }
}

/// `Ψ` for a fixed observable set, with the body of expected values built
/// once.
#[derive(Clone, Debug)]
pub struct MaxEntInference {
    obs: ObservableSet,
    body: ExpectedValueBody,
    reduction: AffineReduction,
    opts: InferenceOptions,
}

impl MaxEntInference {
    pub fn new(obs: &ObservableSet, opts: InferenceOptions) -> Self {
        let reduction = AffineReduction::new(obs);
        let body = ExpectedValueBody::new(&obs.select(&reduction.kept));
        Self {
            obs: obs.clone(),
            body,
            reduction,
            opts,
        }
    }

    pub fn observables(&self) -> &ObservableSet {
        &self.obs
    }

    /// Body of the independent part of the observables (all of them when
    /// `{1, a₁, …}` is independent).
    pub fn body(&self) -> &ExpectedValueBody {
        &self.body
    }

    pub fn options(&self) -> &InferenceOptions {
        &self.opts
    }

    /// `Ψ(m)`
    pub fn infer(&self, m: &ExpectedValue) -> Result<InferenceResult> {
        self.check(m)?;
        let (state, path, lambda) = solve_level(&self.obs, &m.coords, 0, Some((&self.reduction, &self.body)), &self.opts)?;
        Ok(self.finish(state, path, lambda, m))
    }

    /// `Ψ(m)` for `m` known to lie in the image of `face` (as produced by
    /// boundary sampling), skipping the top-level classification.
    pub fn infer_on_face(&self, face: &ExposedFace, m: &ExpectedValue) -> Result<InferenceResult> {
        self.check(m)?;
        let c = compress_onto(&self.obs, face)?;
        let (s, path, _) = solve_level(&c.observables, &m.coords, 1, None, &self.opts)?;
        let state = DensityMatrix::from_positive(s.matrix().embed(&c.basis));
        Ok(self.finish(state, path, None, m))
    }

    fn check(&self, m: &ExpectedValue) -> Result<()> {
        if m.len() != self.obs.len() {
            return Err(Error::DimensionMismatch {
                expected: self.obs.len(),
                got: m.len(),
            });
        }
        if m.coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite expected value".into()));
        }
        Ok(())
    }

    fn finish(
        &self,
        state: DensityMatrix,
        path: InferencePath,
        lambda: Option<Vec<f64>>,
        m: &ExpectedValue,
    ) -> InferenceResult {
        let e = moments_of(&self.obs, state.matrix());
        let residual = e.distance(m);
        let objective = relative_entropy(&state, &self.obs.prior());
        InferenceResult {
            state,
            path,
            lambda: lambda.map(NaturalParameters::new),
            residual,
            objective,
        }
    }
}

type Level = (DensityMatrix, InferencePath, Option<Vec<f64>>);

/// One level of the recursion on `obs` (acting on the current face).
fn solve_level(
    obs: &ObservableSet,
    m: &[f64],
    depth: usize,
    cached: Option<(&AffineReduction, &ExpectedValueBody)>,
    opts: &InferenceOptions,
) -> Result<Level> {
    let owned;
    let reduction = match cached {
        Some((r, _)) => r,
        None => {
            owned = AffineReduction::new(obs);
            &owned
        }
    };
    let ms = reduction.reduce(m, opts.consistency_tol())?;
    let path = if depth == 0 {
        InferencePath::InteriorDual
    } else {
        InferencePath::FaceCompressed(depth)
    };
    if reduction.kept.is_empty() {
        // the constraints are automatic on this face
        let lambda = (depth == 0).then(|| vec![0.0; obs.len()]);
        return Ok((obs.prior(), path, lambda));
    }
    let sub = obs.select(&reduction.kept);
    let owned_body;
    let body = match cached {
        Some((_, b)) => b,
        None => {
            owned_body = ExpectedValueBody::new(&sub);
            &owned_body
        }
    };
    let cls = body.classify(&ms, opts.classify_tol)?;
    match cls.status {
        PointStatus::Outside => Err(Error::OutsideBody { gap: cls.gap }),
        PointStatus::Interior => {
            let sol = solve_dual_with(&sub, &ExpectedValue::new(ms), &opts.dual)?;
            let lambda = (depth == 0).then(|| reduction.expand(obs.len(), &sol.lambda.lambda));
            Ok((sol.state, path, lambda))
        }
        PointStatus::Boundary => {
            let face = cls.face.as_ref().ok_or(Error::DegenerateFace)?;
            if face.rank() == obs.dim() {
                // u·a is a multiple of 1 on this level: no proper face
                return Err(Error::DegenerateFace);
            }
            let c = compress_onto(obs, face)?;
            let (s, p, _) = solve_level(&c.observables, m, depth + 1, None, opts)?;
            let state = DensityMatrix::from_positive(s.matrix().embed(&c.basis));
            Ok((state, p, None))
        }
    }
}

/// `Ψ(m)` with default options and dual tolerance `tol`.
pub fn infer(obs: &ObservableSet, m: &ExpectedValue, tol: f64) -> Result<InferenceResult> {
    MaxEntInference::new(obs, InferenceOptions::with_tol(tol)).infer(m)
}

// ---------------------------------------------------------------------------
// Primal oracle
// ---------------------------------------------------------------------------

/// Settings of [`primal_oracle_with`].
#[derive(Clone, Debug)]
pub struct OracleOptions {
    pub iterations: usize,
    /// Initial mirror step `η₀` of the schedule `η_t = η₀/√t`.
    pub eta0: f64,
    /// Floor of the mirror step.
    pub eta_min: f64,
    /// Early stop once `‖E(ρ) − m‖` drops below this.
    pub residual_tol: f64,
    /// Residual accepted when the iteration budget runs out.
    pub accept_residual: f64,
    /// Outer steps of the proximal dual polish after mirror descent.
    pub prox_steps: usize,
    /// Initial proximal penalty, doubled every outer step.
    pub prox_penalty: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            iterations: 200_000,
            eta0: 1.0,
            eta_min: 0.5,
            residual_tol: 1e-11,
            accept_residual: 1e-4,
            prox_steps: 400,
            prox_penalty: 10.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleResult {
    pub state: DensityMatrix,
    pub residual: f64,
    pub iterations: usize,
}

/// Approximate `Ψ(m)` by entropic mirror descent on the Lagrangian with
/// dual ascent on the constraint multipliers. Independent of the Newton
/// and face machinery; used only for cross-checks.
pub fn primal_oracle(obs: &ObservableSet, m: &ExpectedValue, iterations: usize, seed: u64) -> Result<DensityMatrix> {
    let opts = OracleOptions {
        iterations,
        ..OracleOptions::default()
    };
    primal_oracle_with(obs, m, seed, &opts).map(|r| r.state)
}

pub fn primal_oracle_with(
    obs: &ObservableSet,
    m: &ExpectedValue,
    seed: u64,
    opts: &OracleOptions,
) -> Result<OracleResult> {
    if m.len() != obs.len() {
        return Err(Error::DimensionMismatch {
            expected: obs.len(),
            got: m.len(),
        });
    }
    let n = obs.dim();
    let a = obs.observables();
    let theta = obs.theta();

    // full-rank perturbation of the prior
    let mut g = random::rng(seed);
    let noise = random::random_density(n, &mut g);
    let start = obs.prior().mix(0.9, &noise);
    let mut log_rho = crate::spectral::matrix_log(start.matrix())?;

    // dual step from a bound on the Hessian of the dual
    let lip: f64 = obs.operator_norms().iter().map(|x| x * x).sum::<f64>().max(1e-12);
    let beta = 0.5 / lip;
    let mut nu = vec![0.0; obs.len()];
    let mut residual = f64::INFINITY;
    let mut state = start;

    for t in 1..=opts.iterations {
        let kern = GibbsKernel::new(&log_rho);
        let e = kern.moments(a);
        let r = linalg::sub(&e, &m.coords);
        residual = linalg::norm(&r);
        if residual <= opts.residual_tol || t == opts.iterations {
            state = kern.state();
            if residual <= opts.residual_tol {
                return Ok(OracleResult {
                    state,
                    residual,
                    iterations: t,
                });
            }
            break;
        }
        nu = linalg::axpy(&nu, beta, &r);
        let eta = (opts.eta0 / (t as f64).sqrt()).clamp(opts.eta_min, 1.0);
        // log ρ ← (1 − η) log ρ + η (θ − ν·a)
        let mut target = theta.clone();
        for (ai, v) in a.iter().zip(&nu) {
            target.add_scaled(-v, ai);
        }
        log_rho = log_rho.scale(1.0 - eta).add(&target.scale(eta));
    }
    if opts.prox_steps > 0 {
        let (polished, res) = proximal_dual(obs, m, nu, opts);
        if res < residual {
            state = polished;
            residual = res;
        }
    }
    if residual <= opts.accept_residual {
        Ok(OracleResult {
            state,
            residual,
            iterations: opts.iterations,
        })
    } else {
        Err(Error::ConvergenceFailure {
            what: "primal oracle",
            iterations: opts.iterations,
            residual,
        })
    }
}

/// Proximal point iteration on `g(μ) = log tr e^{θ − μ·a} + μ·m`:
/// `μ ← argmin g(μ) + ‖μ − ν‖²/(2c)`, each step by damped Newton on the
/// strongly convex model. Drives `E(ρ_μ) → m` also when `inf g` is only
/// approached as `‖μ‖ → ∞`.
fn proximal_dual(obs: &ObservableSet, m: &ExpectedValue, start: Vec<f64>, opts: &OracleOptions) -> (DensityMatrix, f64) {
    let a = obs.observables();
    let theta = obs.theta();
    let k = a.len();
    let kernel = |mu: &[f64]| {
        let mut h = theta.clone();
        for (ai, v) in a.iter().zip(mu) {
            h.add_scaled(-v, ai);
        }
        GibbsKernel::new(&h)
    };
    let model = |kern: &GibbsKernel, mu: &[f64], nu: &[f64], c: f64| {
        let d = linalg::sub(mu, nu);
        kern.log_partition() + linalg::dot(mu, &m.coords) + linalg::dot(&d, &d) / (2.0 * c)
    };
    let mut nu = start;
    let mut kern = kernel(&nu);
    let mut residual = linalg::norm(&linalg::sub(&kern.moments(a), &m.coords));
    let mut c = opts.prox_penalty;
    for _ in 0..opts.prox_steps {
        if residual <= opts.residual_tol {
            break;
        }
        let mut mu = nu.clone();
        for _ in 0..50 {
            let e = kern.moments(a);
            let grad: Vec<f64> = (0..k).map(|i| m.coords[i] - e[i] + (mu[i] - nu[i]) / c).collect();
            if linalg::norm(&grad) <= 1e-13 {
                break;
            }
            let mut hess = kern.hessian(a);
            for (i, row) in hess.iter_mut().enumerate() {
                row[i] += 1.0 / c;
            }
            let Some(step) = linalg::solve_linear(&hess, &grad) else {
                break;
            };
            let f0 = model(&kern, &mu, &nu, c);
            let slope = -linalg::dot(&grad, &step);
            let mut s = 1.0;
            let mut moved = false;
            while s > 1e-10 {
                let trial = linalg::axpy(&mu, -s, &step);
                let tk = kernel(&trial);
                if model(&tk, &trial, &nu, c) <= f0 + 1e-4 * s * slope {
                    mu = trial;
                    kern = tk;
                    moved = true;
                    break;
                }
                s *= 0.5;
            }
            if !moved {
                break;
            }
        }
        nu = mu;
        residual = linalg::norm(&linalg::sub(&kern.moments(a), &m.coords));
        c = (2.0 * c).min(1e12);
    }
    (kern.state(), residual)
}

/// Random state with the same expected values as `base`: `base + tX` with
/// `X` traceless, supported on the support of `base`, orthogonal to every
/// observable, and `t` small enough to keep positivity. `None` if the
/// fiber through `base` is a single point.
pub fn sample_fiber(obs: &ObservableSet, base: &DensityMatrix, g: &mut Rng) -> Option<DensityMatrix> {
    let dec = spectral_decompose(base.matrix());
    let r = dec.eigenvalues.iter().filter(|&&x| x > RANK_THRESHOLD).count();
    if r < 2 {
        return None;
    }
    let cols: Vec<Vec<C64>> = (0..r).map(|j| dec.vector(j)).collect();
    let b = CMatrix::from_columns(&cols);
    let mut span: Vec<HermitianMatrix> = vec![HermitianMatrix::identity(r)];
    span.extend(obs.observables().iter().map(|a| a.compress(&b)));
    // orthonormalize the constraint span
    let mut basis: Vec<HermitianMatrix> = Vec::new();
    for s in span {
        let mut v = s;
        for q in &basis {
            let c = hs_inner_unchecked(q, &v);
            v.add_scaled(-c, q);
        }
        let nrm = v.frobenius_norm();
        if nrm > 1e-10 {
            basis.push(v.scale(1.0 / nrm));
        }
    }
    if basis.len() >= r * r {
        return None;
    }
    let mut y = random::random_hermitian(r, 1.0, g);
    for q in &basis {
        let c = hs_inner_unchecked(q, &y);
        y.add_scaled(-c, q);
    }
    let ynorm = y.spectral_norm();
    if ynorm < 1e-12 {
        return None;
    }
    let lmin = dec.eigenvalues[r - 1];
    let t = 0.9 * lmin / ynorm * rand::Rng::random::<f64>(g);
    let x = y.scale(t).embed(&b);
    Some(DensityMatrix::from_positive(base.matrix().add(&x)))
}
