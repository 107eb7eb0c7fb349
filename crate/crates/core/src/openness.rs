//! Openness of the expected-value map restricted to the state space:
//! scale-relative probes, the image of a half-space neighborhood, and the
//! cross-check against continuity of `Ψ`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{trace_distance, DensityMatrix};
use crate::error::{Error, Result};
use crate::hermitian::{hs_inner_unchecked, HermitianMatrix};
use crate::inference::{InferenceOptions, MaxEntInference};
use crate::linalg::{self, CMatrix, C64};
use crate::moments::{moments_of, project_to_body, ExpectedValue, ExpectedValueBody, ObservableSet, PointStatus, CLASSIFY_TOL};
use crate::random::{self, Rng};
use crate::scan::{continuity_probe, ContinuityReport};
use crate::spectral::jacobi_eigen;

/// Projected-gradient iterations per feasibility solve.
pub const FEASIBILITY_ITERATIONS: usize = 500;
/// `‖E(ρ') − m'‖` below which a target counts as reached.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Starting points tried before a target is declared unreachable.
pub const FEASIBILITY_RESTARTS: usize = 5;
/// A witness counts only at probe radius `δ ≤ FAIL_THRESHOLD·ε`.
pub const FAIL_THRESHOLD: f64 = 0.2;
/// Number of probe radii `δ = ε, ε/2, …`.
pub const PROBE_LEVELS: usize = 5;
/// Alternating-projection cap for the intersection of the state space and
/// the trace-distance ball.
const DYKSTRA_ITERATIONS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OpennessVerdict {
    OpenAtScale,
    NotOpenAtScale,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeTarget {
    pub delta: f64,
    pub m: ExpectedValue,
    /// Target lies on the boundary of the body.
    pub boundary: bool,
    pub feasible: bool,
    /// Smallest `‖E(ρ') − m'‖` found over the ball; `None` when the face
    /// containing the fiber misses the ball.
    pub residual: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OpennessReport {
    pub state: DensityMatrix,
    pub epsilon: f64,
    /// Largest probe radius at which this and every finer level was fully
    /// reached; 0 if the finest level failed.
    pub covered_radius: f64,
    pub verdict: OpennessVerdict,
    pub witness: Option<ExpectedValue>,
    pub targets: Vec<ProbeTarget>,
}

/// Test whether `E(Ball_ε(ρ) ∩ 𝒮)` covers a neighborhood of `E(ρ)` in the
/// body, at probe radii `δ = ε·2⁻ʲ`.
pub fn openness_probe(
    obs: &ObservableSet,
    rho: &DensityMatrix,
    epsilon: f64,
    probe_points: usize,
    seed: u64,
) -> Result<OpennessReport> {
    if rho.dim() != obs.dim() {
        return Err(Error::DimensionMismatch {
            expected: obs.dim(),
            got: rho.dim(),
        });
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    let body = ExpectedValueBody::new(obs);
    let m = moments_of(obs, rho.matrix());
    let k = obs.len();

    let mut jobs = Vec::with_capacity(probe_points);
    for q in 0..probe_points {
        let level = q % PROBE_LEVELS;
        let delta = epsilon * 0.5f64.powi(level as i32);
        jobs.push((q, level, delta));
    }
    let targets: Vec<(usize, ProbeTarget)> = jobs
        .par_iter()
        .map(|&(q, level, delta)| -> Result<(usize, ProbeTarget)> {
            let mut g = random::rng(random::derive_seed(seed, q as u64));
            let v = random::random_unit_vector(k, &mut g);
            // alternate sphere and ball samples
            let r = if q / PROBE_LEVELS % 2 == 0 {
                delta
            } else {
                delta * rand::Rng::random::<f64>(&mut g).powf(1.0 / k as f64)
            };
            let y = linalg::axpy(&m.coords, r, &v);
            let target = project_to_body(&body, &y)?;
            let t = reach(obs, &body, rho, epsilon, delta, target, &mut g)?;
            Ok((level, t))
        })
        .collect::<Result<_>>()?;

    let infeasible_level = |lv: usize| targets.iter().any(|(l, t)| *l == lv && !t.feasible);
    let mut covered_radius = 0.0;
    for lv in (0..PROBE_LEVELS).rev() {
        if infeasible_level(lv) {
            break;
        }
        covered_radius = epsilon * 0.5f64.powi(lv as i32);
    }
    let witness = targets
        .iter()
        .filter(|(_, t)| !t.feasible && t.delta <= FAIL_THRESHOLD * epsilon * (1.0 + 1e-12))
        .max_by(|(_, a), (_, b)| {
            let ra = a.residual.unwrap_or(f64::INFINITY);
            let rb = b.residual.unwrap_or(f64::INFINITY);
            ra.total_cmp(&rb)
        })
        .map(|(_, t)| t.m.clone());
    Ok(OpennessReport {
        state: rho.clone(),
        epsilon,
        covered_radius,
        verdict: if witness.is_some() {
            OpennessVerdict::NotOpenAtScale
        } else {
            OpennessVerdict::OpenAtScale
        },
        witness,
        targets: targets.into_iter().map(|(_, t)| t).collect(),
    })
}

/// Feasibility of one target: search the trace-distance ball around `ρ`
/// for a state with expected value `target`.
fn reach(
    obs: &ObservableSet,
    body: &ExpectedValueBody,
    rho: &DensityMatrix,
    epsilon: f64,
    delta: f64,
    target: ExpectedValue,
    g: &mut Rng,
) -> Result<ProbeTarget> {
    let cls = body.classify(&target.coords, CLASSIFY_TOL)?;
    let boundary = cls.status != PointStatus::Interior;
    // the fiber over a boundary point lies in the exposed face
    let face = if boundary { cls.face.map(|f| f.basis) } else { None };
    if let Some(b) = face.as_ref().filter(|b| b.cols() == 1) {
        let s = DensityMatrix::pure(&b.column(0));
        let inside = trace_distance(&s, rho) <= epsilon * (1.0 + 1e-9);
        let res = moments_of(obs, s.matrix()).distance(&target);
        return Ok(ProbeTarget {
            delta,
            m: target,
            boundary,
            feasible: inside && res <= FEASIBILITY_TOL,
            residual: inside.then_some(res),
        });
    }
    let problem = Feasibility::new(obs, rho.matrix(), epsilon, face, &target.coords);
    let mut best = f64::INFINITY;
    for s in 0..FEASIBILITY_RESTARTS {
        let start = if s == 0 {
            rho.matrix().clone()
        } else {
            rho.mix(epsilon, &random::random_density(rho.dim(), g)).matrix().clone()
        };
        let (x, res) = problem.solve(&start);
        best = best.min(res);
        if res <= FEASIBILITY_TOL && problem.in_ball(&x, 1e-9) {
            return Ok(ProbeTarget {
                delta,
                m: target,
                boundary,
                feasible: true,
                residual: Some(res),
            });
        }
    }
    Ok(ProbeTarget {
        delta,
        m: target,
        boundary,
        feasible: false,
        residual: Some(best),
    })
}

/// `min ‖E(x) − m'‖²` over `x` in the states (optionally those supported
/// on a face) within trace distance `ε` of a center, by accelerated
/// projected gradient with adaptive restart.
struct Feasibility<'a> {
    obs: &'a ObservableSet,
    center: &'a HermitianMatrix,
    radius1: f64,
    face: Option<CMatrix>,
    target: &'a [f64],
    step: f64,
}

impl<'a> Feasibility<'a> {
    fn new(
        obs: &'a ObservableSet,
        center: &'a HermitianMatrix,
        epsilon: f64,
        face: Option<CMatrix>,
        target: &'a [f64],
    ) -> Self {
        let a = obs.observables();
        let gram: Vec<Vec<f64>> = a
            .iter()
            .map(|x| a.iter().map(|y| hs_inner_unchecked(x, y)).collect())
            .collect();
        let lip = 2.0 * linalg::symmetric_eigenvalues(&gram)[0].max(1e-300);
        Self {
            obs,
            center,
            radius1: 2.0 * epsilon,
            face,
            target,
            step: 1.0 / lip,
        }
    }

    fn residual(&self, x: &HermitianMatrix) -> Vec<f64> {
        linalg::sub(&moments_of(self.obs, x).coords, self.target)
    }

    fn in_ball(&self, x: &HermitianMatrix, slack: f64) -> bool {
        trace_norm(&x.sub(self.center)) <= self.radius1 * (1.0 + slack)
    }

    fn project_states(&self, z: &HermitianMatrix) -> HermitianMatrix {
        match &self.face {
            Some(b) => project_simplex(&z.compress(b)).embed(b),
            None => project_simplex(z),
        }
    }

    fn project_ball(&self, z: &HermitianMatrix) -> HermitianMatrix {
        let d = z.sub(self.center);
        let (vals, vecs) = jacobi_eigen(d.as_cmatrix());
        let p = project_l1_ball(&vals, self.radius1);
        compose(&vecs, &p).add(self.center)
    }

    /// Projection onto the intersection by Dykstra's alternating scheme.
    /// The result lies in the state set and, up to the iteration cap, in
    /// the ball.
    fn project(&self, z: &HermitianMatrix) -> HermitianMatrix {
        let first = self.project_states(z);
        if self.in_ball(&first, 0.0) {
            return first;
        }
        let n = z.dim();
        let mut x = z.clone();
        let mut p = HermitianMatrix::zeros(n);
        let mut q = HermitianMatrix::zeros(n);
        let mut y = first;
        for _ in 0..DYKSTRA_ITERATIONS {
            y = self.project_states(&x.add(&p));
            p = x.add(&p).sub(&y);
            let x_new = self.project_ball(&y.add(&q));
            q = y.add(&q).sub(&x_new);
            let moved = x_new.sub(&y).frobenius_norm();
            x = x_new;
            if moved < 1e-13 {
                break;
            }
        }
        y
    }

    fn solve(&self, start: &HermitianMatrix) -> (HermitianMatrix, f64) {
        let mut x = self.project(start);
        let mut r = linalg::norm(&self.residual(&x));
        let mut best = (x.clone(), r);
        let mut y = x.clone();
        let mut t = 1.0_f64;
        for _ in 0..FEASIBILITY_ITERATIONS {
            if r <= FEASIBILITY_TOL {
                break;
            }
            let res = self.residual(&y);
            let mut z = y.clone();
            for (a, ri) in self.obs.observables().iter().zip(&res) {
                z.add_scaled(-2.0 * self.step * ri, a);
            }
            let x_new = self.project(&z);
            r = linalg::norm(&self.residual(&x_new));
            if r < best.1 {
                best = (x_new.clone(), r);
            }
            let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let diff = x_new.sub(&x);
            if hs_inner_unchecked(&y.sub(&x_new), &diff) > 0.0 {
                // momentum points uphill: restart
                t = 1.0;
                y = x_new.clone();
            } else {
                y = x_new.clone();
                y.add_scaled((t - 1.0) / t_new, &diff);
                t = t_new;
            }
            x = x_new;
        }
        best
    }
}

fn compose(vecs: &CMatrix, vals: &[f64]) -> HermitianMatrix {
    let n = vals.len();
    let mut out = CMatrix::zeros(n, n);
    for (j, &w) in vals.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for r in 0..n {
            let ur = vecs[(r, j)] * w;
            for c in 0..n {
                out[(r, c)] += ur * vecs[(c, j)].conj();
            }
        }
    }
    HermitianMatrix::symmetrize(out)
}

fn trace_norm(a: &HermitianMatrix) -> f64 {
    jacobi_eigen(a.as_cmatrix()).0.iter().map(|x| x.abs()).sum()
}

/// Frobenius projection onto the density matrices: eigenvalues projected
/// onto the probability simplex.
fn project_simplex(z: &HermitianMatrix) -> HermitianMatrix {
    let (vals, vecs) = jacobi_eigen(z.as_cmatrix());
    // vals are descending
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (i, v) in vals.iter().enumerate() {
        acc += v;
        let t = (acc - 1.0) / (i + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    let p: Vec<f64> = vals.iter().map(|v| (v - theta).max(0.0)).collect();
    compose(&vecs, &p)
}

/// Euclidean projection of a vector onto the ℓ¹ ball of radius `r`.
fn project_l1_ball(v: &[f64], r: f64) -> Vec<f64> {
    let total: f64 = v.iter().map(|x| x.abs()).sum();
    if total <= r {
        return v.to_vec();
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (i, u) in mags.iter().enumerate() {
        acc += u;
        let t = (acc - r) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| x.signum() * (x.abs() - theta).max(0.0)).collect()
}

// ---------------------------------------------------------------------------
// Half-space neighborhoods
// ---------------------------------------------------------------------------

/// `U = {ρ ∈ 𝒮 : ⟨ρ, w⟩ ≥ level}`
#[derive(Clone, Debug, Serialize)]
pub struct HalfSpaceNeighborhood {
    pub normal: HermitianMatrix,
    pub level: f64,
}

impl HalfSpaceNeighborhood {
    pub fn new(normal: HermitianMatrix, level: f64) -> Self {
        Self { normal, level }
    }

    pub fn value(&self, rho: &DensityMatrix) -> f64 {
        rho.expectation(&self.normal)
    }

    /// Strict membership.
    pub fn contains_strictly(&self, rho: &DensityMatrix) -> bool {
        self.value(rho) > self.level
    }
}

/// Exposed point of `E(U)` for the normal angle `φ`: maximizes
/// `⟨ρ, u·a⟩` over `U` by bisection on the multiplier `μ ≥ 0` of the
/// constraint, `λ_max(u·a + μw)` being convex in `μ`.
pub fn halfspace_exposed_point(obs: &ObservableSet, u_set: &HalfSpaceNeighborhood, phi: f64) -> Result<ExpectedValue> {
    if obs.len() != 2 {
        return Err(Error::NotPlanar(obs.len()));
    }
    let w = &u_set.normal;
    if w.dim() != obs.dim() {
        return Err(Error::DimensionMismatch {
            expected: obs.dim(),
            got: w.dim(),
        });
    }
    if w.lambda_max() < u_set.level {
        return Err(Error::EmptyNeighborhood);
    }
    let a = obs.combination(&[phi.cos(), phi.sin()]);
    // top eigenvector of a + μw, preferring large ⟨w⟩ inside a cluster
    let top = |mu: f64| -> (Vec<C64>, f64) {
        let h = a.add(&w.scale(mu));
        let (vals, vecs) = jacobi_eigen(h.as_cmatrix());
        let tol = 1e-13 * vals.iter().fold(1.0_f64, |s, x| s.max(x.abs()));
        let r = vals.iter().take_while(|&&x| vals[0] - x <= tol).count();
        let cols: Vec<Vec<C64>> = (0..r).map(|j| vecs.column(j)).collect();
        let b = CMatrix::from_columns(&cols);
        let (_, wv) = jacobi_eigen(w.compress(&b).as_cmatrix());
        let v = b.mul_vec(&wv.column(0));
        let val = w.expectation(&v);
        (v, val)
    };
    let (v0, w0) = top(0.0);
    if w0 >= u_set.level {
        return Ok(ExpectedValue::new(moments_of_vec(obs, &v0)));
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let (mut v_lo, mut w_lo) = (v0, w0);
    let (mut v_hi, mut w_hi) = top(hi);
    while w_hi < u_set.level && hi < 1e15 {
        lo = hi;
        v_lo = v_hi;
        w_lo = w_hi;
        hi *= 2.0;
        (v_hi, w_hi) = top(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (v, wv) = top(mid);
        if wv >= u_set.level {
            hi = mid;
            v_hi = v;
            w_hi = wv;
        } else {
            lo = mid;
            v_lo = v;
            w_lo = wv;
        }
    }
    // mix the two sides so that the constraint is active
    let p = if w_hi > w_lo {
        ((w_hi - u_set.level) / (w_hi - w_lo)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let e_lo = moments_of_vec(obs, &v_lo);
    let e_hi = moments_of_vec(obs, &v_hi);
    Ok(ExpectedValue::new(
        e_lo.iter().zip(&e_hi).map(|(l, h)| p * l + (1.0 - p) * h).collect(),
    ))
}

fn moments_of_vec(obs: &ObservableSet, v: &[C64]) -> Vec<f64> {
    obs.observables().iter().map(|a| a.expectation(v)).collect()
}

/// Boundary of `E(U)` sampled at `num_directions` normal angles
/// `π/2 + 2πj/N`, counter-clockwise.
pub fn halfspace_image_boundary(
    obs: &ObservableSet,
    u_set: &HalfSpaceNeighborhood,
    num_directions: usize,
) -> Result<Vec<ExpectedValue>> {
    if obs.len() != 2 {
        return Err(Error::NotPlanar(obs.len()));
    }
    if num_directions < 3 {
        return Err(Error::InvalidInput("at least three directions are required".into()));
    }
    (0..num_directions)
        .into_par_iter()
        .map(|j| {
            let phi = 0.5 * PI + 2.0 * PI * j as f64 / num_directions as f64;
            halfspace_exposed_point(obs, u_set, phi)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Lemma cross-check
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct LemmaOptions {
    pub epsilon: f64,
    pub probes: usize,
    pub seed: u64,
    pub radii: Vec<f64>,
    pub directions: usize,
}

impl Default for LemmaOptions {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            probes: 100,
            seed: 0,
            radii: vec![1e-2, 1e-3, 1e-4],
            directions: 16,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaReport {
    pub m: ExpectedValue,
    pub continuity: ContinuityReport,
    pub openness: OpennessReport,
    pub continuous: bool,
    pub open: bool,
    /// Continuous but not open: contradicts the lemma.
    pub lemma_violation: bool,
    /// Open but not continuous: contradicts the converse.
    pub converse_violation: bool,
}

/// Openness of `E` at `Ψ(m)` against continuity of `Ψ` at `m`.
pub fn lemma_cross_check(obs: &ObservableSet, m: &ExpectedValue, opts: &LemmaOptions) -> Result<LemmaReport> {
    let engine = MaxEntInference::new(obs, InferenceOptions::default());
    let state = engine.infer(m)?.state;
    let continuity = continuity_probe(obs, m, &opts.radii, opts.directions, opts.seed)?;
    let openness = openness_probe(obs, &state, opts.epsilon, opts.probes, opts.seed)?;
    let continuous = continuity.continuous;
    let open = openness.verdict == OpennessVerdict::OpenAtScale;
    Ok(LemmaReport {
        m: m.clone(),
        continuity,
        openness,
        continuous,
        open,
        lemma_violation: continuous && !open,
        converse_violation: open && !continuous,
    })
}
