//! Scans of `Ψ` along and near the boundary of the body: jump detection on
//! the planar boundary, radial limits, local continuity probes and the
//! sample-mean estimation pipeline.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::density::{frobenius_distance, trace_distance, DensityMatrix};
use crate::error::{Error, Result};
use crate::inference::{InferenceOptions, InferencePath, InferenceResult, MaxEntInference};
use crate::linalg;
use crate::moments::{
    boundary_curve, exposed_face_with, exposed_points, moments_of, project_to_body, simulate_sample_mean, ExpectedValue,
    ExpectedValueBody, ExposedFace, ObservableSet, PointStatus, EXPOSED_GAP,
};
use crate::random;

/// Absolute floor of the jump threshold (trace distance).
pub const JUMP_FLOOR: f64 = 1e-3;
/// Jump threshold relative to the median adjacent gap.
pub const JUMP_FACTOR: f64 = 10.0;
/// Finest parameter resolution of jump refinement.
pub const JUMP_RESOLUTION: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct ScanSample {
    /// Normal angle of the boundary point, or ray coordinate `t`.
    pub parameter: f64,
    pub m: ExpectedValue,
    pub state: DensityMatrix,
    pub path: InferencePath,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct JumpCandidate {
    pub parameter: f64,
    pub m: ExpectedValue,
    /// `Ψ` just before and just after the location at the finest resolution.
    pub left: DensityMatrix,
    pub right: DensityMatrix,
    /// `Ψ` at the location when the jump is an isolated value.
    pub value: Option<DensityMatrix>,
    /// Trace-distance gap at the finest resolution.
    pub gap: f64,
    pub frobenius_gap: f64,
    /// `(resolution, gap)` along the refinement.
    pub gap_by_resolution: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanProfile {
    pub samples: Vec<ScanSample>,
    pub jump_candidates: Vec<JumpCandidate>,
}

impl ScanProfile {
    /// Trace distance from each sample to the next one (cyclically).
    pub fn adjacent_gaps(&self) -> Vec<f64> {
        let n = self.samples.len();
        (0..n)
            .map(|i| trace_distance(&self.samples[i].state, &self.samples[(i + 1) % n].state))
            .collect()
    }

    pub fn max_adjacent_gap(&self) -> f64 {
        self.adjacent_gaps().into_iter().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct ScanOptions {
    pub inference: InferenceOptions,
    pub resolution: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            inference: InferenceOptions::default(),
            resolution: JUMP_RESOLUTION,
        }
    }
}

/// Evaluate `Ψ` along the boundary of a planar body and locate jumps.
pub fn scan_boundary(obs: &ObservableSet, num_points: usize) -> Result<ScanProfile> {
    scan_boundary_with(obs, num_points, &ScanOptions::default())
}

pub fn scan_boundary_with(obs: &ObservableSet, num_points: usize, opts: &ScanOptions) -> Result<ScanProfile> {
    if obs.len() != 2 {
        return Err(Error::NotPlanar(obs.len()));
    }
    let engine = MaxEntInference::new(obs, opts.inference.clone());
    let body = ExpectedValueBody::new(obs);
    let pts = boundary_curve(&body, num_points)?;
    let specs = densify(obs, &pts, num_points);

    let samples: Vec<ScanSample> = specs
        .par_iter()
        .map(|s| engine.infer_on_face(&s.face, &s.m).map(|r| sample(s.phi, s.m.clone(), r)))
        .collect::<Result<_>>()?;
    let profile = ScanProfile {
        samples,
        jump_candidates: Vec::new(),
    };
    let gaps = profile.adjacent_gaps();
    let threshold = jump_threshold(&gaps);
    let n = gaps.len();
    let flagged: Vec<bool> = gaps.iter().map(|&g| g > threshold).collect();

    let eval = |phi: f64, near: &ExpectedValue| -> Result<(ExpectedValue, DensityMatrix)> {
        let pts = exposed_points(obs, phi);
        let p = pts
            .iter()
            .min_by(|a, b| a.m.distance(near).total_cmp(&b.m.distance(near)))
            .expect("at least one exposed point");
        let r = engine.infer_on_face(&p.face, &p.m)?;
        Ok((p.m.clone(), r.state))
    };

    let mut used = vec![false; n];
    let mut candidates = Vec::new();
    // isolated values: both edges at a sample are flagged
    for j in 0..n {
        let prev = (j + n - 1) % n;
        if n < 3 || !(flagged[prev] && flagged[j]) || used[prev] || used[j] {
            continue;
        }
        // samples on segment faces are refined along the boundary path
        if specs[j].seg.is_some() {
            continue;
        }
        used[prev] = true;
        used[j] = true;
        let s = &profile.samples[j];
        let mut levels = Vec::new();
        let mut last = None;
        let mut delta = 1e-3;
        while delta >= opts.resolution * (1.0 - 1e-9) {
            let (_, left) = eval(s.parameter - delta, &s.m)?;
            let (_, right) = eval(s.parameter + delta, &s.m)?;
            let gl = trace_distance(&left, &s.state);
            let gr = trace_distance(&right, &s.state);
            levels.push((delta, gl.max(gr)));
            last = Some((left, right, gl, gr));
            delta /= 10.0;
        }
        let (left, right, gl, gr) = last.expect("at least one refinement level");
        let gap = gl.max(gr);
        if gap < JUMP_FLOOR {
            continue;
        }
        let far = if gl >= gr { &left } else { &right };
        candidates.push(JumpCandidate {
            parameter: s.parameter,
            m: s.m.clone(),
            frobenius_gap: frobenius_distance(far, &s.state),
            left,
            right,
            value: Some(s.state.clone()),
            gap,
            gap_by_resolution: levels,
        });
    }
    // single steps between neighbors
    for i in 0..n {
        if !flagged[i] || used[i] {
            continue;
        }
        let k = (i + 1) % n;
        let a = (&specs[i], &profile.samples[i]);
        let b = (&specs[k], &profile.samples[k]);
        if let Some(c) = bisect_edge(&engine, a, b, opts.resolution, &eval)? {
            candidates.push(c);
        }
    }
    candidates.sort_by(|a, b| a.parameter.total_cmp(&b.parameter));
    let scale = obs.operator_norms().iter().fold(1.0_f64, |a, b| a.max(*b));
    let candidates = merge_coincident(candidates, COINCIDENCE_TOL * scale);
    Ok(ScanProfile {
        jump_candidates: candidates,
        ..profile
    })
}

/// Candidates closer than this (relative to the observable scale) describe
/// one location.
const COINCIDENCE_TOL: f64 = 1e-7;

/// Keep the largest gap among candidates at one location.
fn merge_coincident(candidates: Vec<JumpCandidate>, tol: f64) -> Vec<JumpCandidate> {
    let mut out: Vec<JumpCandidate> = Vec::with_capacity(candidates.len());
    for c in candidates {
        match out.iter_mut().find(|o| o.m.distance(&c.m) <= tol) {
            Some(o) if c.gap > o.gap => *o = c,
            Some(_) => {}
            None => out.push(c),
        }
    }
    out
}

fn sample(parameter: f64, m: ExpectedValue, r: InferenceResult) -> ScanSample {
    ScanSample {
        parameter,
        m,
        state: r.state,
        path: r.path,
        residual: r.residual,
    }
}

fn jump_threshold(gaps: &[f64]) -> f64 {
    let mut sorted = gaps.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if sorted.is_empty() {
        0.0
    } else {
        sorted[sorted.len() / 2]
    };
    (JUMP_FACTOR * median).max(JUMP_FLOOR)
}

/// Segment face of the body: endpoints at one normal angle.
#[derive(Clone, Debug)]
struct Segment {
    phi: f64,
    p: ExpectedValue,
    q: ExpectedValue,
    face: ExposedFace,
}

impl Segment {
    fn point(&self, t: f64) -> ExpectedValue {
        ExpectedValue::new(
            self.p
                .coords
                .iter()
                .zip(&self.q.coords)
                .map(|(a, b)| (1.0 - t) * a + t * b)
                .collect(),
        )
    }

    fn len(&self) -> f64 {
        self.p.distance(&self.q)
    }
}

/// A boundary sample to evaluate; `seg` locates samples lying on a segment
/// face at position `t`.
#[derive(Clone, Debug)]
struct Site {
    phi: f64,
    m: ExpectedValue,
    face: ExposedFace,
    seg: Option<(Arc<Segment>, f64)>,
}

/// Sample points with their exposed faces. Segment faces are filled with
/// evenly spaced points, consecutive duplicates are dropped.
fn densify(obs: &ObservableSet, pts: &[crate::moments::BoundaryPoint], num_points: usize) -> Vec<Site> {
    let perimeter: f64 = (0..pts.len())
        .map(|i| pts[i].m.distance(&pts[(i + 1) % pts.len()].m))
        .sum();
    let h = perimeter / num_points as f64;
    let min_pieces = num_points.div_ceil(72).max(1);
    let scale = obs.operator_norms().iter().fold(1.0_f64, |a, b| a.max(*b));
    let same = |a: &Site, b: &Site| a.m.distance(&b.m) <= 1e-12 * scale;

    let mut out: Vec<Site> = Vec::new();
    let push = |site: Site, out: &mut Vec<Site>| {
        if let Some(last) = out.last_mut() {
            if same(last, &site) {
                // a shared endpoint keeps its segment description
                if last.seg.is_none() && site.seg.is_some() {
                    *last = site;
                }
                return;
            }
        }
        out.push(site);
    };
    let mut i = 0;
    while i < pts.len() {
        let p = &pts[i];
        let pair = p.face_dim == 1 && i + 1 < pts.len() && pts[i + 1].face_dim == 1 && pts[i + 1].phi == p.phi;
        if pair {
            let q = &pts[i + 1];
            let seg = Arc::new(Segment {
                phi: p.phi,
                p: p.m.clone(),
                q: q.m.clone(),
                face: exposed_face_with(obs, &[p.phi.cos(), p.phi.sin()], EXPOSED_GAP),
            });
            let pieces = ((seg.len() / h).ceil() as usize).max(min_pieces);
            for s in 0..=pieces {
                let t = s as f64 / pieces as f64;
                let face = if s == 0 {
                    p.face.clone()
                } else if s == pieces {
                    q.face.clone()
                } else {
                    seg.face.clone()
                };
                let site = Site {
                    phi: p.phi,
                    m: seg.point(t),
                    face,
                    seg: Some((seg.clone(), t)),
                };
                push(site, &mut out);
            }
            i += 2;
        } else {
            let site = Site {
                phi: p.phi,
                m: p.m.clone(),
                face: p.face.clone(),
                seg: None,
            };
            push(site, &mut out);
            i += 1;
        }
    }
    while out.len() > 1 && same(&out[0], &out[out.len() - 1]) {
        let last = out.pop().expect("non-empty");
        if out[0].seg.is_none() && last.seg.is_some() {
            out[0] = last;
        }
    }
    out
}

/// Part of the boundary path between two samples.
enum Piece<'a> {
    /// Along a segment face between two positions.
    Along(&'a Segment, f64, f64),
    /// Exposed points between two normal angles.
    Turn(f64, f64),
}

/// Bisect a flagged edge down to `resolution`; `None` if the step vanishes.
///
/// The path from `a` to `b` runs along the rest of `a`'s segment, through
/// the exposed points between the two normal angles and along the head of
/// `b`'s segment. The piece carrying the largest step is bisected.
fn bisect_edge(
    engine: &MaxEntInference,
    a: (&Site, &ScanSample),
    b: (&Site, &ScanSample),
    resolution: f64,
    eval: &dyn Fn(f64, &ExpectedValue) -> Result<(ExpectedValue, DensityMatrix)>,
) -> Result<Option<JumpCandidate>> {
    let (sa, xa) = a;
    let (sb, xb) = b;
    let mut pieces: Vec<Piece> = Vec::new();
    match (&sa.seg, &sb.seg) {
        (Some((x, ta)), Some((y, tb))) if Arc::ptr_eq(x, y) => pieces.push(Piece::Along(x, *ta, *tb)),
        _ => {
            if let Some((x, ta)) = &sa.seg {
                if *ta < 1.0 {
                    pieces.push(Piece::Along(x, *ta, 1.0));
                }
            }
            let mut hi = sb.phi;
            if hi < sa.phi {
                hi += 2.0 * PI;
            }
            pieces.push(Piece::Turn(sa.phi, hi));
            if let Some((y, tb)) = &sb.seg {
                if *tb > 0.0 {
                    pieces.push(Piece::Along(y, 0.0, *tb));
                }
            }
        }
    }
    let on_segment = |s: &Segment, t: f64| -> Result<(ExpectedValue, DensityMatrix)> {
        let m = s.point(t);
        let r = engine.infer_on_face(&s.face, &m)?;
        Ok((m, r.state))
    };
    // states where consecutive pieces meet
    let mut ends: Vec<(ExpectedValue, DensityMatrix)> = vec![(xa.m.clone(), xa.state.clone())];
    for k in 0..pieces.len() - 1 {
        let joint = match (&pieces[k], &pieces[k + 1]) {
            (Piece::Along(s, _, t1), _) => on_segment(s, *t1)?,
            (_, Piece::Along(s, t0, _)) => on_segment(s, *t0)?,
            (Piece::Turn(..), Piece::Turn(..)) => unreachable!("turns are never adjacent"),
        };
        ends.push(joint);
    }
    ends.push((xb.m.clone(), xb.state.clone()));
    let k = (0..pieces.len())
        .max_by(|&i, &j| {
            trace_distance(&ends[i].1, &ends[i + 1].1).total_cmp(&trace_distance(&ends[j].1, &ends[j + 1].1))
        })
        .expect("at least one piece");

    let (mut lo, mut hi, unit) = match &pieces[k] {
        Piece::Along(s, t0, t1) => (*t0, *t1, s.len()),
        Piece::Turn(p0, p1) => (*p0, *p1, 1.0),
    };
    let (mut m_lo, mut s_lo) = ends[k].clone();
    let mut s_hi = ends[k + 1].1.clone();
    let mut levels = Vec::new();
    let mut next_level = 1e-3;
    while (hi - lo) * unit > resolution {
        let mid = 0.5 * (lo + hi);
        let (m_mid, s_mid) = match &pieces[k] {
            Piece::Along(s, ..) => on_segment(s, mid)?,
            Piece::Turn(..) => eval(mid, &m_lo)?,
        };
        if trace_distance(&s_lo, &s_mid) >= trace_distance(&s_mid, &s_hi) {
            hi = mid;
            s_hi = s_mid;
        } else {
            lo = mid;
            s_lo = s_mid;
            m_lo = m_mid;
        }
        while (hi - lo) * unit <= next_level && next_level >= resolution * (1.0 - 1e-9) {
            levels.push((next_level, trace_distance(&s_lo, &s_hi)));
            next_level /= 10.0;
        }
    }
    let gap = trace_distance(&s_lo, &s_hi);
    if gap < JUMP_FLOOR {
        return Ok(None);
    }
    let mid = 0.5 * (lo + hi);
    let (parameter, m) = match &pieces[k] {
        Piece::Along(s, ..) => (s.phi, s.point(mid)),
        Piece::Turn(..) => (mid.rem_euclid(2.0 * PI), m_lo),
    };
    Ok(Some(JumpCandidate {
        parameter,
        m,
        frobenius_gap: frobenius_distance(&s_lo, &s_hi),
        left: s_lo,
        right: s_hi,
        value: None,
        gap,
        gap_by_resolution: levels,
    }))
}

// ---------------------------------------------------------------------------
// Radial approach
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct RaySample {
    pub j: usize,
    pub t: f64,
    pub m: ExpectedValue,
    pub state: Option<DensityMatrix>,
    pub path: Option<InferencePath>,
    /// Solver failure at this sample, if any.
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RayProfile {
    pub samples: Vec<RaySample>,
    /// `Ψ(target)`
    pub target_state: DensityMatrix,
    /// `Ψ` at the last sample that solved.
    pub limit: Option<DensityMatrix>,
    /// Trace distance from `limit` to `Ψ(target)`.
    pub limit_gap: Option<f64>,
}

/// `Ψ` along `m_t = (1 − t)·anchor + t·target` with `1 − t = 2⁻ʲ`,
/// `j = 0, …, steps`.
pub fn scan_ray(
    obs: &ObservableSet,
    target: &ExpectedValue,
    interior_anchor: &ExpectedValue,
    steps: usize,
) -> Result<RayProfile> {
    scan_ray_with(obs, target, interior_anchor, steps, &InferenceOptions::default())
}

pub fn scan_ray_with(
    obs: &ObservableSet,
    target: &ExpectedValue,
    interior_anchor: &ExpectedValue,
    steps: usize,
    opts: &InferenceOptions,
) -> Result<RayProfile> {
    let engine = MaxEntInference::new(obs, opts.clone());
    if target.len() != obs.len() || interior_anchor.len() != obs.len() {
        return Err(Error::DimensionMismatch {
            expected: obs.len(),
            got: if target.len() != obs.len() {
                target.len()
            } else {
                interior_anchor.len()
            },
        });
    }
    let body = engine.body();
    if obs.is_independent() {
        let ct = body.classify(&target.coords, opts.classify_tol)?;
        if ct.status != PointStatus::Boundary {
            return Err(Error::InvalidInput("ray target must lie on the boundary".into()));
        }
        let ca = body.classify(&interior_anchor.coords, opts.classify_tol)?;
        if ca.status != PointStatus::Interior {
            return Err(Error::InvalidInput("ray anchor must lie in the interior".into()));
        }
    }
    let target_state = engine.infer(target)?.state;
    let samples: Vec<RaySample> = (0..=steps)
        .into_par_iter()
        .map(|j| {
            let t = 1.0 - (-(j as f64)).exp2();
            let m: Vec<f64> = interior_anchor
                .coords
                .iter()
                .zip(&target.coords)
                .map(|(a, b)| (1.0 - t) * a + t * b)
                .collect();
            let m = ExpectedValue::new(m);
            match engine.infer(&m) {
                Ok(r) => RaySample {
                    j,
                    t,
                    m,
                    state: Some(r.state),
                    path: Some(r.path),
                    error: None,
                },
                Err(e) => RaySample {
                    j,
                    t,
                    m,
                    state: None,
                    path: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let limit = samples.iter().rev().find_map(|s| s.state.clone());
    let limit_gap = limit.as_ref().map(|l| trace_distance(l, &target_state));
    Ok(RayProfile {
        samples,
        target_state,
        limit,
        limit_gap,
    })
}

// ---------------------------------------------------------------------------
// Local continuity
// ---------------------------------------------------------------------------

/// Trace-distance oscillation of `Ψ` at which the probe calls a point
/// discontinuous.
pub const CONTINUITY_TOL: f64 = 1e-2;

#[derive(Clone, Debug, Serialize)]
pub struct ContinuityReport {
    pub m: ExpectedValue,
    pub radii: Vec<f64>,
    /// `max td(Ψ(m'), Ψ(m))` over probed `m'` within each radius.
    pub max_gaps: Vec<f64>,
    pub continuous: bool,
}

/// Oscillation of `Ψ` near `m`: points `m + r·v` for random unit `v`,
/// projected onto the body when they fall outside.
pub fn continuity_probe(
    obs: &ObservableSet,
    m: &ExpectedValue,
    radii: &[f64],
    directions: usize,
    seed: u64,
) -> Result<ContinuityReport> {
    let engine = MaxEntInference::new(obs, InferenceOptions::default());
    let center = engine.infer(m)?.state;
    let owned;
    let body = if obs.is_independent() {
        engine.body()
    } else {
        owned = ExpectedValueBody::new(obs);
        &owned
    };
    let k = obs.len();
    let mut g = random::rng(seed);
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for i in 0..k {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; k];
            e[i] = s;
            dirs.push(e);
        }
    }
    while dirs.len() < directions.max(2 * k) {
        dirs.push(random::random_unit_vector(k, &mut g));
    }
    let mut max_gaps = Vec::with_capacity(radii.len());
    for &r in radii {
        let gaps: Vec<f64> = dirs
            .par_iter()
            .map(|v| -> Result<f64> {
                let y = linalg::axpy(&m.coords, r, v);
                let p = project_to_body(body, &y)?;
                let s = engine.infer(&p)?;
                Ok(trace_distance(&s.state, &center))
            })
            .collect::<Result<_>>()?;
        max_gaps.push(gaps.into_iter().fold(0.0, f64::max));
    }
    let continuous = max_gaps.last().is_some_and(|&g| g < CONTINUITY_TOL);
    Ok(ContinuityReport {
        m: m.clone(),
        radii: radii.to_vec(),
        max_gaps,
        continuous,
    })
}

// ---------------------------------------------------------------------------
// Estimation pipeline
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct DemoRow {
    pub shots: u64,
    /// Raw sample means.
    pub sample_mean: ExpectedValue,
    /// Sample means projected onto the body.
    pub m_n: ExpectedValue,
    pub state: DensityMatrix,
    pub path: InferencePath,
    /// Trace distance to `Ψ(E(true_state))`.
    pub distance: f64,
}

/// Sample means → projection onto the body → `Ψ`, for each shot count.
pub fn estimation_pipeline_demo(
    obs: &ObservableSet,
    true_state: &DensityMatrix,
    shot_schedule: &[u64],
    seed: u64,
) -> Result<Vec<DemoRow>> {
    if true_state.dim() != obs.dim() {
        return Err(Error::DimensionMismatch {
            expected: obs.dim(),
            got: true_state.dim(),
        });
    }
    if true_state.rank() < obs.dim() {
        return Err(Error::InvalidInput("estimation demo needs a full-rank true state".into()));
    }
    let engine = MaxEntInference::new(obs, InferenceOptions::default());
    let owned;
    let body = if obs.is_independent() {
        engine.body()
    } else {
        owned = ExpectedValueBody::new(obs);
        &owned
    };
    let asymptote = engine.infer(&moments_of(obs, true_state.matrix()))?.state;
    shot_schedule
        .par_iter()
        .enumerate()
        .map(|(i, &shots)| {
            let y = simulate_sample_mean(obs, true_state, shots, random::derive_seed(seed, i as u64))?;
            let m_n = project_to_body(body, &y)?;
            let r = engine.infer(&m_n)?;
            Ok(DemoRow {
                shots,
                sample_mean: ExpectedValue::new(y),
                m_n,
                distance: trace_distance(&r.state, &asymptote),
                state: r.state,
                path: r.path,
            })
        })
        .collect()
}
