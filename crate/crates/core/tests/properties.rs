use std::f64::consts::PI;

use qmaxent::family::AffineReduction;
use qmaxent::fixtures::{staffelberg, triangle};
use qmaxent::linalg::{CMatrix, C64};
use qmaxent::random::{self, Rng};
use qmaxent::*;
use rand::Rng as _;

fn unit(a: HermitianMatrix) -> HermitianMatrix {
    let s = a.spectral_norm();
    a.scale(1.0 / s)
}

fn random_set(n: usize, k: usize, g: &mut Rng) -> ObservableSet {
    loop {
        let obs = (0..k).map(|_| unit(random::random_hermitian(n, 1.0, g))).collect();
        let set = ObservableSet::new(obs, random::random_hermitian(n, 0.5, g)).unwrap();
        if set.is_independent() {
            return set;
        }
    }
}

/// Observables whose first member has a top eigenspace of rank `r`, and a
/// point of the image of a full-rank state on that eigenspace.
fn boundary_instance(g: &mut Rng) -> (ObservableSet, ExpectedValue) {
    let n = g.random_range(3..=4);
    let r = g.random_range(2..n);
    let k = g.random_range(2..=3);
    loop {
        let u = random::random_unitary(n, g);
        let mut diag = vec![1.0; r];
        diag.extend((r..n).map(|_| -1.0 + 1.5 * g.random::<f64>()));
        let a1 = HermitianMatrix::symmetrize(u.matmul(&CMatrix::from_real_diag(&diag)).matmul(&u.adjoint()));
        let mut obs = vec![a1];
        obs.extend((1..k).map(|_| unit(random::random_hermitian(n, 1.0, g))));
        let set = ObservableSet::new(obs, random::random_hermitian(n, 0.5, g)).unwrap();
        if !set.is_independent() {
            continue;
        }
        let cols: Vec<Vec<C64>> = (0..r).map(|j| u.column(j)).collect();
        let b = CMatrix::from_columns(&cols);
        let tau = random::random_density(r, g);
        let sigma = HermitianMatrix::symmetrize(b.matmul(tau.as_cmatrix()).matmul(&b.adjoint()));
        let m = moment_map(&set, &DensityMatrix::from_positive(sigma)).unwrap();
        return (set, m);
    }
}

fn is_boundary(obs: &ObservableSet, m: &ExpectedValue) -> bool {
    let body = ExpectedValueBody::new(obs);
    classify_point(&body, m, 1e-9).unwrap().status == PointStatus::Boundary
}

#[test]
fn constraints_hold_for_every_solved_point() {
    let mut g = random::rng(101);
    for i in 0..40 {
        let n = 2 + i % 3;
        let k = 1 + i % 3;
        let obs = random_set(n, k, &mut g);
        let rank = 1 + g.random_range(0..n);
        let rho = random::random_density_of_rank(n, rank, &mut g);
        let m = moment_map(&obs, &rho).unwrap();
        let psi = infer(&obs, &m, 1e-9).unwrap();
        let e = moment_map(&obs, &psi.state).unwrap();
        assert!(e.distance(&m) <= 1e-8, "instance {i}: residual {}", e.distance(&m));
    }
    for _ in 0..10 {
        let (obs, m) = boundary_instance(&mut g);
        let psi = infer(&obs, &m, 1e-9).unwrap();
        assert!(moment_map(&obs, &psi.state).unwrap().distance(&m) <= 1e-8);
    }
}

#[test]
fn no_state_on_the_fiber_has_lower_relative_entropy() {
    let mut g = random::rng(202);
    let mut cases: Vec<(ObservableSet, ExpectedValue)> = (0..6)
        .map(|i| {
            let obs = random_set(3 + i % 2, 1 + i % 2, &mut g);
            let m = moment_map(&obs, &random::random_density(obs.dim(), &mut g)).unwrap();
            (obs, m)
        })
        .collect();
    cases.extend((0..4).map(|_| boundary_instance(&mut g)));
    let fx = staffelberg();
    cases.push((fx.observable_set().clone(), fx.m0()));
    for (obs, m) in &cases {
        let psi = infer(obs, m, 1e-9).unwrap();
        let sigma = obs.prior();
        let mut sampled = 0;
        for _ in 0..30 {
            let Some(other) = sample_fiber(obs, &psi.state, &mut g) else {
                continue;
            };
            sampled += 1;
            assert!(moment_map(obs, &other).unwrap().distance(m) <= 1e-8);
            assert!(relative_entropy(&other, &sigma) >= psi.objective - 1e-6);
        }
        assert!(sampled > 0);
    }
}

/// Classical maximum entropy on `n` outcomes: `p ∝ q·e^{λ·a}` by Newton on
/// the log-partition function.
fn classical_maxent(q: &[f64], a: &[Vec<f64>], m: &[f64]) -> Vec<f64> {
    let n = q.len();
    let k = a.len();
    let mut lambda = vec![0.0; k];
    let dist = |lambda: &[f64]| {
        let w: Vec<f64> = (0..n)
            .map(|j| q[j] * (0..k).map(|i| lambda[i] * a[i][j]).sum::<f64>().exp())
            .collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|x| x / z).collect::<Vec<f64>>()
    };
    for _ in 0..100 {
        let p = dist(&lambda);
        let mean: Vec<f64> = (0..k).map(|i| (0..n).map(|j| p[j] * a[i][j]).sum()).collect();
        let grad: Vec<f64> = (0..k).map(|i| mean[i] - m[i]).collect();
        if grad.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-14 {
            break;
        }
        let cov: Vec<Vec<f64>> = (0..k)
            .map(|i| {
                (0..k)
                    .map(|l| (0..n).map(|j| p[j] * a[i][j] * a[l][j]).sum::<f64>() - mean[i] * mean[l])
                    .collect()
            })
            .collect();
        let step = qmaxent::linalg::solve_linear(&cov, &grad).unwrap();
        for i in 0..k {
            lambda[i] -= step[i];
        }
    }
    dist(&lambda)
}

#[test]
fn commuting_observables_reduce_to_classical_maxent() {
    let mut g = random::rng(303);
    for _ in 0..10 {
        let n = g.random_range(2..=5);
        let k = g.random_range(1..n.min(4));
        let a: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| 2.0 * g.random::<f64>() - 1.0).collect()).collect();
        let theta: Vec<f64> = (0..n).map(|_| g.random::<f64>() - 0.5).collect();
        let diag = |v: &[f64]| HermitianMatrix::symmetrize(CMatrix::from_real_diag(v));
        let obs = ObservableSet::new(a.iter().map(|v| diag(v)).collect(), diag(&theta)).unwrap();
        let p: Vec<f64> = (0..n).map(|_| 0.1 + g.random::<f64>()).collect();
        let total: f64 = p.iter().sum();
        let m: Vec<f64> = (0..k).map(|i| (0..n).map(|j| p[j] * a[i][j]).sum::<f64>() / total).collect();

        let z: f64 = theta.iter().map(|t| t.exp()).sum();
        let q: Vec<f64> = theta.iter().map(|t| t.exp() / z).collect();
        let expected = classical_maxent(&q, &a, &m);

        let psi = infer(&obs, &ExpectedValue::new(m), 1e-10).unwrap();
        let rho = psi.state.as_cmatrix();
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { expected[i] } else { 0.0 };
                assert!((rho[(i, j)] - C64::new(want, 0.0)).norm() < 1e-8);
            }
        }
    }
}

#[test]
fn triangle_edges_are_classical_two_point_distributions() {
    let obs = triangle();
    for p in [0.1, 0.5, 0.8] {
        // p·e₁ + (1 − p)·e₂
        let m = ExpectedValue::new(vec![2.0 * p - 1.0, 1.0 - p]);
        let psi = infer(&obs, &m, 1e-10).unwrap();
        let rho = psi.state.as_cmatrix();
        assert!((rho[(0, 0)].re - p).abs() < 1e-9);
        assert!((rho[(1, 1)].re - (1.0 - p)).abs() < 1e-9);
        assert!(rho[(2, 2)].re.abs() < 1e-9);
        assert!(matches!(psi.path, InferencePath::FaceCompressed(_)));
    }
}

#[test]
fn oracle_seeds_agree() {
    let mut g = random::rng(404);
    for _ in 0..3 {
        let obs = random_set(3, 2, &mut g);
        let m = moment_map(&obs, &random::random_density(3, &mut g)).unwrap();
        let states: Vec<_> = (0..3).map(|s| primal_oracle(&obs, &m, 50_000, s).unwrap()).collect();
        for s in &states[1..] {
            assert!(trace_distance(&states[0], s) <= 1e-6);
        }
        let again = primal_oracle(&obs, &m, 50_000, 0).unwrap();
        assert_eq!(again, states[0]);
    }
}

#[test]
fn interior_values_are_gibbs_states_and_boundary_values_their_limits() {
    let mut g = random::rng(505);
    for _ in 0..5 {
        let obs = random_set(3, 2, &mut g);
        let m = moment_map(&obs, &random::random_density(3, &mut g)).unwrap();
        let psi = infer(&obs, &m, 1e-10).unwrap();
        let lambda = psi.lambda.expect("interior");
        assert!(trace_distance(&gibbs_state(&obs, &lambda).unwrap(), &psi.state) < 1e-10);
    }

    // Staffelberg: along λ = t·(0, 1) the Gibbs states approach c
    let fx = staffelberg();
    let obs = fx.observable_set();
    let far = gibbs_state(obs, &NaturalParameters::new(vec![0.0, 40.0])).unwrap();
    assert!(trace_distance(&far, &fx.c()) < 1e-4);

    for _ in 0..5 {
        let (obs, m) = boundary_instance(&mut g);
        let body = ExpectedValueBody::new(&obs);
        let cls = classify_point(&body, &m, 1e-9).unwrap();
        assert_eq!(cls.status, PointStatus::Boundary);
        let u = cls.supporting_direction.clone().unwrap();
        let face = compress_to_face(&obs, &cls).unwrap();
        let red = AffineReduction::new(&face.observables);
        let ms = red.reduce(&m.coords, 1e-8).unwrap();
        let sub = face.observables.select(&red.kept);
        let sol = solve_dual(&sub, &ExpectedValue::new(ms), 1e-12).unwrap();
        let inner = red.expand(obs.len(), &sol.lambda.lambda);

        let psi = infer(&obs, &m, 1e-10).unwrap();
        let t = 1e6;
        let lambda: Vec<f64> = u.iter().zip(&inner).map(|(ui, li)| t * ui + li).collect();
        // past the overflow guard of gibbs_state: exponentiate the shifted spectrum
        let dec = spectral_decompose(&obs.exponent(&lambda));
        let top = dec.eigenvalues[0];
        let w: Vec<f64> = dec.eigenvalues.iter().map(|d| (d - top).exp()).collect();
        let z: f64 = w.iter().sum();
        let p: Vec<f64> = w.iter().map(|x| x / z).collect();
        let ray = DensityMatrix::from_positive(dec.compose(&p));
        assert!(trace_distance(&ray, &psi.state) < 1e-4, "{}", trace_distance(&ray, &psi.state));
    }
}

#[test]
fn openness_is_monotone_in_the_ball_radius() {
    let fx = staffelberg();
    let obs = fx.observable_set();
    let mut g = random::rng(606);
    let states = [fx.c(), fx.rho(PI), obs.prior(), random::random_density(3, &mut g)];
    for rho in &states {
        let verdicts: Vec<bool> = [0.01, 0.03, 0.1]
            .iter()
            .map(|&eps| openness_probe(obs, rho, eps, 60, 1).unwrap().verdict == OpennessVerdict::OpenAtScale)
            .collect();
        for w in verdicts.windows(2) {
            assert!(!w[0] || w[1], "open at a smaller ball but not a larger one: {verdicts:?}");
        }
    }
}

#[test]
fn halfspace_image_is_convex_and_inside_the_body() {
    let fx = staffelberg();
    let obs = fx.observable_set();
    let (w, level) = fx.neighborhood_of_c();
    let curve = halfspace_image_boundary(obs, &HalfSpaceNeighborhood::new(w, level), 360).unwrap();
    let body = ExpectedValueBody::new(obs);
    for p in &curve {
        for j in 0..64 {
            let a = 2.0 * PI * j as f64 / 64.0;
            let u = [a.cos(), a.sin()];
            assert!(u[0] * p[0] + u[1] * p[1] <= support_function(&body, &u) + 1e-9);
        }
    }
    // counter-clockwise turns only
    let n = curve.len();
    for i in 0..n {
        let (a, b, c) = (&curve[i], &curve[(i + 1) % n], &curve[(i + 2) % n]);
        let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
        assert!(cross >= -1e-12, "clockwise turn at {i}: {cross}");
    }
}

#[test]
fn jumps_sit_exactly_where_openness_fails() {
    let fx = staffelberg();
    let obs = fx.observable_set();
    let profile = scan_boundary(obs, 180).unwrap();
    assert_eq!(profile.jump_candidates.len(), 1);
    let opts = LemmaOptions {
        probes: 60,
        ..LemmaOptions::default()
    };
    let jump = &profile.jump_candidates[0];
    let r = lemma_cross_check(obs, &jump.m, &opts).unwrap();
    assert!(!r.continuous && !r.open);

    let step = profile.samples.len() / 5;
    let mut checked = 0;
    for s in profile.samples.iter().step_by(step) {
        if s.m.distance(&jump.m) < 0.1 || !is_boundary(obs, &s.m) {
            continue;
        }
        let r = lemma_cross_check(obs, &s.m, &opts).unwrap();
        assert!(r.continuous && r.open, "at {:?}", s.m.coords);
        checked += 1;
    }
    assert!(checked >= 3);
}
