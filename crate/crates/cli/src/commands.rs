use std::path::Path;
use std::time::Instant;

use qmaxent::family::{solve_dual_with, DualOptions, NewtonStep};
use qmaxent::fixtures::{self, StaffelbergFixture};
use qmaxent::moments::exposed_face;
use qmaxent::{
    boundary_curve, estimation_pipeline_demo, halfspace_image_boundary, moment_map, openness_probe,
    primal_oracle_with, project_to_body, relative_entropy, scan_boundary_with, scan_ray_with, simulate_sample_mean,
    trace_distance, DensityMatrix, ExpectedValue, ExpectedValueBody, HalfSpaceNeighborhood, HermitianMatrix,
    InferenceOptions, InferenceResult, JumpCandidate, MaxEntInference, NaturalParameters, ObservableConfig,
    ObservableSet, OracleOptions, PointStatus, ScanOptions,
};
use serde::Serialize;

use crate::args::{Cli, Command, GlobalArgs, StateArgs};
use crate::io::{CurveRow, CurveTable, DemoTable, ProfileTable};
use crate::CliError;

/// What a command produced: text for stdout and named artifacts for `--out`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Output {
    pub stdout: String,
    pub files: Vec<(String, String)>,
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

struct Context<'a> {
    global: &'a GlobalArgs,
    obs: ObservableSet,
    fixture: Option<StaffelbergFixture>,
    started: Instant,
}

impl Context<'_> {
    fn trace(&self, msg: impl AsRef<str>) {
        if self.global.trace {
            eprintln!("[{:>9.3}s] {}", self.started.elapsed().as_secs_f64(), msg.as_ref());
        }
    }

    fn inference_options(&self) -> InferenceOptions {
        let mut o = InferenceOptions::with_tol(self.global.tol);
        o.classify_tol = self.global.classify_tol;
        o
    }

    fn expected_value(&self, coords: &[f64], what: &str) -> Result<ExpectedValue, CliError> {
        if coords.len() != self.obs.len() {
            return Err(CliError::input(format!(
                "{what} has {} coordinates, the observable set has {}",
                coords.len(),
                self.obs.len()
            )));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(CliError::input(format!("{what} has non-finite coordinates")));
        }
        Ok(ExpectedValue::new(coords.to_vec()))
    }

    fn planar(&self) -> Result<(), CliError> {
        if self.obs.len() != 2 {
            return Err(qmaxent::Error::NotPlanar(self.obs.len()).into());
        }
        Ok(())
    }

    fn state(&self, args: &StateArgs, default: Option<&str>) -> Result<DensityMatrix, CliError> {
        let n = self.obs.dim();
        let rho = if let Some(path) = &args.state {
            let m: HermitianMatrix = serde_json::from_str(&read(path)?)?;
            DensityMatrix::new(m)?
        } else {
            let name = args
                .named_state
                .as_deref()
                .or(default)
                .ok_or_else(|| CliError::input("a state is required (--state or --named-state)"))?;
            self.named_state(name)?
        };
        if rho.dim() != n {
            return Err(qmaxent::Error::DimensionMismatch {
                expected: n,
                got: rho.dim(),
            }
            .into());
        }
        Ok(rho)
    }

    fn named_state(&self, name: &str) -> Result<DensityMatrix, CliError> {
        match name {
            "mixed" => return Ok(DensityMatrix::maximally_mixed(self.obs.dim())),
            "prior" => return Ok(self.obs.prior()),
            _ => {}
        }
        let fx = self
            .fixture
            .as_ref()
            .ok_or_else(|| CliError::input(format!("named state {name:?} needs --staffelberg")))?;
        match name {
            "c" => Ok(fx.c()),
            "apex" => Ok(fx.apex()),
            _ => match name.strip_prefix("rho:") {
                Some(a) => {
                    let alpha: f64 = a
                        .parse()
                        .map_err(|_| CliError::input(format!("cannot parse angle in {name:?}")))?;
                    Ok(fx.rho(alpha))
                }
                None => Err(CliError::input(format!(
                    "unknown state {name:?}; expected mixed, prior, c, apex or rho:<alpha>"
                ))),
            },
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn load_observables(g: &GlobalArgs) -> Result<(ObservableSet, Option<StaffelbergFixture>), CliError> {
    match (&g.config, g.staffelberg) {
        (_, true) => {
            let fx = fixtures::staffelberg();
            Ok((fx.observable_set().clone(), Some(fx)))
        }
        (Some(path), false) => {
            let cfg: ObservableConfig = serde_json::from_str(&read(path)?)?;
            Ok((ObservableSet::from_config(cfg)?, None))
        }
        (None, false) => Err(CliError::input("an observable set is required (--config or --staffelberg)")),
    }
}

/// Run one command on a worker pool of `--jobs` threads.
pub fn run(cli: &Cli) -> Result<Output, CliError> {
    let started = Instant::now();
    let (obs, fixture) = load_observables(&cli.global)?;
    let ctx = Context {
        global: &cli.global,
        obs,
        fixture,
        started,
    };
    ctx.trace(format!(
        "n = {}, k = {}, affinely independent: {}",
        ctx.obs.dim(),
        ctx.obs.len(),
        ctx.obs.is_independent()
    ));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::input(format!("thread pool: {e}")))?;
    let out = pool.install(|| dispatch(&ctx, &cli.command));
    ctx.trace("done");
    out
}

fn dispatch(ctx: &Context, cmd: &Command) -> Result<Output, CliError> {
    match cmd {
        Command::Infer {
            m,
            oracle_check,
            oracle_iterations,
        } => cmd_infer(ctx, m, *oracle_check, *oracle_iterations),
        Command::Scan { points, resolution } => cmd_scan(ctx, *points, *resolution),
        Command::Ray { target, anchor, steps } => cmd_ray(ctx, target, anchor.as_deref(), *steps),
        Command::Openness {
            state,
            epsilon,
            probes,
        } => cmd_openness(ctx, state, *epsilon, *probes),
        Command::Fig2 {
            points,
            resolution,
            steps,
        } => cmd_fig2(ctx, *points, *resolution, *steps),
        Command::Fig3 {
            directions,
            normal,
            level,
        } => cmd_fig3(ctx, *directions, normal.as_deref(), *level),
        Command::Demo { state, shots } => cmd_demo(ctx, state, shots),
        Command::Support { u } => cmd_support(ctx, u),
        Command::Project { y } => cmd_project(ctx, y),
        Command::Simulate { state, shots } => cmd_simulate(ctx, state, *shots),
    }
}

// ---------------------------------------------------------------------------
// infer
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct OracleCheck {
    trace_distance: f64,
    residual: f64,
    iterations: usize,
    objective: f64,
}

#[derive(Serialize)]
struct InferOutput {
    m: ExpectedValue,
    state: DensityMatrix,
    eigenvalues: Vec<f64>,
    path: String,
    lambda: Option<NaturalParameters>,
    residual: f64,
    objective: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    newton_trace: Option<Vec<NewtonStep>>,
}

fn cmd_infer(ctx: &Context, m: &[f64], oracle_check: bool, oracle_iterations: usize) -> Result<Output, CliError> {
    let m = ctx.expected_value(m, "--m")?;
    let engine = MaxEntInference::new(&ctx.obs, ctx.inference_options());
    let r: InferenceResult = engine.infer(&m)?;
    ctx.trace(format!("path {}, residual {:.3e}", r.path, r.residual));
    let newton_trace = if ctx.global.trace && r.lambda.is_some() && ctx.obs.is_independent() {
        let opts = DualOptions {
            tol: ctx.global.tol,
            record_trace: true,
            ..DualOptions::default()
        };
        Some(solve_dual_with(&ctx.obs, &m, &opts)?.trace)
    } else {
        None
    };
    let oracle = if oracle_check {
        let opts = OracleOptions {
            iterations: oracle_iterations,
            ..OracleOptions::default()
        };
        let o = primal_oracle_with(&ctx.obs, &m, ctx.global.seed, &opts)?;
        ctx.trace(format!("oracle: {} iterations, residual {:.3e}", o.iterations, o.residual));
        Some(OracleCheck {
            trace_distance: trace_distance(&o.state, &r.state),
            residual: o.residual,
            iterations: o.iterations,
            objective: relative_entropy(&o.state, &ctx.obs.prior()),
        })
    } else {
        None
    };
    let out = InferOutput {
        m,
        eigenvalues: r.state.eigenvalues().to_vec(),
        state: r.state,
        path: r.path.to_string(),
        lambda: r.lambda,
        residual: r.residual,
        objective: r.objective,
        oracle,
        newton_trace,
    };
    let text = to_json(&out)?;
    Ok(Output {
        files: vec![("infer.json".into(), text.clone())],
        stdout: text,
    })
}

// ---------------------------------------------------------------------------
// scan / ray
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ScanSummary {
    points: usize,
    samples: usize,
    max_adjacent_gap: f64,
    median_adjacent_gap: f64,
    jump_candidates: Vec<JumpCandidate>,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn scan(ctx: &Context, points: usize, resolution: f64) -> Result<qmaxent::ScanProfile, CliError> {
    ctx.planar()?;
    if !(resolution > 0.0) {
        return Err(CliError::input("--resolution must be positive"));
    }
    let opts = ScanOptions {
        inference: ctx.inference_options(),
        resolution,
    };
    let profile = scan_boundary_with(&ctx.obs, points, &opts)?;
    ctx.trace(format!(
        "scan: {} samples, {} jump candidate(s)",
        profile.samples.len(),
        profile.jump_candidates.len()
    ));
    Ok(profile)
}

fn cmd_scan(ctx: &Context, points: usize, resolution: f64) -> Result<Output, CliError> {
    let profile = scan(ctx, points, resolution)?;
    let gaps = profile.adjacent_gaps();
    let summary = ScanSummary {
        points,
        samples: profile.samples.len(),
        max_adjacent_gap: gaps.iter().copied().fold(0.0, f64::max),
        median_adjacent_gap: median(gaps),
        jump_candidates: profile.jump_candidates.clone(),
    };
    let text = to_json(&summary)?;
    let csv = ProfileTable::from_scan(&profile, ctx.obs.dim(), ctx.obs.len()).to_csv()?;
    Ok(Output {
        files: vec![("scan.json".into(), text.clone()), ("scan_profile.csv".into(), csv)],
        stdout: text,
    })
}

fn prior_moments(ctx: &Context) -> Result<ExpectedValue, CliError> {
    Ok(moment_map(&ctx.obs, &ctx.obs.prior())?)
}

fn cmd_ray(ctx: &Context, target: &[f64], anchor: Option<&[f64]>, steps: usize) -> Result<Output, CliError> {
    let target = ctx.expected_value(target, "--target")?;
    let anchor = match anchor {
        Some(a) => ctx.expected_value(a, "--anchor")?,
        None => prior_moments(ctx)?,
    };
    let ray = scan_ray_with(&ctx.obs, &target, &anchor, steps, &ctx.inference_options())?;
    let text = to_json(&ray)?;
    let table = ProfileTable {
        series: false,
        k: ctx.obs.len(),
        n: ctx.obs.dim(),
        gap_column: "target_distance".into(),
        rows: ProfileTable::ray_rows(&ray, None),
    };
    Ok(Output {
        files: vec![("ray.json".into(), text.clone()), ("ray_profile.csv".into(), table.to_csv()?)],
        stdout: text,
    })
}

// ---------------------------------------------------------------------------
// openness
// ---------------------------------------------------------------------------

fn cmd_openness(ctx: &Context, state: &StateArgs, epsilon: f64, probes: usize) -> Result<Output, CliError> {
    let rho = ctx.state(state, None)?;
    let report = openness_probe(&ctx.obs, &rho, epsilon, probes, ctx.global.seed)?;
    ctx.trace(format!(
        "openness: {:?}, covered radius {:e}",
        report.verdict, report.covered_radius
    ));
    let text = to_json(&report)?;
    Ok(Output {
        files: vec![("openness.json".into(), text.clone())],
        stdout: text,
    })
}

// ---------------------------------------------------------------------------
// figure data
// ---------------------------------------------------------------------------

fn cmd_fig2(ctx: &Context, points: usize, resolution: f64, steps: usize) -> Result<Output, CliError> {
    let profile = scan(ctx, points, resolution)?;
    let mut table = ProfileTable::from_scan(&profile, ctx.obs.dim(), ctx.obs.len());
    table.series = true;
    table.gap_column = "gap".into();
    for r in table.rows.iter_mut() {
        r.series = Some("boundary".into());
    }
    let anchor = prior_moments(ctx)?;
    for (i, jump) in profile.jump_candidates.iter().enumerate() {
        let ray = scan_ray_with(&ctx.obs, &jump.m, &anchor, steps, &ctx.inference_options())?;
        ctx.trace(format!("ray {} to {:?}: limit gap {:?}", i + 1, jump.m.coords, ray.limit_gap));
        table.rows.extend(ProfileTable::ray_rows(&ray, Some(&format!("ray{}", i + 1))));
    }
    let csv = table.to_csv()?;
    Ok(Output {
        files: vec![
            ("fig2.csv".into(), csv.clone()),
            ("fig2_jumps.json".into(), to_json(&profile.jump_candidates)?),
        ],
        stdout: csv,
    })
}

fn cmd_fig3(ctx: &Context, directions: usize, normal: Option<&Path>, level: Option<f64>) -> Result<Output, CliError> {
    ctx.planar()?;
    let (w, level) = match (normal, level, &ctx.fixture) {
        (Some(path), Some(level), _) => {
            let w: HermitianMatrix = serde_json::from_str(&read(path)?)?;
            (w, level)
        }
        (None, _, Some(fx)) => fx.neighborhood_of_c(),
        _ => return Err(CliError::input("fig3 needs --normal and --level unless --staffelberg is given")),
    };
    if w.dim() != ctx.obs.dim() {
        return Err(qmaxent::Error::DimensionMismatch {
            expected: ctx.obs.dim(),
            got: w.dim(),
        }
        .into());
    }
    let body = ExpectedValueBody::new(&ctx.obs);
    let mut rows: Vec<CurveRow> = boundary_curve(&body, directions)?
        .into_iter()
        .enumerate()
        .map(|(i, p)| CurveRow {
            curve: "body".into(),
            index: i,
            phi: p.phi,
            m: p.m.coords,
        })
        .collect();
    let u_set = HalfSpaceNeighborhood::new(w, level);
    let image = halfspace_image_boundary(&ctx.obs, &u_set, directions)?;
    rows.extend(image.into_iter().enumerate().map(|(j, m)| CurveRow {
        curve: "neighborhood".into(),
        index: j,
        phi: 0.5 * std::f64::consts::PI + 2.0 * std::f64::consts::PI * j as f64 / directions as f64,
        m: m.coords,
    }));
    let csv = CurveTable { k: 2, rows }.to_csv()?;
    Ok(Output {
        files: vec![("fig3.csv".into(), csv.clone())],
        stdout: csv,
    })
}

// ---------------------------------------------------------------------------
// estimation and geometry utilities
// ---------------------------------------------------------------------------

fn cmd_demo(ctx: &Context, state: &StateArgs, shots: &[u64]) -> Result<Output, CliError> {
    let rho = ctx.state(state, Some("mixed"))?;
    let rows = estimation_pipeline_demo(&ctx.obs, &rho, shots, ctx.global.seed)?;
    let text = to_json(&rows)?;
    let csv = DemoTable::from_rows(&rows, ctx.obs.len(), ctx.obs.dim()).to_csv()?;
    Ok(Output {
        files: vec![("demo.json".into(), text.clone()), ("demo.csv".into(), csv)],
        stdout: text,
    })
}

#[derive(Serialize)]
struct SupportOutput {
    u: Vec<f64>,
    support: f64,
    face_rank: usize,
    exposed_point: ExpectedValue,
}

fn cmd_support(ctx: &Context, u: &[f64]) -> Result<Output, CliError> {
    ctx.expected_value(u, "--u")?;
    let face = exposed_face(&ctx.obs, u);
    let out = SupportOutput {
        u: u.to_vec(),
        support: face.support,
        face_rank: face.rank(),
        exposed_point: moment_map(&ctx.obs, &face.center())?,
    };
    Ok(Output {
        stdout: to_json(&out)?,
        files: Vec::new(),
    })
}

#[derive(Serialize)]
struct ProjectOutput {
    y: Vec<f64>,
    status: PointStatus,
    m: ExpectedValue,
    distance: f64,
}

fn cmd_project(ctx: &Context, y: &[f64]) -> Result<Output, CliError> {
    let y = ctx.expected_value(y, "--y")?;
    let body = ExpectedValueBody::new(&ctx.obs);
    let status = body.classify(&y.coords, ctx.global.classify_tol)?.status;
    let m = project_to_body(&body, &y.coords)?;
    let out = ProjectOutput {
        distance: m.distance(&y),
        y: y.coords,
        status,
        m,
    };
    Ok(Output {
        stdout: to_json(&out)?,
        files: Vec::new(),
    })
}

#[derive(Serialize)]
struct SimulateOutput {
    shots: u64,
    seed: u64,
    sample_mean: Vec<f64>,
    expected: ExpectedValue,
}

fn cmd_simulate(ctx: &Context, state: &StateArgs, shots: u64) -> Result<Output, CliError> {
    let rho = ctx.state(state, Some("mixed"))?;
    let out = SimulateOutput {
        shots,
        seed: ctx.global.seed,
        sample_mean: simulate_sample_mean(&ctx.obs, &rho, shots, ctx.global.seed)?,
        expected: moment_map(&ctx.obs, &rho)?,
    };
    Ok(Output {
        stdout: to_json(&out)?,
        files: Vec::new(),
    })
}
