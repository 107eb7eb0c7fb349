use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Clone, Debug, Parser)]
#[command(name = "qmaxent", version, about = "Maximum-entropy inference for finite-level quantum systems")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Args)]
pub struct GlobalArgs {
    /// Observable set as JSON `{"dim", "observables", "theta"}`.
    #[arg(long, global = true, conflicts_with = "staffelberg")]
    pub config: Option<PathBuf>,
    /// Use the built-in Staffelberg observables.
    #[arg(long, global = true)]
    pub staffelberg: bool,
    /// Residual target of the dual Newton solve.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Tolerance of the interior / boundary / outside decision.
    #[arg(long, global = true, default_value_t = qmaxent::moments::CLASSIFY_TOL)]
    pub classify_tol: f64,
    /// Master seed for all randomness.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Progress and solver diagnostics on stderr.
    #[arg(long, global = true)]
    pub trace: bool,
    /// Directory for CSV/JSON artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

/// A state given as a JSON file or by name.
#[derive(Clone, Debug, Args)]
pub struct StateArgs {
    /// Density matrix as JSON `{"dim", "re", "im"}`.
    #[arg(long, conflicts_with = "named_state")]
    pub state: Option<PathBuf>,
    /// `mixed`, or for the Staffelberg observables `c`, `apex`, `rho:<alpha>`.
    #[arg(long)]
    pub named_state: Option<String>,
}

#[derive(Clone, Debug, Subcommand)]
pub enum Command {
    /// Maximum-entropy inference at one expected value.
    Infer {
        /// Comma-separated expected value.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        m: Vec<f64>,
        /// Cross-check against the primal first-order solver.
        #[arg(long)]
        oracle_check: bool,
        #[arg(long, default_value_t = 200_000)]
        oracle_iterations: usize,
    },
    /// Inference along the boundary of a planar body, with jump detection.
    Scan {
        #[arg(long, default_value_t = 720)]
        points: usize,
        /// Finest parameter resolution of jump refinement.
        #[arg(long, default_value_t = qmaxent::scan::JUMP_RESOLUTION)]
        resolution: f64,
    },
    /// Inference along a radial path from an interior anchor to a boundary target.
    Ray {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        target: Vec<f64>,
        /// Defaults to the expected value of the prior.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        anchor: Option<Vec<f64>>,
        #[arg(long, default_value_t = 20)]
        steps: usize,
    },
    /// Probe whether expected values near a state are reached within a trace-distance ball.
    Openness {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        #[arg(long, default_value_t = 200)]
        probes: usize,
    },
    /// Boundary profile and radial approach to each jump, as CSV.
    Fig2 {
        #[arg(long, default_value_t = 720)]
        points: usize,
        #[arg(long, default_value_t = qmaxent::scan::JUMP_RESOLUTION)]
        resolution: f64,
        #[arg(long, default_value_t = 20)]
        steps: usize,
    },
    /// Boundary of the body and of the image of a half-space neighborhood, as CSV.
    Fig3 {
        #[arg(long, default_value_t = 720)]
        directions: usize,
        /// Normal `w` of `U = {ρ : ⟨ρ, w⟩ ≥ level}` as matrix JSON.
        #[arg(long, requires = "level")]
        normal: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        level: Option<f64>,
    },
    /// Sample means, projection onto the body and inference for a shot schedule.
    Demo {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long, value_delimiter = ',', default_value = "100,10000,1000000")]
        shots: Vec<u64>,
    },
    /// Support function and exposed point in direction `u`.
    Support {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        u: Vec<f64>,
    },
    /// Nearest point of the body.
    Project {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        y: Vec<f64>,
    },
    /// Sample means of simulated projective measurements.
    Simulate {
        #[command(flatten)]
        state: StateArgs,
        /// Shots per observable.
        #[arg(long, default_value_t = 10_000)]
        shots: u64,
    },
}
