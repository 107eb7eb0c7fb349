//! Command-line front end: argument definitions, command handlers and the
//! CSV artifact formats.

pub mod args;
pub mod commands;
pub mod io;

use std::fmt;
use std::path::Path;

use serde::Serialize;

pub use args::Cli;
pub use commands::{run, Output};

/// Exit code for malformed input.
pub const EXIT_INPUT: i32 = 1;
/// Exit code for expected values outside the body.
pub const EXIT_OUTSIDE: i32 = 2;
/// Exit code for solver failures.
pub const EXIT_SOLVER: i32 = 3;

/// A failed command, written to stderr as `{"error", "message"}`.
#[derive(Clone, Debug, Serialize)]
pub struct CliError {
    pub error: String,
    pub message: String,
    #[serde(skip)]
    pub code: i32,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            error: "MalformedInput".into(),
            message: message.into(),
            code: EXIT_INPUT,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("error serializes")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.error, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<qmaxent::Error> for CliError {
    fn from(e: qmaxent::Error) -> Self {
        use qmaxent::Error as E;
        let (kind, code) = match &e {
            E::OutsideBody { .. } => ("OutsideBody", EXIT_OUTSIDE),
            E::ConvergenceFailure { .. } => ("ConvergenceFailure", EXIT_SOLVER),
            E::NotInterior { .. } => ("NotInterior", EXIT_SOLVER),
            E::SingularHessian => ("SingularHessian", EXIT_SOLVER),
            E::OverflowGuard { .. } => ("OverflowGuard", EXIT_SOLVER),
            E::Domain(_) => ("Domain", EXIT_SOLVER),
            E::DegenerateFace => ("DegenerateFace", EXIT_SOLVER),
            E::DimensionMismatch { .. } => ("DimensionMismatch", EXIT_INPUT),
            E::NotSquare { .. } => ("NotSquare", EXIT_INPUT),
            E::NotHermitian(_) => ("NotHermitian", EXIT_INPUT),
            E::InvalidDensity(_) => ("InvalidDensity", EXIT_INPUT),
            E::GridTooCoarse { .. } => ("GridTooCoarse", EXIT_INPUT),
            E::NotPlanar(_) => ("NotPlanar", EXIT_INPUT),
            E::EmptyNeighborhood => ("EmptyNeighborhood", EXIT_INPUT),
            E::InvalidInput(_) => ("InvalidInput", EXIT_INPUT),
        };
        Self {
            error: kind.into(),
            message: e.to_string(),
            code,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self {
            error: "Io".into(),
            message: e.to_string(),
            code: EXIT_INPUT,
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::input(format!("JSON: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::input(format!("CSV: {e}"))
    }
}

/// Parse the command line, run it, print stdout and write artifacts.
/// Returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprintln!("{}", CliError::input(e.to_string().trim_end()).to_json());
            return EXIT_INPUT;
        }
    };
    match run(&cli).and_then(|out| emit(&cli, &out)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.code
        }
    }
}

fn emit(cli: &Cli, out: &Output) -> Result<(), CliError> {
    use std::io::Write;
    if let Some(dir) = &cli.global.out {
        std::fs::create_dir_all(dir)?;
        for (name, text) in &out.files {
            std::fs::write(Path::new(dir).join(name), text)?;
        }
    }
    let mut stdout = std::io::stdout().lock();
    match stdout.write_all(out.stdout.as_bytes()).and_then(|()| stdout.flush()) {
        // a closed reader (`| head`) is not an error
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}
