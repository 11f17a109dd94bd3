//! `qtraj`: validate instruments, certify their structure, simulate filter
//! campaigns and study invariant measures.
//!
//! Exit codes: 0 success, 1 validation failure, 2 runtime error.

mod commands;
mod output;
mod parse;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qtraj_core::Tolerances;

#[derive(Parser, Debug)]
#[command(name = "qtraj", version, about = "Quantum trajectories under imperfect measurement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check file schema, detector bias columns and trace preservation.
    Validate(Common),
    /// Certify irreducibility, period and primitivity of the total channel.
    Analyze(Common),
    /// Run true-state/estimate filter pairs over a range of seeds.
    Simulate(SimulateArgs),
    /// Search for a word sequence whose maps approach rank one.
    Contractivity(ContractivityArgs),
    /// Sample the invariant measure of the trajectory chain and compare replicas.
    Invariant(InvariantArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Instrument JSON file.
    pub instrument: PathBuf,
    /// Output directory. Reports also go to stdout; simulate, contractivity
    /// and invariant write to qtraj-out when omitted.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Omit the timestamp from metadata headers.
    #[arg(long)]
    pub no_timestamp: bool,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[command(flatten)]
    pub tol: TolArgs,
}

#[derive(Args, Debug, Clone)]
pub struct TolArgs {
    /// Hermiticity residual for states.
    #[arg(long, default_value = "1e-9", value_name = "TOL", help_heading = "Tolerances")]
    pub tol_herm: f64,
    /// Unit-trace residual for states.
    #[arg(long, default_value = "1e-9", value_name = "TOL", help_heading = "Tolerances")]
    pub tol_tr: f64,
    /// Eigenvalues below this magnitude count as zero.
    #[arg(long, default_value = "1e-9", value_name = "TOL", help_heading = "Tolerances")]
    pub tol_psd: f64,
    /// PSD square-root reconstruction error.
    #[arg(long, default_value = "1e-8", value_name = "TOL", help_heading = "Tolerances")]
    pub tol_sqrt: f64,
    /// Completeness residual for instruments.
    #[arg(long, default_value = "1e-9", value_name = "TOL", help_heading = "Tolerances")]
    pub tol_tp: f64,
    /// Fixed-space singular value threshold.
    #[arg(long, default_value = "1e-8", value_name = "TOL", help_heading = "Tolerances")]
    pub tol_fix: f64,
    /// Peripheral spectrum shell width.
    #[arg(long, default_value = "1e-6", value_name = "TOL", help_heading = "Tolerances")]
    pub tol_peri: f64,
    /// Smallest eigenvalue counted as positive.
    #[arg(long, default_value = "1e-8", value_name = "TOL", help_heading = "Tolerances")]
    pub tol_rank: f64,
    /// Rank-one defect needed for a contractivity certificate.
    #[arg(long, default_value = "1e-6", value_name = "TOL", help_heading = "Tolerances")]
    pub tol_cont: f64,
    /// Residual for the non-darkness equality.
    #[arg(long, default_value = "1e-9", value_name = "TOL", help_heading = "Tolerances")]
    pub tol_nd: f64,
    /// Outcome probability at which the estimate is declared collapsed.
    #[arg(long, default_value = "1e-12", value_name = "TOL", help_heading = "Tolerances")]
    pub tol_filter: f64,
}

impl TolArgs {
    fn tolerances(&self) -> Tolerances {
        Tolerances {
            herm: self.tol_herm,
            tr: self.tol_tr,
            psd: self.tol_psd,
            sqrt: self.tol_sqrt,
            tp: self.tol_tp,
            fix: self.tol_fix,
            peri: self.tol_peri,
            rank: self.tol_rank,
            cont: self.tol_cont,
            nd: self.tol_nd,
            filter: self.tol_filter,
        }
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Seed range `A..B` (end exclusive).
    #[arg(long, default_value = "0..200", value_parser = parse::parse_seeds, conflicts_with = "seed")]
    pub seeds: std::ops::Range<u64>,
    /// Single seed; overrides --seeds.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Steps per run.
    #[arg(long, default_value_t = 500)]
    pub steps: usize,
    /// True initial state: mixed, basis:k, diag:p1,p2,... or pure:a1,a2,...
    #[arg(long, default_value = "basis:0", value_name = "STATE")]
    pub rho0: String,
    /// Initial estimate.
    #[arg(long, default_value = "mixed", value_name = "STATE")]
    pub estimate: String,
    /// Also dump both states at every step as matrix blocks.
    #[arg(long)]
    pub store_states: bool,
}

#[derive(Args, Debug)]
pub struct ContractivityArgs {
    #[command(flatten)]
    pub common: Common,
    /// Certify powers of this word (comma-separated outcome labels) instead
    /// of searching.
    #[arg(long, value_name = "LABELS")]
    pub word: Option<String>,
    /// Maximum power of --word.
    #[arg(long, default_value_t = 500)]
    pub n_max: usize,
    /// Maximum total search length.
    #[arg(long, default_value_t = 2000)]
    pub max_len: usize,
    /// State driving the random-trajectory search.
    #[arg(long, default_value = "mixed", value_name = "STATE")]
    pub probe: String,
    /// Beam search width; 0 disables the beam search.
    #[arg(long, default_value_t = qtraj_core::contractivity::BEAM_WIDTH)]
    pub beam_width: usize,
    /// Longest word explored by the beam search.
    #[arg(long, default_value_t = qtraj_core::contractivity::BEAM_DEPTH)]
    pub beam_depth: usize,
    /// Seed for the trajectory search and subspace sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Haar subspaces per dimension for the non-darkness falsifier; 0 skips
    /// it. Needs an instrument given by perfect operators.
    #[arg(long, default_value_t = 0, value_name = "N")]
    pub nd_subspaces: usize,
    /// Longest word tried by the non-darkness falsifier.
    #[arg(long, default_value_t = 6)]
    pub nd_max_len: usize,
}

#[derive(Args, Debug)]
pub struct InvariantArgs {
    #[command(flatten)]
    pub common: Common,
    /// Initial state of the first replica.
    #[arg(long, default_value = "basis:0", value_name = "STATE")]
    pub rho0: String,
    /// Initial state of the second replica.
    #[arg(long, default_value = "mixed", value_name = "STATE")]
    pub rho0_alt: String,
    /// Samples per replica.
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    /// Steps discarded before the first sample.
    #[arg(long, default_value_t = qtraj_core::ergodic::DEFAULT_BURN_IN)]
    pub burn_in: usize,
    /// Steps between kept samples.
    #[arg(long, default_value_t = qtraj_core::ergodic::DEFAULT_THINNING)]
    pub thin: usize,
    /// Seed of the first replica; the second uses seed + 1.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest measure solved exactly; larger ones are subsampled.
    #[arg(long, default_value_t = qtraj_core::ergodic::LP_CAP)]
    pub lp_cap: usize,
    /// Subsampling repetitions above the LP cap.
    #[arg(long, default_value_t = qtraj_core::ergodic::SUBSAMPLE_REPS)]
    pub reps: usize,
    /// LP cap for comparing a sample with its one-step push.
    #[arg(long, default_value_t = 4000)]
    pub push_cap: usize,
    /// Observables for ergodic means: purity, entropy, max-eig or
    /// diag:a1,a2,... (repeatable).
    #[arg(long = "observable", default_value = "purity", value_name = "OBS")]
    pub observables: Vec<String>,
    /// Trajectory length for ergodic means.
    #[arg(long, default_value_t = 100_000)]
    pub ergodic_steps: usize,
    /// Spacing of running-mean records.
    #[arg(long, default_value_t = 1000)]
    pub trace_every: usize,
    /// Write running-mean traces as CSV.
    #[arg(long)]
    pub emit_plot_data: bool,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Validation(_) => 1,
            Self::Runtime(_) => 2,
        }
    }
}

impl From<qtraj_core::Error> for Failure {
    fn from(e: qtraj_core::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Validate(c) | Command::Analyze(c) => c,
        Command::Simulate(a) => &a.common,
        Command::Contractivity(a) => &a.common,
        Command::Invariant(a) => &a.common,
    };
    qtraj_core::set_tolerances(common.tol.tolerances());
    if common.jobs > 0 {
        // Fails only if a pool already exists, which never happens here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(common.jobs).build_global();
    }
    let result = match &cli.command {
        Command::Validate(c) => commands::validate(c),
        Command::Analyze(c) => commands::analyze(c),
        Command::Simulate(a) => commands::simulate(a),
        Command::Contractivity(a) => commands::contractivity(a),
        Command::Invariant(a) => commands::invariant(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Validation(msg) => eprintln!("validation failed: {msg}"),
                Failure::Runtime(msg) => eprintln!("error: {msg}"),
            }
            ExitCode::from(f.code())
        }
    }
}
