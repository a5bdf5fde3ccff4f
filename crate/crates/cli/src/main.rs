//! `biphoton`: state prediction, tomography and coincidence-histogram
//! analysis for cascade photon-pair sources.

mod commands;
mod output;
mod parse;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit status for malformed or physically invalid input.
const EXIT_INVALID_INPUT: u8 = 2;
/// Exit status for a numerical procedure that failed on valid input.
const EXIT_COMPUTATION: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "biphoton",
    version,
    about = "Polarization-entangled photon pairs from atomic cascades"
)]
struct Cli {
    /// Seed for every random draw; recorded in each output's metadata.
    #[arg(long, global = true, env = "BIPHOTON_SEED", default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Predict the polarization state of a decay path.
    Predict(PredictArgs),
    /// Simulate tomographic coincidence counts for a state.
    SimulateTomo(SimulateTomoArgs),
    /// Reconstruct a density matrix from a counts file.
    Reconstruct(ReconstructArgs),
    /// Bootstrap uncertainties of the entanglement indicators.
    Resample(ResampleArgs),
    /// Simulate a coincidence histogram.
    SimulateG2(SimulateG2Args),
    /// Fit a coincidence histogram.
    FitG2(FitG2Args),
    /// Beat ratio and phase for given analyzer settings.
    BeatParams(BeatParamsArgs),
}

#[derive(Args, Debug)]
struct OutputArg {
    /// Output file; standard output when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Decay path X (F = 2,2,3,3) or Y (F = 2,2,3,2).
    #[arg(long, conflicts_with = "levels", required_unless_present = "levels")]
    path: Option<String>,
    /// Custom hyperfine levels `F_g,F_b,F_e,F_d`.
    #[arg(long)]
    levels: Option<String>,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SettingsArg {
    Minimal16,
    Overcomplete36,
}

#[derive(Args, Debug)]
struct SimulateTomoArgs {
    /// `X`, `Y`, or a JSON file with a ket or density matrix.
    #[arg(long, default_value = "X")]
    state: String,
    /// Weight of the state against white noise, `p ρ + (1 − p) I/4`.
    #[arg(long, default_value_t = 1.0)]
    visibility: f64,
    #[arg(long, value_enum, default_value_t = SettingsArg::Overcomplete36)]
    settings: SettingsArg,
    /// Mean coincidences per setting for unit outcome probability.
    #[arg(long, default_value_t = 1e5)]
    n: f64,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Mle,
    Linear,
}

#[derive(Args, Debug)]
struct CountsInput {
    /// Counts CSV.
    #[arg(long, short)]
    input: PathBuf,
    /// Flat accidental level subtracted from every setting, clamped at zero.
    #[arg(long, default_value_t = 0.0)]
    background: f64,
    /// Target state for the fidelity: `X`, `Y`, or a ket JSON file.
    #[arg(long)]
    target: Option<String>,
}

#[derive(Args, Debug)]
struct ReconstructArgs {
    #[command(flatten)]
    counts: CountsInput,
    #[arg(long, value_enum, default_value_t = Method::Mle)]
    method: Method,
    /// Bootstrap resamples to attach (maximum likelihood only).
    #[arg(long, default_value_t = 0)]
    resamples: usize,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Args, Debug)]
struct ResampleArgs {
    #[command(flatten)]
    counts: CountsInput,
    #[arg(long, default_value_t = 100)]
    n_resamples: usize,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Args, Debug, Default)]
struct BeatOverrides {
    /// Path-X decay time (ns).
    #[arg(long)]
    tau_x: Option<f64>,
    /// Path-Y decay time (ns).
    #[arg(long)]
    tau_y: Option<f64>,
    /// Relative amplitude of path Y.
    #[arg(long)]
    r: Option<f64>,
    /// Relative phase of path Y (rad).
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<f64>,
    /// Beat angular frequency (rad/ns).
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Args, Debug)]
struct SimulateG2Args {
    /// fig2x, fig2y, fig3, fig4a, fig4b or fig4c.
    #[arg(long, required_unless_present = "model")]
    preset: Option<String>,
    /// Model JSON (`{"model": "single"|"beats", ...}`).
    #[arg(long, conflicts_with = "preset")]
    model: Option<PathBuf>,
    #[command(flatten)]
    beat: BeatOverrides,
    /// Bin width (ns).
    #[arg(long)]
    bin_width: Option<f64>,
    /// First bin start (ns).
    #[arg(long, allow_hyphen_values = true)]
    t_start: Option<f64>,
    /// End of the last bin (ns).
    #[arg(long, allow_hyphen_values = true)]
    t_end: Option<f64>,
    /// Gaussian timing jitter (ns).
    #[arg(long)]
    jitter: Option<f64>,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    Single,
    Beats,
}

#[derive(Args, Debug)]
struct FitG2Args {
    /// Histogram CSV.
    #[arg(long, short)]
    input: PathBuf,
    /// Model to fit; defaults to the preset's model, else `single`.
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    /// Preset supplying the fixed beat parameters and starting values.
    #[arg(long)]
    preset: Option<String>,
    #[command(flatten)]
    beat: BeatOverrides,
    /// Fit a time offset of Δt = 0.
    #[arg(long)]
    fit_offset: bool,
    /// Keep the rise time at its starting value (single-path fits).
    #[arg(long)]
    fix_tau_r: bool,
    #[arg(long)]
    free_r: bool,
    #[arg(long)]
    free_phi: bool,
    #[arg(long)]
    free_delta: bool,
    #[arg(long)]
    free_tau_x: bool,
    #[arg(long)]
    free_tau_y: bool,
    /// Also write `bin_start_ns,counts,model` rows for plotting.
    #[arg(long)]
    curve: Option<PathBuf>,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Args, Debug)]
struct BeatParamsArgs {
    /// Path-X state: `X` or a ket JSON file.
    #[arg(long, default_value = "X")]
    ket_x: String,
    /// Path-Y state: `Y` or a ket JSON file.
    #[arg(long, default_value = "Y")]
    ket_y: String,
    /// Signal analyzer: H, V, D, A, L, R or `c_h,c_v`.
    #[arg(long, required_unless_present = "search", allow_hyphen_values = true)]
    proj_s: Option<String>,
    /// Idler analyzer: H, V, D, A, L, R or `c_h,c_v`.
    #[arg(long, required_unless_present = "search", allow_hyphen_values = true)]
    proj_i: Option<String>,
    /// Search analyzer settings realizing `R,phi` instead.
    #[arg(long, conflicts_with_all = ["proj_s", "proj_i"], allow_hyphen_values = true)]
    search: Option<String>,
    /// Residual below which a searched target counts as attainable.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[command(flatten)]
    out: OutputArg,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use biphoton_core::Error as E;
    let core = err.chain().find_map(|e| e.downcast_ref::<E>());
    match core {
        Some(E::NotConverged { .. } | E::FitNotConverged { .. } | E::FitDegenerate(_)) => EXIT_COMPUTATION,
        _ => EXIT_INVALID_INPUT,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Predict(a) => commands::predict(cli.seed, a),
        Command::SimulateTomo(a) => commands::simulate_tomo(cli.seed, a),
        Command::Reconstruct(a) => commands::reconstruct(cli.seed, a),
        Command::Resample(a) => commands::resample(cli.seed, a),
        Command::SimulateG2(a) => commands::simulate_g2(cli.seed, a),
        Command::FitG2(a) => commands::fit_g2(cli.seed, a),
        Command::BeatParams(a) => commands::beat_params(cli.seed, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
