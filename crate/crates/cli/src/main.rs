//! `vampire`: command-line front end for the DRAM energy model.

mod commands;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

macro_rules! trace_format {
    () => {
        "\
Trace files: one command per line, `cycle,KIND[,bank[,row|column[,payload]]]`.
KIND is ACT (bank,row), PRE (bank), PREA, RD/WR (bank,column,payload), REF,
PDE, PDX or END. `cycle` counts 2.5 ns clock cycles; the payload is the 64-byte
line as 128 hex digits. `#` starts a comment."
    };
}

macro_rules! profile_format {
    () => {
        "\
Profiles: a TOML file path, a name looked up as $VAMPIRE_PROFILE_DIR/<name>.toml,
or one of the built-ins vendor_a, vendor_b, vendor_c."
    };
}

const TRACE_HELP: &str = concat!(trace_format!(), "\n\n", profile_format!());
const PROFILE_FORMAT: &str = profile_format!();

#[derive(Parser)]
#[command(name = "vampire", version, about = "Data-dependent, variation-aware DRAM energy estimation")]
struct Cli {
    #[command(subcommand)]
    command: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Check a trace against the profile's timing constraints.
    ///
    /// Prints one CSV row per violation (`index,cycle,bank,constraint,required_ns,actual_ns`).
    /// Exit status: 0 clean, 2 violations found, 1 unreadable or malformed trace.
    #[command(after_help = TRACE_HELP)]
    ValidateTrace(ValidateArgs),
    /// Energy breakdown of one or more traces (`category,energy_nj`).
    ///
    /// With several traces the output gains a leading `trace` column.
    #[command(after_help = TRACE_HELP)]
    Analyze(AnalyzeArgs),
    /// Score traces with several models
    /// (`trace,model,energy_nj,avg_power_mw,relative_error_pct`).
    ///
    /// Relative error is measured against the full data-dependent model.
    #[command(after_help = TRACE_HELP)]
    Compare(CompareArgs),
    /// Fit data-dependency parameters to calibration samples.
    ///
    /// Output: `i_zero_ma,d_one_ma,d_toggle_ma,r_squared,max_error_pct,mean_error_pct`.
    /// Exit status 2 when the samples cannot determine the parameters.
    #[command(after_help = "Samples: CSV with header `n_ones,n_toggles,current_ma`, one measurement per line.")]
    Fit(FitArgs),
    /// Extrapolate a current measured at several data rates to a target rate.
    ///
    /// Output: `target_mts,current_ma,r_squared,intercept_ma,slope_ma_per_mts`.
    #[command(after_help = "Points: `--point 1600:112.5` (repeatable) or a CSV with header `freq_mts,current_ma`.")]
    ExtrapolateIdd(ExtrapolateArgs),
    /// Score data encodings on a trace (`scheme,energy_nj,ratio_to_baseline`).
    #[command(after_help = TRACE_HELP)]
    Encode(EncodeArgs),
    /// Emit the trace of a JEDEC IDD measurement loop.
    #[command(after_help = PROFILE_FORMAT)]
    GenIddLoop(GenLoopArgs),
    /// Check profiles for invalid or inconsistent values.
    ///
    /// Exit status: 0 clean, 2 issues found, 1 unreadable or malformed profile.
    #[command(after_help = PROFILE_FORMAT)]
    ProfileLint(LintArgs),
    /// Profile utilities.
    #[command(subcommand)]
    Profile(ProfileVerb),
}

#[derive(Subcommand)]
enum ProfileVerb {
    /// Same as `profile-lint`.
    Lint(LintArgs),
    /// Measured-to-datasheet ratio of every IDD current (`key,measured_ma,datasheet_ma,ratio`).
    Guardband(GuardbandArgs),
}

#[derive(Args, Clone)]
struct Output {
    /// Write results here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Whitespace-separated output with a `#` header line, for plotting.
    #[arg(long)]
    gnuplot: bool,
}

#[derive(Args, Clone)]
struct ProfileArg {
    /// Profile path or name.
    #[arg(long, value_name = "PROFILE", default_value = "vendor_a")]
    profile: String,
}

#[derive(Args, Clone)]
struct EngineFlags {
    /// Ignore bank and row variation factors.
    #[arg(long)]
    no_variation: bool,
    /// Score traces even if they violate timing.
    #[arg(long)]
    force: bool,
    /// Expected fraction of ones per line; payloads are then optional and ignored.
    #[arg(long, value_name = "F", requires = "toggle_fraction")]
    ones_fraction: Option<f64>,
    /// Expected fraction of bits toggling between consecutive transfers.
    #[arg(long, value_name = "F", requires = "ones_fraction")]
    toggle_fraction: Option<f64>,
    /// Scale active background current with the number of open banks.
    #[arg(long)]
    interpolate_background: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// Trace file.
    #[arg(long, value_name = "FILE")]
    trace: PathBuf,
    #[command(flatten)]
    profile: ProfileArg,
    /// Accept RD/WR lines without payload.
    #[arg(long)]
    no_payloads: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Trace files (repeat or comma-separate for several).
    #[arg(long, value_name = "FILE", required = true, value_delimiter = ',')]
    trace: Vec<PathBuf>,
    #[command(flatten)]
    profile: ProfileArg,
    #[command(flatten)]
    engine: EngineFlags,
    /// Also write the per-command ledger (`cycle,command,energy_nj`); single trace only.
    #[arg(long, value_name = "FILE")]
    ledger: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Vampire,
    Micron,
    Drampower,
}

#[derive(Args)]
struct CompareArgs {
    /// Trace files (repeat or comma-separate for several).
    #[arg(long, value_name = "FILE", required = true, value_delimiter = ',')]
    trace: Vec<PathBuf>,
    #[command(flatten)]
    profile: ProfileArg,
    /// Models to report.
    #[arg(long, value_delimiter = ',', default_value = "vampire,micron,drampower")]
    models: Vec<ModelArg>,
    #[command(flatten)]
    engine: EngineFlags,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitModeArg {
    Full,
    Ones,
    Toggles,
}

#[derive(Args)]
struct FitArgs {
    /// Calibration samples CSV.
    #[arg(long, value_name = "FILE")]
    samples: PathBuf,
    /// Which slopes to fit; the others are fixed at zero.
    #[arg(long, value_enum, default_value = "full")]
    mode: FitModeArg,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ExtrapolateArgs {
    /// A `freq_mts:current_ma` pair.
    #[arg(long, value_name = "F:I", required_unless_present = "points")]
    point: Vec<String>,
    /// CSV of points.
    #[arg(long, value_name = "FILE", conflicts_with = "point")]
    points: Option<PathBuf>,
    /// Data rate to extrapolate to, in MT/s.
    #[arg(long, default_value_t = 800.0)]
    target: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Baseline,
    Bdi,
    Optimized,
    Owi,
}

#[derive(Args)]
struct EncodeArgs {
    /// Trace files (repeat or comma-separate for several).
    #[arg(long, value_name = "FILE", required = true, value_delimiter = ',')]
    trace: Vec<PathBuf>,
    #[command(flatten)]
    profile: ProfileArg,
    /// Schemes to score.
    #[arg(long, value_delimiter = ',', default_value = "baseline,bdi,optimized,owi")]
    scheme: Vec<SchemeArg>,
    /// Write the rewritten trace here; needs exactly one trace and one scheme.
    #[arg(long, value_name = "FILE")]
    emit_trace: Option<PathBuf>,
    /// Energy charged per encoded RD/WR, in nJ.
    #[arg(long, value_name = "NJ", default_value_t = 0.0)]
    encoding_energy_nj: f64,
    /// Ignore bank and row variation factors.
    #[arg(long)]
    no_variation: bool,
    /// Score traces even if they violate timing.
    #[arg(long)]
    force: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct GenLoopArgs {
    /// Loop to generate: IDD0, IDD1, IDD2N, IDD2P1, IDD3N, IDD4R, IDD4W, IDD5B or IDD7.
    #[arg(long)]
    kind: String,
    #[command(flatten)]
    profile: ProfileArg,
    #[arg(long, default_value_t = 1000)]
    iterations: u32,
    /// Payload byte, in hex.
    #[arg(long, default_value = "33", conflicts_with = "random_data")]
    pattern: String,
    /// Row opened by every ACT.
    #[arg(long, default_value_t = 0)]
    row: u16,
    /// Fill payloads with seeded random data instead of the pattern.
    #[arg(long)]
    random_data: bool,
    /// Seed for `--random-data`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the trace here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LintArgs {
    /// Profile paths or names.
    #[arg(required = true)]
    profiles: Vec<String>,
}

#[derive(Args)]
struct GuardbandArgs {
    /// Profile path or name.
    profile: String,
    #[command(flatten)]
    output: Output,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
