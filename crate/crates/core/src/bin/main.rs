//! Command-line front end: scenario analysis, identifiability tables,
//! parameter sweeps, and the numerical verification suite.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use leo_fim::analysis::{
    crlb_report, minimal_config_search, parameter_sweep, ConfigRanges, SweepAxis, Target,
};
use leo_fim::fim::channel_fim_block;
use leo_fim::oracle::{
    jacobian_fd_check, matched_snr, numeric_channel_fim, randomized_scenario, OracleLink,
    SampledWaveform,
};
use leo_fim::output::{
    config_rows_to_csv, config_rows_to_json, emit, report_to_json, sweep_to_csv, sweep_to_json,
    OutputFormat,
};
use leo_fim::scenario::{default_scenario, load_scenario, SyncMode};
use leo_fim::Error;

#[derive(Parser)]
#[command(
    name = "leo-fim",
    about = "Fisher-information and CRLB analysis for 9D localization from LEO delay/Doppler observations",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the CRLB report for a scenario file.
    Analyze {
        /// Path to a scenario JSON file.
        scenario: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Enumerate identifiable (N_B, N_K, N_U) configurations at the
    /// default geometry and flag the Pareto-minimal ones.
    Identifiability {
        /// Target block: position, velocity, orientation, or 9d.
        #[arg(long)]
        target: String,
        /// Sync mode: full-sync, time-offset-only, freq-offset-only,
        /// both-offsets, or gps-shared.
        #[arg(long, default_value = "both-offsets")]
        mode: String,
        #[arg(long, default_value_t = 3)]
        max_sats: usize,
        #[arg(long, default_value_t = 3)]
        max_slots: usize,
        #[arg(long, default_value_t = 4)]
        max_antennas: usize,
        /// Output format: csv or json.
        #[arg(long, default_value = "csv")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep one axis of the default (or given) scenario and report the
    /// bounds at every grid point.
    Sweep {
        /// Axis: antennas, slot-spacing, frequency, or snr.
        #[arg(long)]
        axis: String,
        /// Comma-separated, strictly increasing grid values.
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        /// Base scenario file; defaults to the built-in scenario.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Output format: csv or json.
        #[arg(long, default_value = "csv")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the numerical verification suite (waveform-integral FIM and
    /// finite-difference Jacobian checks).
    Verify,
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Analyze { scenario, out } => {
            let s = load_scenario(&scenario)?;
            let report = crlb_report(&s)?;
            emit(&(report_to_json(&report)? + "\n"), out.as_deref())?;
            Ok(if report.identifiable { 0 } else { 2 })
        }
        Command::Identifiability {
            target,
            mode,
            max_sats,
            max_slots,
            max_antennas,
            format,
            out,
        } => {
            let target: Target = target.parse()?;
            let mode: SyncMode = mode.parse()?;
            let format: OutputFormat = format.parse()?;
            let rows = minimal_config_search(
                ConfigRanges {
                    max_sats,
                    max_slots,
                    max_antennas,
                },
                mode,
                target,
            )?;
            let text = match format {
                OutputFormat::Csv => config_rows_to_csv(&rows)?,
                OutputFormat::Json => config_rows_to_json(&rows)? + "\n",
            };
            emit(&text, out.as_deref())?;
            Ok(0)
        }
        Command::Sweep {
            axis,
            grid,
            scenario,
            format,
            out,
        } => {
            let axis: SweepAxis = axis.parse()?;
            let format: OutputFormat = format.parse()?;
            let grid: Vec<f64> = grid
                .split(',')
                .map(|v| {
                    v.trim().parse::<f64>().map_err(|_| {
                        Error::InvalidArgument(format!("grid value '{v}' is not a number"))
                    })
                })
                .collect::<Result<_, _>>()?;
            let base = match scenario {
                Some(p) => load_scenario(&p)?,
                None => default_scenario(3, 2, 4, SyncMode::BothOffsets),
            };
            let points = parameter_sweep(&base, axis, &grid)?;
            let text = match format {
                OutputFormat::Csv => sweep_to_csv(&points)?,
                OutputFormat::Json => sweep_to_json(&points)? + "\n",
            };
            emit(&text, out.as_deref())?;
            Ok(0)
        }
        Command::Verify => verify(),
    }
}

/// The verification suite behind `leo-fim verify`: compares the
/// closed-form channel FIM block against the waveform-integral oracle
/// and the analytic Jacobian against finite differences.
fn verify() -> Result<u8, Error> {
    let mut all_ok = true;

    // Waveform-integral FIM vs closed-form block on a Gaussian pulse.
    let sigma = 4.0e-9;
    let pulse = SampledWaveform::gaussian(sigma, 12)?;
    let link = OracleLink {
        carrier_hz: 1.0e7,
        delay: 3.0e-9,
        doppler: 2.0e-5,
        gain: 0.7,
        time_offset: 1.0e-9,
        freq_offset: 100.0,
    };
    let n0 = 2.5e-9;
    let numeric = numeric_channel_fim(&pulse, &link, n0)?;
    let alpha1 = pulse.rms_bandwidth();
    let alpha_o = pulse.rms_duration();
    let f_ob = link.carrier_hz * (1.0 - link.doppler) + link.freq_offset;
    let analytic = channel_fim_block(
        matched_snr(&pulse, link.gain, n0),
        alpha1 * alpha1 + f_ob * f_ob,
        link.carrier_hz,
        alpha_o,
        link.gain,
    )?;
    let mut worst_nonzero: f64 = 0.0;
    let mut worst_zero: f64 = 0.0;
    for i in 0..5 {
        for j in 0..5 {
            let a = analytic[(i, j)];
            if a != 0.0 {
                worst_nonzero = worst_nonzero.max(((numeric[(i, j)] - a) / a).abs());
            } else {
                let scale = (analytic[(i, i)] * analytic[(j, j)]).sqrt();
                worst_zero = worst_zero.max(numeric[(i, j)].abs() / scale);
            }
        }
    }
    let ok = worst_nonzero <= 1.0e-4 && worst_zero <= 1.0e-4;
    all_ok &= ok;
    println!(
        "channel FIM oracle: worst nonzero-entry error {worst_nonzero:.3e}, \
         worst zero-pattern leakage {worst_zero:.3e} (threshold 1e-4) ... {}",
        if ok { "pass" } else { "FAIL" }
    );

    // Jacobian finite-difference check: default plus randomized scenarios.
    let worst_default = jacobian_fd_check(&default_scenario(3, 2, 4, SyncMode::BothOffsets))?;
    let ok = worst_default <= 1.0e-6;
    all_ok &= ok;
    println!(
        "jacobian FD (default scenario): worst relative error {worst_default:.3e} \
         (threshold 1e-6) ... {}",
        if ok { "pass" } else { "FAIL" }
    );

    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
    let mut worst_random: f64 = 0.0;
    for _ in 0..5 {
        let s = randomized_scenario(&mut rng, 1);
        worst_random = worst_random.max(jacobian_fd_check(&s)?);
    }
    let ok = worst_random <= 1.0e-6;
    all_ok &= ok;
    println!(
        "jacobian FD (5 randomized scenarios): worst relative error {worst_random:.3e} \
         (threshold 1e-6) ... {}",
        if ok { "pass" } else { "FAIL" }
    );

    Ok(if all_ok { 0 } else { 1 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
