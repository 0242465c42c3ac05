//! muflux command-line interface: reproducible muon-flux analyses with
//! machine-readable output.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 data error,
//! 4 quadrature convergence failure.

mod config;
mod output;

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use muflux::counting::{accidental_rate, corrected_coincidence, Rate};
use muflux::fitting::{fit_intensity_with, AngularSweep, FitOptions, SweepPoint, WeightMode};
use muflux::ingest::{aggregate, parse_log};
use muflux::rate_model::{angular_sweep, mc_rate, total_rate};

use config::{load_config, FileConfig, OutputFormat, Preset};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Convergence(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Convergence(m) => f.write_str(m),
        }
    }
}

impl From<muflux::Error> for CliError {
    fn from(e: muflux::Error) -> Self {
        match &e {
            muflux::Error::Domain(_) | muflux::Error::Config(_) => CliError::Config(e.to_string()),
            muflux::Error::Data(_) | muflux::Error::Format(_) | muflux::Error::Fit(_) => {
                CliError::Data(e.to_string())
            }
            muflux::Error::Convergence { .. } => CliError::Convergence(e.to_string()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Convergence(_) => 4,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "muflux",
    version,
    about = "Cosmic-muon flux modeling, coincidence statistics, and underground screening analysis"
)]
struct Cli {
    /// Run-configuration file (TOML; see the README for the format).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GeometryArgs {
    /// Built-in detector preset.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Vertical intensity I0 in cm^-2 sr^-1 min^-1 (overrides the config).
    #[arg(long)]
    i0: Option<f64>,
    /// Quadrature relative tolerance override.
    #[arg(long)]
    rel_tol: Option<f64>,
    /// Horizon cut in degrees override.
    #[arg(long)]
    horizon_cut_deg: Option<f64>,
    /// Angular weight override: solid-angle, abs-sin or cos.
    #[arg(long)]
    weight: Option<String>,
    /// Quadrature scheme override: gauss-legendre or adaptive-simpson.
    #[arg(long)]
    scheme: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Predicted rate vs tilt angle, as CSV on stdout.
    SweepAngle {
        #[command(flatten)]
        geometry: GeometryArgs,
        /// First tilt angle in degrees.
        #[arg(long, default_value_t = 0.0)]
        from_deg: f64,
        /// Last tilt angle in degrees (inclusive).
        #[arg(long, default_value_t = 90.0)]
        to_deg: f64,
        /// Step between angles in degrees.
        #[arg(long, default_value_t = 10.0)]
        step_deg: f64,
    },
    /// Fit the vertical intensity I0 from a sweep CSV (angle_deg, rate_cpm,
    /// sigma_cpm[, flagged]).
    FitIntensity {
        #[command(flatten)]
        geometry: GeometryArgs,
        /// Input CSV path.
        #[arg(long)]
        sweep_csv: PathBuf,
        /// Ordinary least squares instead of error weighting.
        #[arg(long)]
        unweighted: bool,
        /// Keep points flagged as accidental-dominated.
        #[arg(long)]
        include_flagged: bool,
    },
    /// Accidental coincidence rate from the singles rates and resolving time.
    Accidentals {
        #[arg(long)]
        n1_cpm: f64,
        #[arg(long)]
        n2_cpm: f64,
        #[arg(long, default_value_t = 0.0)]
        n1_sigma_cpm: f64,
        #[arg(long, default_value_t = 0.0)]
        n2_sigma_cpm: f64,
        /// Resolving time in microseconds.
        #[arg(long)]
        tau_us: Option<f64>,
        #[arg(long)]
        tau_sigma_us: Option<f64>,
    },
    /// Aggregate a counter log into windowed rate summaries (JSON lines).
    AnalyzeLog {
        /// Log file path.
        #[arg(long)]
        file: PathBuf,
        /// Window length in minutes.
        #[arg(long, default_value_t = 60)]
        window_min: u32,
        /// Subtract accidentals using the per-window singles rates.
        #[arg(long)]
        subtract_accidentals: bool,
        #[arg(long)]
        tau_us: Option<f64>,
        #[arg(long)]
        tau_sigma_us: Option<f64>,
    },
    /// Screening factors and water-equivalent depths for the configured sites.
    DepthReport {
        /// Output format (overrides the config).
        #[arg(long, value_enum)]
        format: Option<OutputFormat>,
        #[arg(long)]
        tau_us: Option<f64>,
        #[arg(long)]
        tau_sigma_us: Option<f64>,
    },
    /// Cross-check the quadrature against the Monte Carlo ray tracer.
    McCheck {
        #[command(flatten)]
        geometry: GeometryArgs,
        /// Monte Carlo sample count per angle.
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        /// Monte Carlo seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated tilt angles in degrees.
        #[arg(long, default_value = "0,22.5,45,67.5,90")]
        angles_deg: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_thread_pool() {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code());
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// MUFLUX_THREADS caps the rayon pool; unset means the rayon default.
fn init_thread_pool() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("MUFLUX_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
        CliError::Config(format!(
            "MUFLUX_THREADS must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot configure thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file_config = match &cli.config {
        Some(path) => load_config(path)?,
        None => FileConfig::default(),
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::SweepAngle {
            geometry,
            from_deg,
            to_deg,
            step_deg,
        } => {
            let (geom, model, cfg) = resolve_model(&geometry, &file_config)?;
            if step_deg <= 0.0 || !step_deg.is_finite() {
                return Err(CliError::Config(format!(
                    "step must be positive, got {step_deg}"
                )));
            }
            let mut angles_deg = Vec::new();
            let mut a = from_deg;
            while a <= to_deg + 1e-9 {
                angles_deg.push(a);
                a += step_deg;
            }
            let angles_rad: Vec<f64> = angles_deg.iter().map(|d| d.to_radians()).collect();
            let sweep = angular_sweep(&geom, &angles_rad, &model, &cfg)?;
            writeln!(out, "angle_deg,rate_cpm,num_error_cpm").map_err(io_err)?;
            for (deg, (_, prediction)) in angles_deg.iter().zip(&sweep) {
                writeln!(
                    out,
                    "{},{},{}",
                    deg, prediction.rate_cpm, prediction.numerical_error_cpm
                )
                .map_err(io_err)?;
            }
            Ok(())
        }
        Command::FitIntensity {
            geometry,
            sweep_csv,
            unweighted,
            include_flagged,
        } => {
            let (geom, model, cfg) = resolve_model(&geometry, &file_config)?;
            let sweep = read_sweep_csv(&sweep_csv)?;
            let opts = FitOptions {
                weight_mode: if unweighted {
                    WeightMode::Unweighted
                } else {
                    WeightMode::MeasurementErrors
                },
                include_flagged,
            };
            let used = sweep
                .points()
                .iter()
                .filter(|p| include_flagged || !p.accidental_dominated)
                .count();
            let fit = fit_intensity_with(&sweep, &geom, &model, &cfg, &opts)?;
            let payload = output::FitOut {
                i0_per_cm2_sr_min: fit.i0,
                i0_sigma: fit.i0_sigma,
                chi2: fit.chi2,
                ndf: fit.ndf,
                points_used: used,
            };
            writeln!(out, "{}", to_json(&payload)?).map_err(io_err)
        }
        Command::Accidentals {
            n1_cpm,
            n2_cpm,
            n1_sigma_cpm,
            n2_sigma_cpm,
            tau_us,
            tau_sigma_us,
        } => {
            let setup = config::resolve_coincidence(tau_us, tau_sigma_us, &file_config)?;
            let rate = accidental_rate(
                &Rate::new(n1_cpm, n1_sigma_cpm),
                &Rate::new(n2_cpm, n2_sigma_cpm),
                &setup,
            )?;
            writeln!(out, "{}", to_json(&output::accidentals_out(&rate))?).map_err(io_err)
        }
        Command::AnalyzeLog {
            file,
            window_min,
            subtract_accidentals,
            tau_us,
            tau_sigma_us,
        } => {
            let setup = config::resolve_coincidence(tau_us, tau_sigma_us, &file_config)?;
            let reader = BufReader::new(
                File::open(&file)
                    .map_err(|e| CliError::Data(format!("cannot open {}: {e}", file.display())))?,
            );
            let parsed = parse_log(reader)?;
            for issue in &parsed.issues {
                eprintln!("warning: line {}: {}", issue.line_number, issue.message);
            }
            let summaries = aggregate(&parsed.records, window_min)?;
            for summary in &summaries {
                let correction = if subtract_accidentals {
                    let accidental =
                        accidental_rate(&summary.ch1.rate(), &summary.ch2.rate(), &setup)?;
                    let corrected = corrected_coincidence(&summary.coincidence.rate(), &accidental);
                    Some(output::CorrectionOut {
                        accidental_cpm: accidental.cpm,
                        accidental_sigma_cpm: accidental.sigma_cpm,
                        corrected_cpm: corrected.rate.cpm,
                        corrected_sigma_cpm: corrected.rate.sigma_cpm,
                        accidental_dominated: corrected.accidental_dominated,
                    })
                } else {
                    None
                };
                let payload = output::SummaryOut::new(summary, correction);
                writeln!(out, "{}", to_json(&payload)?).map_err(io_err)?;
            }
            Ok(())
        }
        Command::DepthReport {
            format,
            tau_us,
            tau_sigma_us,
        } => {
            let setup = config::resolve_coincidence(tau_us, tau_sigma_us, &file_config)?;
            let sites = config::resolve_sites(&file_config, &setup)?;
            let report = muflux::attenuation::depth_report(&sites)?;
            let format = format.unwrap_or(match file_config.output_format.as_deref() {
                Some("csv") => OutputFormat::Csv,
                Some("json") | None => OutputFormat::Json,
                Some(other) => {
                    return Err(CliError::Config(format!(
                        "unknown output format {other:?} (expected json or csv)"
                    )))
                }
            });
            match format {
                OutputFormat::Json => {
                    writeln!(out, "{}", to_json(&output::DepthReportOut::from(&report))?)
                        .map_err(io_err)
                }
                OutputFormat::Csv => {
                    write!(out, "{}", output::depth_report_csv(&report)).map_err(io_err)
                }
            }
        }
        Command::McCheck {
            geometry,
            samples,
            seed,
            angles_deg,
        } => {
            let (geom, model, cfg) = resolve_model(&geometry, &file_config)?;
            let seed = seed.or(file_config.seed).unwrap_or(0);
            let angles: Vec<f64> = angles_deg
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| CliError::Config(format!("bad angle {s:?}: {e}")))
                })
                .collect::<Result<_, _>>()?;
            let mut points = Vec::with_capacity(angles.len());
            let mut all_within = true;
            for &deg in &angles {
                let tilt = deg.to_radians();
                let quad = total_rate(&geom, tilt, &model, &cfg)?;
                let mc = mc_rate(&geom, tilt, &model, &cfg, samples, seed)?;
                let z = if mc.numerical_error_cpm > 0.0 {
                    (quad.rate_cpm - mc.rate_cpm).abs() / mc.numerical_error_cpm
                } else {
                    0.0
                };
                let within = z <= 2.0;
                all_within &= within;
                points.push(output::McPointOut {
                    angle_deg: deg,
                    quadrature_cpm: quad.rate_cpm,
                    quadrature_error_cpm: quad.numerical_error_cpm,
                    mc_cpm: mc.rate_cpm,
                    mc_standard_error_cpm: mc.numerical_error_cpm,
                    z_score: z,
                    within_two_sigma: within,
                });
            }
            let payload = output::McCheckOut {
                samples,
                seed,
                points,
                all_within_two_sigma: all_within,
            };
            writeln!(out, "{}", to_json(&payload)?).map_err(io_err)
        }
    }
}

fn resolve_model(
    args: &GeometryArgs,
    file_config: &FileConfig,
) -> Result<
    (
        muflux::geometry::DetectorGeometry,
        muflux::atmosphere::AtmosphereModel,
        muflux::rate_model::QuadratureConfig,
    ),
    CliError,
> {
    let geom = config::resolve_geometry(args.preset, file_config)?;
    let model = config::resolve_atmosphere(args.i0, file_config)?;
    let cfg = config::resolve_quadrature(
        file_config,
        args.rel_tol,
        args.horizon_cut_deg,
        args.weight.clone(),
        args.scheme.clone(),
    )?;
    Ok((geom, model, cfg))
}

/// Sweep CSV rows: angle_deg,rate_cpm,sigma_cpm[,flagged]. A non-numeric
/// first line is treated as a header and skipped.
fn read_sweep_csv(path: &std::path::Path) -> Result<AngularSweep, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if i == 0 && fields[0].parse::<f64>().is_err() {
            continue; // header row
        }
        if fields.len() != 3 && fields.len() != 4 {
            return Err(CliError::Data(format!(
                "{}:{}: expected 3 or 4 fields, found {}",
                path.display(),
                i + 1,
                fields.len()
            )));
        }
        let num = |s: &str, what: &str| -> Result<f64, CliError> {
            s.parse::<f64>().map_err(|e| {
                CliError::Data(format!(
                    "{}:{}: bad {what} {s:?}: {e}",
                    path.display(),
                    i + 1
                ))
            })
        };
        let mut point = SweepPoint::new(
            num(fields[0], "angle")?.to_radians(),
            num(fields[1], "rate")?,
            num(fields[2], "sigma")?,
        );
        if fields.len() == 4 {
            point.accidental_dominated = match fields[3] {
                "0" | "false" => false,
                "1" | "true" => true,
                other => {
                    return Err(CliError::Data(format!(
                        "{}:{}: bad flagged value {other:?} (expected 0/1/true/false)",
                        path.display(),
                        i + 1
                    )))
                }
            };
        }
        points.push(point);
    }
    Ok(AngularSweep::new(points)?)
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string(value).map_err(|e| CliError::Data(format!("serialization failed: {e}")))
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Data(format!("write failed: {e}"))
}
