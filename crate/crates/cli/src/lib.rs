//! `boundtri` command line: single-instance triangulation, decay experiments,
//! the 2-D pixel study and slope fitting.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use boundtri::analysis::{fit_loglog_slope, DEFAULT_M_MIN};
use boundtri::io::{
    config_to_toml, parse_config, parse_instance, parse_toy2d_config, read_decay_csv, write_csv,
    write_decay_csv,
};
use boundtri::sim::{run_decay_experiment, DecayCurve, ExperimentConfig};
use boundtri::toy2d::{arrangement_svg, run_toy2d, study_arrangement, Toy2dConfig, Toy2dRow};
use boundtri::{triangulate, Algorithm, Error};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment variable supplying the seed when `--seed` is absent.
pub const SEED_ENV: &str = "BOUNDTRI_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "boundtri",
    version,
    about = "Bounded-noise triangulation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Triangulate one instance file, one CSV row per algorithm.
    Triangulate {
        /// JSON instance file.
        #[arg(long)]
        instance: PathBuf,
        /// Algorithms to run (repeatable or comma-separated); all by default.
        #[arg(long = "algo", value_delimiter = ',')]
        algorithms: Vec<Algorithm>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean squared error against camera count.
    Decay {
        /// TOML experiment config; built-in defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "algo", value_delimiter = ',', required = true)]
        algorithms: Vec<Algorithm>,
        /// Output CSV. With several algorithms each gets `<stem>-<algorithm>.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override `trials_per_m`.
        #[arg(long)]
        trials: Option<usize>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// 2-D pixel study: expected error per camera count.
    Toy2d {
        /// TOML study config; built-in defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also draw the cell arrangement of the first layout.
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Camera count drawn by `--svg`.
        #[arg(long, default_value_t = 4)]
        svg_m: usize,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Fit the log-log slope of a curve CSV.
    Slope {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_M_MIN)]
        mmin: usize,
        #[arg(long, default_value_t = usize::MAX)]
        mmax: usize,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Random seed; falls back to the BOUNDTRI_SEED environment variable, then the config.
    #[arg(long, env = SEED_ENV)]
    seed: Option<u64>,
    /// Worker threads; all cores by default.
    #[arg(long)]
    threads: Option<usize>,
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

fn config_failure(message: String) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message,
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Infeasible => EXIT_INFEASIBLE,
        Error::Config(_)
        | Error::Parse(_)
        | Error::Unsupported(_)
        | Error::Io(_)
        | Error::InvalidCamera(_)
        | Error::DimensionMismatch(_) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

/// Run the command line `argv` (program name first); returns the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let informational = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            if informational {
                let _ = write!(out, "{e}");
                return EXIT_OK;
            }
            let _ = write!(err, "{e}");
            return EXIT_CONFIG;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Triangulate {
            instance,
            algorithms,
            out: path,
        } => cmd_triangulate(&instance, &algorithms, path.as_deref(), out),
        Command::Decay {
            config,
            algorithms,
            out: path,
            trials,
            run,
        } => {
            let mut cfg = match &config {
                Some(p) => parse_config(&read(p)?)?,
                None => ExperimentConfig::default(),
            };
            if let Some(s) = run.seed {
                cfg.rng_seed = s;
            }
            if let Some(t) = trials {
                cfg.trials_per_m = t;
            }
            cfg.validate()?;
            let curves = with_threads(run.threads, || {
                algorithms
                    .iter()
                    .map(|&a| run_decay_experiment(&cfg, a).map_err(Failure::from))
                    .collect::<Result<Vec<_>, _>>()
            })?;
            write_decay(&cfg, &algorithms, &curves, path.as_deref(), out)
        }
        Command::Toy2d {
            config,
            out: path,
            svg,
            svg_m,
            run,
        } => {
            let mut cfg = match &config {
                Some(p) => parse_toy2d_config(&read(p)?)?,
                None => Toy2dConfig::default(),
            };
            if let Some(s) = run.seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let rows = with_threads(run.threads, || run_toy2d(&cfg).map_err(Failure::from))?;
            write_toy2d(&cfg, &rows, path.as_deref(), svg.as_deref(), svg_m, out)
        }
        Command::Slope { input, mmin, mmax } => cmd_slope(&input, mmin, mmax, out),
    }
}

fn with_threads<R>(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<R, Failure> + Send,
) -> Result<R, Failure>
where
    R: Send,
{
    match threads {
        None => f(),
        Some(0) => Err(config_failure("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure {
                code: EXIT_NUMERICAL,
                message: format!("cannot start worker pool: {e}"),
            })?
            .install(f),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| config_failure(format!("cannot read {}: {e}", path.display())))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn provenance(seed: Option<u64>, hashed: &[u8], extra: &str) -> String {
    let seed = seed.map_or_else(|| "none".to_string(), |s| s.to_string());
    format!(
        "boundtri {} seed={seed} config_sha256={}{extra}",
        env!("CARGO_PKG_VERSION"),
        sha256_hex(hashed)
    )
}

/// Write to `path`, or to `out` when no path is given.
fn emit(path: Option<&Path>, out: &mut dyn Write, body: &[u8]) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, body)
            .map_err(|e| config_failure(format!("cannot write {}: {e}", p.display()))),
        None => out
            .write_all(body)
            .map_err(|e| config_failure(format!("cannot write output: {e}"))),
    }
}

#[derive(Serialize)]
struct TriangulationRow {
    algorithm: &'static str,
    x: f64,
    y: f64,
    z: f64,
    consistent: bool,
    iterations: usize,
    objective: Option<f64>,
    fell_back: bool,
}

fn cmd_triangulate(
    instance: &Path,
    algorithms: &[Algorithm],
    path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let text = read(instance)?;
    let inst = parse_instance(&text)?;
    let algorithms = if algorithms.is_empty() {
        &Algorithm::ALL[..]
    } else {
        algorithms
    };
    let mut rows = Vec::new();
    let mut failures: Vec<Failure> = Vec::new();
    for &a in algorithms {
        match triangulate(&inst, a) {
            Ok(r) => rows.push(TriangulationRow {
                algorithm: a.name(),
                x: r.point.x,
                y: r.point.y,
                z: r.point.z,
                consistent: r.consistent,
                iterations: r.iterations,
                objective: r.objective,
                fell_back: r.fell_back,
            }),
            Err(e) => {
                let mut f = Failure::from(e);
                f.message = format!("{a}: {}", f.message);
                failures.push(f);
            }
        }
    }
    let mut body = Vec::new();
    write_csv(
        &mut body,
        &rows,
        Some(&provenance(None, text.as_bytes(), "")),
    )?;
    emit(path, out, &body)?;
    match failures.into_iter().max_by_key(|f| f.code) {
        None => Ok(()),
        Some(worst) => Err(worst),
    }
}

fn curve_path(base: &Path, algorithm: Algorithm) -> PathBuf {
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ext = base
        .extension()
        .map(|e| format!(".{}", e.to_string_lossy()))
        .unwrap_or_default();
    base.with_file_name(format!("{stem}-{algorithm}{ext}"))
}

fn write_decay(
    cfg: &ExperimentConfig,
    algorithms: &[Algorithm],
    curves: &[DecayCurve],
    path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let hashed = config_to_toml(cfg);
    for (&a, curve) in algorithms.iter().zip(curves) {
        let mut body = Vec::new();
        let comment = provenance(
            Some(cfg.rng_seed),
            hashed.as_bytes(),
            &format!(" algorithm={a}"),
        );
        write_decay_csv(&mut body, curve, Some(&comment))?;
        let target = match path {
            Some(p) if algorithms.len() > 1 => Some(curve_path(p, a)),
            Some(p) => Some(p.to_path_buf()),
            None => None,
        };
        emit(target.as_deref(), out, &body)?;
    }
    Ok(())
}

fn write_toy2d(
    cfg: &Toy2dConfig,
    rows: &[Toy2dRow],
    path: Option<&Path>,
    svg: Option<&Path>,
    svg_m: usize,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let hashed = toml::to_string(cfg).map_err(|e| config_failure(e.to_string()))?;
    let mut body = Vec::new();
    write_csv(
        &mut body,
        rows,
        Some(&provenance(Some(cfg.seed), hashed.as_bytes(), "")),
    )?;
    emit(path, out, &body)?;
    if let Some(svg_path) = svg {
        let cameras = cfg.cameras(svg_m, 0)?;
        let (cells, _) = study_arrangement(cfg, &cameras)?;
        emit(
            Some(svg_path),
            out,
            arrangement_svg(&cameras, &cells, 600.0).as_bytes(),
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SlopeRow {
    slope: f64,
    intercept: f64,
    residual_rms: f64,
    m_min: usize,
    m_max: usize,
    points: usize,
    dropped: usize,
}

fn cmd_slope(input: &Path, mmin: usize, mmax: usize, out: &mut dyn Write) -> Result<(), Failure> {
    let text = read(input)?;
    let curve = read_decay_csv(text.as_bytes())?;
    let fit = fit_loglog_slope(&curve, mmin, mmax)?;
    let row = SlopeRow {
        slope: fit.slope,
        intercept: fit.intercept,
        residual_rms: fit.residual_rms,
        m_min: fit.m_range.0,
        m_max: fit.m_range.1,
        points: fit.points,
        dropped: fit.dropped.len(),
    };
    let mut body = Vec::new();
    write_csv(
        &mut body,
        &[row],
        Some(&provenance(None, text.as_bytes(), "")),
    )?;
    emit(None, out, &body)
}
