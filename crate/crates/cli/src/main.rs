use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};

use nmchaos::config::{load_over_preset, ConfigError, RunConfig};
use nmchaos::dynamics::CoupledSystem;
use nmchaos::experiments::{run_sweep_cancellable, worker_count, Figure, LeMethod, THREADS_ENV};
use nmchaos::lyapunov::{benettin_max_le, wolf_max_le};
use nmchaos::oracle::{evolve_kernel_field, pointwise_errors, write_oracle_csv};
use nmchaos::state::FullState;
use nmchaos::trajectory::CsvTable;
use nmchaos::{integrate, Error};

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_INTERRUPTED: u8 = 130;

#[derive(Parser, Debug)]
#[command(
    name = "nmchaos",
    version,
    about = "Non-Markovian optomechanical chaos simulator"
)]
struct Cli {
    /// Drop unknown configuration keys with a warning instead of failing.
    #[arg(long, global = true)]
    lenient: bool,

    /// Assert that the run uses no randomness (always true; logged only).
    #[arg(long, global = true)]
    seedless: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one trajectory and write the trajectory CSV.
    Simulate {
        /// TOML run configuration (defaults when omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Trajectory CSV to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the maximum LE of a trajectory CSV column.
    Le {
        /// Trajectory CSV with a uniformly spaced `t` column.
        #[arg(long)]
        input: PathBuf,
        /// Column embedded by the Wolf estimator.
        #[arg(long, default_value = "q1")]
        column: String,
        #[arg(long, value_enum, default_value_t = MethodArg::Wolf)]
        method: MethodArg,
        /// Estimator settings; with `benettin` also the system parameters.
        #[arg(long)]
        config: Option<PathBuf>,
        /// LE CSV to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a figure sweep and write the long-format grid CSV.
    Sweep {
        #[arg(long, value_enum)]
        figure: FigureArg,
        /// Overrides applied on top of the figure preset.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Grid CSV to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct the TDCs from the kernel field and compare with the ODE.
    Oracle {
        /// TOML run configuration (system, environment, `[oracle]`).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Final time; overrides `oracle.t_max`.
        #[arg(long)]
        tmax: Option<f64>,
        /// Number of source-time grid intervals; overrides `oracle.n_s`.
        #[arg(long)]
        ns: Option<usize>,
        /// Oracle CSV to write.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Wolf,
    Benettin,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FigureArg {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Custom,
}

impl From<FigureArg> for Figure {
    fn from(f: FigureArg) -> Self {
        match f {
            FigureArg::Fig2 => Figure::Fig2,
            FigureArg::Fig3 => Figure::Fig3,
            FigureArg::Fig4 => Figure::Fig4,
            FigureArg::Fig5 => Figure::Fig5,
            FigureArg::Fig6 => Figure::Fig6,
            FigureArg::Custom => Figure::Custom,
        }
    }
}

#[derive(Debug)]
enum Failure {
    Config(ConfigError),
    Model(Error),
    Io(String, io::Error),
    Interrupted,
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Model(e) if e.is_numerical() => EXIT_NUMERICAL,
            Failure::Interrupted => EXIT_INTERRUPTED,
            _ => EXIT_VALIDATION,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "{e}"),
            Failure::Model(e) => write!(f, "{e}"),
            Failure::Io(path, e) => write!(f, "{path}: {e}"),
            Failure::Interrupted => write!(f, "interrupted; completed cells were written"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

type Outcome = Result<(), Failure>;

/// Writes through a temporary file in the target directory and renames it
/// into place only when `fill` succeeds.
fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<(), Failure>) -> Outcome {
    let io_err = |e: io::Error| Failure::Io(path.display().to_string(), e);
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::Builder::new()
        .prefix(".nmchaos-")
        .suffix(".tmp")
        .tempfile_in(dir)
        .map_err(io_err)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w)?;
        w.flush().map_err(io_err)?;
    }
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

fn io_fail(path: &Path) -> impl Fn(io::Error) -> Failure + '_ {
    move |e| Failure::Io(path.display().to_string(), e)
}

/// Path of a sidecar file next to `out`, e.g. `run.csv.config.toml`.
fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    out.with_file_name(name)
}

fn echo_config(out: &Path, cfg: &RunConfig) -> Outcome {
    let text = cfg.emit();
    write_atomic(&sidecar(out, ".config.toml"), |w| {
        w.write_all(text.as_bytes()).map_err(io_fail(out))
    })
}

fn load_config(path: Option<&Path>, lenient: bool) -> Result<RunConfig, Failure> {
    Ok(match path {
        Some(p) => RunConfig::load(p, lenient)?,
        None => RunConfig::default(),
    })
}

fn simulate(cfg: &RunConfig, out: &Path) -> Outcome {
    let init = FullState::initial(cfg.initial_state());
    let traj = integrate(
        &cfg.system,
        &cfg.environment,
        &init,
        cfg.integration.t_max,
        cfg.integration.dt_out,
        cfg.integration.control(),
        &cfg.model,
    )?;
    write_atomic(out, |w| traj.write_csv(w).map_err(io_fail(out)))?;
    echo_config(out, cfg)
}

fn le(input: &Path, column: &str, method: MethodArg, cfg: &RunConfig, out: &Path) -> Outcome {
    let file = File::open(input).map_err(io_fail(input))?;
    let table = CsvTable::read(BufReader::new(file))?;
    let dt = table.uniform_dt()?;
    let series = match method {
        MethodArg::Wolf => wolf_max_le(&table.column(column)?, dt, &cfg.lyapunov.embedding())?,
        MethodArg::Benettin => {
            info!("benettin: integrating the flow from the first input row; --column is not used");
            let start = table.full_state(0)?;
            let t = table.column("t")?;
            let horizon = t[t.len() - 1] - t[0];
            let system = CoupledSystem {
                sys: cfg.system,
                env: cfg.environment,
                toggles: cfg.model,
            };
            let bcfg = cfg.lyapunov.benettin(horizon, cfg.integration.control());
            benettin_max_le(&system, &start.to_vec(), &bcfg)?
        }
    };
    if let Some(lambda) = series.final_estimate() {
        info!("final running estimate {lambda:.6}");
    }
    write_atomic(out, |w| series.write_csv(w).map_err(io_fail(out)))?;
    echo_config(out, cfg)
}

fn sweep(figure: Figure, cfg: &RunConfig, out: &Path, cancel: &AtomicBool) -> Outcome {
    let spec = cfg.sweep_spec(figure)?;
    let threads = match (std::env::var_os(THREADS_ENV), cfg.sweep.threads) {
        (None, Some(n)) => n,
        _ => worker_count(),
    };
    info!(
        "sweep {figure}: {} cells on {threads} workers",
        spec.cells().len()
    );
    let result = run_sweep_cancellable(&spec, threads, cancel)?;
    write_atomic(out, |w| result.write_csv(w).map_err(io_fail(out)))?;
    echo_config(out, cfg)?;
    let p = &result.provenance;
    let meta = format!(
        "figure = \"{figure}\"\ncode_version = \"{}\"\nthreads = {}\ncells = {}\nfailed_cells = {}\nwall_time_s = {:.3}\n",
        p.code_version, p.threads, p.cells, p.failed_cells, p.wall_time_s
    );
    write_atomic(&sidecar(out, ".meta.toml"), |w| {
        w.write_all(meta.as_bytes()).map_err(io_fail(out))
    })?;
    if p.failed_cells > 0 {
        warn!(
            "{} of {} cells failed; see the failed/error columns",
            p.failed_cells, p.cells
        );
    }
    if cancel.load(Ordering::Relaxed) {
        return Err(Failure::Interrupted);
    }
    Ok(())
}

fn oracle(cfg: &RunConfig, tmax: Option<f64>, ns: Option<usize>, out: &Path) -> Outcome {
    let mut cfg = cfg.clone();
    if let Some(t) = tmax {
        cfg.oracle.t_max = t;
    }
    if let Some(n) = ns {
        cfg.oracle.n_s = n;
    }
    cfg.validate()?;
    let o = cfg.oracle;
    let run = evolve_kernel_field(&cfg.system, &cfg.environment, o.t_max, o.n_s, o.rel_tol)?;
    info!("Richardson error estimate {:.3e}", run.richardson_estimate);
    let init = FullState::initial(cfg.initial_state());
    let traj = integrate(
        &cfg.system,
        &cfg.environment,
        &init,
        o.t_max,
        o.t_max / o.n_s as f64,
        cfg.integration.control(),
        &cfg.model,
    )?;
    let errors = pointwise_errors(&run.samples, &traj)?;
    write_atomic(out, |w| {
        write_oracle_csv(w, &run.samples, &errors).map_err(io_fail(out))
    })?;
    echo_config(out, &cfg)
}

fn dispatch(cli: Cli, cancel: &AtomicBool) -> Outcome {
    if cli.seedless {
        info!("seedless: this program uses no random numbers");
    }
    let lenient = cli.lenient;
    match cli.command {
        Command::Simulate { config, out } => {
            simulate(&load_config(config.as_deref(), lenient)?, &out)
        }
        Command::Le {
            input,
            column,
            method,
            config,
            out,
        } => {
            let mut cfg = load_config(config.as_deref(), lenient)?;
            cfg.lyapunov.method = match method {
                MethodArg::Wolf => LeMethod::Wolf,
                MethodArg::Benettin => LeMethod::Benettin,
            };
            le(&input, &column, method, &cfg, &out)
        }
        Command::Sweep {
            figure,
            config,
            out,
        } => {
            let figure = Figure::from(figure);
            let cfg = match config {
                Some(p) => load_over_preset(figure, &p, lenient)?,
                None => RunConfig::preset(figure),
            };
            sweep(figure, &cfg, &out, cancel)
        }
        Command::Oracle {
            config,
            tmax,
            ns,
            out,
        } => oracle(&load_config(config.as_deref(), lenient)?, tmax, ns, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cancel = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&cancel);
    if let Err(e) = ctrlc::set_handler(move || flag.store(true, Ordering::Relaxed)) {
        warn!("cannot install interrupt handler: {e}");
    }
    match dispatch(cli, &cancel) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
