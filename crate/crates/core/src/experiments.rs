//! Parameter sweeps over the environment and coupling parameters.
//!
//! A [`SweepSpec`] describes a base configuration, one or two swept axes and
//! the observables whose maximum LE is estimated. Cells are independent
//! simulations and run on a worker pool; records always come back in grid
//! order, so results do not depend on the number of workers.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dynamics::CoupledSystem;
use crate::error::{Error, Result};
use crate::integrator::StepControl;
use crate::lyapunov::{
    benettin_max_le, windowed_mean_le, wolf_max_le, BenettinConfig, EmbeddingConfig, LyapunovSeries,
};
use crate::params::{EnvParams, ModelToggles, SystemParams};
use crate::state::{FullState, ObservableState};
use crate::trajectory::{column_index, fmt_f64, integrate};

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "NMCHAOS_THREADS";

/// Name of the synthetic observable holding the per-time maximum over the
/// other observables of a cell.
pub const MAX_OBSERVABLE: &str = "max";

/// Name of the observable reported by the flow-based (Benettin) estimator.
pub const FLOW_OBSERVABLE: &str = "flow";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Custom,
}

impl Figure {
    pub const ALL: [Figure; 6] = [
        Figure::Fig2,
        Figure::Fig3,
        Figure::Fig4,
        Figure::Fig5,
        Figure::Fig6,
        Figure::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
            Figure::Custom => "custom",
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown figure '{s}'")))
    }
}

/// Parameters a sweep axis may vary.
pub const AXIS_NAMES: [&str; 12] = [
    "tau",
    "gamma",
    "big_gamma",
    "big_omega",
    "omega1",
    "omega2",
    "omega_c",
    "g1",
    "g2",
    "kappa1",
    "kappa2",
    "kappa",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn new(name: &str, values: Vec<f64>) -> Self {
        Self {
            name: name.to_string(),
            values,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !AXIS_NAMES.contains(&self.name.as_str()) {
            return Err(Error::InvalidParameter(format!(
                "sweep axis '{}' is not one of {}",
                self.name,
                AXIS_NAMES.join(", ")
            )));
        }
        if self.values.is_empty() || self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sweep axis '{}' needs finite, non-empty values",
                self.name
            )));
        }
        Ok(())
    }
}

/// `n` points spaced evenly in log between `lo` and `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|k| (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / (n - 1) as f64).exp())
            .collect(),
    }
}

/// `n` points spaced evenly between `lo` and `hi` inclusive.
pub fn lin_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeMethod {
    Wolf,
    Benettin,
}

impl FromStr for LeMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wolf" => Ok(LeMethod::Wolf),
            "benettin" => Ok(LeMethod::Benettin),
            _ => Err(Error::InvalidParameter(format!("unknown LE method '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub figure: Figure,
    pub sys: SystemParams,
    pub env: EnvParams,
    pub init: ObservableState,
    pub toggles: ModelToggles,
    pub control: StepControl,
    pub t_max: f64,
    pub dt_out: f64,
    /// Spacing of the time records written for running-estimate sweeps.
    pub record_dt: f64,
    pub axes: Vec<Axis>,
    /// Trajectory columns fed to the Wolf estimator.
    pub observables: Vec<String>,
    /// Also report the per-time maximum over `observables`.
    pub report_max: bool,
    /// Report one windowed mean per cell instead of a running estimate.
    pub window: Option<(f64, f64)>,
    pub method: LeMethod,
    pub embedding: EmbeddingConfig,
    pub benettin: BenettinConfig,
}

impl SweepSpec {
    fn base(figure: Figure) -> Self {
        Self {
            figure,
            sys: SystemParams::default(),
            env: EnvParams::default(),
            init: ObservableState::new(1.1, 1.1, 0.0, 0.0, 2.0),
            toggles: ModelToggles::default(),
            control: StepControl::default(),
            t_max: 200.0,
            dt_out: 0.01,
            record_dt: 0.1,
            axes: vec![],
            observables: vec!["q1".into()],
            report_max: false,
            window: None,
            method: LeMethod::Wolf,
            embedding: EmbeddingConfig::default(),
            benettin: BenettinConfig::default(),
        }
    }

    /// Preset for a figure, built from the embedded configuration. `Custom`
    /// starts from the defaults with no axes.
    pub fn preset(figure: Figure) -> Self {
        match figure {
            Figure::Custom => Self::base(figure),
            f => RunConfig::preset(f)
                .sweep_spec(f)
                .expect("embedded preset is valid"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sys.validate()?;
        self.env.validate()?;
        self.toggles.validate()?;
        self.control.validate()?;
        self.embedding.validate()?;
        if !self.init.is_finite() {
            return Err(Error::InvalidParameter(
                "initial values must be finite".into(),
            ));
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(Error::InvalidParameter(
                "integration.t_max must be > 0".into(),
            ));
        }
        if !(self.dt_out > 0.0 && self.dt_out <= self.t_max) {
            return Err(Error::InvalidParameter(
                "integration.dt_out must lie in (0, t_max]".into(),
            ));
        }
        if !(self.record_dt >= self.dt_out && self.record_dt <= self.t_max) {
            return Err(Error::InvalidParameter(
                "sweep.record_dt must lie in [dt_out, t_max]".into(),
            ));
        }
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(Error::InvalidParameter(
                "a sweep needs one or two axes".into(),
            ));
        }
        for axis in &self.axes {
            axis.validate()?;
        }
        if self.method == LeMethod::Wolf {
            if self.observables.is_empty() {
                return Err(Error::InvalidParameter(
                    "sweep.observables must not be empty".into(),
                ));
            }
            for o in &self.observables {
                column_index(o)?;
            }
        }
        if let Some((lo, hi)) = self.window {
            if !(lo < hi && lo >= 0.0 && hi <= self.t_max) {
                return Err(Error::InvalidParameter(
                    "sweep.window must satisfy 0 <= lo < hi <= t_max".into(),
                ));
            }
        }
        Ok(())
    }

    /// All grid cells in row-major order (last axis fastest).
    pub fn cells(&self) -> Vec<Vec<f64>> {
        let mut cells = vec![vec![]];
        for axis in &self.axes {
            cells = cells
                .into_iter()
                .flat_map(|prefix| {
                    axis.values.iter().map(move |&v| {
                        let mut c = prefix.clone();
                        c.push(v);
                        c
                    })
                })
                .collect();
        }
        cells
    }

    /// Parameters of one cell.
    pub fn cell_params(&self, values: &[f64]) -> Result<(SystemParams, EnvParams)> {
        let (mut sys, mut env) = (self.sys, self.env);
        for (axis, &v) in self.axes.iter().zip(values) {
            match axis.name.as_str() {
                "tau" => {
                    if !(v > 0.0 && v <= 100.0) {
                        return Err(Error::InvalidParameter(format!(
                            "tau = {v} outside (0, 100]"
                        )));
                    }
                    env.gamma = 1.0 / v;
                }
                "gamma" => env.gamma = v,
                "big_gamma" => env.big_gamma = v,
                "big_omega" => env.big_omega = v,
                "omega1" => sys.omega1 = v,
                "omega2" => sys.omega2 = v,
                "omega_c" => sys.omega_c = v,
                "g1" => sys.g1 = v,
                "g2" => sys.g2 = v,
                "kappa1" => sys.kappa1 = v,
                "kappa2" => sys.kappa2 = v,
                "kappa" => {
                    sys.kappa1 = v;
                    sys.kappa2 = v;
                }
                other => return Err(Error::InvalidParameter(format!("unknown axis '{other}'"))),
            }
        }
        sys.validate()?;
        env.validate()?;
        Ok((sys, env))
    }
}

/// Time stamp or averaging window of a record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeOrWindow {
    Time(f64),
    Window(f64, f64),
    /// Failed cell: no time information.
    None,
}

impl fmt::Display for TimeOrWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeOrWindow::Time(t) => write!(f, "{}", fmt_f64(*t)),
            TimeOrWindow::Window(lo, hi) => write!(f, "{lo}:{hi}"),
            TimeOrWindow::None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub axis_values: Vec<f64>,
    pub at: TimeOrWindow,
    pub observable: String,
    pub lambda: f64,
    pub error: Option<String>,
}

impl Record {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub code_version: &'static str,
    pub threads: usize,
    pub wall_time_s: f64,
    pub cells: usize,
    pub failed_cells: usize,
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub figure: Figure,
    pub axis_names: Vec<String>,
    pub records: Vec<Record>,
    pub provenance: Provenance,
}

impl GridResult {
    /// Records of one cell and observable, in time order.
    pub fn select<'a>(
        &'a self,
        axis_values: &'a [f64],
        observable: &'a str,
    ) -> impl Iterator<Item = &'a Record> + 'a {
        self.records
            .iter()
            .filter(move |r| r.observable == observable && r.axis_values == axis_values)
    }

    /// Mean of the running estimate over `[lo, hi]` for one cell and
    /// observable, or the cell's windowed value for window sweeps.
    pub fn late_mean(
        &self,
        axis_values: &[f64],
        observable: &str,
        lo: f64,
        hi: f64,
    ) -> Option<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for r in self.select(axis_values, observable) {
            if r.failed() {
                return None;
            }
            match r.at {
                TimeOrWindow::Time(t) if t >= lo - 1e-9 && t <= hi + 1e-9 => {
                    sum += r.lambda;
                    n += 1;
                }
                TimeOrWindow::Window(..) => return Some(r.lambda),
                _ => {}
            }
        }
        (n > 0).then(|| sum / n as f64)
    }

    /// Long-format CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = String::new();
        for (k, _) in self.axis_names.iter().enumerate() {
            header.push_str(&format!("axis{0}_name,axis{0}_value,", k + 1));
        }
        writeln!(w, "{header}t_or_window,observable,lambda,failed,error")?;
        for r in &self.records {
            let mut line = String::new();
            for (name, v) in self.axis_names.iter().zip(&r.axis_values) {
                line.push_str(&format!("{name},{},", fmt_f64(*v)));
            }
            let lambda = if r.lambda.is_nan() {
                "NaN".to_string()
            } else {
                fmt_f64(r.lambda)
            };
            writeln!(
                w,
                "{line}{},{},{lambda},{},{}",
                r.at,
                r.observable,
                r.failed(),
                csv_field(r.error.as_deref().unwrap_or(""))
            )?;
        }
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Worker count: `NMCHAOS_THREADS` if set to a positive integer, otherwise
/// the number of available cores.
pub fn worker_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

type Estimate = (String, Result<LyapunovSeries>);

/// Estimates for one cell, one per observable. The outer error means the
/// simulation itself failed.
fn estimate_cell(spec: &SweepSpec, values: &[f64]) -> Result<Vec<Estimate>> {
    let (sys, env) = spec.cell_params(values)?;
    let init = FullState::initial(spec.init);
    match spec.method {
        LeMethod::Wolf => {
            let traj = integrate(
                &sys,
                &env,
                &init,
                spec.t_max,
                spec.dt_out,
                spec.control,
                &spec.toggles,
            )?;
            Ok(spec
                .observables
                .iter()
                .map(|o| {
                    let series = traj
                        .column(o)
                        .and_then(|x| wolf_max_le(&x, spec.dt_out, &spec.embedding));
                    (o.clone(), series)
                })
                .collect())
        }
        LeMethod::Benettin => {
            let system = CoupledSystem {
                sys,
                env,
                toggles: spec.toggles,
            };
            let cfg = BenettinConfig {
                horizon: spec.t_max,
                control: spec.control,
                ..spec.benettin
            };
            Ok(vec![(
                FLOW_OBSERVABLE.to_string(),
                benettin_max_le(&system, &init.to_vec(), &cfg),
            )])
        }
    }
}

/// Held running estimate on the record grid, `None` before the first event.
fn on_record_grid(series: &LyapunovSeries, record_dt: f64, t_max: f64) -> Vec<(f64, Option<f64>)> {
    let running = series.running();
    let n = (t_max / record_dt + 1e-9).floor() as usize;
    let mut next = 0;
    (0..=n)
        .map(|k| {
            let t = k as f64 * record_dt;
            while next < series.times.len() && series.times[next] <= t + 1e-9 * record_dt {
                next += 1;
            }
            (t, (next > 0).then(|| running[next - 1]))
        })
        .collect()
}

/// Runs one grid cell; failures become flagged records.
pub fn run_cell(spec: &SweepSpec, values: &[f64]) -> Vec<Record> {
    let failure = |observable: &str, e: &Error| Record {
        axis_values: values.to_vec(),
        at: TimeOrWindow::None,
        observable: observable.to_string(),
        lambda: f64::NAN,
        error: Some(e.to_string()),
    };
    let observables: Vec<String> = match spec.method {
        LeMethod::Wolf => spec.observables.clone(),
        LeMethod::Benettin => vec![FLOW_OBSERVABLE.to_string()],
    };
    let report_max = spec.report_max && spec.method == LeMethod::Wolf;
    let estimates = match estimate_cell(spec, values) {
        Ok(e) => e,
        Err(e) => {
            let mut out: Vec<Record> = observables.iter().map(|o| failure(o, &e)).collect();
            if report_max {
                out.push(failure(MAX_OBSERVABLE, &e));
            }
            return out;
        }
    };

    let mut out = Vec::new();
    if let Some((lo, hi)) = spec.window {
        let mut best: Option<f64> = None;
        let mut complete = true;
        for (name, series) in &estimates {
            match series
                .as_ref()
                .map_err(Clone::clone)
                .and_then(|s| windowed_mean_le(s, lo, hi))
            {
                Ok(v) => {
                    best = Some(best.map_or(v, |b: f64| b.max(v)));
                    out.push(Record {
                        axis_values: values.to_vec(),
                        at: TimeOrWindow::Window(lo, hi),
                        observable: name.clone(),
                        lambda: v,
                        error: None,
                    });
                }
                Err(e) => {
                    complete = false;
                    out.push(failure(name, &e));
                }
            }
        }
        if report_max && complete {
            if let Some(v) = best {
                out.push(Record {
                    axis_values: values.to_vec(),
                    at: TimeOrWindow::Window(lo, hi),
                    observable: MAX_OBSERVABLE.into(),
                    lambda: v,
                    error: None,
                });
            }
        }
        return out;
    }

    let mut grids: Vec<Vec<(f64, Option<f64>)>> = Vec::new();
    for (name, series) in &estimates {
        let series = match series {
            Ok(s) => s,
            Err(e) => {
                out.push(failure(name, e));
                continue;
            }
        };
        let grid = on_record_grid(series, spec.record_dt, spec.t_max);
        out.extend(grid.iter().filter_map(|&(t, v)| {
            v.map(|lambda| Record {
                axis_values: values.to_vec(),
                at: TimeOrWindow::Time(t),
                observable: name.clone(),
                lambda,
                error: None,
            })
        }));
        grids.push(grid);
    }
    // the maximum is only meaningful when every component has an estimate
    if report_max && grids.len() == estimates.len() {
        for k in 0..grids.first().map_or(0, Vec::len) {
            let vals: Vec<f64> = grids.iter().filter_map(|g| g[k].1).collect();
            if vals.len() == grids.len() {
                out.push(Record {
                    axis_values: values.to_vec(),
                    at: TimeOrWindow::Time(grids[0][k].0),
                    observable: MAX_OBSERVABLE.into(),
                    lambda: vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                    error: None,
                });
            }
        }
    }
    out
}

fn run_or_skip(spec: &SweepSpec, values: &[f64], cancel: &AtomicBool) -> Vec<Record> {
    if !cancel.load(Ordering::Relaxed) {
        return run_cell(spec, values);
    }
    let mut names: Vec<String> = match spec.method {
        LeMethod::Wolf => spec.observables.clone(),
        LeMethod::Benettin => vec![FLOW_OBSERVABLE.to_string()],
    };
    if spec.report_max && spec.method == LeMethod::Wolf {
        names.push(MAX_OBSERVABLE.to_string());
    }
    names
        .into_iter()
        .map(|observable| Record {
            axis_values: values.to_vec(),
            at: TimeOrWindow::None,
            observable,
            lambda: f64::NAN,
            error: Some(Error::Interrupted.to_string()),
        })
        .collect()
}

#[cfg(feature = "parallel")]
fn map_cells(
    spec: &SweepSpec,
    cells: &[Vec<f64>],
    threads: usize,
    cancel: &AtomicBool,
) -> Result<Vec<Vec<Record>>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| {
        cells
            .par_iter()
            .map(|c| run_or_skip(spec, c, cancel))
            .collect()
    }))
}

#[cfg(not(feature = "parallel"))]
fn map_cells(
    spec: &SweepSpec,
    cells: &[Vec<f64>],
    _threads: usize,
    cancel: &AtomicBool,
) -> Result<Vec<Vec<Record>>> {
    Ok(cells.iter().map(|c| run_or_skip(spec, c, cancel)).collect())
}

/// Runs every cell of `spec` on `threads` workers.
pub fn run_sweep_with(spec: &SweepSpec, threads: usize) -> Result<GridResult> {
    run_sweep_cancellable(spec, threads, &AtomicBool::new(false))
}

/// Like [`run_sweep_with`], but cells not yet started when `cancel` becomes
/// true are recorded as interrupted failures instead of being run.
pub fn run_sweep_cancellable(
    spec: &SweepSpec,
    threads: usize,
    cancel: &AtomicBool,
) -> Result<GridResult> {
    spec.validate()?;
    let threads = threads.max(1);
    let start = Stopwatch::start();
    let cells = spec.cells();
    let per_cell = map_cells(spec, &cells, threads, cancel)?;
    let failed_cells = per_cell
        .iter()
        .filter(|r| r.iter().any(Record::failed))
        .count();
    Ok(GridResult {
        figure: spec.figure,
        axis_names: spec.axes.iter().map(|a| a.name.clone()).collect(),
        records: per_cell.into_iter().flatten().collect(),
        provenance: Provenance {
            code_version: env!("CARGO_PKG_VERSION"),
            threads,
            wall_time_s: start.seconds(),
            cells: cells.len(),
            failed_cells,
        },
    })
}

/// Wall-clock timer; reads 0 on targets without a system clock.
struct Stopwatch(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Stopwatch {
    fn start() -> Self {
        Self(
            #[cfg(not(target_arch = "wasm32"))]
            std::time::Instant::now(),
        )
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.0.elapsed().as_secs_f64();
        #[cfg(target_arch = "wasm32")]
        0.0
    }
}

/// Runs every cell of `spec` on [`worker_count`] workers.
pub fn run_sweep(spec: &SweepSpec) -> Result<GridResult> {
    run_sweep_with(spec, worker_count())
}

/// Running LE of `⟨q1⟩` over the `(τ, t)` grid.
pub fn run_fig2(tau_values: &[f64], t_max: f64) -> Result<GridResult> {
    let mut s = SweepSpec::preset(Figure::Fig2);
    s.axes = vec![Axis::new("tau", tau_values.to_vec())];
    s.t_max = t_max;
    run_sweep(&s)
}

/// Running LE of each `Re F_i` and their maximum, per `τ`.
pub fn run_fig3(tau_values: &[f64]) -> Result<GridResult> {
    let mut s = SweepSpec::preset(Figure::Fig3);
    s.axes = vec![Axis::new("tau", tau_values.to_vec())];
    run_sweep(&s)
}

/// Running LE of `⟨p1⟩` per central frequency `Ω` at `τ = 1`.
pub fn run_fig4(omega_values: &[f64]) -> Result<GridResult> {
    let mut s = SweepSpec::preset(Figure::Fig4);
    s.axes = vec![Axis::new("big_omega", omega_values.to_vec())];
    run_sweep(&s)
}

/// Windowed mean LE of `⟨p1⟩` over the `(κ1, κ2)` grid.
pub fn run_fig5(kappa1: &[f64], kappa2: &[f64]) -> Result<GridResult> {
    let mut s = SweepSpec::preset(Figure::Fig5);
    s.axes = vec![
        Axis::new("kappa1", kappa1.to_vec()),
        Axis::new("kappa2", kappa2.to_vec()),
    ];
    run_sweep(&s)
}

/// Running LE of `⟨p1⟩` and the TDCs without optomechanical coupling.
pub fn run_fig6(tau_values: &[f64]) -> Result<GridResult> {
    let mut s = SweepSpec::preset(Figure::Fig6);
    s.axes = vec![Axis::new("tau", tau_values.to_vec())];
    run_sweep(&s)
}
