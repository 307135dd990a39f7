//! TOML run configuration, figure presets and validation.
//!
//! Unknown keys are rejected unless the configuration is loaded leniently,
//! in which case they are logged and dropped. Every field has a default, so
//! an empty document is a valid configuration.

use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::{Table, Value};

use crate::error::Error;
use crate::experiments::{lin_space, log_space, Axis, Figure, LeMethod, SweepSpec};
use crate::integrator::StepControl;
use crate::lyapunov::{BenettinConfig, EmbeddingConfig};
use crate::params::{EnvParams, ModelToggles, SystemParams};
use crate::state::ObservableState;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// Comma-separated list of every offending key.
    #[error("unknown key(s): {0}")]
    UnknownKey(String),

    #[error("invalid configuration: {0}")]
    Validation(String),
}

impl From<Error> for ConfigError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(msg) => ConfigError::Validation(msg),
            other => ConfigError::Validation(other.to_string()),
        }
    }
}

pub type ConfigResult<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub q1: f64,
    pub q2: f64,
    pub p1: f64,
    pub p2: f64,
    pub n: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            q1: 1.1,
            q2: 1.1,
            p1: 0.0,
            p2: 0.0,
            n: 2.0,
        }
    }
}

impl From<InitialConfig> for ObservableState {
    fn from(c: InitialConfig) -> Self {
        ObservableState::new(c.q1, c.q2, c.p1, c.p2, c.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegrationConfig {
    pub t_max: f64,
    pub dt_out: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_init: f64,
    pub max_steps: u64,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        let c = StepControl::default();
        Self {
            t_max: 200.0,
            dt_out: 0.01,
            rel_tol: c.rel_tol,
            abs_tol: c.abs_tol,
            h_init: c.h_init,
            max_steps: c.max_steps as u64,
        }
    }
}

impl IntegrationConfig {
    pub fn control(&self) -> StepControl {
        StepControl {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            h_init: self.h_init,
            max_steps: self.max_steps as usize,
            ..StepControl::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LyapunovConfig {
    pub method: LeMethod,
    pub embed_dim: usize,
    /// `0` selects the lag from the series.
    pub delay: usize,
    /// Absent means twice the delay.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theiler: Option<usize>,
    pub epsilon_frac: f64,
    pub evolve_steps: usize,
    pub angle_tol: f64,
    pub delta0: f64,
    pub renorm_dt: f64,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        let e = EmbeddingConfig::default();
        let b = BenettinConfig::default();
        Self {
            method: LeMethod::Wolf,
            embed_dim: e.dim,
            delay: e.delay,
            theiler: e.theiler,
            epsilon_frac: e.epsilon_frac,
            evolve_steps: e.evolve_steps,
            angle_tol: e.angle_tol,
            delta0: b.delta0,
            renorm_dt: b.renorm_dt,
        }
    }
}

impl LyapunovConfig {
    pub fn embedding(&self) -> EmbeddingConfig {
        EmbeddingConfig {
            dim: self.embed_dim,
            delay: self.delay,
            theiler: self.theiler,
            epsilon_frac: self.epsilon_frac,
            evolve_steps: self.evolve_steps,
            angle_tol: self.angle_tol,
        }
    }

    /// Benettin settings; the horizon is filled in by the caller.
    pub fn benettin(&self, horizon: f64, control: StepControl) -> BenettinConfig {
        BenettinConfig {
            delta0: self.delta0,
            renorm_dt: self.renorm_dt,
            horizon,
            control,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub t_max: f64,
    pub n_s: usize,
    /// Accuracy target for the Richardson self-check.
    pub rel_tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            t_max: 5.0,
            n_s: 512,
            rel_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Lin,
    Log,
}

/// A swept axis given either as explicit `values` or as `space`, `lo`, `hi`
/// and `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<Spacing>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

impl AxisConfig {
    pub fn resolve(&self) -> ConfigResult<Axis> {
        let key = |k: &str| format!("sweep.axes.{}.{k}", self.name);
        let values = match self.space {
            None => {
                if self.lo.is_some() || self.hi.is_some() || self.n.is_some() {
                    return Err(ConfigError::Validation(format!(
                        "{} requires {}",
                        key("lo/hi/n"),
                        key("space")
                    )));
                }
                self.values.clone()
            }
            Some(space) => {
                if !self.values.is_empty() {
                    return Err(ConfigError::Validation(format!(
                        "{} and {} are mutually exclusive",
                        key("values"),
                        key("space")
                    )));
                }
                let missing =
                    || ConfigError::Validation(format!("{} needs lo, hi and n", key("space")));
                let (lo, hi, n) = (
                    self.lo.ok_or_else(missing)?,
                    self.hi.ok_or_else(missing)?,
                    self.n.ok_or_else(missing)?,
                );
                if n == 0 {
                    return Err(ConfigError::Validation(format!(
                        "{} must be >= 1",
                        key("n")
                    )));
                }
                match space {
                    Spacing::Lin => lin_space(lo, hi, n),
                    Spacing::Log => {
                        if !(lo > 0.0 && hi > 0.0) {
                            return Err(ConfigError::Validation(format!(
                                "{} must be > 0 for log spacing",
                                key("lo/hi")
                            )));
                        }
                        log_space(lo, hi, n)
                    }
                }
            }
        };
        let axis = Axis::new(&self.name, values);
        axis.validate()?;
        Ok(axis)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub figure: Option<Figure>,
    pub observables: Vec<String>,
    pub report_max: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    pub record_dt: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub axes: Vec<AxisConfig>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            figure: None,
            observables: vec!["q1".into()],
            report_max: false,
            window: None,
            record_dt: 0.1,
            threads: None,
            axes: vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub system: SystemParams,
    pub environment: EnvParams,
    pub initial: InitialConfig,
    pub integration: IntegrationConfig,
    pub lyapunov: LyapunovConfig,
    pub model: ModelToggles,
    pub oracle: OracleConfig,
    pub sweep: SweepConfig,
}

const SECTIONS: [(&str, &[&str]); 8] = [
    (
        "system",
        &[
            "omega1", "omega2", "omega_c", "g1", "g2", "kappa1", "kappa2",
        ],
    ),
    ("environment", &["big_gamma", "gamma", "big_omega"]),
    ("initial", &["q1", "q2", "p1", "p2", "n"]),
    (
        "integration",
        &[
            "t_max",
            "dt_out",
            "rel_tol",
            "abs_tol",
            "h_init",
            "max_steps",
        ],
    ),
    (
        "lyapunov",
        &[
            "method",
            "embed_dim",
            "delay",
            "theiler",
            "epsilon_frac",
            "evolve_steps",
            "angle_tol",
            "delta0",
            "renorm_dt",
        ],
    ),
    ("model", &["damping_factor", "harmonic_placement"]),
    ("oracle", &["t_max", "n_s", "rel_tol"]),
    (
        "sweep",
        &[
            "figure",
            "observables",
            "report_max",
            "window",
            "record_dt",
            "threads",
            "axes",
        ],
    ),
];

const AXIS_KEYS: [&str; 6] = ["name", "values", "space", "lo", "hi", "n"];

fn preset_source(figure: Figure) -> Option<&'static str> {
    match figure {
        Figure::Fig2 => Some(include_str!("../presets/fig2.toml")),
        Figure::Fig3 => Some(include_str!("../presets/fig3.toml")),
        Figure::Fig4 => Some(include_str!("../presets/fig4.toml")),
        Figure::Fig5 => Some(include_str!("../presets/fig5.toml")),
        Figure::Fig6 => Some(include_str!("../presets/fig6.toml")),
        Figure::Custom => None,
    }
}

fn parse_table(src: &str) -> ConfigResult<Table> {
    src.parse::<Table>().map_err(|e| {
        let (line, column) = e
            .span()
            .map(|span| line_column(src, span.start))
            .unwrap_or((1, 1));
        ConfigError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })
}

/// 1-based line and column of a byte offset.
fn line_column(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Removes (lenient) or reports (strict) keys outside the schema.
fn check_keys(table: &mut Table, lenient: bool) -> ConfigResult<()> {
    let mut unknown: Vec<String> = Vec::new();
    table.retain(|section, value| {
        let Some((_, keys)) = SECTIONS.iter().find(|(s, _)| *s == section) else {
            unknown.push(section.to_string());
            return false;
        };
        if let Value::Table(inner) = value {
            inner.retain(|k, v| {
                if !keys.contains(&k) {
                    unknown.push(format!("{section}.{k}"));
                    return false;
                }
                if let (true, Value::Array(axes)) = (section == "sweep" && k == "axes", v) {
                    for (i, axis) in axes.iter_mut().enumerate() {
                        if let Value::Table(a) = axis {
                            a.retain(|ak, _| {
                                let ok = AXIS_KEYS.contains(&ak);
                                if !ok {
                                    unknown.push(format!("sweep.axes[{i}].{ak}"));
                                }
                                ok
                            });
                        }
                    }
                }
                true
            });
        }
        true
    });
    match unknown.first() {
        None => Ok(()),
        Some(_) if !lenient => Err(ConfigError::UnknownKey(unknown.join(", "))),
        Some(_) => {
            for key in unknown {
                warn!("ignoring unknown configuration key `{key}`");
            }
            Ok(())
        }
    }
}

/// Coupling constants are real numbers; reject complex encodings early with
/// a precise message.
fn check_real_kappa(table: &Table) -> ConfigResult<()> {
    if let Some(Value::Table(sys)) = table.get("system") {
        for key in ["kappa1", "kappa2"] {
            match sys.get(key) {
                None | Some(Value::Integer(_)) | Some(Value::Float(_)) => {}
                Some(_) => {
                    return Err(ConfigError::Validation(format!(
                        "system.{key} must be a real number"
                    )))
                }
            }
        }
    }
    Ok(())
}

/// Recursively overlays `top` onto `base`; arrays are replaced whole.
fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn from_table(table: Table) -> ConfigResult<RunConfig> {
    check_real_kappa(&table)?;
    let cfg: RunConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Validation(e.message().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    /// Parses and validates a TOML document.
    pub fn parse(src: &str, lenient: bool) -> ConfigResult<Self> {
        let mut table = parse_table(src)?;
        check_keys(&mut table, lenient)?;
        from_table(table)
    }

    /// The embedded preset for a figure; `Custom` yields the defaults.
    pub fn preset(figure: Figure) -> Self {
        match preset_source(figure) {
            Some(src) => Self::parse(src, false).expect("embedded preset is valid"),
            None => Self::default(),
        }
    }

    /// Parses `src` on top of the figure preset: keys present in `src`
    /// override the preset, arrays (such as sweep axes) are replaced whole.
    pub fn parse_over_preset(figure: Figure, src: &str, lenient: bool) -> ConfigResult<Self> {
        let mut base = match preset_source(figure) {
            Some(p) => parse_table(p)?,
            None => Table::new(),
        };
        let mut top = parse_table(src)?;
        check_keys(&mut top, lenient)?;
        merge(&mut base, top);
        from_table(base)
    }

    pub fn load(path: &Path, lenient: bool) -> ConfigResult<Self> {
        Self::parse(&read(path)?, lenient)
    }

    /// Canonical TOML for this configuration.
    pub fn emit(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> ConfigResult<()> {
        self.system.validate()?;
        self.environment.validate()?;
        self.model.validate()?;
        self.integration.control().validate()?;
        self.lyapunov.embedding().validate()?;
        let i = &self.integration;
        if !(i.t_max.is_finite() && i.t_max > 0.0) {
            return Err(ConfigError::Validation(
                "integration.t_max must be > 0".into(),
            ));
        }
        if !(i.dt_out > 0.0 && i.dt_out <= i.t_max) {
            return Err(ConfigError::Validation(
                "integration.dt_out must lie in (0, t_max]".into(),
            ));
        }
        if !(i.h_init > 0.0 && i.h_init.is_finite()) {
            return Err(ConfigError::Validation(
                "integration.h_init must be > 0".into(),
            ));
        }
        let init = self.initial;
        if ![init.q1, init.q2, init.p1, init.p2, init.n]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(ConfigError::Validation(
                "initial values must be finite".into(),
            ));
        }
        let l = &self.lyapunov;
        if !(1e-10..=1e-4).contains(&l.delta0) {
            return Err(ConfigError::Validation(
                "lyapunov.delta0 must lie in [1e-10, 1e-4]".into(),
            ));
        }
        if !(l.renorm_dt > 0.0 && l.renorm_dt.is_finite()) {
            return Err(ConfigError::Validation(
                "lyapunov.renorm_dt must be > 0".into(),
            ));
        }
        let o = &self.oracle;
        if !(o.t_max > 0.0 && o.t_max.is_finite()) {
            return Err(ConfigError::Validation("oracle.t_max must be > 0".into()));
        }
        if o.n_s < 64 || !o.n_s.is_multiple_of(2) {
            return Err(ConfigError::Validation(
                "oracle.n_s must be an even number >= 64".into(),
            ));
        }
        if !(o.rel_tol > 0.0) {
            return Err(ConfigError::Validation("oracle.rel_tol must be > 0".into()));
        }
        if self.sweep.threads == Some(0) {
            return Err(ConfigError::Validation("sweep.threads must be >= 1".into()));
        }
        for axis in &self.sweep.axes {
            axis.resolve()?;
        }
        Ok(())
    }

    pub fn initial_state(&self) -> ObservableState {
        self.initial.into()
    }

    /// The sweep described by this configuration, tagged with `figure`.
    pub fn sweep_spec(&self, figure: Figure) -> ConfigResult<SweepSpec> {
        let control = self.integration.control();
        let spec = SweepSpec {
            figure,
            sys: self.system,
            env: self.environment,
            init: self.initial_state(),
            toggles: self.model,
            control,
            t_max: self.integration.t_max,
            dt_out: self.integration.dt_out,
            record_dt: self.sweep.record_dt,
            axes: self
                .sweep
                .axes
                .iter()
                .map(AxisConfig::resolve)
                .collect::<ConfigResult<_>>()?,
            observables: self.sweep.observables.clone(),
            report_max: self.sweep.report_max,
            window: self.sweep.window.map(|[lo, hi]| (lo, hi)),
            method: self.lyapunov.method,
            embedding: self.lyapunov.embedding(),
            benettin: self.lyapunov.benettin(self.integration.t_max, control),
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn read(path: &Path) -> ConfigResult<String> {
    std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Reads a file and parses it over the preset of `figure`.
pub fn load_over_preset(figure: Figure, path: &Path, lenient: bool) -> ConfigResult<RunConfig> {
    RunConfig::parse_over_preset(figure, &read(path)?, lenient)
}
