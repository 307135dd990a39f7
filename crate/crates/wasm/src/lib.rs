//! Browser bindings: trajectory simulation, Lyapunov exponent versus
//! memory time, and the environment kernel and spectrum.
//!
//! Each export returns a flat `Float64Array`; the row layout is given in
//! its doc comment. The `*_impl` functions hold the logic and are what the
//! native tests exercise.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use nmchaos::experiments::{run_sweep_with, Axis, Figure, SweepSpec};
use nmchaos::integrator::StepControl;
use nmchaos::kernel::{ou_correlation, spectral_density};
use nmchaos::state::COLUMNS;
use nmchaos::{integrate, EnvParams, FullState, ModelToggles, ObservableState, SystemParams};
use wasm_bindgen::prelude::*;

/// Number of values per trajectory row returned by [`simulate`].
pub const TRAJECTORY_WIDTH: usize = COLUMNS.len();

fn symmetric_system(kappa: f64, g: f64) -> SystemParams {
    SystemParams {
        kappa1: kappa,
        kappa2: kappa,
        g1: g,
        g2: g,
        ..Default::default()
    }
}

pub fn simulate_impl(
    tau: f64,
    big_omega: f64,
    kappa: f64,
    g: f64,
    t_max: f64,
    dt_out: f64,
) -> Result<Vec<f64>, String> {
    let sys = symmetric_system(kappa, g);
    let env = EnvParams::from_tau(tau, big_omega).map_err(|e| e.to_string())?;
    let init = FullState::initial(ObservableState::new(1.1, 1.1, 0.0, 0.0, 2.0));
    let traj = integrate(
        &sys,
        &env,
        &init,
        t_max,
        dt_out,
        StepControl::default(),
        &ModelToggles::default(),
    )
    .map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(traj.len() * TRAJECTORY_WIDTH);
    for name in COLUMNS {
        out.extend(traj.column(name).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

pub fn lyapunov_vs_tau_impl(taus: &[f64], t_max: f64) -> Result<Vec<f64>, String> {
    let mut spec = SweepSpec::preset(Figure::Fig2);
    spec.axes = vec![Axis::new("tau", taus.to_vec())];
    spec.t_max = t_max;
    let lo = 0.5 * t_max;
    let grid = run_sweep_with(&spec, 1).map_err(|e| e.to_string())?;
    Ok(taus
        .iter()
        .map(|&tau| grid.late_mean(&[tau], "q1", lo, t_max).unwrap_or(f64::NAN))
        .collect())
}

pub fn kernel_impl(
    big_gamma: f64,
    gamma: f64,
    big_omega: f64,
    t_max: f64,
    n: usize,
) -> Result<Vec<f64>, String> {
    let env = EnvParams::new(big_gamma, gamma, big_omega).map_err(|e| e.to_string())?;
    if n < 2 || !(t_max > 0.0) {
        return Err("need n >= 2 and t_max > 0".into());
    }
    let nu_span = big_omega.abs() + 10.0 * gamma;
    let mut out = Vec::with_capacity(5 * n);
    for k in 0..n {
        let frac = k as f64 / (n - 1) as f64;
        let t = frac * t_max;
        let a = ou_correlation(&env, t);
        let nu = big_omega - nu_span + 2.0 * nu_span * frac;
        out.extend([t, a.re, a.im, nu, spectral_density(&env, nu)]);
    }
    Ok(out)
}

/// Trajectory for symmetric mirrors from the default initial state.
/// Column-major: `COLUMNS.len()` blocks of equal length, in CSV column
/// order (`t, q1, q2, p1, p2, n, ReF1, ImF1, ..., ImF5`).
#[wasm_bindgen]
pub fn simulate(
    tau: f64,
    big_omega: f64,
    kappa: f64,
    g: f64,
    t_max: f64,
    dt_out: f64,
) -> Result<Vec<f64>, JsError> {
    simulate_impl(tau, big_omega, kappa, g, t_max, dt_out).map_err(|e| JsError::new(&e))
}

/// Late-window (second half) Wolf exponent of `q1` for each `tau`.
#[wasm_bindgen]
pub fn lyapunov_vs_tau(taus: Vec<f64>, t_max: f64) -> Result<Vec<f64>, JsError> {
    lyapunov_vs_tau_impl(&taus, t_max).map_err(|e| JsError::new(&e))
}

/// Rows of `(t, Re α(t), Im α(t), ν, J(ν))`, `n` rows.
#[wasm_bindgen]
pub fn kernel(
    big_gamma: f64,
    gamma: f64,
    big_omega: f64,
    t_max: f64,
    n: usize,
) -> Result<Vec<f64>, JsError> {
    kernel_impl(big_gamma, gamma, big_omega, t_max, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn trajectory_width() -> usize {
    TRAJECTORY_WIDTH
}
