#![allow(dead_code)]

use nmchaos::integrator::{integrate_sampled, StepControl};

pub const LORENZ_DT: f64 = 0.01;
pub const LORENZ_SAMPLES: usize = 100_000;
const TRANSIENT: usize = 1000;

pub fn lorenz(_t: f64, y: &[f64], dy: &mut [f64]) {
    dy[0] = 10.0 * (y[1] - y[0]);
    dy[1] = y[0] * (28.0 - y[2]) - y[1];
    dy[2] = y[0] * y[1] - 8.0 / 3.0 * y[2];
}

pub type Rhs = fn(f64, &[f64], &mut [f64]);

pub fn lorenz_system() -> (usize, Rhs) {
    (3, lorenz)
}

/// A point on the attractor and the x-series sampled from it.
pub fn lorenz_series() -> (Vec<f64>, Vec<f64>) {
    let times: Vec<f64> = (0..TRANSIENT + LORENZ_SAMPLES)
        .map(|k| k as f64 * LORENZ_DT)
        .collect();
    let ys = integrate_sampled(
        &lorenz_system(),
        0.0,
        &[1.0, 1.0, 1.0],
        &times,
        StepControl::default(),
    )
    .unwrap();
    let x = ys[TRANSIENT..].iter().map(|y| y[0]).collect();
    (ys[TRANSIENT].clone(), x)
}

pub fn decay(_t: f64, y: &[f64], dy: &mut [f64]) {
    dy[0] = -0.3 * y[0];
}
