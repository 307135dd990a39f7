//! Explicit adaptive Runge-Kutta 4(5) integrator with Dormand-Prince
//! coefficients, FSAL stepping and the classic 4th-order continuous
//! extension for dense output.

use crate::error::{Error, Result};

/// A first-order system `dy/dt = f(t, y)` on a flat real vector.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

impl<F> OdeSystem for (usize, F)
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.0
    }
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (self.1)(t, y, dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub safety: f64,
    pub fac_min: f64,
    pub fac_max: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            h_init: 1e-4,
            h_min: 1e-12,
            h_max: f64::INFINITY,
            safety: 0.9,
            fac_min: 0.2,
            fac_max: 10.0,
            max_steps: 50_000_000,
        }
    }
}

impl StepControl {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("integration.rel_tol", self.rel_tol),
            ("integration.abs_tol", self.abs_tol),
        ] {
            if !(v > 0.0 && v <= 1e-3) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in (0, 1e-3]"
                )));
            }
        }
        if !(self.h_init > 0.0) {
            return Err(Error::InvalidParameter("h_init must be > 0".into()));
        }
        Ok(())
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const NODES: [f64; 6] = [C2, C3, C4, C5, 1.0, 1.0];
const TABLEAU: [&[f64]; 6] = [
    &[A21],
    &[A31, A32],
    &[A41, A42, A43],
    &[A51, A52, A53, A54],
    &[A61, A62, A63, A64, A65],
    &[A71, 0.0, A73, A74, A75, A76],
];

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Interpolation data for the most recent accepted step.
#[derive(Debug, Clone)]
struct DenseSegment {
    t_old: f64,
    h: f64,
    r: [Vec<f64>; 5],
}

impl DenseSegment {
    fn eval(&self, t: f64, out: &mut [f64]) {
        let theta = (t - self.t_old) / self.h;
        let theta1 = 1.0 - theta;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.r[0][i]
                + theta
                    * (self.r[1][i]
                        + theta1 * (self.r[2][i] + theta * (self.r[3][i] + theta1 * self.r[4][i])));
        }
    }
}

/// Stepper state. Owns the current point and the FSAL derivative.
pub struct Dopri5<'a, S: OdeSystem> {
    system: &'a S,
    ctrl: StepControl,
    t: f64,
    y: Vec<f64>,
    h: f64,
    k: [Vec<f64>; 7],
    y_stage: Vec<f64>,
    y_new: Vec<f64>,
    dense: Option<DenseSegment>,
    steps: usize,
    rhs_evals: usize,
}

impl<'a, S: OdeSystem> Dopri5<'a, S> {
    pub fn new(system: &'a S, t0: f64, y0: &[f64], ctrl: StepControl) -> Result<Self> {
        let n = system.dim();
        assert_eq!(y0.len(), n, "initial state has wrong dimension");
        if y0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { t: t0 });
        }
        let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
        system.rhs(t0, y0, &mut k[0]);
        Ok(Self {
            system,
            ctrl,
            t: t0,
            y: y0.to_vec(),
            h: ctrl.h_init,
            k,
            y_stage: vec![0.0; n],
            y_new: vec![0.0; n],
            dense: None,
            steps: 0,
            rhs_evals: 1,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn rhs_evals(&self) -> usize {
        self.rhs_evals
    }

    /// Replace the current state (e.g. after a renormalization). The step
    /// size is kept; the dense segment is dropped.
    pub fn reset_state(&mut self, y: &[f64]) {
        self.y.copy_from_slice(y);
        self.system.rhs(self.t, &self.y, &mut self.k[0]);
        self.rhs_evals += 1;
        self.dense = None;
    }

    fn stage(&mut self, h: f64) {
        let n = self.y.len();
        for s in 0..TABLEAU.len() {
            let row = TABLEAU[s];
            for i in 0..n {
                let incr: f64 = row.iter().enumerate().map(|(j, a)| a * self.k[j][i]).sum();
                self.y_stage[i] = self.y[i] + h * incr;
            }
            let (_, rest) = self.k.split_at_mut(s + 1);
            self.system
                .rhs(self.t + NODES[s] * h, &self.y_stage, &mut rest[0]);
        }
        // the last stage is evaluated at the 5th-order solution (FSAL)
        self.y_new.copy_from_slice(&self.y_stage);
        self.rhs_evals += 6;
    }

    /// Max-norm of the scaled local error estimate.
    fn error_norm(&self, h: f64) -> f64 {
        let k = &self.k;
        let mut acc: f64 = 0.0;
        #[allow(clippy::needless_range_loop)]
        for i in 0..self.y.len() {
            let e = h
                * (E1 * k[0][i]
                    + E3 * k[2][i]
                    + E4 * k[3][i]
                    + E5 * k[4][i]
                    + E6 * k[5][i]
                    + E7 * k[6][i]);
            let scale =
                self.ctrl.abs_tol + self.ctrl.rel_tol * self.y[i].abs().max(self.y_new[i].abs());
            acc = acc.max((e / scale).abs());
        }
        acc
    }

    /// Take one accepted step, never stepping past `t_limit`.
    pub fn step(&mut self, t_limit: f64) -> Result<()> {
        if self.steps >= self.ctrl.max_steps {
            return Err(Error::StepSizeUnderflow {
                t: self.t,
                h: self.h,
            });
        }
        loop {
            let remaining = t_limit - self.t;
            let mut h = self.h.min(self.ctrl.h_max);
            let clamped = h >= remaining;
            if clamped {
                h = remaining;
            }
            self.stage(h);
            let err = self.error_norm(h);
            if !err.is_finite() {
                // a non-finite stage may be recoverable with a smaller step
                if h * 0.1 < self.ctrl.h_min {
                    return Err(Error::NonFiniteState { t: self.t });
                }
                self.h = h * 0.1;
                continue;
            }
            let fac = if err == 0.0 {
                self.ctrl.fac_max
            } else {
                (self.ctrl.safety * err.powf(-0.2)).clamp(self.ctrl.fac_min, self.ctrl.fac_max)
            };
            if err <= 1.0 {
                if self.y_new.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteState { t: self.t + h });
                }
                self.accept(h);
                // a clamped final step should not shrink the controller's step
                let proposal = h * fac;
                self.h = if clamped {
                    self.h.max(proposal)
                } else {
                    proposal
                };
                self.steps += 1;
                return Ok(());
            }
            let next = h * fac.min(1.0);
            if next < self.ctrl.h_min {
                return Err(Error::StepSizeUnderflow { t: self.t, h: next });
            }
            self.h = next;
        }
    }

    fn accept(&mut self, h: f64) {
        let n = self.y.len();
        let k = &self.k;
        let mut r: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
        for i in 0..n {
            let ydiff = self.y_new[i] - self.y[i];
            let bspl = h * k[0][i] - ydiff;
            r[0][i] = self.y[i];
            r[1][i] = ydiff;
            r[2][i] = bspl;
            r[3][i] = ydiff - h * k[6][i] - bspl;
            r[4][i] = h
                * (D1 * k[0][i]
                    + D3 * k[2][i]
                    + D4 * k[3][i]
                    + D5 * k[4][i]
                    + D6 * k[5][i]
                    + D7 * k[6][i]);
        }
        self.dense = Some(DenseSegment {
            t_old: self.t,
            h,
            r,
        });
        self.t += h;
        std::mem::swap(&mut self.y, &mut self.y_new);
        self.k.swap(0, 6);
    }

    /// Advance until exactly `t_end`.
    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        while self.t < t_end {
            self.step(t_end)?;
        }
        Ok(())
    }

    /// Evaluate the state at `t` inside the last accepted step.
    fn interpolate(&self, t: f64, out: &mut [f64]) {
        match &self.dense {
            Some(seg) if t < self.t => seg.eval(t, out),
            _ => out.copy_from_slice(&self.y),
        }
    }
}

/// Integrate `system` from `(t0, y0)` and sample it at the increasing times
/// `times` (all `>= t0`) using dense output.
pub fn integrate_sampled<S: OdeSystem>(
    system: &S,
    t0: f64,
    y0: &[f64],
    times: &[f64],
    ctrl: StepControl,
) -> Result<Vec<Vec<f64>>> {
    let mut solver = Dopri5::new(system, t0, y0, ctrl)?;
    let t_end = times.last().copied().unwrap_or(t0);
    let mut out = Vec::with_capacity(times.len());
    let mut buf = vec![0.0; system.dim()];
    for &ts in times {
        if ts <= t0 {
            out.push(y0.to_vec());
            continue;
        }
        while solver.t() < ts {
            solver.step(t_end)?;
        }
        solver.interpolate(ts, &mut buf);
        out.push(buf.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_accurate() {
        let sys = (1usize, |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = -0.5 * y[0]
        });
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.1).collect();
        let ys = integrate_sampled(&sys, 0.0, &[2.0], &times, StepControl::default()).unwrap();
        for (t, y) in times.iter().zip(&ys) {
            let exact = 2.0 * (-0.5 * t).exp();
            assert!((y[0] - exact).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn dense_output_tracks_oscillator() {
        let sys = (2usize, |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        });
        let ctrl = StepControl::with_tolerances(1e-8, 1e-10);
        // sparse steps, many samples: exercise the interpolant
        let times: Vec<f64> = (0..=2000).map(|k| k as f64 * 0.01).collect();
        let ys = integrate_sampled(&sys, 0.0, &[1.0, 0.0], &times, ctrl).unwrap();
        let worst = times
            .iter()
            .zip(&ys)
            .map(|(t, y)| (y[0] - t.cos()).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "worst {worst}");
    }

    #[test]
    fn advance_lands_exactly() {
        let sys = (1usize, |_t: f64, _y: &[f64], dy: &mut [f64]| dy[0] = 1.0);
        let mut s = Dopri5::new(&sys, 0.0, &[0.0], StepControl::default()).unwrap();
        s.advance_to(0.7).unwrap();
        assert_eq!(s.t(), 0.7);
        assert!((s.y()[0] - 0.7).abs() < 1e-14);
    }

    #[test]
    fn blow_up_is_reported() {
        // y' = y², y(0) = 1 blows up at t = 1
        let sys = (1usize, |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[0] * y[0]
        });
        let err = integrate_sampled(&sys, 0.0, &[1.0], &[2.0], StepControl::default()).unwrap_err();
        match err {
            Error::StepSizeUnderflow { t, .. } | Error::NonFiniteState { t } => {
                assert!(t < 1.0 + 1e-6 && t > 0.99, "t = {t}")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_tolerances() {
        assert!(StepControl::with_tolerances(0.0, 1e-9).validate().is_err());
        assert!(StepControl::with_tolerances(1e-2, 1e-9).validate().is_err());
        assert!(StepControl::with_tolerances(1e-6, 1e-9).validate().is_ok());
    }
}
