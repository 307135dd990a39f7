//! Brute-force reconstruction of the TDCs from the two-time coefficients
//! `f_i(t, s)` of the operator expansion.
//!
//! Every source time `s` on a uniform grid owns a row `f_1..f_5(t, s)` that
//! is injected at `t = s` with its boundary values and then advanced in `t`
//! together with all older rows (method of lines, shared RK4 step). The TDCs
//! are recovered by trapezoidal quadrature
//! `F_i(t) = ∫₀ᵗ α(t, s) f_i(t, s) ds`. The noise-dependent coefficient is
//! dropped, so this computes the same object as the closed TDC equations
//! by an independent route.

use std::io::{self, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernel::ou_correlation;
use crate::params::{EnvParams, SystemParams};
use crate::state::{TdcState, N_TDC};
use crate::trajectory::{fmt_f64, Trajectory};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

type Row = [Complex64; N_TDC];

/// Which form of the `f2` equation to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum F2Reading {
    /// `-2iκ2 F2 f4`, the mirror image of the `f1` equation.
    #[default]
    Symmetric,
    /// `-2iκ2 F1 f4` as printed; does not reduce to the closed TDC equations.
    Literal,
}

/// Reconstructed TDCs at one grid time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdcQuadrature {
    pub t: f64,
    pub tdc: TdcState,
}

/// The live rows `f(t, s_k)` for `s_k = k Δs ≤ t`.
#[derive(Debug, Clone)]
pub struct KernelField {
    sys: SystemParams,
    env: EnvParams,
    reading: F2Reading,
    ds: f64,
    rows: Vec<Row>,
    steps: usize,
}

impl KernelField {
    pub fn new(sys: SystemParams, env: EnvParams, ds: f64, reading: F2Reading) -> Self {
        let mut field = Self {
            sys,
            env,
            reading,
            ds,
            rows: Vec::new(),
            steps: 0,
        };
        field.rows.push(field.boundary());
        field
    }

    /// Row values at injection, `f(t, t)`.
    pub fn boundary(&self) -> Row {
        let z = Complex64::new(0.0, 0.0);
        [
            Complex64::new(self.sys.kappa1, 0.0),
            Complex64::new(self.sys.kappa2, 0.0),
            z,
            z,
            z,
        ]
    }

    pub fn frontier(&self) -> f64 {
        self.steps as f64 * self.ds
    }

    pub fn s_grid(&self) -> Vec<f64> {
        (0..self.rows.len()).map(|k| k as f64 * self.ds).collect()
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    /// Trapezoidal quadrature of `α(t, s) f(t, s)` at the current frontier.
    pub fn quadrature(&self) -> TdcState {
        self.quadrature_with(&self.rows, 0.0)
    }

    /// Quadrature at `frontier + partial` for stage rows living on the grid
    /// `s_0..s_n`, closing the last panel `[s_n, frontier + partial]` with the
    /// boundary value at its upper end.
    fn quadrature_with(&self, rows: &[Row], partial: f64) -> TdcState {
        let n = rows.len() - 1;
        let t = self.frontier() + partial;
        let mut acc = [Complex64::new(0.0, 0.0); N_TDC];
        let mut add = |w: f64, s: f64, row: &Row| {
            let a = ou_correlation(&self.env, t - s) * w;
            for (o, f) in acc.iter_mut().zip(row) {
                *o += a * f;
            }
        };
        for (k, row) in rows.iter().enumerate() {
            let left = if k == 0 { 0.0 } else { 0.5 * self.ds };
            let right = if k == n { 0.5 * partial } else { 0.5 * self.ds };
            if left + right > 0.0 {
                add(left + right, k as f64 * self.ds, row);
            }
        }
        if partial > 0.0 {
            add(0.5 * partial, t, &self.boundary());
        }
        TdcState(acc)
    }

    fn row_rhs(&self, f: &Row, big_f: &TdcState) -> Row {
        let (k1, k2) = (self.sys.kappa1, self.sys.kappa2);
        let (w1, w2) = (self.sys.omega1, self.sys.omega2);
        let [f1, f2, f3, f4, _] = *f;
        let [c1, c2, c3, c4, c5] = big_f.0;
        let f2_cross = match self.reading {
            F2Reading::Symmetric => c2,
            F2Reading::Literal => c1,
        };
        [
            2.0 * w1 * f3 - 2.0 * I * k1 * c1 * f3 - I * k1 * c2 * f4
                + I * k1 * c3 * f1
                + I * k1 * c4 * f2
                - I * k2 * c1 * f4,
            2.0 * w2 * f4 - I * k1 * c2 * f3 - I * k2 * c1 * f3 - 2.0 * I * k2 * f2_cross * f4
                + I * k2 * c3 * f1
                + I * k2 * c4 * f2,
            -2.0 * w1 * f1 - I * k1 * c3 * f3 - I * k2 * c3 * f4,
            -2.0 * w2 * f2 - I * k1 * c4 * f3 - I * k2 * c4 * f4,
            self.sys.g1 * f3 + self.sys.g2 * f4 - I * k1 * c5 * f3 - I * k2 * c5 * f4,
        ]
    }

    fn field_rhs(&self, rows: &[Row], partial: f64) -> Vec<Row> {
        let big_f = self.quadrature_with(rows, partial);
        rows.iter().map(|r| self.row_rhs(r, &big_f)).collect()
    }

    fn shifted(rows: &[Row], k: &[Row], h: f64) -> Vec<Row> {
        rows.iter()
            .zip(k)
            .map(|(r, d)| std::array::from_fn(|i| r[i] + d[i] * h))
            .collect()
    }

    /// Advance every live row by one grid step and inject the new row.
    pub fn advance(&mut self) -> Result<()> {
        let h = self.ds;
        let k1 = self.field_rhs(&self.rows, 0.0);
        let k2 = self.field_rhs(&Self::shifted(&self.rows, &k1, 0.5 * h), 0.5 * h);
        let k3 = self.field_rhs(&Self::shifted(&self.rows, &k2, 0.5 * h), 0.5 * h);
        let k4 = self.field_rhs(&Self::shifted(&self.rows, &k3, h), h);
        for (idx, row) in self.rows.iter_mut().enumerate() {
            for i in 0..N_TDC {
                row[i] +=
                    (k1[idx][i] + 2.0 * k2[idx][i] + 2.0 * k3[idx][i] + k4[idx][i]) * (h / 6.0);
            }
        }
        self.steps += 1;
        if self
            .rows
            .iter()
            .any(|r| r.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())))
        {
            return Err(Error::NonFiniteState { t: self.frontier() });
        }
        let b = self.boundary();
        self.rows.push(b);
        Ok(())
    }
}

/// Reconstruct `F_i` on the grid `t_k = k t_max / n_s`, `k = 0..=n_s`.
pub fn run_kernel_field(
    sys: &SystemParams,
    env: &EnvParams,
    t_max: f64,
    n_s: usize,
    reading: F2Reading,
) -> Result<Vec<TdcQuadrature>> {
    sys.validate()?;
    env.validate()?;
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(Error::InvalidParameter("t_max must be > 0".into()));
    }
    if n_s < 2 {
        return Err(Error::InvalidParameter("n_s must be >= 2".into()));
    }
    let mut field = KernelField::new(*sys, *env, t_max / n_s as f64, reading);
    let mut out = Vec::with_capacity(n_s + 1);
    out.push(TdcQuadrature {
        t: 0.0,
        tdc: field.quadrature(),
    });
    for _ in 0..n_s {
        field.advance()?;
        out.push(TdcQuadrature {
            t: field.frontier(),
            tdc: field.quadrature(),
        });
    }
    Ok(out)
}

/// Oracle output together with its grid-refinement error estimate.
#[derive(Debug, Clone)]
pub struct KernelFieldRun {
    pub samples: Vec<TdcQuadrature>,
    /// Richardson estimate `max |F(n_s) - F(n_s/2)| / 3` over shared times.
    pub richardson_estimate: f64,
}

/// Kernel-field oracle with a Richardson self-check against half the grid.
///
/// Fails with [`Error::GridTooCoarse`] when the estimated quadrature error
/// exceeds `10 · rel_tol · max(1, max|F|)`.
pub fn evolve_kernel_field(
    sys: &SystemParams,
    env: &EnvParams,
    t_max: f64,
    n_s: usize,
    rel_tol: f64,
) -> Result<KernelFieldRun> {
    if n_s < 64 || !n_s.is_multiple_of(2) {
        return Err(Error::InvalidParameter(
            "n_s must be an even number >= 64".into(),
        ));
    }
    if !(rel_tol > 0.0) {
        return Err(Error::InvalidParameter("rel_tol must be > 0".into()));
    }
    let fine = run_kernel_field(sys, env, t_max, n_s, F2Reading::Symmetric)?;
    let coarse = run_kernel_field(sys, env, t_max, n_s / 2, F2Reading::Symmetric)?;
    let mut diff: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for (k, c) in coarse.iter().enumerate() {
        let f = &fine[2 * k];
        for i in 0..N_TDC {
            diff = diff.max((f.tdc[i] - c.tdc[i]).norm());
            scale = scale.max(f.tdc[i].norm());
        }
    }
    let estimate = diff / 3.0;
    let limit = 10.0 * rel_tol * scale;
    if estimate > limit {
        return Err(Error::GridTooCoarse { estimate, limit });
    }
    Ok(KernelFieldRun {
        samples: fine,
        richardson_estimate: estimate,
    })
}

fn aligned_index(traj: &Trajectory, t: f64) -> Result<usize> {
    let dt = traj.setup.dt_out;
    let k = (t / dt).round();
    if k < 0.0 || k as usize >= traj.len() {
        return Err(Error::GridMismatch(format!(
            "oracle time {t} outside trajectory"
        )));
    }
    let k = k as usize;
    if (traj.samples[k].t - t).abs() > 1e-9 {
        return Err(Error::GridMismatch(format!(
            "oracle time {t} has no trajectory sample within 1e-9"
        )));
    }
    Ok(k)
}

/// Per-sample, per-component discrepancies `|F_oracle - F_traj|`.
pub fn pointwise_errors(oracle: &[TdcQuadrature], traj: &Trajectory) -> Result<Vec<[f64; N_TDC]>> {
    oracle
        .iter()
        .map(|q| {
            let k = aligned_index(traj, q.t)?;
            let f = &traj.samples[k].tdc;
            Ok(std::array::from_fn(|i| (q.tdc[i] - f[i]).norm()))
        })
        .collect()
}

/// Sup-norm discrepancy per TDC component.
pub fn compare_tdc(oracle: &[TdcQuadrature], traj: &Trajectory) -> Result<[f64; N_TDC]> {
    let errs = pointwise_errors(oracle, traj)?;
    Ok(errs.iter().fold([0.0; N_TDC], |mut acc, e| {
        for i in 0..N_TDC {
            acc[i] = acc[i].max(e[i]);
        }
        acc
    }))
}

/// Oracle CSV: reconstructed TDCs and the pointwise errors against `traj`.
pub fn write_oracle_csv<W: Write>(
    mut w: W,
    oracle: &[TdcQuadrature],
    errors: &[[f64; N_TDC]],
) -> io::Result<()> {
    let mut header = vec!["t".to_string()];
    for i in 1..=N_TDC {
        header.push(format!("ReF{i}_oracle"));
        header.push(format!("ImF{i}_oracle"));
    }
    for i in 1..=N_TDC {
        header.push(format!("err{i}"));
    }
    writeln!(w, "{}", header.join(","))?;
    for (q, e) in oracle.iter().zip(errors) {
        let mut row = vec![fmt_f64(q.t)];
        for f in &q.tdc.0 {
            row.push(fmt_f64(f.re));
            row.push(fmt_f64(f.im));
        }
        row.extend(e.iter().map(|v| fmt_f64(*v)));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::StepControl;
    use crate::params::ModelToggles;
    use crate::state::{FullState, ObservableState};
    use crate::trajectory::integrate;

    fn fig2_env() -> EnvParams {
        EnvParams::new(1.0, 1.0, 0.0).unwrap()
    }

    fn closed_system(t_max: f64, dt: f64) -> Trajectory {
        let init = FullState::initial(ObservableState::new(1.1, 1.1, 0.0, 0.0, 2.0));
        integrate(
            &SystemParams::default(),
            &fig2_env(),
            &init,
            t_max,
            dt,
            StepControl::with_tolerances(1e-11, 1e-13),
            &ModelToggles::default(),
        )
        .unwrap()
    }

    #[test]
    fn empty_integral_at_start() {
        let out = run_kernel_field(
            &SystemParams::default(),
            &fig2_env(),
            1.0,
            64,
            F2Reading::Symmetric,
        )
        .unwrap();
        assert_eq!(out[0].tdc, TdcState::zero());
        assert_eq!(out.len(), 65);
    }

    #[test]
    fn initial_slope_is_kernel_peak_times_kappa() {
        let sys = SystemParams {
            kappa1: 0.8,
            ..Default::default()
        };
        let env = EnvParams::new(1.0, 3.0, 0.5).unwrap();
        let out = run_kernel_field(&sys, &env, 1e-3, 64, F2Reading::Symmetric).unwrap();
        let slope = out[1].tdc[0].re / out[1].t;
        let want = 0.5 * 3.0 * 0.8;
        assert!((slope - want).abs() < 1e-3 * want, "slope {slope}");
    }

    #[test]
    fn rows_keep_boundary_values_at_injection() {
        let sys = SystemParams {
            kappa1: 0.7,
            kappa2: 1.3,
            ..Default::default()
        };
        let mut field = KernelField::new(sys, fig2_env(), 0.01, F2Reading::Symmetric);
        for _ in 0..50 {
            field.advance().unwrap();
        }
        let last = field.rows().last().unwrap();
        assert_eq!(last, &field.boundary());
        assert_eq!(field.rows().len(), 51);
        // older rows have moved away from their boundary values
        assert!((field.rows()[0][2]).norm() > 1e-3);
    }

    #[test]
    fn symmetric_parameters_give_symmetric_rows() {
        let mut field = KernelField::new(
            SystemParams::default(),
            fig2_env(),
            0.02,
            F2Reading::Symmetric,
        );
        for _ in 0..100 {
            field.advance().unwrap();
        }
        for row in field.rows() {
            assert!((row[0] - row[1]).norm() <= 1e-8 * (1.0 + row[0].norm()));
            assert!((row[2] - row[3]).norm() <= 1e-8 * (1.0 + row[2].norm()));
        }
    }

    #[test]
    fn agrees_with_closed_equations_at_second_order() {
        let t_max = 2.0;
        let traj = closed_system(t_max, t_max / 256.0);
        let e128 = compare_tdc(
            &run_kernel_field(
                &SystemParams::default(),
                &fig2_env(),
                t_max,
                128,
                F2Reading::Symmetric,
            )
            .unwrap(),
            &traj,
        )
        .unwrap();
        let e256 = compare_tdc(
            &run_kernel_field(
                &SystemParams::default(),
                &fig2_env(),
                t_max,
                256,
                F2Reading::Symmetric,
            )
            .unwrap(),
            &traj,
        )
        .unwrap();
        let m128 = e128.iter().cloned().fold(0.0, f64::max);
        let m256 = e256.iter().cloned().fold(0.0, f64::max);
        assert!(m256 < 1e-4, "{e256:?}");
        let ratio = m128 / m256;
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn literal_f2_reading_breaks_the_reduction() {
        let sys = SystemParams {
            kappa1: 0.5,
            kappa2: 1.5,
            ..Default::default()
        };
        let env = fig2_env();
        let init = FullState::initial(ObservableState::default());
        let traj = integrate(
            &sys,
            &env,
            &init,
            2.0,
            2.0 / 128.0,
            StepControl::default(),
            &ModelToggles::default(),
        )
        .unwrap();
        let sym = compare_tdc(
            &run_kernel_field(&sys, &env, 2.0, 128, F2Reading::Symmetric).unwrap(),
            &traj,
        )
        .unwrap();
        let lit = compare_tdc(
            &run_kernel_field(&sys, &env, 2.0, 128, F2Reading::Literal).unwrap(),
            &traj,
        )
        .unwrap();
        assert!(sym[1] < 1e-3);
        assert!(lit[1] > 10.0 * sym[1], "{lit:?} vs {sym:?}");
    }

    #[test]
    fn compare_identical_is_zero_and_misaligned_fails() {
        let traj = closed_system(1.0, 0.125);
        let same: Vec<TdcQuadrature> = traj
            .samples
            .iter()
            .map(|s| TdcQuadrature { t: s.t, tdc: s.tdc })
            .collect();
        assert_eq!(compare_tdc(&same, &traj).unwrap(), [0.0; N_TDC]);
        let off = [TdcQuadrature {
            t: 0.3,
            tdc: TdcState::zero(),
        }];
        assert!(matches!(
            compare_tdc(&off, &traj),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn coarse_grid_is_flagged() {
        let err =
            evolve_kernel_field(&SystemParams::default(), &fig2_env(), 5.0, 64, 1e-9).unwrap_err();
        assert!(matches!(err, Error::GridTooCoarse { .. }));
        assert!(evolve_kernel_field(&SystemParams::default(), &fig2_env(), 5.0, 32, 1e-3).is_err());
    }
}
