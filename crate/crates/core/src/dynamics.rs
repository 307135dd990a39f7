//! Right-hand sides of the TDC equations and of the linear mean-value
//! equations `dV/dt = M(F) V`.

use num_complex::Complex64;

use crate::integrator::OdeSystem;
use crate::params::{EnvParams, HarmonicPlacement, ModelToggles, SystemParams};
use crate::state::{FullState, ObservableState, TdcState, N_OBS, N_TDC, STATE_DIM};

pub type MeanMatrix = [[f64; N_OBS]; N_OBS];

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Time derivative of the five TDCs.
///
/// The TDC block is closed: it does not depend on the mean values.
pub fn tdc_rhs(f: &TdcState, sys: &SystemParams, env: &EnvParams) -> TdcState {
    let [f1, f2, f3, f4, f5] = f.0;
    let decay = Complex64::new(env.gamma, env.big_omega);
    let source = env.kernel_peak();
    // every equation carries the same quadratic back-reaction -i(κ1 F3 + κ2 F4) F_i
    let back = -I * (f3 * sys.kappa1 + f4 * sys.kappa2);

    TdcState([
        source * sys.kappa1 - decay * f1 + 2.0 * sys.omega1 * f3 + back * f1,
        source * sys.kappa2 - decay * f2 + 2.0 * sys.omega2 * f4 + back * f2,
        -decay * f3 - 2.0 * sys.omega1 * f1 + back * f3,
        -decay * f4 - 2.0 * sys.omega2 * f2 + back * f4,
        -decay * f5 + sys.g1 * f3 + sys.g2 * f4 + back * f5,
    ])
}

/// Coefficient matrix of the mean-value equations for `V = (q1, q2, p1, p2, n)`.
pub fn mean_matrix(f: &TdcState, sys: &SystemParams, toggles: &ModelToggles) -> MeanMatrix {
    let c = toggles.damping_factor;
    let mut m = [[0.0; N_OBS]; N_OBS];
    m[0][2] = 2.0 * sys.omega1;
    m[1][3] = 2.0 * sys.omega2;
    for i in 0..N_TDC {
        m[2][i] = c * (f[i] * sys.kappa1).im;
        m[3][i] = c * (f[i] * sys.kappa2).im;
    }
    m[2][0] -= 2.0 * sys.omega1;
    m[2][4] -= sys.g1;
    let own = match toggles.harmonic_placement {
        HarmonicPlacement::OwnPosition => 1,
        HarmonicPlacement::CrossPosition => 0,
    };
    m[3][own] -= 2.0 * sys.omega2;
    m[3][4] -= sys.g2;
    m
}

pub fn mat_vec(m: &MeanMatrix, v: &[f64; N_OBS]) -> [f64; N_OBS] {
    let mut out = [0.0; N_OBS];
    for (row, o) in m.iter().zip(out.iter_mut()) {
        *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
    out
}

/// Derivative of the joint state; the returned `t` field is `1` (dt/dt).
pub fn coupled_rhs(
    state: &FullState,
    sys: &SystemParams,
    env: &EnvParams,
    toggles: &ModelToggles,
) -> FullState {
    let tdc = tdc_rhs(&state.tdc, sys, env);
    let m = mean_matrix(&state.tdc, sys, toggles);
    let dv = mat_vec(&m, &state.obs.as_array());
    FullState {
        t: 1.0,
        tdc,
        obs: ObservableState::from_slice(&dv),
    }
}

/// The joint TDC + mean-value system in the flat layout used by the integrator.
#[derive(Debug, Clone, Copy)]
pub struct CoupledSystem {
    pub sys: SystemParams,
    pub env: EnvParams,
    pub toggles: ModelToggles,
}

impl OdeSystem for CoupledSystem {
    fn dim(&self) -> usize {
        STATE_DIM
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let f = TdcState::from_slice(&y[..2 * N_TDC]);
        tdc_rhs(&f, &self.sys, &self.env).write_into(&mut dy[..2 * N_TDC]);
        let m = mean_matrix(&f, &self.sys, &self.toggles);
        let v: [f64; N_OBS] = y[2 * N_TDC..].try_into().expect("state length");
        dy[2 * N_TDC..].copy_from_slice(&mat_vec(&m, &v));
    }
}

/// Mean-value equations with the TDCs frozen at a constant value, the
/// Markovian limit of the model.
#[derive(Debug, Clone, Copy)]
pub struct FrozenMeanSystem {
    pub matrix: MeanMatrix,
}

impl FrozenMeanSystem {
    pub fn new(f: &TdcState, sys: &SystemParams, toggles: &ModelToggles) -> Self {
        Self {
            matrix: mean_matrix(f, sys, toggles),
        }
    }
}

impl OdeSystem for FrozenMeanSystem {
    fn dim(&self) -> usize {
        N_OBS
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let v: [f64; N_OBS] = y.try_into().expect("state length");
        dy.copy_from_slice(&mat_vec(&self.matrix, &v));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn sources_only_at_zero_tdc() {
        let sys = SystemParams::default();
        let env = EnvParams::new(1.0, 2.0, 0.0).unwrap();
        let d = tdc_rhs(&TdcState::zero(), &sys, &env);
        assert_eq!(d[0], c(1.0, 0.0));
        assert_eq!(d[1], c(1.0, 0.0));
        for i in 2..5 {
            assert_eq!(d[i], c(0.0, 0.0));
        }
    }

    #[test]
    fn first_equation_term_by_term() {
        let sys = SystemParams {
            omega1: 0.7,
            omega2: 1.3,
            omega_c: 0.0,
            g1: 0.4,
            g2: -0.2,
            kappa1: 1.5,
            kappa2: 0.6,
        };
        let env = EnvParams::new(2.0, 0.8, 0.3).unwrap();
        let f = TdcState([
            c(0.1, 0.2),
            c(-0.3, 0.1),
            c(0.05, -0.4),
            c(0.2, 0.3),
            c(-0.1, -0.1),
        ]);
        let d = tdc_rhs(&f, &sys, &env);
        let a = c(0.8, 0.3);
        let i = c(0.0, 1.0);
        let (f1, f2, f3, f4, f5) = (f[0], f[1], f[2], f[3], f[4]);
        let e1 = 0.8 * 1.5 - a * f1 + 2.0 * 0.7 * f3 - i * 1.5 * f1 * f3 - i * 0.6 * f1 * f4;
        let e2 = 0.8 * 0.6 - a * f2 + 2.0 * 1.3 * f4 - i * 1.5 * f2 * f3 - i * 0.6 * f2 * f4;
        let e3 = -a * f3 - 2.0 * 0.7 * f1 - i * 1.5 * f3 * f3 - i * 0.6 * f3 * f4;
        let e4 = -a * f4 - 2.0 * 1.3 * f2 - i * 1.5 * f4 * f3 - i * 0.6 * f4 * f4;
        let e5 = -a * f5 + 0.4 * f3 - 0.2 * f4 - i * 1.5 * f5 * f3 - i * 0.6 * f5 * f4;
        for (got, want) in d.0.iter().zip([e1, e2, e3, e4, e5]) {
            assert!((got - want).norm() < 1e-14, "{got} vs {want}");
        }
    }

    #[test]
    fn mirror_index_symmetry() {
        let sys = SystemParams::default();
        let env = EnvParams::new(1.0, 0.5, 0.2).unwrap();
        let f = TdcState([
            c(0.3, -0.1),
            c(0.3, -0.1),
            c(0.2, 0.4),
            c(0.2, 0.4),
            c(1.0, 2.0),
        ]);
        let d = tdc_rhs(&f, &sys, &env);
        assert_eq!(d[0], d[1]);
        assert_eq!(d[2], d[3]);
    }

    /// Damped Newton iteration on the ten real components of the stationary
    /// TDC equations, with a finite-difference Jacobian.
    fn stationary_tdc(sys: &SystemParams, env: &EnvParams) -> TdcState {
        let g = |x: &[f64; 10]| -> [f64; 10] {
            let mut out = [0.0; 10];
            tdc_rhs(&TdcState::from_slice(x), sys, env).write_into(&mut out);
            out
        };
        let mut x = [0.0; 10];
        x[0] = sys.kappa1 / 2.0;
        x[2] = sys.kappa2 / 2.0;
        for _ in 0..50 {
            let r = g(&x);
            let mut jac = nalgebra::DMatrix::<f64>::zeros(10, 10);
            for j in 0..10 {
                let mut xp = x;
                let h = 1e-7;
                xp[j] += h;
                let rp = g(&xp);
                for i in 0..10 {
                    jac[(i, j)] = (rp[i] - r[i]) / h;
                }
            }
            let rhs = nalgebra::DVector::from_iterator(10, r.iter().map(|v| -v));
            let dx = jac.lu().solve(&rhs).unwrap();
            for i in 0..10 {
                x[i] += dx[i];
            }
            if dx.norm() < 1e-14 {
                break;
            }
        }
        TdcState::from_slice(&x)
    }

    #[test]
    fn markovian_fixed_point_is_half_kappa() {
        let sys = SystemParams::default();
        let env = EnvParams::new(1.0, 100.0, 0.0).unwrap();
        let fp = stationary_tdc(&sys, &env);
        assert!(tdc_rhs(&fp, &sys, &env).0.iter().all(|d| d.norm() < 1e-10));
        assert!((fp[0].re - 0.5).abs() < 0.02 * 0.5, "{}", fp[0]);
        assert!(fp[2].norm() < 0.05);
    }

    #[test]
    fn matrix_at_zero_tdc() {
        let sys = SystemParams::default();
        let m = mean_matrix(&TdcState::zero(), &sys, &ModelToggles::default());
        let want = [
            [0.0, 0.0, 2.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 2.0, 0.0],
            [-2.0, 0.0, 0.0, 0.0, -1.0],
            [0.0, -2.0, 0.0, 0.0, -1.0],
            [0.0; 5],
        ];
        assert_eq!(m, want);

        let literal = ModelToggles {
            harmonic_placement: HarmonicPlacement::CrossPosition,
            ..Default::default()
        };
        let m = mean_matrix(&TdcState::zero(), &sys, &literal);
        assert_eq!(m[3], [-2.0, 0.0, 0.0, 0.0, -1.0]);
    }

    #[test]
    fn imaginary_part_extraction_and_damping_factor() {
        let sys = SystemParams {
            kappa1: 2.0,
            ..Default::default()
        };
        let mut f = TdcState::zero();
        f.0[2] = c(0.0, 0.5); // κ1 F3 = i
        let m = mean_matrix(&f, &sys, &ModelToggles::default());
        assert_eq!(m[2][2], 1.0);
        let doubled = ModelToggles {
            damping_factor: 2.0,
            ..Default::default()
        };
        assert_eq!(mean_matrix(&f, &sys, &doubled)[2][2], 2.0);
    }

    #[test]
    fn coupled_rhs_basic_cases() {
        let env = EnvParams::default();
        let toggles = ModelToggles::default();
        let sys = SystemParams::default();
        let mut s = FullState::initial(ObservableState::default());
        s.tdc = TdcState([c(0.3, 0.2); 5]);
        let d = coupled_rhs(&s, &sys, &env, &toggles);
        assert_eq!(d.obs, ObservableState::default());

        s.obs = ObservableState::new(1.0, -2.0, 0.5, 0.1, 3.0);
        let d = coupled_rhs(&s, &sys, &env, &toggles);
        assert_eq!(d.obs.n, 0.0);
        assert_eq!(d.tdc, tdc_rhs(&s.tdc, &sys, &env));

        let bare = SystemParams {
            g1: 0.0,
            g2: 0.0,
            kappa1: 0.0,
            kappa2: 0.0,
            ..Default::default()
        };
        let s = FullState::initial(ObservableState::new(1.0, 0.0, 0.0, 0.0, 0.0));
        let d = coupled_rhs(&s, &bare, &env, &toggles);
        assert_eq!(d.obs.q1, 0.0);
        assert_eq!(d.obs.p1, -2.0);
    }
}
