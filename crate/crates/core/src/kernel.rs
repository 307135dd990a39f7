//! Ornstein-Uhlenbeck correlation function and its Lorentzian spectrum.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::params::EnvParams;

/// Environment correlation `α(t, s) = (Γγ/2) exp(-(γ + iΩ)|t - s|)` as a
/// function of the lag `dt = t - s`.
pub fn ou_correlation(env: &EnvParams, dt: f64) -> Complex64 {
    let lag = dt.abs();
    let decay = (-env.gamma * lag).exp();
    let phase = Complex64::from_polar(1.0, -env.big_omega * lag);
    phase * (env.kernel_peak() * decay)
}

/// Lorentzian spectral density `J(ν) = (Γγ²/2π) / ((ν - Ω)² + γ²)`.
pub fn spectral_density(env: &EnvParams, nu: f64) -> f64 {
    let detuning = nu - env.big_omega;
    env.big_gamma * env.gamma * env.gamma
        / (2.0 * PI)
        / (detuning * detuning + env.gamma * env.gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(g: f64, gamma: f64, omega: f64) -> EnvParams {
        EnvParams::new(g, gamma, omega).unwrap()
    }

    #[test]
    fn correlation_at_zero_lag_is_kernel_peak() {
        let a = ou_correlation(&env(1.0, 2.0, 0.0), 0.0);
        assert_eq!(a, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn correlation_decays_exponentially() {
        let a = ou_correlation(&env(1.0, 1.0, 0.0), 1.0);
        assert!((a.re - 0.5 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((a.re - 0.18394).abs() < 1e-5);
        assert_eq!(a.im, 0.0);
    }

    #[test]
    fn correlation_phase_rotates_with_central_frequency() {
        let a = ou_correlation(&env(1.0, 1.0, PI), 1.0);
        assert!((a.re + 0.5 * (-1.0f64).exp()).abs() < 1e-15);
        assert!(a.im.abs() < 1e-15);
        // symmetric in the lag
        let b = ou_correlation(&env(1.0, 1.0, PI), -1.0);
        assert_eq!(a, b);
    }

    #[test]
    fn spectral_peak_and_half_width() {
        let e = env(1.0, 0.7, 3.0);
        let peak = spectral_density(&e, 3.0);
        assert!((peak - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((spectral_density(&e, 3.7) - 0.5 * peak).abs() < 1e-15);
        assert!((spectral_density(&e, 2.3) - 0.5 * peak).abs() < 1e-15);
    }

    /// Composite Simpson in ν on [0, 10⁵]; the neglected tail is below 2·10⁻⁶.
    fn integrate_half_line(e: &EnvParams) -> f64 {
        let upper = 1.0e5;
        let n = 4_000_000;
        let h = upper / n as f64;
        let mut s = spectral_density(e, 0.0) + spectral_density(e, upper);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * spectral_density(e, k as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn spectrum_integrates_to_zero_lag_correlation_when_narrow() {
        // ∫₀^∞ J(ν) dν = α(0) = Γγ/2 once the Lorentzian lies well inside ν > 0
        let e = env(1.0, 1.0, 50.0);
        let total = integrate_half_line(&e);
        let peak = ou_correlation(&e, 0.0).re;
        assert!((total - peak).abs() < 0.01 * peak, "integral {total}");
        let e = env(2.0, 0.5, 40.0);
        let total = integrate_half_line(&e);
        assert!((total - 0.5).abs() < 0.005, "integral {total}");
    }

    #[test]
    fn spectral_density_is_positive() {
        let e = env(2.0, 0.3, -1.0);
        for k in -100..100 {
            assert!(spectral_density(&e, k as f64 * 0.37) > 0.0);
        }
    }
}
