//! Model parameters: the double-mirror system, the Ornstein-Uhlenbeck
//! environment and the switches that select between the two readings of the
//! mean-value coefficient matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// System parameters of the double-mirror cavity.
///
/// Frequencies are dimensionless, measured in units of a reference mirror
/// frequency. `omega_c` is carried for completeness only: the photon number
/// is conserved and the cavity frequency enters none of the equations of
/// motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemParams {
    pub omega1: f64,
    pub omega2: f64,
    pub omega_c: f64,
    pub g1: f64,
    pub g2: f64,
    pub kappa1: f64,
    pub kappa2: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            omega1: 1.0,
            omega2: 1.0,
            omega_c: 1.0,
            g1: 1.0,
            g2: 1.0,
            kappa1: 1.0,
            kappa2: 1.0,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("system.omega1", self.omega1),
            ("system.omega2", self.omega2),
            ("system.omega_c", self.omega_c),
            ("system.g1", self.g1),
            ("system.g2", self.g2),
            ("system.kappa1", self.kappa1),
            ("system.kappa2", self.kappa2),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite")));
            }
        }
        if self.omega1 <= 0.0 {
            return Err(Error::InvalidParameter("system.omega1 must be > 0".into()));
        }
        if self.omega2 <= 0.0 {
            return Err(Error::InvalidParameter("system.omega2 must be > 0".into()));
        }
        Ok(())
    }

    /// True when swapping mirror 1 and mirror 2 leaves the parameters unchanged.
    pub fn is_mirror_symmetric(&self) -> bool {
        self.omega1 == self.omega2 && self.g1 == self.g2 && self.kappa1 == self.kappa2
    }
}

/// Parameters of the Lorentzian spectrum / O-U correlation function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvParams {
    /// Overall kernel strength.
    pub big_gamma: f64,
    /// Kernel width, the inverse memory time.
    pub gamma: f64,
    /// Central frequency of the environment.
    pub big_omega: f64,
}

impl Default for EnvParams {
    fn default() -> Self {
        Self {
            big_gamma: 1.0,
            gamma: 1.0,
            big_omega: 0.0,
        }
    }
}

impl EnvParams {
    pub fn new(big_gamma: f64, gamma: f64, big_omega: f64) -> Result<Self> {
        let env = Self {
            big_gamma,
            gamma,
            big_omega,
        };
        env.validate()?;
        Ok(env)
    }

    /// Environment with memory time `tau`, unit strength and the given
    /// central frequency.
    pub fn from_tau(tau: f64, big_omega: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidParameter(
                "environment memory time tau must be > 0".into(),
            ));
        }
        Self::new(1.0, 1.0 / tau, big_omega)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidParameter(
                "environment.gamma must be > 0".into(),
            ));
        }
        if !(self.big_gamma.is_finite() && self.big_gamma > 0.0) {
            return Err(Error::InvalidParameter(
                "environment.big_gamma must be > 0".into(),
            ));
        }
        if !self.big_omega.is_finite() {
            return Err(Error::InvalidParameter(
                "environment.big_omega must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Memory time of the environment.
    pub fn tau(&self) -> f64 {
        1.0 / self.gamma
    }

    /// Kernel peak value `Γγ/2`, i.e. the correlation at zero time lag.
    pub fn kernel_peak(&self) -> f64 {
        0.5 * self.big_gamma * self.gamma
    }
}

/// Where the harmonic restoring term of the second mirror's momentum
/// equation acts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum HarmonicPlacement {
    /// `dp2/dt` contains `-2 ω2 q1`; config value `paper_matrix`.
    #[serde(rename = "paper_matrix")]
    CrossPosition,
    /// `dp2/dt` contains `-2 ω2 q2`, so each momentum couples to its own
    /// position; config value `appendix`.
    #[default]
    #[serde(rename = "appendix")]
    OwnPosition,
}

/// Switches selecting between the two readings of the coefficient matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelToggles {
    /// Prefactor `c` in front of the `Im(κ_j F_i)` entries, either 1 or 2.
    pub damping_factor: f64,
    pub harmonic_placement: HarmonicPlacement,
}

impl Default for ModelToggles {
    fn default() -> Self {
        Self {
            damping_factor: 1.0,
            harmonic_placement: HarmonicPlacement::OwnPosition,
        }
    }
}

impl ModelToggles {
    pub fn validate(&self) -> Result<()> {
        if self.damping_factor != 1.0 && self.damping_factor != 2.0 {
            return Err(Error::InvalidParameter(
                "model.damping_factor must be 1 or 2".into(),
            ));
        }
        Ok(())
    }
}
