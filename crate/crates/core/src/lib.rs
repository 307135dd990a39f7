//! Simulation and analysis of chaos induced by a non-Markovian environment
//! in a double-mirror optomechanical system.
//!
//! The mean values `V = (⟨q1⟩, ⟨q2⟩, ⟨p1⟩, ⟨p2⟩, ⟨a†a⟩)` obey a linear
//! equation `dV/dt = M(F) V` whose coefficients are the five time-domain
//! convolutions (TDCs) `F1..F5`. The TDCs in turn satisfy a closed set of
//! nonlinear ODEs driven by an Ornstein-Uhlenbeck memory kernel. This crate
//! integrates the joint system ([`trajectory`]), checks the closed TDC
//! equations against a brute-force two-time kernel field ([`oracle`]),
//! estimates maximum Lyapunov exponents ([`lyapunov`]) and runs the
//! parameter sweeps of the environment study ([`experiments`]).

// `!(x > 0.0)` is used deliberately so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod integrator;
pub mod kernel;
pub mod lyapunov;
pub mod oracle;
pub mod params;
pub mod state;
pub mod trajectory;

pub use error::{Error, Result};
pub use params::{EnvParams, HarmonicPlacement, ModelToggles, SystemParams};
pub use state::{FullState, ObservableState, TdcState};
pub use trajectory::{integrate, Trajectory};
