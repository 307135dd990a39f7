//! State containers and their flat real-vector layout.
//!
//! The joint system is integrated as 15 reals: the five complex TDCs stored
//! interleaved as `(Re F1, Im F1, ..., Re F5, Im F5)` followed by
//! `(q1, q2, p1, p2, n)`.

use num_complex::Complex64;

/// Number of complex time-domain convolutions.
pub const N_TDC: usize = 5;
/// Number of real mean values.
pub const N_OBS: usize = 5;
/// Length of the flat joint state.
pub const STATE_DIM: usize = 2 * N_TDC + N_OBS;

/// The five TDCs `F1..F5` at one instant, indexed by the operator basis
/// `q1, q2, p1, p2, a†a`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TdcState(pub [Complex64; N_TDC]);

impl TdcState {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|f| f.re.is_finite() && f.im.is_finite())
    }

    pub fn write_into(&self, out: &mut [f64]) {
        for (i, f) in self.0.iter().enumerate() {
            out[2 * i] = f.re;
            out[2 * i + 1] = f.im;
        }
    }

    pub fn from_slice(y: &[f64]) -> Self {
        let mut f = [Complex64::default(); N_TDC];
        for (i, fi) in f.iter_mut().enumerate() {
            *fi = Complex64::new(y[2 * i], y[2 * i + 1]);
        }
        Self(f)
    }
}

impl std::ops::Index<usize> for TdcState {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

/// Mean values `⟨q1⟩, ⟨q2⟩, ⟨p1⟩, ⟨p2⟩, ⟨a†a⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObservableState {
    pub q1: f64,
    pub q2: f64,
    pub p1: f64,
    pub p2: f64,
    pub n: f64,
}

impl ObservableState {
    pub fn new(q1: f64, q2: f64, p1: f64, p2: f64, n: f64) -> Self {
        Self { q1, q2, p1, p2, n }
    }

    pub fn as_array(&self) -> [f64; N_OBS] {
        [self.q1, self.q2, self.p1, self.p2, self.n]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4])
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

/// TDCs plus mean values at time `t` (dimensionless, in units of `1/ω`).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FullState {
    pub t: f64,
    pub tdc: TdcState,
    pub obs: ObservableState,
}

impl FullState {
    /// State at `t = 0` with vanishing TDCs.
    pub fn initial(obs: ObservableState) -> Self {
        Self {
            t: 0.0,
            tdc: TdcState::zero(),
            obs,
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut y = vec![0.0; STATE_DIM];
        self.tdc.write_into(&mut y[..2 * N_TDC]);
        y[2 * N_TDC..].copy_from_slice(&self.obs.as_array());
        y
    }

    pub fn from_slice(t: f64, y: &[f64]) -> Self {
        Self {
            t,
            tdc: TdcState::from_slice(&y[..2 * N_TDC]),
            obs: ObservableState::from_slice(&y[2 * N_TDC..]),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.tdc.is_finite() && self.obs.is_finite()
    }
}

/// Column names of the flat state, in storage order except that the
/// observables come first, matching the trajectory CSV header.
pub const COLUMNS: [&str; 1 + STATE_DIM] = [
    "t", "q1", "q2", "p1", "p2", "n", "ReF1", "ImF1", "ReF2", "ImF2", "ReF3", "ImF3", "ReF4",
    "ImF4", "ReF5", "ImF5",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_layout_is_interleaved() {
        let mut s = FullState::initial(ObservableState::new(1.0, 2.0, 3.0, 4.0, 5.0));
        s.tdc.0[2] = Complex64::new(0.25, -0.5);
        let y = s.to_vec();
        assert_eq!(y.len(), STATE_DIM);
        assert_eq!(&y[4..6], &[0.25, -0.5]);
        assert_eq!(&y[10..], &[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(FullState::from_slice(0.0, &y), s);
    }
}
