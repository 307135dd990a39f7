//! Maximum Lyapunov exponent estimators.
//!
//! [`wolf_max_le`] works on a scalar time series through delay-coordinate
//! reconstruction: a fiducial point and a neighbor are followed until their
//! separation exceeds `ε`, then the neighbor is replaced by the candidate
//! closest in angle to the old separation vector. [`benettin_max_le`] works
//! directly on an ODE flow with a fiducial and a renormalized offset
//! trajectory.

use std::cell::Cell;
use std::collections::{HashMap, HashSet};
use std::io::{self, Write};

use log::{debug, warn};

use crate::error::{Error, Result};
use crate::integrator::{Dopri5, OdeSystem, StepControl};
use crate::trajectory::fmt_f64;

/// Clouds above this size use grid bucketing for the `ε`-ball query.
const BRUTE_FORCE_LIMIT: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingConfig {
    pub dim: usize,
    /// Lag in samples; `0` selects it from the series.
    pub delay: usize,
    /// Minimum temporal separation of neighbor candidates in samples;
    /// `None` means twice the delay.
    pub theiler: Option<usize>,
    /// Replacement threshold as a fraction of the cloud extent.
    pub epsilon_frac: f64,
    /// Samples between separation checks.
    pub evolve_steps: usize,
    /// Replacement candidates whose angle is within this many radians of the
    /// smallest angle count as tied and are ranked by distance.
    pub angle_tol: f64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            dim: 4,
            delay: 0,
            theiler: None,
            epsilon_frac: 0.1,
            evolve_steps: 5,
            angle_tol: 0.05,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidParameter(
                "lyapunov.embed_dim must be >= 2".into(),
            ));
        }
        if !(self.epsilon_frac > 0.0 && self.epsilon_frac < 1.0) {
            return Err(Error::InvalidParameter(
                "lyapunov.epsilon_frac must lie in (0, 1)".into(),
            ));
        }
        if self.evolve_steps < 1 {
            return Err(Error::InvalidParameter(
                "lyapunov.evolve_steps must be >= 1".into(),
            ));
        }
        if !(self.angle_tol >= 0.0 && self.angle_tol < std::f64::consts::PI) {
            return Err(Error::InvalidParameter(
                "lyapunov.angle_tol must lie in [0, pi)".into(),
            ));
        }
        Ok(())
    }
}

/// Time-resolved maximum-LE estimate.
///
/// Each record is one separation check (Wolf) or one renormalization
/// (Benettin); `replaced` marks Wolf neighbor replacements.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LyapunovSeries {
    pub t0: f64,
    /// Spacing of the grid the running estimate is resampled onto.
    pub grid_dt: f64,
    /// Last time covered by the underlying data.
    pub t_end: f64,
    pub times: Vec<f64>,
    pub log_stretch: Vec<f64>,
    pub replaced: Vec<bool>,
}

impl LyapunovSeries {
    fn new(t0: f64, grid_dt: f64, t_end: f64) -> Self {
        Self {
            t0,
            grid_dt,
            t_end,
            ..Default::default()
        }
    }

    fn push(&mut self, t: f64, stretch: f64, replaced: bool) {
        self.times.push(t);
        self.log_stretch.push(stretch);
        self.replaced.push(replaced);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Running estimate `Σ log-stretch / (t - t0)` at every record.
    pub fn running(&self) -> Vec<f64> {
        let mut sum = 0.0;
        self.times
            .iter()
            .zip(&self.log_stretch)
            .map(|(t, s)| {
                sum += s;
                sum / (t - self.t0)
            })
            .collect()
    }

    pub fn final_estimate(&self) -> Option<f64> {
        self.running().last().copied()
    }

    /// `(t, running estimate, replacement events so far)` on the grid
    /// `k · grid_dt` up to `t_end`, held from the most recent record. The
    /// estimate is `None` before the first record.
    pub fn resampled(&self) -> Vec<(f64, Option<f64>, usize)> {
        let running = self.running();
        let n = (self.t_end / self.grid_dt + 1e-9).floor() as usize;
        let mut out = Vec::with_capacity(n + 1);
        let mut next = 0;
        let mut events = 0;
        for k in 0..=n {
            let t = k as f64 * self.grid_dt;
            while next < self.times.len() && self.times[next] <= t + 1e-9 * self.grid_dt {
                if self.replaced[next] {
                    events += 1;
                }
                next += 1;
            }
            let value = if next == 0 {
                None
            } else {
                Some(running[next - 1])
            };
            out.push((t, value, events));
        }
        out
    }

    /// LE CSV: `t,lambda_running,events_so_far` on the resampling grid.
    /// Grid points before the first event are omitted.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,lambda_running,events_so_far")?;
        for (t, value, events) in self.resampled() {
            if let Some(v) = value {
                writeln!(w, "{},{},{}", fmt_f64(t), fmt_f64(v), events)?;
            }
        }
        Ok(())
    }
}

/// Builds a [`LyapunovSeries`] from successive separation measurements.
#[derive(Debug, Clone)]
pub struct StretchAccumulator {
    series: LyapunovSeries,
    sep: f64,
}

impl StretchAccumulator {
    /// Starts at `t0` with reference separation `sep0 > 0`.
    pub fn new(t0: f64, grid_dt: f64, sep0: f64) -> Self {
        Self {
            series: LyapunovSeries::new(t0, grid_dt, t0),
            sep: sep0,
        }
    }

    /// Records `ln(d / A)` at `t`. With `restart = Some(a)` the pair was
    /// replaced and `a` becomes the new reference, otherwise `d` does.
    pub fn observe(&mut self, t: f64, d: f64, restart: Option<f64>) {
        self.series.push(t, (d / self.sep).ln(), restart.is_some());
        self.series.t_end = t;
        self.sep = restart.unwrap_or(d);
    }

    /// Changes the reference separation without recording a stretch.
    pub fn rebase(&mut self, sep: f64) {
        self.sep = sep;
    }

    pub fn finish(mut self, t_end: f64) -> LyapunovSeries {
        self.series.t_end = self.series.t_end.max(t_end);
        self.series
    }
}

/// Mean of the resampled running estimate over `[t_lo, t_hi]`.
pub fn windowed_mean_le(series: &LyapunovSeries, t_lo: f64, t_hi: f64) -> Result<f64> {
    if !(t_lo < t_hi) {
        return Err(Error::InvalidParameter(
            "window requires t_lo < t_hi".into(),
        ));
    }
    let eps = 1e-9 * series.grid_dt;
    let values: Vec<f64> = series
        .resampled()
        .into_iter()
        .filter(|(t, _, _)| *t >= t_lo - eps && *t <= t_hi + eps)
        .filter_map(|(_, v, _)| v)
        .collect();
    if values.is_empty() {
        return Err(Error::EmptyWindow { lo: t_lo, hi: t_hi });
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Points of a delay embedding stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn dist(&self, i: usize, j: usize) -> f64 {
        self.point(i)
            .iter()
            .zip(self.point(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Diagonal of the axis-aligned bounding box.
    pub fn extent(&self) -> f64 {
        let mut sq = 0.0;
        for c in 0..self.dim {
            let (lo, hi) = (0..self.len())
                .map(|i| self.data[i * self.dim + c])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
            sq += (hi - lo) * (hi - lo);
        }
        sq.sqrt()
    }

    fn distinct_points(&self, cap: usize) -> usize {
        let mut seen = HashSet::new();
        for i in 0..self.len() {
            seen.insert(
                self.point(i)
                    .iter()
                    .map(|v| v.to_bits())
                    .collect::<Vec<_>>(),
            );
            if seen.len() >= cap {
                break;
            }
        }
        seen.len()
    }
}

/// Delay vectors `(x_j, x_{j+delay}, ..., x_{j+(m-1)delay})`.
pub fn delay_embed(series: &[f64], dim: usize, delay: usize) -> Result<PointCloud> {
    if dim < 2 {
        return Err(Error::InvalidParameter(
            "embedding dimension must be >= 2".into(),
        ));
    }
    if delay < 1 {
        return Err(Error::InvalidParameter(
            "embedding delay must be >= 1".into(),
        ));
    }
    let span = (dim - 1) * delay;
    if series.len() <= span + 1 {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            needed: span + 1,
        });
    }
    let n = series.len() - span;
    let mut data = Vec::with_capacity(n * dim);
    for j in 0..n {
        data.extend((0..dim).map(|k| series[j + k * delay]));
    }
    Ok(PointCloud { dim, data })
}

fn mean_std(series: &[f64]) -> (f64, f64) {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Z-scored copy of the series.
pub fn standardize(series: &[f64]) -> Result<Vec<f64>> {
    let (mean, std) = mean_std(series);
    if !(std > 0.0 && std.is_finite()) {
        return Err(Error::InvalidParameter(
            "series must have positive, finite standard deviation".into(),
        ));
    }
    Ok(series.iter().map(|v| (v - mean) / std).collect())
}

/// Autocorrelation of a mean-free series for lags `0..max_lag`.
fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    let c0: f64 = x.iter().map(|v| v * v).sum();
    (0..max_lag)
        .map(|lag| x.iter().zip(&x[lag..]).map(|(a, b)| a * b).sum::<f64>() / c0)
        .collect()
}

/// Median spacing of strict local maxima, if at least two exist.
fn dominant_period(x: &[f64]) -> Option<usize> {
    let peaks: Vec<usize> = (1..x.len().saturating_sub(1))
        .filter(|&k| x[k] > x[k - 1] && x[k] >= x[k + 1])
        .collect();
    let mut gaps: Vec<usize> = peaks.windows(2).map(|w| w[1] - w[0]).collect();
    if gaps.is_empty() {
        return None;
    }
    gaps.sort_unstable();
    Some(gaps[gaps.len() / 2])
}

/// Embedding lag in samples: the earlier of the first autocorrelation zero
/// crossing and a quarter of the dominant period (median peak spacing).
pub fn auto_delay(series: &[f64]) -> usize {
    let (mean, _) = mean_std(series);
    let x: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let max_lag = (x.len() / 4).max(2);
    let zero = autocorrelation(&x, max_lag).iter().position(|&c| c <= 0.0);
    let quarter = dominant_period(&x).map(|p| p / 4);
    let lag = match (zero, quarter) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => max_lag / 4,
    };
    lag.max(1)
}

/// Spatial index answering "all points within r of point i".
enum NeighborIndex {
    Brute,
    Grid {
        cell: f64,
        buckets: HashMap<Vec<i64>, Vec<usize>>,
    },
}

impl NeighborIndex {
    fn build(cloud: &PointCloud, radius: f64) -> Self {
        if cloud.len() <= BRUTE_FORCE_LIMIT {
            return Self::Brute;
        }
        let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for i in 0..cloud.len() {
            buckets
                .entry(Self::key(cloud.point(i), radius))
                .or_default()
                .push(i);
        }
        Self::Grid {
            cell: radius,
            buckets,
        }
    }

    fn key(p: &[f64], cell: f64) -> Vec<i64> {
        p.iter().map(|v| (v / cell).floor() as i64).collect()
    }

    /// Candidate indices, a superset of the points within `cell` of `p`, in
    /// increasing index order.
    fn candidates(&self, cloud: &PointCloud, i: usize) -> Vec<usize> {
        match self {
            Self::Brute => (0..cloud.len()).collect(),
            Self::Grid { cell, buckets } => {
                let center = Self::key(cloud.point(i), *cell);
                let dim = center.len();
                let mut out = Vec::new();
                let mut offset = vec![-1i64; dim];
                loop {
                    let key: Vec<i64> = center.iter().zip(&offset).map(|(c, o)| c + o).collect();
                    if let Some(b) = buckets.get(&key) {
                        out.extend_from_slice(b);
                    }
                    // odometer over {-1, 0, 1}^dim
                    let mut d = 0;
                    while d < dim {
                        offset[d] += 1;
                        if offset[d] <= 1 {
                            break;
                        }
                        offset[d] = -1;
                        d += 1;
                    }
                    if d == dim {
                        break;
                    }
                }
                out.sort_unstable();
                out
            }
        }
    }
}

struct WolfSearch<'a> {
    cloud: &'a PointCloud,
    theiler: usize,
    /// Candidates must be followable for `horizon` more samples.
    horizon: usize,
    angle_tol: f64,
}

impl WolfSearch<'_> {
    fn admissible(&self, i: usize, k: usize) -> bool {
        k.abs_diff(i) > self.theiler && k + self.horizon < self.cloud.len()
    }

    fn nearest(&self, i: usize) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for k in 0..self.cloud.len() {
            if !self.admissible(i, k) {
                continue;
            }
            let d = self.cloud.dist(i, k);
            if d > 0.0 && best.is_none_or(|(_, bd)| d < bd) {
                best = Some((k, d));
            }
        }
        best
    }

    /// Replacement with minimal angle to `old - fiducial` among candidates
    /// closer than `eps`; ties (up to `angle_tol`) go to the smaller distance.
    fn replacement(
        &self,
        index: &NeighborIndex,
        i: usize,
        old: usize,
        eps: f64,
    ) -> Option<(usize, f64)> {
        let fid = self.cloud.point(i);
        let dir: Vec<f64> = self
            .cloud
            .point(old)
            .iter()
            .zip(fid)
            .map(|(a, b)| a - b)
            .collect();
        let dir_norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut scored = Vec::new();
        for k in index.candidates(self.cloud, i) {
            if !self.admissible(i, k) {
                continue;
            }
            let d = self.cloud.dist(i, k);
            if !(d > 0.0 && d < eps) {
                continue;
            }
            let dot: f64 = self
                .cloud
                .point(k)
                .iter()
                .zip(fid)
                .zip(&dir)
                .map(|((a, b), u)| (a - b) * u)
                .sum();
            let angle = if dir_norm > 0.0 {
                (dot / (d * dir_norm)).clamp(-1.0, 1.0).acos()
            } else {
                0.0
            };
            scored.push((k, angle, d));
        }
        let min_angle = scored.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        scored
            .into_iter()
            .filter(|c| c.1 <= min_angle + self.angle_tol)
            .min_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)))
            .map(|(k, _, d)| (k, d))
    }
}

/// Wolf estimate of the maximum LE of a scalar series sampled every
/// `sample_dt`.
///
/// The series is z-scored before embedding, `ε = epsilon_frac · extent`
/// of the cloud, and the fiducial trajectory starts at the first embedded
/// point. A log-stretch is recorded at every separation check; summed
/// between two replacements it telescopes to `ln(A'(t_k) / A(t_{k-1}))`.
/// A neighbor that reaches the end of the cloud, or coincides with the
/// fiducial, is swapped for a fresh one without recording a stretch.
pub fn wolf_max_le(
    series: &[f64],
    sample_dt: f64,
    cfg: &EmbeddingConfig,
) -> Result<LyapunovSeries> {
    cfg.validate()?;
    if !(sample_dt > 0.0 && sample_dt.is_finite()) {
        return Err(Error::InvalidParameter("sample_dt must be > 0".into()));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("series must be finite".into()));
    }
    let z = standardize(series)?;
    let delay = if cfg.delay == 0 {
        auto_delay(&z)
    } else {
        cfg.delay
    };
    let theiler = cfg.theiler.unwrap_or(2 * delay);
    let cloud = delay_embed(&z, cfg.dim, delay)?;
    let needed = 2 * cfg.dim;
    let distinct = cloud.distinct_points(needed);
    if distinct < needed {
        return Err(Error::DegenerateCloud { distinct, needed });
    }
    let eps = cfg.epsilon_frac * cloud.extent();
    let index = NeighborIndex::build(&cloud, eps);
    let ev = cfg.evolve_steps;
    let search = WolfSearch {
        cloud: &cloud,
        theiler,
        horizon: ev,
        angle_tol: cfg.angle_tol,
    };

    let n = cloud.len();
    let mut i = 0;
    let (mut j, sep0) = search
        .nearest(i)
        .ok_or(Error::NoNeighborFound { index: i })?;
    let mut acc = StretchAccumulator::new(0.0, sample_dt, sep0);

    let fallbacks = Cell::new(0usize);
    let find = |i: usize, old: usize| -> Result<(usize, f64)> {
        if let Some(found) = search.replacement(&index, i, old, eps) {
            return Ok(found);
        }
        let fallback = search
            .nearest(i)
            .ok_or(Error::NoNeighborFound { index: i })?;
        debug!(
            "no neighbor within eps at sample {i}; using nearest at distance {:.3e}",
            fallback.1
        );
        fallbacks.set(fallbacks.get() + 1);
        Ok(fallback)
    };

    while i + ev < n {
        if j + ev >= n {
            // neighbor ran off the end of the cloud: restart the pair at the
            // fiducial without recording a stretch
            let (k, dk) = search
                .nearest(i)
                .ok_or(Error::NoNeighborFound { index: i })?;
            j = k;
            acc.rebase(dk);
        }
        i += ev;
        j += ev;
        let d = cloud.dist(i, j);
        let t = i as f64 * sample_dt;
        if d == 0.0 {
            let (k, dk) = find(i, j)?;
            j = k;
            acc.rebase(dk);
        } else if d > eps {
            let (k, dk) = find(i, j)?;
            j = k;
            acc.observe(t, d, Some(dk));
        } else {
            acc.observe(t, d, None);
        }
    }
    if fallbacks.get() > 0 {
        warn!(
            "{} replacements had no candidate within eps and used the nearest neighbor",
            fallbacks.get()
        );
    }
    Ok(acc.finish((n - 1) as f64 * sample_dt))
}

/// Fiducial and offset copies of a system integrated with shared steps.
struct Pair<'a, S: OdeSystem> {
    inner: &'a S,
}

impl<S: OdeSystem> OdeSystem for Pair<'_, S> {
    fn dim(&self) -> usize {
        2 * self.inner.dim()
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.inner.dim();
        let (a, b) = dy.split_at_mut(n);
        self.inner.rhs(t, &y[..n], a);
        self.inner.rhs(t, &y[n..], b);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenettinConfig {
    pub delta0: f64,
    pub renorm_dt: f64,
    pub horizon: f64,
    pub control: StepControl,
}

impl Default for BenettinConfig {
    fn default() -> Self {
        Self {
            delta0: 1e-8,
            renorm_dt: 0.5,
            horizon: 200.0,
            control: StepControl::default(),
        }
    }
}

/// Benettin two-trajectory estimate of the maximum LE of `system` from `init`.
///
/// The offset starts along `(1, 1, ..., 1)/√n` with norm `delta0` and is
/// rescaled back to `delta0` every `renorm_dt`.
pub fn benettin_max_le<S: OdeSystem>(
    system: &S,
    init: &[f64],
    cfg: &BenettinConfig,
) -> Result<LyapunovSeries> {
    if !(1e-10..=1e-4).contains(&cfg.delta0) {
        return Err(Error::InvalidParameter(
            "lyapunov.delta0 must lie in [1e-10, 1e-4]".into(),
        ));
    }
    if !(cfg.renorm_dt > 0.0 && cfg.horizon >= cfg.renorm_dt) {
        return Err(Error::InvalidParameter(
            "renorm_dt must be > 0 and not exceed the horizon".into(),
        ));
    }
    let n = system.dim();
    let pair = Pair { inner: system };
    let mut y = Vec::with_capacity(2 * n);
    y.extend_from_slice(init);
    let step = cfg.delta0 / (n as f64).sqrt();
    y.extend(init.iter().map(|v| v + step));

    let mut solver = Dopri5::new(&pair, 0.0, &y, cfg.control)?;
    let periods = (cfg.horizon / cfg.renorm_dt + 1e-9).floor() as usize;
    let mut out = LyapunovSeries::new(0.0, cfg.renorm_dt, periods as f64 * cfg.renorm_dt);
    for k in 1..=periods {
        let t = k as f64 * cfg.renorm_dt;
        solver.advance_to(t)?;
        let state = solver.y();
        let (fid, off) = state.split_at(n);
        let norm = fid
            .iter()
            .zip(off)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::NonFiniteState { t });
        }
        out.push(t, (norm / cfg.delta0).ln(), true);
        let scale = cfg.delta0 / norm;
        let mut next = fid.to_vec();
        next.extend(fid.iter().zip(off).map(|(a, b)| a + (b - a) * scale));
        solver.reset_state(&next);
    }
    Ok(out)
}
