//! Integration of the joint TDC + mean-value system onto a uniform output
//! grid, and the trajectory CSV format.

use std::io::{self, BufRead, Write};

use crate::dynamics::CoupledSystem;
use crate::error::{Error, Result};
use crate::integrator::{integrate_sampled, StepControl};
use crate::params::{EnvParams, ModelToggles, SystemParams};
use crate::state::{FullState, COLUMNS, N_TDC, STATE_DIM};

/// Uniform output-grid times `k·dt` for `k = 0..=round(t_max/dt)`.
pub fn output_grid(t_max: f64, dt_out: f64) -> Vec<f64> {
    let n = (t_max / dt_out + 1e-9).floor() as usize;
    (0..=n).map(|k| k as f64 * dt_out).collect()
}

/// Everything needed to reproduce a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSetup {
    pub sys: SystemParams,
    pub env: EnvParams,
    pub toggles: ModelToggles,
    pub control: StepControl,
    pub t_max: f64,
    pub dt_out: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub setup: RunSetup,
    pub samples: Vec<FullState>,
}

impl Trajectory {
    pub fn first(&self) -> &FullState {
        &self.samples[0]
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// One named column (any of the CSV header names except `t`).
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = column_index(name)?;
        Ok(self.samples.iter().map(|s| row_values(s)[idx]).collect())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", COLUMNS.join(","))?;
        for s in &self.samples {
            let row: Vec<String> = row_values(s).iter().map(|v| fmt_f64(*v)).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Index of a trajectory column in CSV order.
pub fn column_index(name: &str) -> Result<usize> {
    COLUMNS
        .iter()
        .position(|c| *c == name)
        .ok_or_else(|| Error::UnknownColumn(name.to_string()))
}

fn row_values(s: &FullState) -> [f64; COLUMNS.len()] {
    let mut row = [0.0; COLUMNS.len()];
    row[0] = s.t;
    row[1..6].copy_from_slice(&s.obs.as_array());
    s.tdc.write_into(&mut row[6..6 + 2 * N_TDC]);
    row
}

/// A numeric CSV with a header row, as written by the trajectory writer.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let header: Vec<String> = match lines.next() {
            Some((_, Ok(h))) => h.trim().split(',').map(|c| c.trim().to_string()).collect(),
            Some((_, Err(e))) => {
                return Err(Error::InvalidParameter(format!("cannot read CSV: {e}")))
            }
            None => return Err(Error::InvalidParameter("CSV input is empty".into())),
        };
        let mut rows = Vec::new();
        for (k, line) in lines {
            let line =
                line.map_err(|e| Error::InvalidParameter(format!("cannot read CSV: {e}")))?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidParameter(format!("CSV line {}: {e}", k + 1)))?;
            if row.len() != header.len() {
                return Err(Error::InvalidParameter(format!(
                    "CSV line {} has {} fields, header has {}",
                    k + 1,
                    row.len(),
                    header.len()
                )));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .header
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
        Ok(self.rows.iter().map(|r| r[idx]).collect())
    }

    /// Spacing of the `t` column, which must be uniform to 1 part in 1e9
    /// of the span.
    pub fn uniform_dt(&self) -> Result<f64> {
        let t = self.column("t")?;
        if t.len() < 2 {
            return Err(Error::SeriesTooShort {
                len: t.len(),
                needed: 2,
            });
        }
        let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
        let tol = 1e-9 * (t[t.len() - 1] - t[0]).abs().max(1.0);
        let uniform = dt > 0.0
            && t.iter()
                .enumerate()
                .all(|(k, v)| (v - (t[0] + k as f64 * dt)).abs() <= tol);
        if !uniform {
            return Err(Error::GridMismatch(
                "t column is not uniformly spaced".into(),
            ));
        }
        Ok(dt)
    }

    /// Full state stored in row `k` of a trajectory CSV.
    pub fn full_state(&self, k: usize) -> Result<FullState> {
        let mut row = [0.0; COLUMNS.len()];
        for (slot, name) in row.iter_mut().zip(COLUMNS) {
            let idx = self
                .header
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
            *slot = self
                .rows
                .get(k)
                .ok_or_else(|| Error::InvalidParameter(format!("CSV has no row {k}")))?[idx];
        }
        let mut y = Vec::with_capacity(STATE_DIM);
        y.extend_from_slice(&row[6..6 + 2 * N_TDC]);
        y.extend_from_slice(&row[1..6]);
        Ok(FullState::from_slice(row[0], &y))
    }
}

/// Float formatting used by every CSV writer: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Integrate from `init` over `[0, t_max]` and sample every `dt_out`.
pub fn integrate(
    sys: &SystemParams,
    env: &EnvParams,
    init: &FullState,
    t_max: f64,
    dt_out: f64,
    control: StepControl,
    toggles: &ModelToggles,
) -> Result<Trajectory> {
    sys.validate()?;
    env.validate()?;
    toggles.validate()?;
    control.validate()?;
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(Error::InvalidParameter("t_max must be > 0".into()));
    }
    if !(dt_out.is_finite() && dt_out > 0.0 && dt_out <= t_max) {
        return Err(Error::InvalidParameter(
            "dt_out must lie in (0, t_max]".into(),
        ));
    }
    if !init.is_finite() {
        return Err(Error::NonFiniteState { t: 0.0 });
    }

    let system = CoupledSystem {
        sys: *sys,
        env: *env,
        toggles: *toggles,
    };
    let times = output_grid(t_max, dt_out);
    let ys = integrate_sampled(&system, 0.0, &init.to_vec(), &times, control)?;
    let mut samples: Vec<FullState> = times
        .iter()
        .zip(&ys)
        .map(|(&t, y)| FullState::from_slice(t, y))
        .collect();
    samples[0] = FullState { t: 0.0, ..*init };
    if let Some(bad) = samples.iter().find(|s| !s.is_finite()) {
        return Err(Error::NonFiniteState { t: bad.t });
    }
    Ok(Trajectory {
        setup: RunSetup {
            sys: *sys,
            env: *env,
            toggles: *toggles,
            control,
            t_max,
            dt_out,
        },
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::ObservableState;

    #[test]
    fn grid_is_uniform_and_inclusive() {
        let g = output_grid(1.0, 0.1);
        assert_eq!(g.len(), 11);
        assert!((g[10] - 1.0).abs() < 1e-12);
        for w in g.windows(2) {
            assert!(((w[1] - w[0]) - 0.1).abs() < 1e-9 * 0.1);
        }
    }

    #[test]
    fn csv_header_and_precision() {
        let init = FullState::initial(ObservableState::new(1.1, 1.1, 0.0, 0.0, 2.0));
        let traj = integrate(
            &SystemParams::default(),
            &EnvParams::default(),
            &init,
            0.5,
            0.25,
            StepControl::default(),
            &ModelToggles::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,q1,q2,p1,p2,n,ReF1,ImF1,ReF2,ImF2,ReF3,ImF3,ReF4,ImF4,ReF5,ImF5"
        );
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 16);
        assert_eq!(first[1], "1.1000000000000001e0");
        assert_eq!(first[1].parse::<f64>().unwrap(), 1.1);
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn unknown_column_is_an_error() {
        assert_eq!(column_index("p1").unwrap(), 3);
        assert!(matches!(column_index("q3"), Err(Error::UnknownColumn(_))));
    }

    #[test]
    fn rejects_bad_arguments() {
        let init = FullState::default();
        let args = (
            SystemParams::default(),
            EnvParams::default(),
            ModelToggles::default(),
        );
        let c = StepControl::default();
        assert!(integrate(&args.0, &args.1, &init, 0.0, 0.1, c, &args.2).is_err());
        assert!(integrate(
            &args.0,
            &args.1,
            &init,
            1.0,
            0.1,
            StepControl::with_tolerances(0.1, 1e-9),
            &args.2
        )
        .is_err());
        let mut nan = init;
        nan.obs.q1 = f64::NAN;
        assert!(matches!(
            integrate(&args.0, &args.1, &nan, 1.0, 0.1, c, &args.2),
            Err(Error::NonFiniteState { .. })
        ));
    }

    #[test]
    fn csv_round_trip_through_table() {
        let sys = SystemParams::default();
        let env = EnvParams::default();
        let init = FullState::initial(ObservableState::new(1.1, 1.1, 0.0, 0.0, 2.0));
        let traj = integrate(
            &sys,
            &env,
            &init,
            1.0,
            0.25,
            StepControl::default(),
            &ModelToggles::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let table = CsvTable::read(buf.as_slice()).unwrap();
        assert_eq!(table.rows.len(), 5);
        assert_eq!(table.uniform_dt().unwrap(), 0.25);
        assert_eq!(table.column("q1").unwrap(), traj.column("q1").unwrap());
        assert_eq!(table.full_state(3).unwrap(), traj.samples[3]);
        assert!(matches!(table.column("nope"), Err(Error::UnknownColumn(_))));
    }

    #[test]
    fn csv_table_rejects_bad_rows() {
        assert!(CsvTable::read("t,x\n0,1,2\n".as_bytes()).is_err());
        assert!(CsvTable::read("t,x\n0,abc\n".as_bytes()).is_err());
        assert!(CsvTable::read("".as_bytes()).is_err());
        let t = CsvTable::read("t,x\n0,1\n1,2\n3,3\n".as_bytes()).unwrap();
        assert!(matches!(t.uniform_dt(), Err(Error::GridMismatch(_))));
    }
}
