//! Plain-text tables: `#`-prefixed header block, one column-name line, then
//! comma-separated rows. Floats are written with 17 significant digits so that
//! values round-trip exactly.

use std::io::{BufRead, Write};

use crate::dynamics::{zero_jump_residual, MasterTrajectory, Trajectory};
use crate::error::{Error, Result};
use crate::hilbert::{BasisState, DensityMatrix, PureState};
use crate::optimizer::SweepEntry;
use crate::pulses::{PulseShape, SampledPulse};
use crate::sensitivity::SensitivityReport;

/// Identifies the run that produced a file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
}

impl Provenance {
    pub fn header_lines(&self) -> Vec<String> {
        vec![
            format!("# tool: {}", self.tool),
            format!("# version: {}", self.version),
            format!("# config_hash: {}", self.config_hash),
        ]
    }
}

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the column count");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn write<W: Write>(&self, mut w: W, provenance: &Provenance) -> Result<()> {
        for line in provenance.header_lines() {
            writeln!(w, "{line}")?;
        }
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parses a table; `#` lines and blank lines are skipped.
    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut table: Option<Table> = None;
        for (k, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = k + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let cells: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            match table.as_mut() {
                None => table = Some(Table::new(cells)),
                Some(t) => {
                    if cells.len() != t.columns.len() {
                        return Err(Error::Parse {
                            line: lineno,
                            message: format!("expected {} columns, found {}", t.columns.len(), cells.len()),
                        });
                    }
                    let row = cells
                        .iter()
                        .map(|c| {
                            c.parse::<f64>()
                                .map_err(|e| Error::Parse { line: lineno, message: format!("bad number {c:?}: {e}") })
                        })
                        .collect::<Result<Vec<f64>>>()?;
                    t.rows.push(row);
                }
            }
        }
        table.ok_or(Error::Parse { line: 0, message: "no column header found".into() })
    }
}

/// Multiples of `step` inside `[t_start, t_end]`, so that `t = 0` is always
/// a grid point when it lies in the window.
pub fn sample_grid(t_start: f64, t_end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(t_end >= t_start) {
        return Err(Error::Contract(format!("bad sample grid: step {step} on [{t_start}, {t_end}]")));
    }
    let first = (t_start / step).ceil() as i64;
    let last = (t_end / step).floor() as i64;
    Ok((first..=last).map(|k| k as f64 * step).collect())
}

/// Columns `t, alpha1, alpha2, beta_a, g1, g2, residual`, at the integrator
/// steps or, with `grid`, interpolated from dense output.
pub fn trajectory_table(traj: &Trajectory, shape: &PulseShape, grid: Option<&[f64]>) -> Table {
    let mut table = Table::new(["t", "alpha1", "alpha2", "beta_a", "g1", "g2", "residual"]);
    let states: Vec<PureState> = match grid {
        Some(ts) => ts.iter().filter_map(|&t| traj.at(t)).collect(),
        None => traj.states().collect(),
    };
    for s in states {
        let (g1, g2) = (shape.g1(s.time), shape.g2(s.time));
        table.push(vec![s.time, s.alpha1, s.alpha2, s.beta_a, g1, g2, zero_jump_residual(&s, g1, g2)]);
    }
    table
}

/// Columns `t` then `rho_<row><col>_re`, `rho_<row><col>_im` for all 25
/// entries, rows and columns numbered 1–5 in basis order. `grid` works as in
/// [`trajectory_table`].
pub fn master_table(master: &MasterTrajectory, grid: Option<&[f64]>) -> Table {
    let mut columns = vec!["t".to_string()];
    for i in 1..=5 {
        for j in 1..=5 {
            columns.push(format!("rho_{i}{j}_re"));
            columns.push(format!("rho_{i}{j}_im"));
        }
    }
    let mut table = Table::new(columns);
    let states: Vec<DensityMatrix> = match grid {
        Some(ts) => ts.iter().filter_map(|&t| master.at(t)).collect(),
        None => master.states().collect(),
    };
    for rho in states {
        let mut row = vec![rho.time];
        for a in BasisState::ALL {
            for b in BasisState::ALL {
                let z = rho.get(a, b);
                row.push(z.re);
                row.push(z.im);
            }
        }
        table.push(row);
    }
    table
}

/// Columns `t` and one `eta_<label>` per noise model.
pub fn eta_table(report: &SensitivityReport) -> Table {
    let mut columns = vec!["t".to_string()];
    columns.extend(report.eta.iter().map(|e| format!("eta_{}", e.label)));
    let mut table = Table::new(columns);
    for (k, &t) in report.times.iter().enumerate() {
        let mut row = vec![t];
        row.extend(report.eta.iter().map(|e| e.values[k]));
        table.push(row);
    }
    table
}

/// Knot table `t, g` including the pinned zero at `T`.
pub fn pulse_table(pulse: &SampledPulse) -> Table {
    let mut table = Table::new(["t", "g"]);
    for (t, g) in pulse.knot_times().into_iter().zip(pulse.values.iter().copied().chain([0.0])) {
        table.push(vec![t, g]);
    }
    table
}

/// Inverse of [`pulse_table`]: knots must sit at `jT/n` and end at zero.
pub fn read_pulse_table(table: &Table) -> Result<SampledPulse> {
    let ts = table.column("t").ok_or(Error::Parse { line: 0, message: "missing column t".into() })?;
    let gs = table.column("g").ok_or(Error::Parse { line: 0, message: "missing column g".into() })?;
    if ts.len() < 3 {
        return Err(Error::InvalidPulse(format!("pulse table needs at least 3 rows, got {}", ts.len())));
    }
    let n = ts.len() - 1;
    let end_time = ts[n];
    for (j, &t) in ts.iter().enumerate() {
        let expected = j as f64 * end_time / n as f64;
        if (t - expected).abs() > 1e-9 * end_time.abs().max(1.0) {
            return Err(Error::InvalidPulse(format!("knot {j} at t = {t}, expected {expected}")));
        }
    }
    if gs[n] != 0.0 {
        return Err(Error::InvalidPulse(format!("pulse must vanish at T, found g(T) = {}", gs[n])));
    }
    SampledPulse::new(end_time, gs[..n].to_vec())
}

/// Columns `T, eta_final`; failed entries are omitted.
pub fn sweep_table(entries: &[SweepEntry]) -> Table {
    let mut table = Table::new(["T", "eta_final"]);
    for e in entries {
        if let Ok(r) = &e.result {
            table.push(vec![e.end_time, r.eta_final]);
        }
    }
    table
}

/// `(T, eta_final)` pairs from a sweep table.
pub fn read_sweep_points(table: &Table) -> Result<Vec<(f64, f64)>> {
    let ts = table.column("T").ok_or(Error::Parse { line: 0, message: "missing column T".into() })?;
    let eta = table.column("eta_final").ok_or(Error::Parse { line: 0, message: "missing column eta_final".into() })?;
    Ok(ts.into_iter().zip(eta).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve_master, integrate_trajectory, IntegratorConfig};
    use crate::pulses::sech_pulse;

    fn prov() -> Provenance {
        Provenance { tool: "test".into(), version: "0".into(), config_hash: "abc".into() }
    }

    #[test]
    fn floats_round_trip_exactly() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::f64::consts::PI] {
            assert_eq!(format_float(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn table_round_trip() {
        let mut t = Table::new(["a", "b"]);
        t.push(vec![1.0, 0.1]);
        t.push(vec![-3.25, 1e-17]);
        let mut buf = Vec::new();
        t.write(&mut buf, &prov()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# tool: test\n# version: 0\n# config_hash: abc\na,b\n"));
        assert_eq!(Table::read(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn ragged_rows_report_line() {
        let err = Table::read("# x\na,b\n1,2\n3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
    }

    #[test]
    fn pulse_table_round_trip() {
        let p = SampledPulse::new(10.0, vec![0.3, 0.45, 0.7]).unwrap();
        let t = pulse_table(&p);
        assert_eq!(t.rows.last().unwrap(), &vec![10.0, 0.0]);
        assert_eq!(read_pulse_table(&t).unwrap(), p);
        let mut bad = t.clone();
        bad.rows[1][0] = 3.0;
        assert!(read_pulse_table(&bad).is_err());
    }

    #[test]
    fn simulation_tables_have_expected_shape() {
        let shape = sech_pulse();
        let cfg = IntegratorConfig::default();
        let traj = integrate_trajectory(&shape, &cfg).unwrap();
        let t = trajectory_table(&traj, &shape, None);
        assert_eq!(t.columns.len(), 7);
        assert_eq!(t.rows.len(), traj.len());
        let grid = sample_grid(cfg.t_start, cfg.t_end, 0.1).unwrap();
        assert_eq!(grid.len(), 301);
        let t = trajectory_table(&traj, &shape, Some(&grid));
        let zero = t.rows.iter().find(|r| r[0] == 0.0).unwrap();
        // the window starts at -15, not -inf
        assert!((zero[1] - 0.5).abs() < 1e-6);
        let m = master_table(&evolve_master(&shape, &cfg).unwrap(), Some(&grid));
        assert_eq!(m.columns.len(), 51);
        assert_eq!(m.rows.len(), 301);
        assert_eq!(m.columns[1], "rho_11_re");
    }
}
