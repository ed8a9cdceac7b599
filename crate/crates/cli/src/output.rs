//! CSV emission. Every file is assembled in memory and written in one go.

use std::fs;
use std::io;
use std::path::Path;

use wpc_core::coupling::{RunArtifacts, Snapshot, SweepResult};
use wpc_core::energy::{fmt_float, EnergyReport};

pub fn timeseries_csv(reports: &[EnergyReport]) -> String {
    let mut s = String::with_capacity(64 * (reports.len() + 1) * 20);
    s.push_str(EnergyReport::CSV_HEADER);
    s.push('\n');
    for r in reports {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

pub fn snapshot_csv(snap: &Snapshot) -> String {
    let mut s = String::from(Snapshot::CSV_HEADER);
    s.push('\n');
    for row in snap.csv_rows() {
        s.push_str(&row);
        s.push('\n');
    }
    s
}

pub fn snapshot_file_name(index: usize, t: f64) -> String {
    format!("snapshot_{index:03}_t{t:.6}.csv")
}

pub fn sweep_csv(sweep: &SweepResult) -> String {
    let mut s = String::from("tau,e_theta,e_p,e_pt\n");
    for e in &sweep.entries {
        s.push_str(&[e.tau, e.e_theta, e.e_p, e.e_pt].iter().map(|v| fmt_float(*v)).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}

/// Writes `timeseries.csv` and one file per snapshot.
pub fn write_run(dir: &Path, run: &RunArtifacts) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("timeseries.csv"), timeseries_csv(&run.reports))?;
    for (i, snap) in run.snapshots.iter().enumerate() {
        fs::write(dir.join(snapshot_file_name(i, snap.t)), snapshot_csv(snap))?;
    }
    Ok(())
}

pub fn write_sweep(dir: &Path, sweep: &SweepResult) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("sweep.csv"), sweep_csv(sweep))?;
    fs::write(dir.join("timeseries_reference.csv"), timeseries_csv(&sweep.reference.reports))?;
    for e in &sweep.entries {
        fs::write(dir.join(format!("timeseries_tau_{}.csv", e.tau)), timeseries_csv(&e.run.reports))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_names_sort_by_index() {
        assert_eq!(snapshot_file_name(0, 0.5), "snapshot_000_t0.500000.csv");
        assert_eq!(snapshot_file_name(12, 1.0), "snapshot_012_t1.000000.csv");
    }

    #[test]
    fn empty_timeseries_is_header_only() {
        assert_eq!(timeseries_csv(&[]), format!("{}\n", EnergyReport::CSV_HEADER));
    }
}
