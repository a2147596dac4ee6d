//! Tidy long-format CSVs from report files, for external plotting.

use std::path::{Path, PathBuf};

use roughwalk::mc::{ConvergenceSweep, EstimatorReport, TightnessProbe};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

pub const CURVES_FILE: &str = "plotdata.csv";
pub const FANS_FILE: &str = "fans.csv";

/// Any report file the front end writes that carries plottable data.
#[derive(Deserialize)]
#[serde(untagged)]
enum Report {
    Sweeps(Vec<ConvergenceSweep>),
    Estimates(Vec<EstimatorReport>),
    Tightness(TightnessProbe),
}

/// `(n, p, q50, q90, q99)` of one tightness row.
pub type FanRow = (f64, f64, f64, f64, f64);

#[derive(Clone, Debug, PartialEq)]
pub struct CurveRow {
    pub n: f64,
    pub statistic: String,
    pub i: usize,
    pub j: usize,
    pub mean: f64,
    pub stderr: f64,
}

fn report_rows(r: &EstimatorReport, out: &mut Vec<CurveRow>) {
    for i in 0..r.mean.rows() {
        for j in 0..r.mean.cols() {
            out.push(CurveRow {
                n: r.scale_n,
                statistic: r.statistic.clone(),
                i: i + 1,
                j: j + 1,
                mean: r.mean[(i, j)],
                stderr: r.stderr[(i, j)],
            });
        }
    }
}

/// Reads every input and returns estimate-vs-`n` rows, stably sorted by
/// `(statistic, n)`, and the quantile fans of any tightness probes.
pub fn collect(inputs: &[PathBuf]) -> CliResult<(Vec<CurveRow>, Vec<FanRow>)> {
    let mut rows = Vec::new();
    let mut fans = Vec::new();
    for path in inputs {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation("inputs", format!("cannot read {}: {e}", path.display())))?;
        let report: Report = serde_json::from_str(&text).map_err(|_| {
            CliError::validation("inputs", format!("{} is not a sweep, estimate or tightness report", path.display()))
        })?;
        match report {
            Report::Sweeps(sweeps) => {
                sweeps.iter().flat_map(|s| &s.points).for_each(|p| report_rows(&p.report, &mut rows))
            }
            Report::Estimates(reports) => reports.iter().for_each(|r| report_rows(r, &mut rows)),
            Report::Tightness(probe) => {
                fans.extend(probe.rows.iter().map(|r| (r.scale_n, probe.p, r.q50, r.q90, r.q99)))
            }
        }
    }
    rows.sort_by(|a, b| a.statistic.cmp(&b.statistic).then(a.n.total_cmp(&b.n)));
    fans.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    Ok((rows, fans))
}

/// Writes `plotdata.csv` (always, possibly header-only) and `fans.csv`
/// (when a tightness probe was among the inputs).
pub fn emit(inputs: &[PathBuf], out: &Path) -> CliResult<Vec<String>> {
    let (rows, fans) = collect(inputs)?;
    let mut w = csv::Writer::from_path(out.join(CURVES_FILE))?;
    w.write_record(["n", "statistic", "i", "j", "mean", "stderr"])?;
    for r in &rows {
        w.write_record([
            format!("{:?}", r.n),
            r.statistic.clone(),
            r.i.to_string(),
            r.j.to_string(),
            format!("{:?}", r.mean),
            format!("{:?}", r.stderr),
        ])?;
    }
    w.flush()?;
    let mut written = vec![CURVES_FILE.to_string()];
    if !fans.is_empty() {
        let mut w = csv::Writer::from_path(out.join(FANS_FILE))?;
        w.write_record(["n", "p", "q50", "q90", "q99"])?;
        for (n, p, a, b, c) in &fans {
            w.write_record([n, p, a, b, c].map(|x| format!("{x:?}")))?;
        }
        w.flush()?;
        written.push(FANS_FILE.to_string());
    }
    Ok(written)
}
