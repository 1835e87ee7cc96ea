//! Row-oriented run reports and their CSV files.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{ExperimentError, Mode};
use crate::cocycle::LyapunovEstimate;
use crate::geometry::{write_conditions_csv, write_constants_csv, Condition, ConditionReport, FittedConstants};

#[derive(Clone, Debug, PartialEq)]
pub enum RowStatus {
    Measured,
    /// Aborted before measuring: the first required condition that failed.
    ConditionsNotMet { condition: Condition, margin: f64 },
    /// Nothing to measure (pure condition or bound rows).
    NotMeasured,
}

/// One `(n, t)` row. Every verdict is a function of the other fields, so a
/// row can be re-judged from the CSV alone.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    /// `control`, `main`, `onset`, `scan`, ...
    pub kind: String,
    pub n: i32,
    pub t: f64,
    pub epsilon: f64,
    pub status: RowStatus,
    /// Measured exponents, descending, in the orientation the mode reports.
    pub exponents: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// The linear reference `n·log λ_i` in the same order.
    pub linear: Vec<f64>,
    pub metrics: Vec<(String, f64)>,
    pub verdicts: Vec<(String, bool)>,
}

impl ReportRow {
    pub fn new(kind: &str, n: i32, t: f64) -> Self {
        ReportRow {
            kind: kind.to_string(),
            n,
            t,
            epsilon: 0.0,
            status: RowStatus::NotMeasured,
            exponents: Vec::new(),
            std_errors: Vec::new(),
            linear: Vec::new(),
            metrics: Vec::new(),
            verdicts: Vec::new(),
        }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    pub fn verdict(&self, name: &str) -> Option<bool> {
        self.verdicts.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    pub fn set(&mut self, name: &str, v: f64) {
        self.metrics.push((name.to_string(), v));
    }

    pub fn judge(&mut self, name: &str, v: bool) {
        self.verdicts.push((name.to_string(), v));
    }

    pub fn measured(&self) -> bool {
        self.status == RowStatus::Measured
    }
}

/// How the run ended, in order of precedence for the exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    VerdictFailure,
    ConditionsNotMet,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::VerdictFailure => 2,
            Outcome::ConditionsNotMet => 3,
        }
    }
}

/// Per-orbit estimates of one measured row.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitBlock {
    pub row: usize,
    pub seed: u64,
    pub estimate: LyapunovEstimate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub mode: Mode,
    pub seed: u64,
    pub matrix_source: String,
    pub rows: Vec<ReportRow>,
    pub conditions: Vec<ConditionReport>,
    pub constants: Option<FittedConstants>,
    pub orbits: Vec<OrbitBlock>,
    /// Run-level verdicts that decide the exit code.
    pub verdicts: Vec<(String, bool)>,
    /// Human-readable statements, including why a verdict was not asserted.
    pub notes: Vec<String>,
    pub outcome: Outcome,
    /// Mode-specific tables, `(file name, contents)`.
    pub extra: Vec<(String, String)>,
}

impl RunReport {
    pub fn new(mode: Mode, seed: u64, matrix_source: &str) -> Self {
        RunReport {
            mode,
            seed,
            matrix_source: matrix_source.to_string(),
            rows: Vec::new(),
            conditions: Vec::new(),
            constants: None,
            orbits: Vec::new(),
            verdicts: Vec::new(),
            notes: Vec::new(),
            outcome: Outcome::Pass,
            extra: Vec::new(),
        }
    }

    pub fn verdict(&self, name: &str) -> Option<bool> {
        self.verdicts.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    /// Set the outcome from the run-level verdicts unless already decided.
    pub fn settle(&mut self) {
        if self.outcome == Outcome::Pass && self.verdicts.iter().any(|(_, v)| !v) {
            self.outcome = Outcome::VerdictFailure;
        }
    }

    pub fn summary(&self) -> String {
        let mut s = format!("{} (seed {}, matrix {}): {:?}\n", self.mode, self.seed, self.matrix_source, self.outcome);
        for (k, v) in &self.verdicts {
            s.push_str(&format!("  {k}: {}\n", if *v { "pass" } else { "FAIL" }));
        }
        for n in &self.notes {
            s.push_str(&format!("  {n}\n"));
        }
        s
    }
}

pub(crate) fn num(x: f64) -> String {
    if x.is_nan() {
        "NA".into()
    } else {
        format!("{x:.12e}")
    }
}

fn keys<'a, I: Iterator<Item = &'a String>>(it: I) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for k in it {
        if !out.contains(k) {
            out.push(k.clone());
        }
    }
    out
}

/// One line per row; metric and verdict columns are the union over rows.
pub fn write_report_csv<W: Write>(w: W, report: &RunReport) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let k = report.rows.iter().map(|r| r.exponents.len().max(r.linear.len())).max().unwrap_or(0);
    let mkeys = keys(report.rows.iter().flat_map(|r| r.metrics.iter().map(|(k, _)| k)));
    let vkeys = keys(report.rows.iter().flat_map(|r| r.verdicts.iter().map(|(k, _)| k)));
    let mut header: Vec<String> = ["row", "mode", "kind", "n", "t", "epsilon", "status", "failed_condition", "failed_margin"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=k).map(|i| format!("exponent_{i}")));
    header.extend((1..=k).map(|i| format!("stderr_{i}")));
    header.extend((1..=k).map(|i| format!("linear_{i}")));
    header.extend(mkeys.iter().cloned());
    header.extend(vkeys.iter().cloned());
    wr.write_record(&header)?;
    for (i, r) in report.rows.iter().enumerate() {
        let (status, cond, margin) = match &r.status {
            RowStatus::Measured => ("measured".to_string(), "NA".to_string(), "NA".to_string()),
            RowStatus::NotMeasured => ("not-measured".to_string(), "NA".to_string(), "NA".to_string()),
            RowStatus::ConditionsNotMet { condition, margin } => {
                ("conditions-not-met".to_string(), condition.to_string(), num(*margin))
            }
        };
        let mut rec = vec![
            i.to_string(),
            report.mode.to_string(),
            r.kind.clone(),
            r.n.to_string(),
            num(r.t),
            num(r.epsilon),
            status,
            cond,
            margin,
        ];
        let col = |v: &Vec<f64>, j: usize| v.get(j).map_or("NA".to_string(), |x| num(*x));
        rec.extend((0..k).map(|j| col(&r.exponents, j)));
        rec.extend((0..k).map(|j| col(&r.std_errors, j)));
        rec.extend((0..k).map(|j| col(&r.linear, j)));
        rec.extend(mkeys.iter().map(|m| r.metric(m).map_or("NA".to_string(), num)));
        rec.extend(vkeys.iter().map(|v| r.verdict(v).map_or("NA".to_string(), |b| b.to_string())));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

/// Per-orbit exponents of every measured row.
pub fn write_orbit_stats_csv<W: Write>(w: W, report: &RunReport) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let k = report.orbits.iter().map(|b| b.estimate.exponents.len()).max().unwrap_or(0);
    let mut header: Vec<String> = ["row", "n", "t", "orbit_id", "seed", "N"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=k).map(|i| format!("exponent_{i}")));
    header.extend((1..=k).map(|i| format!("stderr_{i}")));
    wr.write_record(&header)?;
    for b in &report.orbits {
        let row = &report.rows[b.row];
        for (o, (ex, se)) in b.estimate.per_orbit.iter().zip(&b.estimate.per_orbit_std_errors).enumerate() {
            let mut rec = vec![
                b.row.to_string(),
                row.n.to_string(),
                num(row.t),
                o.to_string(),
                b.seed.to_string(),
                b.estimate.n_iters.to_string(),
            ];
            rec.extend((0..k).map(|j| ex.get(j).map_or("NA".to_string(), |x| num(*x))));
            rec.extend((0..k).map(|j| se.get(j).map_or("NA".to_string(), |x| num(*x))));
            wr.write_record(&rec)?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Gnuplot-style whitespace table: n, t, epsilon, exponents, then metrics.
pub fn write_plot_dat<W: Write>(mut w: W, report: &RunReport) -> std::io::Result<()> {
    let mkeys = keys(report.rows.iter().flat_map(|r| r.metrics.iter().map(|(k, _)| k)));
    writeln!(w, "# {} rows; columns: n t epsilon exponents... {}", report.mode, mkeys.join(" "))?;
    for r in report.rows.iter().filter(|r| r.measured()) {
        let mut line = format!("{} {} {}", r.n, num(r.t), num(r.epsilon));
        for e in &r.exponents {
            line.push_str(&format!(" {}", num(*e)));
        }
        for m in &mkeys {
            line.push_str(&format!(" {}", r.metric(m).map_or("NA".to_string(), num)));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Write report.csv, orbit_stats.csv, conditions.csv and constants.csv (the
/// last two only when the run evaluated conditions), plus mode tables.
pub fn write_outputs(dir: &Path, report: &RunReport, plot: bool) -> Result<Vec<String>, ExperimentError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<(), ExperimentError> {
        fs::write(dir.join(name), bytes)?;
        written.push(name.to_string());
        Ok(())
    };
    let mut buf = Vec::new();
    write_report_csv(&mut buf, report)?;
    put("report.csv", buf)?;
    let mut buf = Vec::new();
    write_orbit_stats_csv(&mut buf, report)?;
    put("orbit_stats.csv", buf)?;
    if !report.conditions.is_empty() {
        let mut buf = Vec::new();
        write_conditions_csv(&mut buf, &report.conditions)?;
        put("conditions.csv", buf)?;
    }
    if let Some(k) = &report.constants {
        let mut buf = Vec::new();
        write_constants_csv(&mut buf, k)?;
        put("constants.csv", buf)?;
    }
    for (name, text) in &report.extra {
        put(name, text.clone().into_bytes())?;
    }
    if plot {
        let mut buf = Vec::new();
        write_plot_dat(&mut buf, report)?;
        put(&format!("{}.dat", report.mode), buf)?;
    }
    Ok(written)
}
