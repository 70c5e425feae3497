//! Per-epoch training metrics and their CSV form.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const HEADER: &str = "epoch,F_tilde,F,train_acc,test_acc,seconds";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub epoch: usize,
    /// Lifted objective at the end of the epoch.
    pub f_tilde: f64,
    /// Original objective.
    pub f: f64,
    pub train_acc: f64,
    /// `NaN` when no test set was given.
    pub test_acc: f64,
    /// Wall-clock seconds since training started.
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainMetrics {
    pub rows: Vec<MetricsRow>,
}

impl TrainMetrics {
    pub fn last(&self) -> Option<&MetricsRow> {
        self.rows.last()
    }

    /// Final test accuracy, if any epoch ran.
    pub fn final_test_acc(&self) -> Option<f64> {
        self.last().map(|r| r.test_acc)
    }

    /// CSV text: `# `-prefixed comment lines, the header, one row per epoch.
    /// With `timing` off the seconds column is written as 0 so that runs with
    /// the same seed produce identical files.
    pub fn to_csv(&self, comments: &[String], timing: bool) -> String {
        let mut out = String::new();
        for c in comments {
            for line in c.lines() {
                let _ = writeln!(out, "# {line}");
            }
        }
        out.push_str(HEADER);
        out.push('\n');
        for r in &self.rows {
            let seconds = if timing { r.seconds } else { 0.0 };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.epoch, r.f_tilde, r.f, r.train_acc, r.test_acc, seconds
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path, comments: &[String], timing: bool) -> Result<()> {
        std::fs::write(path, self.to_csv(comments, timing))
            .map_err(|source| Error::Io { path: path.display().to_string(), source })
    }
}

/// Reads the rows back from [`TrainMetrics::to_csv`] output, skipping comments.
pub fn parse_csv(text: &str) -> Option<TrainMetrics> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    if lines.next()? != HEADER {
        return None;
    }
    let mut rows = Vec::new();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return None;
        }
        let num = |i: usize| f[i].parse::<f64>().ok();
        rows.push(MetricsRow {
            epoch: f[0].parse().ok()?,
            f_tilde: num(1)?,
            f: num(2)?,
            train_acc: num(3)?,
            test_acc: num(4)?,
            seconds: num(5)?,
        });
    }
    Some(TrainMetrics { rows })
}
