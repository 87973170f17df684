//! Per-iteration metrics rows and the fixed CSV schema.

use std::io::Write;

use nalgebra::DVector;
use serde::Serialize;

use crate::data::Dataset;

/// Fixed header; column order is part of the output contract.
pub const CSV_HEADER: &str =
    "algorithm,stage_n,step,eff_grad_evals,rounds,wall_time_s,risk_window,risk_full,acc_window,acc_full,acc_test";

/// One trace point. Cumulative columns (`eff_grad_evals`, `rounds`,
/// `wall_time_s`) never decrease within an algorithm's trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub algorithm: String,
    pub stage_n: usize,
    /// Inner step within the stage; 0 marks the stage boundary (restart).
    pub step: usize,
    /// Cumulative samples touched, normalized by the full training size.
    pub eff_grad_evals: f64,
    /// Cumulative communication rounds.
    pub rounds: u64,
    pub wall_time_s: Option<f64>,
    /// Risk over the active window.
    pub risk_window: f64,
    /// Risk over the full training set.
    pub risk_full: Option<f64>,
    /// Training accuracy on the current window.
    pub acc_window: f64,
    /// Training accuracy on the entire training set.
    pub acc_full: f64,
    pub acc_test: Option<f64>,
}

fn opt_col<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

impl MetricsRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.algorithm,
            self.stage_n,
            self.step,
            self.eff_grad_evals,
            self.rounds,
            opt_col(&self.wall_time_s),
            self.risk_window,
            opt_col(&self.risk_full),
            self.acc_window,
            self.acc_full,
            opt_col(&self.acc_test),
        )
    }
}

pub fn write_csv<W: Write>(rows: &[MetricsRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.to_csv_line())?;
    }
    Ok(())
}

/// Fraction of rows in `0..limit` whose score sign matches the label
/// (`w·x ≥ 0` predicts +1).
pub fn classification_accuracy(ds: &Dataset, limit: usize, w: &DVector<f64>) -> f64 {
    let limit = limit.min(ds.len());
    if limit == 0 {
        return 0.0;
    }
    let correct = (0..limit)
        .filter(|&i| {
            let pred = if ds.row(i).dot(w) >= 0.0 { 1.0 } else { -1.0 };
            pred == ds.label(i)
        })
        .count();
    correct as f64 / limit as f64
}
