//! CSV schemas. Column names are part of the interface.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use misobc_core::scheduler::{OnlineRecord, TraceRow};
use misobc_core::throughput::ThroughputReport;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// `iter,user,mu,avg_rate,power`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineTraceRow {
    pub iter: usize,
    pub user: usize,
    pub mu: f64,
    pub avg_rate: f64,
    pub power: f64,
}

impl From<&TraceRow> for OfflineTraceRow {
    fn from(r: &TraceRow) -> Self {
        Self { iter: r.iter, user: r.user, mu: r.mu, avg_rate: r.avg_rate, power: r.power }
    }
}

/// `t,user,rbar,mu,rate,power`, one row per user and block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineTraceRow {
    pub t: usize,
    pub user: usize,
    pub rbar: f64,
    pub mu: f64,
    pub rate: f64,
    pub power: f64,
}

pub fn online_rows(records: &[OnlineRecord]) -> Vec<OnlineTraceRow> {
    records
        .iter()
        .flat_map(|r| {
            (0..r.rbar.len()).map(move |user| OnlineTraceRow {
                t: r.t,
                user,
                rbar: r.rbar[user],
                mu: r.mu[user],
                rate: r.rates[user],
                power: r.power,
            })
        })
        .collect()
}

/// `p_star,alpha,C_e,C_d,delay_penalty,fairness_penalty,theorem_bound`;
/// `alpha` is `;`-joined and missing values are empty fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub p_star: f64,
    pub alpha: String,
    #[serde(rename = "C_e")]
    pub c_e: f64,
    #[serde(rename = "C_d")]
    pub c_d: f64,
    pub delay_penalty: f64,
    pub fairness_penalty: Option<f64>,
    pub theorem_bound: Option<f64>,
}

impl From<&ThroughputReport> for ReportRow {
    fn from(r: &ThroughputReport) -> Self {
        Self {
            p_star: r.p_star,
            alpha: r.alpha.as_slice().iter().map(f64::to_string).collect::<Vec<_>>().join(";"),
            c_e: r.c_e,
            c_d: r.c_d,
            delay_penalty: r.delay_penalty,
            fairness_penalty: r.fairness_penalty,
            theorem_bound: r.theorem_bound,
        }
    }
}

/// `experiment,sweep,metric,value,seed`. An infeasible point is written with
/// value `inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub sweep: f64,
    pub metric: String,
    pub value: f64,
    pub seed: u64,
}

impl ResultRow {
    pub fn new(experiment: &str, sweep: f64, metric: &str, value: f64, seed: u64) -> Self {
        Self { experiment: experiment.into(), sweep, metric: metric.into(), value, seed }
    }
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes to `path`, or to stdout when there is none.
pub fn emit_csv<T: Serialize>(rows: &[T], path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            write_csv(rows, File::create(p)?)
        }
        None => write_csv(rows, io::stdout().lock()),
    }
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
