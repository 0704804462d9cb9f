//! Sweep tables: one row per (θ, α).
//!
//! Header, for a k-parameter model, with `i, j` running over `1..=k` in
//! row-major order:
//!
//! ```text
//! theta_1..theta_k, alpha, metric_i_j…, bound_i_j…, covariance_i_j…, psd_margin
//! ```
//!
//! `metric` is the Fisher metric at α = 1 and the α-metric otherwise,
//! `bound` its inverse, and `covariance` the escort covariance of the
//! fixture's transformed error. Floats use `{:.16e}`.

use std::io::Read;

use anyhow::{bail, Context, Result};
use infogeo::bounds::alpha_crlb_check;
use infogeo::geometry::{alpha_metric, fisher_metric};
use serde::Serialize;

use crate::config::SuiteConfig;
use crate::report::fmt_f64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub theta: Vec<f64>,
    pub alpha: f64,
    pub metric: Vec<f64>,
    pub bound: Vec<f64>,
    pub covariance: Vec<f64>,
    pub psd_margin: f64,
}

pub fn header(k: usize) -> Vec<String> {
    let mut h: Vec<String> = (1..=k).map(|i| format!("theta_{i}")).collect();
    h.push("alpha".into());
    for block in ["metric", "bound", "covariance"] {
        for i in 1..=k {
            for j in 1..=k {
                h.push(format!("{block}_{i}_{j}"));
            }
        }
    }
    h.push("psd_margin".into());
    h
}

fn row_major(m: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

pub fn run_sweep(suite: &SuiteConfig) -> Result<Vec<SweepRow>> {
    let [case] = suite.models.as_slice() else {
        bail!("a sweep needs exactly one model, the suite has {}", suite.models.len());
    };
    if case.points.is_empty() {
        bail!("{} has no `grid` or `theta` to sweep", case.label);
    }
    let est = &case
        .estimator
        .as_ref()
        .with_context(|| format!("{} has no estimator; set `estimator`", case.label))?
        .table;
    let m = &case.model;
    let mut rows = Vec::new();
    for theta in &case.points {
        for alpha in suite.alphas() {
            let metric = if alpha == 1.0 {
                fisher_metric(m, theta)?
            } else {
                alpha_metric(m, theta, alpha)?
            };
            let r = alpha_crlb_check(m, theta, est, alpha)?;
            rows.push(SweepRow {
                theta: theta.clone(),
                alpha,
                metric: row_major(metric.entries()),
                bound: row_major(&r.bound),
                covariance: row_major(r.covariance.as_ref().expect("compared report")),
                psd_margin: r.psd_margin.unwrap_or(f64::NAN),
            });
        }
    }
    Ok(rows)
}

pub fn to_csv(rows: &[SweepRow]) -> Result<String> {
    let k = rows.first().map_or(1, |r| r.theta.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header(k))?;
    for r in rows {
        let mut fields = r.theta.clone();
        fields.push(r.alpha);
        fields.extend(r.metric.iter().chain(&r.bound).chain(&r.covariance));
        fields.push(r.psd_margin);
        w.write_record(fields.iter().map(|v| fmt_f64(*v)))?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Parses a table written by [`to_csv`].
pub fn from_csv(input: impl Read) -> Result<Vec<SweepRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let head = rd.headers()?.clone();
    let k = head.iter().take_while(|h| h.starts_with("theta_")).count();
    if k == 0 || head.iter().collect::<Vec<_>>() != header(k) {
        bail!("not a sweep table: unexpected header {head:?}");
    }
    let kk = k * k;
    let mut rows = Vec::new();
    for (n, rec) in rd.records().enumerate() {
        let rec = rec?;
        let v: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("row {}: bad number", n + 1))?;
        rows.push(SweepRow {
            theta: v[..k].to_vec(),
            alpha: v[k],
            metric: v[k + 1..k + 1 + kk].to_vec(),
            bound: v[k + 1 + kk..k + 1 + 2 * kk].to_vec(),
            covariance: v[k + 1 + 2 * kk..k + 1 + 3 * kk].to_vec(),
            psd_margin: v[k + 1 + 3 * kk],
        });
    }
    Ok(rows)
}
