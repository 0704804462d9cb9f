//! Other generalized Fisher informations, evaluated on the same discrete
//! models for comparison with the α-metric.
//!
//! Informations whose score differentiates in the observation `x` (rather
//! than in θ) have no finite-alphabet analogue and are not provided.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{alpha_metric, fisher_metric};
use crate::linalg::symmetrize;
use crate::manifold::{escort, escort_partials, model_partials, DiffConfig, EscortMap, ParametricModel};

fn check_order(order: f64, what: &str) -> Result<()> {
    if !(order.is_finite() && order > 0.0) {
        return Err(Error::Domain(format!("{what} must be positive, got {order}")));
    }
    Ok(())
}

/// Naudts' escort Fisher information
/// `g_kl = Σ_x ∂_k p_θ(x)·∂_l p_θ(x) / p_θ^(α)(x)`.
pub fn naudts_fisher(m: &ParametricModel, theta: &[f64], alpha: f64) -> Result<DMatrix<f64>> {
    check_order(alpha, "α")?;
    let p = m.eval(theta)?;
    let q = escort(&p, alpha)?;
    let dp = model_partials(m, theta, &DiffConfig::default())?;
    let k = m.dim();
    let g = DMatrix::from_fn(k, k, |i, j| (0..p.len()).map(|x| dp[(x, i)] * dp[(x, j)] / q[x]).sum());
    Ok(symmetrize(&g).0)
}

/// Bercher's (β = 2) q-Fisher information on a finite alphabet,
/// `I_kl = E_{p^(q)}[(p^(q)/p)·∂_k log p^(q)·∂_l log p^(q)]`.
pub fn bercher_fisher(m: &ParametricModel, theta: &[f64], q: f64) -> Result<DMatrix<f64>> {
    check_order(q, "q")?;
    let p = m.eval(theta)?;
    let (pq, dpq) = escort_partials(m, theta, &EscortMap::for_order(q)?, &DiffConfig::default())?;
    let k = m.dim();
    let g = DMatrix::from_fn(k, k, |i, j| {
        (0..p.len())
            .map(|x| pq[x] * (pq[x] / p[x]) * (dpq[(x, i)] / pq[x]) * (dpq[(x, j)] / pq[x]))
            .sum()
    });
    Ok(symmetrize(&g).0)
}

/// `E_{p^(q)}[(p/(q² p^(q)))·(p^(q)/p)·∂_k log p^(q)·∂_l log p^(q)]`: Bercher's
/// integrand with the conversion factor `p/(q² p^(q))` applied inside the
/// expectation. It reproduces the α-metric.
pub fn bercher_converted(m: &ParametricModel, theta: &[f64], q: f64) -> Result<DMatrix<f64>> {
    check_order(q, "q")?;
    let p = m.eval(theta)?;
    let (pq, dpq) = escort_partials(m, theta, &EscortMap::for_order(q)?, &DiffConfig::default())?;
    let k = m.dim();
    let g = DMatrix::from_fn(k, k, |i, j| {
        (0..p.len())
            .map(|x| {
                let factor = p[x] / (q * q * pq[x]);
                pq[x] * factor * (pq[x] / p[x]) * (dpq[(x, i)] / pq[x]) * (dpq[(x, j)] / pq[x])
            })
            .sum()
    });
    Ok(symmetrize(&g).0)
}

/// Side-by-side comparison at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantReport {
    pub theta: Vec<f64>,
    pub alpha: f64,
    /// α-metric, or the Fisher metric when α = 1.
    pub ours: Vec<Vec<f64>>,
    pub naudts: Vec<Vec<f64>>,
    pub bercher: Vec<Vec<f64>>,
    /// Bercher's integrand after the conversion factor; equals `ours`.
    pub bercher_converted: Vec<Vec<f64>>,
    /// Entrywise `naudts / ours`.
    pub naudts_ratio: Vec<Vec<f64>>,
    /// Entrywise `bercher / (α²·ours)`.
    pub bercher_ratio: Vec<Vec<f64>>,
    /// `max |bercher_converted − ours|`.
    pub conversion_gap: f64,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn compare_variants(m: &ParametricModel, theta: &[f64], alpha: f64) -> Result<VariantReport> {
    let ours = if alpha == 1.0 {
        fisher_metric(m, theta)?
    } else {
        alpha_metric(m, theta, alpha)?
    }
    .entries()
    .clone();
    let naudts = naudts_fisher(m, theta, alpha)?;
    let bercher = bercher_fisher(m, theta, alpha)?;
    let converted = bercher_converted(m, theta, alpha)?;
    let ratio = |a: &DMatrix<f64>, scale: f64| rows(&a.zip_map(&ours, |x, y| x / (scale * y)));
    Ok(VariantReport {
        theta: theta.to_vec(),
        alpha,
        naudts_ratio: ratio(&naudts, 1.0),
        bercher_ratio: ratio(&bercher, alpha * alpha),
        conversion_gap: (&converted - &ours).amax(),
        ours: rows(&ours),
        naudts: rows(&naudts),
        bercher: rows(&bercher),
        bercher_converted: rows(&converted),
    })
}
