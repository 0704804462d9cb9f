//! Cramér-Rao-type lower bounds and the comparison contract.
//!
//! "M ≥ N" always means `M − N` is positive semidefinite; [`BoundReport`]
//! records the smallest eigenvalue of `covariance − bound` and the verdict.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::divergence::{ConvexGenerator, PriorDensity};
use crate::error::{Error, Result};
use crate::estimation::{
    exact_moments, integrated_escort_covariance, prior_weights, transformed_error, EstimatorTable,
    Weighting,
};
use crate::geometry::{alpha_metric, fisher_metric, gen_metric, prior_information, MetricMatrix};
use crate::linalg::{inverse_spd, psd_margin, trace, weighted_moments};
use crate::manifold::{apply_escort, mixed_partial, DiffConfig, EscortMap, ParametricModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Holds,
    Violated,
    NotCompared,
}

/// A bound matrix, optionally compared against a covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub kind: String,
    pub bound: DMatrix<f64>,
    pub covariance: Option<DMatrix<f64>>,
    pub psd_margin: Option<f64>,
    pub verdict: Verdict,
    pub metadata: BTreeMap<String, String>,
}

impl BoundReport {
    pub fn new(kind: impl Into<String>, bound: DMatrix<f64>) -> Self {
        Self {
            kind: kind.into(),
            bound,
            covariance: None,
            psd_margin: None,
            verdict: Verdict::NotCompared,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    /// The default tolerance `1e-9·(1 + trace(bound))`.
    pub fn tolerance(&self) -> f64 {
        1e-9 * (1.0 + trace(&self.bound).abs())
    }

    /// Compares against `covariance`; the bound holds iff
    /// `λ_min(covariance − bound) ≥ −tolerance()`.
    pub fn compare(mut self, covariance: DMatrix<f64>) -> Result<Self> {
        if covariance.shape() != self.bound.shape() {
            return Err(Error::DimensionMismatch {
                expected: self.bound.nrows(),
                got: covariance.nrows(),
            });
        }
        let margin = psd_margin(&covariance, &self.bound);
        self.verdict = if margin >= -self.tolerance() {
            Verdict::Holds
        } else {
            Verdict::Violated
        };
        self.psd_margin = Some(margin);
        self.covariance = Some(covariance);
        Ok(self)
    }

    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }
}

/// Test points `θ^(1..n)` for the Barankin bound of a scalar parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestPointSet {
    base: f64,
    points: Vec<f64>,
}

impl TestPointSet {
    /// Drops points within 1e-12 of an earlier one.
    pub fn new(base: f64, points: &[f64]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::TestPoints("at least one test point is required".into()));
        }
        let mut kept: Vec<f64> = Vec::with_capacity(points.len());
        for &t in points {
            if !t.is_finite() {
                return Err(Error::TestPoints(format!("test point {t} is not finite")));
            }
            if kept.iter().all(|k| (k - t).abs() > 1e-12) {
                kept.push(t);
            }
        }
        Ok(Self { base, points: kept })
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }
}

/// Split of the parameter indices into deterministic and random components.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HybridMask {
    deterministic: Vec<usize>,
    random: Vec<usize>,
}

impl HybridMask {
    pub fn new(k: usize, deterministic: &[usize]) -> Result<Self> {
        let mut det: Vec<usize> = deterministic.to_vec();
        det.sort_unstable();
        det.dedup();
        if let Some(bad) = det.iter().find(|&&i| i >= k) {
            return Err(Error::Domain(format!("deterministic index {bad} out of range for k = {k}")));
        }
        let random = (0..k).filter(|i| !det.contains(i)).collect();
        Ok(Self {
            deterministic: det,
            random,
        })
    }

    pub fn all_random(k: usize) -> Self {
        Self {
            deterministic: Vec::new(),
            random: (0..k).collect(),
        }
    }

    pub fn all_deterministic(k: usize) -> Self {
        Self {
            deterministic: (0..k).collect(),
            random: Vec::new(),
        }
    }

    pub fn deterministic(&self) -> &[usize] {
        &self.deterministic
    }

    pub fn random(&self) -> &[usize] {
        &self.random
    }

    /// Zeroes every row and column of `j` that touches a deterministic index.
    pub fn apply(&self, j: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = j.clone();
        for &i in &self.deterministic {
            out.row_mut(i).fill(0.0);
            out.column_mut(i).fill(0.0);
        }
        out
    }
}

/// Minimum number of midpoint cells per axis for grid integration.
pub const MIN_GRID_POINTS: usize = 8;

/// Points and quadrature weights over a parameter box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaGrid {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    per_axis: Option<Vec<usize>>,
}

impl ThetaGrid {
    /// Midpoint rule with `n` cells per axis on the box `lower..upper`.
    pub fn midpoint(lower: &[f64], upper: &[f64], n: usize) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() || lower.iter().zip(upper).any(|(l, u)| !(l < u)) {
            return Err(Error::Config(format!("grid box {lower:?}..{upper:?} is empty")));
        }
        if n < MIN_GRID_POINTS {
            return Err(Error::Config(format!(
                "grid has {n} points per axis; integration needs at least {MIN_GRID_POINTS}"
            )));
        }
        let axes: Vec<Vec<f64>> = lower
            .iter()
            .zip(upper)
            .map(|(l, u)| (0..n).map(|i| l + (u - l) * (i as f64 + 0.5) / n as f64).collect())
            .collect();
        let cell: f64 = lower.iter().zip(upper).map(|(l, u)| (u - l) / n as f64).product();
        let mut points = vec![Vec::new()];
        for axis in &axes {
            points = points
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |v| {
                        let mut p = prefix.clone();
                        p.push(*v);
                        p
                    })
                })
                .collect();
        }
        let weights = vec![cell; points.len()];
        Ok(Self {
            points,
            weights,
            per_axis: Some(vec![n; lower.len()]),
        })
    }

    /// An explicit list of points with equal weights; not usable for
    /// integration.
    pub fn explicit(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config("grid is empty".into()));
        }
        let w = 1.0 / points.len() as f64;
        Ok(Self {
            weights: vec![w; points.len()],
            points,
            per_axis: None,
        })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn check_integrable(&self) -> Result<()> {
        match &self.per_axis {
            Some(n) if n.iter().all(|&n| n >= MIN_GRID_POINTS) => Ok(()),
            _ => Err(Error::Config(format!(
                "integration needs a midpoint grid with at least {MIN_GRID_POINTS} points per axis"
            ))),
        }
    }
}

/// `G⁻¹`.
pub fn inverse_metric_bound(g: &MetricMatrix) -> Result<DMatrix<f64>> {
    g.inverse()
}

/// `(𝟏 + B′)·G⁻¹·(𝟏 + B′) + b bᵀ`, where `(𝟏 + B′)` is diagonal with entries
/// `1 + ∂_i b_i` (cross-derivatives of the bias are not used). Lower-bounds
/// the mean squared error matrix of an estimator with bias `b`.
pub fn biased_cr_bound<B>(m: &ParametricModel, theta: &[f64], bias: B, cfg: &DiffConfig) -> Result<DMatrix<f64>>
where
    B: Fn(&[f64]) -> Vec<f64>,
{
    cfg.validate()?;
    m.check_interior(theta, cfg.margin)?;
    let k = m.dim();
    let b = bias(theta);
    if b.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: b.len() });
    }
    let steps: Vec<f64> = theta.iter().map(|t| DiffConfig::step(cfg.h2, *t)).collect();
    let mut diag = DVector::zeros(k);
    for i in 0..k {
        let bi = |z: &[f64]| Ok(bias(z)[i]);
        diag[i] = 1.0 + mixed_partial(&bi, theta, &[(i, 1)], &steps)?;
    }
    let d = DMatrix::from_diagonal(&diag);
    let b = DVector::from_vec(b);
    Ok(&d * fisher_metric(m, theta)?.inverse()? * &d + &b * b.transpose())
}

/// Result of a grid-integrated Bayesian bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesianBound {
    /// `{Σ ω·(G + J_masked)}⁻¹`.
    pub bound: DMatrix<f64>,
    /// `Σ ω·(G + J_masked)`.
    pub information: DMatrix<f64>,
    /// `λ_min(Σ ω·(G + J)⁻¹ − {Σ ω·(G + J)}⁻¹)`: the matrix-Jensen step.
    pub jensen_margin: f64,
    /// Normalized grid weights `ω ∝ w·λ`.
    pub weights: Vec<f64>,
}

fn integrate<F>(points: &[Vec<f64>], weights: &[f64], k: usize, integrand: F) -> Result<BayesianBound>
where
    F: Fn(&[f64]) -> Result<DMatrix<f64>>,
{
    let mut information = DMatrix::zeros(k, k);
    let mut mean_inverse = DMatrix::zeros(k, k);
    for (theta, w) in points.iter().zip(weights) {
        let x = integrand(theta)?;
        mean_inverse += inverse_spd(&x)? * *w;
        information += x * *w;
    }
    let bound = inverse_spd(&information)?;
    Ok(BayesianBound {
        jensen_margin: psd_margin(&mean_inverse, &bound),
        bound,
        information,
        weights: weights.to_vec(),
    })
}

fn metric_part(m: &ParametricModel, theta: &[f64], alpha: f64) -> Result<DMatrix<f64>> {
    Ok(if alpha == 1.0 {
        fisher_metric(m, theta)?
    } else {
        alpha_metric(m, theta, alpha)?
    }
    .entries()
    .clone())
}

/// The Bayesian (α = 1) or Bayesian-α bound `{E_λ[G + J]}⁻¹` on a midpoint
/// grid, with λ renormalized on the grid. A hybrid mask zeroes the prior
/// information for deterministic components.
pub fn bayesian_bound(
    m: &ParametricModel,
    prior: &PriorDensity,
    grid: &ThetaGrid,
    alpha: f64,
    mask: Option<&HybridMask>,
) -> Result<BayesianBound> {
    grid.check_integrable()?;
    if prior.dim() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            got: prior.dim(),
        });
    }
    let weights = prior_weights(prior, grid.points(), grid.weights())?;
    integrate(grid.points(), &weights, m.dim(), |theta| {
        let j = prior_information(prior, theta)?;
        let j = match mask {
            Some(mask) => mask.apply(&j),
            None => j,
        };
        Ok(metric_part(m, theta, alpha)? + j)
    })
}

/// `{(1/N) Σ G(θ_n)}⁻¹`: the classical (α = 1) or α bound averaged under a
/// uniform prior on the grid.
pub fn integrated_classical_bound(m: &ParametricModel, grid: &ThetaGrid, alpha: f64) -> Result<BayesianBound> {
    grid.check_integrable()?;
    let weights = vec![1.0 / grid.len() as f64; grid.len()];
    integrate(grid.points(), &weights, m.dim(), |theta| {
        Ok(metric_part(m, theta, alpha)? + DMatrix::zeros(m.dim(), m.dim()))
    })
}

/// `ΔᵀB⁻¹Δ` with `Δ_l = θ^(l) − θ` and `B_lm = Σ_x p_l(x) p_m(x) / p_θ(x)`:
/// the supremum of `(aᵀΔ)²/(aᵀBa)` over coefficient vectors `a`.
pub fn barankin_bound(m: &ParametricModel, theta: &[f64], pts: &TestPointSet) -> Result<f64> {
    if m.dim() != 1 {
        return Err(Error::Domain(format!(
            "the Barankin bound is implemented for scalar parameters; model has k = {}",
            m.dim()
        )));
    }
    let p = m.eval(theta)?;
    let others: Vec<_> = pts
        .points()
        .iter()
        .map(|t| m.eval(&[*t]))
        .collect::<Result<_>>()?;
    let n = others.len();
    let delta = DVector::from_fn(n, |l, _| pts.points()[l] - theta[0]);
    if delta.iter().all(|d| *d == 0.0) {
        return Ok(0.0);
    }
    let b = DMatrix::from_fn(n, n, |l, j| {
        (0..p.len()).map(|x| others[l][x] * others[j][x] / p[x]).sum()
    });
    let chol = nalgebra::Cholesky::new(b.clone())
        .filter(|c| {
            let d = c.l_dirty().diagonal();
            let max = d.iter().fold(0.0_f64, |a, v| a.max(v * v));
            d.iter().all(|v| v * v > 1e-14 * max)
        })
        .ok_or_else(|| {
            Error::TestPoints(format!(
                "likelihood-ratio Gram matrix is singular for test points {:?}: {b}",
                pts.points()
            ))
        })?;
    Ok(delta.dot(&chol.solve(&delta)))
}

/// Exhaustive search over subsets of size `1..=n` of the candidates (θ is
/// always added) for the largest [`barankin_bound`]. Singular subsets are
/// skipped.
pub fn barankin_search(
    m: &ParametricModel,
    theta: &[f64],
    candidates: &[f64],
    n: usize,
) -> Result<(f64, TestPointSet)> {
    if candidates.is_empty() {
        return Err(Error::TestPoints("candidate grid is empty".into()));
    }
    if !(1..=4).contains(&n) {
        return Err(Error::TestPoints(format!("subset size must be in 1..=4, got {n}")));
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = (0.0, TestPointSet::new(theta[0], &[theta[0]])?);
    let mut subset = Vec::with_capacity(n + 1);
    search(m, theta, &sorted, 0, n, &mut subset, &mut best)?;
    Ok(best)
}

fn search(
    m: &ParametricModel,
    theta: &[f64],
    cands: &[f64],
    start: usize,
    left: usize,
    subset: &mut Vec<f64>,
    best: &mut (f64, TestPointSet),
) -> Result<()> {
    if !subset.is_empty() {
        let mut pts = vec![theta[0]];
        pts.extend_from_slice(subset);
        let set = TestPointSet::new(theta[0], &pts)?;
        match barankin_bound(m, theta, &set) {
            Ok(v) if v > best.0 => *best = (v, set),
            Ok(_) | Err(Error::TestPoints(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if left == 0 {
        return Ok(());
    }
    for i in start..cands.len() {
        subset.push(cands[i]);
        search(m, theta, cands, i + 1, left - 1, subset, best)?;
        subset.pop();
    }
    Ok(())
}

/// Classical check: `Cov_θ[θ̂] ≥ G⁻¹`.
pub fn crlb_check(m: &ParametricModel, theta: &[f64], est: &EstimatorTable) -> Result<BoundReport> {
    let cov = exact_moments(m, theta, est, &Weighting::Plain)?.covariance;
    BoundReport::new("crlb", fisher_metric(m, theta)?.inverse()?)
        .with_meta("theta", format!("{theta:?}"))
        .with_meta("estimator", est.name())
        .compare(cov)
}

/// α check: the escort covariance of the transformed error
/// `(p/p^(α))(θ̂ − θ)` dominates `[G^(α)]⁻¹`. α = 1 is the classical check.
pub fn alpha_crlb_check(m: &ParametricModel, theta: &[f64], est: &EstimatorTable, alpha: f64) -> Result<BoundReport> {
    if alpha == 1.0 {
        return crlb_check(m, theta, est);
    }
    let f = EscortMap::alpha(alpha)?;
    let bound = alpha_metric(m, theta, alpha)?.inverse()?;
    BoundReport::new("alpha-crlb", bound)
        .with_meta("alpha", alpha)
        .with_meta("theta", format!("{theta:?}"))
        .with_meta("estimator", est.name())
        .compare(escort_error_covariance(m, theta, est, &f)?)
}

/// Generalized check for an escort map `F`: the `F(p_θ)` covariance of the
/// transformed error dominates `[G^(f,F)]⁻¹`.
pub fn gen_crlb_check(
    m: &ParametricModel,
    theta: &[f64],
    est: &EstimatorTable,
    f: &ConvexGenerator,
    escort: &EscortMap,
) -> Result<BoundReport> {
    let bound = gen_metric(m, theta, f, escort)?.inverse()?;
    BoundReport::new("generalized-crlb", bound)
        .with_meta("f", f.name())
        .with_meta("escort", escort.name())
        .with_meta("theta", format!("{theta:?}"))
        .with_meta("estimator", est.name())
        .compare(escort_error_covariance(m, theta, est, escort)?)
}

/// `Cov_{F(p_θ)}[(p_θ/F(p_θ))(θ̂ − θ)]`.
pub fn escort_error_covariance(
    m: &ParametricModel,
    theta: &[f64],
    est: &EstimatorTable,
    f: &EscortMap,
) -> Result<DMatrix<f64>> {
    let err = transformed_error(m, theta, est, f)?;
    let q = apply_escort(&m.eval(theta)?, f)?;
    Ok(weighted_moments(q.as_slice(), err.values()).1)
}

/// Bayesian (α = 1) or Bayesian-α check: `Σ ω·Cov_{θ^(α)}[transformed
/// error]` against [`bayesian_bound`], with a caller-chosen tolerance.
pub fn bayesian_crlb_check(
    m: &ParametricModel,
    prior: &PriorDensity,
    grid: &ThetaGrid,
    est: &EstimatorTable,
    alpha: f64,
    mask: Option<&HybridMask>,
) -> Result<(BoundReport, BayesianBound)> {
    let bb = bayesian_bound(m, prior, grid, alpha, mask)?;
    let f = EscortMap::for_order(alpha)?;
    let cov = integrated_escort_covariance(m, grid.points(), &bb.weights, est, &f)?;
    let report = BoundReport::new(if alpha == 1.0 { "bayesian-crlb" } else { "bayesian-alpha-crlb" }, bb.bound.clone())
        .with_meta("alpha", alpha)
        .with_meta("prior", prior.name())
        .with_meta("grid_points", grid.len())
        .with_meta("estimator", est.name())
        .compare(cov)?;
    Ok((report, bb))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_bounds() {
        let m = ParametricModel::bernoulli();
        let b = inverse_metric_bound(&fisher_metric(&m, &[0.5]).unwrap()).unwrap();
        assert!((b[(0, 0)] - 0.25).abs() < 1e-15);
        let id = MetricMatrix::new(DMatrix::identity(3, 3), &[0.0; 3], crate::geometry::MetricSource::Analytic, "id")
            .unwrap();
        assert_eq!(inverse_metric_bound(&id).unwrap(), DMatrix::identity(3, 3));
    }

    #[test]
    fn biased_bound_examples() {
        let m = ParametricModel::bernoulli();
        let cfg = DiffConfig::default();
        let b = biased_cr_bound(&m, &[0.5], |t| vec![0.1 * t[0]], &cfg).unwrap();
        assert!((b[(0, 0)] - 0.305).abs() < 1e-12);
        let zero = biased_cr_bound(&m, &[0.3], |t| vec![-t[0]], &cfg).unwrap();
        assert!((zero[(0, 0)] - 0.09).abs() < 1e-12);
        let none = biased_cr_bound(&m, &[0.3], |_| vec![0.0], &cfg).unwrap();
        assert!((none[(0, 0)] - 0.21).abs() < 1e-15);
    }

    #[test]
    fn barankin_two_points() {
        let m = ParametricModel::bernoulli();
        let v = barankin_bound(&m, &[0.5], &TestPointSet::new(0.5, &[0.5, 0.6]).unwrap()).unwrap();
        assert!((v - 0.25).abs() < 1e-10);
        let single = barankin_bound(&m, &[0.5], &TestPointSet::new(0.5, &[0.5]).unwrap()).unwrap();
        assert_eq!(single, 0.0);
        // Duplicates collapse; a dependent third point makes B singular.
        let dup = TestPointSet::new(0.5, &[0.5, 0.6, 0.6]).unwrap();
        assert_eq!(dup.points().len(), 2);
        let dependent = TestPointSet::new(0.5, &[0.5, 0.6, 0.7]).unwrap();
        assert!(matches!(barankin_bound(&m, &[0.5], &dependent), Err(Error::TestPoints(_))));
    }

    #[test]
    fn barankin_search_trivial_grid() {
        let m = ParametricModel::bernoulli();
        let (v, _) = barankin_search(&m, &[0.4], &[0.4], 1).unwrap();
        assert_eq!(v, 0.0);
        assert!(barankin_search(&m, &[0.4], &[], 2).is_err());
    }

    #[test]
    fn grid_needs_eight_points() {
        assert!(matches!(ThetaGrid::midpoint(&[0.0], &[1.0], 7), Err(Error::Config(_))));
        let g = ThetaGrid::midpoint(&[0.0], &[1.0], 8).unwrap();
        assert_eq!(g.len(), 8);
        assert!((g.points()[0][0] - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn hybrid_mask() {
        let mask = HybridMask::new(3, &[2, 0]).unwrap();
        assert_eq!(mask.random(), &[1]);
        let j = DMatrix::from_element(3, 3, 1.0);
        let masked = mask.apply(&j);
        assert_eq!(masked.sum(), 1.0);
        assert!(HybridMask::new(2, &[2]).is_err());
    }

    #[test]
    fn uniform_bayesian_bound() {
        let m = ParametricModel::bernoulli();
        let prior = PriorDensity::uniform(vec![0.1], vec![0.9]).unwrap();
        let grid = ThetaGrid::midpoint(&[0.1], &[0.9], 201).unwrap();
        let b = bayesian_bound(&m, &prior, &grid, 1.0, None).unwrap();
        // 0.8 / ∫_{0.1}^{0.9} dθ/(θ(1−θ)) = 0.8 / (2 log 9)
        let want = 0.8 / (2.0 * 9f64.ln());
        assert!((b.bound[(0, 0)] / want - 1.0).abs() < 1e-3);
        assert!(b.jensen_margin >= -1e-12);
    }
}
