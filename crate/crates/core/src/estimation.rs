//! Estimator tables and their exact or simulated moments.
//!
//! Everything here works with a single draw `X ∈ 𝕏`: an estimator is a
//! table `x ↦ θ̂(x)` and its moments are finite sums. Repeated sampling is
//! modelled with product families such as `binomial(n)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::divergence::{ConvexGenerator, PriorDensity};
use crate::error::{Error, Result};
use crate::geometry::gen_metric;
use crate::linalg::{min_eigenvalue, weighted_moments};
use crate::manifold::{apply_escort, mixed_partial, DiffConfig, EscortMap, ParametricModel, ProbVector};

/// A single-observation estimator: row `x` is `θ̂(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorTable {
    name: String,
    values: DMatrix<f64>,
}

impl EstimatorTable {
    pub fn new(name: impl Into<String>, values: DMatrix<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("estimator table has non-finite entries".into()));
        }
        Ok(Self {
            name: name.into(),
            values,
        })
    }

    /// Builds a table from one row per symbol.
    pub fn from_rows(name: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || k == 0 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::Domain("estimator rows must be non-empty and of equal length".into()));
        }
        Self::new(name, DMatrix::from_fn(rows.len(), k, |x, i| rows[x][i]))
    }

    /// `θ̂_i(x) = 1{x = a_i}` for `i < d − 1`: the efficient estimator of the
    /// cell-probability chart of `categorical(d)`.
    pub fn indicator(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain("indicator estimator needs d ≥ 2".into()));
        }
        Self::new("indicator", DMatrix::from_fn(d, d - 1, |x, i| if x == i { 1.0 } else { 0.0 }))
    }

    /// `θ̂(x) = x / n` on `{0, …, n}`; unbiased for `binomial(n)` and, with
    /// n = 1, for `bernoulli`.
    pub fn sample_mean(n: u32) -> Self {
        let n = n.max(1);
        Self {
            name: format!("x/{n}"),
            values: DMatrix::from_fn(n as usize + 1, 1, |x, _| x as f64 / n as f64),
        }
    }

    pub fn constant(d: usize, value: &[f64]) -> Result<Self> {
        Self::from_rows("constant", &vec![value.to_vec(); d])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn alphabet_size(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    fn check_model(&self, m: &ParametricModel) -> Result<()> {
        if self.alphabet_size() != m.alphabet_size() {
            return Err(Error::DimensionMismatch {
                expected: m.alphabet_size(),
                got: self.alphabet_size(),
            });
        }
        if self.dim() != m.dim() {
            return Err(Error::DimensionMismatch {
                expected: m.dim(),
                got: self.dim(),
            });
        }
        Ok(())
    }

    fn scale_rows(&self, name: String, factor: impl Fn(usize) -> f64) -> Self {
        let values = DMatrix::from_fn(self.values.nrows(), self.values.ncols(), |x, i| {
            factor(x) * self.values[(x, i)]
        });
        Self { name, values }
    }
}

/// The distribution moments are taken under.
#[derive(Debug, Clone)]
pub enum Weighting {
    /// `p_θ`.
    Plain,
    /// `F(p_θ)`, applied to the table as is.
    Escort(EscortMap),
    /// `F(p_θ)`, applied to the to-escort transform `(p_θ/F(p_θ))·θ̂` of the
    /// table at each θ.
    EscortTransformed(EscortMap),
}

impl Weighting {
    /// Escort weighting of order α; α = 1 is plain.
    pub fn alpha(alpha: f64) -> Result<Self> {
        Ok(match EscortMap::for_order(alpha)? {
            EscortMap::Identity => Weighting::Plain,
            map => Weighting::Escort(map),
        })
    }

    pub fn label(&self) -> String {
        match self {
            Weighting::Plain => "plain".into(),
            Weighting::Escort(f) => format!("escort {}", f.name()),
            Weighting::EscortTransformed(f) => format!("escort-transformed {}", f.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum MomentMode {
    Exact,
    MonteCarlo { n: u64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub weighting: String,
    pub mode: MomentMode,
}

/// Weights and the (possibly transformed) table for a weighting at θ.
fn weighted_table(
    m: &ParametricModel,
    theta: &[f64],
    est: &EstimatorTable,
    weighting: &Weighting,
) -> Result<(ProbVector, EstimatorTable)> {
    est.check_model(m)?;
    let p = m.eval(theta)?;
    Ok(match weighting {
        Weighting::Plain => (p, est.clone()),
        Weighting::Escort(f) => (apply_escort(&p, f)?, est.clone()),
        Weighting::EscortTransformed(f) => {
            let table = escort_estimator(m, theta, est, f, EscortDirection::ToEscort)?;
            (apply_escort(&p, f)?, table)
        }
    })
}

/// Mean and covariance of `θ̂(X)` by summing over the alphabet.
pub fn exact_moments(
    m: &ParametricModel,
    theta: &[f64],
    est: &EstimatorTable,
    weighting: &Weighting,
) -> Result<MomentReport> {
    let (w, table) = weighted_table(m, theta, est, weighting)?;
    let (mean, covariance) = weighted_moments(w.as_slice(), table.values());
    Ok(MomentReport {
        mean,
        covariance,
        weighting: weighting.label(),
        mode: MomentMode::Exact,
    })
}

/// Sample mean and covariance (divisor n) of `θ̂` over `n` draws from `p_θ`,
/// using a ChaCha8 generator seeded with `seed`.
pub fn monte_carlo_moments(
    m: &ParametricModel,
    theta: &[f64],
    est: &EstimatorTable,
    n: u64,
    seed: u64,
) -> Result<MomentReport> {
    if n == 0 {
        return Err(Error::Domain("Monte Carlo moments need at least one sample".into()));
    }
    est.check_model(m)?;
    let p = m.eval(theta)?;
    let dist = WeightedIndex::new(p.as_slice())
        .map_err(|e| Error::Domain(format!("cannot sample from {:?}: {e}", p.as_slice())))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; p.len()];
    for _ in 0..n {
        counts[dist.sample(&mut rng)] += 1;
    }
    // The sample moments are the moments of the empirical distribution.
    let empirical: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    let (mean, covariance) = weighted_moments(&empirical, est.values());
    Ok(MomentReport {
        mean,
        covariance,
        weighting: Weighting::Plain.label(),
        mode: MomentMode::MonteCarlo { n, seed },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EscortDirection {
    /// `θ̂^(F)(x) = (p_θ(x)/F(p_θ)(x))·θ̂(x)`.
    ToEscort,
    /// `θ̂(x) = (F(p_θ)(x)/p_θ(x))·θ̂^(F)(x)`.
    FromEscort,
}

/// Transfers an estimator between `S` and its escort model at θ.
///
/// The transform uses the true θ, so the result is an analytical device for
/// the bound checks rather than an estimator one could run on data.
pub fn escort_estimator(
    m: &ParametricModel,
    theta: &[f64],
    est: &EstimatorTable,
    f: &EscortMap,
    direction: EscortDirection,
) -> Result<EstimatorTable> {
    est.check_model(m)?;
    let p = m.eval(theta)?;
    let q = apply_escort(&p, f)?;
    Ok(match direction {
        EscortDirection::ToEscort => {
            est.scale_rows(format!("{} to {} at θ={theta:?}", est.name, f.name()), |x| p[x] / q[x])
        }
        EscortDirection::FromEscort => {
            est.scale_rows(format!("{} from {} at θ={theta:?}", est.name, f.name()), |x| q[x] / p[x])
        }
    })
}

/// The transformed error `(p_θ(x)/F(p_θ)(x))·(θ̂(x) − θ)`.
///
/// For unbiased `θ̂` it has mean zero under `F(p_θ)` and its covariance there
/// dominates the inverse generalized metric; `θ + transformed_error` is the
/// corresponding unbiased estimator for the escort model.
pub fn transformed_error(
    m: &ParametricModel,
    theta: &[f64],
    est: &EstimatorTable,
    f: &EscortMap,
) -> Result<EstimatorTable> {
    est.check_model(m)?;
    let p = m.eval(theta)?;
    let q = apply_escort(&p, f)?;
    let values = DMatrix::from_fn(est.alphabet_size(), est.dim(), |x, i| {
        p[x] / q[x] * (est.values[(x, i)] - theta[i])
    });
    EstimatorTable::new(format!("transformed error of {} under {}", est.name, f.name()), values)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnbiasednessReport {
    pub estimator: String,
    pub weighting: String,
    pub max_deviation: f64,
    pub worst_theta: Vec<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

pub const UNBIASEDNESS_TOL: f64 = 1e-9;

/// `max_θ |E_weighting[θ̂] − θ|` over the grid.
pub fn unbiasedness_check(
    m: &ParametricModel,
    est: &EstimatorTable,
    grid: &[Vec<f64>],
    weighting: &Weighting,
) -> Result<UnbiasednessReport> {
    if grid.is_empty() {
        return Err(Error::Config("unbiasedness check needs a non-empty grid".into()));
    }
    let mut worst = (0.0_f64, grid[0].clone());
    for theta in grid {
        let r = exact_moments(m, theta, est, weighting)?;
        let dev = r
            .mean
            .iter()
            .zip(theta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if dev > worst.0 {
            worst = (dev, theta.clone());
        }
    }
    Ok(UnbiasednessReport {
        estimator: est.name.clone(),
        weighting: weighting.label(),
        max_deviation: worst.0,
        worst_theta: worst.1,
        tolerance: UNBIASEDNESS_TOL,
        passed: worst.0 < UNBIASEDNESS_TOL,
    })
}

/// `Σ_n ω_n·Cov_{F(p_θn)}[(p/F(p))(θ̂ − θ_n)]` with the normalized weights
/// `ω_n` of a prior on a grid; at F = identity this is `E_λ[Var_θ θ̂]`.
pub fn integrated_escort_covariance(
    m: &ParametricModel,
    points: &[Vec<f64>],
    weights: &[f64],
    est: &EstimatorTable,
    f: &EscortMap,
) -> Result<DMatrix<f64>> {
    let k = m.dim();
    let mut total = DMatrix::zeros(k, k);
    for (theta, w) in points.iter().zip(weights) {
        let err = transformed_error(m, theta, est, f)?;
        let q = apply_escort(&m.eval(theta)?, f)?;
        total += weighted_moments(q.as_slice(), err.values()).1 * *w;
    }
    Ok(total)
}

type Potential = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A model whose escort family is exponential:
/// `log F(p_θ)(x) = c(x) + Σ_i θ_i h_i(x) − ψ(θ)`.
#[derive(Clone)]
pub struct ExponentialEscortModel {
    base: ParametricModel,
    statistics: DMatrix<f64>,
    carrier: Vec<f64>,
    potential: Arc<Potential>,
    escort: EscortMap,
}

impl fmt::Debug for ExponentialEscortModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ExponentialEscortModel({} under {})", self.base.name(), self.escort.name())
    }
}

impl ExponentialEscortModel {
    pub fn new<P>(
        base: ParametricModel,
        statistics: DMatrix<f64>,
        carrier: Vec<f64>,
        potential: P,
        escort: EscortMap,
    ) -> Result<Self>
    where
        P: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if statistics.shape() != (base.alphabet_size(), base.dim()) || carrier.len() != base.alphabet_size() {
            return Err(Error::DimensionMismatch {
                expected: base.alphabet_size(),
                got: statistics.nrows(),
            });
        }
        Ok(Self {
            base,
            statistics,
            carrier,
            potential: Arc::new(potential),
            escort,
        })
    }

    /// The logit-linear family with statistic table `h` and its α-escort
    /// (α = 1: the family itself). The escort is again logit-linear with
    /// statistics `αh`, zero carrier and `ψ(θ) = log Σ_x exp(α θ·h(x))`.
    pub fn logit_linear(h: DMatrix<f64>, lower: Vec<f64>, upper: Vec<f64>, alpha: f64) -> Result<Self> {
        let base = ParametricModel::logit_linear(h.clone(), lower, upper)?;
        let escort = EscortMap::for_order(alpha)?;
        let stats = &h * alpha;
        let s = stats.clone();
        let potential = move |theta: &[f64]| {
            let logits: Vec<f64> = (0..s.nrows())
                .map(|x| (0..s.ncols()).map(|i| theta[i] * s[(x, i)]).sum())
                .collect();
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
        };
        let d = h.nrows();
        Self::new(base, stats, vec![0.0; d], potential, escort)
    }

    pub fn base(&self) -> &ParametricModel {
        &self.base
    }

    pub fn escort(&self) -> &EscortMap {
        &self.escort
    }

    pub fn potential(&self, theta: &[f64]) -> f64 {
        (self.potential)(theta)
    }

    /// `η_i(θ) = E_{θ^(F)}[h_i]`.
    pub fn dual_coordinates(&self, theta: &[f64]) -> Result<DVector<f64>> {
        let q = apply_escort(&self.base.eval(theta)?, &self.escort)?;
        Ok(weighted_moments(q.as_slice(), &self.statistics).0)
    }

    /// `max_x |log F(p_θ)(x) − c(x) − θ·h(x) + ψ(θ)|`.
    pub fn invariant_gap(&self, theta: &[f64]) -> Result<f64> {
        let q = apply_escort(&self.base.eval(theta)?, &self.escort)?;
        let psi = self.potential(theta);
        Ok((0..q.len())
            .map(|x| {
                let lin: f64 = (0..theta.len()).map(|i| theta[i] * self.statistics[(x, i)]).sum();
                (q[x].ln() - self.carrier[x] - lin + psi).abs()
            })
            .fold(0.0, f64::max))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualCoordinatesReport {
    /// `max |log F(p_θ) − (c + θ·h − ψ)|`.
    pub invariant_gap: f64,
    /// `max |∂_i ψ − η_i|`.
    pub potential_gap: f64,
    /// `max |∂_i η_j − g_ij|`.
    pub dual_gap: f64,
    /// `max |Cov_{θ^(F)}[h] − g|`: `η̂ = h` attains the bound.
    pub efficiency_gap: f64,
    /// `max |g_ij + E_{θ^(F)}[∂_i ∂_j log F(p_θ)]|`.
    pub hessian_gap: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub const DUAL_COORDINATES_TOL: f64 = 1e-6;

/// Checks the dual-coordinate identities of an exponential escort model on
/// a grid, with derivatives by central differences.
pub fn dual_coordinates_check(em: &ExponentialEscortModel, grid: &[Vec<f64>]) -> Result<DualCoordinatesReport> {
    if grid.is_empty() {
        return Err(Error::Config("dual coordinates check needs a non-empty grid".into()));
    }
    let cfg = DiffConfig::default();
    let k = em.base.dim();
    let mut r = DualCoordinatesReport {
        invariant_gap: 0.0,
        potential_gap: 0.0,
        dual_gap: 0.0,
        efficiency_gap: 0.0,
        hessian_gap: 0.0,
        tolerance: DUAL_COORDINATES_TOL,
        passed: false,
    };
    for theta in grid {
        em.base.check_interior(theta, cfg.margin)?;
        let steps: Vec<f64> = theta.iter().map(|t| DiffConfig::step(cfg.h2, *t)).collect();
        r.invariant_gap = r.invariant_gap.max(em.invariant_gap(theta)?);

        let g = gen_metric(&em.base, theta, &ConvexGenerator::kl(), &em.escort)?;
        let g = g.entries();
        let eta = em.dual_coordinates(theta)?;
        let q = apply_escort(&em.base.eval(theta)?, &em.escort)?;
        let cov = weighted_moments(q.as_slice(), &em.statistics).1;
        r.efficiency_gap = r.efficiency_gap.max((&cov - g).amax());

        let psi = |z: &[f64]| Ok(em.potential(z));
        for i in 0..k {
            let dpsi = mixed_partial(&psi, theta, &[(i, 1)], &steps)?;
            r.potential_gap = r.potential_gap.max((dpsi - eta[i]).abs());
            for j in 0..k {
                let eta_j = |z: &[f64]| em.dual_coordinates(z).map(|e| e[j]);
                let deta = mixed_partial(&eta_j, theta, &[(i, 1)], &steps)?;
                r.dual_gap = r.dual_gap.max((deta - g[(i, j)]).abs());

                let orders: Vec<(usize, u32)> = if i == j { vec![(i, 2)] } else { vec![(i, 1), (j, 1)] };
                let mut expected_hessian = 0.0;
                for x in 0..q.len() {
                    let log_f = |z: &[f64]| -> Result<f64> {
                        Ok(apply_escort(&em.base.eval(z)?, &em.escort)?[x].ln())
                    };
                    expected_hessian += q[x] * mixed_partial(&log_f, theta, &orders, &steps)?;
                }
                r.hessian_gap = r.hessian_gap.max((g[(i, j)] + expected_hessian).abs());
            }
        }
    }
    r.passed = [r.invariant_gap, r.potential_gap, r.dual_gap, r.efficiency_gap, r.hessian_gap]
        .iter()
        .all(|gap| *gap <= DUAL_COORDINATES_TOL);
    Ok(r)
}

/// Smallest eigenvalue of a moment report's covariance; non-negative up to
/// rounding.
pub fn covariance_floor(report: &MomentReport) -> f64 {
    min_eigenvalue(&report.covariance)
}

/// Normalized grid weights `ω_n ∝ w_n λ(θ_n)`; exactly `1/N` for uniform
/// priors.
pub fn prior_weights(prior: &PriorDensity, points: &[Vec<f64>], cell_weights: &[f64]) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::Config("prior weights need a non-empty grid".into()));
    }
    if prior.is_uniform() && cell_weights.windows(2).all(|w| w[0] == w[1]) {
        return Ok(vec![1.0 / points.len() as f64; points.len()]);
    }
    let raw: Vec<f64> = points
        .iter()
        .zip(cell_weights)
        .map(|(t, w)| Ok(w * prior.density(t)?))
        .collect::<Result<_>>()?;
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|r| r / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indicator_attains_inverse_fisher() {
        let m = ParametricModel::categorical(3).unwrap();
        let t = [0.2, 0.5];
        let r = exact_moments(&m, &t, &EstimatorTable::indicator(3).unwrap(), &Weighting::Plain).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[0.16, -0.1, -0.1, 0.25]);
        assert!((&r.covariance - want).amax() < 1e-12);
        assert!((r.mean[0] - 0.2).abs() < 1e-15 && (r.mean[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_estimator_has_zero_covariance() {
        let m = ParametricModel::binomial(3).unwrap();
        let est = EstimatorTable::constant(4, &[0.7]).unwrap();
        let r = exact_moments(&m, &[0.4], &est, &Weighting::Plain).unwrap();
        assert_eq!(r.covariance[(0, 0)], 0.0);
    }

    #[test]
    fn escort_transform_round_trip() {
        let m = ParametricModel::bernoulli();
        let est = EstimatorTable::sample_mean(1);
        let f = EscortMap::alpha(2.0).unwrap();
        let to = escort_estimator(&m, &[0.2], &est, &f, EscortDirection::ToEscort).unwrap();
        assert!((to.values()[(1, 0)] - 3.4).abs() < 1e-14);
        let back = escort_estimator(&m, &[0.2], &to, &f, EscortDirection::FromEscort).unwrap();
        assert!((back.values() - est.values()).amax() < 1e-14);
        let same = escort_estimator(&m, &[0.2], &est, &EscortMap::Identity, EscortDirection::ToEscort).unwrap();
        assert_eq!(same.values(), est.values());
    }

    #[test]
    fn unbiasedness() {
        let m = ParametricModel::bernoulli();
        let grid: Vec<Vec<f64>> = (1..10).map(|i| vec![i as f64 / 10.0]).collect();
        let ok = unbiasedness_check(&m, &EstimatorTable::sample_mean(1), &grid, &Weighting::Plain).unwrap();
        assert!(ok.passed);
        let zero = EstimatorTable::constant(2, &[0.0]).unwrap();
        let bad = unbiasedness_check(&m, &zero, &grid, &Weighting::Plain).unwrap();
        assert!(!bad.passed);
        assert!((bad.max_deviation - 0.9).abs() < 1e-15);
        let f = EscortMap::alpha(2.0).unwrap();
        let esc = unbiasedness_check(&m, &EstimatorTable::sample_mean(1), &grid, &Weighting::EscortTransformed(f))
            .unwrap();
        assert!(esc.passed);
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let m = ParametricModel::bernoulli();
        let est = EstimatorTable::sample_mean(1);
        let a = monte_carlo_moments(&m, &[0.3], &est, 1000, 7).unwrap();
        let b = monte_carlo_moments(&m, &[0.3], &est, 1000, 7).unwrap();
        assert_eq!(a, b);
        let one = monte_carlo_moments(&m, &[0.3], &est, 1, 7).unwrap();
        assert_eq!(one.covariance[(0, 0)], 0.0);
    }

    #[test]
    fn sigmoid_dual_coordinates() {
        let h = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let em = ExponentialEscortModel::logit_linear(h, vec![-5.0], vec![5.0], 1.0).unwrap();
        let eta = em.dual_coordinates(&[0.0]).unwrap();
        assert!((eta[0] - 0.5).abs() < 1e-15);
        let r = dual_coordinates_check(&em, &[vec![0.0], vec![1.3]]).unwrap();
        assert!(r.passed, "{r:?}");
    }
}
