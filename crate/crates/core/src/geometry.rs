//! Metrics and connections induced by divergences.
//!
//! A smooth divergence `D(p_θ, p_θ′)` induces a metric
//! `g_ij = −∂_i ∂′_j D`, a connection `Γ_ij,k = −∂_i ∂_j ∂′_k D` and its dual
//! `Γ*_ij,k = −∂_k ∂′_i ∂′_j D`, all evaluated at `θ′ = θ`. The `eguchi_*`
//! functions extract these by finite differences from any
//! [`DivergenceHandle`]; the remaining functions give the closed forms the
//! extraction is checked against.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::divergence::{
    bayesian_i_alpha, bayesian_kl_on_model, generalized_f, i_alpha, kl, BayesianAlphaForm,
    ConvexGenerator, PriorDensity,
};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_jitter, symmetrize, weighted_moments};
use crate::manifold::{
    escort, escort_partials, mixed_partial, model_partials, model_second_partials, DiffConfig,
    DiffScheme, EscortMap, ParametricModel,
};

/// Relative asymmetry above which a metric's provenance carries a warning.
const ASYMMETRY_WARNING: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricSource {
    EguchiFd,
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub source: MetricSource,
    pub divergence: String,
    /// Relative asymmetry of the raw matrix before symmetrization.
    pub asymmetry: f64,
    /// Diagonal shift needed for the Cholesky factorization to succeed.
    pub jitter: f64,
    pub warning: Option<String>,
}

/// A symmetric positive definite k×k metric at a point θ.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricMatrix {
    entries: DMatrix<f64>,
    theta: Vec<f64>,
    provenance: Provenance,
}

impl MetricMatrix {
    /// Symmetrizes `raw` and checks positive definiteness, allowing one
    /// jitter retry of `1e-10·trace`. The stored entries are the symmetrized
    /// matrix without jitter.
    pub fn new(
        raw: DMatrix<f64>,
        theta: &[f64],
        source: MetricSource,
        divergence: impl Into<String>,
    ) -> Result<Self> {
        if !raw.is_square() {
            return Err(Error::DimensionMismatch {
                expected: raw.nrows(),
                got: raw.ncols(),
            });
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::ExtractionFailure {
                reason: "non-finite entries".into(),
                matrix: raw,
            });
        }
        let (entries, asymmetry) = symmetrize(&raw);
        let Some((_, jitter)) = cholesky_with_jitter(&entries) else {
            return Err(Error::ExtractionFailure {
                reason: "matrix is not positive definite".into(),
                matrix: raw,
            });
        };
        let warning = (asymmetry > ASYMMETRY_WARNING)
            .then(|| format!("raw matrix asymmetric by {asymmetry:.3e} (relative)"));
        Ok(Self {
            entries,
            theta: theta.to_vec(),
            provenance: Provenance {
                source,
                divergence: divergence.into(),
                asymmetry,
                jitter,
                warning,
            },
        })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Solves `G x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.solve_matrix(&DMatrix::from_column_slice(b.len(), 1, b.as_slice()))
            .map(|m| m.column(0).into_owned())
    }

    /// Solves `G X = B`.
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if b.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: b.nrows(),
            });
        }
        let (chol, _) = cholesky_with_jitter(&self.entries)
            .ok_or_else(|| Error::Singular(format!("metric {}", self.entries)))?;
        Ok(chol.solve(b))
    }

    /// `G⁻¹`, obtained by solving against the identity.
    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        let k = self.dim();
        Ok(symmetrize(&self.solve_matrix(&DMatrix::identity(k, k))?).0)
    }

    /// Relative Frobenius distance `‖A − B‖ / ‖B‖`.
    pub fn relative_distance(&self, reference: &MetricMatrix) -> f64 {
        (&self.entries - &reference.entries).norm() / reference.entries.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConnectionKind {
    Primal,
    Dual,
}

/// Connection coefficients `Γ_ij,k` at θ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConnectionTensor {
    coeffs: Vec<f64>,
    k: usize,
    theta: Vec<f64>,
    kind: ConnectionKind,
}

impl ConnectionTensor {
    fn from_fn(k: usize, theta: &[f64], kind: ConnectionKind, mut f: impl FnMut(usize, usize, usize) -> Result<f64>) -> Result<Self> {
        let mut coeffs = Vec::with_capacity(k * k * k);
        for i in 0..k {
            for j in 0..k {
                for l in 0..k {
                    coeffs.push(f(i, j, l)?);
                }
            }
        }
        Ok(Self {
            coeffs,
            k,
            theta: theta.to_vec(),
            kind,
        })
    }

    /// `Γ_ij,k`.
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.coeffs[(i * self.k + j) * self.k + k]
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn kind(&self) -> ConnectionKind {
        self.kind
    }

    /// `max |Γ_ij,k − Γ_ji,k|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.k {
            for j in 0..self.k {
                for l in 0..self.k {
                    worst = worst.max((self.get(i, j, l) - self.get(j, i, l)).abs());
                }
            }
        }
        worst
    }

    /// `max |Γ_ij,k − other_ij,k|`.
    pub fn max_abs_difference(&self, other: &ConnectionTensor) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

type Evaluator = dyn Fn(&ParametricModel, &[f64], &[f64]) -> Result<f64> + Send + Sync;

/// What a [`DivergenceHandle`] evaluates, for reporting.
#[derive(Debug, Clone)]
pub enum DivergenceKind {
    Kl,
    IAlpha(f64),
    GeneralizedF { f: ConvexGenerator, escort: EscortMap },
    BayesianKl(PriorDensity),
    BayesianIAlpha {
        prior: PriorDensity,
        alpha: f64,
        form: BayesianAlphaForm,
    },
    Custom,
}

/// A divergence `(θ, θ′) ↦ D(p_θ, p_θ′)` on a parametric model.
#[derive(Clone)]
pub struct DivergenceHandle {
    name: String,
    kind: DivergenceKind,
    eval: Arc<Evaluator>,
}

impl fmt::Debug for DivergenceHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DivergenceHandle({})", self.name)
    }
}

impl DivergenceHandle {
    pub fn kl() -> Self {
        Self {
            name: "kl".into(),
            kind: DivergenceKind::Kl,
            eval: Arc::new(|m, a, b| kl(&m.eval(a)?, &m.eval(b)?)),
        }
    }

    pub fn i_alpha(alpha: f64) -> Result<Self> {
        // Surface the α checks at construction time.
        let probe = crate::manifold::ProbVector::uniform(2)?;
        i_alpha(&probe, &probe, alpha)?;
        Ok(Self {
            name: format!("i_alpha({alpha})"),
            kind: DivergenceKind::IAlpha(alpha),
            eval: Arc::new(move |m, a, b| i_alpha(&m.eval(a)?, &m.eval(b)?, alpha)),
        })
    }

    pub fn generalized_f(f: ConvexGenerator, escort: EscortMap) -> Self {
        let name = format!("generalized_f({}, {})", f.name(), escort.name());
        let (ff, ee) = (f.clone(), escort.clone());
        Self {
            name,
            kind: DivergenceKind::GeneralizedF { f, escort },
            eval: Arc::new(move |m, a, b| generalized_f(&m.eval(a)?, &m.eval(b)?, &ff, &ee)),
        }
    }

    pub fn bayesian_kl(prior: PriorDensity) -> Self {
        let p = prior.clone();
        Self {
            name: format!("bayesian_kl({})", prior.name()),
            kind: DivergenceKind::BayesianKl(prior),
            eval: Arc::new(move |m, a, b| bayesian_kl_on_model(m, &p, a, b)),
        }
    }

    pub fn bayesian_i_alpha(prior: PriorDensity, alpha: f64, form: BayesianAlphaForm) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Domain(format!("α must be positive, got {alpha}")));
        }
        if alpha == 1.0 {
            return Err(Error::AlphaOne {
                operation: "DivergenceHandle::bayesian_i_alpha",
                use_instead: "DivergenceHandle::bayesian_kl",
            });
        }
        let p = prior.clone();
        Ok(Self {
            name: format!("bayesian_i_alpha({}, {alpha})", prior.name()),
            kind: DivergenceKind::BayesianIAlpha { prior, alpha, form },
            eval: Arc::new(move |m, a, b| bayesian_i_alpha(m, &p, a, b, alpha, form)),
        })
    }

    pub fn custom<F>(name: impl Into<String>, eval: F) -> Self
    where
        F: Fn(&ParametricModel, &[f64], &[f64]) -> Result<f64> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            kind: DivergenceKind::Custom,
            eval: Arc::new(eval),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &DivergenceKind {
        &self.kind
    }

    pub fn eval(&self, model: &ParametricModel, theta: &[f64], theta_prime: &[f64]) -> Result<f64> {
        (self.eval)(model, theta, theta_prime)
    }

    /// Checks `D(θ, θ) = 0` within 1e-12.
    pub fn check_diagonal(&self, model: &ParametricModel, theta: &[f64]) -> Result<()> {
        let v = self.eval(model, theta, theta)?;
        if v.abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "divergence {} is {v} at θ = θ′ = {theta:?}, expected 0",
                self.name
            )));
        }
        Ok(())
    }
}

/// Evaluates the divergence on the stacked point `z = (θ, θ′)`.
fn stacked<'a>(d: &'a DivergenceHandle, m: &'a ParametricModel) -> impl Fn(&[f64]) -> Result<f64> + 'a {
    let k = m.dim();
    move |z: &[f64]| d.eval(m, &z[..k], &z[k..])
}

fn stacked_steps(theta: &[f64], h: f64) -> Vec<f64> {
    theta
        .iter()
        .chain(theta)
        .map(|t| DiffConfig::step(h, *t))
        .collect()
}

fn scaled(steps: &[f64], factor: f64) -> Vec<f64> {
    steps.iter().map(|s| s * factor).collect()
}

/// Mixed partial on the stacked point with the configured scheme. `orders`
/// refer to stacked coordinates (θ′_j is coordinate `k + j`).
fn stacked_partial(
    d: &DivergenceHandle,
    m: &ParametricModel,
    theta: &[f64],
    orders: &[(usize, u32)],
    h: f64,
    cfg: &DiffConfig,
) -> Result<f64> {
    let f = stacked(d, m);
    let z: Vec<f64> = theta.iter().chain(theta).copied().collect();
    let base = stacked_steps(theta, h);
    cfg.extrapolate(h, |hh| mixed_partial(&f, &z, orders, &scaled(&base, hh / h)))
}

fn merge(orders: &[(usize, u32)]) -> Vec<(usize, u32)> {
    let mut out: Vec<(usize, u32)> = Vec::new();
    for &(c, o) in orders {
        match out.iter_mut().find(|(c2, _)| *c2 == c) {
            Some(e) => e.1 += o,
            None => out.push((c, o)),
        }
    }
    out
}

/// `g_ij = −∂_i ∂′_j D` at `θ′ = θ` by central differences.
pub fn eguchi_metric(
    d: &DivergenceHandle,
    m: &ParametricModel,
    theta: &[f64],
    cfg: &DiffConfig,
) -> Result<MetricMatrix> {
    cfg.validate()?;
    m.check_interior(theta, cfg.margin)?;
    let k = m.dim();
    let mut raw = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            raw[(i, j)] = -stacked_partial(d, m, theta, &[(i, 1), (k + j, 1)], cfg.h2, cfg)?;
        }
    }
    MetricMatrix::new(raw, theta, MetricSource::EguchiFd, d.name())
}

/// The primal and dual connections of `d` at θ by third-order central
/// differences with step `h3`.
pub fn eguchi_connections(
    d: &DivergenceHandle,
    m: &ParametricModel,
    theta: &[f64],
    cfg: &DiffConfig,
) -> Result<(ConnectionTensor, ConnectionTensor)> {
    cfg.validate()?;
    m.check_interior(theta, cfg.margin)?;
    let k = m.dim();
    let primal = ConnectionTensor::from_fn(k, theta, ConnectionKind::Primal, |i, j, l| {
        let orders = merge(&[(i, 1), (j, 1), (k + l, 1)]);
        Ok(-stacked_partial(d, m, theta, &orders, cfg.h3, cfg)?)
    })?;
    // Γ*_ij,k = −∂_k ∂′_i ∂′_j D
    let dual = ConnectionTensor::from_fn(k, theta, ConnectionKind::Dual, |i, j, l| {
        let orders = merge(&[(l, 1), (k + i, 1), (k + j, 1)]);
        Ok(-stacked_partial(d, m, theta, &orders, cfg.h3, cfg)?)
    })?;
    Ok((primal, dual))
}

/// `∂_k g_ij − Γ_ki,j − Γ*_kj,i`, indexed `[k][i][j]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityResidual {
    pub residual: Vec<f64>,
    pub dim: usize,
    pub max_abs: f64,
}

/// Residual of the duality identity `∂_k g_ij = Γ_ki,j + Γ*_kj,i`, with
/// `∂_k g` by central differences of [`eguchi_metric`] at step `h3`.
pub fn duality_residual(
    d: &DivergenceHandle,
    m: &ParametricModel,
    theta: &[f64],
    cfg: &DiffConfig,
) -> Result<DualityResidual> {
    let (primal, dual) = eguchi_connections(d, m, theta, cfg)?;
    let k = m.dim();
    let metric_slope = |l: usize, h: f64| -> Result<DMatrix<f64>> {
        let mut plus = theta.to_vec();
        let mut minus = theta.to_vec();
        plus[l] += h;
        minus[l] -= h;
        let up = eguchi_metric(d, m, &plus, cfg)?;
        let down = eguchi_metric(d, m, &minus, cfg)?;
        Ok((up.entries() - down.entries()) / (2.0 * h))
    };
    let mut dg = Vec::with_capacity(k);
    for l in 0..k {
        let h = DiffConfig::step(cfg.h3, theta[l]);
        dg.push(match cfg.scheme {
            DiffScheme::Central => metric_slope(l, h)?,
            DiffScheme::Richardson => (metric_slope(l, 0.5 * h)? * 4.0 - metric_slope(l, h)?) / 3.0,
        });
    }
    let mut residual = Vec::with_capacity(k * k * k);
    for l in 0..k {
        for i in 0..k {
            for j in 0..k {
                residual.push(dg[l][(i, j)] - primal.get(l, i, j) - dual.get(l, j, i));
            }
        }
    }
    let max_abs = residual.iter().fold(0.0_f64, |a, r| a.max(r.abs()));
    Ok(DualityResidual {
        residual,
        dim: k,
        max_abs,
    })
}

/// `Cov_w[v_i, v_j]` for the rows `v(x)` of a d×k matrix.
fn covariance(w: &[f64], values: &DMatrix<f64>) -> DMatrix<f64> {
    weighted_moments(w, values).1
}

fn log_partials(p: &[f64], dp: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(dp.nrows(), dp.ncols(), |x, i| dp[(x, i)] / p[x])
}

/// The Fisher metric `Cov_θ[∂_i log p_θ, ∂_j log p_θ]` by exact enumeration.
pub fn fisher_metric(m: &ParametricModel, theta: &[f64]) -> Result<MetricMatrix> {
    let p = m.eval(theta)?;
    let dp = model_partials(m, theta, &DiffConfig::default())?;
    let g = covariance(p.as_slice(), &log_partials(p.as_slice(), &dp));
    MetricMatrix::new(g, theta, MetricSource::Analytic, "kl")
}

/// The α-information metric `Cov_{θ^(α)}[∂_i log p_θ, ∂_j log p_θ]`.
///
/// Also evaluated as `(1/α²)·Cov_{θ^(α)}[∂ log p_θ^(α)]` through the escort
/// partials; the two must agree within 1e-8 relative.
pub fn alpha_metric(m: &ParametricModel, theta: &[f64], alpha: f64) -> Result<MetricMatrix> {
    if alpha == 1.0 {
        return Err(Error::AlphaOne {
            operation: "alpha_metric",
            use_instead: "fisher_metric",
        });
    }
    let cfg = DiffConfig::default();
    let p = m.eval(theta)?;
    let q = escort(&p, alpha)?;
    let dp = model_partials(m, theta, &cfg)?;
    let g = covariance(q.as_slice(), &log_partials(p.as_slice(), &dp));

    let (q2, dq) = escort_partials(m, theta, &EscortMap::alpha(alpha)?, &cfg)?;
    let g2 = covariance(q2.as_slice(), &log_partials(q2.as_slice(), &dq)) / (alpha * alpha);
    let gap = (&g - &g2).norm() / g.norm().max(f64::MIN_POSITIVE);
    if gap > 1e-8 {
        return Err(Error::ExtractionFailure {
            reason: format!("the two α-metric evaluations disagree by {gap:.3e} (relative)"),
            matrix: g,
        });
    }
    MetricMatrix::new(g, theta, MetricSource::Analytic, format!("i_alpha({alpha})"))
}

/// The generalized metric `Σ_x F(p_θ)·∂_i log F(p_θ)·∂_j log F(p_θ)`.
///
/// The metric of `D_f^{(F)}` does not depend on `f` because of the `1/f″(1)`
/// normalization; `f` only names the result.
pub fn gen_metric(
    m: &ParametricModel,
    theta: &[f64],
    f: &ConvexGenerator,
    escort_map: &EscortMap,
) -> Result<MetricMatrix> {
    let (q, dq) = escort_partials(m, theta, escort_map, &DiffConfig::default())?;
    let (d, k) = dq.shape();
    let g = DMatrix::from_fn(k, k, |i, j| (0..d).map(|x| dq[(x, i)] * dq[(x, j)] / q[x]).sum());
    MetricMatrix::new(
        g,
        theta,
        MetricSource::Analytic,
        format!("generalized_f({}, {})", f.name(), escort_map.name()),
    )
}

/// `λ(θ)·(G + J)` together with its parts.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesianMetric {
    pub total: MetricMatrix,
    /// Fisher metric (α = 1) or α-metric.
    pub g_part: MetricMatrix,
    /// `J_ij = ∂_i log λ·∂_j log λ`; rank at most one, so only PSD.
    pub j_part: DMatrix<f64>,
    pub lambda: f64,
}

/// `J_ij = ∂_i log λ(θ)·∂_j log λ(θ)`.
pub fn prior_information(prior: &PriorDensity, theta: &[f64]) -> Result<DMatrix<f64>> {
    let g = DVector::from_vec(prior.grad_log(theta)?);
    Ok(&g * g.transpose())
}

/// The metric of the Bayesian KL (α = 1) or Bayesian `I_α` divergence,
/// `λ(θ)·(G_part(θ) + J(θ))`.
pub fn bayesian_metric(
    m: &ParametricModel,
    prior: &PriorDensity,
    theta: &[f64],
    alpha: f64,
) -> Result<BayesianMetric> {
    if prior.dim() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            got: prior.dim(),
        });
    }
    let lambda = prior.density(theta)?;
    let g_part = if alpha == 1.0 {
        fisher_metric(m, theta)?
    } else {
        alpha_metric(m, theta, alpha)?
    };
    let j_part = prior_information(prior, theta)?;
    let total = MetricMatrix::new(
        (g_part.entries() + &j_part) * lambda,
        theta,
        MetricSource::Analytic,
        if alpha == 1.0 {
            format!("bayesian_kl({})", prior.name())
        } else {
            format!("bayesian_i_alpha({}, {alpha})", prior.name())
        },
    )?;
    Ok(BayesianMetric {
        total,
        g_part,
        j_part,
        lambda,
    })
}

/// `‖(dE[A])_θ‖² = ∇fᵀ G⁻¹ ∇f` for `f(θ) = E_θ[A]`, with
/// `∂_i f = Σ_x A(x) ∂_i p_θ(x)`.
pub fn norm_of_differential(
    m: &ParametricModel,
    theta: &[f64],
    a: &[f64],
    g: &MetricMatrix,
) -> Result<f64> {
    if a.len() != m.alphabet_size() {
        return Err(Error::DimensionMismatch {
            expected: m.alphabet_size(),
            got: a.len(),
        });
    }
    if g.dim() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            got: g.dim(),
        });
    }
    let dp = model_partials(m, theta, &DiffConfig::default())?;
    let grad = DVector::from_fn(m.dim(), |i, _| (0..a.len()).map(|x| a[x] * dp[(x, i)]).sum());
    Ok(grad.dot(&g.solve(&grad)?))
}

/// `Var_{p^(α)}[(p/p^(α))(A − E_p A)]`, the variance side of the
/// norm-of-differential identity. α = 1 gives `Var_p[A]`.
pub fn escort_weighted_variance(p: &[f64], a: &[f64], alpha: f64) -> Result<f64> {
    let pv = crate::manifold::ProbVector::new(p.to_vec())?;
    let q = escort(&pv, alpha)?;
    let mean = pv.expect(a);
    let values = DMatrix::from_fn(p.len(), 1, |x, _| p[x] / q[x] * (a[x] - mean));
    Ok(covariance(q.as_slice(), &values)[(0, 0)])
}

fn second_log_partials(p: &[f64], dp: &DMatrix<f64>, d2p: &[DMatrix<f64>], x: usize, i: usize, j: usize) -> f64 {
    d2p[i][(x, j)] / p[x] - dp[(x, i)] * dp[(x, j)] / (p[x] * p[x])
}

/// The mixture connection `Γ^(m)_ij,k = Σ_x ∂_i∂_j p·∂_k log p`, the primal
/// connection of KL. Second partials are numerical.
pub fn m_connection(m: &ParametricModel, theta: &[f64], cfg: &DiffConfig) -> Result<ConnectionTensor> {
    let p = m.eval(theta)?;
    let dp = model_partials(m, theta, cfg)?;
    let d2p = model_second_partials(m, theta, cfg)?;
    let d = p.len();
    ConnectionTensor::from_fn(m.dim(), theta, ConnectionKind::Primal, |i, j, l| {
        Ok((0..d).map(|x| d2p[i][(x, j)] * dp[(x, l)] / p[x]).sum())
    })
}

/// The exponential connection `Γ^(e)_ij,k = Σ_x ∂_k p·∂_i∂_j log p`, the dual
/// connection of KL.
pub fn e_connection(m: &ParametricModel, theta: &[f64], cfg: &DiffConfig) -> Result<ConnectionTensor> {
    let p = m.eval(theta)?;
    let dp = model_partials(m, theta, cfg)?;
    let d2p = model_second_partials(m, theta, cfg)?;
    let d = p.len();
    ConnectionTensor::from_fn(m.dim(), theta, ConnectionKind::Dual, |i, j, l| {
        Ok((0..d)
            .map(|x| dp[(x, l)] * second_log_partials(p.as_slice(), &dp, &d2p, x, i, j))
            .sum())
    })
}
