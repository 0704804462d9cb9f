//! Parametric families `θ ↦ p_θ` on a finite alphabet.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{escort, mixed_partial, Alphabet, DiffConfig, ProbVector};
use crate::error::{Error, Result};

type EvalFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type PartialsFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

/// The family behind a [`ParametricModel`].
#[derive(Clone)]
pub enum Family {
    /// `p_θ = (1−θ, θ)`.
    Bernoulli,
    /// Number of successes in `n` Bernoulli(θ) trials.
    Binomial { n: u32 },
    /// All of the simplex, charted by the first `d−1` cell probabilities.
    Categorical { d: usize },
    /// `p_θ(x) ∝ exp(Σ_i θ_i h_i(x))` with a d×k statistic table `h`.
    LogitLinear { statistics: DMatrix<f64> },
    /// User supplied evaluation with optional analytic partials.
    Custom {
        eval: Arc<EvalFn>,
        partials: Option<Arc<PartialsFn>>,
    },
}

impl fmt::Debug for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Bernoulli => write!(f, "Bernoulli"),
            Self::Binomial { n } => write!(f, "Binomial({n})"),
            Self::Categorical { d } => write!(f, "Categorical({d})"),
            Self::LogitLinear { statistics } => write!(f, "LogitLinear({statistics:?})"),
            Self::Custom { partials, .. } => {
                write!(f, "Custom(analytic partials: {})", partials.is_some())
            }
        }
    }
}

/// A k-parameter family on an open axis-aligned box Θ ⊂ ℝ^k.
#[derive(Debug, Clone)]
pub struct ParametricModel {
    name: String,
    alphabet: Alphabet,
    lower: Vec<f64>,
    upper: Vec<f64>,
    family: Family,
}

impl ParametricModel {
    pub fn bernoulli() -> Self {
        Self {
            name: "bernoulli".into(),
            alphabet: Alphabet::indexed(2).expect("two symbols"),
            lower: vec![0.0],
            upper: vec![1.0],
            family: Family::Bernoulli,
        }
    }

    pub fn binomial(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("binomial needs at least one trial".into()));
        }
        Ok(Self {
            name: format!("binomial({n})"),
            alphabet: Alphabet::indexed(n as usize + 1)?,
            lower: vec![0.0],
            upper: vec![1.0],
            family: Family::Binomial { n },
        })
    }

    /// The full simplex on `d` symbols with θ = first `d−1` probabilities.
    pub fn categorical(d: usize) -> Result<Self> {
        Ok(Self {
            name: format!("categorical({d})"),
            alphabet: Alphabet::indexed(d)?,
            lower: vec![0.0; d.saturating_sub(1)],
            upper: vec![1.0; d.saturating_sub(1)],
            family: Family::Categorical { d },
        })
    }

    pub fn logit_linear(statistics: DMatrix<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let (d, k) = statistics.shape();
        if k == 0 {
            return Err(Error::Domain("logit-linear family needs at least one statistic".into()));
        }
        if statistics.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("statistic table has non-finite entries".into()));
        }
        check_box(&lower, &upper, k)?;
        Ok(Self {
            name: format!("logit_linear({d}x{k})"),
            alphabet: Alphabet::indexed(d)?,
            lower,
            upper,
            family: Family::LogitLinear { statistics },
        })
    }

    pub fn custom<E>(
        name: impl Into<String>,
        alphabet: Alphabet,
        lower: Vec<f64>,
        upper: Vec<f64>,
        eval: E,
        partials: Option<Arc<PartialsFn>>,
    ) -> Result<Self>
    where
        E: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        let k = lower.len();
        check_box(&lower, &upper, k)?;
        Ok(Self {
            name: name.into(),
            alphabet,
            lower,
            upper,
            family: Family::Custom {
                eval: Arc::new(eval),
                partials,
            },
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet.size()
    }

    /// Number of parameters k.
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// The box Θ as `(lower, upper)`.
    pub fn domain(&self) -> (&[f64], &[f64]) {
        (&self.lower, &self.upper)
    }

    pub fn has_analytic_partials(&self) -> bool {
        !matches!(self.family, Family::Custom { partials: None, .. })
    }

    fn describe_domain(&self) -> String {
        let faces: Vec<String> = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| format!("({l}, {u})"))
            .collect();
        let mut s = format!("Θ = {}", faces.join(" × "));
        if let Family::Categorical { .. } = self.family {
            s.push_str(" with Σθ < 1");
        }
        s
    }

    /// Checks that θ is strictly inside Θ.
    pub fn check_point(&self, theta: &[f64]) -> Result<()> {
        self.check_interior(theta, 0.0)
    }

    /// Checks that θ is at least `margin·max(1, |θ_i|)` away from every face.
    pub fn check_interior(&self, theta: &[f64], margin: f64) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: theta.len(),
            });
        }
        for (i, &t) in theta.iter().enumerate() {
            let m = DiffConfig::step(margin, t);
            let inside = t.is_finite() && t - m > self.lower[i] && t + m < self.upper[i];
            if !inside {
                return Err(Error::Domain(format!(
                    "θ_{} = {t} is outside {} of {} (boundary margin {margin})",
                    i + 1,
                    self.describe_domain(),
                    self.name
                )));
            }
        }
        if let Family::Categorical { .. } = self.family {
            let slack = 1.0 - theta.iter().sum::<f64>();
            if slack <= 3.0 * margin || slack <= 0.0 {
                return Err(Error::Domain(format!(
                    "θ = {theta:?} leaves last-cell probability {slack}, outside {} of {} (boundary margin {margin})",
                    self.describe_domain(),
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// `p_θ`.
    pub fn eval(&self, theta: &[f64]) -> Result<ProbVector> {
        self.check_point(theta)?;
        let weights = match &self.family {
            Family::Bernoulli => vec![1.0 - theta[0], theta[0]],
            Family::Binomial { n } => binomial_pmf(*n, theta[0]),
            Family::Categorical { .. } => {
                let mut w = theta.to_vec();
                w.push(1.0 - theta.iter().sum::<f64>());
                w
            }
            Family::LogitLinear { statistics } => {
                return ProbVector::from_unnormalized(logit_linear_weights(statistics, theta));
            }
            Family::Custom { eval, .. } => {
                let w = eval(theta);
                if w.len() != self.alphabet_size() {
                    return Err(Error::DimensionMismatch {
                        expected: self.alphabet_size(),
                        got: w.len(),
                    });
                }
                w
            }
        };
        ProbVector::new(weights)
    }

    /// Analytic `∂_i p_θ(x)` as a d×k matrix, when the family provides them.
    pub fn analytic_partials(&self, theta: &[f64]) -> Result<Option<DMatrix<f64>>> {
        let p = self.eval(theta)?;
        let d = self.alphabet_size();
        let k = self.dim();
        let m = match &self.family {
            Family::Bernoulli => DMatrix::from_column_slice(2, 1, &[-1.0, 1.0]),
            Family::Binomial { n } => {
                let t = theta[0];
                let n = *n as f64;
                DMatrix::from_fn(d, 1, |x, _| {
                    let x = x as f64;
                    p[x as usize] * (x / t - (n - x) / (1.0 - t))
                })
            }
            Family::Categorical { .. } => DMatrix::from_fn(d, k, |x, i| {
                if x == d - 1 {
                    -1.0
                } else if x == i {
                    1.0
                } else {
                    0.0
                }
            }),
            Family::LogitLinear { statistics } => {
                let mean: Vec<f64> = (0..k)
                    .map(|i| (0..d).map(|x| p[x] * statistics[(x, i)]).sum())
                    .collect();
                DMatrix::from_fn(d, k, |x, i| p[x] * (statistics[(x, i)] - mean[i]))
            }
            Family::Custom { partials, .. } => match partials {
                Some(f) => {
                    let m = f(theta);
                    if m.shape() != (d, k) {
                        return Err(Error::DimensionMismatch {
                            expected: d * k,
                            got: m.len(),
                        });
                    }
                    m
                }
                None => return Ok(None),
            },
        };
        Ok(Some(m))
    }
}

fn check_box(lower: &[f64], upper: &[f64], k: usize) -> Result<()> {
    if lower.len() != k || upper.len() != k || k == 0 {
        return Err(Error::Domain(format!(
            "parameter box needs {k} > 0 lower and upper bounds, got {} and {}",
            lower.len(),
            upper.len()
        )));
    }
    if lower.iter().zip(upper).any(|(l, u)| !(l < u)) {
        return Err(Error::Domain(format!(
            "parameter box is empty: lower {lower:?}, upper {upper:?}"
        )));
    }
    Ok(())
}

fn binomial_pmf(n: u32, t: f64) -> Vec<f64> {
    let mut coef = 1.0;
    (0..=n)
        .map(|x| {
            if x > 0 {
                coef *= (n - x + 1) as f64 / x as f64;
            }
            coef * t.powi(x as i32) * (1.0 - t).powi((n - x) as i32)
        })
        .collect()
}

fn logit_linear_weights(statistics: &DMatrix<f64>, theta: &[f64]) -> Vec<f64> {
    let (d, k) = statistics.shape();
    let logits: Vec<f64> = (0..d)
        .map(|x| (0..k).map(|i| theta[i] * statistics[(x, i)]).sum())
        .collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    logits.into_iter().map(|l| (l - max).exp()).collect()
}

/// `∂_i p_θ(x)` as a d×k matrix: analytic when available, otherwise central
/// differences with step `h2·max(1, |θ_i|)`.
///
/// The boundary margin is only enforced on the finite-difference path.
pub fn model_partials(model: &ParametricModel, theta: &[f64], cfg: &DiffConfig) -> Result<DMatrix<f64>> {
    if let Some(m) = model.analytic_partials(theta)? {
        return Ok(m);
    }
    cfg.validate()?;
    model.check_interior(theta, cfg.margin)?;
    fd_partials(model, theta, cfg)
}

fn partials_within_margin(model: &ParametricModel, theta: &[f64], cfg: &DiffConfig) -> Result<DMatrix<f64>> {
    match model.analytic_partials(theta)? {
        Some(m) => Ok(m),
        None => fd_partials(model, theta, cfg),
    }
}

fn fd_partials(model: &ParametricModel, theta: &[f64], cfg: &DiffConfig) -> Result<DMatrix<f64>> {
    let (d, k) = (model.alphabet_size(), model.dim());
    let mut out = DMatrix::zeros(d, k);
    for i in 0..k {
        let h = DiffConfig::step(cfg.h2, theta[i]);
        for x in 0..d {
            let f = |z: &[f64]| model.eval(z).map(|p| p[x]);
            out[(x, i)] = cfg.extrapolate(h, |h| {
                let mut steps = vec![0.0; k];
                steps[i] = h;
                mixed_partial(&f, theta, &[(i, 1)], &steps)
            })?;
        }
    }
    Ok(out)
}

/// `∂_i ∂_j p_θ(x)`: entry `i` of the result is the d×k matrix of `∂_i ∂_j p`.
/// Always numerical (central differences of [`model_partials`]).
pub fn model_second_partials(
    model: &ParametricModel,
    theta: &[f64],
    cfg: &DiffConfig,
) -> Result<Vec<DMatrix<f64>>> {
    cfg.validate()?;
    model.check_interior(theta, cfg.margin)?;
    (0..model.dim())
        .map(|i| {
            let h = DiffConfig::step(cfg.h2, theta[i]);
            let mut plus = theta.to_vec();
            let mut minus = theta.to_vec();
            plus[i] += h;
            minus[i] -= h;
            let up = partials_within_margin(model, &plus, cfg)?;
            let down = partials_within_margin(model, &minus, cfg)?;
            Ok((up - down) / (2.0 * h))
        })
        .collect()
}

/// Score matrix `∂_i log p_θ(x)` (d×k).
pub fn score(model: &ParametricModel, theta: &[f64], cfg: &DiffConfig) -> Result<DMatrix<f64>> {
    let p = model.eval(theta)?;
    let dp = model_partials(model, theta, cfg)?;
    Ok(DMatrix::from_fn(dp.nrows(), dp.ncols(), |x, i| dp[(x, i)] / p[x]))
}

/// The α-representation of `∂_i` at `p_θ`:
/// `x ↦ (p^(α)(x)/p(x))·(∂_i log p_θ(x) − E_{θ^(α)}[∂_i log p_θ])`.
///
/// Its expectation under `p_θ` is zero. α = 1 is refused; the plain score is
/// the representation there.
pub fn alpha_representation(
    model: &ParametricModel,
    theta: &[f64],
    i: usize,
    alpha: f64,
    cfg: &DiffConfig,
) -> Result<Vec<f64>> {
    if alpha == 1.0 {
        return Err(Error::AlphaOne {
            operation: "alpha_representation",
            use_instead: "score (∂_i log p_θ)",
        });
    }
    if i >= model.dim() {
        return Err(Error::Domain(format!(
            "parameter index {i} out of range for a {}-parameter model",
            model.dim()
        )));
    }
    let p = model.eval(theta)?;
    let q = escort(&p, alpha)?;
    let s = score(model, theta, cfg)?;
    let d = p.len();
    let mean: f64 = (0..d).map(|x| q[x] * s[(x, i)]).sum();
    Ok((0..d).map(|x| q[x] / p[x] * (s[(x, i)] - mean)).collect())
}
