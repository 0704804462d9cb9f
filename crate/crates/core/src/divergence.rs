//! Divergences and entropies on normalized and unnormalized measures.
//!
//! All logarithms are natural, so every value is in nats. α = 1 is treated
//! as a dispatch boundary: the `I_α` functions refuse it and point at the KL
//! branch instead of evaluating a singular formula near its limit.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use statrs::function::beta::ln_beta;

use crate::error::{Error, Result};
use crate::manifold::{apply_escort, DiffConfig, EscortMap, ParametricModel, ProbVector};

type ScalarFn = dyn Fn(f64) -> f64 + Send + Sync;

/// A strictly convex `f` on `[0, ∞)` with `f(1) = 0` and `f″(1) ≠ 0`,
/// together with its first two derivatives.
#[derive(Clone)]
pub struct ConvexGenerator {
    name: String,
    f: Arc<ScalarFn>,
    df: Arc<ScalarFn>,
    d2f: Arc<ScalarFn>,
}

impl fmt::Debug for ConvexGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ConvexGenerator({})", self.name)
    }
}

impl ConvexGenerator {
    /// Builds a generator and spot-checks its invariants: `f(1) = 0`,
    /// `f″(1) ≠ 0`, and `f″ > 0` on a log-spaced grid over `[1e-3, 1e3]`.
    pub fn new<F, D1, D2>(name: impl Into<String>, f: F, df: D1, d2f: D2) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D1: Fn(f64) -> f64 + Send + Sync + 'static,
        D2: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let name = name.into();
        let fail = |reason: String| Error::Generator {
            name: name.clone(),
            reason,
        };
        let at_one = f(1.0);
        if at_one.abs() > 1e-12 {
            return Err(fail(format!("f(1) = {at_one}, expected 0")));
        }
        let curvature = d2f(1.0);
        if !(curvature.is_finite() && curvature != 0.0) {
            return Err(fail(format!("f''(1) = {curvature}, expected a non-zero value")));
        }
        for n in 0..=60 {
            let u = 10f64.powf(-3.0 + 0.1 * n as f64);
            let c = d2f(u);
            if !(c > 0.0) {
                return Err(fail(format!("f''({u:.4e}) = {c}; f must be strictly convex")));
            }
        }
        Ok(Self {
            name,
            f: Arc::new(f),
            df: Arc::new(df),
            d2f: Arc::new(d2f),
        })
    }

    /// `f(u) = u log u`, the generator of the KL divergence.
    pub fn kl() -> Self {
        Self::new(
            "u log u",
            |u| if u == 0.0 { 0.0 } else { u * u.ln() },
            |u| u.ln() + 1.0,
            |u| 1.0 / u,
        )
        .expect("u log u is a valid generator")
    }

    /// `f_α(u) = sgn(1−α)·(u^{1/α} − 1)`, which links `I_α` to the Csiszár
    /// divergence between α-escorts.
    pub fn alpha_escort(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Domain(format!("α must be positive, got {alpha}")));
        }
        if alpha == 1.0 {
            return Err(Error::AlphaOne {
                operation: "ConvexGenerator::alpha_escort",
                use_instead: "ConvexGenerator::kl",
            });
        }
        let sgn = (1.0 - alpha).signum();
        let r = 1.0 / alpha;
        Self::new(
            format!("sgn(1-α)(u^(1/α)-1), α={alpha}"),
            move |u| sgn * (u.powf(r) - 1.0),
            move |u| sgn * r * u.powf(r - 1.0),
            move |u| sgn * r * (r - 1.0) * u.powf(r - 2.0),
        )
    }

    /// `f(u) = (u − 1)²`.
    pub fn chi_squared() -> Self {
        Self::new("(u-1)^2", |u| (u - 1.0) * (u - 1.0), |u| 2.0 * (u - 1.0), |_| 2.0)
            .expect("(u-1)^2 is a valid generator")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self, u: f64) -> f64 {
        (self.f)(u)
    }

    pub fn derivative(&self, u: f64) -> f64 {
        (self.df)(u)
    }

    pub fn second_derivative(&self, u: f64) -> f64 {
        (self.d2f)(u)
    }

    /// The Bregman divergence of the generator, `B_f(u, v) = f(u) − f(v) − f′(v)(u − v)`.
    pub fn bregman(&self, u: f64, v: f64) -> f64 {
        self.value(u) - self.value(v) - self.derivative(v) * (u - v)
    }
}

/// A strictly positive measure on the alphabet; need not sum to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnnormalizedMeasure {
    weights: Vec<f64>,
    mass: f64,
}

impl UnnormalizedMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::Domain(format!(
                "unnormalized measure weights must be strictly positive, found {w}"
            )));
        }
        let mass = weights.iter().sum();
        Ok(Self { weights, mass })
    }

    /// `λ·p`.
    pub fn scaled(p: &ProbVector, lambda: f64) -> Result<Self> {
        Self::new(p.as_slice().iter().map(|w| lambda * w).collect())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }
}

type DensityFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

#[derive(Clone)]
enum PriorKind {
    Uniform,
    /// Density proportional to `θ − lower` on a 1-D interval.
    Ramp,
    Beta { a: f64, b: f64, ln_norm: f64 },
    /// Independent axes.
    Product(Vec<PriorDensity>),
    Custom {
        density: Arc<DensityFn>,
        grad_log: Option<Arc<GradFn>>,
    },
}

/// A probability density `λ` on a box inside Θ.
#[derive(Clone)]
pub struct PriorDensity {
    name: String,
    lower: Vec<f64>,
    upper: Vec<f64>,
    kind: PriorKind,
}

impl fmt::Debug for PriorDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PriorDensity({} on {:?}..{:?})", self.name, self.lower, self.upper)
    }
}

fn check_support(lower: &[f64], upper: &[f64]) -> Result<()> {
    if lower.is_empty() || lower.len() != upper.len() || lower.iter().zip(upper).any(|(l, u)| !(l < u)) {
        return Err(Error::Domain(format!(
            "prior support must be a non-empty box, got {lower:?}..{upper:?}"
        )));
    }
    Ok(())
}

impl PriorDensity {
    pub fn uniform(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_support(&lower, &upper)?;
        Ok(Self {
            name: "uniform".into(),
            lower,
            upper,
            kind: PriorKind::Uniform,
        })
    }

    /// `λ(θ) = 2(θ − a)/(b − a)²` on `(a, b)`; on `(0, 1)` this is `2θ`.
    pub fn ramp(a: f64, b: f64) -> Result<Self> {
        check_support(&[a], &[b])?;
        Ok(Self {
            name: "ramp".into(),
            lower: vec![a],
            upper: vec![b],
            kind: PriorKind::Ramp,
        })
    }

    /// Beta(a, b) on `(0, 1)`.
    pub fn beta(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::Domain(format!("beta prior needs a, b > 0, got {a}, {b}")));
        }
        Ok(Self {
            name: format!("beta({a},{b})"),
            lower: vec![0.0],
            upper: vec![1.0],
            kind: PriorKind::Beta {
                a,
                b,
                ln_norm: ln_beta(a, b),
            },
        })
    }

    /// Independent product of one-dimensional priors.
    pub fn product(factors: Vec<PriorDensity>) -> Result<Self> {
        if factors.is_empty() || factors.iter().any(|f| f.dim() != 1) {
            return Err(Error::Domain("product priors need one-dimensional factors".into()));
        }
        let name = factors.iter().map(|f| f.name.clone()).collect::<Vec<_>>().join(" x ");
        Ok(Self {
            name,
            lower: factors.iter().map(|f| f.lower[0]).collect(),
            upper: factors.iter().map(|f| f.upper[0]).collect(),
            kind: PriorKind::Product(factors),
        })
    }

    pub fn custom<D>(
        name: impl Into<String>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        density: D,
        grad_log: Option<Arc<GradFn>>,
    ) -> Result<Self>
    where
        D: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        check_support(&lower, &upper)?;
        Ok(Self {
            name: name.into(),
            lower,
            upper,
            kind: PriorKind::Custom {
                density: Arc::new(density),
                grad_log,
            },
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn support(&self) -> (&[f64], &[f64]) {
        (&self.lower, &self.upper)
    }

    pub fn is_uniform(&self) -> bool {
        match &self.kind {
            PriorKind::Uniform => true,
            PriorKind::Product(fs) => fs.iter().all(|f| f.is_uniform()),
            _ => false,
        }
    }

    fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: theta.len(),
            });
        }
        let inside = theta
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(t, (l, u))| t > l && t < u);
        if !inside {
            return Err(Error::Domain(format!(
                "θ = {theta:?} is outside the support {:?}..{:?} of prior {}",
                self.lower, self.upper, self.name
            )));
        }
        Ok(())
    }

    /// `λ(θ)`, strictly positive inside the support.
    pub fn density(&self, theta: &[f64]) -> Result<f64> {
        self.check(theta)?;
        let value = match &self.kind {
            PriorKind::Uniform => self
                .lower
                .iter()
                .zip(&self.upper)
                .map(|(l, u)| 1.0 / (u - l))
                .product(),
            PriorKind::Ramp => {
                let (a, b) = (self.lower[0], self.upper[0]);
                2.0 * (theta[0] - a) / ((b - a) * (b - a))
            }
            PriorKind::Beta { a, b, ln_norm } => {
                let t = theta[0];
                ((a - 1.0) * t.ln() + (b - 1.0) * (1.0 - t).ln() - ln_norm).exp()
            }
            PriorKind::Product(fs) => {
                let mut v = 1.0;
                for (f, t) in fs.iter().zip(theta) {
                    v *= f.density(&[*t])?;
                }
                v
            }
            PriorKind::Custom { density, .. } => density(theta),
        };
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::Domain(format!(
                "prior {} has non-positive density {value} at θ = {theta:?}",
                self.name
            )));
        }
        Ok(value)
    }

    /// `∂_i log λ(θ)`; numerical for custom priors without an analytic gradient.
    pub fn grad_log(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check(theta)?;
        Ok(match &self.kind {
            PriorKind::Uniform => vec![0.0; self.dim()],
            PriorKind::Ramp => vec![1.0 / (theta[0] - self.lower[0])],
            PriorKind::Beta { a, b, .. } => {
                let t = theta[0];
                vec![(a - 1.0) / t - (b - 1.0) / (1.0 - t)]
            }
            PriorKind::Product(fs) => {
                let mut g = Vec::with_capacity(fs.len());
                for (f, t) in fs.iter().zip(theta) {
                    g.extend(f.grad_log(&[*t])?);
                }
                g
            }
            PriorKind::Custom {
                grad_log: Some(g), ..
            } => g(theta),
            PriorKind::Custom { grad_log: None, .. } => {
                let cfg = DiffConfig::default();
                let mut g = Vec::with_capacity(self.dim());
                for i in 0..self.dim() {
                    let h = DiffConfig::step(cfg.h2, theta[i]);
                    let mut plus = theta.to_vec();
                    let mut minus = theta.to_vec();
                    plus[i] += h;
                    minus[i] -= h;
                    let up = self.density(&plus)?.ln();
                    let down = self.density(&minus)?.ln();
                    g.push((up - down) / (2.0 * h));
                }
                g
            }
        })
    }
}

/// `I(p, q) = Σ p log(p/q)`.
pub fn kl(p: &ProbVector, q: &ProbVector) -> Result<f64> {
    p.check_same_alphabet(q)?;
    Ok(p.as_slice()
        .iter()
        .zip(q.as_slice())
        .map(|(a, b)| a * (a / b).ln())
        .sum())
}

/// Rényi entropy of order α; α = 1 is the Shannon entropy and α = 0 the
/// log of the support size.
pub fn entropy(p: &ProbVector, alpha: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::Domain(format!("entropy order must be ≥ 0, got {alpha}")));
    }
    if alpha == 1.0 {
        return Ok(-p.as_slice().iter().map(|w| w * w.ln()).sum::<f64>());
    }
    let s: f64 = p.as_slice().iter().map(|w| w.powf(alpha)).sum();
    Ok(s.ln() / (1.0 - alpha))
}

fn check_i_alpha_order(alpha: f64, operation: &'static str, use_instead: &'static str) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::Domain(format!("α must be positive, got {alpha}")));
    }
    if alpha == 1.0 {
        return Err(Error::AlphaOne {
            operation,
            use_instead,
        });
    }
    Ok(())
}

/// Sundaresan's divergence (relative α-entropy)
///
/// `I_α(p, q) = 1/(1−α) log Σ p q^{α−1} + 1/α log Σ q^α − 1/(α(1−α)) log Σ p^α`.
pub fn i_alpha(p: &ProbVector, q: &ProbVector, alpha: f64) -> Result<f64> {
    check_i_alpha_order(alpha, "i_alpha", "kl")?;
    p.check_same_alphabet(q)?;
    let (p, q) = (p.as_slice(), q.as_slice());
    let cross: f64 = p.iter().zip(q).map(|(a, b)| a * b.powf(alpha - 1.0)).sum();
    let q_norm: f64 = q.iter().map(|b| b.powf(alpha)).sum();
    let p_norm: f64 = p.iter().map(|a| a.powf(alpha)).sum();
    Ok(cross.ln() / (1.0 - alpha) + q_norm.ln() / alpha - p_norm.ln() / (alpha * (1.0 - alpha)))
}

/// `D_f(p, q) = Σ q f(p/q)`.
pub fn csiszar(p: &ProbVector, q: &ProbVector, f: &ConvexGenerator) -> Result<f64> {
    p.check_same_alphabet(q)?;
    Ok(p.as_slice()
        .iter()
        .zip(q.as_slice())
        .map(|(a, b)| b * f.value(a / b))
        .sum())
}

/// `Σ_x p(x) B_f(q(x)/p(x), 1)`, which equals `csiszar(q, p, f)`.
pub fn bregman_sum(p: &ProbVector, q: &ProbVector, f: &ConvexGenerator) -> Result<f64> {
    p.check_same_alphabet(q)?;
    Ok(p.as_slice()
        .iter()
        .zip(q.as_slice())
        .map(|(a, b)| a * f.bregman(b / a, 1.0))
        .sum())
}

/// `D_f^{(F)}(p, q) = (1/f″(1)) Σ F(q) f(F(p)/F(q))`.
pub fn generalized_f(
    p: &ProbVector,
    q: &ProbVector,
    f: &ConvexGenerator,
    escort: &EscortMap,
) -> Result<f64> {
    p.check_same_alphabet(q)?;
    let fp = apply_escort(p, escort)?;
    let fq = apply_escort(q, escort)?;
    Ok(csiszar(&fp, &fq, f)? / f.second_derivative(1.0))
}

/// KL divergence between positive measures:
/// `Σ p̃ log(p̃/q̃) − Σ p̃ + Σ q̃`.
pub fn bayesian_kl(pt: &UnnormalizedMeasure, qt: &UnnormalizedMeasure) -> Result<f64> {
    if pt.weights.len() != qt.weights.len() {
        return Err(Error::DimensionMismatch {
            expected: pt.weights.len(),
            got: qt.weights.len(),
        });
    }
    let sum: f64 = pt
        .weights
        .iter()
        .zip(&qt.weights)
        .map(|(a, b)| a * (a / b).ln())
        .sum();
    Ok(sum - pt.mass + qt.mass)
}

/// [`bayesian_kl`] between `p̃_θ = λ(θ)p_θ` and `p̃_θ′ = λ(θ′)p_θ′`.
pub fn bayesian_kl_on_model(
    model: &ParametricModel,
    prior: &PriorDensity,
    theta: &[f64],
    theta_prime: &[f64],
) -> Result<f64> {
    let pt = UnnormalizedMeasure::scaled(&model.eval(theta)?, prior.density(theta)?)?;
    let qt = UnnormalizedMeasure::scaled(&model.eval(theta_prime)?, prior.density(theta_prime)?)?;
    bayesian_kl(&pt, &qt)
}

/// Which closed form of the Bayesian `I_α` divergence to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BayesianAlphaForm {
    /// `λ/(1−α) log Σ p (λ′p′)^{α−1} + λ′ − λ[log Σp^α/(α(1−α)) + 1 − log λ − log Σp′^α/α]`.
    ///
    /// Vanishes at θ = θ′ and tends to the KL divergence between the
    /// unnormalized measures as α → 1.
    #[default]
    Normalized,
    /// The same expression with `−{1 + log λ}` inside the bracket. It equals
    /// `Normalized + 2λ(θ)`, so it induces the same metric and connections,
    /// but it is `2λ(θ)` rather than 0 on the diagonal.
    Displayed,
    /// `Displayed` with the first log term multiplied by α.
    ProofAlphaFactor,
}

/// `I_α` between `p̃_θ = λ(θ)p_θ` and `p̃_θ′ = λ(θ′)p_θ′`.
pub fn bayesian_i_alpha(
    model: &ParametricModel,
    prior: &PriorDensity,
    theta: &[f64],
    theta_prime: &[f64],
    alpha: f64,
    form: BayesianAlphaForm,
) -> Result<f64> {
    check_i_alpha_order(alpha, "bayesian_i_alpha", "bayesian_kl")?;
    let p = model.eval(theta)?;
    let q = model.eval(theta_prime)?;
    let lam = prior.density(theta)?;
    let lam_prime = prior.density(theta_prime)?;
    let (ps, qs) = (p.as_slice(), q.as_slice());
    // log Σ p (λ′q)^{α−1} = (α−1) log λ′ + log Σ p q^{α−1}
    let cross = (alpha - 1.0) * lam_prime.ln()
        + ps.iter().zip(qs).map(|(a, b)| a * b.powf(alpha - 1.0)).sum::<f64>().ln();
    let p_norm = ps.iter().map(|a| a.powf(alpha)).sum::<f64>().ln();
    let q_norm = qs.iter().map(|b| b.powf(alpha)).sum::<f64>().ln();
    let renyi = p_norm / (alpha * (1.0 - alpha)) - q_norm / alpha;
    let first = lam / (1.0 - alpha) * cross;
    Ok(match form {
        BayesianAlphaForm::Normalized => first + lam_prime - lam * (renyi + 1.0 - lam.ln()),
        BayesianAlphaForm::Displayed => first + lam_prime - lam * (renyi - (1.0 + lam.ln())),
        BayesianAlphaForm::ProofAlphaFactor => {
            alpha * first + lam_prime - lam * (renyi - (1.0 + lam.ln()))
        }
    })
}
