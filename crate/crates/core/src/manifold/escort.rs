//! Escort transforms `p ↦ F(p)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{model_partials, DiffConfig, ParametricModel, ProbVector};
use crate::error::{Error, Result};

type EscortFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// A map from distributions to distributions.
#[derive(Clone)]
pub enum EscortMap {
    Identity,
    /// `p(x)^α / Σ_y p(y)^α`, with α > 0 and α ≠ 1.
    Alpha(f64),
    /// Arbitrary user map; its output is validated on every application.
    Custom { name: String, map: Arc<EscortFn> },
}

impl EscortMap {
    pub fn alpha(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if alpha == 1.0 {
            return Err(Error::AlphaOne {
                operation: "EscortMap::alpha",
                use_instead: "EscortMap::Identity",
            });
        }
        Ok(Self::Alpha(alpha))
    }

    /// The α-escort, or the identity map when α = 1.
    pub fn for_order(alpha: f64) -> Result<Self> {
        if alpha == 1.0 {
            Ok(Self::Identity)
        } else {
            Self::alpha(alpha)
        }
    }

    pub fn custom<F>(name: impl Into<String>, map: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self::Custom {
            name: name.into(),
            map: Arc::new(map),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Identity => "identity".into(),
            Self::Alpha(a) => format!("alpha({a})"),
            Self::Custom { name, .. } => name.clone(),
        }
    }
}

impl fmt::Debug for EscortMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::Domain(format!("escort order must be positive, got {alpha}")));
    }
    Ok(())
}

/// The α-escort `x ↦ p(x)^α / Σ_y p(y)^α`. α = 1 returns `p` unchanged.
pub fn escort(p: &ProbVector, alpha: f64) -> Result<ProbVector> {
    check_alpha(alpha)?;
    if alpha == 1.0 {
        return Ok(p.clone());
    }
    // Scale by the largest weight first so small α or large α cannot underflow.
    let max = p.as_slice().iter().cloned().fold(0.0, f64::max);
    let powered: Vec<f64> = p.as_slice().iter().map(|&w| (w / max).powf(alpha)).collect();
    ProbVector::from_unnormalized(powered).map_err(|e| Error::EscortRange(e.to_string()))
}

pub fn apply_escort(p: &ProbVector, map: &EscortMap) -> Result<ProbVector> {
    match map {
        EscortMap::Identity => Ok(p.clone()),
        EscortMap::Alpha(a) => escort(p, *a),
        EscortMap::Custom { name, map } => {
            let out = map(p.as_slice());
            if out.len() != p.len() {
                return Err(Error::EscortRange(format!(
                    "escort `{name}` returned {} weights for an alphabet of size {}",
                    out.len(),
                    p.len()
                )));
            }
            ProbVector::new(out)
                .map_err(|e| Error::EscortRange(format!("escort `{name}`: {e}")))
        }
    }
}

/// `F(p_θ)` and its θ-partials `∂_i F(p_θ)(x)` as a d×k matrix.
///
/// Identity and α-escorts use the chain rule through the model partials;
/// custom maps are differentiated numerically in θ.
pub fn escort_partials(
    model: &ParametricModel,
    theta: &[f64],
    map: &EscortMap,
    cfg: &DiffConfig,
) -> Result<(ProbVector, DMatrix<f64>)> {
    let p = model.eval(theta)?;
    match map {
        EscortMap::Identity => Ok((p, model_partials(model, theta, cfg)?)),
        EscortMap::Alpha(alpha) => {
            let dp = model_partials(model, theta, cfg)?;
            let q = escort(&p, *alpha)?;
            let (d, k) = dp.shape();
            let mut dq = DMatrix::zeros(d, k);
            for i in 0..k {
                let mean: f64 = (0..d).map(|y| q[y] / p[y] * dp[(y, i)]).sum();
                for x in 0..d {
                    dq[(x, i)] = alpha * (q[x] / p[x] * dp[(x, i)] - q[x] * mean);
                }
            }
            Ok((q, dq))
        }
        EscortMap::Custom { .. } => {
            cfg.validate()?;
            model.check_interior(theta, cfg.margin)?;
            let q = apply_escort(&p, map)?;
            let (d, k) = (model.alphabet_size(), model.dim());
            let mut dq = DMatrix::zeros(d, k);
            for i in 0..k {
                for x in 0..d {
                    let f = |z: &[f64]| {
                        point_eval(model, map, z).map(|v| v[x])
                    };
                    let h = DiffConfig::step(cfg.h2, theta[i]);
                    dq[(x, i)] = cfg.extrapolate(h, |h| {
                        let mut steps = vec![0.0; k];
                        steps[i] = h;
                        super::mixed_partial(&f, theta, &[(i, 1)], &steps)
                    })?;
                }
            }
            Ok((q, dq))
        }
    }
}

fn point_eval(model: &ParametricModel, map: &EscortMap, theta: &[f64]) -> Result<Vec<f64>> {
    Ok(apply_escort(&model.eval(theta)?, map)?.into_vec())
}
