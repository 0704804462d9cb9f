//! Finite-alphabet probability objects.
//!
//! A point of a statistical manifold here is a strictly positive probability
//! vector on a finite alphabet `{a_1, …, a_d}`. Parametric families map a
//! parameter θ in an open box to such vectors; every geometric quantity in the
//! crate is computed by exact enumeration over the `d` symbols.

mod diff;
mod escort;
mod model;

pub use diff::{mixed_partial, DiffConfig, DiffScheme};
pub use escort::{apply_escort, escort, escort_partials, EscortMap};
pub use model::{
    alpha_representation, model_partials, model_second_partials, score, Family,
    ParametricModel,
};

use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerance on `Σ p(x) = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// The finite state space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Alphabet {
    labels: Vec<String>,
}

impl Alphabet {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::Domain(format!(
                "an alphabet needs at least 2 symbols, got {}",
                labels.len()
            )));
        }
        let mut sorted: Vec<&String> = labels.iter().collect();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain("alphabet labels must be distinct".into()));
        }
        Ok(Self { labels })
    }

    /// Symbols `0, 1, …, d−1`.
    pub fn indexed(d: usize) -> Result<Self> {
        Self::new((0..d).map(|i| i.to_string()).collect())
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// A strictly positive probability vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::InvalidProbVector(format!(
                "need at least 2 weights, got {}",
                weights.len()
            )));
        }
        if let Some((x, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::InvalidProbVector(format!(
                "weight {x} is {w}; all weights must be strictly positive and finite"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidProbVector(format!(
                "weights sum to {total:.17}, not 1"
            )));
        }
        Ok(Self(weights))
    }

    /// Normalizes positive weights and validates the result.
    pub fn from_unnormalized(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidProbVector(format!(
                "cannot normalize weights with total {total}"
            )));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(d: usize) -> Result<Self> {
        Self::new(vec![1.0 / d as f64; d])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// `E_p[a]`.
    pub fn expect(&self, a: &[f64]) -> f64 {
        self.0.iter().zip(a).map(|(p, a)| p * a).sum()
    }

    pub(crate) fn check_same_alphabet(&self, other: &ProbVector) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for ProbVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_and_unnormalized_weights() {
        assert!(ProbVector::new(vec![0.0, 1.0]).is_err());
        assert!(ProbVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbVector::new(vec![1.0]).is_err());
        assert!(ProbVector::new(vec![f64::NAN, 1.0]).is_err());
        assert!(ProbVector::new(vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn alphabet_invariants() {
        assert!(Alphabet::indexed(1).is_err());
        assert!(Alphabet::new(vec!["a".into(), "a".into()]).is_err());
        assert_eq!(Alphabet::indexed(4).unwrap().size(), 4);
    }
}
