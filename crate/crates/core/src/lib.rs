//! Information geometry on finite alphabets.
//!
//! The crate computes divergence functions between strictly positive
//! distributions, extracts Riemannian metrics and dual connections from them
//! by differentiating `D(p_θ, p_θ′)` (Eguchi's construction), and evaluates
//! Cramér-Rao-type lower bounds: classical, biased, α-escort, generalized
//! `(f, F)`, Bayesian, Bayesian-α, hybrid and Barankin. Every expectation is an
//! exact sum over the alphabet, so each bound can be checked against the true
//! estimator covariance rather than a simulation.
//!
//! Module map:
//!
//! - [`manifold`]: probability vectors, escorts, parametric families, finite differences
//! - [`divergence`]: KL, Rényi entropy, `I_α`, Csiszár and generalized f-divergences, Bayesian variants
//! - [`geometry`]: Eguchi metric/connection extraction and closed-form metrics
//! - [`bounds`]: the lower bounds and the PSD comparison contract
//! - [`estimation`]: estimator tables, escort transforms, exact and Monte Carlo moments
//! - [`variants`]: alternative generalized Fisher informations for comparison

pub mod bounds;
pub mod divergence;
pub mod error;
pub mod estimation;
pub mod geometry;
pub mod linalg;
pub mod manifold;
pub mod variants;

pub use error::{Error, Result};
pub use manifold::{DiffConfig, EscortMap, ParametricModel, ProbVector};
