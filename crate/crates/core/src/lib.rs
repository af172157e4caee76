//! Variational inference for Bayesian neural networks with tied horseshoe priors.
//!
//! The library implements four model families (Gaussian/horseshoe priors ×
//! linear/one-hidden-layer networks) trained by doubly stochastic maximization
//! of the evidence lower bound. The horseshoe prior ties all first-layer
//! weights leaving an input feature to a shared local scale, so training
//! switches whole features on or off; a trained model exposes per-feature
//! relevance scores, log-binned score histograms, and scale-mode diagnostics.
//!
//! Module map:
//! - [`distributions`]: densities, moments, entropies, reparameterized samplers
//! - [`gradients`]: flat parameter vectors, analytic-gradient objectives, and
//!   the finite-difference verifier
//! - [`models`]: the four architectures, initialization, weight sampling,
//!   forward evaluation, prediction, checkpoints
//! - [`training`]: ELBO estimation, analytic KL terms, closed-form auxiliary
//!   updates, Adam, the training loop
//! - [`data`]: CSV ingestion, schema-driven preprocessing, k-fold plans,
//!   synthetic generators
//! - [`metrics`]: RMSE, predictive NLL, error rate, AUROC, confusion matrices,
//!   cross-validation aggregation
//! - [`relevance`]: feature scores, gap thresholds, histograms, scale modes
//! - [`diagnostics`]: self-check suite (finite differences, KL-vs-MC, sampler
//!   KS tests, auxiliary-update ascent, AUROC oracle)

pub mod data;
pub mod diagnostics;
pub mod distributions;
pub mod error;
pub mod gradients;
pub mod metrics;
pub mod models;
pub mod relevance;
pub mod training;

pub use error::{Error, Result};
