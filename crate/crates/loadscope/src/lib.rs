//! Multi-horizon regional electricity demand forecasting with economic and
//! news-derived social factors.
//!
//! The crate covers the full experiment loop for 1–30 day ahead hourly demand
//! forecasting:
//!
//! * [`data`] — domain types (hourly/daily series, design matrices, splits)
//!   and train-based standardization.
//! * [`ingest`] — CSV panel loading/alignment and a seeded synthetic panel
//!   generator with planted structure for verification.
//! * [`features`] — the 65-column numeric design matrix, training-range
//!   temperature climatology, and Ward hierarchical clustering of textual
//!   feature series into social-factor centroids.
//! * [`gbdt`] — from-scratch gradient-boosted regression trees, a Gaussian
//!   (mu, sigma) probabilistic variant, and seeded random-search tuning.
//! * [`baselines`] — persistence, smart climatology, their LASSO-weighted
//!   combination, and a standalone LASSO regressor.
//! * [`evaluation`] — RMSE/MAPE/CRPS scoring, improvement tables, and
//!   Friedman–Nemenyi model ranking.
//! * [`diagnostics`] — PIT reliability, Q-Q of standardized residuals, and
//!   paired t-tests for feature impact.
//! * [`causality`] — Granger causality and Double Machine Learning effect
//!   estimation with cross-fitting.
//! * [`attribution`] — exact path-dependent TreeSHAP for the crate's own
//!   ensembles.
//! * [`runner`] — end-to-end experiment orchestration behind the `loadscope`
//!   CLI (`run`, `forecast`, `cluster`, `causality`, `attribute`, `synth`).
//!
//! Every fitting operation is a pure function of its inputs plus an explicit
//! seed; reruns with the same config and seed reproduce all outputs
//! bit-exactly, independent of the worker count.
//!
//! See the `examples/` directory for one runnable walkthrough per capability.

pub mod attribution;
pub mod baselines;
pub mod causality;
pub mod data;
pub mod diagnostics;
pub mod evaluation;
pub mod features;
pub mod gbdt;
pub mod ingest;
pub mod runner;
pub mod stats;
