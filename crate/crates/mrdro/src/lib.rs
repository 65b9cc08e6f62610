//! Multi-reference distributionally robust resource allocation.
//!
//! The library fuses demand forecasts from several sources into a single
//! Normal forecast using per-source trust weights, builds a Wasserstein
//! distributionally robust allocation model (and its sample-average
//! counterpart) as an explicit linear program, solves it with a built-in
//! sparse revised simplex method, and drives a finite-difference trust
//! update loop across a sequence of demand events.
//!
//! Module map:
//! - [`types`]: shared domain types and configuration validation.
//! - [`fusion`]: trust-weighted fusion of Normal marginals and seeded
//!   scenario sampling.
//! - [`lp`]: sparse LP representation and the simplex solver.
//! - [`models`]: SAA and DRO model builders plus the worst-case evaluator.
//! - [`trust`]: realized loss, trust gradients, and the per-event update loop.
//! - [`experiments`]: synthetic event generation, out-of-sample comparisons,
//!   and sensitivity sweeps with CSV emission.

pub mod experiments;
pub mod fusion;
pub mod lp;
pub mod models;
pub mod trust;
pub mod types;
