//! Value estimation for individualized treatment rules.
//!
//! An individualized treatment rule (ITR) maps a subject's covariates to one
//! of `K` treatment arms. Its *value* is the mean outcome that would be
//! observed if the whole population were treated according to the rule. This
//! crate estimates that value from randomized or observational data via
//! inverse-probability weighting, together with standard errors derived from
//! the influence function of the ratio estimator:
//!
//! * [`value::value_plugin`] — weighted outcome ratio for a fixed rule,
//! * [`value::value_cv`] — repeated K-fold cross-validated estimator,
//! * [`value::value_jackknife`] — leave-one-out estimator with per-subject
//!   residuals and a `1/(n(n-1))` variance,
//! * [`value::value_empirical`] — fit on one sample, score on an independent
//!   test sample,
//! * [`value::true_value_mc`] — Monte-Carlo ground truth under a known
//!   generative model.
//!
//! Candidate rules come from kernel ridge regression Q-learning ([`krr`]) and
//! best-single-arm models ([`zom`]). The [`simgen`] module provides the four
//! synthetic decision-boundary scenarios used by the simulation harness, and
//! [`stats`] holds the model-comparison Z-test, the shifted test statistic,
//! Shapiro-Wilk normality testing, and coverage/power aggregation.
//!
//! The crate is `no_std` (with `alloc`); anything touching files, threads, or
//! a command line lives in the companion `simlab` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod data;
pub mod krr;
pub mod linalg;
pub mod propensity;
pub mod rule;
pub mod seed;
pub mod simgen;
pub mod stats;
pub mod value;
pub mod zom;

pub use data::{Arm, Dataset};
pub use propensity::PropensityModel;
pub use rule::{DecisionRule, RuleFitter};
pub use value::{Method, ValueEstimate};
