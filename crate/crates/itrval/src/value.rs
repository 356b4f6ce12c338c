//! Value-function estimators and their influence-function standard errors.
//!
//! All estimators share the same inverse-probability-weighted building
//! blocks. Writing `d` for the rule evaluated on subject `i` (for the
//! cross-validated estimators, the rule refitted without that subject's
//! fold),
//!
//! ```text
//! U_i = Y_i 1{A_i = d(X_i)} / P(A_i | X_i)
//! W_i =     1{A_i = d(X_i)} / P(A_i | X_i)
//! ```
//!
//! the estimated value is `sum(U) / sum(W)`, the per-subject residuals are
//! the plug-in influence function
//!
//! ```text
//! R_i = U_i / mean(W) - mean(U) * W_i / mean(W)^2
//! ```
//!
//! (which sum to zero by construction), and the estimated variance is
//! `sum(R_i^2) / (n (n - 1))`, where the extra `1/n` accounts for how much
//! the `n` leave-one-out training sets overlap.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::data::{Arm, Dataset};
use crate::propensity::{PropensityError, PropensityModel};
use crate::rule::{DecisionRule, FitError, RuleFitter};
use crate::seed;
use crate::simgen::ScenarioSpec;

/// Fitted propensities are clipped to `[PROPENSITY_FLOOR, 1 - PROPENSITY_FLOOR]`
/// before entering any inverse-probability weight, keeping the weights
/// bounded. Clipping events are counted and reported on the estimates.
pub const PROPENSITY_FLOOR: f64 = 1e-3;

/// Derivation tag for the per-repeat fold-shuffling streams.
const CV_STREAM_TAG: u64 = 0x6356_666f_6c64; // "cVfold"

/// Clamps a propensity into the allowed band; the flag reports whether the
/// value actually changed.
pub fn clip_propensity(p: f64) -> (f64, bool) {
    let clipped = p.clamp(PROPENSITY_FLOOR, 1.0 - PROPENSITY_FLOOR);
    (clipped, clipped != p)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EstimateError {
    #[error("rule matches no subjects; the weighted denominator is zero")]
    EmptyMatch,
    #[error("need at least {min} subjects, have {n}")]
    TooFewSubjects { n: usize, min: usize },
    #[error("per-subject inputs have mismatched lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("leave-one-out refit without subject {index} failed")]
    RefitFailed { index: usize, source: FitError },
    #[error("refit for repeat {repeat}, fold {fold} failed")]
    FoldRefitFailed { repeat: usize, fold: usize, source: FitError },
    #[error("fold count {folds} is invalid for {n} subjects")]
    BadFolds { folds: usize, n: usize },
    #[error("repeat count must be at least 1")]
    BadRepeats,
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Propensity(#[from] PropensityError),
}

/// How a [`ValueEstimate`] was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Plugin,
    Cv,
    Jackknife,
    Empirical,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Plugin => "plugin",
            Method::Cv => "cv",
            Method::Jackknife => "jackknife",
            Method::Empirical => "empirical",
        }
    }
}

/// The per-subject weighted outcomes `U` and weights `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct UWPair {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    /// How many matched subjects had their propensity clipped.
    pub clip_events: usize,
}

/// An estimated rule value with its influence-function residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueEstimate {
    pub value: f64,
    pub residuals: Vec<f64>,
    pub std_error: f64,
    pub n: usize,
    pub method: Method,
    pub clip_events: usize,
}

/// Builds the `U`/`W` pair for per-subject rule outputs.
pub fn compute_uw(
    data: &Dataset,
    rule_arms: &[Arm],
    prop: &PropensityModel,
) -> Result<UWPair, EstimateError> {
    let n = data.n();
    if rule_arms.len() != n {
        return Err(EstimateError::LengthMismatch { left: rule_arms.len(), right: n });
    }
    let mut u = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    let mut clip_events = 0;
    for i in 0..n {
        let (p, clipped) = clip_propensity(prop.propensity(data.row(i), data.arm(i))?);
        if data.arm(i) == rule_arms[i] {
            u.push(data.outcome(i) / p);
            w.push(1.0 / p);
            clip_events += usize::from(clipped);
        } else {
            u.push(0.0);
            w.push(0.0);
        }
    }
    Ok(UWPair { u, w, clip_events })
}

fn ratio(uw: &UWPair) -> Result<f64, EstimateError> {
    let sum_u: f64 = uw.u.iter().sum();
    let sum_w: f64 = uw.w.iter().sum();
    if sum_w == 0.0 {
        return Err(EstimateError::EmptyMatch);
    }
    Ok(sum_u / sum_w)
}

/// Plug-in value of a fixed rule: `sum(U) / sum(W)`.
pub fn value_plugin<R: DecisionRule + ?Sized>(
    data: &Dataset,
    rule: &R,
    prop: &PropensityModel,
) -> Result<f64, EstimateError> {
    let arms: Vec<Arm> = (0..data.n()).map(|i| rule.assign(data.row(i))).collect();
    ratio(&compute_uw(data, &arms, prop)?)
}

/// Influence-function residuals of the ratio estimator. They sum to zero by
/// construction.
pub fn residuals_jackknife(uw: &UWPair) -> Result<Vec<f64>, EstimateError> {
    let n = uw.u.len();
    if uw.w.len() != n {
        return Err(EstimateError::LengthMismatch { left: uw.u.len(), right: uw.w.len() });
    }
    let w_bar = uw.w.iter().sum::<f64>() / n as f64;
    if w_bar == 0.0 {
        return Err(EstimateError::EmptyMatch);
    }
    let u_bar = uw.u.iter().sum::<f64>() / n as f64;
    let w_scale = u_bar / (w_bar * w_bar);
    Ok(uw.u.iter().zip(&uw.w).map(|(ui, wi)| ui / w_bar - w_scale * wi).collect())
}

/// `sum(R_i^2) / (n (n - 1))`.
pub fn variance_jackknife(residuals: &[f64]) -> Result<f64, EstimateError> {
    let n = residuals.len();
    if n < 2 {
        return Err(EstimateError::TooFewSubjects { n, min: 2 });
    }
    let sum_sq: f64 = residuals.iter().map(|r| r * r).sum();
    Ok(sum_sq / (n as f64 * (n as f64 - 1.0)))
}

/// Assembles value, residuals, and standard error from a `U`/`W` pair.
pub fn estimate_from_uw(uw: UWPair, method: Method) -> Result<ValueEstimate, EstimateError> {
    let value = ratio(&uw)?;
    let residuals = residuals_jackknife(&uw)?;
    let std_error = libm::sqrt(variance_jackknife(&residuals)?);
    Ok(ValueEstimate {
        value,
        std_error,
        n: residuals.len(),
        residuals,
        method,
        clip_events: uw.clip_events,
    })
}

/// Leave-one-out estimator: refits the rule `n` times, each time without one
/// subject, and scores each refit on the subject it left out.
pub fn value_jackknife<F: RuleFitter + ?Sized>(
    data: &Dataset,
    fitter: &F,
    prop: &PropensityModel,
) -> Result<ValueEstimate, EstimateError> {
    let n = data.n();
    if n < 3 {
        return Err(EstimateError::TooFewSubjects { n, min: 3 });
    }
    let mut rule_arms = Vec::with_capacity(n);
    for i in 0..n {
        let held_out = data.without_row(i);
        let rule = fitter
            .fit(&held_out)
            .map_err(|source| EstimateError::RefitFailed { index: i, source })?;
        rule_arms.push(rule.assign(data.row(i)));
    }
    estimate_from_uw(compute_uw(data, &rule_arms, prop)?, Method::Jackknife)
}

/// Repeated K-fold cross-validated estimator.
///
/// Each repeat shuffles the subjects into `folds` near-equal folds, refits
/// the rule on each fold's complement, and scores the held-out subjects. The
/// per-subject `U`/`W` contributions are accumulated across repeats, which
/// leaves the value and residuals unchanged under the common rescaling by
/// the number of repeats. With `folds = n` and `repeats = 1` this reproduces
/// the jackknife exactly.
pub fn value_cv<F: RuleFitter + ?Sized>(
    data: &Dataset,
    fitter: &F,
    prop: &PropensityModel,
    folds: usize,
    repeats: usize,
    cv_seed: u64,
) -> Result<ValueEstimate, EstimateError> {
    let n = data.n();
    if folds < 2 || folds > n {
        return Err(EstimateError::BadFolds { folds, n });
    }
    if repeats == 0 {
        return Err(EstimateError::BadRepeats);
    }

    let mut u = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut clip_events = 0;
    let mut in_fold = vec![false; n];

    for repeat in 0..repeats {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seed::stream(cv_seed, &[CV_STREAM_TAG, repeat as u64]));

        let base = n / folds;
        let extra = n % folds;
        let mut start = 0;
        for fold in 0..folds {
            let size = base + usize::from(fold < extra);
            let members = &order[start..start + size];
            start += size;

            for &i in members {
                in_fold[i] = true;
            }
            let train: Vec<usize> = (0..n).filter(|&i| !in_fold[i]).collect();
            for &i in members {
                in_fold[i] = false;
            }

            let rule = fitter
                .fit(&data.subset(&train))
                .map_err(|source| EstimateError::FoldRefitFailed { repeat, fold, source })?;
            for &i in members {
                let (p, clipped) = clip_propensity(prop.propensity(data.row(i), data.arm(i))?);
                if data.arm(i) == rule.assign(data.row(i)) {
                    u[i] += data.outcome(i) / p;
                    w[i] += 1.0 / p;
                    clip_events += usize::from(clipped);
                }
            }
        }
    }
    estimate_from_uw(UWPair { u, w, clip_events }, Method::Cv)
}

/// Fits on the full training set and applies the plug-in estimator to an
/// independent test set of the same distribution.
pub fn value_empirical<F: RuleFitter + ?Sized>(
    train: &Dataset,
    test: &Dataset,
    fitter: &F,
    prop: &PropensityModel,
) -> Result<f64, EstimateError> {
    let rule = fitter.fit(train)?;
    value_plugin(test, &rule, prop)
}

/// Monte-Carlo ground truth of a rule under a known generative model.
///
/// Averages `E[Y | X, A = rule(X)] = X1 + X2 + delta(X1, X2, rule(X))` over
/// fresh covariate draws; the additive noise has mean zero and is excluded.
pub fn true_value_mc<R: DecisionRule + ?Sized>(
    rule: &R,
    scenario: &ScenarioSpec,
    draws: usize,
    mc_seed: u64,
) -> f64 {
    assert!(draws > 0, "need at least one draw");
    let mut rng = seed::stream(mc_seed, &[]);
    let dims = scenario.covariate_dims();
    let mut x = vec![0.0; dims];
    let mut acc = 0.0;
    for _ in 0..draws {
        scenario.sample_covariates(&mut rng, &mut x);
        let arm = rule.assign(&x);
        acc += x[0] + x[1] + scenario.delta0(x[0], x[1], arm);
    }
    acc / draws as f64
}
