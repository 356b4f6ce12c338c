//! Treatment-assignment probabilities P(A | X).
//!
//! Randomized trials have known, covariate-independent propensities; for
//! observational data the probabilities are estimated, either as raw arm
//! frequencies or by penalized multinomial logistic regression.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::{Arm, Dataset};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PropensityError {
    #[error("arm {arm} is outside 0..{arms}")]
    ArmOutOfRange { arm: Arm, arms: usize },
    #[error("arm {arm} has no subjects; its estimated propensity would be zero")]
    MissingArm { arm: Arm },
    #[error("covariate vector has {got} entries, model expects {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("ridge penalty must be nonnegative and finite, got {0}")]
    BadPenalty(f64),
}

/// A propensity model: treatment-assignment probabilities over the `K` arms.
///
/// Every variant produces probabilities in (0, 1) that sum to one over arms
/// for any covariate vector.
#[derive(Debug, Clone, PartialEq)]
pub enum PropensityModel {
    /// Known randomization with equal probability 1/K per arm.
    KnownUniform { arms: usize },
    /// Covariate-independent per-arm frequencies estimated from the sample.
    Empirical { frequencies: Vec<f64> },
    /// Multinomial logistic model with arm 0 as the reference category.
    ///
    /// `coefficients` is row-major `(arms - 1) x (dim + 1)`; each row holds
    /// the intercept followed by `dim` slopes for one non-reference arm.
    MultinomialLogistic {
        coefficients: Vec<f64>,
        arms: usize,
        dim: usize,
        converged: bool,
    },
}

impl PropensityModel {
    pub fn arm_count(&self) -> usize {
        match self {
            Self::KnownUniform { arms } => *arms,
            Self::Empirical { frequencies } => frequencies.len(),
            Self::MultinomialLogistic { arms, .. } => *arms,
        }
    }

    /// P(A = arm | X = x).
    pub fn propensity(&self, x: &[f64], arm: Arm) -> Result<f64, PropensityError> {
        let arms = self.arm_count();
        if arm >= arms {
            return Err(PropensityError::ArmOutOfRange { arm, arms });
        }
        match self {
            Self::KnownUniform { arms } => Ok(1.0 / *arms as f64),
            Self::Empirical { frequencies } => Ok(frequencies[arm]),
            Self::MultinomialLogistic { .. } => Ok(self.probabilities(x)?[arm]),
        }
    }

    /// The full probability vector over arms at `x`.
    pub fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>, PropensityError> {
        match self {
            Self::KnownUniform { arms } => Ok(vec![1.0 / *arms as f64; *arms]),
            Self::Empirical { frequencies } => Ok(frequencies.clone()),
            Self::MultinomialLogistic { coefficients, arms, dim, .. } => {
                if x.len() != *dim {
                    return Err(PropensityError::DimensionMismatch { got: x.len(), want: *dim });
                }
                Ok(softmax_with_reference(coefficients, x, *arms))
            }
        }
    }
}

/// Softmax over linear scores with the reference arm's score fixed at zero.
/// Max-stabilized so extreme coefficients cannot overflow.
fn softmax_with_reference(coefficients: &[f64], x: &[f64], arms: usize) -> Vec<f64> {
    let width = x.len() + 1;
    let mut scores = vec![0.0; arms];
    for a in 1..arms {
        let row = &coefficients[(a - 1) * width..a * width];
        let mut eta = row[0];
        for (c, xi) in row[1..].iter().zip(x) {
            eta += c * xi;
        }
        scores[a] = eta;
    }
    let max = scores.iter().fold(f64::NEG_INFINITY, |m, &s| m.max(s));
    let mut total = 0.0;
    let mut probs = vec![0.0; arms];
    for (p, &s) in probs.iter_mut().zip(&scores) {
        let e = libm::exp(s - max);
        *p = e;
        total += e;
    }
    for p in probs.iter_mut() {
        *p /= total;
    }
    probs
}

/// Per-arm sample frequencies, independent of covariates.
///
/// Errors if any arm has no subjects, since that would put a zero in an
/// inverse-probability weight.
pub fn estimate_propensity_empirical(data: &Dataset) -> Result<PropensityModel, PropensityError> {
    let counts = data.arm_sizes();
    if let Some(arm) = counts.iter().position(|&c| c == 0) {
        return Err(PropensityError::MissingArm { arm });
    }
    let n = data.n() as f64;
    let frequencies = counts.iter().map(|&c| c as f64 / n).collect();
    Ok(PropensityModel::Empirical { frequencies })
}

/// Fits a multinomial logistic propensity model by gradient ascent on the
/// L2-penalized log-likelihood.
///
/// Arm 0 is the reference category and an intercept is always included. Each
/// iteration starts from a unit step along the gradient and halves it until
/// the penalized log-likelihood improves; the fit stops once the gradient
/// max-norm drops below `tol` or `max_iter` iterations have run. The
/// `converged` flag on the returned model records which happened, so perfect
/// separation with `l2 = 0` reports non-convergence instead of failing.
pub fn fit_multinomial_logistic(
    data: &Dataset,
    l2: f64,
    max_iter: usize,
    tol: f64,
) -> Result<PropensityModel, PropensityError> {
    if !(l2 >= 0.0 && l2.is_finite()) {
        return Err(PropensityError::BadPenalty(l2));
    }
    let counts = data.arm_sizes();
    if let Some(arm) = counts.iter().position(|&c| c == 0) {
        return Err(PropensityError::MissingArm { arm });
    }

    let arms = data.arm_count();
    let dim = data.p();
    let width = dim + 1;
    let len = (arms - 1) * width;
    let mut beta = vec![0.0; len];
    let mut converged = false;

    let mut ll = penalized_loglik(data, &beta, l2);
    for _ in 0..max_iter {
        let grad = gradient(data, &beta, l2);
        let gmax = grad.iter().fold(0.0f64, |m, &g| m.max(libm::fabs(g)));
        if gmax < tol {
            converged = true;
            break;
        }
        let mut step = 1.0;
        let mut accepted = false;
        let mut candidate = vec![0.0; len];
        for _ in 0..60 {
            for ((c, &b), &g) in candidate.iter_mut().zip(&beta).zip(&grad) {
                *c = b + step * g;
            }
            let cand_ll = penalized_loglik(data, &candidate, l2);
            if cand_ll > ll {
                beta.copy_from_slice(&candidate);
                ll = cand_ll;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // No ascent direction at representable step sizes.
            break;
        }
    }

    Ok(PropensityModel::MultinomialLogistic { coefficients: beta, arms, dim, converged })
}

fn penalized_loglik(data: &Dataset, beta: &[f64], l2: f64) -> f64 {
    let arms = data.arm_count();
    let width = data.p() + 1;
    let mut ll = 0.0;
    let mut scores = vec![0.0; arms];
    for i in 0..data.n() {
        let x = data.row(i);
        scores[0] = 0.0;
        for a in 1..arms {
            let row = &beta[(a - 1) * width..a * width];
            let mut eta = row[0];
            for (c, xi) in row[1..].iter().zip(x) {
                eta += c * xi;
            }
            scores[a] = eta;
        }
        let max = scores.iter().fold(f64::NEG_INFINITY, |m, &s| m.max(s));
        let mut lse = 0.0;
        for &s in &scores {
            lse += libm::exp(s - max);
        }
        ll += scores[data.arm(i)] - (max + libm::log(lse));
    }
    let penalty: f64 = beta.iter().map(|b| b * b).sum();
    ll - 0.5 * l2 * penalty
}

fn gradient(data: &Dataset, beta: &[f64], l2: f64) -> Vec<f64> {
    let arms = data.arm_count();
    let width = data.p() + 1;
    let mut grad = vec![0.0; beta.len()];
    for i in 0..data.n() {
        let x = data.row(i);
        let probs = softmax_with_reference(beta, x, arms);
        let observed = data.arm(i);
        for a in 1..arms {
            let indicator = if observed == a { 1.0 } else { 0.0 };
            let delta = indicator - probs[a];
            let row = &mut grad[(a - 1) * width..a * width];
            row[0] += delta;
            for (g, xi) in row[1..].iter_mut().zip(x) {
                *g += delta * xi;
            }
        }
    }
    for (g, b) in grad.iter_mut().zip(beta) {
        *g -= l2 * b;
    }
    grad
}
