//! Zero-order models: the best single fixed arm applied to everyone.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::data::{Arm, Dataset};
use crate::propensity::PropensityModel;
use crate::rule::{BoxRule, DecisionRule, FitError, RuleFitter};
use crate::value::clip_propensity;

/// A fixed-arm treatment rule, chosen as the arm whose constant rule has the
/// highest plug-in value (the inverse-probability-weighted mean outcome
/// among that arm's recipients). Ties break toward the lowest arm index.
#[derive(Debug, Clone, PartialEq)]
pub struct ZomRule {
    pub fixed_arm: Arm,
    /// The per-arm IPW mean outcomes the selection was based on.
    pub ipw_means: Vec<f64>,
}

impl DecisionRule for ZomRule {
    fn assign(&self, _x: &[f64]) -> Arm {
        self.fixed_arm
    }
}

/// Picks the best single arm by the plug-in value of each constant rule.
pub fn fit_zom(data: &Dataset, prop: &PropensityModel) -> Result<ZomRule, FitError> {
    let arms = data.arm_count();
    let mut ipw_means = Vec::with_capacity(arms);
    for arm in 0..arms {
        let mut weighted_outcomes = 0.0;
        let mut weights = 0.0;
        for i in 0..data.n() {
            if data.arm(i) != arm {
                continue;
            }
            let (p, _) = clip_propensity(prop.propensity(data.row(i), arm)?);
            weighted_outcomes += data.outcome(i) / p;
            weights += 1.0 / p;
        }
        if weights == 0.0 {
            return Err(FitError::MissingArm { arm });
        }
        ipw_means.push(weighted_outcomes / weights);
    }
    let mut fixed_arm = 0;
    for arm in 1..arms {
        if ipw_means[arm] > ipw_means[fixed_arm] {
            fixed_arm = arm;
        }
    }
    Ok(ZomRule { fixed_arm, ipw_means })
}

/// A zero-order training pipeline with a frozen propensity model.
#[derive(Debug, Clone, PartialEq)]
pub struct ZomFitter {
    pub prop: PropensityModel,
}

impl RuleFitter for ZomFitter {
    fn fit(&self, data: &Dataset) -> Result<BoxRule, FitError> {
        Ok(Box::new(fit_zom(data, &self.prop)?))
    }
}
