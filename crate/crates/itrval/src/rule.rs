//! Decision rules and the trainers that produce them.

use alloc::boxed::Box;

use crate::data::{Arm, Dataset};
use crate::propensity::PropensityError;

/// A deterministic map from a covariate vector to a treatment arm.
///
/// Implementations must be pure: the same input always yields the same arm,
/// and the arm is always within `0..arm_count` of the data the rule was
/// trained for.
pub trait DecisionRule: Send + Sync {
    fn assign(&self, x: &[f64]) -> Arm;
}

impl<R: DecisionRule + ?Sized> DecisionRule for &R {
    fn assign(&self, x: &[f64]) -> Arm {
        (**self).assign(x)
    }
}

impl<R: DecisionRule + ?Sized> DecisionRule for Box<R> {
    fn assign(&self, x: &[f64]) -> Arm {
        (**self).assign(x)
    }
}

/// A rule that assigns the same arm to every subject.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedArm(pub Arm);

impl DecisionRule for FixedArm {
    fn assign(&self, _x: &[f64]) -> Arm {
        self.0
    }
}

/// Wraps a closure as a [`DecisionRule`]; mostly useful in tests.
pub struct FnRule<F>(pub F);

impl<F: Fn(&[f64]) -> Arm + Send + Sync> DecisionRule for FnRule<F> {
    fn assign(&self, x: &[f64]) -> Arm {
        (self.0)(x)
    }
}

/// Why fitting a rule to a dataset failed.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("arm {arm} has {count} subjects, need at least {min}")]
    ArmTooSmall { arm: Arm, count: usize, min: usize },
    #[error("arm {arm} has no subjects")]
    MissingArm { arm: Arm },
    #[error("arm {arm} is outside 0..{arms}")]
    ArmOutOfRange { arm: Arm, arms: usize },
    #[error("bandwidth must be positive and finite, got {0}")]
    BadBandwidth(f64),
    #[error("ridge must be positive and finite, got {0}")]
    BadRidge(f64),
    #[error("median pairwise covariate distance is zero; cannot derive a bandwidth")]
    DegenerateMedian,
    #[error("kernel system for arm {arm} is not positive definite")]
    Singular { arm: Arm },
    #[error(transparent)]
    Propensity(#[from] PropensityError),
}

/// A boxed rule as returned by trainers.
pub type BoxRule = Box<dyn DecisionRule>;

/// A trainer that turns a dataset into a decision rule.
///
/// Trainers carry frozen hyperparameters and must be deterministic given the
/// same dataset; the cross-validation and jackknife estimators refit them on
/// many subsets of the data.
pub trait RuleFitter: Send + Sync {
    fn fit(&self, data: &Dataset) -> Result<BoxRule, FitError>;
}

/// Wraps a closure as a [`RuleFitter`]; mostly useful in tests.
pub struct FnFitter<F>(pub F);

impl<F: Fn(&Dataset) -> Result<BoxRule, FitError> + Send + Sync> RuleFitter for FnFitter<F> {
    fn fit(&self, data: &Dataset) -> Result<BoxRule, FitError> {
        (self.0)(data)
    }
}
