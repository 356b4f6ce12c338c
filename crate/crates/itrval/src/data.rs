//! Subject-level data: covariates, assigned treatment arms, and outcomes.

use alloc::vec::Vec;

/// Treatment arm label. Arms are 0-indexed integers in `0..arm_count`.
pub type Arm = usize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DataError {
    #[error("covariates, treatments, and outcomes disagree on subject count")]
    LengthMismatch,
    #[error("need at least 2 subjects, have {0}")]
    TooFewSubjects(usize),
    #[error("need at least one covariate dimension")]
    NoCovariates,
    #[error("need at least 2 treatment arms, have {0}")]
    TooFewArms(usize),
    #[error("subject {row}: treatment label {arm} is outside 0..{arms}")]
    ArmOutOfRange { row: usize, arm: usize, arms: usize },
    #[error("subject {row}: non-finite {field} value")]
    NonFinite { row: usize, field: &'static str },
}

/// An immutable sample of `n` subjects: an `n x p` covariate matrix, one arm
/// label per subject, and one scalar outcome per subject (higher is better).
///
/// Construction validates shape, label range and finiteness; all accessors
/// are read-only, so a `Dataset` can be shared freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    covariates: Vec<f64>, // row-major, n * p
    arms: Vec<Arm>,
    outcomes: Vec<f64>,
    p: usize,
    arm_count: usize,
}

impl Dataset {
    /// Builds a dataset from a flat row-major covariate matrix.
    pub fn new(
        covariates: Vec<f64>,
        p: usize,
        arms: Vec<Arm>,
        outcomes: Vec<f64>,
        arm_count: usize,
    ) -> Result<Self, DataError> {
        if p == 0 {
            return Err(DataError::NoCovariates);
        }
        if arm_count < 2 {
            return Err(DataError::TooFewArms(arm_count));
        }
        let n = arms.len();
        if outcomes.len() != n || covariates.len() != n * p {
            return Err(DataError::LengthMismatch);
        }
        if n < 2 {
            return Err(DataError::TooFewSubjects(n));
        }
        for (row, &arm) in arms.iter().enumerate() {
            if arm >= arm_count {
                return Err(DataError::ArmOutOfRange { row, arm, arms: arm_count });
            }
        }
        for (row, &y) in outcomes.iter().enumerate() {
            if !y.is_finite() {
                return Err(DataError::NonFinite { row, field: "outcome" });
            }
        }
        for (i, &x) in covariates.iter().enumerate() {
            if !x.is_finite() {
                return Err(DataError::NonFinite { row: i / p, field: "covariate" });
            }
        }
        Ok(Self { covariates, arms, outcomes, p, arm_count })
    }

    pub fn n(&self) -> usize {
        self.arms.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn arm_count(&self) -> usize {
        self.arm_count
    }

    /// Covariate row of subject `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.p..(i + 1) * self.p]
    }

    pub fn arm(&self, i: usize) -> Arm {
        self.arms[i]
    }

    pub fn outcome(&self, i: usize) -> f64 {
        self.outcomes[i]
    }

    pub fn arms(&self) -> &[Arm] {
        &self.arms
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    /// Flat row-major covariate matrix.
    pub fn covariates(&self) -> &[f64] {
        &self.covariates
    }

    /// Number of subjects assigned to each arm.
    pub fn arm_sizes(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0usize; self.arm_count];
        for &a in &self.arms {
            counts[a] += 1;
        }
        counts
    }

    /// Subjects at the given indices, in the order given. The subset keeps
    /// the parent's arm count; it may be smaller than two subjects or lose
    /// arms entirely, which the model fitters reject on their own terms.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut covariates = Vec::with_capacity(indices.len() * self.p);
        let mut arms = Vec::with_capacity(indices.len());
        let mut outcomes = Vec::with_capacity(indices.len());
        for &i in indices {
            covariates.extend_from_slice(self.row(i));
            arms.push(self.arms[i]);
            outcomes.push(self.outcomes[i]);
        }
        Dataset { covariates, arms, outcomes, p: self.p, arm_count: self.arm_count }
    }

    /// The dataset with subject `i` removed; row order is otherwise kept.
    pub fn without_row(&self, i: usize) -> Dataset {
        let n = self.n();
        let mut covariates = Vec::with_capacity((n - 1) * self.p);
        covariates.extend_from_slice(&self.covariates[..i * self.p]);
        covariates.extend_from_slice(&self.covariates[(i + 1) * self.p..]);
        let mut arms = Vec::with_capacity(n - 1);
        arms.extend_from_slice(&self.arms[..i]);
        arms.extend_from_slice(&self.arms[i + 1..]);
        let mut outcomes = Vec::with_capacity(n - 1);
        outcomes.extend_from_slice(&self.outcomes[..i]);
        outcomes.extend_from_slice(&self.outcomes[i + 1..]);
        Dataset { covariates, arms, outcomes, p: self.p, arm_count: self.arm_count }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Dataset {
        Dataset::new(
            alloc::vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
            2,
            alloc::vec![0, 1, 0],
            alloc::vec![1.0, 2.0, 3.0],
            2,
        )
        .unwrap()
    }

    #[test]
    fn accessors() {
        let d = small();
        assert_eq!(d.n(), 3);
        assert_eq!(d.p(), 2);
        assert_eq!(d.arm_count(), 2);
        assert_eq!(d.row(1), &[2.0, 3.0]);
        assert_eq!(d.arm(1), 1);
        assert_eq!(d.outcome(2), 3.0);
        assert_eq!(d.arm_sizes(), alloc::vec![2, 1]);
    }

    #[test]
    fn rejects_out_of_range_arm() {
        let err = Dataset::new(
            alloc::vec![0.0, 1.0],
            1,
            alloc::vec![0, 5],
            alloc::vec![1.0, 2.0],
            3,
        )
        .unwrap_err();
        assert_eq!(err, DataError::ArmOutOfRange { row: 1, arm: 5, arms: 3 });
    }

    #[test]
    fn rejects_non_finite() {
        let err = Dataset::new(
            alloc::vec![0.0, 1.0],
            1,
            alloc::vec![0, 1],
            alloc::vec![1.0, f64::NAN],
            2,
        )
        .unwrap_err();
        assert_eq!(err, DataError::NonFinite { row: 1, field: "outcome" });
    }

    #[test]
    fn rejects_too_small() {
        let err =
            Dataset::new(alloc::vec![0.0], 1, alloc::vec![0], alloc::vec![1.0], 2).unwrap_err();
        assert_eq!(err, DataError::TooFewSubjects(1));
    }

    #[test]
    fn without_row_drops_exactly_one() {
        let d = small();
        let r = d.without_row(1);
        assert_eq!(r.n(), 2);
        assert_eq!(r.row(0), &[0.0, 1.0]);
        assert_eq!(r.row(1), &[4.0, 5.0]);
        assert_eq!(r.arms(), &[0, 0]);
        assert_eq!(r.outcomes(), &[1.0, 3.0]);
    }

    #[test]
    fn subset_keeps_order_given() {
        let d = small();
        let s = d.subset(&[2, 0]);
        assert_eq!(s.outcomes(), &[3.0, 1.0]);
        assert_eq!(s.arm_count(), 2);
    }
}
