//! Model comparison and study-level statistics.

pub mod normal;
mod shapiro;

pub use shapiro::shapiro_wilk;

use alloc::vec::Vec;

use crate::value::ValueEstimate;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("residual vectors have different lengths ({left} vs {right})")]
    ResidualMismatch { left: usize, right: usize },
    #[error("need residuals from at least {min} subjects, have {n}")]
    TooFewResiduals { n: usize, min: usize },
    #[error("the residual difference is identically zero; the comparison is degenerate")]
    DegenerateComparison,
    #[error("sample size {n} is outside the supported range {min}..={max}")]
    SampleSize { n: usize, min: usize, max: usize },
    #[error("sample is constant; the statistic is undefined")]
    ConstantSample,
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("input is empty")]
    Empty,
    #[error("level must lie strictly inside (0, 1), got {0}")]
    BadLevel(f64),
}

/// Direction of the model-comparison test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Alternative {
    /// One-sided: the first model's value exceeds the second's.
    #[default]
    Greater,
    TwoSided,
}

impl Alternative {
    pub fn as_str(&self) -> &'static str {
        match self {
            Alternative::Greater => "greater",
            Alternative::TwoSided => "two-sided",
        }
    }
}

/// Outcome of the two-sample Z-test comparing two value estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonResult {
    pub t_stat: f64,
    pub p_value: f64,
    pub se_diff: f64,
    pub v_pmm: f64,
    pub v_zom: f64,
}

/// Standard error of the value difference from paired residuals:
/// `sqrt(sum((R_pmm_i - R_zom_i)^2) / (n (n - 1)))`.
fn se_of_difference(pmm: &ValueEstimate, zom: &ValueEstimate) -> Result<f64, StatsError> {
    let n = pmm.residuals.len();
    if zom.residuals.len() != n {
        return Err(StatsError::ResidualMismatch { left: n, right: zom.residuals.len() });
    }
    if n < 2 {
        return Err(StatsError::TooFewResiduals { n, min: 2 });
    }
    let sum_sq: f64 = pmm
        .residuals
        .iter()
        .zip(&zom.residuals)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum();
    let se = libm::sqrt(sum_sq / (n as f64 * (n as f64 - 1.0)));
    if se == 0.0 {
        return Err(StatsError::DegenerateComparison);
    }
    Ok(se)
}

/// Two-sample Z-test of the first estimate's superiority, one-sided by
/// default. The test statistic divides the value difference by the standard
/// error of the paired residual differences.
pub fn z_compare(pmm: &ValueEstimate, zom: &ValueEstimate) -> Result<ComparisonResult, StatsError> {
    z_compare_with(pmm, zom, Alternative::Greater)
}

/// [`z_compare`] with an explicit alternative hypothesis.
pub fn z_compare_with(
    pmm: &ValueEstimate,
    zom: &ValueEstimate,
    alternative: Alternative,
) -> Result<ComparisonResult, StatsError> {
    let se_diff = se_of_difference(pmm, zom)?;
    let t_stat = (pmm.value - zom.value) / se_diff;
    let p_value = match alternative {
        Alternative::Greater => normal::cdf(-t_stat),
        Alternative::TwoSided => 2.0 * normal::cdf(-libm::fabs(t_stat)),
    };
    Ok(ComparisonResult { t_stat, p_value, se_diff, v_pmm: pmm.value, v_zom: zom.value })
}

/// The comparison statistic re-centered at the true value difference of the
/// two fitted rules. Under the estimators' asymptotic normality this is
/// approximately standard normal.
pub fn shifted_statistic(
    pmm: &ValueEstimate,
    zom: &ValueEstimate,
    v0_pmm: f64,
    v0_zom: f64,
) -> Result<f64, StatsError> {
    let se_diff = se_of_difference(pmm, zom)?;
    Ok(((pmm.value - zom.value) - (v0_pmm - v0_zom)) / se_diff)
}

/// Fraction of `(value, std_error, truth)` records whose central confidence
/// interval at the given level contains the truth.
pub fn coverage(records: &[(f64, f64, f64)], level: f64) -> Result<f64, StatsError> {
    if records.is_empty() {
        return Err(StatsError::Empty);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::BadLevel(level));
    }
    let z = normal::quantile((1.0 + level) / 2.0);
    let covered = records
        .iter()
        .filter(|(value, std_error, truth)| libm::fabs(truth - value) <= z * std_error)
        .count();
    Ok(covered as f64 / records.len() as f64)
}

/// Fraction of p-values strictly below `alpha`.
pub fn power(p_values: &[f64], alpha: f64) -> Result<f64, StatsError> {
    if p_values.is_empty() {
        return Err(StatsError::Empty);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::BadLevel(alpha));
    }
    let rejected = p_values.iter().filter(|&&p| p < alpha).count();
    Ok(rejected as f64 / p_values.len() as f64)
}

/// Q-Q pairs of a sample against the standard normal: the sorted sample
/// matched with normal quantiles at plotting positions `(i - 0.5) / m`.
pub fn normal_qq(sample: &[f64]) -> Result<Vec<(f64, f64)>, StatsError> {
    if sample.len() < 2 {
        return Err(StatsError::SampleSize { n: sample.len(), min: 2, max: usize::MAX });
    }
    let mut sorted = sample.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let m = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &s)| (normal::quantile((i as f64 + 0.5) / m), s))
        .collect())
}

/// Q-Q pairs of a sample against an empirical reference sample. Equal sizes
/// pair the order statistics directly; otherwise the reference is read at
/// the sample's plotting positions by linear interpolation.
pub fn empirical_qq(sample: &[f64], reference: &[f64]) -> Result<Vec<(f64, f64)>, StatsError> {
    if sample.len() < 2 || reference.len() < 2 {
        return Err(StatsError::SampleSize {
            n: sample.len().min(reference.len()),
            min: 2,
            max: usize::MAX,
        });
    }
    let mut sorted = sample.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let mut reference = reference.to_vec();
    reference.sort_unstable_by(f64::total_cmp);

    if sorted.len() == reference.len() {
        return Ok(reference.iter().zip(&sorted).map(|(&r, &s)| (r, s)).collect());
    }
    let m = sorted.len() as f64;
    let last = reference.len() - 1;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let position = ((i as f64 + 0.5) / m) * last as f64;
            let lo = position as usize;
            let hi = (lo + 1).min(last);
            let t = position - lo as f64;
            (reference[lo] * (1.0 - t) + reference[hi] * t, s)
        })
        .collect())
}
