//! Kernel ridge regression Q-learning.
//!
//! For each treatment arm `a` the conditional mean outcome Q(x, a) is fitted
//! on that arm's subjects alone with a Gaussian kernel:
//!
//! ```text
//! (G_a + ridge * I) w_a = y_a,      G_a[i][j] = exp(-|x_i - x_j|^2 / (2 h^2))
//! ```
//!
//! Predictions are kernel expansions over the arm's support points, and the
//! learned treatment rule picks the arm with the highest prediction,
//! breaking ties toward the lowest arm index.

use alloc::vec::Vec;

use crate::data::{Arm, Dataset};
use crate::linalg::solve_spd;
use crate::rule::{BoxRule, DecisionRule, FitError, RuleFitter};

use alloc::boxed::Box;

/// Gaussian kernel bandwidth: a fixed value, or the median heuristic
/// (median pairwise Euclidean distance among all covariate rows).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
struct ArmModel {
    support: Vec<f64>, // row-major, count x dim
    weights: Vec<f64>,
    count: usize,
}

/// Per-arm kernel ridge regressions sharing one bandwidth and ridge.
#[derive(Debug, Clone, PartialEq)]
pub struct KrrQModel {
    arms: Vec<ArmModel>,
    bandwidth: f64,
    ridge: f64,
    dim: usize,
}

/// Median pairwise Euclidean distance among all covariate rows.
///
/// Errors with [`FitError::DegenerateMedian`] when the median is zero, which
/// happens when more than half of all row pairs coincide.
pub fn median_heuristic(data: &Dataset) -> Result<f64, FitError> {
    let n = data.n();
    let mut distances = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        let xi = data.row(i);
        for j in (i + 1)..n {
            distances.push(libm::sqrt(squared_distance(xi, data.row(j))));
        }
    }
    distances.sort_unstable_by(f64::total_cmp);
    let m = distances.len();
    let median = if m % 2 == 1 {
        distances[m / 2]
    } else {
        0.5 * (distances[m / 2 - 1] + distances[m / 2])
    };
    if median == 0.0 {
        return Err(FitError::DegenerateMedian);
    }
    Ok(median)
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut d2 = 0.0;
    for (ai, bi) in a.iter().zip(b) {
        let d = ai - bi;
        d2 += d * d;
    }
    d2
}

/// Fits one Gaussian-kernel ridge regression per arm.
///
/// Every arm needs at least two subjects. The linear solve is a Cholesky
/// factorization of `G + ridge * I`; if that fails, one retry with a ten
/// times larger ridge is attempted before reporting the arm as singular.
pub fn fit_krr_q(data: &Dataset, bandwidth: Bandwidth, ridge: f64) -> Result<KrrQModel, FitError> {
    if !(ridge > 0.0 && ridge.is_finite()) {
        return Err(FitError::BadRidge(ridge));
    }
    let h = match bandwidth {
        Bandwidth::Fixed(h) if h > 0.0 && h.is_finite() => h,
        Bandwidth::Fixed(h) => return Err(FitError::BadBandwidth(h)),
        Bandwidth::Auto => median_heuristic(data)?,
    };

    let dim = data.p();
    let scale = -1.0 / (2.0 * h * h);
    let mut arms = Vec::with_capacity(data.arm_count());
    for arm in 0..data.arm_count() {
        let indices: Vec<usize> =
            (0..data.n()).filter(|&i| data.arm(i) == arm).collect();
        let count = indices.len();
        if count < 2 {
            return Err(FitError::ArmTooSmall { arm, count, min: 2 });
        }

        let mut support = Vec::with_capacity(count * dim);
        let mut outcomes = Vec::with_capacity(count);
        for &i in &indices {
            support.extend_from_slice(data.row(i));
            outcomes.push(data.outcome(i));
        }

        let weights = solve_kernel_system(&support, &outcomes, count, dim, scale, ridge)
            .ok_or(FitError::Singular { arm })?;
        arms.push(ArmModel { support, weights, count });
    }
    Ok(KrrQModel { arms, bandwidth: h, ridge, dim })
}

fn gram(support: &[f64], count: usize, dim: usize, scale: f64, ridge: f64) -> Vec<f64> {
    let mut g = alloc::vec![0.0; count * count];
    for i in 0..count {
        let xi = &support[i * dim..(i + 1) * dim];
        g[i * count + i] = 1.0 + ridge;
        for j in (i + 1)..count {
            let xj = &support[j * dim..(j + 1) * dim];
            let k = libm::exp(scale * squared_distance(xi, xj));
            g[i * count + j] = k;
            g[j * count + i] = k;
        }
    }
    g
}

fn solve_kernel_system(
    support: &[f64],
    outcomes: &[f64],
    count: usize,
    dim: usize,
    scale: f64,
    ridge: f64,
) -> Option<Vec<f64>> {
    let g = gram(support, count, dim, scale, ridge);
    if let Ok(w) = solve_spd(&g, outcomes, count) {
        return Some(w);
    }
    let g = gram(support, count, dim, scale, 10.0 * ridge);
    solve_spd(&g, outcomes, count).ok()
}

impl KrrQModel {
    pub fn arm_count(&self) -> usize {
        self.arms.len()
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Dual weights of one arm's regression.
    pub fn weights(&self, arm: Arm) -> &[f64] {
        &self.arms[arm].weights
    }

    /// Q(x, arm): the kernel expansion over the arm's support points.
    pub fn predict(&self, x: &[f64], arm: Arm) -> Result<f64, FitError> {
        if arm >= self.arms.len() {
            return Err(FitError::ArmOutOfRange { arm, arms: self.arms.len() });
        }
        Ok(self.predict_unchecked(x, arm))
    }

    fn predict_unchecked(&self, x: &[f64], arm: Arm) -> f64 {
        assert_eq!(x.len(), self.dim, "covariate vector has the wrong dimension");
        let model = &self.arms[arm];
        let scale = -1.0 / (2.0 * self.bandwidth * self.bandwidth);
        let mut sum = 0.0;
        for (i, w) in model.weights.iter().enumerate() {
            let xi = &model.support[i * self.dim..(i + 1) * self.dim];
            sum += w * libm::exp(scale * squared_distance(x, xi));
        }
        sum
    }

    /// A bound on the prediction's rate of change: the Gaussian kernel's
    /// gradient never exceeds `exp(-1/2) / h`, so the fitted function is
    /// Lipschitz with constant `sum(|w_i|) * exp(-1/2) / h` per arm.
    pub fn lipschitz_bound(&self, arm: Arm) -> f64 {
        let total: f64 = self.arms[arm].weights.iter().map(|w| libm::fabs(*w)).sum();
        total * libm::exp(-0.5) / self.bandwidth
    }
}

/// The argmax-Q treatment rule induced by a fitted model.
#[derive(Debug, Clone, PartialEq)]
pub struct KrrRule {
    model: KrrQModel,
}

impl KrrRule {
    pub fn model(&self) -> &KrrQModel {
        &self.model
    }
}

impl DecisionRule for KrrRule {
    fn assign(&self, x: &[f64]) -> Arm {
        let mut best = 0;
        let mut best_q = self.model.predict_unchecked(x, 0);
        for arm in 1..self.model.arms.len() {
            let q = self.model.predict_unchecked(x, arm);
            if q > best_q {
                best = arm;
                best_q = q;
            }
        }
        best
    }
}

/// Wraps a fitted Q-model into its argmax rule (lowest arm index on ties).
pub fn rule_from_q(model: KrrQModel) -> KrrRule {
    KrrRule { model }
}

/// A kernel ridge regression training pipeline with frozen hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrrFitter {
    pub bandwidth: Bandwidth,
    pub ridge: f64,
}

impl KrrFitter {
    pub fn new(bandwidth: Bandwidth, ridge: f64) -> Self {
        Self { bandwidth, ridge }
    }

    /// Resolves an `Auto` bandwidth into a fixed one via the median
    /// heuristic on the given data, so that later refits on subsets (as in
    /// the jackknife) all share the same kernel.
    pub fn resolved(&self, data: &Dataset) -> Result<KrrFitter, FitError> {
        match self.bandwidth {
            Bandwidth::Fixed(_) => Ok(*self),
            Bandwidth::Auto => Ok(KrrFitter {
                bandwidth: Bandwidth::Fixed(median_heuristic(data)?),
                ridge: self.ridge,
            }),
        }
    }
}

impl RuleFitter for KrrFitter {
    fn fit(&self, data: &Dataset) -> Result<BoxRule, FitError> {
        let model = fit_krr_q(data, self.bandwidth, self.ridge)?;
        Ok(Box::new(rule_from_q(model)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn two_arm_data(xs: Vec<f64>, arms: Vec<Arm>, ys: Vec<f64>) -> Dataset {
        Dataset::new(xs, 1, arms, ys, 2).unwrap()
    }

    #[test]
    fn constant_arm_is_recovered_at_small_ridge() {
        // Both arms constant; predictions at training points match within 1e-6.
        let data = two_arm_data(
            vec![0.0, 1.0, 2.0, 3.0, 0.5, 1.5, 2.5, 3.5],
            vec![0, 0, 0, 0, 1, 1, 1, 1],
            vec![4.0, 4.0, 4.0, 4.0, -2.0, -2.0, -2.0, -2.0],
        );
        let model = fit_krr_q(&data, Bandwidth::Fixed(1.0), 1e-8).unwrap();
        for i in 0..data.n() {
            let expect = data.outcome(i);
            let got = model.predict(data.row(i), data.arm(i)).unwrap();
            assert!((got - expect).abs() < 1e-6, "subject {i}: {got} vs {expect}");
        }
    }

    #[test]
    fn zero_bandwidth_is_rejected() {
        let data = two_arm_data(
            vec![0.0, 1.0, 2.0, 3.0],
            vec![0, 0, 1, 1],
            vec![1.0, 2.0, 3.0, 4.0],
        );
        assert_eq!(
            fit_krr_q(&data, Bandwidth::Fixed(0.0), 1e-2).unwrap_err(),
            FitError::BadBandwidth(0.0)
        );
        assert_eq!(
            fit_krr_q(&data, Bandwidth::Fixed(1.0), 0.0).unwrap_err(),
            FitError::BadRidge(0.0)
        );
    }

    #[test]
    fn undersized_arm_is_rejected() {
        let data = two_arm_data(
            vec![0.0, 1.0, 2.0],
            vec![0, 0, 1],
            vec![1.0, 2.0, 3.0],
        );
        assert_eq!(
            fit_krr_q(&data, Bandwidth::Fixed(1.0), 1e-2).unwrap_err(),
            FitError::ArmTooSmall { arm: 1, count: 1, min: 2 }
        );
    }

    #[test]
    fn far_field_prediction_decays_to_zero() {
        let data = two_arm_data(
            vec![0.0, 1.0, 0.5, 1.5],
            vec![0, 0, 1, 1],
            vec![5.0, 7.0, 1.0, 2.0],
        );
        let model = fit_krr_q(&data, Bandwidth::Fixed(1.0), 1e-2).unwrap();
        let far = [50.0];
        assert!(model.predict(&far, 0).unwrap().abs() < 1e-6);
        assert!(model.predict(&far, 1).unwrap().abs() < 1e-6);
    }

    #[test]
    fn single_support_point_solves_one_by_one_system() {
        // (1 + ridge) w = y at the support point, so the prediction there is
        // y / (1 + ridge), within 1e-4 of y for ridge = 1e-8.
        let w = solve_kernel_system(&[2.0], &[3.0], 1, 1, -0.5, 1e-8).unwrap();
        assert!((w[0] - 3.0 / (1.0 + 1e-8)).abs() < 1e-12);
        assert!((w[0] - 3.0).abs() < 1e-4);
    }

    #[test]
    fn symmetric_pair_gets_symmetric_weights() {
        let data = two_arm_data(
            vec![-1.0, 1.0, 0.0, 2.0],
            vec![0, 0, 1, 1],
            vec![3.0, 3.0, 0.0, 1.0],
        );
        let model = fit_krr_q(&data, Bandwidth::Fixed(1.0), 1e-3).unwrap();
        let w = model.weights(0);
        assert!((w[0] - w[1]).abs() < 1e-12);
        // At the midpoint both kernel terms are equal, so the prediction is
        // the sum of two identical dual-weighted terms.
        let k = libm::exp(-0.5);
        let expect = k * (w[0] + w[1]);
        assert!((model.predict(&[0.0], 0).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn argmax_rule_breaks_ties_low() {
        // Hand-build a model where predictions at x=0 are (1.0, 3.0, 2.0).
        let model = KrrQModel {
            arms: vec![
                ArmModel { support: vec![0.0], weights: vec![1.0], count: 1 },
                ArmModel { support: vec![0.0], weights: vec![3.0], count: 1 },
                ArmModel { support: vec![0.0], weights: vec![2.0], count: 1 },
            ],
            bandwidth: 1.0,
            ridge: 1e-2,
            dim: 1,
        };
        let rule = rule_from_q(model);
        assert_eq!(rule.assign(&[0.0]), 1);

        let tied = KrrQModel {
            arms: vec![
                ArmModel { support: vec![0.0], weights: vec![2.0], count: 1 },
                ArmModel { support: vec![0.0], weights: vec![2.0], count: 1 },
                ArmModel { support: vec![0.0], weights: vec![1.0], count: 1 },
            ],
            bandwidth: 1.0,
            ridge: 1e-2,
            dim: 1,
        };
        assert_eq!(rule_from_q(tied).assign(&[0.0]), 0);

        let zeros = KrrQModel {
            arms: vec![
                ArmModel { support: vec![0.0], weights: vec![0.0], count: 1 },
                ArmModel { support: vec![0.0], weights: vec![0.0], count: 1 },
                ArmModel { support: vec![0.0], weights: vec![0.0], count: 1 },
            ],
            bandwidth: 1.0,
            ridge: 1e-2,
            dim: 1,
        };
        assert_eq!(rule_from_q(zeros).assign(&[5.0]), 0);
    }

    #[test]
    fn median_heuristic_matches_hand_count() {
        // Rows 0, 3, 6 on a line: distances 3, 3, 6 -> median 3.
        let data = Dataset::new(
            vec![0.0, 3.0, 6.0],
            1,
            vec![0, 1, 0],
            vec![0.0, 0.0, 0.0],
            2,
        )
        .unwrap();
        assert_eq!(median_heuristic(&data).unwrap(), 3.0);
    }

    #[test]
    fn median_heuristic_rejects_coincident_rows() {
        let data = Dataset::new(
            vec![1.0, 1.0, 1.0],
            1,
            vec![0, 1, 0],
            vec![0.0, 0.0, 0.0],
            2,
        )
        .unwrap();
        assert_eq!(median_heuristic(&data).unwrap_err(), FitError::DegenerateMedian);
    }

    #[test]
    fn predictions_respect_lipschitz_bound() {
        let data = two_arm_data(
            vec![0.0, 0.7, 1.9, 3.1, 0.4, 1.2, 2.6, 3.8],
            vec![0, 0, 0, 0, 1, 1, 1, 1],
            vec![1.0, -0.5, 2.0, 0.3, -1.0, 0.8, 1.5, -0.2],
        );
        let model = fit_krr_q(&data, Bandwidth::Fixed(0.8), 1e-2).unwrap();
        for arm in 0..2 {
            let bound = model.lipschitz_bound(arm);
            let mut x = -1.0;
            while x < 5.0 {
                let step = 0.013;
                let a = model.predict(&[x], arm).unwrap();
                let b = model.predict(&[x + step], arm).unwrap();
                assert!(
                    (a - b).abs() <= bound * step * (1.0 + 1e-9),
                    "arm {arm} at x={x}"
                );
                x += step;
            }
        }
    }
}
