//! Shapiro-Wilk test of normality.
//!
//! Follows Royston's AS R94 algorithm (the one behind R's `shapiro.test`
//! and SciPy's `shapiro`): approximate normal-order-statistic coefficients
//! from normal quantiles with a polynomial correction, compute W as the
//! squared correlation between the coefficients and the sorted sample, and
//! map `log(1 - W)` through a fitted normal approximation to get a p-value.
//! Valid for sample sizes 3 through 5000.

use alloc::vec;
use alloc::vec::Vec;

use super::normal;
use super::StatsError;

const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
const C3: [f64; 4] = [0.544, -0.39978, 0.025054, -6.714e-4];
const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
const G: [f64; 2] = [-2.273, 0.459];

fn poly(coefficients: &[f64], x: f64) -> f64 {
    let mut value = coefficients[coefficients.len() - 1];
    for c in coefficients.iter().rev().skip(1) {
        value = value * x + c;
    }
    value
}

/// The W statistic and p-value of the Shapiro-Wilk normality test.
///
/// Errors when the sample size is outside 3..=5000, contains non-finite
/// values, or is constant.
pub fn shapiro_wilk(sample: &[f64]) -> Result<(f64, f64), StatsError> {
    let n = sample.len();
    if !(3..=5000).contains(&n) {
        return Err(StatsError::SampleSize { n, min: 3, max: 5000 });
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut x: Vec<f64> = sample.to_vec();
    x.sort_unstable_by(f64::total_cmp);
    let range = x[n - 1] - x[0];
    if range == 0.0 {
        return Err(StatsError::ConstantSample);
    }

    // Coefficients for the lower half; the upper half is the mirror image.
    let half = n / 2;
    let mut a = vec![0.0; half + 1]; // 1-based, as in the published algorithm
    if n == 3 {
        a[1] = core::f64::consts::FRAC_1_SQRT_2;
    } else {
        let an25 = n as f64 + 0.25;
        let mut summ2 = 0.0;
        for (i, ai) in a.iter_mut().enumerate().skip(1) {
            *ai = normal::quantile((i as f64 - 0.375) / an25);
            summ2 += *ai * *ai;
        }
        summ2 *= 2.0;
        let ssumm2 = libm::sqrt(summ2);
        let rsn = 1.0 / libm::sqrt(n as f64);
        let a1 = poly(&C1, rsn) - a[1] / ssumm2;
        let (start, fac) = if n > 5 {
            let a2 = -a[2] / ssumm2 + poly(&C2, rsn);
            let fac = libm::sqrt(
                (summ2 - 2.0 * a[1] * a[1] - 2.0 * a[2] * a[2])
                    / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2),
            );
            a[2] = a2;
            (3, fac)
        } else {
            let fac = libm::sqrt((summ2 - 2.0 * a[1] * a[1]) / (1.0 - 2.0 * a1 * a1));
            (2, fac)
        };
        a[1] = a1;
        for ai in a.iter_mut().skip(start) {
            *ai /= -fac;
        }
    }

    // Full-length coefficient at sorted position q: negative mirror for the
    // lower half, zero in the middle of an odd-length sample.
    let coefficient = |q: usize| -> f64 {
        let opposite = n - 1 - q;
        if q < opposite {
            -a[q + 1]
        } else if q > opposite {
            a[opposite + 1]
        } else {
            0.0
        }
    };

    // W as a squared correlation, on range-scaled data for stability.
    let coef_mean: f64 = (0..n).map(coefficient).sum::<f64>() / n as f64;
    let x_mean: f64 = x.iter().map(|v| v / range).sum::<f64>() / n as f64;
    let mut ssa = 0.0;
    let mut ssx = 0.0;
    let mut sax = 0.0;
    for (q, xi) in x.iter().enumerate() {
        let ca = coefficient(q) - coef_mean;
        let cx = xi / range - x_mean;
        ssa += ca * ca;
        ssx += cx * cx;
        sax += ca * cx;
    }
    let ssassx = libm::sqrt(ssa * ssx);
    let w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
    let w = (1.0 - w1).clamp(0.0, 1.0);

    Ok((w, p_value(w, n)))
}

fn p_value(w: f64, n: usize) -> f64 {
    if n == 3 {
        // Exact for samples of three.
        let pi6 = 6.0 / core::f64::consts::PI;
        let p = pi6 * (libm::asin(libm::sqrt(w)) - core::f64::consts::FRAC_PI_3);
        return p.clamp(0.0, 1.0);
    }
    let an = n as f64;
    let y = libm::log(1.0 - w);
    let (z, mean, sd) = if n <= 11 {
        let gamma = poly(&G, an);
        if y >= gamma {
            return f64::MIN_POSITIVE; // W is at the representable boundary
        }
        let y = -libm::log(gamma - y);
        (y, poly(&C3, an), libm::exp(poly(&C4, an)))
    } else {
        let log_n = libm::log(an);
        (y, poly(&C5, log_n), libm::exp(poly(&C6, log_n)))
    };
    // Upper tail of the fitted normal.
    normal::cdf(-(z - mean) / sd).clamp(0.0, 1.0)
}
