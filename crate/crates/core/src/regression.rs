//! Small ordinary-least-squares solvers with an intercept.
//!
//! Both solvers work on mean-centred sums, which keeps the normal equations
//! well conditioned when regressors sit far from zero (frequencies in MT/s,
//! bit counts up to 512).

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegressionError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("non-finite sample value")]
    NonFinite,
    #[error("input slices differ in length")]
    LengthMismatch,
}

/// `y = intercept + slope * x`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
}

impl LineFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// `y = intercept + slope_a * a + slope_b * b`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneFit {
    pub intercept: f64,
    pub slope_a: f64,
    pub slope_b: f64,
    pub r_squared: f64,
}

// Relative thresholds below which a centred sum of squares (or 1 - rho^2
// between the two regressors) is treated as zero.
const VARIANCE_EPS: f64 = 1e-12;
const COLLINEAR_EPS: f64 = 1e-10;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn check(xs: &[&[f64]], needed: usize) -> Result<usize, RegressionError> {
    let n = xs[0].len();
    if xs.iter().any(|s| s.len() != n) {
        return Err(RegressionError::LengthMismatch);
    }
    if n < needed {
        return Err(RegressionError::TooFewSamples { needed, got: n });
    }
    if xs.iter().flat_map(|s| s.iter()).any(|v| !v.is_finite()) {
        return Err(RegressionError::NonFinite);
    }
    Ok(n)
}

fn degenerate(centred_ss: f64, raw: &[f64]) -> bool {
    let scale: f64 = raw.iter().map(|v| v * v).sum();
    centred_ss <= VARIANCE_EPS * scale.max(f64::MIN_POSITIVE)
}

/// Coefficient of determination, `1 - SS_res / SS_tot`, clamped to [0, 1].
/// For a least-squares fit with an intercept this equals the squared Pearson
/// correlation between fitted and observed values.
pub fn r_squared(fitted: &[f64], observed: &[f64]) -> f64 {
    let m = mean(observed);
    let ss_tot: f64 = observed.iter().map(|y| (y - m).powi(2)).sum();
    let ss_res: f64 = fitted.iter().zip(observed).map(|(f, y)| (y - f).powi(2)).sum();
    let scale: f64 = observed.iter().map(|y| y * y).sum();
    // constant observations leave only rounding noise in ss_tot
    if ss_tot <= VARIANCE_EPS * scale {
        return if ss_res <= VARIANCE_EPS * scale {
            1.0
        } else {
            0.0
        };
    }
    (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit, RegressionError> {
    check(&[xs, ys], 2)?;
    let (mx, my) = (mean(xs), mean(ys));
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if degenerate(sxx, xs) {
        return Err(RegressionError::RankDeficient);
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let fitted: Vec<f64> = xs.iter().map(|x| intercept + slope * x).collect();
    Ok(LineFit { intercept, slope, r_squared: r_squared(&fitted, ys) })
}

pub fn fit_plane(a: &[f64], b: &[f64], ys: &[f64]) -> Result<PlaneFit, RegressionError> {
    check(&[a, b, ys], 3)?;
    let (ma, mb, my) = (mean(a), mean(b), mean(ys));
    let (mut saa, mut sbb, mut sab, mut say, mut sby) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((x1, x2), y) in a.iter().zip(b).zip(ys) {
        let (da, db, dy) = (x1 - ma, x2 - mb, y - my);
        saa += da * da;
        sbb += db * db;
        sab += da * db;
        say += da * dy;
        sby += db * dy;
    }
    if degenerate(saa, a) || degenerate(sbb, b) {
        return Err(RegressionError::RankDeficient);
    }
    let det = saa * sbb - sab * sab;
    if det <= COLLINEAR_EPS * saa * sbb {
        return Err(RegressionError::RankDeficient);
    }
    let slope_a = (say * sbb - sby * sab) / det;
    let slope_b = (sby * saa - say * sab) / det;
    let intercept = my - slope_a * ma - slope_b * mb;
    let fitted: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x1, x2)| intercept + slope_a * x1 + slope_b * x2)
        .collect();
    Ok(PlaneFit { intercept, slope_a, slope_b, r_squared: r_squared(&fitted, ys) })
}
