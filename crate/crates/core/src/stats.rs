//! Small numeric helpers shared by the estimation and metrics modules.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub fn sample_sd(x: &[f64]) -> f64 {
    let m = mean(x);
    let ss: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (x.len() as f64 - 1.0)).sqrt()
}

#[cfg(test)]
/// Pearson correlation of two equally long slices.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    sxy / (sxx * syy).sqrt()
}

/// Correlation matrix of the columns of `m`.
pub fn correlation_matrix(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows() as f64;
    let mut centered = m.clone();
    for mut col in centered.column_iter_mut() {
        let mu = col.sum() / n;
        col.add_scalar_mut(-mu);
        let norm = col.norm();
        col /= norm;
    }
    let mut r = centered.transpose() * &centered;
    for i in 0..r.nrows() {
        r[(i, i)] = 1.0;
    }
    r
}

/// Solves the normal equations `rxx · b = rxy` of a standardized regression.
/// Returns `None` when `rxx` is not positive definite.
pub fn solve_spd(rxx: &DMatrix<f64>, rxy: &DVector<f64>) -> Option<DVector<f64>> {
    let chol = rxx.clone().cholesky()?;
    let b = chol.solve(rxy);
    // Cholesky succeeds on numerically singular matrices with tiny pivots.
    let min_pivot = chol.l().diagonal().iter().fold(f64::INFINITY, |a, &v| a.min(v));
    if min_pivot < 1e-7 || b.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(b)
}

/// Two-sided p-value of `t` under Student's t with `df` degrees of freedom.
pub fn two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    if t.is_nan() {
        return f64::NAN;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

/// Quantile `q` of Student's t with `df` degrees of freedom.
pub fn t_quantile(q: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df).expect("df > 0").inverse_cdf(q)
}

/// Linear-interpolation quantile of already sorted data (type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
