//! Bootstrap inference on structural paths and two-group comparisons of
//! construct scores and numeric demographics.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, StructuralPath};
use crate::panel::{item_matrix_for, ItemMatrix, Panel};
use crate::pls::{standardize, Estimator, FitOptions, StandardizedData};
use crate::stats::{mean, quantile_sorted, sample_sd, t_quantile, two_sided_p};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BootstrapOptions {
    pub resamples: usize,
    pub seed: u64,
    /// Worker threads; `None` uses the global rayon pool. Results do not depend on it.
    pub threads: Option<usize>,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        BootstrapOptions {
            resamples: 5000,
            seed: 0,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathInference {
    pub path: StructuralPath,
    /// Estimate on the original sample (O).
    pub original: f64,
    /// Mean of the resample estimates (M).
    pub mean: f64,
    /// Sample standard deviation of the resample estimates (STDEV).
    pub stdev: f64,
    /// |O| / STDEV; infinite when STDEV is zero.
    pub t: f64,
    pub p: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapResult {
    pub paths: Vec<PathInference>,
    /// Requested resample count.
    pub resamples: usize,
    /// Resamples that produced a converged estimate.
    pub valid: usize,
    pub discarded: usize,
    pub seed: u64,
}

/// Two-sided p-value of a bootstrap t statistic on `b - 1` degrees of freedom.
pub fn p_value(t: f64, b: usize) -> f64 {
    two_sided_p(t, (b.max(2) - 1) as f64)
}

/// O/M/STDEV/T/p and percentile interval from resample estimates.
pub fn summarize_path(path: StructuralPath, original: f64, estimates: &[f64]) -> PathInference {
    let mut sorted = estimates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let constant = sorted.first() == sorted.last();
    let (m, stdev) = if constant {
        (sorted[0], 0.0)
    } else {
        (mean(estimates), sample_sd(estimates))
    };
    let t = if stdev == 0.0 {
        f64::INFINITY
    } else {
        original.abs() / stdev
    };
    PathInference {
        path,
        original,
        mean: m,
        stdev,
        t,
        p: p_value(t, estimates.len()),
        ci_low: quantile_sorted(&sorted, 0.025),
        ci_high: quantile_sorted(&sorted, 0.975),
    }
}

fn resample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn refit(estimator: &Estimator, raw: &ItemMatrix, seed: u64, index: usize) -> Option<Vec<f64>> {
    let n = raw.data.nrows();
    let mut rng = resample_rng(seed, index);
    let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    let resampled = ItemMatrix {
        data: DMatrix::from_fn(n, raw.data.ncols(), |i, j| raw.data[(rows[i], j)]),
        labels: raw.labels.clone(),
    };
    let z: StandardizedData = standardize(&resampled).ok()?;
    let est = estimator.estimate(&z.matrix).ok()?;
    if !est.converged {
        return None;
    }
    estimator.structural(&est.scores).ok().map(|(coef, _)| coef)
}

/// Bootstraps path coefficients from an item matrix in `spec`'s item order.
pub fn bootstrap_matrix(
    raw: &ItemMatrix,
    spec: &ModelSpec,
    options: FitOptions,
    boot: BootstrapOptions,
) -> Result<BootstrapResult> {
    if boot.resamples < 2 {
        return Err(Error::InvalidArgument("bootstrap needs at least 2 resamples".into()));
    }
    let estimator = Estimator::new(Arc::new(spec.clone()), options)?;
    let original = estimator.fit_standardized(standardize(raw)?)?;
    if !original.converged {
        return Err(Error::NotConverged(original.iterations));
    }

    let run = || -> Vec<Option<Vec<f64>>> {
        (0..boot.resamples)
            .into_par_iter()
            .map(|b| refit(&estimator, raw, boot.seed, b))
            .collect()
    };
    let draws = match boot.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };

    let estimates: Vec<Vec<f64>> = draws.into_iter().flatten().collect();
    let discarded = boot.resamples - estimates.len();
    if discarded * 10 > boot.resamples || estimates.len() < 2 {
        return Err(Error::BootstrapFailures {
            failed: discarded,
            total: boot.resamples,
        });
    }
    if discarded > 0 {
        log::warn!("{discarded} of {} bootstrap resamples discarded", boot.resamples);
    }
    let paths = spec
        .paths
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let column: Vec<f64> = estimates.iter().map(|e| e[k]).collect();
            summarize_path(p.clone(), original.path_coefficients[k], &column)
        })
        .collect();
    Ok(BootstrapResult {
        paths,
        resamples: boot.resamples,
        valid: estimates.len(),
        discarded,
        seed: boot.seed,
    })
}

pub fn bootstrap(
    panel: &Panel,
    spec: &ModelSpec,
    options: FitOptions,
    boot: BootstrapOptions,
) -> Result<BootstrapResult> {
    if panel.is_empty() {
        return Err(Error::EmptyPanel);
    }
    bootstrap_matrix(&item_matrix_for(panel, spec)?, spec, options, boot)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupTest {
    /// Student's t with pooled variance.
    #[default]
    Pooled,
    /// Welch's unequal-variance t with Welch–Satterthwaite df.
    Welch,
}

impl fmt::Display for GroupTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupTest::Pooled => "pooled",
            GroupTest::Welch => "welch",
        })
    }
}

impl std::str::FromStr for GroupTest {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pooled" | "student" => Ok(GroupTest::Pooled),
            "welch" => Ok(GroupTest::Welch),
            other => Err(Error::InvalidArgument(format!(
                "group test `{other}` (expected pooled or welch)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupSummary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl GroupSummary {
    /// Summary with a t-based 95% interval for the mean.
    pub fn from_stats(n: usize, mean: f64, sd: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewRows { needed: 2, got: n });
        }
        let half = t_quantile(0.975, (n - 1) as f64) * sd / (n as f64).sqrt();
        Ok(GroupSummary {
            n,
            mean,
            sd,
            ci_low: mean - half,
            ci_high: mean + half,
        })
    }

    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::TooFewRows {
                needed: 2,
                got: values.len(),
            });
        }
        Self::from_stats(values.len(), mean(values), sample_sd(values))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoSampleTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

pub fn two_sample_test(a: &GroupSummary, b: &GroupSummary, test: GroupTest) -> TwoSampleTest {
    let (n1, n2) = (a.n as f64, b.n as f64);
    let (v1, v2) = (a.sd * a.sd, b.sd * b.sd);
    let diff = a.mean - b.mean;
    let (se, df) = match test {
        GroupTest::Pooled => {
            let df = n1 + n2 - 2.0;
            let pooled = ((n1 - 1.0) * v1 + (n2 - 1.0) * v2) / df;
            ((pooled * (1.0 / n1 + 1.0 / n2)).sqrt(), df)
        }
        GroupTest::Welch => {
            let (q1, q2) = (v1 / n1, v2 / n2);
            let df = (q1 + q2).powi(2) / (q1 * q1 / (n1 - 1.0) + q2 * q2 / (n2 - 1.0));
            ((q1 + q2).sqrt(), if df.is_finite() { df } else { n1 + n2 - 2.0 })
        }
    };
    if diff == 0.0 {
        return TwoSampleTest { t: 0.0, df, p: 1.0 };
    }
    let t = diff / se;
    TwoSampleTest {
        t,
        df,
        p: two_sided_p(t, df),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupCompareRow {
    pub group: String,
    pub label: String,
    pub summary: GroupSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupComparison {
    pub variable: String,
    pub rows: [GroupCompareRow; 2],
    pub test: GroupTest,
    pub t: f64,
    pub df: f64,
    pub p: f64,
    /// Rows belonging to neither group.
    pub excluded: usize,
}

/// Per-row values of a construct (raw item mean) or numeric demographic.
pub fn variable_values(panel: &Panel, variable: &str) -> Result<Vec<f64>> {
    if panel.model().construct_index(variable).is_some() {
        return panel.construct_means(variable);
    }
    panel
        .demographic_column(variable)?
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            v.trim().parse::<f64>().map_err(|_| Error::Cell {
                row: i + 1,
                column: variable.to_string(),
                message: format!("`{v}` is not numeric"),
            })
        })
        .collect()
}

pub fn group_compare(
    panel: &Panel,
    group_field: &str,
    groups: [&str; 2],
    variable: &str,
    test: GroupTest,
) -> Result<GroupComparison> {
    let labels = panel.demographic_column(group_field)?;
    let field = panel.model().demographic(group_field).expect("column exists");
    let values = variable_values(panel, variable)?;
    let mut split: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut excluded = 0;
    for (label, v) in labels.iter().zip(values) {
        match groups.iter().position(|g| g == label) {
            Some(k) => split[k].push(v),
            None => excluded += 1,
        }
    }
    let summaries = [
        GroupSummary::from_values(&split[0])?,
        GroupSummary::from_values(&split[1])?,
    ];
    let outcome = two_sample_test(&summaries[0], &summaries[1], test);
    let row = |k: usize| GroupCompareRow {
        group: groups[k].to_string(),
        label: field.label(groups[k]).to_string(),
        summary: summaries[k],
    };
    Ok(GroupComparison {
        variable: variable.to_string(),
        rows: [row(0), row(1)],
        test,
        t: outcome.t,
        df: outcome.df,
        p: outcome.p,
        excluded,
    })
}

pub fn welch_compare(panel: &Panel, group_field: &str, groups: [&str; 2], variable: &str) -> Result<GroupComparison> {
    group_compare(panel, group_field, groups, variable, GroupTest::Welch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn p_value_reference_points() {
        assert_eq!(p_value(0.0, 5000), 1.0);
        assert_abs_diff_eq!(p_value(3.275, 5000), 0.0011, epsilon = 5e-4);
        assert_abs_diff_eq!(p_value(1.86, 5000), 0.063, epsilon = 5e-4);
        assert!(p_value(2.0, 5000) > p_value(2.5, 5000));
    }

    #[test]
    fn constant_resamples() {
        let s = summarize_path(StructuralPath::new("A", "B"), 0.1, &[0.1; 50]);
        assert_eq!(s.stdev, 0.0);
        assert!(s.t.is_infinite());
        assert_eq!(s.p, 0.0);
        assert_eq!(s.mean, 0.1);
    }

    #[test]
    fn t_stdev_identity() {
        let est = [0.81, 0.84, 0.86, 0.83, 0.79, 0.85];
        let s = summarize_path(StructuralPath::new("A", "B"), -0.839, &est);
        assert_abs_diff_eq!(s.t * s.stdev, 0.839, epsilon = 1e-12);
        assert!(s.ci_low <= s.ci_high);
    }

    #[test]
    fn ci_from_published_row() {
        let g = GroupSummary::from_stats(145, 1.79, 1.32).unwrap();
        assert_abs_diff_eq!(g.ci_low, 1.57, epsilon = 0.01);
        assert_abs_diff_eq!(g.ci_high, 2.00, epsilon = 0.01);
        assert!(GroupSummary::from_stats(1, 1.0, 0.0).is_err());
    }

    #[test]
    fn identical_groups() {
        let g = GroupSummary::from_values(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        for test in [GroupTest::Pooled, GroupTest::Welch] {
            let r = two_sample_test(&g, &g, test);
            assert_eq!(r.p, 1.0);
            assert_eq!(r.t, 0.0);
        }
    }

    #[test]
    fn welch_is_symmetric() {
        let a = GroupSummary::from_stats(145, 1.79, 1.32).unwrap();
        let b = GroupSummary::from_stats(149, 2.09, 1.30).unwrap();
        let ab = two_sample_test(&a, &b, GroupTest::Welch);
        let ba = two_sample_test(&b, &a, GroupTest::Welch);
        assert_abs_diff_eq!(ab.p, ba.p, epsilon = 1e-15);
        assert_abs_diff_eq!(ab.p, 0.05, epsilon = 0.01);
        assert!(ab.df > 290.0 && ab.df < 292.0);
    }

    #[test]
    fn resample_streams_are_reproducible() {
        let a: Vec<u64> = (0..3).map(|_| resample_rng(7, 3).random()).collect();
        let b: Vec<u64> = (0..3).map(|_| resample_rng(7, 3).random()).collect();
        assert_eq!(a, b);
        let c: u64 = resample_rng(7, 4).random();
        assert_ne!(a[0], c);
    }
}
