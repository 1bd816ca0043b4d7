//! PLS path model estimation.
//!
//! Items are z-scored, every block starts from unit outer weights and the
//! estimator alternates outer (composite) and inner (proxy) approximations
//! until the outer weights settle. Outer weights are Mode A; the inner
//! weighting scheme is configurable and defaults to the path scheme.
//!
//! Latent scores are unit-variance composites whose sign is fixed so each
//! correlates non-negatively with its block's first indicator. That makes
//! the whole fit a deterministic function of the data.

use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, Role, StructuralPath};
use crate::panel::{item_matrix_for, ItemMatrix, Panel};
use crate::stats::solve_spd;

#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedData {
    /// n×p z-scores.
    pub matrix: DMatrix<f64>,
    pub means: Vec<f64>,
    /// Sample standard deviations (n − 1).
    pub sds: Vec<f64>,
}

pub fn standardize(items: &ItemMatrix) -> Result<StandardizedData> {
    let n = items.data.nrows();
    if n < 2 {
        return Err(Error::TooFewRows { needed: 2, got: n });
    }
    let mut matrix = items.data.clone();
    let mut means = Vec::with_capacity(matrix.ncols());
    let mut sds = Vec::with_capacity(matrix.ncols());
    for (j, mut col) in matrix.column_iter_mut().enumerate() {
        let mean = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
        let sd = (col.norm_squared() / (n as f64 - 1.0)).sqrt();
        // relative test: an exactly constant column can still leave rounding residue
        if !(sd > 1e-12 * mean.abs().max(1.0)) {
            return Err(Error::ZeroVariance(items.labels[j].clone()));
        }
        col /= sd;
        means.push(mean);
        sds.push(sd);
    }
    Ok(StandardizedData { matrix, means, sds })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightingScheme {
    #[default]
    Path,
    Centroid,
    Factor,
}

impl std::str::FromStr for WeightingScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "path" => Ok(WeightingScheme::Path),
            "centroid" => Ok(WeightingScheme::Centroid),
            "factor" => Ok(WeightingScheme::Factor),
            other => Err(Error::InvalidArgument(format!(
                "weighting scheme `{other}` (expected path, centroid or factor)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the largest absolute outer-weight change.
    pub tolerance: f64,
    pub weighting_scheme: WeightingScheme,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 300,
            tolerance: 1e-7,
            weighting_scheme: WeightingScheme::Path,
        }
    }
}

impl FitOptions {
    pub fn check(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::InvalidArgument("max-iterations must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub spec: Arc<ModelSpec>,
    pub data: StandardizedData,
    /// Per construct, scaled so the composite has unit variance.
    pub outer_weights: Vec<DVector<f64>>,
    /// Per item in model order: correlation of the item with its own latent score.
    pub loadings: Vec<f64>,
    /// n × constructs, unit variance, construct order.
    pub latent_scores: DMatrix<f64>,
    /// Aligned with `spec.paths`.
    pub path_coefficients: Vec<f64>,
    /// Per construct; `None` for exogenous constructs.
    pub r_squared: Vec<Option<f64>>,
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn n(&self) -> usize {
        self.latent_scores.nrows()
    }

    pub fn blocks(&self) -> Vec<Range<usize>> {
        self.spec.blocks()
    }

    pub fn loading(&self, item: &str) -> Option<f64> {
        let idx = self.spec.item_names().iter().position(|i| *i == item)?;
        Some(self.loadings[idx])
    }

    pub fn block_loadings(&self, construct: usize) -> &[f64] {
        &self.loadings[self.spec.blocks()[construct].clone()]
    }

    pub fn path_coefficient(&self, from: &str, to: &str) -> Option<f64> {
        self.spec
            .paths
            .iter()
            .position(|p| p.from == from && p.to == to)
            .map(|i| self.path_coefficients[i])
    }

    /// Correlation matrix of the latent scores.
    pub fn latent_correlations(&self) -> DMatrix<f64> {
        let mut r = self.latent_scores.transpose() * &self.latent_scores / (self.n() as f64 - 1.0);
        for i in 0..r.nrows() {
            r[(i, i)] = 1.0;
        }
        r
    }
}

/// Precomputed model structure; reused across bootstrap refits.
#[derive(Debug, Clone)]
pub(crate) struct Estimator {
    spec: Arc<ModelSpec>,
    blocks: Vec<Range<usize>>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
    options: FitOptions,
}

/// Converged (or last-iterate) estimates without the data they came from.
pub(crate) struct Estimates {
    pub weights: Vec<DVector<f64>>,
    pub scores: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl Estimator {
    pub fn new(spec: Arc<ModelSpec>, options: FitOptions) -> Result<Self> {
        options.check()?;
        let c = spec.constructs.len();
        Ok(Estimator {
            blocks: spec.blocks(),
            preds: (0..c).map(|j| spec.predecessors(j)).collect(),
            succs: (0..c).map(|j| spec.successors(j)).collect(),
            spec,
            options,
        })
    }

    fn composite(&self, x: &DMatrix<f64>, j: usize, w: &mut DVector<f64>) -> DVector<f64> {
        let block = &self.blocks[j];
        let xj = x.columns(block.start, block.len());
        let mut y = &xj * &*w;
        let n = x.nrows() as f64;
        let sd = (y.norm_squared() / (n - 1.0)).sqrt();
        *w /= sd;
        y /= sd;
        // sign anchor on the block's first indicator
        if y.dot(&x.column(block.start)) < 0.0 {
            w.neg_mut();
            y.neg_mut();
        }
        y
    }

    fn regress(&self, r: &DMatrix<f64>, j: usize) -> Result<DVector<f64>> {
        let p = &self.preds[j];
        let rxx = DMatrix::from_fn(p.len(), p.len(), |a, b| r[(p[a], p[b])]);
        let rxy = DVector::from_fn(p.len(), |a, _| r[(p[a], j)]);
        solve_spd(&rxx, &rxy).ok_or_else(|| Error::Singular(self.spec.constructs[j].name.clone()))
    }

    /// Inner weights for construct `j`: `(construct, weight)` pairs.
    fn inner_weights(&self, r: &DMatrix<f64>, j: usize) -> Result<Vec<(usize, f64)>> {
        let mut out = Vec::new();
        match self.options.weighting_scheme {
            WeightingScheme::Path => {
                if !self.preds[j].is_empty() {
                    let b = self.regress(r, j)?;
                    out.extend(self.preds[j].iter().copied().zip(b.iter().copied()));
                }
                out.extend(self.succs[j].iter().map(|&k| (k, r[(j, k)])));
            }
            WeightingScheme::Centroid | WeightingScheme::Factor => {
                for &k in self.preds[j].iter().chain(&self.succs[j]) {
                    let e = if self.options.weighting_scheme == WeightingScheme::Centroid {
                        r[(j, k)].signum()
                    } else {
                        r[(j, k)]
                    };
                    out.push((k, e));
                }
            }
        }
        Ok(out)
    }

    pub fn estimate(&self, x: &DMatrix<f64>) -> Result<Estimates> {
        let n = x.nrows();
        let c = self.blocks.len();
        let mut weights: Vec<DVector<f64>> = self
            .blocks
            .iter()
            .map(|b| DVector::from_element(b.len(), 1.0))
            .collect();
        let mut scores = DMatrix::zeros(n, c);
        for j in 0..c {
            let y = self.composite(x, j, &mut weights[j]);
            scores.set_column(j, &y);
        }

        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.options.max_iterations {
            iterations += 1;
            let r = scores.transpose() * &scores / (n as f64 - 1.0);
            let mut proxies = DMatrix::zeros(n, c);
            for j in 0..c {
                let e = self.inner_weights(&r, j)?;
                if e.is_empty() {
                    proxies.set_column(j, &scores.column(j));
                    continue;
                }
                let mut z = proxies.column_mut(j);
                for (k, ek) in e {
                    z.axpy(ek, &scores.column(k), 1.0);
                }
            }

            let mut change: f64 = 0.0;
            for j in 0..c {
                let block = &self.blocks[j];
                let z = proxies.column(j);
                let z_norm = z.norm();
                if z_norm == 0.0 {
                    return Err(Error::Degenerate(format!(
                        "inner proxy of `{}` vanished",
                        self.spec.constructs[j].name
                    )));
                }
                // Mode A: weights proportional to corr(item, proxy); items have unit variance.
                let xj = x.columns(block.start, block.len());
                let mut w = xj.transpose() * z / (z_norm * (n as f64 - 1.0).sqrt());
                let y = self.composite(x, j, &mut w);
                change = change.max((&w - &weights[j]).amax());
                weights[j] = w;
                scores.set_column(j, &y);
            }
            if change < self.options.tolerance {
                converged = true;
                break;
            }
        }
        Ok(Estimates {
            weights,
            scores,
            iterations,
            converged,
        })
    }

    /// Per-endogenous OLS on predecessor scores: coefficients aligned with
    /// `spec.paths` and R² per construct.
    pub fn structural(&self, scores: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<Option<f64>>)> {
        let n = scores.nrows() as f64;
        let r = scores.transpose() * scores / (n - 1.0);
        let c = self.blocks.len();
        let mut coef = vec![0.0; self.spec.paths.len()];
        let mut r2 = vec![None; c];
        for j in 0..c {
            if self.preds[j].is_empty() {
                continue;
            }
            let b = self.regress(&r, j)?;
            let mut explained = 0.0;
            for (a, &i) in self.preds[j].iter().enumerate() {
                explained += b[a] * r[(i, j)];
                let from = &self.spec.constructs[i].name;
                let to = &self.spec.constructs[j].name;
                let idx = self
                    .spec
                    .paths
                    .iter()
                    .position(|p| &p.from == from && &p.to == to)
                    .expect("predecessor comes from a path");
                coef[idx] = b[a];
            }
            r2[j] = Some(explained.clamp(0.0, 1.0));
        }
        Ok((coef, r2))
    }

    pub fn fit_standardized(&self, data: StandardizedData) -> Result<FitResult> {
        let est = self.estimate(&data.matrix)?;
        let n = data.matrix.nrows() as f64;
        let mut loadings = vec![0.0; data.matrix.ncols()];
        for (j, block) in self.blocks.iter().enumerate() {
            let y = est.scores.column(j);
            for k in block.clone() {
                loadings[k] = (data.matrix.column(k).dot(&y) / (n - 1.0)).clamp(-1.0, 1.0);
            }
        }
        let (path_coefficients, r_squared) = self.structural(&est.scores)?;
        if !est.converged {
            log::warn!("PLS did not converge within {} iterations", est.iterations);
        }
        Ok(FitResult {
            spec: Arc::clone(&self.spec),
            data,
            outer_weights: est.weights,
            loadings,
            latent_scores: est.scores,
            path_coefficients,
            r_squared,
            iterations: est.iterations,
            converged: est.converged,
        })
    }
}

/// Fits the model to an item matrix whose columns follow `spec`'s item order.
pub fn fit_matrix(items: &ItemMatrix, spec: &ModelSpec, options: FitOptions) -> Result<FitResult> {
    let expected = spec.item_names();
    if items.labels.iter().map(String::as_str).ne(expected.iter().copied()) {
        return Err(Error::InvalidArgument(
            "item matrix columns do not follow the model's item order".into(),
        ));
    }
    if items.data.nrows() <= items.data.ncols() {
        log::warn!(
            "{} observations for {} items; estimates will be unstable",
            items.data.nrows(),
            items.data.ncols()
        );
    }
    let estimator = Estimator::new(Arc::new(spec.clone()), options)?;
    estimator.fit_standardized(standardize(items)?)
}

pub fn fit_pls(panel: &Panel, spec: &ModelSpec, options: FitOptions) -> Result<FitResult> {
    if panel.is_empty() {
        return Err(Error::EmptyPanel);
    }
    fit_matrix(&item_matrix_for(panel, spec)?, spec, options)
}

pub fn latent_scores(fit: &FitResult) -> Result<&DMatrix<f64>> {
    if !fit.converged {
        return Err(Error::NotConverged(fit.iterations));
    }
    Ok(&fit.latent_scores)
}

pub fn r_squared(fit: &FitResult, construct: &str) -> Result<f64> {
    let j = fit
        .spec
        .construct_index(construct)
        .ok_or_else(|| Error::UnknownField(construct.to_string()))?;
    if fit.spec.role(j) == Role::Exogenous {
        return Err(Error::Exogenous(construct.to_string()));
    }
    Ok(fit.r_squared[j].expect("endogenous constructs carry R²"))
}

/// Path estimates paired with their paths, in model order.
pub fn path_table(fit: &FitResult) -> Vec<(&StructuralPath, f64)> {
    fit.spec
        .paths
        .iter()
        .zip(fit.path_coefficients.iter().copied())
        .collect()
}
