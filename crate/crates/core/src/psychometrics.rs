//! Reliability and validity statistics for reflective measurement models.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::pls::FitResult;
use crate::stats::solve_spd;

/// Correlation matrix of one block's standardized items.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCorrelation {
    pub construct: String,
    pub matrix: DMatrix<f64>,
}

impl BlockCorrelation {
    pub fn new(construct: impl Into<String>, matrix: DMatrix<f64>) -> Result<Self> {
        let k = matrix.nrows();
        if k == 0 || matrix.ncols() != k {
            return Err(Error::InvalidArgument(
                "block correlation must be square and non-empty".into(),
            ));
        }
        for i in 0..k {
            if (matrix[(i, i)] - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument("block correlation needs a unit diagonal".into()));
            }
            for j in 0..i {
                let v = matrix[(i, j)];
                if (v - matrix[(j, i)]).abs() > 1e-9 || v.abs() > 1.0 + 1e-9 {
                    return Err(Error::InvalidArgument(
                        "block correlation must be symmetric with entries in [-1, 1]".into(),
                    ));
                }
            }
        }
        Ok(BlockCorrelation {
            construct: construct.into(),
            matrix,
        })
    }

    /// K×K block with every off-diagonal entry equal to `r`.
    pub fn uniform(construct: impl Into<String>, k: usize, r: f64) -> Result<Self> {
        Self::new(construct, DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { r }))
    }

    pub fn from_fit(fit: &FitResult, construct: usize) -> Self {
        let block = fit.spec.blocks()[construct].clone();
        let x = fit.data.matrix.columns(block.start, block.len());
        let mut m = x.transpose() * x / (fit.n() as f64 - 1.0);
        for i in 0..m.nrows() {
            m[(i, i)] = 1.0;
        }
        BlockCorrelation {
            construct: fit.spec.constructs[construct].name.clone(),
            matrix: m,
        }
    }

    pub fn k(&self) -> usize {
        self.matrix.nrows()
    }

    fn mean_off_diagonal(&self) -> f64 {
        let k = self.k();
        let mut sum = 0.0;
        for i in 0..k {
            for j in 0..i {
                sum += self.matrix[(i, j)];
            }
        }
        sum / (k * (k - 1) / 2) as f64
    }

    fn require_multi_item(&self, what: &str) -> Result<()> {
        if self.k() < 2 {
            return Err(Error::NotApplicable(format!(
                "{what} of single-item construct `{}`",
                self.construct
            )));
        }
        Ok(())
    }
}

/// Standardized Cronbach's alpha from the mean inter-item correlation.
pub fn cronbach_alpha(s: &BlockCorrelation) -> Result<f64> {
    s.require_multi_item("Cronbach's alpha")?;
    let k = s.k() as f64;
    let r = s.mean_off_diagonal();
    Ok(k * r / (1.0 + (k - 1.0) * r))
}

/// Dijkstra–Henseler ρ_A. The weights are rescaled to unit composite variance
/// (w'Sw = 1) before use, so raw outer weights may be passed.
pub fn rho_a(s: &BlockCorrelation, weights: &[f64]) -> Result<f64> {
    s.require_multi_item("rho_A")?;
    if weights.len() != s.k() {
        return Err(Error::InvalidArgument(format!(
            "{} weights for a {}-item block",
            weights.len(),
            s.k()
        )));
    }
    let w = DVector::from_column_slice(weights);
    let var = (w.transpose() * &s.matrix * &w)[(0, 0)];
    if !(var > 0.0) {
        return Err(Error::Degenerate(format!(
            "composite of `{}` has no variance",
            s.construct
        )));
    }
    let w = w / var.sqrt();
    let ww = w.norm_squared();
    let off_s = (w.transpose() * &s.matrix * &w)[(0, 0)] - w.iter().map(|v| v * v).sum::<f64>();
    let off_ww = ww * ww - w.iter().map(|v| v.powi(4)).sum::<f64>();
    if off_ww.abs() < 1e-15 {
        return Err(Error::Degenerate(format!("rho_A weights of `{}`", s.construct)));
    }
    Ok(ww * ww * off_s / off_ww)
}

/// Composite reliability ρ_c from a block's loadings.
pub fn rho_c(loadings: &[f64]) -> f64 {
    let sum: f64 = loadings.iter().sum();
    let error: f64 = loadings.iter().map(|l| 1.0 - l * l).sum();
    sum * sum / (sum * sum + error)
}

/// Average variance extracted: mean squared loading.
pub fn ave(loadings: &[f64]) -> f64 {
    loadings.iter().map(|l| l * l).sum::<f64>() / loadings.len() as f64
}

/// Lower-triangular construct × construct table; `None` marks blank or
/// not-applicable cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstructMatrix {
    pub names: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
}

impl ConstructMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        self.cells[i][j]
    }

    /// Builds a table from a published lower triangle (row-major, no diagonal).
    pub fn from_lower(names: &[&str], lower: &[&[f64]]) -> Self {
        let k = names.len();
        let cells = (0..k)
            .map(|i| (0..k).map(|j| if j < i { Some(lower[i][j]) } else { None }).collect())
            .collect();
        ConstructMatrix {
            names: names.iter().map(|s| s.to_string()).collect(),
            cells,
        }
    }
}

/// Heterotrait–monotrait ratio from an item correlation matrix ordered like
/// `spec.item_names()`. Pairs involving a single-item construct are `None`.
pub fn htmt(item_corr: &DMatrix<f64>, spec: &ModelSpec) -> Result<ConstructMatrix> {
    let p = spec.item_count();
    if item_corr.shape() != (p, p) {
        return Err(Error::InvalidArgument(format!(
            "item correlation matrix is {:?}, model has {p} items",
            item_corr.shape()
        )));
    }
    let blocks = spec.blocks();
    let mono: Vec<Option<f64>> = blocks
        .iter()
        .map(|b| {
            if b.len() < 2 {
                return None;
            }
            let mut sum = 0.0;
            let mut count = 0;
            for i in b.clone() {
                for j in b.start..i {
                    sum += item_corr[(i, j)].abs();
                    count += 1;
                }
            }
            Some(sum / count as f64)
        })
        .collect();
    let c = blocks.len();
    let mut cells = vec![vec![None; c]; c];
    for a in 0..c {
        for b in 0..a {
            let (Some(ma), Some(mb)) = (mono[a], mono[b]) else {
                continue;
            };
            let mut sum = 0.0;
            for i in blocks[a].clone() {
                for j in blocks[b].clone() {
                    sum += item_corr[(i, j)].abs();
                }
            }
            let hetero = sum / (blocks[a].len() * blocks[b].len()) as f64;
            cells[a][b] = Some(hetero / (ma * mb).sqrt());
        }
    }
    Ok(ConstructMatrix {
        names: spec.constructs.iter().map(|c| c.name.clone()).collect(),
        cells,
    })
}

/// Pairs whose HTMT exceeds `threshold` (1.0 for the strict criterion).
pub fn htmt_violations(m: &ConstructMatrix, threshold: f64) -> Vec<(String, String, f64)> {
    let mut out = Vec::new();
    for (i, row) in m.cells.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if let Some(v) = v {
                if *v > threshold {
                    out.push((m.names[i].clone(), m.names[j].clone(), *v));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FornellLarcker {
    pub names: Vec<String>,
    /// √AVE on the diagonal, latent correlations below it.
    pub matrix: ConstructMatrix,
    pub pass: Vec<bool>,
}

impl FornellLarcker {
    pub fn all_pass(&self) -> bool {
        self.pass.iter().all(|&p| p)
    }
}

/// Criterion from √AVE values and a full latent correlation matrix.
pub fn fornell_larcker_from(names: &[&str], sqrt_ave: &[f64], corr: &DMatrix<f64>) -> FornellLarcker {
    let c = names.len();
    let pass = (0..c)
        .map(|j| (0..c).filter(|&k| k != j).all(|k| sqrt_ave[j] > corr[(j, k)].abs()))
        .collect();
    let cells = (0..c)
        .map(|i| {
            (0..c)
                .map(|j| match j.cmp(&i) {
                    std::cmp::Ordering::Less => Some(corr[(i, j)]),
                    std::cmp::Ordering::Equal => Some(sqrt_ave[i]),
                    std::cmp::Ordering::Greater => None,
                })
                .collect()
        })
        .collect();
    let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    FornellLarcker {
        matrix: ConstructMatrix {
            names: names.clone(),
            cells,
        },
        names,
        pass,
    }
}

/// Criterion from a published lower-triangular table with √AVE on the diagonal.
pub fn fornell_larcker_table(names: &[&str], lower_with_diag: &[&[f64]]) -> FornellLarcker {
    let c = names.len();
    let sqrt_ave: Vec<f64> = (0..c).map(|i| lower_with_diag[i][i]).collect();
    let corr = DMatrix::from_fn(c, c, |i, j| {
        if i == j {
            1.0
        } else if j < i {
            lower_with_diag[i][j]
        } else {
            lower_with_diag[j][i]
        }
    });
    fornell_larcker_from(names, &sqrt_ave, &corr)
}

pub fn fornell_larcker(fit: &FitResult) -> Result<FornellLarcker> {
    if !fit.converged {
        return Err(Error::NotConverged(fit.iterations));
    }
    let names = fit.spec.construct_names();
    let sqrt_ave: Vec<f64> = (0..names.len()).map(|j| ave(fit.block_loadings(j)).sqrt()).collect();
    Ok(fornell_larcker_from(&names, &sqrt_ave, &fit.latent_correlations()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VifEntry {
    pub endogenous: String,
    pub predictor: String,
    /// `f64::INFINITY` under perfect collinearity.
    pub vif: f64,
}

impl VifEntry {
    pub fn is_collinear(&self) -> bool {
        self.vif.is_infinite()
    }
}

/// Inner VIF of each predictor of each endogenous construct, given the
/// latent correlation matrix in construct order.
pub fn inner_vif_from(spec: &ModelSpec, corr: &DMatrix<f64>) -> Vec<VifEntry> {
    let mut out = Vec::new();
    for j in spec.endogenous() {
        let preds = spec.predecessors(j);
        for (a, &k) in preds.iter().enumerate() {
            let others: Vec<usize> = preds
                .iter()
                .enumerate()
                .filter(|(b, _)| *b != a)
                .map(|(_, &i)| i)
                .collect();
            let vif = if others.is_empty() {
                1.0
            } else {
                let rxx = DMatrix::from_fn(others.len(), others.len(), |x, y| corr[(others[x], others[y])]);
                let rxy = DVector::from_fn(others.len(), |x, _| corr[(others[x], k)]);
                match solve_spd(&rxx, &rxy) {
                    Some(b) => {
                        let r2 = b.dot(&rxy);
                        if r2 >= 1.0 - 1e-12 {
                            f64::INFINITY
                        } else {
                            (1.0 / (1.0 - r2)).max(1.0)
                        }
                    }
                    None => f64::INFINITY,
                }
            };
            out.push(VifEntry {
                endogenous: spec.constructs[j].name.clone(),
                predictor: spec.constructs[k].name.clone(),
                vif,
            });
        }
    }
    out
}

pub fn inner_vif(fit: &FitResult) -> Vec<VifEntry> {
    inner_vif_from(&fit.spec, &fit.latent_correlations())
}

/// Correlation of every item with every latent score (items × constructs).
pub fn cross_loadings(fit: &FitResult) -> DMatrix<f64> {
    fit.data.matrix.transpose() * &fit.latent_scores / (fit.n() as f64 - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    /// Below the flag threshold; kept.
    Flag,
    /// Below the drop threshold; listed for removal.
    Drop,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadingFlag {
    pub item: String,
    pub construct: String,
    pub loading: f64,
    pub severity: Severity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenOptions {
    pub drop_below: f64,
    pub flag_below: f64,
}

impl Default for ScreenOptions {
    fn default() -> Self {
        ScreenOptions {
            drop_below: 0.40,
            flag_below: 0.70,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Screening {
    pub flags: Vec<LoadingFlag>,
    /// Model without the items listed for removal, when there are any.
    pub reduced: Option<ModelSpec>,
}

impl Screening {
    pub fn dropped(&self) -> Vec<&str> {
        self.flags
            .iter()
            .filter(|f| f.severity == Severity::Drop)
            .map(|f| f.item.as_str())
            .collect()
    }
}

pub fn low_loading_screen(fit: &FitResult, options: ScreenOptions) -> Result<Screening> {
    if !fit.converged {
        return Err(Error::NotConverged(fit.iterations));
    }
    let mut flags = Vec::new();
    for (j, c) in fit.spec.constructs.iter().enumerate() {
        for (item, &loading) in c.items.iter().zip(fit.block_loadings(j)) {
            let severity = if loading < options.drop_below {
                Severity::Drop
            } else if loading < options.flag_below {
                Severity::Flag
            } else {
                continue;
            };
            flags.push(LoadingFlag {
                item: item.name.clone(),
                construct: c.name.clone(),
                loading,
                severity,
            });
        }
    }
    let mut screening = Screening { flags, reduced: None };
    let dropped = screening.dropped();
    if !dropped.is_empty() {
        let reduced = fit.spec.without_items(&dropped)?;
        screening.reduced = Some(reduced);
    }
    Ok(screening)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstructReliability {
    pub construct: String,
    /// `None` for single-item constructs.
    pub alpha: Option<f64>,
    pub rho_a: Option<f64>,
    pub rho_c: f64,
    pub ave: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub reliability: Vec<ConstructReliability>,
    pub htmt: ConstructMatrix,
    pub fornell_larcker: FornellLarcker,
    pub vif: Vec<VifEntry>,
    pub flags: Vec<LoadingFlag>,
}

pub fn reliability(fit: &FitResult) -> Result<Vec<ConstructReliability>> {
    fit.spec
        .constructs
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let s = BlockCorrelation::from_fit(fit, j);
            let loadings = fit.block_loadings(j);
            let multi = s.k() >= 2;
            Ok(ConstructReliability {
                construct: c.name.clone(),
                alpha: if multi { Some(cronbach_alpha(&s)?) } else { None },
                rho_a: if multi {
                    Some(rho_a(&s, fit.outer_weights[j].as_slice())?)
                } else {
                    None
                },
                rho_c: rho_c(loadings),
                ave: ave(loadings),
            })
        })
        .collect()
}

/// Full measurement and structural battery for a converged fit.
pub fn evaluate(fit: &FitResult, screen: ScreenOptions) -> Result<MetricsReport> {
    if !fit.converged {
        return Err(Error::NotConverged(fit.iterations));
    }
    let item_corr = crate::stats::correlation_matrix(&fit.data.matrix);
    Ok(MetricsReport {
        reliability: reliability(fit)?,
        htmt: htmt(&item_corr, &fit.spec)?,
        fornell_larcker: fornell_larcker(fit)?,
        vif: inner_vif(fit),
        flags: low_loading_screen(fit, screen)?.flags,
    })
}
