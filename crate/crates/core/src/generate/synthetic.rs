//! Planted factor-model panels with known loadings, latent correlations,
//! group biases and duplicate rows.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::{DemographicKind, ModelSpec, Preset};
use crate::panel::{Panel, Provenance, RespondentRow};

/// Loading per indicator: one value for all items or a map by item name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Lambda {
    Scalar(f64),
    PerItem(BTreeMap<String, f64>),
}

/// How a demographic column is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "draw", rename_all = "lowercase", deny_unknown_fields)]
pub enum DemographicDraw {
    /// Uniform integer in `[min, max]`.
    Uniform { min: i64, max: i64 },
    /// One of `values`, uniformly or with the given weights.
    Choice {
        values: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
}

/// Latent mean shift for respondents with `field == value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupBias {
    pub field: String,
    pub value: String,
    pub shift: f64,
    /// Affected constructs; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constructs: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedModel {
    /// Latent correlation matrix in the model's construct order.
    pub phi: Vec<Vec<f64>>,
    pub lambda: Lambda,
    #[serde(default)]
    pub bias: Vec<GroupBias>,
    #[serde(default)]
    pub duplicate_rate: f64,
    /// Ascending thresholds on the standardized item value, one fewer than
    /// scale points. Defaults to equal-probability normal quantiles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutpoints: Option<Vec<f64>>,
    #[serde(default)]
    pub demographics: BTreeMap<String, DemographicDraw>,
}

/// Latent correlations implied by standardized recursive path coefficients.
/// Exogenous pairs not listed in `exogenous` are uncorrelated.
pub fn implied_phi(
    spec: &ModelSpec,
    betas: &[(&str, &str, f64)],
    exogenous: &[(&str, &str, f64)],
) -> Result<Vec<Vec<f64>>> {
    let m = spec.constructs.len();
    let index = |name: &str| {
        spec.construct_index(name)
            .ok_or_else(|| Error::Planted(format!("unknown construct `{name}`")))
    };
    let mut beta = DMatrix::<f64>::zeros(m, m);
    for &(from, to, b) in betas {
        let (f, t) = (index(from)?, index(to)?);
        if !spec.paths.iter().any(|p| p.from == from && p.to == to) {
            return Err(Error::Planted(format!("`{from} -> {to}` is not a model path")));
        }
        beta[(t, f)] = b;
    }
    let mut phi = DMatrix::<f64>::identity(m, m);
    for &(a, b, r) in exogenous {
        let (i, j) = (index(a)?, index(b)?);
        if !spec.predecessors(i).is_empty() || !spec.predecessors(j).is_empty() {
            return Err(Error::Planted(format!("`{a}`–`{b}` is not an exogenous pair")));
        }
        phi[(i, j)] = r;
        phi[(j, i)] = r;
    }

    // topological order; the model is known to be acyclic
    let mut order: Vec<usize> = Vec::with_capacity(m);
    while order.len() < m {
        for j in 0..m {
            if !order.contains(&j) && spec.predecessors(j).iter().all(|p| order.contains(p)) {
                order.push(j);
            }
        }
    }
    let mut placed: Vec<usize> = Vec::with_capacity(m);
    for &j in &order {
        let preds = spec.predecessors(j);
        if !preds.is_empty() {
            for &k in &placed {
                let c: f64 = preds.iter().map(|&p| beta[(j, p)] * phi[(p, k)]).sum();
                phi[(j, k)] = c;
                phi[(k, j)] = c;
            }
            let explained: f64 = preds
                .iter()
                .flat_map(|&p| preds.iter().map(move |&q| (p, q)))
                .map(|(p, q)| beta[(j, p)] * beta[(j, q)] * phi[(p, q)])
                .sum();
            if explained >= 1.0 {
                return Err(Error::Planted(format!(
                    "paths into `{}` explain {explained:.3} of a unit variance",
                    spec.constructs[j].name
                )));
            }
        }
        placed.push(j);
    }
    Ok((0..m).map(|i| (0..m).map(|j| phi[(i, j)]).collect()).collect())
}

fn default_demographics(spec: &ModelSpec, preset: Preset) -> BTreeMap<String, DemographicDraw> {
    let uniform = |min, max| DemographicDraw::Uniform { min, max };
    let choice = |v: &[&str]| DemographicDraw::Choice {
        values: v.iter().map(|s| s.to_string()).collect(),
        weights: None,
    };
    let mut d: BTreeMap<String, DemographicDraw> = BTreeMap::new();
    d.insert("age".into(), uniform(18, 25));
    d.insert("gender".into(), choice(&["1", "2"]));
    d.insert("major".into(), choice(&["CS", "Math", "Eng", "Bio", "Bus", "Psych"]));
    match preset {
        Preset::Study1 => {
            d.insert("year".into(), uniform(1, 4));
            d.insert("chatgpt_exp".into(), uniform(0, 4));
        }
        Preset::Study2 => {
            d.insert("english_ability".into(), uniform(1, 5));
            d.insert("vr_familiarity".into(), uniform(1, 5));
        }
    }
    d.retain(|k, _| spec.demographic(k).is_some());
    d
}

impl PlantedModel {
    /// Planted model from standardized path coefficients.
    pub fn from_paths(
        spec: &ModelSpec,
        betas: &[(&str, &str, f64)],
        exogenous: &[(&str, &str, f64)],
        lambda: f64,
    ) -> Result<Self> {
        Ok(PlantedModel {
            phi: implied_phi(spec, betas, exogenous)?,
            lambda: Lambda::Scalar(lambda),
            bias: Vec::new(),
            duplicate_rate: 0.0,
            cutpoints: None,
            demographics: BTreeMap::new(),
        })
    }

    /// Defaults shaped after the published structural estimates, with female
    /// respondents shifted upward and the reported duplicate share.
    pub fn preset(preset: Preset, spec: &ModelSpec) -> Result<Self> {
        let (betas, exo, dup): (Vec<(&str, &str, f64)>, Vec<(&str, &str, f64)>, f64) = match preset {
            Preset::Study1 => (
                vec![
                    ("PEOU", "PU", 0.84),
                    ("CPLAY", "BI", 0.19),
                    ("PEOU", "BI", -0.10),
                    ("PU", "BI", 0.82),
                ],
                vec![("PEOU", "CPLAY", 0.83)],
                0.2625,
            ),
            Preset::Study2 => (
                vec![
                    ("IMGM", "PEU", 0.125),
                    ("IMGM", "PU", 0.078),
                    ("IMRN", "PEU", 0.33),
                    ("IMRN", "PU", 0.379),
                    ("INTR", "PEU", 0.396),
                    ("INTR", "PU", 0.441),
                    ("PEU", "ITU", 0.673),
                    ("PU", "ITU", 0.214),
                ],
                vec![
                    ("IMGM", "IMRN", 0.749),
                    ("IMGM", "INTR", 0.543),
                    ("IMRN", "INTR", 0.564),
                ],
                0.40,
            ),
        };
        let mut m = Self::from_paths(spec, &betas, &exo, 0.9)?;
        m.duplicate_rate = dup;
        m.demographics = default_demographics(spec, preset);
        if spec.demographic("gender").is_some() {
            m.bias.push(GroupBias {
                field: "gender".into(),
                value: "2".into(),
                shift: 0.3,
                constructs: None,
            });
        }
        Ok(m)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("planted model serializes")
    }

    fn loadings(&self, spec: &ModelSpec) -> Result<Vec<f64>> {
        let values: Vec<f64> = match &self.lambda {
            Lambda::Scalar(l) => vec![*l; spec.item_count()],
            Lambda::PerItem(map) => spec
                .item_names()
                .iter()
                .map(|n| {
                    map.get(*n)
                        .copied()
                        .ok_or_else(|| Error::Planted(format!("no loading for item `{n}`")))
                })
                .collect::<Result<_>>()?,
        };
        if let Some(l) = values.iter().find(|l| !(**l > 0.0 && **l <= 1.0)) {
            return Err(Error::Planted(format!("loading {l} outside (0, 1]")));
        }
        Ok(values)
    }

    fn cholesky(&self, m: usize) -> Result<DMatrix<f64>> {
        if self.phi.len() != m || self.phi.iter().any(|r| r.len() != m) {
            return Err(Error::Planted(format!("phi must be {m}×{m}")));
        }
        let phi = DMatrix::from_fn(m, m, |i, j| self.phi[i][j]);
        for i in 0..m {
            if (phi[(i, i)] - 1.0).abs() > 1e-9 {
                return Err(Error::Planted("phi must have a unit diagonal".into()));
            }
            for j in 0..i {
                if (phi[(i, j)] - phi[(j, i)]).abs() > 1e-9 {
                    return Err(Error::Planted("phi is not symmetric".into()));
                }
            }
        }
        phi.cholesky()
            .map(|c| c.l())
            .ok_or_else(|| Error::Planted("phi is not positive definite".into()))
    }

    fn thresholds(&self, points: usize) -> Result<Vec<f64>> {
        match &self.cutpoints {
            Some(c) => {
                if c.len() + 1 != points || c.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Planted(format!(
                        "cutpoints must be {} ascending values",
                        points - 1
                    )));
                }
                Ok(c.clone())
            }
            None => {
                let n = Normal::standard();
                Ok((1..points).map(|k| n.inverse_cdf(k as f64 / points as f64)).collect())
            }
        }
    }
}

/// Output of the planted generator before discretization is discarded.
#[derive(Debug, Clone)]
pub struct SyntheticSample {
    pub panel: Panel,
    /// Latent draws per row (after bias), construct order.
    pub latents: DMatrix<f64>,
    /// Continuous item values per row before discretization.
    pub continuous: DMatrix<f64>,
}

fn draw_demographic(rng: &mut ChaCha8Rng, draw: &DemographicDraw) -> Result<String> {
    match draw {
        DemographicDraw::Uniform { min, max } => {
            if min > max {
                return Err(Error::Planted(format!("empty range {min}..={max}")));
            }
            Ok(rng.random_range(*min..=*max).to_string())
        }
        DemographicDraw::Choice { values, weights } => {
            if values.is_empty() {
                return Err(Error::Planted("choice without values".into()));
            }
            let idx = match weights {
                None => rng.random_range(0..values.len()),
                Some(w) => {
                    if w.len() != values.len() || w.iter().any(|x| !(*x >= 0.0)) {
                        return Err(Error::Planted("choice weights do not match values".into()));
                    }
                    let total: f64 = w.iter().sum();
                    let mut u = rng.random::<f64>() * total;
                    let mut pick = values.len() - 1;
                    for (i, x) in w.iter().enumerate() {
                        if u < *x {
                            pick = i;
                            break;
                        }
                        u -= x;
                    }
                    pick
                }
            };
            Ok(values[idx].clone())
        }
    }
}

/// Draws `n` rows; `round(n·duplicate_rate)` of them are exact copies of
/// earlier rows, so deduplication leaves exactly `n - round(n·rate)`.
pub fn generate_synthetic_sample(
    planted: &PlantedModel,
    spec: Arc<ModelSpec>,
    n: usize,
    seed: u64,
) -> Result<SyntheticSample> {
    if n == 0 {
        return Err(Error::Planted("n must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&planted.duplicate_rate) {
        return Err(Error::Planted("duplicate rate must lie in [0, 1)".into()));
    }
    let m = spec.constructs.len();
    let chol = planted.cholesky(m)?;
    let lambda = planted.loadings(&spec)?;
    let cuts = planted.thresholds(spec.scale.points())?;
    let blocks = spec.blocks();
    let p = spec.item_count();
    for b in &planted.bias {
        if spec.demographic(&b.field).is_none() {
            return Err(Error::Planted(format!("bias on unknown field `{}`", b.field)));
        }
        for c in b.constructs.iter().flatten() {
            if spec.construct_index(c).is_none() {
                return Err(Error::Planted(format!("bias on unknown construct `{c}`")));
            }
        }
    }

    let dups = (n as f64 * planted.duplicate_rate).round() as usize;
    let base = n - dups;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<RespondentRow> = Vec::with_capacity(n);
    let mut latents = DMatrix::zeros(n, m);
    let mut continuous = DMatrix::zeros(n, p);
    let mut seen: HashSet<Vec<i32>> = HashSet::with_capacity(base);
    let mut redraws = 0usize;

    while rows.len() < base {
        let i = rows.len();
        let mut demo = Vec::with_capacity(spec.demographics.len());
        for d in &spec.demographics {
            let v = match (d.kind, planted.demographics.get(&d.name)) {
                (_, Some(draw)) => draw_demographic(&mut rng, draw)?,
                (DemographicKind::Id, None) => (i + 1).to_string(),
                (_, None) => return Err(Error::Planted(format!("no draw for demographic `{}`", d.name))),
            };
            demo.push(v);
        }
        let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut eta = &chol * z;
        for b in &planted.bias {
            let k = spec
                .demographics
                .iter()
                .position(|d| d.name == b.field)
                .expect("checked");
            if demo[k] != b.value {
                continue;
            }
            for j in 0..m {
                let hit = match &b.constructs {
                    None => true,
                    Some(cs) => cs.iter().any(|c| c == &spec.constructs[j].name),
                };
                if hit {
                    eta[j] += b.shift;
                }
            }
        }
        let mut x = vec![0.0; p];
        let mut scores = vec![0; p];
        for (j, block) in blocks.iter().enumerate() {
            for t in block.clone() {
                let e: f64 = rng.sample(StandardNormal);
                let l = lambda[t];
                x[t] = l * eta[j] + (1.0 - l * l).sqrt() * e;
                scores[t] = spec.scale.min + cuts.iter().filter(|c| x[t] > **c).count() as i32;
            }
        }
        // keep unique response vectors so the duplicate count is exact
        if !seen.insert(scores.clone()) {
            redraws += 1;
            if redraws > 1000 + 10 * n {
                return Err(Error::Planted("cannot draw enough distinct response vectors".into()));
            }
            continue;
        }
        latents.row_mut(i).copy_from(&eta.transpose());
        for t in 0..p {
            continuous[(i, t)] = x[t];
        }
        rows.push(RespondentRow {
            demographics: demo,
            responses: scores,
        });
    }

    // duplicates land after their source at a random position
    let mut keyed: Vec<(f64, usize)> = (0..base).map(|i| (i as f64, i)).collect();
    for _ in 0..dups {
        let src = rng.random_range(0..base);
        let u: f64 = rng.random();
        keyed.push((src as f64 + u * (base - src) as f64, src));
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    let order: Vec<usize> = keyed.into_iter().map(|(_, s)| s).collect();

    let final_rows: Vec<RespondentRow> = order.iter().map(|&s| rows[s].clone()).collect();
    let latents = DMatrix::from_fn(n, m, |i, j| latents[(order[i], j)]);
    let continuous = DMatrix::from_fn(n, p, |i, j| continuous[(order[i], j)]);
    let panel = Panel::new(spec, final_rows, Provenance::Synthetic { seed })?;
    Ok(SyntheticSample {
        panel,
        latents,
        continuous,
    })
}

pub fn generate_synthetic(planted: &PlantedModel, spec: Arc<ModelSpec>, n: usize, seed: u64) -> Result<Panel> {
    generate_synthetic_sample(planted, spec, n, seed).map(|s| s.panel)
}
