//! End-to-end pipeline (ingest or generate, dedupe, fit, metrics, bootstrap,
//! group comparisons) and the report bundle it emits.

mod table;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, IoContext, Result, Stage};
use crate::generate::{
    generate_llm, generate_synthetic, replay_file, GenerationConfig, LlmClient, PlantedModel, PromptTemplate, Source,
    Transcript,
};
use crate::inference::{bootstrap, group_compare, BootstrapOptions, BootstrapResult, GroupComparison, GroupTest};
use crate::model::{builtin_model, parse_model, DemographicKind, ItemSet, ModelSpec, Preset};
use crate::panel::{dedupe, demographics_table, ingest_csv_file, DedupKey, DedupReport, FrequencyTable, Panel};
use crate::pls::{fit_pls, FitOptions, FitResult};
use crate::psychometrics::{evaluate, low_loading_screen, MetricsReport, ScreenOptions, Severity};

pub use table::{compare_tables, compare_to_reference, Cell, ComparisonReport, Offender, Table, Tolerances};

/// Which two groups of a demographic field to compare, and on what.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct GroupConfig {
    pub field: String,
    pub values: [String; 2],
    /// Constructs or numeric demographics; defaults to every integer
    /// demographic followed by every construct.
    #[serde(default)]
    pub variables: Option<Vec<String>>,
}

impl Default for GroupConfig {
    fn default() -> Self {
        GroupConfig {
            field: "gender".into(),
            values: ["1".into(), "2".into()],
            variables: None,
        }
    }
}

/// Pipeline settings. The JSON keys match the CLI flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub model: Option<PathBuf>,
    pub preset: Option<String>,
    pub items: ItemSet,
    /// Panel CSV.
    pub data: Option<PathBuf>,
    /// Generate the panel instead of reading it.
    pub generate: Option<GenerationConfig>,
    /// Planted model JSON for synthetic generation; presets have defaults.
    pub planted: Option<PathBuf>,
    /// Rebuild the panel from a recorded LLM transcript.
    pub replay: Option<PathBuf>,
    pub dedup: DedupKey,
    pub fit: FitOptions,
    /// Bootstrap resamples; 0 skips the bootstrap.
    pub bootstrap: usize,
    pub seed: u64,
    /// Worker threads for the bootstrap. Does not affect results.
    pub threads: Option<usize>,
    /// Drop items loading below this value and refit once.
    pub auto_drop: Option<f64>,
    pub flag_below: f64,
    /// Explicit group comparison; by default gender 1 vs 2 when the model has it.
    pub groups: Option<GroupConfig>,
    pub compare_groups: bool,
    pub group_test: GroupTest,
    pub out: PathBuf,
    /// Reference tables to check the bundle against after emission.
    pub reference: Option<PathBuf>,
    pub tolerances: BTreeMap<String, f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            model: None,
            preset: None,
            items: ItemSet::Reduced,
            data: None,
            generate: None,
            planted: None,
            replay: None,
            dedup: DedupKey::Responses,
            fit: FitOptions::default(),
            bootstrap: 5000,
            seed: 0,
            threads: None,
            auto_drop: None,
            flag_below: 0.70,
            groups: None,
            compare_groups: true,
            group_test: GroupTest::Pooled,
            out: PathBuf::from("report"),
            reference: None,
            tolerances: BTreeMap::new(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path).at(path)?)
    }

    pub fn check(&self) -> Result<()> {
        if self.model.is_some() == self.preset.is_some() {
            return Err(Error::InvalidArgument("give exactly one of model or preset".into()));
        }
        let sources = [self.data.is_some(), self.generate.is_some(), self.replay.is_some()]
            .iter()
            .filter(|&&s| s)
            .count();
        if sources != 1 {
            return Err(Error::InvalidArgument(
                "give exactly one data source (data, generate or replay)".into(),
            ));
        }
        if let Some(g) = &self.generate {
            g.check()?;
        }
        if let Some(t) = self.auto_drop {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidArgument("auto-drop threshold must lie in [0, 1]".into()));
            }
        }
        if self.bootstrap == 1 {
            return Err(Error::InvalidArgument(
                "bootstrap needs 0 (off) or at least 2 resamples".into(),
            ));
        }
        self.fit.check()
    }

    fn tolerances(&self) -> Tolerances {
        Tolerances {
            per_table: self.tolerances.clone(),
            ..Tolerances::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReportBundle {
    /// Model actually fitted (after any auto-drop).
    pub model: Arc<ModelSpec>,
    pub demographics: Vec<FrequencyTable>,
    pub dedup: DedupReport,
    pub fit: FitResult,
    pub metrics: MetricsReport,
    pub dropped: Vec<String>,
    pub bootstrap: Option<BootstrapResult>,
    /// `None` when no comparison was requested.
    pub groups: Option<Vec<GroupComparison>>,
    pub group_test: GroupTest,
    /// Generated panel, written alongside the tables.
    pub generated: Option<Panel>,
    /// Ordered `key = value` lines; enough to reproduce the run.
    pub manifest: Vec<(String, String)>,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).at(path)?;
    Ok(hex(&Sha256::digest(&bytes)))
}

fn sha256_str(s: &str) -> String {
    hex(&Sha256::digest(s.as_bytes()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn resolve_model(config: &PipelineConfig, manifest: &mut Vec<(String, String)>) -> Result<(ModelSpec, Option<Preset>)> {
    match (&config.model, &config.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).at(path)?;
            manifest.push(("model".into(), path.display().to_string()));
            manifest.push(("model-sha256".into(), sha256_str(&text)));
            Ok((parse_model(&text)?, None))
        }
        (None, Some(id)) => {
            let preset: Preset = id.parse()?;
            manifest.push(("model".into(), format!("preset {preset} ({} items)", config.items)));
            Ok((builtin_model(preset, config.items), Some(preset)))
        }
        (None, None) => Err(Error::InvalidArgument("no model given".into())),
    }
}

fn load_panel(
    config: &PipelineConfig,
    spec: Arc<ModelSpec>,
    preset: Option<Preset>,
    manifest: &mut Vec<(String, String)>,
) -> Result<(Panel, bool)> {
    if let Some(path) = &config.data {
        manifest.push(("data".into(), path.display().to_string()));
        manifest.push((
            "data-sha256".into(),
            sha256_file(path).map_err(|e| e.in_stage(Stage::Ingestion))?,
        ));
        let panel = ingest_csv_file(path, spec).map_err(|e| e.in_stage(Stage::Ingestion))?;
        return Ok((panel, false));
    }
    if let Some(path) = &config.replay {
        manifest.push(("replay".into(), path.display().to_string()));
        manifest.push((
            "replay-sha256".into(),
            sha256_file(path).map_err(|e| e.in_stage(Stage::Generation))?,
        ));
        let panel = replay_file(path, spec).map_err(|e| e.in_stage(Stage::Generation))?;
        return Ok((panel, true));
    }
    let g = config.generate.as_ref().expect("checked: one source");
    let stage = |e: Error| e.in_stage(Stage::Generation);
    manifest.push(("source".into(), g.source.to_string()));
    manifest.push(("batches".into(), g.batches.to_string()));
    manifest.push(("rows-per-batch".into(), g.rows_per_batch.to_string()));
    let panel = match g.source {
        Source::Synthetic => {
            let planted = match (&config.planted, preset) {
                (Some(path), _) => {
                    manifest.push(("planted".into(), path.display().to_string()));
                    manifest.push(("planted-sha256".into(), sha256_file(path).map_err(stage)?));
                    PlantedModel::from_json(&fs::read_to_string(path).at(path).map_err(stage)?).map_err(stage)?
                }
                (None, Some(p)) => {
                    manifest.push(("planted".into(), format!("preset {p}")));
                    PlantedModel::preset(p, &spec).map_err(stage)?
                }
                (None, None) => {
                    return Err(stage(Error::InvalidArgument(
                        "synthetic generation for a custom model needs a planted model".into(),
                    )))
                }
            };
            manifest.push(("planted-model-sha256".into(), sha256_str(&planted.to_json())));
            manifest.push(("generation-seed".into(), g.seed.to_string()));
            generate_synthetic(&planted, spec, g.target_size(), g.seed).map_err(stage)?
        }
        Source::Llm => {
            let template = match preset {
                Some(Preset::Study1) => PromptTemplate::study1(),
                _ => PromptTemplate::study2(&spec),
            }
            .with_rows(g.rows_per_batch);
            manifest.push(("llm-model".into(), g.llm.model.clone()));
            manifest.push(("llm-temperature".into(), g.llm.temperature.to_string()));
            let client = LlmClient::from_env(g.llm.clone()).map_err(stage)?;
            let transcript = Transcript::new();
            let result = generate_llm(&client, &template, spec, g.batches, &transcript);
            if !transcript.is_empty() {
                fs::create_dir_all(&config.out).at(&config.out).map_err(stage)?;
                let path = config.out.join("transcript.jsonl");
                transcript.save(&path).map_err(stage)?;
                manifest.push(("transcript".into(), "transcript.jsonl".into()));
            }
            result.map_err(stage)?
        }
    };
    Ok((panel, true))
}

fn group_variables(spec: &ModelSpec, g: &GroupConfig) -> Vec<String> {
    match &g.variables {
        Some(v) => v.clone(),
        None => spec
            .demographics
            .iter()
            .filter(|d| d.kind == DemographicKind::Integer)
            .map(|d| d.name.clone())
            .chain(spec.constructs.iter().map(|c| c.name.clone()))
            .collect(),
    }
}

/// Runs every stage in memory; nothing is written except an LLM transcript.
pub fn build_bundle(config: &PipelineConfig) -> Result<ReportBundle> {
    config.check().map_err(|e| e.in_stage(Stage::Config))?;
    let mut manifest: Vec<(String, String)> = vec![("version".into(), env!("CARGO_PKG_VERSION").into())];
    let (spec, preset) = resolve_model(config, &mut manifest).map_err(|e| e.in_stage(Stage::Config))?;
    let spec = Arc::new(spec);
    manifest.push(("model-json-sha256".into(), sha256_str(&spec.to_json())));

    let (raw, generated) = load_panel(config, Arc::clone(&spec), preset, &mut manifest)?;
    let (panel, dedup) = dedupe(&raw, config.dedup);
    if panel.is_empty() {
        return Err(Error::EmptyPanel.in_stage(Stage::Dedup));
    }
    manifest.push(("dedup".into(), config.dedup.to_string()));

    let demographics = spec
        .demographics
        .iter()
        .filter(|d| d.kind != DemographicKind::Id)
        .map(|d| demographics_table(&panel, &d.name))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage(Stage::Metrics))?;

    let fit_stage = |e: Error| e.in_stage(Stage::Fit);
    let fit_once = |s: &ModelSpec| -> Result<FitResult> {
        let fit = fit_pls(&panel, s, config.fit)?;
        if !fit.converged {
            return Err(Error::NotConverged(fit.iterations));
        }
        Ok(fit)
    };
    manifest.push(("fit-options".into(), serde_json::to_string(&config.fit)?));
    let mut fit = fit_once(&spec).map_err(fit_stage)?;
    let mut dropped = Vec::new();
    let screen = ScreenOptions {
        drop_below: config.auto_drop.unwrap_or(ScreenOptions::default().drop_below),
        flag_below: config.flag_below,
    };
    if let Some(t) = config.auto_drop {
        manifest.push(("auto-drop".into(), t.to_string()));
        let screening = low_loading_screen(&fit, screen).map_err(fit_stage)?;
        dropped = screening.dropped().iter().map(|s| s.to_string()).collect();
        if let Some(reduced) = screening.reduced {
            fit = fit_once(&reduced).map_err(fit_stage)?;
        }
        manifest.push(("dropped-items".into(), dropped.join(" ")));
    }
    let model = Arc::clone(&fit.spec);
    let metrics = evaluate(&fit, screen).map_err(|e| e.in_stage(Stage::Metrics))?;

    let boot = if config.bootstrap > 0 {
        let options = BootstrapOptions {
            resamples: config.bootstrap,
            seed: config.seed,
            threads: config.threads,
        };
        let result = bootstrap(&panel, &model, config.fit, options).map_err(|e| e.in_stage(Stage::Bootstrap))?;
        manifest.push(("bootstrap-resamples".into(), result.resamples.to_string()));
        manifest.push(("bootstrap-seed".into(), result.seed.to_string()));
        manifest.push(("bootstrap-discarded".into(), result.discarded.to_string()));
        Some(result)
    } else {
        manifest.push(("bootstrap-resamples".into(), "0 (skipped)".into()));
        None
    };

    let group_config = match (&config.groups, config.compare_groups) {
        (_, false) => None,
        (Some(g), true) => Some(g.clone()),
        (None, true) => spec.demographic("gender").map(|_| GroupConfig::default()),
    };
    let groups = match &group_config {
        None => {
            manifest.push(("groups".into(), "omitted (no comparison requested)".into()));
            None
        }
        Some(g) => {
            manifest.push((
                "groups".into(),
                format!(
                    "{} {} vs {} ({} t-test)",
                    g.field, g.values[0], g.values[1], config.group_test
                ),
            ));
            let values = [g.values[0].as_str(), g.values[1].as_str()];
            let rows = group_variables(&model, g)
                .iter()
                .map(|v| group_compare(&panel, &g.field, values, v, config.group_test))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| e.in_stage(Stage::GroupComparison))?;
            Some(rows)
        }
    };

    Ok(ReportBundle {
        model,
        demographics,
        dedup,
        fit,
        metrics,
        dropped,
        bootstrap: boot,
        groups,
        group_test: config.group_test,
        generated: generated.then_some(raw),
        manifest,
    })
}

/// Builds the bundle, writes it to `config.out`, then checks it against the
/// reference tables when configured.
pub fn run_pipeline(config: &PipelineConfig) -> Result<ReportBundle> {
    let bundle = build_bundle(config)?;
    emit_report(&bundle, &config.out).map_err(|e| e.in_stage(Stage::Emit))?;
    if let Some(reference) = &config.reference {
        let report = compare_to_reference(&config.out, reference, &config.tolerances())?;
        if let Some(first) = report.offenders.first() {
            return Err(Error::ComparisonFailed {
                offenders: report.offenders.len(),
                first: first.to_string(),
            });
        }
    }
    Ok(bundle)
}

fn lower_triangle(name: &str, m: &crate::psychometrics::ConstructMatrix) -> Table {
    let mut header = vec!["construct"];
    header.extend(m.names.iter().map(String::as_str));
    let mut t = Table::new(name, &header);
    for (i, row) in m.cells.iter().enumerate() {
        let mut cells = vec![Cell::from(m.names[i].as_str())];
        cells.extend(row.iter().map(|v| Cell::from(*v)));
        t.push(cells);
    }
    t
}

impl ReportBundle {
    /// Every CSV table in emission order; `groups` only when requested.
    pub fn tables(&self) -> Vec<Table> {
        let mut out = Vec::new();

        let mut t = Table::new("demographics", &["field", "value", "label", "count", "percent"]);
        for f in &self.demographics {
            for r in &f.rows {
                t.push(vec![
                    f.field.as_str().into(),
                    r.value.as_str().into(),
                    r.label.as_str().into(),
                    r.count.into(),
                    r.percent.into(),
                ]);
            }
        }
        out.push(t);

        let mut t = Table::new(
            "reliability",
            &["construct", "item", "loading", "flag", "alpha", "rho_a", "rho_c", "ave"],
        );
        for (j, c) in self.model.constructs.iter().enumerate() {
            let rel = &self.metrics.reliability[j];
            for (k, (item, &l)) in c.items.iter().zip(self.fit.block_loadings(j)).enumerate() {
                let flag = self
                    .metrics
                    .flags
                    .iter()
                    .find(|f| f.item == item.name)
                    .map_or(Cell::Empty, |f| match f.severity {
                        Severity::Flag => "flag".into(),
                        Severity::Drop => "drop".into(),
                    });
                let first = k == 0;
                t.push(vec![
                    c.name.as_str().into(),
                    item.name.as_str().into(),
                    l.into(),
                    flag,
                    if first { rel.alpha.into() } else { Cell::Empty },
                    if first { rel.rho_a.into() } else { Cell::Empty },
                    if first { rel.rho_c.into() } else { Cell::Empty },
                    if first { rel.ave.into() } else { Cell::Empty },
                ]);
            }
        }
        out.push(t);

        out.push(lower_triangle("htmt", &self.metrics.htmt));
        out.push(lower_triangle("fornell_larcker", &self.metrics.fornell_larcker.matrix));

        let mut t = Table::new("vif", &["endogenous", "predictor", "vif"]);
        for v in &self.metrics.vif {
            t.push(vec![
                v.endogenous.as_str().into(),
                v.predictor.as_str().into(),
                v.vif.into(),
            ]);
        }
        out.push(t);

        let mut t = Table::new(
            "paths",
            &["path", "original", "mean", "stdev", "t", "p", "ci_low", "ci_high"],
        );
        for (k, p) in self.model.paths.iter().enumerate() {
            let mut row = vec![p.to_string().into(), self.fit.path_coefficients[k].into()];
            match &self.bootstrap {
                Some(b) => {
                    let s = &b.paths[k];
                    row.extend([s.mean, s.stdev, s.t, s.p, s.ci_low, s.ci_high].map(Cell::from));
                }
                None => row.extend((0..6).map(|_| Cell::Empty)),
            }
            t.push(row);
        }
        out.push(t);

        let mut t = Table::new("r2", &["construct", "r2", "r2_adjusted"]);
        let n = self.fit.n() as f64;
        for (j, c) in self.model.constructs.iter().enumerate() {
            if let Some(r2) = self.fit.r_squared[j] {
                let k = self.model.predecessors(j).len() as f64;
                let adj = 1.0 - (1.0 - r2) * (n - 1.0) / (n - k - 1.0);
                t.push(vec![c.name.as_str().into(), r2.into(), adj.into()]);
            }
        }
        out.push(t);

        if let Some(groups) = &self.groups {
            let mut t = Table::new(
                "groups",
                &[
                    "variable", "group", "label", "n", "mean", "sd", "ci_low", "ci_high", "t", "df", "p",
                ],
            );
            for g in groups {
                for (k, r) in g.rows.iter().enumerate() {
                    let s = &r.summary;
                    let mut row = vec![
                        g.variable.as_str().into(),
                        r.group.as_str().into(),
                        r.label.as_str().into(),
                        s.n.into(),
                        s.mean.into(),
                        s.sd.into(),
                        s.ci_low.into(),
                        s.ci_high.into(),
                    ];
                    if k == 0 {
                        row.extend([g.t, g.df, g.p].map(Cell::from));
                    } else {
                        row.extend((0..3).map(|_| Cell::Empty));
                    }
                    t.push(row);
                }
            }
            out.push(t);
        }

        let mut t = Table::new("dedup", &["key", "total", "unique", "duplicates", "duplicate_rate"]);
        let d = &self.dedup;
        t.push(vec![
            d.key.to_string().into(),
            d.total.into(),
            d.unique.into(),
            (d.total - d.unique).into(),
            d.duplicate_rate.into(),
        ]);
        out.push(t);
        out
    }

    /// Run settings plus the SHA-256 of each `(name, contents)` output.
    pub fn manifest_text(&self, outputs: &[(String, String)]) -> String {
        let mut s = String::new();
        for (k, v) in &self.manifest {
            let _ = writeln!(s, "{k} = {v}");
        }
        let names: Vec<&str> = outputs.iter().map(|(n, _)| n.as_str()).collect();
        let _ = writeln!(s, "files = {} manifest.txt", names.join(" "));
        for (name, text) in outputs {
            let _ = writeln!(s, "sha256 {name} = {}", sha256_str(text));
        }
        s
    }

    /// Human-readable digest, rounded to three decimals.
    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let d = &self.dedup;
        let _ = writeln!(
            s,
            "Panel: {} rows, {} unique on {} ({:.3} duplicate rate)",
            d.total, d.unique, d.key, d.duplicate_rate
        );
        let _ = writeln!(
            s,
            "Fit: {} constructs, {} items, converged in {} iterations",
            self.model.constructs.len(),
            self.model.item_count(),
            self.fit.iterations
        );
        if !self.dropped.is_empty() {
            let _ = writeln!(s, "Dropped items: {}", self.dropped.join(", "));
        }

        let _ = writeln!(s, "\nReliability");
        let _ = writeln!(s, "{:<10}{:>8}{:>8}{:>8}{:>8}", "", "alpha", "rho_a", "rho_c", "AVE");
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
        for r in &self.metrics.reliability {
            let _ = writeln!(
                s,
                "{:<10}{:>8}{:>8}{:>8.3}{:>8.3}",
                r.construct,
                opt(r.alpha),
                opt(r.rho_a),
                r.rho_c,
                r.ave
            );
        }

        let _ = writeln!(s, "\nLoadings");
        for (j, c) in self.model.constructs.iter().enumerate() {
            for (item, l) in c.items.iter().zip(self.fit.block_loadings(j)) {
                let mark = match self.metrics.flags.iter().find(|f| f.item == item.name) {
                    Some(f) if f.severity == Severity::Drop => "  (below drop threshold)",
                    Some(_) => "  (low)",
                    None => "",
                };
                let _ = writeln!(s, "{:<10}{:>8.3}{mark}", item.name, l);
            }
        }

        let matrix = |s: &mut String, title: &str, m: &crate::psychometrics::ConstructMatrix| {
            let _ = writeln!(s, "\n{title}");
            for (i, row) in m.cells.iter().enumerate() {
                let _ = write!(s, "{:<10}", m.names[i]);
                for v in row.iter().take(i + 1) {
                    let _ = write!(s, "{:>8}", v.map_or(String::new(), |v| format!("{v:.3}")));
                }
                let _ = writeln!(s);
            }
        };
        matrix(&mut s, "HTMT", &self.metrics.htmt);
        let over: Vec<String> = crate::psychometrics::htmt_violations(&self.metrics.htmt, 1.0)
            .into_iter()
            .map(|(a, b, v)| format!("{a}-{b} {v:.3}"))
            .collect();
        if !over.is_empty() {
            let _ = writeln!(s, "HTMT above 1: {}", over.join(", "));
        }
        matrix(&mut s, "Fornell-Larcker", &self.metrics.fornell_larcker.matrix);
        let fl = &self.metrics.fornell_larcker;
        let failing: Vec<&str> = fl
            .names
            .iter()
            .zip(&fl.pass)
            .filter(|(_, p)| !**p)
            .map(|(n, _)| n.as_str())
            .collect();
        let _ = writeln!(
            s,
            "Fornell-Larcker: {}",
            if failing.is_empty() {
                "all constructs pass".to_string()
            } else {
                format!("fails for {}", failing.join(", "))
            }
        );

        let _ = writeln!(s, "\nInner VIF");
        for v in &self.metrics.vif {
            let _ = writeln!(
                s,
                "{:<20}{:>8.3}",
                format!("{} -> {}", v.predictor, v.endogenous),
                v.vif
            );
        }

        let _ = writeln!(s, "\nPaths");
        let _ = writeln!(s, "{:<20}{:>8}{:>8}{:>8}{:>9}{:>8}", "", "O", "M", "STDEV", "T", "p");
        for (k, p) in self.model.paths.iter().enumerate() {
            let o = self.fit.path_coefficients[k];
            match &self.bootstrap {
                Some(b) => {
                    let r = &b.paths[k];
                    let _ = writeln!(
                        s,
                        "{:<20}{:>8.3}{:>8.3}{:>8.3}{:>9.3}{:>8.3}",
                        p.to_string(),
                        o,
                        r.mean,
                        r.stdev,
                        r.t,
                        r.p
                    );
                }
                None => {
                    let _ = writeln!(s, "{:<20}{:>8.3}", p.to_string(), o);
                }
            }
        }

        let _ = writeln!(s, "\nR-squared");
        for (j, c) in self.model.constructs.iter().enumerate() {
            if let Some(r2) = self.fit.r_squared[j] {
                let _ = writeln!(s, "{:<10}{:>8.3}", c.name, r2);
            }
        }

        if let Some(groups) = &self.groups {
            let _ = writeln!(s, "\nGroup comparison ({} t-test)", self.group_test);
            for g in groups {
                for (k, r) in g.rows.iter().enumerate() {
                    let x = &r.summary;
                    let _ = write!(
                        s,
                        "{:<16}{:<12}{:>5}{:>8.3}{:>8.3}  [{:.3}, {:.3}]",
                        if k == 0 { g.variable.as_str() } else { "" },
                        r.label,
                        x.n,
                        x.mean,
                        x.sd,
                        x.ci_low,
                        x.ci_high
                    );
                    if k == 0 {
                        let _ = write!(s, "  p = {:.3}", g.p);
                    }
                    let _ = writeln!(s);
                }
            }
        }
        s
    }
}

/// Writes the bundle's files into `dir`. On failure, files written so far
/// (and `dir`, if this call created it) are removed.
pub fn emit_report(bundle: &ReportBundle, dir: &Path) -> Result<Vec<PathBuf>> {
    let created = !dir.exists();
    fs::create_dir_all(dir).at(dir)?;
    let mut written: Vec<PathBuf> = Vec::new();
    let result = (|| -> Result<()> {
        let mut outputs: Vec<(String, String)> = Vec::new();
        for t in bundle.tables() {
            outputs.push((t.file_name(), t.to_csv()?));
        }
        if let Some(p) = &bundle.generated {
            outputs.push(("panel.csv".into(), p.to_csv_string()));
        }
        outputs.push(("summary.txt".into(), bundle.summary_text()));
        let manifest = bundle.manifest_text(&outputs);
        outputs.push(("manifest.txt".into(), manifest));
        for (name, text) in outputs {
            let path = dir.join(&name);
            written.push(path.clone());
            fs::write(&path, text).at(&path)?;
        }
        if bundle.groups.is_none() {
            let stale = dir.join("groups.csv");
            if stale.exists() {
                fs::remove_file(&stale).at(&stale)?;
            }
        }
        Ok(())
    })();
    match result {
        Ok(()) => Ok(written),
        Err(e) => {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            if created {
                let _ = fs::remove_dir_all(dir);
            }
            Err(e)
        }
    }
}
