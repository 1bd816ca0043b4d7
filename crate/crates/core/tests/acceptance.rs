//! Acceptance gate. One line per criterion; exits nonzero if any fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use construct_forge::generate::{
    generate_llm, generate_synthetic, replay_transcript, GenerationConfig, LlmClient, LlmSettings, PlantedModel,
    PromptTemplate, Transcript,
};
use construct_forge::inference::{
    bootstrap, p_value, two_sample_test, BootstrapOptions, BootstrapResult, GroupSummary, GroupTest,
};
use construct_forge::model::{builtin_model, Construct, Item, ItemSet, LikertScale, ModelSpec, Preset, StructuralPath};
use construct_forge::panel::{dedupe, DedupKey, ItemMatrix, Panel};
use construct_forge::pls::{fit_matrix, fit_pls, FitOptions};
use construct_forge::psychometrics::{
    ave, cronbach_alpha, fornell_larcker_table, htmt_violations, rho_c, BlockCorrelation, ConstructMatrix,
};
use construct_forge::report::{run_pipeline, PipelineConfig};
use nalgebra::DMatrix;

type Outcome = Result<String, String>;

struct Criterion {
    id: usize,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- 1

/// (construct, loadings, AVE, rho_c) as reported for both studies.
const RELIABILITY: &[(&str, &[f64], f64, f64)] = &[
    ("BI", &[0.982, 0.979], 0.961, 0.98),
    ("CPLAY", &[0.947, 0.946, 0.927, 0.955], 0.891, 0.97),
    ("PEOU", &[0.906, 0.941, 0.929, 0.933, 0.926, 0.937], 0.862, 0.974),
    ("PU", &[0.958, 0.93, 0.933, 0.941, 0.918, 0.947], 0.88, 0.978),
    ("IMGM", &[0.848, 0.923, 0.857], 0.769, 0.909),
    ("IMRN", &[0.962, 0.898, 0.93], 0.865, 0.951),
    ("INTR", &[0.856, 0.861, 0.872], 0.745, 0.898),
    ("ITU", &[0.837, 0.823, 0.845], 0.697, 0.873),
    ("PEU", &[0.846, 0.858, 0.759], 0.675, 0.862),
    ("PU(2)", &[0.874, 0.893], 0.78, 0.877),
];

fn reliability_identities() -> Outcome {
    let mut worst: (f64, &str) = (0.0, "");
    let mut bad = Vec::new();
    for (name, l, a, c) in RELIABILITY {
        let d = (ave(l) - a).abs().max((rho_c(l) - c).abs());
        if d > worst.0 {
            worst = (d, name);
        }
        if d > 0.005 {
            bad.push(format!("{name} ave {:.4} rho_c {:.4}", ave(l), rho_c(l)));
        }
    }
    ensure(
        bad.is_empty(),
        format!(
            "{} constructs, max |dev| {:.4} ({}){}",
            RELIABILITY.len(),
            worst.0,
            worst.1,
            if bad.is_empty() {
                String::new()
            } else {
                format!("; off: {}", bad.join(", "))
            }
        ),
    )
}

// ---------------------------------------------------------------- 2

fn fornell_larcker_criterion() -> Outcome {
    let s1 = fornell_larcker_table(
        &["BI", "CPLAY", "PEOU", "PU"],
        &[
            &[0.98],
            &[0.813, 0.944],
            &[0.745, 0.83, 0.929],
            &[0.901, 0.859, 0.839, 0.938],
        ],
    );
    let s2 = fornell_larcker_table(
        &["IMGM", "IMRN", "INTR", "ITU", "PEU", "PU"],
        &[
            &[0.877],
            &[0.749, 0.93],
            &[0.543, 0.564, 0.863],
            &[0.674, 0.7, 0.609, 0.835],
            &[0.587, 0.647, 0.65, 0.832, 0.822],
            &[0.601, 0.686, 0.697, 0.715, 0.744, 0.883],
        ],
    );
    ensure(
        s1.all_pass() && s2.all_pass(),
        format!(
            "study 1 all pass: {}, study 2 all pass: {}",
            s1.all_pass(),
            s2.all_pass()
        ),
    )
}

// ---------------------------------------------------------------- 3

fn htmt_criterion() -> Outcome {
    let s1 = ConstructMatrix::from_lower(
        &["BI", "CPLAY", "PEOU", "PU"],
        &[&[], &[0.846], &[0.769, 0.86], &[0.93, 0.889, 0.861]],
    );
    let s2 = ConstructMatrix::from_lower(
        &["IMGM", "IMRN", "INTR", "ITU", "PEU", "PU"],
        &[
            &[],
            &[0.841],
            &[0.627, 0.633],
            &[0.822, 0.823, 0.749],
            &[0.703, 0.757, 0.802, 1.065],
            &[0.76, 0.841, 0.89, 0.952, 1.006],
        ],
    );
    let v1 = htmt_violations(&s1, 1.0);
    let mut v2: Vec<(String, String)> = htmt_violations(&s2, 1.0)
        .into_iter()
        .map(|(a, b, _)| if a < b { (a, b) } else { (b, a) })
        .collect();
    v2.sort();
    let expected = vec![
        ("ITU".to_string(), "PEU".to_string()),
        ("PEU".to_string(), "PU".to_string()),
    ];
    let shown: Vec<String> = v2.iter().map(|(a, b)| format!("{a}-{b}")).collect();
    ensure(
        v1.is_empty() && v2 == expected,
        format!("study 1 flags {}, study 2 flags [{}]", v1.len(), shown.join(", ")),
    )
}

// ---------------------------------------------------------------- 4

/// (path, O, STDEV, reported T, reported p).
const PATHS_STUDY1: &[(&str, f64, f64, f64, f64)] = &[
    ("CPLAY->BI", 0.194, 0.059, 3.275, 0.001),
    ("PEOU->BI", -0.107, 0.057, 1.86, 0.063),
    ("PEOU->PU", 0.839, 0.024, 35.617, 0.0),
    ("PU->BI", 0.823, 0.052, 15.719, 0.0),
];

fn identity_violation(r: &BootstrapResult) -> f64 {
    r.paths
        .iter()
        .map(|p| (p.t - p.original.abs() / p.stdev).abs())
        .fold(0.0, f64::max)
}

fn study1_unique_panel(seed: u64) -> Result<Panel, String> {
    let spec = Arc::new(builtin_model(Preset::Study1, ItemSet::Reduced));
    let planted = PlantedModel::preset(Preset::Study1, &spec).map_err(|e| e.to_string())?;
    let panel = generate_synthetic(&planted, spec, 400, seed).map_err(|e| e.to_string())?;
    Ok(dedupe(&panel, DedupKey::Responses).0)
}

fn bootstrap_identity() -> Outcome {
    let panel = study1_unique_panel(4)?;
    let spec = panel.model_arc();

    let t0 = Instant::now();
    let small = bootstrap(
        &panel,
        &spec,
        FitOptions::default(),
        BootstrapOptions {
            resamples: 100,
            seed: 1,
            threads: None,
        },
    )
    .map_err(|e| e.to_string())?;
    let identity_small = identity_violation(&small);
    let identity_time = t0.elapsed();

    let mut worst_t: f64 = 0.0;
    let mut worst_p: f64 = 0.0;
    for (_, o, sd, t, p) in PATHS_STUDY1 {
        let t_hat = o.abs() / sd;
        worst_t = worst_t.max((t_hat - t).abs());
        worst_p = worst_p.max((p_value(t_hat, 5000) - p).abs());
    }

    let t1 = Instant::now();
    let smoke = bootstrap(
        &panel,
        &spec,
        FitOptions::default(),
        BootstrapOptions {
            resamples: 1000,
            seed: 2,
            threads: None,
        },
    )
    .map_err(|e| e.to_string())?;
    let smoke_time = t1.elapsed();
    let identity = identity_small.max(identity_violation(&smoke));

    ensure(
        identity <= 1e-9
            && identity_time < Duration::from_secs(1)
            && worst_t <= 1.0
            && worst_p <= 0.005
            && smoke.valid >= 900
            && smoke_time < Duration::from_secs(60),
        format!(
            "max |T - |O|/STDEV| {identity:.1e} ({:.0} ms); recomputed T max dev {worst_t:.3}, p max dev {worst_p:.4}; \
             B=1000 on n={} in {:.1} s ({} valid)",
            identity_time.as_secs_f64() * 1e3,
            panel.len(),
            smoke_time.as_secs_f64(),
            smoke.valid
        ),
    )
}

// ---------------------------------------------------------------- 5

/// (variable, n, [mean, sd, lower, upper] per group, published p).
type GroupRow = (&'static str, [usize; 2], [[f64; 4]; 2], f64);

const GROUPS_STUDY1: &[GroupRow] = &[
    (
        "ChatGPT Exp",
        [145, 149],
        [[1.79, 1.32, 1.57, 2.00], [2.09, 1.30, 1.88, 2.30]],
        0.045,
    ),
    (
        "PU",
        [145, 149],
        [[4.49, 1.38, 4.27, 4.72], [4.93, 1.42, 4.70, 5.16]],
        0.008,
    ),
    (
        "PEOU",
        [145, 149],
        [[4.32, 1.27, 4.12, 4.53], [4.66, 1.25, 4.46, 4.86]],
        0.023,
    ),
    (
        "CPLAY",
        [145, 149],
        [[4.67, 1.36, 4.45, 4.90], [5.01, 1.39, 4.78, 5.23]],
        0.040,
    ),
    (
        "BI",
        [145, 149],
        [[5.06, 1.43, 4.82, 5.29], [5.47, 1.47, 5.23, 5.71]],
        0.016,
    ),
];

const GROUPS_STUDY2: &[GroupRow] = &[
    (
        "English",
        [90, 150],
        [[2.51, 0.86, 2.33, 2.69], [2.93, 0.87, 2.79, 3.07]],
        0.000,
    ),
    (
        "VR",
        [90, 150],
        [[2.58, 1.02, 2.36, 2.79], [2.84, 0.99, 2.68, 3.00]],
        0.050,
    ),
    (
        "IMRN",
        [90, 150],
        [[5.38, 1.18, 5.13, 5.63], [6.10, 0.95, 5.94, 6.25]],
        0.000,
    ),
    (
        "INTR",
        [90, 150],
        [[5.58, 0.98, 5.38, 5.79], [6.08, 0.87, 5.94, 6.22]],
        0.000,
    ),
    (
        "IMGM",
        [90, 150],
        [[5.53, 1.22, 5.28, 5.79], [5.98, 0.88, 5.84, 6.12]],
        0.001,
    ),
    (
        "PU",
        [90, 150],
        [[5.57, 0.89, 5.38, 5.75], [5.80, 0.61, 5.70, 5.90]],
        0.017,
    ),
    (
        "PEU",
        [90, 150],
        [[6.10, 0.74, 5.95, 6.26], [6.46, 0.36, 6.41, 6.52]],
        0.000,
    ),
    (
        "ITU",
        [90, 150],
        [[6.44, 0.69, 6.29, 6.58], [6.76, 0.34, 6.70, 6.81]],
        0.000,
    ),
];

fn group_recomputation() -> Outcome {
    let mut worst_ci: f64 = 0.0;
    let mut worst_p: f64 = 0.0;
    let mut welch_off = Vec::new();
    for (study, rows) in [(1, GROUPS_STUDY1), (2, GROUPS_STUDY2)] {
        for (name, n, stats, p) in rows {
            let g: Vec<GroupSummary> = (0..2)
                .map(|k| GroupSummary::from_stats(n[k], stats[k][0], stats[k][1]))
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
            for k in 0..2 {
                worst_ci = worst_ci
                    .max((g[k].ci_low - stats[k][2]).abs())
                    .max((g[k].ci_high - stats[k][3]).abs());
            }
            worst_p = worst_p.max((two_sample_test(&g[0], &g[1], GroupTest::Pooled).p - p).abs());
            let welch = two_sample_test(&g[0], &g[1], GroupTest::Welch).p;
            if (welch - p).abs() > 0.01 {
                welch_off.push(format!("study {study} {name} {welch:.3} vs {p:.3}"));
            }
        }
    }
    ensure(
        worst_ci <= 0.01 && worst_p <= 0.01,
        format!(
            "CI max dev {worst_ci:.4}; pooled p max dev {worst_p:.4}; Welch outside 0.01: [{}]",
            welch_off.join(", ")
        ),
    )
}

// ---------------------------------------------------------------- 6

fn dedup_arithmetic() -> Outcome {
    let mut got = Vec::new();
    for (preset, items) in [(Preset::Study1, ItemSet::Reduced), (Preset::Study2, ItemSet::Reduced)] {
        let spec = Arc::new(builtin_model(preset, items));
        let planted = PlantedModel::preset(preset, &spec).map_err(|e| e.to_string())?;
        let panel = generate_synthetic(&planted, spec, 400, 0).map_err(|e| e.to_string())?;
        let (_, on_responses) = dedupe(&panel, DedupKey::Responses);
        let (_, on_all) = dedupe(&panel, DedupKey::All);
        got.push((planted.duplicate_rate, on_responses.unique, on_all.unique));
    }
    let shown: Vec<String> = got
        .iter()
        .map(|(r, a, b)| format!("rate {r}: {a} unique (responses), {b} (all columns)"))
        .collect();
    ensure(
        got.iter().map(|g| (g.1, g.2)).eq([(295, 295), (240, 240)]),
        shown.join("; "),
    )
}

// ---------------------------------------------------------------- 7

const RECOVERY_ITEMS: usize = 40;

fn planted_recovery() -> Outcome {
    let constructs = ["PEOU", "PU", "BI"]
        .iter()
        .map(|c| Construct::numbered(c, RECOVERY_ITEMS))
        .collect();
    let spec = ModelSpec::new(
        LikertScale::SEVEN_POINT,
        Vec::new(),
        constructs,
        vec![StructuralPath::new("PEOU", "PU"), StructuralPath::new("PU", "BI")],
    )
    .map_err(|e| e.to_string())?;
    let spec = Arc::new(spec);
    let planted = PlantedModel::from_paths(&spec, &[("PEOU", "PU", 0.8), ("PU", "BI", 0.8)], &[], 0.9)
        .map_err(|e| e.to_string())?;
    let mut passing = 0;
    let mut misses = Vec::new();
    let (mut l_rng, mut b_rng, mut r_rng) = ((f64::MAX, f64::MIN), (f64::MAX, f64::MIN), (f64::MAX, f64::MIN));
    for seed in 0..20u64 {
        let panel = generate_synthetic(&planted, spec.clone(), 5000, seed).map_err(|e| e.to_string())?;
        let fit = fit_pls(&panel, &spec, FitOptions::default()).map_err(|e| e.to_string())?;
        let r2: Vec<f64> = fit.r_squared.iter().flatten().copied().collect();
        for &l in &fit.loadings {
            l_rng = (l_rng.0.min(l), l_rng.1.max(l));
        }
        for &b in &fit.path_coefficients {
            b_rng = (b_rng.0.min(b), b_rng.1.max(b));
        }
        for &r in &r2 {
            r_rng = (r_rng.0.min(r), r_rng.1.max(r));
        }
        let worst_l = fit.loadings.iter().map(|l| (l - 0.9).abs()).fold(0.0, f64::max);
        let worst_b = fit
            .path_coefficients
            .iter()
            .map(|b| (b - 0.8).abs())
            .fold(0.0, f64::max);
        let worst_r = r2.iter().map(|r| (r - 0.64).abs()).fold(0.0, f64::max);
        if fit.converged && worst_l <= 0.03 && worst_b <= 0.05 && worst_r <= 0.05 {
            passing += 1;
        } else {
            misses.push(format!(
                "seed {seed} (|dl| {worst_l:.4}, |db| {worst_b:.4}, |dR2| {worst_r:.4})"
            ));
        }
    }
    ensure(
        passing >= 19,
        format!(
            "{passing}/20 seeds, {RECOVERY_ITEMS} items per block; loadings {:.3}..{:.3}, paths {:.3}..{:.3}, R2 {:.3}..{:.3}{}",
            l_rng.0,
            l_rng.1,
            b_rng.0,
            b_rng.1,
            r_rng.0,
            r_rng.1,
            if misses.is_empty() { String::new() } else { format!("; missed: {}", misses.join(", ")) }
        ),
    )
}

// ---------------------------------------------------------------- 8

/// Four rows whose first two columns correlate exactly `r` and whose third
/// column correlates equally with both.
fn two_item_block(r: f64) -> ItemMatrix {
    let e1 = [1.0, 1.0, -1.0, -1.0];
    let e2 = [1.0, -1.0, 1.0, -1.0];
    let e3 = [1.0, -1.0, -1.0, 1.0];
    let s = (1.0 - r * r).sqrt();
    let data = DMatrix::from_fn(4, 3, |i, j| {
        let x = e1[i];
        let y = r * e1[i] + s * e2[i];
        match j {
            0 => x,
            1 => y,
            _ => x + y + e3[i],
        }
    });
    ItemMatrix {
        data,
        labels: vec!["A1".into(), "A2".into(), "B1".into()],
    }
}

fn closed_form_block() -> Outcome {
    let spec = ModelSpec::new(
        LikertScale::SEVEN_POINT,
        Vec::new(),
        vec![
            Construct::new("A", vec![Item::new("A1"), Item::new("A2")]),
            Construct::new("B", vec![Item::new("B1")]),
        ],
        vec![StructuralPath::new("A", "B")],
    )
    .map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for r in [0.0, 0.5, 0.923, 1.0 - 1e-6] {
        let fit = fit_matrix(&two_item_block(r), &spec, FitOptions::default()).map_err(|e| e.to_string())?;
        if !fit.converged {
            return Err(format!("r = {r}: fit did not converge"));
        }
        let alpha = cronbach_alpha(&BlockCorrelation::from_fit(&fit, 0)).map_err(|e| e.to_string())?;
        let loadings = fit.block_loadings(0);
        let expected_l = ((1.0 + r) / 2.0).sqrt();
        worst = worst
            .max((alpha - 2.0 * r / (1.0 + r)).abs())
            .max((rho_c(loadings) - (2.0 + 2.0 * r) / (3.0 + r)).abs())
            .max(loadings.iter().map(|l| (l - expected_l).abs()).fold(0.0, f64::max));
    }
    ensure(
        worst <= 1e-6,
        format!("r in {{0, 0.5, 0.923, 1-1e-6}}: max |dev| {worst:.1e}"),
    )
}

// ---------------------------------------------------------------- 9

fn read_bundle(dir: &Path) -> std::io::Result<BTreeMap<String, Vec<u8>>> {
    let mut files = BTreeMap::new();
    for e in fs::read_dir(dir)? {
        let p = e?.path();
        files.insert(p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p)?);
    }
    Ok(files)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut bundles = Vec::new();
    for (k, threads) in [Some(1), Some(4)].into_iter().enumerate() {
        let out = dir.path().join(format!("run{k}"));
        let config = PipelineConfig {
            preset: Some("study1".into()),
            generate: Some(GenerationConfig {
                seed: 7,
                ..GenerationConfig::default()
            }),
            bootstrap: 1000,
            seed: 11,
            threads,
            out: out.clone(),
            ..PipelineConfig::default()
        };
        run_pipeline(&config).map_err(|e| e.to_string())?;
        bundles.push(read_bundle(&out).map_err(|e| e.to_string())?);
    }
    let differing: Vec<&String> = bundles[0]
        .iter()
        .filter(|(name, bytes)| bundles[1].get(*name) != Some(bytes))
        .map(|(name, _)| name)
        .collect();
    ensure(
        differing.is_empty() && bundles[0].len() == bundles[1].len(),
        format!(
            "{} files, threads 1 vs 4, differing: [{}]",
            bundles[0].len(),
            differing.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        ),
    )
}

// ---------------------------------------------------------------- 10

fn stub_settings(base_url: &str, parallelism: usize) -> LlmSettings {
    LlmSettings {
        base_url: base_url.into(),
        timeout_secs: 5,
        retry_limit: 3,
        backoff_ms: 5,
        parallelism,
        ..LlmSettings::default()
    }
}

fn llm_contract() -> Outcome {
    let spec = Arc::new(builtin_model(Preset::Study1, ItemSet::Full));
    let template = PromptTemplate::study1();
    let err = |e: construct_forge::Error| e.to_string();

    // well-formed replies, concurrent batches
    let stub = common::serve(|i, _| (200, common::a2_reply(20, i)));
    let client = LlmClient::with_key(stub_settings(&stub.base_url, 4), "stub-key").map_err(err)?;
    let transcript = Transcript::new();
    let panel = generate_llm(&client, &template, spec.clone(), 5, &transcript).map_err(err)?;
    let entries = transcript.entries();
    let per_batch_ok = entries.iter().all(|e| e.accepted == Some(20));
    let replayed = replay_transcript(&entries, spec.clone()).map_err(err)?;
    let clean = panel.len() == 100 && per_batch_ok && replayed.rows() == panel.rows() && entries.len() == 5;

    // malformed replies: 0, 12, 20 rows for batch 0; 5, 7, 3, 6 for batch 1
    let script = [None, Some(12), Some(20), Some(5), Some(7), Some(3), Some(6)];
    let stub = common::serve(move |i, _| match script.get(i).copied().flatten() {
        Some(n) => (200, common::a2_reply_with_junk(n, i)),
        None => (200, "I'm sorry, I can't produce that table right now.".into()),
    });
    let client = LlmClient::with_key(stub_settings(&stub.base_url, 1), "stub-key").map_err(err)?;
    let transcript = Transcript::new();
    let short = generate_llm(&client, &template, spec.clone(), 2, &transcript).map_err(err)?;
    let entries = transcript.entries();
    let rounds = |b: usize| entries.iter().filter(|e| e.batch == b).count();
    let replayed_short = replay_transcript(&entries, spec.clone()).map_err(err)?;
    let reprompt = rounds(0) == 3 && rounds(1) == 4 && short.len() == 27 && replayed_short.rows() == short.rows();

    // transient server errors are retried within one request
    let stub = common::serve(|i, _| {
        if i < 2 {
            (500, "overloaded".into())
        } else {
            (200, common::a2_reply(20, i))
        }
    });
    let client = LlmClient::with_key(stub_settings(&stub.base_url, 1), "stub-key").map_err(err)?;
    let transcript = Transcript::new();
    let retried = generate_llm(&client, &template, spec.clone(), 1, &transcript).map_err(err)?;
    let retry = transcript.len() == 3 && stub.hits() == 3 && retried.len() == 20;

    ensure(
        clean && reprompt && retry,
        format!(
            "5 batches x 20 rows -> {} rows, replay identical: {}; re-prompt rounds {}+{} -> {} rows, replay identical: {}; \
             500,500,200 -> {} transcript entries",
            panel.len(),
            replayed.rows() == panel.rows(),
            rounds(0),
            rounds(1),
            short.len(),
            replayed_short.rows() == short.rows(),
            transcript.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            id: 1,
            name: "reliability identities",
            budget: Duration::from_secs(1),
            run: reliability_identities,
        },
        Criterion {
            id: 2,
            name: "Fornell-Larcker",
            budget: Duration::from_secs(1),
            run: fornell_larcker_criterion,
        },
        Criterion {
            id: 3,
            name: "HTMT flags",
            budget: Duration::from_secs(1),
            run: htmt_criterion,
        },
        Criterion {
            id: 4,
            name: "bootstrap identity and calibration",
            budget: Duration::from_secs(61),
            run: bootstrap_identity,
        },
        Criterion {
            id: 5,
            name: "group CI and significance",
            budget: Duration::from_secs(1),
            run: group_recomputation,
        },
        Criterion {
            id: 6,
            name: "dedup arithmetic",
            budget: Duration::from_secs(1),
            run: dedup_arithmetic,
        },
        Criterion {
            id: 7,
            name: "planted-model recovery",
            budget: Duration::from_secs(30),
            run: planted_recovery,
        },
        Criterion {
            id: 8,
            name: "two-item closed forms",
            budget: Duration::from_secs(1),
            run: closed_form_block,
        },
        Criterion {
            id: 9,
            name: "determinism",
            budget: Duration::from_secs(120),
            run: determinism,
        },
        Criterion {
            id: 10,
            name: "LLM stub contract",
            budget: Duration::from_secs(10),
            run: llm_contract,
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let took = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if took <= c.budget => (true, d),
            Ok(d) => (false, format!("{d}; over budget")),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} [{:>2}] {}: {} ({:.2} s, budget {} s)",
            if ok { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            detail,
            took.as_secs_f64(),
            c.budget.as_secs()
        );
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
