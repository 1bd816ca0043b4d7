//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use construct_forge::generate::{generate_synthetic, PlantedModel};
use construct_forge::model::{builtin_model, ItemSet, Preset};
use construct_forge::panel::{dedupe, DedupKey, Panel};

/// Deduplicated planted panel for a built-in study.
pub fn study_panel(preset: Preset, n: usize, seed: u64) -> Panel {
    let spec = Arc::new(builtin_model(preset, ItemSet::Reduced));
    let planted = PlantedModel::preset(preset, &spec).expect("preset is admissible");
    let panel = generate_synthetic(&planted, spec, n, seed).expect("generation");
    dedupe(&panel, DedupKey::Responses).0
}
