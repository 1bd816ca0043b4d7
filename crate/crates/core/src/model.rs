//! Measurement and structural model definitions.
//!
//! A [`ModelSpec`] is a set of reflectively measured constructs, a directed
//! acyclic graph of structural paths between them, the Likert range every
//! item is answered on and the demographic columns that precede the items in
//! a panel. Specs are plain data; [`validate_model`] reports every broken
//! invariant and [`ModelSpec::new`] / [`parse_model`] refuse to hand out an
//! invalid one.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LikertScale {
    pub min: i32,
    pub max: i32,
}

impl LikertScale {
    pub const SEVEN_POINT: LikertScale = LikertScale { min: 1, max: 7 };

    pub fn contains(&self, score: i32) -> bool {
        (self.min..=self.max).contains(&score)
    }

    /// Number of response categories.
    pub fn points(&self) -> usize {
        (self.max - self.min + 1).max(0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Item {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl Item {
    pub fn new(name: impl Into<String>) -> Self {
        Item {
            name: name.into(),
            text: None,
        }
    }

    pub fn with_text(name: impl Into<String>, text: impl Into<String>) -> Self {
        Item {
            name: name.into(),
            text: Some(text.into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MeasurementMode {
    /// Mode A: indicators reflect the construct.
    #[default]
    #[serde(rename = "reflective", alias = "A")]
    Reflective,
    /// Mode B. Accepted by the parser only so validation can reject it by name.
    #[serde(rename = "formative", alias = "B")]
    Formative,
}

impl MeasurementMode {
    fn is_reflective(&self) -> bool {
        *self == MeasurementMode::Reflective
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Construct {
    pub name: String,
    pub items: Vec<Item>,
    #[serde(default, skip_serializing_if = "MeasurementMode::is_reflective")]
    pub mode: MeasurementMode,
}

impl Construct {
    pub fn new(name: impl Into<String>, items: Vec<Item>) -> Self {
        Construct {
            name: name.into(),
            items,
            mode: MeasurementMode::Reflective,
        }
    }

    /// Construct with items `{prefix}1..={prefix}{count}` and no statements.
    pub fn numbered(name: &str, count: usize) -> Self {
        Construct::new(name, (1..=count).map(|i| Item::new(format!("{name}{i}"))).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructuralPath {
    pub from: String,
    pub to: String,
}

impl StructuralPath {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        StructuralPath {
            from: from.into(),
            to: to.into(),
        }
    }
}

impl fmt::Display for StructuralPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.from, self.to)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemographicKind {
    /// Row identifier such as the trial number; kept in panels, never tabulated.
    Id,
    Integer,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemographicField {
    pub name: String,
    pub kind: DemographicKind,
    /// Display labels for coded values, e.g. `"1" -> "Male"`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub labels: BTreeMap<String, String>,
}

impl DemographicField {
    pub fn new(name: impl Into<String>, kind: DemographicKind) -> Self {
        DemographicField {
            name: name.into(),
            kind,
            labels: BTreeMap::new(),
        }
    }

    pub fn labeled(mut self, labels: &[(&str, &str)]) -> Self {
        self.labels = labels.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        self
    }

    pub fn label<'a>(&'a self, value: &'a str) -> &'a str {
        self.labels.get(value).map(String::as_str).unwrap_or(value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub scale: LikertScale,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub demographics: Vec<DemographicField>,
    pub constructs: Vec<Construct>,
    pub paths: Vec<StructuralPath>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Exogenous,
    Endogenous,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    ScaleRange { min: i32, max: i32 },
    DuplicateConstruct(String),
    EmptyConstruct(String),
    DuplicateItemInConstruct { construct: String, item: String },
    DuplicateItem(String),
    Formative(String),
    NoPaths,
    UnknownConstruct { path: StructuralPath, name: String },
    SelfLoop(String),
    DuplicatePath(StructuralPath),
    Cycle(Vec<String>),
    DuplicateDemographic(String),
    DemographicShadowsItem(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ScaleRange { min, max } => {
                write!(f, "scale range: min {min} must be below max {max}")
            }
            Violation::DuplicateConstruct(c) => {
                write!(f, "construct uniqueness: `{c}` is declared more than once")
            }
            Violation::EmptyConstruct(c) => write!(f, "non-empty construct: `{c}` has no items"),
            Violation::DuplicateItemInConstruct { construct, item } => {
                write!(f, "item uniqueness within construct: `{item}` repeats in `{construct}`")
            }
            Violation::DuplicateItem(i) => {
                write!(f, "global item uniqueness: `{i}` appears in more than one construct")
            }
            Violation::Formative(c) => write!(f, "reflective measurement: `{c}` is formative, which is not supported"),
            Violation::NoPaths => write!(f, "structural model: at least one path is required"),
            Violation::UnknownConstruct { path, name } => {
                write!(f, "path endpoints: `{name}` in `{path}` is not a construct")
            }
            Violation::SelfLoop(c) => write!(f, "self-loop: `{c} -> {c}`"),
            Violation::DuplicatePath(p) => write!(f, "path uniqueness: `{p}` is repeated"),
            Violation::Cycle(names) => {
                write!(f, "acyclic structural graph: cycle through {}", names.join(", "))
            }
            Violation::DuplicateDemographic(d) => {
                write!(f, "demographic uniqueness: `{d}` is declared more than once")
            }
            Violation::DemographicShadowsItem(d) => {
                write!(f, "column uniqueness: demographic `{d}` has an item's name")
            }
        }
    }
}

/// Result of [`validate_model`]: violations are data, not failures.
#[derive(Debug, Clone, PartialEq)]
pub struct Validation {
    pub violations: Vec<Violation>,
    /// Construct roles in declaration order.
    pub roles: Vec<(String, Role)>,
}

impl Validation {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn endogenous(&self) -> Vec<&str> {
        self.roles
            .iter()
            .filter(|(_, r)| *r == Role::Endogenous)
            .map(|(n, _)| n.as_str())
            .collect()
    }

    pub fn exogenous(&self) -> Vec<&str> {
        self.roles
            .iter()
            .filter(|(_, r)| *r == Role::Exogenous)
            .map(|(n, _)| n.as_str())
            .collect()
    }
}

pub fn validate_model(spec: &ModelSpec) -> Validation {
    let mut violations = Vec::new();

    if spec.scale.min >= spec.scale.max {
        violations.push(Violation::ScaleRange {
            min: spec.scale.min,
            max: spec.scale.max,
        });
    }

    let mut construct_names = HashSet::new();
    let mut item_owner: HashMap<&str, &str> = HashMap::new();
    let mut reported_items = HashSet::new();
    for c in &spec.constructs {
        if !construct_names.insert(c.name.as_str()) {
            violations.push(Violation::DuplicateConstruct(c.name.clone()));
        }
        if c.items.is_empty() {
            violations.push(Violation::EmptyConstruct(c.name.clone()));
        }
        if c.mode == MeasurementMode::Formative {
            violations.push(Violation::Formative(c.name.clone()));
        }
        let mut local = HashSet::new();
        for item in &c.items {
            if !local.insert(item.name.as_str()) {
                violations.push(Violation::DuplicateItemInConstruct {
                    construct: c.name.clone(),
                    item: item.name.clone(),
                });
                continue;
            }
            if let Some(owner) = item_owner.insert(item.name.as_str(), c.name.as_str()) {
                if owner != c.name && reported_items.insert(item.name.as_str()) {
                    violations.push(Violation::DuplicateItem(item.name.clone()));
                }
            }
        }
    }

    let mut demo_names = HashSet::new();
    for d in &spec.demographics {
        if !demo_names.insert(d.name.as_str()) {
            violations.push(Violation::DuplicateDemographic(d.name.clone()));
        }
        if item_owner.contains_key(d.name.as_str()) {
            violations.push(Violation::DemographicShadowsItem(d.name.clone()));
        }
    }

    if spec.paths.is_empty() {
        violations.push(Violation::NoPaths);
    }
    let mut seen_paths = HashSet::new();
    let mut graph_ok = true;
    for p in &spec.paths {
        for name in [&p.from, &p.to] {
            if !construct_names.contains(name.as_str()) {
                violations.push(Violation::UnknownConstruct {
                    path: p.clone(),
                    name: name.clone(),
                });
                graph_ok = false;
            }
        }
        if p.from == p.to {
            violations.push(Violation::SelfLoop(p.from.clone()));
            graph_ok = false;
        }
        if !seen_paths.insert(p) {
            violations.push(Violation::DuplicatePath(p.clone()));
        }
    }
    if graph_ok {
        if let Some(cycle) = find_cycle(spec) {
            violations.push(Violation::Cycle(cycle));
        }
    }

    let roles = spec
        .constructs
        .iter()
        .map(|c| {
            let role = if spec.paths.iter().any(|p| p.to == c.name) {
                Role::Endogenous
            } else {
                Role::Exogenous
            };
            (c.name.clone(), role)
        })
        .collect();

    Validation { violations, roles }
}

/// Depth-first search for a directed cycle; returns the constructs on it.
fn find_cycle(spec: &ModelSpec) -> Option<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let names: Vec<&str> = spec.constructs.iter().map(|c| c.name.as_str()).collect();
    let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let mut adj = vec![Vec::new(); names.len()];
    for p in &spec.paths {
        if let (Some(&a), Some(&b)) = (index.get(p.from.as_str()), index.get(p.to.as_str())) {
            adj[a].push(b);
        }
    }
    let mut marks = vec![Mark::New; names.len()];
    let mut stack: Vec<usize> = Vec::new();

    fn visit(v: usize, adj: &[Vec<usize>], marks: &mut [Mark], stack: &mut Vec<usize>) -> Option<Vec<usize>> {
        marks[v] = Mark::Active;
        stack.push(v);
        for &w in &adj[v] {
            match marks[w] {
                Mark::Active => {
                    let start = stack.iter().position(|&s| s == w).unwrap_or(0);
                    return Some(stack[start..].to_vec());
                }
                Mark::New => {
                    if let Some(c) = visit(w, adj, marks, stack) {
                        return Some(c);
                    }
                }
                Mark::Done => {}
            }
        }
        stack.pop();
        marks[v] = Mark::Done;
        None
    }

    for v in 0..names.len() {
        if marks[v] == Mark::New {
            if let Some(c) = visit(v, &adj, &mut marks, &mut stack) {
                return Some(c.into_iter().map(|i| names[i].to_string()).collect());
            }
        }
    }
    None
}

impl ModelSpec {
    /// Builds a spec and validates it.
    pub fn new(
        scale: LikertScale,
        demographics: Vec<DemographicField>,
        constructs: Vec<Construct>,
        paths: Vec<StructuralPath>,
    ) -> Result<Self> {
        ModelSpec {
            scale,
            demographics,
            constructs,
            paths,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        let v = validate_model(&self);
        if v.is_valid() {
            Ok(self)
        } else {
            Err(Error::InvalidModel(v.violations))
        }
    }

    pub fn construct_names(&self) -> Vec<&str> {
        self.constructs.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn construct_index(&self, name: &str) -> Option<usize> {
        self.constructs.iter().position(|c| c.name == name)
    }

    /// Item names in construct order, then within-construct order.
    pub fn item_names(&self) -> Vec<&str> {
        self.constructs
            .iter()
            .flat_map(|c| c.items.iter().map(|i| i.name.as_str()))
            .collect()
    }

    pub fn item_count(&self) -> usize {
        self.constructs.iter().map(|c| c.items.len()).sum()
    }

    /// Column range of each construct's block within the item ordering.
    pub fn blocks(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.constructs
            .iter()
            .map(|c| {
                let r = start..start + c.items.len();
                start = r.end;
                r
            })
            .collect()
    }

    pub fn demographic(&self, name: &str) -> Option<&DemographicField> {
        self.demographics.iter().find(|d| d.name == name)
    }

    /// Indices of constructs with a path into construct `j`.
    pub fn predecessors(&self, j: usize) -> Vec<usize> {
        let name = &self.constructs[j].name;
        self.paths
            .iter()
            .filter(|p| &p.to == name)
            .filter_map(|p| self.construct_index(&p.from))
            .collect()
    }

    /// Indices of constructs that construct `j` points into.
    pub fn successors(&self, j: usize) -> Vec<usize> {
        let name = &self.constructs[j].name;
        self.paths
            .iter()
            .filter(|p| &p.from == name)
            .filter_map(|p| self.construct_index(&p.to))
            .collect()
    }

    pub fn role(&self, j: usize) -> Role {
        if self.predecessors(j).is_empty() {
            Role::Exogenous
        } else {
            Role::Endogenous
        }
    }

    pub fn endogenous(&self) -> Vec<usize> {
        (0..self.constructs.len())
            .filter(|&j| self.role(j) == Role::Endogenous)
            .collect()
    }

    /// Serializes to the JSON model document.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model spec serializes")
    }

    /// Copy of the spec without the named items.
    pub fn without_items(&self, drop: &[&str]) -> Result<ModelSpec> {
        let mut out = self.clone();
        for c in &mut out.constructs {
            c.items.retain(|i| !drop.contains(&i.name.as_str()));
            if c.items.is_empty() {
                return Err(Error::EmptyConstruct(c.name.clone()));
            }
        }
        out.validated()
    }

    /// Fills in statement texts by item name; unknown names are rejected.
    pub fn with_item_texts(&self, texts: &BTreeMap<String, String>) -> Result<ModelSpec> {
        let mut out = self.clone();
        for (name, text) in texts {
            let item = out
                .constructs
                .iter_mut()
                .flat_map(|c| c.items.iter_mut())
                .find(|i| &i.name == name)
                .ok_or_else(|| Error::UnknownField(name.clone()))?;
            item.text = Some(normalize_ws(text));
        }
        Ok(out)
    }
}

fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses and validates a JSON model document.
pub fn parse_model(text: &str) -> Result<ModelSpec> {
    let mut spec: ModelSpec = serde_json::from_str(text).map_err(|e| Error::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    for item in spec.constructs.iter_mut().flat_map(|c| c.items.iter_mut()) {
        if let Some(t) = item.text.as_mut() {
            *t = normalize_ws(t);
        }
    }
    spec.validated()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Study1,
    Study2,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "study1" => Ok(Preset::Study1),
            "study2" => Ok(Preset::Study2),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Study1 => "study1",
            Preset::Study2 => "study2",
        })
    }
}

/// Which Study-2 item set to ship; Study 1 has a single item set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemSet {
    /// The fitted set after the negatively worded items were removed.
    #[default]
    Reduced,
    /// Every administered item, including PU3 and PEU4.
    Full,
}

impl FromStr for ItemSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reduced" => Ok(ItemSet::Reduced),
            "full" => Ok(ItemSet::Full),
            other => Err(Error::InvalidArgument(format!(
                "item set `{other}` (expected reduced or full)"
            ))),
        }
    }
}

impl fmt::Display for ItemSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ItemSet::Reduced => "reduced",
            ItemSet::Full => "full",
        })
    }
}

const STUDY1_ITEMS: &[(&str, &[(&str, &str)])] = &[
    (
        "PU",
        &[
            (
                "PU1",
                "Using ChatGPT in my study would enable me to accomplish tasks more quickly",
            ),
            ("PU2", "Using ChatGPT would improve my study performance"),
            ("PU3", "Using ChatGPT in my study would increase my productivity"),
            ("PU4", "Using ChatGPT would enhance my effectiveness in my study"),
            ("PU5", "Using ChatGPT would make it easier to do my study"),
            ("PU6", "I would find ChatGPT useful in my study"),
        ],
    ),
    (
        "PEOU",
        &[
            ("PEOU1", "Learning to operate ChatGPT would be easy for me"),
            (
                "PEOU2",
                "I would find it easy to get ChatGPT to do what I want it to do",
            ),
            ("PEOU3", "My interaction with ChatGPT would be clear and understandable"),
            ("PEOU4", "I would find ChatGPT to be flexible to interact with"),
            ("PEOU5", "It would be easy for me to become skilful at using ChatGPT"),
            ("PEOU6", "I would find ChatGPT easy to use"),
        ],
    ),
    (
        "CPLAY",
        &[
            ("CPLAY1", "When I use ChatGPT, I feel spontaneous"),
            ("CPLAY2", "When I use ChatGPT, I feel creative"),
            ("CPLAY3", "When I use ChatGPT, I feel playful"),
            ("CPLAY4", "When I use ChatGPT, I feel imaginative"),
        ],
    ),
    (
        "BI",
        &[
            ("BI1", "I plan to use ChatGPT in the future"),
            ("BI2", "Assuming that I have access to ChatGPT, I intend to use it"),
        ],
    ),
];

fn gender_field() -> DemographicField {
    DemographicField::new("gender", DemographicKind::Categorical).labeled(&[
        ("1", "Male"),
        ("2", "Female"),
        ("3", "Non-binary"),
    ])
}

/// Built-in TAM models.
pub fn builtin_model(preset: Preset, items: ItemSet) -> ModelSpec {
    let spec = match preset {
        Preset::Study1 => ModelSpec {
            scale: LikertScale::SEVEN_POINT,
            demographics: vec![
                DemographicField::new("trial", DemographicKind::Id),
                DemographicField::new("age", DemographicKind::Integer),
                gender_field(),
                DemographicField::new("major", DemographicKind::Categorical),
                DemographicField::new("year", DemographicKind::Integer),
                DemographicField::new("chatgpt_exp", DemographicKind::Integer),
            ],
            constructs: STUDY1_ITEMS
                .iter()
                .map(|(name, items)| {
                    Construct::new(*name, items.iter().map(|(n, t)| Item::with_text(*n, *t)).collect())
                })
                .collect(),
            paths: vec![
                StructuralPath::new("CPLAY", "BI"),
                StructuralPath::new("PEOU", "BI"),
                StructuralPath::new("PEOU", "PU"),
                StructuralPath::new("PU", "BI"),
            ],
        },
        Preset::Study2 => {
            let (peu, pu) = match items {
                ItemSet::Reduced => (3, 2),
                ItemSet::Full => (4, 3),
            };
            ModelSpec {
                scale: LikertScale::SEVEN_POINT,
                demographics: vec![
                    DemographicField::new("trial", DemographicKind::Id),
                    DemographicField::new("age", DemographicKind::Integer),
                    gender_field(),
                    DemographicField::new("major", DemographicKind::Categorical),
                    DemographicField::new("english_ability", DemographicKind::Integer),
                    DemographicField::new("vr_familiarity", DemographicKind::Integer),
                ],
                constructs: vec![
                    Construct::numbered("IMGM", 3),
                    Construct::numbered("IMRN", 3),
                    Construct::numbered("INTR", 3),
                    Construct::numbered("ITU", 3),
                    Construct::numbered("PEU", peu),
                    Construct::numbered("PU", pu),
                ],
                paths: vec![
                    StructuralPath::new("IMGM", "PEU"),
                    StructuralPath::new("IMGM", "PU"),
                    StructuralPath::new("IMRN", "PEU"),
                    StructuralPath::new("IMRN", "PU"),
                    StructuralPath::new("INTR", "PEU"),
                    StructuralPath::new("INTR", "PU"),
                    StructuralPath::new("PEU", "ITU"),
                    StructuralPath::new("PU", "ITU"),
                ],
            }
        }
    };
    debug_assert!(validate_model(&spec).is_valid());
    spec
}

/// Preset lookup by id, as used by the CLI.
pub fn builtin_model_by_id(id: &str, items: ItemSet) -> Result<ModelSpec> {
    Ok(builtin_model(id.parse()?, items))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn study1() -> ModelSpec {
        builtin_model(Preset::Study1, ItemSet::Reduced)
    }

    #[test]
    fn study1_preset_shape() {
        let spec = study1();
        let sizes: Vec<_> = spec
            .constructs
            .iter()
            .map(|c| (c.name.as_str(), c.items.len()))
            .collect();
        assert_eq!(sizes, [("PU", 6), ("PEOU", 6), ("CPLAY", 4), ("BI", 2)]);
        assert_eq!(spec.item_count(), 18);
        let paths: Vec<_> = spec.paths.iter().map(|p| p.to_string()).collect();
        assert_eq!(paths, ["CPLAY -> BI", "PEOU -> BI", "PEOU -> PU", "PU -> BI"]);
        let v = validate_model(&spec);
        assert!(v.is_valid());
        assert_eq!(v.endogenous(), ["PU", "BI"]);
        assert_eq!(v.exogenous(), ["PEOU", "CPLAY"]);
    }

    #[test]
    fn study2_preset_shape() {
        let spec = builtin_model(Preset::Study2, ItemSet::Reduced);
        let sizes: Vec<_> = spec.constructs.iter().map(|c| c.items.len()).collect();
        assert_eq!(sizes, [3, 3, 3, 3, 3, 2]);
        assert_eq!(spec.paths.len(), 8);
        assert!(validate_model(&spec).is_valid());
        assert_eq!(validate_model(&spec).endogenous(), ["ITU", "PEU", "PU"]);

        let full = builtin_model(Preset::Study2, ItemSet::Full);
        assert!(full.item_names().contains(&"PU3"));
        assert!(full.item_names().contains(&"PEU4"));
        assert!(validate_model(&full).is_valid());
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(
            builtin_model_by_id("study3", ItemSet::Reduced),
            Err(Error::UnknownPreset(_))
        ));
    }

    #[test]
    fn preset_documents_parse() {
        for p in [Preset::Study1, Preset::Study2] {
            let spec = builtin_model(p, ItemSet::Reduced);
            assert_eq!(parse_model(&spec.to_json()).unwrap(), spec);
        }
    }

    #[test]
    fn self_loop_rejected() {
        let mut spec = study1();
        spec.paths.push(StructuralPath::new("BI", "BI"));
        let err = parse_model(&spec.to_json()).unwrap_err();
        match err {
            Error::InvalidModel(v) => assert!(v.contains(&Violation::SelfLoop("BI".into()))),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn duplicate_item_across_constructs() {
        let mut spec = study1();
        spec.constructs[1].items[0].name = "PU1".into();
        let v = validate_model(&spec);
        assert_eq!(v.violations, [Violation::DuplicateItem("PU1".into())]);
        assert!(v.violations[0].to_string().starts_with("global item uniqueness"));
    }

    #[test]
    fn cycle_rejected() {
        let spec = ModelSpec {
            scale: LikertScale::SEVEN_POINT,
            demographics: vec![],
            constructs: vec![Construct::numbered("A", 2), Construct::numbered("B", 2)],
            paths: vec![StructuralPath::new("A", "B"), StructuralPath::new("B", "A")],
        };
        let v = validate_model(&spec);
        assert_eq!(v.violations.len(), 1);
        assert!(v.violations[0].to_string().starts_with("acyclic structural graph"));
        // both constructs have an incoming path
        assert_eq!(v.endogenous(), ["A", "B"]);
    }

    #[test]
    fn formative_and_structure_violations() {
        let doc = r#"{
            "scale": {"min": 5, "max": 5},
            "constructs": [
                {"name": "A", "items": [{"name": "a1"}], "mode": "formative"},
                {"name": "B", "items": []}
            ],
            "paths": [{"from": "A", "to": "C"}]
        }"#;
        let spec: ModelSpec = serde_json::from_str(doc).unwrap();
        let v = validate_model(&spec).violations;
        assert!(v.contains(&Violation::ScaleRange { min: 5, max: 5 }));
        assert!(v.contains(&Violation::Formative("A".into())));
        assert!(v.contains(&Violation::EmptyConstruct("B".into())));
        assert!(v
            .iter()
            .any(|x| matches!(x, Violation::UnknownConstruct { name, .. } if name == "C")));
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_model("{\n  \"scale\": {\"min\": 1,, \"max\": 7}\n}").unwrap_err();
        match err {
            Error::Syntax { line, column, .. } => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn statement_whitespace_is_normalized() {
        let mut spec = study1();
        spec.constructs[0].items[0].text = Some("  Using   ChatGPT\n quickly ".into());
        let back = parse_model(&spec.to_json()).unwrap();
        assert_eq!(
            back.constructs[0].items[0].text.as_deref(),
            Some("Using ChatGPT quickly")
        );
    }

    #[test]
    fn removing_last_item_fails() {
        let spec = study1();
        assert!(matches!(
            spec.without_items(&["BI1", "BI2"]),
            Err(Error::EmptyConstruct(c)) if c == "BI"
        ));
        let reduced = spec.without_items(&["PU3"]).unwrap();
        assert_eq!(reduced.item_count(), 17);
    }
}
