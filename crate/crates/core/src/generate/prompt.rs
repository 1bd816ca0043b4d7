//! Prompt templates for LLM-simulated respondent panels.

use crate::error::{Error, Result};
use crate::model::{builtin_model, ItemSet, ModelSpec, Preset};

/// Placeholder replaced by the batch size when rendering.
const ROWS: &str = "{rows}";

const STUDY1_BACKGROUND: &str = "Assume we have a student population with an equal number of gender, different age groups, majors and years in university with various ChatGPT experiences.";

const STUDY1_INSTRUCTION: &str = "Construct a list of {rows} student samples with the above profile and their response based on the student experiences with ChatGPT. Response to the following statements that reflect the individual, no need to explain.
The correlation between constructs PU, PEOU, BI, and CPLAY should be at the acceptable range
The correlation within the construct should be at the acceptable range.
Do you understand the requirement for correlation on constructs? Answer this question first. Explain the requirements.";

const SEVEN_POINT_ANCHORS: &str = "On a 7-point scale, 1. Highly Unlikely;2. Unlikely;3. Somewhat Unlikely;4. Neutral;5. Somewhat Likely;6. Likely; 7. Highly Likely";

const STUDY1_TABLE: &str = "Present a nice response table of your option that can copy to Excel. Each row represents a trial and the column represents the item's number. Include columns on the left that indicate trial, student age, gender (male :1, female:2), major, year in university (1 to 4), and ChatGPT experience (0 to 4). Produce a total of {rows} rows.";

const STUDY2_BACKGROUND: &str = "Assume we have a student population with an equal number of gender, different age groups, majors, English ability and familiarity with VR.";

const STUDY2_COLUMNS: &str =
    "trial, student age, gender (male :1, female:2), major, English ability (1 to 5), and familiarity with VR (1 to 5)";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub study: String,
    pub background: String,
    /// May contain `{rows}`.
    pub instruction: String,
    pub scale_line: String,
    /// `(item name, statement)` in model order; a `None` statement fails rendering.
    pub items: Vec<(String, Option<String>)>,
    /// Column layout request; may contain `{rows}`.
    pub table_instruction: String,
    pub rows_per_batch: usize,
}

impl PromptTemplate {
    /// The Study 1 (TAM with playfulness) prompt.
    pub fn study1() -> Self {
        let spec = builtin_model(Preset::Study1, ItemSet::Full);
        PromptTemplate {
            study: "study1".into(),
            background: STUDY1_BACKGROUND.into(),
            instruction: STUDY1_INSTRUCTION.into(),
            scale_line: SEVEN_POINT_ANCHORS.into(),
            items: statements(&spec),
            table_instruction: STUDY1_TABLE.into(),
            rows_per_batch: 20,
        }
    }

    /// The Study 2 (AR/VR) prompt, laid out like Study 1. The statements come
    /// from `spec`, which must carry a text for every item.
    pub fn study2(spec: &ModelSpec) -> Self {
        Self::from_spec("study2", spec, STUDY2_BACKGROUND, STUDY2_COLUMNS)
    }

    /// A Study-1-shaped prompt for an arbitrary model.
    pub fn from_spec(study: &str, spec: &ModelSpec, background: &str, columns: &str) -> Self {
        let names = spec.construct_names();
        let list = match names.as_slice() {
            [] => String::new(),
            [one] => one.to_string(),
            [init @ .., last] => format!("{}, and {last}", init.join(", ")),
        };
        let instruction = format!(
            "Construct a list of {ROWS} student samples with the above profile and their response based on their experiences. Response to the following statements that reflect the individual, no need to explain.
The correlation between constructs {list} should be at the acceptable range
The correlation within the construct should be at the acceptable range.
Do you understand the requirement for correlation on constructs? Answer this question first. Explain the requirements."
        );
        let table_instruction = format!(
            "Present a nice response table of your option that can copy to Excel. Each row represents a trial and the column represents the item's number. Include columns on the left that indicate {columns}. Produce a total of {ROWS} rows."
        );
        PromptTemplate {
            study: study.into(),
            background: background.into(),
            instruction,
            scale_line: SEVEN_POINT_ANCHORS.into(),
            items: statements(spec),
            table_instruction,
            rows_per_batch: 20,
        }
    }

    pub fn with_rows(mut self, rows_per_batch: usize) -> Self {
        self.rows_per_batch = rows_per_batch;
        self
    }
}

fn statements(spec: &ModelSpec) -> Vec<(String, Option<String>)> {
    spec.constructs
        .iter()
        .flat_map(|c| c.items.iter())
        .map(|i| (i.name.clone(), i.text.clone()))
        .collect()
}

/// Renders the prompt. Every batch receives the same text; the profile
/// constraints are restated in full each time.
pub fn render_prompt(template: &PromptTemplate) -> Result<String> {
    if template.rows_per_batch == 0 {
        return Err(Error::InvalidArgument("rows per batch must be at least 1".into()));
    }
    let rows = template.rows_per_batch.to_string();
    let mut out = String::new();
    out.push_str("A Background:\n");
    out.push_str(&template.background);
    out.push_str("\n\nInstruction:\n");
    out.push_str(&template.instruction.replace(ROWS, &rows));
    out.push_str("\n\n");
    out.push_str(&template.scale_line);
    out.push_str("\n\n");
    for (name, text) in &template.items {
        match text.as_deref().map(str::trim) {
            Some(t) if !t.is_empty() => {
                out.push_str(name);
                out.push(' ');
                out.push_str(t);
                out.push('\n');
            }
            _ => return Err(Error::MissingStatement(name.clone())),
        }
    }
    out.push('\n');
    out.push_str(&template.table_instruction.replace(ROWS, &rows));
    out.push('\n');
    Ok(out)
}
