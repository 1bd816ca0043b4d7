//! Extraction of respondent rows from free-form LLM replies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::panel::{check_row, RespondentRow};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    /// 1-based line in the reply.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseOutcome {
    pub rows: Vec<RespondentRow>,
    pub rejected: Vec<Rejection>,
}

fn split_cells(line: &str) -> Option<Vec<&str>> {
    let cells: Vec<&str> = if line.contains('|') {
        let t = line.trim().trim_start_matches('|').trim_end_matches('|');
        t.split('|').map(str::trim).collect()
    } else if line.contains('\t') {
        line.trim_end_matches(['\r', '\n']).split('\t').map(str::trim).collect()
    } else if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        return None;
    };
    (cells.len() >= 2).then_some(cells)
}

/// A line is treated as data when at least half its cells are integers;
/// headers, markdown rules and prose fall below that.
fn is_data(cells: &[&str]) -> bool {
    let ints = cells.iter().filter(|c| c.parse::<i64>().is_ok()).count();
    2 * ints >= cells.len()
}

/// Parses the table rows of a reply against `spec` (demographic columns
/// first, then items in model order). Returns `NoRows` when nothing parses,
/// which callers treat as a re-prompt signal.
pub fn parse_table(text: &str, spec: &ModelSpec) -> Result<ParseOutcome> {
    let width = spec.demographics.len() + spec.item_count();
    let mut rows = Vec::new();
    let mut rejected = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let Some(cells) = split_cells(line) else { continue };
        if !is_data(&cells) {
            continue;
        }
        let line_no = i + 1;
        if cells.len() != width {
            rejected.push(Rejection {
                line: line_no,
                reason: format!("column count: expected {width}, found {}", cells.len()),
            });
            continue;
        }
        let (demo, scores) = cells.split_at(spec.demographics.len());
        let responses: std::result::Result<Vec<i32>, _> = scores.iter().map(|c| c.parse::<i32>()).collect();
        let Ok(responses) = responses else {
            rejected.push(Rejection {
                line: line_no,
                reason: "non-integer score".into(),
            });
            continue;
        };
        let row = RespondentRow {
            demographics: demo.iter().map(|c| c.to_string()).collect(),
            responses,
        };
        match check_row(spec, &row, rows.len() + 1) {
            Ok(()) => rows.push(row),
            Err(e) => rejected.push(Rejection {
                line: line_no,
                reason: match e {
                    Error::Cell { column, message, .. } => format!("{column}: {message}"),
                    other => other.to_string(),
                },
            }),
        }
    }
    if rows.is_empty() {
        return Err(Error::NoRows {
            rejected: rejected.len(),
        });
    }
    Ok(ParseOutcome { rows, rejected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_model, ItemSet, Preset};

    const REPLY: &str = "Certainly! Here's a table with 20 student samples, including their age, gender, major, year in university, ChatGPT experience level, and their responses to the statements. The responses are rated on a 7-point scale (1 to 7) as described earlier.

Trial\tAge\tGender\tMajor\tYear\tChatGPT Exp.\tPU1\tPU2\tPU3\tPU4\tPU5\tPU6\tPEOU1\tPEOU2\tPEOU3\tPEOU4\tPEOU5\tPEOU6\tCPLAY1\tCPLAY2\tCPLAY3\tCPLAY4\tBI1\tBI2
1\t21\t1\tCS\t2\t1\t5\t4\t6\t5\t5\t6\t4\t5\t6\t4\t5\t5\t6\t5\t6\t5\t6\t7
2\t19\t2\tMath\t1\t0\t4\t3\t5\t4\t4\t5\t3\t4\t5\t3\t4\t4\t5\t4\t5\t4\t4\t6
";

    fn study1() -> ModelSpec {
        builtin_model(Preset::Study1, ItemSet::Full)
    }

    #[test]
    fn first_trial_line() {
        let out = parse_table(REPLY, &study1()).unwrap();
        assert_eq!(out.rows.len(), 2);
        assert!(out.rejected.is_empty());
        let r = &out.rows[0];
        assert_eq!(r.demographics, ["1", "21", "1", "CS", "2", "1"]);
        assert_eq!(r.responses.len(), 18);
        assert_eq!(r.responses[17], 7);
    }

    #[test]
    fn short_line_rejected() {
        let short = "1\t21\t1\tCS\t2\t1\t5\t4\t6\t5\t5\t6\t4\t5\t6\t4\t5\t5\t6\t5\t6\t5\t6";
        let text = format!("{REPLY}{short}\n");
        let out = parse_table(&text, &study1()).unwrap();
        assert_eq!(out.rows.len(), 2);
        assert_eq!(out.rejected.len(), 1);
        assert!(out.rejected[0].reason.starts_with("column count"));
        assert_eq!(out.rejected[0].line, 6);
    }

    #[test]
    fn out_of_range_rejected() {
        let bad = "3\t22\t1\tEng\t3\t2\t6\t5\t7\t6\t6\t7\t5\t6\t7\t5\t6\t6\t7\t6\t7\t6\t7\t8";
        let out = parse_table(&format!("{REPLY}{bad}\n"), &study1()).unwrap();
        assert_eq!(out.rejected.len(), 1);
        assert!(out.rejected[0].reason.starts_with("BI2"), "{}", out.rejected[0].reason);
    }

    #[test]
    fn markdown_and_csv() {
        let md = "| Trial | Age | Gender | Major | Year | Exp | PU1 | PU2 | PU3 | PU4 | PU5 | PU6 | PEOU1 | PEOU2 | PEOU3 | PEOU4 | PEOU5 | PEOU6 | CPLAY1 | CPLAY2 | CPLAY3 | CPLAY4 | BI1 | BI2 |
|---|---|---|---|---|---|---|---|---|---|---|---|---|---|---|---|---|---|---|---|---|---|---|---|
| 1 | 21 | 1 | CS | 2 | 1 | 5 | 4 | 6 | 5 | 5 | 6 | 4 | 5 | 6 | 4 | 5 | 5 | 6 | 5 | 6 | 5 | 6 | 7 |";
        let out = parse_table(md, &study1()).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert!(out.rejected.is_empty());
        let csv = "1,21,1,CS,2,1,5,4,6,5,5,6,4,5,6,4,5,5,6,5,6,5,6,7";
        assert_eq!(parse_table(csv, &study1()).unwrap().rows, out.rows);
    }

    #[test]
    fn prose_only() {
        let err = parse_table(
            "Yes, I understand. The constructs should correlate.\nHere you go.",
            &study1(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NoRows { rejected: 0 }));
    }
}
