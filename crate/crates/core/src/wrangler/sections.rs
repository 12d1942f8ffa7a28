//! Splits a completion into its four labeled sections.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::prompt::SECTION_LABELS;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Normalization {
    pub raw_term: String,
    pub normalized_term: String,
    pub candidate_field: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Sections {
    pub normalizations: Vec<Normalization>,
    /// `table.field` strings as written by the model.
    pub roi: Vec<String>,
    pub inference_text: String,
    pub dsl_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("response is missing section(s): {}", .missing.join(", "))]
pub struct SectionError {
    pub missing: Vec<String>,
}

/// Recognizes `DSL:`, `**DSL:**`, `### DSL:` and returns the label index and
/// whatever follows the colon.
fn header(line: &str) -> Option<(usize, &str)> {
    let t = line.trim_start().trim_start_matches(['#', '*', ' ']);
    SECTION_LABELS.iter().enumerate().find_map(|(i, label)| {
        let rest = t.strip_prefix(label)?;
        let rest = rest.trim_start_matches('*').strip_prefix(':')?;
        Some((i, rest.trim_start_matches('*').trim()))
    })
}

fn bullet(line: &str) -> &str {
    let t = line.trim();
    t.strip_prefix("- ").or_else(|| t.strip_prefix("* ")).unwrap_or(t).trim()
}

fn parse_normalization(line: &str) -> Option<Normalization> {
    let parts: Vec<&str> = bullet(line).split("->").map(str::trim).collect();
    let candidate = |s: &str| {
        let s = s.trim_matches('`');
        (!s.is_empty() && !s.eq_ignore_ascii_case("none") && s != "-").then(|| s.to_owned())
    };
    match parts.as_slice() {
        [raw, norm] if !raw.is_empty() => {
            Some(Normalization { raw_term: (*raw).into(), normalized_term: (*norm).into(), candidate_field: None })
        }
        [raw, norm, field] if !raw.is_empty() => Some(Normalization {
            raw_term: (*raw).into(),
            normalized_term: (*norm).into(),
            candidate_field: candidate(field),
        }),
        _ => None,
    }
}

fn first_query_line(lines: &[&str]) -> String {
    lines
        .iter()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty() && !l.starts_with("```"))
        .map(|l| l.trim_matches('`').trim().to_owned())
        .next()
        .unwrap_or_default()
}

pub fn parse_sections(response: &str) -> Result<Sections, SectionError> {
    let mut bodies: [Option<Vec<&str>>; 4] = Default::default();
    let mut current: Option<usize> = None;
    for line in response.lines() {
        if let Some((idx, rest)) = header(line) {
            let body = bodies[idx].get_or_insert_with(Vec::new);
            if !rest.is_empty() {
                body.push(rest);
            }
            current = Some(idx);
        } else if let Some(idx) = current {
            bodies[idx].as_mut().expect("open section").push(line);
        }
    }
    let mut missing: Vec<String> =
        SECTION_LABELS.iter().zip(&bodies).filter(|(_, b)| b.is_none()).map(|(l, _)| (*l).to_owned()).collect();
    let [norm, roi, inference, dsl] = bodies.map(Option::unwrap_or_default);
    let dsl_text = first_query_line(&dsl);
    if dsl_text.is_empty() && !missing.iter().any(|m| m == "DSL") {
        missing.push("DSL".into());
    }
    if !missing.is_empty() {
        return Err(SectionError { missing });
    }
    Ok(Sections {
        normalizations: norm.iter().filter_map(|l| parse_normalization(l)).collect(),
        roi: roi.iter().map(|l| bullet(l).trim_matches('`').to_owned()).filter(|l| !l.is_empty()).collect(),
        inference_text: inference.join("\n").trim().to_owned(),
        dsl_text,
    })
}
