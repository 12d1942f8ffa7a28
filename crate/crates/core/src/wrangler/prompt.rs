//! Prompt construction. Only codebook metadata and the request text go in.

use std::fmt::Write;

use super::WranglerRequest;
use crate::dataset::{Codebook, Dtype, FieldDescriptor};

pub const SECTION_LABELS: [&str; 4] = ["NORMALIZATION", "ROI", "INFERENCE", "DSL"];

const REQUEST_OPEN: &str = "=== REQUEST ===";
const REQUEST_CLOSE: &str = "=== END REQUEST ===";
const REPAIR_OPEN: &str = "=== REPAIR ROUND ";

const PREAMBLE: &str = "\
You translate clinical cohort requests into a small query language.
You see only the dataset schema below, never patient records. Use only fields listed in the schema.
If the request needs information that no field provides, still write the query you would need and
name the missing field, so the gap is visible to the user.";

const GRAMMAR: &str = r#"query      := or
or         := and { "or" and }
and        := unary { "and" unary }
unary      := "not" unary | primary
primary    := "(" query ")" | "true" | "false" | compare | membership | existsBp | hasEvent
compare    := field cmp literal
membership := field "in" "[" literal { "," literal } "]"
existsBp   := "exists" "(" "bp" "." series "," "hours" "(" number "," number ")" "," "value" cmp number ")"
hasEvent   := "has_event" "(" eventKind [ "," "hours" "(" number "," number ")" ] ")"
cmp        := "==" | "!=" | "<" | "<=" | ">" | ">="
literal    := number | quoted label
series     := "sbp" | "dbp" | "map"
Time windows are hours since admission and include the start but not the end.
Categorical fields compare against a code or a quoted label from their coding.
A comparison on a missing value is false."#;

/// One exemplar per query family: demographic conjunction, coded category,
/// temporal BP condition, event predicate.
pub const EXEMPLARS: [(&str, &str); 4] = [
    ("Female patients younger than 50 years.", "male == 0 and age < 50"),
    ("Patients whose stroke was cardioembolic.", "toast == \"CE\""),
    ("Patients whose DBP dropped below 60 mmHg during the first day.", "exists(bp.dbp, hours(0,24), value < 60)"),
    ("Patients with symptomatic hemorrhagic transformation within 72 hours.", "has_event(symHT, hours(0,72))"),
];

const INSTRUCTIONS: &str = "\
Work in four steps and answer with exactly four sections, each introduced by its label on its own line:
NORMALIZATION:
  one line per clinical term in the request: `- raw term -> normalized term -> candidate field`
  (write `none` as the candidate field when the schema has no matching field)
ROI:
  one line per field the query needs: `- table.field`
INFERENCE:
  numbered reasoning steps that turn the normalized terms into conditions on the fields
DSL:
  the final query on a single line, nothing else";

fn schema_line(out: &mut String, f: &FieldDescriptor) {
    write!(out, "{}.{} | {}", f.table.as_str(), f.name, f.dtype.as_str()).expect("string write");
    if let Some(unit) = &f.unit {
        write!(out, " | unit: {unit}").expect("string write");
    }
    if let (Dtype::Categorical, Some(coding)) = (f.dtype, &f.coding) {
        let codes: Vec<String> = coding.iter().map(|(c, l)| format!("{c}={l}")).collect();
        write!(out, " | codes: {}", codes.join(", ")).expect("string write");
    }
    if !f.description.is_empty() {
        write!(out, " | {}", f.description).expect("string write");
    }
    out.push('\n');
}

/// The schema block: one line per codebook field.
pub fn schema_block(codebook: &Codebook) -> String {
    let mut out = format!("dataset: {} (version {})\n", codebook.dataset_name, codebook.version);
    for f in &codebook.fields {
        schema_line(&mut out, f);
    }
    out
}

pub fn build_prompt(request: &WranglerRequest<'_>) -> String {
    let mut out = String::with_capacity(4096);
    out.push_str(PREAMBLE);
    out.push_str("\n\n=== GRAMMAR ===\n");
    out.push_str(GRAMMAR);
    out.push_str("\n=== END GRAMMAR ===\n\n=== SCHEMA ===\n");
    out.push_str(&schema_block(request.codebook));
    out.push_str("=== END SCHEMA ===\n\n=== EXAMPLES ===\n");
    for (text, dsl) in EXEMPLARS {
        writeln!(out, "Request: {text}\nDSL: {dsl}\n").expect("string write");
    }
    out.push_str("=== END EXAMPLES ===\n\n=== INSTRUCTIONS ===\n");
    out.push_str(INSTRUCTIONS);
    out.push_str("\n=== END INSTRUCTIONS ===\n\n");
    writeln!(out, "{REQUEST_OPEN}\n{}\n{REQUEST_CLOSE}", request.text).expect("string write");
    out
}

/// Appends the feedback for repair round `round` (1-based).
pub fn append_repair(prompt: &mut String, round: usize, previous_dsl: &str, error_json: &str) {
    write!(
        prompt,
        "\n{REPAIR_OPEN}{round} ===\nYour previous DSL was:\n{previous_dsl}\nIt was rejected with:\n{error_json}\n\
         Correct the query and answer again with all four sections.\n=== END REPAIR ROUND {round} ===\n"
    )
    .expect("string write");
}

/// The request text embedded in a prompt built by [`build_prompt`].
pub fn extract_request(prompt: &str) -> Option<&str> {
    let start = prompt.find(&format!("{REQUEST_OPEN}\n"))? + REQUEST_OPEN.len() + 1;
    let end = prompt[start..].find(&format!("\n{REQUEST_CLOSE}"))? + start;
    Some(&prompt[start..end])
}

/// Number of repair rounds already appended to a prompt.
pub fn repair_round(prompt: &str) -> usize {
    prompt.lines().filter(|l| l.starts_with(REPAIR_OPEN)).count()
}

/// Section of `prompt` between `=== NAME ===` and `=== END NAME ===`.
pub fn prompt_block<'a>(prompt: &'a str, name: &str) -> Option<&'a str> {
    let open = format!("=== {name} ===\n");
    let close = format!("=== END {name} ===");
    let start = prompt.find(&open)? + open.len();
    let end = prompt[start..].find(&close)? + start;
    Some(&prompt[start..end])
}
