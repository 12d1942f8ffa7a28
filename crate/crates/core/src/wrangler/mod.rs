//! Natural-language to cohort-query translation through an LLM that only
//! ever sees codebook metadata.

mod audit;
mod multiples;
mod prompt;
mod provider;
mod sections;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use audit::{privacy_audit, PrivacyViolation, ViolationSource};
pub use multiples::{small_multiples, BarCategory, SmallMultipleSpec};
pub use prompt::{append_repair, build_prompt, extract_request, prompt_block, repair_round, schema_block, EXEMPLARS};
pub use provider::{
    normalize_request, prompt_sha256, read_prompt_log, LiveProvider, LlmProvider, MockFixture, MockProvider,
    PromptRecord, ProviderError, ProviderMode, RecordingProvider, ReplayProvider,
};
pub use sections::{parse_sections, Normalization, SectionError, Sections};

use crate::dataset::{Codebook, Table};
use crate::dsl::{compile, QueryError, TypeError, TypedQuery};

pub const DEFAULT_REPAIR_ROUNDS: usize = 2;

#[derive(Debug, Clone)]
pub struct WranglerRequest<'a> {
    pub text: String,
    pub parent_cohort_id: Option<String>,
    pub codebook: &'a Codebook,
    pub max_repair_rounds: usize,
    pub temperature: f64,
}

impl<'a> WranglerRequest<'a> {
    pub fn new(text: impl Into<String>, codebook: &'a Codebook) -> Self {
        WranglerRequest {
            text: text.into(),
            parent_cohort_id: None,
            codebook,
            max_repair_rounds: DEFAULT_REPAIR_ROUNDS,
            temperature: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RoiEntry {
    pub table: Table,
    pub field: String,
}

/// Why one attempt was rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AttemptError {
    pub kind: String,
    pub message: String,
    pub detail: serde_json::Value,
}

impl AttemptError {
    fn from_query(e: &QueryError) -> Self {
        AttemptError {
            kind: e.kind().into(),
            message: e.to_string(),
            detail: serde_json::to_value(e).expect("query error serializes"),
        }
    }

    fn from_sections(e: &SectionError) -> Self {
        AttemptError {
            kind: "MalformedResponse".into(),
            message: e.to_string(),
            detail: serde_json::to_value(e).expect("section error serializes"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RepairRecord {
    pub error: AttemptError,
    pub revised_dsl: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceStatus {
    Success,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WranglerTrace {
    pub request_text: String,
    pub status: TraceStatus,
    pub normalizations: Vec<Normalization>,
    pub roi: Vec<RoiEntry>,
    /// ROI lines that name no codebook field.
    pub unresolved_roi: Vec<String>,
    pub inference_text: String,
    pub dsl_text: String,
    pub repairs: Vec<RepairRecord>,
    pub involved_fields: Vec<String>,
    pub responses: Vec<String>,
}

impl WranglerTrace {
    fn new(request_text: &str) -> Self {
        WranglerTrace {
            request_text: request_text.to_owned(),
            status: TraceStatus::Failed,
            normalizations: Vec::new(),
            roi: Vec::new(),
            unresolved_roi: Vec::new(),
            inference_text: String::new(),
            dsl_text: String::new(),
            repairs: Vec::new(),
            involved_fields: Vec::new(),
            responses: Vec::new(),
        }
    }

    fn absorb(&mut self, sections: Sections, codebook: &Codebook) {
        self.normalizations = sections.normalizations;
        self.roi.clear();
        self.unresolved_roi.clear();
        for entry in sections.roi {
            let resolved = entry.split_once('.').and_then(|(table, field)| {
                let table = match table {
                    "clinical" => Table::Clinical,
                    "bp" => Table::Bp,
                    "events" => Table::Events,
                    _ => return None,
                };
                codebook.get_in(table, field).map(|_| RoiEntry { table, field: field.to_owned() })
            });
            match resolved {
                Some(r) if !self.roi.contains(&r) => self.roi.push(r),
                Some(_) => {}
                None => self.unresolved_roi.push(entry),
            }
        }
        self.inference_text = sections.inference_text;
        self.dsl_text = sections.dsl_text;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WranglerErrorKind {
    MissingField,
    Unparseable,
    ProviderFailure,
}

impl WranglerErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            WranglerErrorKind::MissingField => "MissingField",
            WranglerErrorKind::Unparseable => "Unparseable",
            WranglerErrorKind::ProviderFailure => "ProviderFailure",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[error("{}: {explanation}", .kind.as_str())]
#[serde(rename_all = "camelCase")]
pub struct WranglerError {
    pub kind: WranglerErrorKind,
    pub explanation: String,
    /// The clinical concept with no backing field, for `MissingField`.
    pub concept: Option<String>,
    pub trace: WranglerTrace,
}

/// Runs the four-section completion and validates its DSL, re-prompting with
/// the structured error up to `max_repair_rounds` times.
pub fn run_pipeline(
    request: &WranglerRequest<'_>,
    provider: &dyn LlmProvider,
) -> Result<(TypedQuery, WranglerTrace), WranglerError> {
    let mut trace = WranglerTrace::new(&request.text);
    if request.text.trim().is_empty() {
        return Err(WranglerError {
            kind: WranglerErrorKind::Unparseable,
            explanation: "request text is empty".into(),
            concept: None,
            trace,
        });
    }
    let mut prompt = build_prompt(request);
    let mut previous: Option<(AttemptError, Option<TypeError>)> = None;

    for round in 0..=request.max_repair_rounds {
        if round > 0 {
            let (err, _) = previous.as_ref().expect("a failed attempt precedes each repair");
            let detail = serde_json::to_string(&err.detail).expect("json value serializes");
            append_repair(&mut prompt, round, &trace.dsl_text, &detail);
        }
        let response = provider.complete(&prompt, request.temperature).map_err(|e| WranglerError {
            kind: WranglerErrorKind::ProviderFailure,
            explanation: e.to_string(),
            concept: None,
            trace: trace.clone(),
        })?;
        trace.responses.push(response.clone());

        let outcome = match parse_sections(&response) {
            Ok(sections) => {
                trace.absorb(sections, request.codebook);
                compile(&trace.dsl_text, request.codebook).map_err(|e| {
                    let type_err = match &e {
                        QueryError::Type(t) => Some(t.clone()),
                        QueryError::Parse(_) => None,
                    };
                    (AttemptError::from_query(&e), type_err)
                })
            }
            Err(e) => {
                trace.dsl_text.clear();
                Err((AttemptError::from_sections(&e), None))
            }
        };
        if let Some((err, _)) = previous.take() {
            trace.repairs.push(RepairRecord { error: err, revised_dsl: trace.dsl_text.clone() });
        }
        match outcome {
            Ok(typed) => {
                trace.status = TraceStatus::Success;
                trace.involved_fields = typed.involved_fields.clone();
                return Ok((typed, trace));
            }
            Err(failure) => previous = Some(failure),
        }
    }

    let (err, type_err) = previous.expect("loop ends on a failed attempt");
    let rounds = request.max_repair_rounds;
    Err(match type_err {
        Some(TypeError::MissingField { name, .. }) => {
            let concept = trace
                .normalizations
                .iter()
                .find(|n| n.candidate_field.as_deref() == Some(name.as_str()))
                .map_or_else(|| name.clone(), |n| n.normalized_term.clone());
            WranglerError {
                kind: WranglerErrorKind::MissingField,
                explanation: format!(
                    "the request needs `{concept}`, but the codebook has no field `{name}`; \
                     an additional data field is required ({rounds} repair rounds tried)"
                ),
                concept: Some(concept),
                trace,
            }
        }
        _ => WranglerError {
            kind: WranglerErrorKind::Unparseable,
            explanation: format!("{} after {rounds} repair rounds", err.message),
            concept: None,
            trace,
        },
    })
}
