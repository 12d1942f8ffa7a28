//! Scan of emitted prompts for anything that came out of the data tables.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::dataset::{Codebook, PatientStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ViolationSource {
    /// A patient identifier, including planted sentinels.
    Uid,
    /// A number with two or more decimals equal to a stored value.
    NumericValue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PrivacyViolation {
    pub prompt_index: usize,
    pub token: String,
    pub source: ViolationSource,
}

fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !(c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.')))
        .map(|t| t.trim_matches(|c| c == '.' || c == '-'))
        .filter(|t| !t.is_empty())
}

fn allowlist(codebook: &Codebook) -> HashSet<String> {
    let mut out: HashSet<String> = HashSet::new();
    let mut add = |s: &str| out.extend(tokens(s).map(str::to_owned));
    add(&codebook.dataset_name);
    add(&codebook.version);
    for f in &codebook.fields {
        add(&f.name);
        add(&f.description);
        if let Some(u) = &f.unit {
            add(u);
        }
        for label in f.coding.iter().flat_map(|c| c.values()) {
            add(label);
        }
    }
    out
}

/// Two or more fractional digits: precise enough that a match is unlikely
/// to be a coincidence with a user-written threshold.
fn distinctive_number(token: &str) -> Option<f64> {
    let (_, frac) = token.split_once('.')?;
    if frac.len() < 2 || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    token.parse().ok()
}

fn data_numbers(store: &PatientStore) -> HashSet<u64> {
    let mut out = HashSet::new();
    let mut add = |v: f64| {
        out.insert(v.to_bits());
    };
    for col in store.columns().values() {
        for row in 0..store.len() {
            if let Some(v) = col.get_f64(row) {
                add(v);
            }
        }
    }
    for row in 0..store.len() {
        for m in store.bp_at(row) {
            add(m.t);
            add(m.sbp);
            add(m.dbp);
        }
        for e in store.events_at(row) {
            add(e.t_start);
            if let Some(end) = e.t_end {
                add(end);
            }
        }
    }
    out
}

/// Returns one violation per offending token per prompt; empty means the log
/// only carries metadata.
pub fn privacy_audit(prompts: &[String], store: &PatientStore) -> Vec<PrivacyViolation> {
    if prompts.is_empty() {
        return Vec::new();
    }
    let allowed = allowlist(store.codebook());
    let uids: HashSet<&str> = store.uids().iter().map(|u| u.as_str()).collect();
    let numbers = data_numbers(store);
    let mut out = Vec::new();
    for (idx, prompt) in prompts.iter().enumerate() {
        let mut seen = HashSet::new();
        for tok in tokens(prompt) {
            if allowed.contains(tok) || !seen.insert(tok) {
                continue;
            }
            let source = if uids.contains(tok) {
                Some(ViolationSource::Uid)
            } else if distinctive_number(tok).is_some_and(|v| numbers.contains(&v.to_bits())) {
                Some(ViolationSource::NumericValue)
            } else {
                None
            };
            if let Some(source) = source {
                out.push(PrivacyViolation { prompt_index: idx, token: tok.to_owned(), source });
            }
        }
    }
    out
}
