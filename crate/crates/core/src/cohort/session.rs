//! Append-only session log. Each line is one add/remove record; wrangler
//! traces live in a sibling `<log>.traces/` directory, referenced by name.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{CohortError, CohortNode, CohortTree};
use crate::dataset::PatientStore;
use crate::dsl::compile;
use crate::wrangler::WranglerTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionOp {
    Add,
    Remove,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionRecord {
    pub op: SessionOp,
    pub id: String,
    pub parent_id: Option<String>,
    pub name: Option<String>,
    pub query_text: Option<String>,
    pub trace_ref: Option<String>,
    pub timestamp: DateTime<Utc>,
    #[serde(skip)]
    pub trace: Option<WranglerTrace>,
}

impl SessionRecord {
    pub(crate) fn add(node: &CohortNode) -> Self {
        SessionRecord {
            op: SessionOp::Add,
            id: node.id.clone(),
            parent_id: node.parent_id.clone(),
            name: Some(node.name.clone()),
            query_text: Some(node.query_text.clone()),
            trace_ref: node.trace.as_ref().map(|_| format!("{}.json", node.id)),
            timestamp: node.created_at,
            trace: node.trace.clone(),
        }
    }

    pub(crate) fn remove(id: &str, at: DateTime<Utc>) -> Self {
        SessionRecord {
            op: SessionOp::Remove,
            id: id.to_owned(),
            parent_id: None,
            name: None,
            query_text: None,
            trace_ref: None,
            timestamp: at,
            trace: None,
        }
    }
}

fn traces_dir(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".traces");
    path.with_file_name(name)
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CohortError + '_ {
    move |e| CohortError::IoError { path: path.to_owned(), reason: e.to_string() }
}

pub fn save_session(tree: &CohortTree, path: &Path) -> Result<(), CohortError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let traces = traces_dir(path);
    let mut out = BufWriter::new(File::create(path).map_err(io_err(path))?);
    for rec in tree.log() {
        if let (Some(r), Some(trace)) = (&rec.trace_ref, &rec.trace) {
            fs::create_dir_all(&traces).map_err(io_err(&traces))?;
            let tpath = traces.join(r);
            let body = serde_json::to_vec_pretty(trace).expect("trace serializes");
            fs::write(&tpath, body).map_err(io_err(&tpath))?;
        }
        let line = serde_json::to_string(rec).expect("record serializes");
        writeln!(out, "{line}").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

/// Rebuilds a tree by replaying `records` in order against `store`.
pub fn replay_records(records: &[SessionRecord], store: &PatientStore) -> Result<CohortTree, CohortError> {
    let mut tree = CohortTree::new();
    for (i, rec) in records.iter().enumerate() {
        let replay_err = |reason: String| CohortError::ReplayError { record: i + 1, reason };
        match rec.op {
            SessionOp::Add => {
                let text =
                    rec.query_text.as_deref().ok_or_else(|| replay_err("add record without queryText".into()))?;
                let query = compile(text, store.codebook()).map_err(|e| replay_err(e.to_string()))?;
                tree.insert(
                    Some(rec.id.clone()),
                    rec.name.as_deref(),
                    query,
                    rec.trace.clone(),
                    rec.parent_id.as_deref(),
                    rec.timestamp,
                    store,
                )
                .map_err(|e| replay_err(e.to_string()))?;
            }
            SessionOp::Remove => {
                tree.remove_at(&rec.id, rec.timestamp).map_err(|e| replay_err(e.to_string()))?;
            }
        }
    }
    Ok(tree)
}

pub fn load_session(path: &Path, store: &PatientStore) -> Result<CohortTree, CohortError> {
    let file = File::open(path).map_err(io_err(path))?;
    let traces = traces_dir(path);
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut rec: SessionRecord = serde_json::from_str(&line)
            .map_err(|e| CohortError::ReplayError { record: i + 1, reason: format!("malformed record: {e}") })?;
        if let Some(r) = &rec.trace_ref {
            let tpath = traces.join(r);
            let body = fs::read(&tpath).map_err(io_err(&tpath))?;
            rec.trace =
                Some(serde_json::from_slice(&body).map_err(|e| CohortError::ReplayError {
                    record: i + 1,
                    reason: format!("malformed trace: {e}"),
                })?);
        }
        records.push(rec);
    }
    replay_records(&records, store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synth::{synthesize, SynthConfig};

    #[test]
    fn save_load_round_trip_with_removal() {
        let (store, _) = synthesize(&SynthConfig::new(80, 5)).unwrap();
        let cb = store.codebook();
        let mut t = CohortTree::new();
        t.add_cohort(Some("all"), compile("true", cb).unwrap(), None, None, &store).unwrap();
        t.add_cohort(None, compile("age >= 60", cb).unwrap(), None, Some("c1"), &store).unwrap();
        t.add_cohort(None, compile("male == 1", cb).unwrap(), None, Some("c2"), &store).unwrap();
        t.add_cohort(None, compile("male == 0", cb).unwrap(), None, Some("c1"), &store).unwrap();
        t.remove_cohort("c2").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        save_session(&t, &path).unwrap();
        let back = load_session(&path, &store).unwrap();
        assert_eq!(back, t);
        let again = replay_records(back.log(), &store).unwrap();
        assert_eq!(again, back);
    }
}
