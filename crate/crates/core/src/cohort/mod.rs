//! Cohort tree: nested patient subsets refined by conjunction.

mod session;
mod summary;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use chrono::{DateTime, Utc};
use serde::Serialize;
use thiserror::Error;

pub use session::{load_session, replay_records, save_session, SessionOp, SessionRecord};
pub use summary::{
    group_summary, AttributeRow, AttributeTable, BpHistogram, BpSummary, GroupSummary, HIST_HI, HIST_LO, HIST_WIDTH,
};

use crate::dataset::{PatientStore, Uid};
use crate::dsl::{candidate_rows, evaluate_rows, print, CohortQueryAst, TypedQuery};
use crate::vis::{order_rows, SortDirection, SortKey, VisError};
use crate::wrangler::WranglerTrace;

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum CohortError {
    #[error("unknown cohort `{id}`")]
    UnknownCohort { id: String },
    #[error("unknown parent cohort `{id}`")]
    UnknownParent { id: String },
    #[error("session i/o failed for {path}: {reason}")]
    IoError { path: PathBuf, reason: String },
    #[error("session record {record} cannot be replayed: {reason}")]
    ReplayError { record: usize, reason: String },
    #[error("cohort `{id}` already exists")]
    DuplicateId { id: String },
    #[error("cohort tree invariant broken: {0}")]
    InvariantViolation(String),
    #[error(transparent)]
    Sort(VisError),
}

impl CohortError {
    pub fn kind(&self) -> &'static str {
        match self {
            CohortError::UnknownCohort { .. } => "UnknownCohort",
            CohortError::UnknownParent { .. } => "UnknownParent",
            CohortError::IoError { .. } => "IoError",
            CohortError::ReplayError { .. } => "ReplayError",
            CohortError::DuplicateId { .. } => "DuplicateId",
            CohortError::InvariantViolation(_) => "InvariantViolation",
            CohortError::Sort(e) => e.kind(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CohortNode {
    pub id: String,
    pub name: String,
    pub parent_id: Option<String>,
    /// The refinement predicate of this node alone.
    pub query_text: String,
    #[serde(skip)]
    pub query: TypedQuery,
    #[serde(skip)]
    pub effective_query: CohortQueryAst,
    pub effective_query_text: String,
    pub member_uids: BTreeSet<Uid>,
    pub trace: Option<WranglerTrace>,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CohortWarning {
    EmptyCohort,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AddOutcome {
    pub node: CohortNode,
    pub warning: Option<CohortWarning>,
}

/// Compact listing used by the tree endpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct NodeView {
    pub id: String,
    pub name: String,
    pub parent_id: Option<String>,
    pub query_text: String,
    pub effective_query_text: String,
    pub member_count: usize,
    pub has_trace: bool,
    pub created_at: DateTime<Utc>,
    pub children: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CohortTree {
    nodes: BTreeMap<String, CohortNode>,
    /// Creation order, which is also a valid topological order.
    order: Vec<String>,
    next_seq: u64,
    log: Vec<SessionRecord>,
}

impl CohortTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&CohortNode> {
        self.nodes.get(id)
    }

    pub fn node(&self, id: &str) -> Result<&CohortNode, CohortError> {
        self.nodes.get(id).ok_or_else(|| CohortError::UnknownCohort { id: id.to_owned() })
    }

    /// Nodes in creation order.
    pub fn nodes(&self) -> impl Iterator<Item = &CohortNode> {
        self.order.iter().map(|id| &self.nodes[id])
    }

    pub fn children(&self, id: &str) -> Vec<&str> {
        self.nodes().filter(|n| n.parent_id.as_deref() == Some(id)).map(|n| n.id.as_str()).collect()
    }

    pub fn log(&self) -> &[SessionRecord] {
        &self.log
    }

    pub fn view(&self) -> Vec<NodeView> {
        self.nodes()
            .map(|n| NodeView {
                id: n.id.clone(),
                name: n.name.clone(),
                parent_id: n.parent_id.clone(),
                query_text: n.query_text.clone(),
                effective_query_text: n.effective_query_text.clone(),
                member_count: n.member_uids.len(),
                has_trace: n.trace.is_some(),
                created_at: n.created_at,
                children: self.children(&n.id).into_iter().map(str::to_owned).collect(),
            })
            .collect()
    }

    /// Evaluates `query` within the parent's members (all patients for a
    /// root) and inserts the node. Empty results are kept, with a warning.
    pub fn add_cohort(
        &mut self,
        name: Option<&str>,
        query: TypedQuery,
        trace: Option<WranglerTrace>,
        parent_id: Option<&str>,
        store: &PatientStore,
    ) -> Result<AddOutcome, CohortError> {
        self.insert(None, name, query, trace, parent_id, Utc::now(), store)
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn insert(
        &mut self,
        id: Option<String>,
        name: Option<&str>,
        query: TypedQuery,
        trace: Option<WranglerTrace>,
        parent_id: Option<&str>,
        created_at: DateTime<Utc>,
        store: &PatientStore,
    ) -> Result<AddOutcome, CohortError> {
        let parent = match parent_id {
            Some(p) => Some(self.nodes.get(p).ok_or_else(|| CohortError::UnknownParent { id: p.to_owned() })?),
            None => None,
        };
        let seq = self.next_seq + 1;
        let id = id.unwrap_or_else(|| format!("c{seq}"));
        if self.nodes.contains_key(&id) {
            return Err(CohortError::DuplicateId { id });
        }
        let rows = candidate_rows(store, parent.map(|p| &p.member_uids));
        let member_uids: BTreeSet<Uid> =
            evaluate_rows(&query.ast, store, &rows).into_iter().map(|r| store.uid_at(r).clone()).collect();
        let effective_query = match parent {
            Some(p) => CohortQueryAst::conjoin(p.effective_query.clone(), query.ast.clone()),
            None => query.ast.clone(),
        };
        let node = CohortNode {
            id: id.clone(),
            name: name.map_or_else(|| format!("C{seq}"), str::to_owned),
            parent_id: parent_id.map(str::to_owned),
            query_text: query.source_text.clone(),
            effective_query_text: print(&effective_query),
            query,
            effective_query,
            member_uids,
            trace,
            created_at,
        };
        self.next_seq = seq.max(id.strip_prefix('c').and_then(|n| n.parse().ok()).unwrap_or(seq));
        self.log.push(SessionRecord::add(&node));
        self.nodes.insert(id.clone(), node.clone());
        self.order.push(id);
        self.check_invariants()?;
        let warning = node.member_uids.is_empty().then_some(CohortWarning::EmptyCohort);
        Ok(AddOutcome { node, warning })
    }

    /// Removes `id` and its descendants; returns the removed ids in creation
    /// order.
    pub fn remove_cohort(&mut self, id: &str) -> Result<Vec<String>, CohortError> {
        self.remove_at(id, Utc::now())
    }

    pub(crate) fn remove_at(&mut self, id: &str, at: DateTime<Utc>) -> Result<Vec<String>, CohortError> {
        if !self.nodes.contains_key(id) {
            return Err(CohortError::UnknownCohort { id: id.to_owned() });
        }
        let mut doomed: BTreeSet<String> = BTreeSet::from([id.to_owned()]);
        // creation order is topological, so one pass finds every descendant
        for n in self.nodes() {
            if n.parent_id.as_ref().is_some_and(|p| doomed.contains(p)) {
                doomed.insert(n.id.clone());
            }
        }
        let removed: Vec<String> = self.order.iter().filter(|i| doomed.contains(*i)).cloned().collect();
        self.order.retain(|i| !doomed.contains(i));
        for r in &removed {
            self.nodes.remove(r);
        }
        self.log.push(SessionRecord::remove(id, at));
        self.check_invariants()?;
        Ok(removed)
    }

    /// Acyclic, parents resolve, members nest inside parents.
    pub fn check_invariants(&self) -> Result<(), CohortError> {
        let bad = |m: String| Err(CohortError::InvariantViolation(m));
        if self.order.len() != self.nodes.len() {
            return bad("creation order out of sync with nodes".into());
        }
        let mut seen = BTreeSet::new();
        for id in &self.order {
            let Some(n) = self.nodes.get(id) else { return bad(format!("`{id}` listed but missing")) };
            if let Some(p) = &n.parent_id {
                // a parent must precede its child, which rules out cycles
                if !seen.contains(p.as_str()) {
                    return bad(format!("parent `{p}` of `{id}` does not precede it"));
                }
                if !n.member_uids.is_subset(&self.nodes[p].member_uids) {
                    return bad(format!("members of `{id}` are not a subset of `{p}`"));
                }
            }
            if !seen.insert(id.as_str()) {
                return bad(format!("`{id}` listed twice"));
            }
        }
        Ok(())
    }

    /// Members equal a fresh evaluation of each effective query.
    pub fn verify_materialization(&self, store: &PatientStore) -> Result<(), CohortError> {
        let all = candidate_rows(store, None);
        for n in self.nodes() {
            let fresh: BTreeSet<Uid> =
                evaluate_rows(&n.effective_query, store, &all).into_iter().map(|r| store.uid_at(r).clone()).collect();
            if fresh != n.member_uids {
                return Err(CohortError::InvariantViolation(format!("members of `{}` are stale", n.id)));
            }
        }
        Ok(())
    }

    pub fn sort_members(
        &self,
        id: &str,
        store: &PatientStore,
        key: &SortKey,
        direction: SortDirection,
    ) -> Result<Vec<Uid>, CohortError> {
        let node = self.node(id)?;
        let rows = candidate_rows(store, Some(&node.member_uids));
        let ordered = order_rows(store, &rows, key, direction).map_err(CohortError::Sort)?;
        Ok(ordered.into_iter().map(|(r, _)| store.uid_at(r).clone()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synth::{synthesize, SynthConfig};
    use crate::dsl::compile;

    fn store() -> PatientStore {
        synthesize(&SynthConfig::new(100, 4)).unwrap().0
    }

    #[test]
    fn root_true_has_everyone_and_child_narrows() {
        let s = store();
        let mut t = CohortTree::new();
        let root = t.add_cohort(None, compile("true", s.codebook()).unwrap(), None, None, &s).unwrap();
        assert_eq!(root.node.member_uids.len(), 100);
        assert_eq!((root.node.id.as_str(), root.node.name.as_str()), ("c1", "C1"));
        let child = t.add_cohort(None, compile("age >= 70", s.codebook()).unwrap(), None, Some("c1"), &s).unwrap();
        assert!(child.node.member_uids.len() < 100);
        assert_eq!(child.node.effective_query_text, "age >= 70");
        t.verify_materialization(&s).unwrap();
    }

    #[test]
    fn empty_cohort_warns_and_unknown_parent_errors() {
        let s = store();
        let mut t = CohortTree::new();
        let out = t.add_cohort(None, compile("false", s.codebook()).unwrap(), None, None, &s).unwrap();
        assert_eq!(out.warning, Some(CohortWarning::EmptyCohort));
        let err = t.add_cohort(None, compile("true", s.codebook()).unwrap(), None, Some("c9"), &s).unwrap_err();
        assert_eq!(err.kind(), "UnknownParent");
    }

    #[test]
    fn remove_counts() {
        let s = store();
        let q = || compile("true", s.codebook()).unwrap();
        let mut t = CohortTree::new();
        t.add_cohort(None, q(), None, None, &s).unwrap();
        t.add_cohort(None, q(), None, Some("c1"), &s).unwrap();
        t.add_cohort(None, q(), None, Some("c1"), &s).unwrap();
        t.add_cohort(None, q(), None, Some("c2"), &s).unwrap();
        assert_eq!(t.remove_cohort("c4").unwrap(), ["c4"]);
        assert_eq!(t.remove_cohort("c1").unwrap(), ["c1", "c2", "c3"]);
        assert!(t.is_empty());
        assert_eq!(t.remove_cohort("c1").unwrap_err().kind(), "UnknownCohort");
        // ids are never reused
        assert_eq!(t.add_cohort(None, q(), None, None, &s).unwrap().node.id, "c5");
    }

    #[test]
    fn sort_with_all_missing_is_uid_order() {
        let s = store();
        let mut t = CohortTree::new();
        t.add_cohort(None, compile("true", s.codebook()).unwrap(), None, None, &s).unwrap();
        let key = SortKey::window_mean(crate::dataset::BpType::Sbp, 9999);
        let got = t.sort_members("c1", &s, &key, SortDirection::Descending).unwrap();
        let mut expected: Vec<Uid> = s.uids().to_vec();
        expected.sort();
        assert_eq!(got, expected);
    }
}
