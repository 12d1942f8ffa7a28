//! Per-field inspection charts: parent cohort versus filtered cohort, as
//! aggregated counts only.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dataset::{BpType, Dtype, PatientStore, Table, Uid};
use crate::dsl::{candidate_rows, CmpOp, CohortQueryAst, TypedQuery, Window};

pub const HISTOGRAM_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BarCategory {
    pub code: i64,
    pub label: String,
    pub pre_count: usize,
    pub post_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum SmallMultipleSpec {
    #[serde(rename_all = "camelCase")]
    Histogram {
        field: String,
        title: String,
        unit: Option<String>,
        /// `bins + 1` ascending edges; the last bin is closed.
        bin_edges: Vec<f64>,
        pre_counts: Vec<usize>,
        post_counts: Vec<usize>,
        pre_missing: usize,
        post_missing: usize,
    },
    #[serde(rename_all = "camelCase")]
    Bar { field: String, title: String, categories: Vec<BarCategory>, pre_missing: usize, post_missing: usize },
}

impl SmallMultipleSpec {
    pub fn field(&self) -> &str {
        match self {
            SmallMultipleSpec::Histogram { field, .. } | SmallMultipleSpec::Bar { field, .. } => field,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SmallMultipleSpec::Histogram { .. } => "histogram",
            SmallMultipleSpec::Bar { .. } => "bar",
        }
    }

    pub fn post_total(&self) -> usize {
        match self {
            SmallMultipleSpec::Histogram { post_counts, .. } => post_counts.iter().sum(),
            SmallMultipleSpec::Bar { categories, .. } => categories.iter().map(|c| c.post_count).sum(),
        }
    }

    pub fn post_missing(&self) -> usize {
        match self {
            SmallMultipleSpec::Histogram { post_missing, .. } | SmallMultipleSpec::Bar { post_missing, .. } => {
                *post_missing
            }
        }
    }
}

fn find_node<'a>(ast: &'a CohortQueryAst, pred: &dyn Fn(&CohortQueryAst) -> bool) -> Option<&'a CohortQueryAst> {
    if pred(ast) {
        return Some(ast);
    }
    match ast {
        CohortQueryAst::And { children } | CohortQueryAst::Or { children } => {
            children.iter().find_map(|c| find_node(c, pred))
        }
        CohortQueryAst::Not { child } => find_node(child, pred),
        _ => None,
    }
}

fn bin_edges(values: &[f64]) -> Vec<f64> {
    let (Some(lo), Some(hi)) = (values.iter().copied().reduce(f64::min), values.iter().copied().reduce(f64::max))
    else {
        return Vec::new();
    };
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo, lo + 1.0) };
    let width = (hi - lo) / HISTOGRAM_BINS as f64;
    (0..=HISTOGRAM_BINS).map(|i| if i == HISTOGRAM_BINS { hi } else { lo + i as f64 * width }).collect()
}

fn bin_counts(edges: &[f64], values: &[f64]) -> Vec<usize> {
    let n = edges.len().saturating_sub(1);
    let mut counts = vec![0; n];
    for &v in values {
        // last edge >= v for every value drawn from the parent range
        let idx = edges.partition_point(|&e| e <= v).saturating_sub(1).min(n - 1);
        counts[idx] += 1;
    }
    counts
}

fn histogram(
    field: &str,
    title: String,
    unit: Option<String>,
    pre: &[Option<f64>],
    post: &[Option<f64>],
) -> SmallMultipleSpec {
    let pre_vals: Vec<f64> = pre.iter().flatten().copied().collect();
    let post_vals: Vec<f64> = post.iter().flatten().copied().collect();
    let edges = bin_edges(&pre_vals);
    let (pre_counts, post_counts) = if edges.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        (bin_counts(&edges, &pre_vals), bin_counts(&edges, &post_vals))
    };
    SmallMultipleSpec::Histogram {
        field: field.to_owned(),
        title,
        unit,
        bin_edges: edges,
        pre_counts,
        post_counts,
        pre_missing: pre.len() - pre_vals.len(),
        post_missing: post.len() - post_vals.len(),
    }
}

/// Extremum in the direction of the comparison: max for `>`/`>=`/`==`/`!=`,
/// min for `<`/`<=`.
fn window_extremum(store: &PatientStore, row: usize, series: BpType, window: &Window, op: CmpOp) -> Option<f64> {
    let vals = store.bp_at(row).iter().filter(|m| window.contains(m.t)).map(|m| m.value(series));
    match op {
        CmpOp::Lt | CmpOp::Le => vals.reduce(f64::min),
        _ => vals.reduce(f64::max),
    }
}

/// One spec per involved field, in query order.
pub fn small_multiples(
    query: &TypedQuery,
    parent_uids: &BTreeSet<Uid>,
    cohort_uids: &BTreeSet<Uid>,
    store: &PatientStore,
) -> Vec<SmallMultipleSpec> {
    let pre_rows = candidate_rows(store, Some(parent_uids));
    let post_rows = candidate_rows(store, Some(cohort_uids));
    let codebook = store.codebook();
    let mut specs = Vec::with_capacity(query.involved_fields.len());

    for field in &query.involved_fields {
        if let Some(series) = field.strip_prefix("bp.") {
            let Ok(series) = series.parse::<BpType>() else { continue };
            let node =
                find_node(&query.ast, &|n| matches!(n, CohortQueryAst::ExistsBp { series: s, .. } if *s == series));
            let Some(CohortQueryAst::ExistsBp { window, op, .. }) = node else { continue };
            let extremum = |rows: &[usize]| -> Vec<Option<f64>> {
                rows.iter().map(|&r| window_extremum(store, r, series, window, *op)).collect()
            };
            let which = if matches!(op, CmpOp::Lt | CmpOp::Le) { "minimum" } else { "maximum" };
            let title = format!("{which} {} in hours [{}, {})", series.as_str().to_uppercase(), window.lo, window.hi);
            specs.push(histogram(field, title, Some("mmHg".into()), &extremum(&pre_rows), &extremum(&post_rows)));
        } else if let Some(kind) = field.strip_prefix("event.") {
            let node = find_node(&query.ast, &|n| matches!(n, CohortQueryAst::HasEvent { kind: k, .. } if k == kind));
            let window = match node {
                Some(CohortQueryAst::HasEvent { window, .. }) => *window,
                _ => None,
            };
            let present = |r: usize| {
                store.events_at(r).iter().any(|e| {
                    let (s, end) = e.span();
                    e.kind.matches(kind) && window.is_none_or(|w| w.intersects(s, end))
                })
            };
            let count = |rows: &[usize], want: bool| rows.iter().filter(|&&r| present(r) == want).count();
            specs.push(SmallMultipleSpec::Bar {
                field: field.clone(),
                title: format!("{kind} recorded"),
                categories: vec![
                    BarCategory {
                        code: 1,
                        label: "present".into(),
                        pre_count: count(&pre_rows, true),
                        post_count: count(&post_rows, true),
                    },
                    BarCategory {
                        code: 0,
                        label: "absent".into(),
                        pre_count: count(&pre_rows, false),
                        post_count: count(&post_rows, false),
                    },
                ],
                pre_missing: 0,
                post_missing: 0,
            });
        } else if let (Some(desc), Some(col)) = (codebook.get_in(Table::Clinical, field), store.column(field)) {
            let values = |rows: &[usize]| -> Vec<Option<f64>> { rows.iter().map(|&r| col.get_f64(r)).collect() };
            let title = if desc.description.is_empty() { field.clone() } else { desc.description.clone() };
            match desc.dtype {
                Dtype::Numeric => {
                    specs.push(histogram(field, title, desc.unit.clone(), &values(&pre_rows), &values(&post_rows)))
                }
                Dtype::Categorical => {
                    let (pre, post) = (values(&pre_rows), values(&post_rows));
                    let tally =
                        |vals: &[Option<f64>], code: i64| vals.iter().filter(|v| **v == Some(code as f64)).count();
                    let categories = desc
                        .coding
                        .iter()
                        .flatten()
                        .map(|(&code, label)| BarCategory {
                            code,
                            label: label.clone(),
                            pre_count: tally(&pre, code),
                            post_count: tally(&post, code),
                        })
                        .collect();
                    specs.push(SmallMultipleSpec::Bar {
                        field: field.clone(),
                        title,
                        categories,
                        pre_missing: pre.iter().filter(|v| v.is_none()).count(),
                        post_missing: post.iter().filter(|v| v.is_none()).count(),
                    });
                }
            }
        }
    }
    specs
}
