use std::collections::BTreeSet;

use super::ast::{CohortQueryAst, Literal};
use super::typecheck::TypedQuery;
use crate::dataset::{PatientStore, Uid};

/// Evaluates a typed query. The result is restricted to `base` when given;
/// uids in `base` unknown to the store are ignored.
pub fn evaluate(query: &TypedQuery, store: &PatientStore, base: Option<&BTreeSet<Uid>>) -> BTreeSet<Uid> {
    let rows = candidate_rows(store, base);
    evaluate_rows(&query.ast, store, &rows).into_iter().map(|r| store.uid_at(r).clone()).collect()
}

pub(crate) fn candidate_rows(store: &PatientStore, base: Option<&BTreeSet<Uid>>) -> Vec<usize> {
    match base {
        None => (0..store.len()).collect(),
        Some(set) => {
            let mut rows: Vec<usize> = set.iter().filter_map(|u| store.row(u.as_str())).collect();
            rows.sort_unstable();
            rows
        }
    }
}

/// Filters ascending row indices; the output stays ascending.
pub fn evaluate_rows(ast: &CohortQueryAst, store: &PatientStore, rows: &[usize]) -> Vec<usize> {
    match ast {
        CohortQueryAst::BoolLit { value: true } => rows.to_vec(),
        CohortQueryAst::BoolLit { value: false } => Vec::new(),
        CohortQueryAst::And { children } => {
            let mut cur = rows.to_vec();
            for c in children {
                if cur.is_empty() {
                    break;
                }
                cur = evaluate_rows(c, store, &cur);
            }
            cur
        }
        CohortQueryAst::Or { children } => {
            let mut remaining = rows.to_vec();
            let mut hit = Vec::new();
            for c in children {
                if remaining.is_empty() {
                    break;
                }
                let matched = evaluate_rows(c, store, &remaining);
                remaining = difference(&remaining, &matched);
                hit.extend(matched);
            }
            hit.sort_unstable();
            hit
        }
        CohortQueryAst::Not { child } => difference(rows, &evaluate_rows(child, store, rows)),
        CohortQueryAst::Compare { field, op, value } => {
            let (Some(col), Literal::Number(rhs)) = (store.column(field), value) else {
                return Vec::new();
            };
            rows.iter().copied().filter(|&r| col.get_f64(r).is_some_and(|v| op.apply(v, *rhs))).collect()
        }
        CohortQueryAst::In { field, values } => {
            let Some(col) = store.column(field) else { return Vec::new() };
            let wanted: Vec<f64> = values.iter().filter_map(Literal::as_number).collect();
            rows.iter().copied().filter(|&r| col.get_f64(r).is_some_and(|v| wanted.contains(&v))).collect()
        }
        CohortQueryAst::ExistsBp { series, window, op, threshold } => rows
            .iter()
            .copied()
            .filter(|&r| {
                let s = store.bp_at(r);
                let start = s.partition_point(|m| m.t < window.lo);
                s[start..].iter().take_while(|m| m.t < window.hi).any(|m| op.apply(m.value(*series), *threshold))
            })
            .collect(),
        CohortQueryAst::HasEvent { kind, window } => rows
            .iter()
            .copied()
            .filter(|&r| {
                store.events_at(r).iter().any(|e| {
                    e.kind.matches(kind)
                        && window.is_none_or(|w| {
                            let (s, end) = e.span();
                            w.intersects(s, end)
                        })
                })
            })
            .collect(),
    }
}

fn difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len().saturating_sub(b.len()));
    let mut j = 0;
    for &x in a {
        while j < b.len() && b[j] < x {
            j += 1;
        }
        if j >= b.len() || b[j] != x {
            out.push(x);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synth::{synthesize, SynthConfig};
    use crate::dsl::{parse, typecheck};

    fn run(text: &str, store: &PatientStore) -> BTreeSet<Uid> {
        let q = typecheck(&parse(text).unwrap(), store.codebook()).unwrap();
        evaluate(&q, store, None)
    }

    #[test]
    fn identity_and_vacuous() {
        let (store, _) = synthesize(&SynthConfig::new(50, 1)).unwrap();
        assert_eq!(run("true", &store).len(), 50);
        assert!(run("age < 0", &store).is_empty());
        assert!(run("false", &store).is_empty());
    }

    #[test]
    fn base_restricts_result() {
        let (store, _) = synthesize(&SynthConfig::new(50, 1)).unwrap();
        let q = typecheck(&parse("true").unwrap(), store.codebook()).unwrap();
        let base: BTreeSet<Uid> = store.uids()[..7].iter().cloned().chain([Uid::from("nobody")]).collect();
        let out = evaluate(&q, &store, Some(&base));
        assert_eq!(out.len(), 7);
        assert!(out.is_subset(&base));
    }

    #[test]
    fn missing_values_never_match_comparisons() {
        let (store, _) = synthesize(&SynthConfig::new(300, 4)).unwrap();
        let missing: BTreeSet<Uid> = (0..store.len())
            .filter(|&r| store.column("bmi").unwrap().get_f64(r).is_none())
            .map(|r| store.uid_at(r).clone())
            .collect();
        assert!(!missing.is_empty());
        let eq = run("bmi == 24", &store);
        let ne = run("bmi != 24", &store);
        let not_eq = run("not bmi == 24", &store);
        for u in &missing {
            assert!(!eq.contains(u) && !ne.contains(u));
            assert!(not_eq.contains(u));
        }
    }

    #[test]
    fn difference_of_sorted_lists() {
        assert_eq!(difference(&[1, 2, 3, 5, 8], &[2, 5, 9]), vec![1, 3, 8]);
        assert_eq!(difference(&[], &[1]), Vec::<usize>::new());
    }
}
