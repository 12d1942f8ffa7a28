//! Shared helpers for the integration tests: a row-at-a-time reference
//! interpreter and proptest strategies for queries.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::OnceLock;

use cohortscope::dataset::synth::synthetic_codebook;
use cohortscope::dataset::{
    synthesize, BpMeasurement, BpType, ClinicalEvent, PatientStore, StoreBuilder, SynthConfig, Uid,
};
use cohortscope::dsl::{CmpOp, CohortQueryAst, Literal, Window};
use proptest::prelude::*;

pub fn store(n: usize, seed: u64) -> PatientStore {
    synthesize(&SynthConfig::new(n, seed)).expect("synthetic data is valid").0
}

/// 1000 patients, seed 1. Built once per test binary.
pub fn small_store() -> &'static PatientStore {
    static S: OnceLock<PatientStore> = OnceLock::new();
    S.get_or_init(|| store(1000, 1))
}

fn cmp(op: CmpOp, a: f64, b: f64) -> bool {
    match op {
        CmpOp::Eq => a == b,
        CmpOp::Ne => a != b,
        CmpOp::Lt => a < b,
        CmpOp::Le => a <= b,
        CmpOp::Gt => a > b,
        CmpOp::Ge => a >= b,
    }
}

fn series_value(m: &BpMeasurement, s: BpType) -> f64 {
    match s {
        BpType::Sbp => m.sbp,
        BpType::Dbp => m.dbp,
        BpType::Map => m.dbp + (m.sbp - m.dbp) / 3.0,
    }
}

pub struct Patient {
    uid: Uid,
    clinical: std::collections::BTreeMap<String, Option<f64>>,
    bp: Vec<BpMeasurement>,
    events: Vec<ClinicalEvent>,
}

fn holds(ast: &CohortQueryAst, p: &Patient) -> bool {
    match ast {
        CohortQueryAst::And { children } => children.iter().all(|c| holds(c, p)),
        CohortQueryAst::Or { children } => children.iter().any(|c| holds(c, p)),
        CohortQueryAst::Not { child } => !holds(child, p),
        CohortQueryAst::BoolLit { value } => *value,
        CohortQueryAst::Compare { field, op, value } => match (p.clinical.get(field).copied().flatten(), value) {
            (Some(v), Literal::Number(x)) => cmp(*op, v, *x),
            _ => false,
        },
        CohortQueryAst::In { field, values } => match p.clinical.get(field).copied().flatten() {
            Some(v) => values.iter().any(|l| matches!(l, Literal::Number(x) if *x == v)),
            None => false,
        },
        CohortQueryAst::ExistsBp { series, window, op, threshold } => {
            p.bp.iter().any(|m| window.lo <= m.t && m.t < window.hi && cmp(*op, series_value(m, *series), *threshold))
        }
        CohortQueryAst::HasEvent { kind, window } => p.events.iter().any(|e| {
            if !e.kind.label().eq_ignore_ascii_case(kind) {
                return false;
            }
            match window {
                None => true,
                Some(w) => {
                    let end = e.t_end.unwrap_or(e.t_start);
                    e.t_start < w.hi && end >= w.lo
                }
            }
        }),
    }
}

/// Row views built from the per-uid accessors only.
pub fn patients(store: &PatientStore) -> Vec<Patient> {
    store
        .uids()
        .iter()
        .map(|uid| Patient {
            uid: uid.clone(),
            clinical: store
                .record(uid.as_str())
                .expect("known uid")
                .clinical
                .into_iter()
                .map(|(k, v)| (k, v.as_f64()))
                .collect(),
            bp: store.bp_series(uid.as_str()).expect("known uid").to_vec(),
            events: store.events(uid.as_str()).expect("known uid").to_vec(),
        })
        .collect()
}

/// Walks the AST once per patient.
pub fn oracle_over(ast: &CohortQueryAst, patients: &[Patient], base: Option<&BTreeSet<Uid>>) -> BTreeSet<Uid> {
    patients
        .iter()
        .filter(|p| base.is_none_or(|b| b.contains(&p.uid)) && holds(ast, p))
        .map(|p| p.uid.clone())
        .collect()
}

pub fn oracle(ast: &CohortQueryAst, store: &PatientStore, base: Option<&BTreeSet<Uid>>) -> BTreeSet<Uid> {
    oracle_over(ast, &patients(store), base)
}

// ---- strategies -------------------------------------------------------------

const RESERVED: [&str; 8] = ["and", "or", "not", "true", "false", "in", "exists", "has_event"];

pub fn ident() -> impl Strategy<Value = String> {
    "[A-Za-z_][A-Za-z0-9_]{0,7}".prop_filter("reserved word", |s| !RESERVED.iter().any(|r| r.eq_ignore_ascii_case(s)))
}

pub fn number() -> impl Strategy<Value = f64> {
    prop_oneof![
        (-1000i32..1000).prop_map(f64::from),
        (-100_000i32..100_000).prop_map(|v| f64::from(v) / 100.0),
        prop::num::f64::NORMAL | prop::num::f64::ZERO | prop::num::f64::SUBNORMAL,
    ]
}

fn literal() -> impl Strategy<Value = Literal> {
    prop_oneof![number().prop_map(Literal::Number), "[ -~]{0,8}".prop_map(Literal::Text)]
}

pub fn window() -> impl Strategy<Value = Window> {
    prop_oneof![
        (0u32..200, 1u32..200).prop_map(|(lo, w)| Window { lo: f64::from(lo), hi: f64::from(lo + w) }),
        (0.0f64..1e6, 1e-6f64..1e3).prop_map(|(lo, w)| Window { lo, hi: lo + w }),
    ]
    .prop_filter("lo < hi", |w| w.lo < w.hi)
}

fn cmp_op() -> impl Strategy<Value = CmpOp> {
    prop::sample::select(CmpOp::ALL.to_vec())
}

fn series() -> impl Strategy<Value = BpType> {
    prop::sample::select(BpType::ALL.to_vec())
}

fn with_children(
    leaf: impl Strategy<Value = CohortQueryAst> + Clone + 'static,
) -> impl Strategy<Value = CohortQueryAst> {
    leaf.prop_recursive(4, 32, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(CohortQueryAst::and),
            prop::collection::vec(inner.clone(), 2..4).prop_map(CohortQueryAst::or),
            inner.prop_map(CohortQueryAst::not),
        ]
    })
}

/// Any AST the grammar can express, over arbitrary identifiers.
pub fn any_ast() -> impl Strategy<Value = CohortQueryAst> {
    let leaf =
        prop_oneof![
            any::<bool>().prop_map(CohortQueryAst::bool),
            (ident(), cmp_op(), literal()).prop_map(|(f, op, v)| CohortQueryAst::Compare { field: f, op, value: v }),
            (ident(), prop::collection::vec(literal(), 1..4))
                .prop_map(|(field, values)| CohortQueryAst::In { field, values }),
            (series(), window(), cmp_op(), number())
                .prop_map(|(series, window, op, threshold)| CohortQueryAst::ExistsBp { series, window, op, threshold }),
            (ident(), prop::option::of(window())).prop_map(|(kind, window)| CohortQueryAst::HasEvent { kind, window }),
        ];
    with_children(leaf)
}

const NUMERIC: [(&str, f64, f64); 7] = [
    ("age", 30.0, 95.0),
    ("nihss_initial", 0.0, 30.0),
    ("bmi", 16.0, 38.0),
    ("glucose", 70.0, 260.0),
    ("delay", 0.0, 24.0),
    ("ia_surgery_time", 0.0, 180.0),
    ("los_days", 1.0, 40.0),
];

fn numeric_compare() -> impl Strategy<Value = CohortQueryAst> {
    (prop::sample::select(NUMERIC.to_vec()), cmp_op(), 0.0f64..1.0).prop_map(|((f, lo, hi), op, u)| {
        let x = (lo + u * (hi - lo)).round();
        CohortQueryAst::compare(f, op, Literal::Number(x))
    })
}

/// (field, codes, labels) of categorical clinical fields.
fn categorical_fields(store: &PatientStore) -> Vec<(String, Vec<i64>, Vec<String>)> {
    store
        .codebook()
        .fields_in(cohortscope::dataset::Table::Clinical)
        .filter_map(|f| {
            let c = f.coding.as_ref()?;
            Some((f.name.clone(), c.keys().copied().collect(), c.values().cloned().collect()))
        })
        .collect()
}

fn categorical_leaf(store: &PatientStore) -> impl Strategy<Value = CohortQueryAst> {
    let fields = categorical_fields(store);
    prop::sample::select(fields).prop_flat_map(|(name, codes, labels)| {
        let code = prop::sample::select(codes.clone()).prop_map(|c| Literal::Number(c as f64));
        let label = prop::sample::select(labels).prop_map(Literal::Text);
        let lit = prop_oneof![3 => code, 1 => label];
        let eq_name = name.clone();
        prop_oneof![
            (prop::sample::select(vec![CmpOp::Eq, CmpOp::Ne]), lit.clone())
                .prop_map(move |(op, v)| CohortQueryAst::compare(&eq_name, op, v)),
            prop::collection::vec(lit, 1..4).prop_map(move |values| CohortQueryAst::In { field: name.clone(), values }),
        ]
    })
}

fn bp_leaf() -> impl Strategy<Value = CohortQueryAst> {
    (series(), 0u32..168, 1u32..96, cmp_op(), 50u32..220).prop_map(|(series, lo, w, op, thr)| {
        CohortQueryAst::ExistsBp {
            series,
            window: Window { lo: f64::from(lo), hi: f64::from(lo + w) },
            op,
            threshold: f64::from(thr),
        }
    })
}

fn event_leaf() -> impl Strategy<Value = CohortQueryAst> {
    let kinds = vec!["IVT", "IAT", "recurrence", "symHT", "ivt", "SYMHT"];
    (prop::sample::select(kinds), prop::option::of((0u32..120, 1u32..72))).prop_map(|(k, w)| CohortQueryAst::HasEvent {
        kind: k.to_owned(),
        window: w.map(|(lo, len)| Window { lo: f64::from(lo), hi: f64::from(lo + len) }),
    })
}

/// ASTs that typecheck against the synthetic codebook.
pub fn typed_ast(store: &PatientStore) -> impl Strategy<Value = CohortQueryAst> {
    let leaf = prop_oneof![
        1 => any::<bool>().prop_map(CohortQueryAst::bool),
        4 => numeric_compare(),
        4 => categorical_leaf(store),
        3 => bp_leaf(),
        2 => event_leaf(),
    ];
    with_children(leaf)
}

/// A store holding one patient `p1` with the given `(t, sbp, dbp)` rows.
pub fn single_patient(rows: &[(f64, f64, f64)]) -> PatientStore {
    let mut b = StoreBuilder::new(synthetic_codebook());
    b.push_patient(Uid::new("p1"), Vec::new());
    for &(t, sbp, dbp) in rows {
        b.push_bp("p1", BpMeasurement { t, sbp, dbp });
    }
    b.finish().expect("valid single-patient store")
}

/// Sorted, strictly increasing times with plausible pressures.
pub fn bp_rows(max_len: usize, horizon: f64) -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::btree_set(0u64..(horizon * 1000.0) as u64, 1..max_len).prop_flat_map(|ts| {
        let n = ts.len();
        (Just(ts), prop::collection::vec((90.0f64..230.0, 0.4f64..0.8), n)).prop_map(|(ts, vs)| {
            ts.into_iter().zip(vs).map(|(t, (sbp, ratio))| (t as f64 / 1000.0, sbp, (sbp * ratio).max(1.0))).collect()
        })
    })
}
