use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{
    BpMeasurement, BpType, ClinicalEvent, Codebook, DatasetError, Dtype, FieldValue, PatientRecord, Table, Uid,
    Violation,
};

/// Column storage for one clinical field, indexed by patient row.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<Option<f64>>),
    Categorical(Vec<Option<i64>>),
}

impl Column {
    pub fn get(&self, row: usize) -> FieldValue {
        match self {
            Column::Numeric(v) => v[row].map_or(FieldValue::Missing, FieldValue::Numeric),
            Column::Categorical(v) => v[row].map_or(FieldValue::Missing, FieldValue::Code),
        }
    }

    /// Numeric view of a cell; codes are widened to `f64`.
    pub fn get_f64(&self, row: usize) -> Option<f64> {
        match self {
            Column::Numeric(v) => v[row],
            Column::Categorical(v) => v[row].map(|c| c as f64),
        }
    }

    fn push_missing(&mut self) {
        match self {
            Column::Numeric(v) => v.push(None),
            Column::Categorical(v) => v.push(None),
        }
    }
}

/// Immutable snapshot of a loaded dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientStore {
    codebook: Codebook,
    uids: Vec<Uid>,
    uid_index: HashMap<Uid, usize>,
    columns: BTreeMap<String, Column>,
    bp: Vec<Vec<BpMeasurement>>,
    events: Vec<Vec<ClinicalEvent>>,
}

impl PatientStore {
    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn len(&self) -> usize {
        self.uids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.uids.is_empty()
    }

    /// Uids in row order.
    pub fn uids(&self) -> &[Uid] {
        &self.uids
    }

    pub fn all_uids(&self) -> BTreeSet<Uid> {
        self.uids.iter().cloned().collect()
    }

    pub fn row(&self, uid: &str) -> Option<usize> {
        self.uid_index.get(uid).copied()
    }

    pub fn uid_at(&self, row: usize) -> &Uid {
        &self.uids[row]
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.get(name)
    }

    pub fn columns(&self) -> &BTreeMap<String, Column> {
        &self.columns
    }

    pub fn value(&self, row: usize, field: &str) -> FieldValue {
        self.columns.get(field).map_or(FieldValue::Missing, |c| c.get(row))
    }

    pub fn bp_at(&self, row: usize) -> &[BpMeasurement] {
        &self.bp[row]
    }

    pub fn events_at(&self, row: usize) -> &[ClinicalEvent] {
        &self.events[row]
    }

    pub fn bp_series(&self, uid: &str) -> Result<&[BpMeasurement], DatasetError> {
        self.row(uid).map(|r| self.bp_at(r)).ok_or_else(|| DatasetError::UnknownUid(uid.to_owned()))
    }

    pub fn events(&self, uid: &str) -> Result<&[ClinicalEvent], DatasetError> {
        self.row(uid).map(|r| self.events_at(r)).ok_or_else(|| DatasetError::UnknownUid(uid.to_owned()))
    }

    pub fn record(&self, uid: &str) -> Result<PatientRecord, DatasetError> {
        let row = self.row(uid).ok_or_else(|| DatasetError::UnknownUid(uid.to_owned()))?;
        Ok(PatientRecord {
            uid: self.uids[row].clone(),
            clinical: self.columns.iter().map(|(k, c)| (k.clone(), c.get(row))).collect(),
        })
    }

    /// `(t, value)` pairs for one series. MAP is derived per point.
    pub fn derive_series(&self, uid: &str, bp: BpType) -> Result<Vec<(f64, f64)>, DatasetError> {
        Ok(self.bp_series(uid)?.iter().map(|m| (m.t, m.value(bp))).collect())
    }

    pub fn total_measurements(&self) -> usize {
        self.bp.iter().map(Vec::len).sum()
    }
}

/// Accumulates patients, measurements and events, collecting every
/// invariant violation instead of stopping at the first.
#[derive(Debug)]
pub struct StoreBuilder {
    codebook: Codebook,
    uids: Vec<Uid>,
    uid_index: HashMap<Uid, usize>,
    columns: BTreeMap<String, Column>,
    bp: Vec<Vec<BpMeasurement>>,
    events: Vec<Vec<ClinicalEvent>>,
    violations: Vec<Violation>,
}

impl StoreBuilder {
    pub fn new(codebook: Codebook) -> Self {
        let violations = codebook.validate();
        let columns = codebook
            .fields_in(Table::Clinical)
            .map(|f| {
                let col = match f.dtype {
                    Dtype::Numeric => Column::Numeric(Vec::new()),
                    Dtype::Categorical => Column::Categorical(Vec::new()),
                };
                (f.name.clone(), col)
            })
            .collect();
        StoreBuilder {
            codebook,
            uids: Vec::new(),
            uid_index: HashMap::new(),
            columns,
            bp: Vec::new(),
            events: Vec::new(),
            violations,
        }
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn violate(&mut self, v: Violation) {
        self.violations.push(v);
    }

    /// Adds one clinical row. Fields not mentioned are missing.
    pub fn push_patient<I>(&mut self, uid: Uid, values: I)
    where
        I: IntoIterator<Item = (String, FieldValue)>,
    {
        if uid.0.is_empty() {
            self.violate(Violation::Integrity { uid: uid.0, reason: "empty uid".into() });
            return;
        }
        if self.uid_index.contains_key(&uid) {
            self.violate(Violation::Integrity { uid: uid.0, reason: "duplicate uid".into() });
            return;
        }
        let row = self.uids.len();
        for col in self.columns.values_mut() {
            col.push_missing();
        }
        for (name, value) in values {
            let Some(desc) = self.codebook.get_in(Table::Clinical, &name) else {
                self.violations.push(Violation::Schema { field: name, reason: "no descriptor".into() });
                continue;
            };
            let problem = match (desc.dtype, value) {
                (_, FieldValue::Missing) => None,
                (Dtype::Numeric, FieldValue::Numeric(v)) if !v.is_finite() => Some("non-finite value".to_owned()),
                (Dtype::Numeric, FieldValue::Numeric(v)) if name == "age" && v < 0.0 => Some("negative age".to_owned()),
                (Dtype::Numeric, FieldValue::Numeric(_)) => None,
                (Dtype::Categorical, FieldValue::Code(c)) if desc.label_for_code(c).is_none() => {
                    Some(format!("code {c} not in coding of `{name}`"))
                }
                (Dtype::Categorical, FieldValue::Code(_)) => None,
                (dtype, _) => Some(format!("value does not conform to {} field `{name}`", dtype.as_str())),
            };
            if let Some(reason) = problem {
                self.violations.push(Violation::Integrity { uid: uid.0.clone(), reason });
                continue;
            }
            match (self.columns.get_mut(&name), value) {
                (Some(Column::Numeric(v)), FieldValue::Numeric(x)) => v[row] = Some(x),
                (Some(Column::Categorical(v)), FieldValue::Code(c)) => v[row] = Some(c),
                _ => {}
            }
        }
        self.uid_index.insert(uid.clone(), row);
        self.uids.push(uid);
        self.bp.push(Vec::new());
        self.events.push(Vec::new());
    }

    pub fn push_bp(&mut self, uid: &str, m: BpMeasurement) {
        let Some(&row) = self.uid_index.get(uid) else {
            self.violate(Violation::Integrity { uid: uid.into(), reason: "bp row for unknown uid".into() });
            return;
        };
        if !(m.t.is_finite() && m.t >= 0.0) {
            self.violate(Violation::Integrity { uid: uid.into(), reason: format!("invalid time {}", m.t) });
        } else if !(m.dbp > 0.0 && m.dbp <= m.sbp && m.sbp.is_finite()) {
            self.violate(Violation::Integrity {
                uid: uid.into(),
                reason: format!("requires 0 < dbp <= sbp, got sbp={} dbp={}", m.sbp, m.dbp),
            });
        } else {
            self.bp[row].push(m);
        }
    }

    pub fn push_event(&mut self, uid: &str, ev: ClinicalEvent) {
        let Some(&row) = self.uid_index.get(uid) else {
            self.violate(Violation::Integrity { uid: uid.into(), reason: "event row for unknown uid".into() });
            return;
        };
        let bad_start = !(ev.t_start.is_finite() && ev.t_start >= 0.0);
        let bad_end = ev.t_end.is_some_and(|e| !(e.is_finite() && e >= ev.t_start));
        if bad_start || bad_end {
            self.violate(Violation::Integrity { uid: uid.into(), reason: "invalid event interval".into() });
        } else {
            self.events[row].push(ev);
        }
    }

    pub fn finish(mut self) -> Result<PatientStore, DatasetError> {
        for (row, series) in self.bp.iter_mut().enumerate() {
            series.sort_by(|a, b| a.t.total_cmp(&b.t));
            if let Some(w) = series.windows(2).find(|w| w[0].t == w[1].t) {
                self.violations.push(Violation::Integrity {
                    uid: self.uids[row].0.clone(),
                    reason: format!("duplicate bp timestamp {}", w[0].t),
                });
            }
        }
        for evs in &mut self.events {
            evs.sort_by(|a, b| a.t_start.total_cmp(&b.t_start).then_with(|| a.kind.cmp(&b.kind)));
        }
        if !self.violations.is_empty() {
            return Err(DatasetError::Invalid(self.violations));
        }
        Ok(PatientStore {
            codebook: self.codebook,
            uids: self.uids,
            uid_index: self.uid_index,
            columns: self.columns,
            bp: self.bp,
            events: self.events,
        })
    }
}
