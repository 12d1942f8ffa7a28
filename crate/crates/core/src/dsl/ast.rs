use serde::{Deserialize, Serialize};

use crate::dataset::BpType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    #[inline]
    pub fn apply(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Literal {
    Number(f64),
    Text(String),
}

impl Literal {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Literal::Number(v) => Some(*v),
            Literal::Text(_) => None,
        }
    }
}

/// Half-open time window `[lo, hi)` in hours since onset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Option<Self> {
        (lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi).then_some(Window { lo, hi })
    }

    #[inline]
    pub fn contains(&self, t: f64) -> bool {
        self.lo <= t && t < self.hi
    }

    /// Whether the closed interval `[start, end]` touches the window.
    #[inline]
    pub fn intersects(&self, start: f64, end: f64) -> bool {
        start < self.hi && end >= self.lo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "camelCase")]
pub enum CohortQueryAst {
    And { children: Vec<CohortQueryAst> },
    Or { children: Vec<CohortQueryAst> },
    Not { child: Box<CohortQueryAst> },
    Compare { field: String, op: CmpOp, value: Literal },
    In { field: String, values: Vec<Literal> },
    ExistsBp { series: BpType, window: Window, op: CmpOp, threshold: f64 },
    HasEvent { kind: String, window: Option<Window> },
    BoolLit { value: bool },
}

impl CohortQueryAst {
    pub fn and(children: Vec<CohortQueryAst>) -> Self {
        CohortQueryAst::And { children }
    }

    pub fn or(children: Vec<CohortQueryAst>) -> Self {
        CohortQueryAst::Or { children }
    }

    pub fn not(child: CohortQueryAst) -> Self {
        CohortQueryAst::Not { child: Box::new(child) }
    }

    pub fn compare(field: &str, op: CmpOp, value: Literal) -> Self {
        CohortQueryAst::Compare { field: field.to_owned(), op, value }
    }

    pub fn bool(value: bool) -> Self {
        CohortQueryAst::BoolLit { value }
    }

    /// Conjunction that keeps And nodes at two or more children.
    pub fn conjoin(lhs: CohortQueryAst, rhs: CohortQueryAst) -> Self {
        match (lhs, rhs) {
            (CohortQueryAst::BoolLit { value: true }, r) => r,
            (l, CohortQueryAst::BoolLit { value: true }) => l,
            (l, r) => CohortQueryAst::and(vec![l, r]),
        }
    }

    /// Checks the structural invariants the parser guarantees.
    pub fn is_well_formed(&self) -> bool {
        match self {
            CohortQueryAst::And { children } | CohortQueryAst::Or { children } => {
                children.len() >= 2 && children.iter().all(Self::is_well_formed)
            }
            CohortQueryAst::Not { child } => child.is_well_formed(),
            CohortQueryAst::In { values, .. } => !values.is_empty(),
            CohortQueryAst::ExistsBp { window, threshold, .. } => {
                Window::new(window.lo, window.hi).is_some() && threshold.is_finite()
            }
            CohortQueryAst::HasEvent { window, .. } => window.is_none_or(|w| Window::new(w.lo, w.hi).is_some()),
            CohortQueryAst::Compare { .. } | CohortQueryAst::BoolLit { .. } => true,
        }
    }
}
