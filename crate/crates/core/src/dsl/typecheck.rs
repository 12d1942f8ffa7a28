use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::{CohortQueryAst, Literal};
use super::printer::print;
use crate::dataset::{BpType, Codebook, Dtype, FieldDescriptor, Table};

/// An AST resolved against a codebook: labels are replaced by codes and
/// event kinds by their canonical spelling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TypedQuery {
    pub ast: CohortQueryAst,
    /// Identifiers referenced by the query, in order of first appearance.
    /// Clinical fields use their name, BP series `bp.<series>` and events
    /// `event.<kind>`.
    pub involved_fields: Vec<String>,
    pub source_text: String,
}

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[serde(tag = "kind")]
pub enum TypeError {
    #[error("unknown field `{name}`{}", suggest(.suggestions))]
    MissingField { name: String, suggestions: Vec<String> },
    #[error("type mismatch on `{field}`: expected {expected}, got {got}")]
    TypeMismatch { field: String, expected: String, got: String },
    #[error("unknown event kind `{kind}` (known: {})", .known.join(", "))]
    UnknownEventKind {
        #[serde(rename = "eventKind")]
        kind: String,
        known: Vec<String>,
    },
    #[error("`{label}` is not a label of `{field}`")]
    UnknownLabel { field: String, label: String },
}

fn suggest(s: &[String]) -> String {
    if s.is_empty() {
        String::new()
    } else {
        format!("; did you mean {}?", s.join(", "))
    }
}

impl TypeError {
    pub fn kind(&self) -> &'static str {
        match self {
            TypeError::MissingField { .. } => "MissingField",
            TypeError::TypeMismatch { .. } => "TypeMismatch",
            TypeError::UnknownEventKind { .. } => "UnknownEventKind",
            TypeError::UnknownLabel { .. } => "UnknownLabel",
        }
    }
}

pub fn series_field(bp: BpType) -> String {
    format!("bp.{}", bp.as_str())
}

pub fn event_field(kind: &str) -> String {
    format!("event.{kind}")
}

struct Checker<'a> {
    codebook: &'a Codebook,
    involved: Vec<String>,
}

impl Checker<'_> {
    fn note(&mut self, id: String) {
        if !self.involved.contains(&id) {
            self.involved.push(id);
        }
    }

    fn clinical(&self, name: &str) -> Result<&FieldDescriptor, TypeError> {
        match self.codebook.get_in(Table::Clinical, name) {
            Some(d) => Ok(d),
            None => match self.codebook.get(name) {
                Some(d) => Err(TypeError::TypeMismatch {
                    field: name.to_owned(),
                    expected: "clinical field".into(),
                    got: format!("{} field", d.table.as_str()),
                }),
                None => Err(TypeError::MissingField {
                    name: name.to_owned(),
                    suggestions: self.codebook.nearest_names(name, 3),
                }),
            },
        }
    }

    fn literal(&self, desc: &FieldDescriptor, lit: &Literal) -> Result<Literal, TypeError> {
        match (desc.dtype, lit) {
            (Dtype::Numeric, Literal::Number(_)) => Ok(lit.clone()),
            (Dtype::Numeric, Literal::Text(s)) => Err(TypeError::TypeMismatch {
                field: desc.name.clone(),
                expected: "number".into(),
                got: format!("string {s:?}"),
            }),
            (Dtype::Categorical, Literal::Number(v)) if v.fract() == 0.0 => Ok(lit.clone()),
            (Dtype::Categorical, Literal::Number(v)) => Err(TypeError::TypeMismatch {
                field: desc.name.clone(),
                expected: "integer code or label".into(),
                got: format!("number {v}"),
            }),
            (Dtype::Categorical, Literal::Text(label)) => desc
                .code_for_label(label)
                .map(|c| Literal::Number(c as f64))
                .ok_or_else(|| TypeError::UnknownLabel { field: desc.name.clone(), label: label.clone() }),
        }
    }

    fn check(&mut self, ast: &CohortQueryAst) -> Result<CohortQueryAst, TypeError> {
        Ok(match ast {
            CohortQueryAst::And { children } => {
                CohortQueryAst::And { children: children.iter().map(|c| self.check(c)).collect::<Result<_, _>>()? }
            }
            CohortQueryAst::Or { children } => {
                CohortQueryAst::Or { children: children.iter().map(|c| self.check(c)).collect::<Result<_, _>>()? }
            }
            CohortQueryAst::Not { child } => CohortQueryAst::not(self.check(child)?),
            CohortQueryAst::BoolLit { .. } => ast.clone(),
            CohortQueryAst::Compare { field, op, value } => {
                let desc = self.clinical(field)?;
                let value = self.literal(desc, value)?;
                self.note(field.clone());
                CohortQueryAst::Compare { field: field.clone(), op: *op, value }
            }
            CohortQueryAst::In { field, values } => {
                let desc = self.clinical(field)?;
                let values = values.iter().map(|v| self.literal(desc, v)).collect::<Result<_, _>>()?;
                self.note(field.clone());
                CohortQueryAst::In { field: field.clone(), values }
            }
            CohortQueryAst::ExistsBp { series, .. } => {
                let needed: &[&str] = match series {
                    BpType::Sbp => &["sbp"],
                    BpType::Dbp => &["dbp"],
                    BpType::Map => &["sbp", "dbp"],
                };
                for col in needed {
                    match self.codebook.get_in(Table::Bp, col) {
                        Some(d) if d.dtype == Dtype::Numeric => {}
                        Some(_) => {
                            return Err(TypeError::TypeMismatch {
                                field: series_field(*series),
                                expected: "numeric bp column".into(),
                                got: "categorical".into(),
                            })
                        }
                        None => return Err(TypeError::MissingField { name: format!("bp.{col}"), suggestions: vec![] }),
                    }
                }
                self.note(series_field(*series));
                ast.clone()
            }
            CohortQueryAst::HasEvent { kind, window } => {
                let known = self.codebook.event_kinds();
                let canonical = known
                    .iter()
                    .find(|k| k.eq_ignore_ascii_case(kind))
                    .cloned()
                    .ok_or_else(|| TypeError::UnknownEventKind { kind: kind.clone(), known: known.clone() })?;
                self.note(event_field(&canonical));
                CohortQueryAst::HasEvent { kind: canonical, window: *window }
            }
        })
    }
}

pub fn typecheck(ast: &CohortQueryAst, codebook: &Codebook) -> Result<TypedQuery, TypeError> {
    let mut checker = Checker { codebook, involved: Vec::new() };
    let typed = checker.check(ast)?;
    Ok(TypedQuery { source_text: print(ast), ast: typed, involved_fields: checker.involved })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synth::synthetic_codebook;
    use crate::dsl::ast::CmpOp;
    use crate::dsl::parse;

    fn check(text: &str) -> Result<TypedQuery, TypeError> {
        typecheck(&parse(text).unwrap(), &synthetic_codebook())
    }

    #[test]
    fn label_resolves_to_code() {
        let q = check("toast == \"LAA\"").unwrap();
        assert_eq!(q.ast, CohortQueryAst::compare("toast", CmpOp::Eq, Literal::Number(1.0)));
        assert_eq!(q.involved_fields, vec!["toast"]);
    }

    #[test]
    fn missing_field_is_named() {
        match check("antiplatelet_time < 48").unwrap_err() {
            TypeError::MissingField { name, .. } => assert_eq!(name, "antiplatelet_time"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn identity_has_no_fields() {
        assert!(check("true").unwrap().involved_fields.is_empty());
    }

    #[test]
    fn involved_fields_follow_query_order() {
        let q = check("male == 1 and age >= 65 and toast == 1 and age < 90").unwrap();
        assert_eq!(q.involved_fields, vec!["male", "age", "toast"]);
        let q = check("exists(bp.map, hours(0,24), value > 100) or has_event(iat)").unwrap();
        assert_eq!(q.involved_fields, vec!["bp.map", "event.IAT"]);
        assert!(
            matches!(&q.ast, CohortQueryAst::Or { children } if children[1] == CohortQueryAst::HasEvent { kind: "IAT".into(), window: None })
        );
    }

    #[test]
    fn mismatches() {
        assert_eq!(check("age == \"old\"").unwrap_err().kind(), "TypeMismatch");
        assert_eq!(check("toast == 1.5").unwrap_err().kind(), "TypeMismatch");
        assert_eq!(check("toast == \"XYZ\"").unwrap_err().kind(), "UnknownLabel");
        assert_eq!(check("has_event(teleport)").unwrap_err().kind(), "UnknownEventKind");
        assert_eq!(check("sbp > 3").unwrap_err().kind(), "TypeMismatch");
    }
}
