//! Cohort exploration over acute-stroke blood-pressure data.
//!
//! The crate is organised around the request flow of the service:
//!
//! * [`dataset`] owns the immutable [`dataset::PatientStore`], CSV/JSON
//!   ingestion and the seeded synthetic generator.
//! * [`dsl`] is the cohort-query language: parser, printer, typechecker and
//!   the columnar evaluator.
//! * [`wrangler`] turns natural-language requests into typed queries through
//!   an LLM that only ever sees codebook metadata.
//! * [`vis`] computes renderer-agnostic models (folded matrix, slice-and-wrap
//!   geometry, baseline bars, cycle-time histogram).
//! * [`cohort`] keeps the refinement tree and its append-only session log.
//! * [`service`] wires everything behind HTTP and the CLI.

pub mod cohort;
pub mod dataset;
pub mod dsl;
pub mod service;
pub mod vis;
pub mod wrangler;

pub use dataset::{Codebook, FieldDescriptor, PatientStore, Uid};

pub use dsl::{parse, print, typecheck, CohortQueryAst, TypedQuery};
