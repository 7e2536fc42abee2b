//! Publication-submission toolkit.
//!
//! The crate covers the mechanical side of getting a collaboration paper out
//! of the door:
//!
//! * [`authorlist`] snapshots the qualified author list at a reference date and
//!   renders it as XML or TeX, together with the acknowledgements block.
//! * [`flatten`] merges a multi-file LaTeX project into a single comment-free
//!   source with flat, renamed assets and writes deterministic tarballs.
//! * [`pipeline`] runs staged check suites (editing vs. submission pipelines).
//! * [`workflow`] is a JSON-configured state machine with role-gated
//!   Save/Proceed transitions, side-effect actions and outbox notifications.
//! * [`pdfextract`], [`proofparse`], [`matcher`] and [`report`] form the proof
//!   checker that reconciles a journal proof against the canonical author list.

pub mod authorlist;
pub mod cli;
pub mod flatten;
pub mod fsutil;
pub mod matcher;
pub mod pdfextract;
pub mod pipeline;
pub mod proofparse;
pub mod refcode;
pub mod report;
pub mod template;
pub mod workflow;

pub use authorlist::{AuthorList, FundingAgency};
pub use matcher::{compare, levenshtein, normalize, SynonymDb};
pub use pdfextract::{extract_text, load_pretokenized, PageText};
pub use proofparse::{segment_proof, strip_artifacts, ProofSegments, PublisherProfile};
pub use report::DiscrepancyReport;
