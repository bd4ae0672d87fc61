//! Zero-shot information extraction by textual entailment.
//!
//! Named entities, relations, events and event arguments are extracted by
//! generating candidates from tagged text, turning each candidate into
//! natural-language hypotheses with user-written templates, and scoring the
//! hypotheses against the sentence with an entailment model.

pub mod backend;
pub mod candidates;
pub mod config;
pub mod devset;
pub mod entailment;
pub mod eval;
pub mod inference;
pub mod pattern;
pub mod pipeline;
pub mod schema;
pub mod text;
pub mod verbalize;

pub use backend::BackendError;
pub use candidates::{Candidate, CandidateContext, EntityMention, EventMention, Span, Task};
pub use entailment::{EntailmentBackend, EntailmentScore, MockBackend, OracleTable};
pub use inference::{Extraction, InferenceConfig, TypeScore};
pub use schema::{Schema, Template, TriggerMode};
pub use text::{Pos, RuleTagger, Sentence, Tagger, Token};
pub use config::RunConfig;
pub use pipeline::{run_e2e, run_e2e_on, run_task, run_task_on, Backends, DocumentAnnotations, GoldSpans, PipelineError};
pub use devset::{LabelStore, MetricsQuery, MetricsRow, Verdict};
