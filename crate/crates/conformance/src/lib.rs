//! Conformance checking: model traces are replayed on the simulated
//! implementation through an action mapping, and the two states are
//! compared after every step.

pub mod confirm;
pub mod error;
pub mod mapping;
pub mod replay;
pub mod run;
pub mod translate;

pub use confirm::{confirm_violation, mark_known_buggy, Confirmation, StoredTrace, TraceStore};
pub use error::ConformanceError;
pub use mapping::{enabled_code_actions, ActionMapping, EventTemplate, MappingEntry, CORRESPONDENCES};
pub use replay::{compare, replay, replay_with, Discrepancy, Replay, ReplayOptions, ReplayResult, ReplayStatus};
pub use run::{conformance_run, scenario_for, trace_id, ConformanceReport, ReportEntry, RunBudget};
pub use translate::{translate_state, translate_var};
