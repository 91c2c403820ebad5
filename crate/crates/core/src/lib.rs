//! Explicit-state checking of modular transition systems.
//!
//! A spec is composed from modules, each available at several granularities.
//! The kernel explores the composed system breadth-first; the interaction
//! module decides whether swapping one granularity for another can change
//! what a target module observes.

pub mod action;
pub mod algebra;
pub mod interaction;
pub mod kernel;
pub mod state;
pub mod trace;
pub mod value;

pub use action::{ActionDef, ActionInstance, Invariant, InvariantLevel, StepRef, View, Writer};
pub use algebra::{
    compose, list_variants, BuildContext, ComposeError, ComposedSpec, CompositionPlan,
    FaultBudget, Library, ModuleSpec, Scale, VarClass, VarDecl,
};
pub use kernel::{
    apply, bfs_check, enumerate_enabled, random_walk, successors, CheckResult,
    ExplorationBounds, ExplorationFilter, KernelError, Outcome, StopMode, Violation, WalkBudget,
};
pub use state::{Layout, State};
pub use trace::{Trace, TraceStep};
pub use value::{Sym, Value};
pub mod toy;
