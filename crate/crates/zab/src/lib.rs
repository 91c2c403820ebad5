//! Zab as a library of modules at several granularities.
//!
//! Election, Discovery, Synchronization and Broadcast each come in one or
//! more variants; Faults is added to every composition. [`build_mspec`]
//! assembles the preset compositions and [`protocol_spec`] the protocol-level
//! spec used for verifying protocol changes.

pub mod broadcast;
pub mod election;
pub mod faults;
pub mod invariants;
pub mod library;
pub mod model;
pub mod sync;

pub use invariants::{code_invariant, invariant_for_bug, protocol_invariants, CODE_IDS, PROTOCOL_IDS};
pub use library::{
    build_mspec, mspec_plan, preset, presets, protocol_plan, protocol_spec, zab_library, MSpecLevel,
};
pub use model::{BugFlags, ZabOptions};
pub use sync::{sync_plan, SyncStyle};
