//! The module library, the mSpec presets and the protocol-level specs.

use crate::broadcast::{self, BROADCAST_MODULE};
use crate::election::{self, DISCOVERY_MODULE, ED_MODULE, ELECTION_MODULE};
use crate::faults::{self, FAULTS_MODULE};
use crate::model::ZabOptions;
use crate::sync::{self, SyncStyle, SYNC_MODULE};
use mgcheck_core::{compose, ComposeError, ComposedSpec, CompositionPlan, FaultBudget, Library, Scale};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

pub fn zab_library(opts: ZabOptions) -> Library {
    let mut lib = Library::new();
    lib.add_variant(ELECTION_MODULE, "baseline", move |b| election::election_baseline(b, opts));
    lib.add_variant(DISCOVERY_MODULE, "baseline", move |b| election::discovery_baseline(b, opts));
    lib.add_variant(ED_MODULE, "coarse", move |b| election::coarse(b, opts));
    lib.add_variant(ED_MODULE, "baseline", move |b| election::merged_baseline(b, opts));
    lib.set_covers(ED_MODULE, &[ELECTION_MODULE, DISCOVERY_MODULE]);
    for style in [SyncStyle::Atomic, SyncStyle::Fine, SyncStyle::FineConcurrent, SyncStyle::Improved] {
        lib.add_variant(SYNC_MODULE, style.label(), move |b| sync::module(b, opts, style));
    }
    lib.add_variant(BROADCAST_MODULE, "baseline", move |b| broadcast::module(b, opts, false));
    lib.add_variant(BROADCAST_MODULE, "fine-concurrency", move |b| broadcast::module(b, opts, true));
    lib.add_variant(FAULTS_MODULE, "standard", move |b| faults::module(b, opts));
    lib.set_always(FAULTS_MODULE, true);
    lib
}

/// Rows of the composition table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MSpecLevel {
    SysSpec,
    M1,
    M2,
    M3,
    M4,
}

impl MSpecLevel {
    pub const ALL: [MSpecLevel; 5] = [MSpecLevel::SysSpec, MSpecLevel::M1, MSpecLevel::M2, MSpecLevel::M3, MSpecLevel::M4];

    pub fn name(self) -> &'static str {
        match self {
            MSpecLevel::SysSpec => "SysSpec",
            MSpecLevel::M1 => "mSpec-1",
            MSpecLevel::M2 => "mSpec-2",
            MSpecLevel::M3 => "mSpec-3",
            MSpecLevel::M4 => "mSpec-4",
        }
    }

    pub fn from_index(i: u8) -> Option<MSpecLevel> {
        Self::ALL.get(i as usize).copied()
    }

    pub fn selections(self) -> Vec<(&'static str, &'static str)> {
        let (ed, sync, bc) = match self {
            MSpecLevel::SysSpec => (None, "baseline", "baseline"),
            MSpecLevel::M1 => (Some("coarse"), "baseline", "baseline"),
            MSpecLevel::M2 => (Some("coarse"), "fine-atomicity", "baseline"),
            MSpecLevel::M3 => (Some("coarse"), "fine-atomicity+concurrency", "fine-concurrency"),
            MSpecLevel::M4 => (None, "fine-atomicity+concurrency", "fine-concurrency"),
        };
        let mut s = match ed {
            Some(g) => vec![(ED_MODULE, g)],
            None => vec![(ELECTION_MODULE, "baseline"), (DISCOVERY_MODULE, "baseline")],
        };
        s.push((SYNC_MODULE, sync));
        s.push((BROADCAST_MODULE, bc));
        s
    }
}

impl fmt::Display for MSpecLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MSpecLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        let t = t.strip_prefix("mspec-").or_else(|| t.strip_prefix("mspec")).unwrap_or(&t);
        match t {
            "sysspec" | "baseline" | "0" => Ok(MSpecLevel::SysSpec),
            "1" => Ok(MSpecLevel::M1),
            "2" => Ok(MSpecLevel::M2),
            "3" => Ok(MSpecLevel::M3),
            "4" => Ok(MSpecLevel::M4),
            _ => Err(format!("unknown spec level {s:?}")),
        }
    }
}

fn plan(name: &str, sel: &[(&str, &str)], scale: Scale, faults: FaultBudget) -> CompositionPlan {
    CompositionPlan {
        name: name.to_string(),
        selections: sel.iter().map(|(m, g)| (m.to_string(), g.to_string())).collect(),
        scale,
        faults,
    }
}

pub fn mspec_plan(level: MSpecLevel, scale: Scale, faults: FaultBudget) -> CompositionPlan {
    plan(level.name(), &level.selections(), scale, faults)
}

pub fn build_mspec(
    level: MSpecLevel,
    scale: Scale,
    faults: FaultBudget,
    opts: ZabOptions,
) -> Result<ComposedSpec, ComposeError> {
    compose(&mspec_plan(level, scale, faults), &zab_library(opts))
}

/// The protocol-level spec: leader oracle, atomic or improved NEWLEADER
/// handling, baseline broadcast.
pub fn protocol_plan(improved: bool, scale: Scale, faults: FaultBudget) -> CompositionPlan {
    let sync = if improved { SyncStyle::Improved } else { SyncStyle::Atomic };
    let name = if improved { "ProtocolSpec-improved" } else { "ProtocolSpec" };
    plan(
        name,
        &[(ED_MODULE, "coarse"), (SYNC_MODULE, sync.label()), (BROADCAST_MODULE, "baseline")],
        scale,
        faults,
    )
}

pub fn protocol_spec(improved: bool, scale: Scale, faults: FaultBudget) -> Result<ComposedSpec, ComposeError> {
    compose(&protocol_plan(improved, scale, faults), &zab_library(ZabOptions::default()))
}

const PRESET_FILES: [(&str, &str); 5] = [
    ("SysSpec", include_str!("../presets/SysSpec.json")),
    ("mSpec-1", include_str!("../presets/mSpec-1.json")),
    ("mSpec-2", include_str!("../presets/mSpec-2.json")),
    ("mSpec-3", include_str!("../presets/mSpec-3.json")),
    ("mSpec-4", include_str!("../presets/mSpec-4.json")),
];

/// The shipped preset plans, in table order.
pub fn presets() -> Vec<CompositionPlan> {
    PRESET_FILES
        .iter()
        .map(|(_, text)| CompositionPlan::from_json(text).expect("shipped preset parses"))
        .collect()
}

pub fn preset(name: &str) -> Option<CompositionPlan> {
    let level: MSpecLevel = name.parse().ok()?;
    presets().into_iter().find(|p| p.name == level.name())
}
