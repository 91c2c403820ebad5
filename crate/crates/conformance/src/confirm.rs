//! Confirming model-level violations on the implementation, and the store
//! of known violating traces.

use crate::error::ConformanceError;
use crate::mapping::ActionMapping;
use crate::replay::{replay_with, ReplayOptions, ReplayResult, ReplayStatus};
use crate::translate::translate_state;
use mgcheck_core::{CheckResult, ComposedSpec, ExplorationFilter, StepRef, Trace};
use mgcheck_sim::Scenario;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Confirmation {
    Confirmed { detail: String },
    NotReproduced(ReplayResult),
}

impl Confirmation {
    pub fn is_confirmed(&self) -> bool {
        matches!(self, Confirmation::Confirmed { .. })
    }
}

/// Replays a trace ending in a violation of `invariant` and checks the
/// implementation violates it too, evaluated on translated states.
pub fn confirm_violation(
    spec: &ComposedSpec,
    trace: &Trace,
    invariant: &str,
    scenario: &Scenario,
    mapping: &ActionMapping,
) -> Result<Confirmation, ConformanceError> {
    let inv = spec
        .invariant(invariant)
        .ok_or_else(|| ConformanceError::UnknownInvariant(invariant.to_string()))?;
    let r = replay_with(trace, scenario, mapping, ReplayOptions::default())?;
    let last = trace.len();
    match r.result.status {
        ReplayStatus::ImplFault if r.result.step == last => {
            return Ok(Confirmation::Confirmed {
                detail: format!("impl-fault at step {last}: {}", r.result.detail),
            });
        }
        ReplayStatus::Conformant => {}
        _ => return Ok(Confirmation::NotReproduced(r.result)),
    }
    let post = translate_state(&r.observations[last], trace.state(last), &mapping.translated);
    let violated = if last == 0 {
        !inv.holds_in(&post)
    } else {
        let pre = translate_state(&r.observations[last - 1], trace.state(last - 1), &mapping.translated);
        let step = &trace.steps[last - 1].action;
        let values = step.values();
        let sr = StepRef {
            action: &step.action,
            bindings: &values,
        };
        !inv.holds_in(&post) || !inv.holds_on_step(&pre, &sr, &post)
    };
    Ok(if violated {
        Confirmation::Confirmed {
            detail: format!("implementation state after step {last} violates {invariant}"),
        }
    } else {
        Confirmation::NotReproduced(ReplayResult {
            status: ReplayStatus::Conformant,
            step: last,
            action: trace.steps.last().map(|s| s.action.to_string()),
            detail: format!("implementation state satisfies {invariant}"),
            discrepancies: Vec::new(),
        })
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoredTrace {
    pub invariant: String,
    pub trace: Trace,
}

/// Violating traces by id.
#[derive(Clone, Debug, Default)]
pub struct TraceStore {
    pub entries: BTreeMap<String, StoredTrace>,
}

impl TraceStore {
    pub fn new() -> TraceStore {
        TraceStore::default()
    }

    pub fn add(&mut self, invariant: &str, trace: Trace) -> String {
        let id = format!("v{:04}-{invariant}", self.entries.len());
        self.entries.insert(
            id.clone(),
            StoredTrace {
                invariant: invariant.to_string(),
                trace,
            },
        );
        id
    }

    pub fn from_check(result: &CheckResult) -> TraceStore {
        let mut s = TraceStore::new();
        for v in &result.violations {
            s.add(&v.invariant, v.trace.clone());
        }
        s
    }

    pub fn get(&self, id: &str) -> Option<&StoredTrace> {
        self.entries.get(id)
    }

    /// Writes `<id>.trace` per entry plus an `index.tsv` of id and invariant.
    pub fn write_dir(&self, dir: &Path) -> Result<(), ConformanceError> {
        let io = |e: std::io::Error| ConformanceError::Io(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        let mut index = String::new();
        for (id, e) in &self.entries {
            std::fs::write(dir.join(format!("{id}.trace")), e.trace.to_file()).map_err(io)?;
            index.push_str(&format!("{id}\t{}\n", e.invariant));
        }
        std::fs::write(dir.join("index.tsv"), index).map_err(io)
    }

    pub fn load_dir(dir: &Path, spec: &ComposedSpec) -> Result<TraceStore, ConformanceError> {
        let io = |e: std::io::Error| ConformanceError::Io(format!("{}: {e}", dir.display()));
        let index = std::fs::read_to_string(dir.join("index.tsv")).map_err(io)?;
        let mut s = TraceStore::new();
        for line in index.lines().filter(|l| !l.trim().is_empty()) {
            let (id, inv) = line
                .split_once('\t')
                .ok_or_else(|| ConformanceError::Io(format!("bad index line {line:?}")))?;
            let text = std::fs::read_to_string(dir.join(format!("{id}.trace"))).map_err(io)?;
            let trace = Trace::from_file(&text, spec)?;
            s.entries.insert(
                id.to_string(),
                StoredTrace {
                    invariant: inv.to_string(),
                    trace,
                },
            );
        }
        Ok(s)
    }
}

/// Filter that stops the kernel from reporting (and extending) states
/// violating the invariants of the marked traces.
pub fn mark_known_buggy<'a>(
    store: &TraceStore,
    ids: impl IntoIterator<Item = &'a str>,
) -> Result<ExplorationFilter, ConformanceError> {
    let mut f = ExplorationFilter::default();
    for id in ids {
        let e = store
            .get(id)
            .ok_or_else(|| ConformanceError::UnknownTrace(id.to_string()))?;
        f.suppressed.insert(e.invariant.clone());
    }
    Ok(f)
}
