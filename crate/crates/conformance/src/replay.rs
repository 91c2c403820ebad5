//! Deterministic replay of one model trace against the implementation.

use crate::error::ConformanceError;
use crate::mapping::{node_params, resolve, ActionMapping, ElectionSource, MappingEntry};
use crate::translate::translate_var;
use mgcheck_core::{ActionInstance, State, Trace, Value};
use mgcheck_sim::{drive, observe, Cluster, ImplFault, NodeId, ObservableState, Scenario, SimEvent};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Scheduler steps allowed per model action before declaring a timeout.
pub const DEFAULT_STEP_BUDGET: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplayStatus {
    Conformant,
    ValueDiscrepancy,
    ActionTimeout,
    ImplFault,
}

impl fmt::Display for ReplayStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReplayStatus::Conformant => "conformant",
            ReplayStatus::ValueDiscrepancy => "value-discrepancy",
            ReplayStatus::ActionTimeout => "action-timeout",
            ReplayStatus::ImplFault => "impl-fault",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub var: String,
    pub model: Value,
    pub implementation: Value,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayResult {
    pub status: ReplayStatus,
    /// Trace step of the first problem (0 = initial state); trace length when conformant.
    pub step: usize,
    pub action: Option<String>,
    pub detail: String,
    pub discrepancies: Vec<Discrepancy>,
}

impl ReplayResult {
    pub fn is_conformant(&self) -> bool {
        self.status == ReplayStatus::Conformant
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReplayOptions {
    pub step_budget: usize,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        ReplayOptions {
            step_budget: DEFAULT_STEP_BUDGET,
        }
    }
}

/// A replay with the implementation observed after every completed step.
#[derive(Clone, Debug)]
pub struct Replay {
    pub result: ReplayResult,
    /// Index 0 is the initial cluster.
    pub observations: Vec<ObservableState>,
    /// Events scheduled, grouped by trace step.
    pub events: Vec<Vec<SimEvent>>,
    pub fault: Option<ImplFault>,
}

pub fn compare(mapping: &ActionMapping, o: &ObservableState, model: &State) -> Vec<Discrepancy> {
    mapping
        .compared
        .iter()
        .filter_map(|var| {
            let m = model.get(var)?;
            let i = translate_var(var, o)?;
            (m != &i).then(|| Discrepancy {
                var: var.clone(),
                model: m.clone(),
                implementation: i,
            })
        })
        .collect()
}

fn describe(ds: &[Discrepancy]) -> String {
    ds.iter()
        .map(|d| format!("{}: model={} impl={}", d.var, d.model, d.implementation))
        .collect::<Vec<_>>()
        .join("; ")
}

pub fn replay(trace: &Trace, scenario: &Scenario, mapping: &ActionMapping) -> Result<ReplayResult, ConformanceError> {
    Ok(replay_with(trace, scenario, mapping, ReplayOptions::default())?.result)
}

enum StepEnd {
    Matched(Cluster, Vec<SimEvent>, Option<ImplFault>),
    Mismatch(Vec<Discrepancy>),
    NotSchedulable(String),
    Timeout,
}

struct Attempt {
    cluster: Cluster,
    events: Vec<SimEvent>,
    fault: Option<ImplFault>,
}

impl Attempt {
    fn apply(&mut self, e: SimEvent) -> Result<(), ConformanceError> {
        let out = self.cluster.step(e)?;
        self.events.push(e);
        if self.fault.is_none() {
            self.fault = out.fault;
        }
        Ok(())
    }
}

fn election_members(inst: &ActionInstance, post: &State) -> Option<(NodeId, Vec<NodeId>)> {
    let v = inst.values();
    let l = v.first()?.as_int() as NodeId;
    match v.get(1) {
        Some(Value::Set(q)) => Some((l, q.iter().map(|x| x.as_int() as NodeId).collect())),
        _ => {
            let la = post.get("leaderAddr")?.as_seq();
            let q = (0..la.len()).filter(|&m| la[m].as_int() == l as i64).collect();
            Some((l, q))
        }
    }
}

fn run_step(
    c: &Cluster,
    entry: &MappingEntry,
    inst: &ActionInstance,
    post: &State,
    mapping: &ActionMapping,
    opts: ReplayOptions,
) -> Result<StepEnd, ConformanceError> {
    let matches = |a: &Attempt| compare(mapping, &observe(&a.cluster), post);
    let fresh = || Attempt {
        cluster: c.clone(),
        events: Vec::new(),
        fault: None,
    };
    match entry {
        MappingEntry::Internal => {
            let a = fresh();
            let ds = matches(&a);
            Ok(if ds.is_empty() {
                StepEnd::Matched(a.cluster, a.events, None)
            } else {
                StepEnd::Mismatch(ds)
            })
        }
        MappingEntry::Election(src) => {
            let establish = match src {
                ElectionSource::Bindings => true,
                ElectionSource::AckEpoch => inst.values().get(2).is_some_and(|b| b.as_bool()),
            };
            let mut a = fresh();
            if establish {
                let Some((l, q)) = election_members(inst, post) else {
                    return Ok(StepEnd::NotSchedulable("cannot name the quorum".into()));
                };
                match drive::elect(&mut a.cluster, l, &q) {
                    Ok(evs) => a.events = evs,
                    Err(e) => return Ok(StepEnd::NotSchedulable(e.to_string())),
                }
            }
            let ds = matches(&a);
            Ok(if ds.is_empty() {
                StepEnd::Matched(a.cluster, a.events, None)
            } else {
                StepEnd::Mismatch(ds)
            })
        }
        MappingEntry::Events { begin, cont } => {
            let params = node_params(inst);
            let mut first_mismatch = None;
            let mut any_begin = false;
            for t in begin {
                let Some(e) = resolve(*t, &params, c) else { continue };
                if !c.is_applicable(&e) {
                    continue;
                }
                any_begin = true;
                let mut a = fresh();
                a.apply(e)?;
                loop {
                    let ds = matches(&a);
                    // An exception ends the action wherever it happened.
                    if ds.is_empty() || a.fault.is_some() {
                        return Ok(StepEnd::Matched(a.cluster, a.events, a.fault));
                    }
                    if a.events.len() >= opts.step_budget {
                        return Ok(StepEnd::Timeout);
                    }
                    let next = cont
                        .iter()
                        .filter_map(|t| resolve(*t, &params, &a.cluster))
                        .find(|e| a.cluster.is_applicable(e));
                    match next {
                        Some(e) => a.apply(e)?,
                        None => {
                            first_mismatch.get_or_insert(ds);
                            break;
                        }
                    }
                }
            }
            Ok(match first_mismatch {
                Some(ds) => StepEnd::Mismatch(ds),
                None if !any_begin => StepEnd::NotSchedulable("begin event never schedulable".into()),
                None => StepEnd::Timeout,
            })
        }
    }
}

/// Replays `trace` step by step, keeping every intermediate observation.
pub fn replay_with(
    trace: &Trace,
    scenario: &Scenario,
    mapping: &ActionMapping,
    opts: ReplayOptions,
) -> Result<Replay, ConformanceError> {
    let model_nodes = trace.init.get("state").map_or(scenario.nodes, |s| s.len());
    if model_nodes != scenario.nodes {
        return Err(ConformanceError::ScenarioMismatch {
            scenario: scenario.nodes,
            spec: model_nodes,
        });
    }
    let mut cluster = scenario.build()?;
    let mut out = Replay {
        result: ReplayResult {
            status: ReplayStatus::Conformant,
            step: trace.len(),
            action: None,
            detail: String::new(),
            discrepancies: Vec::new(),
        },
        observations: vec![observe(&cluster)],
        events: Vec::new(),
        fault: None,
    };
    let ds = compare(mapping, &out.observations[0], &trace.init);
    if !ds.is_empty() {
        out.result = ReplayResult {
            status: ReplayStatus::ValueDiscrepancy,
            step: 0,
            action: None,
            detail: describe(&ds),
            discrepancies: ds,
        };
        return Ok(out);
    }
    for (k, step) in trace.steps.iter().enumerate() {
        let idx = k + 1;
        let entry = mapping.entry(&step.action.action)?;
        let fail = |status, detail: String, ds| ReplayResult {
            status,
            step: idx,
            action: Some(step.action.to_string()),
            detail,
            discrepancies: ds,
        };
        match run_step(&cluster, entry, &step.action, &step.state, mapping, opts)? {
            StepEnd::Matched(next, evs, fault) => {
                cluster = next;
                out.observations.push(observe(&cluster));
                out.events.push(evs);
                if let Some(f) = fault {
                    let detail = format!("node {}: {}", f.node, f.description);
                    out.fault = Some(f);
                    out.result = fail(ReplayStatus::ImplFault, detail, Vec::new());
                    return Ok(out);
                }
            }
            StepEnd::Mismatch(ds) => {
                out.result = fail(ReplayStatus::ValueDiscrepancy, describe(&ds), ds);
                return Ok(out);
            }
            StepEnd::NotSchedulable(why) => {
                out.result = fail(ReplayStatus::ActionTimeout, why, Vec::new());
                return Ok(out);
            }
            StepEnd::Timeout => {
                let why = format!("no end within {} scheduler steps", opts.step_budget);
                out.result = fail(ReplayStatus::ActionTimeout, why, Vec::new());
                return Ok(out);
            }
        }
    }
    Ok(out)
}
