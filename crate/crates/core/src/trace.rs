//! Traces and the line-oriented trace file format.
//!
//! A file starts with the header line `mgcheck-trace v1`, followed by one JSON
//! record per line. Record 0 holds the full initial state; every later record
//! holds the step index, action, bindings and the variables it changed.

use crate::action::ActionInstance;
use crate::algebra::ComposedSpec;
use crate::kernel::{apply, KernelError};
use crate::state::State;
use crate::value::Value;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

pub const TRACE_HEADER: &str = "mgcheck-trace v1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep {
    pub action: ActionInstance,
    pub state: State,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub init: State,
    pub steps: Vec<TraceStep>,
}

impl Trace {
    pub fn new(init: State) -> Trace {
        Trace {
            init,
            steps: Vec::new(),
        }
    }

    /// Number of steps.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last(&self) -> &State {
        self.steps.last().map_or(&self.init, |s| &s.state)
    }

    /// State after `k` steps.
    pub fn state(&self, k: usize) -> &State {
        if k == 0 {
            &self.init
        } else {
            &self.steps[k - 1].state
        }
    }

    pub fn states(&self) -> impl Iterator<Item = &State> {
        std::iter::once(&self.init).chain(self.steps.iter().map(|s| &s.state))
    }

    pub fn actions(&self) -> impl Iterator<Item = &ActionInstance> {
        self.steps.iter().map(|s| &s.action)
    }

    /// Replays every step through the kernel and compares the states.
    pub fn validate(&self, spec: &ComposedSpec) -> Result<(), KernelError> {
        if &self.init != spec.init() {
            return Err(KernelError::MalformedState(
                "trace does not start at the initial state".into(),
            ));
        }
        let mut cur = self.init.clone();
        for (k, step) in self.steps.iter().enumerate() {
            let next = apply(spec, &step.action, &cur)?;
            if next != step.state {
                return Err(KernelError::MalformedState(format!(
                    "step {} ({}) does not produce the recorded state",
                    k + 1,
                    step.action
                )));
            }
            cur = next;
        }
        Ok(())
    }

    pub fn to_file(&self) -> String {
        let mut out = String::new();
        out.push_str(TRACE_HEADER);
        out.push('\n');
        let first = Record {
            index: 0,
            state: Some(self.init.iter().map(|(n, v)| (n.to_string(), v.clone())).collect()),
            action: None,
            bindings: None,
            changed: None,
        };
        out.push_str(&serde_json::to_string(&first).unwrap());
        out.push('\n');
        let mut prev = &self.init;
        for (k, step) in self.steps.iter().enumerate() {
            let rec = Record {
                index: k + 1,
                state: None,
                action: Some(step.action.action.clone()),
                bindings: Some(step.action.bindings.clone()),
                changed: Some(
                    step.state
                        .diff(prev)
                        .into_iter()
                        .map(|(n, v)| (n.to_string(), v.clone()))
                        .collect(),
                ),
            };
            out.push_str(&serde_json::to_string(&rec).unwrap());
            out.push('\n');
            prev = &step.state;
        }
        out
    }

    /// Parses a trace file against the variable layout of `spec`.
    pub fn from_file(text: &str, spec: &ComposedSpec) -> Result<Trace, KernelError> {
        let bad = |m: String| KernelError::TraceFormat(m);
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some(TRACE_HEADER) {
            return Err(bad(format!("missing header {TRACE_HEADER:?}")));
        }
        let parse = |k: usize, line: &str| {
            serde_json::from_str::<Record>(line).map_err(|e| bad(format!("record {k}: {e}")))
        };
        let first = parse(0, lines.next().ok_or_else(|| bad("no initial record".into()))?)?;
        let vars = first
            .state
            .filter(|_| first.index == 0)
            .ok_or_else(|| bad("record 0 must carry the initial state".into()))?;
        let layout = spec.layout();
        let mut values = Vec::with_capacity(layout.len());
        for name in layout.names() {
            values.push(
                vars.get(name)
                    .cloned()
                    .ok_or_else(|| bad(format!("initial state lacks {name}")))?,
            );
        }
        if vars.len() != layout.len() {
            return Err(bad("initial state has undeclared variables".into()));
        }
        let mut trace = Trace::new(State::new(layout.clone(), values));
        for (k, line) in lines.enumerate() {
            let rec = parse(k + 1, line)?;
            if rec.index != k + 1 {
                return Err(bad(format!("record {} has index {}", k + 1, rec.index)));
            }
            let action = rec
                .action
                .ok_or_else(|| bad(format!("record {} has no action", k + 1)))?;
            let mut state = trace.last().clone();
            for (name, v) in rec.changed.unwrap_or_default() {
                let i = layout
                    .index(&name)
                    .ok_or_else(|| bad(format!("unknown variable {name}")))?;
                state.values_mut()[i] = v;
            }
            trace.steps.push(TraceStep {
                action: ActionInstance {
                    action,
                    bindings: rec.bindings.unwrap_or_default(),
                },
                state,
            });
        }
        Ok(trace)
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "State 0: initial")?;
        write!(f, "{}", self.init)?;
        let mut prev = &self.init;
        for (k, step) in self.steps.iter().enumerate() {
            writeln!(f, "State {}: {}", k + 1, step.action)?;
            for (name, v) in step.state.diff(prev) {
                writeln!(f, "  {name} = {v}")?;
            }
            prev = &step.state;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct Record {
    index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state: Option<BTreeMap<String, Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    action: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bindings: Option<Vec<(String, Value)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    changed: Option<BTreeMap<String, Value>>,
}
