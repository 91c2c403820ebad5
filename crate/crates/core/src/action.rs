//! Guarded actions, their metadata, and invariants.

use crate::state::State;
use crate::value::Value;
use serde::{Deserialize, Serialize};
use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

pub type GuardFn = dyn Fn(&View, &[Value]) -> bool + Send + Sync;
pub type UpdateFn = dyn Fn(&View, &[Value], &mut Writer) + Send + Sync;
pub type StatePredicate = dyn Fn(&View) -> bool + Send + Sync;
pub type StepPredicate = dyn Fn(&View, &StepRef, &View) -> bool + Send + Sync;

#[derive(Clone, Debug)]
pub struct Param {
    pub name: String,
    /// Sorted, duplicate free.
    pub domain: Vec<Value>,
}

/// What one action assigns to one variable.
#[derive(Clone, Debug, Default)]
pub struct WriteSpec {
    /// Variables read by the assigned expression.
    pub deps: BTreeSet<String>,
    /// Update expressions as written by the module author.
    pub exprs: Vec<String>,
}

#[derive(Clone)]
pub struct ActionDef {
    pub name: String,
    pub module: String,
    pub params: Vec<Param>,
    /// Names bound inside update expressions besides the parameters.
    pub locals: Vec<String>,
    pub reads: BTreeSet<String>,
    pub writes: BTreeMap<String, WriteSpec>,
    pub guard: Arc<GuardFn>,
    pub update: Arc<UpdateFn>,
}

impl fmt::Debug for ActionDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ActionDef")
            .field("name", &self.name)
            .field("module", &self.module)
            .field("params", &self.params)
            .field("reads", &self.reads)
            .field("writes", &self.writes)
            .finish()
    }
}

impl ActionDef {
    pub fn new(name: impl Into<String>) -> ActionDef {
        ActionDef {
            name: name.into(),
            module: String::new(),
            params: Vec::new(),
            locals: Vec::new(),
            reads: BTreeSet::new(),
            writes: BTreeMap::new(),
            guard: Arc::new(|_, _| true),
            update: Arc::new(|_, _, _| {}),
        }
    }

    pub fn param(mut self, name: &str, domain: impl IntoIterator<Item = Value>) -> Self {
        let mut domain: Vec<Value> = domain.into_iter().collect();
        domain.sort();
        domain.dedup();
        self.params.push(Param {
            name: name.to_string(),
            domain,
        });
        self
    }

    pub fn locals(mut self, names: &[&str]) -> Self {
        self.locals.extend(names.iter().map(|s| s.to_string()));
        self
    }

    pub fn reads(mut self, vars: &[&str]) -> Self {
        self.reads.extend(vars.iter().map(|s| s.to_string()));
        self
    }

    /// Declares an assignment to `var` computed from `deps`.
    pub fn writes(mut self, var: &str, deps: &[&str], expr: &str) -> Self {
        let entry = self.writes.entry(var.to_string()).or_default();
        entry.deps.extend(deps.iter().map(|s| s.to_string()));
        entry.exprs.push(expr.to_string());
        self
    }

    pub fn guard(mut self, f: impl Fn(&View, &[Value]) -> bool + Send + Sync + 'static) -> Self {
        self.guard = Arc::new(f);
        self
    }

    pub fn update(
        mut self,
        f: impl Fn(&View, &[Value], &mut Writer) + Send + Sync + 'static,
    ) -> Self {
        self.update = Arc::new(f);
        self
    }

    pub fn in_module(mut self, module: &str) -> Self {
        self.module = module.to_string();
        self
    }

    /// Every variable the action reads or writes.
    pub fn touched(&self) -> BTreeSet<String> {
        let mut all = self.reads.clone();
        for (v, w) in &self.writes {
            all.insert(v.clone());
            all.extend(w.deps.iter().cloned());
        }
        all
    }

    pub fn binding_count(&self) -> usize {
        self.params.iter().map(|p| p.domain.len()).product()
    }

    /// Binding number `k` in lexicographic order over the parameter domains.
    pub fn binding(&self, mut k: usize) -> Vec<Value> {
        let mut out = vec![Value::Int(0); self.params.len()];
        for (slot, p) in self.params.iter().enumerate().rev() {
            let n = p.domain.len();
            out[slot] = p.domain[k % n].clone();
            k /= n;
        }
        out
    }

    pub fn binding_index(&self, bindings: &[Value]) -> Option<usize> {
        if bindings.len() != self.params.len() {
            return None;
        }
        let mut k = 0;
        for (p, v) in self.params.iter().zip(bindings) {
            let pos = p.domain.binary_search(v).ok()?;
            k = k * p.domain.len() + pos;
        }
        Some(k)
    }
}

/// Set of variable indices within a layout.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VarMask(u128);

impl VarMask {
    pub const MAX_VARS: usize = 128;

    pub fn insert(&mut self, i: usize) {
        self.0 |= 1u128 << i;
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0 & (1u128 << i) != 0
    }
}

/// How an access broke the declared metadata.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AccessKind {
    Read,
    Write,
}

/// Read access to a state, checked against a mask when one is given.
pub struct View<'a> {
    state: &'a State,
    mask: Option<VarMask>,
    bad: Cell<Option<usize>>,
}

impl<'a> View<'a> {
    pub fn unchecked(state: &'a State) -> View<'a> {
        View {
            state,
            mask: None,
            bad: Cell::new(None),
        }
    }

    pub(crate) fn checked(state: &'a State, mask: Option<VarMask>) -> View<'a> {
        View {
            state,
            mask,
            bad: Cell::new(None),
        }
    }

    #[track_caller]
    pub fn get(&self, name: &str) -> &'a Value {
        let idx = self
            .state
            .layout()
            .index(name)
            .unwrap_or_else(|| panic!("read of unknown variable {name}"));
        if let Some(mask) = self.mask {
            if !mask.contains(idx) && self.bad.get().is_none() {
                self.bad.set(Some(idx));
            }
        }
        &self.state.values()[idx]
    }

    /// Whether the layout has the variable at all.
    pub fn has(&self, name: &str) -> bool {
        self.state.layout().index(name).is_some()
    }

    pub(crate) fn violation(&self) -> Option<usize> {
        self.bad.get()
    }
}

/// Builds a successor from a pre-state. Untouched variables keep their values.
pub struct Writer<'a> {
    pre: &'a State,
    values: Vec<Value>,
    mask: Option<VarMask>,
    bad: Option<usize>,
}

impl<'a> Writer<'a> {
    pub(crate) fn new(pre: &'a State, mask: Option<VarMask>) -> Writer<'a> {
        Writer {
            pre,
            values: pre.values().to_vec(),
            mask,
            bad: None,
        }
    }

    #[track_caller]
    fn slot(&mut self, name: &str) -> usize {
        let idx = self
            .pre
            .layout()
            .index(name)
            .unwrap_or_else(|| panic!("write of unknown variable {name}"));
        if let Some(mask) = self.mask {
            if !mask.contains(idx) && self.bad.is_none() {
                self.bad = Some(idx);
            }
        }
        idx
    }

    #[track_caller]
    pub fn set(&mut self, name: &str, v: Value) {
        let i = self.slot(name);
        self.values[i] = v;
    }

    /// Value being built for a written variable.
    #[track_caller]
    pub fn post(&mut self, name: &str) -> &Value {
        let i = self.slot(name);
        &self.values[i]
    }

    /// Replaces element `idx` of a sequence variable.
    #[track_caller]
    pub fn set_at(&mut self, name: &str, idx: usize, v: Value) {
        let i = self.slot(name);
        self.values[i] = self.values[i].with_at(idx, v);
    }

    /// Replaces element `[a][b]` of a sequence of sequences.
    #[track_caller]
    pub fn set_at2(&mut self, name: &str, a: usize, b: usize, v: Value) {
        let i = self.slot(name);
        let row = self.values[i].at(a).with_at(b, v);
        self.values[i] = self.values[i].with_at(a, row);
    }

    #[track_caller]
    pub fn modify(&mut self, name: &str, f: impl FnOnce(&Value) -> Value) {
        let i = self.slot(name);
        self.values[i] = f(&self.values[i]);
    }

    pub(crate) fn finish(self) -> (Vec<Value>, Option<usize>) {
        (self.values, self.bad)
    }
}

/// A concrete action step.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActionInstance {
    pub action: String,
    /// (parameter, value) in declaration order.
    pub bindings: Vec<(String, Value)>,
}

impl ActionInstance {
    pub fn values(&self) -> Vec<Value> {
        self.bindings.iter().map(|(_, v)| v.clone()).collect()
    }
}

impl fmt::Display for ActionInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.action)?;
        for (k, (name, v)) in self.bindings.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{name}={v}")?;
        }
        write!(f, ")")
    }
}

/// Borrowed form of a step passed to transition invariants.
pub struct StepRef<'a> {
    pub action: &'a str,
    pub bindings: &'a [Value],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InvariantLevel {
    Protocol,
    Code,
}

#[derive(Clone)]
pub enum InvariantCheck {
    State(Arc<StatePredicate>),
    /// Evaluated on steps of the trigger actions only; `None` means every step.
    Transition {
        triggers: Option<BTreeSet<String>>,
        pred: Arc<StepPredicate>,
    },
}

#[derive(Clone)]
pub struct Invariant {
    pub id: String,
    pub description: String,
    pub level: InvariantLevel,
    pub check: InvariantCheck,
}

impl fmt::Debug for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Invariant")
            .field("id", &self.id)
            .field("level", &self.level)
            .finish()
    }
}

impl Invariant {
    pub fn state(
        id: &str,
        description: &str,
        level: InvariantLevel,
        pred: impl Fn(&View) -> bool + Send + Sync + 'static,
    ) -> Invariant {
        Invariant {
            id: id.to_string(),
            description: description.to_string(),
            level,
            check: InvariantCheck::State(Arc::new(pred)),
        }
    }

    pub fn transition(
        id: &str,
        description: &str,
        level: InvariantLevel,
        triggers: Option<&[&str]>,
        pred: impl Fn(&View, &StepRef, &View) -> bool + Send + Sync + 'static,
    ) -> Invariant {
        Invariant {
            id: id.to_string(),
            description: description.to_string(),
            level,
            check: InvariantCheck::Transition {
                triggers: triggers.map(|t| t.iter().map(|s| s.to_string()).collect()),
                pred: Arc::new(pred),
            },
        }
    }

    pub fn holds_in(&self, state: &State) -> bool {
        match &self.check {
            InvariantCheck::State(p) => p(&View::unchecked(state)),
            InvariantCheck::Transition { .. } => true,
        }
    }

    pub fn triggered_by(&self, action: &str) -> bool {
        match &self.check {
            InvariantCheck::State(_) => false,
            InvariantCheck::Transition { triggers, .. } => {
                triggers.as_ref().map_or(true, |t| t.contains(action))
            }
        }
    }

    pub fn holds_on_step(&self, pre: &State, step: &StepRef, post: &State) -> bool {
        match &self.check {
            InvariantCheck::State(_) => true,
            InvariantCheck::Transition { pred, .. } => {
                !self.triggered_by(step.action)
                    || pred(&View::unchecked(pre), step, &View::unchecked(post))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::int;

    #[test]
    fn bindings_enumerate_lexicographically() {
        let a = ActionDef::new("A")
            .param("x", [int(1), int(0)])
            .param("y", [int(5), int(3), int(4)]);
        assert_eq!(a.binding_count(), 6);
        let all: Vec<_> = (0..6).map(|k| a.binding(k)).collect();
        assert_eq!(all[0], vec![int(0), int(3)]);
        assert_eq!(all[1], vec![int(0), int(4)]);
        assert_eq!(all[5], vec![int(1), int(5)]);
        for (k, b) in all.iter().enumerate() {
            assert_eq!(a.binding_index(b), Some(k));
        }
    }
}
