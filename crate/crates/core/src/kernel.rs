//! Successor generation, breadth-first checking and random walks.

use crate::action::{ActionInstance, AccessKind, InvariantCheck, Invariant, StepRef, View, Writer};
use crate::algebra::{CompiledAction, ComposedSpec};
use crate::state::State;
use crate::trace::{Trace, TraceStep};
use crate::value::Value;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::hash::{BuildHasherDefault, Hasher};
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KernelError {
    #[error("action {0} is not enabled")]
    GuardNotEnabled(String),
    #[error("unknown action {0}")]
    UnknownAction(String),
    #[error("bindings {bindings} do not fit action {action}")]
    BadBindings { action: String, bindings: String },
    #[error("malformed state: {0}")]
    MalformedState(String),
    #[error("action {action}: undeclared {access:?} of variable {var}")]
    MetadataViolation {
        action: String,
        var: String,
        access: AccessKind,
    },
    #[error("trace file: {0}")]
    TraceFormat(String),
}

fn check_state(spec: &ComposedSpec, s: &State) -> Result<(), KernelError> {
    if Arc::ptr_eq(s.layout(), spec.layout()) || s.layout().names() == spec.layout().names() {
        Ok(())
    } else {
        Err(KernelError::MalformedState(format!(
            "variables {:?} do not match {:?}",
            s.layout().names(),
            spec.layout().names()
        )))
    }
}

fn metadata_error(spec: &ComposedSpec, a: &CompiledAction, idx: usize, access: AccessKind) -> KernelError {
    KernelError::MetadataViolation {
        action: a.def.name.clone(),
        var: spec.layout().names()[idx].clone(),
        access,
    }
}

/// Runs one action instance. `Ok(None)` when the guard is false.
fn fire(
    spec: &ComposedSpec,
    a: &CompiledAction,
    bindings: &[Value],
    s: &State,
    validate: bool,
) -> Result<Option<State>, KernelError> {
    let view = View::checked(s, validate.then_some(a.guard_mask));
    let enabled = (a.def.guard)(&view, bindings);
    if let Some(idx) = view.violation() {
        return Err(metadata_error(spec, a, idx, AccessKind::Read));
    }
    if !enabled {
        return Ok(None);
    }
    let view = View::checked(s, validate.then_some(a.update_mask));
    let mut w = Writer::new(s, validate.then_some(a.write_mask));
    (a.def.update)(&view, bindings, &mut w);
    if let Some(idx) = view.violation() {
        return Err(metadata_error(spec, a, idx, AccessKind::Read));
    }
    let (values, bad) = w.finish();
    if let Some(idx) = bad {
        return Err(metadata_error(spec, a, idx, AccessKind::Write));
    }
    Ok(Some(State::new(s.layout().clone(), values)))
}

pub fn instance_of(a: &CompiledAction, bindings: Vec<Value>) -> ActionInstance {
    ActionInstance {
        action: a.def.name.clone(),
        bindings: a
            .def
            .params
            .iter()
            .map(|p| p.name.clone())
            .zip(bindings)
            .collect(),
    }
}

/// Enabled (action, binding) pairs with their successors, in canonical order.
fn successors_raw(
    spec: &ComposedSpec,
    s: &State,
    validate: bool,
) -> Result<Vec<(u32, u32, Vec<Value>, State)>, KernelError> {
    let mut out = Vec::new();
    for (ai, a) in spec.actions().iter().enumerate() {
        for k in 0..a.def.binding_count() {
            let b = a.def.binding(k);
            if let Some(next) = fire(spec, a, &b, s, validate)? {
                out.push((ai as u32, k as u32, b, next));
            }
        }
    }
    Ok(out)
}

/// Enabled action instances, ordered by action name then bindings.
pub fn enumerate_enabled(spec: &ComposedSpec, s: &State) -> Result<Vec<ActionInstance>, KernelError> {
    check_state(spec, s)?;
    Ok(successors_raw(spec, s, true)?
        .into_iter()
        .map(|(ai, _, b, _)| instance_of(&spec.actions()[ai as usize], b))
        .collect())
}

pub fn successors(spec: &ComposedSpec, s: &State) -> Result<Vec<(ActionInstance, State)>, KernelError> {
    check_state(spec, s)?;
    Ok(successors_raw(spec, s, true)?
        .into_iter()
        .map(|(ai, _, b, next)| (instance_of(&spec.actions()[ai as usize], b), next))
        .collect())
}

pub fn apply(spec: &ComposedSpec, inst: &ActionInstance, s: &State) -> Result<State, KernelError> {
    check_state(spec, s)?;
    let ai = spec
        .action_index(&inst.action)
        .ok_or_else(|| KernelError::UnknownAction(inst.action.clone()))?;
    let a = &spec.actions()[ai];
    let values = inst.values();
    let names_match = a.def.params.len() == inst.bindings.len()
        && a.def.params.iter().zip(&inst.bindings).all(|(p, (n, _))| &p.name == n);
    if !names_match || a.def.binding_index(&values).is_none() {
        return Err(KernelError::BadBindings {
            action: inst.action.clone(),
            bindings: format!("{inst}"),
        });
    }
    fire(spec, a, &values, s, true)?.ok_or_else(|| KernelError::GuardNotEnabled(inst.to_string()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopMode {
    First,
    Complete,
    Limit(usize),
}

impl FromStr for StopMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "first" => Ok(StopMode::First),
            "complete" => Ok(StopMode::Complete),
            _ => s
                .strip_prefix("limit=")
                .and_then(|n| n.parse().ok())
                .filter(|&n: &usize| n > 0)
                .map(StopMode::Limit)
                .ok_or_else(|| format!("bad stop mode {s:?}; expected first, complete or limit=N")),
        }
    }
}

impl fmt::Display for StopMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StopMode::First => write!(f, "first"),
            StopMode::Complete => write!(f, "complete"),
            StopMode::Limit(n) => write!(f, "limit={n}"),
        }
    }
}

/// Invariant ids whose violating states are dropped instead of reported.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationFilter {
    pub suppressed: BTreeSet<String>,
}

impl ExplorationFilter {
    pub fn accepts_all(&self) -> bool {
        self.suppressed.is_empty()
    }

    pub fn suppresses(&self, invariant: &str) -> bool {
        self.suppressed.contains(invariant)
    }
}

#[derive(Clone, Debug)]
pub struct ExplorationBounds {
    pub max_states: Option<u64>,
    pub max_depth: Option<usize>,
    pub time_limit: Option<Duration>,
    pub workers: usize,
    /// Check every access against the declared reads and writes.
    pub validate: bool,
    pub filter: ExplorationFilter,
}

impl Default for ExplorationBounds {
    fn default() -> Self {
        ExplorationBounds {
            max_states: None,
            max_depth: None,
            time_limit: None,
            workers: 1,
            validate: true,
            filter: ExplorationFilter::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    /// Every reachable state was visited; violations may still be present.
    Complete,
    /// Stopped early by the stop mode.
    ViolationFound,
    BudgetExhausted,
}

#[derive(Clone, Debug)]
pub struct Violation {
    pub invariant: String,
    pub trace: Trace,
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub outcome: Outcome,
    pub violations: Vec<Violation>,
    /// Transitions generated, duplicates included.
    pub states_explored: u64,
    pub distinct_states: u64,
    pub max_depth: usize,
    pub elapsed: Duration,
}

#[derive(Default)]
struct IdentityHasher(u64);

impl Hasher for IdentityHasher {
    fn finish(&self) -> u64 {
        self.0
    }
    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 = (self.0 << 8) | *b as u64;
        }
    }
    fn write_u128(&mut self, v: u128) {
        self.0 = v as u64;
    }
}

type FastMap<V> = HashMap<u128, V, BuildHasherDefault<IdentityHasher>>;

/// Visited states as canonical bytes plus the edge that first reached them.
#[derive(Default)]
struct Store {
    bytes: Vec<u8>,
    offsets: Vec<usize>,
    parent: Vec<(u32, u32, u32)>,
    seen: FastMap<u32>,
    overflow: FastMap<Vec<u32>>,
}

impl Store {
    fn get(&self, idx: u32) -> &[u8] {
        let i = idx as usize;
        let end = self.offsets.get(i + 1).copied().unwrap_or(self.bytes.len());
        &self.bytes[self.offsets[i]..end]
    }

    fn lookup(&self, hash: u128, bytes: &[u8]) -> Option<u32> {
        if let Some(&idx) = self.seen.get(&hash) {
            if self.get(idx) == bytes {
                return Some(idx);
            }
            return self
                .overflow
                .get(&hash)?
                .iter()
                .copied()
                .find(|&i| self.get(i) == bytes);
        }
        None
    }

    fn insert(&mut self, hash: u128, bytes: &[u8], parent: (u32, u32, u32)) -> u32 {
        let idx = self.offsets.len() as u32;
        self.offsets.push(self.bytes.len());
        self.bytes.extend_from_slice(bytes);
        self.parent.push(parent);
        if self.seen.contains_key(&hash) {
            self.overflow.entry(hash).or_default().push(idx);
        } else {
            self.seen.insert(hash, idx);
        }
        idx
    }

    fn len(&self) -> u64 {
        self.offsets.len() as u64
    }
}

struct Succ {
    action: u32,
    binding: u32,
    bytes: Vec<u8>,
    hash: u128,
    known: Option<u32>,
    step_viol: Vec<u16>,
    state_viol: Vec<u16>,
}

enum Found {
    At(u32),
    Step {
        pre: u32,
        action: u32,
        binding: u32,
        post: Vec<u8>,
    },
}

fn hash_bytes(b: &[u8]) -> u128 {
    xxhash_rust::xxh3::xxh3_128(b)
}

fn violated_states(invs: &[(u16, &Invariant)], s: &State) -> Vec<u16> {
    let view = View::unchecked(s);
    invs.iter()
        .filter(|(_, inv)| match &inv.check {
            InvariantCheck::State(p) => !p(&view),
            InvariantCheck::Transition { .. } => false,
        })
        .map(|(k, _)| *k)
        .collect()
}

pub fn bfs_check(
    spec: &ComposedSpec,
    invariants: &[Invariant],
    bounds: &ExplorationBounds,
    stop: StopMode,
) -> Result<CheckResult, KernelError> {
    let started = Instant::now();
    let state_invs: Vec<(u16, &Invariant)> = invariants
        .iter()
        .enumerate()
        .filter(|(_, i)| matches!(i.check, InvariantCheck::State(_)))
        .map(|(k, i)| (k as u16, i))
        .collect();
    let step_invs: Vec<(u16, &Invariant)> = invariants
        .iter()
        .enumerate()
        .filter(|(_, i)| matches!(i.check, InvariantCheck::Transition { .. }))
        .map(|(k, i)| (k as u16, i))
        .collect();
    // Per action, the transition invariants it triggers.
    let triggered: Vec<Vec<(u16, &Invariant)>> = spec
        .actions()
        .iter()
        .map(|a| {
            step_invs
                .iter()
                .filter(|(_, i)| i.triggered_by(&a.def.name))
                .copied()
                .collect()
        })
        .collect();
    let suppressed = |k: u16| bounds.filter.suppresses(&invariants[k as usize].id);

    let layout = spec.layout().clone();
    let mut store = Store::default();
    let mut found: Vec<(u16, Found)> = Vec::new();
    let mut explored: u64 = 0;
    let mut depth = 0usize;
    let limit = match stop {
        StopMode::First => Some(1),
        StopMode::Limit(n) => Some(n),
        StopMode::Complete => None,
    };

    let pool = if bounds.workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(bounds.workers)
                .build()
                .expect("thread pool"),
        )
    } else {
        None
    };

    let init = spec.init().clone();
    let init_viol = violated_states(&state_invs, &init);
    let mut frontier = Vec::new();
    if !init_viol.iter().any(|&k| suppressed(k)) {
        let bytes = init.encode();
        let idx = store.insert(hash_bytes(&bytes), &bytes, (u32::MAX, 0, 0));
        frontier.push(idx);
        for k in init_viol {
            found.push((k, Found::At(idx)));
        }
    }

    let expand = |store: &Store, idx: u32| -> Result<Vec<Succ>, KernelError> {
        let pre = State::decode(&layout, store.get(idx))
            .ok_or_else(|| KernelError::MalformedState("undecodable stored state".into()))?;
        let mut out = Vec::new();
        for (ai, a, b, post) in successors_raw(spec, &pre, bounds.validate)?
            .into_iter()
            .map(|(ai, k, b, post)| ((ai, k), &spec.actions()[ai as usize], b, post))
        {
            let step = StepRef {
                action: &a.def.name,
                bindings: &b,
            };
            let step_viol = triggered[ai.0 as usize]
                .iter()
                .filter(|(_, inv)| !inv.holds_on_step(&pre, &step, &post))
                .map(|(k, _)| *k)
                .collect();
            let bytes = post.encode();
            let hash = hash_bytes(&bytes);
            let known = store.lookup(hash, &bytes);
            let state_viol = if known.is_none() {
                violated_states(&state_invs, &post)
            } else {
                Vec::new()
            };
            out.push(Succ {
                action: ai.0,
                binding: ai.1,
                bytes,
                hash,
                known,
                step_viol,
                state_viol,
            });
        }
        Ok(out)
    };

    const CHUNK: usize = 2048;
    let mut stopped: Option<Outcome> = None;
    if limit.is_some_and(|n| found.len() >= n) {
        stopped = Some(Outcome::ViolationFound);
    }
    'levels: while !frontier.is_empty() && stopped.is_none() {
        if bounds.max_depth.is_some_and(|d| depth >= d) {
            stopped = Some(Outcome::BudgetExhausted);
            break;
        }
        let mut next = Vec::new();
        for chunk in frontier.chunks(CHUNK) {
            if bounds.time_limit.is_some_and(|t| started.elapsed() > t) {
                stopped = Some(Outcome::BudgetExhausted);
                break 'levels;
            }
            let results: Vec<Result<Vec<Succ>, KernelError>> = match &pool {
                Some(pool) => pool.install(|| chunk.par_iter().map(|&i| expand(&store, i)).collect()),
                None => chunk.iter().map(|&i| expand(&store, i)).collect(),
            };
            for (&pre, succs) in chunk.iter().zip(results) {
                for s in succs? {
                    explored += 1;
                    let mut pruned = false;
                    for &k in &s.step_viol {
                        if suppressed(k) {
                            pruned = true;
                        } else {
                            found.push((
                                k,
                                Found::Step {
                                    pre,
                                    action: s.action,
                                    binding: s.binding,
                                    post: s.bytes.clone(),
                                },
                            ));
                        }
                    }
                    if limit.is_some_and(|n| found.len() >= n) {
                        stopped = Some(Outcome::ViolationFound);
                        break 'levels;
                    }
                    if pruned || s.known.is_some() || store.lookup(s.hash, &s.bytes).is_some() {
                        continue;
                    }
                    if s.state_viol.iter().any(|&k| suppressed(k)) {
                        continue;
                    }
                    let idx = store.insert(s.hash, &s.bytes, (pre, s.action, s.binding));
                    next.push(idx);
                    for &k in &s.state_viol {
                        found.push((k, Found::At(idx)));
                    }
                    if limit.is_some_and(|n| found.len() >= n) {
                        stopped = Some(Outcome::ViolationFound);
                        break 'levels;
                    }
                    if bounds.max_states.is_some_and(|m| store.len() >= m) {
                        stopped = Some(Outcome::BudgetExhausted);
                        break 'levels;
                    }
                }
            }
        }
        if !next.is_empty() {
            depth += 1;
        }
        frontier = next;
    }
    if stopped.is_none() && !frontier.is_empty() {
        stopped = Some(Outcome::BudgetExhausted);
    }
    let mut violations = Vec::new();
    for (k, f) in found {
        let trace = match f {
            Found::At(idx) => rebuild(spec, &store, idx)?,
            Found::Step {
                pre,
                action,
                binding,
                post,
            } => {
                let mut t = rebuild(spec, &store, pre)?;
                let a = &spec.actions()[action as usize];
                t.steps.push(TraceStep {
                    action: instance_of(a, a.def.binding(binding as usize)),
                    state: State::decode(&layout, &post).expect("encoded by us"),
                });
                t
            }
        };
        depth = depth.max(trace.len());
        violations.push(Violation {
            invariant: invariants[k as usize].id.clone(),
            trace,
        });
    }
    Ok(CheckResult {
        outcome: stopped.unwrap_or(Outcome::Complete),
        violations,
        states_explored: explored,
        distinct_states: store.len(),
        max_depth: depth,
        elapsed: started.elapsed(),
    })
}

fn rebuild(spec: &ComposedSpec, store: &Store, idx: u32) -> Result<Trace, KernelError> {
    let mut chain = vec![idx];
    let mut cur = idx;
    while store.parent[cur as usize].0 != u32::MAX {
        cur = store.parent[cur as usize].0;
        chain.push(cur);
    }
    chain.reverse();
    let decode = |i: u32| {
        State::decode(spec.layout(), store.get(i))
            .ok_or_else(|| KernelError::MalformedState("undecodable stored state".into()))
    };
    let mut trace = Trace::new(decode(chain[0])?);
    for &i in &chain[1..] {
        let (_, action, binding) = store.parent[i as usize];
        let a = &spec.actions()[action as usize];
        trace.steps.push(TraceStep {
            action: instance_of(a, a.def.binding(binding as usize)),
            state: decode(i)?,
        });
    }
    Ok(trace)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkBudget {
    pub max_steps: usize,
    pub max_traces: usize,
}

/// Seeded walks from the initial state, choosing uniformly among enabled instances.
pub fn random_walk(spec: &ComposedSpec, seed: u64, budget: WalkBudget) -> Result<Vec<Trace>, KernelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut traces = Vec::with_capacity(budget.max_traces);
    for _ in 0..budget.max_traces {
        let mut trace = Trace::new(spec.init().clone());
        for _ in 0..budget.max_steps {
            let mut succ = successors_raw(spec, trace.last(), true)?;
            if succ.is_empty() {
                break;
            }
            let pick = rng.gen_range(0..succ.len());
            let (ai, _, b, next) = succ.swap_remove(pick);
            trace.steps.push(TraceStep {
                action: instance_of(&spec.actions()[ai as usize], b),
                state: next,
            });
        }
        traces.push(trace);
    }
    Ok(traces)
}
