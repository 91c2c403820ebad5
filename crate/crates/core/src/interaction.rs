//! Dependency and interaction variables, the syntactic coarsening check, and
//! a bounded trace-equivalence oracle used to cross-check it.

use crate::algebra::{compose, list_variants, ComposeError, ComposedSpec, CompositionPlan, Library, ModuleSpec};
use crate::kernel::{successors, KernelError};
use crate::state::State;
use crate::trace::Trace;
use crate::value::Value;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no classification for target module {0}")]
    ClassificationMissing(String),
    #[error("original module {original} and coarsened module {coarsened} differ in name")]
    NameMismatch { original: String, coarsened: String },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
}

/// Variables a module depends on: everything its actions read, closed under
/// the inputs of its own assignments to those variables.
pub fn dependency_vars(m: &ModuleSpec) -> BTreeSet<String> {
    let mut deps: BTreeSet<String> = m.actions.iter().flat_map(|a| a.reads.iter().cloned()).collect();
    loop {
        let mut added = false;
        for a in &m.actions {
            for (var, w) in &a.writes {
                if deps.contains(var) {
                    for d in &w.deps {
                        added |= deps.insert(d.clone());
                    }
                }
            }
        }
        if !added {
            return deps;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableClassification {
    pub dependency: BTreeMap<String, BTreeSet<String>>,
    pub interaction: BTreeSet<String>,
}

impl VariableClassification {
    /// Dependency variables of `target` together with all interaction variables.
    pub fn visible(&self, target: &str) -> Option<BTreeSet<String>> {
        let d = self.dependency.get(target)?;
        Some(d.union(&self.interaction).cloned().collect())
    }
}

pub fn classify(modules: &[ModuleSpec]) -> VariableClassification {
    let dependency: BTreeMap<String, BTreeSet<String>> = modules
        .iter()
        .map(|m| (m.name.clone(), dependency_vars(m)))
        .collect();
    let mut inter = BTreeSet::new();
    // Shared dependencies between any two modules.
    let sets: Vec<&BTreeSet<String>> = modules.iter().map(|m| &dependency[&m.name]).collect();
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            inter.extend(sets[i].intersection(sets[j]).cloned());
        }
    }
    loop {
        let mut added = false;
        for m in modules {
            let dm = &dependency[&m.name];
            for a in modules.iter().flat_map(|x| x.actions.iter()) {
                for (var, w) in &a.writes {
                    // Inputs of an assignment to an interaction variable, or to an
                    // internal dependency variable of `m`, that `m` does not depend on.
                    let reaches = inter.contains(var) && a.module == m.name
                        || dm.contains(var) && !inter.contains(var);
                    if reaches {
                        for d in w.deps.difference(dm) {
                            added |= inter.insert(d.clone());
                        }
                    }
                }
            }
        }
        if !added {
            return VariableClassification {
                dependency,
                interaction: inter,
            };
        }
    }
}

pub fn interaction_vars(modules: &[ModuleSpec]) -> BTreeSet<String> {
    classify(modules).interaction
}

/// Renames bound names to positional placeholders and normalizes spacing.
pub fn normalize_expr(expr: &str, bound: &[String]) -> String {
    let mut out = String::new();
    let mut renames: HashMap<String, usize> = HashMap::new();
    let chars: Vec<char> = expr.chars().collect();
    let mut i = 0;
    let mut pending_space = false;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            pending_space = !out.is_empty();
            i += 1;
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            if bound.contains(&word) {
                let n = renames.len();
                let k = *renames.entry(word).or_insert(n);
                out.push_str(&format!("_{k}"));
            } else {
                out.push_str(&word);
            }
        } else {
            out.push(c);
            i += 1;
        }
    }
    out
}

/// Normalized update expressions per assigned variable.
pub fn update_exprs(m: &ModuleSpec) -> BTreeMap<String, BTreeSet<String>> {
    let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for a in &m.actions {
        let bound: Vec<String> = a
            .params
            .iter()
            .map(|p| p.name.clone())
            .chain(a.locals.iter().cloned())
            .collect();
        for (var, w) in &a.writes {
            let e = out.entry(var.clone()).or_default();
            for x in &w.exprs {
                e.insert(normalize_expr(x, &bound));
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Constraint {
    VarsUnchanged,
    UpdatesUnchanged,
}

impl Constraint {
    pub fn id(self) -> &'static str {
        match self {
            Constraint::VarsUnchanged => "vars-unchanged",
            Constraint::UpdatesUnchanged => "updates-unchanged",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleViolation {
    pub rule: Constraint,
    pub var: String,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoarseningVerdict {
    pub preserving: bool,
    pub visible: BTreeSet<String>,
    pub violations: Vec<RuleViolation>,
}

/// Checks that replacing `original` by `coarsened` leaves the view of `target`
/// intact. `context` holds the remaining modules, including the target.
pub fn check_interaction_preserving(
    original: &ModuleSpec,
    coarsened: &ModuleSpec,
    context: &[ModuleSpec],
    target: &str,
) -> Result<CoarseningVerdict, AnalysisError> {
    if original.name != coarsened.name {
        return Err(AnalysisError::NameMismatch {
            original: original.name.clone(),
            coarsened: coarsened.name.clone(),
        });
    }
    let mut system: Vec<ModuleSpec> = context
        .iter()
        .filter(|m| m.name != original.name)
        .cloned()
        .collect();
    system.push(original.clone());
    let classes = classify(&system);
    let visible = classes
        .visible(target)
        .ok_or_else(|| AnalysisError::ClassificationMissing(target.to_string()))?;

    let touched = |m: &ModuleSpec| -> BTreeSet<String> {
        m.actions.iter().flat_map(|a| a.touched()).collect()
    };
    let declared_elsewhere = |v: &str| context.iter().any(|m| m.name != original.name && m.declares(v));
    let (t_orig, t_coarse) = (touched(original), touched(coarsened));
    let mut violations = Vec::new();
    for v in visible.intersection(&t_orig) {
        if !t_coarse.contains(v) {
            violations.push(RuleViolation {
                rule: Constraint::VarsUnchanged,
                var: v.clone(),
                detail: "no longer read or written by the coarsened module".into(),
            });
        } else if !coarsened.declares(v) && !declared_elsewhere(v) {
            violations.push(RuleViolation {
                rule: Constraint::VarsUnchanged,
                var: v.clone(),
                detail: "not declared by the coarsened composition".into(),
            });
        }
    }
    let (u_orig, u_coarse) = (update_exprs(original), update_exprs(coarsened));
    let empty = BTreeSet::new();
    for v in &visible {
        let a = u_orig.get(v).unwrap_or(&empty);
        let b = u_coarse.get(v).unwrap_or(&empty);
        if a != b {
            let missing: Vec<_> = a.difference(b).cloned().collect();
            let extra: Vec<_> = b.difference(a).cloned().collect();
            violations.push(RuleViolation {
                rule: Constraint::UpdatesUnchanged,
                var: v.clone(),
                detail: format!("missing {missing:?}, added {extra:?}"),
            });
        }
    }
    Ok(CoarseningVerdict {
        preserving: violations.is_empty(),
        visible,
        violations,
    })
}

/// A trace restricted to visible variables with stuttering removed.
/// `None` marks a variable no module declares.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProjectedTrace {
    pub vars: Vec<String>,
    pub states: Vec<Vec<Option<Value>>>,
}

fn project(s: &State, vars: &[String]) -> Vec<Option<Value>> {
    vars.iter().map(|v| s.get(v).cloned()).collect()
}

pub fn project_and_condense(
    trace: &Trace,
    classes: &VariableClassification,
    target: &str,
) -> Result<ProjectedTrace, AnalysisError> {
    let vars: Vec<String> = classes
        .visible(target)
        .ok_or_else(|| AnalysisError::ClassificationMissing(target.to_string()))?
        .into_iter()
        .collect();
    let mut states: Vec<Vec<Option<Value>>> = Vec::new();
    for s in trace.states() {
        let p = project(s, &vars);
        if states.last() != Some(&p) {
            states.push(p);
        }
    }
    Ok(ProjectedTrace { vars, states })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleBounds {
    /// Visible (non-stuttering) steps per trace.
    pub max_steps: usize,
    /// Distinct projected traces per spec before giving up.
    pub max_traces: usize,
    /// Concrete states per spec before giving up.
    pub max_states: usize,
}

impl Default for OracleBounds {
    fn default() -> Self {
        OracleBounds {
            max_steps: 12,
            max_traces: 100_000,
            max_states: 2_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    OnlyFull,
    OnlyCoarsened,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleOutcome {
    Equivalent { traces: usize },
    Counterexample { trace: ProjectedTrace, side: Side },
    BudgetExhausted,
}

struct Explorer<'a> {
    spec: &'a ComposedSpec,
    vars: &'a [String],
    states: Vec<State>,
    ids: HashMap<State, u32>,
    succ: Vec<Option<Vec<u32>>>,
    max_states: usize,
}

type Proj = Vec<Option<Value>>;

impl<'a> Explorer<'a> {
    fn id(&mut self, s: State) -> Option<u32> {
        if let Some(&i) = self.ids.get(&s) {
            return Some(i);
        }
        if self.states.len() >= self.max_states {
            return None;
        }
        let i = self.states.len() as u32;
        self.ids.insert(s.clone(), i);
        self.states.push(s);
        self.succ.push(None);
        Some(i)
    }

    fn successors(&mut self, i: u32) -> Result<Option<Vec<u32>>, KernelError> {
        if let Some(s) = &self.succ[i as usize] {
            return Ok(Some(s.clone()));
        }
        let mut out = Vec::new();
        for (_, next) in successors(self.spec, &self.states[i as usize].clone())? {
            match self.id(next) {
                Some(j) => out.push(j),
                None => return Ok(None),
            }
        }
        self.succ[i as usize] = Some(out.clone());
        Ok(Some(out))
    }

    fn proj(&self, i: u32) -> Proj {
        project(&self.states[i as usize], self.vars)
    }

    /// Closes a set of states under steps that leave the projection unchanged.
    fn closure(&mut self, seeds: BTreeSet<u32>) -> Result<Option<BTreeSet<u32>>, KernelError> {
        let mut set = seeds.clone();
        let mut queue: VecDeque<u32> = seeds.into_iter().collect();
        while let Some(i) = queue.pop_front() {
            let p = self.proj(i);
            let Some(next) = self.successors(i)? else {
                return Ok(None);
            };
            for j in next {
                if !set.contains(&j) && self.proj(j) == p {
                    set.insert(j);
                    queue.push_back(j);
                }
            }
        }
        Ok(Some(set))
    }

    /// All condensed projected traces with at most `max_steps` visible steps.
    fn words(&mut self, bounds: &OracleBounds) -> Result<Option<BTreeSet<Vec<Proj>>>, KernelError> {
        let init = self.id(self.spec.init().clone()).expect("room for the initial state");
        let Some(start) = self.closure(BTreeSet::from([init]))? else {
            return Ok(None);
        };
        let mut words = BTreeSet::new();
        let root = vec![self.proj(init)];
        words.insert(root.clone());
        let mut queue = VecDeque::from([(root, start)]);
        while let Some((word, set)) = queue.pop_front() {
            if word.len() > bounds.max_steps {
                continue;
            }
            let here = word.last().unwrap().clone();
            let mut groups: BTreeMap<Proj, BTreeSet<u32>> = BTreeMap::new();
            for &i in &set {
                let Some(next) = self.successors(i)? else {
                    return Ok(None);
                };
                for j in next {
                    let p = self.proj(j);
                    if p != here {
                        groups.entry(p).or_default().insert(j);
                    }
                }
            }
            for (p, seeds) in groups {
                let Some(closed) = self.closure(seeds)? else {
                    return Ok(None);
                };
                let mut w = word.clone();
                w.push(p);
                words.insert(w.clone());
                if words.len() > bounds.max_traces {
                    return Ok(None);
                }
                queue.push_back((w, closed));
            }
        }
        Ok(Some(words))
    }
}

/// Compares the projected, condensed traces of two specs up to a bound.
pub fn theorem_oracle(
    full: &ComposedSpec,
    coarsened: &ComposedSpec,
    target: &str,
    bounds: &OracleBounds,
) -> Result<OracleOutcome, AnalysisError> {
    let classes = classify(&full.modules);
    let vars: Vec<String> = classes
        .visible(target)
        .ok_or_else(|| AnalysisError::ClassificationMissing(target.to_string()))?
        .into_iter()
        .collect();
    let run = |spec: &ComposedSpec| {
        Explorer {
            spec,
            vars: &vars,
            states: Vec::new(),
            ids: HashMap::new(),
            succ: Vec::new(),
            max_states: bounds.max_states,
        }
        .words(bounds)
    };
    let (Some(a), Some(b)) = (run(full)?, run(coarsened)?) else {
        return Ok(OracleOutcome::BudgetExhausted);
    };
    let shortest = |x: &BTreeSet<Vec<Proj>>, y: &BTreeSet<Vec<Proj>>| {
        x.difference(y).min_by(|p, q| p.len().cmp(&q.len()).then(p.cmp(q))).cloned()
    };
    let only_a = shortest(&a, &b);
    let only_b = shortest(&b, &a);
    let pick = match (only_a, only_b) {
        (None, None) => return Ok(OracleOutcome::Equivalent { traces: a.len() }),
        (Some(x), None) => (x, Side::OnlyFull),
        (None, Some(y)) => (y, Side::OnlyCoarsened),
        (Some(x), Some(y)) => {
            if (y.len(), &y) < (x.len(), &x) {
                (y, Side::OnlyCoarsened)
            } else {
                (x, Side::OnlyFull)
            }
        }
    };
    Ok(OracleOutcome::Counterexample {
        trace: ProjectedTrace {
            vars: vars.clone(),
            states: pick.0,
        },
        side: pick.1,
    })
}

/// One selected granularity checked against the reference granularity of
/// its module, for every other module as target.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoarseningReport {
    pub module: String,
    pub granularity: String,
    pub reference: String,
    pub verdicts: BTreeMap<String, CoarseningVerdict>,
    pub oracle: BTreeMap<String, OracleOutcome>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub plan: String,
    pub classes: VariableClassification,
    pub coarsenings: Vec<CoarseningReport>,
    pub oracle_bounds: Option<OracleBounds>,
}

impl AnalysisReport {
    pub fn all_preserving(&self) -> bool {
        self.coarsenings.iter().all(|c| {
            c.verdicts.values().all(|v| v.preserving)
                && c.oracle.values().all(|o| !matches!(o, OracleOutcome::Counterexample { .. }))
        })
    }

    /// Sorted, line-oriented rendering.
    pub fn to_text(&self) -> String {
        let join = |s: &BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(" ");
        let mut out = format!("plan\t{}\n", self.plan);
        for (m, d) in &self.classes.dependency {
            out += &format!("D\t{m}\t{}\n", join(d));
        }
        out += &format!("I\t{}\n", join(&self.classes.interaction));
        for c in &self.coarsenings {
            for (target, v) in &c.verdicts {
                let verdict = if v.preserving { "preserving" } else { "violating" };
                out += &format!("verdict\t{}\t{}->{}\t{target}\t{verdict}\n", c.module, c.reference, c.granularity);
                for r in &v.violations {
                    out += &format!("  rule\t{}\t{}\t{}\n", r.rule.id(), r.var, r.detail);
                }
            }
            for (target, o) in &c.oracle {
                let text = match o {
                    OracleOutcome::Equivalent { traces } => format!("equivalent\t{traces} traces"),
                    OracleOutcome::Counterexample { trace, side } => {
                        let side = match side {
                            Side::OnlyFull => "only-full",
                            Side::OnlyCoarsened => "only-coarsened",
                        };
                        format!("counterexample\t{side}\t{} visible states", trace.states.len())
                    }
                    OracleOutcome::BudgetExhausted => "budget-exhausted".to_string(),
                };
                out += &format!("oracle\t{}\t{}->{}\t{target}\t{text}\n", c.module, c.reference, c.granularity);
            }
        }
        if let Some(b) = &self.oracle_bounds {
            out += &format!(
                "bounds\tprefixes of at most {} visible steps, {} traces, {} states per spec\n",
                b.max_steps, b.max_traces, b.max_states
            );
        }
        out
    }
}

/// Classifies the variables of `plan` and checks every selection that has
/// fewer actions than the `reference` granularity of the same module.
pub fn analyze_plan(
    plan: &CompositionPlan,
    lib: &Library,
    reference: &str,
    oracle: Option<&OracleBounds>,
) -> Result<AnalysisReport, AnalysisError> {
    let spec = compose(plan, lib)?;
    let variants = list_variants(lib);
    let mut coarsenings = Vec::new();
    for (module, gran) in &plan.selections {
        let has_ref = variants.get(module).is_some_and(|v| v.iter().any(|g| g == reference));
        if gran == reference || !has_ref {
            continue;
        }
        let mut full_plan = plan.clone();
        full_plan.selections.insert(module.clone(), reference.to_string());
        // Finer selections elsewhere may need this one; then there is no
        // reference composition to compare against.
        let Ok(full) = compose(&full_plan, lib) else {
            continue;
        };
        let (Some(orig), Some(coarse)) = (full.module(module), spec.module(module)) else {
            continue;
        };
        if coarse.actions.len() >= orig.actions.len() {
            continue;
        }
        let mut verdicts = BTreeMap::new();
        let mut outcomes = BTreeMap::new();
        for target in full.modules.iter().filter(|m| &m.name != module) {
            let v = check_interaction_preserving(orig, coarse, &full.modules, &target.name)?;
            verdicts.insert(target.name.clone(), v);
            if let Some(b) = oracle {
                outcomes.insert(target.name.clone(), theorem_oracle(&full, &spec, &target.name, b)?);
            }
        }
        coarsenings.push(CoarseningReport {
            module: module.clone(),
            granularity: gran.clone(),
            reference: reference.to_string(),
            verdicts,
            oracle: outcomes,
        });
    }
    Ok(AnalysisReport {
        plan: spec.name.clone(),
        classes: classify(&spec.modules),
        coarsenings,
        oracle_bounds: oracle.copied(),
    })
}
