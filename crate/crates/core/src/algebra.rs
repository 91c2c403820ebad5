//! Module library, composition plans and composition.

use crate::action::{ActionDef, Invariant, VarMask};
use crate::state::{Layout, State};
use crate::value::Value;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

/// Role of a variable under faults.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarClass {
    /// Survives crashes.
    Durable,
    /// Lost on crash.
    Volatile,
    /// Lost on crash and whenever the node leaves its current role.
    Session,
    /// Not owned by a node: network, budgets, history variables.
    Shared,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub init: Value,
    pub class: VarClass,
}

impl VarDecl {
    pub fn new(name: &str, init: Value, class: VarClass) -> VarDecl {
        VarDecl {
            name: name.to_string(),
            init,
            class,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModuleSpec {
    pub name: String,
    pub granularity: String,
    pub actions: Vec<ActionDef>,
    pub vars: Vec<VarDecl>,
    pub invariants: Vec<Invariant>,
}

impl ModuleSpec {
    pub fn new(name: &str, granularity: &str) -> ModuleSpec {
        ModuleSpec {
            name: name.to_string(),
            granularity: granularity.to_string(),
            actions: Vec::new(),
            vars: Vec::new(),
            invariants: Vec::new(),
        }
    }

    pub fn action(mut self, a: ActionDef) -> Self {
        let module = self.name.clone();
        self.actions.push(a.in_module(&module));
        self
    }

    pub fn var(mut self, decl: VarDecl) -> Self {
        if !self.vars.iter().any(|d| d.name == decl.name) {
            self.vars.push(decl);
        }
        self
    }

    pub fn invariant(mut self, inv: Invariant) -> Self {
        self.invariants.push(inv);
        self
    }

    /// Union of several modules under one name.
    pub fn merge(name: &str, granularity: &str, parts: &[ModuleSpec]) -> ModuleSpec {
        let mut out = ModuleSpec::new(name, granularity);
        for p in parts {
            for a in &p.actions {
                out = out.action(a.clone());
            }
            for d in &p.vars {
                out = out.var(d.clone());
            }
            for i in &p.invariants {
                if !out.invariants.iter().any(|x| x.id == i.id) {
                    out.invariants.push(i.clone());
                }
            }
        }
        out
    }

    pub fn action_names(&self) -> BTreeSet<String> {
        self.actions.iter().map(|a| a.name.clone()).collect()
    }

    pub fn declares(&self, var: &str) -> bool {
        self.vars.iter().any(|d| d.name == var)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scale {
    pub nodes: usize,
    pub max_txns: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultBudget {
    pub max_crashes: usize,
    pub max_partitions: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositionPlan {
    #[serde(default)]
    pub name: String,
    /// Module name to granularity label.
    pub selections: BTreeMap<String, String>,
    pub scale: Scale,
    #[serde(default)]
    pub faults: FaultBudget,
}

impl CompositionPlan {
    pub fn from_json(text: &str) -> Result<CompositionPlan, ComposeError> {
        serde_json::from_str(text).map_err(|e| ComposeError::BadPlan(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<CompositionPlan, ComposeError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ComposeError::BadPlan(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap()
    }
}

pub struct BuildContext<'a> {
    pub scale: Scale,
    pub faults: FaultBudget,
    /// Variables of the other selected modules; empty unless the module is derived.
    pub declared: &'a [VarDecl],
}

pub type VariantBuilder = Arc<dyn Fn(&BuildContext) -> ModuleSpec + Send + Sync>;

#[derive(Clone, Default)]
struct Entry {
    covers: Vec<String>,
    always: bool,
    derived: bool,
    variants: BTreeMap<String, VariantBuilder>,
}

/// Modules with their alternative granularities.
#[derive(Clone, Default)]
pub struct Library {
    entries: BTreeMap<String, Entry>,
}

impl Library {
    pub fn new() -> Library {
        Library::default()
    }

    pub fn add_variant(
        &mut self,
        module: &str,
        granularity: &str,
        builder: impl Fn(&BuildContext) -> ModuleSpec + Send + Sync + 'static,
    ) {
        let entry = self.entries.entry(module.to_string()).or_default();
        if entry.covers.is_empty() {
            entry.covers.push(module.to_string());
        }
        entry
            .variants
            .insert(granularity.to_string(), Arc::new(builder));
    }

    /// Declares that `module` stands for several base modules at once.
    pub fn set_covers(&mut self, module: &str, covers: &[&str]) {
        let entry = self.entries.entry(module.to_string()).or_default();
        entry.covers = covers.iter().map(|s| s.to_string()).collect();
    }

    /// Marks a module as selected in every composition. A derived module is
    /// built after the others and sees their variable declarations.
    pub fn set_always(&mut self, module: &str, derived: bool) {
        let entry = self.entries.entry(module.to_string()).or_default();
        entry.always = true;
        entry.derived = derived;
    }

    pub fn base_modules(&self) -> BTreeSet<String> {
        self.entries
            .values()
            .flat_map(|e| e.covers.iter().cloned())
            .collect()
    }

    pub fn build(
        &self,
        module: &str,
        granularity: &str,
        ctx: &BuildContext,
    ) -> Option<ModuleSpec> {
        let b = self.entries.get(module)?.variants.get(granularity)?;
        Some(b(ctx))
    }
}

pub fn list_variants(lib: &Library) -> BTreeMap<String, Vec<String>> {
    lib.entries
        .iter()
        .map(|(m, e)| (m.clone(), e.variants.keys().cloned().collect()))
        .collect()
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ComposeError {
    #[error("unknown module {0}")]
    UnknownModule(String),
    #[error("module {module} has no granularity {granularity}")]
    UnknownVariant { module: String, granularity: String },
    #[error("no selection covers module {0}")]
    MissingSelection(String),
    #[error("module {0} is selected more than once")]
    DoubleSelection(String),
    #[error("variable {var} has conflicting declarations: {first} vs {second}")]
    ConflictingInit {
        var: String,
        first: String,
        second: String,
    },
    #[error("action {action} references undeclared variable {var}")]
    DanglingVariable { action: String, var: String },
    #[error("action {0} is defined twice")]
    DuplicateAction(String),
    #[error("too many variables ({0})")]
    TooManyVariables(usize),
    #[error("invalid plan: {0}")]
    BadPlan(String),
}

/// An action with its access masks resolved against the composed layout.
#[derive(Clone, Debug)]
pub struct CompiledAction {
    pub def: ActionDef,
    pub(crate) guard_mask: VarMask,
    pub(crate) update_mask: VarMask,
    pub(crate) write_mask: VarMask,
}

/// The flat transition system produced by composition.
#[derive(Clone)]
pub struct ComposedSpec {
    pub name: String,
    pub selections: BTreeMap<String, String>,
    pub scale: Scale,
    pub faults: FaultBudget,
    pub modules: Vec<ModuleSpec>,
    pub vars: Vec<VarDecl>,
    pub invariants: Vec<Invariant>,
    layout: Arc<Layout>,
    init: State,
    actions: Vec<CompiledAction>,
}

impl fmt::Debug for ComposedSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ComposedSpec")
            .field("name", &self.name)
            .field("selections", &self.selections)
            .field("actions", &self.action_names())
            .finish()
    }
}

impl ComposedSpec {
    /// Wraps loose actions and variables as a single-module spec.
    pub fn standalone(
        name: &str,
        vars: Vec<VarDecl>,
        actions: Vec<ActionDef>,
        invariants: Vec<Invariant>,
    ) -> Result<ComposedSpec, ComposeError> {
        let mut m = ModuleSpec::new(name, "default");
        for v in vars {
            m = m.var(v);
        }
        for a in actions {
            m = m.action(a);
        }
        m.invariants = invariants;
        assemble(
            name,
            BTreeMap::from([(name.to_string(), "default".to_string())]),
            Scale { nodes: 0, max_txns: 0 },
            FaultBudget::default(),
            vec![m],
        )
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn init(&self) -> &State {
        &self.init
    }

    pub fn actions(&self) -> &[CompiledAction] {
        &self.actions
    }

    pub fn action_names(&self) -> Vec<String> {
        self.actions.iter().map(|a| a.def.name.clone()).collect()
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.actions
            .binary_search_by(|a| a.def.name.as_str().cmp(name))
            .ok()
    }

    pub fn declares(&self, var: &str) -> bool {
        self.layout.index(var).is_some()
    }

    pub fn invariant(&self, id: &str) -> Option<&Invariant> {
        self.invariants.iter().find(|i| i.id == id)
    }

    pub fn module(&self, name: &str) -> Option<&ModuleSpec> {
        self.modules.iter().find(|m| m.name == name)
    }
}

fn merge_vars(into: &mut BTreeMap<String, VarDecl>, decls: &[VarDecl]) -> Result<(), ComposeError> {
    for d in decls {
        match into.get(&d.name) {
            Some(prev) if prev != d => {
                return Err(ComposeError::ConflictingInit {
                    var: d.name.clone(),
                    first: format!("{} ({:?})", prev.init, prev.class),
                    second: format!("{} ({:?})", d.init, d.class),
                })
            }
            Some(_) => {}
            None => {
                into.insert(d.name.clone(), d.clone());
            }
        }
    }
    Ok(())
}

pub fn compose(plan: &CompositionPlan, lib: &Library) -> Result<ComposedSpec, ComposeError> {
    let mut selections = plan.selections.clone();
    for (name, entry) in &lib.entries {
        if entry.always && !selections.contains_key(name) {
            let default = entry
                .variants
                .keys()
                .next()
                .ok_or_else(|| ComposeError::UnknownModule(name.clone()))?;
            selections.insert(name.clone(), default.clone());
        }
    }
    let mut covered = BTreeSet::new();
    for (module, gran) in &selections {
        let entry = lib
            .entries
            .get(module)
            .ok_or_else(|| ComposeError::UnknownModule(module.clone()))?;
        if !entry.variants.contains_key(gran) {
            return Err(ComposeError::UnknownVariant {
                module: module.clone(),
                granularity: gran.clone(),
            });
        }
        for base in &entry.covers {
            if !covered.insert(base.clone()) {
                return Err(ComposeError::DoubleSelection(base.clone()));
            }
        }
    }
    if let Some(missing) = lib.base_modules().difference(&covered).next() {
        return Err(ComposeError::MissingSelection(missing.clone()));
    }

    let mut modules = Vec::new();
    let mut vars = BTreeMap::new();
    let ordinary = selections.iter().filter(|(m, _)| !lib.entries[*m].derived);
    for (module, gran) in ordinary {
        let ctx = BuildContext {
            scale: plan.scale,
            faults: plan.faults,
            declared: &[],
        };
        let m = lib.build(module, gran, &ctx).unwrap();
        merge_vars(&mut vars, &m.vars)?;
        modules.push(m);
    }
    let declared: Vec<VarDecl> = vars.values().cloned().collect();
    for (module, gran) in selections.iter().filter(|(m, _)| lib.entries[*m].derived) {
        let ctx = BuildContext {
            scale: plan.scale,
            faults: plan.faults,
            declared: &declared,
        };
        modules.push(lib.build(module, gran, &ctx).unwrap());
    }
    let name = if plan.name.is_empty() {
        "composed".to_string()
    } else {
        plan.name.clone()
    };
    assemble(&name, selections, plan.scale, plan.faults, modules)
}

fn assemble(
    name: &str,
    selections: BTreeMap<String, String>,
    scale: Scale,
    faults: FaultBudget,
    modules: Vec<ModuleSpec>,
) -> Result<ComposedSpec, ComposeError> {
    let mut vars = BTreeMap::new();
    for m in &modules {
        merge_vars(&mut vars, &m.vars)?;
    }
    if vars.len() > VarMask::MAX_VARS {
        return Err(ComposeError::TooManyVariables(vars.len()));
    }
    let layout = Layout::new(vars.keys().cloned().collect());
    let init = State::new(
        layout.clone(),
        vars.values().map(|d| d.init.clone()).collect(),
    );

    let mask_of = |action: &str, names: &mut dyn Iterator<Item = &String>| {
        let mut mask = VarMask::default();
        for n in names {
            let i = layout.index(n).ok_or_else(|| ComposeError::DanglingVariable {
                action: action.to_string(),
                var: n.clone(),
            })?;
            mask.insert(i);
        }
        Ok::<_, ComposeError>(mask)
    };

    let mut actions: Vec<CompiledAction> = Vec::new();
    let mut invariants: Vec<Invariant> = Vec::new();
    for m in &modules {
        for a in &m.actions {
            let guard_mask = mask_of(&a.name, &mut a.reads.iter())?;
            let touched = a.touched();
            let update_mask = mask_of(&a.name, &mut touched.iter())?;
            let write_mask = mask_of(&a.name, &mut a.writes.keys())?;
            actions.push(CompiledAction {
                def: a.clone(),
                guard_mask,
                update_mask,
                write_mask,
            });
        }
        for inv in &m.invariants {
            if !invariants.iter().any(|i| i.id == inv.id) {
                invariants.push(inv.clone());
            }
        }
    }
    actions.sort_by(|a, b| a.def.name.cmp(&b.def.name));
    for w in actions.windows(2) {
        if w[0].def.name == w[1].def.name {
            return Err(ComposeError::DuplicateAction(w[0].def.name.clone()));
        }
    }
    invariants.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(ComposedSpec {
        name: name.to_string(),
        selections,
        scale,
        faults,
        modules,
        vars: vars.into_values().collect(),
        invariants,
        layout,
        init,
        actions,
    })
}
