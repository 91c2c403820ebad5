use mgcheck_core::interaction::*;
use mgcheck_core::toy::{counter_library, handoff_library};
use mgcheck_core::value::int;
use mgcheck_core::*;
use std::collections::{BTreeMap, BTreeSet};

fn plan(selections: &[(&str, &str)]) -> CompositionPlan {
    CompositionPlan {
        name: "toy".into(),
        selections: selections
            .iter()
            .map(|(m, g)| (m.to_string(), g.to_string()))
            .collect(),
        scale: Scale { nodes: 1, max_txns: 0 },
        faults: FaultBudget::default(),
    }
}

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

#[test]
fn variants_are_listed() {
    let v = list_variants(&handoff_library());
    assert_eq!(v["Producer"], vec!["baseline", "coarse", "mutated"]);
    assert_eq!(v["Consumer"], vec!["baseline"]);
}

#[test]
fn compose_merges_shared_declarations() {
    let spec = compose(&plan(&[("Producer", "baseline"), ("Consumer", "baseline")]), &handoff_library()).unwrap();
    assert_eq!(spec.action_names(), vec!["Abort", "Consume", "Prepare", "Publish"]);
    assert_eq!(
        spec.layout().names(),
        &["buf", "data", "got", "prep", "taken"].map(String::from)
    );
    let coarse = compose(&plan(&[("Producer", "coarse"), ("Consumer", "baseline")]), &handoff_library()).unwrap();
    assert_eq!(coarse.action_names(), vec!["Consume", "Produce"]);
}

#[test]
fn compose_rejects_bad_plans() {
    let lib = handoff_library();
    assert_eq!(
        compose(&plan(&[("Producer", "coarse")]), &lib).unwrap_err(),
        ComposeError::MissingSelection("Consumer".into())
    );
    assert!(matches!(
        compose(&plan(&[("Producer", "tiny"), ("Consumer", "baseline")]), &lib),
        Err(ComposeError::UnknownVariant { .. })
    ));
    assert_eq!(
        compose(&plan(&[("Producer", "coarse"), ("Consumer", "baseline"), ("Ghost", "x")]), &lib).unwrap_err(),
        ComposeError::UnknownModule("Ghost".into())
    );
}

#[test]
fn conflicting_initializers_are_rejected() {
    let mut lib = handoff_library();
    lib.add_variant("Consumer", "eager", |_| {
        ModuleSpec::new("Consumer", "eager").var(VarDecl::new("data", int(1), VarClass::Shared))
    });
    let err = compose(&plan(&[("Producer", "coarse"), ("Consumer", "eager")]), &lib).unwrap_err();
    assert!(matches!(err, ComposeError::ConflictingInit { ref var, .. } if var == "data"));
}

#[test]
fn dangling_variables_are_rejected() {
    let mut lib = handoff_library();
    lib.add_variant("Consumer", "orphan", |_| {
        ModuleSpec::new("Consumer", "orphan").action(
            ActionDef::new("Peek")
                .reads(&["nowhere"])
                .guard(|s, _| s.get("nowhere").as_int() == 0),
        )
    });
    let err = compose(&plan(&[("Producer", "coarse"), ("Consumer", "orphan")]), &lib).unwrap_err();
    assert_eq!(
        err,
        ComposeError::DanglingVariable {
            action: "Peek".into(),
            var: "nowhere".into()
        }
    );
}

#[test]
fn composite_modules_cover_their_parts() {
    let mut lib = counter_library();
    lib.set_covers("Both", &["Incrementer", "Monitor"]);
    lib.add_variant("Both", "merged", |_| ModuleSpec::new("Both", "merged"));
    assert!(compose(&plan(&[("Both", "merged")]), &lib).is_ok());
    assert_eq!(
        compose(&plan(&[("Both", "merged"), ("Monitor", "baseline")]), &lib).unwrap_err(),
        ComposeError::DoubleSelection("Monitor".into())
    );
}

#[test]
fn always_selected_modules_are_derived_last() {
    let mut lib = counter_library();
    lib.add_variant("Reset", "standard", |ctx| {
        let mut m = ModuleSpec::new("Reset", "standard");
        let volatile: Vec<String> = ctx
            .declared
            .iter()
            .filter(|d| d.class == VarClass::Volatile)
            .map(|d| d.name.clone())
            .collect();
        let mut a = ActionDef::new("ResetAll");
        for v in &volatile {
            a = a.writes(v, &[], &format!("{v} := 0"));
        }
        let names = volatile.clone();
        a = a.update(move |_, _, w| {
            for v in &names {
                w.set(v, int(0));
            }
        });
        m = m.action(a);
        m
    });
    lib.set_always("Reset", true);
    let spec = compose(&plan(&[("Incrementer", "baseline"), ("Monitor", "baseline")]), &lib).unwrap();
    assert_eq!(spec.selections["Reset"], "standard");
    let reset = &spec.module("Reset").unwrap().actions[0];
    assert_eq!(
        reset.writes.keys().cloned().collect::<BTreeSet<_>>(),
        set(&["phase", "seen", "tmp"])
    );
}

#[test]
fn plans_round_trip_through_json() {
    let p = plan(&[("Producer", "coarse"), ("Consumer", "baseline")]);
    let text = p.to_json();
    assert_eq!(CompositionPlan::from_json(&text).unwrap(), p);
    assert!(matches!(CompositionPlan::from_json("{"), Err(ComposeError::BadPlan(_))));
}

fn modules(lib: &Library, sel: &[(&str, &str)]) -> Vec<ModuleSpec> {
    compose(&plan(sel), lib).unwrap().modules
}

#[test]
fn dependency_and_interaction_variables() {
    let lib = handoff_library();
    let ms = modules(&lib, &[("Producer", "baseline"), ("Consumer", "baseline")]);
    let c = classify(&ms);
    assert_eq!(c.dependency["Producer"], set(&["buf", "data", "prep"]));
    assert_eq!(c.dependency["Consumer"], set(&["data", "taken"]));
    assert_eq!(c.interaction, set(&["data"]));
    assert_eq!(c.visible("Consumer").unwrap(), set(&["data", "taken"]));
}

#[test]
fn assignment_inputs_join_interaction_variables() {
    // A writes `out` (read by B and C) from `hint`, which A never reads itself.
    let m = |name: &str, a: ActionDef| ModuleSpec::new(name, "x").action(a);
    let a = m("A", ActionDef::new("Emit").reads(&["go"]).writes("out", &["hint"], "out := hint"));
    let b = m("B", ActionDef::new("UseB").reads(&["out"]).writes("hint", &["seed"], "hint := seed"));
    let c = m("C", ActionDef::new("UseC").reads(&["out"]));
    let classes = classify(&[a.clone(), b.clone(), c.clone()]);
    assert!(classes.interaction.contains("out"));
    assert!(classes.interaction.contains("hint"));
    // hint is now an interaction variable assigned by B from seed.
    assert!(classes.interaction.contains("seed"));
    assert!(!classes.dependency["A"].contains("hint"));

    // Internal dependency variable of C assigned by A from a variable C does not read.
    let c2 = m("C", ActionDef::new("UseC").reads(&["mirror"]));
    let a2 = m("A", ActionDef::new("Copy").reads(&["src"]).writes("mirror", &["src"], "mirror := src"));
    let classes = classify(&[a2, c2]);
    assert_eq!(classes.interaction, set(&["src"]));
}

#[test]
fn syntactic_check_accepts_correct_coarsenings() {
    for (lib, coarse_mod, target, other) in [
        (handoff_library(), "Producer", "Consumer", ("Consumer", "baseline")),
        (counter_library(), "Incrementer", "Monitor", ("Monitor", "baseline")),
    ] {
        let full = modules(&lib, &[(coarse_mod, "baseline"), other]);
        let coarse = modules(&lib, &[(coarse_mod, "coarse"), other]);
        let orig = full.iter().find(|m| m.name == coarse_mod).unwrap();
        let co = coarse.iter().find(|m| m.name == coarse_mod).unwrap();
        let v = check_interaction_preserving(orig, co, &full, target).unwrap();
        assert!(v.preserving, "{:?}", v.violations);

        let mutated = modules(&lib, &[(coarse_mod, "mutated"), other]);
        let mu = mutated.iter().find(|m| m.name == coarse_mod).unwrap();
        let v = check_interaction_preserving(orig, mu, &full, target).unwrap();
        assert!(!v.preserving);
        assert!(v.violations.iter().all(|x| x.rule == Constraint::UpdatesUnchanged));
    }
}

#[test]
fn missing_target_is_reported() {
    let lib = handoff_library();
    let full = modules(&lib, &[("Producer", "baseline"), ("Consumer", "baseline")]);
    let r = check_interaction_preserving(&full[1], &full[1], &full, "Nobody");
    assert!(matches!(r, Err(AnalysisError::ClassificationMissing(_))));
}

#[test]
fn oracle_agrees_with_syntactic_check_on_toys() {
    let bounds = OracleBounds::default();
    for (lib, coarse_mod, target, other) in [
        (handoff_library(), "Producer", "Consumer", ("Consumer", "baseline")),
        (counter_library(), "Incrementer", "Monitor", ("Monitor", "baseline")),
    ] {
        let full = compose(&plan(&[(coarse_mod, "baseline"), other]), &lib).unwrap();
        let coarse = compose(&plan(&[(coarse_mod, "coarse"), other]), &lib).unwrap();
        let mutated = compose(&plan(&[(coarse_mod, "mutated"), other]), &lib).unwrap();
        match theorem_oracle(&full, &coarse, target, &bounds).unwrap() {
            OracleOutcome::Equivalent { traces } => assert!(traces > 1),
            other => panic!("expected equivalence, got {other:?}"),
        }
        match theorem_oracle(&full, &mutated, target, &bounds).unwrap() {
            OracleOutcome::Counterexample { trace, .. } => assert!(trace.states.len() >= 2),
            other => panic!("expected a counterexample, got {other:?}"),
        }
    }
}

#[test]
fn projection_condenses_stutter() {
    let lib = handoff_library();
    let spec = compose(&plan(&[("Producer", "baseline"), ("Consumer", "baseline")]), &lib).unwrap();
    let classes = classify(&spec.modules);
    let mut t = Trace::new(spec.init().clone());
    for step in ["Prepare", "Publish", "Consume"] {
        let inst = enumerate_enabled(&spec, t.last())
            .unwrap()
            .into_iter()
            .find(|i| i.action == step)
            .unwrap();
        let next = apply(&spec, &inst, t.last()).unwrap();
        t.steps.push(TraceStep { action: inst, state: next });
    }
    let p = project_and_condense(&t, &classes, "Consumer").unwrap();
    assert_eq!(p.vars, vec!["data", "taken"]);
    let expect: Vec<BTreeMap<&str, i64>> = vec![
        [("data", 0), ("taken", 0)].into(),
        [("data", 1), ("taken", 0)].into(),
        [("data", 0), ("taken", 1)].into(),
    ];
    let got: Vec<BTreeMap<&str, i64>> = p
        .states
        .iter()
        .map(|s| {
            p.vars
                .iter()
                .map(String::as_str)
                .zip(s.iter().map(|v| v.as_ref().unwrap().as_int()))
                .collect()
        })
        .collect();
    assert_eq!(got, expect);
}
