use mgcheck_core::action::AccessKind;
use mgcheck_core::toy::ToySystem;
use mgcheck_core::value::int;
use mgcheck_core::*;
use proptest::prelude::*;
use std::collections::{HashMap, VecDeque};

/// Plain breadth-first search over register vectors: distinct reachable
/// count and depth of the shallowest bad valuation.
fn oracle(sys: &ToySystem) -> (usize, Option<usize>) {
    let init = vec![0i64; sys.registers];
    let mut depth = HashMap::from([(init.clone(), 0usize)]);
    let mut queue = VecDeque::from([init]);
    let mut first_bad = None;
    while let Some(s) = queue.pop_front() {
        let d = depth[&s];
        if s == sys.bad {
            first_bad = Some(first_bad.map_or(d, |b: usize| b.min(d)));
        }
        for a in &sys.actions {
            for k in 0..a.spread {
                if let Some(n) = sys.step(a, &s, k) {
                    if !depth.contains_key(&n) {
                        depth.insert(n.clone(), d + 1);
                        queue.push_back(n);
                    }
                }
            }
        }
    }
    (depth.len(), first_bad)
}

fn run(sys: &ToySystem, workers: usize, stop: StopMode) -> CheckResult {
    let spec = sys.spec().unwrap();
    let bounds = ExplorationBounds {
        workers,
        ..Default::default()
    };
    bfs_check(&spec, &spec.invariants, &bounds, stop).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn first_violation_is_shallowest(seed in any::<u64>()) {
        let sys = ToySystem::random(seed);
        let (count, bad_depth) = oracle(&sys);
        let r = run(&sys, 1, StopMode::First);
        match bad_depth {
            Some(d) => {
                prop_assert_eq!(r.outcome, Outcome::ViolationFound);
                prop_assert_eq!(r.violations.len(), 1);
                prop_assert_eq!(r.violations[0].trace.len(), d);
            }
            None => {
                prop_assert_eq!(r.outcome, Outcome::Complete);
                prop_assert!(r.violations.is_empty());
                prop_assert_eq!(r.distinct_states as usize, count);
            }
        }
    }

    #[test]
    fn complete_run_counts_every_state(seed in any::<u64>()) {
        let sys = ToySystem::random(seed);
        let (count, bad_depth) = oracle(&sys);
        let r = run(&sys, 1, StopMode::Complete);
        prop_assert_eq!(r.outcome, Outcome::Complete);
        prop_assert_eq!(r.distinct_states as usize, count);
        prop_assert_eq!(r.violations.len(), usize::from(bad_depth.is_some()));
    }

    #[test]
    fn violation_traces_replay(seed in any::<u64>()) {
        let sys = ToySystem::random(seed);
        let spec = sys.spec().unwrap();
        let r = run(&sys, 1, StopMode::Complete);
        for v in &r.violations {
            prop_assert!(v.trace.validate(&spec).is_ok());
            prop_assert!(!spec.invariants[0].holds_in(v.trace.last()));
        }
    }

    #[test]
    fn worker_count_does_not_change_results(seed in any::<u64>()) {
        let sys = ToySystem::random(seed);
        let a = run(&sys, 1, StopMode::Complete);
        let b = run(&sys, 8, StopMode::Complete);
        prop_assert_eq!(a.distinct_states, b.distinct_states);
        prop_assert_eq!(a.states_explored, b.states_explored);
        prop_assert_eq!(a.max_depth, b.max_depth);
        let ta: Vec<_> = a.violations.iter().map(|v| v.trace.clone()).collect();
        let tb: Vec<_> = b.violations.iter().map(|v| v.trace.clone()).collect();
        prop_assert_eq!(ta, tb);
    }

    #[test]
    fn successors_only_change_written_vars(seed in any::<u64>()) {
        let sys = ToySystem::random(seed);
        let spec = sys.spec().unwrap();
        for walk in random_walk(&spec, seed, WalkBudget { max_steps: 20, max_traces: 3 }).unwrap() {
            prop_assert!(walk.validate(&spec).is_ok());
            for step in &walk.steps {
                let a = &spec.actions()[spec.action_index(&step.action.action).unwrap()].def;
                let k: usize = step.action.action[3..].parse().unwrap();
                let target = mgcheck_core::toy::reg(sys.actions[k].target);
                prop_assert!(a.writes.contains_key(&target));
            }
            for (pre, step) in walk.states().zip(walk.steps.iter()) {
                for (name, _) in step.state.diff(pre) {
                    let a = &spec.actions()[spec.action_index(&step.action.action).unwrap()].def;
                    prop_assert!(a.writes.contains_key(name));
                }
            }
        }
    }

    #[test]
    fn trace_file_round_trips(seed in any::<u64>()) {
        let sys = ToySystem::random(seed);
        let spec = sys.spec().unwrap();
        for walk in random_walk(&spec, seed, WalkBudget { max_steps: 15, max_traces: 2 }).unwrap() {
            let text = walk.to_file();
            prop_assert!(text.starts_with("mgcheck-trace v1\n"));
            let back = Trace::from_file(&text, &spec).unwrap();
            prop_assert_eq!(back, walk);
        }
    }
}

#[test]
fn random_walk_is_seeded() {
    let spec = ToySystem::random(7).spec().unwrap();
    let budget = WalkBudget {
        max_steps: 30,
        max_traces: 5,
    };
    let a = random_walk(&spec, 11, budget).unwrap();
    let b = random_walk(&spec, 11, budget).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 5);
}

fn counter_spec(declared_reads: &[&str]) -> ComposedSpec {
    let vars = vec![
        VarDecl::new("x", int(0), VarClass::Shared),
        VarDecl::new("y", int(0), VarClass::Shared),
    ];
    let inc = ActionDef::new("Inc")
        .param("d", [int(1), int(2)])
        .reads(declared_reads)
        .writes("x", &["x"], "x := x + d")
        .guard(|s, _| s.get("x").as_int() < 3 && s.get("y").as_int() == 0)
        .update(|s, b, w| w.set("x", int(s.get("x").as_int() + b[0].as_int())));
    ComposedSpec::standalone("counter", vars, vec![inc], vec![]).unwrap()
}

#[test]
fn enumerate_and_apply() {
    let spec = counter_spec(&["x", "y"]);
    let enabled = enumerate_enabled(&spec, spec.init()).unwrap();
    assert_eq!(enabled.len(), 2);
    assert_eq!(enabled[0].bindings, vec![("d".to_string(), int(1))]);
    let s = apply(&spec, &enabled[1], spec.init()).unwrap();
    assert_eq!(s.var("x"), &int(2));
    let s = apply(&spec, &enabled[1], &s).unwrap();
    assert_eq!(s.var("x"), &int(4));
    assert_eq!(
        apply(&spec, &enabled[0], &s),
        Err(KernelError::GuardNotEnabled("Inc(d=1)".into()))
    );
    assert!(enumerate_enabled(&spec, &s).unwrap().is_empty());
}

#[test]
fn undeclared_read_is_an_error() {
    let spec = counter_spec(&["x"]);
    let err = enumerate_enabled(&spec, spec.init()).unwrap_err();
    assert_eq!(
        err,
        KernelError::MetadataViolation {
            action: "Inc".into(),
            var: "y".into(),
            access: AccessKind::Read
        }
    );
    let r = bfs_check(&spec, &[], &ExplorationBounds::default(), StopMode::Complete);
    assert!(r.is_err());
}

#[test]
fn undeclared_write_is_an_error() {
    let vars = vec![
        VarDecl::new("x", int(0), VarClass::Shared),
        VarDecl::new("y", int(0), VarClass::Shared),
    ];
    let sneaky = ActionDef::new("Sneaky")
        .reads(&["x"])
        .writes("x", &[], "x := 1")
        .guard(|s, _| s.get("x").as_int() == 0)
        .update(|_, _, w| {
            w.set("x", int(1));
            w.set("y", int(1));
        });
    let spec = ComposedSpec::standalone("s", vars, vec![sneaky], vec![]).unwrap();
    let err = successors(&spec, spec.init()).unwrap_err();
    assert!(matches!(err, KernelError::MetadataViolation { access: AccessKind::Write, .. }));
}

#[test]
fn malformed_state_is_rejected() {
    let spec = counter_spec(&["x", "y"]);
    let other = ToySystem::random(1).spec().unwrap();
    assert!(matches!(
        enumerate_enabled(&spec, other.init()),
        Err(KernelError::MalformedState(_))
    ));
}

#[test]
fn budgets_stop_exploration() {
    let sys = (0..)
        .map(ToySystem::random)
        .find(|s| oracle(s).0 > 50)
        .unwrap();
    let spec = sys.spec().unwrap();
    let bounds = ExplorationBounds {
        max_states: Some(10),
        ..Default::default()
    };
    let r = bfs_check(&spec, &[], &bounds, StopMode::Complete).unwrap();
    assert_eq!(r.outcome, Outcome::BudgetExhausted);
    assert_eq!(r.distinct_states, 10);
}

#[test]
fn limit_mode_collects_several() {
    // A system where many valuations are bad: invert the bad-state invariant.
    let vars = vec![VarDecl::new("x", int(0), VarClass::Shared)];
    let inc = ActionDef::new("Inc")
        .reads(&["x"])
        .writes("x", &["x"], "x := x + 1")
        .guard(|s, _| s.get("x").as_int() < 10)
        .update(|s, _, w| w.set("x", int(s.get("x").as_int() + 1)));
    let inv = Invariant::state("small", "x stays below 4", InvariantLevel::Protocol, |v| {
        v.get("x").as_int() < 4
    });
    let spec = ComposedSpec::standalone("s", vars, vec![inc], vec![inv]).unwrap();
    let r = bfs_check(&spec, &spec.invariants, &Default::default(), StopMode::Limit(3)).unwrap();
    assert_eq!(r.outcome, Outcome::ViolationFound);
    let lens: Vec<_> = r.violations.iter().map(|v| v.trace.len()).collect();
    assert_eq!(lens, vec![4, 5, 6]);
    let all = bfs_check(&spec, &spec.invariants, &Default::default(), StopMode::Complete).unwrap();
    assert_eq!(all.outcome, Outcome::Complete);
    assert_eq!(all.violations.len(), 7);

    let filter = ExplorationBounds {
        filter: ExplorationFilter {
            suppressed: ["small".to_string()].into(),
        },
        ..Default::default()
    };
    let pruned = bfs_check(&spec, &spec.invariants, &filter, StopMode::Complete).unwrap();
    assert!(pruned.violations.is_empty());
    assert_eq!(pruned.distinct_states, 4);
}

#[test]
fn transition_invariants_fire_only_on_triggers() {
    let vars = vec![VarDecl::new("x", int(0), VarClass::Shared)];
    let up = ActionDef::new("Up")
        .reads(&["x"])
        .writes("x", &["x"], "x := x + 1")
        .guard(|s, _| s.get("x").as_int() < 3)
        .update(|s, _, w| w.set("x", int(s.get("x").as_int() + 1)));
    let down = ActionDef::new("Down")
        .reads(&["x"])
        .writes("x", &["x"], "x := x - 1")
        .guard(|s, _| s.get("x").as_int() > 0)
        .update(|s, _, w| w.set("x", int(s.get("x").as_int() - 1)));
    let no_drop_from_two = Invariant::transition(
        "no-drop-from-two",
        "Down never leaves 2",
        InvariantLevel::Code,
        Some(&["Down"]),
        |pre, _, _| pre.get("x").as_int() != 2,
    );
    let spec = ComposedSpec::standalone("s", vars, vec![up, down], vec![no_drop_from_two]).unwrap();
    let r = bfs_check(&spec, &spec.invariants, &Default::default(), StopMode::First).unwrap();
    assert_eq!(r.violations.len(), 1);
    let t = &r.violations[0].trace;
    assert_eq!(t.len(), 3);
    assert_eq!(t.steps[2].action.action, "Down");
}

#[test]
fn stop_mode_parsing() {
    assert_eq!("first".parse::<StopMode>(), Ok(StopMode::First));
    assert_eq!("complete".parse::<StopMode>(), Ok(StopMode::Complete));
    assert_eq!("limit=5".parse::<StopMode>(), Ok(StopMode::Limit(5)));
    assert!("limit=0".parse::<StopMode>().is_err());
    assert!("sometimes".parse::<StopMode>().is_err());
}
