use mgcheck_core::value::{int, sym};
use mgcheck_core::{
    bfs_check, compose, enumerate_enabled, list_variants, apply, random_walk, ComposeError,
    ComposedSpec, CompositionPlan, ExplorationBounds, FaultBudget, Invariant, InvariantLevel, Scale,
    State, StopMode, View, WalkBudget,
};
use mgcheck_zab::model::{history, int_at, is_at, zxid_epoch};
use mgcheck_zab::{
    build_mspec, code_invariant, mspec_plan, presets, protocol_invariants, protocol_spec,
    sync_plan, zab_library, BugFlags, MSpecLevel, ZabOptions, PROTOCOL_IDS,
};
use proptest::prelude::*;
use std::collections::BTreeSet;

const SCALE: Scale = Scale { nodes: 3, max_txns: 2 };
const NO_FAULTS: FaultBudget = FaultBudget { max_crashes: 0, max_partitions: 0 };

fn spec(level: MSpecLevel, faults: FaultBudget, flags: BugFlags) -> ComposedSpec {
    build_mspec(level, SCALE, faults, ZabOptions::with_flags(flags)).unwrap()
}

fn actions(s: &ComposedSpec) -> BTreeSet<String> {
    s.action_names().into_iter().collect()
}

/// Fires the enabled instance printed as `step`.
fn fire(spec: &ComposedSpec, s: &State, step: &str) -> State {
    let inst = enumerate_enabled(spec, s)
        .unwrap()
        .into_iter()
        .find(|i| i.to_string() == step)
        .unwrap_or_else(|| panic!("{step} not enabled"));
    apply(spec, &inst, s).unwrap()
}

fn run(spec: &ComposedSpec, steps: &[&str]) -> State {
    steps.iter().fold(spec.init().clone(), |s, st| fire(spec, &s, st))
}

#[test]
fn presets_match_the_level_table() {
    let shipped = presets();
    assert_eq!(shipped.len(), 5);
    for (p, level) in shipped.iter().zip(MSpecLevel::ALL) {
        assert_eq!(*p, mspec_plan(level, p.scale, p.faults));
        compose(p, &zab_library(ZabOptions::default())).unwrap();
    }
}

#[test]
fn library_lists_sync_granularities() {
    let v = list_variants(&zab_library(ZabOptions::default()));
    for g in ["baseline", "fine-atomicity", "fine-atomicity+concurrency", "protocol-improved"] {
        assert!(v["Synchronization"].contains(&g.to_string()), "{g}");
    }
    assert_eq!(v["Broadcast"], vec!["baseline", "fine-concurrency"]);
}

#[test]
fn sysspec_is_the_all_baseline_composition() {
    let sys = spec(MSpecLevel::SysSpec, NO_FAULTS, BugFlags::none());
    let plan = CompositionPlan {
        name: String::new(),
        selections: [("Election", "baseline"), ("Discovery", "baseline"), ("Synchronization", "baseline"), ("Broadcast", "baseline")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect(),
        scale: SCALE,
        faults: NO_FAULTS,
    };
    let direct = compose(&plan, &zab_library(ZabOptions::default())).unwrap();
    assert_eq!(actions(&sys), actions(&direct));
    assert_eq!(sys.init(), direct.init());
}

#[test]
fn coarse_ed_replaces_the_eight_election_and_discovery_actions() {
    let sys = actions(&spec(MSpecLevel::SysSpec, NO_FAULTS, BugFlags::none()));
    let m1 = actions(&spec(MSpecLevel::M1, NO_FAULTS, BugFlags::none()));
    let gone: BTreeSet<_> = sys.difference(&m1).cloned().collect();
    let added: Vec<_> = m1.difference(&sys).cloned().collect();
    assert_eq!(gone.len(), 8, "{gone:?}");
    assert!(gone.contains("FLEHandleNotmsg") && gone.contains("LeaderProcessACKEPOCH"));
    assert_eq!(added, vec!["ElectionAndDiscovery"]);
}

#[test]
fn fine_atomicity_splits_newleader_into_three() {
    let m1 = actions(&spec(MSpecLevel::M1, NO_FAULTS, BugFlags::none()));
    let m2 = actions(&spec(MSpecLevel::M2, NO_FAULTS, BugFlags::none()));
    let gone: Vec<_> = m1.difference(&m2).cloned().collect();
    let added: Vec<_> = m2.difference(&m1).cloned().collect();
    assert_eq!(gone, vec!["FollowerProcessNEWLEADER"]);
    assert_eq!(
        added,
        vec![
            "FollowerProcessNEWLEADER_LogRequest",
            "FollowerProcessNEWLEADER_ReplyACK",
            "FollowerProcessNEWLEADER_UpdateEpoch"
        ]
    );
}

#[test]
fn only_the_concurrent_variants_declare_the_request_queue() {
    assert!(!spec(MSpecLevel::M2, NO_FAULTS, BugFlags::none()).declares("queuedRequests"));
    assert!(spec(MSpecLevel::M3, NO_FAULTS, BugFlags::none()).declares("queuedRequests"));
    assert!(spec(MSpecLevel::M4, NO_FAULTS, BugFlags::none()).declares("queuedRequests"));
}

#[test]
fn concurrent_sync_without_its_queue_owner_is_rejected() {
    let mut plan = mspec_plan(MSpecLevel::M3, SCALE, NO_FAULTS);
    plan.selections.insert("Broadcast".into(), "baseline".into());
    match compose(&plan, &zab_library(ZabOptions::default())) {
        Err(ComposeError::DanglingVariable { var, .. }) => {
            assert!(var == "queuedRequests" || var == "commitTarget", "{var}")
        }
        other => panic!("expected dangling variable, got {:?}", other.map(|s| s.name)),
    }
}

#[test]
fn code_invariants_follow_granularity() {
    let ids = |s: &ComposedSpec| -> BTreeSet<String> {
        s.invariants
            .iter()
            .filter(|i| i.level == InvariantLevel::Code)
            .map(|i| i.id.clone())
            .collect()
    };
    let f = BugFlags::none();
    let set = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    assert_eq!(ids(&spec(MSpecLevel::M1, NO_FAULTS, f)), set(&["I-4394"]));
    assert_eq!(ids(&spec(MSpecLevel::M2, NO_FAULTS, f)), set(&["I-4394", "I-4643", "I-4646"]));
    assert_eq!(ids(&spec(MSpecLevel::M3, NO_FAULTS, f)), set(&mgcheck_zab::CODE_IDS));
    let improved = protocol_spec(true, SCALE, NO_FAULTS).unwrap();
    assert!(ids(&improved).is_empty());
    let proto: BTreeSet<String> = improved
        .invariants
        .iter()
        .filter(|i| i.level == InvariantLevel::Protocol)
        .map(|i| i.id.clone())
        .collect();
    assert_eq!(proto, set(&PROTOCOL_IDS));
}

#[test]
fn coarse_ed_elects_in_one_step() {
    let m1 = spec(MSpecLevel::M1, NO_FAULTS, BugFlags::none());
    let s = run(&m1, &["ElectionAndDiscovery(l=2, Q={0, 1, 2})"]);
    let v = View::unchecked(&s);
    assert!(is_at(&v, "state", 2, "LEADING"));
    assert!(is_at(&v, "state", 0, "FOLLOWING") && is_at(&v, "state", 1, "FOLLOWING"));
    assert!((0..3).all(|i| is_at(&v, "zabState", i, "SYNCHRONIZATION")));
    assert!((0..3).all(|i| int_at(&v, "acceptedEpoch", i) == 1));
    // Ties on epoch and zxid go to the largest id within the quorum.
    for inst in enumerate_enabled(&m1, m1.init()).unwrap() {
        let b = inst.values();
        let q = mgcheck_zab::model::as_nodes(&b[1]);
        assert_eq!(q.iter().max(), Some(&(b[0].as_int() as usize)), "{inst}");
    }
}

#[test]
fn baseline_broadcast_commits_identical_prefixes() {
    let m1 = spec(MSpecLevel::M1, NO_FAULTS, BugFlags::none());
    let s = run(
        &m1,
        &[
            "ElectionAndDiscovery(l=2, Q={0, 1, 2})",
            "LeaderSyncFollower(l=2, j=0)",
            "LeaderSyncFollower(l=2, j=1)",
            "FollowerProcessNEWLEADER(j=0)",
            "FollowerProcessNEWLEADER(j=1)",
            "LeaderProcessACKLD(l=2, j=0)",
            "LeaderProcessACKLD(l=2, j=1)",
            "FollowerProcessUPTODATE(j=0)",
            "FollowerProcessUPTODATE(j=1)",
            "LeaderProcessRequest(l=2)",
            "FollowerProcessPROPOSAL(j=0)",
            "FollowerProcessPROPOSAL(j=1)",
            "LeaderProcessACK(l=2, j=0)",
            "LeaderProcessACK(l=2, j=1)",
            "FollowerProcessCOMMIT(j=0)",
            "FollowerProcessCOMMIT(j=1)",
        ],
    );
    let v = View::unchecked(&s);
    let h2 = history(&v, 2).to_vec();
    assert_eq!(h2.len(), 1);
    assert_eq!(zxid_epoch(&h2[0]), 1);
    for i in 0..3 {
        assert_eq!(history(&v, i), &h2[..]);
        assert_eq!(int_at(&v, "lastCommitted", i), 1);
    }
    assert_eq!(v.get("committed").as_seq(), &h2[..]);
    assert!(v.get("msgs").as_seq().iter().all(|row| row.as_seq().iter().all(|c| c.is_empty())));
}

#[test]
fn improved_sync_updates_history_before_epoch() {
    let p = protocol_spec(true, SCALE, NO_FAULTS).unwrap();
    let s = run(
        &p,
        &[
            "ElectionAndDiscovery(l=2, Q={0, 1, 2})",
            "LeaderSyncFollower(l=2, j=0)",
            "FollowerProcessNEWLEADER_UpdateHistory(j=0)",
        ],
    );
    let v = View::unchecked(&s);
    assert_eq!(int_at(&v, "currentEpoch", 0), 0);
    assert!(enumerate_enabled(&p, &s)
        .unwrap()
        .iter()
        .any(|i| i.to_string() == "FollowerProcessNEWLEADER_UpdateEpochAndACK(j=0)"));
    let s = fire(&p, &s, "FollowerProcessNEWLEADER_UpdateEpochAndACK(j=0)");
    assert_eq!(int_at(&View::unchecked(&s), "currentEpoch", 0), 1);
}

#[test]
fn atomic_newleader_sets_epoch_and_history_together() {
    let p = protocol_spec(false, SCALE, NO_FAULTS).unwrap();
    let before = run(&p, &["ElectionAndDiscovery(l=2, Q={0, 1, 2})", "LeaderSyncFollower(l=2, j=0)"]);
    let after = fire(&p, &before, "FollowerProcessNEWLEADER(j=0)");
    let changed: BTreeSet<&str> = after.diff(&before).into_iter().map(|(n, _)| n).collect();
    assert!(changed.contains("currentEpoch"));
    assert_eq!(int_at(&View::unchecked(&after), "currentEpoch", 0), 1);
}

#[test]
fn sync_mode_selection() {
    use mgcheck_zab::model::txn;
    let l = vec![txn(1, 1, 1), txn(1, 2, 2), txn(2, 1, 3)];
    // Follower is a prefix of the leader: DIFF with the missing suffix.
    let (m, keep, rest) = sync_plan(&l, &l[..1], 2);
    assert_eq!((m, keep, rest.len()), ("DIFF", 1, 2));
    // Follower has surplus entries past the common prefix: TRUNC.
    let f = vec![txn(1, 1, 1), txn(1, 2, 2), txn(1, 3, 9)];
    let (m, keep, rest) = sync_plan(&l, &f, 2);
    assert_eq!((m, keep, rest.len()), ("TRUNC", 2, 1));
    // Divergence below the leader's commit point: SNAP.
    let f = vec![txn(1, 1, 1), txn(1, 3, 9)];
    let (m, keep, rest) = sync_plan(&l, &f, 2);
    assert_eq!((m, keep, rest.len()), ("SNAP", 0, 3));
}

#[test]
fn initial_state_satisfies_every_invariant() {
    let s = spec(MSpecLevel::M3, NO_FAULTS, BugFlags::none());
    for inv in &s.invariants {
        assert!(inv.holds_in(s.init()), "{}", inv.id);
    }
}

#[test]
fn two_leaders_in_one_epoch_break_single_leader() {
    let s = spec(MSpecLevel::M1, NO_FAULTS, BugFlags::none());
    let init = s.init();
    let mut vals = init.values().to_vec();
    let idx = |n: &str| init.layout().index(n).unwrap();
    vals[idx("state")] = mgcheck_core::value::seq([sym("LEADING"), sym("LEADING"), sym("LOOKING")]);
    vals[idx("currentEpoch")] = mgcheck_core::value::seq([int(1), int(1), int(0)]);
    vals[idx("acceptedEpoch")] = mgcheck_core::value::seq([int(1), int(1), int(0)]);
    let bad = State::new(init.layout().clone(), vals);
    let inv = protocol_invariants().into_iter().find(|i| i.id == "SingleLeaderPerEpoch").unwrap();
    assert!(!inv.holds_in(&bad));
}

/// Some node's epoch equals a live leader's while its history disagrees with
/// the leader's on older epochs.
fn epoch_ahead_of_history() -> Invariant {
    Invariant::state("EpochAheadOfHistory", "", InvariantLevel::Code, |v| {
        (0..3).all(|l| {
            if !is_at(v, "state", l, "LEADING") {
                return true;
            }
            let e = int_at(v, "currentEpoch", l);
            let old = |i: usize| -> Vec<_> {
                history(v, i).iter().filter(|t| zxid_epoch(t) < e).cloned().collect()
            };
            (0..3).all(|j| j == l || int_at(v, "currentEpoch", j) != e || old(j) == old(l))
        })
    })
}

#[test]
fn fine_atomicity_reaches_states_the_coarse_spec_cannot() {
    let faults = FaultBudget { max_crashes: 1, max_partitions: 1 };
    let flags = BugFlags::only("zk4643").unwrap();
    let scale = Scale { nodes: 3, max_txns: 1 };
    let inv = [epoch_ahead_of_history()];
    let bounds = ExplorationBounds { workers: 4, ..Default::default() };
    let m1 = build_mspec(MSpecLevel::M1, scale, faults, ZabOptions::with_flags(flags)).unwrap();
    let r1 = bfs_check(&m1, &inv, &bounds, StopMode::Complete).unwrap();
    assert!(r1.violations.is_empty());
    let m2 = build_mspec(MSpecLevel::M2, scale, faults, ZabOptions::with_flags(flags)).unwrap();
    let r2 = bfs_check(&m2, &inv, &bounds, StopMode::First).unwrap();
    assert_eq!(r2.violations.len(), 1);
}

#[test]
fn code_invariant_lookup() {
    for bug in BugFlags::NAMES {
        let id = mgcheck_zab::invariant_for_bug(bug).unwrap();
        assert_eq!(code_invariant(id).unwrap().id, id);
        assert!(id.ends_with(&bug[2..]));
    }
    assert!(code_invariant("I-0").is_none());
}

#[test]
fn level_names_parse() {
    for l in MSpecLevel::ALL {
        assert_eq!(l.name().parse::<MSpecLevel>().unwrap(), l);
    }
    assert_eq!("3".parse::<MSpecLevel>().unwrap(), MSpecLevel::M3);
    assert_eq!("baseline".parse::<MSpecLevel>().unwrap(), MSpecLevel::SysSpec);
    assert!("mSpec-9".parse::<MSpecLevel>().is_err());
}

fn walk_holds(level: MSpecLevel, seed: u64) {
    let faults = FaultBudget { max_crashes: 2, max_partitions: 1 };
    let s = spec(level, faults, BugFlags::none());
    let traces = random_walk(&s, seed, WalkBudget { max_steps: 60, max_traces: 4 }).unwrap();
    for t in traces {
        t.validate(&s).unwrap();
        let states: Vec<&State> = t.states().collect();
        for (k, st) in states.iter().enumerate() {
            for inv in &s.invariants {
                assert!(inv.holds_in(st), "{} at step {k}", inv.id);
                if k > 0 {
                    let a = &t.steps[k - 1].action;
                    let b = a.values();
                    let step = mgcheck_core::StepRef { action: &a.action, bindings: &b };
                    assert!(inv.holds_on_step(states[k - 1], &step, st), "{} at step {k}", inv.id);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn walks_without_bugs_keep_every_invariant(seed in any::<u64>(), level in 0u8..5) {
        walk_holds(MSpecLevel::from_index(level).unwrap(), seed);
    }
}
