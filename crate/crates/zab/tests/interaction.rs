use mgcheck_core::interaction::*;
use mgcheck_core::{compose, ComposedSpec, CompositionPlan, FaultBudget, Library, Scale};
use mgcheck_zab::election::{self, ED_MODULE};
use mgcheck_zab::{mspec_plan, zab_library, MSpecLevel, ZabOptions};

const SMALL: Scale = Scale { nodes: 2, max_txns: 2 };
const FAULTS: FaultBudget = FaultBudget { max_crashes: 1, max_partitions: 1 };

fn library() -> Library {
    let mut lib = zab_library(ZabOptions::default());
    lib.add_variant(ED_MODULE, "coarse-stale-epoch", |b| {
        election::coarse_stale_epoch(b, ZabOptions::default())
    });
    lib
}

fn plan(ed: &str, scale: Scale, faults: FaultBudget) -> CompositionPlan {
    CompositionPlan {
        name: format!("ed-{ed}"),
        selections: [(ED_MODULE, ed), ("Synchronization", "baseline"), ("Broadcast", "baseline")]
            .iter()
            .map(|(m, g)| (m.to_string(), g.to_string()))
            .collect(),
        scale,
        faults,
    }
}

fn spec(ed: &str) -> ComposedSpec {
    compose(&plan(ed, SMALL, FAULTS), &library()).unwrap()
}

#[test]
fn coarse_ed_preserves_every_target() {
    let full = spec("baseline");
    let coarse = spec("coarse");
    for target in ["Synchronization", "Broadcast", "Faults"] {
        let v = check_interaction_preserving(
            full.module(ED_MODULE).unwrap(),
            coarse.module(ED_MODULE).unwrap(),
            &full.modules,
            target,
        )
        .unwrap();
        assert!(v.preserving, "{target}: {:?}", v.violations);
        assert!(!v.visible.contains("ackeRecv"));
    }
}

#[test]
fn election_internals_stay_out_of_the_interaction_set() {
    let full = spec("baseline");
    let i = interaction_vars(&full.modules);
    for internal in ["currentVote", "recvVotes", "fleInbox", "fleLeader", "discPhase", "connecting", "ackeRecv"] {
        assert!(!i.contains(internal), "{internal} in {i:?}");
    }
    for shared in ["state", "zabState", "currentEpoch", "learnerPhase", "leaderAddr"] {
        assert!(i.contains(shared), "{shared} missing");
    }
}

#[test]
fn oracle_finds_coarse_ed_equivalent() {
    let full = spec("baseline");
    let coarse = spec("coarse");
    match theorem_oracle(&full, &coarse, "Synchronization", &OracleBounds::default()).unwrap() {
        OracleOutcome::Equivalent { traces } => assert!(traces > 1000),
        other => panic!("{other:?}"),
    }
}

#[test]
fn stale_epoch_coarsening_is_rejected_by_both_checks() {
    let full = spec("baseline");
    let bad = spec("coarse-stale-epoch");
    let v = check_interaction_preserving(
        full.module(ED_MODULE).unwrap(),
        bad.module(ED_MODULE).unwrap(),
        &full.modules,
        "Synchronization",
    )
    .unwrap();
    assert!(!v.preserving);
    let vars: Vec<&str> = v.violations.iter().map(|r| r.var.as_str()).collect();
    assert_eq!(vars, ["currentEpoch"]);
    assert!(v.violations.iter().all(|r| r.rule == Constraint::UpdatesUnchanged));
    assert!(matches!(
        theorem_oracle(&full, &bad, "Synchronization", &OracleBounds::default()).unwrap(),
        OracleOutcome::Counterexample { .. }
    ));
}

#[test]
fn analyze_plan_reports_the_ed_coarsening_only() {
    let lib = zab_library(ZabOptions::default());
    let scale = Scale { nodes: 3, max_txns: 2 };
    let r = analyze_plan(&mspec_plan(MSpecLevel::M1, scale, FAULTS), &lib, "baseline", None).unwrap();
    assert_eq!(r.coarsenings.len(), 1);
    assert_eq!(r.coarsenings[0].module, ED_MODULE);
    assert!(r.all_preserving());
    let text = r.to_text();
    assert!(text.contains("verdict\tElectionAndDiscovery\tbaseline->coarse\tSynchronization\tpreserving"));
    assert_eq!(text, analyze_plan(&mspec_plan(MSpecLevel::M1, scale, FAULTS), &lib, "baseline", None).unwrap().to_text());

    for level in [MSpecLevel::SysSpec, MSpecLevel::M2, MSpecLevel::M4] {
        let r = analyze_plan(&mspec_plan(level, scale, FAULTS), &lib, "baseline", None).unwrap();
        assert!(r.coarsenings.iter().all(|c| c.module == ED_MODULE), "{level}");
    }
    let r = analyze_plan(&mspec_plan(MSpecLevel::M4, scale, FAULTS), &lib, "baseline", None).unwrap();
    assert!(r.coarsenings.is_empty());
}

#[test]
fn analyze_plan_with_oracle_flags_the_mutant() {
    let lib = library();
    let small = OracleBounds { max_steps: 8, ..OracleBounds::default() };
    let good = analyze_plan(&plan("coarse", SMALL, FAULTS), &lib, "baseline", Some(&small)).unwrap();
    assert!(good.all_preserving(), "{}", good.to_text());
    let bad = analyze_plan(&plan("coarse-stale-epoch", SMALL, FAULTS), &lib, "baseline", Some(&small)).unwrap();
    assert!(!bad.all_preserving());
    assert!(bad.to_text().contains("counterexample"));
}
