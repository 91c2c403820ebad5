use mgcheck_sim::drive::{elect, quiesce};
use mgcheck_sim::*;
use proptest::prelude::*;

fn run(node: NodeId, task: Task) -> SimEvent {
    SimEvent::RunTask { node, task }
}

fn deliver(from: NodeId, to: NodeId) -> SimEvent {
    SimEvent::Deliver { from, to }
}

/// Node 2 leads {0, 1, 2}.
fn elected(flags: BugFlags) -> Cluster {
    let mut c = Cluster::new(3, flags);
    elect(&mut c, 2, &[0, 1, 2]).unwrap();
    c
}

#[test]
fn fresh_cluster_is_blank() {
    let o = observe(&Cluster::new(3, BugFlags::none()));
    for n in &o.nodes {
        assert_eq!((n.current_epoch, n.accepted_epoch), (0, 0));
        assert!(n.log.is_empty());
        assert_eq!(n.role, Role::Looking);
    }
    assert!(o.channels.is_empty());
}

#[test]
fn observe_is_idempotent() {
    let c = elected(BugFlags::none());
    assert_eq!(observe(&c), observe(&c));
    assert_eq!(observe(&c).to_json(), observe(&c).to_json());
}

#[test]
fn heal_without_partition_changes_nothing() {
    let mut c = elected(BugFlags::none());
    let before = observe(&c);
    c.step(SimEvent::Heal { a: 0, b: 1 }).unwrap();
    assert_eq!(observe(&c), before);
}

#[test]
fn inapplicable_event_is_rejected_without_effect() {
    let mut c = Cluster::new(3, BugFlags::none());
    c.step(SimEvent::Crash { node: 1 }).unwrap();
    let before = c.clone();
    assert!(matches!(c.step(SimEvent::Crash { node: 1 }), Err(SimError::Inapplicable { .. })));
    assert!(c.step(deliver(0, 1)).is_err());
    assert!(c.step(SimEvent::ClientPropose { node: 0 }).is_err());
    assert_eq!(c, before);
}

#[test]
fn election_elects_the_best_credentials() {
    let c = elected(BugFlags::none());
    let o = observe(&c);
    assert_eq!(o.nodes[2].role, Role::Leading);
    for j in [0, 1] {
        assert_eq!(o.nodes[j].role, Role::Following);
        assert_eq!(o.nodes[j].leader, Some(2));
        assert_eq!(o.nodes[j].accepted_epoch, 1);
        assert_eq!(o.nodes[j].current_epoch, 0);
        assert_eq!(o.nodes[j].phase, Phase::Synchronization);
    }
    assert_eq!(o.nodes[2].current_epoch, 1);
    assert!(o.channels.is_empty());
}

#[test]
fn full_run_commits_one_transaction_everywhere() {
    let mut c = elected(BugFlags::none());
    quiesce(&mut c, 200).unwrap();
    assert_eq!(c.node(2).phase, Phase::Broadcast);
    c.step(SimEvent::ClientPropose { node: 2 }).unwrap();
    quiesce(&mut c, 200).unwrap();
    let o = observe(&c);
    let log = &o.nodes[2].log;
    assert_eq!(log.len(), 1);
    for n in &o.nodes {
        assert_eq!(&n.log, log);
        assert_eq!(n.last_committed, 1);
        assert_eq!(n.phase, Phase::Broadcast);
    }
    assert_eq!(o.committed, *log);
}

fn leader_with_history() -> Cluster {
    // Leader 2 commits one txn with follower 1 while 0 is down, then 0 rejoins.
    let mut c = Cluster::new(3, BugFlags::none());
    c.step(SimEvent::Crash { node: 0 }).unwrap();
    elect(&mut c, 2, &[1, 2]).unwrap();
    quiesce(&mut c, 100).unwrap();
    c.step(SimEvent::ClientPropose { node: 2 }).unwrap();
    quiesce(&mut c, 100).unwrap();
    c
}

#[test]
fn newleader_goes_through_the_log_queue_before_the_epoch() {
    let mut c2 = leader_with_history();
    c2.step(SimEvent::Restart { node: 0 }).unwrap();
    c2.step(SimEvent::Crash { node: 2 }).unwrap();
    c2.step(SimEvent::Restart { node: 2 }).unwrap();
    elect(&mut c2, 2, &[0, 2]).unwrap();
    c2.step(run(2, Task::SyncLearner(0))).unwrap();
    c2.step(deliver(2, 0)).unwrap();
    let n = &observe(&c2).nodes[0];
    assert_eq!(n.pending.len(), 1, "entries handed to the log queue");
    assert!(n.log.is_empty());
    assert_eq!(n.current_epoch, 0, "epoch waits for the log");
    assert!(!c2.is_applicable(&run(0, Task::Handler)));
    c2.step(run(0, Task::SyncProcessor)).unwrap();
    c2.step(run(0, Task::Handler)).unwrap();
    let n = &observe(&c2).nodes[0];
    assert_eq!(n.log.len(), 1);
    assert_eq!(n.current_epoch, 2);
}

#[test]
fn zk4643_crash_between_epoch_and_log_leaves_stale_log() {
    let mut c = leader_with_history();
    c.flags = BugFlags::only("zk4643").unwrap();
    c.step(SimEvent::Restart { node: 0 }).unwrap();
    c.step(SimEvent::Crash { node: 2 }).unwrap();
    c.step(SimEvent::Restart { node: 2 }).unwrap();
    elect(&mut c, 2, &[0, 2]).unwrap();
    c.step(run(2, Task::SyncLearner(0))).unwrap();
    c.step(deliver(2, 0)).unwrap();
    c.step(SimEvent::Crash { node: 0 }).unwrap();
    let n = &observe(&c).nodes[0];
    assert_eq!(n.current_epoch, 2);
    assert!(n.log.is_empty());
}

/// Follower 1 syncs by DIFF after the proposal was made, so the COMMIT that
/// follows NEWLEADER matches nothing it holds in memory.
fn zk4394_schedule(flags: BugFlags) -> (Cluster, StepOutcome) {
    let mut c = Cluster::new(3, flags);
    elect(&mut c, 2, &[0, 1, 2]).unwrap();
    for e in [
        run(2, Task::SyncLearner(0)),
        deliver(2, 0),
        run(0, Task::Handler),
        run(0, Task::Handler),
        deliver(0, 2),
        deliver(2, 0),
        SimEvent::ClientPropose { node: 2 },
        deliver(2, 0),
        run(0, Task::SyncProcessor),
        run(2, Task::SyncLearner(1)),
        deliver(2, 1),
        run(1, Task::SyncProcessor),
        run(1, Task::Handler),
        run(1, Task::Handler),
        deliver(0, 2),
        deliver(0, 2),
    ] {
        c.step(e).unwrap_or_else(|err| panic!("{err}"));
    }
    assert_eq!(c.node(2).last_committed, 1);
    assert!(matches!(c.channel(2, 1).front(), Some(Msg::Commit(_))));
    let out = c.step(deliver(2, 1)).unwrap();
    (c, out)
}

#[test]
fn zk4394_commit_in_sync_kills_the_handler() {
    let (c, out) = zk4394_schedule(BugFlags::only("zk4394").unwrap());
    let fault = out.fault.expect("handler exception");
    assert_eq!(fault.node, 1);
    assert_eq!(c.node(1).role, Role::Looking);
    let (c, out) = zk4394_schedule(BugFlags::none());
    assert!(out.fault.is_none());
    assert_eq!(c.node(1).role, Role::Following);
}

#[test]
fn scenario_round_trips_and_replays_prefix() {
    let mut s = Scenario::new(3, BugFlags::only("zk4712").unwrap());
    s.events = vec![run(0, Task::Announce), SimEvent::Partition { a: 0, b: 1 }];
    let back = Scenario::from_json(&s.to_json()).unwrap();
    assert_eq!(back, s);
    let c = back.build().unwrap();
    assert!(c.partitioned(1, 0));
    assert_eq!(observe(&c).votes_in_flight, 1);
    let minimal = Scenario::from_json(r#"{"nodes": 5}"#).unwrap();
    assert!(minimal.uptodate_ack && minimal.events.is_empty());
}

#[test]
fn client_read_visibility_depends_on_zk4646() {
    for (flags, expect) in [(BugFlags::none(), 0), (BugFlags::only("zk4646").unwrap(), 1)] {
        let mut c = Cluster::new(3, flags);
        c.step(SimEvent::Crash { node: 0 }).unwrap();
        elect(&mut c, 2, &[1, 2]).unwrap();
        quiesce(&mut c, 100).unwrap();
        c.step(SimEvent::ClientPropose { node: 2 }).unwrap();
        let read = c.step(SimEvent::ClientRead { node: 2 }).unwrap().read.unwrap();
        assert_eq!(read.len(), expect);
    }
}

fn random_run(flags: BugFlags, picks: &[usize]) -> (Cluster, Vec<SimEvent>) {
    let mut c = Cluster::new(3, flags);
    let mut applied = Vec::new();
    for &p in picks {
        let evs = c.enabled_events();
        let e = evs[p % evs.len()];
        c.step(e).unwrap();
        applied.push(e);
    }
    (c, applied)
}

fn flags_strategy() -> impl Strategy<Value = BugFlags> {
    (0usize..7).prop_map(|k| {
        BugFlags::NAMES
            .get(k)
            .and_then(|n| BugFlags::only(n))
            .unwrap_or_default()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn identical_event_sequences_give_identical_states(
        flags in flags_strategy(),
        picks in proptest::collection::vec(0usize..1000, 0..120),
    ) {
        let (a, events) = random_run(flags, &picks);
        let mut b = Cluster::new(3, flags);
        for e in events {
            b.step(e).unwrap();
        }
        prop_assert_eq!(observe(&a).to_json(), observe(&b).to_json());
    }

    #[test]
    fn crash_keeps_disk_and_drops_memory(
        flags in flags_strategy(),
        picks in proptest::collection::vec(0usize..1000, 0..120),
        victim in 0usize..3,
    ) {
        let (mut c, _) = random_run(flags, &picks);
        if !c.node(victim).alive {
            c.step(SimEvent::Restart { node: victim }).unwrap();
        }
        let disk = c.node(victim).disk.clone();
        c.step(SimEvent::Crash { node: victim }).unwrap();
        prop_assert!(c.runnable_tasks(victim).is_empty());
        c.step(SimEvent::Restart { node: victim }).unwrap();
        let n = c.node(victim);
        prop_assert_eq!(&n.disk, &disk);
        prop_assert_eq!(n.role, Role::Looking);
        prop_assert_eq!(n.last_committed, 0);
        prop_assert!(n.pending.is_empty() && n.stash.is_empty() && n.learners.is_empty());
        prop_assert!(n.leader.is_none() && n.nl.is_none());
        for k in 0..3 {
            prop_assert!(c.channel(k, victim).is_empty() && c.channel(victim, k).is_empty());
        }
    }

    #[test]
    fn flags_off_runs_keep_logs_ordered_and_commits_agreeing(
        picks in proptest::collection::vec(0usize..1000, 0..200),
    ) {
        let (c, _) = random_run(BugFlags::none(), &picks);
        let o = observe(&c);
        for n in &o.nodes {
            prop_assert!(n.log.windows(2).all(|w| w[0].zxid < w[1].zxid));
            prop_assert!(n.last_committed <= n.log.len());
            prop_assert!(o.committed.starts_with(&n.log[..n.last_committed]));
        }
    }
}
