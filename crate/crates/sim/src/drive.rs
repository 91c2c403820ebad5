//! Scheduling helpers that push a cluster through multi-event protocol phases.

use crate::cluster::{Cluster, SimError};
use crate::types::*;

fn apply(c: &mut Cluster, e: SimEvent, log: &mut Vec<SimEvent>) -> Result<(), SimError> {
    c.step(e)?;
    log.push(e);
    Ok(())
}

fn drain(c: &mut Cluster, e: SimEvent, log: &mut Vec<SimEvent>) -> Result<(), SimError> {
    while c.is_applicable(&e) {
        apply(c, e, log)?;
    }
    Ok(())
}

/// Runs leader election and discovery among `members` so that `leader`
/// ends up leading all of them. Votes for `leader` are delivered before
/// anyone decides. Returns the events applied.
pub fn elect(c: &mut Cluster, leader: NodeId, members: &[NodeId]) -> Result<Vec<SimEvent>, SimError> {
    let mut log = Vec::new();
    let run = |node, task| SimEvent::RunTask { node, task };
    for &m in members {
        apply(c, run(m, Task::Announce), &mut log)?;
    }
    for &from in std::iter::once(&leader).chain(members.iter().filter(|&&m| m != leader)) {
        for &to in members {
            drain(c, SimEvent::DeliverVote { from, to }, &mut log)?;
        }
    }
    apply(c, run(leader, Task::Decide), &mut log)?;
    for &m in members.iter().filter(|&&m| m != leader) {
        apply(c, run(m, Task::Decide), &mut log)?;
        drain(c, SimEvent::Deliver { from: m, to: leader }, &mut log)?;
    }
    apply(c, run(leader, Task::ProposeEpoch), &mut log)?;
    for &m in members.iter().filter(|&&m| m != leader) {
        drain(c, SimEvent::Deliver { from: leader, to: m }, &mut log)?;
        drain(c, SimEvent::Deliver { from: m, to: leader }, &mut log)?;
    }
    apply(c, run(leader, Task::FinishDiscovery), &mut log)?;
    Ok(log)
}

/// Applies runnable events in a fixed priority order until nothing but
/// faults and client requests is left, or `limit` events were applied.
pub fn quiesce(c: &mut Cluster, limit: usize) -> Result<Vec<SimEvent>, SimError> {
    let mut log = Vec::new();
    while log.len() < limit {
        let next = c.enabled_events().into_iter().find(|e| {
            matches!(e, SimEvent::Deliver { .. })
                || matches!(
                    e,
                    SimEvent::RunTask {
                        task: Task::Handler
                            | Task::SyncProcessor
                            | Task::CommitProcessor
                            | Task::SyncLearner(_),
                        ..
                    }
                )
        });
        match next {
            Some(e) => apply(c, e, &mut log)?,
            None => break,
        }
    }
    Ok(log)
}
