//! Which implementation events realise each model action.

use crate::error::ConformanceError;
use mgcheck_core::{ActionInstance, ComposedSpec};
use mgcheck_sim::{Cluster, NodeId, SimEvent, Task};
use std::collections::{BTreeMap, BTreeSet};

/// A node named by an action parameter, or that node's current leader.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeRef {
    Param(usize),
    LeaderOf(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskRef {
    Handler,
    SyncProcessor,
    CommitProcessor,
    SyncLearner(NodeRef),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventTemplate {
    Deliver(NodeRef, NodeRef),
    Run(NodeRef, TaskRef),
    Crash(NodeRef),
    Restart(NodeRef),
    Partition(NodeRef, NodeRef),
    Heal(NodeRef, NodeRef),
    Propose(NodeRef),
}

/// Where the leader and quorum of an election come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElectionSource {
    /// `(l, Q)` bindings of the coarse action.
    Bindings,
    /// `LeaderProcessACKEPOCH(l, i, establish)`: the quorum is read from the
    /// model post-state when `establish` holds; otherwise nothing happens.
    AckEpoch,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MappingEntry {
    /// Try each `begin` event in order; then run `cont` events (first
    /// applicable wins) until the compared variables match.
    Events {
        begin: Vec<EventTemplate>,
        cont: Vec<EventTemplate>,
    },
    /// Drive a full election and discovery round.
    Election(ElectionSource),
    /// Model-internal step with no implementation counterpart.
    Internal,
}

/// Model variable, its implementation counterpart, and whether it is compared.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Correspondence {
    pub var: &'static str,
    pub field: &'static str,
    pub compared: bool,
}

pub const CORRESPONDENCES: [Correspondence; 19] = [
    c("state", "nodes[i].role", true),
    c("zabState", "nodes[i].phase", true),
    c("currentEpoch", "nodes[i].current_epoch", true),
    c("acceptedEpoch", "nodes[i].accepted_epoch", true),
    c("history", "nodes[i].log", true),
    c("lastCommitted", "nodes[i].last_committed", true),
    c("alive", "nodes[i].alive", true),
    c("leaderAddr", "nodes[i].leader", true),
    c("queuedRequests", "nodes[i].pending", true),
    c("msgs", "channels", true),
    c("partitioned", "partitions", true),
    c("learnerPhase", "nodes[l].learners[j].phase", false),
    c("ackIndex", "nodes[l].learners[j].acked", false),
    c("packetsSync", "nodes[i].stash", false),
    c("syncProgress", "nodes[i].sync", false),
    c("commitTarget", "nodes[i].commit_target", false),
    c("committed", "committed", false),
    c("proposed", "proposed", false),
    c("servingState", "nodes[i].phase", false),
];

const fn c(var: &'static str, field: &'static str, compared: bool) -> Correspondence {
    Correspondence { var, field, compared }
}

#[derive(Clone, Debug)]
pub struct ActionMapping {
    pub entries: BTreeMap<String, MappingEntry>,
    /// Variables compared after every step.
    pub compared: Vec<String>,
    /// Variables with an implementation counterpart.
    pub translated: Vec<String>,
}

fn ev(begin: &[EventTemplate], cont: &[EventTemplate]) -> MappingEntry {
    MappingEntry::Events {
        begin: begin.to_vec(),
        cont: cont.to_vec(),
    }
}

/// Entry for a known Zab action. `fine_broadcast` selects the concurrent
/// Broadcast variant, where logging and committing are separate actions.
pub fn zab_entry(action: &str, fine_broadcast: bool) -> Option<MappingEntry> {
    use EventTemplate::*;
    use NodeRef::{LeaderOf, Param as P};
    use TaskRef::*;
    let j = P(0);
    let lj = LeaderOf(0);
    let from_leader = Deliver(lj, j);
    let to_leader = Deliver(P(1), P(0));
    Some(match action {
        "ElectionAndDiscovery" => MappingEntry::Election(ElectionSource::Bindings),
        "LeaderProcessACKEPOCH" => MappingEntry::Election(ElectionSource::AckEpoch),
        "FLEReceiveNotmsg" | "FLEHandleNotmsg" | "FLEWaitNewNotmsg" | "FLENotmsgTimeout"
        | "ConnectAndFollowerSendFOLLOWERINFO" | "LeaderProcessFOLLOWERINFO"
        | "FollowerProcessLEADERINFO" => MappingEntry::Internal,
        "LeaderSyncFollower" => ev(&[Run(P(0), SyncLearner(P(1)))], &[]),
        "FollowerProcessNEWLEADER" => ev(&[from_leader], &[Run(j, SyncProcessor), Run(j, Handler)]),
        "FollowerProcessNEWLEADER_LogRequest" => ev(
            &[Run(j, Handler), from_leader, Run(j, SyncProcessor)],
            &[Run(j, SyncProcessor)],
        ),
        "FollowerProcessNEWLEADER_UpdateEpoch" => ev(&[Run(j, Handler), from_leader], &[]),
        "FollowerProcessNEWLEADER_ReplyACK" => ev(&[Run(j, Handler)], &[Run(j, Handler)]),
        "FollowerProcessNEWLEADER_UpdateHistory" => ev(&[from_leader], &[Run(j, SyncProcessor)]),
        "FollowerProcessNEWLEADER_UpdateEpochAndACK" => ev(&[Run(j, Handler)], &[Run(j, Handler)]),
        "FollowerProcessPROPOSALInSync" | "FollowerProcessCOMMITInSync" | "FollowerProcessUPTODATE" => {
            ev(&[from_leader], &[])
        }
        "LeaderProcessACKLD" | "LeaderProcessACKUPTODATE" | "LeaderProcessACK" => ev(&[to_leader], &[]),
        "FollowerSyncProcessorLogRequest" => ev(&[Run(j, SyncProcessor)], &[]),
        "FollowerCommitProcessorCommit" => ev(&[Run(j, CommitProcessor)], &[]),
        "LeaderProcessRequest" => ev(&[Propose(P(0))], &[]),
        "FollowerProcessPROPOSAL" if fine_broadcast => ev(&[from_leader], &[]),
        "FollowerProcessPROPOSAL" => ev(&[from_leader], &[Run(j, SyncProcessor)]),
        "FollowerProcessCOMMIT" if fine_broadcast => ev(&[from_leader], &[]),
        "FollowerProcessCOMMIT" => ev(&[from_leader], &[Run(j, CommitProcessor)]),
        "Crash" => ev(&[Crash(P(0))], &[]),
        "Restart" => ev(&[Restart(P(0))], &[]),
        "PartitionStart" => ev(&[Partition(P(0), P(1))], &[]),
        "PartitionRecover" => ev(&[Heal(P(0), P(1))], &[]),
        _ => return None,
    })
}

impl ActionMapping {
    /// Mapping for a composed Zab spec.
    pub fn for_spec(spec: &ComposedSpec) -> Result<ActionMapping, ConformanceError> {
        let fine = spec.action_index("FollowerCommitProcessorCommit").is_some();
        let mut entries = BTreeMap::new();
        for name in spec.action_names() {
            let e = zab_entry(&name, fine).ok_or_else(|| ConformanceError::UnmappedAction(name.clone()))?;
            entries.insert(name, e);
        }
        let declared = |v: &str| spec.declares(v);
        Ok(ActionMapping {
            entries,
            compared: CORRESPONDENCES
                .iter()
                .filter(|c| c.compared && declared(c.var))
                .map(|c| c.var.to_string())
                .collect(),
            translated: CORRESPONDENCES
                .iter()
                .filter(|c| c.var != "servingState" && declared(c.var))
                .map(|c| c.var.to_string())
                .collect(),
        })
    }

    pub fn covers(&self, spec: &ComposedSpec) -> Result<(), ConformanceError> {
        match spec.action_names().into_iter().find(|a| !self.entries.contains_key(a)) {
            Some(a) => Err(ConformanceError::UnmappedAction(a)),
            None => Ok(()),
        }
    }

    pub fn entry(&self, action: &str) -> Result<&MappingEntry, ConformanceError> {
        self.entries
            .get(action)
            .ok_or_else(|| ConformanceError::UnmappedAction(action.to_string()))
    }
}

fn resolve_node(r: NodeRef, params: &[NodeId], c: &Cluster) -> Option<NodeId> {
    match r {
        NodeRef::Param(k) => params.get(k).copied(),
        NodeRef::LeaderOf(k) => c.nodes.get(*params.get(k)?)?.leader,
    }
}

/// Concrete event for a template, if its nodes can be named.
pub fn resolve(t: EventTemplate, params: &[NodeId], c: &Cluster) -> Option<SimEvent> {
    use EventTemplate::*;
    let n = |r| resolve_node(r, params, c);
    Some(match t {
        Deliver(a, b) => SimEvent::Deliver { from: n(a)?, to: n(b)? },
        Run(a, task) => SimEvent::RunTask {
            node: n(a)?,
            task: match task {
                TaskRef::Handler => Task::Handler,
                TaskRef::SyncProcessor => Task::SyncProcessor,
                TaskRef::CommitProcessor => Task::CommitProcessor,
                TaskRef::SyncLearner(b) => Task::SyncLearner(n(b)?),
            },
        },
        Crash(a) => SimEvent::Crash { node: n(a)? },
        Restart(a) => SimEvent::Restart { node: n(a)? },
        Partition(a, b) => SimEvent::Partition { a: n(a)?, b: n(b)? },
        Heal(a, b) => SimEvent::Heal { a: n(a)?, b: n(b)? },
        Propose(a) => SimEvent::ClientPropose { node: n(a)? },
    })
}

/// Node-valued parameters of a model step; set-valued ones are skipped.
pub fn node_params(inst: &ActionInstance) -> Vec<NodeId> {
    inst.bindings
        .iter()
        .filter_map(|(_, v)| match v {
            mgcheck_core::Value::Int(i) if *i >= 0 => Some(*i as NodeId),
            _ => None,
        })
        .collect()
}

fn param_arity(ts: &[EventTemplate]) -> usize {
    fn idx(r: NodeRef) -> usize {
        match r {
            NodeRef::Param(k) | NodeRef::LeaderOf(k) => k + 1,
        }
    }
    ts.iter()
        .map(|t| match *t {
            EventTemplate::Deliver(a, b) | EventTemplate::Partition(a, b) | EventTemplate::Heal(a, b) => {
                idx(a).max(idx(b))
            }
            EventTemplate::Run(a, TaskRef::SyncLearner(b)) => idx(a).max(idx(b)),
            EventTemplate::Run(a, _) | EventTemplate::Crash(a) | EventTemplate::Restart(a) | EventTemplate::Propose(a) => idx(a),
        })
        .max()
        .unwrap_or(0)
}

/// Model actions whose begin event is schedulable in `c`.
pub fn enabled_code_actions(c: &Cluster, mapping: &ActionMapping) -> BTreeSet<String> {
    let election_possible = (0..c.n).any(|i| {
        c.is_applicable(&SimEvent::RunTask {
            node: i,
            task: Task::Announce,
        })
    });
    let live: std::collections::HashSet<SimEvent> = c.enabled_events().into_iter().collect();
    let mut out = BTreeSet::new();
    for (name, entry) in &mapping.entries {
        let on = match entry {
            MappingEntry::Election(_) | MappingEntry::Internal => election_possible,
            MappingEntry::Events { begin, .. } => {
                let k = param_arity(begin);
                let total = c.n.pow(k as u32);
                (0..total).any(|mut code| {
                    let params: Vec<NodeId> = (0..k)
                        .map(|_| {
                            let p = code % c.n;
                            code /= c.n;
                            p
                        })
                        .collect();
                    begin
                        .iter()
                        .filter_map(|t| resolve(*t, &params, c))
                        .any(|e| live.contains(&e))
                })
            }
        };
        if on {
            out.insert(name.clone());
        }
    }
    out
}
