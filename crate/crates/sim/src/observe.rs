use crate::cluster::Cluster;
use crate::node::LearnerPhase;
use crate::types::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnerView {
    pub follower: NodeId,
    pub phase: LearnerPhase,
    pub acked: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncView {
    pub epoch_done: bool,
    pub logged: bool,
    pub acked: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeView {
    pub id: NodeId,
    pub alive: bool,
    pub role: Role,
    pub phase: Phase,
    pub current_epoch: i64,
    pub accepted_epoch: i64,
    pub log: Vec<Txn>,
    pub last_committed: usize,
    pub commit_target: usize,
    pub pending: Vec<Txn>,
    pub stash: Vec<Txn>,
    pub leader: Option<NodeId>,
    pub learners: Vec<LearnerView>,
    pub sync: Option<SyncView>,
}

impl NodeView {
    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelView {
    pub from: NodeId,
    pub to: NodeId,
    pub msgs: Vec<Msg>,
}

/// Read-only projection of a cluster.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservableState {
    pub nodes: Vec<NodeView>,
    /// Non-empty quorum channels.
    pub channels: Vec<ChannelView>,
    pub votes_in_flight: usize,
    pub partitions: Vec<(NodeId, NodeId)>,
    pub committed: Vec<Txn>,
    pub proposed: Vec<Txn>,
}

impl ObservableState {
    pub fn channel(&self, from: NodeId, to: NodeId) -> &[Msg] {
        self.channels
            .iter()
            .find(|c| c.from == from && c.to == to)
            .map_or(&[], |c| &c.msgs)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }
}

pub fn observe(c: &Cluster) -> ObservableState {
    let nodes = c
        .nodes
        .iter()
        .map(|x| NodeView {
            id: x.id,
            alive: x.alive,
            role: x.role,
            phase: x.phase,
            current_epoch: x.disk.current_epoch,
            accepted_epoch: x.disk.accepted_epoch,
            log: x.disk.log.clone(),
            last_committed: x.last_committed,
            commit_target: x.commit_target,
            pending: x.pending.iter().copied().collect(),
            stash: x.stash.clone(),
            leader: x.leader,
            learners: x
                .learners
                .iter()
                .map(|(&follower, r)| LearnerView {
                    follower,
                    phase: r.phase,
                    acked: r.acked,
                })
                .collect(),
            sync: x.nl.map(|nl| SyncView {
                epoch_done: nl.epoch_done,
                logged: nl.logged,
                acked: nl.acked,
            }),
        })
        .collect();
    let mut channels = Vec::new();
    let mut votes = 0;
    for from in 0..c.n {
        for to in 0..c.n {
            let ch = c.channel(from, to);
            if !ch.is_empty() {
                channels.push(ChannelView {
                    from,
                    to,
                    msgs: ch.iter().cloned().collect(),
                });
            }
            votes += c.vote_channel(from, to).len();
        }
    }
    ObservableState {
        nodes,
        channels,
        votes_in_flight: votes,
        partitions: c.partitions.iter().copied().collect(),
        committed: c.client_committed.clone(),
        proposed: c.client_proposed.clone(),
    }
}
