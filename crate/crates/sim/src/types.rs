use serde::{Deserialize, Serialize};
use std::fmt;

pub type NodeId = usize;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Zxid {
    pub epoch: i64,
    pub counter: i64,
}

impl fmt::Display for Zxid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}.{}", self.epoch, self.counter)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Txn {
    pub zxid: Zxid,
    pub payload: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Looking,
    Following,
    Leading,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    Election,
    Discovery,
    Synchronization,
    Broadcast,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SyncMode {
    Diff,
    Trunc,
    Snap,
}

/// Election credentials: (currentEpoch, last zxid, id).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Credentials {
    pub epoch: i64,
    pub last: Zxid,
    pub id: NodeId,
}

/// Wire messages. `Vote` travels on the election port, everything else on
/// the quorum port.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Msg {
    Vote(Credentials),
    FollowerInfo { accepted_epoch: i64 },
    LeaderInfo { epoch: i64 },
    AckEpoch { current_epoch: i64, log: Vec<Zxid> },
    NewLeader { epoch: i64, mode: SyncMode, keep: usize, txns: Vec<Txn> },
    AckNewLeader { len: usize },
    UpToDate { commit: usize },
    AckUpToDate { commit: usize },
    Proposal(Txn),
    Ack(Zxid),
    Commit(Zxid),
}

impl Msg {
    pub fn kind(&self) -> MsgKind {
        match self {
            Msg::Vote(_) => MsgKind::Vote,
            Msg::FollowerInfo { .. } => MsgKind::FollowerInfo,
            Msg::LeaderInfo { .. } => MsgKind::LeaderInfo,
            Msg::AckEpoch { .. } => MsgKind::AckEpoch,
            Msg::NewLeader { .. } => MsgKind::NewLeader,
            Msg::AckNewLeader { .. } => MsgKind::AckNewLeader,
            Msg::UpToDate { .. } => MsgKind::UpToDate,
            Msg::AckUpToDate { .. } => MsgKind::AckUpToDate,
            Msg::Proposal(_) => MsgKind::Proposal,
            Msg::Ack(_) => MsgKind::Ack,
            Msg::Commit(_) => MsgKind::Commit,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MsgKind {
    Vote,
    FollowerInfo,
    LeaderInfo,
    AckEpoch,
    NewLeader,
    AckNewLeader,
    UpToDate,
    AckUpToDate,
    Proposal,
    Ack,
    Commit,
}

impl MsgKind {
    /// Election and discovery traffic.
    pub fn is_election(self) -> bool {
        matches!(
            self,
            MsgKind::Vote | MsgKind::FollowerInfo | MsgKind::LeaderInfo | MsgKind::AckEpoch
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    /// Next step of the message handler on a partially handled packet.
    Handler,
    SyncProcessor,
    CommitProcessor,
    /// Start a fresh round of vote announcements.
    Announce,
    /// Settle on a leader from the votes heard.
    Decide,
    ProposeEpoch,
    FinishDiscovery,
    /// Leader's learner handler sends the NEWLEADER packet to a follower.
    SyncLearner(NodeId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SimEvent {
    Deliver { from: NodeId, to: NodeId },
    DeliverVote { from: NodeId, to: NodeId },
    RunTask { node: NodeId, task: Task },
    Crash { node: NodeId },
    Restart { node: NodeId },
    Partition { a: NodeId, b: NodeId },
    Heal { a: NodeId, b: NodeId },
    ClientRead { node: NodeId },
    ClientPropose { node: NodeId },
}

impl fmt::Display for SimEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimEvent::Deliver { from, to } => write!(f, "deliver {from}->{to}"),
            SimEvent::DeliverVote { from, to } => write!(f, "deliver-vote {from}->{to}"),
            SimEvent::RunTask { node, task } => write!(f, "run {task:?}@{node}"),
            SimEvent::Crash { node } => write!(f, "crash {node}"),
            SimEvent::Restart { node } => write!(f, "restart {node}"),
            SimEvent::Partition { a, b } => write!(f, "partition {a}|{b}"),
            SimEvent::Heal { a, b } => write!(f, "heal {a}|{b}"),
            SimEvent::ClientRead { node } => write!(f, "client-read {node}"),
            SimEvent::ClientPropose { node } => write!(f, "client-propose {node}"),
        }
    }
}
