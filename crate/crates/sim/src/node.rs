use crate::types::*;
use mgcheck_zab::BugFlags;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};

/// What survives a crash.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disk {
    pub current_epoch: i64,
    pub accepted_epoch: i64,
    pub log: Vec<Txn>,
}

impl Disk {
    pub fn last_zxid(&self) -> Zxid {
        self.log.last().map(|t| t.zxid).unwrap_or_default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LearnerPhase {
    Connected,
    NewLeaderSent,
    Synced,
    UpToDateAcked,
}

/// Leader-side record of one follower (the learner handler).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Learner {
    pub phase: LearnerPhase,
    /// Highest log index the follower acknowledged.
    pub acked: usize,
    /// Follower log as reported in ACKEPOCH.
    pub follower_log: Vec<Zxid>,
}

/// Follower-side progress on the NEWLEADER packet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NlProgress {
    pub epoch: i64,
    pub epoch_done: bool,
    /// Entries handed to the log queue (or nothing to log).
    pub logged: bool,
    pub acked: bool,
    /// The epoch step waits for the log queue to drain.
    pub wait: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HandlerStep {
    Epoch,
    Enqueue,
    Ack,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElectionState {
    pub heard: BTreeMap<NodeId, Credentials>,
    pub decided: Option<NodeId>,
}

/// Leader-elect bookkeeping before the epoch is settled.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discovery {
    pub connecting: BTreeMap<NodeId, i64>,
    pub proposed: Option<i64>,
    pub acks: BTreeMap<NodeId, Vec<Zxid>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimNode {
    pub id: NodeId,
    pub alive: bool,
    pub disk: Disk,
    pub role: Role,
    pub phase: Phase,
    pub leader: Option<NodeId>,
    pub last_committed: usize,
    /// Commit point handed to the commit processor.
    pub commit_target: usize,
    /// Requests waiting for the sync processor to log them.
    pub pending: VecDeque<Txn>,
    /// Packets received during sync, not yet handed to the log queue.
    pub stash: Vec<Txn>,
    pub nl: Option<NlProgress>,
    pub learners: BTreeMap<NodeId, Learner>,
    pub election: ElectionState,
    pub discovery: Option<Discovery>,
}

impl SimNode {
    pub fn new(id: NodeId) -> SimNode {
        SimNode {
            id,
            alive: true,
            disk: Disk::default(),
            role: Role::Looking,
            phase: Phase::Election,
            leader: None,
            last_committed: 0,
            commit_target: 0,
            pending: VecDeque::new(),
            stash: Vec::new(),
            nl: None,
            learners: BTreeMap::new(),
            election: ElectionState::default(),
            discovery: None,
        }
    }

    pub fn credentials(&self) -> Credentials {
        Credentials {
            epoch: self.disk.current_epoch,
            last: self.disk.last_zxid(),
            id: self.id,
        }
    }

    pub fn follows(&self, l: NodeId) -> bool {
        self.role == Role::Following && self.leader == Some(l)
    }

    /// Back to election. The request queue survives only with ZK-4712.
    pub fn reset_session(&mut self, keep_pending: bool) {
        self.role = Role::Looking;
        self.phase = Phase::Election;
        self.leader = None;
        self.learners.clear();
        self.stash.clear();
        self.nl = None;
        self.commit_target = 0;
        if !keep_pending {
            self.pending.clear();
        }
        self.election = ElectionState::default();
        self.discovery = None;
    }

    /// Loses everything except the disk.
    pub fn wipe_memory(&mut self) {
        self.reset_session(false);
        self.last_committed = 0;
    }

    fn logged_eff(&self, nl: &NlProgress) -> bool {
        nl.logged && (!nl.wait || self.pending.is_empty())
    }

    pub fn next_handler_step(&self, flags: BugFlags) -> Option<HandlerStep> {
        let nl = self.nl.as_ref()?;
        let logged = self.logged_eff(nl);
        let order = if flags.zk4646 {
            [HandlerStep::Epoch, HandlerStep::Ack, HandlerStep::Enqueue]
        } else {
            [HandlerStep::Epoch, HandlerStep::Enqueue, HandlerStep::Ack]
        };
        order.into_iter().find(|s| match s {
            HandlerStep::Epoch => !nl.epoch_done && logged,
            HandlerStep::Enqueue => !nl.logged,
            HandlerStep::Ack => nl.epoch_done && !nl.acked && (logged || flags.zk4646),
        })
    }

    /// No NEWLEADER packet is half processed.
    pub fn handler_idle(&self) -> bool {
        self.nl.map_or(true, |nl| nl.epoch_done && nl.logged && nl.acked)
    }

    pub fn commit_point(&self) -> usize {
        self.commit_target.min(self.disk.log.len())
    }
}
