use crate::node::*;
use crate::types::*;
use mgcheck_zab::BugFlags;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("no node {0}")]
    NoSuchNode(NodeId),
    #[error("event `{event}` is not applicable: {reason}")]
    Inapplicable { event: SimEvent, reason: String },
    #[error("bad scenario: {0}")]
    BadScenario(String),
}

/// An exception inside a node's code, e.g. the handler thread dying.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImplFault {
    pub node: NodeId,
    pub description: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StepOutcome {
    pub fault: Option<ImplFault>,
    /// Data returned by a client read.
    pub read: Option<Vec<Txn>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub n: usize,
    pub flags: BugFlags,
    /// Followers acknowledge UPTODATE.
    pub uptodate_ack: bool,
    pub nodes: Vec<SimNode>,
    quorum_net: Vec<VecDeque<Msg>>,
    election_net: Vec<VecDeque<Msg>>,
    pub partitions: BTreeSet<(NodeId, NodeId)>,
    /// Client-visible commit order, as reported by leaders.
    pub client_committed: Vec<Txn>,
    /// Every request a leader accepted.
    pub client_proposed: Vec<Txn>,
    pub events_applied: u64,
}

fn pair(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    (a.min(b), a.max(b))
}

impl Cluster {
    pub fn new(n: usize, flags: BugFlags) -> Cluster {
        Cluster {
            n,
            flags,
            uptodate_ack: true,
            nodes: (0..n).map(SimNode::new).collect(),
            quorum_net: vec![VecDeque::new(); n * n],
            election_net: vec![VecDeque::new(); n * n],
            partitions: BTreeSet::new(),
            client_committed: Vec::new(),
            client_proposed: Vec::new(),
            events_applied: 0,
        }
    }

    pub fn with_uptodate_ack(mut self, on: bool) -> Cluster {
        self.uptodate_ack = on;
        self
    }

    pub fn quorum(&self) -> usize {
        self.n / 2 + 1
    }

    pub fn node(&self, i: NodeId) -> &SimNode {
        &self.nodes[i]
    }

    fn ix(&self, from: NodeId, to: NodeId) -> usize {
        from * self.n + to
    }

    pub fn channel(&self, from: NodeId, to: NodeId) -> &VecDeque<Msg> {
        &self.quorum_net[self.ix(from, to)]
    }

    pub fn vote_channel(&self, from: NodeId, to: NodeId) -> &VecDeque<Msg> {
        &self.election_net[self.ix(from, to)]
    }

    pub fn partitioned(&self, a: NodeId, b: NodeId) -> bool {
        self.partitions.contains(&pair(a, b))
    }

    // ---- applicability ----

    fn node_ok(&self, i: NodeId) -> Result<(), SimError> {
        if i < self.n {
            Ok(())
        } else {
            Err(SimError::NoSuchNode(i))
        }
    }

    pub fn check(&self, e: &SimEvent) -> Result<(), SimError> {
        let no = |reason: &str| {
            Err(SimError::Inapplicable {
                event: *e,
                reason: reason.to_string(),
            })
        };
        match *e {
            SimEvent::Deliver { from, to } | SimEvent::DeliverVote { from, to } => {
                self.node_ok(from)?;
                self.node_ok(to)?;
                let ch = if matches!(e, SimEvent::Deliver { .. }) {
                    self.channel(from, to)
                } else {
                    self.vote_channel(from, to)
                };
                if ch.is_empty() {
                    return no("channel empty");
                }
                if !self.nodes[to].alive {
                    return no("receiver down");
                }
                let r = &self.nodes[to];
                if matches!(e, SimEvent::Deliver { .. }) && r.follows(from) && !r.handler_idle() {
                    return no("handler busy");
                }
                Ok(())
            }
            SimEvent::RunTask { node, task } => {
                self.node_ok(node)?;
                if !self.nodes[node].alive {
                    return no("node down");
                }
                if !self.task_ready(node, task) {
                    return no("task has no work");
                }
                Ok(())
            }
            SimEvent::Crash { node } => {
                self.node_ok(node)?;
                if self.nodes[node].alive { Ok(()) } else { no("already down") }
            }
            SimEvent::Restart { node } => {
                self.node_ok(node)?;
                if self.nodes[node].alive { no("already up") } else { Ok(()) }
            }
            SimEvent::Partition { a, b } => {
                self.node_ok(a)?;
                self.node_ok(b)?;
                if a == b {
                    return no("self partition");
                }
                if self.partitioned(a, b) { no("already partitioned") } else { Ok(()) }
            }
            SimEvent::Heal { a, b } => {
                self.node_ok(a)?;
                self.node_ok(b)?;
                if a == b { no("self partition") } else { Ok(()) }
            }
            SimEvent::ClientRead { node } => {
                self.node_ok(node)?;
                if self.nodes[node].alive { Ok(()) } else { no("node down") }
            }
            SimEvent::ClientPropose { node } => {
                self.node_ok(node)?;
                let x = &self.nodes[node];
                if x.alive && x.role == Role::Leading && x.phase == Phase::Broadcast {
                    Ok(())
                } else {
                    no("not an established leader")
                }
            }
        }
    }

    pub fn is_applicable(&self, e: &SimEvent) -> bool {
        self.check(e).is_ok()
    }

    fn decide_target(&self, i: NodeId) -> Option<NodeId> {
        let x = &self.nodes[i];
        if x.election.heard.is_empty() {
            return None;
        }
        let best = x
            .election
            .heard
            .values()
            .copied()
            .chain([x.credentials()])
            .max()?;
        if best.id != i {
            return Some(best.id);
        }
        (x.election.heard.len() + 1 >= self.quorum()).then_some(i)
    }

    fn leader_elect(&self, i: NodeId) -> Option<&Discovery> {
        let x = &self.nodes[i];
        if x.role == Role::Looking && x.election.decided == Some(i) {
            x.discovery.as_ref()
        } else {
            None
        }
    }

    fn task_ready(&self, i: NodeId, task: Task) -> bool {
        let x = &self.nodes[i];
        let q = self.quorum();
        match task {
            Task::Handler => x.next_handler_step(self.flags).is_some(),
            Task::SyncProcessor => !x.pending.is_empty(),
            Task::CommitProcessor => x.last_committed < x.commit_point(),
            Task::Announce => x.role == Role::Looking,
            Task::Decide => {
                x.role == Role::Looking && x.election.decided.is_none() && self.decide_target(i).is_some()
            }
            Task::ProposeEpoch => self
                .leader_elect(i)
                .is_some_and(|d| d.proposed.is_none() && d.connecting.len() + 1 >= q),
            Task::FinishDiscovery => self
                .leader_elect(i)
                .is_some_and(|d| d.proposed.is_some() && d.acks.len() + 1 >= q),
            Task::SyncLearner(j) => {
                x.role == Role::Leading
                    && x.phase != Phase::Election
                    && x.learners.get(&j).is_some_and(|l| l.phase == LearnerPhase::Connected)
            }
        }
    }

    pub fn runnable_tasks(&self, i: NodeId) -> Vec<Task> {
        if i >= self.n || !self.nodes[i].alive {
            return Vec::new();
        }
        let mut all = vec![
            Task::Handler,
            Task::SyncProcessor,
            Task::CommitProcessor,
            Task::Announce,
            Task::Decide,
            Task::ProposeEpoch,
            Task::FinishDiscovery,
        ];
        all.extend((0..self.n).filter(|&j| j != i).map(Task::SyncLearner));
        all.into_iter().filter(|&t| self.task_ready(i, t)).collect()
    }

    /// Every applicable event, in a fixed order.
    pub fn enabled_events(&self) -> Vec<SimEvent> {
        let mut out = Vec::new();
        for from in 0..self.n {
            for to in 0..self.n {
                out.push(SimEvent::Deliver { from, to });
                out.push(SimEvent::DeliverVote { from, to });
            }
        }
        for node in 0..self.n {
            for task in self.runnable_tasks(node) {
                out.push(SimEvent::RunTask { node, task });
            }
            out.push(SimEvent::Crash { node });
            out.push(SimEvent::Restart { node });
            out.push(SimEvent::ClientRead { node });
            out.push(SimEvent::ClientPropose { node });
        }
        for a in 0..self.n {
            for b in a + 1..self.n {
                out.push(SimEvent::Partition { a, b });
                if self.partitioned(a, b) {
                    out.push(SimEvent::Heal { a, b });
                }
            }
        }
        out.retain(|e| self.is_applicable(e));
        out
    }

    // ---- stepping ----

    /// Applies one event. On error the cluster is unchanged.
    pub fn step(&mut self, e: SimEvent) -> Result<StepOutcome, SimError> {
        self.check(&e)?;
        self.events_applied += 1;
        let mut out = StepOutcome::default();
        match e {
            SimEvent::Deliver { from, to } => {
                let ix = self.ix(from, to);
                let m = self.quorum_net[ix].pop_front().expect("checked");
                out.fault = self.receive(from, to, m);
            }
            SimEvent::DeliverVote { from, to } => {
                let ix = self.ix(from, to);
                if let Some(Msg::Vote(c)) = self.election_net[ix].pop_front() {
                    if self.nodes[to].role == Role::Looking {
                        self.nodes[to].election.heard.insert(from, c);
                    }
                }
            }
            SimEvent::RunTask { node, task } => self.run_task(node, task),
            SimEvent::Crash { node } => self.crash(node),
            SimEvent::Restart { node } => self.nodes[node].alive = true,
            SimEvent::Partition { a, b } => {
                self.partitions.insert(pair(a, b));
                self.clear_link(a, b);
                self.link_lost(a, b);
            }
            SimEvent::Heal { a, b } => {
                self.partitions.remove(&pair(a, b));
            }
            SimEvent::ClientRead { node } => out.read = Some(self.client_read(node)),
            SimEvent::ClientPropose { node } => self.client_propose(node),
        }
        Ok(out)
    }

    fn send(&mut self, from: NodeId, to: NodeId, m: Msg) {
        if from == to || !self.nodes[to].alive || self.partitioned(from, to) {
            return;
        }
        let ix = self.ix(from, to);
        self.quorum_net[ix].push_back(m);
    }

    fn clear_quorum(&mut self, a: NodeId, b: NodeId) {
        let (x, y) = (self.ix(a, b), self.ix(b, a));
        self.quorum_net[x].clear();
        self.quorum_net[y].clear();
    }

    fn clear_link(&mut self, a: NodeId, b: NodeId) {
        self.clear_quorum(a, b);
        let (x, y) = (self.ix(a, b), self.ix(b, a));
        self.election_net[x].clear();
        self.election_net[y].clear();
    }

    fn crash(&mut self, i: NodeId) {
        self.shutdown(i);
        self.nodes[i].wipe_memory();
        for k in 0..self.n {
            self.clear_link(i, k);
        }
        self.nodes[i].alive = false;
    }

    fn client_read(&self, i: NodeId) -> Vec<Txn> {
        let x = &self.nodes[i];
        if self.flags.zk4646 {
            // Served straight from the log, committed or not.
            x.disk.log.clone()
        } else {
            x.disk.log[..x.last_committed.min(x.disk.log.len())].to_vec()
        }
    }

    fn client_propose(&mut self, l: NodeId) {
        let x = &self.nodes[l];
        let epoch = x.disk.current_epoch;
        let counter = match x.disk.log.last() {
            Some(t) if t.zxid.epoch == epoch => t.zxid.counter + 1,
            _ => 1,
        };
        let t = Txn {
            zxid: Zxid { epoch, counter },
            payload: self.client_proposed.len() as i64 + 1,
        };
        self.nodes[l].disk.log.push(t);
        self.client_proposed.push(t);
        let targets: Vec<NodeId> = self.nodes[l]
            .learners
            .iter()
            .filter(|(_, r)| r.phase >= LearnerPhase::NewLeaderSent)
            .map(|(&m, _)| m)
            .collect();
        for m in targets {
            self.send(l, m, Msg::Proposal(t));
        }
    }

    // ---- session teardown ----

    fn forget_learner(&mut self, l: NodeId, j: NodeId) {
        self.nodes[l].learners.remove(&j);
        self.clear_quorum(l, j);
    }

    fn reset_looking(&mut self, j: NodeId) {
        let keep = self.flags.zk4712;
        self.nodes[j].reset_session(keep);
    }

    fn shutdown(&mut self, j: NodeId) {
        match self.nodes[j].role {
            Role::Leading => {
                for m in (0..self.n).filter(|&m| m != j) {
                    if self.nodes[j].learners.contains_key(&m) {
                        self.forget_learner(j, m);
                    }
                    if self.nodes[m].follows(j) {
                        self.reset_looking(m);
                    }
                }
            }
            Role::Following => {
                if let Some(l) = self.nodes[j].leader {
                    self.clear_quorum(j, l);
                    if self.nodes[l].learners.contains_key(&j) {
                        self.forget_learner(l, j);
                        self.reset_looking(j);
                        self.check_quorum(l);
                        return;
                    }
                }
            }
            Role::Looking => {}
        }
        self.reset_looking(j);
    }

    fn check_quorum(&mut self, l: NodeId) {
        let x = &self.nodes[l];
        if x.role != Role::Leading {
            return;
        }
        let need = if x.phase == Phase::Broadcast {
            LearnerPhase::Synced
        } else {
            LearnerPhase::Connected
        };
        let support = 1 + x.learners.values().filter(|r| r.phase >= need).count();
        if support < self.quorum() {
            self.shutdown(l);
        }
    }

    fn link_lost(&mut self, a: NodeId, b: NodeId) {
        for (x, y) in [(a, b), (b, a)] {
            if self.nodes[y].follows(x) {
                self.shutdown(y);
            } else if self.nodes[x].role == Role::Leading && self.nodes[x].learners.contains_key(&y) {
                self.forget_learner(x, y);
                self.check_quorum(x);
            }
        }
    }

    fn try_commit(&mut self, l: NodeId) {
        let q = self.quorum();
        let x = &self.nodes[l];
        let old = x.last_committed;
        let mut k = x.disk.log.len();
        while k > old {
            let acks = 1 + x
                .learners
                .values()
                .filter(|r| r.phase >= LearnerPhase::Synced && r.acked >= k)
                .count();
            if acks >= q {
                break;
            }
            k -= 1;
        }
        if k <= old {
            return;
        }
        let entries = x.disk.log[old..k].to_vec();
        let targets: Vec<NodeId> = x
            .learners
            .iter()
            .filter(|(_, r)| r.phase >= LearnerPhase::NewLeaderSent)
            .map(|(&m, _)| m)
            .collect();
        for t in &entries {
            for &m in &targets {
                self.send(l, m, Msg::Commit(t.zxid));
            }
        }
        self.record_commits(&entries);
        self.nodes[l].last_committed = k;
    }

    fn record_commits(&mut self, entries: &[Txn]) {
        for t in entries {
            if !self.client_committed.contains(t) {
                self.client_committed.push(*t);
            }
        }
    }

    // ---- tasks ----

    fn run_task(&mut self, i: NodeId, task: Task) {
        match task {
            Task::Handler => self.handler_step(i),
            Task::SyncProcessor => self.sync_processor(i),
            Task::CommitProcessor => {
                let x = &mut self.nodes[i];
                x.last_committed = x.commit_point();
            }
            Task::Announce => {
                let x = &mut self.nodes[i];
                x.election = ElectionState::default();
                x.discovery = None;
                let c = x.credentials();
                for j in (0..self.n).filter(|&j| j != i) {
                    if self.nodes[j].alive && !self.partitioned(i, j) {
                        let ix = self.ix(i, j);
                        self.election_net[ix].push_back(Msg::Vote(c));
                    }
                }
            }
            Task::Decide => {
                let l = self.decide_target(i).expect("checked");
                let x = &mut self.nodes[i];
                x.election.decided = Some(l);
                if l == i {
                    x.discovery = Some(Discovery::default());
                } else {
                    let acc = x.disk.accepted_epoch;
                    self.send(i, l, Msg::FollowerInfo { accepted_epoch: acc });
                }
            }
            Task::ProposeEpoch => {
                let x = &mut self.nodes[i];
                let d = x.discovery.as_mut().expect("checked");
                let e = d
                    .connecting
                    .values()
                    .copied()
                    .chain([x.disk.accepted_epoch])
                    .max()
                    .unwrap_or(0)
                    + 1;
                d.proposed = Some(e);
                x.disk.accepted_epoch = e;
                let to: Vec<NodeId> = d.connecting.keys().copied().collect();
                for j in to {
                    self.send(i, j, Msg::LeaderInfo { epoch: e });
                }
            }
            Task::FinishDiscovery => {
                let x = &mut self.nodes[i];
                let d = x.discovery.take().expect("checked");
                x.disk.current_epoch = d.proposed.expect("checked");
                x.role = Role::Leading;
                x.phase = Phase::Synchronization;
                x.leader = Some(i);
                x.learners = d
                    .acks
                    .into_iter()
                    .map(|(j, log)| {
                        let r = Learner {
                            phase: LearnerPhase::Connected,
                            acked: 0,
                            follower_log: log,
                        };
                        (j, r)
                    })
                    .collect();
            }
            Task::SyncLearner(j) => self.sync_learner(i, j),
        }
    }

    /// Picks DIFF, TRUNC or SNAP for follower `j` from the log it reported.
    fn sync_learner(&mut self, l: NodeId, j: NodeId) {
        let x = &self.nodes[l];
        let r = &x.learners[&j];
        let mine = &x.disk.log;
        let common = mine
            .iter()
            .zip(&r.follower_log)
            .take_while(|(t, z)| t.zxid == **z)
            .count();
        let (mode, keep) = if common == r.follower_log.len() {
            (SyncMode::Diff, common)
        } else if common >= x.last_committed {
            (SyncMode::Trunc, common)
        } else {
            (SyncMode::Snap, 0)
        };
        let m = Msg::NewLeader {
            epoch: x.disk.current_epoch,
            mode,
            keep,
            txns: mine[keep..].to_vec(),
        };
        self.send(l, j, m);
        if let Some(r) = self.nodes[l].learners.get_mut(&j) {
            r.phase = LearnerPhase::NewLeaderSent;
        }
    }

    fn handler_step(&mut self, j: NodeId) {
        let step = self.nodes[j].next_handler_step(self.flags).expect("checked");
        let x = &mut self.nodes[j];
        let nl = x.nl.as_mut().expect("checked");
        match step {
            HandlerStep::Epoch => {
                x.disk.current_epoch = nl.epoch;
                nl.epoch_done = true;
            }
            HandlerStep::Enqueue => {
                x.pending.extend(x.stash.drain(..));
                nl.logged = true;
            }
            HandlerStep::Ack => {
                nl.acked = true;
                let len = x.disk.log.len() + x.stash.len() + x.pending.len();
                if let Some(l) = x.leader {
                    self.send(j, l, Msg::AckNewLeader { len });
                }
            }
        }
    }

    fn sync_processor(&mut self, j: NodeId) {
        let early = self.flags.zk4685;
        let x = &mut self.nodes[j];
        let t = x.pending.pop_front().expect("checked");
        x.disk.log.push(t);
        let phase_ok = x.phase == Phase::Broadcast || (early && x.phase == Phase::Synchronization);
        if x.role == Role::Following && phase_ok {
            if let Some(l) = x.leader {
                self.send(j, l, Msg::Ack(t.zxid));
            }
        }
    }

    // ---- message handling ----

    fn receive(&mut self, from: NodeId, to: NodeId, m: Msg) -> Option<ImplFault> {
        match m {
            Msg::Vote(_) => {}
            Msg::FollowerInfo { accepted_epoch } => {
                let x = &mut self.nodes[to];
                if x.role == Role::Looking && x.election.decided == Some(to) {
                    if let Some(d) = x.discovery.as_mut() {
                        d.connecting.insert(from, accepted_epoch);
                        if let Some(e) = d.proposed {
                            self.send(to, from, Msg::LeaderInfo { epoch: e });
                        }
                    }
                }
            }
            Msg::LeaderInfo { epoch } => {
                let x = &mut self.nodes[to];
                if x.role == Role::Looking && x.election.decided == Some(from) && epoch >= x.disk.accepted_epoch {
                    x.disk.accepted_epoch = epoch;
                    x.role = Role::Following;
                    x.phase = Phase::Synchronization;
                    x.leader = Some(from);
                    let reply = Msg::AckEpoch {
                        current_epoch: x.disk.current_epoch,
                        log: x.disk.log.iter().map(|t| t.zxid).collect(),
                    };
                    self.send(to, from, reply);
                }
            }
            Msg::AckEpoch { log, .. } => {
                if let Some(d) = self.nodes[to].discovery.as_mut() {
                    if d.proposed.is_some() && d.connecting.contains_key(&from) {
                        d.acks.insert(from, log);
                    }
                }
            }
            Msg::NewLeader { epoch, keep, txns, .. } => self.on_newleader(from, to, epoch, keep, txns),
            Msg::AckNewLeader { len } => self.on_ack_newleader(to, from, len),
            Msg::UpToDate { commit } => self.on_uptodate(from, to, commit),
            Msg::AckUpToDate { .. } => {
                if self.nodes[to].role == Role::Leading {
                    if let Some(r) = self.nodes[to].learners.get_mut(&from) {
                        if r.phase == LearnerPhase::Synced {
                            r.phase = LearnerPhase::UpToDateAcked;
                        }
                    }
                }
            }
            Msg::Proposal(t) => {
                let x = &mut self.nodes[to];
                if x.follows(from) {
                    match x.phase {
                        Phase::Synchronization if x.nl.is_some() => x.stash.push(t),
                        Phase::Broadcast => x.pending.push_back(t),
                        _ => {}
                    }
                }
            }
            Msg::Ack(z) => self.on_ack(to, from, z),
            Msg::Commit(z) => return self.on_commit(from, to, z),
        }
        None
    }

    fn on_newleader(&mut self, l: NodeId, j: NodeId, epoch: i64, keep: usize, txns: Vec<Txn>) {
        let flags = self.flags;
        let x = &mut self.nodes[j];
        if !x.follows(l) || x.phase != Phase::Synchronization || x.nl.is_some() {
            return;
        }
        x.disk.log.truncate(keep);
        let wait = !flags.async_sync_logging();
        if flags.epoch_first() {
            // Epoch persisted before the log is touched.
            x.disk.current_epoch = epoch;
            let logged = txns.is_empty();
            x.stash = txns;
            x.nl = Some(NlProgress {
                epoch,
                epoch_done: true,
                logged,
                acked: false,
                wait,
            });
        } else {
            x.pending.extend(txns);
            x.nl = Some(NlProgress {
                epoch,
                epoch_done: false,
                logged: true,
                acked: false,
                wait,
            });
        }
    }

    fn on_ack_newleader(&mut self, l: NodeId, j: NodeId, len: usize) {
        let q = self.quorum();
        let x = &mut self.nodes[l];
        if x.role != Role::Leading {
            return;
        }
        let log_len = x.disk.log.len();
        match x.learners.get_mut(&j) {
            Some(r) if r.phase == LearnerPhase::NewLeaderSent => {
                r.phase = LearnerPhase::Synced;
                r.acked = len.min(log_len);
            }
            _ => return,
        }
        if x.phase == Phase::Broadcast {
            let c = x.last_committed;
            self.send(l, j, Msg::UpToDate { commit: c });
            self.try_commit(l);
            return;
        }
        let synced: Vec<NodeId> = x
            .learners
            .iter()
            .filter(|(_, r)| r.phase >= LearnerPhase::Synced)
            .map(|(&m, _)| m)
            .collect();
        if synced.len() + 1 >= q {
            x.phase = Phase::Broadcast;
            x.last_committed = log_len;
            let log = x.disk.log.clone();
            self.record_commits(&log);
            for m in synced {
                self.send(l, m, Msg::UpToDate { commit: log_len });
            }
        }
    }

    fn on_uptodate(&mut self, l: NodeId, j: NodeId, c: usize) {
        let flags = self.flags;
        let ack_uptodate = self.uptodate_ack;
        let x = &self.nodes[j];
        if !x.follows(l) || x.phase != Phase::Synchronization || x.nl.is_none() {
            return;
        }
        let late = flags.zk3023 && ack_uptodate;
        if late {
            self.send(j, l, Msg::AckUpToDate { commit: c });
        }
        let x = &mut self.nodes[j];
        let stash = std::mem::take(&mut x.stash);
        let mut ack = None;
        if flags.async_sync_logging() {
            x.pending.extend(stash);
        } else {
            ack = stash.last().map(|t| t.zxid);
            x.disk.log.extend(stash);
        }
        if !late {
            x.last_committed = x.last_committed.max(c.min(x.disk.log.len()));
        }
        x.commit_target = x.commit_target.max(c);
        x.phase = Phase::Broadcast;
        if let Some(z) = ack {
            self.send(j, l, Msg::Ack(z));
        }
        if ack_uptodate && !late {
            self.send(j, l, Msg::AckUpToDate { commit: c });
        }
    }

    fn on_ack(&mut self, l: NodeId, j: NodeId, z: Zxid) {
        if self.nodes[l].role != Role::Leading {
            return;
        }
        let synced = self.nodes[l]
            .learners
            .get(&j)
            .is_some_and(|r| r.phase >= LearnerPhase::Synced);
        if !synced {
            // A proposal ACK before NEWLEADER was acknowledged: drop the follower.
            self.link_lost(l, j);
            return;
        }
        let x = &mut self.nodes[l];
        if let Some(p) = x.disk.log.iter().position(|t| t.zxid == z) {
            let r = x.learners.get_mut(&j).expect("synced");
            r.acked = r.acked.max(p + 1);
            self.try_commit(l);
        }
    }

    fn on_commit(&mut self, l: NodeId, j: NodeId, z: Zxid) -> Option<ImplFault> {
        let x = &mut self.nodes[j];
        if !x.follows(l) {
            return None;
        }
        match x.phase {
            Phase::Synchronization if x.nl.is_some() => {
                if self.flags.zk4394 && x.stash.is_empty() {
                    self.shutdown(j);
                    return Some(ImplFault {
                        node: j,
                        description: format!(
                            "NullPointerException: COMMIT {z} during sync matches no pending proposal"
                        ),
                    });
                }
            }
            Phase::Broadcast => {
                let idx = x
                    .disk
                    .log
                    .iter()
                    .chain(x.pending.iter())
                    .position(|t| t.zxid == z);
                if let Some(p) = idx {
                    x.commit_target = x.commit_target.max(p + 1);
                }
            }
            _ => {}
        }
        None
    }
}
