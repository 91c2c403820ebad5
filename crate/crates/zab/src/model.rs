//! Vocabulary shared by the Zab modules: constants, variable declarations,
//! value helpers and the session teardown effects.

use mgcheck_core::value::{boolean, int, pair, seq, set, sym};
use mgcheck_core::{ActionDef, BuildContext, Value, VarClass, VarDecl, View, Writer};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

pub const LOOKING: &str = "LOOKING";
pub const FOLLOWING: &str = "FOLLOWING";
pub const LEADING: &str = "LEADING";

pub const ELECTION: &str = "ELECTION";
pub const DISCOVERY: &str = "DISCOVERY";
pub const SYNCHRONIZATION: &str = "SYNCHRONIZATION";
pub const BROADCAST: &str = "BROADCAST";

pub const INITIAL: &str = "INITIAL";
pub const RUNNING: &str = "RUNNING";

/// Message kinds on the leader/follower channels.
pub mod kind {
    pub const NEWLEADER: &str = "NEWLEADER";
    pub const ACKLD: &str = "ACKLD";
    pub const UPTODATE: &str = "UPTODATE";
    pub const ACKUPTODATE: &str = "ACKUPTODATE";
    pub const PROPOSAL: &str = "PROPOSAL";
    pub const ACK: &str = "ACK";
    pub const COMMIT: &str = "COMMIT";
}

/// NEWLEADER sync modes.
pub mod mode {
    pub const DIFF: &str = "DIFF";
    pub const TRUNC: &str = "TRUNC";
    pub const SNAP: &str = "SNAP";
}

/// `syncProgress` bits of a follower handling NEWLEADER.
pub const EPOCH_DONE: i64 = 1;
pub const LOGGED: i64 = 2;
pub const ACKED: i64 = 4;
pub const SYNC_DONE: i64 = EPOCH_DONE | LOGGED | ACKED;

/// Learner phases tracked by a leader in `learnerPhase`.
pub const LP_NONE: i64 = -1;
pub const LP_CONNECTED: i64 = 0;
pub const LP_NEWLEADER_SENT: i64 = 1;
pub const LP_SYNCED: i64 = 2;
pub const LP_UPTODATE_ACKED: i64 = 3;

/// Seeded implementation bugs. Each flag switches the model (and the
/// simulated implementation) to the buggy code path.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct BugFlags {
    pub zk3023: bool,
    pub zk4394: bool,
    pub zk4643: bool,
    pub zk4646: bool,
    pub zk4685: bool,
    pub zk4712: bool,
}

impl BugFlags {
    pub const NAMES: [&'static str; 6] = ["zk3023", "zk4394", "zk4643", "zk4646", "zk4685", "zk4712"];

    pub fn none() -> BugFlags {
        BugFlags::default()
    }

    /// Flags with exactly the named bug switched on.
    pub fn only(name: &str) -> Option<BugFlags> {
        let mut f = BugFlags::none();
        *f.slot(name)? = true;
        Some(f)
    }

    fn slot(&mut self, name: &str) -> Option<&mut bool> {
        Some(match name.to_ascii_lowercase().replace('-', "").as_str() {
            "zk3023" => &mut self.zk3023,
            "zk4394" => &mut self.zk4394,
            "zk4643" => &mut self.zk4643,
            "zk4646" => &mut self.zk4646,
            "zk4685" => &mut self.zk4685,
            "zk4712" => &mut self.zk4712,
            _ => return None,
        })
    }

    pub fn set(&mut self, name: &str, on: bool) -> bool {
        match self.slot(name) {
            Some(s) => {
                *s = on;
                true
            }
            None => false,
        }
    }

    pub fn enabled(&self) -> Vec<&'static str> {
        let vals = [self.zk3023, self.zk4394, self.zk4643, self.zk4646, self.zk4685, self.zk4712];
        Self::NAMES.iter().zip(vals).filter(|(_, on)| *on).map(|(n, _)| *n).collect()
    }

    /// Follower updates its epoch before logging the NEWLEADER history.
    pub fn epoch_first(&self) -> bool {
        self.zk4643 || self.zk4646
    }

    /// Follower logging goes through the asynchronous request queue during sync.
    pub fn async_sync_logging(&self) -> bool {
        self.zk4646 || self.zk4685
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct ZabOptions {
    pub flags: BugFlags,
    /// Followers acknowledge UPTODATE (fine-atomicity+concurrency only).
    pub uptodate_ack: bool,
}

impl Default for ZabOptions {
    fn default() -> Self {
        ZabOptions {
            flags: BugFlags::none(),
            uptodate_ack: true,
        }
    }
}

impl ZabOptions {
    pub fn with_flags(flags: BugFlags) -> ZabOptions {
        ZabOptions {
            flags,
            ..ZabOptions::default()
        }
    }
}

/// Per-module build parameters.
#[derive(Clone, Debug)]
pub struct Ctx {
    pub n: usize,
    pub quorum: usize,
    pub max_txns: usize,
    pub opts: ZabOptions,
    /// Session variables the module resets when a node leaves its role.
    pub teardown: Vec<(String, Value)>,
}

impl Ctx {
    pub fn new(b: &BuildContext, opts: ZabOptions) -> Ctx {
        Ctx {
            n: b.scale.nodes,
            quorum: b.scale.nodes / 2 + 1,
            max_txns: b.scale.max_txns,
            opts,
            teardown: Vec::new(),
        }
    }

    pub fn flags(&self) -> BugFlags {
        self.opts.flags
    }

    pub fn with_teardown(mut self, decls: &[VarDecl]) -> Ctx {
        let skip = ["leaderAddr", "learnerPhase", "ackIndex"];
        self.teardown = decls
            .iter()
            .filter(|d| d.class == VarClass::Session && !skip.contains(&d.name.as_str()))
            .map(|d| (d.name.clone(), d.init.clone()))
            .collect();
        self
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> + Clone {
        0..self.n
    }

    pub fn node_domain(&self) -> Vec<Value> {
        self.nodes().map(|i| int(i as i64)).collect()
    }
}

pub fn per_node(n: usize, v: Value) -> Value {
    seq(std::iter::repeat(v).take(n))
}

pub fn matrix(n: usize, v: Value) -> Value {
    per_node(n, per_node(n, v))
}

/// Variables every Zab module declares.
pub fn common_vars(n: usize) -> Vec<VarDecl> {
    use VarClass::*;
    vec![
        VarDecl::new("state", per_node(n, sym(LOOKING)), Volatile),
        VarDecl::new("zabState", per_node(n, sym(ELECTION)), Volatile),
        VarDecl::new("currentEpoch", per_node(n, int(0)), Durable),
        VarDecl::new("acceptedEpoch", per_node(n, int(0)), Durable),
        VarDecl::new("history", per_node(n, Value::empty_seq()), Durable),
        VarDecl::new("lastCommitted", per_node(n, int(0)), Volatile),
        VarDecl::new("alive", per_node(n, boolean(true)), Durable),
        VarDecl::new("leaderAddr", per_node(n, int(-1)), Session),
        VarDecl::new("learnerPhase", matrix(n, int(LP_NONE)), Session),
        VarDecl::new("ackIndex", matrix(n, int(0)), Session),
        VarDecl::new("packetsSync", per_node(n, Value::empty_seq()), Session),
        VarDecl::new("syncProgress", per_node(n, int(0)), Session),
        VarDecl::new("msgs", matrix(n, Value::empty_seq()), Shared),
        VarDecl::new("partitioned", Value::empty_set(), Shared),
        VarDecl::new("committed", Value::empty_seq(), Shared),
        VarDecl::new("proposed", Value::empty_seq(), Shared),
    ]
}

pub fn queue_vars(n: usize, flags: BugFlags) -> Vec<VarDecl> {
    // With ZK-4712 the request queue outlives the follower's session.
    let class = if flags.zk4712 { VarClass::Volatile } else { VarClass::Session };
    vec![
        VarDecl::new("queuedRequests", per_node(n, Value::empty_seq()), class),
        VarDecl::new("commitTarget", per_node(n, int(0)), VarClass::Session),
    ]
}

// ---- reading ----

pub fn node(i: usize) -> Value {
    int(i as i64)
}

pub fn at<'a>(v: &View<'a>, var: &str, i: usize) -> &'a Value {
    v.get(var).at(i)
}

pub fn int_at(v: &View, var: &str, i: usize) -> i64 {
    v.get(var).at(i).as_int()
}

pub fn is_at(v: &View, var: &str, i: usize, s: &str) -> bool {
    v.get(var).at(i).is_sym(s)
}

pub fn alive(v: &View, i: usize) -> bool {
    v.get("alive").at(i).as_bool()
}

pub fn history<'a>(v: &View<'a>, i: usize) -> &'a [Value] {
    v.get("history").at(i).as_seq()
}

pub fn lp(v: &View, l: usize, j: usize) -> i64 {
    v.get("learnerPhase").at(l).at(j).as_int()
}

pub fn txn(epoch: i64, counter: i64, payload: i64) -> Value {
    pair(pair(int(epoch), int(counter)), int(payload))
}

pub fn zxid(t: &Value) -> &Value {
    t.as_pair().0
}

pub fn zxid_epoch(t: &Value) -> i64 {
    zxid(t).as_pair().0.as_int()
}

pub fn zero_zxid() -> Value {
    pair(int(0), int(0))
}

pub fn last_zxid(h: &[Value]) -> Value {
    h.last().map_or_else(zero_zxid, |t| zxid(t).clone())
}

/// 1-based position of the entry with this zxid.
pub fn index_of(h: &[Value], z: &Value) -> Option<usize> {
    h.iter().position(|t| zxid(t) == z).map(|p| p + 1)
}

pub fn edge(a: usize, b: usize) -> Value {
    pair(node(a.min(b)), node(a.max(b)))
}

pub fn connected(v: &View, a: usize, b: usize) -> bool {
    !v.get("partitioned").contains(&edge(a, b))
}

pub fn channel<'a>(v: &View<'a>, from: usize, to: usize) -> &'a [Value] {
    v.get("msgs").at(from).at(to).as_seq()
}

pub fn head<'a>(v: &View<'a>, from: usize, to: usize) -> Option<&'a Value> {
    channel(v, from, to).first()
}

pub fn head_is(v: &View, from: usize, to: usize, k: &str) -> bool {
    head(v, from, to).is_some_and(|m| is_kind(m, k))
}

pub fn msg(k: &str, fields: impl IntoIterator<Item = Value>) -> Value {
    seq(std::iter::once(sym(k)).chain(fields))
}

pub fn is_kind(m: &Value, k: &str) -> bool {
    m.at(0).is_sym(k)
}

pub fn leader_of(v: &View, j: usize) -> Option<usize> {
    let l = int_at(v, "leaderAddr", j);
    (l >= 0).then_some(l as usize)
}

/// Follower `j` in the given phase with a live session to its leader.
pub fn follower_in(v: &View, j: usize, phase: &str) -> Option<usize> {
    if !alive(v, j) || !is_at(v, "state", j, FOLLOWING) || !is_at(v, "zabState", j, phase) {
        return None;
    }
    leader_of(v, j)
}

pub fn leader_in(v: &View, l: usize) -> bool {
    alive(v, l) && is_at(v, "state", l, LEADING)
}

pub fn slice(h: &[Value]) -> Value {
    seq(h.iter().cloned())
}

/// Sets of nodes with at least `quorum` members, as set values.
pub fn quorum_domain(n: usize, quorum: usize) -> Vec<Value> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize >= quorum)
        .map(|m| set((0..n).filter(|i| m & (1 << i) != 0).map(node)))
        .collect()
}

pub fn members(q: &Value) -> Vec<usize> {
    q.as_set().iter().map(|x| x.as_int() as usize).collect()
}

// ---- writing ----

pub fn send(w: &mut Writer, from: usize, to: usize, m: Value) {
    w.modify("msgs", |ms| {
        let row = ms.at(from);
        ms.with_at(from, row.with_at(to, row.at(to).pushed(m)))
    });
}

pub fn pop(w: &mut Writer, from: usize, to: usize) {
    w.modify("msgs", |ms| {
        let row = ms.at(from);
        let rest = slice(&row.at(to).as_seq()[1..]);
        ms.with_at(from, row.with_at(to, rest))
    });
}

pub fn clear_channel(w: &mut Writer, from: usize, to: usize) {
    w.set_at2("msgs", from, to, Value::empty_seq());
}

pub fn set_int(w: &mut Writer, var: &str, i: usize, x: i64) {
    w.set_at(var, i, int(x));
}

pub fn set_sym(w: &mut Writer, var: &str, i: usize, s: &str) {
    w.set_at(var, i, sym(s));
}

fn post_int(w: &mut Writer, var: &str, i: usize) -> i64 {
    w.post(var).at(i).as_int()
}

fn post_lp(w: &mut Writer, l: usize, j: usize) -> i64 {
    w.post("learnerPhase").at(l).at(j).as_int()
}

fn post_is(w: &mut Writer, var: &str, i: usize, s: &str) -> bool {
    w.post(var).at(i).is_sym(s)
}

/// Appends `entries` to the ghost commit log, skipping ones already there.
pub fn record_commits(w: &mut Writer, entries: &[Value]) {
    w.modify("committed", |c| {
        let mut c = c.clone();
        for t in entries {
            if !c.contains(t) {
                c = c.pushed(t.clone());
            }
        }
        c
    });
}

/// Variables written by an action that may tear down sessions.
pub fn teardown_writes(mut a: ActionDef, c: &Ctx) -> ActionDef {
    for var in ["state", "zabState", "leaderAddr", "learnerPhase", "ackIndex", "msgs"] {
        if !a.writes.contains_key(var) {
            a = a.writes(var, &[], &format!("{var} := Teardown({var})"));
        }
    }
    for (var, _) in &c.teardown {
        if !a.writes.contains_key(var) {
            a = a.writes(var, &[], &format!("{var}[i] := Init({var})[i]"));
        }
    }
    a
}

fn forget_learner(w: &mut Writer, l: usize, j: usize) {
    w.set_at2("learnerPhase", l, j, int(LP_NONE));
    w.set_at2("ackIndex", l, j, int(0));
    clear_channel(w, l, j);
    clear_channel(w, j, l);
}

fn reset_to_looking(c: &Ctx, w: &mut Writer, j: usize) {
    for (var, init) in &c.teardown {
        w.set_at(var, j, init.at(j).clone());
    }
    set_int(w, "leaderAddr", j, -1);
    w.set_at("learnerPhase", j, per_node(c.n, int(LP_NONE)));
    w.set_at("ackIndex", j, per_node(c.n, int(0)));
    set_sym(w, "state", j, LOOKING);
    set_sym(w, "zabState", j, ELECTION);
}

/// Node `j` abandons its role and returns to leader election.
pub fn shutdown(c: &Ctx, w: &mut Writer, j: usize) {
    if post_is(w, "state", j, LEADING) {
        for m in c.nodes().filter(|&m| m != j) {
            if post_lp(w, j, m) != LP_NONE {
                forget_learner(w, j, m);
            }
            if post_is(w, "state", m, FOLLOWING) && post_int(w, "leaderAddr", m) == j as i64 {
                reset_to_looking(c, w, m);
            }
        }
    } else if post_is(w, "state", j, FOLLOWING) {
        let l = post_int(w, "leaderAddr", j);
        if l >= 0 {
            let l = l as usize;
            clear_channel(w, j, l);
            clear_channel(w, l, j);
            if post_lp(w, l, j) != LP_NONE {
                forget_learner(w, l, j);
                reset_to_looking(c, w, j);
                check_quorum(c, w, l);
                return;
            }
        }
    }
    reset_to_looking(c, w, j);
}

/// A leader steps down once it lacks a quorum of learners: any connected
/// learner before establishment, synced learners afterwards.
pub fn check_quorum(c: &Ctx, w: &mut Writer, l: usize) {
    if !post_is(w, "state", l, LEADING) {
        return;
    }
    let need = if post_is(w, "zabState", l, BROADCAST) { LP_SYNCED } else { LP_CONNECTED };
    let support = 1 + c
        .nodes()
        .filter(|&m| m != l && post_lp(w, l, m) >= need)
        .count();
    if support < c.quorum {
        shutdown(c, w, l);
    }
}

/// The connection between `a` and `b` is gone.
pub fn link_lost(c: &Ctx, w: &mut Writer, a: usize, b: usize) {
    for (x, y) in [(a, b), (b, a)] {
        let follows = post_is(w, "state", y, FOLLOWING) && post_int(w, "leaderAddr", y) == x as i64;
        if follows {
            shutdown(c, w, y);
        } else if post_is(w, "state", x, LEADING) && post_lp(w, x, y) != LP_NONE {
            forget_learner(w, x, y);
            check_quorum(c, w, x);
        }
    }
}

/// Leader `l` commits every entry up to the largest index acknowledged by a
/// quorum and informs its learners.
pub fn leader_try_commit(c: &Ctx, w: &mut Writer, l: usize, h: &[Value]) {
    let old = post_int(w, "lastCommitted", l) as usize;
    let mut k = h.len();
    while k > old {
        let acks = 1 + c
            .nodes()
            .filter(|&m| {
                m != l
                    && post_lp(w, l, m) >= LP_SYNCED
                    && w.post("ackIndex").at(l).at(m).as_int() as usize >= k
            })
            .count();
        if acks >= c.quorum {
            break;
        }
        k -= 1;
    }
    if k <= old {
        return;
    }
    for t in &h[old..k] {
        for m in c.nodes().filter(|&m| m != l) {
            if post_lp(w, l, m) >= LP_NEWLEADER_SENT {
                send(w, l, m, msg(kind::COMMIT, [zxid(t).clone()]));
            }
        }
    }
    record_commits(w, &h[old..k]);
    set_int(w, "lastCommitted", l, k as i64);
}

/// Node ids in a set value, checked against `n`.
pub fn node_set(xs: impl IntoIterator<Item = usize>) -> Value {
    set(xs.into_iter().map(node))
}

pub fn as_nodes(v: &Value) -> BTreeSet<usize> {
    v.as_set().iter().map(|x| x.as_int() as usize).collect()
}
