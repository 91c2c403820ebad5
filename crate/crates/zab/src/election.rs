//! Leader election and discovery: the eight-action baseline pair and the
//! single-action coarse `ElectionAndDiscovery` module.

use crate::model::*;
use mgcheck_core::value::{boolean, int, pair, seq};
use mgcheck_core::{ActionDef, BuildContext, ModuleSpec, Value, VarClass, VarDecl, View, Writer};
use std::cmp::Ordering;

pub const ELECTION_MODULE: &str = "Election";
pub const DISCOVERY_MODULE: &str = "Discovery";
pub const ED_MODULE: &str = "ElectionAndDiscovery";

/// Writes published when a leader and its quorum leave election. The coarse
/// action and the final baseline step share these expressions verbatim.
const ED_WRITES: [(&str, &[&str], &str); 7] = [
    ("state", &[], "state[m] := IF m = l THEN LEADING ELSE FOLLOWING FOR m IN Q"),
    ("zabState", &[], "zabState[m] := SYNCHRONIZATION FOR m IN Q"),
    (
        "acceptedEpoch",
        &["acceptedEpoch"],
        "acceptedEpoch[m] := e FOR m IN Q WHERE e = MaxAcceptedEpoch(Q) + 1",
    ),
    (
        "currentEpoch",
        &["acceptedEpoch"],
        "currentEpoch[l] := e WHERE e = MaxAcceptedEpoch(Q) + 1",
    ),
    ("leaderAddr", &[], "leaderAddr[m] := l FOR m IN Q"),
    ("learnerPhase", &[], "learnerPhase[l][m] := IF m IN Q \\ {l} THEN 0 ELSE -1"),
    ("ackIndex", &[], "ackIndex[l][m] := 0"),
];

const ED_READS: [&str; 6] = ["state", "alive", "partitioned", "currentEpoch", "history", "acceptedEpoch"];

/// Election order: (currentEpoch, last zxid, id).
pub fn rank(v: &View, m: usize) -> (i64, Value, usize) {
    (int_at(v, "currentEpoch", m), last_zxid(history(v, m)), m)
}

/// `l` may lead quorum `q` out of election.
pub fn ed_enabled(c: &Ctx, v: &View, l: usize, q: &[usize]) -> bool {
    q.len() >= c.quorum
        && q.contains(&l)
        && q.iter().all(|&m| {
            alive(v, m) && is_at(v, "state", m, LOOKING) && (m == l || connected(v, l, m))
        })
        && q.iter().all(|&m| rank(v, m) <= rank(v, l))
}

fn ed_publish(c: &Ctx, v: &View, w: &mut Writer, l: usize, q: &[usize]) {
    publish_with_bump(c, v, w, l, q, 1)
}

fn publish_with_bump(c: &Ctx, v: &View, w: &mut Writer, l: usize, q: &[usize], bump: i64) {
    let e = q.iter().map(|&m| int_at(v, "acceptedEpoch", m)).max().unwrap_or(0) + bump;
    for &m in q {
        set_sym(w, "state", m, if m == l { LEADING } else { FOLLOWING });
        set_sym(w, "zabState", m, SYNCHRONIZATION);
        set_int(w, "acceptedEpoch", m, e);
        set_int(w, "leaderAddr", m, l as i64);
    }
    set_int(w, "currentEpoch", l, e);
    let row = seq(c.nodes().map(|m| {
        int(if m != l && q.contains(&m) { LP_CONNECTED } else { LP_NONE })
    }));
    w.set_at("learnerPhase", l, row);
    w.set_at("ackIndex", l, per_node(c.n, int(0)));
}

/// `quorum_deps` are the variables the quorum `Q` is computed from.
fn with_ed_writes(mut a: ActionDef, quorum_deps: &[&str]) -> ActionDef {
    for (var, deps, expr) in ED_WRITES {
        let mut all: Vec<&str> = deps.to_vec();
        if expr.contains('Q') {
            all.extend_from_slice(quorum_deps);
        }
        a = a.writes(var, &all, expr);
    }
    a
}

pub fn coarse(b: &BuildContext, opts: ZabOptions) -> ModuleSpec {
    let c = Ctx::new(b, opts);
    let mut m = ModuleSpec::new(ED_MODULE, "coarse");
    for d in common_vars(c.n) {
        m = m.var(d);
    }
    let (cg, cu) = (c.clone(), c.clone());
    let a = ActionDef::new("ElectionAndDiscovery")
        .param("l", c.node_domain())
        .param("Q", quorum_domain(c.n, c.quorum))
        .locals(&["m", "e"])
        .reads(&ED_READS);
    let a = with_ed_writes(a, &[])
        .guard(move |v, b| ed_enabled(&cg, v, b[0].as_int() as usize, &members(&b[1])))
        .update(move |v, b, w| ed_publish(&cu, v, w, b[0].as_int() as usize, &members(&b[1])));
    m.action(a)
}

/// A coarsening that breaks the update rule: the new epoch is not bumped
/// past the quorum's accepted epochs. Exists to exercise the checkers.
pub fn coarse_stale_epoch(b: &BuildContext, opts: ZabOptions) -> ModuleSpec {
    let c = Ctx::new(b, opts);
    let mut m = ModuleSpec::new(ED_MODULE, "coarse-stale-epoch");
    for d in common_vars(c.n) {
        m = m.var(d);
    }
    let (cg, cu) = (c.clone(), c.clone());
    let mut a = ActionDef::new("ElectionAndDiscovery")
        .param("l", c.node_domain())
        .param("Q", quorum_domain(c.n, c.quorum))
        .locals(&["m", "e"])
        .reads(&ED_READS);
    for (var, deps, expr) in ED_WRITES {
        a = a.writes(var, deps, &expr.replace("MaxAcceptedEpoch(Q) + 1", "MaxAcceptedEpoch(Q)"));
    }
    let a = a
        .guard(move |v, b| ed_enabled(&cg, v, b[0].as_int() as usize, &members(&b[1])))
        .update(move |v, b, w| publish_with_bump(&cu, v, w, b[0].as_int() as usize, &members(&b[1]), 0));
    m.action(a)
}

fn election_vars(n: usize) -> Vec<VarDecl> {
    use VarClass::Session;
    vec![
        VarDecl::new("currentVote", seq((0..n).map(node)), Session),
        VarDecl::new("recvVotes", per_node(n, Value::empty_set()), Session),
        VarDecl::new("fleInbox", per_node(n, int(-1)), Session),
        VarDecl::new("fleLeader", per_node(n, int(-1)), Session),
    ]
}

fn discovery_vars(n: usize) -> Vec<VarDecl> {
    use VarClass::Session;
    vec![
        VarDecl::new("discPhase", per_node(n, int(0)), Session),
        VarDecl::new("connecting", per_node(n, Value::empty_set()), Session),
        VarDecl::new("ackeRecv", per_node(n, Value::empty_set()), Session),
    ]
}

const INTERNALS: [&str; 7] = [
    "currentVote",
    "recvVotes",
    "fleInbox",
    "fleLeader",
    "discPhase",
    "connecting",
    "ackeRecv",
];

fn looking(v: &View, i: usize) -> bool {
    alive(v, i) && is_at(v, "state", i, LOOKING)
}

fn vote_rank(v: &View, x: &Value) -> (i64, Value, usize) {
    rank(v, x.as_int() as usize)
}

fn better(v: &View, a: &Value, b: &Value) -> bool {
    vote_rank(v, a).cmp(&vote_rank(v, b)) == Ordering::Greater
}

fn i(b: &[Value], k: usize) -> usize {
    b[k].as_int() as usize
}

pub fn election_baseline(b: &BuildContext, opts: ZabOptions) -> ModuleSpec {
    let c = Ctx::new(b, opts);
    let n = c.n;
    let quorum = c.quorum;
    let mut m = ModuleSpec::new(ELECTION_MODULE, "baseline");
    for d in common_vars(n).into_iter().chain(election_vars(n)).chain(discovery_vars(n)) {
        m = m.var(d);
    }
    let init: Vec<Value> = election_vars(n)
        .into_iter()
        .chain(discovery_vars(n))
        .map(|d| d.init)
        .collect();

    let recv = ActionDef::new("FLEReceiveNotmsg")
        .param("i", c.node_domain())
        .param("j", c.node_domain())
        .reads(&[
            "alive", "state", "partitioned", "fleLeader", "fleInbox", "currentVote", "recvVotes",
            "currentEpoch", "history",
        ])
        .writes("fleInbox", &["currentVote"], "fleInbox[i] := <<j, currentVote[j]>>")
        .guard(|v, b| {
            let (x, y) = (i(b, 0), i(b, 1));
            if x == y || !looking(v, x) || !looking(v, y) || !connected(v, x, y) {
                return false;
            }
            if int_at(v, "fleLeader", x) != -1 || *at(v, "fleInbox", x) != int(-1) {
                return false;
            }
            let (vx, vy) = (at(v, "currentVote", x), at(v, "currentVote", y));
            better(v, vy, vx) || (vx == vy && !at(v, "recvVotes", x).contains(&node(y)))
        })
        .update(|v, b, w| {
            let (x, y) = (i(b, 0), i(b, 1));
            w.set_at("fleInbox", x, pair(node(y), at(v, "currentVote", y).clone()));
        });

    let handle = ActionDef::new("FLEHandleNotmsg")
        .param("i", c.node_domain())
        .reads(&["alive", "state", "fleInbox"])
        .writes("currentVote", &["fleInbox", "currentVote", "currentEpoch", "history"], "currentVote[i] := IF Better(n.vote, currentVote[i]) THEN n.vote ELSE currentVote[i]")
        .writes("recvVotes", &["fleInbox", "recvVotes"], "recvVotes[i] := IF Better(n.vote, currentVote[i]) THEN {n.from} ELSE recvVotes[i] \\cup {n.from}")
        .writes("fleInbox", &[], "fleInbox[i] := NONE")
        .guard(|v, b| looking(v, i(b, 0)) && matches!(at(v, "fleInbox", i(b, 0)), Value::Pair(_)))
        .update(|v, b, w| {
            let x = i(b, 0);
            let (from, vote) = at(v, "fleInbox", x).as_pair();
            let mine = at(v, "currentVote", x);
            if better(v, vote, mine) {
                w.set_at("currentVote", x, vote.clone());
                w.set_at("recvVotes", x, node_set([from.as_int() as usize]));
            } else if vote == mine {
                w.set_at("recvVotes", x, at(v, "recvVotes", x).with_inserted(from.clone()));
            }
            w.set_at("fleInbox", x, int(-1));
        });

    let decide = ActionDef::new("FLEWaitNewNotmsg")
        .param("i", c.node_domain())
        .reads(&["alive", "state", "fleLeader", "recvVotes"])
        .writes("fleLeader", &["currentVote"], "fleLeader[i] := currentVote[i]")
        .guard(move |v, b| {
            let x = i(b, 0);
            looking(v, x)
                && int_at(v, "fleLeader", x) == -1
                && at(v, "recvVotes", x).len() + 1 >= quorum
        })
        .update(|v, b, w| {
            let x = i(b, 0);
            w.set_at("fleLeader", x, at(v, "currentVote", x).clone());
        });

    let init_g = init.clone();
    let mut timeout = ActionDef::new("FLENotmsgTimeout")
        .param("i", c.node_domain())
        .reads(&["alive", "state"])
        .reads(&INTERNALS);
    for var in INTERNALS {
        timeout = timeout.writes(var, &[], &format!("{var}[i] := Init({var})[i]"));
    }
    let timeout = timeout
        .guard(move |v, b| {
            let x = i(b, 0);
            looking(v, x)
                && INTERNALS
                    .iter()
                    .zip(&init_g)
                    .any(|(var, init)| at(v, var, x) != init.at(x))
        })
        .update(move |_, b, w| {
            let x = i(b, 0);
            for (var, init) in INTERNALS.iter().zip(&init) {
                w.set_at(var, x, init.at(x).clone());
            }
        });

    m.action(recv).action(handle).action(decide).action(timeout)
}

pub fn discovery_baseline(b: &BuildContext, opts: ZabOptions) -> ModuleSpec {
    let c = Ctx::new(b, opts);
    let mut m = ModuleSpec::new(DISCOVERY_MODULE, "baseline");
    for d in common_vars(c.n).into_iter().chain(election_vars(c.n)).chain(discovery_vars(c.n)) {
        m = m.var(d);
    }

    let connect = ActionDef::new("ConnectAndFollowerSendFOLLOWERINFO")
        .param("i", c.node_domain())
        .param("l", c.node_domain())
        .reads(&["alive", "state", "partitioned", "fleLeader", "discPhase"])
        .writes("discPhase", &[], "discPhase[i] := 1")
        .guard(|v, b| {
            let (x, l) = (i(b, 0), i(b, 1));
            x != l
                && looking(v, x)
                && looking(v, l)
                && connected(v, x, l)
                && int_at(v, "fleLeader", x) == l as i64
                && int_at(v, "fleLeader", l) == l as i64
                && int_at(v, "discPhase", x) == 0
        })
        .update(|_, b, w| set_int(w, "discPhase", i(b, 0), 1));

    let info = ActionDef::new("LeaderProcessFOLLOWERINFO")
        .param("l", c.node_domain())
        .param("i", c.node_domain())
        .reads(&["alive", "state", "fleLeader", "discPhase", "connecting"])
        .writes("connecting", &["connecting"], "connecting[l] := connecting[l] \\cup {i}")
        .guard(|v, b| {
            let (l, x) = (i(b, 0), i(b, 1));
            looking(v, l)
                && int_at(v, "fleLeader", l) == l as i64
                && int_at(v, "fleLeader", x) == l as i64
                && int_at(v, "discPhase", x) == 1
                && !at(v, "connecting", l).contains(&node(x))
        })
        .update(|v, b, w| {
            let (l, x) = (i(b, 0), i(b, 1));
            w.set_at("connecting", l, at(v, "connecting", l).with_inserted(node(x)));
        });

    let leaderinfo = ActionDef::new("FollowerProcessLEADERINFO")
        .param("i", c.node_domain())
        .param("l", c.node_domain())
        .reads(&["alive", "state", "fleLeader", "discPhase", "connecting"])
        .writes("discPhase", &[], "discPhase[i] := 2")
        .guard(|v, b| {
            let (x, l) = (i(b, 0), i(b, 1));
            looking(v, x)
                && int_at(v, "fleLeader", x) == l as i64
                && int_at(v, "discPhase", x) == 1
                && at(v, "connecting", l).contains(&node(x))
        })
        .update(|_, b, w| set_int(w, "discPhase", i(b, 0), 2));

    let (cg, cu) = (c.clone(), c.clone());
    let ackepoch_q = |v: &View, l: usize, x: usize| -> Vec<usize> {
        let mut q = as_nodes(at(v, "ackeRecv", l));
        q.insert(l);
        q.insert(x);
        q.into_iter().collect()
    };
    let mut reads = vec!["fleLeader", "discPhase", "connecting", "ackeRecv"];
    reads.extend(ED_READS);
    let ackepoch = ActionDef::new("LeaderProcessACKEPOCH")
        .param("l", c.node_domain())
        .param("i", c.node_domain())
        .param("establish", [boolean(false), boolean(true)])
        .locals(&["Q", "m", "e"])
        .reads(&reads)
        .writes("ackeRecv", &["ackeRecv"], "ackeRecv[l] := ackeRecv[l] \\cup {i}");
    let ackepoch = with_ed_writes(ackepoch, &["ackeRecv"])
        .guard(move |v, b| {
            let (l, x) = (i(b, 0), i(b, 1));
            let ok = looking(v, l)
                && int_at(v, "fleLeader", l) == l as i64
                && int_at(v, "fleLeader", x) == l as i64
                && int_at(v, "discPhase", x) == 2
                && at(v, "connecting", l).contains(&node(x))
                && !at(v, "ackeRecv", l).contains(&node(x));
            ok && (!b[2].as_bool() || ed_enabled(&cg, v, l, &ackepoch_q(v, l, x)))
        })
        .update(move |v, b, w| {
            let (l, x) = (i(b, 0), i(b, 1));
            w.set_at("ackeRecv", l, at(v, "ackeRecv", l).with_inserted(node(x)));
            if b[2].as_bool() {
                ed_publish(&cu, v, w, l, &ackepoch_q(v, l, x));
            }
        });

    m.action(connect).action(info).action(leaderinfo).action(ackepoch)
}

/// Election and discovery baselines as one module, for comparing against the
/// coarse variant.
pub fn merged_baseline(b: &BuildContext, opts: ZabOptions) -> ModuleSpec {
    ModuleSpec::merge(
        ED_MODULE,
        "baseline",
        &[election_baseline(b, opts), discovery_baseline(b, opts)],
    )
}
