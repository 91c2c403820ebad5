//! Broadcast: the established leader proposes, followers log and
//! acknowledge, the leader commits on a quorum.

use crate::model::*;
use mgcheck_core::value::int;
use mgcheck_core::{ActionDef, BuildContext, ModuleSpec, Value};

pub const BROADCAST_MODULE: &str = "Broadcast";

fn n_of(b: &[Value], k: usize) -> usize {
    b[k].as_int() as usize
}

/// `concurrent` splits follower logging and committing into the log thread
/// and the commit thread.
pub fn module(b: &BuildContext, opts: ZabOptions, concurrent: bool) -> ModuleSpec {
    let mut vars = common_vars(b.scale.nodes);
    if concurrent {
        vars.extend(queue_vars(b.scale.nodes, opts.flags));
    }
    let c = Ctx::new(b, opts).with_teardown(&vars);
    let label = if concurrent { "fine-concurrency" } else { "baseline" };
    let mut m = ModuleSpec::new(BROADCAST_MODULE, label);
    for d in vars {
        m = m.var(d);
    }
    m = m
        .action(leader_request(&c))
        .action(follower_proposal(&c, concurrent))
        .action(leader_ack(&c))
        .action(follower_commit(&c, concurrent));
    if concurrent {
        m = m.action(commit_processor(&c));
    }
    m
}

fn leader_request(c: &Ctx) -> ActionDef {
    let max = c.max_txns;
    let n = c.n;
    ActionDef::new("LeaderProcessRequest")
        .param("l", c.node_domain())
        .reads(&["alive", "state", "zabState", "proposed"])
        .writes("history", &["history", "currentEpoch", "proposed"], "history[l] := Append(history[l], NextTxn(l))")
        .writes("proposed", &["proposed", "history", "currentEpoch"], "proposed := Append(proposed, NextTxn(l))")
        .writes("msgs", &["learnerPhase", "history", "currentEpoch", "proposed"], "msgs := SendProposal(l, NextTxn(l))")
        .guard(move |v, b| {
            let l = n_of(b, 0);
            leader_in(v, l) && is_at(v, "zabState", l, BROADCAST) && v.get("proposed").len() < max
        })
        .update(move |v, b, w| {
            let l = n_of(b, 0);
            let e = int_at(v, "currentEpoch", l);
            let h = history(v, l);
            let counter = match h.last() {
                Some(t) if zxid_epoch(t) == e => zxid(t).as_pair().1.as_int() + 1,
                _ => 1,
            };
            let t = txn(e, counter, v.get("proposed").len() as i64 + 1);
            w.set_at("history", l, at(v, "history", l).pushed(t.clone()));
            w.set("proposed", v.get("proposed").pushed(t.clone()));
            for m in 0..n {
                if m != l && lp(v, l, m) >= LP_NEWLEADER_SENT {
                    send(w, l, m, msg(kind::PROPOSAL, [t.clone()]));
                }
            }
        })
}

fn broadcast_head(v: &mgcheck_core::View, j: usize, k: &str) -> Option<usize> {
    let l = follower_in(v, j, BROADCAST)?;
    head_is(v, l, j, k).then_some(l)
}

fn follower_proposal(c: &Ctx, concurrent: bool) -> ActionDef {
    let reads = ["alive", "state", "zabState", "leaderAddr", "msgs"];
    let a = ActionDef::new("FollowerProcessPROPOSAL")
        .param("j", c.node_domain())
        .reads(&reads);
    let a = if concurrent {
        a.writes("queuedRequests", &["queuedRequests", "msgs"], "queuedRequests[j] := Append(queuedRequests[j], Head(msgs[l][j]).txn)")
            .writes("msgs", &["msgs"], "msgs[l][j] := Tail(msgs[l][j])")
    } else {
        a.writes("history", &["history", "msgs"], "history[j] := Append(history[j], Head(msgs[l][j]).txn)")
            .writes("msgs", &["msgs"], "msgs := ReplyACK(Tail(msgs[l][j]))")
    };
    a.guard(|v, b| broadcast_head(v, n_of(b, 0), kind::PROPOSAL).is_some())
        .update(move |v, b, w| {
            let j = n_of(b, 0);
            let l = leader_of(v, j).unwrap();
            let t = head(v, l, j).unwrap().at(1).clone();
            pop(w, l, j);
            if concurrent {
                w.set_at("queuedRequests", j, at(v, "queuedRequests", j).pushed(t));
            } else {
                w.set_at("history", j, at(v, "history", j).pushed(t.clone()));
                send(w, j, l, msg(kind::ACK, [zxid(&t).clone()]));
            }
        })
}

fn leader_ack(c: &Ctx) -> ActionDef {
    let cu = c.clone();
    let a = ActionDef::new("LeaderProcessACK")
        .param("l", c.node_domain())
        .param("j", c.node_domain())
        .reads(&["alive", "state", "msgs"])
        .writes("ackIndex", &["msgs", "history", "ackIndex"], "ackIndex[l][j] := Max(ackIndex[l][j], IndexOf(history[l], Head(msgs[j][l]).zxid))")
        .writes("lastCommitted", &["history", "ackIndex", "learnerPhase"], "lastCommitted[l] := CommitPoint(l)")
        .writes("committed", &["history", "ackIndex", "learnerPhase"], "committed := committed \\o NewlyCommitted(l)")
        .guard(|v, b| {
            let (l, j) = (n_of(b, 0), n_of(b, 1));
            l != j && leader_in(v, l) && head_is(v, j, l, kind::ACK)
        })
        .update(move |v, b, w| {
            let c = &cu;
            let (l, j) = (n_of(b, 0), n_of(b, 1));
            let z = head(v, j, l).unwrap().at(1).clone();
            pop(w, j, l);
            if lp(v, l, j) < LP_SYNCED {
                // Not expecting proposal ACKs before NEWLEADER is acknowledged:
                // the learner handler gives up on this follower.
                link_lost(c, w, l, j);
                return;
            }
            if let Some(idx) = index_of(history(v, l), &z) {
                let old = v.get("ackIndex").at(l).at(j).as_int();
                w.set_at2("ackIndex", l, j, int(old.max(idx as i64)));
                leader_try_commit(c, w, l, history(v, l));
            }
        });
    teardown_writes(a, c)
}

fn follower_commit(c: &Ctx, concurrent: bool) -> ActionDef {
    let reads = ["alive", "state", "zabState", "leaderAddr", "msgs"];
    let a = ActionDef::new("FollowerProcessCOMMIT")
        .param("j", c.node_domain())
        .reads(&reads)
        .writes("msgs", &["msgs"], "msgs[l][j] := Tail(msgs[l][j])");
    let a = if concurrent {
        a.writes("commitTarget", &["commitTarget", "history", "queuedRequests", "msgs"], "commitTarget[j] := Max(commitTarget[j], IndexOf(history[j] \\o queuedRequests[j], Head(msgs[l][j]).zxid))")
    } else {
        a.writes("lastCommitted", &["lastCommitted", "history", "msgs"], "lastCommitted[j] := Max(lastCommitted[j], IndexOf(history[j], Head(msgs[l][j]).zxid))")
    };
    a.guard(|v, b| broadcast_head(v, n_of(b, 0), kind::COMMIT).is_some())
        .update(move |v, b, w| {
            let j = n_of(b, 0);
            let l = leader_of(v, j).unwrap();
            let z = head(v, l, j).unwrap().at(1).clone();
            pop(w, l, j);
            if concurrent {
                let mut all = history(v, j).to_vec();
                all.extend(at(v, "queuedRequests", j).as_seq().iter().cloned());
                if let Some(idx) = index_of(&all, &z) {
                    let ct = int_at(v, "commitTarget", j).max(idx as i64);
                    set_int(w, "commitTarget", j, ct);
                }
            } else if let Some(idx) = index_of(history(v, j), &z) {
                let lc = int_at(v, "lastCommitted", j).max(idx as i64);
                set_int(w, "lastCommitted", j, lc);
            }
        })
}

/// The commit thread applies commits up to the target once they are logged.
fn commit_processor(c: &Ctx) -> ActionDef {
    let point = |v: &mgcheck_core::View, j: usize| {
        int_at(v, "commitTarget", j).min(history(v, j).len() as i64)
    };
    ActionDef::new("FollowerCommitProcessorCommit")
        .param("j", c.node_domain())
        .reads(&["alive", "commitTarget", "history", "lastCommitted"])
        .writes("lastCommitted", &["commitTarget", "history"], "lastCommitted[j] := Min(commitTarget[j], Len(history[j]))")
        .guard(move |v, b| {
            let j = n_of(b, 0);
            alive(v, j) && int_at(v, "lastCommitted", j) < point(v, j)
        })
        .update(move |v, b, w| {
            let j = n_of(b, 0);
            set_int(w, "lastCommitted", j, point(v, j));
        })
}
