//! Synchronization: the leader brings each follower's history in line and
//! establishes itself once a quorum acknowledged NEWLEADER.

use crate::model::*;
use mgcheck_core::value::{int, seq, sym};
use mgcheck_core::{ActionDef, BuildContext, ModuleSpec, Value, VarClass, VarDecl, View, Writer};

pub const SYNC_MODULE: &str = "Synchronization";

/// How NEWLEADER handling is split.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyncStyle {
    /// One atomic action.
    Atomic,
    /// Epoch update, logging and acknowledgement as three actions.
    Fine,
    /// `Fine` plus an asynchronous log queue and commit target.
    FineConcurrent,
    /// History strictly before epoch, with `servingState`.
    Improved,
}

impl SyncStyle {
    pub fn label(self) -> &'static str {
        match self {
            SyncStyle::Atomic => "baseline",
            SyncStyle::Fine => "fine-atomicity",
            SyncStyle::FineConcurrent => "fine-atomicity+concurrency",
            SyncStyle::Improved => "protocol-improved",
        }
    }
}

/// DIFF when the follower's log is a prefix of the leader's, TRUNC when it
/// has surplus entries above an agreeing prefix that covers everything the
/// leader committed, SNAP otherwise.
pub fn sync_plan(leader: &[Value], follower: &[Value], leader_committed: usize) -> (&'static str, usize, Vec<Value>) {
    let p = leader.iter().zip(follower).take_while(|(a, b)| a == b).count();
    if p == follower.len() {
        (mode::DIFF, p, leader[p..].to_vec())
    } else if p >= leader_committed {
        (mode::TRUNC, p, leader[p..].to_vec())
    } else {
        (mode::SNAP, 0, leader.to_vec())
    }
}

fn n_of(b: &[Value], k: usize) -> usize {
    b[k].as_int() as usize
}

fn sp(v: &View, j: usize) -> i64 {
    int_at(v, "syncProgress", j)
}

fn with_bits(w: &mut Writer, v: &View, j: usize, bits: i64) {
    set_int(w, "syncProgress", j, sp(v, j) | bits);
}

/// Follower in SYNCHRONIZATION whose leader sent a message of kind `k`.
fn sync_head(v: &View, j: usize, k: &str) -> Option<usize> {
    let l = follower_in(v, j, SYNCHRONIZATION)?;
    head_is(v, l, j, k).then_some(l)
}

/// Takes NEWLEADER off the channel, truncates the log and stashes the new
/// entries in `packetsSync`. Returns whether there is nothing left to log.
fn consume_newleader(v: &View, w: &mut Writer, j: usize, l: usize) -> bool {
    let m = head(v, l, j).unwrap();
    let keep = m.at(3).as_int() as usize;
    let txns = m.at(4).clone();
    pop(w, l, j);
    w.set_at("history", j, slice(&history(v, j)[..keep]));
    let empty = txns.is_empty();
    w.set_at("packetsSync", j, txns);
    empty
}

fn ackld(w: &mut Writer, j: usize, l: usize, len: usize) {
    send(w, j, l, msg(kind::ACKLD, [int(len as i64)]));
}

fn has_queue(v: &View) -> bool {
    v.has("queuedRequests")
}

const NL_READS: [&str; 6] = ["alive", "state", "zabState", "leaderAddr", "msgs", "syncProgress"];

pub fn module(b: &BuildContext, opts: ZabOptions, style: SyncStyle) -> ModuleSpec {
    let mut vars = common_vars(b.scale.nodes);
    if style == SyncStyle::Improved {
        vars.push(VarDecl::new(
            "servingState",
            per_node(b.scale.nodes, sym(INITIAL)),
            VarClass::Session,
        ));
    }
    // The request queue belongs to the concurrent Broadcast variant; sync
    // teardown still has to clear it.
    let mut session = vars.clone();
    if style == SyncStyle::FineConcurrent {
        session.extend(queue_vars(b.scale.nodes, opts.flags));
    }
    let c = Ctx::new(b, opts).with_teardown(&session);
    let mut m = ModuleSpec::new(SYNC_MODULE, style.label());
    for d in vars {
        m = m.var(d);
    }
    m = m.action(leader_sync_follower(&c));
    for a in newleader_actions(&c, style) {
        m = m.action(a);
    }
    m = m
        .action(proposal_in_sync(&c))
        .action(commit_in_sync(&c))
        .action(leader_ackld(&c, style))
        .action(follower_uptodate(&c, style));
    if style == SyncStyle::FineConcurrent {
        m = m.action(sync_processor(&c));
        if c.opts.uptodate_ack {
            m = m.action(leader_ack_uptodate(&c));
        }
    }
    if style != SyncStyle::Improved {
        m = m.invariant(crate::invariants::zk4394());
    }
    if matches!(style, SyncStyle::Fine | SyncStyle::FineConcurrent) {
        m = m.invariant(crate::invariants::zk4643()).invariant(crate::invariants::zk4646());
    }
    if style == SyncStyle::FineConcurrent {
        m = m
            .invariant(crate::invariants::zk3023())
            .invariant(crate::invariants::zk4685())
            .invariant(crate::invariants::zk4712());
    }
    m
}

fn leader_sync_follower(c: &Ctx) -> ActionDef {
    ActionDef::new("LeaderSyncFollower")
        .param("l", c.node_domain())
        .param("j", c.node_domain())
        .reads(&["alive", "state", "zabState", "learnerPhase"])
        .writes(
            "msgs",
            &["history", "lastCommitted", "currentEpoch"],
            "msgs[l][j] := Append(msgs[l][j], NEWLEADER(currentEpoch[l], SyncPlan(history[l], history[j], lastCommitted[l])))",
        )
        .writes("learnerPhase", &[], "learnerPhase[l][j] := 1")
        .guard(|v, b| {
            let (l, j) = (n_of(b, 0), n_of(b, 1));
            l != j
                && leader_in(v, l)
                && !is_at(v, "zabState", l, ELECTION)
                && lp(v, l, j) == LP_CONNECTED
        })
        .update(|v, b, w| {
            let (l, j) = (n_of(b, 0), n_of(b, 1));
            let lc = int_at(v, "lastCommitted", l) as usize;
            let (md, keep, txns) = sync_plan(history(v, l), history(v, j), lc);
            let e = int_at(v, "currentEpoch", l);
            send(
                w,
                l,
                j,
                msg(kind::NEWLEADER, [int(e), sym(md), int(keep as i64), seq(txns)]),
            );
            w.set_at2("learnerPhase", l, j, int(LP_NEWLEADER_SENT));
        })
}

fn newleader_actions(c: &Ctx, style: SyncStyle) -> Vec<ActionDef> {
    match style {
        SyncStyle::Atomic => vec![ActionDef::new("FollowerProcessNEWLEADER")
            .param("j", c.node_domain())
            .reads(&NL_READS)
            .writes("history", &["msgs", "history"], "history[j] := SubSeq(history[j], 1, nl.keep) \\o nl.txns")
            .writes("currentEpoch", &["msgs"], "currentEpoch[j] := nl.epoch")
            .writes("syncProgress", &[], "syncProgress[j] := 7")
            .writes("msgs", &["msgs", "history"], "msgs := ReplyACKLD(Tail(msgs[l][j]))")
            .guard(|v, b| {
                let j = n_of(b, 0);
                sp(v, j) == 0 && sync_head(v, j, kind::NEWLEADER).is_some()
            })
            .update(|v, b, w| {
                let j = n_of(b, 0);
                let l = sync_head(v, j, kind::NEWLEADER).unwrap();
                let m = head(v, l, j).unwrap().clone();
                let keep = m.at(3).as_int() as usize;
                let mut h = history(v, j)[..keep].to_vec();
                h.extend(m.at(4).as_seq().iter().cloned());
                pop(w, l, j);
                ackld(w, j, l, h.len());
                w.set_at("history", j, seq(h));
                w.set_at("currentEpoch", j, m.at(1).clone());
                set_int(w, "syncProgress", j, SYNC_DONE);
            })],
        SyncStyle::Fine | SyncStyle::FineConcurrent => fine_newleader(c, style),
        SyncStyle::Improved => {
            let hist = ActionDef::new("FollowerProcessNEWLEADER_UpdateHistory")
                .param("j", c.node_domain())
                .reads(&NL_READS)
                .writes("history", &["msgs", "history"], "history[j] := SubSeq(history[j], 1, nl.keep) \\o nl.txns")
                .writes("msgs", &["msgs"], "msgs[l][j] := Tail(msgs[l][j])")
                .writes("syncProgress", &[], "syncProgress[j] := 2")
                .writes("packetsSync", &[], "packetsSync[j] := <<>>")
                .guard(|v, b| {
                    let j = n_of(b, 0);
                    sp(v, j) == 0 && sync_head(v, j, kind::NEWLEADER).is_some()
                })
                .update(|v, b, w| {
                    let j = n_of(b, 0);
                    let l = sync_head(v, j, kind::NEWLEADER).unwrap();
                    consume_newleader(v, w, j, l);
                    let mut h = w.post("history").at(j).as_seq().to_vec();
                    h.extend(w.post("packetsSync").at(j).as_seq().iter().cloned());
                    w.set_at("history", j, seq(h));
                    w.set_at("packetsSync", j, Value::empty_seq());
                    set_int(w, "syncProgress", j, LOGGED);
                });
            let epoch = ActionDef::new("FollowerProcessNEWLEADER_UpdateEpochAndACK")
                .param("j", c.node_domain())
                .reads(&NL_READS)
                .writes("currentEpoch", &["acceptedEpoch"], "currentEpoch[j] := acceptedEpoch[j]")
                .writes("msgs", &["history"], "msgs[j][l] := Append(msgs[j][l], ACKLD(Len(history[j])))")
                .writes("syncProgress", &[], "syncProgress[j] := 7")
                .guard(|v, b| {
                    let j = n_of(b, 0);
                    sp(v, j) == LOGGED && follower_in(v, j, SYNCHRONIZATION).is_some()
                })
                .update(|v, b, w| {
                    let j = n_of(b, 0);
                    let l = leader_of(v, j).unwrap();
                    w.set_at("currentEpoch", j, at(v, "acceptedEpoch", j).clone());
                    ackld(w, j, l, history(v, j).len());
                    set_int(w, "syncProgress", j, SYNC_DONE);
                });
            vec![hist, epoch]
        }
    }
}

fn fine_newleader(c: &Ctx, style: SyncStyle) -> Vec<ActionDef> {
    let flags = c.flags();
    let epoch_first = flags.epoch_first();
    let queued = style == SyncStyle::FineConcurrent && flags.async_sync_logging();

    let update_epoch = ActionDef::new("FollowerProcessNEWLEADER_UpdateEpoch")
        .param("j", c.node_domain())
        .reads(&NL_READS)
        .writes("currentEpoch", &["acceptedEpoch"], "currentEpoch[j] := acceptedEpoch[j]")
        .writes("syncProgress", &["syncProgress"], "syncProgress[j] := syncProgress[j] | EPOCH")
        .guard(move |v, b| {
            let j = n_of(b, 0);
            if epoch_first {
                sp(v, j) == 0 && sync_head(v, j, kind::NEWLEADER).is_some()
            } else {
                sp(v, j) == LOGGED && follower_in(v, j, SYNCHRONIZATION).is_some()
            }
        })
        .update(move |v, b, w| {
            let j = n_of(b, 0);
            let mut bits = EPOCH_DONE;
            if epoch_first {
                let l = leader_of(v, j).unwrap();
                if consume_newleader(v, w, j, l) {
                    bits |= LOGGED;
                }
            }
            w.set_at("currentEpoch", j, at(v, "acceptedEpoch", j).clone());
            with_bits(w, v, j, bits);
        });
    let update_epoch = if epoch_first {
        update_epoch
            .writes("history", &["msgs", "history"], "history[j] := SubSeq(history[j], 1, nl.keep)")
            .writes("packetsSync", &["msgs"], "packetsSync[j] := nl.txns")
            .writes("msgs", &["msgs"], "msgs[l][j] := Tail(msgs[l][j])")
    } else {
        update_epoch
    };

    let mut log = ActionDef::new("FollowerProcessNEWLEADER_LogRequest")
        .param("j", c.node_domain())
        .reads(&NL_READS)
        .writes("history", &["history", "packetsSync", "msgs"], "history[j] := history[j] \\o packetsSync[j]")
        .writes("packetsSync", &[], "packetsSync[j] := <<>>")
        .writes("syncProgress", &["syncProgress"], "syncProgress[j] := syncProgress[j] | LOGGED");
    if !epoch_first {
        log = log.writes("msgs", &["msgs"], "msgs[l][j] := Tail(msgs[l][j])");
    }
    if queued {
        log = log.writes(
            "queuedRequests",
            &["queuedRequests", "packetsSync"],
            "queuedRequests[j] := queuedRequests[j] \\o packetsSync[j]",
        );
    }
    let log = log
        .guard(move |v, b| {
            let j = n_of(b, 0);
            if epoch_first {
                let s = sp(v, j);
                s & EPOCH_DONE != 0 && s & LOGGED == 0 && follower_in(v, j, SYNCHRONIZATION).is_some()
            } else {
                sp(v, j) == 0 && sync_head(v, j, kind::NEWLEADER).is_some()
            }
        })
        .update(move |v, b, w| {
            let j = n_of(b, 0);
            if !epoch_first {
                let l = leader_of(v, j).unwrap();
                consume_newleader(v, w, j, l);
            }
            let pending = w.post("packetsSync").at(j).clone();
            if queued {
                w.set_at("queuedRequests", j, concat(at(v, "queuedRequests", j), &pending));
            } else {
                let h = w.post("history").at(j).clone();
                w.set_at("history", j, concat(&h, &pending));
            }
            w.set_at("packetsSync", j, Value::empty_seq());
            with_bits(w, v, j, LOGGED);
        });

    let early_ack = flags.zk4646;
    let mut ack_deps = vec!["history", "packetsSync"];
    if style == SyncStyle::FineConcurrent {
        ack_deps.push("queuedRequests");
    }
    let reply = ActionDef::new("FollowerProcessNEWLEADER_ReplyACK")
        .param("j", c.node_domain())
        .reads(&NL_READS)
        .writes("msgs", &ack_deps, "msgs[j][l] := Append(msgs[j][l], ACKLD(Len(history[j]) + Len(packetsSync[j]) + Len(queuedRequests[j])))")
        .writes("syncProgress", &["syncProgress"], "syncProgress[j] := syncProgress[j] | ACKED")
        .guard(move |v, b| {
            let j = n_of(b, 0);
            let s = sp(v, j);
            s & EPOCH_DONE != 0
                && (s & LOGGED != 0 || early_ack)
                && s & ACKED == 0
                && follower_in(v, j, SYNCHRONIZATION).is_some()
        })
        .update(|v, b, w| {
            let j = n_of(b, 0);
            let l = leader_of(v, j).unwrap();
            let mut len = history(v, j).len() + at(v, "packetsSync", j).len();
            if has_queue(v) {
                len += at(v, "queuedRequests", j).len();
            }
            ackld(w, j, l, len);
            with_bits(w, v, j, ACKED);
        });
    vec![update_epoch, log, reply]
}

fn concat(a: &Value, b: &Value) -> Value {
    seq(a.as_seq().iter().chain(b.as_seq()).cloned())
}

fn proposal_in_sync(c: &Ctx) -> ActionDef {
    ActionDef::new("FollowerProcessPROPOSALInSync")
        .param("j", c.node_domain())
        .reads(&NL_READS)
        .writes("packetsSync", &["msgs", "packetsSync"], "packetsSync[j] := Append(packetsSync[j], Head(msgs[l][j]).txn)")
        .writes("msgs", &["msgs"], "msgs[l][j] := Tail(msgs[l][j])")
        .guard(|v, b| {
            let j = n_of(b, 0);
            sp(v, j) == SYNC_DONE && sync_head(v, j, kind::PROPOSAL).is_some()
        })
        .update(|v, b, w| {
            let j = n_of(b, 0);
            let l = leader_of(v, j).unwrap();
            let t = head(v, l, j).unwrap().at(1).clone();
            pop(w, l, j);
            w.set_at("packetsSync", j, at(v, "packetsSync", j).pushed(t));
        })
}

fn commit_in_sync(c: &Ctx) -> ActionDef {
    let npe = c.flags().zk4394;
    let cu = c.clone();
    let a = ActionDef::new("FollowerProcessCOMMITInSync")
        .param("j", c.node_domain())
        .reads(&NL_READS)
        .reads(&["packetsSync"])
        .writes("msgs", &["msgs"], "msgs[l][j] := Tail(msgs[l][j])")
        .guard(|v, b| {
            let j = n_of(b, 0);
            sp(v, j) == SYNC_DONE && sync_head(v, j, kind::COMMIT).is_some()
        })
        .update(move |v, b, w| {
            let j = n_of(b, 0);
            let l = leader_of(v, j).unwrap();
            pop(w, l, j);
            if npe && at(v, "packetsSync", j).is_empty() {
                // The handler thread dies and the follower drops out of the quorum.
                shutdown(&cu, w, j);
            }
        });
    teardown_writes(a, c)
}

fn leader_ackld(c: &Ctx, style: SyncStyle) -> ActionDef {
    let cu = c.clone();
    let improved = style == SyncStyle::Improved;
    let mut a = ActionDef::new("LeaderProcessACKLD")
        .param("l", c.node_domain())
        .param("j", c.node_domain())
        .reads(&["alive", "state", "msgs", "learnerPhase"])
        .writes("msgs", &["msgs", "history", "lastCommitted", "learnerPhase", "ackIndex"], "msgs := SendUPTODATE(Tail(msgs[j][l]))")
        .writes("learnerPhase", &[], "learnerPhase[l][j] := 2")
        .writes("ackIndex", &["msgs", "ackIndex", "history"], "ackIndex[l][j] := Min(Head(msgs[j][l]).len, Len(history[l]))")
        .writes("zabState", &["learnerPhase"], "zabState[l] := IF Quorum(Synced(l)) THEN BROADCAST ELSE zabState[l]")
        .writes("lastCommitted", &["history", "ackIndex", "learnerPhase"], "lastCommitted[l] := CommitPoint(l)")
        .writes("committed", &["history", "ackIndex", "learnerPhase"], "committed := committed \\o NewlyCommitted(l)");
    if improved {
        a = a.writes("servingState", &["learnerPhase"], "servingState[l] := IF Quorum(Synced(l)) THEN RUNNING ELSE servingState[l]");
    }
    a.guard(|v, b| {
        let (l, j) = (n_of(b, 0), n_of(b, 1));
        l != j && leader_in(v, l) && head_is(v, j, l, kind::ACKLD) && lp(v, l, j) == LP_NEWLEADER_SENT
    })
    .update(move |v, b, w| {
        let c = &cu;
        let (l, j) = (n_of(b, 0), n_of(b, 1));
        let len = head(v, j, l).unwrap().at(1).as_int();
        pop(w, j, l);
        let h = history(v, l);
        w.set_at2("learnerPhase", l, j, int(LP_SYNCED));
        let acked = len.min(h.len() as i64);
        w.set_at2("ackIndex", l, j, int(acked));
        if is_at(v, "zabState", l, BROADCAST) {
            send(w, l, j, msg(kind::UPTODATE, [at(v, "lastCommitted", l).clone()]));
            leader_try_commit(c, w, l, history(v, l));
            return;
        }
        let synced: Vec<usize> = c
            .nodes()
            .filter(|&m| m != l && (m == j || lp(v, l, m) >= LP_SYNCED))
            .collect();
        if synced.len() + 1 >= c.quorum {
            set_sym(w, "zabState", l, BROADCAST);
            set_int(w, "lastCommitted", l, h.len() as i64);
            record_commits(w, h);
            if improved {
                set_sym(w, "servingState", l, RUNNING);
            }
            for m in synced {
                send(w, l, m, msg(kind::UPTODATE, [int(h.len() as i64)]));
            }
        }
    })
}

fn follower_uptodate(c: &Ctx, style: SyncStyle) -> ActionDef {
    let flags = c.flags();
    let concurrent = style == SyncStyle::FineConcurrent;
    let queued = concurrent && flags.async_sync_logging();
    let ack_uptodate = concurrent && c.opts.uptodate_ack;
    let late_commit = concurrent && flags.zk3023;
    let improved = style == SyncStyle::Improved;
    let mut a = ActionDef::new("FollowerProcessUPTODATE")
        .param("j", c.node_domain())
        .reads(&NL_READS)
        .writes("msgs", &["msgs", "packetsSync"], "msgs := ReplyACKs(Tail(msgs[l][j]), packetsSync[j])")
        .writes("history", &["history", "packetsSync"], "history[j] := history[j] \\o packetsSync[j]")
        .writes("packetsSync", &[], "packetsSync[j] := <<>>")
        .writes("zabState", &[], "zabState[j] := BROADCAST");
    if !late_commit {
        a = a.writes(
            "lastCommitted",
            &["msgs", "history", "lastCommitted", "packetsSync"],
            "lastCommitted[j] := Max(lastCommitted[j], Min(Head(msgs[l][j]).zxid, Len(history[j])))",
        );
    }
    if concurrent {
        a = a.writes("commitTarget", &["msgs", "commitTarget"], "commitTarget[j] := Max(commitTarget[j], Head(msgs[l][j]).zxid)");
    }
    if queued {
        a = a.writes("queuedRequests", &["queuedRequests", "packetsSync"], "queuedRequests[j] := queuedRequests[j] \\o packetsSync[j]");
    }
    if improved {
        a = a.writes("servingState", &[], "servingState[j] := RUNNING");
    }
    a.guard(|v, b| {
        let j = n_of(b, 0);
        sp(v, j) == SYNC_DONE && sync_head(v, j, kind::UPTODATE).is_some()
    })
    .update(move |v, b, w| {
        let j = n_of(b, 0);
        let l = leader_of(v, j).unwrap();
        let committed = head(v, l, j).unwrap().at(1).clone();
        pop(w, l, j);
        if late_commit && ack_uptodate {
            send(w, j, l, msg(kind::ACKUPTODATE, [committed.clone()]));
        }
        let pending = at(v, "packetsSync", j);
        let mut h = history(v, j).to_vec();
        if queued {
            w.set_at("queuedRequests", j, concat(at(v, "queuedRequests", j), pending));
        } else {
            h.extend(pending.as_seq().iter().cloned());
            if let Some(t) = pending.as_seq().last() {
                send(w, j, l, msg(kind::ACK, [zxid(t).clone()]));
            }
            w.set_at("history", j, seq(h.iter().cloned()));
        }
        w.set_at("packetsSync", j, Value::empty_seq());
        if !late_commit {
            let lc = int_at(v, "lastCommitted", j).max(committed.as_int().min(h.len() as i64));
            set_int(w, "lastCommitted", j, lc);
        }
        if concurrent {
            let ct = int_at(v, "commitTarget", j).max(committed.as_int());
            set_int(w, "commitTarget", j, ct);
        }
        if ack_uptodate && !late_commit {
            send(w, j, l, msg(kind::ACKUPTODATE, [committed]));
        }
        if improved {
            set_sym(w, "servingState", j, RUNNING);
        }
        set_sym(w, "zabState", j, BROADCAST);
    })
}

fn leader_ack_uptodate(c: &Ctx) -> ActionDef {
    ActionDef::new("LeaderProcessACKUPTODATE")
        .param("l", c.node_domain())
        .param("j", c.node_domain())
        .reads(&["alive", "state", "msgs", "learnerPhase"])
        .writes("msgs", &["msgs"], "msgs[j][l] := Tail(msgs[j][l])")
        .writes("learnerPhase", &["learnerPhase"], "learnerPhase[l][j] := 3")
        .guard(|v, b| {
            let (l, j) = (n_of(b, 0), n_of(b, 1));
            l != j && leader_in(v, l) && head_is(v, j, l, kind::ACKUPTODATE)
        })
        .update(|v, b, w| {
            let (l, j) = (n_of(b, 0), n_of(b, 1));
            pop(w, j, l);
            if lp(v, l, j) == LP_SYNCED {
                w.set_at2("learnerPhase", l, j, int(LP_UPTODATE_ACKED));
            }
        })
}

/// The follower's log thread: persists the oldest queued request and
/// acknowledges it when its session allows.
fn sync_processor(c: &Ctx) -> ActionDef {
    let early = c.flags().zk4685;
    ActionDef::new("FollowerSyncProcessorLogRequest")
        .param("j", c.node_domain())
        .reads(&["alive", "queuedRequests"])
        .writes("history", &["history", "queuedRequests"], "history[j] := Append(history[j], Head(queuedRequests[j]))")
        .writes("queuedRequests", &["queuedRequests"], "queuedRequests[j] := Tail(queuedRequests[j])")
        .writes("msgs", &["state", "zabState", "leaderAddr", "queuedRequests"], "msgs[j][leaderAddr[j]] := Append(msgs[j][leaderAddr[j]], ACK(Head(queuedRequests[j]).zxid))")
        .guard(|v, b| {
            let j = n_of(b, 0);
            alive(v, j) && !at(v, "queuedRequests", j).is_empty()
        })
        .update(move |v, b, w| {
            let j = n_of(b, 0);
            let q = at(v, "queuedRequests", j).as_seq();
            let t = q[0].clone();
            w.set_at("queuedRequests", j, slice(&q[1..]));
            w.set_at("history", j, at(v, "history", j).pushed(t.clone()));
            let phase_ok = is_at(v, "zabState", j, BROADCAST)
                || (early && is_at(v, "zabState", j, SYNCHRONIZATION));
            if let (true, true, Some(l)) = (is_at(v, "state", j, FOLLOWING), phase_ok, leader_of(v, j)) {
                send(w, j, l, msg(kind::ACK, [zxid(&t).clone()]));
            }
        })
}
