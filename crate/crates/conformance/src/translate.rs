//! Implementation observations expressed as model values.

use mgcheck_core::value::{boolean, int, pair, seq, set, sym};
use mgcheck_core::{State, Value};
use mgcheck_sim::{LearnerPhase, Msg, ObservableState, Phase, Role, SyncMode, Txn, Zxid};
use mgcheck_zab::model::{self, kind, mode, msg, txn, EPOCH_DONE, LOGGED, ACKED};

fn zxid(z: Zxid) -> Value {
    pair(int(z.epoch), int(z.counter))
}

fn tx(t: &Txn) -> Value {
    txn(t.zxid.epoch, t.zxid.counter, t.payload)
}

fn txns<'a>(ts: impl IntoIterator<Item = &'a Txn>) -> Value {
    seq(ts.into_iter().map(tx))
}

/// Model form of a leader/follower message; election traffic has none.
pub fn message(m: &Msg) -> Option<Value> {
    Some(match m {
        Msg::NewLeader { epoch, mode: md, keep, txns: ts } => {
            let md = match md {
                SyncMode::Diff => mode::DIFF,
                SyncMode::Trunc => mode::TRUNC,
                SyncMode::Snap => mode::SNAP,
            };
            msg(kind::NEWLEADER, [int(*epoch), sym(md), int(*keep as i64), txns(ts)])
        }
        Msg::AckNewLeader { len } => msg(kind::ACKLD, [int(*len as i64)]),
        Msg::UpToDate { commit } => msg(kind::UPTODATE, [int(*commit as i64)]),
        Msg::AckUpToDate { commit } => msg(kind::ACKUPTODATE, [int(*commit as i64)]),
        Msg::Proposal(t) => msg(kind::PROPOSAL, [tx(t)]),
        Msg::Ack(z) => msg(kind::ACK, [zxid(*z)]),
        Msg::Commit(z) => msg(kind::COMMIT, [zxid(*z)]),
        Msg::Vote(_)
        | Msg::FollowerInfo { .. }
        | Msg::LeaderInfo { .. }
        | Msg::AckEpoch { .. } => return None,
    })
}

fn role(r: Role) -> &'static str {
    match r {
        Role::Looking => model::LOOKING,
        Role::Following => model::FOLLOWING,
        Role::Leading => model::LEADING,
    }
}

fn phase(r: Role, p: Phase) -> &'static str {
    match (r, p) {
        (Role::Looking, _) | (_, Phase::Election) | (_, Phase::Discovery) => model::ELECTION,
        (_, Phase::Synchronization) => model::SYNCHRONIZATION,
        (_, Phase::Broadcast) => model::BROADCAST,
    }
}

fn learner_phase(p: LearnerPhase) -> i64 {
    match p {
        LearnerPhase::Connected => model::LP_CONNECTED,
        LearnerPhase::NewLeaderSent => model::LP_NEWLEADER_SENT,
        LearnerPhase::Synced => model::LP_SYNCED,
        LearnerPhase::UpToDateAcked => model::LP_UPTODATE_ACKED,
    }
}

/// The implementation's value for model variable `var`.
pub fn translate_var(var: &str, o: &ObservableState) -> Option<Value> {
    let n = o.nodes.len();
    let per = |f: &dyn Fn(&mgcheck_sim::NodeView) -> Value| seq(o.nodes.iter().map(f));
    Some(match var {
        "state" => per(&|x| sym(role(x.role))),
        "zabState" => per(&|x| sym(phase(x.role, x.phase))),
        "currentEpoch" => per(&|x| int(x.current_epoch)),
        "acceptedEpoch" => per(&|x| int(x.accepted_epoch)),
        "history" => per(&|x| txns(&x.log)),
        "lastCommitted" => per(&|x| int(x.last_committed as i64)),
        "alive" => per(&|x| boolean(x.alive)),
        "leaderAddr" => per(&|x| int(x.leader.map_or(-1, |l| l as i64))),
        "queuedRequests" => per(&|x| txns(&x.pending)),
        "packetsSync" => per(&|x| txns(&x.stash)),
        "commitTarget" => per(&|x| int(x.commit_target as i64)),
        "syncProgress" => per(&|x| {
            int(x.sync.map_or(0, |s| {
                let mut bits = 0;
                if s.epoch_done {
                    bits |= EPOCH_DONE;
                }
                if s.logged && (s.acked || x.pending.is_empty()) {
                    bits |= LOGGED;
                }
                if s.acked {
                    bits |= ACKED;
                }
                bits
            }))
        }),
        "learnerPhase" => per(&|x| {
            seq((0..n).map(|m| {
                let p = x.learners.iter().find(|r| r.follower == m);
                int(p.map_or(model::LP_NONE, |r| learner_phase(r.phase)))
            }))
        }),
        "ackIndex" => per(&|x| {
            seq((0..n).map(|m| {
                let p = x.learners.iter().find(|r| r.follower == m);
                int(p.map_or(0, |r| r.acked as i64))
            }))
        }),
        "msgs" => seq((0..n).map(|from| {
            seq((0..n).map(|to| seq(o.channel(from, to).iter().filter_map(message))))
        })),
        "partitioned" => set(o.partitions.iter().map(|&(a, b)| model::edge(a, b))),
        "committed" => txns(&o.committed),
        "proposed" => txns(&o.proposed),
        _ => return None,
    })
}

/// Model state built from the observation; variables the implementation
/// does not expose keep their values from `reference`.
pub fn translate_state(o: &ObservableState, reference: &State, vars: &[String]) -> State {
    let values = reference
        .iter()
        .map(|(name, v)| {
            if vars.iter().any(|x| x == name) {
                translate_var(name, o).unwrap_or_else(|| v.clone())
            } else {
                v.clone()
            }
        })
        .collect();
    State::new(reference.layout().clone(), values)
}
