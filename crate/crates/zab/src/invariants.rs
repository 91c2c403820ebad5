//! Safety predicates. Protocol invariants hold for any correct Zab run;
//! code invariants describe the error paths of the six seeded bugs.

use crate::model::*;
use mgcheck_core::{Invariant, InvariantLevel, StepRef, Value, View};
use std::collections::BTreeSet;

fn nodes(v: &View) -> std::ops::Range<usize> {
    0..v.get("state").len()
}

fn committed_prefix<'a>(v: &View<'a>, i: usize) -> &'a [Value] {
    let h = history(v, i);
    let lc = (int_at(v, "lastCommitted", i).max(0) as usize).min(h.len());
    &h[..lc]
}

fn bound_node(s: &StepRef, k: usize) -> usize {
    s.bindings[k].as_int() as usize
}

pub const PROTOCOL_IDS: [&str; 10] = [
    "SingleLeaderPerEpoch",
    "EpochMonotonic",
    "EpochOrder",
    "HistoryOrder",
    "CommittedPrefixAgreement",
    "LeaderCompleteness",
    "TotalOrder",
    "PrimaryOrder",
    "Integrity",
    "CommitIndexBound",
];

pub const CODE_IDS: [&str; 6] = ["I-4394", "I-4643", "I-4646", "I-3023", "I-4685", "I-4712"];

pub fn protocol_invariants() -> Vec<Invariant> {
    use InvariantLevel::Protocol;
    vec![
        Invariant::state(
            "SingleLeaderPerEpoch",
            "no two leaders share an epoch",
            Protocol,
            |v| {
                let mut seen = BTreeSet::new();
                nodes(v)
                    .filter(|&i| leader_in(v, i))
                    .all(|i| seen.insert(int_at(v, "currentEpoch", i)))
            },
        ),
        Invariant::transition(
            "EpochMonotonic",
            "currentEpoch and acceptedEpoch never decrease",
            Protocol,
            None,
            |pre, _, post| {
                nodes(pre).all(|i| {
                    int_at(post, "currentEpoch", i) >= int_at(pre, "currentEpoch", i)
                        && int_at(post, "acceptedEpoch", i) >= int_at(pre, "acceptedEpoch", i)
                })
            },
        ),
        Invariant::state("EpochOrder", "currentEpoch <= acceptedEpoch", Protocol, |v| {
            nodes(v).all(|i| int_at(v, "currentEpoch", i) <= int_at(v, "acceptedEpoch", i))
        }),
        Invariant::state("HistoryOrder", "history zxids strictly increase", Protocol, |v| {
            nodes(v).all(|i| history(v, i).windows(2).all(|w| zxid(&w[0]) < zxid(&w[1])))
        }),
        Invariant::state(
            "CommittedPrefixAgreement",
            "committed prefixes agree on their common length",
            Protocol,
            |v| {
                let ps: Vec<&[Value]> = nodes(v).map(|i| committed_prefix(v, i)).collect();
                ps.iter().enumerate().all(|(a, p)| {
                    ps[a + 1..].iter().all(|q| {
                        let k = p.len().min(q.len());
                        p[..k] == q[..k]
                    })
                })
            },
        ),
        Invariant::state(
            "LeaderCompleteness",
            "an established leader holds every committed transaction",
            Protocol,
            |v| {
                let committed = v.get("committed").as_seq();
                nodes(v)
                    .filter(|&l| leader_in(v, l) && is_at(v, "zabState", l, BROADCAST))
                    .all(|l| committed.iter().all(|t| history(v, l).contains(t)))
            },
        ),
        Invariant::state(
            "TotalOrder",
            "every committed prefix is a prefix of the global commit order",
            Protocol,
            |v| {
                let committed = v.get("committed").as_seq();
                nodes(v).all(|i| committed.starts_with(committed_prefix(v, i)))
            },
        ),
        Invariant::state(
            "PrimaryOrder",
            "a delivered transaction is preceded by every earlier proposal of its epoch",
            Protocol,
            |v| {
                let proposed = v.get("proposed").as_seq();
                nodes(v).all(|i| {
                    let p = committed_prefix(v, i);
                    p.iter().enumerate().all(|(k, t)| {
                        let Some(pos) = proposed.iter().position(|x| x == t) else {
                            return false;
                        };
                        proposed[..pos]
                            .iter()
                            .filter(|x| zxid_epoch(x) == zxid_epoch(t))
                            .all(|x| p[..k].contains(x))
                    })
                })
            },
        ),
        Invariant::state(
            "Integrity",
            "only proposed transactions are logged or committed",
            Protocol,
            |v| {
                let proposed = v.get("proposed").as_seq();
                v.get("committed").as_seq().iter().all(|t| proposed.contains(t))
                    && nodes(v).all(|i| history(v, i).iter().all(|t| proposed.contains(t)))
            },
        ),
        Invariant::state(
            "CommitIndexBound",
            "0 <= lastCommitted <= Len(history)",
            Protocol,
            |v| {
                nodes(v).all(|i| {
                    let lc = int_at(v, "lastCommitted", i);
                    lc >= 0 && lc as usize <= history(v, i).len()
                })
            },
        ),
    ]
}

/// A COMMIT during sync with no pending proposal kills the follower's handler.
pub fn zk4394() -> Invariant {
    Invariant::transition(
        "I-4394",
        "follower in sync receives a COMMIT matching no pending proposal",
        InvariantLevel::Code,
        Some(&["FollowerProcessCOMMITInSync"]),
        |pre, s, post| {
            let j = bound_node(s, 0);
            !(at(pre, "packetsSync", j).is_empty() && is_at(post, "state", j, LOOKING))
        },
    )
}

/// A leader about to sync a follower holds every committed entry the follower has.
pub fn zk4643() -> Invariant {
    Invariant::transition(
        "I-4643",
        "leader would truncate committed transactions of a follower",
        InvariantLevel::Code,
        Some(&["LeaderSyncFollower"]),
        |pre, s, _| {
            let (l, j) = (bound_node(s, 0), bound_node(s, 1));
            let hl = history(pre, l);
            pre.get("committed")
                .as_seq()
                .iter()
                .all(|t| !history(pre, j).contains(t) || hl.contains(t))
        },
    )
}

pub fn zk4646() -> Invariant {
    Invariant::state(
        "I-4646",
        "every committed transaction is logged on a quorum",
        InvariantLevel::Code,
        |v| {
            let n = v.get("state").len();
            let q = n / 2 + 1;
            v.get("committed")
                .as_seq()
                .iter()
                .all(|t| (0..n).filter(|&i| history(v, i).contains(t)).count() >= q)
        },
    )
}

/// A follower acknowledges UPTODATE only after committing what it has logged.
pub fn zk3023() -> Invariant {
    Invariant::transition(
        "I-3023",
        "UPTODATE acknowledged before the follower commits",
        InvariantLevel::Code,
        Some(&["FollowerProcessUPTODATE"]),
        |pre, s, post| {
            let j = bound_node(s, 0);
            let Some(l) = leader_of(pre, j) else { return true };
            let before = channel(pre, j, l);
            let after = channel(post, j, l);
            let acked = after.len() > before.len()
                && after[before.len()..].iter().any(|m| is_kind(m, kind::ACKUPTODATE));
            if !acked {
                return true;
            }
            let c = head(pre, l, j).map_or(0, |m| m.at(1).as_int());
            let bound = c.min(history(post, j).len() as i64);
            int_at(post, "lastCommitted", j) >= bound
        },
    )
}

pub fn zk4685() -> Invariant {
    Invariant::transition(
        "I-4685",
        "leader receives a proposal ACK before the NEWLEADER ACK",
        InvariantLevel::Code,
        Some(&["LeaderProcessACK"]),
        |pre, s, _| {
            let (l, j) = (bound_node(s, 0), bound_node(s, 1));
            lp(pre, l, j) >= LP_SYNCED
        },
    )
}

pub fn zk4712() -> Invariant {
    Invariant::transition(
        "I-4712",
        "follower logs a request left over from an earlier session",
        InvariantLevel::Code,
        Some(&["FollowerSyncProcessorLogRequest"]),
        |pre, s, _| {
            let j = bound_node(s, 0);
            let q = at(pre, "queuedRequests", j).as_seq();
            is_at(pre, "state", j, FOLLOWING)
                && q.first().is_some_and(|t| *zxid(t) > last_zxid(history(pre, j)))
        },
    )
}

pub fn code_invariant(id: &str) -> Option<Invariant> {
    Some(match id {
        "I-4394" => zk4394(),
        "I-4643" => zk4643(),
        "I-4646" => zk4646(),
        "I-3023" => zk3023(),
        "I-4685" => zk4685(),
        "I-4712" => zk4712(),
        _ => return None,
    })
}

/// The code invariant exposing a bug flag.
pub fn invariant_for_bug(bug: &str) -> Option<&'static str> {
    let i = BugFlags::NAMES.iter().position(|n| *n == bug)?;
    Some(["I-3023", "I-4394", "I-4643", "I-4646", "I-4685", "I-4712"][i])
}
