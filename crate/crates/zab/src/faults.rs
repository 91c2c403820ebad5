//! Crashes, restarts and network partitions. Built after the other modules
//! so that a crash can reset every volatile and session variable they declare.

use crate::model::*;
use mgcheck_core::value::{boolean, int};
use mgcheck_core::{ActionDef, BuildContext, ModuleSpec, Value, VarClass, VarDecl};

pub const FAULTS_MODULE: &str = "Faults";

fn n_of(b: &[Value], k: usize) -> usize {
    b[k].as_int() as usize
}

pub fn module(b: &BuildContext, opts: ZabOptions) -> ModuleSpec {
    let own = vec![
        VarDecl::new("crashesLeft", int(b.faults.max_crashes as i64), VarClass::Shared),
        VarDecl::new("partitionsLeft", int(b.faults.max_partitions as i64), VarClass::Shared),
    ];
    let mut all: Vec<VarDecl> = b.declared.to_vec();
    for d in common_vars(b.scale.nodes) {
        if !all.iter().any(|x| x.name == d.name) {
            all.push(d);
        }
    }
    let c = Ctx::new(b, opts).with_teardown(&all);
    let volatile: Vec<(String, Value)> = all
        .iter()
        .filter(|d| matches!(d.class, VarClass::Volatile | VarClass::Session))
        .map(|d| (d.name.clone(), d.init.clone()))
        .collect();

    let mut m = ModuleSpec::new(FAULTS_MODULE, "standard");
    for d in own.into_iter().chain(common_vars(b.scale.nodes)) {
        m = m.var(d);
    }

    let cu = c.clone();
    let vol = volatile.clone();
    let n = c.n;
    let mut crash = ActionDef::new("Crash")
        .param("i", c.node_domain())
        .reads(&["alive", "crashesLeft", "state", "leaderAddr", "learnerPhase", "zabState"])
        .writes("alive", &[], "alive[i] := FALSE")
        .writes("crashesLeft", &["crashesLeft"], "crashesLeft := crashesLeft - 1")
        .writes("msgs", &[], "msgs := DropChannelsOf(i)");
    for (var, _) in &volatile {
        crash = crash.writes(var, &[], &format!("{var}[i] := Init({var})[i]"));
    }
    let crash = teardown_writes(crash, &c)
        .guard(|v, b| alive(v, n_of(b, 0)) && v.get("crashesLeft").as_int() > 0)
        .update(move |v, b, w| {
            let i = n_of(b, 0);
            shutdown(&cu, w, i);
            for (var, init) in &vol {
                w.set_at(var, i, init.at(i).clone());
            }
            for k in 0..n {
                clear_channel(w, i, k);
                clear_channel(w, k, i);
            }
            w.set_at("alive", i, boolean(false));
            w.set("crashesLeft", int(v.get("crashesLeft").as_int() - 1));
        });

    let restart = ActionDef::new("Restart")
        .param("i", c.node_domain())
        .reads(&["alive"])
        .writes("alive", &[], "alive[i] := TRUE")
        .guard(|v, b| !alive(v, n_of(b, 0)))
        .update(|_, b, w| w.set_at("alive", n_of(b, 0), boolean(true)));

    let cp = c.clone();
    let partition = ActionDef::new("PartitionStart")
        .param("i", c.node_domain())
        .param("j", c.node_domain())
        .reads(&["alive", "partitioned", "partitionsLeft", "state", "leaderAddr", "learnerPhase", "zabState"])
        .writes("partitioned", &["partitioned"], "partitioned := partitioned \\cup {<<i, j>>}")
        .writes("partitionsLeft", &["partitionsLeft"], "partitionsLeft := partitionsLeft - 1");
    let partition = teardown_writes(partition, &c)
        .guard(|v, b| {
            let (i, j) = (n_of(b, 0), n_of(b, 1));
            i < j
                && alive(v, i)
                && alive(v, j)
                && connected(v, i, j)
                && v.get("partitionsLeft").as_int() > 0
        })
        .update(move |v, b, w| {
            let (i, j) = (n_of(b, 0), n_of(b, 1));
            w.set("partitioned", v.get("partitioned").with_inserted(edge(i, j)));
            w.set("partitionsLeft", int(v.get("partitionsLeft").as_int() - 1));
            clear_channel(w, i, j);
            clear_channel(w, j, i);
            link_lost(&cp, w, i, j);
        });

    let heal = ActionDef::new("PartitionRecover")
        .param("i", c.node_domain())
        .param("j", c.node_domain())
        .reads(&["partitioned"])
        .writes("partitioned", &["partitioned"], "partitioned := partitioned \\ {<<i, j>>}")
        .guard(|v, b| {
            let (i, j) = (n_of(b, 0), n_of(b, 1));
            i < j && !connected(v, i, j)
        })
        .update(|v, b, w| {
            let (i, j) = (n_of(b, 0), n_of(b, 1));
            w.set("partitioned", v.get("partitioned").with_removed(&edge(i, j)));
        });

    m = m.action(crash).action(restart).action(partition).action(heal);
    for inv in crate::invariants::protocol_invariants() {
        m = m.invariant(inv);
    }
    m
}
