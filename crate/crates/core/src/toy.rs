//! Small randomly generated systems over integer registers, used for
//! exercising the kernel against independent search code.

use crate::action::{ActionDef, Invariant, InvariantLevel};
use crate::algebra::{ComposeError, ComposedSpec, VarClass, VarDecl};
use crate::value::{int, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `regs[target] := (regs[src] + add + k) mod modulus` for `k < spread`,
/// enabled while `regs[guard_var] < guard_below`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToyAction {
    pub guard_var: usize,
    pub guard_below: i64,
    pub target: usize,
    pub src: usize,
    pub add: i64,
    pub spread: i64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToySystem {
    pub modulus: i64,
    pub registers: usize,
    pub actions: Vec<ToyAction>,
    /// The invariant claims this valuation is unreachable.
    pub bad: Vec<i64>,
}

pub fn reg(i: usize) -> String {
    format!("r{i}")
}

impl ToySystem {
    /// At most `modulus^registers` states; the generator keeps that under 50,000.
    pub fn random(seed: u64) -> ToySystem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let registers = rng.gen_range(2..=4);
        let max_mod = match registers {
            2 => 200,
            3 => 36,
            _ => 14,
        };
        let modulus = rng.gen_range(5..=max_mod);
        let actions = (0..rng.gen_range(2..=5))
            .map(|_| ToyAction {
                guard_var: rng.gen_range(0..registers),
                guard_below: rng.gen_range(1..=modulus),
                target: rng.gen_range(0..registers),
                src: rng.gen_range(0..registers),
                add: rng.gen_range(0..modulus),
                spread: rng.gen_range(1..=3),
            })
            .collect();
        let bad = (0..registers).map(|_| rng.gen_range(0..modulus)).collect();
        ToySystem {
            modulus,
            registers,
            actions,
            bad,
        }
    }

    pub fn step(&self, a: &ToyAction, regs: &[i64], k: i64) -> Option<Vec<i64>> {
        if regs[a.guard_var] >= a.guard_below {
            return None;
        }
        let mut next = regs.to_vec();
        next[a.target] = (regs[a.src] + a.add + k).rem_euclid(self.modulus);
        Some(next)
    }

    pub fn invariant(&self) -> Invariant {
        let bad = self.bad.clone();
        Invariant::state("avoid-bad", "the bad valuation is unreachable", InvariantLevel::Protocol, move |v| {
            bad.iter()
                .enumerate()
                .any(|(i, b)| v.get(&reg(i)).as_int() != *b)
        })
    }

    pub fn spec(&self) -> Result<ComposedSpec, ComposeError> {
        let vars = (0..self.registers)
            .map(|i| VarDecl::new(&reg(i), int(0), VarClass::Shared))
            .collect();
        let actions = self
            .actions
            .iter()
            .enumerate()
            .map(|(n, a)| {
                let (g, t, s) = (reg(a.guard_var), reg(a.target), reg(a.src));
                let a = a.clone();
                let modulus = self.modulus;
                let (g2, t2, s2) = (g.clone(), t.clone(), s.clone());
                ActionDef::new(format!("Act{n}"))
                    .param("k", (0..a.spread).map(int))
                    .reads(&[&g])
                    .writes(&t, &[&s], &format!("{t} := ({s} + {} + k) % {modulus}", a.add))
                    .guard(move |v, _| v.get(&g2).as_int() < a.guard_below)
                    .update(move |v, b: &[Value], w| {
                        let x = (v.get(&s2).as_int() + a.add + b[0].as_int()).rem_euclid(modulus);
                        w.set(&t2, int(x));
                    })
            })
            .collect();
        ComposedSpec::standalone("toy", vars, actions, vec![self.invariant()])
    }
}

fn small_domain(max: i64) -> impl Iterator<Item = Value> {
    (1..=max).map(int)
}

/// Producer/consumer pair over a one-slot buffer. The producer is available
/// as a two-step `baseline`, a single-step `coarse` and a `mutated` coarse
/// variant that publishes a different value.
pub fn handoff_library() -> crate::algebra::Library {
    use crate::algebra::{Library, ModuleSpec};
    let mut lib = Library::new();
    lib.add_variant("Producer", "baseline", |_| {
        ModuleSpec::new("Producer", "baseline")
            .var(VarDecl::new("data", int(0), VarClass::Shared))
            .var(VarDecl::new("buf", int(0), VarClass::Volatile))
            .var(VarDecl::new("prep", int(0), VarClass::Volatile))
            .action(
                ActionDef::new("Prepare")
                    .param("v", small_domain(2))
                    .reads(&["data", "prep"])
                    .writes("buf", &[], "buf := v")
                    .writes("prep", &[], "prep := 1")
                    .guard(|s, _| s.get("data").as_int() == 0 && s.get("prep").as_int() == 0)
                    .update(|_, b, w| {
                        w.set("buf", b[0].clone());
                        w.set("prep", int(1));
                    }),
            )
            .action(
                ActionDef::new("Publish")
                    .locals(&["v"])
                    .reads(&["data", "prep"])
                    .writes("data", &["buf"], "data := v")
                    .writes("prep", &[], "prep := 0")
                    .writes("buf", &[], "buf := 0")
                    .guard(|s, _| s.get("data").as_int() == 0 && s.get("prep").as_int() == 1)
                    .update(|s, _, w| {
                        w.set("data", s.get("buf").clone());
                        w.set("prep", int(0));
                        w.set("buf", int(0));
                    }),
            )
            .action(
                ActionDef::new("Abort")
                    .reads(&["prep"])
                    .writes("prep", &[], "prep := 0")
                    .writes("buf", &[], "buf := 0")
                    .guard(|s, _| s.get("prep").as_int() == 1)
                    .update(|_, _, w| {
                        w.set("prep", int(0));
                        w.set("buf", int(0));
                    }),
            )
    });
    for (gran, offset) in [("coarse", 0), ("mutated", 1)] {
        lib.add_variant("Producer", gran, move |_| {
            let expr = if offset == 0 { "data := v".to_string() } else { format!("data := v + {offset}") };
            ModuleSpec::new("Producer", gran)
                .var(VarDecl::new("data", int(0), VarClass::Shared))
                .action(
                    ActionDef::new("Produce")
                        .param("v", small_domain(2))
                        .reads(&["data"])
                        .writes("data", &[], &expr)
                        .guard(|s, _| s.get("data").as_int() == 0)
                        .update(move |_, b, w| w.set("data", int(b[0].as_int() + offset))),
                )
        });
    }
    lib.add_variant("Consumer", "baseline", |_| {
        ModuleSpec::new("Consumer", "baseline")
            .var(VarDecl::new("data", int(0), VarClass::Shared))
            .var(VarDecl::new("got", int(0), VarClass::Volatile))
            .var(VarDecl::new("taken", int(0), VarClass::Volatile))
            .action(
                ActionDef::new("Consume")
                    .reads(&["data", "taken"])
                    .writes("got", &["data"], "got := data")
                    .writes("data", &[], "data := 0")
                    .writes("taken", &["taken"], "taken := taken + 1")
                    .guard(|s, _| s.get("data").as_int() != 0 && s.get("taken").as_int() < 3)
                    .update(|s, _, w| {
                        w.set("got", s.get("data").clone());
                        w.set("data", int(0));
                        w.set("taken", int(s.get("taken").as_int() + 1));
                    }),
            )
    });
    lib
}

/// Counter incremented through a load/store pair, watched by a monitor.
pub fn counter_library() -> crate::algebra::Library {
    use crate::algebra::{Library, ModuleSpec};
    let mut lib = Library::new();
    lib.add_variant("Incrementer", "baseline", |_| {
        ModuleSpec::new("Incrementer", "baseline")
            .var(VarDecl::new("cnt", int(0), VarClass::Shared))
            .var(VarDecl::new("tmp", int(0), VarClass::Volatile))
            .var(VarDecl::new("phase", int(0), VarClass::Volatile))
            .action(
                ActionDef::new("Load")
                    .reads(&["cnt", "phase"])
                    .writes("tmp", &["cnt"], "tmp := cnt")
                    .writes("phase", &[], "phase := 1")
                    .guard(|s, _| s.get("phase").as_int() == 0 && s.get("cnt").as_int() < 3)
                    .update(|s, _, w| {
                        w.set("tmp", s.get("cnt").clone());
                        w.set("phase", int(1));
                    }),
            )
            .action(
                ActionDef::new("Store")
                    .locals(&["c"])
                    .reads(&["phase"])
                    .writes("cnt", &["tmp"], "cnt := c + 1")
                    .writes("phase", &[], "phase := 0")
                    .guard(|s, _| s.get("phase").as_int() == 1)
                    .update(|s, _, w| {
                        w.set("cnt", int(s.get("tmp").as_int() + 1));
                        w.set("phase", int(0));
                    }),
            )
            .action(
                ActionDef::new("Yield")
                    .reads(&["phase"])
                    .writes("phase", &[], "phase := 0")
                    .guard(|s, _| s.get("phase").as_int() == 1)
                    .update(|_, _, w| w.set("phase", int(0))),
            )
    });
    for (gran, step) in [("coarse", 1), ("mutated", 2)] {
        lib.add_variant("Incrementer", gran, move |_| {
            let expr = format!("cnt := c + {step}");
            ModuleSpec::new("Incrementer", gran)
                .var(VarDecl::new("cnt", int(0), VarClass::Shared))
                .action(
                    ActionDef::new("Increment")
                        .locals(&["c"])
                        .reads(&["cnt"])
                        .writes("cnt", &["cnt"], &expr)
                        .guard(|s, _| s.get("cnt").as_int() < 3)
                        .update(move |s, _, w| w.set("cnt", int(s.get("cnt").as_int() + step))),
                )
        });
    }
    lib.add_variant("Monitor", "baseline", |_| {
        ModuleSpec::new("Monitor", "baseline")
            .var(VarDecl::new("cnt", int(0), VarClass::Shared))
            .var(VarDecl::new("seen", int(0), VarClass::Volatile))
            .action(
                ActionDef::new("Observe")
                    .reads(&["cnt", "seen"])
                    .writes("seen", &["cnt"], "seen := cnt")
                    .guard(|s, _| s.get("cnt").as_int() > s.get("seen").as_int())
                    .update(|s, _, w| w.set("seen", s.get("cnt").clone())),
            )
    });
    lib
}
