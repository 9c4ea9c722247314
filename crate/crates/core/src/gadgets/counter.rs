//! Binary counter whose only valid orderings count from 0 to 2^k − 1, and
//! the chooser instance built on top of it.
//!
//! Logical states (INIT, IDLE, EN_i, DONE_i) each expand to three state
//! gadgets: entry `E_`, reset `R_` and exit `X_`. A state gadget is active
//! while its bank `b2` is in default. The phases of one state reset each
//! other round-robin, and each entry condition also checks that the gadget
//! reset two phases earlier is back at rest.
//!
//! A state gadget is a detector `d` feeding a stable bit `b1`/`b2`. The
//! detector owes one unit per satisfied zero-condition (a bank in default)
//! and holds `c − 1` units of external assets plus one unit per violated
//! one-condition, where `c` is the number of zero-conditions. It defaults,
//! always to the same rate, exactly when every condition holds, and rests at
//! one otherwise, so idle gadgets need no initialization.
//!
//! Bits are stable bits: `P{j}` is in default iff bit `j` is one, `N{j}` is
//! its negation. EN_i sets `P{i}`, clears `P{j}` for `j < i` and moves the
//! negated bits accordingly. The reset phase drives these effects, since it
//! only enters once the predecessor's exit gadget is at rest, and the exit
//! phase verifies them while the reset phase is still active. A starter
//! bank `y0` that defaults in the first step enables INIT.

use std::collections::BTreeMap;

use crate::engine::TraceEvent;
use crate::error::{Error, Result};
use crate::model::FinancialSystem;
use crate::scalar::Scalar;

use super::basic::stable_bit_into;
use super::reductions::literal_bank;
use super::{CnfFormula, Expectation, GadgetBlueprint, Net};

/// Names of the gadgets making up a counter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterLayout {
    pub bits: usize,
    /// State gadgets, e.g. `E_IDLE`.
    pub phases: Vec<String>,
    /// Bank whose default starts the counter.
    pub y0: String,
}

impl CounterLayout {
    /// Bank of bit `j` (1-based) that is in default iff the bit is one.
    pub fn bit_bank(j: usize) -> String {
        format!("P{j}.b2")
    }

    /// Bank of bit `j` that is in default iff the bit is zero.
    pub fn negated_bit_bank(j: usize) -> String {
        format!("N{j}.b2")
    }

    /// Activity bank of a state gadget.
    pub fn active_bank(phase: &str) -> String {
        format!("{phase}.b2")
    }

    /// Counter value each time IDLE becomes active along a trace that
    /// starts from the all-ones vector.
    pub fn idle_values<S: Scalar>(
        &self,
        system: &FinancialSystem<S>,
        trace: &[TraceEvent<S>],
    ) -> Result<Vec<u64>> {
        let idle = system.index_of(&Self::active_bank("E_IDLE"))?;
        let bits = (1..=self.bits)
            .map(|j| system.index_of(&Self::bit_bank(j)))
            .collect::<Result<Vec<_>>>()?;
        let mut rates = vec![S::one(); system.len()];
        let mut values = Vec::new();
        for e in trace {
            rates[e.bank] = e.new_rate.clone();
            if e.bank == idle && e.new_rate.is_zero() {
                let value = bits
                    .iter()
                    .enumerate()
                    .filter(|(_, &b)| rates[b].is_zero())
                    .map(|(j, _)| 1u64 << j)
                    .sum();
                values.push(value);
            }
        }
        Ok(values)
    }
}

struct Logical {
    name: String,
    preds: Vec<String>,
    zero: Vec<String>,
    one: Vec<String>,
    sets: Vec<String>,
    clears: Vec<String>,
}

/// Entry conditions of one state gadget.
#[derive(Default)]
struct Phase {
    name: String,
    /// At most one of these is ever in default; together they count as a
    /// single zero-condition.
    trigger: Vec<String>,
    zero: Vec<String>,
    /// Banks that must be at one, with the weight that turns a violation
    /// into one unit of assets.
    one: Vec<(String, i64)>,
}

impl Phase {
    fn conditions(&self) -> i64 {
        1 + self.zero.len() as i64
    }

    fn one(&mut self, bank: String) {
        self.one.push((bank, 1));
    }
}

fn logical_states(k: usize) -> Vec<Logical> {
    let mut states = Vec::new();
    let mut init_sets = vec!["IB".to_string()];
    init_sets.extend((1..=k).map(|j| format!("N{j}")));
    states.push(Logical {
        name: "INIT".into(),
        preds: vec![],
        zero: vec![],
        one: vec!["IB.b2".into()],
        sets: init_sets,
        clears: vec![],
    });
    let mut idle_preds = vec!["INIT".to_string()];
    idle_preds.extend((1..=k).map(|i| format!("DONE{i}")));
    states.push(Logical {
        name: "IDLE".into(),
        preds: idle_preds,
        zero: vec![],
        one: vec![],
        sets: vec![],
        clears: vec![],
    });
    for i in 1..=k {
        let mut sets = vec![format!("P{i}")];
        sets.extend((1..i).map(|j| format!("N{j}")));
        let mut clears: Vec<String> = (1..i).map(|j| format!("P{j}")).collect();
        clears.push(format!("N{i}"));
        states.push(Logical {
            name: format!("EN{i}"),
            preds: vec!["IDLE".into()],
            zero: (1..i).map(|j| format!("P{j}.b2")).collect(),
            one: vec![format!("P{i}.b2")],
            sets,
            clears,
        });
        states.push(Logical {
            name: format!("DONE{i}"),
            preds: vec![format!("EN{i}")],
            zero: vec![],
            one: vec![],
            sets: vec![],
            clears: vec![],
        });
    }
    states
}

/// Builds the counter into `net`. `extra_one` adds conditions (banks that
/// must be at one) to individual state gadgets.
pub(crate) fn counter_into<S: Scalar>(
    net: &mut Net<S>,
    k: usize,
    extra_one: &BTreeMap<String, Vec<String>>,
) -> Result<CounterLayout> {
    if k == 0 {
        return Err(Error::InvalidParams("counter needs k ≥ 1".into()));
    }
    let y0 = "y0".to_string();
    let states = logical_states(k);
    let mut phases: Vec<Phase> = Vec::new();
    // (reset trigger gadget, reset target gadget)
    let mut resets: Vec<(String, String)> = Vec::new();
    for s in &states {
        let (e, r, x) = (
            format!("E_{}", s.name),
            format!("R_{}", s.name),
            format!("X_{}", s.name),
        );
        let mut entry = Phase {
            name: e.clone(),
            trigger: if s.preds.is_empty() {
                vec![y0.clone()]
            } else {
                s.preds.iter().map(|p| format!("X_{p}.b2")).collect()
            },
            zero: s.zero.clone(),
            ..Phase::default()
        };
        let reset = Phase {
            name: r.clone(),
            trigger: vec![format!("{e}.b2")],
            ..Phase::default()
        };
        let mut exit = Phase {
            name: x.clone(),
            trigger: vec![format!("{r}.b2")],
            zero: s.sets.iter().map(|bit| format!("{bit}.b2")).collect(),
            ..Phase::default()
        };
        for bank in &s.one {
            entry.one(bank.clone());
        }
        for bit in &s.clears {
            exit.one(format!("{bit}.b1"));
            exit.one(format!("{bit}.b2"));
        }
        for p in &s.preds {
            resets.push((e.clone(), format!("X_{p}")));
        }
        phases.push(entry);
        phases.push(reset);
        phases.push(exit);
        resets.push((r, e));
        resets.push((x, format!("R_{}", s.name)));
    }
    // Rest checks: each gadget is verified by the phase two steps after it.
    let weights: BTreeMap<String, i64> = phases
        .iter()
        .map(|p| (p.name.clone(), p.conditions()))
        .collect();
    let at_rest = |phase: &mut Phase, gadget: &str| {
        phase.one.push((format!("{gadget}.d"), weights[gadget]));
        phase.one(format!("{gadget}.b1"));
        phase.one(format!("{gadget}.b2"));
    };
    for (i, s) in states.iter().enumerate() {
        for p in &s.preds {
            at_rest(&mut phases[3 * i], &format!("R_{p}"));
            at_rest(&mut phases[3 * i + 1], &format!("X_{p}"));
        }
        at_rest(&mut phases[3 * i + 2], &format!("E_{}", s.name));
    }
    for phase in &mut phases {
        for bank in extra_one.get(&phase.name).into_iter().flatten() {
            phase.one(bank.clone());
        }
    }

    net.role_bank(&y0, 0);
    net.to_sink(&y0, 1);

    let mut bits = vec!["IB".to_string()];
    for j in 1..=k {
        bits.push(format!("P{j}"));
        bits.push(format!("N{j}"));
        net.role(&format!("counter_bit_{j}_pos"), &CounterLayout::bit_bank(j));
        net.role(
            &format!("counter_bit_{j}_neg"),
            &CounterLayout::negated_bit_bank(j),
        );
    }
    for bit in &bits {
        stable_bit_into(net, &format!("{bit}.b1"), &format!("{bit}.b2"));
    }
    for s in &states {
        let trigger = format!("R_{}.b2", s.name);
        for bit in &s.sets {
            net.cds_to_sink(&format!("{bit}.b1"), &trigger, 1);
        }
        for bit in &s.clears {
            net.insure(&format!("{bit}.b1"), &trigger, 2)
                .insure(&format!("{bit}.b2"), &trigger, 1);
        }
    }

    for phase in &phases {
        let name = &phase.name;
        let [d, b1, b2] = ["d", "b1", "b2"].map(|b| format!("{name}.{b}"));
        let c = phase.conditions();
        net.role_bank(&d, c - 1).role_bank(&b1, 0).role_bank(&b2, 0);
        for z in phase.trigger.iter().chain(&phase.zero) {
            net.cds_to_sink(&d, z, 1);
        }
        for (z, weight) in &phase.one {
            net.insure(&d, z, *weight);
        }
        net.cds_to_sink(&b1, &b2, 1)
            .cds_to_sink(&b2, &b1, 1)
            .cds_to_sink(&b1, &d, c);
    }
    for (trigger, target) in &resets {
        let t = format!("{trigger}.b2");
        net.insure(&format!("{target}.b1"), &t, 2)
            .insure(&format!("{target}.b2"), &t, 1);
    }

    Ok(CounterLayout {
        bits: k,
        phases: phases.into_iter().map(|p| p.name).collect(),
        y0,
    })
}

/// Counter over `k` bits.
pub fn build_counter<S: Scalar>(k: usize) -> Result<GadgetBlueprint<S>> {
    Ok(counter_with_layout(k)?.0)
}

pub fn counter_with_layout<S: Scalar>(k: usize) -> Result<(GadgetBlueprint<S>, CounterLayout)> {
    let mut net = Net::new();
    let layout = counter_into(&mut net, k, &BTreeMap::new())?;
    net.expect(Expectation::Described(format!(
        "every ordering passes IDLE with counter values 0..{} in order, then stabilizes",
        (1u64 << k) - 1
    )))
    .tight();
    Ok((net.finish("counter")?, layout))
}

/// Counter plus a chooser bank `v` that may default during each IDLE phase.
/// Its default halts the counter through the stable bit `w1`/`w2`; literal
/// and clause banks then resolve and `v`'s equity becomes the number of
/// clauses satisfied by the halted assignment.
pub fn build_best_time_instance<S: Scalar>(formula: &CnfFormula) -> Result<GadgetBlueprint<S>> {
    let k = formula.variables();
    let mut net = Net::new();
    let halt = vec!["chooser".to_string(), "halt.w2".to_string()];
    let extra: BTreeMap<String, Vec<String>> = ["R_IDLE", "X_IDLE"]
        .into_iter()
        .map(|g| (g.to_string(), halt.clone()))
        .collect();
    counter_into(&mut net, k, &extra)?;

    let v = "chooser";
    net.role_bank(v, 0);
    net.cds_to_sink(v, &CounterLayout::active_bank("E_IDLE"), 1);
    net.bank("halt.w1", 0).bank("halt.w2", 0);
    net.role("halt", "halt.w2");
    net.cds_to_sink("halt.w1", v, 1)
        .cds_to_sink("halt.w1", "halt.w2", 1)
        .cds_to_sink("halt.w2", "halt.w1", 1);
    net.insure(v, "halt.w2", 1);

    for j in 1..=k as i64 {
        for lit in [j, -j] {
            let bank = format!("lit.{}", literal_bank(lit));
            let opposite = if lit > 0 {
                CounterLayout::negated_bit_bank(j as usize)
            } else {
                CounterLayout::bit_bank(j as usize)
            };
            net.role_bank(&bank, 0);
            net.cds_to_sink(&bank, "halt.w2", 1)
                .insure(&bank, &opposite, 1);
        }
    }
    for (i, clause) in formula.clauses().iter().enumerate() {
        let c = format!("clause{}", i + 1);
        net.role_bank(&c, 0);
        for &lit in clause {
            net.cds_to_sink(&c, &format!("lit.{}", literal_bank(lit)), 1);
        }
        net.insure(v, &c, 1);
    }
    net.expect(Expectation::Described(
        "the chooser's final equity is the number of clauses satisfied when it defaulted".into(),
    ))
    .tight();
    net.finish("best_time")
}
