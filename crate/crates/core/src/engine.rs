//! The sequential process: one bank announces a new recovery rate per step.
//!
//! The behaviour of the process from any moment on depends only on the
//! announced rates and the weights of frozen CDSs, which together form the
//! [`StateKey`]. Time, the trace and the freeze instants are bookkeeping.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, OnceLock};

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clearing::tentative_with;
use crate::error::{Error, Result};
use crate::model::{recovery, FinancialSystem, RecoveryVector, SystemBuilder};
use crate::policy::{Policy, TargetRule};
use crate::scalar::Scalar;

/// Step ceiling used when no explicit bound is given.
pub const DEFAULT_STEP_CEILING: u64 = 1_000_000;

/// `4^n`, capped at `ceiling`.
pub fn default_max_steps(banks: usize, ceiling: u64) -> u64 {
    let exp = 2u32.saturating_mul(u32::try_from(banks).unwrap_or(u32::MAX));
    2u64.checked_pow(exp).map_or(ceiling, |v| v.min(ceiling))
}

/// Exact behavioural state: announced rates plus frozen CDS weights.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateKey<S> {
    pub rates: RecoveryVector<S>,
    pub frozen: BTreeMap<usize, S>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent<S> {
    pub time: u64,
    pub bank: usize,
    pub old_rate: S,
    pub new_rate: S,
    pub defaulting: bool,
    /// CDS indices frozen by this step.
    pub frozen: Vec<usize>,
}

/// Shared, immutable part of an engine: the system and derived indexes.
#[derive(Debug)]
pub struct Network<S> {
    system: FinancialSystem<S>,
    by_id: Vec<usize>,
    touching: Vec<Vec<usize>>,
}

impl<S: Scalar> Network<S> {
    pub fn new(system: FinancialSystem<S>) -> Arc<Self> {
        let mut by_id: Vec<usize> = (0..system.len()).collect();
        by_id.sort_by(|a, b| system.id(*a).cmp(system.id(*b)));
        let mut touching = vec![Vec::new(); system.len()];
        for (i, c) in system.cdss().iter().enumerate() {
            touching[c.debtor].push(i);
            touching[c.creditor].push(i);
        }
        Arc::new(Network {
            system,
            by_id,
            touching,
        })
    }

    pub fn system(&self) -> &FinancialSystem<S> {
        &self.system
    }

    /// Bank indices in lexicographic order of their ids.
    pub fn id_order(&self) -> &[usize] {
        &self.by_id
    }

    /// Target rates of every bank in the given state.
    pub fn targets(&self, policy: Policy, key: &StateKey<S>) -> Vec<S> {
        match policy.rule {
            TargetRule::Naive => {
                let (a, l) = self.system.balances(&key.rates, Some(&key.frozen));
                a.iter().zip(&l).map(|(a, l)| recovery(a, l)).collect()
            }
            rule => tentative_with(&self.system, &key.rates, Some(&key.frozen), rule)
                .expect("clearing-based rule"),
        }
    }

    /// Updatable banks in id order.
    pub fn updatable(&self, key: &StateKey<S>, targets: &[S]) -> Vec<usize> {
        self.by_id
            .iter()
            .copied()
            .filter(|&v| *key.rates.get(v) != targets[v])
            .collect()
    }

    /// Applies an update of `bank` to `target`; returns whether it was a
    /// defaulting step and which CDSs were frozen.
    pub fn apply(
        &self,
        policy: Policy,
        key: &mut StateKey<S>,
        bank: usize,
        target: S,
    ) -> (bool, Vec<usize>) {
        let defaulting = key.rates.get(bank).is_one() && target < S::one();
        let mut frozen = Vec::new();
        if policy.freezing && defaulting {
            for &i in &self.touching[bank] {
                if !key.frozen.contains_key(&i) {
                    let w = self.system.cds_obligation(i, &key.rates);
                    key.frozen.insert(i, w);
                    frozen.push(i);
                }
            }
        }
        key.rates.set(bank, target);
        (defaulting, frozen)
    }
}

#[derive(Debug, Clone)]
pub struct EngineState<S: Scalar> {
    network: Arc<Network<S>>,
    policy: Policy,
    key: StateKey<S>,
    freeze_times: BTreeMap<usize, u64>,
    time: u64,
    trace: Vec<TraceEvent<S>>,
    history: Vec<(StateKey<S>, BTreeMap<usize, u64>)>,
    targets: OnceLock<Vec<S>>,
}

impl<S: Scalar> EngineState<S> {
    /// All rates one, nothing frozen, time zero.
    pub fn initial(system: FinancialSystem<S>, policy: Policy) -> Self {
        Self::from_network(Network::new(system), policy)
    }

    pub fn from_network(network: Arc<Network<S>>, policy: Policy) -> Self {
        let rates = RecoveryVector::ones(network.system.len());
        EngineState {
            network,
            policy,
            key: StateKey {
                rates,
                frozen: BTreeMap::new(),
            },
            freeze_times: BTreeMap::new(),
            time: 0,
            trace: Vec::new(),
            history: Vec::new(),
            targets: OnceLock::new(),
        }
    }

    /// A state at time zero with the given announced rates (others one).
    pub fn with_rates(
        system: FinancialSystem<S>,
        policy: Policy,
        rates: &[(&str, S)],
    ) -> Result<Self> {
        let rates = RecoveryVector::with_rates(&system, rates)?;
        let mut state = Self::initial(system, policy);
        state.key.rates = rates;
        Ok(state)
    }

    pub fn network(&self) -> &Arc<Network<S>> {
        &self.network
    }

    pub fn system(&self) -> &FinancialSystem<S> {
        &self.network.system
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn rates(&self) -> &RecoveryVector<S> {
        &self.key.rates
    }

    pub fn rate(&self, id: &str) -> Result<&S> {
        self.key.rates.by_id(self.system(), id)
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn trace(&self) -> &[TraceEvent<S>] {
        &self.trace
    }

    /// Frozen CDSs: index, fixed weight, freeze time.
    pub fn frozen(&self) -> impl Iterator<Item = (usize, &S, u64)> + '_ {
        self.key
            .frozen
            .iter()
            .map(|(i, w)| (*i, w, self.freeze_times[i]))
    }

    pub fn frozen_weights(&self) -> &BTreeMap<usize, S> {
        &self.key.frozen
    }

    pub fn canonical_state(&self) -> StateKey<S> {
        self.key.clone()
    }

    pub fn key(&self) -> &StateKey<S> {
        &self.key
    }

    pub fn targets(&self) -> &[S] {
        self.targets
            .get_or_init(|| self.network.targets(self.policy, &self.key))
    }

    pub fn target_rate(&self, id: &str) -> Result<S> {
        let v = self.system().index_of(id)?;
        Ok(self.targets()[v].clone())
    }

    pub fn updatable(&self) -> Vec<usize> {
        self.network.updatable(&self.key, self.targets())
    }

    /// Updatable bank ids in lexicographic order.
    pub fn updatable_banks(&self) -> Vec<String> {
        self.updatable()
            .into_iter()
            .map(|v| self.system().id(v).to_string())
            .collect()
    }

    pub fn is_stable(&self) -> bool {
        self.updatable().is_empty()
    }

    /// Base system with every frozen CDS replaced by a debt of its frozen weight.
    pub fn effective_system(&self) -> FinancialSystem<S> {
        let system = self.system();
        let mut b = SystemBuilder::new();
        for bank in system.banks() {
            b.bank(bank.id.clone(), bank.external_assets.clone());
        }
        for d in system.debts() {
            b.debt(system.id(d.debtor), system.id(d.creditor), d.weight.clone());
        }
        for (i, c) in system.cdss().iter().enumerate() {
            match self.key.frozen.get(&i) {
                Some(w) if w.is_zero() => {}
                Some(w) => {
                    b.debt(system.id(c.debtor), system.id(c.creditor), w.clone());
                }
                None => {
                    b.cds(
                        system.id(c.debtor),
                        system.id(c.creditor),
                        system.id(c.reference),
                        c.weight.clone(),
                    );
                }
            }
        }
        b.build()
            .expect("effective system of a valid system is valid")
    }

    pub fn step(&mut self, id: &str) -> Result<&TraceEvent<S>> {
        let v = self.system().index_of(id)?;
        self.step_index(v)
    }

    pub fn step_index(&mut self, v: usize) -> Result<&TraceEvent<S>> {
        let target = self.targets()[v].clone();
        if *self.key.rates.get(v) == target {
            return Err(Error::NotUpdatable(self.system().id(v).to_string()));
        }
        self.history
            .push((self.key.clone(), self.freeze_times.clone()));
        let old_rate = self.key.rates.get(v).clone();
        let (defaulting, frozen) =
            self.network
                .apply(self.policy, &mut self.key, v, target.clone());
        self.time += 1;
        for &i in &frozen {
            self.freeze_times.insert(i, self.time);
        }
        self.targets = OnceLock::new();
        self.trace.push(TraceEvent {
            time: self.time,
            bank: v,
            old_rate,
            new_rate: target,
            defaulting,
            frozen,
        });
        Ok(self.trace.last().expect("just pushed"))
    }

    pub fn undo(&mut self) -> Result<()> {
        let (key, times) = self.history.pop().ok_or(Error::NothingToUndo)?;
        self.key = key;
        self.freeze_times = times;
        self.time -= 1;
        self.trace.pop();
        self.targets = OnceLock::new();
        Ok(())
    }

    pub fn defaulting_steps(&self) -> usize {
        self.trace.iter().filter(|e| e.defaulting).count()
    }

    /// Banks with rate below one.
    pub fn defaults(&self) -> usize {
        self.key.rates.iter().filter(|r| !r.is_one()).count()
    }
}

/// Picks a bank id from the updatable ids, given the current state.
pub type Chooser<'a, S> = Box<dyn FnMut(&EngineState<S>, &[String]) -> String + 'a>;

/// Chooses the next bank among the updatable ones.
pub enum Strategy<'a, S: Scalar> {
    ExplicitSequence(Vec<String>),
    Lexicographic,
    SeededRandom(u64),
    External(Chooser<'a, S>),
}

impl<S: Scalar> Strategy<'_, S> {
    fn is_deterministic(&self) -> bool {
        matches!(self, Strategy::Lexicographic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub max_steps: u64,
    /// Stop at the first recurring state even for non-deterministic strategies.
    pub halt_on_cycle: bool,
}

impl RunConfig {
    pub fn steps(max_steps: u64) -> Self {
        RunConfig {
            max_steps,
            halt_on_cycle: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutcomeKind {
    Stabilized {
        at: u64,
    },
    CycleDetected {
        first_visit: u64,
        period: u64,
    },
    StepBoundExceeded {
        steps: u64,
    },
    /// An explicit sequence ran out while banks were still updatable.
    SequenceExhausted {
        at: u64,
    },
}

#[derive(Debug, Clone)]
pub struct RunOutcome<S: Scalar> {
    pub kind: OutcomeKind,
    /// First recurrence seen, as (first visit, period), even if the run went on.
    pub first_recurrence: Option<(u64, u64)>,
    pub state: EngineState<S>,
}

/// Drives the process until it stabilizes, cycles or exhausts its budget.
pub fn run<S: Scalar>(
    mut state: EngineState<S>,
    mut strategy: Strategy<'_, S>,
    config: RunConfig,
) -> Result<RunOutcome<S>> {
    let halt_on_cycle = config.halt_on_cycle || strategy.is_deterministic();
    let mut rng = match strategy {
        Strategy::SeededRandom(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    let mut seen: HashMap<StateKey<S>, u64> = HashMap::new();
    seen.insert(state.key.clone(), state.time);
    let mut first_recurrence = None;
    let mut cursor = 0usize;
    let mut taken = 0u64;
    let finish = |kind, state, first_recurrence| {
        Ok(RunOutcome {
            kind,
            first_recurrence,
            state,
        })
    };
    loop {
        let updatable = state.updatable();
        if updatable.is_empty() {
            let at = state.time;
            return finish(OutcomeKind::Stabilized { at }, state, first_recurrence);
        }
        if taken >= config.max_steps {
            return finish(
                OutcomeKind::StepBoundExceeded { steps: taken },
                state,
                first_recurrence,
            );
        }
        let chosen = match &mut strategy {
            Strategy::Lexicographic => updatable[0],
            Strategy::SeededRandom(_) => *updatable
                .choose(rng.as_mut().expect("seeded"))
                .expect("non-empty"),
            Strategy::ExplicitSequence(seq) => {
                let Some(id) = seq.get(cursor) else {
                    let at = state.time;
                    return finish(
                        OutcomeKind::SequenceExhausted { at },
                        state,
                        first_recurrence,
                    );
                };
                cursor += 1;
                resolve_choice(&state, &updatable, id)?
            }
            Strategy::External(f) => {
                let ids: Vec<String> = updatable
                    .iter()
                    .map(|&v| state.system().id(v).to_string())
                    .collect();
                let id = f(&state, &ids);
                resolve_choice(&state, &updatable, &id)?
            }
        };
        state.step_index(chosen)?;
        taken += 1;
        if let Some(&first) = seen.get(&state.key) {
            let period = state.time - first;
            first_recurrence.get_or_insert((first, period));
            if halt_on_cycle {
                return finish(
                    OutcomeKind::CycleDetected {
                        first_visit: first,
                        period,
                    },
                    state,
                    first_recurrence,
                );
            }
        } else {
            seen.insert(state.key.clone(), state.time);
        }
    }
}

fn resolve_choice<S: Scalar>(
    state: &EngineState<S>,
    updatable: &[usize],
    id: &str,
) -> Result<usize> {
    let v = state.system().index_of(id)?;
    if updatable.contains(&v) {
        Ok(v)
    } else {
        Err(Error::StrategyViolation(id.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational as Q;
    use num_traits::{One, Zero};

    fn q(n: i64, d: i64) -> Q {
        Q::from_frac(n, d)
    }

    fn infinite_loop() -> FinancialSystem<Q> {
        let mut b = SystemBuilder::new();
        b.bank("u", q(0, 1))
            .bank("v", q(0, 1))
            .bank("z", q(1, 1))
            .bank("s", q(0, 1));
        b.debt("u", "v", q(1, 1)).debt("v", "s", q(1, 1));
        b.cds("z", "u", "v", q(1, 1));
        b.build().unwrap()
    }

    fn branching() -> FinancialSystem<Q> {
        let mut b = SystemBuilder::new();
        b.bank("u", q(0, 1))
            .bank("v", q(0, 1))
            .bank("src", q(2, 1))
            .bank("sink", q(0, 1));
        b.debt("u", "sink", q(1, 1)).debt("v", "sink", q(1, 1));
        b.cds("src", "u", "v", q(1, 1))
            .cds("src", "v", "u", q(1, 1));
        b.build().unwrap()
    }

    fn rates(state: &EngineState<Q>, ids: &[&str]) -> Vec<Q> {
        ids.iter()
            .map(|id| state.rate(id).unwrap().clone())
            .collect()
    }

    #[test]
    fn step_budget_default_is_capped() {
        assert_eq!(default_max_steps(3, 1000), 64);
        assert_eq!(default_max_steps(10, 1000), 1000);
        assert_eq!(default_max_steps(100, 7), 7);
    }

    #[test]
    fn initial_state_has_unit_rates() {
        let s = EngineState::initial(branching(), Policy::REVERSIBLE);
        assert!(s.rates().iter().all(|r| r.is_one()));
        assert_eq!(s.time(), 0);
        assert_eq!(s.updatable_banks(), vec!["u", "v"]);
        assert_eq!(s.target_rate("u").unwrap(), Q::zero());
    }

    #[test]
    fn empty_system_is_stable() {
        let s = EngineState::<Q>::initial(FinancialSystem::empty(), Policy::MONOTONE);
        assert!(s.is_stable());
    }

    #[test]
    fn naive_loop_cycles_through_four_states() {
        let mut s = EngineState::initial(infinite_loop(), Policy::REVERSIBLE);
        let start = s.canonical_state();
        let mut seen = vec![rates(&s, &["u", "v"])];
        for id in ["u", "v", "u", "v"] {
            s.step(id).unwrap();
            seen.push(rates(&s, &["u", "v"]));
        }
        let (o, z) = (q(1, 1), q(0, 1));
        assert_eq!(
            seen,
            vec![
                vec![o.clone(), o.clone()],
                vec![z.clone(), o.clone()],
                vec![z.clone(), z.clone()],
                vec![o.clone(), z.clone()],
                vec![o.clone(), o.clone()],
            ]
        );
        assert_eq!(s.canonical_state(), start);
    }

    #[test]
    fn lexicographic_run_detects_cycle() {
        let s = EngineState::initial(infinite_loop(), Policy::REVERSIBLE);
        let out = run(s, Strategy::Lexicographic, RunConfig::steps(20)).unwrap();
        assert_eq!(
            out.kind,
            OutcomeKind::CycleDetected {
                first_visit: 0,
                period: 4
            }
        );
    }

    #[test]
    fn random_runs_report_recurrence_without_halting() {
        let s = EngineState::initial(infinite_loop(), Policy::REVERSIBLE);
        let out = run(s, Strategy::SeededRandom(7), RunConfig::steps(30)).unwrap();
        assert_eq!(out.kind, OutcomeKind::StepBoundExceeded { steps: 30 });
        assert!(out.first_recurrence.is_some());
    }

    #[test]
    fn explicit_sequence_stabilizes_branching() {
        let s = EngineState::initial(branching(), Policy::REVERSIBLE);
        let out = run(
            s,
            Strategy::ExplicitSequence(vec!["u".into()]),
            RunConfig::steps(10),
        )
        .unwrap();
        assert_eq!(out.kind, OutcomeKind::Stabilized { at: 1 });
        assert_eq!(rates(&out.state, &["u", "v"]), vec![q(0, 1), q(1, 1)]);
    }

    #[test]
    fn exhausted_sequence_is_reported() {
        let s = EngineState::initial(infinite_loop(), Policy::REVERSIBLE);
        let out = run(
            s,
            Strategy::ExplicitSequence(vec!["u".into()]),
            RunConfig::steps(10),
        )
        .unwrap();
        assert_eq!(out.kind, OutcomeKind::SequenceExhausted { at: 1 });
    }

    #[test]
    fn strategy_must_pick_updatable_bank() {
        let s = EngineState::initial(branching(), Policy::REVERSIBLE);
        let err = run(
            s,
            Strategy::External(Box::new(|_, _| "sink".to_string())),
            RunConfig::steps(10),
        )
        .unwrap_err();
        assert_eq!(err, Error::StrategyViolation("sink".into()));
    }

    #[test]
    fn stepping_non_updatable_bank_fails_without_change() {
        let mut s = EngineState::initial(branching(), Policy::REVERSIBLE);
        s.step("u").unwrap();
        let before = s.canonical_state();
        assert_eq!(s.step("u").unwrap_err().code(), "not_updatable");
        assert_eq!(s.canonical_state(), before);
        assert_eq!(s.time(), 1);
    }

    #[test]
    fn undo_restores_previous_state() {
        let mut s = EngineState::initial(infinite_loop(), Policy::MONOTONE);
        assert_eq!(s.undo(), Err(Error::NothingToUndo));
        let before = s.canonical_state();
        s.step("u").unwrap();
        assert!(!s.frozen_weights().is_empty());
        s.undo().unwrap();
        assert_eq!(s.canonical_state(), before);
        assert!(s.trace().is_empty());
    }

    #[test]
    fn freezing_only_touches_incident_cdss() {
        let mut s = EngineState::initial(infinite_loop(), Policy::MONOTONE);
        assert_eq!(s.updatable_banks(), vec!["u"]);
        s.step("u").unwrap();
        let frozen: Vec<_> = s.frozen().collect();
        assert_eq!(frozen.len(), 1);
        assert_eq!(
            (frozen[0].0, frozen[0].1.is_zero(), frozen[0].2),
            (0, true, 1)
        );
        assert!(s.trace()[0].defaulting);
        s.step("v").unwrap();
        assert_eq!(s.frozen().count(), 1);
    }

    #[test]
    fn different_frozen_sets_differ_in_key() {
        let mut a = EngineState::initial(infinite_loop(), Policy::MONOTONE);
        let mut b = EngineState::initial(infinite_loop(), Policy::REVERSIBLE);
        a.step("u").unwrap();
        b.step("u").unwrap();
        assert_eq!(a.rates(), b.rates());
        assert_ne!(a.canonical_state(), b.canonical_state());
    }

    #[test]
    fn effective_system_replaces_frozen_cdss() {
        let mut s = EngineState::initial(infinite_loop(), Policy::MONOTONE);
        s.step("u").unwrap();
        let eff = s.effective_system();
        assert!(eff.cdss().is_empty());
        assert_eq!(eff.debts().len(), 2);
    }
}
