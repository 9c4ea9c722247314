//! Exhaustive exploration of update orderings.
//!
//! Exploration is a depth-first search over behavioural states
//! ([`StateKey`]) with memoization, so symmetric orderings are expanded once.
//! The visited states and transitions are retained as a graph, which answers
//! path questions (fewest defaulting steps before stabilizing, number of
//! maximal orderings) without a second traversal.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use serde::Serialize;

use crate::engine::{run, EngineState, Network, OutcomeKind, RunConfig, StateKey, Strategy};
use crate::error::{Error, Result};
use crate::gadgets::{CnfFormula, GadgetBlueprint};
use crate::model::FinancialSystem;
use crate::policy::Policy;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExploreConfig {
    /// Longest ordering followed before a branch is cut.
    pub step_bound: usize,
    /// Most distinct states stored before exploration stops expanding.
    pub state_cap: usize,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig {
            step_bound: 10_000,
            state_cap: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub bank: usize,
    pub to: usize,
    pub defaulting: bool,
}

#[derive(Debug, Clone)]
pub struct Terminal<S> {
    pub state: StateKey<S>,
    /// Bank ids of an ordering from the initial state to this terminal.
    pub witness: Vec<String>,
    pub defaults: usize,
}

#[derive(Debug, Clone)]
pub struct ExplorationResult<S> {
    pub terminals: Vec<Terminal<S>>,
    pub cycles_found: usize,
    pub truncated: bool,
    pub states_visited: usize,
    states: Vec<StateKey<S>>,
    edges: Vec<Vec<Edge>>,
    expanded: Vec<bool>,
}

impl<S: Scalar> ExplorationResult<S> {
    pub fn states(&self) -> &[StateKey<S>] {
        &self.states
    }

    pub fn edges(&self, state: usize) -> &[Edge] {
        &self.edges[state]
    }

    pub fn is_terminal(&self, state: usize) -> bool {
        self.expanded[state] && self.edges[state].is_empty()
    }

    /// Rates of every terminal restricted to `banks`, in terminal order.
    pub fn terminal_rates(
        &self,
        system: &FinancialSystem<S>,
        banks: &[&str],
    ) -> Result<Vec<Vec<S>>> {
        let idx = banks
            .iter()
            .map(|b| system.index_of(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(self
            .terminals
            .iter()
            .map(|t| idx.iter().map(|&i| t.state.rates.get(i).clone()).collect())
            .collect())
    }

    /// Fewest defaulting steps on any ordering that reaches a terminal.
    pub fn min_defaulting_steps_to_terminal(&self) -> Option<usize> {
        let n = self.states.len();
        let mut dist = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        dist[0] = 0;
        queue.push_back(0);
        while let Some(s) = queue.pop_front() {
            for e in &self.edges[s] {
                let d = dist[s] + usize::from(e.defaulting);
                if d < dist[e.to] {
                    dist[e.to] = d;
                    if e.defaulting {
                        queue.push_back(e.to);
                    } else {
                        queue.push_front(e.to);
                    }
                }
            }
        }
        (0..n)
            .filter(|&s| self.is_terminal(s))
            .map(|s| dist[s])
            .min()
    }

    pub fn is_acyclic(&self) -> bool {
        self.cycles_found == 0
    }

    /// Number of distinct orderings from the initial state to a terminal;
    /// `None` when the state graph has a cycle.
    pub fn count_maximal_orderings(&self) -> Option<BigUint> {
        if !self.is_acyclic() {
            return None;
        }
        let n = self.states.len();
        let mut paths: Vec<Option<BigUint>> = vec![None; n];
        // Iterative post-order over the DAG.
        let mut stack = vec![(0usize, 0usize)];
        while let Some(&mut (s, ref mut next)) = stack.last_mut() {
            if let Some(e) = self.edges[s].get(*next) {
                *next += 1;
                if paths[e.to].is_none() {
                    stack.push((e.to, 0));
                }
                continue;
            }
            stack.pop();
            let count = if self.edges[s].is_empty() {
                if self.is_terminal(s) {
                    BigUint::one()
                } else {
                    BigUint::zero()
                }
            } else {
                self.edges[s]
                    .iter()
                    .map(|e| paths[e.to].clone().expect("children done"))
                    .sum()
            };
            paths[s] = Some(count);
        }
        paths[0].clone()
    }
}

/// Explores every ordering reachable from `state`.
pub fn explore_from<S: Scalar>(
    state: &EngineState<S>,
    config: ExploreConfig,
) -> ExplorationResult<S> {
    let network: Arc<Network<S>> = state.network().clone();
    let policy = state.policy();
    let system = network.system();

    let root = state.key().clone();
    let mut index: HashMap<StateKey<S>, usize> = HashMap::new();
    index.insert(root.clone(), 0);
    let mut states = vec![root];
    let mut edges: Vec<Vec<Edge>> = vec![Vec::new()];
    let mut expanded = vec![false];
    let mut parent: Vec<Option<(usize, usize)>> = vec![None];
    let mut on_stack = vec![true];
    let mut cycles_found = 0;
    let mut truncated = false;

    struct Frame<S> {
        state: usize,
        choices: Vec<usize>,
        targets: Vec<S>,
        next: usize,
    }
    let open = |key: &StateKey<S>, id: usize| {
        let targets = network.targets(policy, key);
        let choices = network.updatable(key, &targets);
        Frame {
            state: id,
            choices,
            targets,
            next: 0,
        }
    };
    let mut stack = vec![open(&states[0], 0)];
    expanded[0] = true;

    while let Some(frame) = stack.last_mut() {
        let Some(&bank) = frame.choices.get(frame.next) else {
            on_stack[frame.state] = false;
            stack.pop();
            continue;
        };
        frame.next += 1;
        let from = frame.state;
        let mut key = states[from].clone();
        let target = frame.targets[bank].clone();
        let (defaulting, _) = network.apply(policy, &mut key, bank, target);

        let to = match index.get(&key) {
            Some(&to) => {
                if on_stack[to] {
                    cycles_found += 1;
                }
                to
            }
            None => {
                if states.len() >= config.state_cap {
                    truncated = true;
                    continue;
                }
                let to = states.len();
                index.insert(key.clone(), to);
                states.push(key);
                edges.push(Vec::new());
                expanded.push(false);
                parent.push(Some((from, bank)));
                on_stack.push(false);
                if stack.len() > config.step_bound {
                    truncated = true;
                } else {
                    expanded[to] = true;
                    on_stack[to] = true;
                    stack.push(open(&states[to], to));
                }
                to
            }
        };
        edges[from].push(Edge {
            bank,
            to,
            defaulting,
        });
    }

    let witness = |mut s: usize| {
        let mut path = Vec::new();
        while let Some((p, bank)) = parent[s] {
            path.push(system.id(bank).to_string());
            s = p;
        }
        path.reverse();
        path
    };
    let mut terminals: Vec<Terminal<S>> = (0..states.len())
        .filter(|&s| expanded[s] && edges[s].is_empty())
        .map(|s| Terminal {
            defaults: states[s].rates.iter().filter(|r| !r.is_one()).count(),
            state: states[s].clone(),
            witness: witness(s),
        })
        .collect();
    terminals.sort_by(|a, b| a.state.cmp(&b.state));

    ExplorationResult {
        terminals,
        cycles_found,
        truncated,
        states_visited: states.len(),
        states,
        edges,
        expanded,
    }
}

/// Explores every ordering of `system` under `policy` from the all-ones state.
pub fn explore<S: Scalar>(
    system: &FinancialSystem<S>,
    policy: Policy,
    config: ExploreConfig,
) -> ExplorationResult<S> {
    explore_from(&EngineState::initial(system.clone(), policy), config)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extremum {
    pub defaults: usize,
    pub witness: Vec<String>,
}

fn extremal<S: Scalar>(
    system: &FinancialSystem<S>,
    policy: Policy,
    config: ExploreConfig,
    pick_max: bool,
) -> Result<Extremum> {
    let result = explore(system, policy, config);
    if result.truncated {
        return Err(Error::Incomplete);
    }
    let best = if pick_max {
        result.terminals.iter().max_by_key(|t| t.defaults)
    } else {
        result.terminals.iter().min_by_key(|t| t.defaults)
    };
    best.map(|t| Extremum {
        defaults: t.defaults,
        witness: t.witness.clone(),
    })
    .ok_or_else(|| Error::Contract("no terminal state is reachable".into()))
}

/// Fewest defaulted banks over all reachable terminal states.
pub fn min_defaults<S: Scalar>(
    system: &FinancialSystem<S>,
    policy: Policy,
    config: ExploreConfig,
) -> Result<Extremum> {
    extremal(system, policy, config, false)
}

/// Most defaulted banks over all reachable terminal states.
pub fn max_defaults<S: Scalar>(
    system: &FinancialSystem<S>,
    policy: Policy,
    config: ExploreConfig,
) -> Result<Extremum> {
    extremal(system, policy, config, true)
}

/// One moment at which the chooser could default, and what it would earn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Opportunity<S> {
    pub index: usize,
    /// Time of the chooser's defaulting step.
    pub step: u64,
    /// Chooser's equity once the forked run stabilizes.
    pub payoff: S,
    /// Counter bits when the chooser defaults, bit 1 first.
    pub assignment: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DefaultTimeReport<S> {
    pub opportunities: Vec<Opportunity<S>>,
    /// Index of the largest payoff; ties go to the earliest opportunity.
    pub best: usize,
}

impl<S> DefaultTimeReport<S> {
    pub fn best(&self) -> &Opportunity<S> {
        &self.opportunities[self.best]
    }
}

/// Runs the lexicographic strategy without the chooser. Each time the
/// chooser becomes updatable the run is forked: the chooser defaults, the
/// fork runs to stabilization and the chooser's final equity is recorded.
pub fn best_default_time<S: Scalar>(
    blueprint: &GadgetBlueprint<S>,
    config: ExploreConfig,
) -> Result<DefaultTimeReport<S>> {
    let chooser = blueprint
        .roles
        .get("chooser")
        .ok_or_else(|| Error::Contract("blueprint has no `chooser` role".into()))?;
    let chooser = blueprint.system.index_of(chooser)?;
    let bits = (1..)
        .map_while(|j| blueprint.roles.get(&format!("counter_bit_{j}_pos")))
        .map(|id| blueprint.system.index_of(id))
        .collect::<Result<Vec<_>>>()?;
    let bound = config.step_bound as u64;

    let mut state = EngineState::initial(blueprint.system.clone(), Policy::REVERSIBLE);
    let mut opportunities = Vec::new();
    let mut was_updatable = false;
    loop {
        let updatable = state.updatable();
        let now = updatable.contains(&chooser);
        if now && !was_updatable {
            let assignment = bits
                .iter()
                .map(|&b| state.rates().get(b).is_zero())
                .collect();
            let mut fork = state.clone();
            let step = fork.step_index(chooser)?.time;
            let out = run(fork, Strategy::Lexicographic, RunConfig::steps(bound))?;
            if !matches!(out.kind, OutcomeKind::Stabilized { .. }) {
                return Err(Error::Incomplete);
            }
            let eval = blueprint.system.evaluate(out.state.rates())?;
            opportunities.push(Opportunity {
                index: opportunities.len(),
                step,
                payoff: eval.equity[chooser].clone(),
                assignment,
            });
        }
        was_updatable = now;
        let Some(&next) = updatable.iter().find(|&&b| b != chooser) else {
            break;
        };
        if state.time() >= bound {
            return Err(Error::Incomplete);
        }
        state.step_index(next)?;
    }
    let best = opportunities
        .iter()
        .enumerate()
        .rev()
        .max_by(|a, b| a.1.payoff.cmp(&b.1.payoff))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Contract("the chooser never becomes updatable".into()))?;
    Ok(DefaultTimeReport {
        opportunities,
        best,
    })
}

/// Maximum number of simultaneously satisfiable clauses, by enumeration.
pub fn maxsat_opt(formula: &CnfFormula) -> usize {
    (0u64..1 << formula.variables())
        .map(|bits| formula.satisfied_by(|var| bits >> (var - 1) & 1 == 1))
        .max()
        .unwrap_or(0)
}
