//! Constructors for small systems with prescribed sequential behaviour.
//!
//! Every builder returns a [`GadgetBlueprint`]: the system, a map from stable
//! role names to bank ids, and a list of [`Expectation`]s that can be checked
//! by running the engine. Builders share two conventions: a bank `src` whose
//! external assets equal the total weight of its outgoing contracts (so it
//! never defaults), and a bank `sink` without liabilities that absorbs
//! payments.

mod basic;
mod counter;
mod formula;
mod reductions;

use std::collections::BTreeMap;

use crate::engine::{run, EngineState, OutcomeKind, RunConfig, Strategy};
use crate::error::{Error, Result};
use crate::model::{FinancialSystem, RecoveryVector, SystemBuilder};
use crate::policy::NamedModel;
use crate::scalar::Scalar;
use crate::search::{explore, ExploreConfig};

pub use basic::*;
pub use counter::{build_best_time_instance, build_counter, counter_with_layout, CounterLayout};
pub use formula::CnfFormula;
pub use reductions::{build_maxsat_max, build_maxsat_min, clause_best, clause_worst};

pub const SRC: &str = "src";
pub const SINK: &str = "sink";

/// Parameters passed to [`build`], as textual key/value pairs.
pub type Params = BTreeMap<String, String>;

pub const GADGET_KINDS: &[&str] = &[
    "example1",
    "example2",
    "infinite_loop",
    "branching",
    "unreachable",
    "stop_at_will",
    "difftime",
    "diffoutcome",
    "clause_best",
    "clause_worst",
    "earlydef_reversible",
    "convergence",
    "otherconv",
    "longstab",
    "earlydef_monotone",
    "stable_bit",
    "resettable_stable_bit",
    "condition_gadget",
    "counter",
    "maxsat_min",
    "maxsat_max",
    "best_time",
];

/// A checkable claim about a blueprint. Bank references are role names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expectation<S> {
    /// The listed rates, with every other bank at one, form an equilibrium.
    Equilibrium { rates: Vec<(String, S)> },
    /// Exploration from the initial state reaches exactly these terminals,
    /// projected onto `roles`.
    Terminals {
        model: NamedModel,
        roles: Vec<String>,
        rates: Vec<Vec<S>>,
    },
    /// The ordering is applied, then the lexicographic strategy takes over.
    Ordering {
        model: NamedModel,
        ordering: Vec<String>,
        result: OrderingResult<S>,
    },
    /// Behaviour that needs a dedicated check.
    Described(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OrderingResult<S> {
    Stabilizes { steps: u64, rates: Vec<(String, S)> },
    Cycles,
}

#[derive(Debug, Clone)]
pub struct GadgetBlueprint<S> {
    pub kind: String,
    pub params: Params,
    pub system: FinancialSystem<S>,
    pub roles: BTreeMap<String, String>,
    pub contract: Vec<Expectation<S>>,
    /// Some bank's assets exactly equal its liabilities in the intended run.
    pub tight: bool,
}

impl<S: Scalar> GadgetBlueprint<S> {
    /// Bank id for a role; role names double as ids when no role matches.
    pub fn bank(&self, role: &str) -> Result<&str> {
        if let Some(id) = self.roles.get(role) {
            return Ok(id);
        }
        let idx = self.system.index_of(role)?;
        Ok(self.system.id(idx))
    }

    pub fn index(&self, role: &str) -> Result<usize> {
        self.system.index_of(self.bank(role)?)
    }

    fn rates_by_role(&self, rates: &[(String, S)]) -> Result<RecoveryVector<S>> {
        let pairs = rates
            .iter()
            .map(|(r, x)| Ok((self.bank(r)?, x.clone())))
            .collect::<Result<Vec<_>>>()?;
        RecoveryVector::with_rates(&self.system, &pairs)
    }

    /// Checks one expectation by simulation.
    pub fn check(&self, expectation: &Expectation<S>, config: ExploreConfig) -> Result<bool> {
        match expectation {
            Expectation::Equilibrium { rates } => Ok(self
                .system
                .is_equilibrium(&self.rates_by_role(rates)?)?
                .holds),
            Expectation::Terminals {
                model,
                roles,
                rates,
            } => {
                let result = explore(&self.system, model.policy(), config);
                if result.truncated {
                    return Err(Error::Incomplete);
                }
                let ids = roles
                    .iter()
                    .map(|r| self.bank(r))
                    .collect::<Result<Vec<_>>>()?;
                let mut found = result.terminal_rates(&self.system, &ids)?;
                let mut expected = rates.clone();
                found.sort();
                expected.sort();
                Ok(found == expected)
            }
            Expectation::Ordering {
                model,
                ordering,
                result,
            } => {
                let mut state = EngineState::initial(self.system.clone(), model.policy());
                for role in ordering {
                    state.step(self.bank(role)?)?;
                }
                let out = run(
                    state,
                    Strategy::Lexicographic,
                    RunConfig::steps(config.step_bound as u64),
                )?;
                Ok(match (result, out.kind) {
                    (OrderingResult::Cycles, OutcomeKind::CycleDetected { .. }) => true,
                    (
                        OrderingResult::Stabilizes { steps, rates },
                        OutcomeKind::Stabilized { at },
                    ) => {
                        let mut ok = at == *steps;
                        for (role, rate) in rates {
                            ok &= out.state.rate(self.bank(role)?)? == rate;
                        }
                        ok
                    }
                    _ => false,
                })
            }
            Expectation::Described(_) => Ok(true),
        }
    }
}

/// Builds a gadget by kind name.
pub fn build<S: Scalar>(kind: &str, params: &Params) -> Result<GadgetBlueprint<S>> {
    let int = |key: &str, default: Option<i64>| -> Result<i64> {
        match params.get(key) {
            Some(v) => v.trim().parse().map_err(|_| {
                Error::InvalidParams(format!("`{key}` must be an integer, got `{v}`"))
            }),
            None => {
                default.ok_or_else(|| Error::InvalidParams(format!("missing parameter `{key}`")))
            }
        }
    };
    let count = |key: &str, default: Option<i64>| -> Result<usize> {
        let v = int(key, default)?;
        usize::try_from(v)
            .map_err(|_| Error::InvalidParams(format!("`{key}` must be non-negative")))
    };
    let formula = || -> Result<CnfFormula> {
        let text = params
            .get("formula")
            .ok_or_else(|| Error::InvalidParams("missing parameter `formula`".into()))?;
        let k = params
            .get("k")
            .map(|v| v.trim().parse::<usize>())
            .transpose()
            .map_err(|_| Error::InvalidParams("`k` must be a non-negative integer".into()))?;
        CnfFormula::parse_compact(text, k)
    };
    let mut blueprint = match kind {
        "example1" => example1(),
        "example2" => example2(),
        "infinite_loop" => infinite_loop(),
        "branching" => branching(),
        "unreachable" => unreachable(),
        "stop_at_will" => stop_at_will(count("k", None)?)?,
        "difftime" => difftime(),
        "diffoutcome" => diffoutcome(count("n", None)?)?,
        "clause_best" => clause_best_standalone(count("literals", Some(1))?)?,
        "clause_worst" => clause_worst_standalone(count("literals", Some(1))?)?,
        "earlydef_reversible" => earlydef_reversible(),
        "convergence" => convergence(),
        "otherconv" => otherconv(),
        "longstab" => longstab(count("m", None)?)?,
        "earlydef_monotone" => earlydef_monotone(),
        "stable_bit" => stable_bit(),
        "resettable_stable_bit" => resettable_stable_bit(),
        "condition_gadget" => condition_gadget(count("z", Some(1))?, count("zp", Some(0))?)?,
        "counter" => build_counter(count("k", None)?)?,
        "maxsat_min" => build_maxsat_min(&formula()?),
        "maxsat_max" => build_maxsat_max(&formula()?),
        "best_time" => build_best_time_instance(&formula()?)?,
        other => return Err(Error::UnknownGadget(other.to_string())),
    };
    blueprint.params = params.clone();
    Ok(blueprint)
}

/// Incremental system construction with the shared `src`/`sink` conventions.
/// Used to compose gadgets into larger systems.
pub struct Net<S> {
    builder: SystemBuilder<S>,
    funded: S,
    uses_sink: bool,
    roles: BTreeMap<String, String>,
    contract: Vec<Expectation<S>>,
    tight: bool,
}

pub(crate) fn int<S: Scalar>(n: i64) -> S {
    S::from_int(n)
}

impl<S: Scalar> Default for Net<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Net<S> {
    pub fn new() -> Self {
        Net {
            builder: SystemBuilder::new(),
            funded: S::zero(),
            uses_sink: false,
            roles: BTreeMap::new(),
            contract: Vec::new(),
            tight: false,
        }
    }

    pub fn bank(&mut self, id: &str, assets: i64) -> &mut Self {
        self.builder.bank(id, int(assets));
        self
    }

    /// Adds a bank and registers its id as a role of the same name.
    pub fn role_bank(&mut self, id: &str, assets: i64) -> &mut Self {
        self.role(id, id);
        self.bank(id, assets)
    }

    pub fn role(&mut self, role: &str, id: &str) -> &mut Self {
        self.roles.insert(role.to_string(), id.to_string());
        self
    }

    pub fn debt(&mut self, debtor: &str, creditor: &str, weight: i64) -> &mut Self {
        self.uses_sink |= creditor == SINK;
        self.builder.debt(debtor, creditor, int(weight));
        self
    }

    pub fn cds(&mut self, debtor: &str, creditor: &str, reference: &str, weight: i64) -> &mut Self {
        self.uses_sink |= creditor == SINK;
        self.builder.cds(debtor, creditor, reference, int(weight));
        self
    }

    /// CDS from the always-solvent source.
    pub fn insure(&mut self, creditor: &str, reference: &str, weight: i64) -> &mut Self {
        self.funded = self.funded.clone() + int(weight);
        self.builder.cds(SRC, creditor, reference, int(weight));
        self
    }

    pub fn to_sink(&mut self, debtor: &str, weight: i64) -> &mut Self {
        self.debt(debtor, SINK, weight)
    }

    pub fn cds_to_sink(&mut self, debtor: &str, reference: &str, weight: i64) -> &mut Self {
        self.cds(debtor, SINK, reference, weight)
    }

    pub fn expect(&mut self, expectation: Expectation<S>) -> &mut Self {
        self.contract.push(expectation);
        self
    }

    pub fn tight(&mut self) -> &mut Self {
        self.tight = true;
        self
    }

    pub fn finish(mut self, kind: &str) -> Result<GadgetBlueprint<S>> {
        if !self.funded.is_zero() && !self.builder.has_bank(SRC) {
            self.builder.bank(SRC, self.funded.clone());
        }
        if self.uses_sink && !self.builder.has_bank(SINK) {
            self.builder.bank(SINK, S::zero());
        }
        let system = self.builder.build()?;
        for id in self.roles.values() {
            system.index_of(id)?;
        }
        Ok(GadgetBlueprint {
            kind: kind.to_string(),
            params: Params::new(),
            system,
            roles: self.roles,
            contract: self.contract,
            tight: self.tight,
        })
    }
}

pub(crate) fn rates<S: Scalar>(pairs: &[(&str, i64, i64)]) -> Vec<(String, S)> {
    pairs
        .iter()
        .map(|(r, n, d)| (r.to_string(), S::from_frac(*n, *d)))
        .collect()
}

pub(crate) fn names(ids: &[&str]) -> Vec<String> {
    ids.iter().map(|s| s.to_string()).collect()
}
