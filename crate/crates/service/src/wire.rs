//! JSON shapes exchanged with clients. Every rational is sent as a [`Num`]:
//! the exact `"p/q"` string plus a decimal for display.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use seqclear_core::io::{trace_records, NetworkFile, TraceRecord};
use seqclear_core::{NamedModel, Rational, Scalar, State};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Num {
    pub exact: String,
    /// Approximation for display; not authoritative.
    pub approx: f64,
}

impl From<&Rational> for Num {
    fn from(x: &Rational) -> Self {
        Num {
            exact: x.render(),
            approx: x.approx(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    #[serde(default)]
    pub network: Option<NetworkFile>,
    #[serde(default)]
    pub gadget: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
    #[serde(default = "default_model")]
    pub model: String,
}

fn default_model() -> String {
    NamedModel::Reversible.name().to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRequest {
    pub bank: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub state: StateView,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BankView {
    pub id: String,
    pub rate: Num,
    pub external_assets: Num,
    pub assets: Num,
    pub liabilities: Num,
    /// Assets minus liabilities for solvent banks, zero in default.
    pub equity: Num,
    pub in_default: bool,
    pub updatable: bool,
    pub target: Num,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DebtView {
    pub debtor: String,
    pub creditor: String,
    pub weight: Num,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CdsView {
    pub debtor: String,
    pub creditor: String,
    pub reference: String,
    pub weight: Num,
    /// What the debtor owes now: the frozen weight if frozen, otherwise
    /// `weight * (1 - r_reference)`.
    pub current: Num,
    pub frozen: Option<Num>,
    pub frozen_at: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Contracts {
    pub debts: Vec<DebtView>,
    pub cds: Vec<CdsView>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Outcome {
    /// `"running"` while some bank is updatable, then `"stabilized"`.
    pub status: String,
    pub time: u64,
    pub defaults: usize,
    pub defaulting_steps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateView {
    pub session_id: String,
    pub parent: Option<String>,
    pub model: String,
    pub roles: BTreeMap<String, String>,
    pub banks: Vec<BankView>,
    pub contracts: Contracts,
    pub trace: Vec<TraceRecord>,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UpdatableEntry {
    pub bank: String,
    pub rate: Num,
    pub target: Num,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Updatable {
    pub banks: Vec<UpdatableEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumView {
    pub holds: bool,
    /// `r_v - R(a_v, l_v)` per bank, on the base system.
    pub residuals: BTreeMap<String, Num>,
}

pub fn state_view(
    id: &str,
    parent: Option<&str>,
    model: &str,
    roles: &BTreeMap<String, String>,
    state: &State,
) -> StateView {
    let system = state.system();
    let rates = state.rates();
    let targets = state.targets();
    let updatable = state.updatable();
    let (assets, liabilities) = system.balances(rates, Some(state.frozen_weights()));
    let banks = system
        .banks()
        .iter()
        .enumerate()
        .map(|(v, bank)| {
            let rate = rates.get(v);
            let solvent = *rate == Rational::from_int(1);
            let equity = if solvent {
                &assets[v] - &liabilities[v]
            } else {
                Rational::from_int(0)
            };
            BankView {
                id: bank.id.clone(),
                rate: rate.into(),
                external_assets: (&bank.external_assets).into(),
                assets: (&assets[v]).into(),
                liabilities: (&liabilities[v]).into(),
                equity: (&equity).into(),
                in_default: !solvent,
                updatable: updatable.contains(&v),
                target: (&targets[v]).into(),
            }
        })
        .collect();
    let frozen_at: BTreeMap<usize, u64> = state.frozen().map(|(i, _, t)| (i, t)).collect();
    let contracts = Contracts {
        debts: system
            .debts()
            .iter()
            .map(|d| DebtView {
                debtor: system.id(d.debtor).to_string(),
                creditor: system.id(d.creditor).to_string(),
                weight: (&d.weight).into(),
            })
            .collect(),
        cds: system
            .cdss()
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let frozen = state.frozen_weights().get(&i);
                let current = frozen
                    .cloned()
                    .unwrap_or_else(|| system.cds_obligation(i, rates));
                CdsView {
                    debtor: system.id(c.debtor).to_string(),
                    creditor: system.id(c.creditor).to_string(),
                    reference: system.id(c.reference).to_string(),
                    weight: (&c.weight).into(),
                    current: (&current).into(),
                    frozen: frozen.map(Num::from),
                    frozen_at: frozen_at.get(&i).copied(),
                }
            })
            .collect(),
    };
    StateView {
        session_id: id.to_string(),
        parent: parent.map(str::to_string),
        model: model.to_string(),
        roles: roles.clone(),
        banks,
        contracts,
        trace: trace_records(system, state.trace()),
        outcome: Outcome {
            status: if updatable.is_empty() {
                "stabilized"
            } else {
                "running"
            }
            .to_string(),
            time: state.time(),
            defaults: state.defaults(),
            defaulting_steps: state.defaulting_steps(),
        },
    }
}

pub fn updatable_view(state: &State) -> Updatable {
    let system = state.system();
    Updatable {
        banks: state
            .updatable()
            .into_iter()
            .map(|v| UpdatableEntry {
                bank: system.id(v).to_string(),
                rate: state.rates().get(v).into(),
                target: (&state.targets()[v]).into(),
            })
            .collect(),
    }
}
