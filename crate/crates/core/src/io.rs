//! JSON file formats: networks, recovery vectors and traces.
//!
//! Every rational crosses the boundary as a string, either an integer or
//! `"p/q"` with `q > 0`. Floats are rejected.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::TraceEvent;
use crate::error::{Error, Result};
use crate::gadgets::GadgetBlueprint;
use crate::model::{FinancialSystem, RecoveryVector, SystemBuilder};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankEntry {
    pub id: String,
    pub external_assets: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DebtEntry {
    pub debtor: String,
    pub creditor: String,
    pub weight: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CdsEntry {
    pub debtor: String,
    pub creditor: String,
    pub reference: String,
    pub weight: String,
}

/// On-disk form of a financial system, optionally with gadget roles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub banks: Vec<BankEntry>,
    #[serde(default)]
    pub debts: Vec<DebtEntry>,
    #[serde(default)]
    pub cds: Vec<CdsEntry>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub roles: BTreeMap<String, String>,
}

pub fn parse_scalar<S: Scalar>(text: &str, what: &str) -> Result<S> {
    S::parse_exact(text).ok_or_else(|| {
        Error::Parse(format!(
            "{what}: `{text}` is not an exact rational (use \"p\" or \"p/q\")"
        ))
    })
}

impl NetworkFile {
    pub fn from_system<S: Scalar>(system: &FinancialSystem<S>) -> Self {
        let id = |i: usize| system.id(i).to_string();
        NetworkFile {
            banks: system
                .banks()
                .iter()
                .map(|b| BankEntry {
                    id: b.id.clone(),
                    external_assets: b.external_assets.render(),
                })
                .collect(),
            debts: system
                .debts()
                .iter()
                .map(|d| DebtEntry {
                    debtor: id(d.debtor),
                    creditor: id(d.creditor),
                    weight: d.weight.render(),
                })
                .collect(),
            cds: system
                .cdss()
                .iter()
                .map(|c| CdsEntry {
                    debtor: id(c.debtor),
                    creditor: id(c.creditor),
                    reference: id(c.reference),
                    weight: c.weight.render(),
                })
                .collect(),
            roles: BTreeMap::new(),
        }
    }

    pub fn from_blueprint<S: Scalar>(blueprint: &GadgetBlueprint<S>) -> Self {
        NetworkFile {
            roles: blueprint.roles.clone(),
            ..Self::from_system(&blueprint.system)
        }
    }

    pub fn to_system<S: Scalar>(&self) -> Result<FinancialSystem<S>> {
        let mut b = SystemBuilder::new();
        for bank in &self.banks {
            let what = format!("external_assets of `{}`", bank.id);
            b.bank(bank.id.clone(), parse_scalar(&bank.external_assets, &what)?);
        }
        for d in &self.debts {
            let what = format!("weight of debt {} -> {}", d.debtor, d.creditor);
            b.debt(
                d.debtor.clone(),
                d.creditor.clone(),
                parse_scalar(&d.weight, &what)?,
            );
        }
        for c in &self.cds {
            let what = format!(
                "weight of CDS {} -> {} on {}",
                c.debtor, c.creditor, c.reference
            );
            b.cds(
                c.debtor.clone(),
                c.creditor.clone(),
                c.reference.clone(),
                parse_scalar(&c.weight, &what)?,
            );
        }
        let system = b.build()?;
        for id in self.roles.values() {
            system.index_of(id)?;
        }
        Ok(system)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("plain data serializes");
        out.push('\n');
        out
    }
}

/// Rates file: a JSON object from bank id to rate. Banks not listed stay at
/// one.
pub fn parse_rates<S: Scalar>(
    system: &FinancialSystem<S>,
    text: &str,
) -> Result<RecoveryVector<S>> {
    let map: BTreeMap<String, String> =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut pairs = Vec::with_capacity(map.len());
    for (id, rate) in &map {
        pairs.push((id.as_str(), parse_scalar(rate, &format!("rate of `{id}`"))?));
    }
    RecoveryVector::with_rates(system, &pairs)
}

pub fn rates_to_json<S: Scalar>(
    system: &FinancialSystem<S>,
    rates: &RecoveryVector<S>,
) -> BTreeMap<String, String> {
    rates
        .iter()
        .enumerate()
        .map(|(i, r)| (system.id(i).to_string(), r.render()))
        .collect()
}

/// One exported trace record; `frozen` lists CDS positions in file order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: u64,
    pub bank: String,
    pub old: String,
    pub new: String,
    pub defaulting: bool,
    pub frozen: Vec<usize>,
}

pub fn trace_records<S: Scalar>(
    system: &FinancialSystem<S>,
    trace: &[TraceEvent<S>],
) -> Vec<TraceRecord> {
    trace
        .iter()
        .map(|e| TraceRecord {
            t: e.time,
            bank: system.id(e.bank).to_string(),
            old: e.old_rate.render(),
            new: e.new_rate.render(),
            defaulting: e.defaulting,
            frozen: e.frozen.clone(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gadgets::{build, Params};
    use crate::Rational;

    #[test]
    fn gadget_files_round_trip_exactly() {
        let bp = build::<Rational>("example2", &Params::new()).unwrap();
        let text = NetworkFile::from_blueprint(&bp).to_json();
        let file = NetworkFile::from_json(&text).unwrap();
        let system: FinancialSystem<Rational> = file.to_system().unwrap();
        assert_eq!(system, bp.system);
        let again = NetworkFile {
            roles: file.roles.clone(),
            ..NetworkFile::from_system(&system)
        };
        assert_eq!(again.to_json(), text);
    }

    #[test]
    fn floats_and_bad_denominators_are_rejected() {
        for bad in ["0.5", "1e3", "1/0", "1/-2", ""] {
            let text = format!(r#"{{"banks":[{{"id":"a","external_assets":"{bad}"}}]}}"#);
            let err = NetworkFile::from_json(&text)
                .unwrap()
                .to_system::<Rational>();
            assert!(err.is_err(), "{bad}");
        }
        let numeric = r#"{"banks":[{"id":"a","external_assets":1}]}"#;
        assert_eq!(
            NetworkFile::from_json(numeric).unwrap_err().code(),
            "parse_error"
        );
    }

    #[test]
    fn rates_default_to_one() {
        let bp = build::<Rational>("branching", &Params::new()).unwrap();
        let r = parse_rates(&bp.system, r#"{"u": "0"}"#).unwrap();
        assert_eq!(
            r.by_id(&bp.system, "u").unwrap(),
            &Rational::from_integer(0.into())
        );
        assert_eq!(
            r.by_id(&bp.system, "v").unwrap(),
            &Rational::from_integer(1.into())
        );
        assert!(parse_rates(&bp.system, r#"{"nobody": "0"}"#).is_err());
    }
}
