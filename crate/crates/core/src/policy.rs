//! Update rules and the four named sequential models.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// How a bank computes the rate it announces when it updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetRule {
    /// `R(a_v, l_v)` at the announced rates.
    Naive,
    /// Greatest clearing vector of the frozen snapshot.
    Smart,
    /// Greatest clearing vector of the optimistic rewrite.
    Optimistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Policy {
    pub rule: TargetRule,
    /// Convert a bank's incoming and outgoing CDSs to debts when it defaults.
    pub freezing: bool,
}

impl Policy {
    pub const REVERSIBLE: Policy = Policy::new(TargetRule::Naive, false);
    pub const SMART: Policy = Policy::new(TargetRule::Smart, false);
    pub const OPTIMISTIC: Policy = Policy::new(TargetRule::Optimistic, false);
    pub const MONOTONE: Policy = Policy::new(TargetRule::Optimistic, true);

    pub const fn new(rule: TargetRule, freezing: bool) -> Self {
        Policy { rule, freezing }
    }

    pub fn named(&self) -> Option<NamedModel> {
        NamedModel::ALL.into_iter().find(|m| m.policy() == *self)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(model) = self.named() {
            return write!(f, "{model}");
        }
        let rule = match self.rule {
            TargetRule::Naive => "naive",
            TargetRule::Smart => "smart",
            TargetRule::Optimistic => "optimistic",
        };
        if self.freezing {
            write!(f, "{rule}+freezing")
        } else {
            write!(f, "{rule}")
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedModel {
    Reversible,
    Smart,
    Optimistic,
    Monotone,
}

impl NamedModel {
    pub const ALL: [NamedModel; 4] = [
        NamedModel::Reversible,
        NamedModel::Smart,
        NamedModel::Optimistic,
        NamedModel::Monotone,
    ];

    pub fn policy(self) -> Policy {
        match self {
            NamedModel::Reversible => Policy::REVERSIBLE,
            NamedModel::Smart => Policy::SMART,
            NamedModel::Optimistic => Policy::OPTIMISTIC,
            NamedModel::Monotone => Policy::MONOTONE,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NamedModel::Reversible => "reversible",
            NamedModel::Smart => "smart",
            NamedModel::Optimistic => "optimistic",
            NamedModel::Monotone => "monotone",
        }
    }
}

impl fmt::Display for NamedModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NamedModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        NamedModel::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownModel(s.to_string()))
    }
}

/// Policy for a lowercase model name.
pub fn named_model(name: &str) -> Result<Policy, Error> {
    name.parse::<NamedModel>().map(NamedModel::policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_models_map_to_policies() {
        assert_eq!(
            named_model("monotone").unwrap(),
            Policy::new(TargetRule::Optimistic, true)
        );
        assert_eq!(
            named_model("reversible").unwrap(),
            Policy::new(TargetRule::Naive, false)
        );
        assert_eq!(named_model("smart").unwrap().rule, TargetRule::Smart);
        assert!(!named_model("optimistic").unwrap().freezing);
    }

    #[test]
    fn unknown_names_are_rejected() {
        assert_eq!(
            named_model("Monotone"),
            Err(Error::UnknownModel("Monotone".into()))
        );
    }

    #[test]
    fn unnamed_combinations_are_constructible() {
        let p = Policy::new(TargetRule::Smart, true);
        assert_eq!(p.named(), None);
        assert_eq!(p.to_string(), "smart+freezing");
        assert_eq!(Policy::MONOTONE.to_string(), "monotone");
    }
}
