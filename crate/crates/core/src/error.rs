use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("unknown bank `{0}`")]
    UnknownBank(String),
    #[error("duplicate bank id `{0}`")]
    DuplicateBank(String),
    #[error("bank id must be non-empty")]
    EmptyBankId,
    #[error("bank `{0}` cannot hold a contract with itself")]
    SelfContract(String),
    #[error("CDS from `{debtor}` to `{creditor}` cannot reference one of its own parties")]
    SelfReference { debtor: String, creditor: String },
    #[error("contract weight must be positive, got {0}")]
    NonPositiveWeight(String),
    #[error("external assets of `{0}` must be non-negative")]
    NegativeAssets(String),
    #[error("recovery rate of `{bank}` must lie in [0,1], got {rate}")]
    RateOutOfRange { bank: String, rate: String },
    #[error("recovery vector covers {got} banks, system has {expected}")]
    RateCount { expected: usize, got: usize },
    #[error("recovery function inputs must be non-negative")]
    NegativeInput,
    #[error("system contains CDS contracts; a debt-only system is required")]
    NotDebtOnly,
    #[error("bank `{0}` is not updatable")]
    NotUpdatable(String),
    #[error("nothing to undo at time 0")]
    NothingToUndo,
    #[error("strategy chose `{0}`, which is not updatable")]
    StrategyViolation(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("unknown gadget `{0}`")]
    UnknownGadget(String),
    #[error("invalid gadget parameters: {0}")]
    InvalidParams(String),
    #[error("invalid formula: {0}")]
    InvalidFormula(String),
    #[error("exploration was truncated; extremal counts are incomplete")]
    Incomplete,
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Stable machine-readable code, used by the CLI and the session service.
    pub fn code(&self) -> &'static str {
        match self {
            Error::UnknownBank(_) => "unknown_bank",
            Error::DuplicateBank(_) => "duplicate_bank",
            Error::EmptyBankId => "empty_bank_id",
            Error::SelfContract(_) => "self_contract",
            Error::SelfReference { .. } => "self_reference",
            Error::NonPositiveWeight(_) => "non_positive_weight",
            Error::NegativeAssets(_) => "negative_assets",
            Error::RateOutOfRange { .. } => "rate_out_of_range",
            Error::RateCount { .. } => "rate_count",
            Error::NegativeInput => "negative_input",
            Error::NotDebtOnly => "not_debt_only",
            Error::NotUpdatable(_) => "not_updatable",
            Error::NothingToUndo => "nothing_to_undo",
            Error::StrategyViolation(_) => "strategy_violation",
            Error::UnknownModel(_) => "unknown_model",
            Error::UnknownGadget(_) => "unknown_gadget",
            Error::InvalidParams(_) => "invalid_params",
            Error::InvalidFormula(_) => "invalid_formula",
            Error::Incomplete => "incomplete",
            Error::Contract(_) => "contract_violation",
            Error::Parse(_) => "parse_error",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
