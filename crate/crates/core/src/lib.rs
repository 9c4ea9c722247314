//! Sequential clearing of financial networks with debts and credit default
//! swaps.
//!
//! The crate is generic over an exact scalar type ([`Scalar`]); the aliases at
//! the root fix it to arbitrary-precision rationals, which is what every
//! reference behaviour needs.

pub mod clearing;
pub mod engine;
pub mod error;
pub mod gadgets;
pub mod io;
pub mod model;
pub mod policy;
pub mod scalar;
pub mod search;

pub use clearing::{
    clear_system, freeze_snapshot, greatest_clearing_vector, optimistic_rewrite, tentative_rates,
    DebtOnlySystem,
};
pub use engine::{
    run, EngineState, OutcomeKind, RunConfig, RunOutcome, StateKey, Strategy, TraceEvent,
};
pub use error::{Error, Result};
pub use model::{
    recovery_function, Bank, CdsContract, DebtContract, EquilibriumCheck, Evaluation,
    FinancialSystem, RecoveryVector, SystemBuilder,
};
pub use policy::{named_model, NamedModel, Policy, TargetRule};
pub use scalar::Scalar;
pub use search::{
    best_default_time, explore, explore_from, max_defaults, maxsat_opt, min_defaults,
    DefaultTimeReport, ExplorationResult, ExploreConfig, Extremum, Opportunity,
};

/// Arbitrary-precision rational.
pub type Rational = num_rational::BigRational;
pub type System = FinancialSystem<Rational>;
pub type Builder = SystemBuilder<Rational>;
pub type Rates = RecoveryVector<Rational>;
pub type State = EngineState<Rational>;
