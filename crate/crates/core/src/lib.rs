//! Deterministic simulator of an email and SMS driven interbank transfer
//! system, its notification leakage, a redirection adversary, and a directed
//! redesign checked against seven requirements.

pub mod adversary;
pub mod directed;
pub mod harness;
pub mod legacy;
pub mod model;
pub mod notify;
pub mod rng;
pub mod world;

pub use adversary::{AttackOutcome, AttackTrace, GuessModel, Observation, Observer};
pub use directed::{check_requirements, Requirement, RequirementReport};
pub use legacy::{DepositOutcome, LegacyError, SecurityQuestion, StrengthClass, TransferStatus};
pub use model::{AccountId, Contact, CustomerId, FiId, FinancialInstitution, MoneyAmount, NamePolicy, SimTime, TransferId};
pub use notify::{Channel, Destination, NotificationField, TransferKind};
pub use world::{TraceEvent, World};
