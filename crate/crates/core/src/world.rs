//! One self-contained simulation world.
//!
//! A world owns its clock, random streams, participants, ledger, protocol
//! state and delivery log. Protocol operations live in `impl World` blocks in
//! their own modules.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::directed::DirectedState;
use crate::legacy::LegacyState;
use crate::model::{
    Account, AccountId, AllowAll, Customer, CustomerId, EmailAddress, EntryKind, FiId, FinancialInstitution,
    FraudScreen, Endpoints, Language, Leg, Ledger, ModelError, MoneyAmount, PhoneNumber, SimTime, TransferId,
};
use crate::notify::{DeliveryEntry, DeliveryLog, Notification, NotifyError};
use crate::rng::RngStreams;

/// Security-relevant facts recorded while operations run, for the
/// requirement checker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum TraceEvent {
    /// A transfer was protected by a human-chosen question.
    SecurityQuestionSet { transfer: TransferId },
    /// A sending identity was used; `verified` tells whether it was proven first.
    SenderIdentity {
        transfer: TransferId,
        identity: String,
        verified: bool,
    },
    /// Funds reached an account; `bound` is false when nothing tied the
    /// account to the addressed recipient.
    Deposit {
        transfer: TransferId,
        account: AccountId,
        bound: bool,
    },
    /// Serialized error returned for a failed identifier or code check.
    IdentifierFailure { error: String },
    NameLookup { address: String, revealed: bool },
    /// Funds pushed to a recipient without their action.
    UnsolicitedTransfer { transfer: TransferId, rejectable: bool },
    /// A fund withdrawal or account-level change.
    Authorization {
        operation: String,
        subject: String,
        one_time: bool,
    },
}

pub struct World {
    pub(crate) clock: SimTime,
    pub(crate) rng: RngStreams,
    pub(crate) fis: BTreeMap<FiId, FinancialInstitution>,
    pub(crate) customers: BTreeMap<CustomerId, Customer>,
    pub(crate) endpoints: Endpoints,
    pub(crate) ledger: Ledger,
    pub(crate) legacy: LegacyState,
    pub(crate) directed: DirectedState,
    pub(crate) deliveries: DeliveryLog,
    pub(crate) trace: Vec<TraceEvent>,
    pub(crate) fraud: Box<dyn FraudScreen>,
    next_transfer: u64,
}

impl std::fmt::Debug for World {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("World")
            .field("seed", &self.rng.seed())
            .field("clock", &self.clock)
            .field("fis", &self.fis.len())
            .field("customers", &self.customers.len())
            .field("deliveries", &self.deliveries.len())
            .finish_non_exhaustive()
    }
}

impl World {
    pub fn new(seed: u64) -> Self {
        World {
            clock: SimTime::default(),
            rng: RngStreams::new(seed),
            fis: BTreeMap::new(),
            customers: BTreeMap::new(),
            endpoints: Endpoints::default(),
            ledger: Ledger::new(),
            legacy: LegacyState::default(),
            directed: DirectedState::default(),
            deliveries: DeliveryLog::new(),
            trace: Vec::new(),
            fraud: Box::new(AllowAll),
            next_transfer: 1,
        }
    }

    pub fn with_fraud_screen(mut self, screen: Box<dyn FraudScreen>) -> Self {
        self.fraud = screen;
        self
    }

    pub fn seed(&self) -> u64 {
        self.rng.seed()
    }

    pub fn now(&self) -> SimTime {
        self.clock
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn deliveries(&self) -> &DeliveryLog {
        &self.deliveries
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn endpoints(&self) -> &Endpoints {
        &self.endpoints
    }

    pub fn institutions(&self) -> impl Iterator<Item = &FinancialInstitution> {
        self.fis.values()
    }

    pub fn customers(&self) -> impl Iterator<Item = &Customer> {
        self.customers.values()
    }

    pub fn rng_mut(&mut self) -> &mut RngStreams {
        &mut self.rng
    }

    pub fn declare_fi(&mut self, fi: FinancialInstitution) -> Result<(), ModelError> {
        if fi.min_transfer > fi.max_transfer {
            return Err(ModelError::BadLimits(fi.fi_id));
        }
        if self.fis.contains_key(&fi.fi_id) {
            return Err(ModelError::Duplicate(fi.fi_id.to_string()));
        }
        self.ledger.add_institution(fi.fi_id.clone());
        self.fis.insert(fi.fi_id.clone(), fi);
        Ok(())
    }

    pub fn declare_customer(
        &mut self,
        id: CustomerId,
        legal_name: &str,
        profile_name: Option<&str>,
        language: Language,
    ) -> Result<(), ModelError> {
        if legal_name.trim().is_empty() {
            return Err(ModelError::EmptyLegalName);
        }
        if self.customers.contains_key(&id) {
            return Err(ModelError::Duplicate(id.to_string()));
        }
        self.customers.insert(
            id.clone(),
            Customer {
                customer_id: id,
                legal_name: legal_name.to_string(),
                profile_name: profile_name.map(str::to_string),
                email_addresses: Vec::new(),
                phone_numbers: Vec::new(),
                preferred_language: language,
            },
        );
        Ok(())
    }

    /// Adds an email endpoint, optionally owned by a customer.
    pub fn declare_email(&mut self, address: &str, owner: Option<&CustomerId>, tls: bool) -> Result<(), ModelError> {
        let mut email = EmailAddress::parse(address)?;
        email.provider_tls_incoming = tls;
        if self.endpoints.emails.contains_key(address) {
            return Err(ModelError::Duplicate(address.to_string()));
        }
        if let Some(owner) = owner {
            self.customers
                .get_mut(owner)
                .ok_or_else(|| ModelError::UnknownCustomer(owner.clone()))?
                .email_addresses
                .push(address.to_string());
        }
        self.endpoints.emails.insert(address.to_string(), email);
        Ok(())
    }

    pub fn declare_phone(&mut self, number: &str, owner: Option<&CustomerId>) -> Result<(), ModelError> {
        let phone = PhoneNumber::parse(number)?;
        if self.endpoints.phones.contains_key(number) {
            return Err(ModelError::Duplicate(number.to_string()));
        }
        if let Some(owner) = owner {
            self.customers
                .get_mut(owner)
                .ok_or_else(|| ModelError::UnknownCustomer(owner.clone()))?
                .phone_numbers
                .push(number.to_string());
        }
        self.endpoints.phones.insert(number.to_string(), phone);
        Ok(())
    }

    pub fn open_account(&mut self, id: AccountId, owner: &CustomerId, fi: &FiId) -> Result<(), ModelError> {
        self.customer(owner)?;
        self.fi(fi)?;
        self.ledger.open_account(id, owner.clone(), fi.clone())?;
        Ok(())
    }

    pub fn mint(&mut self, account: &AccountId, amount: MoneyAmount) -> Result<u64, ModelError> {
        Ok(self.ledger.mint(account, amount, self.clock)?)
    }

    pub fn advance_clock(&mut self, minutes: u64) {
        self.clock = self.clock.plus_minutes(minutes);
    }

    pub fn set_tls(&mut self, address: &str, tls: bool) -> Result<(), ModelError> {
        self.endpoints
            .emails
            .get_mut(address)
            .ok_or_else(|| ModelError::UnknownEndpoint(address.to_string()))?
            .provider_tls_incoming = tls;
        Ok(())
    }

    pub fn compromise_endpoint(&mut self, endpoint: &str) -> Result<(), ModelError> {
        if let Some(e) = self.endpoints.emails.get_mut(endpoint) {
            e.endpoint_compromised = true;
        } else if let Some(p) = self.endpoints.phones.get_mut(endpoint) {
            p.endpoint_compromised = true;
        } else {
            return Err(ModelError::UnknownEndpoint(endpoint.to_string()));
        }
        Ok(())
    }

    pub fn fi(&self, id: &FiId) -> Result<&FinancialInstitution, ModelError> {
        self.fis.get(id).ok_or_else(|| ModelError::UnknownFi(id.clone()))
    }

    pub fn customer(&self, id: &CustomerId) -> Result<&Customer, ModelError> {
        self.customers.get(id).ok_or_else(|| ModelError::UnknownCustomer(id.clone()))
    }

    pub fn account(&self, id: &AccountId) -> Result<&Account, ModelError> {
        self.ledger.account(id).ok_or_else(|| ModelError::UnknownAccount(id.clone()))
    }

    pub fn owner_of(&self, account: &AccountId) -> Result<&Customer, ModelError> {
        let owner = self.account(account)?.owner.clone();
        self.customer(&owner)
    }

    pub fn fi_of(&self, account: &AccountId) -> Result<&FinancialInstitution, ModelError> {
        let fi = self.account(account)?.fi.clone();
        self.fi(&fi)
    }

    /// Customer owning `address` (email or phone), if any.
    pub fn customer_by_contact(&self, address: &str) -> Option<&Customer> {
        self.customers
            .values()
            .find(|c| c.email_addresses.iter().any(|a| a == address) || c.phone_numbers.iter().any(|n| n == address))
    }

    pub fn balance(&self, account: &AccountId) -> Result<MoneyAmount, ModelError> {
        Ok(self.account(account)?.balance)
    }

    pub(crate) fn next_transfer_id(&mut self) -> TransferId {
        let id = TransferId(self.next_transfer);
        self.next_transfer += 1;
        id
    }

    pub(crate) fn record(&mut self, event: TraceEvent) {
        self.trace.push(event);
    }

    /// Delivers a notification and advances the clock to its delivery time.
    pub(crate) fn emit(&mut self, mut notification: Notification) -> Result<&DeliveryEntry, NotifyError> {
        notification.emitted_at = self.clock;
        let customers = &self.customers;
        let entry = self.deliveries.deliver(
            notification,
            &self.endpoints,
            |c| customers.contains_key(c),
            &mut self.rng.latency,
        )?;
        if let Some(at) = entry.notification.delivered_at {
            self.clock = self.clock.max(at);
        }
        Ok(entry)
    }

    /// Sum of amounts sent from `account` today plus `amount`, against the
    /// account institution's daily send limit.
    pub(crate) fn within_send_limit(&self, account: &AccountId, amount: MoneyAmount) -> Result<bool, ModelError> {
        let limit = self.fi_of(account)?.daily_send_limit;
        let sent = self.ledger.daily_totals(account, self.clock.day())?.sent;
        Ok(sent.checked_add(amount).is_some_and(|total| total <= limit))
    }

    pub(crate) fn within_deposit_limit(&self, account: &AccountId, amount: MoneyAmount) -> Result<bool, ModelError> {
        let limit = self.fi_of(account)?.daily_deposit_limit;
        let deposited = self.ledger.daily_totals(account, self.clock.day())?.deposited;
        Ok(deposited.checked_add(amount).is_some_and(|total| total <= limit))
    }

    /// Account to the suspense account of its own institution.
    pub(crate) fn debit_to_suspense(
        &mut self,
        account: &AccountId,
        amount: MoneyAmount,
        transfer: TransferId,
    ) -> Result<FiId, ModelError> {
        let fi = self.account(account)?.fi.clone();
        self.ledger.post_transfer_leg(
            &Leg::Account(account.clone()),
            &Leg::Suspense(fi.clone()),
            amount,
            Some(transfer),
            EntryKind::Send,
            self.clock,
        )?;
        Ok(fi)
    }

    /// Suspense of `held_at` to `account`, settling between institutions first
    /// when the account banks elsewhere.
    pub(crate) fn credit_from_suspense(
        &mut self,
        held_at: &FiId,
        account: &AccountId,
        amount: MoneyAmount,
        transfer: TransferId,
        kind: EntryKind,
    ) -> Result<(), ModelError> {
        let fi = self.account(account)?.fi.clone();
        if &fi != held_at {
            // Checked up front so a failure cannot leave value stranded mid-path.
            self.ledger.balance_of(&Leg::Account(account.clone()))?;
            self.ledger.post_transfer_leg(
                &Leg::Suspense(held_at.clone()),
                &Leg::Suspense(fi.clone()),
                amount,
                Some(transfer),
                EntryKind::Settlement,
                self.clock,
            )?;
        }
        self.ledger.post_transfer_leg(
            &Leg::Suspense(fi),
            &Leg::Account(account.clone()),
            amount,
            Some(transfer),
            kind,
            self.clock,
        )?;
        Ok(())
    }

    /// Account back into the suspense account of `to_fi`, settling if needed.
    pub(crate) fn reverse_to_suspense(
        &mut self,
        account: &AccountId,
        to_fi: &FiId,
        amount: MoneyAmount,
        transfer: TransferId,
    ) -> Result<(), ModelError> {
        let fi = self.account(account)?.fi.clone();
        self.ledger.post_transfer_leg(
            &Leg::Account(account.clone()),
            &Leg::Suspense(fi.clone()),
            amount,
            Some(transfer),
            EntryKind::Return,
            self.clock,
        )?;
        if &fi != to_fi {
            self.ledger.post_transfer_leg(
                &Leg::Suspense(fi),
                &Leg::Suspense(to_fi.clone()),
                amount,
                Some(transfer),
                EntryKind::Settlement,
                self.clock,
            )?;
        }
        Ok(())
    }

    /// Value minted minus value in the system; zero whenever conservation holds.
    pub fn conservation_ok(&self) -> bool {
        self.ledger.total_system_value() == self.ledger.minted_total() && self.ledger.replay_matches()
    }
}
