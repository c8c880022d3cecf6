//! Domain entities and the good-funds ledger.
//!
//! Money leaves a customer account into the suspense (trust) account of the
//! customer's institution at initiation, moves suspense to suspense when the
//! counterparty banks elsewhere, and lands in the destination account on
//! completion. Every movement is a balanced journal entry, so the journal can
//! be replayed to reproduce live balances at any point.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Non-negative amount of Canadian dollars, stored as integer cents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct MoneyAmount(u64);

impl MoneyAmount {
    pub const ZERO: MoneyAmount = MoneyAmount(0);

    pub const fn from_cents(cents: u64) -> Self {
        MoneyAmount(cents)
    }

    pub const fn from_dollars(dollars: u64) -> Self {
        MoneyAmount(dollars * 100)
    }

    pub const fn cents(self) -> u64 {
        self.0
    }

    pub const fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn checked_add(self, other: MoneyAmount) -> Option<MoneyAmount> {
        self.0.checked_add(other.0).map(MoneyAmount)
    }

    pub fn checked_sub(self, other: MoneyAmount) -> Option<MoneyAmount> {
        self.0.checked_sub(other.0).map(MoneyAmount)
    }

    /// Parses the `CAD 1234.56` rendering produced by `Display`.
    pub fn parse_display(text: &str) -> Option<MoneyAmount> {
        let digits = text.trim().strip_prefix("CAD ")?;
        let (whole, frac) = digits.split_once('.')?;
        if frac.len() != 2 {
            return None;
        }
        let whole: u64 = whole.parse().ok()?;
        let frac: u64 = frac.parse().ok()?;
        whole.checked_mul(100)?.checked_add(frac).map(MoneyAmount)
    }
}

impl fmt::Display for MoneyAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CAD {}.{:02}", self.0 / 100, self.0 % 100)
    }
}

impl std::iter::Sum for MoneyAmount {
    fn sum<I: Iterator<Item = MoneyAmount>>(iter: I) -> Self {
        MoneyAmount(iter.map(|m| m.0).sum())
    }
}

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                $name(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }
    };
}

string_id!(
    /// Participating financial institution.
    FiId
);
string_id!(CustomerId);
string_id!(AccountId);

/// Identifier of a transfer or money request of either protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TransferId(pub u64);

impl fmt::Display for TransferId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{:04}", self.0)
    }
}

/// Simulated time in whole minutes since the start of the simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const MINUTES_PER_DAY: u64 = 24 * 60;

    pub const fn minutes(self) -> u64 {
        self.0
    }

    pub const fn day(self) -> u64 {
        self.0 / Self::MINUTES_PER_DAY
    }

    pub const fn plus_minutes(self, minutes: u64) -> SimTime {
        SimTime(self.0 + minutes)
    }

    pub const fn plus_days(self, days: u64) -> SimTime {
        SimTime(self.0 + days * Self::MINUTES_PER_DAY)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let in_day = self.0 % Self::MINUTES_PER_DAY;
        write!(f, "day {} {:02}:{:02}", self.day(), in_day / 60, in_day % 60)
    }
}

/// How an institution passes customer names to the platform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NamePolicy {
    Custom,
    Legal,
    Both,
}

impl NamePolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            NamePolicy::Custom => "custom",
            NamePolicy::Legal => "legal",
            NamePolicy::Both => "both",
        }
    }
}

impl std::str::FromStr for NamePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "custom" => Ok(NamePolicy::Custom),
            "legal" => Ok(NamePolicy::Legal),
            "both" => Ok(NamePolicy::Both),
            other => Err(format!("unknown name policy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinancialInstitution {
    pub fi_id: FiId,
    pub display_name: String,
    pub name_format_policy: NamePolicy,
    pub min_transfer: MoneyAmount,
    pub max_transfer: MoneyAmount,
    pub daily_send_limit: MoneyAmount,
    pub daily_deposit_limit: MoneyAmount,
    pub supports_confirmation_message: bool,
    pub supports_portal_inbox: bool,
}

impl FinancialInstitution {
    pub const DEFAULT_DAILY_DEPOSIT_LIMIT: MoneyAmount = MoneyAmount::from_dollars(10_000);
    pub const DEFAULT_DAILY_SEND_LIMIT: MoneyAmount = MoneyAmount::from_dollars(1_000);

    /// Institution with the default limits: CAD 0.01 minimum, CAD 3,000 maximum,
    /// CAD 1,000 sent and CAD 10,000 deposited per day.
    pub fn new(fi_id: impl Into<String>, display_name: impl Into<String>, policy: NamePolicy) -> Self {
        FinancialInstitution {
            fi_id: FiId::new(fi_id),
            display_name: display_name.into(),
            name_format_policy: policy,
            min_transfer: MoneyAmount::from_cents(1),
            max_transfer: MoneyAmount::from_dollars(3_000),
            daily_send_limit: Self::DEFAULT_DAILY_SEND_LIMIT,
            daily_deposit_limit: Self::DEFAULT_DAILY_DEPOSIT_LIMIT,
            supports_confirmation_message: false,
            supports_portal_inbox: false,
        }
    }

    pub fn accepts_amount(&self, amount: MoneyAmount) -> bool {
        !amount.is_zero() && amount >= self.min_transfer && amount <= self.max_transfer
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Language {
    English,
    French,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::English => "English",
            Language::French => "French",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Customer {
    pub customer_id: CustomerId,
    pub legal_name: String,
    pub profile_name: Option<String>,
    /// Addresses owned by this customer; endpoint properties live in [`Endpoints`].
    pub email_addresses: Vec<String>,
    pub phone_numbers: Vec<String>,
    pub preferred_language: Language,
}

impl Customer {
    /// The name shown under a `custom` name policy.
    pub fn custom_name(&self) -> &str {
        self.profile_name.as_deref().unwrap_or(&self.legal_name)
    }

    pub fn first_name(&self) -> &str {
        self.legal_name.split_whitespace().next().unwrap_or(&self.legal_name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmailAddress {
    pub address: String,
    pub provider_tls_incoming: bool,
    pub endpoint_compromised: bool,
}

impl EmailAddress {
    pub fn parse(address: &str) -> Result<Self, ModelError> {
        let at_count = address.matches('@').count();
        let valid = at_count == 1
            && !address.starts_with('@')
            && !address.ends_with('@')
            && !address.chars().any(char::is_whitespace);
        if !valid {
            return Err(ModelError::BadEmail(address.to_string()));
        }
        Ok(EmailAddress {
            address: address.to_string(),
            provider_tls_incoming: true,
            endpoint_compromised: false,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhoneNumber {
    pub number: String,
    pub endpoint_compromised: bool,
}

impl PhoneNumber {
    pub fn parse(number: &str) -> Result<Self, ModelError> {
        if number.is_empty() || !number.bytes().all(|b| b.is_ascii_digit()) {
            return Err(ModelError::BadPhone(number.to_string()));
        }
        Ok(PhoneNumber {
            number: number.to_string(),
            endpoint_compromised: false,
        })
    }
}

/// Where a customer can be reached: an email address or a mobile number.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Contact {
    Email(String),
    Phone(String),
}

impl Contact {
    /// Email addresses contain `@`; anything made only of digits is a phone number.
    pub fn parse(text: &str) -> Result<Contact, ModelError> {
        if text.contains('@') {
            EmailAddress::parse(text).map(|e| Contact::Email(e.address))
        } else {
            PhoneNumber::parse(text).map(|p| Contact::Phone(p.number))
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            Contact::Email(a) | Contact::Phone(a) => a,
        }
    }
}

impl fmt::Display for Contact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Directory of every email address and phone number known to the world,
/// whether or not a customer owns it.
#[derive(Debug, Clone, Default)]
pub struct Endpoints {
    pub emails: BTreeMap<String, EmailAddress>,
    pub phones: BTreeMap<String, PhoneNumber>,
}

impl Endpoints {
    pub fn contains(&self, contact: &Contact) -> bool {
        match contact {
            Contact::Email(a) => self.emails.contains_key(a),
            Contact::Phone(n) => self.phones.contains_key(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub account_id: AccountId,
    pub owner: CustomerId,
    pub fi: FiId,
    pub balance: MoneyAmount,
}

/// One side of a journal entry.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Leg {
    Account(AccountId),
    Suspense(FiId),
    /// Value entering the system during scenario setup. Carries no balance.
    External,
}

impl fmt::Display for Leg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Leg::Account(a) => write!(f, "account:{a}"),
            Leg::Suspense(fi) => write!(f, "suspense:{fi}"),
            Leg::External => f.write_str("external"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntryKind {
    Mint,
    /// Customer account to suspense at initiation.
    Send,
    /// Suspense to suspense between institutions.
    Settlement,
    /// Suspense to the destination account on completion.
    Deposit,
    /// Suspense back to the originating account.
    Refund,
    /// Destination account back to suspense when a recipient returns funds.
    Return,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub seq: u64,
    pub timestamp: SimTime,
    pub debit_leg: Leg,
    pub credit_leg: Leg,
    pub amount: MoneyAmount,
    pub transfer_id: Option<TransferId>,
    pub kind: EntryKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DailyTotals {
    pub sent: MoneyAmount,
    pub deposited: MoneyAmount,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
pub enum LedgerError {
    #[error("insufficient funds on {leg}: balance {balance}, needed {needed}")]
    InsufficientFunds {
        leg: String,
        balance: MoneyAmount,
        needed: MoneyAmount,
    },
    #[error("unknown leg {0}")]
    UnknownLeg(String),
    #[error("zero amount")]
    ZeroAmount,
    #[error("account {0} already exists")]
    DuplicateAccount(AccountId),
    #[error("balance overflow")]
    Overflow,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("email address `{0}` must contain exactly one '@'")]
    BadEmail(String),
    #[error("phone number `{0}` must be a non-empty digit string")]
    BadPhone(String),
    #[error("legal name must be non-empty")]
    EmptyLegalName,
    #[error("min_transfer exceeds max_transfer at {0}")]
    BadLimits(FiId),
    #[error("unknown financial institution {0}")]
    UnknownFi(FiId),
    #[error("unknown customer {0}")]
    UnknownCustomer(CustomerId),
    #[error("unknown account {0}")]
    UnknownAccount(AccountId),
    #[error("duplicate identifier {0}")]
    Duplicate(String),
    #[error("unknown endpoint {0}")]
    UnknownEndpoint(String),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

/// Double-entry ledger over customer accounts and per-institution suspense accounts.
#[derive(Debug, Clone, Default)]
pub struct Ledger {
    accounts: BTreeMap<AccountId, Account>,
    suspense: BTreeMap<FiId, MoneyAmount>,
    journal: Vec<JournalEntry>,
}

impl Ledger {
    pub fn new() -> Self {
        Ledger::default()
    }

    /// Opens a zero-balance suspense account for `fi` if it has none yet.
    pub fn add_institution(&mut self, fi: FiId) {
        self.suspense.entry(fi).or_insert(MoneyAmount::ZERO);
    }

    pub fn open_account(&mut self, account_id: AccountId, owner: CustomerId, fi: FiId) -> Result<(), LedgerError> {
        if self.accounts.contains_key(&account_id) {
            return Err(LedgerError::DuplicateAccount(account_id));
        }
        if !self.suspense.contains_key(&fi) {
            return Err(LedgerError::UnknownLeg(Leg::Suspense(fi).to_string()));
        }
        self.accounts.insert(
            account_id.clone(),
            Account {
                account_id,
                owner,
                fi,
                balance: MoneyAmount::ZERO,
            },
        );
        Ok(())
    }

    pub fn account(&self, id: &AccountId) -> Option<&Account> {
        self.accounts.get(id)
    }

    pub fn accounts(&self) -> impl Iterator<Item = &Account> {
        self.accounts.values()
    }

    pub fn suspense_balances(&self) -> impl Iterator<Item = (&FiId, MoneyAmount)> {
        self.suspense.iter().map(|(fi, m)| (fi, *m))
    }

    pub fn journal(&self) -> &[JournalEntry] {
        &self.journal
    }

    /// Credits `amount` to an account from outside the system. Scenario setup only.
    pub fn mint(&mut self, account_id: &AccountId, amount: MoneyAmount, at: SimTime) -> Result<u64, LedgerError> {
        if amount.is_zero() {
            return Err(LedgerError::ZeroAmount);
        }
        let account = self
            .accounts
            .get_mut(account_id)
            .ok_or_else(|| LedgerError::UnknownLeg(Leg::Account(account_id.clone()).to_string()))?;
        account.balance = account.balance.checked_add(amount).ok_or(LedgerError::Overflow)?;
        Ok(self.append(at, Leg::External, Leg::Account(account_id.clone()), amount, None, EntryKind::Mint))
    }

    /// Moves `amount` from `from` to `to` as one balanced entry. Either both
    /// balances change or neither does.
    pub fn post_transfer_leg(
        &mut self,
        from: &Leg,
        to: &Leg,
        amount: MoneyAmount,
        transfer_id: Option<TransferId>,
        kind: EntryKind,
        at: SimTime,
    ) -> Result<u64, LedgerError> {
        if amount.is_zero() {
            return Err(LedgerError::ZeroAmount);
        }
        if matches!(from, Leg::External) || matches!(to, Leg::External) {
            return Err(LedgerError::UnknownLeg(Leg::External.to_string()));
        }
        let from_balance = self.balance_of(from)?;
        let to_balance = self.balance_of(to)?;
        let new_from = from_balance.checked_sub(amount).ok_or_else(|| LedgerError::InsufficientFunds {
            leg: from.to_string(),
            balance: from_balance,
            needed: amount,
        })?;
        if from == to {
            return Ok(self.append(at, from.clone(), to.clone(), amount, transfer_id, kind));
        }
        let new_to = to_balance.checked_add(amount).ok_or(LedgerError::Overflow)?;
        *self.slot_mut(from) = new_from;
        *self.slot_mut(to) = new_to;
        Ok(self.append(at, from.clone(), to.clone(), amount, transfer_id, kind))
    }

    pub fn balance_of(&self, leg: &Leg) -> Result<MoneyAmount, LedgerError> {
        match leg {
            Leg::Account(id) => self.accounts.get(id).map(|a| a.balance),
            Leg::Suspense(fi) => self.suspense.get(fi).copied(),
            Leg::External => None,
        }
        .ok_or_else(|| LedgerError::UnknownLeg(leg.to_string()))
    }

    /// Sum over all customer and suspense balances.
    pub fn total_system_value(&self) -> MoneyAmount {
        self.accounts.values().map(|a| a.balance).sum::<MoneyAmount>()
            + self.suspense.values().copied().sum::<MoneyAmount>()
    }

    /// Amounts sent from and deposited into `account_id` on simulated day `day`.
    pub fn daily_totals(&self, account_id: &AccountId, day: u64) -> Result<DailyTotals, LedgerError> {
        if !self.accounts.contains_key(account_id) {
            return Err(LedgerError::UnknownLeg(Leg::Account(account_id.clone()).to_string()));
        }
        let leg = Leg::Account(account_id.clone());
        let mut totals = DailyTotals::default();
        for entry in self.journal.iter().filter(|e| e.timestamp.day() == day) {
            match entry.kind {
                EntryKind::Send if entry.debit_leg == leg => totals.sent = totals.sent + entry.amount,
                EntryKind::Deposit if entry.credit_leg == leg => totals.deposited = totals.deposited + entry.amount,
                _ => {}
            }
        }
        Ok(totals)
    }

    /// Rebuilds every balance from zero by applying the journal in order.
    pub fn replay(&self) -> Result<ReplayedBalances, LedgerError> {
        let mut out = ReplayedBalances {
            accounts: self.accounts.keys().map(|k| (k.clone(), MoneyAmount::ZERO)).collect(),
            suspense: self.suspense.keys().map(|k| (k.clone(), MoneyAmount::ZERO)).collect(),
        };
        for entry in &self.journal {
            if entry.debit_leg != Leg::External {
                let slot = out.slot_mut(&entry.debit_leg)?;
                *slot = slot.checked_sub(entry.amount).ok_or_else(|| LedgerError::InsufficientFunds {
                    leg: entry.debit_leg.to_string(),
                    balance: *slot,
                    needed: entry.amount,
                })?;
            }
            let slot = out.slot_mut(&entry.credit_leg)?;
            *slot = slot.checked_add(entry.amount).ok_or(LedgerError::Overflow)?;
        }
        Ok(out)
    }

    /// True when a replay of the journal reproduces the live balances exactly.
    pub fn replay_matches(&self) -> bool {
        match self.replay() {
            Ok(replayed) => {
                replayed.accounts.iter().all(|(id, m)| self.accounts[id].balance == *m)
                    && replayed.suspense.iter().all(|(fi, m)| self.suspense[fi] == *m)
            }
            Err(_) => false,
        }
    }

    /// Net value injected by `mint` entries.
    pub fn minted_total(&self) -> MoneyAmount {
        self.journal
            .iter()
            .filter(|e| e.kind == EntryKind::Mint)
            .map(|e| e.amount)
            .sum()
    }

    fn slot_mut(&mut self, leg: &Leg) -> &mut MoneyAmount {
        match leg {
            Leg::Account(id) => &mut self.accounts.get_mut(id).expect("checked by balance_of").balance,
            Leg::Suspense(fi) => self.suspense.get_mut(fi).expect("checked by balance_of"),
            Leg::External => unreachable!("external legs carry no balance"),
        }
    }

    fn append(
        &mut self,
        at: SimTime,
        debit_leg: Leg,
        credit_leg: Leg,
        amount: MoneyAmount,
        transfer_id: Option<TransferId>,
        kind: EntryKind,
    ) -> u64 {
        let seq = self.journal.len() as u64 + 1;
        self.journal.push(JournalEntry {
            seq,
            timestamp: at,
            debit_leg,
            credit_leg,
            amount,
            transfer_id,
            kind,
        });
        seq
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayedBalances {
    pub accounts: BTreeMap<AccountId, MoneyAmount>,
    pub suspense: BTreeMap<FiId, MoneyAmount>,
}

impl ReplayedBalances {
    fn slot_mut(&mut self, leg: &Leg) -> Result<&mut MoneyAmount, LedgerError> {
        match leg {
            Leg::Account(id) => self.accounts.get_mut(id),
            Leg::Suspense(fi) => self.suspense.get_mut(fi),
            Leg::External => None,
        }
        .ok_or_else(|| LedgerError::UnknownLeg(leg.to_string()))
    }
}

impl std::ops::Add for MoneyAmount {
    type Output = MoneyAmount;

    /// Panics on overflow; balances are bounded far below `u64::MAX` cents.
    fn add(self, rhs: MoneyAmount) -> MoneyAmount {
        self.checked_add(rhs).expect("money overflow")
    }
}

/// Outcome of a fraud screen on a deposit attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FraudDecision {
    Allow,
    Block(String),
}

/// What a fraud screen gets to see about a deposit.
#[derive(Debug, Clone)]
pub struct DepositContext<'a> {
    pub transfer_id: TransferId,
    pub amount: MoneyAmount,
    pub specified_recipient_name: &'a str,
    pub depositor_legal_name: &'a str,
    pub target_account: &'a AccountId,
}

/// Hook for the platform's risk engine. The real engine is not observable, so
/// the default allows everything.
pub trait FraudScreen: Send {
    fn screen_deposit(&self, ctx: &DepositContext<'_>) -> FraudDecision;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AllowAll;

impl FraudScreen for AllowAll {
    fn screen_deposit(&self, _ctx: &DepositContext<'_>) -> FraudDecision {
        FraudDecision::Allow
    }
}
