//! Directed transfers addressed to verified InteracIDs.
//!
//! A transfer names an identifier plus its three-digit security code and can
//! only ever land in an account linked to that identifier. Notifications say
//! that something happened and nothing more. Every withdrawal and every
//! device change consumes a single-use authorization.

pub mod requirements;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AccountId, Contact, CustomerId, EntryKind, FiId, LedgerError, ModelError, MoneyAmount, SimTime, TransferId};
use crate::notify::{compose_generic_notification, Destination, DirectedKind, NotifyError};
use crate::world::{TraceEvent, World};

pub use requirements::{check_requirements, Requirement, RequirementReport, RequirementResult};

pub const RETURN_WINDOW_DAYS: u64 = 30;
pub const MAX_ID_LEN: usize = 10;

/// Three decimal digits, drawn uniformly at registration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecurityCode(u16);

impl SecurityCode {
    pub fn new(value: u16) -> Option<Self> {
        (value < 1000).then_some(SecurityCode(value))
    }

    pub fn value(self) -> u16 {
        self.0
    }

    /// Exact match against typed input; anything but three digits fails.
    pub fn matches(self, entered: &str) -> bool {
        entered.len() == 3 && entered.bytes().all(|b| b.is_ascii_digit()) && entered.parse::<u16>() == Ok(self.0)
    }
}

impl fmt::Display for SecurityCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:03}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteracId {
    pub id_string: String,
    pub owner: CustomerId,
    pub notification_address: Contact,
    pub verified: bool,
    pub security_code: SecurityCode,
    pub linked_accounts: Vec<AccountId>,
    pub autodeposit_only: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AuthPurpose {
    InitiateTransfer,
    FulfilRequest,
    DeviceChange,
}

impl AuthPurpose {
    pub fn as_str(self) -> &'static str {
        match self {
            AuthPurpose::InitiateTransfer => "initiate",
            AuthPurpose::FulfilRequest => "fulfil",
            AuthPurpose::DeviceChange => "device",
        }
    }
}

impl std::str::FromStr for AuthPurpose {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "initiate" => Ok(AuthPurpose::InitiateTransfer),
            "fulfil" => Ok(AuthPurpose::FulfilRequest),
            "device" => Ok(AuthPurpose::DeviceChange),
            other => Err(format!("unknown authorization purpose `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AuthToken(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OneTimeAuth {
    pub token: AuthToken,
    pub purpose: AuthPurpose,
    pub bound_customer: CustomerId,
    pub consumed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DirectedStatus {
    PendingSelection,
    Deposited,
    Rejected,
    Returned,
    Expired,
}

impl DirectedStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            DirectedStatus::PendingSelection => "pending_selection",
            DirectedStatus::Deposited => "deposited",
            DirectedStatus::Rejected => "rejected",
            DirectedStatus::Returned => "returned",
            DirectedStatus::Expired => "expired",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectedTransfer {
    pub transfer_id: TransferId,
    pub sender_account: AccountId,
    pub sender_id: String,
    pub target: String,
    pub amount: MoneyAmount,
    pub message: Option<String>,
    pub status: DirectedStatus,
    pub autodeposit: bool,
    pub deposited_into: Option<AccountId>,
    pub return_deadline: Option<SimTime>,
    pub held_at: FiId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RequestStatus {
    Requested,
    Fulfilled,
    Declined,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectedRequest {
    pub request_id: TransferId,
    pub requestor_account: AccountId,
    /// Identifier of the party asked to pay.
    pub target: String,
    pub amount: MoneyAmount,
    pub status: RequestStatus,
    pub paid_from: Option<AccountId>,
}

/// What the recipient learns about a return: the transfer handle and amount.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReturnReceipt {
    pub transfer: TransferId,
    pub amount: MoneyAmount,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Registration {
    pub id_string: String,
    pub verification_token: String,
}

#[derive(Debug, Clone, Default)]
pub struct DirectedState {
    pub(crate) ids: BTreeMap<String, InteracId>,
    pub(crate) by_address: BTreeMap<String, String>,
    pub(crate) pending_verification: BTreeMap<String, String>,
    pub(crate) auths: BTreeMap<AuthToken, OneTimeAuth>,
    pub(crate) transfers: BTreeMap<TransferId, DirectedTransfer>,
    pub(crate) requests: BTreeMap<TransferId, DirectedRequest>,
    pub(crate) failed_guesses: BTreeMap<String, u32>,
    pub(crate) code_lockout: Option<u32>,
    pub(crate) status_relay: BTreeSet<CustomerId>,
}

impl DirectedState {
    pub fn failed_guesses(&self, source: &str) -> u32 {
        self.failed_guesses.get(source).copied().unwrap_or(0)
    }
}

/// Errors of the directed protocol. Serializable so that callers can compare
/// what an outsider would see byte for byte.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
pub enum DirectedError {
    #[error("identifier already taken")]
    IdTaken,
    #[error("notification address already linked to an identifier")]
    AddressAlreadyLinked,
    #[error("bad identifier format: {0}")]
    BadFormat(String),
    #[error("unknown or used verification token")]
    BadToken,
    /// Covers unknown, unverified and wrong-code cases alike.
    #[error("invalid identifier or security code")]
    InvalidIdOrCode,
    #[error("one-time authorization required")]
    AuthRequired,
    #[error("sender has no verified identifier")]
    SenderNotVerified,
    #[error("too many failed code entries")]
    Throttled,
    #[error("insufficient funds")]
    InsufficientFunds,
    #[error("daily limit exceeded")]
    LimitExceeded,
    #[error("amount out of range")]
    AmountOutOfRange,
    #[error("transfer is not pending")]
    NotPending,
    #[error("account is not linked to the identifier")]
    AccountNotLinked,
    #[error("return window has expired")]
    WindowExpired,
    #[error("transfer cannot be returned")]
    NotReturnable,
    #[error("unknown transfer")]
    UnknownTransfer,
    #[error("account is not owned by the customer")]
    NotOwner,
    #[error("{0}")]
    Model(String),
}

impl From<ModelError> for DirectedError {
    fn from(e: ModelError) -> Self {
        DirectedError::Model(e.to_string())
    }
}

impl From<LedgerError> for DirectedError {
    fn from(e: LedgerError) -> Self {
        DirectedError::Model(e.to_string())
    }
}

impl From<NotifyError> for DirectedError {
    fn from(e: NotifyError) -> Self {
        DirectedError::Model(e.to_string())
    }
}

/// Email-style ids contain '@'; other ids are 1..=10 ASCII alphanumerics and
/// may not be all digits, which would make them look like phone numbers.
pub fn validate_id_format(id: &str) -> Result<(), DirectedError> {
    if id.contains('@') {
        return crate::model::EmailAddress::parse(id)
            .map(|_| ())
            .map_err(|_| DirectedError::BadFormat(id.to_string()));
    }
    let ok = (1..=MAX_ID_LEN).contains(&id.len())
        && id.bytes().all(|b| b.is_ascii_alphanumeric())
        && !id.bytes().all(|b| b.is_ascii_digit());
    if ok {
        Ok(())
    } else {
        Err(DirectedError::BadFormat(id.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct SendDirected {
    pub sender_account: AccountId,
    pub target: String,
    pub code: String,
    pub amount: MoneyAmount,
    pub message: Option<String>,
    pub auth: Option<AuthToken>,
    /// Label used to count failed code entries, e.g. a session or device.
    pub source: String,
}

impl World {
    pub fn interac_id(&self, id: &str) -> Option<&InteracId> {
        self.directed.ids.get(id)
    }

    pub fn interac_ids(&self) -> impl Iterator<Item = &InteracId> {
        self.directed.ids.values()
    }

    pub fn directed_transfer(&self, id: TransferId) -> Option<&DirectedTransfer> {
        self.directed.transfers.get(&id)
    }

    pub fn directed_transfers(&self) -> impl Iterator<Item = &DirectedTransfer> {
        self.directed.transfers.values()
    }

    pub fn directed_request(&self, id: TransferId) -> Option<&DirectedRequest> {
        self.directed.requests.get(&id)
    }

    pub fn directed_state(&self) -> &DirectedState {
        &self.directed
    }

    pub fn auth(&self, token: &AuthToken) -> Option<&OneTimeAuth> {
        self.directed.auths.get(token)
    }

    pub fn register_interac_id(
        &mut self,
        customer: &CustomerId,
        id_string: &str,
        notification_address: Contact,
        linked_accounts: Vec<AccountId>,
        autodeposit_only: bool,
    ) -> Result<Registration, DirectedError> {
        validate_id_format(id_string)?;
        if id_string.contains('@') && notification_address != Contact::Email(id_string.to_string()) {
            return Err(DirectedError::BadFormat(format!(
                "{id_string} must be its own notification address"
            )));
        }
        self.customer(customer)?;
        if linked_accounts.is_empty() || (autodeposit_only && linked_accounts.len() != 1) {
            return Err(DirectedError::BadFormat(format!(
                "{id_string} needs {} linked account(s)",
                if autodeposit_only { "exactly one" } else { "at least one" }
            )));
        }
        for account in &linked_accounts {
            if &self.account(account)?.owner != customer {
                return Err(DirectedError::NotOwner);
            }
        }
        if !self.endpoints.contains(&notification_address) {
            return Err(ModelError::UnknownEndpoint(notification_address.to_string()).into());
        }
        if self.directed.ids.contains_key(id_string) {
            return Err(DirectedError::IdTaken);
        }
        if self.directed.by_address.contains_key(notification_address.as_str()) {
            return Err(DirectedError::AddressAlreadyLinked);
        }
        let code = SecurityCode(self.rng.codes.random_range(0..1000));
        let token = crate::notify::LinkToken::generate(&mut self.rng.tokens).0;
        self.directed
            .by_address
            .insert(notification_address.as_str().to_string(), id_string.to_string());
        self.directed.ids.insert(
            id_string.to_string(),
            InteracId {
                id_string: id_string.to_string(),
                owner: customer.clone(),
                notification_address,
                verified: false,
                security_code: code,
                linked_accounts,
                autodeposit_only,
            },
        );
        self.directed
            .pending_verification
            .insert(token.clone(), id_string.to_string());
        Ok(Registration {
            id_string: id_string.to_string(),
            verification_token: token,
        })
    }

    pub fn verify_identifier(&mut self, token: &str) -> Result<&InteracId, DirectedError> {
        let id = self
            .directed
            .pending_verification
            .remove(token)
            .ok_or(DirectedError::BadToken)?;
        let entry = self.directed.ids.get_mut(&id).ok_or(DirectedError::BadToken)?;
        entry.verified = true;
        Ok(entry)
    }

    /// Issues a single-use authorization, standing in for a second factor.
    pub fn issue_auth(&mut self, customer: &CustomerId, purpose: AuthPurpose) -> Result<AuthToken, DirectedError> {
        self.customer(customer)?;
        let token = AuthToken(crate::notify::LinkToken::generate(&mut self.rng.tokens).0);
        self.directed.auths.insert(
            token.clone(),
            OneTimeAuth {
                token: token.clone(),
                purpose,
                bound_customer: customer.clone(),
                consumed: false,
            },
        );
        Ok(token)
    }

    pub fn set_status_relay(&mut self, customer: &CustomerId, on: bool) -> Result<(), DirectedError> {
        self.customer(customer)?;
        if on {
            self.directed.status_relay.insert(customer.clone());
        } else {
            self.directed.status_relay.remove(customer);
        }
        Ok(())
    }

    /// Failed code entries per source before `Throttled`; `None` disables it.
    pub fn set_code_lockout(&mut self, threshold: Option<u32>) {
        self.directed.code_lockout = threshold;
    }

    fn check_auth(
        &self,
        auth: Option<&AuthToken>,
        customer: &CustomerId,
        purpose: AuthPurpose,
    ) -> Result<AuthToken, DirectedError> {
        let token = auth.ok_or(DirectedError::AuthRequired)?;
        match self.directed.auths.get(token) {
            Some(a) if !a.consumed && a.purpose == purpose && &a.bound_customer == customer => Ok(token.clone()),
            _ => Err(DirectedError::AuthRequired),
        }
    }

    fn consume_auth(&mut self, token: &AuthToken, operation: &str, subject: String) {
        let auth = self.directed.auths.get_mut(token).expect("checked");
        assert!(!auth.consumed, "authorization consumed twice");
        auth.consumed = true;
        self.record(TraceEvent::Authorization {
            operation: operation.to_string(),
            subject,
            one_time: true,
        });
    }

    fn verified_id_of(&self, customer: &CustomerId) -> Option<&InteracId> {
        self.directed.ids.values().find(|i| &i.owner == customer && i.verified)
    }

    /// Identifier and code check with one indistinguishable failure.
    fn resolve_target(&mut self, target: &str, code: &str, source: &str) -> Result<InteracId, DirectedError> {
        if let Some(limit) = self.directed.code_lockout {
            if self.directed.failed_guesses(source) >= limit {
                return Err(DirectedError::Throttled);
            }
        }
        match self.directed.ids.get(target) {
            Some(id) if id.verified && id.security_code.matches(code) => Ok(id.clone()),
            _ => {
                *self.directed.failed_guesses.entry(source.to_string()).or_insert(0) += 1;
                let err = DirectedError::InvalidIdOrCode;
                let error = serde_json::to_string(&err).expect("serializable");
                self.record(TraceEvent::IdentifierFailure { error });
                Err(err)
            }
        }
    }

    fn check_directed_send(&self, account: &AccountId, amount: MoneyAmount) -> Result<(), DirectedError> {
        let fi = self.fi_of(account)?;
        if !fi.accepts_amount(amount) {
            return Err(DirectedError::AmountOutOfRange);
        }
        if !self.within_send_limit(account, amount)? {
            return Err(DirectedError::LimitExceeded);
        }
        if self.balance(account)? < amount {
            return Err(DirectedError::InsufficientFunds);
        }
        Ok(())
    }

    fn generic_notice(
        &mut self,
        kind: DirectedKind,
        status: &str,
        to: &Contact,
        transfer: TransferId,
    ) -> Result<(), DirectedError> {
        let n = compose_generic_notification(kind, status, Destination::from(to), transfer, true, self.clock);
        self.emit(n)?;
        Ok(())
    }

    /// Status relay to the originator, for customers who opted in.
    fn relay(&mut self, customer: &CustomerId, kind: DirectedKind, status: &str, transfer: TransferId) -> Result<(), DirectedError> {
        if !self.directed.status_relay.contains(customer) {
            return Ok(());
        }
        if let Some(id) = self.verified_id_of(customer).cloned() {
            self.generic_notice(kind, status, &id.notification_address, transfer)?;
        }
        Ok(())
    }

    pub fn send_directed(&mut self, req: SendDirected) -> Result<TransferId, DirectedError> {
        let owner = self.account(&req.sender_account)?.owner.clone();
        let auth = self.check_auth(req.auth.as_ref(), &owner, AuthPurpose::InitiateTransfer)?;
        let sender_id = self.verified_id_of(&owner).ok_or(DirectedError::SenderNotVerified)?.id_string.clone();
        let target = self.resolve_target(&req.target, &req.code, &req.source)?;
        self.check_directed_send(&req.sender_account, req.amount)?;
        let target_account = &target.linked_accounts[0];
        if target.autodeposit_only && !self.within_deposit_limit(target_account, req.amount)? {
            return Err(DirectedError::LimitExceeded);
        }

        let id = self.next_transfer_id();
        self.consume_auth(&auth, "send_directed", id.to_string());
        self.record(TraceEvent::SenderIdentity {
            transfer: id,
            identity: sender_id.clone(),
            verified: true,
        });
        let held_at = self.debit_to_suspense(&req.sender_account, req.amount, id)?;
        let mut t = DirectedTransfer {
            transfer_id: id,
            sender_account: req.sender_account,
            sender_id,
            target: target.id_string.clone(),
            amount: req.amount,
            message: req.message,
            status: DirectedStatus::PendingSelection,
            autodeposit: target.autodeposit_only,
            deposited_into: None,
            return_deadline: None,
            held_at,
        };
        let (kind, status) = if target.autodeposit_only {
            self.credit_from_suspense(&t.held_at, target_account, t.amount, id, EntryKind::Deposit)?;
            t.status = DirectedStatus::Deposited;
            t.deposited_into = Some(target_account.clone());
            t.return_deadline = Some(self.clock.plus_days(RETURN_WINDOW_DAYS));
            self.record(TraceEvent::Deposit {
                transfer: id,
                account: target_account.clone(),
                bound: true,
            });
            (DirectedKind::Autodeposit, "deposited")
        } else {
            (DirectedKind::Directed, "received")
        };
        self.record(TraceEvent::UnsolicitedTransfer {
            transfer: id,
            rejectable: true,
        });
        self.directed.transfers.insert(id, t);
        self.generic_notice(kind, status, &target.notification_address, id)?;
        Ok(id)
    }

    fn pending_directed(&self, id: TransferId) -> Result<(DirectedTransfer, InteracId), DirectedError> {
        let t = self.directed.transfers.get(&id).ok_or(DirectedError::UnknownTransfer)?;
        if t.status != DirectedStatus::PendingSelection {
            return Err(DirectedError::NotPending);
        }
        let target = self.directed.ids.get(&t.target).ok_or(DirectedError::UnknownTransfer)?;
        Ok((t.clone(), target.clone()))
    }

    /// Deposits a pending transfer into one of the target's linked accounts.
    pub fn recipient_select_account(&mut self, id: TransferId, account: &AccountId) -> Result<(), DirectedError> {
        let (t, target) = self.pending_directed(id)?;
        if !target.linked_accounts.contains(account) {
            return Err(DirectedError::AccountNotLinked);
        }
        if !self.within_deposit_limit(account, t.amount)? {
            return Err(DirectedError::LimitExceeded);
        }
        self.credit_from_suspense(&t.held_at, account, t.amount, id, EntryKind::Deposit)?;
        let tm = self.directed.transfers.get_mut(&id).expect("pending");
        tm.status = DirectedStatus::Deposited;
        tm.deposited_into = Some(account.clone());
        self.record(TraceEvent::Deposit {
            transfer: id,
            account: account.clone(),
            bound: true,
        });
        let sender = self.account(&t.sender_account)?.owner.clone();
        self.relay(&sender, DirectedKind::Directed, "deposited", id)
    }

    pub fn recipient_reject(&mut self, id: TransferId) -> Result<MoneyAmount, DirectedError> {
        let (t, _) = self.pending_directed(id)?;
        self.credit_from_suspense(&t.held_at, &t.sender_account, t.amount, id, EntryKind::Refund)?;
        self.directed.transfers.get_mut(&id).expect("pending").status = DirectedStatus::Rejected;
        let sender = self.account(&t.sender_account)?.owner.clone();
        self.relay(&sender, DirectedKind::Directed, "rejected", id)?;
        Ok(t.amount)
    }

    /// Sends an autodeposited transfer back without revealing who sent it.
    pub fn return_autodeposit(&mut self, id: TransferId, auth: Option<&AuthToken>) -> Result<ReturnReceipt, DirectedError> {
        let t = self.directed.transfers.get(&id).ok_or(DirectedError::UnknownTransfer)?.clone();
        if !t.autodeposit || t.status != DirectedStatus::Deposited {
            return Err(DirectedError::NotReturnable);
        }
        let recipient_account = t.deposited_into.clone().ok_or(DirectedError::NotReturnable)?;
        let recipient = self.account(&recipient_account)?.owner.clone();
        let token = self.check_auth(auth, &recipient, AuthPurpose::InitiateTransfer)?;
        if t.return_deadline.is_some_and(|d| self.clock > d) {
            return Err(DirectedError::WindowExpired);
        }
        if self.balance(&recipient_account)? < t.amount {
            return Err(DirectedError::InsufficientFunds);
        }
        self.consume_auth(&token, "return_autodeposit", id.to_string());
        self.reverse_to_suspense(&recipient_account, &t.held_at, t.amount, id)?;
        self.credit_from_suspense(&t.held_at, &t.sender_account, t.amount, id, EntryKind::Refund)?;
        self.directed.transfers.get_mut(&id).expect("known").status = DirectedStatus::Returned;
        let sender = self.account(&t.sender_account)?.owner.clone();
        self.relay(&sender, DirectedKind::Autodeposit, "returned", id)?;
        Ok(ReturnReceipt {
            transfer: id,
            amount: t.amount,
        })
    }

    pub fn request_money_directed(
        &mut self,
        requestor_account: &AccountId,
        target: &str,
        code: &str,
        amount: MoneyAmount,
        auth: Option<&AuthToken>,
        source: &str,
    ) -> Result<TransferId, DirectedError> {
        let owner = self.account(requestor_account)?.owner.clone();
        let token = self.check_auth(auth, &owner, AuthPurpose::InitiateTransfer)?;
        let requestor_id = self.verified_id_of(&owner).ok_or(DirectedError::SenderNotVerified)?.id_string.clone();
        let payer = self.resolve_target(target, code, source)?;
        if !self.fi_of(requestor_account)?.accepts_amount(amount) {
            return Err(DirectedError::AmountOutOfRange);
        }
        let id = self.next_transfer_id();
        self.consume_auth(&token, "request_money_directed", id.to_string());
        self.record(TraceEvent::SenderIdentity {
            transfer: id,
            identity: requestor_id,
            verified: true,
        });
        self.directed.requests.insert(
            id,
            DirectedRequest {
                request_id: id,
                requestor_account: requestor_account.clone(),
                target: payer.id_string.clone(),
                amount,
                status: RequestStatus::Requested,
                paid_from: None,
            },
        );
        self.record(TraceEvent::UnsolicitedTransfer {
            transfer: id,
            rejectable: true,
        });
        self.generic_notice(DirectedKind::Request, "received", &payer.notification_address, id)?;
        Ok(id)
    }

    pub fn fulfil_directed_request(
        &mut self,
        id: TransferId,
        payer_account: &AccountId,
        auth: Option<&AuthToken>,
    ) -> Result<(), DirectedError> {
        let r = self.directed.requests.get(&id).ok_or(DirectedError::UnknownTransfer)?.clone();
        if r.status != RequestStatus::Requested {
            return Err(DirectedError::NotPending);
        }
        let payer = self.account(payer_account)?.owner.clone();
        let token = self.check_auth(auth, &payer, AuthPurpose::FulfilRequest)?;
        let target_owner = self.directed.ids.get(&r.target).map(|i| i.owner.clone());
        if target_owner.as_ref() != Some(&payer) {
            return Err(DirectedError::NotOwner);
        }
        self.check_directed_send(payer_account, r.amount)?;
        if !self.within_deposit_limit(&r.requestor_account, r.amount)? {
            return Err(DirectedError::LimitExceeded);
        }
        self.consume_auth(&token, "fulfil_directed_request", id.to_string());
        let held = self.debit_to_suspense(payer_account, r.amount, id)?;
        self.credit_from_suspense(&held, &r.requestor_account, r.amount, id, EntryKind::Deposit)?;
        let rm = self.directed.requests.get_mut(&id).expect("known");
        rm.status = RequestStatus::Fulfilled;
        rm.paid_from = Some(payer_account.clone());
        self.record(TraceEvent::Deposit {
            transfer: id,
            account: r.requestor_account.clone(),
            bound: true,
        });
        let requestor = self.account(&r.requestor_account)?.owner.clone();
        self.relay(&requestor, DirectedKind::Request, "fulfilled", id)
    }

    pub fn decline_directed_request(&mut self, id: TransferId) -> Result<(), DirectedError> {
        let r = self.directed.requests.get_mut(&id).ok_or(DirectedError::UnknownTransfer)?;
        if r.status != RequestStatus::Requested {
            return Err(DirectedError::NotPending);
        }
        r.status = RequestStatus::Declined;
        let account = r.requestor_account.clone();
        let requestor = self.account(&account)?.owner.clone();
        self.relay(&requestor, DirectedKind::Request, "declined", id)
    }

    pub fn change_device(&mut self, customer: &CustomerId, auth: Option<&AuthToken>) -> Result<(), DirectedError> {
        let token = self.check_auth(auth, customer, AuthPurpose::DeviceChange)?;
        self.consume_auth(&token, "change_device", customer.to_string());
        Ok(())
    }
}
