//! Legacy Standard, Autodeposit and Request Money transfers.
//!
//! Deposit links are bearer tokens: whoever holds one and answers the
//! question can deposit into any account at any institution. The sender's
//! confirmation always repeats the name the sender typed, so the sender cannot
//! tell where the money went. Both properties are deliberate here.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    AccountId, Contact, CustomerId, DepositContext, EntryKind, FiId, FraudDecision, Language, ModelError, MoneyAmount,
    SimTime, TransferId,
};
use crate::notify::{
    self, field_matrix, Destination, FieldValues, LinkToken, MatrixKey, NoticeEvent, NoticeOrigin, Notification,
    NotificationField as F, NotifyError, TransferKind,
};
use crate::world::{TraceEvent, World};

pub const MAX_ATTEMPTS: u8 = 4;
pub const DEFAULT_EXPIRY_DAYS: u64 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StrengthClass {
    /// The answer can be read off the transfer's own notification.
    Exposed,
    Weak,
    Strong,
}

impl StrengthClass {
    pub fn as_str(self) -> &'static str {
        match self {
            StrengthClass::Exposed => "exposed",
            StrengthClass::Weak => "weak",
            StrengthClass::Strong => "strong",
        }
    }
}

impl FromStr for StrengthClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exposed" => Ok(StrengthClass::Exposed),
            "weak" => Ok(StrengthClass::Weak),
            "strong" => Ok(StrengthClass::Strong),
            other => Err(format!("unknown strength class `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecurityQuestion {
    pub question_text: String,
    pub answer_text: String,
    pub strength_class: StrengthClass,
}

impl SecurityQuestion {
    pub fn new(question: &str, answer: &str, class: StrengthClass) -> Self {
        SecurityQuestion {
            question_text: question.to_string(),
            answer_text: answer.to_string(),
            strength_class: class,
        }
    }

    /// Exact comparison after trimming surrounding whitespace.
    pub fn matches(&self, answer: &str) -> bool {
        self.answer_text.trim() == answer.trim()
    }
}

/// Field of `fields` from which `answer` can be read, either as the whole
/// value or as one alphanumeric word of it.
pub fn answer_source(answer: &str, fields: &BTreeMap<F, String>) -> Option<F> {
    let answer = answer.trim();
    if answer.is_empty() {
        return None;
    }
    fields.iter().find_map(|(field, value)| {
        let whole = value.trim() == answer;
        let word = value.split(|c: char| !c.is_alphanumeric()).any(|w| w == answer);
        (whole || word).then_some(*field)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TransferStatus {
    Initiated,
    NotificationSent,
    Deposited,
    Rejected,
    CancelledAttemptsExhausted,
    Expired,
    Requested,
    Declined,
}

impl TransferStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TransferStatus::Initiated => "initiated",
            TransferStatus::NotificationSent => "notification_sent",
            TransferStatus::Deposited => "deposited",
            TransferStatus::Rejected => "rejected",
            TransferStatus::CancelledAttemptsExhausted => "cancelled_attempts_exhausted",
            TransferStatus::Expired => "expired",
            TransferStatus::Requested => "requested",
            TransferStatus::Declined => "declined",
        }
    }

    pub fn is_pending(self) -> bool {
        matches!(self, TransferStatus::NotificationSent | TransferStatus::Requested)
    }

    /// The state graph of each transfer kind.
    pub fn allowed(kind: TransferKind, from: TransferStatus, to: TransferStatus) -> bool {
        use TransferStatus::*;
        match kind {
            TransferKind::Standard => matches!(
                (from, to),
                (Initiated, NotificationSent)
                    | (NotificationSent, Deposited | Rejected | CancelledAttemptsExhausted | Expired)
            ),
            TransferKind::Autodeposit => matches!((from, to), (Initiated, Deposited)),
            TransferKind::RequestMoney => matches!((from, to), (Requested, Deposited | Declined | Expired)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transfer {
    pub transfer_id: TransferId,
    pub reference_number: String,
    pub kind: TransferKind,
    /// Originating account; for requests, the requestor's account.
    pub sender_account: AccountId,
    /// Reply address typed by the sender. Never verified.
    pub sender_email: Option<String>,
    pub specified_recipient_name: String,
    pub recipient_contact: Contact,
    pub amount: MoneyAmount,
    pub custom_message: Option<String>,
    pub confirmation_message: Option<String>,
    pub question: Option<SecurityQuestion>,
    pub created_at: SimTime,
    pub expires_at: SimTime,
    pub attempts_used: u8,
    pub status: TransferStatus,
    pub deposited_into: Option<AccountId>,
    /// Payer of a fulfilled request.
    pub paid_from: Option<AccountId>,
    pub link_token: Option<LinkToken>,
    /// Institution whose suspense account holds the funds while pending.
    pub held_at: FiId,
}

impl Transfer {
    fn set_status(&mut self, to: TransferStatus) {
        assert!(
            TransferStatus::allowed(self.kind, self.status, to),
            "illegal transition {:?} -> {:?} for {:?}",
            self.status,
            to,
            self.kind
        );
        self.status = to;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutodepositEntry {
    pub account_id: AccountId,
    pub customer: CustomerId,
    pub legal_name: String,
    pub profile_name: Option<String>,
    pub recipient_fi: FiId,
}

/// Registered address to its single bound account.
#[derive(Debug, Clone, Default)]
pub struct AutodepositRegistry {
    pub entries: BTreeMap<String, AutodepositEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferredFi {
    pub fi: FiId,
    pub customer: CustomerId,
}

/// Institution last used to act on a notice sent to each address.
#[derive(Debug, Clone, Default)]
pub struct PreferredFiMemory {
    pub entries: BTreeMap<String, PreferredFi>,
}

#[derive(Debug, Clone, Default)]
pub struct LegacyState {
    pub(crate) transfers: BTreeMap<TransferId, Transfer>,
    pub(crate) tokens: BTreeMap<LinkToken, TransferId>,
    pub(crate) autodeposit: AutodepositRegistry,
    pub(crate) preferred: PreferredFiMemory,
}

/// A logged-in online banking session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub fi: FiId,
    pub account: AccountId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuestionView {
    pub transfer_id: TransferId,
    pub question_text: String,
    pub amount: MoneyAmount,
    pub attempts_remaining: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum DepositOutcome {
    Deposited { account: AccountId, attempts_used: u8 },
    WrongAnswer { remaining: u8 },
    CancelledAttemptsExhausted { refunded: MoneyAmount },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AutodepositLookup {
    pub legal_name: String,
    pub profile_name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LegacyError {
    #[error("insufficient funds: balance {balance}, needed {needed}")]
    InsufficientFunds { balance: MoneyAmount, needed: MoneyAmount },
    #[error("daily send limit {limit} exceeded")]
    LimitExceeded { limit: MoneyAmount },
    #[error("daily deposit limit {limit} exceeded")]
    DepositLimitExceeded { limit: MoneyAmount },
    #[error("amount {amount} outside [{min}, {max}]")]
    AmountOutOfRange {
        amount: MoneyAmount,
        min: MoneyAmount,
        max: MoneyAmount,
    },
    #[error("amount {amount} is below the payer institution's minimum {minimum}")]
    BelowRecipientFiMinimum { amount: MoneyAmount, minimum: MoneyAmount },
    #[error("transfer {0} is not pending")]
    TransferNotPending(TransferId),
    #[error("request {0} is not pending")]
    RequestNotPending(TransferId),
    #[error("transfer {0} has expired")]
    TransferExpired(TransferId),
    #[error("unknown link token")]
    UnknownToken,
    #[error("unknown transfer {0}")]
    UnknownTransfer(TransferId),
    #[error("{0} is not registered for autodeposit")]
    NotRegistered(String),
    #[error("{0} is already registered for autodeposit")]
    AlreadyRegistered(String),
    #[error("answer to an exposed question must appear in the notification")]
    QuestionNotExposed,
    #[error("account {account} is not held at session institution {fi}")]
    SessionMismatch { account: AccountId, fi: FiId },
    #[error("account {account} is not owned by {customer}")]
    NotOwner { account: AccountId, customer: CustomerId },
    #[error("deposit blocked by fraud screen: {0}")]
    FraudBlocked(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Notify(#[from] NotifyError),
}

impl From<crate::model::LedgerError> for LegacyError {
    fn from(e: crate::model::LedgerError) -> Self {
        LegacyError::Model(e.into())
    }
}

#[derive(Debug, Clone)]
pub struct StandardRequest {
    pub sender_account: AccountId,
    pub sender_email: Option<String>,
    pub recipient_name: String,
    pub contact: Contact,
    pub amount: MoneyAmount,
    pub message: Option<String>,
    pub question: SecurityQuestion,
}

#[derive(Debug, Clone)]
pub struct AutodepositRequest {
    pub sender_account: AccountId,
    pub sender_email: Option<String>,
    pub email: String,
    pub amount: MoneyAmount,
    pub message: Option<String>,
}

#[derive(Debug, Clone)]
pub struct MoneyRequest {
    pub requestor_account: AccountId,
    pub requestor_email: Option<String>,
    pub recipient_name: String,
    pub contact: Contact,
    pub amount: MoneyAmount,
    pub message: Option<String>,
}

fn status_text(kind: TransferKind, event: NoticeEvent, status: TransferStatus) -> &'static str {
    match (kind, event, status) {
        (TransferKind::Autodeposit, NoticeEvent::RecipientNotice, _) => "autodeposited",
        (_, NoticeEvent::RecipientNotice, _) => "sent",
        (_, NoticeEvent::RequestNotice, _) => "requested",
        (_, _, TransferStatus::Rejected) => "rejected",
        (_, _, TransferStatus::Declined) => "declined",
        (_, NoticeEvent::RequestorConfirmation, _) => "deposited",
        _ => "accepted",
    }
}

impl World {
    pub fn legacy_transfer(&self, id: TransferId) -> Option<&Transfer> {
        self.legacy.transfers.get(&id)
    }

    pub fn legacy_transfers(&self) -> impl Iterator<Item = &Transfer> {
        self.legacy.transfers.values()
    }

    pub fn transfer_by_token(&self, token: &LinkToken) -> Option<&Transfer> {
        self.legacy.tokens.get(token).and_then(|id| self.legacy.transfers.get(id))
    }

    pub fn preferred_fi_memory(&self) -> &PreferredFiMemory {
        &self.legacy.preferred
    }

    pub fn autodeposit_registry(&self) -> &AutodepositRegistry {
        &self.legacy.autodeposit
    }

    /// Builds a legacy notification from the matrix and the current state.
    pub fn compose(&self, t: &Transfer, event: NoticeEvent, destination: Destination) -> Result<Notification, LegacyError> {
        let channel = destination.channel();
        let contact = t.recipient_contact.as_str();
        let recipient_side = matches!(event, NoticeEvent::RecipientNotice | NoticeEvent::RequestNotice);
        let memory = self.legacy.preferred.entries.get(contact);
        let subsequent = recipient_side && memory.is_some();

        let sender = self.owner_of(&t.sender_account)?;
        let sender_fi = self.fi_of(&t.sender_account)?;
        let autodeposit = match t.kind {
            TransferKind::Autodeposit => self.legacy.autodeposit.entries.get(contact),
            _ => None,
        };
        // Institution on the other side, as far as the platform knows it.
        let counterparty_fi = match t.kind {
            TransferKind::Standard => t.deposited_into.as_ref().map(|a| self.fi_of(a)).transpose()?,
            TransferKind::Autodeposit => autodeposit.map(|e| self.fi(&e.recipient_fi)).transpose()?,
            TransferKind::RequestMoney => match &t.paid_from {
                Some(a) => Some(self.fi_of(a)?),
                None => memory.map(|m| self.fi(&m.fi)).transpose()?,
            },
        };
        let counterparty = match t.kind {
            TransferKind::RequestMoney => match &t.paid_from {
                Some(a) => Some(self.owner_of(a)?),
                None => memory.map(|m| self.customer(&m.customer)).transpose()?,
            },
            _ => None,
        };

        let key = MatrixKey {
            kind: t.kind,
            channel,
            event,
            subsequent,
            sender_policy: sender_fi.name_format_policy,
            recipient_policy: counterparty_fi.map(|f| f.name_format_policy),
            recipient_supports_confirmation: t.kind == TransferKind::Standard
                && counterparty_fi.is_some_and(|f| f.supports_confirmation_message),
        };
        let fields = field_matrix(&key)?;

        let language = if recipient_side {
            self.customer_by_contact(contact).map_or(Language::English, |c| c.preferred_language)
        } else {
            sender.preferred_language
        };
        let token = t.link_token.clone();
        let mut values = FieldValues::default();
        values
            .set(F::PreferredLanguage, language.as_str())
            .set(F::Status, status_text(t.kind, event, t.status))
            .set(F::SenderNameCustom, sender.custom_name())
            .set(F::SenderNameLegal, sender.legal_name.as_str())
            .set(F::SenderEmail, t.sender_email.clone().unwrap_or_default())
            .set(F::Amount, notify::amount_value(t.amount))
            .set(F::CustomMessage, t.custom_message.clone().unwrap_or_default())
            .set(F::ConfirmationMessage, t.confirmation_message.clone().unwrap_or_default())
            .set(F::SenderFI, sender_fi.display_name.as_str())
            .set(F::ReferenceNumber, t.reference_number.as_str())
            .set(F::ExpiryDate, t.expires_at.to_string())
            .set(
                F::RecipientFI,
                counterparty_fi.map_or("unselected".to_string(), |f| f.display_name.clone()),
            );
        match (autodeposit, counterparty) {
            (Some(entry), _) => {
                values
                    .set(F::RecipientNameLegal, entry.legal_name.as_str())
                    .set(
                        F::RecipientNameCustom,
                        entry.profile_name.clone().unwrap_or_else(|| entry.legal_name.clone()),
                    );
            }
            (None, Some(payer)) => {
                values
                    .set(F::RecipientNameCustom, t.specified_recipient_name.as_str())
                    .set(F::RecipientNameLegal, payer.legal_name.as_str());
            }
            (None, None) => {
                values
                    .set(F::RecipientNameCustom, t.specified_recipient_name.as_str())
                    .set(F::RecipientNameLegal, t.specified_recipient_name.as_str());
            }
        }
        if let Some(token) = &token {
            values
                .set(F::DepositLink, notify::deposit_link(token))
                .set(F::SelectFILink, notify::select_fi_link(token));
            if let Some(m) = memory {
                values.set(F::PreferredFILink, notify::preferred_fi_link(m.fi.as_str(), token));
            }
        }

        let has_link = fields.contains(&F::DepositLink);
        Ok(Notification {
            event,
            channel,
            destination,
            fields: values.project(&fields),
            link_token: if has_link { token } else { None },
            emitted_at: self.clock,
            delivered_at: None,
            signed: false,
            origin: NoticeOrigin::Legacy {
                kind: t.kind,
                transfer: t.transfer_id,
                subsequent: recipient_side.then_some(subsequent),
            },
        })
    }

    fn check_send(&self, account: &AccountId, amount: MoneyAmount) -> Result<(), LegacyError> {
        let fi = self.fi_of(account)?;
        if !fi.accepts_amount(amount) {
            return Err(LegacyError::AmountOutOfRange {
                amount,
                min: fi.min_transfer,
                max: fi.max_transfer,
            });
        }
        if !self.within_send_limit(account, amount)? {
            return Err(LegacyError::LimitExceeded {
                limit: fi.daily_send_limit,
            });
        }
        let balance = self.balance(account)?;
        if balance < amount {
            return Err(LegacyError::InsufficientFunds { balance, needed: amount });
        }
        Ok(())
    }

    fn check_deposit(&self, account: &AccountId, amount: MoneyAmount) -> Result<(), LegacyError> {
        if !self.within_deposit_limit(account, amount)? {
            return Err(LegacyError::DepositLimitExceeded {
                limit: self.fi_of(account)?.daily_deposit_limit,
            });
        }
        Ok(())
    }

    fn check_contact(&self, contact: &Contact) -> Result<(), LegacyError> {
        if !self.endpoints.contains(contact) {
            return Err(ModelError::UnknownEndpoint(contact.to_string()).into());
        }
        Ok(())
    }

    fn check_session(&self, session: &Session) -> Result<(), LegacyError> {
        let account = self.account(&session.account)?;
        if account.fi != session.fi {
            return Err(LegacyError::SessionMismatch {
                account: session.account.clone(),
                fi: session.fi.clone(),
            });
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn new_transfer(
        &mut self,
        kind: TransferKind,
        sender_account: AccountId,
        sender_email: Option<String>,
        recipient_name: String,
        contact: Contact,
        amount: MoneyAmount,
        message: Option<String>,
        question: Option<SecurityQuestion>,
    ) -> Result<Transfer, LegacyError> {
        let held_at = self.account(&sender_account)?.fi.clone();
        let transfer_id = self.next_transfer_id();
        let link_token = match kind {
            TransferKind::Autodeposit => None,
            _ => Some(LinkToken::generate(&mut self.rng.tokens)),
        };
        Ok(Transfer {
            transfer_id,
            reference_number: format!("CA{:08}", transfer_id.0),
            kind,
            sender_account,
            sender_email,
            specified_recipient_name: recipient_name,
            recipient_contact: contact,
            amount,
            custom_message: message,
            confirmation_message: None,
            question,
            created_at: self.clock,
            expires_at: self.clock.plus_days(DEFAULT_EXPIRY_DAYS),
            attempts_used: 0,
            status: match kind {
                TransferKind::RequestMoney => TransferStatus::Requested,
                _ => TransferStatus::Initiated,
            },
            deposited_into: None,
            paid_from: None,
            link_token,
            held_at,
        })
    }

    fn record_sender_identity(&mut self, t: &Transfer) {
        let identity = t.sender_email.clone().unwrap_or_else(|| t.sender_account.to_string());
        self.record(TraceEvent::SenderIdentity {
            transfer: t.transfer_id,
            identity,
            verified: false,
        });
    }

    /// Where the originator's confirmation goes: the typed email address if
    /// any, else the online banking inbox where offered.
    fn originator_destination(&self, t: &Transfer) -> Result<Option<Destination>, LegacyError> {
        if let Some(email) = &t.sender_email {
            if self.endpoints.emails.contains_key(email) {
                return Ok(Some(Destination::Email(email.clone())));
            }
        }
        let fi = self.fi_of(&t.sender_account)?;
        if fi.supports_portal_inbox {
            return Ok(Some(Destination::Portal(self.account(&t.sender_account)?.owner.clone())));
        }
        Ok(None)
    }

    fn notify_originator(&mut self, id: TransferId, event: NoticeEvent) -> Result<(), LegacyError> {
        let t = self.legacy.transfers[&id].clone();
        if let Some(dest) = self.originator_destination(&t)? {
            let n = self.compose(&t, event, dest)?;
            self.emit(n)?;
        }
        Ok(())
    }

    pub fn initiate_standard(&mut self, req: StandardRequest) -> Result<TransferId, LegacyError> {
        self.check_contact(&req.contact)?;
        self.check_send(&req.sender_account, req.amount)?;
        let exposed = req.question.strength_class == StrengthClass::Exposed;
        let answer = req.question.answer_text.clone();
        let mut t = self.new_transfer(
            TransferKind::Standard,
            req.sender_account,
            req.sender_email,
            req.recipient_name,
            req.contact,
            req.amount,
            req.message,
            Some(req.question),
        )?;
        let notice = self.compose(&t, NoticeEvent::RecipientNotice, Destination::from(&t.recipient_contact))?;
        if exposed && answer_source(&answer, &notice.fields).is_none() {
            return Err(LegacyError::QuestionNotExposed);
        }
        self.debit_to_suspense(&t.sender_account, t.amount, t.transfer_id)?;
        self.record(TraceEvent::SecurityQuestionSet { transfer: t.transfer_id });
        self.record_sender_identity(&t);
        self.record(TraceEvent::Authorization {
            operation: "initiate_standard".into(),
            subject: t.transfer_id.to_string(),
            one_time: false,
        });
        t.set_status(TransferStatus::NotificationSent);
        let id = t.transfer_id;
        if let Some(token) = &t.link_token {
            self.legacy.tokens.insert(token.clone(), id);
        }
        self.legacy.transfers.insert(id, t);
        self.emit(notice)?;
        Ok(id)
    }

    fn pending_by_token(&self, token: &LinkToken, kind: TransferKind) -> Result<&Transfer, LegacyError> {
        let t = self.transfer_by_token(token).ok_or(LegacyError::UnknownToken)?;
        if t.kind != kind || !t.status.is_pending() {
            return Err(match kind {
                TransferKind::RequestMoney => LegacyError::RequestNotPending(t.transfer_id),
                _ => LegacyError::TransferNotPending(t.transfer_id),
            });
        }
        if self.clock > t.expires_at {
            return Err(LegacyError::TransferExpired(t.transfer_id));
        }
        Ok(t)
    }

    /// Shows the question to any logged-in session. Nothing ties the session
    /// to the addressed recipient.
    pub fn open_deposit_link(&self, token: &LinkToken, session: &Session) -> Result<QuestionView, LegacyError> {
        self.check_session(session)?;
        let t = self.pending_by_token(token, TransferKind::Standard)?;
        Ok(QuestionView {
            transfer_id: t.transfer_id,
            question_text: t.question.as_ref().map(|q| q.question_text.clone()).unwrap_or_default(),
            amount: t.amount,
            attempts_remaining: MAX_ATTEMPTS - t.attempts_used,
        })
    }

    /// Answers the question and, on a match, deposits into the session's
    /// account, whoever owns it.
    pub fn answer_and_deposit(
        &mut self,
        token: &LinkToken,
        session: &Session,
        answer: &str,
        confirmation_message: Option<&str>,
    ) -> Result<DepositOutcome, LegacyError> {
        self.check_session(session)?;
        let t = self.pending_by_token(token, TransferKind::Standard)?.clone();
        let account = session.account.clone();
        self.check_deposit(&account, t.amount)?;
        let matched = t.question.as_ref().is_some_and(|q| q.matches(answer));
        if matched {
            let depositor = self.owner_of(&account)?;
            let ctx = DepositContext {
                transfer_id: t.transfer_id,
                amount: t.amount,
                specified_recipient_name: &t.specified_recipient_name,
                depositor_legal_name: &depositor.legal_name,
                target_account: &account,
            };
            if let FraudDecision::Block(reason) = self.fraud.screen_deposit(&ctx) {
                return Err(LegacyError::FraudBlocked(reason));
            }
        }

        let id = t.transfer_id;
        let attempts = t.attempts_used + 1;
        self.legacy.transfers.get_mut(&id).expect("pending").attempts_used = attempts;

        if matched {
            self.credit_from_suspense(&t.held_at, &account, t.amount, id, EntryKind::Deposit)?;
            let supports = self.fi(&session.fi)?.supports_confirmation_message;
            let owner = self.account(&account)?.owner.clone();
            let bound = self.customer(&owner)?.email_addresses.iter().chain(&self.customer(&owner)?.phone_numbers).any(|a| a == t.recipient_contact.as_str());
            {
                let tm = self.legacy.transfers.get_mut(&id).expect("pending");
                tm.set_status(TransferStatus::Deposited);
                tm.deposited_into = Some(account.clone());
                if supports {
                    tm.confirmation_message = confirmation_message.map(str::to_string);
                }
            }
            self.legacy.preferred.entries.insert(
                t.recipient_contact.as_str().to_string(),
                PreferredFi {
                    fi: session.fi.clone(),
                    customer: owner,
                },
            );
            self.record(TraceEvent::Deposit {
                transfer: id,
                account: account.clone(),
                bound,
            });
            self.notify_originator(id, NoticeEvent::SenderConfirmation)?;
            return Ok(DepositOutcome::Deposited {
                account,
                attempts_used: attempts,
            });
        }

        if attempts >= MAX_ATTEMPTS {
            // Refund silently: neither party is notified of the cancellation.
            self.credit_from_suspense(&t.held_at, &t.sender_account, t.amount, id, EntryKind::Refund)?;
            self.legacy
                .transfers
                .get_mut(&id)
                .expect("pending")
                .set_status(TransferStatus::CancelledAttemptsExhausted);
            return Ok(DepositOutcome::CancelledAttemptsExhausted { refunded: t.amount });
        }
        Ok(DepositOutcome::WrongAnswer {
            remaining: MAX_ATTEMPTS - attempts,
        })
    }

    pub fn reject_standard(&mut self, token: &LinkToken) -> Result<MoneyAmount, LegacyError> {
        let t = self.pending_by_token(token, TransferKind::Standard)?.clone();
        self.credit_from_suspense(&t.held_at, &t.sender_account, t.amount, t.transfer_id, EntryKind::Refund)?;
        self.legacy
            .transfers
            .get_mut(&t.transfer_id)
            .expect("pending")
            .set_status(TransferStatus::Rejected);
        self.notify_originator(t.transfer_id, NoticeEvent::SenderConfirmation)?;
        Ok(t.amount)
    }

    pub fn register_autodeposit(
        &mut self,
        customer: &CustomerId,
        email: &str,
        account: &AccountId,
    ) -> Result<(), LegacyError> {
        let acct = self.account(account)?.clone();
        if &acct.owner != customer {
            return Err(LegacyError::NotOwner {
                account: account.clone(),
                customer: customer.clone(),
            });
        }
        if !self.endpoints.emails.contains_key(email) {
            return Err(ModelError::UnknownEndpoint(email.to_string()).into());
        }
        if self.legacy.autodeposit.entries.contains_key(email) {
            return Err(LegacyError::AlreadyRegistered(email.to_string()));
        }
        let c = self.customer(customer)?;
        let entry = AutodepositEntry {
            account_id: account.clone(),
            customer: customer.clone(),
            legal_name: c.legal_name.clone(),
            profile_name: c.profile_name.clone(),
            recipient_fi: acct.fi,
        };
        self.legacy.autodeposit.entries.insert(email.to_string(), entry);
        Ok(())
    }

    /// Unauthenticated, unthrottled name lookup offered while setting up an
    /// autodeposit transfer.
    pub fn lookup_autodeposit(&mut self, email: &str) -> Option<AutodepositLookup> {
        let found = self.legacy.autodeposit.entries.get(email).map(|e| {
            let policy = self.fis.get(&e.recipient_fi).map(|f| f.name_format_policy);
            let profile = match policy {
                Some(crate::model::NamePolicy::Custom | crate::model::NamePolicy::Both) => e.profile_name.clone(),
                _ => None,
            };
            AutodepositLookup {
                legal_name: e.legal_name.clone(),
                profile_name: profile,
            }
        });
        self.record(TraceEvent::NameLookup {
            address: email.to_string(),
            revealed: found.is_some(),
        });
        found
    }

    pub fn initiate_autodeposit(&mut self, req: AutodepositRequest) -> Result<TransferId, LegacyError> {
        let entry = self
            .legacy
            .autodeposit
            .entries
            .get(&req.email)
            .cloned()
            .ok_or_else(|| LegacyError::NotRegistered(req.email.clone()))?;
        self.check_send(&req.sender_account, req.amount)?;
        self.check_deposit(&entry.account_id, req.amount)?;
        let mut t = self.new_transfer(
            TransferKind::Autodeposit,
            req.sender_account,
            req.sender_email,
            entry.legal_name.clone(),
            Contact::Email(req.email),
            req.amount,
            req.message,
            None,
        )?;
        let id = t.transfer_id;
        self.debit_to_suspense(&t.sender_account, t.amount, id)?;
        self.credit_from_suspense(&t.held_at, &entry.account_id, t.amount, id, EntryKind::Deposit)?;
        t.set_status(TransferStatus::Deposited);
        t.deposited_into = Some(entry.account_id.clone());
        self.record_sender_identity(&t);
        self.record(TraceEvent::Authorization {
            operation: "initiate_autodeposit".into(),
            subject: id.to_string(),
            one_time: false,
        });
        self.record(TraceEvent::Deposit {
            transfer: id,
            account: entry.account_id.clone(),
            bound: true,
        });
        self.record(TraceEvent::UnsolicitedTransfer {
            transfer: id,
            rejectable: false,
        });
        let notice = self.compose(&t, NoticeEvent::RecipientNotice, Destination::from(&t.recipient_contact))?;
        self.legacy.transfers.insert(id, t);
        self.emit(notice)?;
        self.notify_originator(id, NoticeEvent::SenderConfirmation)?;
        Ok(id)
    }

    pub fn initiate_money_request(&mut self, req: MoneyRequest) -> Result<TransferId, LegacyError> {
        self.check_contact(&req.contact)?;
        let fi = self.fi_of(&req.requestor_account)?;
        if !fi.accepts_amount(req.amount) {
            return Err(LegacyError::AmountOutOfRange {
                amount: req.amount,
                min: fi.min_transfer,
                max: fi.max_transfer,
            });
        }
        let t = self.new_transfer(
            TransferKind::RequestMoney,
            req.requestor_account,
            req.requestor_email,
            req.recipient_name,
            req.contact,
            req.amount,
            req.message,
            None,
        )?;
        let id = t.transfer_id;
        self.record_sender_identity(&t);
        let notice = self.compose(&t, NoticeEvent::RequestNotice, Destination::from(&t.recipient_contact))?;
        if let Some(token) = &t.link_token {
            self.legacy.tokens.insert(token.clone(), id);
        }
        self.legacy.transfers.insert(id, t);
        self.emit(notice)?;
        Ok(id)
    }

    pub fn fulfil_request(
        &mut self,
        token: &LinkToken,
        session: &Session,
        confirmation_message: Option<&str>,
    ) -> Result<TransferId, LegacyError> {
        self.check_session(session)?;
        let t = self.pending_by_token(token, TransferKind::RequestMoney)?.clone();
        let payer = session.account.clone();
        let payer_fi = self.fi_of(&payer)?;
        if t.amount < payer_fi.min_transfer {
            return Err(LegacyError::BelowRecipientFiMinimum {
                amount: t.amount,
                minimum: payer_fi.min_transfer,
            });
        }
        self.check_send(&payer, t.amount)?;
        self.check_deposit(&t.sender_account, t.amount)?;
        let id = t.transfer_id;
        let held = self.debit_to_suspense(&payer, t.amount, id)?;
        self.credit_from_suspense(&held, &t.sender_account, t.amount, id, EntryKind::Deposit)?;
        let owner = self.account(&payer)?.owner.clone();
        {
            let tm = self.legacy.transfers.get_mut(&id).expect("pending");
            tm.set_status(TransferStatus::Deposited);
            tm.paid_from = Some(payer.clone());
            tm.deposited_into = Some(t.sender_account.clone());
            tm.confirmation_message = confirmation_message.map(str::to_string);
        }
        self.legacy.preferred.entries.insert(
            t.recipient_contact.as_str().to_string(),
            PreferredFi {
                fi: session.fi.clone(),
                customer: owner,
            },
        );
        self.record(TraceEvent::Authorization {
            operation: "fulfil_request".into(),
            subject: id.to_string(),
            one_time: false,
        });
        self.record(TraceEvent::Deposit {
            transfer: id,
            account: t.sender_account.clone(),
            bound: true,
        });
        self.notify_originator(id, NoticeEvent::RequestorConfirmation)?;
        Ok(id)
    }

    pub fn decline_request(&mut self, token: &LinkToken) -> Result<(), LegacyError> {
        let id = self.pending_by_token(token, TransferKind::RequestMoney)?.transfer_id;
        self.legacy
            .transfers
            .get_mut(&id)
            .expect("pending")
            .set_status(TransferStatus::Declined);
        self.notify_originator(id, NoticeEvent::RequestorConfirmation)?;
        Ok(())
    }

    /// Marks every pending transfer past its expiry as expired, refunding
    /// held funds. Returns the affected ids in id order.
    pub fn expire_sweep(&mut self) -> Result<Vec<TransferId>, LegacyError> {
        let now = self.clock;
        let due: Vec<Transfer> = self
            .legacy
            .transfers
            .values()
            .filter(|t| t.status.is_pending() && now > t.expires_at)
            .cloned()
            .collect();
        let mut out = Vec::with_capacity(due.len());
        for t in due {
            if t.kind == TransferKind::Standard {
                self.credit_from_suspense(&t.held_at, &t.sender_account, t.amount, t.transfer_id, EntryKind::Refund)?;
            }
            self.legacy
                .transfers
                .get_mut(&t.transfer_id)
                .expect("listed")
                .set_status(TransferStatus::Expired);
            out.push(t.transfer_id);
        }
        Ok(out)
    }
}

impl fmt::Display for DepositOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DepositOutcome::Deposited { account, attempts_used } => {
                write!(f, "deposited into {account} after {attempts_used} attempt(s)")
            }
            DepositOutcome::WrongAnswer { remaining } => write!(f, "wrong answer, {remaining} attempt(s) left"),
            DepositOutcome::CancelledAttemptsExhausted { refunded } => {
                write!(f, "cancelled after {MAX_ATTEMPTS} wrong answers, refunded {refunded}")
            }
        }
    }
}
