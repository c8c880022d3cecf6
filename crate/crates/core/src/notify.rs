//! Notification content and delivery exposure.
//!
//! The field content of every legacy notification comes from one embedded
//! table, [`MATRIX`], with one record per observed (transfer kind, channel,
//! event) row. Name fields are symbolic in the table and resolved against the
//! institutions' name policies, so per-bank differences come from
//! configuration rather than from bank-specific code.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Contact, CustomerId, Endpoints, MoneyAmount, NamePolicy, SimTime, TransferId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NotificationField {
    PreferredLanguage,
    Status,
    RecipientNameCustom,
    RecipientNameLegal,
    SenderNameCustom,
    SenderNameLegal,
    SenderEmail,
    Amount,
    CustomMessage,
    ConfirmationMessage,
    SenderFI,
    RecipientFI,
    ReferenceNumber,
    DepositLink,
    SelectFILink,
    PreferredFILink,
    ExpiryDate,
}

impl NotificationField {
    pub const ALL: [NotificationField; 17] = [
        NotificationField::PreferredLanguage,
        NotificationField::Status,
        NotificationField::RecipientNameCustom,
        NotificationField::RecipientNameLegal,
        NotificationField::SenderNameCustom,
        NotificationField::SenderNameLegal,
        NotificationField::SenderEmail,
        NotificationField::Amount,
        NotificationField::CustomMessage,
        NotificationField::ConfirmationMessage,
        NotificationField::SenderFI,
        NotificationField::RecipientFI,
        NotificationField::ReferenceNumber,
        NotificationField::DepositLink,
        NotificationField::SelectFILink,
        NotificationField::PreferredFILink,
        NotificationField::ExpiryDate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NotificationField::PreferredLanguage => "preferred_language",
            NotificationField::Status => "status",
            NotificationField::RecipientNameCustom => "recipient_name_custom",
            NotificationField::RecipientNameLegal => "recipient_name_legal",
            NotificationField::SenderNameCustom => "sender_name_custom",
            NotificationField::SenderNameLegal => "sender_name_legal",
            NotificationField::SenderEmail => "sender_email",
            NotificationField::Amount => "amount",
            NotificationField::CustomMessage => "custom_message",
            NotificationField::ConfirmationMessage => "confirmation_message",
            NotificationField::SenderFI => "sender_fi",
            NotificationField::RecipientFI => "recipient_fi",
            NotificationField::ReferenceNumber => "reference_number",
            NotificationField::DepositLink => "deposit_link",
            NotificationField::SelectFILink => "select_fi_link",
            NotificationField::PreferredFILink => "preferred_fi_link",
            NotificationField::ExpiryDate => "expiry_date",
        }
    }

    pub fn from_name(name: &str) -> Option<NotificationField> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn is_name(self) -> bool {
        matches!(
            self,
            NotificationField::RecipientNameCustom
                | NotificationField::RecipientNameLegal
                | NotificationField::SenderNameCustom
                | NotificationField::SenderNameLegal
        )
    }

    pub fn is_link(self) -> bool {
        matches!(
            self,
            NotificationField::DepositLink | NotificationField::SelectFILink | NotificationField::PreferredFILink
        )
    }

    /// Fields that tie a notification to the sending party.
    pub fn identifies_sender(self) -> bool {
        matches!(
            self,
            NotificationField::SenderNameCustom
                | NotificationField::SenderNameLegal
                | NotificationField::SenderEmail
                | NotificationField::SenderFI
                | NotificationField::ReferenceNumber
        )
    }
}

impl fmt::Display for NotificationField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Legacy transfer types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TransferKind {
    Standard,
    Autodeposit,
    RequestMoney,
}

impl TransferKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TransferKind::Standard => "standard",
            TransferKind::Autodeposit => "autodeposit",
            TransferKind::RequestMoney => "request_money",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NoticeEvent {
    RecipientNotice,
    SenderConfirmation,
    RequestNotice,
    RequestorConfirmation,
}

impl NoticeEvent {
    pub fn as_str(self) -> &'static str {
        match self {
            NoticeEvent::RecipientNotice => "recipient_notice",
            NoticeEvent::SenderConfirmation => "sender_confirmation",
            NoticeEvent::RequestNotice => "request_notice",
            NoticeEvent::RequestorConfirmation => "requestor_confirmation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Channel {
    Email,
    Sms,
    PortalInbox,
}

impl Channel {
    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Email => "email",
            Channel::Sms => "sms",
            Channel::PortalInbox => "portal_inbox",
        }
    }

    /// Email and SMS leave the provider's control; the portal inbox does not.
    pub fn is_insecure(self) -> bool {
        !matches!(self, Channel::PortalInbox)
    }

    pub fn for_contact(contact: &Contact) -> Channel {
        match contact {
            Contact::Email(_) => Channel::Email,
            Contact::Phone(_) => Channel::Sms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Destination {
    Email(String),
    Phone(String),
    Portal(CustomerId),
}

impl Destination {
    pub fn channel(&self) -> Channel {
        match self {
            Destination::Email(_) => Channel::Email,
            Destination::Phone(_) => Channel::Sms,
            Destination::Portal(_) => Channel::PortalInbox,
        }
    }
}

impl From<&Contact> for Destination {
    fn from(c: &Contact) -> Self {
        match c {
            Contact::Email(a) => Destination::Email(a.clone()),
            Contact::Phone(n) => Destination::Phone(n.clone()),
        }
    }
}

impl fmt::Display for Destination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Destination::Email(a) => f.write_str(a),
            Destination::Phone(n) => f.write_str(n),
            Destination::Portal(c) => write!(f, "portal:{c}"),
        }
    }
}

/// Unguessable handle embedded in actionable links.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkToken(pub String);

impl LinkToken {
    pub fn generate(rng: &mut impl Rng) -> LinkToken {
        let hi: u64 = rng.random();
        let lo: u64 = rng.random();
        LinkToken(format!("{hi:016x}{lo:016x}"))
    }

    /// Recovers the token from a rendered link value (the last path segment).
    pub fn from_link(value: &str) -> Option<LinkToken> {
        let tail = value.rsplit('/').next()?;
        (tail.len() == 32 && tail.bytes().all(|b| b.is_ascii_hexdigit())).then(|| LinkToken(tail.to_string()))
    }
}

impl fmt::Display for LinkToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Kinds of directed-protocol activity a generic notification can announce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DirectedKind {
    Directed,
    Autodeposit,
    Request,
}

impl DirectedKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DirectedKind::Directed => "directed",
            DirectedKind::Autodeposit => "autodeposit",
            DirectedKind::Request => "request",
        }
    }
}

/// Bookkeeping carried alongside a notification. Never rendered and never
/// part of what an observer reads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoticeOrigin {
    Legacy {
        kind: TransferKind,
        transfer: TransferId,
        subsequent: Option<bool>,
    },
    Directed {
        kind: DirectedKind,
        transfer: TransferId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Notification {
    pub event: NoticeEvent,
    pub channel: Channel,
    pub destination: Destination,
    pub fields: BTreeMap<NotificationField, String>,
    pub link_token: Option<LinkToken>,
    pub emitted_at: SimTime,
    pub delivered_at: Option<SimTime>,
    pub signed: bool,
    pub origin: NoticeOrigin,
}

impl Notification {
    pub fn field_set(&self) -> BTreeSet<NotificationField> {
        self.fields.keys().copied().collect()
    }

    /// Canonical text form: a header line `event<TAB>channel<TAB>destination`
    /// followed by `field_name<TAB>value` lines sorted by field name.
    pub fn render(&self) -> String {
        let mut out = format!("{}\t{}\t{}\n", self.event.as_str(), self.channel.as_str(), self.destination);
        let sorted: BTreeMap<&str, &String> = self.fields.iter().map(|(k, v)| (k.name(), v)).collect();
        for (name, value) in sorted {
            out.push_str(name);
            out.push('\t');
            out.push_str(&sanitize(value));
            out.push('\n');
        }
        out
    }
}

fn sanitize(value: &str) -> String {
    value.replace(['\t', '\n', '\r'], " ")
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
pub enum NotifyError {
    #[error("no notification of {event:?} over {channel:?} exists for {kind:?} transfers")]
    UnsupportedCombination {
        kind: TransferKind,
        channel: Channel,
        event: NoticeEvent,
    },
    #[error("unknown destination {0}")]
    UnknownDestination(String),
}

/// How a name slot in a matrix row expands to concrete name fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NameRule {
    /// Whatever the institution's policy passes on.
    Policy,
    CustomOnly,
    LegalAlways,
    /// Legal name, plus the custom name when the institution passes one.
    LegalPlusCustomByPolicy,
    /// Custom name, plus the legal name when the institution passes one.
    CustomPlusLegalByPolicy,
    /// Legal name is always disclosed; custom-policy institutions add the custom name.
    LegalOrBoth,
    /// Like `Policy`, but legal while the institution is unknown.
    PolicyElseLegal,
}

impl NameRule {
    fn expand(self, policy: Option<NamePolicy>, custom: NotificationField, legal: NotificationField) -> Vec<NotificationField> {
        use NamePolicy::*;
        let (c, l) = match (self, policy) {
            (NameRule::Policy, None | Some(Custom)) => (true, false),
            (NameRule::Policy, Some(Legal)) => (false, true),
            (NameRule::Policy, Some(Both)) => (true, true),
            (NameRule::CustomOnly, _) => (true, false),
            (NameRule::LegalAlways, _) => (false, true),
            (NameRule::LegalPlusCustomByPolicy, p) => (matches!(p, Some(Custom | Both)), true),
            (NameRule::CustomPlusLegalByPolicy, p) => (true, matches!(p, Some(Legal | Both))),
            (NameRule::LegalOrBoth, Some(Legal)) => (false, true),
            (NameRule::LegalOrBoth, _) => (true, true),
            (NameRule::PolicyElseLegal, Some(Custom)) => (true, false),
            (NameRule::PolicyElseLegal, Some(Both)) => (true, true),
            (NameRule::PolicyElseLegal, None | Some(Legal)) => (false, true),
        };
        let mut v = Vec::new();
        if c {
            v.push(custom);
        }
        if l {
            v.push(legal);
        }
        v
    }
}

/// One symbolic entry of a matrix row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Field(NotificationField),
    SenderName(NameRule),
    RecipientName(NameRule),
    /// Present when the depositing institution supports confirmation messages.
    ConfirmationIfSupported,
}

#[derive(Debug, Clone, Copy)]
pub struct MatrixRow {
    pub kind: TransferKind,
    pub channel: Channel,
    pub event: NoticeEvent,
    pub slots: &'static [Slot],
    /// Added once the destination address has a remembered institution.
    pub subsequent_extra: &'static [NotificationField],
    /// False where the row rests on an expected rather than observed value.
    pub authoritative: bool,
}

use NotificationField as F;

const STANDARD_EMAIL_NOTICE: &[Slot] = &[
    Slot::Field(F::PreferredLanguage),
    Slot::Field(F::Status),
    Slot::RecipientName(NameRule::CustomOnly),
    Slot::SenderName(NameRule::Policy),
    Slot::Field(F::Amount),
    Slot::Field(F::CustomMessage),
    Slot::Field(F::SelectFILink),
    Slot::Field(F::DepositLink),
    Slot::Field(F::ExpiryDate),
    Slot::Field(F::SenderFI),
    Slot::Field(F::ReferenceNumber),
];

const STANDARD_SMS_NOTICE: &[Slot] = &[
    Slot::Field(F::PreferredLanguage),
    Slot::Field(F::Status),
    Slot::SenderName(NameRule::Policy),
    Slot::Field(F::Amount),
    Slot::Field(F::CustomMessage),
    Slot::Field(F::SelectFILink),
    Slot::Field(F::DepositLink),
    Slot::Field(F::ExpiryDate),
    Slot::Field(F::ReferenceNumber),
];

const AUTODEPOSIT_NOTICE: &[Slot] = &[
    Slot::Field(F::PreferredLanguage),
    Slot::Field(F::Status),
    Slot::RecipientName(NameRule::LegalAlways),
    Slot::SenderName(NameRule::Policy),
    Slot::Field(F::Amount),
    Slot::Field(F::CustomMessage),
    Slot::Field(F::SenderFI),
    Slot::Field(F::ReferenceNumber),
    Slot::Field(F::RecipientFI),
];

const REQUEST_EMAIL_NOTICE: &[Slot] = &[
    Slot::Field(F::PreferredLanguage),
    Slot::Field(F::Status),
    Slot::RecipientName(NameRule::CustomPlusLegalByPolicy),
    Slot::SenderName(NameRule::LegalOrBoth),
    Slot::Field(F::Amount),
    Slot::Field(F::CustomMessage),
    Slot::Field(F::SelectFILink),
    Slot::Field(F::DepositLink),
    Slot::Field(F::ExpiryDate),
    Slot::Field(F::SenderFI),
    Slot::Field(F::SenderEmail),
    Slot::Field(F::RecipientFI),
    Slot::Field(F::ReferenceNumber),
];

const REQUEST_SMS_NOTICE: &[Slot] = &[
    Slot::Field(F::PreferredLanguage),
    Slot::Field(F::Status),
    Slot::RecipientName(NameRule::PolicyElseLegal),
    Slot::SenderName(NameRule::LegalOrBoth),
    Slot::Field(F::Amount),
    Slot::Field(F::CustomMessage),
    Slot::Field(F::SelectFILink),
    Slot::Field(F::DepositLink),
    Slot::Field(F::ExpiryDate),
    Slot::Field(F::ReferenceNumber),
    Slot::Field(F::SenderEmail),
    Slot::Field(F::RecipientFI),
];

const STANDARD_CONFIRMATION: &[Slot] = &[
    Slot::Field(F::PreferredLanguage),
    Slot::Field(F::Status),
    Slot::RecipientName(NameRule::CustomOnly),
    Slot::SenderName(NameRule::Policy),
    Slot::Field(F::Amount),
    Slot::Field(F::CustomMessage),
    Slot::ConfirmationIfSupported,
    Slot::Field(F::SenderFI),
];

const AUTODEPOSIT_CONFIRMATION: &[Slot] = &[
    Slot::Field(F::PreferredLanguage),
    Slot::Field(F::Status),
    Slot::RecipientName(NameRule::LegalPlusCustomByPolicy),
    Slot::SenderName(NameRule::Policy),
    Slot::Field(F::Amount),
    Slot::Field(F::CustomMessage),
    Slot::Field(F::SenderFI),
    Slot::Field(F::ReferenceNumber),
];

const REQUESTOR_CONFIRMATION: &[Slot] = &[
    Slot::Field(F::PreferredLanguage),
    Slot::Field(F::Status),
    Slot::RecipientName(NameRule::CustomOnly),
    Slot::SenderName(NameRule::Policy),
    Slot::Field(F::Amount),
    Slot::Field(F::CustomMessage),
    Slot::Field(F::ConfirmationMessage),
    Slot::Field(F::SenderFI),
];

const PREFERRED: &[NotificationField] = &[F::PreferredFILink];

macro_rules! row {
    ($kind:ident, $channel:ident, $event:ident, $slots:expr, $extra:expr, $auth:expr) => {
        MatrixRow {
            kind: TransferKind::$kind,
            channel: Channel::$channel,
            event: NoticeEvent::$event,
            slots: $slots,
            subsequent_extra: $extra,
            authoritative: $auth,
        }
    };
}

/// Recipient-side rows first, then sender-side rows.
pub const MATRIX: &[MatrixRow] = &[
    row!(Standard, Email, RecipientNotice, STANDARD_EMAIL_NOTICE, PREFERRED, true),
    row!(Standard, Sms, RecipientNotice, STANDARD_SMS_NOTICE, &[], false),
    row!(Autodeposit, Email, RecipientNotice, AUTODEPOSIT_NOTICE, &[], true),
    row!(RequestMoney, Email, RequestNotice, REQUEST_EMAIL_NOTICE, PREFERRED, true),
    row!(RequestMoney, Sms, RequestNotice, REQUEST_SMS_NOTICE, &[], false),
    row!(Standard, Email, SenderConfirmation, STANDARD_CONFIRMATION, &[], true),
    row!(Standard, PortalInbox, SenderConfirmation, STANDARD_CONFIRMATION, &[], true),
    row!(Autodeposit, Email, SenderConfirmation, AUTODEPOSIT_CONFIRMATION, &[], true),
    row!(Autodeposit, PortalInbox, SenderConfirmation, AUTODEPOSIT_CONFIRMATION, &[], true),
    row!(RequestMoney, Email, RequestorConfirmation, REQUESTOR_CONFIRMATION, &[], true),
    row!(RequestMoney, PortalInbox, RequestorConfirmation, REQUESTOR_CONFIRMATION, &[], true),
];

/// Everything that selects a field set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixKey {
    pub kind: TransferKind,
    pub channel: Channel,
    pub event: NoticeEvent,
    pub subsequent: bool,
    pub sender_policy: NamePolicy,
    /// `None` while the counterparty's institution is not yet known.
    pub recipient_policy: Option<NamePolicy>,
    pub recipient_supports_confirmation: bool,
}

pub fn matrix_row(kind: TransferKind, channel: Channel, event: NoticeEvent) -> Option<&'static MatrixRow> {
    MATRIX
        .iter()
        .find(|r| r.kind == kind && r.channel == channel && r.event == event)
}

/// Field set of a legacy notification. Pure lookup over [`MATRIX`].
pub fn field_matrix(key: &MatrixKey) -> Result<BTreeSet<NotificationField>, NotifyError> {
    let row = matrix_row(key.kind, key.channel, key.event).ok_or(NotifyError::UnsupportedCombination {
        kind: key.kind,
        channel: key.channel,
        event: key.event,
    })?;
    let mut out = BTreeSet::new();
    for slot in row.slots {
        match *slot {
            Slot::Field(f) => {
                out.insert(f);
            }
            Slot::SenderName(rule) => {
                out.extend(rule.expand(Some(key.sender_policy), F::SenderNameCustom, F::SenderNameLegal));
            }
            Slot::RecipientName(rule) => {
                out.extend(rule.expand(key.recipient_policy, F::RecipientNameCustom, F::RecipientNameLegal));
            }
            Slot::ConfirmationIfSupported => {
                if key.recipient_supports_confirmation {
                    out.insert(F::ConfirmationMessage);
                }
            }
        }
    }
    if key.subsequent {
        out.extend(row.subsequent_extra.iter().copied());
    }
    Ok(out)
}

/// Field values available for composing one notification; only those named by
/// the field set are copied into it.
#[derive(Debug, Clone, Default)]
pub struct FieldValues {
    pub values: BTreeMap<NotificationField, String>,
}

impl FieldValues {
    pub fn set(&mut self, field: NotificationField, value: impl Into<String>) -> &mut Self {
        self.values.insert(field, value.into());
        self
    }

    /// Copies the values of `fields`; a field without a value renders empty.
    pub fn project(&self, fields: &BTreeSet<NotificationField>) -> BTreeMap<NotificationField, String> {
        fields
            .iter()
            .map(|f| (*f, self.values.get(f).cloned().unwrap_or_default()))
            .collect()
    }
}

/// Generic directed-protocol notice: the kind of activity and nothing else.
pub fn compose_generic_notification(
    kind: DirectedKind,
    status: &str,
    destination: Destination,
    transfer: TransferId,
    signed: bool,
    at: SimTime,
) -> Notification {
    let mut fields = BTreeMap::new();
    fields.insert(F::Status, format!("{} e-Transfer {status}", kind.as_str()));
    Notification {
        event: match kind {
            DirectedKind::Request => NoticeEvent::RequestNotice,
            _ => NoticeEvent::RecipientNotice,
        },
        channel: destination.channel(),
        destination,
        fields,
        link_token: None,
        emitted_at: at,
        delivered_at: None,
        signed,
        origin: NoticeOrigin::Directed { kind, transfer },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryEntry {
    pub seq: u64,
    pub notification: Notification,
    pub plaintext_exposed_in_transit: bool,
    pub endpoint_exposed: bool,
}

/// Append-only record of delivered notifications, in delivery order.
#[derive(Debug, Clone, Default)]
pub struct DeliveryLog {
    entries: Vec<DeliveryEntry>,
}

impl DeliveryLog {
    pub const MIN_LATENCY_MINUTES: u64 = 1;
    pub const MAX_LATENCY_MINUTES: u64 = 29;

    pub fn new() -> Self {
        DeliveryLog::default()
    }

    pub fn entries(&self) -> &[DeliveryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Delivers with a latency drawn uniformly from 1..=29 minutes and records
    /// the exposure of the path and of the receiving endpoint.
    pub fn deliver(
        &mut self,
        mut notification: Notification,
        endpoints: &Endpoints,
        portal_customers: impl Fn(&CustomerId) -> bool,
        latency_rng: &mut impl Rng,
    ) -> Result<&DeliveryEntry, NotifyError> {
        let (plaintext, endpoint) = match &notification.destination {
            Destination::Email(a) => {
                let e = endpoints
                    .emails
                    .get(a)
                    .ok_or_else(|| NotifyError::UnknownDestination(a.clone()))?;
                (!e.provider_tls_incoming, e.endpoint_compromised)
            }
            Destination::Phone(n) => {
                let p = endpoints
                    .phones
                    .get(n)
                    .ok_or_else(|| NotifyError::UnknownDestination(n.clone()))?;
                (false, p.endpoint_compromised)
            }
            Destination::Portal(c) => {
                if !portal_customers(c) {
                    return Err(NotifyError::UnknownDestination(format!("portal:{c}")));
                }
                (false, false)
            }
        };
        let latency = latency_rng.random_range(Self::MIN_LATENCY_MINUTES..=Self::MAX_LATENCY_MINUTES);
        notification.delivered_at = Some(notification.emitted_at.plus_minutes(latency));
        let seq = self.entries.len() as u64 + 1;
        self.entries.push(DeliveryEntry {
            seq,
            notification,
            plaintext_exposed_in_transit: plaintext,
            endpoint_exposed: endpoint,
        });
        Ok(self.entries.last().expect("just pushed"))
    }
}

/// Renders an amount for a notification.
pub fn amount_value(amount: MoneyAmount) -> String {
    amount.to_string()
}

pub fn deposit_link(token: &LinkToken) -> String {
    format!("https://etransfer.example/deposit/{token}")
}

pub fn select_fi_link(token: &LinkToken) -> String {
    format!("https://etransfer.example/select-fi/{token}")
}

pub fn preferred_fi_link(fi: &str, token: &LinkToken) -> String {
    format!("https://{fi}.bank.example/etransfer/{token}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EmailAddress;
    use crate::model::PhoneNumber;
    use crate::rng::{stream_rng, Stream};

    fn key(kind: TransferKind, channel: Channel, event: NoticeEvent, subsequent: bool) -> MatrixKey {
        MatrixKey {
            kind,
            channel,
            event,
            subsequent,
            sender_policy: NamePolicy::Custom,
            recipient_policy: Some(NamePolicy::Legal),
            recipient_supports_confirmation: true,
        }
    }

    #[test]
    fn standard_sms_has_no_recipient_name() {
        let set = field_matrix(&key(TransferKind::Standard, Channel::Sms, NoticeEvent::RecipientNotice, false)).unwrap();
        assert!(!set.contains(&F::RecipientNameCustom));
        assert!(!set.contains(&F::RecipientNameLegal));
        assert!(set.contains(&F::DepositLink));
    }

    #[test]
    fn subsequent_adds_preferred_link() {
        let first = field_matrix(&key(TransferKind::Standard, Channel::Email, NoticeEvent::RecipientNotice, false)).unwrap();
        let next = field_matrix(&key(TransferKind::Standard, Channel::Email, NoticeEvent::RecipientNotice, true)).unwrap();
        let mut expected = first.clone();
        expected.insert(F::PreferredFILink);
        assert!(next.is_superset(&expected));
        assert!(!first.contains(&F::PreferredFILink));
    }

    #[test]
    fn autodeposit_notice_has_legal_name_and_recipient_fi() {
        let set = field_matrix(&key(TransferKind::Autodeposit, Channel::Email, NoticeEvent::RecipientNotice, false)).unwrap();
        assert!(set.contains(&F::RecipientNameLegal));
        assert!(set.contains(&F::RecipientFI));
        assert!(!set.iter().any(|f| f.is_link()));
    }

    #[test]
    fn autodeposit_sms_unsupported() {
        assert!(matches!(
            field_matrix(&key(TransferKind::Autodeposit, Channel::Sms, NoticeEvent::RecipientNotice, false)),
            Err(NotifyError::UnsupportedCombination { .. })
        ));
    }

    #[test]
    fn standard_email_notice_has_sender_fi_and_expiry() {
        let set = field_matrix(&key(TransferKind::Standard, Channel::Email, NoticeEvent::RecipientNotice, false)).unwrap();
        assert!(set.contains(&F::SenderFI));
        assert!(set.contains(&F::ExpiryDate));
    }

    #[test]
    fn name_policies_expand() {
        let mut k = key(TransferKind::Standard, Channel::Email, NoticeEvent::SenderConfirmation, false);
        for (policy, custom, legal) in [
            (NamePolicy::Custom, true, false),
            (NamePolicy::Legal, false, true),
            (NamePolicy::Both, true, true),
        ] {
            k.sender_policy = policy;
            let set = field_matrix(&k).unwrap();
            assert_eq!(set.contains(&F::SenderNameCustom), custom);
            assert_eq!(set.contains(&F::SenderNameLegal), legal);
        }
        // Requests always disclose the requestor's legal name.
        let mut r = key(TransferKind::RequestMoney, Channel::Email, NoticeEvent::RequestNotice, false);
        r.sender_policy = NamePolicy::Custom;
        let set = field_matrix(&r).unwrap();
        assert!(set.contains(&F::SenderNameLegal) && set.contains(&F::SenderNameCustom));
    }

    #[test]
    fn confirmation_message_follows_recipient_support() {
        let mut k = key(TransferKind::Standard, Channel::Email, NoticeEvent::SenderConfirmation, false);
        assert!(field_matrix(&k).unwrap().contains(&F::ConfirmationMessage));
        k.recipient_supports_confirmation = false;
        assert!(!field_matrix(&k).unwrap().contains(&F::ConfirmationMessage));
    }

    #[test]
    fn generic_notice_is_status_only() {
        let n = compose_generic_notification(
            DirectedKind::Directed,
            "received",
            Destination::Email("x@y.test".into()),
            TransferId(1),
            false,
            SimTime(0),
        );
        assert_eq!(n.field_set(), BTreeSet::from([F::Status]));
        let forbidden = BTreeSet::from([F::Amount, F::SenderNameLegal, F::SenderFI, F::DepositLink]);
        assert!(n.field_set().is_disjoint(&forbidden));
    }

    fn endpoints() -> Endpoints {
        let mut e = Endpoints::default();
        let tls = EmailAddress::parse("tls@ok.test").unwrap();
        let mut plain = EmailAddress::parse("plain@fwd.test").unwrap();
        plain.provider_tls_incoming = false;
        let mut phone = PhoneNumber::parse("6135550100").unwrap();
        phone.endpoint_compromised = true;
        e.emails.insert(tls.address.clone(), tls);
        e.emails.insert(plain.address.clone(), plain);
        e.phones.insert(phone.number.clone(), phone);
        e
    }

    fn notice(dest: Destination) -> Notification {
        compose_generic_notification(DirectedKind::Directed, "received", dest, TransferId(1), false, SimTime(100))
    }

    #[test]
    fn delivery_exposure_flags() {
        let e = endpoints();
        let mut log = DeliveryLog::new();
        let mut rng = stream_rng(1, Stream::DeliveryLatency);
        let a = log.deliver(notice(Destination::Email("tls@ok.test".into())), &e, |_| true, &mut rng).unwrap();
        assert!(!a.plaintext_exposed_in_transit && !a.endpoint_exposed);
        let b = log.deliver(notice(Destination::Email("plain@fwd.test".into())), &e, |_| true, &mut rng).unwrap();
        assert!(b.plaintext_exposed_in_transit);
        let c = log.deliver(notice(Destination::Phone("6135550100".into())), &e, |_| true, &mut rng).unwrap();
        assert!(c.endpoint_exposed && !c.plaintext_exposed_in_transit);
        let d = log.deliver(notice(Destination::Portal("c1".into())), &e, |_| true, &mut rng).unwrap();
        assert!(!d.plaintext_exposed_in_transit && !d.endpoint_exposed);
        assert!(matches!(
            log.deliver(notice(Destination::Email("nobody@x.test".into())), &e, |_| true, &mut rng),
            Err(NotifyError::UnknownDestination(_))
        ));
        assert_eq!(log.len(), 4);
    }

    #[test]
    fn latency_within_bound() {
        let e = endpoints();
        let mut log = DeliveryLog::new();
        let mut rng = stream_rng(99, Stream::DeliveryLatency);
        for _ in 0..2000 {
            log.deliver(notice(Destination::Email("tls@ok.test".into())), &e, |_| true, &mut rng).unwrap();
        }
        for entry in log.entries() {
            let n = &entry.notification;
            let latency = n.delivered_at.unwrap().minutes() - n.emitted_at.minutes();
            assert!((1..=29).contains(&latency));
        }
    }

    #[test]
    fn render_is_sorted_by_name() {
        let mut n = notice(Destination::Email("a@b.test".into()));
        n.fields.insert(F::Amount, "CAD 1.00".into());
        n.fields.insert(F::ReferenceNumber, "CA\t1".into());
        let text = n.render();
        assert_eq!(
            text,
            "recipient_notice\temail\ta@b.test\namount\tCAD 1.00\nreference_number\tCA 1\nstatus\tdirected e-Transfer received\n"
        );
    }

    #[test]
    fn link_token_roundtrip() {
        let mut rng = stream_rng(3, Stream::Tokens);
        let t = LinkToken::generate(&mut rng);
        assert_eq!(LinkToken::from_link(&deposit_link(&t)), Some(t.clone()));
        assert_eq!(LinkToken::from_link(&preferred_fi_link("rbc", &t)), Some(t));
        assert_eq!(LinkToken::from_link("https://x/short"), None);
    }
}
