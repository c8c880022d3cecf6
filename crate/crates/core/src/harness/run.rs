//! Command interpreter. Every command becomes one `[events]` line; failures
//! are recorded there rather than aborting the run.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use crate::adversary::{
    execute_redirection, leaked_info_count, observe, select_targets, shareable_questions, snoop_autodeposit_names,
    AdversaryError, GuessModel, Observer, QuestionKnowledge,
};
use crate::directed::{check_requirements, AuthPurpose, AuthToken, SendDirected};
use crate::legacy::{AutodepositRequest, MoneyRequest, SecurityQuestion, Session, StandardRequest, StrengthClass};
use crate::model::{AccountId, Contact, CustomerId, FinancialInstitution, Language, MoneyAmount, NamePolicy, TransferId};
use crate::notify::{DeliveryEntry, DirectedKind, LinkToken, NoticeEvent, NoticeOrigin, NotificationField};
use crate::world::World;

use super::parse::{parse_flag, Scenario, ScenarioCommand, Verb};
use super::report::Report;

/// Final world and report of one run.
pub struct RunOutcome {
    pub report: Report,
    pub world: World,
}

type Step = Result<String, String>;

fn cents(s: &str) -> MoneyAmount {
    MoneyAmount::from_cents(s.parse().expect("checked by the parser"))
}

fn message(s: &str) -> Option<String> {
    (!s.is_empty()).then(|| s.to_string())
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

struct Runner {
    world: World,
    labels: BTreeMap<String, TransferId>,
    auths: BTreeMap<String, AuthToken>,
    registrations: BTreeMap<String, String>,
    observations: Vec<String>,
    attacks: Vec<String>,
}

impl Runner {
    fn bind(&mut self, c: &ScenarioCommand, id: TransferId) -> String {
        self.labels.insert(id.to_string(), id);
        match c.opt("as") {
            Some(label) => {
                self.labels.insert(label.to_string(), id);
                format!("{id} as {label}")
            }
            None => id.to_string(),
        }
    }

    fn label(&self, label: &str) -> Result<TransferId, String> {
        self.labels.get(label).copied().ok_or_else(|| format!("unknown transfer label `{label}`"))
    }

    fn token(&self, label: &str) -> Result<(TransferId, LinkToken), String> {
        let id = self.label(label)?;
        let token = self
            .world
            .legacy_transfer(id)
            .and_then(|t| t.link_token.clone())
            .ok_or_else(|| format!("{id} has no link"))?;
        Ok((id, token))
    }

    fn session(&self, account: &str) -> Result<Session, String> {
        let account = AccountId::from(account);
        let fi = self.world.account(&account).map_err(err)?.fi.clone();
        Ok(Session { fi, account })
    }

    fn auth(&self, c: &ScenarioCommand) -> Result<Option<AuthToken>, String> {
        c.opt("auth")
            .map(|l| self.auths.get(l).cloned().ok_or_else(|| format!("unknown authorization label `{l}`")))
            .transpose()
    }

    fn code(&self, target: &str, code: &str) -> String {
        if code == "*" {
            self.world
                .interac_id(target)
                .map(|i| i.security_code.to_string())
                .unwrap_or_else(|| "000".into())
        } else {
            code.to_string()
        }
    }

    fn exec(&mut self, c: &ScenarioCommand) -> Step {
        let w = &mut self.world;
        match c.verb {
            Verb::DeclareFi => {
                let policy = NamePolicy::from_str(c.arg(2)).expect("checked by the parser");
                let mut fi = FinancialInstitution::new(c.arg(0), c.arg(1), policy);
                if let Some(v) = c.opt("min") {
                    fi.min_transfer = cents(v);
                }
                if let Some(v) = c.opt("max") {
                    fi.max_transfer = cents(v);
                }
                if let Some(v) = c.opt("send-limit") {
                    fi.daily_send_limit = cents(v);
                }
                if let Some(v) = c.opt("deposit-limit") {
                    fi.daily_deposit_limit = cents(v);
                }
                if let Some(v) = c.opt("confirmation") {
                    fi.supports_confirmation_message = parse_flag(v).expect("checked");
                }
                if let Some(v) = c.opt("portal") {
                    fi.supports_portal_inbox = parse_flag(v).expect("checked");
                }
                let detail = format!("{} {}", fi.fi_id, fi.name_format_policy.as_str());
                w.declare_fi(fi).map_err(err)?;
                Ok(detail)
            }
            Verb::DeclareCustomer => {
                let lang = match c.opt("lang").unwrap_or("en") {
                    "en" => Language::English,
                    "fr" => Language::French,
                    other => return Err(format!("unknown language `{other}`")),
                };
                w.declare_customer(c.arg(0).into(), c.arg(1), c.opt("profile"), lang).map_err(err)?;
                Ok(c.arg(0).to_string())
            }
            Verb::DeclareEmail => {
                let owner = c.opt("owner").map(CustomerId::from);
                let tls = c.opt("tls").is_none_or(|v| parse_flag(v).expect("checked"));
                w.declare_email(c.arg(0), owner.as_ref(), tls).map_err(err)?;
                Ok(format!("{} tls {}", c.arg(0), if tls { "yes" } else { "no" }))
            }
            Verb::DeclarePhone => {
                let owner = c.opt("owner").map(CustomerId::from);
                w.declare_phone(c.arg(0), owner.as_ref()).map_err(err)?;
                Ok(c.arg(0).to_string())
            }
            Verb::DeclareAccount => {
                w.open_account(c.arg(0).into(), &c.arg(1).into(), &c.arg(2).into()).map_err(err)?;
                Ok(c.arg(0).to_string())
            }
            Verb::Mint => {
                let amount = cents(c.arg(1));
                w.mint(&c.arg(0).into(), amount).map_err(err)?;
                Ok(format!("{amount} into {}", c.arg(0)))
            }
            Verb::AdvanceClock => {
                w.advance_clock(c.arg(0).parse().expect("checked"));
                Ok(w.now().to_string())
            }
            Verb::SetTls => {
                let on = parse_flag(c.arg(1)).expect("checked");
                w.set_tls(c.arg(0), on).map_err(err)?;
                Ok(format!("{} tls {}", c.arg(0), c.arg(1)))
            }
            Verb::CompromiseEndpoint => {
                w.compromise_endpoint(c.arg(0)).map_err(err)?;
                Ok(c.arg(0).to_string())
            }

            Verb::SendStandard => {
                let class = StrengthClass::from_str(c.opt("class").expect("required")).expect("checked");
                let req = StandardRequest {
                    sender_account: c.arg(0).into(),
                    sender_email: c.opt("from").map(str::to_string),
                    recipient_name: c.arg(1).to_string(),
                    contact: Contact::parse(c.arg(2)).expect("checked"),
                    amount: cents(c.arg(3)),
                    message: message(c.arg(4)),
                    question: SecurityQuestion::new(c.opt("q").expect("required"), c.opt("a").expect("required"), class),
                };
                let id = w.initiate_standard(req).map_err(err)?;
                Ok(self.bind(c, id))
            }
            Verb::Deposit => {
                let (id, token) = self.token(c.arg(0))?;
                let session = self.session(c.arg(1))?;
                let outcome = self
                    .world
                    .answer_and_deposit(&token, &session, c.arg(2), c.opt("confirm"))
                    .map_err(err)?;
                Ok(format!("{id} {outcome}"))
            }
            Verb::Reject => {
                let (id, token) = self.token(c.arg(0))?;
                let refunded = self.world.reject_standard(&token).map_err(err)?;
                Ok(format!("{id} rejected, refunded {refunded}"))
            }
            Verb::RegisterAutodeposit => {
                w.register_autodeposit(&c.arg(0).into(), c.arg(1), &c.arg(2).into()).map_err(err)?;
                Ok(format!("{} -> {}", c.arg(1), c.arg(2)))
            }
            Verb::LookupAutodeposit => Ok(match w.lookup_autodeposit(c.arg(0)) {
                Some(found) => match found.profile_name {
                    Some(p) => format!("{} registered to {} ({p})", c.arg(0), found.legal_name),
                    None => format!("{} registered to {}", c.arg(0), found.legal_name),
                },
                None => format!("{} not registered", c.arg(0)),
            }),
            Verb::SendAutodeposit => {
                let req = AutodepositRequest {
                    sender_account: c.arg(0).into(),
                    sender_email: c.opt("from").map(str::to_string),
                    email: c.arg(1).to_string(),
                    amount: cents(c.arg(2)),
                    message: message(c.arg(3)),
                };
                let id = w.initiate_autodeposit(req).map_err(err)?;
                Ok(self.bind(c, id))
            }
            Verb::RequestMoney => {
                let req = MoneyRequest {
                    requestor_account: c.arg(0).into(),
                    requestor_email: c.opt("from").map(str::to_string),
                    recipient_name: c.arg(1).to_string(),
                    contact: Contact::parse(c.arg(2)).expect("checked"),
                    amount: cents(c.arg(3)),
                    message: message(c.arg(4)),
                };
                let id = w.initiate_money_request(req).map_err(err)?;
                Ok(self.bind(c, id))
            }
            Verb::FulfilRequest => {
                let (id, token) = self.token(c.arg(0))?;
                let session = self.session(c.arg(1))?;
                self.world.fulfil_request(&token, &session, c.opt("confirm")).map_err(err)?;
                Ok(format!("{id} paid from {}", c.arg(1)))
            }
            Verb::DeclineRequest => {
                let (id, token) = self.token(c.arg(0))?;
                self.world.decline_request(&token).map_err(err)?;
                Ok(format!("{id} declined"))
            }
            Verb::ExpireSweep => {
                let expired = w.expire_sweep().map_err(err)?;
                let ids: Vec<String> = expired.iter().map(|t| t.to_string()).collect();
                Ok(format!("{} expired {}", ids.len(), ids.join(",")).trim_end().to_string())
            }

            Verb::RegisterId => {
                let accounts: Vec<AccountId> = c.arg(3).split(',').filter(|s| !s.is_empty()).map(AccountId::from).collect();
                let autodeposit = c.opt("autodeposit").is_some_and(|v| parse_flag(v).expect("checked"));
                let contact = Contact::parse(c.arg(2)).expect("checked");
                let reg = w
                    .register_interac_id(&c.arg(0).into(), c.arg(1), contact, accounts, autodeposit)
                    .map_err(err)?;
                self.registrations.insert(reg.id_string.clone(), reg.verification_token);
                Ok(format!("{} awaiting verification", reg.id_string))
            }
            Verb::VerifyId => {
                let token = self
                    .registrations
                    .get(c.arg(0))
                    .cloned()
                    .unwrap_or_default();
                let id = w.verify_identifier(&token).map_err(err)?;
                Ok(format!("{} verified", id.id_string))
            }
            Verb::IssueAuth => {
                let purpose = AuthPurpose::from_str(c.arg(1)).expect("checked");
                let token = w.issue_auth(&c.arg(0).into(), purpose).map_err(err)?;
                let label = c.opt("as").expect("required").to_string();
                self.auths.insert(label.clone(), token);
                Ok(format!("{} for {}", label, c.arg(0)))
            }
            Verb::SendDirected => {
                let req = SendDirected {
                    sender_account: c.arg(0).into(),
                    target: c.arg(1).to_string(),
                    code: self.code(c.arg(1), c.arg(2)),
                    amount: cents(c.arg(3)),
                    message: message(c.arg(4)),
                    auth: self.auth(c)?,
                    source: c.opt("source").unwrap_or(c.arg(0)).to_string(),
                };
                let id = self.world.send_directed(req).map_err(err)?;
                Ok(self.bind(c, id))
            }
            Verb::SelectAccount => {
                let id = self.label(c.arg(0))?;
                self.world.recipient_select_account(id, &c.arg(1).into()).map_err(err)?;
                Ok(format!("{id} deposited into {}", c.arg(1)))
            }
            Verb::RejectDirected => {
                let id = self.label(c.arg(0))?;
                let amount = self.world.recipient_reject(id).map_err(err)?;
                Ok(format!("{id} rejected, refunded {amount}"))
            }
            Verb::ReturnAutodeposit => {
                let id = self.label(c.arg(0))?;
                let auth = self.auth(c)?;
                let receipt = self.world.return_autodeposit(id, auth.as_ref()).map_err(err)?;
                Ok(format!("{id} returned {}", receipt.amount))
            }
            Verb::RequestDirected => {
                let code = self.code(c.arg(1), c.arg(2));
                let auth = self.auth(c)?;
                let id = self
                    .world
                    .request_money_directed(
                        &c.arg(0).into(),
                        c.arg(1),
                        &code,
                        cents(c.arg(3)),
                        auth.as_ref(),
                        c.opt("source").unwrap_or(c.arg(0)),
                    )
                    .map_err(err)?;
                Ok(self.bind(c, id))
            }
            Verb::FulfilDirected => {
                let id = self.label(c.arg(0))?;
                let auth = self.auth(c)?;
                self.world.fulfil_directed_request(id, &c.arg(1).into(), auth.as_ref()).map_err(err)?;
                Ok(format!("{id} paid from {}", c.arg(1)))
            }
            Verb::DeclineDirected => {
                let id = self.label(c.arg(0))?;
                self.world.decline_directed_request(id).map_err(err)?;
                Ok(format!("{id} declined"))
            }
            Verb::ChangeDevice => {
                let auth = self.auth(c)?;
                self.world.change_device(&c.arg(0).into(), auth.as_ref()).map_err(err)?;
                Ok(format!("device changed for {}", c.arg(0)))
            }
            Verb::StatusRelay => {
                w.set_status_relay(&c.arg(0).into(), parse_flag(c.arg(1)).expect("checked")).map_err(err)?;
                Ok(format!("{} {}", c.arg(0), c.arg(1)))
            }
            Verb::CodeLockout => {
                let threshold = c.arg(0).parse::<u32>().ok();
                w.set_code_lockout(threshold);
                Ok(c.arg(0).to_string())
            }

            Verb::Observe => self.observe(c),
            Verb::Targets => {
                let observer = level(c.arg(0))?;
                let min = c.opt("min").map_or(MoneyAmount::ZERO, cents);
                let obs = observe(self.world.deliveries().entries(), &observer);
                let targets = select_targets(&obs, min);
                self.observations
                    .push(format!("targets\tline {}\tlevel {}\t{} target(s)", c.line, observer.level, targets.len()));
                for t in &targets {
                    self.observations.push(format!("target\tnotice {}\t{}\t{}", t.seq, t.amount, t.observed_at));
                }
                Ok(format!("{} target(s) at or above {min}", targets.len()))
            }
            Verb::Attack => {
                let observer = level(c.arg(0))?;
                let d = GuessModel::default();
                let p = |k: &str, default: f64| c.opt(k).map_or(default, |v| v.parse().expect("checked"));
                let model = GuessModel::new(p("exposed", d.exposed), p("weak", d.weak), p("strong", d.strong))
                    .map_err(err)?;
                let min = c.opt("min").map_or(MoneyAmount::ZERO, cents);
                let trace = execute_redirection(&mut self.world, &observer, &c.arg(1).into(), &model, min).map_err(err)?;
                self.attacks
                    .push(format!("attack\tline {}\tlevel {}\t{}", c.line, observer.level, c.arg(1)));
                self.attacks.extend(trace.render().lines().map(str::to_string));
                Ok(format!(
                    "{}: {} redirected, {} locked out",
                    trace.outcome,
                    trace.redirected.len(),
                    trace.locked_out.len()
                ))
            }
            Verb::AttackAnswer => self.attack_answer(c),
            Verb::Snoop => {
                let found = snoop_autodeposit_names(&mut self.world, &c.args);
                for (address, name) in &found {
                    self.observations.push(format!("snoop\t{address}\t{name}"));
                }
                Ok(format!("{} of {} name(s) revealed", found.len(), c.args.len()))
            }
            Verb::Shareable => {
                let set = |s: &str| -> BTreeSet<String> {
                    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(str::to_string).collect()
                };
                let sender = QuestionKnowledge {
                    prior_knowledge: set(c.arg(0)),
                    made_up: set(c.arg(1)),
                };
                let recipient = QuestionKnowledge {
                    prior_knowledge: set(c.arg(2)),
                    made_up: set(c.arg(3)),
                };
                let shared: Vec<String> = shareable_questions(&sender, &recipient).into_iter().collect();
                Ok(format!("{} shareable: {}", shared.len(), shared.join(",")).trim_end().to_string())
            }
        }
    }

    fn observe(&mut self, c: &ScenarioCommand) -> Step {
        let observer = level(c.arg(0))?;
        let entries = self.world.deliveries().entries();
        let obs = observe(entries, &observer);
        self.observations.push(format!(
            "observe\tline {}\tlevel {}\t{} of {} notice(s)",
            c.line,
            observer.level,
            obs.len(),
            entries.len()
        ));
        for (field, count) in leaked_info_count(&obs) {
            self.observations.push(format!("leak\tlevel {}\t{field}\t{count}", observer.level));
        }
        Ok(format!("{} notice(s) observed", obs.len()))
    }

    /// One scripted answer by the attacker, using only what the observer saw.
    fn attack_answer(&mut self, c: &ScenarioCommand) -> Step {
        let observer = level(c.arg(0))?;
        if !observer.capabilities.hijack_account {
            return Err(AdversaryError::NoCapability(observer.level).to_string());
        }
        let id = self.label(c.arg(2))?;
        let obs = observe(self.world.deliveries().entries(), &observer);
        let seen = obs
            .iter()
            .find(|o| {
                o.event == NoticeEvent::RecipientNotice
                    && matches!(o.origin, NoticeOrigin::Legacy { transfer, .. } if transfer == id)
            })
            .ok_or_else(|| format!("{id} not observed at level {}", observer.level))?;
        let seq = seen.seq;
        let token = seen
            .fields_seen
            .get(&NotificationField::DepositLink)
            .and_then(|v| LinkToken::from_link(v))
            .ok_or_else(|| format!("{id}: observed notice carries no deposit link"))?;
        let session = self.session(c.arg(1))?;
        self.world.open_deposit_link(&token, &session).map_err(err)?;
        let outcome = self
            .world
            .answer_and_deposit(&token, &session, c.arg(3), None)
            .map_err(err)?;
        Ok(format!("{id} via notice {seq}: {outcome}"))
    }
}

fn level(s: &str) -> Result<Observer, String> {
    Observer::level(s.parse().expect("checked")).map_err(err)
}

fn kind_label(origin: &NoticeOrigin) -> (&'static str, TransferId, &'static str) {
    match origin {
        NoticeOrigin::Legacy {
            kind,
            transfer,
            subsequent,
        } => (
            kind.as_str(),
            *transfer,
            match subsequent {
                Some(true) => "subsequent",
                Some(false) => "first",
                None => "-",
            },
        ),
        NoticeOrigin::Directed { kind, transfer } => (
            match kind {
                DirectedKind::Directed => "directed",
                DirectedKind::Autodeposit => "directed_autodeposit",
                DirectedKind::Request => "directed_request",
            },
            *transfer,
            "-",
        ),
    }
}

/// `seq, transfer, kind, event, channel, first|subsequent|-, destination,
/// comma-separated field names` for one delivered notification.
pub fn matrix_line(entry: &DeliveryEntry) -> String {
    let n = &entry.notification;
    let (kind, transfer, order) = kind_label(&n.origin);
    let mut names: Vec<&str> = n.fields.keys().map(|f| f.name()).collect();
    names.sort_unstable();
    format!(
        "{}\t{transfer}\t{kind}\t{}\t{}\t{order}\t{}\t{}",
        entry.seq,
        n.event.as_str(),
        n.channel.as_str(),
        n.destination,
        names.join(",")
    )
}

fn ledger_lines(world: &World) -> Vec<String> {
    let ledger = world.ledger();
    let mut out: Vec<String> = ledger
        .accounts()
        .map(|a| format!("account\t{}\t{}\t{}", a.account_id, a.fi, a.balance))
        .collect();
    out.extend(ledger.suspense_balances().map(|(fi, m)| format!("suspense\t{fi}\t{m}")));
    out.push(format!("journal\t{} entries", ledger.journal().len()));
    out.push(format!("total\t{}", ledger.total_system_value()));
    out.push(format!("minted\t{}", ledger.minted_total()));
    out.push(format!("replay\t{}", if ledger.replay_matches() { "match" } else { "mismatch" }));
    out.push(format!("conservation\t{}", if world.conservation_ok() { "ok" } else { "violated" }));
    out
}

fn execute(scenario: &Scenario, seed: u64) -> (Runner, Vec<String>) {
    let mut runner = Runner {
        world: World::new(seed),
        labels: BTreeMap::new(),
        auths: BTreeMap::new(),
        registrations: BTreeMap::new(),
        observations: Vec::new(),
        attacks: Vec::new(),
    };
    let mut events = Vec::with_capacity(scenario.commands.len());
    for c in &scenario.commands {
        let (status, detail) = match runner.exec(c) {
            Ok(d) => ("ok", d),
            Err(e) => ("error", e),
        };
        events.push(format!("{}\t{}\t{status}\t{detail}", c.line, c.verb));
    }
    (runner, events)
}

/// Runs the scenario on a fresh world without building a report.
pub fn execute_world(scenario: &Scenario, seed: u64) -> World {
    execute(scenario, seed).0.world
}

pub fn run(scenario: &Scenario, seed: u64) -> RunOutcome {
    let (runner, events) = execute(scenario, seed);
    let world = runner.world;
    let report = Report {
        name: scenario.name.clone(),
        seed,
        events,
        matrix: world.deliveries().entries().iter().map(matrix_line).collect(),
        observations: runner.observations,
        attacks: runner.attacks,
        requirements: check_requirements(&world),
        ledger: ledger_lines(&world),
        conservation_ok: world.conservation_ok(),
    };
    RunOutcome { report, world }
}
