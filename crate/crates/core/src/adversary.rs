//! Observers, leakage tallies, question guessability and the redirection attack.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::directed::DirectedError;
use crate::legacy::{answer_source, DepositOutcome, LegacyError, Session, StrengthClass};
use crate::model::{AccountId, ModelError, MoneyAmount, SimTime, TransferId};
use crate::notify::{
    Channel, DeliveryEntry, Destination, LinkToken, NoticeEvent, NoticeOrigin, NotificationField as F,
};
use crate::world::World;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scale {
    SingleTarget,
    ManyTargets,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Capabilities {
    pub read_plaintext_transit: bool,
    pub read_endpoint_compromised: bool,
    pub hijack_account: bool,
    pub scale: Scale,
    pub read_encrypted_transit: bool,
}

/// One of the five observer levels: 1 the addressee itself, 2 an unintended
/// reader such as a mail administrator, 3 a criminal individual, 4 an
/// organized group, 5 an intelligence agency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observer {
    pub level: u8,
    pub capabilities: Capabilities,
    /// Destinations a level-1 observer legitimately receives.
    pub addressee_of: BTreeSet<Destination>,
}

impl Observer {
    pub fn level(level: u8) -> Result<Observer, AdversaryError> {
        let (plain, endpoint, hijack, scale, encrypted) = match level {
            1 => (false, false, false, Scale::SingleTarget, false),
            2 => (true, false, false, Scale::SingleTarget, false),
            3 => (true, true, true, Scale::SingleTarget, false),
            4 => (true, true, true, Scale::ManyTargets, false),
            5 => (true, true, true, Scale::ManyTargets, true),
            other => return Err(AdversaryError::BadLevel(other)),
        };
        Ok(Observer {
            level,
            capabilities: Capabilities {
                read_plaintext_transit: plain,
                read_endpoint_compromised: endpoint,
                hijack_account: hijack,
                scale,
                read_encrypted_transit: encrypted,
            },
            addressee_of: BTreeSet::new(),
        })
    }

    pub fn addressee(destinations: impl IntoIterator<Item = Destination>) -> Observer {
        let mut o = Observer::level(1).expect("level 1 exists");
        o.addressee_of = destinations.into_iter().collect();
        o
    }

    pub fn sees(&self, entry: &DeliveryEntry) -> bool {
        let c = &self.capabilities;
        self.addressee_of.contains(&entry.notification.destination)
            || (entry.plaintext_exposed_in_transit && c.read_plaintext_transit)
            || (entry.endpoint_exposed && c.read_endpoint_compromised)
            || c.read_encrypted_transit
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Observation {
    /// Delivery log sequence number of the observed notification.
    pub seq: u64,
    pub event: NoticeEvent,
    pub channel: Channel,
    pub destination: Destination,
    pub fields_seen: BTreeMap<F, String>,
    pub observed_at: SimTime,
    #[serde(skip)]
    pub(crate) origin: NoticeOrigin,
}

pub fn observe(log: &[DeliveryEntry], observer: &Observer) -> Vec<Observation> {
    log.iter()
        .filter(|e| observer.sees(e))
        .map(|e| Observation {
            seq: e.seq,
            event: e.notification.event,
            channel: e.notification.channel,
            destination: e.notification.destination.clone(),
            fields_seen: e.notification.fields.clone(),
            observed_at: e.notification.delivered_at.unwrap_or(e.notification.emitted_at),
            origin: e.notification.origin.clone(),
        })
        .collect()
}

/// Occurrences of each field across observations; every field is present.
pub fn leaked_info_count(observations: &[Observation]) -> BTreeMap<F, usize> {
    let mut counts: BTreeMap<F, usize> = F::ALL.iter().map(|f| (*f, 0)).collect();
    for o in observations {
        for f in o.fields_seen.keys() {
            *counts.entry(*f).or_insert(0) += 1;
        }
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Target {
    pub link_token: LinkToken,
    pub amount: MoneyAmount,
    pub question_text: Option<String>,
    pub observed_at: SimTime,
    pub seq: u64,
}

/// Standard recipient notices with a deposit link and at least `min_amount`,
/// largest first, earliest first among equal amounts.
pub fn select_targets(observations: &[Observation], min_amount: MoneyAmount) -> Vec<Target> {
    let mut seen = BTreeSet::new();
    let mut out: Vec<Target> = observations
        .iter()
        .filter(|o| o.event == NoticeEvent::RecipientNotice)
        .filter_map(|o| {
            let token = LinkToken::from_link(o.fields_seen.get(&F::DepositLink)?)?;
            let amount = MoneyAmount::parse_display(o.fields_seen.get(&F::Amount)?)?;
            (amount >= min_amount).then_some(Target {
                link_token: token,
                amount,
                question_text: None,
                observed_at: o.observed_at,
                seq: o.seq,
            })
        })
        .filter(|t| seen.insert(t.link_token.clone()))
        .collect();
    out.sort_by(|a, b| b.amount.cmp(&a.amount).then(a.observed_at.cmp(&b.observed_at)).then(a.seq.cmp(&b.seq)));
    out
}

/// Questions each party knows in advance and questions they made up together.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QuestionKnowledge {
    pub prior_knowledge: BTreeSet<String>,
    pub made_up: BTreeSet<String>,
}

impl QuestionKnowledge {
    pub fn union(&self) -> BTreeSet<String> {
        self.prior_knowledge.union(&self.made_up).cloned().collect()
    }
}

/// Questions both parties can answer.
pub fn shareable_questions(sender: &QuestionKnowledge, recipient: &QuestionKnowledge) -> BTreeSet<String> {
    sender.union().intersection(&recipient.union()).cloned().collect()
}

/// Per-attempt probability of guessing an answer, by strength class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuessModel {
    pub exposed: f64,
    pub weak: f64,
    pub strong: f64,
}

impl Default for GuessModel {
    fn default() -> Self {
        GuessModel {
            exposed: 1.0,
            weak: 0.5,
            strong: 0.0,
        }
    }
}

impl GuessModel {
    pub fn new(exposed: f64, weak: f64, strong: f64) -> Result<Self, AdversaryError> {
        for p in [exposed, weak, strong] {
            if !(0.0..=1.0).contains(&p) {
                return Err(AdversaryError::BadProbability(p));
            }
        }
        Ok(GuessModel { exposed, weak, strong })
    }

    pub fn probability(&self, class: StrengthClass) -> f64 {
        match class {
            StrengthClass::Exposed => self.exposed,
            StrengthClass::Weak => self.weak,
            StrengthClass::Strong => self.strong,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum AttackOutcome {
    RedirectedDeposit,
    LockedOut,
    NoTargetFound,
    Blocked,
}

impl AttackOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            AttackOutcome::RedirectedDeposit => "redirected_deposit",
            AttackOutcome::LockedOut => "locked_out",
            AttackOutcome::NoTargetFound => "no_target_found",
            AttackOutcome::Blocked => "blocked",
        }
    }
}

impl fmt::Display for AttackOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttackStep {
    pub step_no: u8,
    pub description: String,
    pub success: bool,
    pub evidence: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttackTrace {
    pub steps: Vec<AttackStep>,
    pub outcome: AttackOutcome,
    pub redirected: Vec<TransferId>,
    pub locked_out: Vec<TransferId>,
}

impl AttackTrace {
    /// One `step<TAB>no<TAB>ok|fail<TAB>description<TAB>evidence` line per
    /// step and a closing `outcome<TAB>...` line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            out.push_str(&format!(
                "step\t{}\t{}\t{}\t{}\n",
                s.step_no,
                if s.success { "ok" } else { "fail" },
                s.description,
                s.evidence
            ));
        }
        out.push_str(&format!("outcome\t{}\n", self.outcome));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdversaryError {
    #[error("observer level {0} cannot hijack an account")]
    NoCapability(u8),
    #[error("observer level must be 1..=5, got {0}")]
    BadLevel(u8),
    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error(transparent)]
    Legacy(#[from] LegacyError),
    #[error(transparent)]
    Directed(#[from] DirectedError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn wrong_guess(n: u8, answer: &str) -> String {
    let guess = format!("guess{n}");
    if guess == answer.trim() {
        format!("{guess}x")
    } else {
        guess
    }
}

/// Runs the six-step redirection playbook with the world's guessing stream.
pub fn execute_redirection(
    world: &mut World,
    observer: &Observer,
    hijacked: &AccountId,
    model: &GuessModel,
    min_amount: MoneyAmount,
) -> Result<AttackTrace, AdversaryError> {
    if !observer.capabilities.hijack_account {
        return Err(AdversaryError::NoCapability(observer.level));
    }
    let fi = world.account(hijacked)?.fi.clone();
    let session = Session {
        fi: fi.clone(),
        account: hijacked.clone(),
    };
    let mut steps = vec![AttackStep {
        step_no: 1,
        description: "take over a bank account".into(),
        success: true,
        evidence: format!("session at {fi} on {hijacked}"),
    }];

    let observations = observe(world.deliveries().entries(), observer);
    let targets = select_targets(&observations, min_amount);
    let directed: Vec<TransferId> = observations
        .iter()
        .filter_map(|o| match o.origin {
            NoticeOrigin::Directed { transfer, .. } => Some(transfer),
            _ => None,
        })
        .collect::<BTreeSet<_>>()
        .into_iter()
        .filter(|t| {
            world
                .directed_transfer(*t)
                .is_some_and(|d| d.status == crate::directed::DirectedStatus::PendingSelection)
        })
        .collect();
    let times: Vec<String> = observations.iter().take(3).map(|o| o.observed_at.to_string()).collect();
    steps.push(AttackStep {
        step_no: 2,
        description: "search observed notices for standard transfers".into(),
        success: !targets.is_empty(),
        evidence: format!(
            "{} notice(s) observed, {} target(s) at or above {min_amount}; first seen {}",
            observations.len(),
            targets.len(),
            if times.is_empty() { "never".to_string() } else { times.join(", ") }
        ),
    });

    let mut redirected = Vec::new();
    let mut locked_out = Vec::new();
    let mut blocked = false;

    for target in &targets {
        let view = match world.open_deposit_link(&target.link_token, &session) {
            Ok(v) => v,
            Err(e) => {
                steps.push(AttackStep {
                    step_no: 3,
                    description: "open deposit link".into(),
                    success: false,
                    evidence: e.to_string(),
                });
                continue;
            }
        };
        let id = view.transfer_id;
        steps.push(AttackStep {
            step_no: 3,
            description: format!("open deposit link of {id}"),
            success: true,
            evidence: format!("question \"{}\" for {}", view.question_text, view.amount),
        });
        if !world.within_deposit_limit(hijacked, view.amount)? {
            steps.push(AttackStep {
                step_no: 5,
                description: format!("deposit {id}"),
                success: false,
                evidence: "daily deposit limit reached".into(),
            });
            continue;
        }
        let question = world
            .legacy_transfer(id)
            .and_then(|t| t.question.clone())
            .expect("standard transfers carry a question");
        let fields = observations
            .iter()
            .find(|o| o.seq == target.seq)
            .map(|o| o.fields_seen.clone())
            .unwrap_or_default();
        let readable = match question.strength_class {
            StrengthClass::Exposed => answer_source(&question.answer_text, &fields),
            _ => None,
        };
        let p = model.probability(question.strength_class);

        let mut attempts = 0u8;
        let mut result = None;
        let mut log = Vec::new();
        while result.is_none() {
            attempts += 1;
            let knows = match readable {
                Some(_) => true,
                None => world.rng.guessing.random_bool(p),
            };
            let answer = if knows {
                question.answer_text.clone()
            } else {
                wrong_guess(attempts, &question.answer_text)
            };
            log.push(if knows { "right" } else { "wrong" });
            match world.answer_and_deposit(&target.link_token, &session, &answer, None)? {
                DepositOutcome::WrongAnswer { .. } => {}
                outcome => result = Some(outcome),
            }
        }
        let how = match readable {
            Some(field) => format!("answer read from {field}"),
            None => format!("{} question guessed with p={p}", question.strength_class.as_str()),
        };
        steps.push(AttackStep {
            step_no: 4,
            description: format!("answer question of {id}"),
            success: matches!(result, Some(DepositOutcome::Deposited { .. })),
            evidence: format!("{how}; attempts {}", log.join(",")),
        });
        match result.expect("loop ends with an outcome") {
            DepositOutcome::Deposited { account, attempts_used } => {
                redirected.push(id);
                steps.push(AttackStep {
                    step_no: 5,
                    description: format!("deposit {id}"),
                    success: true,
                    evidence: format!("{} into {account} on attempt {attempts_used}", view.amount),
                });
            }
            DepositOutcome::CancelledAttemptsExhausted { refunded } => {
                locked_out.push(id);
                steps.push(AttackStep {
                    step_no: 5,
                    description: format!("deposit {id}"),
                    success: false,
                    evidence: format!("locked out; sender refunded {refunded}"),
                });
            }
            DepositOutcome::WrongAnswer { .. } => unreachable!(),
        }
    }

    // Directed notices name no link; the handle is tried against the
    // hijacked account directly.
    for t in &directed {
        let outcome = world.recipient_select_account(*t, hijacked);
        let evidence = match &outcome {
            Ok(()) => format!("{t} deposited into {hijacked}"),
            Err(e) => format!("{t}: {e}"),
        };
        if outcome.is_ok() {
            redirected.push(*t);
        } else {
            blocked = true;
        }
        steps.push(AttackStep {
            step_no: 5,
            description: format!("claim directed transfer {t}"),
            success: outcome.is_ok(),
            evidence,
        });
    }

    let deposited = world.ledger().daily_totals(hijacked, world.now().day()).map(|d| d.deposited)
        .map_err(LegacyError::from)?;
    let limit = world.fi(&fi)?.daily_deposit_limit;
    steps.push(AttackStep {
        step_no: 6,
        description: "withdraw redirected funds".into(),
        success: !redirected.is_empty(),
        evidence: format!("{deposited} deposited today of {limit} daily limit"),
    });

    let outcome = if !redirected.is_empty() {
        AttackOutcome::RedirectedDeposit
    } else if !locked_out.is_empty() {
        AttackOutcome::LockedOut
    } else if blocked {
        AttackOutcome::Blocked
    } else {
        AttackOutcome::NoTargetFound
    };
    Ok(AttackTrace {
        steps,
        outcome,
        redirected,
        locked_out,
    })
}

/// Legal names behind each registered address, one unthrottled lookup each.
pub fn snoop_autodeposit_names(world: &mut World, addresses: &[String]) -> Vec<(String, String)> {
    addresses
        .iter()
        .filter_map(|a| world.lookup_autodeposit(a).map(|found| (a.clone(), found.legal_name)))
        .collect()
}
