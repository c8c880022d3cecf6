//! Machine checks for the seven security and privacy requirements.
//!
//! Each check is a pure pass over the world's trace and delivery log. A
//! requirement with no relevant events passes vacuously with evidence
//! `no events`.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::notify::NotificationField;
use crate::world::{TraceEvent, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Requirement {
    /// No security may rest on channel secrecy or human-chosen secrets.
    R1,
    /// Funds reach only accounts linked to the addressed identifier.
    R2,
    /// Identities are verified before use.
    R3,
    /// Failures and lookups reveal nothing about other customers.
    R4,
    /// Unsolicited funds can be rejected or returned.
    R5,
    /// Withdrawals and device changes need a one-time authorization.
    R6,
    /// Notifications over insecure channels carry status only.
    R7,
}

impl Requirement {
    pub const ALL: [Requirement; 7] = [
        Requirement::R1,
        Requirement::R2,
        Requirement::R3,
        Requirement::R4,
        Requirement::R5,
        Requirement::R6,
        Requirement::R7,
    ];
}

impl fmt::Display for Requirement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RequirementResult {
    pub requirement: Requirement,
    pub pass: bool,
    pub evidence: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RequirementReport {
    pub results: Vec<RequirementResult>,
}

impl RequirementReport {
    pub fn get(&self, r: Requirement) -> &RequirementResult {
        self.results.iter().find(|x| x.requirement == r).expect("all requirements checked")
    }

    pub fn all_pass(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }

    /// `R<k><TAB>pass|fail<TAB>evidence` per line.
    pub fn render(&self) -> String {
        self.results
            .iter()
            .map(|r| format!("{}\t{}\t{}\n", r.requirement, if r.pass { "pass" } else { "fail" }, r.evidence))
            .collect()
    }
}

fn result(requirement: Requirement, pass: bool, evidence: String) -> RequirementResult {
    RequirementResult {
        requirement,
        pass,
        evidence,
    }
}

fn vacuous(requirement: Requirement) -> RequirementResult {
    result(requirement, true, "no events".to_string())
}

pub fn check_requirements(world: &World) -> RequirementReport {
    let trace = world.trace();
    let results = vec![
        r1(trace, world),
        r2(trace),
        r3(trace),
        r4(trace),
        r5(trace),
        r6(trace, world),
        r7(world),
    ];
    RequirementReport { results }
}

fn r1(trace: &[TraceEvent], world: &World) -> RequirementResult {
    let questions: BTreeSet<_> = trace
        .iter()
        .filter_map(|e| match e {
            TraceEvent::SecurityQuestionSet { transfer } => Some(*transfer),
            _ => None,
        })
        .collect();
    let entries = world.deliveries().entries();
    let linked = entries
        .iter()
        .filter(|e| e.notification.link_token.is_some() || e.notification.fields.keys().any(|f| f.is_link()))
        .count();
    if questions.is_empty() && entries.is_empty() {
        return vacuous(Requirement::R1);
    }
    if questions.is_empty() && linked == 0 {
        return result(
            Requirement::R1,
            true,
            format!("no security questions; {} notice(s) without links or secrets", entries.len()),
        );
    }
    result(
        Requirement::R1,
        false,
        format!(
            "security questions on {} transfer(s); {} notice(s) with actionable links",
            questions.len(),
            linked
        ),
    )
}

fn r2(trace: &[TraceEvent]) -> RequirementResult {
    let deposits: Vec<_> = trace
        .iter()
        .filter_map(|e| match e {
            TraceEvent::Deposit { transfer, account, bound } => Some((transfer, account, *bound)),
            _ => None,
        })
        .collect();
    if deposits.is_empty() {
        return vacuous(Requirement::R2);
    }
    let unbound: Vec<_> = deposits.iter().filter(|d| !d.2).collect();
    match unbound.first() {
        None => result(
            Requirement::R2,
            true,
            format!("{} deposit(s), all into accounts bound to the addressed recipient", deposits.len()),
        ),
        Some((t, a, _)) => result(
            Requirement::R2,
            false,
            format!("redirected deposit: {} of {}, first {t} into {a}", unbound.len(), deposits.len()),
        ),
    }
}

fn r3(trace: &[TraceEvent]) -> RequirementResult {
    let uses: Vec<_> = trace
        .iter()
        .filter_map(|e| match e {
            TraceEvent::SenderIdentity {
                transfer,
                identity,
                verified,
            } => Some((transfer, identity, *verified)),
            _ => None,
        })
        .collect();
    if uses.is_empty() {
        return vacuous(Requirement::R3);
    }
    let unverified: Vec<_> = uses.iter().filter(|u| !u.2).collect();
    match unverified.first() {
        None => result(Requirement::R3, true, format!("{} sending identity use(s), all verified", uses.len())),
        Some((t, id, _)) => result(
            Requirement::R3,
            false,
            format!("unverified sender email: {} use(s), first {id} on {t}", unverified.len()),
        ),
    }
}

fn r4(trace: &[TraceEvent]) -> RequirementResult {
    let forms: BTreeSet<&str> = trace
        .iter()
        .filter_map(|e| match e {
            TraceEvent::IdentifierFailure { error } => Some(error.as_str()),
            _ => None,
        })
        .collect();
    let failures = trace
        .iter()
        .filter(|e| matches!(e, TraceEvent::IdentifierFailure { .. }))
        .count();
    let lookups: Vec<_> = trace
        .iter()
        .filter_map(|e| match e {
            TraceEvent::NameLookup { address, revealed } => Some((address, *revealed)),
            _ => None,
        })
        .collect();
    if failures == 0 && lookups.is_empty() {
        return vacuous(Requirement::R4);
    }
    let revealing: Vec<_> = lookups.iter().filter(|l| l.1).collect();
    if let Some((address, _)) = revealing.first() {
        return result(
            Requirement::R4,
            false,
            format!(
                "legal-name lookup: {} of {} lookup(s) revealed a name, first {address}",
                revealing.len(),
                lookups.len()
            ),
        );
    }
    if forms.len() > 1 {
        return result(
            Requirement::R4,
            false,
            format!("{failures} identifier failure(s) in {} distinguishable forms", forms.len()),
        );
    }
    result(
        Requirement::R4,
        true,
        format!("{failures} identifier failure(s), one indistinguishable form; no names revealed"),
    )
}

fn r5(trace: &[TraceEvent]) -> RequirementResult {
    let unsolicited: Vec<_> = trace
        .iter()
        .filter_map(|e| match e {
            TraceEvent::UnsolicitedTransfer { transfer, rejectable } => Some((transfer, *rejectable)),
            _ => None,
        })
        .collect();
    if unsolicited.is_empty() {
        return vacuous(Requirement::R5);
    }
    let stuck: Vec<_> = unsolicited.iter().filter(|u| !u.1).collect();
    match stuck.first() {
        None => result(
            Requirement::R5,
            true,
            format!("{} unsolicited transfer(s), all rejectable or returnable", unsolicited.len()),
        ),
        Some((t, _)) => result(
            Requirement::R5,
            false,
            format!("no reject path for autodeposit: {} transfer(s), first {t}", stuck.len()),
        ),
    }
}

fn r6(trace: &[TraceEvent], world: &World) -> RequirementResult {
    let auths: Vec<_> = trace
        .iter()
        .filter_map(|e| match e {
            TraceEvent::Authorization {
                operation,
                subject,
                one_time,
            } => Some((operation, subject, *one_time)),
            _ => None,
        })
        .collect();
    if auths.is_empty() {
        return vacuous(Requirement::R6);
    }
    let missing: Vec<_> = auths.iter().filter(|a| !a.2).collect();
    if let Some((op, subject, _)) = missing.first() {
        return result(
            Requirement::R6,
            false,
            format!("no per-transfer auth: {} operation(s), first {op} {subject}", missing.len()),
        );
    }
    let consumed = world.directed_state().auths.values().filter(|a| a.consumed).count();
    if consumed != auths.len() {
        return result(
            Requirement::R6,
            false,
            format!("{} authorized operation(s) but {consumed} token(s) consumed", auths.len()),
        );
    }
    result(
        Requirement::R6,
        true,
        format!("{} operation(s), each consumed a distinct one-time authorization", auths.len()),
    )
}

fn r7(world: &World) -> RequirementResult {
    let insecure: Vec<_> = world
        .deliveries()
        .entries()
        .iter()
        .filter(|e| e.notification.channel.is_insecure())
        .collect();
    if insecure.is_empty() {
        return vacuous(Requirement::R7);
    }
    let allowed = BTreeSet::from([NotificationField::Status]);
    let rich = insecure
        .iter()
        .filter(|e| !e.notification.field_set().is_subset(&allowed))
        .count();
    if rich == 0 {
        result(Requirement::R7, true, format!("{} insecure notice(s), status only", insecure.len()))
    } else {
        result(
            Requirement::R7,
            false,
            format!("rich notifications: {rich} of {} insecure notice(s) carry more than status", insecure.len()),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_world_passes_vacuously() {
        let w = World::new(0);
        let report = check_requirements(&w);
        assert!(report.all_pass());
        for r in &report.results {
            assert_eq!(r.evidence, "no events");
        }
        assert_eq!(report.render().lines().count(), 7);
        assert!(report.render().starts_with("R1\tpass\tno events\n"));
    }
}
