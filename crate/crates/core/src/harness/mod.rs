//! Scenario runner: parse, execute on a fresh world, report.
//!
//! Report bytes depend only on the scenario text and the seed. The seed is
//! taken from an explicit override, then the scenario's `seed` directive,
//! then the environment fallback, then zero.

mod parse;
mod report;
mod run;

use std::collections::BTreeMap;

pub use parse::{parse_scenario, ArgKind, ParseError, Scenario, ScenarioCommand, Verb};
pub use report::{diff_fixture, diff_text, section, Divergence, Report, SECTIONS};
pub use run::{execute_world, matrix_line, run, RunOutcome};

use crate::adversary::{execute_redirection, AdversaryError, AttackOutcome, GuessModel, Observer};
use crate::model::{FinancialInstitution, MoneyAmount};

pub const SEED_ENV: &str = "ETSIM_SEED";

pub fn resolve_seed(explicit: Option<u64>, scenario: &Scenario, env: Option<u64>) -> u64 {
    explicit.or(scenario.seed).or(env).unwrap_or(0)
}

/// Multiplies every money argument, including institution limits (defaults
/// are made explicit first) so the scaled scenario stays within them.
pub fn scale_amounts(scenario: &Scenario, factor: u64) -> Scenario {
    let scale = |v: &str| (v.parse::<u64>().expect("checked by the parser") * factor).to_string();
    let mut out = scenario.clone();
    for c in &mut out.commands {
        if c.verb == Verb::DeclareFi {
            let defaults = FinancialInstitution::new("x", "x", crate::model::NamePolicy::Legal);
            for (key, default) in [
                ("min", defaults.min_transfer),
                ("max", defaults.max_transfer),
                ("send-limit", defaults.daily_send_limit),
                ("deposit-limit", defaults.daily_deposit_limit),
            ] {
                c.options.entry(key.to_string()).or_insert_with(|| default.cents().to_string());
            }
        }
        let positional = c.verb.positional();
        for (i, arg) in c.args.iter_mut().enumerate() {
            if positional.get(i) == Some(&ArgKind::Cents) {
                *arg = scale(arg);
            }
        }
        let kinds: BTreeMap<&str, ArgKind> = c.verb.options().iter().copied().collect();
        for (key, value) in c.options.iter_mut() {
            if kinds.get(key.as_str()) == Some(&ArgKind::Cents) {
                *value = scale(value);
            }
        }
    }
    out
}

/// Declares every email address without incoming TLS and turns every
/// `set-tls` into a downgrade.
pub fn force_non_tls(scenario: &Scenario) -> Scenario {
    let mut out = scenario.clone();
    for c in &mut out.commands {
        match c.verb {
            Verb::DeclareEmail => {
                c.options.insert("tls".into(), "no".into());
            }
            Verb::SetTls => c.args[1] = "no".into(),
            _ => {}
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialSummary {
    pub trials: u64,
    pub outcomes: BTreeMap<AttackOutcome, u64>,
    /// Trials in which at least one transfer was redirected.
    pub successful_trials: u64,
    pub redirected_transfers: u64,
}

impl TrialSummary {
    pub fn render(&self) -> String {
        let mut out = format!("trials\t{}\n", self.trials);
        for (outcome, n) in &self.outcomes {
            out.push_str(&format!("outcome\t{outcome}\t{n}\n"));
        }
        out.push_str(&format!("successful_trials\t{}\n", self.successful_trials));
        out.push_str(&format!("redirected_transfers\t{}\n", self.redirected_transfers));
        out
    }
}

/// Replays the scenario under seeds `base_seed..base_seed + trials`, then
/// runs the redirection playbook once per world.
pub fn attack_trials(
    scenario: &Scenario,
    base_seed: u64,
    trials: u64,
    observer: &Observer,
    hijacked: &str,
    model: &GuessModel,
    min_amount: MoneyAmount,
) -> Result<TrialSummary, AdversaryError> {
    let mut summary = TrialSummary {
        trials,
        outcomes: BTreeMap::new(),
        successful_trials: 0,
        redirected_transfers: 0,
    };
    for i in 0..trials {
        let mut world = execute_world(scenario, base_seed.wrapping_add(i));
        let trace = execute_redirection(&mut world, observer, &hijacked.into(), model, min_amount)?;
        *summary.outcomes.entry(trace.outcome).or_insert(0) += 1;
        if !trace.redirected.is_empty() {
            summary.successful_trials += 1;
        }
        summary.redirected_transfers += trace.redirected.len() as u64;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
scenario small
seed 9
declare-fi rbc "RBC" legal confirmation:yes portal:yes
declare-fi bmo "BMO" legal
declare-customer lea "Lea Fournier"
declare-customer mary "Mary Wilson"
declare-customer marc "Marc Roy"
declare-email lea@mail.test owner:lea
declare-email mary@fwd.test owner:mary tls:no
declare-account lea-rbc lea rbc
declare-account mary-bmo mary bmo
declare-account marc-bmo marc bmo
mint lea-rbc 100000
send-standard lea-rbc "Mary Wilson" mary@fwd.test 1500 "lunch" q:"What is my name?" a:"Lea" class:exposed from:lea@mail.test as:t1
attack-answer 3 marc-bmo t1 "Lea"
deposit t1 mary-bmo "Lea"
observe 2
"#;

    #[test]
    fn seed_precedence() {
        let mut s = Scenario::default();
        assert_eq!(resolve_seed(None, &s, None), 0);
        assert_eq!(resolve_seed(None, &s, Some(3)), 3);
        s.seed = Some(7);
        assert_eq!(resolve_seed(None, &s, Some(3)), 7);
        assert_eq!(resolve_seed(Some(1), &s, Some(3)), 1);
    }

    #[test]
    fn run_is_deterministic_and_records_errors() {
        let s = parse_scenario(SMALL).unwrap();
        let a = run(&s, 9).report.render();
        let b = run(&s, 9).report.render();
        assert_eq!(a, b);
        let events = section(&a, "events");
        assert!(events.iter().any(|l| l.contains("attack-answer\tok\tT0001 via notice 1: deposited into marc-bmo")));
        assert!(events.iter().any(|l| l.contains("deposit\terror\t")));
        assert!(section(&a, "ledger").contains(&"conservation\tok"));
    }

    #[test]
    fn seed_changes_latency_only() {
        let s = parse_scenario(SMALL).unwrap();
        let a = run(&s, 1).report;
        let b = run(&s, 2).report;
        assert_eq!(a.events.len(), b.events.len());
        assert_eq!(a.ledger, b.ledger);
    }

    #[test]
    fn transformers() {
        let s = parse_scenario(SMALL).unwrap();
        let scaled = scale_amounts(&s, 10);
        let mint = scaled.commands.iter().find(|c| c.verb == Verb::Mint).unwrap();
        assert_eq!(mint.args[1], "1000000");
        let send = scaled.commands.iter().find(|c| c.verb == Verb::SendStandard).unwrap();
        assert_eq!(send.args[3], "15000");
        let fi = &scaled.commands[0];
        assert_eq!(fi.opt("send-limit"), Some("1000000"));
        let plain = force_non_tls(&s);
        assert!(plain
            .commands
            .iter()
            .filter(|c| c.verb == Verb::DeclareEmail)
            .all(|c| c.opt("tls") == Some("no")));
    }
}
