//! Benchmark workloads over the checked-in scenarios.

use etsim_core::adversary::{GuessModel, Observer};
use etsim_core::harness::{self, Scenario, TrialSummary};
use etsim_core::MoneyAmount;

pub const PRIVACY: &str = include_str!("../../core/fixtures/privacy.scn");
pub const SECURITY: &str = include_str!("../../core/fixtures/security.scn");
pub const GUESS: &str = include_str!("../../core/fixtures/guess.scn");
pub const DIRECTED: &str = include_str!("../../core/fixtures/directed.scn");

pub fn scenario(text: &str) -> Scenario {
    harness::parse_scenario(text).expect("bundled scenario parses")
}

/// Runs a scenario and renders its report; returns the byte length.
pub fn render(s: &Scenario, seed: u64) -> usize {
    harness::run(s, seed).report.render().len()
}

/// The weak-question attack replayed under `trials` consecutive seeds.
pub fn guess_trials(s: &Scenario, trials: u64) -> TrialSummary {
    let observer = Observer::level(3).expect("valid level");
    harness::attack_trials(s, 0, trials, &observer, "marc-bmo", &GuessModel::default(), MoneyAmount::ZERO)
        .expect("attack runs")
}
