//! Canonical report text and fixture comparison.

use std::fmt;
use std::path::Path;

use crate::directed::RequirementReport;

pub const SECTIONS: [&str; 6] = ["events", "matrix", "observations", "attacks", "requirements", "ledger"];

/// Everything a scenario run produced, in deterministic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub name: String,
    pub seed: u64,
    pub events: Vec<String>,
    pub matrix: Vec<String>,
    pub observations: Vec<String>,
    pub attacks: Vec<String>,
    pub requirements: RequirementReport,
    pub ledger: Vec<String>,
    pub conservation_ok: bool,
}

impl Report {
    pub fn render(&self) -> String {
        let mut out = format!("scenario\t{}\nseed\t{}\n", self.name, self.seed);
        let requirements: Vec<String> = self.requirements.render().lines().map(str::to_string).collect();
        let bodies = [
            &self.events,
            &self.matrix,
            &self.observations,
            &self.attacks,
            &requirements,
            &self.ledger,
        ];
        for (name, lines) in SECTIONS.iter().zip(bodies) {
            out.push_str(&format!("[{name}]\n"));
            for line in lines {
                out.push_str(line);
                out.push('\n');
            }
        }
        out
    }

    /// Number of events that ended in an error.
    pub fn error_count(&self) -> usize {
        self.events.iter().filter(|l| l.split('\t').nth(2) == Some("error")).count()
    }
}

/// Lines of one `[name]` section of rendered report text.
pub fn section<'a>(text: &'a str, name: &str) -> Vec<&'a str> {
    let header = format!("[{name}]");
    text.lines()
        .skip_while(|l| *l != header)
        .skip(1)
        .take_while(|l| !l.starts_with('['))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    /// One-based line number.
    pub line: usize,
    pub expected: Option<String>,
    pub actual: Option<String>,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |s: &Option<String>| s.clone().unwrap_or_else(|| "<end of file>".into());
        write!(
            f,
            "first divergence at line {}: expected `{}`, got `{}`",
            self.line,
            show(&self.expected),
            show(&self.actual)
        )
    }
}

/// Byte comparison reporting the first differing line.
pub fn diff_text(actual: &str, expected: &str) -> Result<(), Divergence> {
    if actual == expected {
        return Ok(());
    }
    let mut a = actual.split_inclusive('\n');
    let mut e = expected.split_inclusive('\n');
    let mut line = 1;
    loop {
        match (a.next(), e.next()) {
            (Some(x), Some(y)) if x == y => line += 1,
            (x, y) => {
                return Err(Divergence {
                    line,
                    expected: y.map(str::to_string),
                    actual: x.map(str::to_string),
                })
            }
        }
    }
}

pub fn diff_fixture(report: &Report, fixture: &Path) -> std::io::Result<Result<(), Divergence>> {
    let expected = std::fs::read_to_string(fixture)?;
    Ok(diff_text(&report.render(), &expected))
}
