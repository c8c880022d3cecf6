//! Line-oriented scenario language.
//!
//! One command per line. Fields are separated by whitespace; double quotes
//! group a field and accept `\"` and `\\` escapes. A field of the form
//! `key:value` (lower-case key) is an option, anything else is positional.
//! `#` outside quotes starts a comment.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::directed::AuthPurpose;
use crate::legacy::StrengthClass;
use crate::model::{Contact, NamePolicy};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message} (at `{token}`)")]
pub struct ParseError {
    pub line: usize,
    pub token: String,
    pub message: String,
}

/// Argument shapes checked at parse time so execution can rely on them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgKind {
    Word,
    Text,
    Cents,
    Minutes,
    Contact,
    Email,
    Flag,
    Policy,
    Class,
    Purpose,
    Level,
    Probability,
    /// Non-negative integer or `off`.
    Threshold,
    /// Comma-separated words; may be empty when quoted.
    List,
}

impl ArgKind {
    fn check(self, value: &str) -> Result<(), String> {
        let ok = match self {
            ArgKind::Word => !value.is_empty(),
            ArgKind::Text | ArgKind::List => true,
            ArgKind::Cents | ArgKind::Minutes => value.parse::<u64>().is_ok(),
            ArgKind::Contact => Contact::parse(value).is_ok(),
            ArgKind::Email => matches!(Contact::parse(value), Ok(Contact::Email(_))),
            ArgKind::Flag => parse_flag(value).is_some(),
            ArgKind::Policy => NamePolicy::from_str(value).is_ok(),
            ArgKind::Class => StrengthClass::from_str(value).is_ok(),
            ArgKind::Purpose => AuthPurpose::from_str(value).is_ok(),
            ArgKind::Level => matches!(value.parse::<u8>(), Ok(1..=5)),
            ArgKind::Probability => value.parse::<f64>().is_ok_and(|p| (0.0..=1.0).contains(&p)),
            ArgKind::Threshold => value == "off" || value.parse::<u32>().is_ok(),
        };
        if ok {
            Ok(())
        } else {
            Err(format!("expected {}", self.describe()))
        }
    }

    fn describe(self) -> &'static str {
        match self {
            ArgKind::Word => "a word",
            ArgKind::Text => "text",
            ArgKind::Cents => "an amount in cents",
            ArgKind::Minutes => "a number of minutes",
            ArgKind::Contact => "an email address or phone number",
            ArgKind::Email => "an email address",
            ArgKind::Flag => "yes or no",
            ArgKind::Policy => "custom, legal or both",
            ArgKind::Class => "exposed, weak or strong",
            ArgKind::Purpose => "initiate, fulfil or device",
            ArgKind::Level => "an observer level 1..5",
            ArgKind::Probability => "a probability in [0, 1]",
            ArgKind::Threshold => "a count or off",
            ArgKind::List => "a comma-separated list",
        }
    }
}

pub(crate) fn parse_flag(value: &str) -> Option<bool> {
    match value {
        "yes" | "true" | "on" => Some(true),
        "no" | "false" | "off" => Some(false),
        _ => None,
    }
}

macro_rules! verbs {
    ($($variant:ident = $name:literal [$($pos:ident),*] [$($key:literal : $kind:ident),*] $(+ $rest:ident)?;)*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum Verb {
            $($variant,)*
        }

        impl Verb {
            pub const ALL: &'static [Verb] = &[$(Verb::$variant,)*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(Verb::$variant => $name,)*
                }
            }

            pub fn positional(self) -> &'static [ArgKind] {
                match self {
                    $(Verb::$variant => &[$(ArgKind::$pos),*],)*
                }
            }

            pub fn options(self) -> &'static [(&'static str, ArgKind)] {
                match self {
                    $(Verb::$variant => &[$(($key, ArgKind::$kind)),*],)*
                }
            }

            /// Kind of any positional arguments past the fixed ones.
            pub fn rest(self) -> Option<ArgKind> {
                match self {
                    $(Verb::$variant => None $(.or(Some(ArgKind::$rest)))?,)*
                }
            }
        }
    };
}

verbs! {
    DeclareFi = "declare-fi" [Word, Text, Policy]
        ["min": Cents, "max": Cents, "send-limit": Cents, "deposit-limit": Cents, "confirmation": Flag, "portal": Flag];
    DeclareCustomer = "declare-customer" [Word, Text] ["profile": Text, "lang": Word];
    DeclareEmail = "declare-email" [Email] ["owner": Word, "tls": Flag];
    DeclarePhone = "declare-phone" [Contact] ["owner": Word];
    DeclareAccount = "declare-account" [Word, Word, Word] [];
    Mint = "mint" [Word, Cents] [];
    AdvanceClock = "advance-clock" [Minutes] [];
    SetTls = "set-tls" [Email, Flag] [];
    CompromiseEndpoint = "compromise-endpoint" [Contact] [];

    SendStandard = "send-standard" [Word, Text, Contact, Cents, Text]
        ["q": Text, "a": Text, "class": Class, "from": Email, "as": Word];
    Deposit = "deposit" [Word, Word, Text] ["confirm": Text];
    Reject = "reject" [Word] [];
    RegisterAutodeposit = "register-autodeposit" [Word, Email, Word] [];
    LookupAutodeposit = "lookup-autodeposit" [Email] [];
    SendAutodeposit = "send-autodeposit" [Word, Email, Cents, Text] ["from": Email, "as": Word];
    RequestMoney = "request-money" [Word, Text, Contact, Cents, Text] ["from": Email, "as": Word];
    FulfilRequest = "fulfil-request" [Word, Word] ["confirm": Text];
    DeclineRequest = "decline-request" [Word] [];
    ExpireSweep = "expire-sweep" [] [];

    RegisterId = "register-id" [Word, Word, Contact, List] ["autodeposit": Flag];
    VerifyId = "verify-id" [Word] [];
    IssueAuth = "issue-auth" [Word, Purpose] ["as": Word];
    SendDirected = "send-directed" [Word, Word, Word, Cents, Text] ["auth": Word, "source": Word, "as": Word];
    SelectAccount = "select-account" [Word, Word] [];
    RejectDirected = "reject-directed" [Word] [];
    ReturnAutodeposit = "return-autodeposit" [Word] ["auth": Word];
    RequestDirected = "request-directed" [Word, Word, Word, Cents] ["auth": Word, "source": Word, "as": Word];
    FulfilDirected = "fulfil-directed" [Word, Word] ["auth": Word];
    DeclineDirected = "decline-directed" [Word] [];
    ChangeDevice = "change-device" [Word] ["auth": Word];
    StatusRelay = "status-relay" [Word, Flag] [];
    CodeLockout = "code-lockout" [Threshold] [];

    Observe = "observe" [Level] [];
    Targets = "targets" [Level] ["min": Cents];
    Attack = "attack" [Level, Word] ["min": Cents, "exposed": Probability, "weak": Probability, "strong": Probability];
    AttackAnswer = "attack-answer" [Level, Word, Word, Text] [];
    Snoop = "snoop" [] [] + Email;
    Shareable = "shareable" [List, List, List, List] [];
}

impl Verb {
    pub fn from_name(name: &str) -> Option<Verb> {
        Verb::ALL.iter().copied().find(|v| v.as_str() == name)
    }

    /// Verbs that move money or announce a transfer.
    pub fn creates_transfer(self) -> bool {
        matches!(
            self,
            Verb::SendStandard
                | Verb::SendAutodeposit
                | Verb::RequestMoney
                | Verb::SendDirected
                | Verb::RequestDirected
        )
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioCommand {
    pub line: usize,
    pub verb: Verb,
    pub args: Vec<String>,
    pub options: BTreeMap<String, String>,
}

impl ScenarioCommand {
    pub fn arg(&self, i: usize) -> &str {
        &self.args[i]
    }

    pub fn opt(&self, key: &str) -> Option<&str> {
        self.options.get(key).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Scenario {
    pub name: String,
    /// Seed from a `seed` directive, if any.
    pub seed: Option<u64>,
    /// Account named by a `hijack` directive, if any.
    pub hijack: Option<String>,
    pub commands: Vec<ScenarioCommand>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Token {
    text: String,
    /// The token began with a quote, so it cannot be an option.
    leading_quote: bool,
}

fn tokenize(line_no: usize, line: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let mut chars = line.chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        let Some(&c) = chars.peek() else { break };
        if c == '#' {
            break;
        }
        let mut text = String::new();
        let leading_quote = c == '"';
        while let Some(&c) = chars.peek() {
            if c.is_whitespace() {
                break;
            }
            chars.next();
            if c == '"' {
                let start = text.clone();
                let mut closed = false;
                while let Some(c) = chars.next() {
                    match c {
                        '"' => {
                            closed = true;
                            break;
                        }
                        '\\' => match chars.next() {
                            Some(e @ ('"' | '\\')) => text.push(e),
                            Some(other) => {
                                text.push('\\');
                                text.push(other);
                            }
                            None => break,
                        },
                        _ => text.push(c),
                    }
                }
                if !closed {
                    return Err(ParseError {
                        line: line_no,
                        token: format!("{start}\"{}", &text[start.len()..]),
                        message: "unterminated quote".into(),
                    });
                }
            } else {
                text.push(c);
            }
        }
        out.push(Token { text, leading_quote });
    }
    Ok(out)
}

/// Splits `key:value` when the key is a lower-case option name.
fn split_option(token: &Token) -> Option<(String, String)> {
    if token.leading_quote {
        return None;
    }
    let (key, value) = token.text.split_once(':')?;
    let is_key = key.starts_with(|c: char| c.is_ascii_lowercase())
        && key.chars().all(|c| c.is_ascii_lowercase() || c == '-');
    is_key.then(|| (key.to_string(), value.to_string()))
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ParseError> {
    let mut scenario = Scenario::default();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let tokens = tokenize(line_no, raw)?;
        let Some((head, rest)) = tokens.split_first() else { continue };
        let err = |token: &str, message: String| ParseError {
            line: line_no,
            token: token.to_string(),
            message,
        };
        match head.text.as_str() {
            "scenario" => {
                let name = rest.first().ok_or_else(|| err(&head.text, "missing scenario name".into()))?;
                scenario.name = name.text.clone();
                continue;
            }
            "seed" => {
                let v = rest.first().ok_or_else(|| err(&head.text, "missing seed".into()))?;
                scenario.seed = Some(v.text.parse().map_err(|_| err(&v.text, "seed must be a 64-bit unsigned integer".into()))?);
                continue;
            }
            "hijack" => {
                let v = rest.first().ok_or_else(|| err(&head.text, "missing account".into()))?;
                scenario.hijack = Some(v.text.clone());
                continue;
            }
            _ => {}
        }
        let verb = Verb::from_name(&head.text).ok_or_else(|| err(&head.text, "unknown verb".into()))?;
        let mut args = Vec::new();
        let mut options = BTreeMap::new();
        for token in rest {
            match split_option(token) {
                Some((key, value)) => {
                    let kind = verb
                        .options()
                        .iter()
                        .find(|(k, _)| *k == key)
                        .map(|(_, kind)| *kind)
                        .ok_or_else(|| err(&token.text, format!("unknown option `{key}` for {verb}")))?;
                    kind.check(&value).map_err(|m| err(&token.text, m))?;
                    if options.insert(key.clone(), value).is_some() {
                        return Err(err(&token.text, format!("option `{key}` given twice")));
                    }
                }
                _ => {
                    let i = args.len();
                    let kind = verb
                        .positional()
                        .get(i)
                        .copied()
                        .or(verb.rest())
                        .ok_or_else(|| err(&token.text, format!("{verb} takes {} argument(s)", verb.positional().len())))?;
                    kind.check(&token.text).map_err(|m| err(&token.text, m))?;
                    args.push(token.text.clone());
                }
            }
        }
        if args.len() < verb.positional().len() {
            return Err(err(
                &head.text,
                format!("{verb} needs {} argument(s), got {}", verb.positional().len(), args.len()),
            ));
        }
        if verb == Verb::SendStandard {
            for key in ["q", "a", "class"] {
                if !options.contains_key(key) {
                    return Err(err(&head.text, format!("send-standard needs {key}:")));
                }
            }
        }
        if verb == Verb::IssueAuth && !options.contains_key("as") {
            return Err(err(&head.text, "issue-auth needs as:".into()));
        }
        scenario.commands.push(ScenarioCommand {
            line: line_no,
            verb,
            args,
            options,
        });
    }
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file() {
        let s = parse_scenario("").unwrap();
        assert!(s.commands.is_empty());
        assert_eq!(parse_scenario("# only a comment\n\n   \n").unwrap().commands.len(), 0);
    }

    #[test]
    fn standard_send_shape() {
        let s = parse_scenario(
            r#"send-standard acct1 "Michel Tremblay" mtremblay@example.test 10 "hi" q:"What is my name?" a:"Lea" class:exposed"#,
        )
        .unwrap();
        assert_eq!(s.commands.len(), 1);
        let c = &s.commands[0];
        assert_eq!(c.verb, Verb::SendStandard);
        assert_eq!(c.args, vec!["acct1", "Michel Tremblay", "mtremblay@example.test", "10", "hi"]);
        assert_eq!(c.opt("q"), Some("What is my name?"));
        assert_eq!(c.opt("a"), Some("Lea"));
        assert_eq!(c.opt("class"), Some("exposed"));
    }

    #[test]
    fn malformed_quote() {
        let e = parse_scenario("mint a 10\nsend-standard a \"Michel 5").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(e.message.contains("unterminated"));
        assert!(e.token.starts_with("\"Michel"));
    }

    #[test]
    fn unknown_verb_and_option() {
        let e = parse_scenario("teleport x").unwrap_err();
        assert_eq!((e.line, e.token.as_str()), (1, "teleport"));
        let e = parse_scenario("mint a 10 color:red").unwrap_err();
        assert!(e.message.contains("unknown option"));
    }

    #[test]
    fn arity_and_kinds() {
        assert!(parse_scenario("mint a").is_err());
        assert!(parse_scenario("mint a ten").is_err());
        assert!(parse_scenario("mint a 10 extra").is_err());
        assert!(parse_scenario("observe 6").is_err());
        assert!(parse_scenario("set-tls a@b.test maybe").is_err());
        assert!(parse_scenario("snoop a@b.test c@d.test").is_ok());
    }

    #[test]
    fn directives_and_comments() {
        let s = parse_scenario("scenario \"demo run\"\nseed 42 # fixed\nhijack marc-bmo\nadvance-clock 5 # later\n").unwrap();
        assert_eq!(s.name, "demo run");
        assert_eq!(s.seed, Some(42));
        assert_eq!(s.hijack.as_deref(), Some("marc-bmo"));
        assert_eq!(s.commands.len(), 1);
        assert_eq!(s.commands[0].line, 4);
    }

    #[test]
    fn quoted_text_with_colon_is_positional() {
        let s = parse_scenario(r#"deposit t1 acct "note: yes""#).unwrap();
        assert_eq!(s.commands[0].args[2], "note: yes");
        let s = parse_scenario(r#"deposit t1 acct "say \"hi\"""#).unwrap();
        assert_eq!(s.commands[0].args[2], "say \"hi\"");
    }
}
