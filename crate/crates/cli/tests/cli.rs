use std::path::PathBuf;
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn etsim(args: &[&str], env_seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_etsim"));
    cmd.args(args).env_remove("ETSIM_SEED");
    if let Some(seed) = env_seed {
        cmd.env("ETSIM_SEED", seed);
    }
    cmd.output().expect("binary runs")
}

fn path(name: &str) -> String {
    fixtures().join(name).to_string_lossy().into_owned()
}

#[test]
fn check_passes_against_the_checked_in_fixture() {
    let out = etsim(&["check", &path("security.scn"), "--fixture", &path("security.report")], None);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("pass\t"));
}

#[test]
fn check_reports_the_first_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let edited = dir.path().join("edited.report");
    let text = std::fs::read_to_string(fixtures().join("security.report")).unwrap();
    std::fs::write(&edited, text.replacen("conservation\tok", "conservation\tlost", 1)).unwrap();
    let out = etsim(
        &["check", &path("security.scn"), "--fixture", edited.to_str().unwrap()],
        None,
    );
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("first divergence at line"), "{stdout}");
}

#[test]
fn run_writes_the_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("out.report");
    let out = etsim(&["run", &path("privacy.scn"), "--report", report.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0));
    let written = std::fs::read_to_string(&report).unwrap();
    assert_eq!(written, std::fs::read_to_string(fixtures().join("privacy.report")).unwrap());
}

#[test]
fn parse_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.scn");
    std::fs::write(&bad, "declare-fi rbc \"RBC legal\ntransmogrify\n").unwrap();
    let out = etsim(&["run", bad.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    let missing = dir.path().join("missing.scn");
    assert_eq!(etsim(&["run", missing.to_str().unwrap()], None).status.code(), Some(2));
}

#[test]
fn env_seed_is_the_fallback() {
    // guess.scn has no seed directive, so the environment decides
    let from_env = etsim(&["run", &path("guess.scn")], Some("31"));
    let explicit = etsim(&["run", &path("guess.scn"), "--seed", "31"], None);
    assert_eq!(from_env.status.code(), Some(0));
    assert_eq!(from_env.stdout, explicit.stdout);
    assert!(String::from_utf8_lossy(&from_env.stdout).contains("seed\t31\n"));

    let directive = etsim(&["run", &path("security.scn")], Some("31"));
    assert!(String::from_utf8_lossy(&directive.stdout).contains("seed\t327\n"));

    let bad = etsim(&["run", &path("guess.scn")], Some("lots"));
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn requirements_exit_code_follows_the_report() {
    let directed = etsim(&["requirements", &path("directed.scn")], None);
    assert_eq!(directed.status.code(), Some(0));
    assert_eq!(
        String::from_utf8_lossy(&directed.stdout),
        std::fs::read_to_string(fixtures().join("directed.requirements")).unwrap()
    );
    let legacy = etsim(&["requirements", &path("legacy.scn")], None);
    assert_eq!(legacy.status.code(), Some(1));
}

#[test]
fn attack_summarises_trials() {
    let out = etsim(
        &["attack", &path("directed.scn"), "--observer-level", "3", "--trials", "5", "--min-amount", "0"],
        None,
    );
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("outcome\tblocked\t5\n"), "{stdout}");
    assert!(stdout.contains("redirected_transfers\t0\n"));

    let weak = etsim(
        &["attack", &path("guess.scn"), "--observer-level", "3", "--trials", "3", "--weak", "1.0"],
        None,
    );
    assert!(String::from_utf8_lossy(&weak.stdout).contains("outcome\tredirected_deposit\t3\n"));

    let bad = etsim(&["attack", &path("guess.scn"), "--observer-level", "3", "--weak", "2"], None);
    assert_eq!(bad.status.code(), Some(2));
}
