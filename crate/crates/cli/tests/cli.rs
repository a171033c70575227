use std::path::Path;
use std::process::{Command, Output};

struct Env {
    dir: tempfile::TempDir,
}

impl Env {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("paper.txt"), b"a result worth stamping\n").unwrap();
        std::fs::write(dir.path().join("other.txt"), b"something else\n").unwrap();
        Env { dir }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_string_lossy().into_owned()
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_scholnet"))
            .current_dir(self.dir.path())
            .env("SCHOLNET_CONFIG", self.dir.path().join("scholnet.canon"))
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    }
}

fn fingerprint_line(handle: &str) -> String {
    handle.lines().find_map(|l| l.strip_prefix("Fingerprint: ")).unwrap().to_owned()
}

#[test]
fn usage_errors_exit_two() {
    let env = Env::new();
    assert_eq!(env.run(&["bogus"]).status.code(), Some(2));
    assert_eq!(env.run(&["stamp", "paper.txt", "--date", "yesterday"]).status.code(), Some(2));
    assert_eq!(env.run(&["--help"]).status.code(), Some(0));
}

#[test]
fn stamp_then_verify() {
    let env = Env::new();
    let coe = env.ok(&["stamp", "paper.txt", "--authority", "arxiv", "--date", "2024-01-02"]);
    let coe = coe.trim();
    let handle = env.ok(&["handle", "paper.txt"]);
    assert_eq!(handle.lines().count(), 4);
    assert!(handle.contains(coe));
    let fp = fingerprint_line(&handle);
    assert_eq!(env.ok(&["verify-coe", coe, &fp]), "valid\n");

    let other = fingerprint_line(&env.ok(&["handle", "other.txt"]));
    let out = env.run(&["verify-coe", coe, &other]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(String::from_utf8(out.stderr).unwrap(), "scholnet: invalid\n");
}

#[test]
fn linked_round_receipts_verify() {
    let env = Env::new();
    let fp = fingerprint_line(&env.ok(&["handle", "paper.txt"]));
    let other = fingerprint_line(&env.ok(&["handle", "other.txt"]));
    assert_eq!(env.ok(&["round-append", &fp, "--authority", "tsa"]), "pending round 0 leaf 0\n");
    env.ok(&["round-append", &other, "--authority", "tsa"]);
    let closed = env.ok(&["round-close", "--authority", "tsa"]);
    let mut lines = closed.lines();
    assert!(lines.next().unwrap().starts_with("round 0 "));
    for line in lines {
        let (leaf, receipt) = line.split_once('\t').unwrap();
        assert_eq!(env.ok(&["verify-coe", receipt, leaf]), "valid\n");
        let wrong = if leaf == fp { &other } else { &fp };
        assert_eq!(env.run(&["verify-coe", receipt, wrong]).status.code(), Some(1));
    }
}

#[test]
fn publish_and_fetch_back() {
    let env = Env::new();
    let handle = env.ok(&["publish", "paper.txt", "--title", "A result", "--author", "Ada Okonkwo"]);
    assert!(handle.starts_with("Title: A result\n"));
    let fp = fingerprint_line(&handle);
    env.ok(&["store", "get", &fp, "--out", "copy.txt"]);
    assert_eq!(std::fs::read(env.path("copy.txt")).unwrap(), std::fs::read(env.path("paper.txt")).unwrap());

    let a = env.ok(&["--format", "canonical", "handle", "paper.txt"]);
    let b = env.ok(&["--format", "canonical", "handle", "paper.txt"]);
    assert_eq!(a, b);
    assert!(a.starts_with('{'));
}

#[test]
fn missing_objects_are_domain_errors() {
    let env = Env::new();
    let absent = "sha256/0000000000000000000000000000000000000000000000000000000000000000";
    let out = env.run(&["store", "get", absent]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("scholnet: ") && err.lines().count() == 1, "{err}");
    assert!(!Path::new(&env.path("copy.txt")).exists());
}

#[test]
fn unknown_scenario_is_a_domain_error() {
    let env = Env::new();
    assert_eq!(env.run(&["simulate", "no_such", "--seed", "1"]).status.code(), Some(1));
}
