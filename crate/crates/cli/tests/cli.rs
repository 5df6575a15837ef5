use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use witnesskit::channel::{broadcast_abelian, margin};
use witnesskit::io::{load, save};
use witnesskit::sampling::random_channel;
use witnesskit::{Algebra, Factor, WitnessForm};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_witnesskit"))
        .args(args)
        .current_dir(dir)
        .env_remove("WITNESSKIT_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn export(dir: &Path, object: &str, extra: &[&str], file: &str) -> PathBuf {
    let mut args = vec!["export", object, "--output", file];
    args.extend_from_slice(extra);
    let o = run(&args, dir);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    dir.join(file)
}

/// Parse `e*=<value>` from a check report.
fn slack(report: &str) -> f64 {
    let at = report.find("e*=").expect("verdict row") + 3;
    report[at..].split_whitespace().next().unwrap().parse().unwrap()
}

#[test]
fn identity_pair_is_incompatible() {
    let dir = TempDir::new().unwrap();
    export(dir.path(), "identity", &[], "id.json");
    let o = run(&["check", "id.json", "id.json", "--emit-witness", "w.json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("INCOMPATIBLE"), "{out}");
    assert!(slack(&out) > 0.01);
    let w: WitnessForm = load(dir.path().join("w.json")).unwrap();
    let id: witnesskit::Channel = load(dir.path().join("id.json")).unwrap();
    assert!(w.evaluate(&id, &id).unwrap() < -0.01);
}

#[test]
fn broadcast_margins_are_compatible() {
    let dir = TempDir::new().unwrap();
    let a = Algebra::abelian(3);
    let b = broadcast_abelian(3);
    save(&margin(&b, Factor::First, &a, &a).unwrap(), dir.path().join("m1.json")).unwrap();
    save(&margin(&b, Factor::Second, &a, &a).unwrap(), dir.path().join("m2.json")).unwrap();
    let o = run(&["check", "m1.json", "m2.json", "--emit-joint", "joint.json"], dir.path());
    assert!(stdout(&o).contains(" COMPATIBLE, e*="), "{}", stdout(&o));
    let joint: witnesskit::Channel = load(dir.path().join("joint.json")).unwrap();
    assert_eq!(joint.output(), &Algebra::abelian(9));
}

#[test]
fn noisy_mub_below_threshold_is_compatible() {
    let dir = TempDir::new().unwrap();
    export(dir.path(), "mub-m-channel", &["--gamma", "0.70"], "m.json");
    export(dir.path(), "mub-n-channel", &["--gamma", "0.70"], "n.json");
    let o = run(&["check", "m.json", "n.json"], dir.path());
    assert!(stdout(&o).contains(" COMPATIBLE"), "{}", stdout(&o));
    let o = run(&["witness", "from-pair", "m.json", "n.json"], dir.path());
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("compatible"));
}

#[test]
fn scan_gamma_localizes_boundary() {
    let dir = TempDir::new().unwrap();
    let o = run(&["scan-gamma", "--d", "2"], dir.path());
    let out = stdout(&o);
    let line = out.lines().find(|l| l.starts_with("|estimate - gamma(d)|")).unwrap();
    let err: f64 = line.split_whitespace().last().unwrap().parse().unwrap();
    assert!(err < 1e-3, "{out}");
    let o = run(&["scan-gamma", "--d", "2", "--lo", "0.6", "--hi", "0.6"], dir.path());
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with("probe")).count(), 1, "{out}");
    assert!(out.contains("COMPATIBLE"));
    assert_eq!(run(&["scan-gamma", "--d", "5"], dir.path()).status.code(), Some(2));
}

#[test]
fn clone_witness_vanishes_on_cloning_margins() {
    let dir = TempDir::new().unwrap();
    export(dir.path(), "xi-cc-clone", &[], "w.json");
    export(dir.path(), "cloning-margin", &[], "c.json");
    let out = stdout(&run(&["witness", "eval", "w.json", "c.json", "c.json"], dir.path()));
    let line = out.lines().find(|l| l.starts_with("value")).unwrap();
    let v: f64 = line.split_whitespace().last().unwrap().parse().unwrap();
    assert!(v.abs() < 1e-9, "{out}");
}

#[test]
fn task_roundtrip_through_files() {
    let dir = TempDir::new().unwrap();
    export(dir.path(), "xi-mm", &[], "w.json");
    let o = run(&["witness", "to-task", "w.json", "--output", "task.json"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    let o = run(&["witness", "from-task", "task.json", "--output", "back.json"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    let w: WitnessForm = load(dir.path().join("w.json")).unwrap();
    let back: WitnessForm = load(dir.path().join("back.json")).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(11);
    let (q, x) = (Algebra::full(2), Algebra::abelian(2));
    for _ in 0..30 {
        let (c1, c2) = (random_channel(&mut r, &q, &x).unwrap(), random_channel(&mut r, &q, &x).unwrap());
        assert_eq!(w.detects(&c1, &c2).unwrap(), back.detects(&c1, &c2).unwrap());
    }
}

#[test]
fn lift_and_tighten_write_witnesses() {
    let dir = TempDir::new().unwrap();
    export(dir.path(), "xi-mm", &[], "w.json");
    export(dir.path(), "mub-n", &["--gamma", "1"], "p.json");
    let o = run(&["witness", "lift", "w.json", "p.json", "--slot", "2", "--output", "mc.json"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    let mc: WitnessForm = load(dir.path().join("mc.json")).unwrap();
    assert_eq!(mc.out2(), &Algebra::full(2));
    let o = run(&["witness", "tighten", "mc.json"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("PASS [tight]"));
    let noisy = export(dir.path(), "mub-n", &["--gamma", "0.8"], "noisy.json");
    let o = run(&["witness", "lift", "w.json", noisy.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reproduce_cloning_section_passes() {
    let dir = TempDir::new().unwrap();
    let o = run(&["reproduce", "--section", "7"], dir.path());
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{out}");
    for row in ["[spectrum]", "[tightness]", "[inequivalence]"] {
        assert!(out.contains(&format!("PASS {row}")), "{out}");
    }
    assert!(!out.contains("FAIL"));
    assert_eq!(run(&["reproduce", "--section", "5"], dir.path()).status.code(), Some(2));
}

#[test]
fn reproduce_mub_section_passes() {
    let dir = TempDir::new().unwrap();
    let o = run(&["reproduce", "--section", "6"], dir.path());
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{out}");
    for row in ["[xi_mm zero]", "[gamma threshold]", "[xi_mc zero]"] {
        assert!(out.contains(&format!("PASS {row}")), "{out}");
    }
}

#[test]
fn parse_errors_carry_location() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{\n  \"in\": {\"blocks\": [2]},\n  \"out\": nope\n}\n").unwrap();
    export(dir.path(), "identity", &[], "id.json");
    let o = run(&["check", "bad.json", "id.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    std::fs::write(
        dir.path().join("neg.json"),
        r#"{"in":{"blocks":[1]},"out":{"blocks":[1]},"choi":{"0,0":[[[-1,0]]]}}"#,
    )
    .unwrap();
    let o = run(&["check", "neg.json", "id.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not a channel"));
}

#[test]
fn reports_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    export(dir.path(), "identity", &[], "id.json");
    export(dir.path(), "xi-mm", &[], "w.json");
    for args in [
        vec!["check", "id.json", "id.json"],
        vec!["witness", "to-task", "w.json"],
        vec!["reproduce", "--section", "7"],
    ] {
        let a = run(&args, dir.path());
        let b = run(&args, dir.path());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        let mut threaded = args.clone();
        threaded.extend(["--jobs", "3"]);
        let c = run(&threaded, dir.path());
        let strip = |o: &Output| stdout(o).lines().skip(1).collect::<Vec<_>>().join("\n");
        assert_eq!(strip(&a), strip(&c), "{args:?} with --jobs 3");
    }
}
