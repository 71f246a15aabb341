use std::fs;
use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
[env.grid]
rows = 12
cols = 8

[layout]
conv_features = [3]
kernel = 3
actor_hidden = [16]
critic_hidden = [16]

[agent]
batch_size = 16
replay_capacity = 5000

[preinit]
episodes = 1
epochs = 1
batch_size = 16

[imitation]
demo_episodes = 1
dagger_episodes = 1
epochs = 1
batch_size = 16
"#;

fn hugdrl(dir: &Path, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_hugdrl")).args(args).env("HUGDRL_OUT", dir.join("root")).current_dir(dir).output().unwrap();
    out
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = hugdrl(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    dir
}

const CFG: [&str; 4] = ["--profile", "ci", "--config", "tiny.toml"];

#[test]
fn repeated_train_and_eval_reproduce_their_files() {
    let dir = setup();
    let d = dir.path();
    for run in ["a", "b"] {
        let mut args = vec!["train", "--variant", "hug", "--mode", "continuous", "--seed", "4", "--episodes", "3", "--out", run];
        args.extend(CFG);
        ok(d, &args);
        let ckpt = format!("{run}/final");
        let mut args = vec!["eval", "--checkpoint", ckpt.as_str(), "--scenarios", "1-2", "--out", run];
        args.extend(CFG);
        ok(d, &args);
    }
    for f in ["metrics.csv", "guidance.csv", "eval.csv", "final/actor.json"] {
        let a = fs::read(d.join("a").join(f)).unwrap();
        let b = fs::read(d.join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs between identical invocations");
    }
    let metrics = fs::read_to_string(d.join("a/metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 4);
    assert!(metrics.lines().nth(1).unwrap().starts_with("hug-s0-continuous-proficient-sh0-preinit-seed4,4,0,"));
    let eval = fs::read_to_string(d.join("a/eval.csv")).unwrap();
    assert_eq!(eval.lines().count(), 3);
}

#[test]
fn the_output_root_comes_from_the_environment() {
    let dir = setup();
    let d = dir.path();
    let mut args = vec!["train", "--variant", "vanilla", "--guidance", "none", "--episodes", "1", "--no-preinit"];
    args.extend(CFG);
    ok(d, &args);
    assert!(d.join("root/vanilla-s0-unguided-sh0-cold-seed0/manifest.json").is_file());
}

#[test]
fn the_scripted_driver_evaluates_cleanly() {
    let dir = setup();
    let out = ok(dir.path(), &["eval", "--oracle", "--scenarios", "1,3", "--profile", "ci"]);
    assert!(out.contains("aggregate success rate 1.000"), "{out}");
}

#[test]
fn bad_inputs_fail_loudly() {
    let dir = setup();
    let d = dir.path();
    fs::write(d.join("typo.toml"), "[agent]\nbatch_sise = 4\n").unwrap();
    let out = hugdrl(d, &["train", "--profile", "ci", "--config", "typo.toml"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!hugdrl(d, &["eval", "--checkpoint", "nowhere"]).status.success());
    assert!(!hugdrl(d, &["train", "--guidance", "live"]).status.success());
    assert!(!hugdrl(d, &["train", "--variant", "td4"]).status.success());
    assert!(!hugdrl(d, &["eval", "--oracle", "--scenarios", "5-1"]).status.success());
}

#[test]
fn serve_reports_a_taken_port() {
    let dir = setup();
    let held = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = held.local_addr().unwrap().port().to_string();
    let out = hugdrl(dir.path(), &["serve", "--port", &port]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot listen"));
}

#[test]
fn imitation_commands_write_actors() {
    let dir = setup();
    let d = dir.path();
    let mut args = vec!["demo-collect", "--scenario", "1", "--out", "demos"];
    args.extend(CFG);
    ok(d, &args);
    let mut args = vec!["il-train", "--demos", "demos/demos.csv", "--out", "il"];
    args.extend(CFG);
    ok(d, &args);
    let mut args = vec!["dagger-train", "--scenario", "1", "--out", "dagger"];
    args.extend(CFG);
    ok(d, &args);
    assert!(d.join("il/actor.json").is_file());
    assert!(d.join("dagger/actor.json").is_file() && d.join("dagger/demos.csv").is_file());
    ok(d, &["scenarios", "--out", "sc"]);
    assert_eq!(fs::read_dir(d.join("sc")).unwrap().count(), 6);
}
