use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use veiltrain::clear::mirror_pipeline;
use veiltrain::data::{synth_data, write_csv};
use veiltrain::ml::TrainingConfig;
use veiltrain::runtime::files::read_model_csv;
use veiltrain::RingConfig;

const BIN: &str = env!("CARGO_BIN_EXE_veiltrain");

fn veiltrain(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

/// Two owners holding 60 rows each, ingested into share files `a` and `b`.
fn two_owners(dir: &Path) {
    let ds = synth_data(120, 6, 4, 1.0);
    let top: Vec<usize> = (0..60).collect();
    let bottom: Vec<usize> = (60..120).collect();
    write_csv(dir.join("a.csv"), &ds.select_rows(&top)).unwrap();
    write_csv(dir.join("b.csv"), &ds.select_rows(&bottom)).unwrap();
    for (name, off, seed) in [("a", "0", "1"), ("b", "60", "2")] {
        ok(&veiltrain(
            dir,
            &[
                "ingest",
                "--owner-csv",
                &format!("{name}.csv"),
                "--out",
                name,
                "--row-offset",
                off,
                "--total-rows",
                "120",
                "--seed",
                seed,
            ],
        ));
    }
}

fn session(dir: &Path, name: &str, extra: &str) {
    let text = format!(
        "epochs = 20\nseed = 5\ndealer_seed = 9\nshares = a, b\nout_weights = w\ntimeout_ms = 5000\n\
         party0_addr = 127.0.0.1:{}\ndealer_addr = 127.0.0.1:{}\n{extra}",
        free_port(),
        free_port()
    );
    std::fs::write(dir.join(name), text).unwrap();
}

#[test]
fn ingest_train_open() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    two_owners(d);
    assert!(d.join("a.p0.shares").exists() && d.join("b.p1.shares").exists());
    session(d, "s.conf", "");
    ok(&veiltrain(d, &["train", "--config", "s.conf"]));
    ok(&veiltrain(d, &["open", "--weights", "w", "--out", "w.csv"]));
    let runs = read_model_csv(d.join("w.csv")).unwrap();
    let ds = synth_data(120, 6, 4, 1.0);
    let c = RingConfig::default();
    let tc = TrainingConfig {
        epochs: 20,
        ..TrainingConfig::default()
    };
    let want = mirror_pipeline(&c, &ds.x, &ds.t, ds.n, ds.m, &tc, 5, false).unwrap();
    assert_eq!(runs, vec![c.decode_vec(&want)]);
}

#[test]
fn separate_processes_agree_with_single_process() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    two_owners(d);
    session(d, "s.conf", "");
    ok(&veiltrain(d, &["train", "--config", "s.conf"]));
    let single = [
        std::fs::read(d.join("w.p0.weights")).unwrap(),
        std::fs::read(d.join("w.p1.weights")).unwrap(),
    ];
    std::fs::remove_file(d.join("w.p0.weights")).unwrap();
    std::fs::remove_file(d.join("w.p1.weights")).unwrap();

    let spawn = |role: &str| {
        Command::new(BIN)
            .current_dir(d)
            .args(["party", "--config", "s.conf", "--role", role])
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .unwrap()
    };
    let dealer = spawn("dealer");
    let p0 = spawn("party0");
    let p1 = spawn("party1");
    for child in [p0, p1, dealer] {
        ok(&child.wait_with_output().unwrap());
    }
    assert_eq!(std::fs::read(d.join("w.p0.weights")).unwrap(), single[0]);
    assert_eq!(std::fs::read(d.join("w.p1.weights")).unwrap(), single[1]);
}

#[test]
fn mismatched_configs_fail_loudly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    two_owners(d);
    session(d, "a.conf", "");
    let base = std::fs::read_to_string(d.join("a.conf")).unwrap();
    std::fs::write(d.join("b.conf"), base.replace("epochs = 20", "epochs = 21")).unwrap();

    let spawn = |conf: &str, role: &str| {
        Command::new(BIN)
            .current_dir(d)
            .args(["party", "--config", conf, "--role", role])
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .unwrap()
    };
    let dealer = spawn("a.conf", "dealer");
    let p0 = spawn("b.conf", "party0");
    let p1 = spawn("a.conf", "party1");
    let outs: Vec<Output> = [dealer, p0, p1].into_iter().map(|c| c.wait_with_output().unwrap()).collect();
    assert!(!outs[0].status.success());
    let err = String::from_utf8_lossy(&outs[0].stderr);
    assert!(err.contains("epochs"), "{err}");
    assert!(!outs[1].status.success());
}

#[test]
fn baseline_reports_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_csv(d.join("all.csv"), &synth_data(300, 5, 8, 1.0)).unwrap();
    let out = veiltrain(
        d,
        &[
            "baseline", "--csv", "all.csv", "--owners", "3", "--epsilon", "inf", "--epochs", "30", "--out", "m.csv",
            "--test-csv", "all.csv",
        ],
    );
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("accuracy"));
    assert!(d.join("m.csv").exists());
}

#[test]
fn bad_input_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = veiltrain(dir.path(), &["train", "--config", "missing.conf"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
}
