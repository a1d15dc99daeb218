//! Black-box tests of the `liftkit` binary: exit codes, artifact layout,
//! the scripted pipeline, and rerun determinism.

use std::path::Path;
use std::process::{Command, Output};

fn liftkit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_liftkit"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_exit(out: &Output, code: i32, ctx: &str) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "{ctx}: expected exit {code}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn synth_then_validate_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = liftkit(dir, &["synth", "--trials", "20", "--mode", "trainlike", "--seed", "7", "--out", "data"]);
    assert_exit(&out, 0, "synth");
    let recs = std::fs::read_dir(dir.join("data"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "rec"))
        .count();
    assert_eq!(recs, 20, "expected 20 recording files");

    let out = liftkit(dir, &["validate", "--data", "data", "--out", "out"]);
    assert_exit(&out, 0, "validate");
}

#[test]
fn train_with_missing_labels_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_exit(&liftkit(dir, &["synth", "--trials", "2", "--out", "data"]), 0, "synth");
    let label_file = std::fs::read_dir(dir.join("data"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|x| x == "labels"))
        .unwrap();
    std::fs::remove_file(label_file).unwrap();

    let out = liftkit(dir, &["train", "--data", "data", "--out", "out", "--epochs", "1"]);
    assert_exit(&out, 2, "train without labels");
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing label file"));
    assert!(!dir.join("out/model.json").exists(), "no model artifact on failure");
}

fn eval_f1(catalog: &Path) -> f64 {
    let text = std::fs::read_to_string(catalog).unwrap();
    let row = text.lines().nth(1).expect("one catalog row");
    row.split(',').nth(6).unwrap().parse().unwrap()
}

#[test]
fn scripted_pipeline_reaches_high_f1() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_exit(&liftkit(dir, &["synth", "--trials", "10", "--seed", "3", "--out", "data"]), 0, "synth");
    assert_exit(
        &liftkit(dir, &["window", "--data", "data", "--out", "out", "--window-len", "10", "--stride", "3"]),
        0,
        "window",
    );
    assert_exit(
        &liftkit(
            dir,
            &[
                "train",
                "--data",
                "out/dataset.ds",
                "--out",
                "out",
                "--lstm-hidden",
                "16",
                "--epochs",
                "25",
            ],
        ),
        0,
        "train",
    );
    assert_exit(
        &liftkit(
            dir,
            &["eval", "--model", "out/model.json", "--data", "out/dataset.ds", "--out", "out"],
        ),
        0,
        "eval",
    );
    let f1 = eval_f1(&dir.join("out/eval_catalog.csv"));
    assert!(f1 >= 0.99, "pipeline f1 {f1}");
    assert!(dir.join("out/eval_manifest.json").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_exit(&liftkit(dir, &["synth", "--trials", "4", "--seed", "9", "--out", "data"]), 0, "synth");

    let run = |out_dir: &str| {
        assert_exit(
            &liftkit(
                dir,
                &[
                    "ablate",
                    "--data",
                    "data",
                    "--out",
                    out_dir,
                    "--seeds",
                    "0,1",
                    "--lstm-hidden",
                    "4",
                    "--epochs",
                    "2",
                ],
            ),
            0,
            "ablate",
        );
        std::fs::read(dir.join(out_dir).join("ablation_catalog.csv")).unwrap()
    };
    assert_eq!(run("out_a"), run("out_b"), "ablation catalogs differ between reruns");

    // synth reruns reproduce the corpus byte for byte
    assert_exit(&liftkit(dir, &["synth", "--trials", "4", "--seed", "9", "--out", "data2"]), 0, "synth rerun");
    for entry in std::fs::read_dir(dir.join("data")).unwrap() {
        let p = entry.unwrap().path();
        let ext = p.extension().and_then(|x| x.to_str());
        if !matches!(ext, Some("rec" | "labels")) {
            continue; // the run manifest records wall time and may differ
        }
        let twin = dir.join("data2").join(p.file_name().unwrap());
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&twin).unwrap(), "{p:?}");
    }
}

#[test]
fn usage_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_exit(&liftkit(dir, &["no-such-command"]), 1, "unknown subcommand");
    assert_exit(&liftkit(dir, &["eval", "--data", "data"]), 1, "eval without --model");
    assert_exit(&liftkit(dir, &["--help"]), 0, "help");
}

#[test]
fn synth_does_not_mutate_inputs_and_flags_override_config() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(
        dir.join("lk.toml"),
        "[synth]\ntrials = 2\nseed = 1\n\n[paths]\nout = \"cfg_out\"\n",
    )
    .unwrap();
    // config alone: 2 trials into cfg_out
    assert_exit(&liftkit(dir, &["--config", "lk.toml", "synth"]), 0, "synth via config");
    let count = |d: &str| {
        std::fs::read_dir(dir.join(d))
            .unwrap()
            .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "rec"))
            .count()
    };
    assert_eq!(count("cfg_out"), 2);
    // flag wins over config
    assert_exit(
        &liftkit(dir, &["--config", "lk.toml", "synth", "--trials", "3", "--out", "flag_out"]),
        0,
        "synth with flag override",
    );
    assert_eq!(count("flag_out"), 3);
}
