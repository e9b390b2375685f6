//! End-to-end exercises of the command-line surface, run in-process.

use curricop::cli::run_from;
use std::fs;
use std::path::{Path, PathBuf};

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["curricop"];
    argv.extend_from_slice(args);
    run_from(argv)
}

fn cnf_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "cnf"))
        .collect();
    files.sort();
    files
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["frobnicate"]), 2);
    assert_eq!(run(&["generate", "--stage", "7", "--split", "train", "--out", "x"]), 2);
    assert_eq!(run(&["--help"]), 0);
}

#[test]
fn malformed_and_unknown_set_overrides_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    let out = out.to_str().unwrap();
    let base = ["generate", "--stage", "1", "--split", "train", "--out", out];
    let mut args = base.to_vec();
    args.extend_from_slice(&["--set", "no_equals_sign"]);
    assert_eq!(run(&args), 2);
    let mut args = base.to_vec();
    args.extend_from_slice(&["--set", "train.bogus=1"]);
    assert_eq!(run(&args), 2);
}

#[test]
fn generate_writes_problems_and_regenerates_identically() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        assert_eq!(
            run(&[
                "generate",
                "--stage",
                "1",
                "--split",
                "train",
                "--out",
                out.to_str().unwrap(),
            ]),
            0
        );
    }
    let files = cnf_files(&a);
    assert_eq!(files.len(), 2, "stage 1 train split has two statements");
    assert!(a.join("manifest.tsv").exists());
    for f in &files {
        let name = f.file_name().unwrap();
        let left = fs::read_to_string(f).unwrap();
        let right = fs::read_to_string(b.join(name)).unwrap();
        assert_eq!(left, right, "regeneration is byte-identical");
    }
    assert_eq!(
        fs::read_to_string(a.join("manifest.tsv")).unwrap(),
        fs::read_to_string(b.join("manifest.tsv")).unwrap()
    );
}

#[test]
fn prove_then_replay_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_eq!(
        run(&[
            "generate",
            "--stage",
            "1",
            "--split",
            "train",
            "--out",
            data.to_str().unwrap(),
        ]),
        0
    );
    let problem = cnf_files(&data).remove(0);
    let proof = dir.path().join("found.proof");
    assert_eq!(
        run(&[
            "prove",
            "--mode",
            "id",
            "--max-depth",
            "12",
            "--out",
            proof.to_str().unwrap(),
            problem.to_str().unwrap(),
        ]),
        0
    );
    let text = fs::read_to_string(&proof).unwrap();
    assert!(text.contains('\t'), "proof file is a store table: {text}");

    assert_eq!(
        run(&[
            "replay",
            "--problem",
            problem.to_str().unwrap(),
            "--proof",
            proof.to_str().unwrap(),
        ]),
        0
    );

    // Truncating the action list breaks the proof; replay must fail.
    let broken = dir.path().join("broken.proof");
    let mut fields: Vec<String> = text.trim_end().split('\t').map(String::from).collect();
    let actions: Vec<String> = fields[2].split(' ').map(String::from).collect();
    fields[2] = actions[..actions.len() - 1].join(" ");
    fields[1] = (actions.len() - 1).to_string();
    fs::write(&broken, format!("{}\n", fields.join("\t"))).unwrap();
    assert_eq!(
        run(&[
            "replay",
            "--problem",
            problem.to_str().unwrap(),
            "--proof",
            broken.to_str().unwrap(),
        ]),
        1
    );
}

#[test]
fn train_evaluate_and_features_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_eq!(
        run(&[
            "generate",
            "--stage",
            "1",
            "--split",
            "train",
            "--out",
            data.to_str().unwrap(),
        ]),
        0
    );
    let rundir = dir.path().join("run");
    let small = [
        "--set", "features.block_dim=32",
        "--set", "learner.hidden=8",
        "--set", "learner.hidden_layers=1",
        "--set", "learner.minibatch=16",
        "--set", "learner.epochs=1",
        "--set", "env.step_limit=10",
        "--set", "train.episodes_per_update=4",
        "--set", "train.step_budget=40",
        "--set", "eval.attempts=2",
        "--set", "eval.step_limit=10",
    ];
    let mut args = vec![
        "train",
        "--problems",
        data.to_str().unwrap(),
        "--out",
        rundir.to_str().unwrap(),
    ];
    args.extend_from_slice(&small);
    assert_eq!(run(&args), 0);
    let checkpoint = rundir.join("checkpoint");
    assert!(checkpoint.join("params.bin").exists());
    assert!(checkpoint.join("manifest.txt").exists());
    assert!(rundir.join("proofs.tsv").exists());
    let log = fs::read_to_string(rundir.join("train_log.tsv")).unwrap();
    assert!(log.starts_with("steps\tcurriculum\tsuccess_rate\tmean_reward\tproofs_known\n"));
    assert!(log.lines().count() >= 2, "at least one batch row: {log}");

    let metrics = dir.path().join("metrics.tsv");
    let hist = dir.path().join("hist.tsv");
    let mut args = vec![
        "evaluate",
        "--problems",
        data.to_str().unwrap(),
        "--checkpoint",
        checkpoint.to_str().unwrap(),
        "--out",
        metrics.to_str().unwrap(),
        "--histogram",
        hist.to_str().unwrap(),
        "--bounds",
        "5,10",
    ];
    args.extend_from_slice(&small);
    assert_eq!(run(&args), 0);
    let table = fs::read_to_string(&metrics).unwrap();
    assert!(table.starts_with("problem_id\tsolved\tbest_length\tattempts_used\n"));
    assert_eq!(table.lines().count(), 4, "two problems plus summary: {table}");
    assert!(table.lines().last().unwrap().starts_with("ALL\t"));
    let hist_text = fs::read_to_string(&hist).unwrap();
    assert!(hist_text.starts_with("length_bound\tproofs_within\n"));
    assert_eq!(hist_text.lines().count(), 3);

    let problem = cnf_files(&data).remove(0);
    let mut args = vec!["features", problem.to_str().unwrap()];
    args.extend_from_slice(&small);
    assert_eq!(run(&args), 0);
}

#[test]
fn config_file_and_overrides_compose() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "train.step_budget = 8\ntrain.episodes_per_update = 2\n# comment\n").unwrap();
    let data = dir.path().join("data");
    assert_eq!(
        run(&[
            "generate",
            "--stage",
            "1",
            "--split",
            "train",
            "--out",
            data.to_str().unwrap(),
        ]),
        0
    );
    let rundir = dir.path().join("run");
    assert_eq!(
        run(&[
            "train",
            "--problems",
            data.to_str().unwrap(),
            "--out",
            rundir.to_str().unwrap(),
            "--config",
            cfg.to_str().unwrap(),
            "--set",
            "features.block_dim=32",
            "--set",
            "learner.hidden=8",
            "--set",
            "learner.hidden_layers=1",
            "--set",
            "env.step_limit=5",
        ]),
        0
    );
    // Missing config file is an operational failure, not a usage error.
    assert_eq!(
        run(&[
            "train",
            "--problems",
            data.to_str().unwrap(),
            "--out",
            rundir.to_str().unwrap(),
            "--config",
            dir.path().join("absent.cfg").to_str().unwrap(),
        ]),
        1
    );
}
