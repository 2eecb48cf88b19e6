use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fts_core::io::read_dataset;
use fts_core::report::parse_sweep_table;

fn fts(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fts"))
        .args(args)
        .env_remove("FTS_SEED")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = fts(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn synth(dir: &Path, n: usize) -> (String, String) {
    let (data, groups) = (p(dir, "d.fts"), p(dir, "groups.tsv"));
    ok(&["synth", "builtin:stationary6", &data, "--n", &n.to_string(), "--seed", "3", "--groups-out", &groups]);
    (data, groups)
}

#[test]
fn shapes_reports_parameter_counts() {
    let text = ok(&["shapes", "--arch", "full"]);
    assert!(text.contains("channel pipe: 32,936"));
    assert!(text.contains("joined pipe: 64,371"));
    assert!(text.contains("41×1×10"));
    assert!(ok(&["shapes", "--arch", "reference"]).contains("channel pipe:"));
}

#[test]
fn exit_codes() {
    assert_eq!(fts(&[]).status.code(), Some(1));
    assert_eq!(fts(&["shapes", "--arch", "huge"]).status.code(), Some(1));
    assert_eq!(fts(&["train"]).status.code(), Some(1));
    assert_eq!(fts(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let missing = p(dir.path(), "missing.fts");
    let out = fts(&["evaluate", &missing, &missing]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(String::from_utf8_lossy(&out.stderr).lines().count(), 1);

    let (data, _) = synth(dir.path(), 12);
    assert_eq!(fts(&["balance", &data, &p(dir.path(), "b.fts"), "--alpha", "2"]).status.code(), Some(2));
    assert_eq!(fts(&["split", &data, "--folds", "7", "--train-out", "a", "--val-out", "b"]).status.code(), Some(2));

    let out = fts(&["train", &data, &p(dir.path(), "w.bin"), "--steps", "5", "--batch", "2", "--lr", "1e300"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.path().join("w.bin").exists());
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (p(dir.path(), "a.fts"), p(dir.path(), "b.fts"));
    let out = Command::new(env!("CARGO_BIN_EXE_fts"))
        .args(["synth", "builtin:sleep6", &a, "--n", "6"])
        .env("FTS_SEED", "42")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed 42"));
    ok(&["synth", "builtin:sleep6", &b, "--n", "6", "--seed", "42"]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let out = Command::new(env!("CARGO_BIN_EXE_fts"))
        .args(["synth", "builtin:sleep6", &a, "--n", "6", "--seed", "1"])
        .env("FTS_SEED", "42")
        .output()
        .unwrap();
    assert!(!String::from_utf8_lossy(&out.stderr).contains("FTS_SEED"));
}

#[test]
fn zero_alpha_zero_beta_balance_is_a_permutation() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = synth(dir.path(), 30);
    let out = p(dir.path(), "b.fts");
    let text = ok(&["balance", &data, &out, "--alpha", "0", "--beta", "0", "--seed", "4"]);
    assert!(text.starts_with("before\t"));
    let (a, b) = (read_dataset(Path::new(&data)).unwrap(), read_dataset(Path::new(&out)).unwrap());
    let key = |d: &fts_core::Dataset| {
        let mut k: Vec<(Vec<u64>, usize)> = d
            .epochs()
            .iter()
            .map(|e| (e.channels().iter().flat_map(|c| c.samples().iter().map(|v| v.to_bits())).collect(), e.label()))
            .collect();
        k.sort();
        k
    };
    assert_eq!(key(&a), key(&b));
}

#[test]
fn surrogate_command_writes_iaaft_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = synth(dir.path(), 3);
    let report = p(dir.path(), "r.tsv");
    ok(&["surrogate", &data, &p(dir.path(), "s.fts"), "--kind", "iaaft", "--seed", "1", "--iters", "20", "--report", &report]);
    let text = std::fs::read_to_string(&report).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 4);
    assert!(text.starts_with("epoch\tchannel\titerations\tdiscrepancy\tstop\n"));
    let s = read_dataset(&dir.path().join("s.fts")).unwrap();
    assert_eq!(s.labels(), read_dataset(Path::new(&data)).unwrap().labels());
}

#[test]
fn train_evaluate_condconf_saliency_chain() {
    let dir = tempfile::tempdir().unwrap();
    let (data, groups) = synth(dir.path(), 36);
    let (tr, va) = (p(dir.path(), "train.fts"), p(dir.path(), "val.fts"));
    ok(&["split", &data, "--folds", "2", "--fold", "1", "--groups-file", &groups, "--train-out", &tr, "--val-out", &va]);
    let w = p(dir.path(), "w.bin");
    let trace = ok(&["train", &tr, &w, "--steps", "30", "--batch", "4", "--seed", "2"]);
    assert_eq!(trace.lines().count(), 31);

    let table = ok(&["evaluate", &va, &w]);
    assert!(table.contains("# counts") && table.contains("macro_f1\t"));
    let out = p(dir.path(), "cc.tsv");
    // An untrained-looking model may get nothing right; both outcomes are well formed.
    let cc = fts(&["condconf", &va, &w, "--seed", "1", "--out", &out]);
    assert!(cc.status.code() == Some(0) || cc.status.code() == Some(2));

    let sal = p(dir.path(), "s.tsv");
    ok(&["saliency", &va, &w, "--reps", "3", "--window", "10", "--step", "5", "--seed", "1", "--out", &sal]);
    let lines: Vec<String> = std::fs::read_to_string(&sal).unwrap().lines().map(String::from).collect();
    assert_eq!(lines.len(), 2 + 5);
    assert!(lines[1].starts_with("baseline\t"));
    ok(&["saliency", &va, &w, "--method", "zero", "--reps", "1", "--window", "10", "--step", "10", "--channels", "EOG"]);
    assert_eq!(fts(&["saliency", &va, &w, "--epoch-index", "9999"]).status.code(), Some(2));
    assert_eq!(fts(&["saliency", &va, &w, "--channels", "ECG"]).status.code(), Some(2));
}

#[test]
fn sweep_table_has_one_row_per_alpha_and_fold() {
    let dir = tempfile::tempdir().unwrap();
    let (data, groups) = synth(dir.path(), 120);
    let out = PathBuf::from(p(dir.path(), "sweep.tsv"));
    ok(&[
        "sweep", &data, "--alphas", "0,0.5,1", "--folds", "2", "--groups-file", &groups, "--steps", "3", "--batch", "2",
        "--seed", "5", "--out", out.to_str().unwrap(),
    ]);
    let (vocab, rows) = parse_sweep_table(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(vocab.len(), 6);
    assert_eq!(rows.len(), 3 * 2);
    assert_eq!(rows.iter().map(|r| r.fold).collect::<Vec<_>>(), vec![0, 0, 0, 1, 1, 1]);
}
