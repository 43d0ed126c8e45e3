use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use concept_tagger::cli::{self, EXIT_DATA, EXIT_OK, EXIT_USAGE};

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
        .display()
        .to_string()
}

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn run(args: &[&str]) -> Run {
    let argv = std::iter::once("concept-tagger").chain(args.iter().copied());
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli::run(argv, &mut out, &mut err);
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn p(path: &Path) -> String {
    path.display().to_string()
}

#[test]
fn stats_on_fixture_matches_hand_count() {
    let r = run(&["stats", &data("stats_fixture.conll")]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let value = |label: &str| -> usize {
        let line = r.out.lines().find(|l| l.starts_with(label)).unwrap();
        line.split_whitespace().last().unwrap().parse().unwrap()
    };
    assert_eq!(value("Total number of notes"), 3);
    assert_eq!(value("Number of sentences before chunking"), 7);
    // 25 tokens need two windows, every other sentence fits in one
    assert_eq!(value("Number of sentences after chunking"), 8);
    assert_eq!(value("Number of annotated concepts"), 11);
    let histogram: Vec<(usize, usize)> = r
        .out
        .lines()
        .skip_while(|l| !l.starts_with("Length"))
        .skip(1)
        .map(|l| {
            let mut it = l.split_whitespace().map(|x| x.parse().unwrap());
            (it.next().unwrap(), it.next().unwrap())
        })
        .collect();
    let lengths = [2, 3, 6, 8, 10, 12, 25];
    assert_eq!(histogram, lengths.iter().map(|&l| (l, 1)).collect::<Vec<_>>());
}

#[test]
fn stats_on_empty_and_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.conll");
    fs::write(&empty, "").unwrap();
    let r = run(&["stats", &p(&empty)]);
    assert_eq!(r.code, EXIT_OK);
    let values: Vec<&str> = r
        .out
        .lines()
        .skip(1)
        .take(4)
        .map(|l| l.split_whitespace().last().unwrap())
        .collect();
    assert_eq!(values, ["0"; 4]);

    let r = run(&["stats", &p(&dir.path().join("missing.conll"))]);
    assert_eq!(r.code, EXIT_DATA);
    assert!(r.err.contains("missing.conll"));
}

#[test]
fn stats_reports_line_of_malformed_input() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.conll");
    fs::write(&bad, "fever NN B\ncough NN X\n").unwrap();
    let r = run(&["stats", &p(&bad)]);
    assert_eq!(r.code, EXIT_DATA);
    assert!(r.err.contains('2'), "{}", r.err);
}

const GOLD: &str = "a DT O\nb NN B\nc NN I\nd VB O\ne NN B\nf NN O\ng NN O\n";
// gold [1,3) [4,5); system [1,3) hit, [3,4) and [5,7) spurious, [4,5) missed
const SYSTEM: &str = "a DT O\nb NN B\nc NN I\nd VB B\ne NN O\nf NN B\ng NN I\n";

#[test]
fn eval_known_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (gold, system) = (dir.path().join("gold.conll"), dir.path().join("system.conll"));
    fs::write(&gold, GOLD).unwrap();
    fs::write(&system, SYSTEM).unwrap();
    let r = run(&["eval", &p(&gold), &p(&system), "--porcelain"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let row: Vec<&str> = r.out.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(&row[2..5], ["0.33", "0.50", "0.40"]);
    for kv in ["true_positives=1", "false_positives=2", "false_negatives=1"] {
        assert!(r.out.lines().any(|l| l == kv), "{kv} missing from\n{}", r.out);
    }

    let same = run(&["eval", &p(&gold), &p(&gold)]);
    let row: Vec<&str> = same.out.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(&row[2..], ["1.00", "1.00", "1.00", "1.00"]);
}

#[test]
fn eval_rejects_misaligned_files() {
    let dir = tempfile::tempdir().unwrap();
    let (gold, system) = (dir.path().join("gold.conll"), dir.path().join("system.conll"));
    fs::write(&gold, GOLD).unwrap();
    fs::write(&system, "a DT O\nb NN B\n").unwrap();
    let r = run(&["eval", &p(&gold), &p(&system)]);
    assert_eq!(r.code, EXIT_DATA);
    assert!(!r.err.is_empty());
    fs::write(&system, format!("{GOLD}\nz NN O\n")).unwrap();
    assert_eq!(run(&["eval", &p(&gold), &p(&system)]).code, EXIT_DATA);
}

fn train_args(dir: &Path, extra: &[&str]) -> Vec<String> {
    let mut args: Vec<String> = vec![
        "train".into(),
        "--corpus".into(),
        data("overfit.conll"),
        "--embeddings".into(),
        data("overfit.vec"),
        "--model".into(),
        p(&dir.join("model.ctg")),
        "--history".into(),
        p(&dir.join("history.tsv")),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    args
}

fn run_owned(args: &[String]) -> Run {
    run(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn train_with_zero_epochs_writes_initial_model() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_owned(&train_args(dir.path(), &["--epochs", "0"]));
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let history = fs::read_to_string(dir.path().join("history.tsv")).unwrap();
    assert_eq!(history.lines().count(), 1, "header only: {history}");
    assert!(history.starts_with("epoch\ttrain_loss\tvalid_loss\tvalid_f1"));
    assert!(concept_tagger::tagger::load_model(dir.path().join("model.ctg")).is_ok());
}

#[test]
fn train_then_tag_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_owned(&train_args(dir.path(), &["--epochs", "4"]));
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    assert!(r.out.contains("best epoch"), "{}", r.out);
    let history = fs::read_to_string(dir.path().join("history.tsv")).unwrap();
    assert_eq!(history.lines().count(), 5);

    let model = p(&dir.path().join("model.ctg"));
    let tag = |out: &str| {
        let r = run(&[
            "tag",
            "--model",
            &model,
            "--input",
            &data("overfit.conll"),
            "--output",
            out,
            "--spans",
            &format!("{out}.spans"),
        ]);
        assert_eq!(r.code, EXIT_OK, "{}", r.err);
        (fs::read(out).unwrap(), fs::read(format!("{out}.spans")).unwrap())
    };
    let first = tag(&p(&dir.path().join("a.conll")));
    let second = tag(&p(&dir.path().join("b.conll")));
    assert_eq!(first, second);
    let tagged = String::from_utf8(first.0).unwrap();
    assert_eq!(
        tagged.lines().filter(|l| !l.is_empty() && !l.starts_with("-DOCSTART-")).count(),
        122
    );

    let empty = dir.path().join("empty.conll");
    fs::write(&empty, "").unwrap();
    let out = p(&dir.path().join("empty.out"));
    let r = run(&["tag", "--model", &model, "--input", &p(&empty), "--output", &out]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    assert_eq!(fs::read_to_string(&out).unwrap(), "");
}

#[test]
fn tag_rejects_embeddings_of_wrong_dimension() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_owned(&train_args(dir.path(), &["--epochs", "0"])).code, EXIT_OK);
    let vec3 = dir.path().join("v3.vec");
    fs::write(&vec3, "1 3\nfever 0.1 0.2 0.3\n").unwrap();
    let r = run(&[
        "tag",
        "--model",
        &p(&dir.path().join("model.ctg")),
        "--input",
        &data("overfit.conll"),
        "--embeddings",
        &p(&vec3),
    ]);
    assert_eq!(r.code, EXIT_DATA, "{}", r.err);
    assert!(r.err.contains("dimension"), "{}", r.err);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.cfg");
    fs::write(&config, "epochs = 3\nseed = 5\n").unwrap();
    let mut args = train_args(dir.path(), &["--epochs", "1"]);
    args.extend(["--config".to_string(), p(&config)]);
    assert_eq!(run_owned(&args).code, EXIT_OK);
    let history = fs::read_to_string(dir.path().join("history.tsv")).unwrap();
    assert_eq!(history.lines().count(), 2);

    fs::write(&config, "learning_rate = 0.1\n").unwrap();
    let r = run(&["stats", &data("stats_fixture.conll"), "--config", &p(&config)]);
    assert_eq!(r.code, EXIT_USAGE);
}

#[test]
fn gradcheck_command() {
    let r = run(&["gradcheck"]);
    assert_eq!(r.code, EXIT_OK, "{}{}", r.out, r.err);
    assert!(!r.out.contains("FAIL"));

    let frozen = run(&["gradcheck", "--freeze_words"]);
    assert_eq!(frozen.code, EXIT_OK);
    assert!(frozen.out.lines().any(|l| l.starts_with("SKIP") && l.contains("word")), "{}", frozen.out);

    let broken = run(&["gradcheck", "--inject_fault"]);
    assert_ne!(broken.code, EXIT_OK);
    assert!(broken.out.contains("FAIL"), "{}", broken.out);
}

#[test]
fn binary_help_and_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_concept-tagger");
    for sub in ["stats", "train", "tag", "eval", "gradcheck"] {
        let out = Command::new(bin).args([sub, "--help"]).output().unwrap();
        assert!(out.status.success(), "{sub} --help");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
    }
    let out = Command::new(bin).args(["stats", "/nonexistent/file"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_DATA));
    let out = Command::new(bin).arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
}
