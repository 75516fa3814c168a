use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use caselab::datagen::read_dataset;
use caselab::eval::{parse_eval_csv, EVAL_HEADER};

fn caselab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_caselab")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = caselab(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    caselab(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small 5x5 dataset written by `gen`.
fn gen_small(dir: &Path, seed: &str) -> PathBuf {
    let out = dir.join(format!("data{seed}"));
    ok(&[
        "gen", "--pairs", "12", "--test-pairs", "6", "--grid", "5", "--tasks-min", "1", "--tasks-max", "2",
        "--seed", seed, "--out", s(&out),
    ]);
    out
}

const TINY: &[&str] = &[
    "--epochs", "1", "--batch", "16", "--latent-dim", "4", "--encoder-hidden", "8", "--policy-hidden", "8",
];

#[test]
fn gen_is_deterministic_and_records_its_config() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen_small(dir.path(), "1");
    let b = dir.path().join("again");
    ok(&["gen", "--config", s(&a.join("run_config.txt")), "--out", s(&b)]);
    for f in ["train.jsonl", "test.jsonl", "split.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let text = fs::read_to_string(a.join("run_config.txt")).unwrap();
    assert!(text.contains("pairs=12\n") && text.contains("command=gen\n"));
    assert_eq!(fs::read_to_string(a.join("fingerprint.txt")).unwrap().trim().len(), 64);
}

#[test]
fn gen_respects_task_range() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    ok(&[
        "gen", "--pairs", "6", "--test-pairs", "3", "--tasks-min", "2", "--tasks-max", "8", "--out", s(&out),
    ]);
    for f in ["train.jsonl", "test.jsonl"] {
        for p in read_dataset(&out.join(f)).unwrap() {
            assert!((2..=8).contains(&p.train.tasks.len()));
        }
    }
}

#[test]
fn usage_errors_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    assert_eq!(code(&["gen", "--tasks-min", "5", "--tasks-max", "2", "--out", s(&out)]), 1);
    assert_eq!(code(&["gen", "--bogus"]), 1);
    assert_eq!(code(&["train", "--variant", "NOPE", "--out", s(&out)]), 1);
    assert_eq!(code(&["eval", "--out", s(&out)]), 1);
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_small(dir.path(), "2");
    let run = dir.path().join("run");
    let mut args = vec!["train", "--data", s(&data), "--out", s(&run), "--k", "2", "--log-every", "1"];
    args.extend_from_slice(TINY);
    let stdout = ok(&args);
    assert!(stdout.contains("final loss"));
    let checkpoint = run.join("checkpoint.json");
    let metrics = fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("step,loss_total,loss_policy,loss_H,loss_P\n"));

    // the recorded config reproduces the checkpoint byte for byte
    let again = dir.path().join("again");
    ok(&["train", "--config", s(&run.join("run_config.txt")), "--out", s(&again)]);
    assert_eq!(fs::read(&checkpoint).unwrap(), fs::read(again.join("checkpoint.json")).unwrap());

    let eval_dir = dir.path().join("eval");
    let out = ok(&["eval", "--checkpoint", s(&checkpoint), "--data", s(&data), "--out", s(&eval_dir)]);
    assert!(out.contains("success"));
    let rows = parse_eval_csv(&fs::read_to_string(eval_dir.join("eval.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0].k, rows[0].summary.n_episodes), (2, 6));

    let empty = dir.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    fs::write(empty.join("test.jsonl"), "").unwrap();
    assert_eq!(
        code(&["eval", "--checkpoint", s(&checkpoint), "--data", s(&empty), "--out", s(&eval_dir)]),
        1
    );
    let missing = dir.path().join("missing.json");
    assert_eq!(
        code(&["eval", "--checkpoint", s(&missing), "--data", s(&data), "--out", s(&eval_dir)]),
        2
    );
}

#[test]
fn resume_continues_a_halted_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_small(dir.path(), "3");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let mut base = vec!["train", "--data", s(&data), "--log-every", "1", "--epochs", "2"];
    base.extend_from_slice(&TINY[2..]);
    ok(&[&base[..], &["--out", s(&a)]].concat());
    ok(&[&base[..], &["--out", s(&b), "--halt-at", "5"]].concat());
    assert_ne!(fs::read(a.join("checkpoint.json")).unwrap(), fs::read(b.join("checkpoint.json")).unwrap());
    ok(&[&base[..], &["--out", s(&b), "--resume"]].concat());
    for f in ["checkpoint.json", "metrics.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    // a different config is refused
    assert_eq!(code(&[&base[..], &["--out", s(&b), "--resume", "--k", "3"]].concat()), 2);
}

#[test]
fn ablate_k_grid_is_complete_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_small(dir.path(), "4");
    let mut args = vec!["ablate-k", "--data", s(&data), "--ks", "1-8", "--seeds", "0-7"];
    args.extend_from_slice(TINY);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&[&args[..], &["--out", s(&a)]].concat());
    ok(&[&args[..], &["--out", s(&b)]].concat());
    let csv = fs::read_to_string(a.join("ablate_k.csv")).unwrap();
    assert_eq!(csv, fs::read_to_string(b.join("ablate_k.csv")).unwrap());
    assert!(csv.starts_with(EVAL_HEADER));
    assert_eq!(parse_eval_csv(&csv).unwrap().len(), 64);

    let svg = a.join("curve.svg");
    ok(&["plot", s(&a.join("ablate_k.csv")), "--out", s(&svg)]);
    let first = fs::read_to_string(&svg).unwrap();
    assert!(first.starts_with("<svg") && first.trim_end().ends_with("</svg>"));
    assert_eq!(first.matches("<circle").count(), 8);
    ok(&["plot", s(&a.join("ablate_k.csv")), "--out", s(&svg)]);
    assert_eq!(fs::read_to_string(&svg).unwrap(), first);
}

#[test]
fn plot_reports_malformed_lines() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    fs::write(&csv, format!("{EVAL_HEADER}\nCASE,4,0,10,0.5,12,0.5\nCASE,4,zero,10,0.5,12,0.5\n")).unwrap();
    let out = caselab(&["plot", s(&csv)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    fs::write(&csv, format!("{EVAL_HEADER}\nCASE,4,0,10,0.5,12,0.5\n")).unwrap();
    ok(&["plot", s(&csv)]);
    let svg = fs::read_to_string(dir.path().join("bad.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 1);
}

#[test]
fn compare_and_sweep_len_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_small(dir.path(), "5");
    let cmp = dir.path().join("cmp");
    let mut args = vec!["compare", "--data", s(&data), "--seeds", "0-1", "--out", s(&cmp)];
    args.extend_from_slice(TINY);
    let stdout = ok(&args);
    assert!(stdout.starts_with("variant,best,mean,std,n_seeds\n"));
    assert_eq!(parse_eval_csv(&fs::read_to_string(cmp.join("compare.csv")).unwrap()).unwrap().len(), 10);
    assert_eq!(fs::read_to_string(cmp.join("table.csv")).unwrap().lines().count(), 6);

    let sweep = dir.path().join("sweep");
    let mut args = vec![
        "sweep-len", "--data", s(&data), "--variants", "CASE_CI,GOAL_GUIDANCE", "--seeds", "0", "--lengths", "1-3",
        "--per-length", "4", "--out", s(&sweep),
    ];
    args.extend_from_slice(TINY);
    ok(&args);
    let text = fs::read_to_string(sweep.join("sweep_len.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 2);
    ok(&["plot", s(&sweep.join("sweep_len.csv"))]);
    assert!(fs::read_to_string(sweep.join("sweep_len.svg")).unwrap().contains("sequence length"));
}
