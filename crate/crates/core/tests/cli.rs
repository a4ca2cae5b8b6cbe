use std::path::Path;
use std::process::{Command, Output};

use ktuplet::linalg::norm;
use ktuplet::LabeledDataset;
use serde_json::Value;

/// Runs the binary with whitespace-separated `args` inside `dir`.
fn ktuplet(dir: &Path, args: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ktuplet"))
        .args(args.split_whitespace())
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &str) -> Vec<u8> {
    let out = ktuplet(dir, args);
    assert!(
        out.status.success(),
        "{args} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn json(dir: &Path, args: &str) -> Value {
    serde_json::from_slice(&ok(dir, args)).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn gen(dir: &Path, spread: &str) {
    ok(
        dir,
        &format!(
            "gen-data --seed 4 --num-classes 10 --per-class 24 --dim 8 --spread {spread} --out data.csv"
        ),
    );
}

const TRAIN: &str = "train-embed --data data.csv --classes 0-6 --epochs 6 --switch-epoch 4";

fn train(dir: &Path, out: &str) -> Value {
    json(dir, &format!("{TRAIN} --seed 1 --out {out}"))
}

#[test]
fn gen_data_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let small = "gen-data --num-classes 3 --per-class 4";
    let a = ok(d.path(), &format!("{small} --seed 9"));
    let b = ok(d.path(), &format!("{small} --seed 9"));
    let c = ok(d.path(), &format!("{small} --seed 10"));
    assert_eq!(a, b);
    assert_ne!(a, c);
    let ds = LabeledDataset::read_csv(a.as_slice()).unwrap();
    assert_eq!((ds.len(), ds.dim(), ds.num_classes()), (12, 16, 3));
}

#[test]
fn training_is_reproducible_and_traced() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gen(d, "0.3");
    let trace = train(d, "a.json");
    train(d, "b.json");
    let read = |f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(read("a.json"), read("b.json"));
    assert_eq!(trace["epochs"].as_array().unwrap().len(), 6);
    assert_eq!(trace["config"]["k_neg"], 5);
    assert_eq!(trace["config"]["switch_epoch"], 4);
    assert_eq!(trace["config"]["epochs"], 6);
    assert_eq!(trace["epochs"][3]["objective"], "k-tuplet");
    assert_eq!(
        trace["epochs"][4]["objective"],
        serde_json::json!({"semi-hard": "violating"})
    );
    assert!(trace["max_norm_deviation"].as_f64().unwrap() <= 1e-9);

    ok(d, &format!("{TRAIN} --seed 2 --out c.json"));
    assert_ne!(read("a.json"), read("c.json"));
}

#[test]
fn embed_dump_rows_are_unit_norm_and_match_library() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gen(d, "0.3");
    train(d, "m.json");
    let dump = ok(d, "embed-dump --data data.csv --model m.json");
    let emb = LabeledDataset::read_csv(dump.as_slice()).unwrap();
    let data = LabeledDataset::load_csv(d.join("data.csv")).unwrap();
    assert_eq!(emb.len(), data.len());
    assert_eq!(emb.dim(), 32);
    assert_eq!(emb.labels(), data.labels());
    let model = ktuplet::checkpoint::load_embedding(d.join("m.json")).unwrap();
    let direct = model.forward(data.features()).unwrap();
    for i in 0..emb.len() {
        assert!((norm(emb.row(i)) - 1.0).abs() <= 1e-9);
        assert_eq!(emb.row(i), direct.row(i));
    }
}

#[test]
fn evaluate_separable_data() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gen(d, "0.02");
    train(d, "m.json");
    let eval =
        "evaluate --data data.csv --classes 7-9 --model m.json --ways 3 --episodes 40 --queries 5";

    let report = json(d, &format!("{eval} --seed 3"));
    assert!(report["mean_accuracy"].as_f64().unwrap() >= 0.95);
    assert_eq!(report["num_episodes"], 40);
    assert_eq!(report["per_episode"].as_array().unwrap().len(), 40);
    assert_eq!(report["config"]["classifier"], "euclid");
    assert_eq!(report["config"]["way"], 3);
    assert_eq!(report["seed"], 3);

    ok(
        d,
        "train-comparator --data data.csv --classes 0-6 --model m.json --epochs 2 --out c.json",
    );
    let euclid = json(
        d,
        &format!("{eval} --comparator c.json --classifier euclid --seed 3"),
    );
    assert_eq!(euclid["per_episode"], report["per_episode"]);
    let sim = json(d, &format!("{eval} --comparator c.json"));
    assert_eq!(sim["config"]["classifier"], "similarity");
    assert_eq!(sim["config"]["comparator"], "c.json");
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gen(d, "0.3");
    std::fs::write(
        d.join("run.toml"),
        "data = \"data.csv\"\nclasses = \"0-6\"\nepochs = 3\nk-neg = 2\nseed = 5\n",
    )
    .unwrap();
    let trace = json(d, "train-embed --config run.toml --k-neg 3 --out m.json");
    assert_eq!(trace["config"]["k_neg"], 3);
    assert_eq!(trace["config"]["epochs"], 3);
    assert_eq!(trace["config"]["init_seed"], 5);
    assert_eq!(trace["epochs"].as_array().unwrap().len(), 3);
}

#[test]
fn errors_exit_nonzero_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gen(d, "0.3");
    train(d, "m.json");
    let eval = "evaluate --data data.csv --model m.json";

    let out = ktuplet(
        d,
        &format!("{eval} --episodes 2 --out missing-dir/report.json"),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("missing-dir"));
    assert!(!d.join("missing-dir").exists());

    let out = ktuplet(d, &format!("{eval} --classifier similarity"));
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--comparator"));

    let out = ktuplet(d, &format!("{eval} --ways 20"));
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("20-way"));

    let out = ktuplet(d, "train-embed --data data.csv --classes 0-40 --out x.json");
    assert_eq!(out.status.code(), Some(1));
    assert!(!d.join("x.json").exists());

    let out = ktuplet(d, "train-embed --data nope.csv --out x.json");
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("nope.csv"));

    std::fs::write(d.join("bad.csv"), "0,1.0,2.0\n1,oops,2.0\n").unwrap();
    let out = ktuplet(d, "embed-dump --data bad.csv --model m.json");
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 2"));

    let out = ktuplet(d, "train-embed --data data.csv --k-neg 0 --out x.json");
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(ktuplet(d, "frobnicate").status.code(), Some(2));
    assert_eq!(ktuplet(d, "gen-data --spred 1").status.code(), Some(2));
}
