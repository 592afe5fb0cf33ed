use std::path::Path;

use hypergcl::cli::{parse_args, run, Invocation};
use hypergcl::io::{load_dir, read_text, write_text};
use hypergcl::report::Summary;
use hypergcl::runner::run_parallel;
use hypergcl_core::hypergraph::{synth_hypergraph, SynthConfig};
use hypergcl_core::train::{run_protocol, Mode, TrainConfig};

/// Runs the CLI in process; returns (exit code, stdout, stderr).
fn cli(args: &[&str]) -> (i32, String, String) {
    let argv = std::iter::once("hypergcl").chain(args.iter().copied());
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const FAST: &[&str] = &["--epochs", "6", "--hidden", "8", "--proj", "8", "--latent", "4", "--num-blocks", "1"];

fn train_config(args: &[&str]) -> TrainConfig {
    let argv = ["hypergcl", "train"].into_iter().chain(args.iter().copied());
    match parse_args(argv) {
        Ok(Invocation::Train { config, .. }) => config,
        Ok(_) => panic!("not a train invocation"),
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn documented_invocation_parses() {
    let cfg =
        train_config(&["--synth", "default", "--mode", "mtl", "--view1", "A6", "--view2", "A2:0.2", "--seeds", "10"]);
    assert_eq!(cfg.mode, Mode::Mtl);
    assert_eq!(cfg.view1.to_string(), "A6");
    assert_eq!(cfg.view2.to_string(), "A2:0.2");
    assert_eq!(cfg.seeds, (0..10).collect::<Vec<_>>());
}

#[test]
fn seed_list_forms() {
    assert_eq!(train_config(&["--synth", "small", "--seeds", "3"]).seeds, vec![0, 1, 2]);
    assert_eq!(train_config(&["--synth", "small", "--seeds", "4..7"]).seeds, vec![4, 5, 6]);
    assert_eq!(train_config(&["--synth", "small", "--seeds", "9,2,5"]).seeds, vec![9, 2, 5]);
    assert_eq!(cli(&["train", "--synth", "small", "--seeds", "x"]).0, 1);
}

#[test]
fn defaults_match_train_config() {
    assert_eq!(train_config(&["--synth", "small"]), TrainConfig::default());
}

#[test]
fn invalid_configurations_exit_1() {
    let (code, _, err) = cli(&["train", "--synth", "small", "--mode", "mtl", "--view1", "A6", "--view2", "A6"]);
    assert_eq!(code, 1, "{err}");
    assert_eq!(cli(&["train", "--synth", "small", "--tau-gumbel", "0"]).0, 1);
    assert_eq!(cli(&["train", "--synth", "small", "--view1", "A9"]).0, 1);
    assert_eq!(cli(&["train"]).0, 1);
    assert_eq!(cli(&["frobnicate"]).0, 1);
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    assert_eq!(cli(&["stats", "--data", path(&missing)]).0, 2);
    let cfg = dir.path().join("cfg.json");
    write_text(&cfg, "{ not json").unwrap();
    assert_eq!(cli(&["train", "--synth", "small", "--config", path(&cfg)]).0, 2);
}

#[test]
fn help_lists_every_flag_with_defaults() {
    let (code, out, _) = cli(&["train", "--help"]);
    assert_eq!(code, 0);
    let d = TrainConfig::default();
    for flag in [
        "--config",
        "--mode",
        "--view1",
        "--view2",
        "--epochs",
        "--pretrain-epochs",
        "--lr-model",
        "--lr-generator",
        "--weight-decay",
        "--lambda",
        "--beta",
        "--tau-c",
        "--tau-gumbel",
        "--tau-gumbel-final",
        "--dropout",
        "--hidden",
        "--proj",
        "--latent",
        "--num-blocks",
        "--neg-k",
        "--seeds",
        "--train-frac",
        "--val-frac",
        "--anchor-budget",
        "--out",
        "--parallel",
        "--checkpoints",
        "--data",
        "--synth",
    ] {
        assert!(out.contains(flag), "missing {flag}");
    }
    for default in
        [format!("[default: {}]", d.epochs), format!("[default: {}]", d.view1), format!("[default: {}]", d.lambda)]
    {
        assert!(out.contains(&default), "missing {default}");
    }
    assert_eq!(cli(&["--version"]).0, 0);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write_text(&cfg, r#"{"epochs": 7, "lambda": 0.25, "mode": "mtl"}"#).unwrap();
    let c = train_config(&["--synth", "small", "--config", path(&cfg), "--epochs", "3"]);
    assert_eq!((c.epochs, c.lambda, c.mode), (3, 0.25, Mode::Mtl));
    let c = train_config(&["--synth", "small", "--config", path(&cfg)]);
    assert_eq!(c.epochs, 7);
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(cli(&["synth", "--preset", "benchmark", "--seed", "7", "--out", path(&a)]).0, 0);
    assert_eq!(cli(&["synth", "--preset", "benchmark", "--seed", "7", "--out", path(&b)]).0, 0);
    for f in ["hyperedges.txt", "features.txt", "labels.txt"] {
        assert_eq!(read_text(&a.join(f)).unwrap(), read_text(&b.join(f)).unwrap(), "{f}");
    }
    let h = load_dir(&a).unwrap();
    assert_eq!(h, synth_hypergraph(&SynthConfig::default(), 7).unwrap());
}

#[test]
fn full_hyperedge_removal_writes_empty_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("aug");
    let (code, _, err) = cli(&["augment", "--synth", "small", "--spec", "A1:1.0", "--out", path(&out)]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(read_text(&out.join("hyperedges.txt")).unwrap(), "");
    let h = load_dir(&out).unwrap();
    assert_eq!(h.num_hyperedges(), 0);
}

#[test]
fn stats_json() {
    let (code, out, _) = cli(&["stats", "--synth", "small", "--json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let h = hypergcl::cli::synth_preset("small").unwrap();
    assert_eq!(v["num_vertices"], h.num_vertices);
    assert!(v["h_edge"].as_f64().unwrap() > 0.0);
}

#[test]
fn train_eval_attack_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let mut args = vec!["train", "--synth", "small", "--seeds", "2", "--checkpoints", "--out", path(&out)];
    args.extend_from_slice(FAST);
    let (code, stdout, err) = cli(&args);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("over 2 seeds"), "{stdout}");

    let summary: Summary = serde_json::from_str(&read_text(&out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.per_seed.len(), 2);
    assert_eq!(summary.config, train_config(&args[1..]));
    assert!(read_text(&out.join("table.csv")).unwrap().starts_with("method,mean,std,seeds\n"));
    let lines = read_text(&out.join("seed_1.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 6);

    let s1 = &summary.per_seed[1];
    let ckpt = out.join("model_seed_1.json");
    let (code, stdout, err) = cli(&["eval", "--synth", "small", "--checkpoint", path(&ckpt), "--seed", "1"]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["test_acc"].as_f64().unwrap(), s1.test_acc);

    let (code, stdout, err) =
        cli(&["attack", "--synth", "small", "--checkpoint", path(&ckpt), "--seed", "1", "--ratio", "0.3"]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let h = synth_hypergraph(&hypergcl::cli::synth_preset("small").unwrap(), 0).unwrap();
    let expected = (0.3 * h.incidences().len() as f64).round() as u64;
    assert_eq!(v["removed"].as_u64().unwrap(), expected);
    assert_eq!(v["clean_test_acc"].as_f64().unwrap(), s1.test_acc);
    assert_eq!(cli(&["attack", "--synth", "small", "--checkpoint", path(&ckpt), "--ratio", "1.5"]).0, 1);
}

#[test]
fn parallel_matches_sequential() {
    let h = synth_hypergraph(&hypergcl::cli::synth_preset("small").unwrap(), 0).unwrap();
    let cfg = TrainConfig {
        mode: Mode::Mtl,
        view1: "A2:0.2".parse().unwrap(),
        epochs: 4,
        hidden: 8,
        proj: 8,
        latent: 4,
        num_blocks: 1,
        seeds: vec![5, 0, 2],
        ..TrainConfig::default()
    };
    let seq = run_protocol(&h, &cfg).unwrap();
    let par = run_parallel(&h, &cfg, 2).unwrap();
    assert_eq!(Summary::of(&seq), Summary::of(&par));
    assert_eq!(seq.per_seed.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![0, 2, 5]);
}
