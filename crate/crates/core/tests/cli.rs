//! End-to-end tests of the `msr` binary: subcommand behavior, file outputs,
//! exit codes, determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn msr() -> Command {
    Command::new(env!("CARGO_BIN_EXE_msr"))
}

fn run(args: &[&str]) -> Output {
    msr().args(args).output().expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn assert_exit(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        stdout(output),
        stderr(output)
    );
}

/// Small corpus: 3×2×2×2×3 grid plus the synthetic bundle.
fn gen_small_corpus(dir: &Path, seed: &str) -> PathBuf {
    let corpus = dir.join("corpus.csv");
    let output = run(&[
        "gen-data",
        "--seed",
        seed,
        "--out",
        corpus.to_str().unwrap(),
        "--grid",
        "T=823.15:1023.15:3",
        "--grid",
        "SC=2:3:2",
        "--grid",
        "NC=0:3:2",
        "--grid",
        "f_CH4=1e-5:1e-4:2",
        "--grid",
        "m_cat=0.5:15:3",
    ]);
    assert_exit(&output, 0);
    corpus
}

fn train_small_model(dir: &Path, corpus: &Path, seed: &str) -> PathBuf {
    let model = dir.join("model.json");
    let output = run(&[
        "train",
        "--seed",
        seed,
        "--data",
        corpus.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--hidden",
        "4,4",
        "--lr",
        "0.01",
        "--epochs",
        "40",
    ]);
    assert_exit(&output, 0);
    model
}

#[test]
fn gen_data_writes_counts_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let corpus = gen_small_corpus(dir.path(), "42");
    let text = std::fs::read_to_string(&corpus).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "T_K,m_cat_g,SC,NC,CC,f_CH4_mol_s,y_H2,y_CH4,y_CO,y_CO2,source,regime"
    );
    let body: Vec<&str> = lines.collect();
    assert!(!body.is_empty());
    assert!(body.iter().any(|l| l.ends_with(",kinetic")));
    assert!(body.iter().any(|l| l.ends_with(",equilibrium")));
    assert!(!body.iter().any(|l| l.ends_with(",transition")));
    assert!(body.iter().any(|l| l.contains(",experimental,")));
    assert!(body.iter().any(|l| l.contains(",interpolated,")));

    // Byte-identical on repeat with the same seed; different otherwise.
    let again = dir.path().join("again.csv");
    let output = run(&[
        "gen-data",
        "--seed",
        "42",
        "--out",
        again.to_str().unwrap(),
        "--grid",
        "T=823.15:1023.15:3",
        "--grid",
        "SC=2:3:2",
        "--grid",
        "NC=0:3:2",
        "--grid",
        "f_CH4=1e-5:1e-4:2",
        "--grid",
        "m_cat=0.5:15:3",
    ]);
    assert_exit(&output, 0);
    assert_eq!(std::fs::read(&corpus).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn gen_data_empty_grid_yields_header_only_csv() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("empty.csv");
    let output = run(&[
        "gen-data",
        "--out",
        corpus.to_str().unwrap(),
        "--grid",
        "T=800:900:0",
        "--no-experimental",
    ]);
    assert_exit(&output, 0);
    let text = std::fs::read_to_string(&corpus).unwrap();
    assert_eq!(text.trim(), "T_K,m_cat_g,SC,NC,CC,f_CH4_mol_s,y_H2,y_CH4,y_CO,y_CO2,source,regime");
}

#[test]
fn train_is_deterministic_and_writes_history() {
    let dir = TempDir::new().unwrap();
    let corpus = gen_small_corpus(dir.path(), "42");
    let model_a = train_small_model(dir.path(), &corpus, "42");
    let bytes_a = std::fs::read(&model_a).unwrap();

    let model_b = dir.path().join("model_b.json");
    let output = run(&[
        "train",
        "--seed",
        "42",
        "--data",
        corpus.to_str().unwrap(),
        "--model",
        model_b.to_str().unwrap(),
        "--hidden",
        "4,4",
        "--lr",
        "0.01",
        "--epochs",
        "40",
    ]);
    assert_exit(&output, 0);
    assert_eq!(bytes_a, std::fs::read(&model_b).unwrap());

    let history = std::fs::read_to_string(model_a.with_extension("history.csv")).unwrap();
    assert!(history.starts_with("epoch,train_mse,val_mse\n"));
    assert!(history.lines().count() >= 2);
}

#[test]
fn train_single_epoch_records_one_update() {
    let dir = TempDir::new().unwrap();
    let corpus = gen_small_corpus(dir.path(), "7");
    let model = dir.path().join("one.json");
    let output = run(&[
        "train",
        "--data",
        corpus.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--hidden",
        "3",
        "--epochs",
        "1",
    ]);
    assert_exit(&output, 0);
    let history = std::fs::read_to_string(model.with_extension("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 2, "{history}");
}

#[test]
fn predict_single_point_and_batch() {
    let dir = TempDir::new().unwrap();
    let corpus = gen_small_corpus(dir.path(), "42");
    let model = train_small_model(dir.path(), &corpus, "42");

    // Single point via --fixed.
    let output = run(&[
        "predict",
        "--model",
        model.to_str().unwrap(),
        "--fixed",
        "T=898.15",
        "--fixed",
        "SC=3",
    ]);
    assert_exit(&output, 0);
    let text = stdout(&output);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "T_K,m_cat_g,SC,NC,f_CH4_mol_s,y_H2,y_CH4,y_CO,y_CO2,in_hull");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let fractions: Vec<f64> = row[5..9].iter().map(|v| v.parse().unwrap()).collect();
    assert!(fractions.iter().all(|v| (0.0..1.0).contains(v)));
    assert!((fractions.iter().sum::<f64>() - 1.0).abs() < 1e-9);

    // Batch input preserves order and count.
    let inputs = dir.path().join("inputs.csv");
    std::fs::write(
        &inputs,
        "T_K,m_cat_g,SC,NC,f_CH4_mol_s\n850,1.48,3,3,3.38e-5\n900,1.48,3,3,3.38e-5\n950,1.48,3,3,3.38e-5\n",
    )
    .unwrap();
    let out_csv = dir.path().join("preds.csv");
    let output = run(&[
        "predict",
        "--model",
        model.to_str().unwrap(),
        "--inputs",
        inputs.to_str().unwrap(),
        "--out",
        out_csv.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    let text = std::fs::read_to_string(&out_csv).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("850,"));
    assert!(rows[2].starts_with("950,"));
}

#[test]
fn predict_rejects_wrong_schema_version() {
    let dir = TempDir::new().unwrap();
    let model = dir.path().join("bad.json");
    std::fs::write(&model, r#"{"schema_version": 9, "hidden_sizes": [3]}"#).unwrap();
    let output = run(&["predict", "--model", model.to_str().unwrap(), "--fixed", "T=900"]);
    assert_exit(&output, 3);
    assert!(stderr(&output).contains("schema version"), "{}", stderr(&output));
}

#[test]
fn eval_reports_metrics_and_rejects_empty_data() {
    let dir = TempDir::new().unwrap();
    let corpus = gen_small_corpus(dir.path(), "42");
    let model = train_small_model(dir.path(), &corpus, "42");
    let metrics_csv = dir.path().join("metrics.csv");
    let output = run(&[
        "eval",
        "--model",
        model.to_str().unwrap(),
        "--data",
        corpus.to_str().unwrap(),
        "--out",
        metrics_csv.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    assert!(stdout(&output).contains("mean pearson"));
    let text = std::fs::read_to_string(&metrics_csv).unwrap();
    assert!(text.starts_with("n,mse,"));

    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "T_K,m_cat_g,SC,NC,CC,f_CH4_mol_s,y_H2,y_CH4,y_CO,y_CO2,source,regime\n").unwrap();
    let output = run(&["eval", "--model", model.to_str().unwrap(), "--data", empty.to_str().unwrap()]);
    assert_exit(&output, 3);
}

#[test]
fn sweep_emits_schema_and_honors_point_count() {
    let dir = TempDir::new().unwrap();
    let corpus = gen_small_corpus(dir.path(), "42");
    let model = train_small_model(dir.path(), &corpus, "42");

    // The five reference figure conditions: sweep axis plus fixed point.
    let conditions: Vec<(&str, &str, &str, Vec<String>)> = vec![
        ("T", "773.15", "1073.15", vec!["SC=3".into(), "NC=3".into(), "f_CH4=3.38e-5".into(), "m_cat=1.48".into()]),
        ("f_CH4", "1e-5", "2e-4", vec!["T=898.15".into(), "SC=3".into(), "NC=3".into(), "m_cat=15".into()]),
        ("SC", "1", "4", vec!["T=973.15".into(), "NC=1".into(), "f_CH4=3.38e-5".into(), "m_cat=6.5".into()]),
        ("NC", "0", "6", vec!["T=973.15".into(), "SC=3".into(), "f_CH4=3.38e-5".into(), "m_cat=1.48".into()]),
        ("m_cat", "0.5", "60", vec!["T=898.15".into(), "SC=3".into(), "NC=3".into(), "f_CH4=3.38e-5".into()]),
    ];
    for (vary, from, to, fixed) in conditions {
        let out_csv = dir.path().join(format!("sweep_{vary}.csv"));
        let mut args: Vec<String> = vec![
            "sweep".into(),
            "--model".into(),
            model.to_str().unwrap().into(),
            "--vary".into(),
            vary.into(),
            "--from".into(),
            from.into(),
            "--to".into(),
            to.into(),
            "--points".into(),
            "7".into(),
            "--out".into(),
            out_csv.to_str().unwrap().into(),
        ];
        for pair in fixed {
            args.push("--fixed".into());
            args.push(pair);
        }
        let output = msr().args(&args).output().unwrap();
        assert_exit(&output, 0);
        let text = std::fs::read_to_string(&out_csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "vary_name,vary_value,y_H2_ann,y_CH4_ann,y_CO_ann,y_CO2_ann,y_H2_ref,y_CH4_ref,y_CO_ref,y_CO2_ref,regime"
        );
        assert_eq!(lines.count(), 7, "sweep over {vary}");
    }

    // A single-point grid yields a single row.
    let output = run(&[
        "sweep",
        "--model",
        model.to_str().unwrap(),
        "--vary",
        "T",
        "--from",
        "898.15",
        "--to",
        "898.15",
        "--points",
        "1",
    ]);
    assert_exit(&output, 0);
    assert_eq!(stdout(&output).lines().count(), 2);
}

#[test]
fn sweep_rejects_unknown_parameter() {
    let dir = TempDir::new().unwrap();
    let corpus = gen_small_corpus(dir.path(), "42");
    let model = train_small_model(dir.path(), &corpus, "42");
    let output = run(&[
        "sweep",
        "--model",
        model.to_str().unwrap(),
        "--vary",
        "pressure_drop",
        "--from",
        "1",
        "--to",
        "2",
    ]);
    assert_exit(&output, 2);
    assert!(stderr(&output).contains("unknown parameter"));
}

#[test]
fn search_random_and_bayes_write_requested_row_counts() {
    let dir = TempDir::new().unwrap();
    let corpus = gen_small_corpus(dir.path(), "42");

    let log = dir.path().join("random.csv");
    let output = run(&[
        "search",
        "--data",
        corpus.to_str().unwrap(),
        "--strategy",
        "random",
        "--trials",
        "6",
        "--epochs",
        "15",
        "--out",
        log.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    let text = std::fs::read_to_string(&log).unwrap();
    assert!(text.starts_with("trial_id,n_layers,n1,n2,n3,n4,lr,epochs,seed,"));
    assert_eq!(text.lines().count(), 7);

    let log = dir.path().join("bayes.csv");
    let model = dir.path().join("best.json");
    let output = run(&[
        "search",
        "--data",
        corpus.to_str().unwrap(),
        "--strategy",
        "bayes",
        "--max-evals",
        "10",
        "--epochs",
        "15",
        "--out",
        log.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    let text = std::fs::read_to_string(&log).unwrap();
    assert_eq!(text.lines().count(), 11, "{text}");
    assert!(model.exists());
}

#[test]
fn search_benchmark_mode_reports_wins() {
    let output = run(&["search", "--benchmark", "--max-evals", "25", "--seed", "0"]);
    assert_exit(&output, 0);
    let text = stdout(&output);
    assert!(text.contains("bayes wins"), "{text}");
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("msr.toml");
    std::fs::write(&config, "seed = 7\n").unwrap();

    let from_config = dir.path().join("a.csv");
    let output = run(&[
        "gen-data",
        "--config",
        config.to_str().unwrap(),
        "--out",
        from_config.to_str().unwrap(),
        "--grid",
        "T=823.15:1023.15:2",
        "--grid",
        "SC=3:3:1",
        "--grid",
        "NC=3:3:1",
        "--grid",
        "f_CH4=3.38e-5:3.38e-5:1",
        "--grid",
        "m_cat=1.48:1.48:1",
    ]);
    assert_exit(&output, 0);

    let from_flag = dir.path().join("b.csv");
    let output = run(&[
        "gen-data",
        "--seed",
        "7",
        "--out",
        from_flag.to_str().unwrap(),
        "--grid",
        "T=823.15:1023.15:2",
        "--grid",
        "SC=3:3:1",
        "--grid",
        "NC=3:3:1",
        "--grid",
        "f_CH4=3.38e-5:3.38e-5:1",
        "--grid",
        "m_cat=1.48:1.48:1",
    ]);
    assert_exit(&output, 0);
    assert_eq!(std::fs::read(&from_config).unwrap(), std::fs::read(&from_flag).unwrap());

    // An explicit flag overrides the file value.
    let overridden = dir.path().join("c.csv");
    let output = run(&[
        "gen-data",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "8",
        "--out",
        overridden.to_str().unwrap(),
        "--grid",
        "T=823.15:1023.15:2",
        "--grid",
        "SC=3:3:1",
        "--grid",
        "NC=3:3:1",
        "--grid",
        "f_CH4=3.38e-5:3.38e-5:1",
        "--grid",
        "m_cat=1.48:1.48:1",
    ]);
    assert_exit(&output, 0);
    assert_ne!(std::fs::read(&from_config).unwrap(), std::fs::read(&overridden).unwrap());
}

#[test]
fn usage_and_missing_file_exit_codes() {
    let output = run(&["train", "--bogus-flag"]);
    assert_exit(&output, 2);

    let output = run(&["train", "--data", "/nonexistent/corpus.csv", "--model", "/tmp/x.json"]);
    assert_exit(&output, 3);

    let output = run(&["gen-data"]);
    assert_exit(&output, 2); // missing --out
}

#[test]
fn shift_residual_flag_changes_generated_data() {
    let dir = TempDir::new().unwrap();
    let grid_args = [
        "--grid",
        "T=898.15:898.15:1",
        "--grid",
        "SC=3:3:1",
        "--grid",
        "NC=3:3:1",
        "--grid",
        "f_CH4=1e-5:1e-5:1",
        "--grid",
        "m_cat=15:15:1",
        "--no-experimental",
    ];
    let mass_action = dir.path().join("mass_action.csv");
    let output = msr()
        .args(["gen-data", "--out", mass_action.to_str().unwrap()])
        .args(grid_args)
        .output()
        .unwrap();
    assert_exit(&output, 0);
    let printed = dir.path().join("printed.csv");
    let output = msr()
        .args([
            "gen-data",
            "--shift-residual",
            "paper",
            "--out",
            printed.to_str().unwrap(),
        ])
        .args(grid_args)
        .output()
        .unwrap();
    assert_exit(&output, 0);
    assert_ne!(
        std::fs::read(&mass_action).unwrap(),
        std::fs::read(&printed).unwrap(),
        "shift-residual form should change equilibrium compositions"
    );
}
