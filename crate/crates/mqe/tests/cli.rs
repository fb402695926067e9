mod common;

use std::fs;
use std::path::Path;

use common::{mqe, run_all, run_ok, small_config, write_flows};
use mqe::commands::PrepManifest;
use mqe::io::{load_table, read_json, read_split};
use mqe_core::prep::{clean, LabelSpec, Preprocessor, SchemaHints};
use mqe_core::qnn::QnnModel;
use mqe_core::qsvm::QsvmModel;

fn setup(n: usize) -> (tempfile::TempDir, std::path::PathBuf, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("flows.csv");
    write_flows(&data, n, 3);
    let out = dir.path().join("out");
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, small_config(&data, &out)).unwrap();
    (dir, cfg, out)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

#[test]
fn prep_writes_projected_splits_and_manifest() {
    let (_d, cfg, out) = setup(150);
    run_ok(&["prep", "--config", s(&cfg)]);
    let m: PrepManifest = read_json(&out.join("prep/manifest.json")).unwrap();
    assert_eq!(m.rows_input, 150);
    let missing = (0..150).filter(|i| i % 37 == 5).count();
    assert_eq!(m.rows_dropped, missing);
    assert_eq!(m.rows_used, 150 - missing);
    assert_eq!(m.rows_train + m.rows_test, m.rows_used);
    assert_eq!(m.input_sha256.len(), 64);
    assert!(!m.feature_columns.contains(&"service".to_string()));
    let train = read_split(&out.join("prep/train.csv")).unwrap();
    let test = read_split(&out.join("prep/test.csv")).unwrap();
    assert_eq!(train.x.n_cols(), 4);
    assert_eq!((train.x.n_rows(), test.x.n_rows()), (m.rows_train, m.rows_test));
    assert_eq!(train.y.iter().filter(|&&v| v == 1).count(), m.positives_train);
}

#[test]
fn fitted_statistics_come_from_the_training_rows_only() {
    let (_d, cfg, out) = setup(150);
    run_ok(&["prep", "--config", s(&cfg)]);
    let stored: Preprocessor = read_json(&out.join("prep/preprocessor.json")).unwrap();
    let train = read_split(&out.join("prep/train.csv")).unwrap();
    let raw = load_table(&cfg.parent().unwrap().join("flows.csv"), &SchemaHints::default()).unwrap();
    let spec = LabelSpec { column: "label".into(), benign: "normal".into() };
    let (table, _) = clean(&raw, &spec, &["service".to_string()]).unwrap();
    let refit = Preprocessor::fit(&table.select_rows(&train.ids), 4).unwrap();
    assert_eq!(refit, stored);
    let proto = stored.encoders.iter().find(|e| e.column == "proto").unwrap();
    assert_eq!(proto.categories, vec!["icmp", "tcp", "udp"]);
}

#[test]
fn missing_label_column_is_a_named_config_error() {
    let (_d, cfg, _) = setup(60);
    let text = fs::read_to_string(&cfg).unwrap().replace("label_column = \"label\"", "label_column = \"class\"");
    fs::write(&cfg, text).unwrap();
    let o = mqe(&["prep", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("'class'"));
}

#[test]
fn config_errors_exit_with_two() {
    let (_d, cfg, _) = setup(60);
    let text = fs::read_to_string(&cfg).unwrap();
    fs::write(&cfg, format!("{text}\n[extra]\nkey = 1\n")).unwrap();
    assert_eq!(mqe(&["prep", "--config", s(&cfg)]).status.code(), Some(2));
    let (_d, cfg, _) = setup(60);
    let text = fs::read_to_string(&cfg).unwrap().replace("n_qubits = 4", "n_qubits = 5");
    fs::write(&cfg, text).unwrap();
    assert_eq!(mqe(&["prep", "--config", s(&cfg)]).status.code(), Some(2));
}

#[test]
fn missing_artifacts_exit_with_three() {
    let (_d, cfg, out) = setup(60);
    for verb in ["train-qnn", "train-qsvm", "fuse-eval", "noise-sweep"] {
        let o = mqe(&[verb, "--config", s(&cfg)]);
        assert_eq!(o.status.code(), Some(3), "{verb}");
    }
    run_ok(&["prep", "--config", s(&cfg)]);
    let o = mqe(&["fuse-eval", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("train-qnn"));
    assert!(!out.join("reports/summary.csv").exists());
}

#[test]
fn unreadable_or_ragged_data_exits_with_four() {
    let (d, cfg, _) = setup(60);
    let data = d.path().join("flows.csv");
    fs::write(&data, "a,b,label\n1,2,normal\n3,ddos\n").unwrap();
    assert_eq!(mqe(&["prep", "--config", s(&cfg)]).status.code(), Some(4));
    fs::remove_file(&data).unwrap();
    assert_eq!(mqe(&["prep", "--config", s(&cfg)]).status.code(), Some(4));
}

#[test]
fn qnn_history_has_one_row_per_default_epoch() {
    let (_d, cfg, out) = setup(60);
    let text = fs::read_to_string(&cfg).unwrap().replace("epochs = 3\n", "");
    fs::write(&cfg, text).unwrap();
    run_ok(&["prep", "--config", s(&cfg)]);
    run_ok(&["train-qnn", "--config", s(&cfg)]);
    let rows = csv_rows(&out.join("reports/qnn_history.csv"));
    assert_eq!(rows.len(), 100);
    assert_eq!(rows[99][0], "100");
}

#[test]
fn qsvm_on_two_points_stores_the_hand_solution() {
    let (_d, cfg, out) = setup(60);
    let text = fs::read_to_string(&cfg)
        .unwrap()
        .replace("n_components = 4", "n_components = 1")
        .replace("n_qubits = 4", "n_qubits = 1");
    fs::write(&cfg, text).unwrap();
    fs::create_dir_all(out.join("prep")).unwrap();
    // orthogonal embeddings: K = I, so α = (1, 1) and b = 0
    fs::write(out.join("prep/train.csv"), format!("id,label,pc1\n0,1,0\n1,0,{}\n", std::f64::consts::PI)).unwrap();
    run_ok(&["train-qsvm", "--config", s(&cfg)]);
    let model: QsvmModel = read_json(&out.join("models/qsvm.json")).unwrap();
    assert_eq!(model.coefficients.len(), 2);
    assert!((model.coefficients[0] - 1.0).abs() < 1e-9);
    assert!((model.coefficients[1] + 1.0).abs() < 1e-9);
    assert!(model.bias.abs() < 1e-9);
}

#[test]
fn model_documents_round_trip_bit_exactly() {
    let (_d, cfg, out) = setup(90);
    run_ok(&["prep", "--config", s(&cfg)]);
    run_ok(&["train-qnn", "--config", s(&cfg)]);
    run_ok(&["train-qsvm", "--config", s(&cfg)]);
    let qnn_text = fs::read_to_string(out.join("models/qnn.json")).unwrap();
    let qnn: QnnModel = serde_json::from_str(&qnn_text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&qnn).unwrap() + "\n", qnn_text);
    let qsvm_text = fs::read_to_string(out.join("models/qsvm.json")).unwrap();
    let qsvm: QsvmModel = serde_json::from_str(&qsvm_text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&qsvm).unwrap() + "\n", qsvm_text);
    let back: QsvmModel = serde_json::from_str(&serde_json::to_string(&qsvm).unwrap()).unwrap();
    assert!(back.coefficients.iter().zip(&qsvm.coefficients).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn full_run_emits_reports_curves_and_sweep() {
    let (_d, cfg, out) = setup(150);
    run_all(&cfg, &out);
    let summary = csv_rows(&out.join("reports/summary.csv"));
    let names: Vec<&str> = summary.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, ["qnn", "qsvm", "fused_hard", "fused_margin", "fused_probability"]);
    for n in &names {
        for kind in ["roc", "pr", "reliability"] {
            assert!(out.join(format!("curves/{kind}_{n}.csv")).is_file(), "{kind}_{n}");
        }
        assert!(out.join(format!("reports/eval_{n}.json")).is_file());
    }
    let rel = csv_rows(&out.join("curves/reliability_qnn.csv"));
    assert_eq!(rel.len(), 15);
    let roc = csv_rows(&out.join("curves/roc_qsvm.csv"));
    assert_eq!(roc[0][0], "inf");

    let sweep = csv_rows(&out.join("curves/noise_sweep.csv"));
    assert_eq!(sweep.len(), 4);
    // p = 0 takes the exact path, so it reproduces the noiseless scores
    for row in sweep.iter().filter(|r| r[1] == "0") {
        for (k, name) in names.iter().enumerate() {
            let f1 = summary.iter().find(|r| r[0] == *name).unwrap()[9].clone();
            assert_eq!(row[3 + 2 * k], f1, "{name}");
        }
    }
    let meta = csv_rows(&out.join("reports/meta_hard.csv"));
    assert!(meta.iter().all(|r| ["0", "1"].contains(&r[3].as_str()) && ["0", "1"].contains(&r[4].as_str())));
}

#[test]
fn single_scheme_emits_one_fused_report() {
    let (_d, cfg, out) = setup(120);
    let text = fs::read_to_string(&cfg).unwrap().replace("[forest]", "[fusion]\nschemes = [\"margin\"]\n\n[forest]");
    fs::write(&cfg, text).unwrap();
    run_all(&cfg, &out);
    let fused: Vec<_> = fs::read_dir(out.join("reports"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("eval_fused_"))
        .collect();
    assert_eq!(fused, ["eval_fused_margin.json"]);
    assert!(!out.join("models/forest_hard.json").exists());
}

#[test]
fn print_config_shows_resolved_defaults() {
    let o = mqe(&["print-config"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let cfg = mqe::RunConfig::from_toml(&text).unwrap();
    assert_eq!(cfg.qnn.epochs, 100);
    assert!(cfg.qnn.seed.is_some() && cfg.noise.seed.is_some() && cfg.prep.seed.is_some());
    let other = String::from_utf8(mqe(&["print-config", "--seed", "5"]).stdout).unwrap();
    assert_ne!(text, other);
}
