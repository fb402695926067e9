//! The pipeline verbs. Each reads the artifacts of earlier stages from the
//! output tree, writes its own, and returns what it computed.

use mqe_core::fusion::{extract_meta_features, BranchOutputs, FusionScheme};
use mqe_core::metrics::{pr_curve, roc_curve, EvalReport};
use mqe_core::pipeline::{
    fit_fusion, out_of_fold_outputs, BranchModels, FusionModel, InferenceNoise, PipelineResult, TrainedPipeline,
};
use mqe_core::prep::{clean, stratified_split, stratified_subsample, LabelSpec, Preprocessor, RawTable, SchemaHints};
use mqe_core::qnn::{train_qnn, QnnModel, TrainHistory};
use mqe_core::qsim::NoiseKind;
use mqe_core::qsvm::{train_qsvm_audited, QsvmAudit, QsvmModel};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io::{
    fmt_f64, load_table, read_cells, read_json, read_split, sha256_file, write_csv, write_json, write_split,
    write_text, Layout, SplitData,
};

/// Provenance of the preprocessed splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepManifest {
    pub input_path: String,
    pub input_sha256: String,
    pub rows_input: usize,
    pub rows_dropped: usize,
    pub rows_used: usize,
    pub rows_train: usize,
    pub rows_test: usize,
    pub positives_train: usize,
    pub positives_test: usize,
    pub feature_columns: Vec<String>,
    pub n_components: usize,
    pub split_seed: u64,
    pub subsample: usize,
    pub subsample_seed: u64,
}

fn layout(cfg: &RunConfig) -> Layout {
    Layout::new(&cfg.run.out_dir)
}

fn write_config(path: &std::path::Path, cfg: &RunConfig) -> CliResult<()> {
    write_text(path, &cfg.provenance_toml())
}

/// Names every column the config refers to that the file lacks.
fn check_config_columns(cfg: &RunConfig, headers: &[String]) -> CliResult<()> {
    let missing = |c: &String| !headers.contains(c);
    let data = &cfg.data;
    if missing(&data.label_column) {
        return Err(CliError::Config(format!(
            "label column '{}' not found in {}",
            data.label_column,
            data.path.display()
        )));
    }
    let listed = data.drop_columns.iter().chain(data.categorical.iter().flatten());
    if let Some(c) = listed.into_iter().find(|c| missing(c)) {
        return Err(CliError::Config(format!("column '{c}' not found in {}", data.path.display())));
    }
    Ok(())
}

pub fn prep(cfg: &RunConfig) -> CliResult<PrepManifest> {
    let out = layout(cfg);
    let path = &cfg.data.path;
    let (headers, _) = read_cells(path)?;
    check_config_columns(cfg, &headers)?;
    let hints = SchemaHints { categorical: cfg.data.categorical.clone() };
    let raw: RawTable = load_table(path, &hints)?;
    let spec = LabelSpec { column: cfg.data.label_column.clone(), benign: cfg.data.benign_label.clone() };
    let (table, dropped) = clean(&raw, &spec, &cfg.data.drop_columns)?;
    let n_features = table.columns.len();
    if cfg.prep.n_components > n_features {
        return Err(CliError::Config(format!(
            "prep.n_components = {} exceeds the {n_features} feature columns",
            cfg.prep.n_components
        )));
    }
    let keep = if cfg.data.subsample > 0 {
        stratified_subsample(&table.labels, cfg.data.subsample, cfg.subsample_seed())?
    } else {
        (0..table.n_rows()).collect()
    };
    let table = table.select_rows(&keep);
    let (train_idx, test_idx) = stratified_split(&table.labels, cfg.prep.train_ratio, cfg.split_seed())?;
    let train = table.select_rows(&train_idx);
    let test = table.select_rows(&test_idx);
    let pre = Preprocessor::fit(&train, cfg.prep.n_components)?;
    let x_train = pre.transform(&train)?;
    let x_test = pre.transform(&test)?;

    let ids = |idx: &[usize]| idx.iter().map(|&i| keep[i]).collect::<Vec<_>>();
    write_split(&out.train_split(), &SplitData { ids: ids(&train_idx), x: x_train, y: train.labels.clone() })?;
    write_split(&out.test_split(), &SplitData { ids: ids(&test_idx), x: x_test, y: test.labels.clone() })?;
    write_json(&out.preprocessor(), &pre)?;
    let positives = |y: &[u8]| y.iter().filter(|&&v| v == 1).count();
    let manifest = PrepManifest {
        input_path: path.display().to_string(),
        input_sha256: sha256_file(path)?,
        rows_input: raw.n_rows(),
        rows_dropped: dropped,
        rows_used: keep.len(),
        rows_train: train_idx.len(),
        rows_test: test_idx.len(),
        positives_train: positives(&train.labels),
        positives_test: positives(&test.labels),
        feature_columns: pre.columns.iter().map(|c| c.name.clone()).collect(),
        n_components: cfg.prep.n_components,
        split_seed: cfg.split_seed(),
        subsample: cfg.data.subsample,
        subsample_seed: cfg.subsample_seed(),
    };
    write_json(&out.manifest(), &manifest)?;
    write_config(&out.prep("config.toml"), cfg)?;
    log::info!("prep: {} train / {} test rows, {dropped} dropped", manifest.rows_train, manifest.rows_test);
    Ok(manifest)
}

fn load_split(out: &Layout, test: bool) -> CliResult<SplitData> {
    let path = if test { out.test_split() } else { out.train_split() };
    out.require(&path, "prep")?;
    read_split(&path)
}

fn check_width(split: &SplitData, expected: usize, what: &str) -> CliResult<()> {
    if split.x.n_cols() != expected {
        return Err(CliError::Config(format!(
            "{what} expects {expected} features but the prepared split has {}",
            split.x.n_cols()
        )));
    }
    Ok(())
}

pub fn train_qnn_cmd(cfg: &RunConfig) -> CliResult<(QnnModel, TrainHistory)> {
    let out = layout(cfg);
    let train = load_split(&out, false)?;
    check_width(&train, cfg.qnn.n_qubits, "qnn.n_qubits")?;
    let config = cfg.qnn_config();
    let (params, history) = train_qnn(&train.x, &train.y, &config)?;
    let model = QnnModel { config, params };
    write_json(&out.qnn_model(), &model)?;
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let rows: Vec<Vec<String>> = history
        .epochs
        .iter()
        .map(|e| {
            vec![
                e.epoch.to_string(),
                fmt_f64(e.train_loss),
                fmt_f64(e.train_accuracy),
                opt(e.val_loss),
                opt(e.val_accuracy),
            ]
        })
        .collect();
    write_csv(
        &out.reports("qnn_history.csv"),
        &["epoch", "train_loss", "train_accuracy", "val_loss", "val_accuracy"],
        &rows,
    )?;
    write_config(&out.models("config_qnn.toml"), cfg)?;
    if let Some(last) = history.epochs.last() {
        log::info!("qnn: final loss {:.5}, train accuracy {:.4}", last.train_loss, last.train_accuracy);
    }
    Ok((model, history))
}

pub fn train_qsvm_cmd(cfg: &RunConfig) -> CliResult<(QsvmModel, QsvmAudit)> {
    let out = layout(cfg);
    let train = load_split(&out, false)?;
    let (model, audit) = train_qsvm_audited(&train.x, &train.y, &cfg.qsvm_config())?;
    write_json(&out.qsvm_model(), &model)?;
    write_json(&out.reports("qsvm_audit.json"), &audit)?;
    write_config(&out.models("config_qsvm.toml"), cfg)?;
    log::info!("qsvm: {} support vectors, KKT violation {:.2e}", audit.n_support, audit.kkt_max_violation);
    Ok((model, audit))
}

fn load_branches(out: &Layout, n_features: usize) -> CliResult<BranchModels> {
    out.require(&out.qnn_model(), "train-qnn")?;
    out.require(&out.qsvm_model(), "train-qsvm")?;
    let qnn: QnnModel = read_json(&out.qnn_model())?;
    let qsvm: QsvmModel = read_json(&out.qsvm_model())?;
    qnn.params.validate()?;
    qsvm.validate()?;
    if qnn.params.n_qubits() != n_features || qsvm.n_features() != n_features {
        return Err(CliError::Data(format!(
            "models expect {} (qnn) and {} (qsvm) features, the split has {n_features}",
            qnn.params.n_qubits(),
            qsvm.n_features()
        )));
    }
    Ok(BranchModels { qnn: qnn.params, qnn_history: TrainHistory::default(), qsvm })
}

fn model_names(schemes: &[FusionScheme]) -> Vec<String> {
    let mut names = vec!["qnn".to_string(), "qsvm".to_string()];
    names.extend(schemes.iter().map(|s| format!("fused_{s}")));
    names
}

fn named_reports(result: &PipelineResult) -> Vec<(String, &EvalReport)> {
    let mut v = vec![("qnn".to_string(), &result.qnn_report), ("qsvm".to_string(), &result.qsvm_report)];
    v.extend(result.fused.iter().map(|f| (format!("fused_{}", f.scheme), &f.report)));
    v
}

const SUMMARY_HEADER: [&str; 16] = [
    "model",
    "n",
    "tp",
    "fp",
    "tn",
    "fn",
    "accuracy",
    "precision",
    "recall",
    "f1",
    "roc_auc",
    "pr_auc",
    "tpr_at_fpr_0.1pct",
    "tpr_at_fpr_1pct",
    "brier",
    "ece",
];

fn summary_row(name: &str, r: &EvalReport) -> Vec<String> {
    let c = &r.confusion;
    let m = &r.metrics;
    let mut row = vec![name.to_string(), r.n_samples.to_string()];
    row.extend([c.tp, c.fp, c.tn, c.fn_].iter().map(u64::to_string));
    row.extend(
        [
            m.accuracy,
            m.precision,
            m.recall,
            m.f1,
            r.roc_auc,
            r.pr_auc,
            r.tpr_at_fpr_0_1pct,
            r.tpr_at_fpr_1pct,
            r.brier,
            r.ece,
        ]
        .into_iter()
        .map(fmt_f64),
    );
    row
}

fn write_curves(out: &Layout, name: &str, probs: &[f64], y: &[u8], report: &EvalReport) -> CliResult<()> {
    let roc: Vec<Vec<String>> =
        roc_curve(probs, y)?.iter().map(|p| vec![fmt_f64(p.threshold), fmt_f64(p.fpr), fmt_f64(p.tpr)]).collect();
    write_csv(&out.curves(&format!("roc_{name}.csv")), &["threshold", "fpr", "tpr"], &roc)?;
    let pr: Vec<Vec<String>> = pr_curve(probs, y)?
        .iter()
        .map(|p| vec![fmt_f64(p.threshold), fmt_f64(p.recall), fmt_f64(p.precision)])
        .collect();
    write_csv(&out.curves(&format!("pr_{name}.csv")), &["threshold", "recall", "precision"], &pr)?;
    let rel: Vec<Vec<String>> = report
        .reliability
        .iter()
        .enumerate()
        .map(|(i, b)| {
            vec![
                i.to_string(),
                fmt_f64(b.lower),
                fmt_f64(b.upper),
                b.count.to_string(),
                fmt_f64(b.confidence),
                fmt_f64(b.accuracy),
            ]
        })
        .collect();
    write_csv(
        &out.curves(&format!("reliability_{name}.csv")),
        &["bin", "lower", "upper", "count", "confidence", "accuracy"],
        &rel,
    )
}

fn meta_rows(
    split: &str,
    ids: &[usize],
    y: &[u8],
    qnn: &BranchOutputs,
    qsvm: &BranchOutputs,
    s: FusionScheme,
) -> CliResult<Vec<Vec<String>>> {
    let t = extract_meta_features(qnn, qsvm, s)?;
    Ok((0..t.len())
        .map(|i| vec![split.to_string(), ids[i].to_string(), y[i].to_string(), fmt_f64(t.qnn[i]), fmt_f64(t.qsvm[i])])
        .collect())
}

/// Out-of-fold stacking, one forest per scheme, evaluation on the test split.
pub fn fuse_eval(cfg: &RunConfig) -> CliResult<PipelineResult> {
    let out = layout(cfg);
    let train = load_split(&out, false)?;
    let test = load_split(&out, true)?;
    check_width(&test, train.x.n_cols(), "the training split")?;
    let branches = load_branches(&out, train.x.n_cols())?;
    let pcfg = cfg.pipeline_config();

    let (oof_q, oof_s) = out_of_fold_outputs(&train.x, &train.y, &pcfg)?;
    let fusions = pcfg
        .schemes
        .iter()
        .map(|&s| fit_fusion(&oof_q, &oof_s, &train.y, s, &pcfg.forest))
        .collect::<mqe_core::Result<Vec<FusionModel>>>()?;
    let trained = TrainedPipeline { branches, fusions };
    let result = trained.evaluate(&test.x, &test.y, None, pcfg.n_bins)?;

    for f in &trained.fusions {
        write_json(&out.forest_model(f.scheme), f)?;
        let mut rows = meta_rows("train", &train.ids, &train.y, &oof_q, &oof_s, f.scheme)?;
        rows.extend(meta_rows("test", &test.ids, &test.y, &result.qnn_outputs, &result.qsvm_outputs, f.scheme)?);
        write_csv(&out.reports(&format!("meta_{}.csv", f.scheme)), &["split", "id", "label", "qnn", "qsvm"], &rows)?;
    }
    write_reports(&out, &test, &result)?;
    write_config(&out.reports("config_fuse_eval.toml"), cfg)?;
    for (name, r) in named_reports(&result) {
        log::info!("{name}: F1 {:.4}, accuracy {:.4}", r.metrics.f1, r.metrics.accuracy);
    }
    Ok(result)
}

fn write_reports(out: &Layout, test: &SplitData, result: &PipelineResult) -> CliResult<()> {
    let probs: Vec<(String, &[f64])> = {
        let mut v: Vec<(String, &[f64])> =
            vec![("qnn".into(), &result.qnn_outputs.prob), ("qsvm".into(), &result.qsvm_outputs.prob)];
        v.extend(result.fused.iter().map(|f| (format!("fused_{}", f.scheme), f.probs.as_slice())));
        v
    };
    let mut summary = Vec::new();
    for ((name, report), (_, p)) in named_reports(result).into_iter().zip(&probs) {
        write_json(&out.reports(&format!("eval_{name}.json")), report)?;
        write_curves(out, &name, p, &test.y, report)?;
        summary.push(summary_row(&name, report));
    }
    write_csv(&out.reports("summary.csv"), &SUMMARY_HEADER, &summary)?;
    write_json(&out.reports("disagreement.json"), &result.disagreement)?;

    let mut header = vec!["id".to_string(), "label".into(), "qnn_logit".into(), "qnn_prob".into()];
    header.extend(["qsvm_margin".into(), "qsvm_prob".into()]);
    for f in &result.fused {
        header.push(format!("fused_{}_prob", f.scheme));
        header.push(format!("fused_{}_label", f.scheme));
    }
    let rows: Vec<Vec<String>> = (0..test.ids.len())
        .map(|i| {
            let (q, s) = (&result.qnn_outputs, &result.qsvm_outputs);
            let mut r = vec![test.ids[i].to_string(), test.y[i].to_string()];
            r.extend([q.score[i], q.prob[i], s.score[i], s.prob[i]].into_iter().map(fmt_f64));
            for f in &result.fused {
                r.push(fmt_f64(f.probs[i]));
                r.push(f.labels[i].to_string());
            }
            r
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&out.reports("predictions.csv"), &header, &rows)
}

/// One grid point of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub channel: NoiseKind,
    pub p: f64,
    /// F1 per model, in [`model_names`] order.
    pub f1: Vec<(String, f64)>,
    pub accuracy: Vec<(String, f64)>,
}

impl SweepPoint {
    pub fn f1_of(&self, name: &str) -> Option<f64> {
        self.f1.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

/// Re-evaluates the fused pipeline with trajectory noise in both branches at
/// every (channel, p) grid point. All points share the same noise seed.
pub fn noise_sweep(cfg: &RunConfig) -> CliResult<Vec<SweepPoint>> {
    let out = layout(cfg);
    let grid = cfg.noise_grid()?;
    let test = load_split(&out, true)?;
    let branches = load_branches(&out, test.x.n_cols())?;
    let mut fusions = Vec::new();
    for &s in &cfg.fusion.schemes {
        let path = out.forest_model(s);
        out.require(&path, "fuse-eval")?;
        let f: FusionModel = read_json(&path)?;
        if f.scheme != s {
            return Err(CliError::Data(format!("{} holds the {} scheme", path.display(), f.scheme)));
        }
        fusions.push(f);
    }
    let trained = TrainedPipeline { branches, fusions };
    let names = model_names(&cfg.fusion.schemes);
    let mut points = Vec::with_capacity(grid.len());
    for (kind, p, model) in grid {
        let noise = InferenceNoise { model, seed: cfg.noise_seed() };
        let r = trained.evaluate(&test.x, &test.y, Some(&noise), cfg.fusion.n_bins)?;
        let reports = named_reports(&r);
        let f1 = reports.iter().map(|(n, r)| (n.clone(), r.metrics.f1)).collect();
        let accuracy = reports.iter().map(|(n, r)| (n.clone(), r.metrics.accuracy)).collect();
        log::info!(
            "noise {kind} p={p}: fused F1 {:?}",
            r.fused.iter().map(|f| f.report.metrics.f1).collect::<Vec<_>>()
        );
        points.push(SweepPoint { channel: kind, p, f1, accuracy });
    }

    let mut header = vec!["channel".to_string(), "p".into(), "trajectories".into()];
    for n in &names {
        header.push(format!("{n}_f1"));
        header.push(format!("{n}_accuracy"));
    }
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|pt| {
            let mut r = vec![pt.channel.to_string(), fmt_f64(pt.p), cfg.noise.trajectories.to_string()];
            for ((_, f), (_, a)) in pt.f1.iter().zip(&pt.accuracy) {
                r.push(fmt_f64(*f));
                r.push(fmt_f64(*a));
            }
            r
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&out.curves("noise_sweep.csv"), &header, &rows)?;
    write_config(&out.curves("config_noise_sweep.toml"), cfg)?;
    Ok(points)
}
