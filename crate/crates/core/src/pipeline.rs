//! End-to-end orchestration on preprocessed matrices: branch training,
//! out-of-fold stacking, forest fusion and evaluation, with optional noise
//! injected into both branches at inference.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::forest::{fit_forest, Forest, ForestConfig};
use crate::fusion::{disagreement_report, extract_meta_features, BranchOutputs, DisagreementReport, FusionScheme};
use crate::linalg::Matrix;
use crate::metrics::{evaluate, EvalReport, DEFAULT_BINS};
use crate::par::map_indexed;
use crate::prep::stratified_folds;
use crate::qnn::{qnn_predict, train_qnn, QnnParams, TrainConfig, TrainHistory};
use crate::qsim::NoiseModel;
use crate::qsvm::{train_qsvm, QsvmConfig, QsvmModel};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct PipelineConfig {
    pub qnn: TrainConfig,
    pub qsvm: QsvmConfig,
    pub forest: ForestConfig,
    /// Folds for the out-of-fold branch outputs the forest is trained on.
    pub meta_folds: usize,
    pub meta_seed: u64,
    pub schemes: Vec<FusionScheme>,
    pub n_bins: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            qnn: TrainConfig::default(),
            qsvm: QsvmConfig::default(),
            forest: ForestConfig::default(),
            meta_folds: 3,
            meta_seed: 0,
            schemes: FusionScheme::ALL.to_vec(),
            n_bins: DEFAULT_BINS,
        }
    }
}

/// The two quantum branches trained on the full training split.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchModels {
    pub qnn: QnnParams,
    pub qnn_history: TrainHistory,
    pub qsvm: QsvmModel,
}

pub fn train_branches(x: &Matrix, y: &[u8], config: &PipelineConfig) -> Result<BranchModels> {
    let (qnn, qnn_history) = train_qnn(x, y, &config.qnn)?;
    let qsvm = train_qsvm(x, y, &config.qsvm)?;
    Ok(BranchModels { qnn, qnn_history, qsvm })
}

/// Optional inference noise for both branches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferenceNoise {
    pub model: NoiseModel,
    pub seed: u64,
}

/// Branch outputs on `x`, one per row, tagged with `ids`.
pub fn branch_outputs(
    qnn: &QnnParams,
    qsvm: &QsvmModel,
    x: &Matrix,
    ids: Vec<usize>,
    noise: Option<&InferenceNoise>,
) -> Result<(BranchOutputs, BranchOutputs)> {
    let qnn_out = qnn_predict(x, qnn, noise.map(|n| &n.model), noise.map_or(0, |n| derive_seed(n.seed, 1)))?;
    let qsvm_out = qsvm.predict(x, noise.map(|n| (&n.model, derive_seed(n.seed, 2))))?;
    let a = BranchOutputs::new(
        ids.clone(),
        qnn_out.iter().map(|o| o.logit).collect(),
        qnn_out.iter().map(|o| o.prob).collect(),
    )?;
    let b = BranchOutputs::new(ids, qsvm_out.margin, qsvm_out.prob)?;
    Ok((a, b))
}

/// Branch outputs for every training row from branches that never saw it.
pub fn out_of_fold_outputs(x: &Matrix, y: &[u8], config: &PipelineConfig) -> Result<(BranchOutputs, BranchOutputs)> {
    let m = y.len();
    if x.n_rows() != m {
        return Err(Error::DimensionMismatch { expected: x.n_rows(), actual: m });
    }
    let fold = stratified_folds(y, config.meta_folds, config.meta_seed)?;
    let parts = map_indexed(config.meta_folds, |f| -> Result<_> {
        let train: Vec<usize> = (0..m).filter(|&i| fold[i] != f).collect();
        let test: Vec<usize> = (0..m).filter(|&i| fold[i] == f).collect();
        if test.is_empty() {
            return Ok(None);
        }
        let yt: Vec<u8> = train.iter().map(|&i| y[i]).collect();
        let mut cfg = config.clone();
        cfg.qnn.seed = derive_seed(config.qnn.seed, 1 + f as u64);
        cfg.qsvm.seed = derive_seed(config.qsvm.seed, 1 + f as u64);
        let models = train_branches(&x.select_rows(&train), &yt, &cfg)?;
        let out = branch_outputs(&models.qnn, &models.qsvm, &x.select_rows(&test), test, None)?;
        Ok(Some(out))
    });
    let (mut q_score, mut q_prob) = (alloc::vec![0.0; m], alloc::vec![0.0; m]);
    let (mut s_score, mut s_prob) = (alloc::vec![0.0; m], alloc::vec![0.0; m]);
    for part in parts {
        if let Some((q, s)) = part? {
            for (k, &i) in q.ids.iter().enumerate() {
                q_score[i] = q.score[k];
                q_prob[i] = q.prob[k];
                s_score[i] = s.score[k];
                s_prob[i] = s.prob[k];
            }
        }
    }
    Ok((BranchOutputs::sequential(q_score, q_prob)?, BranchOutputs::sequential(s_score, s_prob)?))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FusionModel {
    pub scheme: FusionScheme,
    pub forest: Forest,
}

pub fn fit_fusion(
    qnn: &BranchOutputs,
    qsvm: &BranchOutputs,
    y: &[u8],
    scheme: FusionScheme,
    forest: &ForestConfig,
) -> Result<FusionModel> {
    let table = extract_meta_features(qnn, qsvm, scheme)?;
    Ok(FusionModel { scheme, forest: fit_forest(&table.to_matrix(), y, forest)? })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeResult {
    pub scheme: FusionScheme,
    pub labels: Vec<u8>,
    pub probs: Vec<f64>,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    pub qnn_outputs: BranchOutputs,
    pub qsvm_outputs: BranchOutputs,
    pub qnn_report: EvalReport,
    pub qsvm_report: EvalReport,
    pub fused: Vec<SchemeResult>,
    pub disagreement: DisagreementReport,
}

impl PipelineResult {
    pub fn scheme(&self, scheme: FusionScheme) -> Option<&SchemeResult> {
        self.fused.iter().find(|r| r.scheme == scheme)
    }

    pub fn best_fused_f1(&self) -> f64 {
        self.fused.iter().map(|r| r.report.metrics.f1).fold(f64::NEG_INFINITY, f64::max)
    }
}

fn branch_report(out: &BranchOutputs, y: &[u8], n_bins: usize) -> Result<EvalReport> {
    evaluate(y, &out.labels(), &out.prob, n_bins)
}

/// Scores precomputed branch outputs with each fitted fusion model.
pub fn evaluate_outputs(
    qnn_out: BranchOutputs,
    qsvm_out: BranchOutputs,
    fusions: &[FusionModel],
    y: &[u8],
    n_bins: usize,
) -> Result<PipelineResult> {
    let qnn_report = branch_report(&qnn_out, y, n_bins)?;
    let qsvm_report = branch_report(&qsvm_out, y, n_bins)?;
    let disagreement = disagreement_report(&qnn_out.labels(), &qsvm_out.labels(), y)?;
    let fused = fusions
        .iter()
        .map(|f| {
            let table = extract_meta_features(&qnn_out, &qsvm_out, f.scheme)?;
            let pred = f.forest.predict(&table.to_matrix())?;
            let report = evaluate(y, &pred.labels, &pred.probs, n_bins)?;
            Ok(SchemeResult { scheme: f.scheme, labels: pred.labels, probs: pred.probs, report })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PipelineResult { qnn_outputs: qnn_out, qsvm_outputs: qsvm_out, qnn_report, qsvm_report, fused, disagreement })
}

/// Everything needed to score new rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPipeline {
    pub branches: BranchModels,
    pub fusions: Vec<FusionModel>,
}

impl TrainedPipeline {
    pub fn evaluate(
        &self,
        x: &Matrix,
        y: &[u8],
        noise: Option<&InferenceNoise>,
        n_bins: usize,
    ) -> Result<PipelineResult> {
        let (q, s) = branch_outputs(&self.branches.qnn, &self.branches.qsvm, x, (0..y.len()).collect(), noise)?;
        evaluate_outputs(q, s, &self.fusions, y, n_bins)
    }
}

/// Trains both branches, stacks a forest per scheme on out-of-fold branch
/// outputs, and evaluates on the test split.
pub fn run_pipeline(
    x_train: &Matrix,
    y_train: &[u8],
    x_test: &Matrix,
    y_test: &[u8],
    config: &PipelineConfig,
) -> Result<(TrainedPipeline, PipelineResult)> {
    if config.schemes.is_empty() {
        return Err(Error::InvalidArgument("no fusion scheme requested".into()));
    }
    let branches = train_branches(x_train, y_train, config)?;
    let (oof_q, oof_s) = out_of_fold_outputs(x_train, y_train, config)?;
    let fusions = config
        .schemes
        .iter()
        .map(|&s| fit_fusion(&oof_q, &oof_s, y_train, s, &config.forest))
        .collect::<Result<Vec<_>>>()?;
    let trained = TrainedPipeline { branches, fusions };
    let result = trained.evaluate(x_test, y_test, None, config.n_bins)?;
    Ok((trained, result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::ForestConfig;

    #[test]
    fn complementary_branches_are_fused_past_both() {
        // each branch is wrong on a disjoint third of the attacks, but a
        // two-feature rule over the probabilities recovers every label
        let n = 300;
        let y: Vec<u8> = (0..n).map(|i| u8::from(i % 2 == 0)).collect();
        let mut qp = Vec::new();
        let mut sp = Vec::new();
        for (i, &t) in y.iter().enumerate() {
            let (a, b) = match (t, i % 6) {
                (1, 0) => (0.45, 0.95),
                (1, 2) => (0.95, 0.45),
                (1, _) => (0.9, 0.9),
                _ => (0.1 + 0.3 * ((i / 2) % 2) as f64, 0.4 - 0.3 * ((i / 2) % 2) as f64),
            };
            qp.push(a);
            sp.push(b);
        }
        let logit = |p: f64| libm::log(p / (1.0 - p));
        let q = BranchOutputs::sequential(qp.iter().map(|&p| logit(p)).collect(), qp.clone()).unwrap();
        let s = BranchOutputs::sequential(sp.iter().map(|&p| logit(p)).collect(), sp.clone()).unwrap();
        let cfg = ForestConfig { n_trees: 50, seed: 1, ..ForestConfig::default() };
        let fusion = fit_fusion(&q, &s, &y, FusionScheme::Probability, &cfg).unwrap();
        let r = evaluate_outputs(q, s, &[fusion], &y, 15).unwrap();
        let fused = r.fused[0].report.metrics.accuracy;
        assert!(fused > r.qnn_report.metrics.accuracy);
        assert!(fused > r.qsvm_report.metrics.accuracy);
        assert_eq!(r.disagreement.errors_both, 0);
    }

    #[test]
    fn empty_scheme_list_rejected() {
        let x = Matrix::from_rows(&[[0.1, 0.2], [0.3, 0.1]]).unwrap();
        let cfg = PipelineConfig { schemes: Vec::new(), ..PipelineConfig::default() };
        assert!(run_pipeline(&x, &[0, 1], &x, &[0, 1], &cfg).is_err());
    }
}
