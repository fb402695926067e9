//! Run configuration: a sectioned TOML document whose defaults follow the
//! reference hyperparameters (13 qubits, 7 layers, Adam at 0.01, batch 32,
//! 100 epochs, C = 10, 100 unrestricted Gini trees, 80/20 split).

use std::path::{Path, PathBuf};

use mqe_core::forest::ForestConfig;
use mqe_core::fusion::FusionScheme;
use mqe_core::pipeline::PipelineConfig;
use mqe_core::qnn::TrainConfig;
use mqe_core::qsim::{NoiseChannel, NoiseKind, NoiseModel};
use mqe_core::qsvm::{QsvmConfig, SmoConfig};
use mqe_core::rng::derive_seed;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub path: PathBuf,
    pub label_column: String,
    /// Label value meaning benign; every other value is an attack.
    pub benign_label: String,
    /// Columns forced categorical. Omit to infer from the cells.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub categorical: Option<Vec<String>>,
    pub drop_columns: Vec<String>,
    /// Stratified subsample size after cleaning; 0 keeps every row.
    pub subsample: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subsample_seed: Option<u64>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            path: PathBuf::from("data.csv"),
            label_column: "label".into(),
            benign_label: "0".into(),
            categorical: None,
            drop_columns: Vec::new(),
            subsample: 0,
            subsample_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepSection {
    pub train_ratio: f64,
    pub n_components: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for PrepSection {
    fn default() -> Self {
        Self { train_ratio: 0.8, n_components: 13, seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QnnSection {
    pub n_qubits: usize,
    pub layers: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub validation_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for QnnSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            n_qubits: d.n_qubits,
            layers: d.layers,
            learning_rate: d.learning_rate,
            batch_size: d.batch_size,
            epochs: d.epochs,
            validation_fraction: d.validation_fraction,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QsvmSection {
    pub c: f64,
    pub tol: f64,
    /// SMO iteration cap per training sample.
    pub max_passes: usize,
    pub platt_folds: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for QsvmSection {
    fn default() -> Self {
        let d = QsvmConfig::default();
        Self { c: d.smo.c, tol: d.smo.tol, max_passes: d.smo.max_passes, platt_folds: d.platt_folds, seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestSection {
    pub n_trees: usize,
    /// 0 grows every tree without a depth limit.
    pub max_depth: usize,
    /// 0 uses ⌈√d⌉ features per split.
    pub features_per_split: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for ForestSection {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: 0, features_per_split: 0, seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSection {
    pub schemes: Vec<FusionScheme>,
    /// Folds for the out-of-fold branch outputs the forests are trained on.
    pub meta_folds: usize,
    pub n_bins: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for FusionSection {
    fn default() -> Self {
        Self { schemes: FusionScheme::ALL.to_vec(), meta_folds: 3, n_bins: 15, seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub channels: Vec<NoiseKind>,
    pub probabilities: Vec<f64>,
    pub trajectories: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            channels: NoiseKind::ALL.to_vec(),
            probabilities: vec![0.05, 0.1, 0.2, 0.4, 0.6, 0.8],
            trajectories: NoiseModel::DEFAULT_TRAJECTORIES,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Root seed; every stage seed left unset is derived from it.
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Worker threads; 0 lets the pool pick.
    pub threads: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { seed: 0, out_dir: PathBuf::from("out"), threads: 0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    pub prep: PrepSection,
    pub qnn: QnnSection,
    pub qsvm: QsvmSection,
    pub forest: ForestSection,
    pub fusion: FusionSection,
    pub noise: NoiseSection,
    pub run: RunSection,
}

/// Stage ids fed to [`derive_seed`].
mod stage {
    pub const SUBSAMPLE: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const QNN: u64 = 3;
    pub const QSVM: u64 = 4;
    pub const FOREST: u64 = 5;
    pub const FUSION: u64 = 6;
    pub const NOISE: u64 = 7;
}

/// Derived seeds are kept below 2⁶³ so they survive a TOML round trip.
fn stage_seed(root: u64, stage: u64) -> u64 {
    derive_seed(root, stage) & (i64::MAX as u64)
}

fn seed_of(s: Option<u64>) -> u64 {
    s.expect("config seeds are resolved before use")
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads `path`, or starts from the defaults when `path` is `None`.
    /// Relative data paths are resolved against the config file's directory.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if cfg.data.path.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.data.path = dir.join(&cfg.data.path);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Fills every unset stage seed from the root seed.
    pub fn resolve_seeds(&mut self) {
        let root = self.run.seed;
        let fill = |s: &mut Option<u64>, k: u64| {
            s.get_or_insert(stage_seed(root, k));
        };
        fill(&mut self.data.subsample_seed, stage::SUBSAMPLE);
        fill(&mut self.prep.seed, stage::SPLIT);
        fill(&mut self.qnn.seed, stage::QNN);
        fill(&mut self.qsvm.seed, stage::QSVM);
        fill(&mut self.forest.seed, stage::FOREST);
        fill(&mut self.fusion.seed, stage::FUSION);
        fill(&mut self.noise.seed, stage::NOISE);
    }

    /// Applies command-line overrides, resolves seeds and validates.
    pub fn finalize(mut self, seed: Option<u64>, out: Option<PathBuf>) -> CliResult<Self> {
        if let Some(s) = seed {
            self.run.seed = s;
        }
        if let Some(o) = out {
            self.run.out_dir = o;
        }
        self.resolve_seeds();
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.data.label_column.is_empty() {
            return bad("data.label_column must not be empty".into());
        }
        if !(self.prep.train_ratio > 0.0 && self.prep.train_ratio < 1.0) {
            return bad(format!("prep.train_ratio = {} must lie in (0, 1)", self.prep.train_ratio));
        }
        if self.prep.n_components == 0 {
            return bad("prep.n_components must be positive".into());
        }
        if self.qnn.n_qubits != self.prep.n_components {
            return bad(format!(
                "qnn.n_qubits = {} must equal prep.n_components = {}",
                self.qnn.n_qubits, self.prep.n_components
            ));
        }
        if self.qnn.n_qubits > mqe_core::qsim::MAX_QUBITS {
            return bad(format!("qnn.n_qubits = {} exceeds {}", self.qnn.n_qubits, mqe_core::qsim::MAX_QUBITS));
        }
        if self.qnn.layers == 0 || self.qnn.batch_size == 0 {
            return bad("qnn.layers and qnn.batch_size must be positive".into());
        }
        if !(self.qnn.learning_rate > 0.0 && self.qnn.learning_rate.is_finite()) {
            return bad("qnn.learning_rate must be positive".into());
        }
        if !(0.0..1.0).contains(&self.qnn.validation_fraction) {
            return bad("qnn.validation_fraction must lie in [0, 1)".into());
        }
        if !(self.qsvm.c > 0.0 && self.qsvm.c.is_finite()) || !(self.qsvm.tol > 0.0 && self.qsvm.tol.is_finite()) {
            return bad("qsvm.c and qsvm.tol must be positive".into());
        }
        if self.qsvm.max_passes == 0 || self.qsvm.platt_folds < 2 {
            return bad("qsvm.max_passes must be positive and qsvm.platt_folds at least 2".into());
        }
        if self.forest.n_trees == 0 {
            return bad("forest.n_trees must be positive".into());
        }
        if self.fusion.schemes.is_empty() {
            return bad("fusion.schemes must name at least one scheme".into());
        }
        if self.fusion.meta_folds < 2 || self.fusion.n_bins == 0 {
            return bad("fusion.meta_folds must be at least 2 and fusion.n_bins positive".into());
        }
        if self.noise.trajectories == 0 {
            return bad("noise.trajectories must be positive".into());
        }
        if let Some(p) = self.noise.probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return bad(format!("noise probability {p} outside [0, 1]"));
        }
        Ok(())
    }

    pub fn qnn_config(&self) -> TrainConfig {
        TrainConfig {
            n_qubits: self.qnn.n_qubits,
            layers: self.qnn.layers,
            learning_rate: self.qnn.learning_rate,
            batch_size: self.qnn.batch_size,
            epochs: self.qnn.epochs,
            validation_fraction: self.qnn.validation_fraction,
            seed: seed_of(self.qnn.seed),
        }
    }

    pub fn qsvm_config(&self) -> QsvmConfig {
        QsvmConfig {
            smo: SmoConfig { c: self.qsvm.c, tol: self.qsvm.tol, max_passes: self.qsvm.max_passes },
            platt_folds: self.qsvm.platt_folds,
            seed: seed_of(self.qsvm.seed),
        }
    }

    pub fn forest_config(&self) -> ForestConfig {
        let nonzero = |v: usize| (v > 0).then_some(v);
        ForestConfig {
            n_trees: self.forest.n_trees,
            max_depth: nonzero(self.forest.max_depth),
            features_per_split: nonzero(self.forest.features_per_split),
            seed: seed_of(self.forest.seed),
        }
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            qnn: self.qnn_config(),
            qsvm: self.qsvm_config(),
            forest: self.forest_config(),
            meta_folds: self.fusion.meta_folds,
            meta_seed: seed_of(self.fusion.seed),
            schemes: self.fusion.schemes.clone(),
            n_bins: self.fusion.n_bins,
        }
    }

    /// (channel, noise model) for every grid point, channel-major.
    pub fn noise_grid(&self) -> CliResult<Vec<(NoiseKind, f64, NoiseModel)>> {
        if self.noise.channels.is_empty() || self.noise.probabilities.is_empty() {
            return Err(CliError::Config("noise grid is empty".into()));
        }
        let mut grid = Vec::new();
        for &kind in &self.noise.channels {
            for &p in &self.noise.probabilities {
                let channel = NoiseChannel::new(kind, p).map_err(|e| CliError::Config(e.to_string()))?;
                let model =
                    NoiseModel::new(channel, self.noise.trajectories).map_err(|e| CliError::Config(e.to_string()))?;
                grid.push((kind, p, model));
            }
        }
        Ok(grid)
    }

    pub fn noise_seed(&self) -> u64 {
        seed_of(self.noise.seed)
    }

    pub fn split_seed(&self) -> u64 {
        seed_of(self.prep.seed)
    }

    pub fn subsample_seed(&self) -> u64 {
        seed_of(self.data.subsample_seed)
    }

    /// The resolved config as written next to the artifacts. The output
    /// directory is left out so relocated trees stay byte-identical.
    pub fn provenance_toml(&self) -> String {
        let mut c = self.clone();
        c.run.out_dir = PathBuf::new();
        c.to_toml()
    }
}
