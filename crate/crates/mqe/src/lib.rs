//! Files, configuration and commands around [`mqe_core`].
//!
//! A run is driven by a [`config::RunConfig`] and writes a fixed tree under
//! its output directory:
//!
//! ```text
//! prep/     train.csv, test.csv, preprocessor.json, manifest.json
//! models/   qnn.json, qsvm.json, forest_<scheme>.json
//! reports/  qnn_history.csv, qsvm_audit.json, eval_<model>.json, summary.csv,
//!           disagreement.json, meta_<scheme>.csv, predictions.csv
//! curves/   roc_<model>.csv, pr_<model>.csv, reliability_<model>.csv,
//!           noise_sweep.csv
//! ```

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
pub use io::Layout;
