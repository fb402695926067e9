//! File formats and the fixed output layout.
//!
//! Every table is comma-separated with a header row. Reals are written with
//! Rust's shortest round-trip formatting, so re-reading a file recovers the
//! exact bits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mqe_core::fusion::FusionScheme;
use mqe_core::prep::{RawTable, SchemaHints};
use mqe_core::Matrix;
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Output tree rooted at the run's `out_dir`:
/// `prep/`, `models/`, `reports/`, `curves/`.
#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn prep(&self, file: &str) -> PathBuf {
        self.root.join("prep").join(file)
    }

    pub fn models(&self, file: &str) -> PathBuf {
        self.root.join("models").join(file)
    }

    pub fn reports(&self, file: &str) -> PathBuf {
        self.root.join("reports").join(file)
    }

    pub fn curves(&self, file: &str) -> PathBuf {
        self.root.join("curves").join(file)
    }

    pub fn train_split(&self) -> PathBuf {
        self.prep("train.csv")
    }

    pub fn test_split(&self) -> PathBuf {
        self.prep("test.csv")
    }

    pub fn preprocessor(&self) -> PathBuf {
        self.prep("preprocessor.json")
    }

    pub fn manifest(&self) -> PathBuf {
        self.prep("manifest.json")
    }

    pub fn qnn_model(&self) -> PathBuf {
        self.models("qnn.json")
    }

    pub fn qsvm_model(&self) -> PathBuf {
        self.models("qsvm.json")
    }

    pub fn forest_model(&self, scheme: FusionScheme) -> PathBuf {
        self.models(&format!("forest_{scheme}.json"))
    }

    /// Fails with a missing-artifact error naming the producing command.
    pub fn require(&self, path: &Path, producer: &'static str) -> CliResult<()> {
        if path.is_file() {
            Ok(())
        } else {
            Err(CliError::MissingArtifact { path: path.to_path_buf(), producer })
        }
    }
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Header plus rows, each row already formatted.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let wrap = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(wrap)?;
    for r in rows {
        w.write_record(r).map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Lower-case hex SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for b in digest.iter() {
        write!(hex, "{b:02x}").expect("writing to a String cannot fail");
    }
    Ok(hex)
}

/// Header and string cells of a delimited file. Ragged rows and empty files
/// are data errors.
pub fn read_cells(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let headers: Vec<String> = r
        .headers()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(CliError::Data(format!("{} is empty", path.display())));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("{} has a header but no rows", path.display())));
    }
    Ok((headers, rows))
}

pub fn load_table(path: &Path, hints: &SchemaHints) -> CliResult<RawTable> {
    let (headers, rows) = read_cells(path)?;
    let table = RawTable::from_cells(&headers, &rows, hints)?;
    log::info!("read {} rows and {} columns from {}", table.n_rows(), table.columns().len(), path.display());
    Ok(table)
}

/// A preprocessed split: source row ids, projected features and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitData {
    pub ids: Vec<usize>,
    pub x: Matrix,
    pub y: Vec<u8>,
}

/// Columns `id,label,pc1..pck`.
pub fn write_split(path: &Path, split: &SplitData) -> CliResult<()> {
    let k = split.x.n_cols();
    let names: Vec<String> = (1..=k).map(|j| format!("pc{j}")).collect();
    let mut header = vec!["id", "label"];
    header.extend(names.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = (0..split.ids.len())
        .map(|i| {
            let mut r = vec![split.ids[i].to_string(), split.y[i].to_string()];
            r.extend(split.x.row(i).iter().map(|&v| fmt_f64(v)));
            r
        })
        .collect();
    write_csv(path, &header, &rows)
}

pub fn read_split(path: &Path) -> CliResult<SplitData> {
    let (headers, rows) = read_cells(path)?;
    let bad = |msg: String| CliError::Data(format!("{}: {msg}", path.display()));
    if headers.len() < 3 || headers[0] != "id" || headers[1] != "label" {
        return Err(bad("expected columns id,label,pc1..".into()));
    }
    let k = headers.len() - 2;
    let mut ids = Vec::with_capacity(rows.len());
    let mut y = Vec::with_capacity(rows.len());
    let mut data = Vec::with_capacity(rows.len() * k);
    for (n, r) in rows.iter().enumerate() {
        ids.push(r[0].parse().map_err(|_| bad(format!("row {}: bad id '{}'", n + 1, r[0])))?);
        y.push(match r[1].as_str() {
            "0" => 0,
            "1" => 1,
            other => return Err(bad(format!("row {}: label '{other}' is not 0 or 1", n + 1))),
        });
        for cell in &r[2..] {
            data.push(cell.parse::<f64>().map_err(|_| bad(format!("row {}: bad value '{cell}'", n + 1)))?);
        }
    }
    let x = Matrix::from_vec(rows.len(), k, data)?;
    Ok(SplitData { ids, x, y })
}
