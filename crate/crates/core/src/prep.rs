//! Tabular preprocessing: typing, cleaning, label encoding, standardization,
//! PCA down to the qubit count, and stratified splitting.
//!
//! Every fitted statistic comes from the training rows only; [`Preprocessor`]
//! bundles them so the same transform can be replayed on test data.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymmetricEigen};
use crate::rng::task_rng;

pub fn check_binary_labels(labels: &[u8]) -> Result<()> {
    match labels.iter().find(|&&y| y > 1) {
        Some(&y) => Err(Error::Label(y)),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnValues {
    Numeric(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

impl ColumnValues {
    pub fn len(&self) -> usize {
        match self {
            ColumnValues::Numeric(v) => v.len(),
            ColumnValues::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> ColumnKind {
        match self {
            ColumnValues::Numeric(_) => ColumnKind::Numeric,
            ColumnValues::Categorical(_) => ColumnKind::Categorical,
        }
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            ColumnValues::Numeric(v) => v[row].is_none(),
            ColumnValues::Categorical(v) => v[row].is_none(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawColumn {
    pub name: String,
    pub values: ColumnValues,
}

/// Typed table as read from a delimited file; cells may be missing.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    columns: Vec<RawColumn>,
    n_rows: usize,
}

/// Cells treated as missing regardless of column type.
pub fn is_missing_token(cell: &str) -> bool {
    matches!(cell.trim(), "" | "?" | "NA" | "N/A" | "na" | "NaN" | "nan" | "null" | "NULL" | "None")
}

fn parse_numeric(cell: &str) -> Option<f64> {
    if is_missing_token(cell) {
        return None;
    }
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// How to type columns when building a [`RawTable`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SchemaHints {
    /// Columns forced categorical. `None` infers: a column is categorical
    /// when fewer than half of its non-missing cells parse as numbers.
    pub categorical: Option<Vec<String>>,
}

impl RawTable {
    pub fn new(columns: Vec<RawColumn>) -> Result<Self> {
        let n_rows = columns.first().map_or(0, |c| c.values.len());
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::DuplicateColumn(c.name.clone()));
            }
            if c.values.len() != n_rows {
                return Err(Error::DimensionMismatch { expected: n_rows, actual: c.values.len() });
            }
        }
        Ok(Self { columns, n_rows })
    }

    /// Types string cells column by column. Numeric columns keep unparseable
    /// or non-finite cells as missing.
    pub fn from_cells(headers: &[String], rows: &[Vec<String>], hints: &SchemaHints) -> Result<Self> {
        for (i, h) in headers.iter().enumerate() {
            if headers[..i].contains(h) {
                return Err(Error::DuplicateColumn(h.clone()));
            }
        }
        if let Some(cat) = &hints.categorical {
            if let Some(missing) = cat.iter().find(|c| !headers.contains(c)) {
                return Err(Error::MissingColumn(missing.clone()));
            }
        }
        for r in rows {
            if r.len() != headers.len() {
                return Err(Error::DimensionMismatch { expected: headers.len(), actual: r.len() });
            }
        }
        let mut columns = Vec::with_capacity(headers.len());
        for (j, name) in headers.iter().enumerate() {
            let cells = rows.iter().map(|r| r[j].as_str());
            let categorical = match &hints.categorical {
                Some(cat) => cat.contains(name),
                None => {
                    let present = cells.clone().filter(|c| !is_missing_token(c)).count();
                    let numeric = cells.clone().filter(|c| parse_numeric(c).is_some()).count();
                    present > 0 && 2 * numeric < present
                }
            };
            let values = if categorical {
                ColumnValues::Categorical(cells.map(|c| (!is_missing_token(c)).then(|| c.trim().to_string())).collect())
            } else {
                ColumnValues::Numeric(cells.map(parse_numeric).collect())
            };
            columns.push(RawColumn { name: name.clone(), values });
        }
        Self::new(columns).map(|mut t| {
            t.n_rows = rows.len();
            t
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[RawColumn] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Result<&RawColumn> {
        self.columns.iter().find(|c| c.name == name).ok_or_else(|| Error::MissingColumn(name.to_string()))
    }
}

/// Which column holds the label and which value means benign (0).
/// Every other present value is an attack (1).
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSpec {
    pub column: String,
    pub benign: String,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum CleanValues {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CleanColumn {
    pub name: String,
    pub values: CleanValues,
}

/// Feature columns with no missing cells and binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanTable {
    pub columns: Vec<CleanColumn>,
    pub labels: Vec<u8>,
}

impl CleanTable {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn select_rows(&self, idx: &[usize]) -> CleanTable {
        let columns = self
            .columns
            .iter()
            .map(|c| CleanColumn {
                name: c.name.clone(),
                values: match &c.values {
                    CleanValues::Numeric(v) => CleanValues::Numeric(idx.iter().map(|&i| v[i]).collect()),
                    CleanValues::Categorical(v) => {
                        CleanValues::Categorical(idx.iter().map(|&i| v[i].clone()).collect())
                    }
                },
            })
            .collect();
        CleanTable { columns, labels: idx.iter().map(|&i| self.labels[i]).collect() }
    }
}

/// Drops every row with a missing cell (label included) and maps labels to
/// {0, 1}. Returns the table and the number of dropped rows.
pub fn clean(raw: &RawTable, label: &LabelSpec, drop_columns: &[String]) -> Result<(CleanTable, usize)> {
    let label_col = raw.column(&label.column)?;
    for d in drop_columns {
        raw.column(d)?;
    }
    let features: Vec<&RawColumn> =
        raw.columns().iter().filter(|c| c.name != label.column && !drop_columns.contains(&c.name)).collect();
    if features.is_empty() {
        return Err(Error::Empty("feature columns"));
    }
    let benign_num = parse_numeric(&label.benign);
    let keep: Vec<usize> = (0..raw.n_rows())
        .filter(|&r| !label_col.values.is_missing(r) && features.iter().all(|c| !c.values.is_missing(r)))
        .collect();
    let labels = keep
        .iter()
        .map(|&r| match &label_col.values {
            ColumnValues::Numeric(v) => u8::from(Some(v[r].unwrap_or(f64::NAN)) != benign_num),
            ColumnValues::Categorical(v) => u8::from(v[r].as_deref() != Some(label.benign.trim())),
        })
        .collect();
    let columns = features
        .iter()
        .map(|c| CleanColumn {
            name: c.name.clone(),
            values: match &c.values {
                ColumnValues::Numeric(v) => CleanValues::Numeric(keep.iter().map(|&r| v[r].unwrap_or(0.0)).collect()),
                ColumnValues::Categorical(v) => {
                    CleanValues::Categorical(keep.iter().map(|&r| v[r].clone().unwrap_or_default()).collect())
                }
            },
        })
        .collect();
    let dropped = raw.n_rows() - keep.len();
    if dropped > 0 {
        log::info!("dropped {dropped} rows with missing values");
    }
    Ok((CleanTable { columns, labels }, dropped))
}

/// Lexicographically sorted category list; code = position.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LabelEncoder {
    pub column: String,
    pub categories: Vec<String>,
}

impl LabelEncoder {
    pub fn fit<S: AsRef<str>>(column: &str, values: &[S]) -> Self {
        let mut categories: Vec<String> = values.iter().map(|v| v.as_ref().to_string()).collect();
        categories.sort();
        categories.dedup();
        Self { column: column.to_string(), categories }
    }

    pub fn code(&self, value: &str) -> Result<u32> {
        self.categories
            .binary_search_by(|c| c.as_str().cmp(value))
            .map(|i| i as u32)
            .map_err(|_| Error::UnseenCategory { column: self.column.clone(), value: value.to_string() })
    }

    pub fn transform<S: AsRef<str>>(&self, values: &[S]) -> Result<Vec<u32>> {
        values.iter().map(|v| self.code(v.as_ref())).collect()
    }

    pub fn mapping(&self) -> BTreeMap<String, u32> {
        self.categories.iter().enumerate().map(|(i, c)| (c.clone(), i as u32)).collect()
    }
}

/// Per-column z-scoring with population standard deviation. Columns with
/// σ = 0 map to 0 and are flagged in `constant`.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub constant: Vec<bool>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Empty("standardizer input"));
        }
        let m = x.n_rows() as f64;
        let d = x.n_cols();
        let mut means = vec![0.0; d];
        for r in x.rows() {
            for (mu, v) in means.iter_mut().zip(r) {
                *mu += v;
            }
        }
        means.iter_mut().for_each(|mu| *mu /= m);
        let mut vars = vec![0.0; d];
        for r in x.rows() {
            for ((s, v), mu) in vars.iter_mut().zip(r).zip(&means) {
                *s += (v - mu) * (v - mu);
            }
        }
        let stds: Vec<f64> = vars.iter().map(|s| libm::sqrt(s / m)).collect();
        let constant: Vec<bool> = stds.iter().map(|&s| s <= 1e-12 * 1.0f64.max(s)).collect();
        if constant.iter().any(|&c| c) {
            log::warn!("{} constant column(s) standardized to zero", constant.iter().filter(|&&c| c).count());
        }
        Ok(Self { means, stds, constant })
    }

    pub fn is_fitted(&self) -> bool {
        !self.means.is_empty()
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if !self.is_fitted() {
            return Err(Error::NotFitted);
        }
        if x.n_cols() != self.means.len() {
            return Err(Error::DimensionMismatch { expected: self.means.len(), actual: x.n_cols() });
        }
        let mut out = x.clone();
        for i in 0..out.n_rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = if self.constant[j] { 0.0 } else { (*v - self.means[j]) / self.stds[j] };
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// d×k, one principal axis per column.
    pub components: Matrix,
    /// Population variance along each retained axis, non-increasing.
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    /// Top-`k` principal axes of the centered data. Each axis is signed so its
    /// largest-magnitude loading is positive.
    pub fn fit(x: &Matrix, k: usize) -> Result<Self> {
        let (m, d) = (x.n_rows(), x.n_cols());
        if k == 0 || k > m.min(d) {
            return Err(Error::InvalidArgument(alloc::format!(
                "cannot keep {k} components from {m} rows × {d} columns"
            )));
        }
        let mut mean = vec![0.0; d];
        for r in x.rows() {
            for (mu, v) in mean.iter_mut().zip(r) {
                *mu += v;
            }
        }
        mean.iter_mut().for_each(|mu| *mu /= m as f64);
        let mut cov = Matrix::zeros(d, d);
        for r in x.rows() {
            for a in 0..d {
                let da = r[a] - mean[a];
                if da == 0.0 {
                    continue;
                }
                for b in a..d {
                    let v = cov.get(a, b) + da * (r[b] - mean[b]);
                    cov.set(a, b, v);
                }
            }
        }
        for a in 0..d {
            for b in a..d {
                let v = cov.get(a, b) / m as f64;
                cov.set(a, b, v);
                cov.set(b, a, v);
            }
        }
        let eig = SymmetricEigen::new(&cov)?;
        let mut components = Matrix::zeros(d, k);
        for c in 0..k {
            let col = eig.vectors.column(c);
            let mut lead = 0;
            for (i, v) in col.iter().enumerate() {
                if libm::fabs(*v) > libm::fabs(col[lead]) + 1e-12 {
                    lead = i;
                }
            }
            let sign = if col[lead] < 0.0 { -1.0 } else { 1.0 };
            for (i, v) in col.iter().enumerate() {
                components.set(i, c, sign * v);
            }
        }
        let explained_variance: Vec<f64> = eig.values[..k].iter().map(|v| v.max(0.0)).collect();
        if explained_variance[k - 1] < 1e-12 {
            log::warn!(
                "pca: retained component {k} has variance {:e}; input is rank-deficient",
                explained_variance[k - 1]
            );
        }
        Ok(Self { mean, components, explained_variance })
    }

    pub fn n_components(&self) -> usize {
        self.components.n_cols()
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.n_cols() != self.mean.len() {
            return Err(Error::DimensionMismatch { expected: self.mean.len(), actual: x.n_cols() });
        }
        let k = self.n_components();
        let mut out = Matrix::zeros(x.n_rows(), k);
        for i in 0..x.n_rows() {
            let r = x.row(i);
            for c in 0..k {
                let mut acc = 0.0;
                for (j, v) in r.iter().enumerate() {
                    acc += (v - self.mean[j]) * self.components.get(j, c);
                }
                out.set(i, c, acc);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureColumn {
    pub name: String,
    pub kind: ColumnKind,
}

/// Everything fitted on the training split: encoders, scaling and PCA.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Preprocessor {
    pub columns: Vec<FeatureColumn>,
    pub encoders: Vec<LabelEncoder>,
    pub standardizer: Standardizer,
    pub pca: PcaModel,
}

impl Preprocessor {
    pub fn fit(train: &CleanTable, n_components: usize) -> Result<Self> {
        if train.n_rows() == 0 {
            return Err(Error::Empty("training split"));
        }
        let columns = train
            .columns
            .iter()
            .map(|c| FeatureColumn {
                name: c.name.clone(),
                kind: match c.values {
                    CleanValues::Numeric(_) => ColumnKind::Numeric,
                    CleanValues::Categorical(_) => ColumnKind::Categorical,
                },
            })
            .collect();
        let encoders = train
            .columns
            .iter()
            .filter_map(|c| match &c.values {
                CleanValues::Categorical(v) => Some(LabelEncoder::fit(&c.name, v)),
                CleanValues::Numeric(_) => None,
            })
            .collect();
        let mut pre = Self {
            columns,
            encoders,
            standardizer: Standardizer::default(),
            pca: PcaModel { mean: Vec::new(), components: Matrix::zeros(0, 0), explained_variance: Vec::new() },
        };
        let encoded = pre.encode(train)?;
        pre.standardizer = Standardizer::fit(&encoded)?;
        let scaled = pre.standardizer.transform(&encoded)?;
        pre.pca = PcaModel::fit(&scaled, n_components)?;
        Ok(pre)
    }

    /// Raw feature matrix with categorical columns replaced by their codes.
    pub fn encode(&self, table: &CleanTable) -> Result<Matrix> {
        if table.columns.len() != self.columns.len() {
            return Err(Error::DimensionMismatch { expected: self.columns.len(), actual: table.columns.len() });
        }
        let m = table.n_rows();
        let d = self.columns.len();
        let mut out = Matrix::zeros(m, d);
        for (j, (col, meta)) in table.columns.iter().zip(&self.columns).enumerate() {
            if col.name != meta.name {
                return Err(Error::MissingColumn(meta.name.clone()));
            }
            match &col.values {
                CleanValues::Numeric(v) => {
                    for (i, x) in v.iter().enumerate() {
                        out.set(i, j, *x);
                    }
                }
                CleanValues::Categorical(v) => {
                    let enc = self
                        .encoders
                        .iter()
                        .find(|e| e.column == col.name)
                        .ok_or_else(|| Error::MissingColumn(col.name.clone()))?;
                    for (i, code) in enc.transform(v)?.into_iter().enumerate() {
                        out.set(i, j, f64::from(code));
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn transform(&self, table: &CleanTable) -> Result<Matrix> {
        let encoded = self.encode(table)?;
        let scaled = self.standardizer.transform(&encoded)?;
        self.pca.transform(&scaled)
    }
}

fn class_indices(labels: &[u8]) -> Result<[Vec<usize>; 2]> {
    check_binary_labels(labels)?;
    let mut by_class = [Vec::new(), Vec::new()];
    for (i, &y) in labels.iter().enumerate() {
        by_class[usize::from(y)].push(i);
    }
    Ok(by_class)
}

/// Stratified shuffle split. Each class keeps `round(count · train_ratio)`
/// rows for training, clamped so both sides get at least one. Index lists are
/// returned sorted.
pub fn stratified_split(labels: &[u8], train_ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(Error::InvalidArgument(alloc::format!("train ratio {train_ratio} not in (0, 1)")));
    }
    let by_class = class_indices(labels)?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut idx) in by_class.into_iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 2 {
            return Err(Error::TooFewSamples { class: class as u8, count: idx.len(), needed: 2 });
        }
        idx.shuffle(&mut task_rng(seed, class as u64));
        let n_test = libm::round(idx.len() as f64 * (1.0 - train_ratio)) as usize;
        let n_test = n_test.clamp(1, idx.len() - 1);
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Fold id in `0..k` for every sample, dealt round-robin within each class
/// after a seeded shuffle. The deal continues across classes so fold sizes
/// differ by at most one.
pub fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidArgument("need at least two folds".into()));
    }
    let by_class = class_indices(labels)?;
    let mut fold = vec![0; labels.len()];
    let mut offset = 0;
    for (class, mut idx) in by_class.into_iter().enumerate() {
        if idx.len() == 1 {
            return Err(Error::TooFewSamples { class: class as u8, count: 1, needed: 2 });
        }
        idx.shuffle(&mut task_rng(seed, 16 + class as u64));
        let n = idx.len();
        for (pos, i) in idx.into_iter().enumerate() {
            fold[i] = (offset + pos) % k;
        }
        offset += n;
    }
    Ok(fold)
}

/// Seeded stratified subsample of `n` rows (class shares preserved by
/// rounding). Returns sorted indices; `n >= len` keeps everything.
pub fn stratified_subsample(labels: &[u8], n: usize, seed: u64) -> Result<Vec<usize>> {
    if n >= labels.len() {
        return Ok((0..labels.len()).collect());
    }
    let by_class = class_indices(labels)?;
    let total = labels.len() as f64;
    let n_pos = libm::round(n as f64 * by_class[1].len() as f64 / total) as usize;
    let take = [n - n_pos.min(n), n_pos.min(n)];
    let mut out = Vec::with_capacity(n);
    for (class, mut idx) in by_class.into_iter().enumerate() {
        idx.shuffle(&mut task_rng(seed, 32 + class as u64));
        out.extend_from_slice(&idx[..take[class].min(idx.len())]);
    }
    out.sort_unstable();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn types_numeric_and_categorical_columns() {
        let headers = strings(&["bytes", "proto", "label"]);
        let rows = vec![strings(&["10", "tcp", "0"]), strings(&["2.5", "udp", "1"]), strings(&["7", "tcp", "0"])];
        let t = RawTable::from_cells(&headers, &rows, &SchemaHints::default()).unwrap();
        assert_eq!(t.n_rows(), 3);
        assert_eq!(t.column("bytes").unwrap().values.kind(), ColumnKind::Numeric);
        assert_eq!(t.column("proto").unwrap().values.kind(), ColumnKind::Categorical);
        assert_eq!(t.column("label").unwrap().values.kind(), ColumnKind::Numeric);
    }

    #[test]
    fn unparseable_numeric_cell_is_missing() {
        let headers = strings(&["bytes", "label"]);
        let rows = vec![strings(&["10", "0"]), strings(&["oops", "1"]), strings(&["7", "0"])];
        let t = RawTable::from_cells(&headers, &rows, &SchemaHints::default()).unwrap();
        assert_eq!(t.column("bytes").unwrap().values, ColumnValues::Numeric(vec![Some(10.0), None, Some(7.0)]));
    }

    #[test]
    fn duplicate_headers_rejected() {
        let headers = strings(&["a", "b", "a"]);
        assert_eq!(
            RawTable::from_cells(&headers, &[], &SchemaHints::default()),
            Err(Error::DuplicateColumn("a".into()))
        );
    }

    #[test]
    fn clean_drops_missing_rows_and_maps_labels() {
        let headers = strings(&["bytes", "proto", "label"]);
        let rows = vec![
            strings(&["10", "tcp", "BENIGN"]),
            strings(&["", "udp", "DDoS"]),
            strings(&["7", "icmp", "PortScan"]),
            strings(&["3", "tcp", ""]),
        ];
        let t = RawTable::from_cells(&headers, &rows, &SchemaHints::default()).unwrap();
        let spec = LabelSpec { column: "label".into(), benign: "BENIGN".into() };
        let (c, dropped) = clean(&t, &spec, &[]).unwrap();
        assert_eq!(dropped, 2);
        assert_eq!(c.labels, vec![0, 1]);
        assert_eq!(c.columns.len(), 2);
        let missing = LabelSpec { column: "y".into(), benign: "0".into() };
        assert_eq!(clean(&t, &missing, &[]).unwrap_err(), Error::MissingColumn("y".into()));
    }

    #[test]
    fn label_encoding_is_lexicographic() {
        let enc = LabelEncoder::fit("proto", &["tcp", "udp", "tcp"]);
        assert_eq!(enc.transform(&["tcp", "udp", "tcp"]).unwrap(), vec![0, 1, 0]);
        assert_eq!(enc.mapping().get("udp"), Some(&1));
        let single = LabelEncoder::fit("p", &["x", "x"]);
        assert_eq!(single.transform(&["x", "x"]).unwrap(), vec![0, 0]);
        assert_eq!(enc.code("icmp"), Err(Error::UnseenCategory { column: "proto".into(), value: "icmp".into() }));
    }

    #[test]
    fn standardize_population_sigma() {
        let x = Matrix::from_rows(&[[1.0, 5.0], [3.0, 5.0]]).unwrap();
        let s = Standardizer::fit(&x).unwrap();
        assert_eq!(s.means, vec![2.0, 5.0]);
        assert_eq!(s.stds[0], 1.0);
        assert_eq!(s.constant, vec![false, true]);
        let t = s.transform(&x).unwrap();
        assert_eq!(t.column(0), vec![-1.0, 1.0]);
        assert_eq!(t.column(1), vec![0.0, 0.0]);
        assert_eq!(Standardizer::default().transform(&x), Err(Error::NotFitted));
    }

    #[test]
    fn standardized_train_has_zero_mean() {
        let x = Matrix::from_rows(&[[1.0, -2.0], [4.0, 0.5], [9.5, 3.0], [0.2, 7.0]]).unwrap();
        let t = Standardizer::fit(&x).unwrap().transform(&x).unwrap();
        for j in 0..2 {
            let mean: f64 = t.column(j).iter().sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-10);
        }
    }

    #[test]
    fn pca_on_line_finds_diagonal() {
        let pts: Vec<[f64; 2]> = (0..10).map(|i| [i as f64, i as f64]).collect();
        let x = Matrix::from_rows(&pts).unwrap();
        let pca = PcaModel::fit(&x, 2).unwrap();
        let s = core::f64::consts::FRAC_1_SQRT_2;
        assert!((pca.components.get(0, 0) - s).abs() < 1e-10);
        assert!((pca.components.get(1, 0) - s).abs() < 1e-10);
        assert!(pca.explained_variance[1].abs() < 1e-12);
    }

    #[test]
    fn pca_axis_aligned_recovers_unit_vectors() {
        let x = Matrix::from_rows(&[[3.0, 0.0], [-3.0, 0.0], [0.0, 1.0], [0.0, -1.0]]).unwrap();
        let pca = PcaModel::fit(&x, 2).unwrap();
        for c in 0..2 {
            let col = pca.components.column(c);
            let nonzero: Vec<_> = col.iter().filter(|v| v.abs() > 1e-9).collect();
            assert_eq!(nonzero.len(), 1);
            assert!((nonzero[0] - 1.0).abs() < 1e-12);
        }
        let proj = pca.transform(&x).unwrap();
        // first axis is the high-variance feature 0
        for i in 0..4 {
            assert!((proj.get(i, 0) - x.get(i, 0)).abs() < 1e-12);
            assert!((proj.get(i, 1) - x.get(i, 1)).abs() < 1e-12);
        }
    }

    #[test]
    fn pca_full_rank_reconstructs_and_is_orthonormal() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..30).map(|_| (0..5).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let pca = PcaModel::fit(&x, 5).unwrap();
        let gram = pca.components.transpose().matmul(&pca.components).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert!((gram.get(i, j) - if i == j { 1.0 } else { 0.0 }).abs() < 1e-8);
            }
        }
        assert!(pca.explained_variance.windows(2).all(|w| w[0] >= w[1]));
        let back = pca.transform(&x).unwrap().matmul(&pca.components.transpose()).unwrap();
        for i in 0..30 {
            for j in 0..5 {
                assert!((back.get(i, j) - (x.get(i, j) - pca.mean[j])).abs() < 1e-8);
            }
        }
        assert!(PcaModel::fit(&x, 6).is_err());
    }

    #[test]
    fn stratified_split_counts() {
        let labels: Vec<u8> = (0..100).map(|i| u8::from(i < 30)).collect();
        let (train, test) = stratified_split(&labels, 0.8, 3).unwrap();
        assert_eq!(test.len(), 20);
        assert_eq!(test.iter().filter(|&&i| labels[i] == 1).count(), 6);
        let (train2, test2) = stratified_split(&labels, 0.8, 3).unwrap();
        assert_eq!((train.clone(), test.clone()), (train2, test2));
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert!(train.iter().all(|i| !test.contains(i)));
    }

    #[test]
    fn split_rejects_tiny_class() {
        let labels = [0, 0, 0, 1];
        assert_eq!(stratified_split(&labels, 0.8, 0), Err(Error::TooFewSamples { class: 1, count: 1, needed: 2 }));
    }

    #[test]
    fn folds_are_balanced() {
        let labels: Vec<u8> = (0..30).map(|i| u8::from(i % 3 == 0)).collect();
        let folds = stratified_folds(&labels, 3, 1).unwrap();
        for f in 0..3 {
            let members: Vec<_> = (0..30).filter(|&i| folds[i] == f).collect();
            assert_eq!(members.len(), 10);
            assert!(members.iter().any(|&i| labels[i] == 1));
        }
    }

    #[test]
    fn subsample_keeps_class_share() {
        let labels: Vec<u8> = (0..1000).map(|i| u8::from(i % 4 == 0)).collect();
        let idx = stratified_subsample(&labels, 200, 9).unwrap();
        assert_eq!(idx.len(), 200);
        assert_eq!(idx.iter().filter(|&&i| labels[i] == 1).count(), 50);
    }
}
