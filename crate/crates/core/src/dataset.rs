//! Ingestion, validation, standardization and partitioning of tabular
//! clinical data.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Binary,
}

/// Named predictor columns plus a binary outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    column_names: Vec<String>,
    column_kinds: Vec<ColumnKind>,
    values: DMatrix<f64>,
    outcome: Vec<u8>,
}

impl FeatureTable {
    pub fn new(
        column_names: Vec<String>,
        column_kinds: Vec<ColumnKind>,
        values: DMatrix<f64>,
        outcome: Vec<u8>,
    ) -> Result<Self> {
        let p = column_names.len();
        if column_kinds.len() != p || values.ncols() != p {
            return Err(Error::Data(format!(
                "column metadata ({} names, {} kinds) does not match {} value columns",
                p,
                column_kinds.len(),
                values.ncols()
            )));
        }
        if values.nrows() != outcome.len() {
            return Err(Error::Data(format!(
                "outcome length {} does not match {} rows",
                outcome.len(),
                values.nrows()
            )));
        }
        if let Some(i) = outcome.iter().position(|&y| y > 1) {
            return Err(Error::Data(format!("outcome at row {i} is not 0/1")));
        }
        for (j, kind) in column_kinds.iter().enumerate() {
            for (i, v) in values.column(j).iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Data(format!(
                        "non-finite value in column `{}` row {i}",
                        column_names[j]
                    )));
                }
                if *kind == ColumnKind::Binary && *v != 0.0 && *v != 1.0 {
                    return Err(Error::Data(format!(
                        "binary column `{}` has value {v} at row {i}",
                        column_names[j]
                    )));
                }
            }
        }
        Ok(Self {
            column_names,
            column_kinds,
            values,
            outcome,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn column_kinds(&self) -> &[ColumnKind] {
        &self.column_kinds
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn outcome(&self) -> &[u8] {
        &self.outcome
    }

    pub fn outcome_f64(&self) -> Vec<f64> {
        self.outcome.iter().map(|&y| f64::from(y)).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    pub fn require_column(&self, name: &str) -> Result<usize> {
        self.column_index(name)
            .ok_or_else(|| Error::Data(format!("column `{name}` not found")))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.require_column(name)?;
        Ok(self.values.column(j).iter().copied().collect())
    }

    /// Class counts `(negatives, positives)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.outcome.iter().filter(|&&y| y == 1).count();
        (self.outcome.len() - pos, pos)
    }

    /// New table holding `rows` in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureTable {
        let values = DMatrix::from_fn(rows.len(), self.n_cols(), |i, j| self.values[(rows[i], j)]);
        FeatureTable {
            column_names: self.column_names.clone(),
            column_kinds: self.column_kinds.clone(),
            values,
            outcome: rows.iter().map(|&i| self.outcome[i]).collect(),
        }
    }

    /// New table restricted to the named columns, in the given order.
    pub fn select_columns<S: AsRef<str>>(&self, names: &[S]) -> Result<FeatureTable> {
        let idx = names
            .iter()
            .map(|n| self.require_column(n.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let values = DMatrix::from_fn(self.n_rows(), idx.len(), |i, j| self.values[(i, idx[j])]);
        Ok(FeatureTable {
            column_names: idx.iter().map(|&j| self.column_names[j].clone()).collect(),
            column_kinds: idx.iter().map(|&j| self.column_kinds[j]).collect(),
            values,
            outcome: self.outcome.clone(),
        })
    }
}

/// Declared column layout of an input CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub outcome: String,
    /// Value of the outcome column that codes the positive class.
    #[serde(default = "default_positive")]
    pub positive_value: u8,
    pub columns: Vec<ColumnSpec>,
    #[serde(default)]
    pub missing: MissingPolicy,
}

fn default_positive() -> u8 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingPolicy {
    #[default]
    Drop,
    Reject,
}

impl Schema {
    /// Builds a schema from a CSV header, declaring every non-outcome column
    /// binary when all its non-missing values are 0/1 and continuous otherwise.
    /// Names in `force_binary` / `force_continuous` override the inference.
    pub fn infer(
        path: &Path,
        outcome: &str,
        force_binary: &[String],
        force_continuous: &[String],
    ) -> Result<Schema> {
        let (header, rows) = read_raw(path)?;
        if !header.iter().any(|h| h == outcome) {
            return Err(Error::Config(format!(
                "outcome column `{outcome}` not present in {}",
                path.display()
            )));
        }
        let mut columns = Vec::new();
        for (j, name) in header.iter().enumerate() {
            if name == outcome {
                continue;
            }
            let kind = if force_binary.contains(name) {
                ColumnKind::Binary
            } else if force_continuous.contains(name) {
                ColumnKind::Continuous
            } else {
                let all01 = rows.iter().all(|r| match parse_cell(&r[j]) {
                    Ok(Some(v)) => v == 0.0 || v == 1.0,
                    _ => true,
                });
                if all01 && !rows.is_empty() {
                    ColumnKind::Binary
                } else {
                    ColumnKind::Continuous
                }
            };
            columns.push(ColumnSpec {
                name: name.clone(),
                kind,
            });
        }
        Ok(Schema {
            outcome: outcome.to_string(),
            positive_value: 1,
            columns,
            missing: MissingPolicy::Drop,
        })
    }
}

/// Summary written alongside every ingestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub n: usize,
    pub p: usize,
    pub class_counts: BTreeMap<String, usize>,
    pub dropped_rows: usize,
}

impl IngestReport {
    pub fn for_table(table: &FeatureTable, dropped_rows: usize) -> Self {
        let (neg, pos) = table.class_counts();
        let mut class_counts = BTreeMap::new();
        class_counts.insert("0".to_string(), neg);
        class_counts.insert("1".to_string(), pos);
        IngestReport {
            n: table.n_rows(),
            p: table.n_cols(),
            class_counts,
            dropped_rows,
        }
    }
}

fn read_raw(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

fn parse_cell(cell: &str) -> std::result::Result<Option<f64>, ()> {
    let c = cell.trim();
    if c.is_empty() || c.eq_ignore_ascii_case("na") || c.eq_ignore_ascii_case("nan") || c == "?" {
        return Ok(None);
    }
    c.parse::<f64>().map(Some).map_err(|_| ())
}

/// Reads and validates a CSV against `schema`.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<(FeatureTable, IngestReport)> {
    if !path.exists() {
        return Err(Error::Data(format!("missing file {}", path.display())));
    }
    let (header, rows) = read_raw(path)?;
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("header mismatch: column `{name}` not found")))
    };
    let y_col = find(&schema.outcome)?;
    let x_cols = schema
        .columns
        .iter()
        .map(|c| find(&c.name))
        .collect::<Result<Vec<_>>>()?;
    if header.len() != schema.columns.len() + 1 {
        let extra: Vec<&String> = header
            .iter()
            .filter(|h| **h != schema.outcome && !schema.columns.iter().any(|c| &c.name == *h))
            .collect();
        return Err(Error::Data(format!(
            "header mismatch: undeclared columns {extra:?}"
        )));
    }
    if rows.is_empty() {
        return Err(Error::Data("no data rows".into()));
    }

    let p = x_cols.len();
    let mut data: Vec<f64> = Vec::with_capacity(rows.len() * p);
    let mut outcome = Vec::with_capacity(rows.len());
    let mut dropped = 0;
    for (r, row) in rows.iter().enumerate() {
        let line = r + 2;
        if row.len() != header.len() {
            return Err(Error::Data(format!(
                "line {line}: expected {} cells, found {}",
                header.len(),
                row.len()
            )));
        }
        let mut cells = Vec::with_capacity(p);
        let mut missing = false;
        for (spec, &c) in schema.columns.iter().zip(&x_cols) {
            match parse_cell(&row[c]) {
                Ok(Some(v)) => {
                    if spec.kind == ColumnKind::Binary && v != 0.0 && v != 1.0 {
                        return Err(Error::Data(format!(
                            "line {line}: binary column `{}` has value {v}",
                            spec.name
                        )));
                    }
                    cells.push(v);
                }
                Ok(None) => missing = true,
                Err(()) => {
                    return Err(Error::Data(format!(
                        "line {line}: non-numeric cell `{}` in column `{}`",
                        row[c], spec.name
                    )))
                }
            }
        }
        let y = match parse_cell(&row[y_col]) {
            Ok(Some(v)) if v == 0.0 || v == 1.0 => Some(u8::from(v as u8 == schema.positive_value)),
            Ok(Some(v)) => {
                return Err(Error::Data(format!(
                    "line {line}: outcome `{}` has value {v}, expected 0/1",
                    schema.outcome
                )))
            }
            Ok(None) => None,
            Err(()) => {
                return Err(Error::Data(format!(
                    "line {line}: non-numeric outcome `{}`",
                    row[y_col]
                )))
            }
        };
        match (missing, y) {
            (false, Some(y)) => {
                data.extend(cells);
                outcome.push(y);
            }
            _ => {
                if schema.missing == MissingPolicy::Reject {
                    return Err(Error::Data(format!("line {line}: missing value")));
                }
                dropped += 1;
            }
        }
    }
    if outcome.is_empty() {
        return Err(Error::Data("no data rows".into()));
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} rows with missing cells");
    }
    let n = outcome.len();
    let values = DMatrix::from_row_slice(n, p, &data);
    let table = FeatureTable::new(
        schema.columns.iter().map(|c| c.name.clone()).collect(),
        schema.columns.iter().map(|c| c.kind).collect(),
        values,
        outcome,
    )?;
    let report = IngestReport::for_table(&table, dropped);
    Ok((table, report))
}

/// Writes a table back to CSV with the outcome as the last column.
pub fn write_csv(table: &FeatureTable, outcome_name: &str, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = table.column_names.iter().map(String::as_str).collect();
    header.push(outcome_name);
    w.write_record(&header)?;
    for i in 0..table.n_rows() {
        let mut rec: Vec<String> = (0..table.n_cols())
            .map(|j| table.values[(i, j)].to_string())
            .collect();
        rec.push(table.outcome[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Per-column affine map applied by [`standardize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// `true` for binary columns, which are left untouched.
    pub pass_through: Vec<bool>,
}

impl StandardizationParams {
    pub fn apply(&self, table: &FeatureTable) -> Result<FeatureTable> {
        self.map(table, |v, m, s| (v - m) / s)
    }

    pub fn invert(&self, table: &FeatureTable) -> Result<FeatureTable> {
        self.map(table, |v, m, s| v * s + m)
    }

    fn map(&self, table: &FeatureTable, f: impl Fn(f64, f64, f64) -> f64) -> Result<FeatureTable> {
        if table.n_cols() != self.mean.len() {
            return Err(Error::InvalidArgument(format!(
                "table has {} columns, parameters cover {}",
                table.n_cols(),
                self.mean.len()
            )));
        }
        let mut out = table.clone();
        for j in 0..table.n_cols() {
            if self.pass_through[j] {
                continue;
            }
            for v in out.values.column_mut(j).iter_mut() {
                *v = f(*v, self.mean[j], self.scale[j]);
            }
        }
        Ok(out)
    }
}

/// Centers and scales continuous columns to mean 0, sample sd 1.
pub fn standardize(table: &FeatureTable) -> Result<(FeatureTable, StandardizationParams)> {
    let p = table.n_cols();
    let mut mean = vec![0.0; p];
    let mut scale = vec![1.0; p];
    let mut pass_through = vec![true; p];
    for j in 0..p {
        if table.column_kinds[j] == ColumnKind::Binary {
            continue;
        }
        let col: Vec<f64> = table.values.column(j).iter().copied().collect();
        let s = stats::sd(&col);
        if !(s > 0.0) {
            return Err(Error::Data(format!(
                "continuous column `{}` has zero variance",
                table.column_names[j]
            )));
        }
        mean[j] = stats::mean(&col);
        scale[j] = s;
        pass_through[j] = false;
    }
    let params = StandardizationParams {
        mean,
        scale,
        pass_through,
    };
    let out = params.apply(table)?;
    Ok((out, params))
}

/// Assignment of row indices to cross-validation folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub fold_index: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

impl FoldAssignment {
    /// Row indices held out in `fold`.
    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_index.len())
            .filter(|&i| self.fold_index[i] == fold)
            .collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_index.len())
            .filter(|&i| self.fold_index[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_index {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Random `k`-fold assignment; stratified on `stratify_on` when given.
///
/// Rows are shuffled within each class and dealt round-robin, continuing
/// the deal across classes, so fold sizes differ by at most one overall and
/// per class.
pub fn make_folds(
    n: usize,
    k: usize,
    seed: u64,
    stratify_on: Option<&[u8]>,
) -> Result<FoldAssignment> {
    if k < 2 || k > n {
        return Err(Error::InvalidArgument(format!(
            "fold count k={k} must satisfy 2 <= k <= n={n}"
        )));
    }
    let mut rng = rng::stream(seed, 0);
    let groups: Vec<Vec<usize>> = match stratify_on {
        Some(labels) => {
            if labels.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "stratification vector has length {}, expected {n}",
                    labels.len()
                )));
            }
            let neg = (0..n).filter(|&i| labels[i] == 0).collect();
            let pos = (0..n).filter(|&i| labels[i] != 0).collect();
            vec![neg, pos]
        }
        None => vec![(0..n).collect()],
    };
    let mut fold_index = vec![0; n];
    let mut next = 0;
    for mut g in groups {
        g.shuffle(&mut rng);
        for i in g {
            fold_index[i] = next % k;
            next += 1;
        }
    }
    Ok(FoldAssignment {
        fold_index,
        k,
        seed,
    })
}

/// Disjoint train/test partition; stratified variant takes the rounded
/// proportional count from each class.
pub fn train_test_split(
    table: &FeatureTable,
    test_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<(FeatureTable, FeatureTable)> {
    let (train, test) = split_indices(table.outcome(), test_fraction, seed, stratified)?;
    Ok((table.select_rows(&train), table.select_rows(&test)))
}

/// Index form of [`train_test_split`]; both index lists are sorted.
pub fn split_indices(
    outcome: &[u8],
    test_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let n = outcome.len();
    let mut rng = rng::stream(seed, 1);
    let groups: Vec<Vec<usize>> = if stratified {
        vec![
            (0..n).filter(|&i| outcome[i] == 0).collect(),
            (0..n).filter(|&i| outcome[i] != 0).collect(),
        ]
    } else {
        vec![(0..n).collect()]
    };
    let mut test = Vec::new();
    for mut g in groups {
        g.shuffle(&mut rng);
        let take = (test_fraction * g.len() as f64).round() as usize;
        test.extend_from_slice(&g[..take.min(g.len())]);
    }
    test.sort_unstable();
    let mut is_test = vec![false; n];
    for &i in &test {
        is_test[i] = true;
    }
    let train: Vec<usize> = (0..n).filter(|&i| !is_test[i]).collect();
    if train.is_empty() || test.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "split of {n} rows at fraction {test_fraction} leaves an empty partition"
        )));
    }
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn table(cols: &[(&str, ColumnKind, &[f64])], y: &[u8]) -> FeatureTable {
        let n = y.len();
        let values = DMatrix::from_fn(n, cols.len(), |i, j| cols[j].2[i]);
        FeatureTable::new(
            cols.iter().map(|c| c.0.to_string()).collect(),
            cols.iter().map(|c| c.1).collect(),
            values,
            y.to_vec(),
        )
        .unwrap()
    }

    fn schema(cols: &[(&str, ColumnKind)]) -> Schema {
        Schema {
            outcome: "y".into(),
            positive_value: 1,
            columns: cols
                .iter()
                .map(|(n, k)| ColumnSpec {
                    name: n.to_string(),
                    kind: *k,
                })
                .collect(),
            missing: MissingPolicy::Drop,
        }
    }

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn standardize_continuous_and_pass_binary() {
        let t = table(
            &[
                ("a", ColumnKind::Continuous, &[1.0, 2.0, 3.0]),
                ("b", ColumnKind::Binary, &[0.0, 1.0, 1.0]),
            ],
            &[0, 1, 1],
        );
        let (s, params) = standardize(&t).unwrap();
        let a: Vec<f64> = s.values().column(0).iter().copied().collect();
        assert_eq!(a, vec![-1.0, 0.0, 1.0]);
        let b: Vec<f64> = s.values().column(1).iter().copied().collect();
        assert_eq!(b, vec![0.0, 1.0, 1.0]);
        let back = params.invert(&s).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn zero_variance_column_is_named() {
        let t = table(&[("flat", ColumnKind::Continuous, &[2.0, 2.0])], &[0, 1]);
        let err = standardize(&t).unwrap_err().to_string();
        assert!(err.contains("flat"), "{err}");
    }

    #[test]
    fn folds_leave_one_out_limit() {
        let f = make_folds(10, 10, 3, None).unwrap();
        assert!(f.fold_sizes().iter().all(|&s| s == 1));
    }

    #[test]
    fn folds_319_by_10() {
        let f = make_folds(319, 10, 42, None).unwrap();
        let sizes = f.fold_sizes();
        assert!(sizes.iter().all(|s| *s == 31 || *s == 32), "{sizes:?}");
        assert_eq!(sizes.iter().sum::<usize>(), 319);
    }

    #[test]
    fn folds_reject_bad_k() {
        assert!(make_folds(10, 11, 0, None).is_err());
        assert!(make_folds(10, 1, 0, None).is_err());
    }

    #[test]
    fn stratified_folds_balance_classes() {
        let y: Vec<u8> = (0..319).map(|i| u8::from(i < 158)).collect();
        let f = make_folds(319, 10, 9, Some(&y)).unwrap();
        let per_fold: Vec<usize> = (0..10)
            .map(|k| f.test_rows(k).iter().filter(|&&i| y[i] == 1).count())
            .collect();
        let (lo, hi) = (per_fold.iter().min().unwrap(), per_fold.iter().max().unwrap());
        assert!(hi - lo <= 1, "{per_fold:?}");
    }

    #[test]
    fn stratified_split_exact_counts() {
        let y: Vec<u8> = (0..100).map(|i| (i % 2) as u8).collect();
        let x: Vec<f64> = (0..100).map(f64::from).collect();
        let t = table(&[("x", ColumnKind::Continuous, &x)], &y);
        let (train, test) = train_test_split(&t, 0.2, 5, true).unwrap();
        assert_eq!(test.n_rows(), 20);
        assert_eq!(test.class_counts(), (10, 10));
        assert_eq!(train.n_rows(), 80);
        let again = train_test_split(&t, 0.2, 5, true).unwrap();
        assert_eq!(again.1, test);
        assert!(train_test_split(&t, 1.0, 5, true).is_err());
        assert!(train_test_split(&t, 0.0, 5, true).is_err());
    }

    #[test]
    fn load_csv_happy_path_and_missing_rows() {
        let f = write_tmp("a,b,y\n1.5,0,1\n2.5,1,0\n,1,0\n3.5,1,1\n");
        let s = schema(&[("a", ColumnKind::Continuous), ("b", ColumnKind::Binary)]);
        let (t, rep) = load_csv(f.path(), &s).unwrap();
        assert_eq!(t.n_rows(), 3);
        assert_eq!(rep.dropped_rows, 1);
        assert_eq!(rep.class_counts["1"], 2);
        let mut reject = s.clone();
        reject.missing = MissingPolicy::Reject;
        assert!(load_csv(f.path(), &reject).is_err());
    }

    #[test]
    fn load_csv_single_row() {
        let f = write_tmp("a,b,y\n1.5,0,1\n");
        let s = schema(&[("a", ColumnKind::Continuous), ("b", ColumnKind::Binary)]);
        let (t, _) = load_csv(f.path(), &s).unwrap();
        assert_eq!(t.n_rows(), 1);
    }

    #[test]
    fn load_csv_errors() {
        let s = schema(&[("a", ColumnKind::Continuous), ("b", ColumnKind::Binary)]);
        let empty = write_tmp("a,b,y\n");
        assert!(load_csv(empty.path(), &s).unwrap_err().to_string().contains("no data rows"));
        let bad_header = write_tmp("a,c,y\n1,0,1\n");
        assert!(load_csv(bad_header.path(), &s).unwrap_err().to_string().contains("header"));
        let non_numeric = write_tmp("a,b,y\nx,0,1\n");
        assert!(load_csv(non_numeric.path(), &s).unwrap_err().to_string().contains("non-numeric"));
        let bad_binary = write_tmp("a,b,y\n1,2,1\n");
        assert!(load_csv(bad_binary.path(), &s).unwrap_err().to_string().contains("binary"));
        assert!(load_csv(Path::new("/nonexistent/file.csv"), &s).is_err());
    }

    #[test]
    fn schema_inference() {
        let f = write_tmp("a,b,y\n1.5,0,1\n2.5,1,0\n");
        let s = Schema::infer(f.path(), "y", &[], &[]).unwrap();
        assert_eq!(s.columns[0].kind, ColumnKind::Continuous);
        assert_eq!(s.columns[1].kind, ColumnKind::Binary);
        assert!(Schema::infer(f.path(), "zzz", &[], &[]).is_err());
    }
}
