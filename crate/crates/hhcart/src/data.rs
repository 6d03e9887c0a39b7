//! Typed dataset model and ingestion: feature schema, CSV reading and
//! writing, class dictionary, and the grow/prune/test partitioning used by
//! the evaluation harness.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("column `{0}` missing from the file header")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: cannot parse value")]
    ParseFailure { row: usize, column: String },
    #[error("file contains no data rows")]
    EmptyDataset,
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("not enough rows: {0}")]
    InsufficientRows(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    Quantitative,
    Qualitative,
}

/// Ordered feature columns plus the class column name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<(String, FeatureKind)>,
    pub class_column: String,
}

impl FeatureSchema {
    pub fn new(
        features: Vec<(String, FeatureKind)>,
        class_column: String,
    ) -> Result<Self, DataError> {
        if features.is_empty() {
            return Err(DataError::InvalidSchema("at least one feature required".into()));
        }
        for (i, (name, _)) in features.iter().enumerate() {
            if features[..i].iter().any(|(other, _)| other == name) {
                return Err(DataError::InvalidSchema(format!("duplicate feature `{name}`")));
            }
            if *name == class_column {
                return Err(DataError::InvalidSchema(format!(
                    "class column `{class_column}` also listed as a feature"
                )));
            }
        }
        Ok(FeatureSchema { features, class_column })
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn has_qualitative(&self) -> bool {
        self.features.iter().any(|(_, k)| *k == FeatureKind::Qualitative)
    }
}

/// Plain-text schema file: one `name,kind` line per column with kind in
/// {q, c, label} (quantitative, categorical, class).
pub fn load_schema(path: impl AsRef<Path>) -> Result<FeatureSchema, DataError> {
    let file = File::open(path)?;
    let mut features = Vec::new();
    let mut class_column: Option<String> = None;
    for line in BufReader::new(file).lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (name, kind) = line
            .rsplit_once(',')
            .ok_or_else(|| DataError::InvalidSchema(format!("expected `name,kind`: {line}")))?;
        let name = name.trim().to_string();
        match kind.trim() {
            "q" => features.push((name, FeatureKind::Quantitative)),
            "c" => features.push((name, FeatureKind::Qualitative)),
            "label" => {
                if class_column.replace(name).is_some() {
                    return Err(DataError::InvalidSchema("multiple label columns".into()));
                }
            }
            other => {
                return Err(DataError::InvalidSchema(format!("unknown kind `{other}`")));
            }
        }
    }
    let class_column =
        class_column.ok_or_else(|| DataError::InvalidSchema("no label column".into()))?;
    FeatureSchema::new(features, class_column)
}

/// One cell: a real number for quantitative features, an opaque level token
/// for qualitative ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureValue {
    Num(f64),
    Level(String),
}

impl fmt::Display for FeatureValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureValue::Num(v) => write!(f, "{v}"),
            FeatureValue::Level(s) => write!(f, "{s}"),
        }
    }
}

/// Distinct class identifiers in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassDictionary {
    classes: Vec<String>,
}

impl ClassDictionary {
    pub fn intern(&mut self, label: &str) -> usize {
        match self.index_of(label) {
            Some(i) => i,
            None => {
                self.classes.push(label.to_string());
                self.classes.len() - 1
            }
        }
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    pub fn name(&self, index: usize) -> &str {
        &self.classes[index]
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.classes
    }
}

/// Immutable example table; safe to share across threads after load.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub rows: Vec<Vec<FeatureValue>>,
    pub labels: Vec<usize>,
    pub classes: ClassDictionary,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn p(&self) -> usize {
        self.schema.n_features()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_histogram(&self, rows: &[usize]) -> Vec<u32> {
        let mut hist = vec![0u32; self.n_classes()];
        for &r in rows {
            hist[self.labels[r]] += 1;
        }
        hist
    }
}

fn parse_cell(
    raw: &str,
    kind: FeatureKind,
    row: usize,
    column: &str,
) -> Result<FeatureValue, DataError> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Err(DataError::ParseFailure { row, column: column.to_string() });
    }
    match kind {
        FeatureKind::Quantitative => {
            let v: f64 = raw
                .parse()
                .map_err(|_| DataError::ParseFailure { row, column: column.to_string() })?;
            if !v.is_finite() {
                return Err(DataError::ParseFailure { row, column: column.to_string() });
            }
            Ok(FeatureValue::Num(v))
        }
        FeatureKind::Qualitative => Ok(FeatureValue::Level(raw.to_string())),
    }
}

/// Reads a comma-delimited UTF-8 file with a header row. Columns are matched
/// to the schema by name; extra columns are ignored. Empty cells and
/// non-numeric tokens in quantitative columns are rejected.
pub fn load_csv(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Dataset, DataError> {
    let (rows, labels) = read_rows(path, schema, true)?;
    let labels = labels.expect("labels required");
    if rows.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let mut classes = ClassDictionary::default();
    let label_idx: Vec<usize> = labels.iter().map(|l| classes.intern(l)).collect();
    Ok(Dataset { schema: schema.clone(), rows, labels: label_idx, classes })
}

/// Parsed feature rows plus the raw label column when one was present.
pub type RawRows = (Vec<Vec<FeatureValue>>, Option<Vec<String>>);

/// Reads feature rows, tolerating a missing class column (for prediction
/// inputs). Returns raw label strings when the class column is present.
pub fn read_rows(
    path: impl AsRef<Path>,
    schema: &FeatureSchema,
    require_labels: bool,
) -> Result<RawRows, DataError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let position = |name: &str| headers.iter().position(|h| h == name);
    let mut feat_cols = Vec::with_capacity(schema.features.len());
    for (name, kind) in &schema.features {
        let col = position(name).ok_or_else(|| DataError::MissingColumn(name.clone()))?;
        feat_cols.push((col, name.clone(), *kind));
    }
    let label_col = match position(&schema.class_column) {
        Some(c) => Some(c),
        None if require_labels => {
            return Err(DataError::MissingColumn(schema.class_column.clone()));
        }
        None => None,
    };
    let mut rows = Vec::new();
    let mut labels = label_col.map(|_| Vec::new());
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(feat_cols.len());
        for (col, name, kind) in &feat_cols {
            let raw = record.get(*col).unwrap_or("");
            row.push(parse_cell(raw, *kind, i, name)?);
        }
        if let (Some(col), Some(labels)) = (label_col, labels.as_mut()) {
            let raw = record.get(col).unwrap_or("").trim();
            if raw.is_empty() {
                return Err(DataError::ParseFailure {
                    row: i,
                    column: schema.class_column.clone(),
                });
            }
            labels.push(raw.to_string());
        }
        rows.push(row);
    }
    Ok((rows, labels))
}

/// Writes the dataset back out; quantitative cells use the shortest decimal
/// form that round-trips the exact f64.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    let mut header: Vec<&str> = ds.schema.features.iter().map(|(n, _)| n.as_str()).collect();
    header.push(&ds.schema.class_column);
    writer.write_record(&header)?;
    for (row, &label) in ds.rows.iter().zip(&ds.labels) {
        let mut record: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        record.push(ds.classes.name(label).to_string());
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes one predicted label per line.
pub fn write_labels(labels: &[&str], path: impl AsRef<Path>) -> Result<(), DataError> {
    let mut f = File::create(path)?;
    for l in labels {
        writeln!(f, "{l}")?;
    }
    Ok(())
}

/// Disjoint index lists into a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPartition {
    pub grow_idx: Vec<usize>,
    pub prune_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    /// False when a class was too small for a stratified draw and the
    /// holdout fell back to unstratified sampling.
    pub stratified: bool,
}

/// Stratified random holdout of floor(fraction * n) rows for pruning.
/// Deterministic for a fixed seed.
pub fn split_holdout(
    ds: &Dataset,
    prune_fraction: f64,
    seed: u64,
) -> Result<DataPartition, DataError> {
    let all: Vec<usize> = (0..ds.n()).collect();
    let (grow_idx, prune_idx, stratified) = split_holdout_rows(ds, &all, prune_fraction, seed)?;
    Ok(DataPartition { grow_idx, prune_idx, test_idx: Vec::new(), stratified })
}

/// Holdout restricted to a subset of rows; used per cross-validation fold.
pub fn split_holdout_rows(
    ds: &Dataset,
    rows: &[usize],
    prune_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>, bool), DataError> {
    if !(0.0..1.0).contains(&prune_fraction) {
        return Err(DataError::InvalidSchema(format!(
            "prune fraction {prune_fraction} outside [0, 1)"
        )));
    }
    let n = rows.len();
    let target = (prune_fraction * n as f64).floor() as usize;
    if prune_fraction > 0.0 && target == 0 {
        return Err(DataError::InsufficientRows(format!(
            "fraction {prune_fraction} of {n} rows rounds to zero"
        )));
    }
    if target == 0 {
        return Ok((rows.to_vec(), Vec::new(), true));
    }

    let n_classes = ds.n_classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for &r in rows {
        by_class[ds.labels[r]].push(r);
    }

    // Largest-remainder allocation of the target across classes, never
    // taking a class's last row.
    let mut alloc: Vec<usize> = Vec::with_capacity(n_classes);
    let mut fracs: Vec<(usize, f64)> = Vec::new();
    let mut assigned = 0;
    for (c, members) in by_class.iter().enumerate() {
        let exact = prune_fraction * members.len() as f64;
        let base = exact.floor() as usize;
        alloc.push(base);
        assigned += base;
        fracs.push((c, exact - base as f64));
    }
    fracs.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut remainder = target.saturating_sub(assigned);
    for (c, _) in &fracs {
        if remainder == 0 {
            break;
        }
        if alloc[*c] + 1 < by_class[*c].len() {
            alloc[*c] += 1;
            remainder -= 1;
        }
    }
    let feasible = remainder == 0
        && alloc.iter().zip(&by_class).all(|(a, m)| m.is_empty() || *a < m.len());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut prune = Vec::with_capacity(target);
    if feasible {
        for (members, &take) in by_class.iter().zip(&alloc) {
            let mut pool = members.clone();
            pool.shuffle(&mut rng);
            prune.extend_from_slice(&pool[..take]);
        }
    } else {
        let mut pool = rows.to_vec();
        pool.shuffle(&mut rng);
        prune.extend_from_slice(&pool[..target]);
    }
    prune.sort_unstable();
    let grow: Vec<usize> =
        rows.iter().copied().filter(|r| prune.binary_search(r).is_err()).collect();
    Ok((grow, prune, feasible))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema_2q() -> FeatureSchema {
        FeatureSchema::new(
            vec![
                ("x1".into(), FeatureKind::Quantitative),
                ("x2".into(), FeatureKind::Quantitative),
            ],
            "class".into(),
        )
        .unwrap()
    }

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn load_small_numeric_file() {
        let f = write_tmp("x1,x2,class\n1,2,a\n3,4,b\n5,6,a\n7,8,b\n");
        let ds = load_csv(f.path(), &schema_2q()).unwrap();
        assert_eq!(ds.n(), 4);
        assert_eq!(ds.p(), 2);
        assert_eq!(ds.n_classes(), 2);
        assert_eq!(ds.classes.name(0), "a");
        assert_eq!(ds.labels, vec![0, 1, 0, 1]);
    }

    #[test]
    fn non_numeric_quantitative_cell_fails() {
        let f = write_tmp("x1,x2,class\n1,oops,a\n");
        match load_csv(f.path(), &schema_2q()) {
            Err(DataError::ParseFailure { row: 0, column }) => assert_eq!(column, "x2"),
            other => panic!("expected parse failure, got {other:?}"),
        }
    }

    #[test]
    fn empty_cell_fails() {
        let f = write_tmp("x1,x2,class\n1,,a\n");
        assert!(matches!(
            load_csv(f.path(), &schema_2q()),
            Err(DataError::ParseFailure { .. })
        ));
    }

    #[test]
    fn missing_column_fails() {
        let f = write_tmp("x1,class\n1,a\n");
        assert!(matches!(
            load_csv(f.path(), &schema_2q()),
            Err(DataError::MissingColumn(c)) if c == "x2"
        ));
    }

    #[test]
    fn header_only_is_empty_dataset() {
        let f = write_tmp("x1,x2,class\n");
        assert!(matches!(load_csv(f.path(), &schema_2q()), Err(DataError::EmptyDataset)));
    }

    #[test]
    fn csv_round_trip_is_identical() {
        let f = write_tmp(
            "x1,x2,class\n0.1,-3.25e-7,a\n1e300,2.000000000000001,b\n5,6,a\n",
        );
        let ds = load_csv(f.path(), &schema_2q()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_csv(&ds, out.path()).unwrap();
        let again = load_csv(out.path(), &schema_2q()).unwrap();
        assert_eq!(ds, again);
    }

    #[test]
    fn class_order_is_first_appearance() {
        let f = write_tmp("x1,x2,class\n1,2,z\n3,4,a\n5,6,z\n");
        let ds = load_csv(f.path(), &schema_2q()).unwrap();
        assert_eq!(ds.classes.names(), &["z".to_string(), "a".to_string()]);
        let again = load_csv(f.path(), &schema_2q()).unwrap();
        assert_eq!(ds.labels, again.labels);
    }

    fn synthetic(n: usize, n_classes: usize) -> Dataset {
        let schema = schema_2q();
        let mut classes = ClassDictionary::default();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            rows.push(vec![FeatureValue::Num(i as f64), FeatureValue::Num(0.0)]);
            labels.push(classes.intern(&format!("c{}", i % n_classes)));
        }
        Dataset { schema, rows, labels, classes }
    }

    #[test]
    fn holdout_cardinality_and_disjointness() {
        let ds = synthetic(100, 2);
        let part = split_holdout(&ds, 0.1, 1).unwrap();
        assert_eq!(part.prune_idx.len(), 10);
        assert_eq!(part.grow_idx.len(), 90);
        assert!(part.stratified);
        for i in &part.prune_idx {
            assert!(!part.grow_idx.contains(i));
        }
    }

    #[test]
    fn holdout_zero_fraction_is_empty() {
        let ds = synthetic(20, 2);
        let part = split_holdout(&ds, 0.0, 7).unwrap();
        assert!(part.prune_idx.is_empty());
        assert_eq!(part.grow_idx.len(), 20);
    }

    #[test]
    fn holdout_is_deterministic() {
        let ds = synthetic(50, 3);
        let a = split_holdout(&ds, 0.2, 99).unwrap();
        let b = split_holdout(&ds, 0.2, 99).unwrap();
        assert_eq!(a, b);
        let c = split_holdout(&ds, 0.2, 100).unwrap();
        assert_ne!(a.prune_idx, c.prune_idx);
    }

    #[test]
    fn holdout_is_stratified() {
        let ds = synthetic(100, 2);
        let part = split_holdout(&ds, 0.2, 3).unwrap();
        let hist = ds.class_histogram(&part.prune_idx);
        assert_eq!(hist, vec![10, 10]);
    }

    #[test]
    fn holdout_falls_back_when_class_too_small() {
        // two singleton classes: any stratified draw would consume one
        let schema = schema_2q();
        let mut classes = ClassDictionary::default();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..2 {
            rows.push(vec![FeatureValue::Num(i as f64), FeatureValue::Num(0.0)]);
            labels.push(classes.intern(if i == 0 { "a" } else { "b" }));
        }
        let ds = Dataset { schema, rows, labels, classes };
        let part = split_holdout(&ds, 0.5, 5).unwrap();
        assert_eq!(part.prune_idx.len(), 1);
        assert_eq!(part.grow_idx.len(), 1);
        assert!(!part.stratified);
    }

    #[test]
    fn schema_rejects_duplicates_and_class_overlap() {
        assert!(FeatureSchema::new(
            vec![
                ("a".into(), FeatureKind::Quantitative),
                ("a".into(), FeatureKind::Quantitative)
            ],
            "y".into()
        )
        .is_err());
        assert!(FeatureSchema::new(
            vec![("y".into(), FeatureKind::Quantitative)],
            "y".into()
        )
        .is_err());
        assert!(FeatureSchema::new(vec![], "y".into()).is_err());
    }

    #[test]
    fn schema_file_parses() {
        let f = write_tmp("x1,q\ncolor,c\nclass,label\n");
        let s = load_schema(f.path()).unwrap();
        assert_eq!(s.features.len(), 2);
        assert_eq!(s.features[1], ("color".to_string(), FeatureKind::Qualitative));
        assert_eq!(s.class_column, "class");
        assert!(s.has_qualitative());
    }
}
