//! CSV loading and seeded train/test splitting.

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use small_core::{Dataset, Label, Matrix};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("label column {0:?} not found in header")]
    MissingLabel(String),
    #[error("columns missing from data: {}", .0.join(", "))]
    MissingColumns(Vec<String>),
    #[error("line {line}, column {column:?}: cannot parse {value:?} as a number")]
    NonNumeric {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}, column {column:?}: value {value:?} is not finite")]
    NonFinite {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}: label {value:?} is not one of -1, +1, 0, 1")]
    BadLabel { line: u64, value: String },
    #[error("no data rows")]
    NoRows,
    #[error("header has no feature columns")]
    NoFeatures,
    #[error("invalid split: {0}")]
    Split(String),
    #[error(transparent)]
    Core(#[from] small_core::Error),
}

/// Which CSV column holds the labels.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum LabelColumn {
    #[default]
    Last,
    Name(String),
}

impl FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(if s == "last" {
            LabelColumn::Last
        } else {
            LabelColumn::Name(s.to_string())
        })
    }
}

impl fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelColumn::Last => f.write_str("last"),
            LabelColumn::Name(n) => f.write_str(n),
        }
    }
}

fn parse_label(raw: &str, line: u64) -> Result<Label, DataError> {
    let bad = || DataError::BadLabel {
        line,
        value: raw.to_string(),
    };
    let v: f64 = raw.trim().parse().map_err(|_| bad())?;
    if v == 0.0 {
        return Ok(Label::Negative);
    }
    Label::from_sign(v).ok_or_else(bad)
}

fn parse_cell(raw: &str, line: u64, column: &str) -> Result<f64, DataError> {
    let v: f64 = raw.trim().parse().map_err(|_| DataError::NonNumeric {
        line,
        column: column.to_string(),
        value: raw.to_string(),
    })?;
    if !v.is_finite() {
        return Err(DataError::NonFinite {
            line,
            column: column.to_string(),
            value: raw.to_string(),
        });
    }
    Ok(v)
}

/// Reads a labelled dataset; labels `{0, 1}` are mapped to `{-1, +1}`.
pub fn load_csv(path: impl AsRef<Path>, label: &LabelColumn) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, label, &path.display().to_string())
}

pub fn read_csv(reader: impl Read, label: &LabelColumn, id: &str) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let label_idx = match label {
        LabelColumn::Last => header.len().checked_sub(1).ok_or(DataError::NoFeatures)?,
        LabelColumn::Name(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingLabel(name.clone()))?,
    };
    let names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    if names.is_empty() {
        return Err(DataError::NoFeatures);
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        for (i, cell) in record.iter().enumerate() {
            if i == label_idx {
                labels.push(parse_label(cell, line)?);
            } else {
                values.push(parse_cell(cell, line, &header[i])?);
            }
        }
    }
    if labels.is_empty() {
        return Err(DataError::NoRows);
    }
    let features = Matrix::from_vec(labels.len(), names.len(), values)?;
    Ok(Dataset::new(features, labels, names, id)?)
}

/// Reads the columns named in `names` (in that order) as an unlabelled
/// feature matrix; other columns are ignored.
pub fn load_features(path: impl AsRef<Path>, names: &[String]) -> Result<Matrix, DataError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let missing: Vec<String> = names.iter().filter(|n| !header.contains(n)).cloned().collect();
    if !missing.is_empty() {
        return Err(DataError::MissingColumns(missing));
    }
    let cols: Vec<usize> = names
        .iter()
        .map(|n| header.iter().position(|h| h == n).expect("checked above"))
        .collect();
    let mut values = Vec::new();
    let mut rows = 0;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        for &c in &cols {
            let cell = record.get(c).unwrap_or("");
            values.push(parse_cell(cell, line, &header[c])?);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(DataError::NoRows);
    }
    Ok(Matrix::from_vec(rows, names.len(), values)?)
}

/// Reorders the columns of `d` to `names`; columns not in `names` are dropped.
pub fn align_columns(d: &Dataset, names: &[String]) -> Result<Dataset, DataError> {
    if d.feature_names() == names {
        return Ok(d.clone());
    }
    let missing: Vec<String> = names
        .iter()
        .filter(|n| !d.feature_names().contains(n))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(DataError::MissingColumns(missing));
    }
    let cols: Vec<usize> = names
        .iter()
        .map(|n| d.feature_names().iter().position(|h| h == n).expect("checked above"))
        .collect();
    let mut values = Vec::with_capacity(d.n_examples() * cols.len());
    for i in 0..d.n_examples() {
        values.extend(cols.iter().map(|&c| d.x(i)[c]));
    }
    let features = Matrix::from_vec(d.n_examples(), cols.len(), values)?;
    Ok(Dataset::new(features, d.labels().to_vec(), names.to_vec(), d.id())?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitKind {
    /// `repeats` independent shuffles, each with `ratio` of the rows for training.
    Holdout { ratio: f64, repeats: usize },
    KFold { folds: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitPlan {
    pub kind: SplitKind,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits {
    pub parts: Vec<Split>,
    pub warnings: Vec<String>,
}

impl SplitPlan {
    pub fn holdout(ratio: f64, repeats: usize, seed: u64) -> Self {
        SplitPlan {
            kind: SplitKind::Holdout { ratio, repeats },
            seed,
        }
    }

    pub fn kfold(folds: usize, seed: u64) -> Self {
        SplitPlan {
            kind: SplitKind::KFold { folds },
            seed,
        }
    }
}

/// Index lists for `plan` over the rows of `d`. Test index lists are sorted.
pub fn make_splits(d: &Dataset, plan: &SplitPlan) -> Result<Splits, DataError> {
    let m = d.n_examples();
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut warnings = Vec::new();
    let mut parts = Vec::new();
    match plan.kind {
        SplitKind::Holdout { ratio, repeats } => {
            if !(ratio > 0.0 && ratio < 1.0) {
                return Err(DataError::Split(format!("ratio {ratio} outside (0, 1)")));
            }
            let train_size = (ratio * m as f64).round() as usize;
            if train_size == 0 || train_size == m {
                return Err(DataError::Split(format!(
                    "ratio {ratio} leaves an empty part of {m} rows"
                )));
            }
            for _ in 0..repeats {
                let mut idx: Vec<usize> = (0..m).collect();
                idx.shuffle(&mut rng);
                let mut train = idx[..train_size].to_vec();
                let mut test = idx[train_size..].to_vec();
                train.sort_unstable();
                test.sort_unstable();
                parts.push(Split { train, test });
            }
        }
        SplitKind::KFold { folds } => {
            if folds < 2 || folds > m {
                return Err(DataError::Split(format!("{folds} folds for {m} rows")));
            }
            let smallest = d.count(Label::Positive).min(d.count(Label::Negative));
            if folds > smallest {
                warnings.push(format!(
                    "{folds} folds exceed the {smallest} examples of the smaller class"
                ));
            }
            let mut idx: Vec<usize> = (0..m).collect();
            idx.shuffle(&mut rng);
            let base = m / folds;
            let extra = m % folds;
            let mut start = 0;
            for f in 0..folds {
                let len = base + usize::from(f < extra);
                let mut test = idx[start..start + len].to_vec();
                let mut train: Vec<usize> =
                    idx[..start].iter().chain(&idx[start + len..]).copied().collect();
                test.sort_unstable();
                train.sort_unstable();
                parts.push(Split { train, test });
                start += len;
            }
        }
    }
    Ok(Splits { parts, warnings })
}

/// Training and test datasets of one split.
pub fn split_data(d: &Dataset, split: &Split) -> Result<(Dataset, Dataset), DataError> {
    Ok((d.subset(&split.train)?, d.subset(&split.test)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, label: LabelColumn) -> Result<Dataset, DataError> {
        read_csv(text.as_bytes(), &label, "inline")
    }

    #[test]
    fn zero_one_labels_remapped() {
        let d = read("a,y\n1,1\n2,0\n3,1\n", LabelColumn::Last).unwrap();
        assert_eq!(d.labels(), &[Label::Positive, Label::Negative, Label::Positive]);
    }

    #[test]
    fn direct_parse() {
        let d = read("a,b,y\n1.5,2.0,-1\n", LabelColumn::Name("y".into())).unwrap();
        assert_eq!(d.x(0), &[1.5, 2.0]);
        assert_eq!(d.y(0), -1.0);
        assert_eq!(d.feature_names(), &["a", "b"]);
    }

    #[test]
    fn label_column_by_name_in_the_middle() {
        let d = read("a,y,b\n1,1,2\n3,-1,4\n", LabelColumn::Name("y".into())).unwrap();
        assert_eq!(d.x(1), &[3.0, 4.0]);
        assert_eq!(d.feature_names(), &["a", "b"]);
    }

    #[test]
    fn errors_name_the_cell() {
        let e = read("a,b,y\n1,2,1\n1,abc,1\n", LabelColumn::Last).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("line 3") && msg.contains("\"b\"") && msg.contains("abc"), "{msg}");
        assert!(matches!(read("a,y\n1,2\n", LabelColumn::Last), Err(DataError::BadLabel { .. })));
        assert!(matches!(
            read("a,y\n1,1\n", LabelColumn::Name("z".into())),
            Err(DataError::MissingLabel(_))
        ));
        assert!(matches!(read("a,y\n", LabelColumn::Last), Err(DataError::NoRows)));
        assert!(matches!(read("a,y\ninf,1\n", LabelColumn::Last), Err(DataError::NonFinite { .. })));
    }

    #[test]
    fn columns_aligned_by_name() {
        let d = read("b,a,c,y\n1,2,3,1\n", LabelColumn::Last).unwrap();
        let names = vec!["a".to_string(), "b".to_string()];
        assert_eq!(align_columns(&d, &names).unwrap().x(0), &[2.0, 1.0]);
        let e = align_columns(&d, &["a".to_string(), "z".to_string()]).unwrap_err();
        assert!(e.to_string().contains('z'));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_csv("/nonexistent/file.csv", &LabelColumn::Last),
            Err(DataError::Io { .. })
        ));
    }

    fn ten_rows() -> Dataset {
        let x = Matrix::from_vec(10, 1, (0..10).map(f64::from).collect()).unwrap();
        let y: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        Dataset::from_signs(x, &y).unwrap()
    }

    #[test]
    fn kfold_partition() {
        let s = make_splits(&ten_rows(), &SplitPlan::kfold(5, 7)).unwrap();
        assert_eq!(s.parts.len(), 5);
        let mut all: Vec<usize> = s.parts.iter().flat_map(|p| p.test.clone()).collect();
        assert!(s.parts.iter().all(|p| p.test.len() == 2 && p.train.len() == 8));
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn holdout_sizes_and_determinism() {
        let plan = SplitPlan::holdout(0.8, 3, 1);
        let s = make_splits(&ten_rows(), &plan).unwrap();
        assert!(s.parts.iter().all(|p| p.train.len() == 8 && p.test.len() == 2));
        assert_eq!(s, make_splits(&ten_rows(), &plan).unwrap());
        assert_ne!(s.parts[0], s.parts[1]);
    }

    #[test]
    fn too_many_folds_for_a_class_warns() {
        let x = Matrix::from_vec(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let d = Dataset::from_signs(x, &[1.0, -1.0, -1.0, -1.0]).unwrap();
        let s = make_splits(&d, &SplitPlan::kfold(3, 0)).unwrap();
        assert_eq!(s.warnings.len(), 1);
        assert!(make_splits(&d, &SplitPlan::kfold(5, 0)).is_err());
        assert!(make_splits(&d, &SplitPlan::holdout(1.0, 1, 0)).is_err());
    }
}
