//! Labeled feature-vector datasets: CSV I/O, Gaussian synthesis and
//! disjoint-label splits.
//!
//! CSV rows are `label,f_1,...,f_d` with no header. Labels are non-negative
//! integers; every row must have the same width.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub type Label = u32;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Matrix,
    labels: Vec<Label>,
    class_index: BTreeMap<Label, Vec<usize>>,
}

impl LabeledDataset {
    pub fn new(features: Matrix, labels: Vec<Label>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Dimension {
                expected: features.rows(),
                got: labels.len(),
            });
        }
        let mut class_index: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
        for (i, &l) in labels.iter().enumerate() {
            class_index.entry(l).or_default().push(i);
        }
        Ok(LabeledDataset {
            features,
            labels,
            class_index,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Input dimension.
    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, row: usize) -> Label {
        self.labels[row]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        self.features.row(row)
    }

    /// Row indices per class, ascending within each class.
    pub fn class_index(&self) -> &BTreeMap<Label, Vec<usize>> {
        &self.class_index
    }

    pub fn rows_of(&self, label: Label) -> &[usize] {
        self.class_index.get(&label).map_or(&[], Vec::as_slice)
    }

    /// Distinct labels in ascending order.
    pub fn classes(&self) -> Vec<Label> {
        self.class_index.keys().copied().collect()
    }

    pub fn num_classes(&self) -> usize {
        self.class_index.len()
    }

    /// Rows whose label is in `classes`, original order preserved.
    pub fn subset(&self, classes: &BTreeSet<Label>) -> LabeledDataset {
        let rows: Vec<usize> = (0..self.len())
            .filter(|&i| classes.contains(&self.labels[i]))
            .collect();
        let labels = rows.iter().map(|&i| self.labels[i]).collect();
        LabeledDataset::new(self.features.select_rows(&rows), labels)
            .expect("row selection keeps shapes consistent")
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut labels = Vec::new();
        let mut values = Vec::new();
        let mut width: Option<usize> = None;
        for record in rdr.records() {
            let record = record.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let parse_err = |message: String| Error::Parse { line, message };
            let mut fields = record.iter();
            let label_field = fields.next().unwrap_or("");
            let label: Label = label_field
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("invalid label {label_field:?}")))?;
            let n_features = record.len() - 1;
            if n_features == 0 {
                return Err(parse_err("row has no features".into()));
            }
            match width {
                None => width = Some(n_features),
                Some(w) if w != n_features => {
                    return Err(parse_err(format!(
                        "expected {w} features, found {n_features}"
                    )))
                }
                _ => {}
            }
            for f in fields {
                let v: f64 = f
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(format!("non-numeric feature {f:?}")))?;
                if !v.is_finite() {
                    return Err(parse_err(format!("non-finite feature {f:?}")));
                }
                values.push(v);
            }
            labels.push(label);
        }
        let Some(width) = width else {
            return Err(Error::Parse {
                line: 1,
                message: "file contains no samples".into(),
            });
        };
        let features = Matrix::from_vec(labels.len(), width, values)?;
        LabeledDataset::new(features, labels)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
        Self::read_csv(std::io::BufReader::new(file))
    }

    /// Writes the dataset in the CSV schema. Floats use the shortest
    /// representation that parses back to the same value.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_labeled_rows(
            writer,
            self.labels.iter().copied().zip(self.features.row_iter()),
        )
    }
}

/// Shared by dataset export and embedding dumps.
pub(crate) fn write_labeled_rows<'a, W, I>(writer: W, rows: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (Label, &'a [f64])>,
{
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let mut record: Vec<String> = Vec::new();
    for (label, values) in rows {
        record.clear();
        record.push(label.to_string());
        record.extend(values.iter().map(|v| v.to_string()));
        wtr.write_record(&record).map_err(csv_to_io)?;
    }
    wtr.flush()?;
    Ok(())
}

fn csv_to_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Parameters for [`synth_gaussian`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SynthSpec {
    pub num_classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub spread: f64,
    pub seed: u64,
}

/// Gaussian blobs: class means uniform in `[-1, 1]^dim`, isotropic noise with
/// standard deviation `spread`. Labels are `0..num_classes`, rows grouped by
/// class. Generator: ChaCha8 seeded with `seed`.
pub fn synth_gaussian(spec: &SynthSpec) -> Result<LabeledDataset> {
    if spec.num_classes < 2 {
        return Err(Error::Config("num_classes must be at least 2".into()));
    }
    if spec.per_class < 2 {
        return Err(Error::Config("per_class must be at least 2".into()));
    }
    if spec.dim < 1 {
        return Err(Error::Config("dim must be at least 1".into()));
    }
    if !(spec.spread > 0.0 && spec.spread.is_finite()) {
        return Err(Error::Config("spread must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.spread).map_err(|e| Error::Config(e.to_string()))?;
    let means: Vec<Vec<f64>> = (0..spec.num_classes)
        .map(|_| {
            (0..spec.dim)
                .map(|_| rng.random_range(-1.0..=1.0))
                .collect()
        })
        .collect();
    let n = spec.num_classes * spec.per_class;
    let mut values = Vec::with_capacity(n * spec.dim);
    let mut labels = Vec::with_capacity(n);
    for (c, mean) in means.iter().enumerate() {
        for _ in 0..spec.per_class {
            values.extend(mean.iter().map(|m| m + noise.sample(&mut rng)));
            labels.push(c as Label);
        }
    }
    LabeledDataset::new(Matrix::from_vec(n, spec.dim, values)?, labels)
}

/// Disjoint train/test label sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_classes: BTreeSet<Label>,
    pub test_classes: BTreeSet<Label>,
}

impl SplitSpec {
    pub fn new(
        train: impl IntoIterator<Item = Label>,
        test: impl IntoIterator<Item = Label>,
    ) -> Self {
        SplitSpec {
            train_classes: train.into_iter().collect(),
            test_classes: test.into_iter().collect(),
        }
    }

    /// First `n_train` classes (ascending label order) for training, the rest
    /// for testing.
    pub fn first_n(ds: &LabeledDataset, n_train: usize) -> Self {
        let classes = ds.classes();
        let n_train = n_train.min(classes.len());
        SplitSpec::new(
            classes[..n_train].iter().copied(),
            classes[n_train..].iter().copied(),
        )
    }
}

/// Partitions `ds` into (train, test) by class. Overlapping or unknown
/// classes are rejected.
pub fn split_by_class(
    ds: &LabeledDataset,
    spec: &SplitSpec,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if let Some(c) = spec.train_classes.intersection(&spec.test_classes).next() {
        return Err(Error::Split(format!(
            "class {c} is in both train and test sets"
        )));
    }
    if let Some(c) = spec
        .train_classes
        .iter()
        .chain(&spec.test_classes)
        .find(|c| !ds.class_index.contains_key(c))
    {
        return Err(Error::Split(format!(
            "class {c} does not occur in the dataset"
        )));
    }
    Ok((
        ds.subset(&spec.train_classes),
        ds.subset(&spec.test_classes),
    ))
}
