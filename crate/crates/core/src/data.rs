//! Datasets: synthetic Gaussian blobs, IDX (MNIST-family) and CSV loaders.
//!
//! Every loader min-max normalizes features into `[0, 1]` per column.
//! Constant columns normalize to 0.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ml::Batch;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Synthetic {
        seed: u64,
        n_classes: usize,
        input_dim: usize,
        n_samples: usize,
        class_sep: f64,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
    },
    Csv {
        path: PathBuf,
    },
    /// Rows selected from another dataset.
    Subset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    input_dim: usize,
    n_classes: usize,
    provenance: Provenance,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        labels: Vec<usize>,
        input_dim: usize,
        n_classes: usize,
        provenance: Provenance,
    ) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidInput("input_dim must be positive".into()));
        }
        if features.len() != labels.len() * input_dim {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * input_dim,
                actual: features.len(),
            });
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= n_classes) {
            return Err(Error::InvalidInput(format!(
                "label {y} out of range for {n_classes} classes"
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("features must be finite".into()));
        }
        Ok(Dataset {
            features,
            labels,
            input_dim,
            n_classes,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.input_dim..(i + 1) * self.input_dim]
    }

    /// The whole dataset as one batch. Panics on an empty dataset.
    pub fn as_batch(&self) -> Batch<'_> {
        Batch::new(&self.features, &self.labels, self.input_dim)
            .expect("dataset invariants guarantee a well-formed batch")
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.input_dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            labels,
            input_dim: self.input_dim,
            n_classes: self.n_classes,
            provenance: Provenance::Subset,
        }
    }

    /// Splits into the first `n` rows and the rest.
    pub fn split_at(&self, n: usize) -> (Dataset, Dataset) {
        let n = n.min(self.len());
        let head: Vec<usize> = (0..n).collect();
        let tail: Vec<usize> = (n..self.len()).collect();
        (self.subset(&head), self.subset(&tail))
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }
}

/// Per-column min-max scaling in place; constant columns become 0.
pub fn min_max_normalize(features: &mut [f64], input_dim: usize) {
    let rows = features.len() / input_dim;
    for c in 0..input_dim {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for r in 0..rows {
            let v = features[r * input_dim + c];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let range = hi - lo;
        for r in 0..rows {
            let v = &mut features[r * input_dim + c];
            *v = if range > 0.0 {
                ((*v - lo) / range).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
    }
}

/// Gaussian blobs with unit covariance. Class `c` is centred on
/// `class_sep / sqrt(2) * e_c`, so every pair of class means is exactly
/// `class_sep` apart. Labels cycle `0, 1, …, n_classes-1` so classes are
/// balanced to within one sample.
pub fn generate_synthetic<R: Rng + ?Sized>(
    n_classes: usize,
    input_dim: usize,
    n_samples: usize,
    class_sep: f64,
    seed: u64,
    rng: &mut R,
) -> Result<Dataset> {
    if n_classes < 2 || n_samples == 0 {
        return Err(Error::Config(format!(
            "synthetic data needs n_classes >= 2 and n_samples >= 1 (got {n_classes}, {n_samples})"
        )));
    }
    if input_dim < n_classes {
        return Err(Error::Config(format!(
            "synthetic data needs input_dim >= n_classes to place equidistant means (got {input_dim} < {n_classes})"
        )));
    }
    if !(class_sep >= 0.0) || !class_sep.is_finite() {
        return Err(Error::Config(format!("class_sep must be >= 0, got {class_sep}")));
    }
    let offset = class_sep / std::f64::consts::SQRT_2;
    let mut features = Vec::with_capacity(n_samples * input_dim);
    let mut labels = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let y = i % n_classes;
        for d in 0..input_dim {
            let z: f64 = StandardNormal.sample(rng);
            features.push(if d == y { z + offset } else { z });
        }
        labels.push(y);
    }
    min_max_normalize(&mut features, input_dim);
    Dataset::new(
        features,
        labels,
        input_dim,
        n_classes,
        Provenance::Synthetic {
            seed,
            n_classes,
            input_dim,
            n_samples,
            class_sep,
        },
    )
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| {
            Error::Format(format!(
                "{}: truncated header, need 4 bytes at offset {offset} but file has {}",
                path.display(),
                bytes.len()
            ))
        })
}

/// Loads an IDX image file (magic `0x00000803`) and label file (magic
/// `0x00000801`). Pixels are scaled by 1/255 and flattened row-major.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let images = read_file(images_path)?;
    let labels = read_file(labels_path)?;

    let magic = be_u32(&images, 0, images_path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "{}: bad magic 0x{magic:08x} at offset 0, expected 0x{IDX_IMAGES_MAGIC:08x}",
            images_path.display()
        )));
    }
    let n_images = be_u32(&images, 4, images_path)? as usize;
    let rows = be_u32(&images, 8, images_path)? as usize;
    let cols = be_u32(&images, 12, images_path)? as usize;
    let dim = rows * cols;
    let expected = 16 + n_images * dim;
    if images.len() != expected {
        return Err(Error::Format(format!(
            "{}: expected {expected} bytes ({n_images} images of {rows}x{cols} after a 16-byte header), found {}",
            images_path.display(),
            images.len()
        )));
    }

    let magic = be_u32(&labels, 0, labels_path)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Format(format!(
            "{}: bad magic 0x{magic:08x} at offset 0, expected 0x{IDX_LABELS_MAGIC:08x}",
            labels_path.display()
        )));
    }
    let n_labels = be_u32(&labels, 4, labels_path)? as usize;
    if n_labels != n_images {
        return Err(Error::Format(format!(
            "{} declares {n_labels} labels at offset 4 but {} declares {n_images} images",
            labels_path.display(),
            images_path.display()
        )));
    }
    if labels.len() != 8 + n_labels {
        return Err(Error::Format(format!(
            "{}: expected {} bytes, found {}",
            labels_path.display(),
            8 + n_labels,
            labels.len()
        )));
    }
    if dim == 0 || n_images == 0 {
        return Err(Error::Format(format!(
            "{}: empty image set",
            images_path.display()
        )));
    }

    let features: Vec<f64> = images[16..].iter().map(|&p| p as f64 / 255.0).collect();
    let labels: Vec<usize> = labels[8..].iter().map(|&l| l as usize).collect();
    let n_classes = labels.iter().copied().max().unwrap_or(0).max(1) + 1;
    Dataset::new(
        features,
        labels,
        dim,
        n_classes,
        Provenance::Idx {
            images: images_path.to_path_buf(),
            labels: labels_path.to_path_buf(),
        },
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvOptions {
    /// Zero-based index of the column holding integer class labels.
    pub label_column: usize,
    #[serde(default)]
    pub has_header: bool,
}

/// Loads a numeric CSV. The label column must hold non-negative integers;
/// every other column is a feature and is min-max normalized.
pub fn load_csv(path: &Path, options: &CsvOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(options.has_header)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    let first_data_line = if options.has_header { 2 } else { 1 };
    for (i, record) in reader.records().enumerate() {
        let row = first_data_line + i;
        let record = record.map_err(|e| Error::Format(format!("{}: row {row}: {e}", path.display())))?;
        match width {
            None => {
                if options.label_column >= record.len() {
                    return Err(Error::Format(format!(
                        "{}: label column {} out of range for {} columns",
                        path.display(),
                        options.label_column,
                        record.len()
                    )));
                }
                if record.len() < 2 {
                    return Err(Error::Format(format!(
                        "{}: need at least one feature column besides the label",
                        path.display()
                    )));
                }
                width = Some(record.len());
            }
            Some(w) if w != record.len() => {
                return Err(Error::Format(format!(
                    "{}: row {row} has {} columns, expected {w}",
                    path.display(),
                    record.len()
                )))
            }
            _ => {}
        }
        for (col, field) in record.iter().enumerate() {
            if field.is_empty() {
                return Err(Error::Format(format!(
                    "{}: missing value at row {row}, column {col}",
                    path.display()
                )));
            }
            if col == options.label_column {
                let y: usize = field.parse().map_err(|_| {
                    Error::Format(format!(
                        "{}: row {row}, column {col}: label {field:?} is not a non-negative integer",
                        path.display()
                    ))
                })?;
                labels.push(y);
            } else {
                let v: f64 = field.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                    Error::Format(format!(
                        "{}: row {row}, column {col}: {field:?} is not a finite number",
                        path.display()
                    ))
                })?;
                features.push(v);
            }
        }
    }
    let width = width.ok_or_else(|| Error::Format(format!("{}: no data rows", path.display())))?;
    let input_dim = width - 1;
    min_max_normalize(&mut features, input_dim);
    let n_classes = labels.iter().copied().max().unwrap_or(0).max(1) + 1;
    Dataset::new(
        features,
        labels,
        input_dim,
        n_classes,
        Provenance::Csv {
            path: path.to_path_buf(),
        },
    )
}

/// Where a run's train and test data come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Train and test rows are generated together and split, so both share
    /// one normalization.
    Synthetic {
        #[serde(default = "default_n_classes")]
        n_classes: usize,
        #[serde(default = "default_input_dim")]
        input_dim: usize,
        #[serde(default = "default_n_train")]
        n_train: usize,
        #[serde(default = "default_n_test")]
        n_test: usize,
        #[serde(default = "default_class_sep")]
        class_sep: f64,
    },
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
    /// One CSV file; the last `test_fraction` of rows is held out.
    Csv {
        path: PathBuf,
        label_column: usize,
        #[serde(default)]
        has_header: bool,
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
    },
}

fn default_n_classes() -> usize {
    10
}
fn default_input_dim() -> usize {
    32
}
fn default_n_train() -> usize {
    20_000
}
fn default_n_test() -> usize {
    2_000
}
fn default_class_sep() -> f64 {
    DEFAULT_CLASS_SEP
}
fn default_test_fraction() -> f64 {
    0.1
}

/// Separation of the default synthetic blobs. Chosen so a small MLP is
/// well short of perfect after one pass, leaving room for quantization
/// effects to show.
pub const DEFAULT_CLASS_SEP: f64 = 4.0;

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::Synthetic {
            n_classes: default_n_classes(),
            input_dim: default_input_dim(),
            n_train: default_n_train(),
            n_test: default_n_test(),
            class_sep: default_class_sep(),
        }
    }
}

/// Gives both halves the larger of their inferred class counts.
fn align_classes(train: Dataset, test: Dataset) -> Result<(Dataset, Dataset)> {
    let n = train.n_classes.max(test.n_classes);
    let widen = |d: Dataset| Dataset::new(d.features, d.labels, d.input_dim, n, d.provenance);
    if train.input_dim != test.input_dim {
        return Err(Error::DimensionMismatch {
            expected: train.input_dim,
            actual: test.input_dim,
        });
    }
    Ok((widen(train)?, widen(test)?))
}

impl DatasetSpec {
    /// Loads or generates `(train, test)`.
    pub fn load(&self, seed: u64) -> Result<(Dataset, Dataset)> {
        match self {
            DatasetSpec::Synthetic {
                n_classes,
                input_dim,
                n_train,
                n_test,
                class_sep,
            } => {
                if *n_test == 0 {
                    return Err(Error::Config("n_test must be positive".into()));
                }
                let mut rng = crate::rng::stream(seed, crate::rng::Purpose::Dataset, crate::rng::SERVER, 0);
                let all = generate_synthetic(*n_classes, *input_dim, n_train + n_test, *class_sep, seed, &mut rng)?;
                Ok(all.split_at(*n_train))
            }
            DatasetSpec::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
            } => align_classes(load_idx(train_images, train_labels)?, load_idx(test_images, test_labels)?),
            DatasetSpec::Csv {
                path,
                label_column,
                has_header,
                test_fraction,
            } => {
                if !(*test_fraction > 0.0 && *test_fraction < 1.0) {
                    return Err(Error::Config(format!(
                        "test_fraction must be in (0, 1), got {test_fraction}"
                    )));
                }
                let all = load_csv(
                    path,
                    &CsvOptions {
                        label_column: *label_column,
                        has_header: *has_header,
                    },
                )?;
                let n_test = ((all.len() as f64 * test_fraction).round() as usize).clamp(1, all.len().saturating_sub(1).max(1));
                let (train, test) = all.split_at(all.len() - n_test);
                if train.is_empty() {
                    return Err(Error::InsufficientData(format!(
                        "{}: too few rows to hold out a test split",
                        path.display()
                    )));
                }
                Ok((train, test))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::{Model, ModelKind};
    use crate::rng::{stream, Purpose};
    use std::io::Write;

    fn synthetic(n_classes: usize, dim: usize, n: usize, sep: f64, seed: u64) -> Dataset {
        let mut rng = stream(seed, Purpose::Dataset, 0, 0);
        generate_synthetic(n_classes, dim, n, sep, seed, &mut rng).unwrap()
    }

    #[test]
    fn default_spec_splits_train_and_test() {
        let spec = DatasetSpec::Synthetic {
            n_classes: 4,
            input_dim: 6,
            n_train: 80,
            n_test: 20,
            class_sep: 2.0,
        };
        let (train, test) = spec.load(5).unwrap();
        assert_eq!((train.len(), test.len()), (80, 20));
        assert_eq!(train.class_counts(), vec![20; 4]);
        assert_eq!(spec.load(5).unwrap().0, train);
    }

    #[test]
    fn synthetic_is_deterministic_and_normalized() {
        let a = synthetic(4, 6, 200, 3.0, 5);
        let b = synthetic(4, 6, 200, 3.0, 5);
        assert_eq!(a, b);
        assert!(a.features().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(a.class_counts(), vec![50; 4]);
        assert_ne!(a, synthetic(4, 6, 200, 3.0, 6));
    }

    #[test]
    fn separable_blobs_are_learned_quickly() {
        let data = synthetic(10, 20, 2000, 10.0, 1);
        let mut model = Model::zeros(ModelKind::LogisticRegression, 20, 10).unwrap();
        let batch = data.as_batch();
        for _ in 0..50 {
            let g = model.gradient(&batch).unwrap();
            model.apply_sgd(&g, 20.0).unwrap();
        }
        let acc = model.evaluate(&data).unwrap().accuracy;
        assert!(acc >= 0.99, "train accuracy {acc}");
    }

    #[test]
    fn zero_separation_is_chance_level() {
        let data = synthetic(10, 10, 6000, 0.0, 2);
        let (train, test) = data.split_at(3000);
        let mut model = Model::zeros(ModelKind::LogisticRegression, 10, 10).unwrap();
        for _ in 0..50 {
            let g = model.gradient(&train.as_batch()).unwrap();
            model.apply_sgd(&g, 1.0).unwrap();
        }
        let acc = model.evaluate(&test).unwrap().accuracy;
        let sigma = (0.1f64 * 0.9 / test.len() as f64).sqrt();
        assert!((acc - 0.1).abs() <= 3.0 * sigma, "accuracy {acc}, 3 sigma = {}", 3.0 * sigma);
    }

    #[test]
    fn random_model_scores_chance_on_balanced_data() {
        let data = synthetic(10, 10, 5000, 4.0, 8);
        let mut rng = stream(8, Purpose::ModelInit, 0, 0);
        let model = Model::init(ModelKind::LogisticRegression, 10, 10, &mut rng).unwrap();
        // Overwrite with weights that ignore the inputs: constant prediction.
        let mut w = model.weights().to_vec();
        w[..100].iter_mut().for_each(|v| *v = 0.0);
        let model = Model::from_weights(ModelKind::LogisticRegression, 10, 10, w).unwrap();
        let acc = model.evaluate(&data).unwrap().accuracy;
        let sigma = (0.1f64 * 0.9 / data.len() as f64).sqrt();
        assert!((acc - 0.1).abs() <= 3.0 * sigma, "{acc}");
    }

    #[test]
    fn evaluate_single_correct_sample() {
        let model = Model::from_weights(ModelKind::LogisticRegression, 1, 2, vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        let data = Dataset::new(vec![0.5], vec![1], 1, 2, Provenance::Subset).unwrap();
        assert_eq!(model.evaluate(&data).unwrap().accuracy, 1.0);
    }

    #[test]
    fn evaluate_loss_is_mean_of_batch_losses() {
        let data = synthetic(3, 4, 96, 2.0, 4);
        let mut rng = stream(4, Purpose::ModelInit, 0, 0);
        let model = Model::init(ModelKind::default(), 4, 3, &mut rng).unwrap();
        let full = model.evaluate(&data).unwrap().loss;
        let mean_of_batches: f64 = (0..3)
            .map(|b| {
                let idx: Vec<usize> = (b * 32..(b + 1) * 32).collect();
                model.forward_loss(&data.subset(&idx).as_batch()).unwrap()
            })
            .sum::<f64>()
            / 3.0;
        approx::assert_abs_diff_eq!(full, mean_of_batches, epsilon = 1e-12);
    }

    #[test]
    fn evaluate_rejects_empty_dataset() {
        let model = Model::zeros(ModelKind::LogisticRegression, 2, 2).unwrap();
        let empty = Dataset::new(vec![], vec![], 2, 2, Provenance::Subset).unwrap();
        assert!(model.evaluate(&empty).is_err());
    }

    fn idx_fixture(dir: &Path, n_images: u32, n_labels: u32, pixels: &[u8], labels: &[u8]) -> (PathBuf, PathBuf) {
        let img = dir.join("images.idx3");
        let lab = dir.join("labels.idx1");
        let mut f = fs::File::create(&img).unwrap();
        f.write_all(&IDX_IMAGES_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&n_images.to_be_bytes()).unwrap();
        f.write_all(&2u32.to_be_bytes()).unwrap();
        f.write_all(&2u32.to_be_bytes()).unwrap();
        f.write_all(pixels).unwrap();
        let mut f = fs::File::create(&lab).unwrap();
        f.write_all(&IDX_LABELS_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&n_labels.to_be_bytes()).unwrap();
        f.write_all(labels).unwrap();
        (img, lab)
    }

    #[test]
    fn idx_fixture_round_trips_pixels() {
        let dir = tempfile::tempdir().unwrap();
        let pixels: Vec<u8> = (0..16).map(|i| (i * 17) as u8).collect();
        let (img, lab) = idx_fixture(dir.path(), 4, 4, &pixels, &[3, 0, 1, 2]);
        let data = load_idx(&img, &lab).unwrap();
        assert_eq!(data.len(), 4);
        assert_eq!(data.input_dim(), 4);
        assert_eq!(data.labels(), &[3, 0, 1, 2]);
        assert_eq!(data.n_classes(), 4);
        assert_eq!(data.row(1), &[68.0 / 255.0, 85.0 / 255.0, 102.0 / 255.0, 119.0 / 255.0]);
        assert_eq!(data.row(3)[3], 1.0);
    }

    #[test]
    fn idx_truncated_and_mismatched_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lab) = idx_fixture(dir.path(), 4, 4, &[0; 15], &[0, 1, 2, 3]);
        assert!(matches!(load_idx(&img, &lab), Err(Error::Format(_))));
        let (img, lab) = idx_fixture(dir.path(), 4, 3, &[0; 16], &[0, 1, 2]);
        let err = load_idx(&img, &lab).unwrap_err().to_string();
        assert!(err.contains("3 labels"), "{err}");
        fs::write(&img, [0u8, 0, 8, 1, 0, 0]).unwrap();
        let err = load_idx(&img, &lab).unwrap_err().to_string();
        assert!(err.contains("offset 0"), "{err}");
    }

    #[test]
    fn csv_fixture_exact_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        fs::write(&path, "x,label,y,k\n1.0,0,10,5\n3.0,1,30,5\n2.0,2,20,5\n").unwrap();
        let data = load_csv(&path, &CsvOptions { label_column: 1, has_header: true }).unwrap();
        assert_eq!(data.labels(), &[0, 1, 2]);
        assert_eq!(data.input_dim(), 3);
        assert_eq!(data.features(), &[0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn csv_missing_value_names_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        fs::write(&path, "1,0\n2,\n").unwrap();
        let err = load_csv(&path, &CsvOptions { label_column: 1, has_header: false })
            .unwrap_err()
            .to_string();
        assert!(err.contains("row 2") && err.contains("column 1"), "{err}");
    }

    #[test]
    fn loaders_are_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        fs::write(&path, "0.5,1\n-2,0\n7,1\n").unwrap();
        let opts = CsvOptions { label_column: 1, has_header: false };
        assert_eq!(load_csv(&path, &opts).unwrap(), load_csv(&path, &opts).unwrap());
    }
}
