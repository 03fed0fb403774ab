//! Labeled datasets: CSV loading, seeded synthesis, label corruption, and
//! splitting.
//!
//! All randomized operations are pure functions of their arguments including
//! the seed; rerunning any of them reproduces the output byte for byte.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::report::fmt_f64;
use crate::rng::{seeded, stream};

/// One labeled training or validation point.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Index of the sample inside its dataset; always `0..N` in order.
    pub id: usize,
    pub features: Vec<f64>,
    /// Dense category index in `0..num_classes`.
    pub label: usize,
}

/// Immutable labeled feature matrix with dense category labels.
///
/// Invariants: every sample has `dim` features, ids run `0..len()` in order,
/// and every label is below `num_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    dim: usize,
    num_classes: usize,
    /// Original label spelling per dense index (first-appearance order for
    /// CSV input, stringified indices for synthetic data).
    label_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from parallel feature rows and dense labels.
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let label_names = (0..num_classes).map(|c| c.to_string()).collect();
        Self::with_label_names(rows, labels, num_classes, label_names)
    }

    pub fn with_label_names(
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        num_classes: usize,
        label_names: Vec<String>,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("dataset must contain at least one sample"));
        }
        if rows.len() != labels.len() {
            return Err(Error::invalid(format!(
                "feature rows ({}) and labels ({}) differ in length",
                rows.len(),
                labels.len()
            )));
        }
        if num_classes < 1 {
            return Err(Error::invalid("num_classes must be positive"));
        }
        if label_names.len() != num_classes {
            return Err(Error::invalid("label_names length must equal num_classes"));
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(Error::invalid("samples must have at least one feature"));
        }
        let mut samples = Vec::with_capacity(rows.len());
        for (id, (features, label)) in rows.into_iter().zip(labels).enumerate() {
            if features.len() != dim {
                return Err(Error::invalid(format!(
                    "sample {id} has {} features, expected {dim}",
                    features.len()
                )));
            }
            if label >= num_classes {
                return Err(Error::invalid(format!(
                    "sample {id} has label {label}, expected < {num_classes}"
                )));
            }
            samples.push(Sample { id, features, label });
        }
        Ok(Dataset {
            samples,
            dim,
            num_classes,
            label_names,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn sample(&self, id: usize) -> &Sample {
        &self.samples[id]
    }

    pub fn features(&self, id: usize) -> &[f64] {
        &self.samples[id].features
    }

    pub fn label(&self, id: usize) -> usize {
        self.samples[id].label
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    /// New dataset containing `ids` in the given order, renumbered `0..`.
    /// Class count and label names are preserved.
    pub fn subset(&self, ids: &[usize]) -> Result<Dataset> {
        if ids.is_empty() {
            return Err(Error::invalid("subset would be empty"));
        }
        let mut samples = Vec::with_capacity(ids.len());
        for (new_id, &old) in ids.iter().enumerate() {
            let src = self
                .samples
                .get(old)
                .ok_or_else(|| Error::invalid(format!("sample id {old} out of range")))?;
            samples.push(Sample {
                id: new_id,
                features: src.features.clone(),
                label: src.label,
            });
        }
        Ok(Dataset {
            samples,
            dim: self.dim,
            num_classes: self.num_classes,
            label_names: self.label_names.clone(),
        })
    }

    /// Replaces the label of one sample. Used by corruption and annotation.
    fn set_label(&mut self, id: usize, label: usize) {
        self.samples[id].label = label;
    }

    /// Per-dimension mean and standard deviation (population form).
    pub fn zscore_stats(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.len() as f64;
        let mut mean = vec![0.0; self.dim];
        for s in &self.samples {
            for (m, x) in mean.iter_mut().zip(&s.features) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; self.dim];
        for s in &self.samples {
            for ((v, m), x) in var.iter_mut().zip(&mean).zip(&s.features) {
                let d = x - m;
                *v += d * d;
            }
        }
        let std = var.into_iter().map(|v| (v / n).sqrt()).collect();
        (mean, std)
    }

    /// Applies z-score normalization with the given statistics. Dimensions
    /// with zero deviation map to zero.
    pub fn apply_zscore(&self, mean: &[f64], std: &[f64]) -> Result<Dataset> {
        if mean.len() != self.dim || std.len() != self.dim {
            return Err(Error::invalid("normalization statistics dimension mismatch"));
        }
        let mut out = self.clone();
        for s in &mut out.samples {
            for (j, x) in s.features.iter_mut().enumerate() {
                *x = if std[j] > 0.0 { (*x - mean[j]) / std[j] } else { 0.0 };
            }
        }
        Ok(out)
    }

    /// Uniform per-class downsampling to the minority class count, seeded.
    /// Surviving samples keep their relative order and are renumbered.
    pub fn balanced_subsample(&self, seed: u64) -> Result<Dataset> {
        let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); self.num_classes];
        for s in &self.samples {
            per_class[s.label].push(s.id);
        }
        let minority = per_class
            .iter()
            .filter(|ids| !ids.is_empty())
            .map(|ids| ids.len())
            .min()
            .ok_or_else(|| Error::invalid("dataset has no samples"))?;
        let mut rng = seeded(seed, stream::BALANCE);
        let mut keep: Vec<usize> = Vec::new();
        for ids in &per_class {
            if ids.is_empty() {
                continue;
            }
            let mut shuffled = ids.clone();
            shuffled.shuffle(&mut rng);
            keep.extend(shuffled.into_iter().take(minority));
        }
        keep.sort_unstable();
        self.subset(&keep)
    }

    /// Writes the dataset as CSV with header `f0..f{dim-1},label`, features
    /// rendered at 17 significant digits and labels by their original names.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (0..self.dim).map(|j| format!("f{j}")).collect();
        writeln!(w, "{},label", header.join(","))?;
        for s in &self.samples {
            for x in &s.features {
                write!(w, "{},", fmt_f64(*x))?;
            }
            writeln!(w, "{}", self.label_names[s.label])?;
        }
        Ok(())
    }

    pub fn to_csv_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Record of which labels were flipped by [`flip_labels`] and what they were.
#[derive(Debug, Clone)]
pub struct FlipMask {
    flipped: Vec<bool>,
    original_labels: Vec<Option<usize>>,
}

impl FlipMask {
    pub fn len(&self) -> usize {
        self.flipped.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flipped.is_empty()
    }

    pub fn is_flipped(&self, id: usize) -> bool {
        self.flipped[id]
    }

    pub fn original_label(&self, id: usize) -> Option<usize> {
        self.original_labels[id]
    }

    pub fn flipped_ids(&self) -> Vec<usize> {
        self.flipped
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| f.then_some(i))
            .collect()
    }

    pub fn flip_count(&self) -> usize {
        self.flipped.iter().filter(|&&f| f).count()
    }
}

/// Incrementally built mapping from label spellings to dense indices.
///
/// Sharing one map across several files keeps train/validation/test label
/// indices consistent; loading each file in isolation would densify by that
/// file's own first-appearance order.
#[derive(Debug, Default, Clone)]
pub struct LabelMap {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        i
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Column selector for the label: a header name when the file has a header,
/// otherwise a 0-based column index.
fn resolve_label_column(
    path: &str,
    headers: Option<&csv::StringRecord>,
    label_column: &str,
) -> Result<usize> {
    match headers {
        Some(h) => h
            .iter()
            .position(|name| name == label_column)
            .ok_or_else(|| Error::Parse {
                path: path.to_string(),
                row: 1,
                column: label_column.to_string(),
                message: "label column not found in header".to_string(),
            }),
        None => label_column.parse::<usize>().map_err(|_| Error::Parse {
            path: path.to_string(),
            row: 1,
            column: label_column.to_string(),
            message: "without a header the label column must be a 0-based index".to_string(),
        }),
    }
}

struct RawCsv {
    rows: Vec<Vec<f64>>,
    label_cells: Vec<String>,
}

fn read_csv_raw(path: &Path, label_column: &str, has_header: bool) -> Result<RawCsv> {
    let path_str = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(false)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::invalid(format!("cannot open {path_str}: {e}")),
            _ => Error::invalid(format!("cannot read {path_str}: {e}")),
        })?;

    let headers = if has_header {
        Some(reader.headers().map_err(|e| Error::invalid(e.to_string()))?.clone())
    } else {
        None
    };
    let label_idx = resolve_label_column(&path_str, headers.as_ref(), label_column)?;
    let header_lines = usize::from(has_header);

    let mut rows = Vec::new();
    let mut label_cells = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let file_row = i + 1 + header_lines;
        let record = record.map_err(|e| Error::Parse {
            path: path_str.clone(),
            row: file_row,
            column: String::new(),
            message: e.to_string(),
        })?;
        if label_idx >= record.len() {
            return Err(Error::Parse {
                path: path_str.clone(),
                row: file_row,
                column: label_column.to_string(),
                message: format!("label column index {label_idx} out of range"),
            });
        }
        let mut features = Vec::with_capacity(record.len().saturating_sub(1));
        for (col, cell) in record.iter().enumerate() {
            if col == label_idx {
                label_cells.push(cell.trim().to_string());
                continue;
            }
            let column_name = match &headers {
                Some(h) => h.get(col).unwrap_or("").to_string(),
                None => col.to_string(),
            };
            let value: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                path: path_str.clone(),
                row: file_row,
                column: column_name.clone(),
                message: format!("cannot parse {cell:?} as a real number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    path: path_str.clone(),
                    row: file_row,
                    column: column_name,
                    message: format!("non-finite feature value {cell:?}"),
                });
            }
            features.push(value);
        }
        rows.push(features);
    }
    if rows.is_empty() {
        return Err(Error::invalid(format!("{path_str} contains no data rows")));
    }
    Ok(RawCsv { rows, label_cells })
}

/// Loads a CSV file into a dataset.
///
/// Labels are densified to `0..C` by first appearance in file order; rows
/// keep file order as their id order. Feature cells must parse as finite
/// real numbers, otherwise the error names the offending row and column.
pub fn load_csv(path: &Path, label_column: &str, has_header: bool) -> Result<Dataset> {
    let mut map = LabelMap::new();
    let raw = read_csv_raw(path, label_column, has_header)?;
    let labels: Vec<usize> = raw.label_cells.iter().map(|c| map.intern(c)).collect();
    Dataset::with_label_names(raw.rows, labels, map.len(), map.names().to_vec())
}

/// Loads several CSV files with one shared label mapping so train, validation
/// and test files agree on label indices and class count.
pub fn load_csv_group(paths: &[&Path], label_column: &str, has_header: bool) -> Result<Vec<Dataset>> {
    let mut map = LabelMap::new();
    let mut raws = Vec::with_capacity(paths.len());
    for path in paths {
        let raw = read_csv_raw(path, label_column, has_header)?;
        let labels: Vec<usize> = raw.label_cells.iter().map(|c| map.intern(c)).collect();
        raws.push((raw.rows, labels));
    }
    let num_classes = map.len();
    raws.into_iter()
        .map(|(rows, labels)| {
            Dataset::with_label_names(rows, labels, num_classes, map.names().to_vec())
        })
        .collect()
}

/// Synthesizes Gaussian class clusters.
///
/// Class centers sit on the first axis at multiples of `separation`, so all
/// pairwise center distances are at least `separation`. Sample `i` belongs to
/// class `i % num_classes`, which balances class counts within one and leaves
/// any contiguous shard close to class-balanced.
pub fn synth_blobs(
    n: usize,
    dim: usize,
    num_classes: usize,
    separation: f64,
    noise_std: f64,
    seed: u64,
) -> Result<Dataset> {
    if num_classes < 2 {
        return Err(Error::invalid("synth_blobs requires at least 2 classes"));
    }
    if n < num_classes {
        return Err(Error::invalid(format!(
            "n = {n} must be at least num_classes = {num_classes}"
        )));
    }
    if dim == 0 {
        return Err(Error::invalid("dim must be positive"));
    }
    if separation.is_nan() || separation <= 0.0 {
        return Err(Error::invalid("separation must be positive"));
    }
    if noise_std.is_nan() || noise_std < 0.0 {
        return Err(Error::invalid("noise_std must be nonnegative"));
    }
    let mut rng = seeded(seed, stream::SYNTH);
    let normal = StandardNormal;
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % num_classes;
        let mut features = vec![0.0; dim];
        features[0] = class as f64 * separation;
        for x in features.iter_mut() {
            let noise: f64 = normal.sample(&mut rng);
            *x += noise_std * noise;
        }
        rows.push(features);
        labels.push(class);
    }
    Dataset::new(rows, labels, num_classes)
}

/// Flips exactly `round(ratio * N)` labels, selected uniformly without
/// replacement; each new label is drawn uniformly from the other categories.
pub fn flip_labels(ds: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, FlipMask)> {
    if ds.num_classes() < 2 {
        return Err(Error::invalid("flip_labels requires at least 2 classes"));
    }
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::invalid("flip ratio must lie in [0, 1]"));
    }
    let n = ds.len();
    let count = (ratio * n as f64).round() as usize;
    let mut select_rng = seeded(seed, stream::FLIP_SELECT);
    let chosen = rand::seq::index::sample(&mut select_rng, n, count);
    let mut out = ds.clone();
    let mut flipped = vec![false; n];
    let mut original = vec![None; n];
    let mut label_rng = seeded(seed, stream::FLIP_LABEL);
    let mut ids: Vec<usize> = chosen.into_iter().collect();
    ids.sort_unstable();
    for id in ids {
        let old = ds.label(id);
        let draw = label_rng.gen_range(0..ds.num_classes() - 1);
        let new = if draw < old { draw } else { draw + 1 };
        out.set_label(id, new);
        flipped[id] = true;
        original[id] = Some(old);
    }
    Ok((
        out,
        FlipMask {
            flipped,
            original_labels: original,
        },
    ))
}

/// Index partition used by [`split`]; exposed so the partition invariant can
/// be checked before renumbering.
pub fn split_indices(
    n: usize,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<[Vec<usize>; 3]> {
    let (ft, fv, fe) = fractions;
    for f in [ft, fv, fe] {
        if f.is_nan() || f < 0.0 {
            return Err(Error::invalid("split fractions must be nonnegative"));
        }
    }
    if ((ft + fv + fe) - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("split fractions must sum to 1"));
    }
    let mut sizes = [
        (ft * n as f64).floor() as usize,
        (fv * n as f64).floor() as usize,
        (fe * n as f64).floor() as usize,
    ];
    let mut remainder = n - sizes.iter().sum::<usize>();
    // Earliest components absorb the remainder: train first, then val.
    for size in sizes.iter_mut() {
        if remainder == 0 {
            break;
        }
        *size += 1;
        remainder -= 1;
    }
    for (size, frac, name) in [
        (sizes[0], ft, "train"),
        (sizes[1], fv, "val"),
        (sizes[2], fe, "test"),
    ] {
        if frac > 0.0 && size == 0 {
            return Err(Error::invalid(format!(
                "{name} fraction {frac} yields an empty split for n = {n}"
            )));
        }
    }
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut seeded(seed, stream::SPLIT));
    let val_start = sizes[0];
    let test_start = sizes[0] + sizes[1];
    Ok([
        ids[..val_start].to_vec(),
        ids[val_start..test_start].to_vec(),
        ids[test_start..].to_vec(),
    ])
}

/// Disjoint seeded partition into train/validation/test datasets.
///
/// Sizes follow floor-then-distribute-remainder with the remainder going to
/// train first, then validation. Ids are renumbered within each split. Splits
/// whose fraction is exactly zero come back as `None`.
pub fn split(
    ds: &Dataset,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(Option<Dataset>, Option<Dataset>, Option<Dataset>)> {
    let parts = split_indices(ds.len(), fractions, seed)?;
    let build = |ids: &Vec<usize>| -> Result<Option<Dataset>> {
        if ids.is_empty() {
            Ok(None)
        } else {
            Ok(Some(ds.subset(ids)?))
        }
    };
    Ok((build(&parts[0])?, build(&parts[1])?, build(&parts[2])?))
}
