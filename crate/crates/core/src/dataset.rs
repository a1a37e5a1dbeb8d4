//! Labeled datasets of raw measurements: loading, saving, stratified
//! splitting and synthetic generation.
//!
//! A [`Dataset`] owns the canonical 0-based row index space that every other
//! module (providers, selectors, embeddings) refers to.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BINARY_MAGIC: &[u8; 8] = b"PROTOSEL";

/// Labeled objects as rows of real-valued measurements.
///
/// Labels are opaque tokens compared by equality only. Rows are immutable
/// after construction, so a dataset can be shared freely across workers.
#[derive(Clone, Debug)]
pub struct Dataset {
    objects: Array2<f64>,
    labels: Vec<String>,
    ids: Option<Vec<String>>,
    classes: Vec<String>,
    label_codes: Vec<u32>,
    revision: u64,
}

impl Dataset {
    /// Build a dataset from a measurement matrix and aligned labels.
    pub fn new(objects: Array2<f64>, labels: Vec<String>, ids: Option<Vec<String>>) -> Result<Self> {
        if objects.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        if objects.ncols() == 0 {
            return Err(Error::InvalidParameter {
                name: "objects",
                reason: "at least one measurement column is required".into(),
            });
        }
        Self::from_parts(objects, labels, ids)
    }

    /// Like [`Dataset::new`] but tolerates zero rows; split outputs may be empty.
    fn from_parts(objects: Array2<f64>, labels: Vec<String>, ids: Option<Vec<String>>) -> Result<Self> {
        let n = objects.nrows();
        if labels.len() != n {
            return Err(Error::LengthMismatch { what: "labels", expected: n, actual: labels.len() });
        }
        if let Some(ids) = &ids {
            if ids.len() != n {
                return Err(Error::LengthMismatch { what: "ids", expected: n, actual: ids.len() });
            }
        }
        for (row, value) in objects.indexed_iter() {
            if !value.is_finite() {
                return Err(Error::MalformedRow {
                    row: row.0 + 1,
                    reason: format!("non-finite measurement {value} in column {}", row.1),
                });
            }
        }
        let (classes, label_codes) = intern_labels(&labels);
        let revision = fingerprint(&objects, &labels);
        Ok(Self { objects, labels, ids, classes, label_codes, revision })
    }

    /// Number of objects.
    pub fn n(&self) -> usize {
        self.objects.nrows()
    }

    /// Number of measurements per object.
    pub fn q(&self) -> usize {
        self.objects.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.n() == 0
    }

    pub fn objects(&self) -> &Array2<f64> {
        &self.objects
    }

    /// Measurement row `i` as a contiguous slice.
    pub fn row(&self, i: usize) -> &[f64] {
        self.objects.row(i).to_slice().expect("row-major layout")
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    /// Distinct label tokens in sorted order.
    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    /// Per-row class code; codes index into [`Dataset::classes`].
    pub fn label_codes(&self) -> &[u32] {
        &self.label_codes
    }

    pub fn ids(&self) -> Option<&[String]> {
        self.ids.as_deref()
    }

    /// Content fingerprint binding derived artifacts (pivot tables) to this data.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    /// Materialize a new dataset from a list of row indices.
    pub fn gather(&self, indices: &[usize]) -> Result<Dataset> {
        for &i in indices {
            if i >= self.n() {
                return Err(Error::IndexOutOfRange { index: i, len: self.n() });
            }
        }
        let mut objects = Array2::zeros((indices.len(), self.q()));
        for (r, &i) in indices.iter().enumerate() {
            objects.row_mut(r).assign(&self.objects.row(i));
        }
        let labels = indices.iter().map(|&i| self.labels[i].clone()).collect();
        let ids = self
            .ids
            .as_ref()
            .map(|ids| indices.iter().map(|&i| ids[i].clone()).collect());
        Dataset::from_parts(objects, labels, ids)
    }
}

fn intern_labels(labels: &[String]) -> (Vec<String>, Vec<u32>) {
    let mut classes: Vec<String> = labels.to_vec();
    classes.sort();
    classes.dedup();
    let lookup: HashMap<&str, u32> = classes
        .iter()
        .enumerate()
        .map(|(c, token)| (token.as_str(), c as u32))
        .collect();
    let codes = labels.iter().map(|l| lookup[l.as_str()]).collect();
    (classes, codes)
}

/// FNV-1a over dimensions, labels and a strided sample of the measurements.
fn fingerprint(objects: &Array2<f64>, labels: &[String]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x1000_0000_01b3;
    let mut h = OFFSET;
    let mut mix = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(PRIME);
        }
    };
    let (n, q) = (objects.nrows(), objects.ncols());
    mix(&(n as u64).to_le_bytes());
    mix(&(q as u64).to_le_bytes());
    for label in labels {
        mix(label.as_bytes());
        mix(&[0xff]);
    }
    let flat = objects.as_slice().expect("row-major layout");
    let step = (flat.len() / 65_536).max(1);
    for value in flat.iter().step_by(step) {
        mix(&value.to_bits().to_le_bytes());
    }
    if n > 0 {
        for value in objects.row(0).iter().chain(objects.row(n - 1).iter()) {
            mix(&value.to_bits().to_le_bytes());
        }
    }
    h
}

/// Fractions assigning every object to exactly one of three splits.
///
/// The same seed always reproduces the same assignment byte for byte.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub validation_fraction: f64,
    pub train_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(validation: f64, train: f64, test: f64, seed: u64) -> Result<Self> {
        let spec = Self {
            validation_fraction: validation,
            train_fraction: train,
            test_fraction: test,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.validation_fraction;
        let t = self.train_fraction;
        let e = self.test_fraction;
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::InvalidFractions {
                reason: format!("validation fraction {v} not in (0, 1]"),
            });
        }
        for (name, f) in [("train", t), ("test", e)] {
            if !(0.0..1.0).contains(&f) {
                return Err(Error::InvalidFractions {
                    reason: format!("{name} fraction {f} not in [0, 1)"),
                });
            }
        }
        let sum = v + t + e;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidFractions { reason: format!("fractions sum to {sum}") });
        }
        Ok(())
    }

    fn fractions(&self) -> [f64; 3] {
        [self.validation_fraction, self.train_fraction, self.test_fraction]
    }

    fn nonzero_splits(&self) -> usize {
        self.fractions().iter().filter(|&&f| f > 0.0).count()
    }
}

/// Stratified partition of `0..n` into (validation, train, test) index lists.
///
/// Per-class allocations follow the largest-remainder rule, so every class
/// count lands within one object of its fractional target. Index lists come
/// back sorted ascending.
pub fn split_indices(ds: &Dataset, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    spec.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); ds.classes().len()];
    for (i, &code) in ds.label_codes().iter().enumerate() {
        per_class[code as usize].push(i);
    }
    let needed = spec.nonzero_splits();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let fractions = spec.fractions();
    let mut out: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (class, members) in per_class.iter().enumerate() {
        let m = members.len();
        if m < needed {
            return Err(Error::ClassTooSmall {
                class: ds.classes()[class].clone(),
                size: m,
                needed,
            });
        }
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        let counts = largest_remainder(m, &fractions);
        let mut offset = 0;
        for (s, &count) in counts.iter().enumerate() {
            out[s].extend_from_slice(&shuffled[offset..offset + count]);
            offset += count;
        }
    }
    for list in &mut out {
        list.sort_unstable();
    }
    let [validation, train, test] = out;
    Ok((validation, train, test))
}

/// Apportion `m` items to the given fractions; each count is within one of
/// its exact target. Remainders go to the largest fractional parts, ties to
/// the earlier split.
fn largest_remainder(m: usize, fractions: &[f64; 3]) -> [usize; 3] {
    let targets: Vec<f64> = fractions.iter().map(|f| f * m as f64).collect();
    let mut counts = [0usize; 3];
    let mut assigned = 0;
    for (s, t) in targets.iter().enumerate() {
        counts[s] = t.floor() as usize;
        assigned += counts[s];
    }
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = targets[a] - targets[a].floor();
        let fb = targets[b] - targets[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for s in order.into_iter().cycle() {
        if assigned == m {
            break;
        }
        counts[s] += 1;
        assigned += 1;
    }
    counts
}

/// Stratified split into (validation, train, test) datasets.
///
/// The partition is disjoint and exhaustive; train/test may come back empty
/// when their fraction is zero.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    let (v, t, e) = split_indices(ds, spec)?;
    Ok((ds.gather(&v)?, ds.gather(&t)?, ds.gather(&e)?))
}

/// Deterministic stream of standard normal draws (Box-Muller).
struct NormalSource<'a> {
    rng: &'a mut ChaCha8Rng,
    spare: Option<f64>,
}

impl<'a> NormalSource<'a> {
    fn new(rng: &'a mut ChaCha8Rng) -> Self {
        Self { rng, spare: None }
    }

    fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1: f64 = self.rng.gen::<f64>().max(f64::MIN_POSITIVE);
        let u2: f64 = self.rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// Synthetic Gaussian class blobs with controllable overlap.
///
/// Class centers sit in distinct cells of a lattice over the unit hypercube
/// (with seeded jitter inside each cell), so centers never collide by
/// chance. Points scatter around their center with per-coordinate deviation
/// `spread / sqrt(q)`: `spread` is roughly the expected distance of a point
/// from its center, against inter-center distances of order one. Labels are
/// `c0`, `c1`, ... in generation order.
pub fn generate_blobs(
    classes: usize,
    per_class: usize,
    q: usize,
    spread: f64,
    seed: u64,
) -> Result<Dataset> {
    if classes == 0 || per_class == 0 || q == 0 {
        return Err(Error::InvalidParameter {
            name: "generate_blobs",
            reason: "classes, per_class and q must all be at least 1".into(),
        });
    }
    if !spread.is_finite() || spread < 0.0 {
        return Err(Error::InvalidParameter {
            name: "spread",
            reason: format!("{spread} is not a finite nonnegative value"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = blob_centers(classes, q, &mut rng);
    let sigma = spread / (q as f64).sqrt();
    let n = classes * per_class;
    let mut objects = Array2::zeros((n, q));
    let mut labels = Vec::with_capacity(n);
    let mut normals = NormalSource::new(&mut rng);
    let mut row = 0;
    for c in 0..classes {
        let token = format!("c{c}");
        for _ in 0..per_class {
            for d in 0..q {
                objects[(row, d)] = centers[(c, d)] + sigma * normals.next();
            }
            labels.push(token.clone());
            row += 1;
        }
    }
    Dataset::new(objects, labels, None)
}

/// Distinct lattice cells, one per class, each jittered by up to a quarter
/// cell: adjacent centers stay at least half a cell apart.
fn blob_centers(classes: usize, q: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    // Smallest per-axis resolution with enough cells for every class.
    let mut g: usize = 1;
    loop {
        let mut capacity: u128 = 1;
        for _ in 0..q {
            capacity = capacity.saturating_mul(g as u128);
            if capacity >= classes as u128 {
                break;
            }
        }
        if capacity >= classes as u128 {
            break;
        }
        g += 1;
    }
    let total_cells: Option<usize> = (0..q).try_fold(1usize, |acc, _| {
        acc.checked_mul(g).filter(|&c| c <= 65_536)
    });
    let mut cells: Vec<Vec<usize>> = Vec::with_capacity(classes);
    match total_cells {
        // Small lattice: take the first cells of a seeded permutation.
        Some(total) => {
            let mut ids: Vec<usize> = (0..total).collect();
            ids.shuffle(rng);
            for &id in ids.iter().take(classes) {
                let mut digits = Vec::with_capacity(q);
                let mut rest = id;
                for _ in 0..q {
                    digits.push(rest % g);
                    rest /= g;
                }
                cells.push(digits);
            }
        }
        // Huge lattice: rejection-sample distinct cells.
        None => {
            while cells.len() < classes {
                let cell: Vec<usize> = (0..q).map(|_| rng.gen_range(0..g)).collect();
                if !cells.contains(&cell) {
                    cells.push(cell);
                }
            }
        }
    }
    let cell_size = 1.0 / g as f64;
    let mut centers = Array2::zeros((classes, q));
    for (c, cell) in cells.iter().enumerate() {
        for d in 0..q {
            let jitter = (rng.gen::<f64>() - 0.5) * 0.5 * cell_size;
            centers[(c, d)] = (cell[d] as f64 + 0.5) * cell_size + jitter;
        }
    }
    centers
}

/// Load a dataset from CSV. The first row is a header; `label_column` names
/// the label field and every remaining column is parsed as a real-valued
/// measurement, in header order.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let file = File::open(path.as_ref())?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(BufReader::new(file));
    let headers = reader.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingColumn { column: label_column.to_string() })?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();

    let mut rows: Vec<f64> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let row = row_no + 1;
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::MalformedRow {
                row,
                reason: format!("expected {expected_len} fields, found {len}"),
            },
            _ => Error::Csv(e),
        })?;
        let label = record.get(label_idx).unwrap_or("");
        if label.is_empty() {
            return Err(Error::MalformedRow { row, reason: "missing label".into() });
        }
        labels.push(label.to_string());
        let mut feature = 0;
        for (i, field) in record.iter().enumerate() {
            if i == label_idx {
                continue;
            }
            let value: f64 = field.trim().parse().map_err(|_| Error::NonNumericCell {
                row,
                column: feature_names[feature].clone(),
            })?;
            rows.push(value);
            feature += 1;
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let q = feature_names.len();
    let objects = Array2::from_shape_vec((labels.len(), q), rows)
        .map_err(|e| Error::BadFormat { reason: e.to_string() })?;
    Dataset::new(objects, labels, None)
}

/// Write a dataset as CSV with the label in the named column followed by
/// features `f0..f{q-1}`. Finite values round-trip bit-exactly through
/// [`load_csv`].
pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>, label_column: &str) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    let mut header = vec![label_column.to_string()];
    header.extend((0..ds.q()).map(|j| format!("f{j}")));
    writer.write_record(&header)?;
    let mut record = Vec::with_capacity(ds.q() + 1);
    for i in 0..ds.n() {
        record.clear();
        record.push(ds.label(i).to_string());
        record.extend(ds.row(i).iter().map(|v| v.to_string()));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Write the packed binary form: magic, u64 n, u64 q, n*q little-endian f32,
/// then n length-prefixed UTF-8 labels. Measurements are narrowed to f32.
pub fn save_binary(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    write_matrix_and_labels(&mut w, ds.objects(), Some(ds.labels()))
}

fn write_matrix_and_labels(
    w: &mut impl Write,
    matrix: &Array2<f64>,
    labels: Option<&[String]>,
) -> Result<()> {
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&(matrix.nrows() as u64).to_le_bytes())?;
    w.write_all(&(matrix.ncols() as u64).to_le_bytes())?;
    for value in matrix.iter() {
        w.write_all(&(*value as f32).to_le_bytes())?;
    }
    for i in 0..matrix.nrows() {
        let bytes = labels.map(|l| l[i].as_bytes()).unwrap_or(b"");
        w.write_all(&(bytes.len() as u32).to_le_bytes())?;
        w.write_all(bytes)?;
    }
    w.flush()?;
    Ok(())
}

fn read_matrix_and_labels(r: &mut impl Read) -> Result<(Array2<f64>, Vec<String>)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::BadFormat { reason: "bad magic; not a packed dataset file".into() });
    }
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf)?;
    let n = u64::from_le_bytes(u64buf) as usize;
    r.read_exact(&mut u64buf)?;
    let q = u64::from_le_bytes(u64buf) as usize;
    let mut values = Vec::with_capacity(n * q);
    let mut f32buf = [0u8; 4];
    for _ in 0..n * q {
        r.read_exact(&mut f32buf)?;
        values.push(f32::from_le_bytes(f32buf) as f64);
    }
    let mut labels = Vec::with_capacity(n);
    let mut u32buf = [0u8; 4];
    for _ in 0..n {
        r.read_exact(&mut u32buf)?;
        let len = u32::from_le_bytes(u32buf) as usize;
        let mut bytes = vec![0u8; len];
        r.read_exact(&mut bytes)?;
        labels.push(String::from_utf8(bytes).map_err(|e| Error::BadFormat {
            reason: format!("label is not UTF-8: {e}"),
        })?);
    }
    let matrix = Array2::from_shape_vec((n, q), values)
        .map_err(|e| Error::BadFormat { reason: e.to_string() })?;
    Ok((matrix, labels))
}

/// Read a dataset written by [`save_binary`].
pub fn load_binary(path: impl AsRef<Path>) -> Result<Dataset> {
    let file = File::open(path.as_ref())?;
    let (objects, labels) = read_matrix_and_labels(&mut BufReader::new(file))?;
    Dataset::new(objects, labels, None)
}

/// Write a square matrix in the packed binary layout with empty labels.
pub fn save_matrix_binary(matrix: &Array2<f64>, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    write_matrix_and_labels(&mut BufWriter::new(file), matrix, None)
}

/// Reinterpret a packed binary file as an n-by-n matrix, ignoring labels.
pub fn load_matrix_binary(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let file = File::open(path.as_ref())?;
    let (matrix, _) = read_matrix_and_labels(&mut BufReader::new(file))?;
    if matrix.nrows() != matrix.ncols() {
        return Err(Error::BadFormat {
            reason: format!("matrix is {}x{}, expected square", matrix.nrows(), matrix.ncols()),
        });
    }
    Ok(matrix)
}
