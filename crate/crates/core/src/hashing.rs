//! Pivot-based intermediate dissimilarity representation for fast
//! approximate nearest-prototype search.
//!
//! A pivot table holds p pivot objects with trained radii and, once encoded,
//! the full n-by-p matrix of object-to-pivot dissimilarities. Each radius is
//! the median of its pivot's dissimilarities over the training sample, so
//! roughly half the sample falls inside every sphere. The radii are kept for
//! compatibility with thresholded binary codes but never used here: searches
//! run directly on the dissimilarity codes, which retain more information.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dissim::DissimilarityProvider;
use crate::error::{Error, Result};

/// Cap on the training sample size; training must stay cheap relative to
/// the selection it accelerates.
pub const DEFAULT_TRAIN_SAMPLE_CAP: usize = 10_000;

/// Pivot objects, trained radii, and object-to-pivot dissimilarity codes.
#[derive(Clone, Debug)]
pub struct PivotTable {
    pivot_indices: Vec<usize>,
    radii: Vec<f64>,
    codes: Array2<f64>,
    dataset_revision: u64,
}

/// On-disk form: codes are recomputable and not persisted.
#[derive(Serialize, Deserialize)]
struct PivotTableFile {
    pivot_indices: Vec<usize>,
    radii: Vec<f64>,
    dataset_revision: u64,
}

impl PivotTable {
    /// Number of pivots.
    pub fn p(&self) -> usize {
        self.pivot_indices.len()
    }

    pub fn pivot_indices(&self) -> &[usize] {
        &self.pivot_indices
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Object-to-pivot dissimilarities; empty (0 rows) until
    /// [`PivotTable::encode_all`] runs.
    pub fn codes(&self) -> &Array2<f64> {
        &self.codes
    }

    /// Fingerprint of the dataset the table was trained on.
    pub fn dataset_revision(&self) -> u64 {
        self.dataset_revision
    }

    /// Compute and store codes for every object the provider serves.
    pub fn encode_all(&mut self, provider: &DissimilarityProvider) -> Result<()> {
        let objects: Vec<usize> = (0..provider.len()).collect();
        self.codes = encode(provider, self, &objects)?;
        Ok(())
    }

    /// Persist pivots, radii and the revision id as JSON.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = File::create(path.as_ref())?;
        serde_json::to_writer_pretty(
            BufWriter::new(file),
            &PivotTableFile {
                pivot_indices: self.pivot_indices.clone(),
                radii: self.radii.clone(),
                dataset_revision: self.dataset_revision,
            },
        )?;
        Ok(())
    }

    /// Load a table saved by [`PivotTable::save`]; codes must be re-encoded.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(path.as_ref())?;
        let meta: PivotTableFile = serde_json::from_reader(BufReader::new(file))?;
        if meta.pivot_indices.len() != meta.radii.len() {
            return Err(Error::BadFormat {
                reason: "pivot count and radius count differ".into(),
            });
        }
        let p = meta.pivot_indices.len();
        Ok(Self {
            pivot_indices: meta.pivot_indices,
            radii: meta.radii,
            codes: Array2::zeros((0, p)),
            dataset_revision: meta.dataset_revision,
        })
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

/// Train pivots with balanced radii over a sample of the dataset.
///
/// p distinct pivots are drawn uniformly from the sample and each radius is
/// set to the median of the sample's dissimilarities to its pivot. Up to
/// `max_rounds` swap rounds then replace the pivot pair with the highest
/// sphere-membership overlap by fresh random candidates whenever that
/// overlap exceeds 1.5 times the ideal |sample|/4.
///
/// The returned table has no object codes yet; call
/// [`PivotTable::encode_all`] before using it as a fitness accelerator.
pub fn train_pivots(
    provider: &DissimilarityProvider,
    sample: &[usize],
    p: usize,
    seed: u64,
    max_rounds: usize,
) -> Result<PivotTable> {
    use rand::SeedableRng;
    if p == 0 {
        return Err(Error::InvalidParameter { name: "p", reason: "must be at least 1".into() });
    }
    if sample.len() < p {
        return Err(Error::PoolTooSmall { pool: sample.len(), k: p });
    }
    for &i in sample {
        if i >= provider.len() {
            return Err(Error::IndexOutOfRange { index: i, len: provider.len() });
        }
    }
    let m = sample.len();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut pivot_positions: Vec<usize> =
        rand::seq::index::sample(&mut rng, m, p).into_vec();

    // Column j: distances from the whole sample to pivot j.
    let pivot_column = |pos: usize| -> Vec<f64> {
        let pivot = sample[pos];
        sample
            .par_iter()
            .map(|&s| provider.dist(s, pivot).expect("validated"))
            .collect()
    };
    let mut columns: Vec<Vec<f64>> = pivot_positions.iter().map(|&pos| pivot_column(pos)).collect();
    let mut radii: Vec<f64> = columns.iter().map(|col| median(&mut col.clone())).collect();

    let ideal_overlap = m as f64 / 4.0;
    for _ in 0..max_rounds {
        if p < 2 || m == p {
            break;
        }
        let inside: Vec<Vec<bool>> = columns
            .iter()
            .zip(&radii)
            .map(|(col, &r)| col.iter().map(|&d| d <= r).collect())
            .collect();
        let mut worst = (0usize, 1usize);
        let mut worst_overlap = 0usize;
        for a in 0..p {
            for b in (a + 1)..p {
                let overlap = inside[a]
                    .iter()
                    .zip(&inside[b])
                    .filter(|(&x, &y)| x && y)
                    .count();
                if overlap > worst_overlap {
                    worst_overlap = overlap;
                    worst = (a, b);
                }
            }
        }
        if (worst_overlap as f64) <= 1.5 * ideal_overlap {
            break;
        }
        use rand::Rng;
        for slot in [worst.0, worst.1] {
            let replacement = loop {
                let pos = rng.gen_range(0..m);
                if !pivot_positions.contains(&pos) {
                    break pos;
                }
            };
            pivot_positions[slot] = replacement;
            columns[slot] = pivot_column(replacement);
            radii[slot] = median(&mut columns[slot].clone());
        }
    }

    if radii.iter().all(|&r| r == 0.0) {
        return Err(Error::DegenerateSample);
    }
    Ok(PivotTable {
        pivot_indices: pivot_positions.iter().map(|&pos| sample[pos]).collect(),
        radii,
        codes: Array2::zeros((0, p)),
        dataset_revision: provider.revision(),
    })
}

/// Object-to-pivot dissimilarity codes: entry (a, j) is the dissimilarity of
/// `objects[a]` to pivot j. This is exactly the dissimilarity-space mapping
/// with the pivots as prototypes.
pub fn encode(
    provider: &DissimilarityProvider,
    table: &PivotTable,
    objects: &[usize],
) -> Result<Array2<f64>> {
    if table.dataset_revision != provider.revision() {
        return Err(Error::AcceleratorStale {
            expected: table.dataset_revision,
            actual: provider.revision(),
        });
    }
    for &i in objects {
        if i >= provider.len() {
            return Err(Error::IndexOutOfRange { index: i, len: provider.len() });
        }
    }
    let p = table.p();
    let rows: Vec<Vec<f64>> = objects
        .par_iter()
        .map(|&i| {
            table
                .pivot_indices
                .iter()
                .map(|&pivot| provider.dist(i, pivot).expect("validated"))
                .collect()
        })
        .collect();
    let mut out = Array2::zeros((objects.len(), p));
    for (a, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            out[(a, j)] = v;
        }
    }
    Ok(out)
}

/// For each code row in `codes_v`, the index of the `codes_r` row minimizing
/// Euclidean distance in pivot space; ties break to the lowest index.
pub fn approx_nearest_prototype(
    codes_v: &Array2<f64>,
    codes_r: &Array2<f64>,
) -> Result<Vec<usize>> {
    if codes_r.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if codes_v.ncols() != codes_r.ncols() {
        return Err(Error::DimensionMismatch {
            expected: codes_r.ncols(),
            actual: codes_v.ncols(),
        });
    }
    let r_rows: Vec<&[f64]> = (0..codes_r.nrows())
        .map(|j| codes_r.row(j).to_slice().expect("row-major layout"))
        .collect();
    let result = (0..codes_v.nrows())
        .into_par_iter()
        .map(|i| {
            let row = codes_v.row(i);
            let row = row.to_slice().expect("row-major layout");
            let mut best = f64::INFINITY;
            let mut arg = 0;
            for (j, r) in r_rows.iter().enumerate() {
                let mut d = 0.0;
                for (a, b) in row.iter().zip(*r) {
                    let diff = a - b;
                    d += diff * diff;
                }
                if d < best {
                    best = d;
                    arg = j;
                }
            }
            arg
        })
        .collect();
    Ok(result)
}
