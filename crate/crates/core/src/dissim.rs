//! The dissimilarity measure and its evaluation strategies.
//!
//! A [`DissimilarityProvider`] serves `d(i, j)` over one dataset's index
//! space, either computed from raw measurements on demand, memoized in a
//! bounded cache, or looked up in a precomputed matrix. Every genuine
//! measure evaluation increments a counter; cache hits, table lookups and
//! the `i == j` short-circuit do not. That counter is the instrument the
//! complexity tests read.
//!
//! No triangle inequality is assumed anywhere: measures only need symmetry,
//! nonnegativity and a zero self-dissimilarity.

use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use lru::LruCache;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Default memory budget for precomputed matrices (2 GiB).
pub const DEFAULT_MATRIX_BUDGET: usize = 2 << 30;

/// Dissimilarity measures over raw measurement rows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Measure {
    Euclidean,
    Manhattan,
    Minkowski { p: f64 },
}

impl Measure {
    /// Minkowski measure with exponent `p >= 1`.
    pub fn minkowski(p: f64) -> Result<Self> {
        if !p.is_finite() || p < 1.0 {
            return Err(Error::InvalidParameter {
                name: "p",
                reason: format!("Minkowski exponent must be finite and >= 1, got {p}"),
            });
        }
        Ok(Measure::Minkowski { p })
    }

    /// Parse `euclidean`, `manhattan` or `minkowski:<p>`.
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "euclidean" | "l2" => Ok(Measure::Euclidean),
            "manhattan" | "l1" => Ok(Measure::Manhattan),
            other => {
                if let Some(p) = other.strip_prefix("minkowski:") {
                    let p: f64 = p.parse().map_err(|_| Error::InvalidParameter {
                        name: "measure",
                        reason: format!("cannot parse Minkowski exponent from {other:?}"),
                    })?;
                    Measure::minkowski(p)
                } else {
                    Err(Error::InvalidParameter {
                        name: "measure",
                        reason: format!(
                            "unknown measure {s:?}; expected euclidean, manhattan or minkowski:<p>"
                        ),
                    })
                }
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            Measure::Euclidean => "euclidean".into(),
            Measure::Manhattan => "manhattan".into(),
            Measure::Minkowski { p } => format!("minkowski:{p}"),
        }
    }

    /// Evaluate the measure on two measurement rows of equal length.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        match *self {
            Measure::Euclidean => {
                let mut sum = 0.0;
                for (a, b) in x.iter().zip(y) {
                    let d = a - b;
                    sum += d * d;
                }
                sum.sqrt()
            }
            Measure::Manhattan => x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum(),
            Measure::Minkowski { p } => {
                let sum: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs().powf(p)).sum();
                sum.powf(1.0 / p)
            }
        }
    }
}

#[derive(Debug)]
enum Source {
    OnDemand {
        data: Arc<Dataset>,
        measure: Measure,
    },
    Cached {
        data: Arc<Dataset>,
        measure: Measure,
        memo: Mutex<LruCache<(u32, u32), f64>>,
    },
    Precomputed {
        matrix: Array2<f64>,
    },
}

/// Serves pairwise dissimilarities over one dataset's index space.
///
/// All methods take `&self`; providers are safe to share across threads.
#[derive(Debug)]
pub struct DissimilarityProvider {
    source: Source,
    evals: AtomicU64,
    revision: u64,
    n: usize,
}

impl DissimilarityProvider {
    /// Evaluate the measure from raw measurements on every call.
    pub fn on_demand(data: Arc<Dataset>, measure: Measure) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let revision = data.revision();
        let n = data.n();
        Ok(Self { source: Source::OnDemand { data, measure }, evals: AtomicU64::new(0), revision, n })
    }

    /// On-demand evaluation behind a bounded per-pair memo with LRU eviction.
    ///
    /// `capacity` is the number of retained pairs. The memo is keyed on the
    /// unordered pair, so `d(i,j)` and `d(j,i)` share one entry.
    pub fn cached(data: Arc<Dataset>, measure: Measure, capacity: usize) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let capacity = NonZeroUsize::new(capacity).ok_or(Error::InvalidParameter {
            name: "capacity",
            reason: "cache capacity must be at least 1".into(),
        })?;
        let revision = data.revision();
        let n = data.n();
        Ok(Self {
            source: Source::Cached { data, measure, memo: Mutex::new(LruCache::new(capacity)) },
            evals: AtomicU64::new(0),
            revision,
            n,
        })
    }

    /// Wrap an externally supplied full matrix. The matrix must be square,
    /// symmetric within 1e-9 and have a zero diagonal (within 1e-9).
    pub fn precomputed(matrix: Array2<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if matrix.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: matrix.ncols() });
        }
        for i in 0..n {
            let diag = matrix[(i, i)];
            if diag.abs() > 1e-9 {
                return Err(Error::NonZeroDiagonal { i, value: diag });
            }
            for j in (i + 1)..n {
                let delta = (matrix[(i, j)] - matrix[(j, i)]).abs();
                if delta > 1e-9 {
                    return Err(Error::AsymmetricMatrix { i, j, delta });
                }
            }
        }
        let revision = matrix_fingerprint(&matrix);
        Ok(Self { source: Source::Precomputed { matrix }, evals: AtomicU64::new(0), revision, n })
    }

    /// Load a packed binary matrix file as a precomputed provider, with the
    /// same shape, symmetry and diagonal validation as
    /// [`DissimilarityProvider::precomputed`].
    pub fn precomputed_from_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::precomputed(crate::dataset::load_matrix_binary(path)?)
    }

    /// Evaluate the full matrix up front with the default memory budget.
    ///
    /// Values are identical to the on-demand provider; the revision is the
    /// dataset's, so accelerators trained against either interoperate.
    pub fn precompute(data: &Arc<Dataset>, measure: Measure) -> Result<Self> {
        Self::precompute_with_budget(data, measure, DEFAULT_MATRIX_BUDGET)
    }

    /// Like [`DissimilarityProvider::precompute`] with an explicit budget in
    /// bytes. Refuses rather than thrash when `n * n * 8` exceeds it.
    pub fn precompute_with_budget(
        data: &Arc<Dataset>,
        measure: Measure,
        budget: usize,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = data.n();
        let required = n
            .checked_mul(n)
            .and_then(|c| c.checked_mul(std::mem::size_of::<f64>()))
            .ok_or(Error::MemoryBudget { required: usize::MAX, budget })?;
        if required > budget {
            return Err(Error::MemoryBudget { required, budget });
        }
        let mut matrix = Array2::zeros((n, n));
        let mut evals = 0u64;
        for i in 0..n {
            for j in (i + 1)..n {
                let d = measure.eval(data.row(i), data.row(j));
                matrix[(i, j)] = d;
                matrix[(j, i)] = d;
                evals += 1;
            }
        }
        Ok(Self {
            source: Source::Precomputed { matrix },
            evals: AtomicU64::new(evals),
            revision: data.revision(),
            n,
        })
    }

    /// Number of objects served.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Count of genuine measure evaluations so far.
    pub fn eval_count(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    /// Fingerprint of the underlying data, for accelerator staleness checks.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    /// The measure, when the provider computes one (not for precomputed matrices).
    pub fn measure(&self) -> Option<Measure> {
        match &self.source {
            Source::OnDemand { measure, .. } | Source::Cached { measure, .. } => Some(*measure),
            Source::Precomputed { .. } => None,
        }
    }

    /// The wrapped dataset, when the provider owns one.
    pub fn dataset(&self) -> Option<&Arc<Dataset>> {
        match &self.source {
            Source::OnDemand { data, .. } | Source::Cached { data, .. } => Some(data),
            Source::Precomputed { .. } => None,
        }
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange { index: i, len: self.n });
        }
        Ok(())
    }

    /// Dissimilarity between objects `i` and `j`.
    ///
    /// `dist(i, i)` returns 0 without evaluating the measure; the measure
    /// axioms guarantee it and the shortcut keeps the counter semantics sharp.
    pub fn dist(&self, i: usize, j: usize) -> Result<f64> {
        self.check_index(i)?;
        self.check_index(j)?;
        if i == j {
            return Ok(0.0);
        }
        match &self.source {
            Source::OnDemand { data, measure } => {
                self.evals.fetch_add(1, Ordering::Relaxed);
                Ok(measure.eval(data.row(i), data.row(j)))
            }
            Source::Cached { data, measure, memo } => {
                let key = (i.min(j) as u32, i.max(j) as u32);
                if let Some(v) = memo.lock().unwrap().get(&key) {
                    return Ok(*v);
                }
                self.evals.fetch_add(1, Ordering::Relaxed);
                let v = measure.eval(data.row(i), data.row(j));
                memo.lock().unwrap().put(key, v);
                Ok(v)
            }
            Source::Precomputed { matrix } => Ok(matrix[(i, j)]),
        }
    }

    /// Rectangular block of dissimilarities; entry `(a, b)` equals
    /// `dist(rows[a], cols[b])` exactly.
    pub fn dist_block(&self, rows: &[usize], cols: &[usize]) -> Result<Array2<f64>> {
        for &i in rows.iter().chain(cols) {
            self.check_index(i)?;
        }
        let mut out = Array2::zeros((rows.len(), cols.len()));
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                out[(a, b)] = self.dist(i, j)?;
            }
        }
        Ok(out)
    }
}

fn matrix_fingerprint(matrix: &Array2<f64>) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x1000_0000_01b3;
    let mut h = OFFSET;
    let mut mix = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(PRIME);
        }
    };
    mix(&(matrix.nrows() as u64).to_le_bytes());
    let flat = matrix.as_slice().expect("row-major layout");
    let step = (flat.len() / 65_536).max(1);
    for value in flat.iter().step_by(step) {
        mix(&value.to_bits().to_le_bytes());
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::generate_blobs;
    use crate::Dataset;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset_from(rows: Vec<Vec<f64>>) -> Arc<Dataset> {
        let n = rows.len();
        let q = rows[0].len();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let objects = Array2::from_shape_vec((n, q), flat).unwrap();
        let labels = (0..n).map(|i| format!("c{}", i % 2)).collect();
        Arc::new(Dataset::new(objects, labels, None).unwrap())
    }

    #[test]
    fn euclidean_three_four_five() {
        let ds = dataset_from(vec![vec![0.0, 0.0], vec![3.0, 4.0]]);
        let p = DissimilarityProvider::on_demand(ds, Measure::Euclidean).unwrap();
        assert_eq!(p.dist(0, 1).unwrap(), 5.0);
        assert_eq!(p.dist(1, 0).unwrap(), 5.0);
    }

    #[test]
    fn self_dissimilarity_is_zero_and_uncounted() {
        let ds = dataset_from(vec![vec![1.0], vec![2.0], vec![5.0]]);
        let p = DissimilarityProvider::on_demand(ds, Measure::Euclidean).unwrap();
        for i in 0..3 {
            assert_eq!(p.dist(i, i).unwrap(), 0.0);
        }
        assert_eq!(p.eval_count(), 0);
    }

    /// Hand-computed |1-4| + |2-0| = 5.
    #[test]
    fn minkowski_p1_matches_absolute_sum() {
        let ds = dataset_from(vec![vec![1.0, 2.0], vec![4.0, 0.0]]);
        let p =
            DissimilarityProvider::on_demand(ds, Measure::minkowski(1.0).unwrap()).unwrap();
        assert!((p.dist(0, 1).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn block_matches_entrywise_calls() {
        let ds = Arc::new(generate_blobs(3, 20, 4, 0.8, 5).unwrap());
        let p = DissimilarityProvider::on_demand(ds.clone(), Measure::Euclidean).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<usize> = (0..20).map(|_| rng.gen_range(0..ds.n())).collect();
        let cols: Vec<usize> = (0..7).map(|_| rng.gen_range(0..ds.n())).collect();
        let block = p.dist_block(&rows, &cols).unwrap();
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                assert_eq!(block[(a, b)], p.dist(i, j).unwrap());
            }
        }
    }

    #[test]
    fn single_index_block_is_zero() {
        let ds = dataset_from(vec![vec![1.0], vec![2.0]]);
        let p = DissimilarityProvider::on_demand(ds, Measure::Euclidean).unwrap();
        let block = p.dist_block(&[1], &[1]).unwrap();
        assert_eq!(block.dim(), (1, 1));
        assert_eq!(block[(0, 0)], 0.0);
    }

    #[test]
    fn block_on_repeated_indices_is_symmetric_with_zero_diagonal() {
        let ds = dataset_from(vec![vec![0.0, 1.0], vec![2.0, 2.0], vec![-1.0, 4.0]]);
        let p = DissimilarityProvider::on_demand(ds, Measure::Manhattan).unwrap();
        let idx = [2, 0, 1];
        let block = p.dist_block(&idx, &idx).unwrap();
        for a in 0..3 {
            assert_eq!(block[(a, a)], 0.0);
            for b in 0..3 {
                assert_eq!(block[(a, b)], block[(b, a)]);
            }
        }
    }

    #[test]
    fn counter_counts_off_diagonal_block_entries() {
        let ds = Arc::new(generate_blobs(2, 10, 3, 0.5, 8).unwrap());
        let p = DissimilarityProvider::on_demand(ds, Measure::Euclidean).unwrap();
        let rows = [0, 1, 2, 3];
        let cols = [2, 3, 9];
        p.dist_block(&rows, &cols).unwrap();
        // 12 entries, two of them diagonal hits (2,2) and (3,3).
        assert_eq!(p.eval_count(), 10);
    }

    #[test]
    fn cache_avoids_recomputation_and_evicts_lru() {
        let ds = dataset_from(vec![vec![0.0], vec![1.0], vec![3.0], vec![7.0]]);
        let p = DissimilarityProvider::cached(ds, Measure::Euclidean, 2).unwrap();
        p.dist(0, 1).unwrap();
        p.dist(1, 0).unwrap(); // same unordered pair: hit
        assert_eq!(p.eval_count(), 1);
        p.dist(0, 2).unwrap();
        p.dist(0, 3).unwrap(); // evicts (0,1)
        assert_eq!(p.eval_count(), 3);
        p.dist(0, 1).unwrap(); // recomputed after eviction
        assert_eq!(p.eval_count(), 4);
    }

    #[test]
    fn precomputed_matches_on_demand_exactly() {
        let ds = Arc::new(generate_blobs(2, 25, 3, 0.4, 4).unwrap());
        let on_demand =
            DissimilarityProvider::on_demand(ds.clone(), Measure::Euclidean).unwrap();
        let table = DissimilarityProvider::precompute(&ds, Measure::Euclidean).unwrap();
        assert_eq!(table.eval_count() as usize, ds.n() * (ds.n() - 1) / 2);
        let before = table.eval_count();
        for i in (0..ds.n()).step_by(7) {
            for j in (0..ds.n()).step_by(5) {
                let a = on_demand.dist(i, j).unwrap();
                let b = table.dist(i, j).unwrap();
                assert!((a - b).abs() <= 1e-12, "({i},{j}): {a} vs {b}");
            }
        }
        assert_eq!(table.eval_count(), before, "lookups must not count as evaluations");
        assert_eq!(table.revision(), on_demand.revision());
    }

    #[test]
    fn precompute_refuses_oversized_matrices() {
        let ds = Arc::new(generate_blobs(2, 50, 2, 0.4, 4).unwrap());
        let err =
            DissimilarityProvider::precompute_with_budget(&ds, Measure::Euclidean, 1024)
                .unwrap_err();
        assert!(matches!(err, Error::MemoryBudget { .. }));
    }

    #[test]
    fn precomputed_validates_shape_symmetry_and_diagonal() {
        let bad_shape = Array2::zeros((2, 3));
        assert!(DissimilarityProvider::precomputed(bad_shape).is_err());

        let mut asym = Array2::zeros((2, 2));
        asym[(0, 1)] = 1.0;
        asym[(1, 0)] = 2.0;
        assert!(matches!(
            DissimilarityProvider::precomputed(asym).unwrap_err(),
            Error::AsymmetricMatrix { .. }
        ));

        let mut diag = Array2::zeros((2, 2));
        diag[(0, 0)] = 0.5;
        assert!(matches!(
            DissimilarityProvider::precomputed(diag).unwrap_err(),
            Error::NonZeroDiagonal { .. }
        ));
    }

    #[test]
    fn matrix_file_round_trips_into_a_provider() {
        let ds = Arc::new(generate_blobs(2, 12, 3, 0.5, 6).unwrap());
        let table = DissimilarityProvider::precompute(&ds, Measure::Manhattan).unwrap();
        let matrix = ds.n();
        let mut full = Array2::zeros((matrix, matrix));
        for i in 0..matrix {
            for j in 0..matrix {
                full[(i, j)] = table.dist(i, j).unwrap();
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dist.bin");
        crate::dataset::save_matrix_binary(&full, &path).unwrap();
        let loaded = DissimilarityProvider::precomputed_from_file(&path).unwrap();
        assert_eq!(loaded.len(), matrix);
        // f32 narrowing on disk, so compare at that precision.
        for i in (0..matrix).step_by(3) {
            for j in (0..matrix).step_by(2) {
                let expected = table.dist(i, j).unwrap() as f32 as f64;
                assert_eq!(loaded.dist(i, j).unwrap(), expected);
            }
        }
    }

    #[test]
    fn out_of_range_is_reported() {
        let ds = dataset_from(vec![vec![0.0], vec![1.0]]);
        let p = DissimilarityProvider::on_demand(ds, Measure::Euclidean).unwrap();
        assert!(matches!(p.dist(0, 2).unwrap_err(), Error::IndexOutOfRange { index: 2, len: 2 }));
    }

    #[test]
    fn measure_parsing() {
        assert_eq!(Measure::parse("euclidean").unwrap(), Measure::Euclidean);
        assert_eq!(Measure::parse("manhattan").unwrap(), Measure::Manhattan);
        assert_eq!(
            Measure::parse("minkowski:3").unwrap(),
            Measure::Minkowski { p: 3.0 }
        );
        assert!(Measure::parse("minkowski:0.5").is_err());
        assert!(Measure::parse("cosine").is_err());
    }
}
