//! Prototype selection for dissimilarity-space classification.
//!
//! Classifiers in a dissimilarity space work on vectors of dissimilarities
//! to a small representation set of prototypes rather than on raw features.
//! This crate selects those prototypes out of large candidate pools and
//! measures how good the selection is:
//!
//! * [`dataset`] — labeled measurement tables, stratified splits, synthetic
//!   blob generation, CSV and packed binary interchange.
//! * [`dissim`] — the dissimilarity measure and its evaluation strategies
//!   (on demand, memoized, precomputed), with an evaluation counter used by
//!   the complexity tests.
//! * [`dspace`] — embedding into the dissimilarity space and classification
//!   there (1-NN and a regularized linear discriminant).
//! * [`fitness`] — the two selection criteria driving the genetic search:
//!   minimum-spanning-tree weight (unsupervised) and matching-label counts
//!   (supervised), plus a pivot-accelerated supervised variant.
//! * [`ga`] — the genetic algorithm: index-vector individuals, optional
//!   nearest-prototype clustering of the candidates, uniform reproduction
//!   with the best individual, constrained mutation, elitism.
//! * [`baselines`] — comparison selectors: random, farthest-first traversal,
//!   k-centres, and greedy forward selection.
//! * [`hashing`] — pivot tables with trained radii providing a compact
//!   intermediate representation for fast approximate nearest-prototype
//!   search.
//! * [`harness`] — the experiment runner: sweeps selectors over prototype
//!   counts and repetitions, embeds, classifies, and emits CSV tables.

pub mod baselines;
pub mod dataset;
pub mod dissim;
pub mod dspace;
pub mod error;
pub mod fitness;
pub mod ga;
pub mod harness;
pub mod hashing;

pub use baselines::{select_fft, select_forward, select_kcentres, select_random};
pub use dataset::{
    generate_blobs, load_binary, load_csv, load_matrix_binary, save_binary, save_csv,
    save_matrix_binary, split, split_indices, Dataset, SplitSpec,
};
pub use dissim::{DissimilarityProvider, Measure};
pub use dspace::{
    classify_1nn, classify_ldc, embed, error_rate, save_embedding_csv, Embedding, PrototypeSet,
};
pub use error::{Error, Result};
pub use fitness::{
    fitness_mst, fitness_supervised, fitness_supervised_lsh, FitnessContext, FitnessKind,
};
pub use ga::{
    cluster_candidates, init_population, mutate, reproduce, run_ga, run_ga_observed,
    ClusterAssignment, GaObservation, GaParams, Individual,
};
pub use harness::{
    run_experiment, run_selector, summarize, write_records_csv, write_summary_csv, Classifier,
    DataSource, ExperimentConfig, RunRecord, SelectorParams, SelectorSpec, SummaryRow,
};
pub use hashing::{approx_nearest_prototype, encode, train_pivots, PivotTable};
