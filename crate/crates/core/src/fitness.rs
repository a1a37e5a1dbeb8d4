//! Selection criteria evaluated by the genetic search.
//!
//! Both criteria are maximized. The unsupervised one is the total edge
//! weight of the minimum spanning tree over the complete graph of the k
//! prototypes, so its cost never depends on the validation set size. The
//! supervised one assigns every validation object to its nearest prototype
//! and counts matching class labels; an optional pivot-table accelerator
//! replaces the raw measure with Euclidean distance over pivot coordinates.

use std::collections::HashMap;
use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;

use crate::dissim::DissimilarityProvider;
use crate::error::{Error, Result};
use crate::ga::Individual;
use crate::hashing::PivotTable;

/// Immutable context shared by all fitness evaluations of a selection run:
/// the provider, the validation set V, labels, and an optional accelerator.
#[derive(Clone)]
pub struct FitnessContext {
    provider: Arc<DissimilarityProvider>,
    validation: Arc<Vec<usize>>,
    label_codes: Arc<Vec<u32>>,
    classes: Arc<Vec<String>>,
    accelerator: Option<Arc<PivotTable>>,
}

impl FitnessContext {
    /// `labels` must cover every object the provider serves; `validation`
    /// lists the objects over which the supervised criterion counts matches.
    pub fn new(
        provider: Arc<DissimilarityProvider>,
        validation: Vec<usize>,
        labels: &[String],
    ) -> Result<Self> {
        if labels.len() != provider.len() {
            return Err(Error::LengthMismatch {
                what: "labels",
                expected: provider.len(),
                actual: labels.len(),
            });
        }
        for &i in &validation {
            if i >= provider.len() {
                return Err(Error::IndexOutOfRange { index: i, len: provider.len() });
            }
        }
        let mut classes: Vec<String> = labels.to_vec();
        classes.sort();
        classes.dedup();
        let lookup: HashMap<&str, u32> = classes
            .iter()
            .enumerate()
            .map(|(c, token)| (token.as_str(), c as u32))
            .collect();
        let label_codes = labels.iter().map(|l| lookup[l.as_str()]).collect();
        Ok(Self {
            provider,
            validation: Arc::new(validation),
            label_codes: Arc::new(label_codes),
            classes: Arc::new(classes),
            accelerator: None,
        })
    }

    /// Attach a trained pivot table for the accelerated supervised criterion.
    ///
    /// The table must be encoded over the provider's dataset revision and
    /// cover every object.
    pub fn with_accelerator(mut self, table: Arc<PivotTable>) -> Result<Self> {
        if table.dataset_revision() != self.provider.revision() {
            return Err(Error::AcceleratorStale {
                expected: table.dataset_revision(),
                actual: self.provider.revision(),
            });
        }
        if table.codes().nrows() != self.provider.len() {
            return Err(Error::AcceleratorNotEncoded);
        }
        self.accelerator = Some(table);
        Ok(self)
    }

    pub fn provider(&self) -> &Arc<DissimilarityProvider> {
        &self.provider
    }

    pub fn validation(&self) -> &[usize] {
        &self.validation
    }

    /// Class code of an object; codes index into [`FitnessContext::classes`].
    pub fn label_code(&self, object: usize) -> u32 {
        self.label_codes[object]
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn accelerator(&self) -> Option<&Arc<PivotTable>> {
        self.accelerator.as_ref()
    }

    fn check_genes(&self, individual: &Individual) -> Result<()> {
        let genes = &individual.genes;
        for &g in genes {
            if g >= self.provider.len() {
                return Err(Error::IndexOutOfRange { index: g, len: self.provider.len() });
            }
        }
        let mut sorted = genes.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::DuplicateGenes);
        }
        Ok(())
    }
}

/// Total edge weight of the minimum spanning tree over the complete graph
/// whose nodes are the individual's prototypes, by Prim's algorithm.
///
/// Only the k(k-1)/2 unordered prototype pairs are evaluated; the validation
/// set is never touched, which is what makes this criterion independent of
/// the dataset size.
pub fn fitness_mst(individual: &Individual, ctx: &FitnessContext) -> Result<f64> {
    let k = individual.genes.len();
    if k < 2 {
        return Err(Error::TooFewGenes { got: k, need: 2 });
    }
    ctx.check_genes(individual)?;
    let mut weights = Array2::zeros((k, k));
    for a in 0..k {
        for b in (a + 1)..k {
            let d = ctx.provider.dist(individual.genes[a], individual.genes[b])?;
            weights[(a, b)] = d;
            weights[(b, a)] = d;
        }
    }
    Ok(prim_total_weight(&weights))
}

/// Dense Prim over a complete weighted graph, returning the tree weight.
fn prim_total_weight(weights: &Array2<f64>) -> f64 {
    let k = weights.nrows();
    let mut in_tree = vec![false; k];
    in_tree[0] = true;
    let mut best: Vec<f64> = (0..k).map(|j| weights[(0, j)]).collect();
    let mut total = 0.0;
    for _ in 1..k {
        let mut next = usize::MAX;
        let mut next_weight = f64::INFINITY;
        for j in 0..k {
            if !in_tree[j] && best[j] < next_weight {
                next_weight = best[j];
                next = j;
            }
        }
        in_tree[next] = true;
        total += next_weight;
        for j in 0..k {
            if !in_tree[j] && weights[(next, j)] < best[j] {
                best[j] = weights[(next, j)];
            }
        }
    }
    total
}

/// Count of validation objects whose nearest prototype (by the raw measure)
/// carries the same class label. Nearest-prototype ties break to the lowest
/// gene position.
pub fn fitness_supervised(individual: &Individual, ctx: &FitnessContext) -> Result<usize> {
    if individual.genes.is_empty() {
        return Err(Error::TooFewGenes { got: 0, need: 1 });
    }
    ctx.check_genes(individual)?;
    if ctx.validation.is_empty() {
        return Err(Error::EmptyValidation);
    }
    let genes = &individual.genes;
    let gene_codes: Vec<u32> = genes.iter().map(|&g| ctx.label_codes[g]).collect();
    let count = ctx
        .validation
        .par_iter()
        .map(|&v| {
            let mut best = f64::INFINITY;
            let mut arg = 0;
            for (j, &g) in genes.iter().enumerate() {
                let d = ctx.provider.dist(v, g).expect("genes validated");
                if d < best {
                    best = d;
                    arg = j;
                }
            }
            usize::from(gene_codes[arg] == ctx.label_codes[v])
        })
        .sum();
    Ok(count)
}

/// The supervised criterion with nearest prototypes found in the
/// p-dimensional pivot space instead of the raw measure.
///
/// Uses the accelerator's precomputed object codes, so no measure
/// evaluations happen here at all.
pub fn fitness_supervised_lsh(individual: &Individual, ctx: &FitnessContext) -> Result<usize> {
    if individual.genes.is_empty() {
        return Err(Error::TooFewGenes { got: 0, need: 1 });
    }
    ctx.check_genes(individual)?;
    if ctx.validation.is_empty() {
        return Err(Error::EmptyValidation);
    }
    let table = ctx.accelerator.as_ref().ok_or(Error::AcceleratorMissing)?;
    if table.dataset_revision() != ctx.provider.revision() {
        return Err(Error::AcceleratorStale {
            expected: table.dataset_revision(),
            actual: ctx.provider.revision(),
        });
    }
    let codes = table.codes();
    if codes.nrows() != ctx.provider.len() {
        return Err(Error::AcceleratorNotEncoded);
    }
    let genes = &individual.genes;
    let gene_codes: Vec<u32> = genes.iter().map(|&g| ctx.label_codes[g]).collect();
    let gene_rows: Vec<&[f64]> = genes
        .iter()
        .map(|&g| codes.row(g).to_slice().expect("row-major layout"))
        .collect();
    let count = ctx
        .validation
        .par_iter()
        .map(|&v| {
            let row = codes.row(v);
            let row = row.to_slice().expect("row-major layout");
            let mut best = f64::INFINITY;
            let mut arg = 0;
            for (j, gene_row) in gene_rows.iter().enumerate() {
                let mut d = 0.0;
                for (a, b) in row.iter().zip(*gene_row) {
                    let diff = a - b;
                    d += diff * diff;
                }
                if d < best {
                    best = d;
                    arg = j;
                }
            }
            usize::from(gene_codes[arg] == ctx.label_codes[v])
        })
        .sum();
    Ok(count)
}

/// Which criterion a genetic run optimizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitnessKind {
    Mst,
    Supervised,
    SupervisedLsh,
}

impl FitnessKind {
    pub fn evaluate(&self, individual: &Individual, ctx: &FitnessContext) -> Result<f64> {
        match self {
            FitnessKind::Mst => fitness_mst(individual, ctx),
            FitnessKind::Supervised => fitness_supervised(individual, ctx).map(|c| c as f64),
            FitnessKind::SupervisedLsh => {
                fitness_supervised_lsh(individual, ctx).map(|c| c as f64)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FitnessKind::Mst => "mst",
            FitnessKind::Supervised => "sup",
            FitnessKind::SupervisedLsh => "sup-lsh",
        }
    }
}
