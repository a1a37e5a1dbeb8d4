//! Comparison selectors: random draw, farthest-first traversal, k-centres,
//! and greedy forward selection on the supervised criterion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dissim::DissimilarityProvider;
use crate::dspace::PrototypeSet;
use crate::error::{Error, Result};
use crate::fitness::FitnessContext;

fn check_pool(provider: &DissimilarityProvider, candidates: &[usize], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter { name: "k", reason: "must be at least 1".into() });
    }
    if candidates.len() < k {
        return Err(Error::PoolTooSmall { pool: candidates.len(), k });
    }
    for &c in candidates {
        if c >= provider.len() {
            return Err(Error::IndexOutOfRange { index: c, len: provider.len() });
        }
    }
    Ok(())
}

/// k distinct uniform draws from the candidate pool.
pub fn select_random(candidates: &[usize], k: usize, seed: u64) -> Result<PrototypeSet> {
    if k == 0 {
        return Err(Error::InvalidParameter { name: "k", reason: "must be at least 1".into() });
    }
    if candidates.len() < k {
        return Err(Error::PoolTooSmall { pool: candidates.len(), k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices = rand::seq::index::sample(&mut rng, candidates.len(), k)
        .into_iter()
        .map(|p| candidates[p])
        .collect();
    PrototypeSet::new(indices, "random", seed)
}

/// Farthest-first traversal: start from a random candidate, then repeatedly
/// add the candidate with maximal minimum dissimilarity to the chosen set.
///
/// Ties break to the lowest candidate position. Uses at most one measure
/// evaluation per candidate per step. The trace records the maximin
/// dissimilarity of each pick after the first.
pub fn select_fft(
    provider: &DissimilarityProvider,
    candidates: &[usize],
    k: usize,
    seed: u64,
) -> Result<PrototypeSet> {
    check_pool(provider, candidates, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.gen_range(0..candidates.len());
    let mut chosen = vec![candidates[first]];
    let mut min_dist: Vec<f64> = candidates
        .iter()
        .map(|&c| provider.dist(c, candidates[first]).expect("validated"))
        .collect();
    let mut trace = Vec::with_capacity(k.saturating_sub(1));
    while chosen.len() < k {
        let mut best = f64::NEG_INFINITY;
        let mut arg = usize::MAX;
        for (pos, &d) in min_dist.iter().enumerate() {
            if d > best {
                best = d;
                arg = pos;
            }
        }
        let next = candidates[arg];
        trace.push(best);
        chosen.push(next);
        for (pos, &c) in candidates.iter().enumerate() {
            let d = provider.dist(c, next).expect("validated");
            if d < min_dist[pos] {
                min_dist[pos] = d;
            }
        }
    }
    Ok(PrototypeSet::new(chosen, "fft", seed)?.with_trace(trace))
}

/// K-centres: alternate nearest-center assignment with per-cluster minimax
/// (1-center) updates until the centers stop moving or `max_iters` passes.
///
/// The trace records the covering radius (max over candidates of distance to
/// the nearest center) after the initial assignment and after every update;
/// it never increases.
pub fn select_kcentres(
    provider: &DissimilarityProvider,
    candidates: &[usize],
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<PrototypeSet> {
    check_pool(provider, candidates, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<usize> = rand::seq::index::sample(&mut rng, candidates.len(), k)
        .into_iter()
        .map(|p| candidates[p])
        .collect();

    let dist = |a: usize, b: usize| provider.dist(a, b).expect("validated");
    // Nearest-center assignment; ties go to the lowest center position.
    let assign = |centers: &[usize]| -> (Vec<usize>, Vec<f64>) {
        let mut membership = vec![0usize; candidates.len()];
        let mut nearest = vec![f64::INFINITY; candidates.len()];
        for (pos, &c) in candidates.iter().enumerate() {
            for (j, &center) in centers.iter().enumerate() {
                let d = dist(c, center);
                if d < nearest[pos] {
                    nearest[pos] = d;
                    membership[pos] = j;
                }
            }
        }
        (membership, nearest)
    };

    let (mut membership, mut nearest) = assign(&centers);
    // Guard for degenerate duplicate-heavy pools: an empty cluster's center
    // is re-seeded with the worst-covered non-center candidate.
    for round in 0..k {
        let mut counts = vec![0usize; k];
        for &m in &membership {
            counts[m] += 1;
        }
        if counts.iter().all(|&c| c > 0) {
            break;
        }
        let empty = counts.iter().position(|&c| c == 0).unwrap();
        let worst = candidates
            .iter()
            .enumerate()
            .filter(|(_, c)| !centers.contains(c))
            .max_by(|(a, _), (b, _)| nearest[*a].partial_cmp(&nearest[*b]).unwrap())
            .map(|(_, &c)| c);
        match worst {
            Some(c) => centers[empty] = c,
            None => break,
        }
        let reassigned = assign(&centers);
        membership = reassigned.0;
        nearest = reassigned.1;
        let _ = round;
    }

    let objective = |nearest: &[f64]| nearest.iter().cloned().fold(0.0f64, f64::max);
    let mut trace = vec![objective(&nearest)];

    for _ in 0..max_iters {
        // Per cluster, the member minimizing the maximum within-cluster
        // dissimilarity (the cluster's 1-center).
        let mut new_centers = centers.clone();
        for (j, center) in new_centers.iter_mut().enumerate() {
            let members: Vec<usize> = candidates
                .iter()
                .enumerate()
                .filter(|(pos, _)| membership[*pos] == j)
                .map(|(_, &c)| c)
                .collect();
            if members.is_empty() {
                continue;
            }
            let mut best_radius = f64::INFINITY;
            for &m in &members {
                let radius = members
                    .iter()
                    .map(|&other| dist(m, other))
                    .fold(0.0f64, f64::max);
                if radius < best_radius {
                    best_radius = radius;
                    *center = m;
                }
            }
        }
        if new_centers == centers {
            break;
        }
        centers = new_centers;
        let reassigned = assign(&centers);
        membership = reassigned.0;
        nearest = reassigned.1;
        trace.push(objective(&nearest));
    }

    Ok(PrototypeSet::new(centers, "kcentres", seed)?.with_trace(trace))
}

/// Greedy forward selection optimizing the supervised matching-label count.
///
/// At each of the k steps, adds the candidate whose addition maximizes the
/// count; ties break to the lowest candidate position. The trace records the
/// count after each step.
pub fn select_forward(
    ctx: &FitnessContext,
    candidates: &[usize],
    k: usize,
) -> Result<PrototypeSet> {
    let provider = ctx.provider();
    check_pool(provider, candidates, k)?;
    if ctx.validation().is_empty() {
        return Err(Error::EmptyValidation);
    }
    let validation = ctx.validation();
    let dist = |a: usize, b: usize| provider.dist(a, b).expect("validated");

    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut chosen_positions: Vec<bool> = vec![false; candidates.len()];
    // Per validation object: distance to its nearest chosen prototype and
    // whether that prototype's label matches.
    let mut best_dist = vec![f64::INFINITY; validation.len()];
    let mut matched = vec![false; validation.len()];
    let mut trace = Vec::with_capacity(k);

    for _ in 0..k {
        let mut best_count = usize::MAX; // sentinel: no candidate examined yet
        let mut best_pos = usize::MAX;
        for (pos, &c) in candidates.iter().enumerate() {
            if chosen_positions[pos] {
                continue;
            }
            let c_code = ctx.label_code(c);
            let mut count = 0usize;
            for (vi, &v) in validation.iter().enumerate() {
                let d = dist(v, c);
                // The appended candidate has the highest gene position, so
                // it wins only on strictly smaller distance.
                let matches = if d < best_dist[vi] {
                    c_code == ctx.label_code(v)
                } else {
                    matched[vi]
                };
                if matches {
                    count += 1;
                }
            }
            if best_pos == usize::MAX || count > best_count {
                best_count = count;
                best_pos = pos;
            }
        }
        let c = candidates[best_pos];
        chosen_positions[best_pos] = true;
        let c_code = ctx.label_code(c);
        for (vi, &v) in validation.iter().enumerate() {
            let d = dist(v, c);
            if d < best_dist[vi] {
                best_dist[vi] = d;
                matched[vi] = c_code == ctx.label_code(v);
            }
        }
        chosen.push(c);
        trace.push(best_count as f64);
    }
    Ok(PrototypeSet::new(chosen, "forward", 0)?.with_trace(trace))
}
