//! Summaries of a fitted chain: `β(t)` bands, scalar tables, a point
//! partition of the latent curves and contrasts between its clusters.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fda::{BasisSystem, FdaError, Grid};
use crate::model::PosteriorDraws;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PosteriorError {
    #[error("need at least {needed} draws, got {got}")]
    TooFewDraws { needed: usize, got: usize },
    #[error("credible level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),
    #[error("draws carry no latent allocation snapshots")]
    NoAllocationSnapshots,
    #[error("cluster {0} is empty or does not exist")]
    EmptyCluster(usize),
    #[error("draw {draw} has {actual} entries, expected {expected}")]
    RaggedDraws {
        draw: usize,
        expected: usize,
        actual: usize,
    },
    #[error(transparent)]
    Fda(#[from] FdaError),
}

/// Pointwise posterior mean and equal-tailed band of a curve.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSummary {
    pub grid: Grid,
    pub mean: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarSummary {
    pub name: String,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    /// One-based cluster label per observation; label 1 is the largest cluster.
    pub labels: Vec<usize>,
    pub n_clusters: usize,
    /// `n_clusters × T` mean latent curves.
    pub cluster_mean_curves: DMatrix<f64>,
    pub sizes: Vec<usize>,
    /// Truncation level of the latent mixture, for reporting unused components.
    pub truncation: usize,
}

impl ClusterResult {
    /// Cluster sizes padded with zeros up to the mixture truncation.
    pub fn padded_sizes(&self) -> Vec<usize> {
        let mut s = self.sizes.clone();
        s.resize(self.truncation.max(self.n_clusters), 0);
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contrast {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

fn check_level(level: f64) -> Result<(), PosteriorError> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(PosteriorError::InvalidLevel(level))
    }
}

fn check_draws(count: usize) -> Result<(), PosteriorError> {
    if count < 2 {
        Err(PosteriorError::TooFewDraws { needed: 2, got: count })
    } else {
        Ok(())
    }
}

/// Mean and the `(k, n + 1 − k)` order statistics with `k = ⌈n(1 − level)/2⌉`,
/// so the lower end is the empirical inverse CDF at `(1 − level)/2`. Using
/// mirrored order statistics keeps the interval of `−x` equal to the negated,
/// swapped interval of `x`. The ends are widened to contain the mean when a
/// very skewed sample would otherwise exclude it.
pub fn equal_tailed(values: &[f64], level: f64) -> (f64, f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - level) * n as f64;
    let k = ((tail - 1e-9).ceil() as usize).clamp(1, n.div_ceil(2));
    let lower = sorted[k - 1].min(mean);
    let upper = sorted[n - k].max(mean);
    (mean, lower, upper)
}

pub fn summarize_beta(
    draws: &PosteriorDraws,
    basis: &BasisSystem,
    level: f64,
) -> Result<FunctionalSummary, PosteriorError> {
    check_level(level)?;
    check_draws(draws.draw_count())?;
    for (d, r) in draws.records.iter().enumerate() {
        if r.gamma.len() != basis.size() {
            return Err(PosteriorError::RaggedDraws {
                draw: d,
                expected: basis.size(),
                actual: r.gamma.len(),
            });
        }
    }
    // D × T matrix of β(t) draws.
    let curves = draws.gamma_matrix() * basis.basis_values().transpose();
    let t = curves.ncols();
    let (mut mean, mut lower, mut upper) = (DVector::zeros(t), DVector::zeros(t), DVector::zeros(t));
    for j in 0..t {
        let col: Vec<f64> = curves.column(j).iter().copied().collect();
        (mean[j], lower[j], upper[j]) = equal_tailed(&col, level);
    }
    Ok(FunctionalSummary {
        grid: basis.grid().clone(),
        mean,
        lower,
        upper,
        level,
    })
}

/// Rows for `alpha0`, `beta_z_1..p` and `tau`.
pub fn summarize_scalars(draws: &PosteriorDraws, level: f64) -> Result<Vec<ScalarSummary>, PosteriorError> {
    check_level(level)?;
    check_draws(draws.draw_count())?;
    let p = draws.records[0].beta_z.len();
    let mut columns: Vec<(String, Vec<f64>)> = Vec::with_capacity(p + 2);
    columns.push(("alpha0".into(), draws.records.iter().map(|r| r.alpha0).collect()));
    for j in 0..p {
        let mut col = Vec::with_capacity(draws.draw_count());
        for (d, r) in draws.records.iter().enumerate() {
            let v = r.beta_z.get(j).ok_or(PosteriorError::RaggedDraws {
                draw: d,
                expected: p,
                actual: r.beta_z.len(),
            })?;
            col.push(*v);
        }
        columns.push((format!("beta_z_{}", j + 1), col));
    }
    columns.push(("tau".into(), draws.records.iter().map(|r| r.tau).collect()));
    Ok(columns
        .into_iter()
        .map(|(name, v)| {
            let (mean, lower, upper) = equal_tailed(&v, level);
            ScalarSummary {
                name,
                mean,
                lower,
                upper,
            }
        })
        .collect())
}

fn allocation_draws(draws: &PosteriorDraws) -> Result<Vec<&[u32]>, PosteriorError> {
    let allocs: Vec<&[u32]> = draws
        .records
        .iter()
        .map(|r| r.x_allocations.as_slice())
        .filter(|a| !a.is_empty())
        .collect();
    let Some(first) = allocs.first() else {
        return Err(PosteriorError::NoAllocationSnapshots);
    };
    let n = first.len();
    if let Some((d, a)) = allocs.iter().enumerate().find(|(_, a)| a.len() != n) {
        return Err(PosteriorError::RaggedDraws {
            draw: d,
            expected: n,
            actual: a.len(),
        });
    }
    Ok(allocs)
}

/// `S[i, j]`: share of allocation snapshots putting `i` and `j` in the same
/// latent component.
pub fn similarity_matrix(draws: &PosteriorDraws) -> Result<DMatrix<f64>, PosteriorError> {
    let allocs = allocation_draws(draws)?;
    let n = allocs[0].len();
    let d = allocs.len() as f64;
    let rows: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut counts = vec![0u32; n];
            for a in &allocs {
                let zi = a[i];
                for (c, &zj) in counts.iter_mut().zip(a.iter()) {
                    *c += u32::from(zj == zi);
                }
            }
            counts
        })
        .collect();
    Ok(DMatrix::from_fn(n, n, |i, j| f64::from(rows[i][j]) / d))
}

/// Average-linkage merges on the dissimilarity matrix by the nearest-neighbour
/// chain algorithm, returned as `(a, b, height)` sorted by height. A merged
/// cluster keeps the slot of its first argument, so `a` and `b` are always
/// member points of the two merged clusters.
fn average_linkage(dist: &DMatrix<f64>) -> Vec<(usize, usize, f64)> {
    let n = dist.nrows();
    let mut d = dist.clone();
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    let mut chain: Vec<usize> = Vec::new();
    for _ in 1..n {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).expect("two active clusters remain"));
        }
        loop {
            let a = *chain.last().expect("chain is non-empty");
            let prev = chain.len().checked_sub(2).map(|i| chain[i]);
            let mut best = prev;
            let mut best_d = prev.map_or(f64::INFINITY, |p| d[(a, p)]);
            for b in 0..n {
                if active[b] && b != a && d[(a, b)] < best_d {
                    best_d = d[(a, b)];
                    best = Some(b);
                }
            }
            let b = best.expect("another active cluster exists");
            if Some(b) == prev {
                chain.truncate(chain.len() - 2);
                let (keep, drop) = (a.min(b), a.max(b));
                merges.push((keep, drop, best_d));
                let (sk, sd) = (size[keep] as f64, size[drop] as f64);
                for k in 0..n {
                    if active[k] && k != keep && k != drop {
                        let v = (sk * d[(keep, k)] + sd * d[(drop, k)]) / (sk + sd);
                        d[(keep, k)] = v;
                        d[(k, keep)] = v;
                    }
                }
                size[keep] += size[drop];
                active[drop] = false;
                break;
            }
            chain.push(b);
        }
    }
    merges.sort_by(|x, y| x.2.total_cmp(&y.2));
    merges
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Partition of `1 − S` by average linkage, cut at `k` clusters. Labels are
/// one-based and ordered by decreasing size, ties by first member.
pub fn cut_average_linkage(similarity: &DMatrix<f64>, k: usize) -> Vec<usize> {
    let n = similarity.nrows();
    if n == 0 {
        return Vec::new();
    }
    let k = k.clamp(1, n);
    let dist = similarity.map(|s| 1.0 - s);
    let mut parent: Vec<usize> = (0..n).collect();
    for &(a, b, _) in average_linkage(&dist).iter().take(n - k) {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[ra.max(rb)] = ra.min(rb);
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let mut groups: Vec<(usize, usize)> = Vec::new(); // (root, size)
    for &r in &roots {
        match groups.iter_mut().find(|g| g.0 == r) {
            Some(g) => g.1 += 1,
            None => groups.push((r, 1)),
        }
    }
    // Roots are the smallest member, so sorting by root breaks size ties by first member.
    groups.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));
    roots
        .iter()
        .map(|r| 1 + groups.iter().position(|g| g.0 == *r).expect("root is listed"))
        .collect()
}

/// Most frequent number of occupied latent components; ties go to the smaller count.
fn modal_occupancy(allocs: &[&[u32]]) -> usize {
    let mut freq: Vec<usize> = Vec::new();
    for a in allocs {
        let mut seen: Vec<u32> = a.to_vec();
        seen.sort_unstable();
        seen.dedup();
        let c = seen.len();
        if freq.len() <= c {
            freq.resize(c + 1, 0);
        }
        freq[c] += 1;
    }
    let best = freq.iter().copied().max().unwrap_or(0);
    freq.iter().position(|&f| f == best && f > 0).unwrap_or(1)
}

/// Point partition of the observations from the posterior similarity
/// matrix, cut at the modal number of occupied components.
pub fn extract_clusters(draws: &PosteriorDraws, basis: &BasisSystem) -> Result<ClusterResult, PosteriorError> {
    let allocs = allocation_draws(draws)?;
    let k = modal_occupancy(&allocs);
    let sim = similarity_matrix(draws)?;
    let labels = cut_average_linkage(&sim, k);
    let n_clusters = labels.iter().copied().max().unwrap_or(0);
    let mut sizes = vec![0usize; n_clusters];
    for &l in &labels {
        sizes[l - 1] += 1;
    }
    let latent = &draws.latent_mean;
    if latent.nrows() != labels.len() {
        return Err(PosteriorError::RaggedDraws {
            draw: 0,
            expected: labels.len(),
            actual: latent.nrows(),
        });
    }
    let mut curves = DMatrix::zeros(n_clusters, basis.grid().len());
    for (c, &size) in sizes.iter().enumerate() {
        let mut mean = DVector::zeros(latent.ncols());
        for (i, _) in labels.iter().enumerate().filter(|(_, &l)| l == c + 1) {
            mean += latent.row(i).transpose();
        }
        mean /= size as f64;
        curves.set_row(c, &basis.curve_from_scores(&mean)?.transpose());
    }
    Ok(ClusterResult {
        labels,
        n_clusters,
        cluster_mean_curves: curves,
        sizes,
        truncation: draws.x_truncation,
    })
}

fn member_mean(scores: &DMatrix<f64>, members: &[usize]) -> DVector<f64> {
    let mut m = DVector::zeros(scores.ncols());
    for &i in members {
        m += scores.row(i).transpose();
    }
    m / members.len() as f64
}

/// Posterior of `∫ β(t) {X̄_a(t) − X̄_b(t)} dt`, pairing each `β` draw with the
/// latent snapshot of the same chain nearest in iteration (the posterior
/// mean scores when no snapshots were kept). For curves in the span of the
/// basis the integral is `γᵀ(x̄_a − x̄_b)` in score space.
pub fn cluster_contrast(
    draws: &PosteriorDraws,
    clusters: &ClusterResult,
    cluster_a: usize,
    cluster_b: usize,
    level: f64,
) -> Result<Contrast, PosteriorError> {
    check_level(level)?;
    check_draws(draws.draw_count())?;
    let members = |c: usize| -> Result<Vec<usize>, PosteriorError> {
        let m: Vec<usize> = (0..clusters.labels.len())
            .filter(|&i| clusters.labels[i] == c)
            .collect();
        if m.is_empty() {
            Err(PosteriorError::EmptyCluster(c))
        } else {
            Ok(m)
        }
    };
    let (ma, mb) = (members(cluster_a)?, members(cluster_b)?);
    let gaps: Vec<DVector<f64>> = draws
        .snapshots
        .iter()
        .map(|s| member_mean(&s.scores, &ma) - member_mean(&s.scores, &mb))
        .collect();
    let fallback = member_mean(&draws.latent_mean, &ma) - member_mean(&draws.latent_mean, &mb);
    let values: Vec<f64> = draws
        .records
        .iter()
        .map(|r| {
            let nearest = draws
                .snapshots
                .iter()
                .enumerate()
                .filter(|(_, s)| s.chain == r.chain)
                .min_by_key(|(_, s)| s.iteration.abs_diff(r.iteration))
                .map(|(k, _)| &gaps[k]);
            r.gamma.dot(nearest.unwrap_or(&fallback))
        })
        .collect();
    let (mean, lower, upper) = equal_tailed(&values, level);
    Ok(Contrast {
        mean,
        lower,
        upper,
        level,
    })
}
