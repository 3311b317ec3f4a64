//! Convergence checks on scalar summaries of a partition chain.

use crate::compare::CandidateSets;
use crate::error::{Error, Result};
use crate::linkage::PartitionLabeling;

/// Scalars of one partition draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DrawSummary {
    pub clusters: usize,
    pub size1: usize,
    pub size2: usize,
    /// Clusters of three or more records.
    pub size3plus: usize,
}

pub fn summarize_draw(z: &PartitionLabeling) -> DrawSummary {
    let mut sizes = vec![0usize; z.num_records()];
    for &c in z.labels() {
        sizes[c] += 1;
    }
    let mut s = DrawSummary {
        clusters: 0,
        size1: 0,
        size2: 0,
        size3plus: 0,
    };
    for &n in sizes.iter().filter(|&&n| n > 0) {
        s.clusters += 1;
        match n {
            1 => s.size1 += 1,
            2 => s.size2 += 1,
            _ => s.size3plus += 1,
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSummaries {
    pub draws: Vec<DrawSummary>,
    /// Candidate pairs `(i, j)` in candidate order.
    pub pairs: Vec<(usize, usize)>,
    /// `co_clustered[p][t]`: whether pair `p` shares a cluster in draw `t`.
    pub co_clustered: Vec<Vec<bool>>,
}

impl PartitionSummaries {
    /// Posterior probability that each candidate pair is coreferent.
    pub fn pair_probabilities(&self) -> Vec<f64> {
        let d = self.draws.len() as f64;
        self.co_clustered
            .iter()
            .map(|c| c.iter().filter(|&&x| x).count() as f64 / d)
            .collect()
    }

    pub fn series(&self, name: &str) -> Option<Vec<f64>> {
        let f: fn(&DrawSummary) -> usize = match name {
            "clusters" => |s| s.clusters,
            "size1" => |s| s.size1,
            "size2" => |s| s.size2,
            "size3plus" => |s| s.size3plus,
            _ => return None,
        };
        Some(self.draws.iter().map(|s| f(s) as f64).collect())
    }
}

pub fn partition_summaries(draws: &[PartitionLabeling], pairs: &[(usize, usize)]) -> Result<PartitionSummaries> {
    if draws.is_empty() {
        return Err(Error::Invalid("empty chain".into()));
    }
    Ok(PartitionSummaries {
        draws: draws.iter().map(summarize_draw).collect(),
        pairs: pairs.to_vec(),
        co_clustered: pairs
            .iter()
            .map(|&(i, j)| draws.iter().map(|z| z.same_cluster(i, j)).collect())
            .collect(),
    })
}

pub fn candidate_pairs(sets: &CandidateSets) -> Vec<(usize, usize)> {
    sets.candidates.iter().map(|v| (v.i, v.j)).collect()
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n)
}

/// Spectral density at zero over the window length, by non-overlapping
/// batch means with about `sqrt(len)` batches.
fn batch_means_variance(xs: &[f64]) -> Result<f64> {
    let batches = ((xs.len() as f64).sqrt().floor() as usize).max(2);
    let size = xs.len() / batches;
    if size == 0 {
        return Err(Error::DegenerateChain("window too short".into()));
    }
    let means: Vec<f64> = xs
        .chunks_exact(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let (_, v) = mean_var(&means);
    let var_of_means = v * means.len() as f64 / (means.len() - 1) as f64;
    let (_, raw) = mean_var(xs);
    if raw == 0.0 {
        return Err(Error::DegenerateChain("zero variance in a window".into()));
    }
    Ok(var_of_means * size as f64)
}

/// Geweke's two-window Z-score comparing the first `frac_a` and last
/// `frac_b` of the chain.
pub fn geweke_z(chain: &[f64], frac_a: f64, frac_b: f64) -> Result<f64> {
    if chain.len() < 100 {
        return Err(Error::DegenerateChain(format!("{} values, need at least 100", chain.len())));
    }
    if !(frac_a > 0.0 && frac_b > 0.0 && frac_a + frac_b <= 1.0) {
        return Err(Error::Invalid(format!("bad window fractions {frac_a}, {frac_b}")));
    }
    let n = chain.len();
    let a = &chain[..(frac_a * n as f64).floor() as usize];
    let b = &chain[n - (frac_b * n as f64).floor() as usize..];
    let (ma, _) = mean_var(a);
    let (mb, _) = mean_var(b);
    let sa = batch_means_variance(a)?;
    let sb = batch_means_variance(b)?;
    let se = (sa / a.len() as f64 + sb / b.len() as f64).sqrt();
    if !(se > 0.0) {
        return Err(Error::DegenerateChain("zero spectral density".into()));
    }
    Ok((ma - mb) / se)
}

/// Sample autocorrelations at lags `1..=max_lag`.
pub fn acf(chain: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if chain.len() <= max_lag {
        return Err(Error::Invalid(format!(
            "chain of length {} is too short for lag {max_lag}",
            chain.len()
        )));
    }
    let (m, v) = mean_var(chain);
    if v == 0.0 {
        return Err(Error::DegenerateChain("zero variance".into()));
    }
    let n = chain.len() as f64;
    Ok((1..=max_lag)
        .map(|lag| {
            chain
                .iter()
                .zip(&chain[lag..])
                .map(|(x, y)| (x - m) * (y - m))
                .sum::<f64>()
                / n
                / v
        })
        .collect())
}
