//! Exact posterior over feasible partitions for small instances.

use crate::compare::CandidateSets;
use crate::error::{Error, Result};

use super::model::{log_marginal_likelihood, StatusTallies, TruncationPoints};
use super::partition::{
    log_labelings_per_partition, log_partition_prior, CandidateIndex, PartitionLabeling,
};

pub const MAX_ENUMERATED: usize = 10_000;

/// Every feasible partition with its unnormalized log posterior
/// (`ln L(Z) + ln p(Z)`, summed over labelings) and normalized probability.
#[derive(Debug, Clone)]
pub struct PartitionPosterior {
    pub partitions: Vec<PartitionLabeling>,
    /// Log marginal likelihood of the comparison data, `ln L_L(Z | X)`.
    pub log_likelihood: Vec<f64>,
    /// Log prior mass of each partition.
    pub log_prior: Vec<f64>,
    pub probs: Vec<f64>,
}

impl PartitionPosterior {
    pub fn prob_of(&self, z: &PartitionLabeling) -> f64 {
        self.partitions
            .iter()
            .position(|p| p == z)
            .map(|k| self.probs[k])
            .unwrap_or(0.0)
    }
}

/// All feasible partitions of the records touched by `C`; the rest stay
/// singletons. Fails once more than `limit` partitions exist.
pub fn feasible_partitions(sets: &CandidateSets, limit: usize) -> Result<Vec<PartitionLabeling>> {
    let index = CandidateIndex::new(sets);
    let r = sets.num_records;
    let active: Vec<usize> = (0..r).filter(|&i| !index.neighbors(i).is_empty()).collect();
    let mut out = Vec::new();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut labels: Vec<usize> = (0..r).collect();
    fn rec(
        pos: usize,
        active: &[usize],
        index: &CandidateIndex,
        blocks: &mut Vec<Vec<usize>>,
        labels: &mut Vec<usize>,
        out: &mut Vec<PartitionLabeling>,
        limit: usize,
    ) -> Result<()> {
        if pos == active.len() {
            if out.len() >= limit {
                return Err(Error::TooLarge(format!("more than {limit} feasible partitions")));
            }
            out.push(PartitionLabeling::from_labels(labels));
            return Ok(());
        }
        let j = active[pos];
        for b in 0..blocks.len() {
            if blocks[b].iter().all(|&k| index.pair_id(j, k).is_some()) {
                blocks[b].push(j);
                labels[j] = blocks[b][0];
                rec(pos + 1, active, index, blocks, labels, out, limit)?;
                blocks[b].pop();
            }
        }
        blocks.push(vec![j]);
        labels[j] = j;
        rec(pos + 1, active, index, blocks, labels, out, limit)?;
        blocks.pop();
        Ok(())
    }
    rec(0, &active, &index, &mut blocks, &mut labels, &mut out, limit)?;
    Ok(out)
}

/// Exact posterior with `m` and `u` integrated out analytically.
pub fn exact_posterior_enumeration(
    sets: &CandidateSets,
    lambda: &TruncationPoints,
) -> Result<PartitionPosterior> {
    let partitions = feasible_partitions(sets, MAX_ENUMERATED)?;
    let index = CandidateIndex::new(sets);
    let r = sets.num_records;
    let log_likelihood: Vec<f64> = partitions
        .iter()
        .map(|z| log_marginal_likelihood(&StatusTallies::from_partition(sets, z), lambda))
        .collect();
    let log_prior: Vec<f64> = partitions
        .iter()
        .map(|z| log_partition_prior(z, &index) + log_labelings_per_partition(r, z.num_clusters()))
        .collect();
    let logs: Vec<f64> = log_likelihood
        .iter()
        .zip(&log_prior)
        .map(|(a, b)| a + b)
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let probs = weights.iter().map(|w| w / total).collect();
    Ok(PartitionPosterior {
        partitions,
        log_likelihood,
        log_prior,
        probs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compare::{ComparisonVector, LevelTallies};

    fn sets(r: usize, pairs: &[(usize, usize, u8)]) -> CandidateSets {
        CandidateSets {
            num_records: r,
            field_names: vec!["f".into()],
            levels_per_field: vec![2],
            num_compared: pairs.len() as u64,
            candidates: pairs
                .iter()
                .map(|&(i, j, l)| ComparisonVector { i, j, levels: vec![Some(l)] })
                .collect(),
            fixed_pairs: 0,
            fixed: LevelTallies::zeros(&[2]),
            components: Vec::new(),
        }
    }

    #[test]
    fn one_pair_two_partitions() {
        let s = sets(2, &[(0, 1, 0)]);
        let post = exact_posterior_enumeration(&s, &TruncationPoints::flat(&[2])).unwrap();
        assert_eq!(post.partitions.len(), 2);
        assert!((post.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bell_numbers() {
        let s = sets(3, &[(0, 1, 0), (0, 2, 0), (1, 2, 0)]);
        assert_eq!(feasible_partitions(&s, 100).unwrap().len(), 5);
        let s = sets(4, &[(0, 1, 0), (0, 2, 0), (0, 3, 0), (1, 2, 0), (1, 3, 0), (2, 3, 0)]);
        assert_eq!(feasible_partitions(&s, 100).unwrap().len(), 15);
        // a path 0-1-2: {0,1,2} infeasible → 1 + 2 = 3 partitions
        let s = sets(3, &[(0, 1, 0), (1, 2, 0)]);
        assert_eq!(feasible_partitions(&s, 100).unwrap().len(), 3);
        assert!(matches!(feasible_partitions(&s, 2), Err(Error::TooLarge(_))));
    }

    #[test]
    fn agreement_raises_link_mass() {
        // fixed non-coreferent pairs that disagree make u favor disagreement
        let mut agree = sets(2, &[(0, 1, 0)]);
        agree.fixed.counts[0] = vec![0, 5, 40];
        let mut disagree = sets(2, &[(0, 1, 2)]);
        disagree.fixed.counts[0] = vec![0, 5, 40];
        let lam = TruncationPoints::new(vec![vec![0.5, 0.5]], &[2]).unwrap();
        let linked = PartitionLabeling::from_labels(&[0, 0]);
        let pa = exact_posterior_enumeration(&agree, &lam).unwrap().prob_of(&linked);
        let pd = exact_posterior_enumeration(&disagree, &lam).unwrap().prob_of(&linked);
        assert!(pa > pd, "{pa} vs {pd}");
        assert!(pa > 0.5);
    }
}
