use std::collections::BTreeMap;

use statrs::function::gamma::ln_gamma;

use crate::compare::CandidateSets;

/// A coreference partition stored as a canonical labeling: every record
/// carries the smallest record index of its cluster.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartitionLabeling {
    labels: Vec<usize>,
}

impl PartitionLabeling {
    pub fn singletons(r: usize) -> Self {
        PartitionLabeling {
            labels: (0..r).collect(),
        }
    }

    /// Canonicalizes an arbitrary labeling; only label equality matters.
    pub fn from_labels<T: Ord + Copy>(labels: &[T]) -> Self {
        let mut first: BTreeMap<T, usize> = BTreeMap::new();
        let labels = labels
            .iter()
            .enumerate()
            .map(|(i, l)| *first.entry(*l).or_insert(i))
            .collect();
        PartitionLabeling { labels }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_records(&self) -> usize {
        self.labels.len()
    }

    /// `n(Z)`, the number of clusters.
    pub fn num_clusters(&self) -> usize {
        self.labels
            .iter()
            .enumerate()
            .filter(|(i, l)| *i == **l)
            .count()
    }

    /// Clusters in order of their smallest member, members ascending.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut slot = vec![usize::MAX; self.labels.len()];
        let mut out: Vec<Vec<usize>> = Vec::new();
        for (i, &l) in self.labels.iter().enumerate() {
            if slot[l] == usize::MAX {
                slot[l] = out.len();
                out.push(Vec::new());
            }
            out[slot[l]].push(i);
        }
        out
    }

    pub fn same_cluster(&self, i: usize, j: usize) -> bool {
        self.labels[i] == self.labels[j]
    }

    /// Every co-clustered pair must be a candidate pair.
    pub fn is_feasible(&self, index: &CandidateIndex) -> bool {
        self.clusters().iter().all(|c| {
            c.iter()
                .enumerate()
                .all(|(a, &i)| c[a + 1..].iter().all(|&j| index.pair_id(i, j).is_some()))
        })
    }
}

/// Log prior of a labeling with `n` clusters over `r` records under the
/// uniform-over-labelings construction: `ln((r - n)! / r!)`.
pub fn log_partition_prior_counts(r: usize, n: usize) -> f64 {
    ln_gamma((r - n) as f64 + 1.0) - ln_gamma(r as f64 + 1.0)
}

/// Log prior of a labeling; `-inf` when it co-clusters a non-candidate pair.
pub fn log_partition_prior(z: &PartitionLabeling, index: &CandidateIndex) -> f64 {
    if !z.is_feasible(index) {
        return f64::NEG_INFINITY;
    }
    log_partition_prior_counts(z.num_records(), z.num_clusters())
}

/// `ln(r! / (r - n)!)`: the number of labelings that encode one partition
/// with `n` clusters. Adding it to the labeling prior gives the prior mass of
/// the partition, which is the same for every feasible partition.
pub fn log_labelings_per_partition(r: usize, n: usize) -> f64 {
    ln_gamma(r as f64 + 1.0) - ln_gamma((r - n) as f64 + 1.0)
}

/// Adjacency of the candidate graph, for O(log deg) pair lookups.
#[derive(Debug, Clone)]
pub struct CandidateIndex {
    /// Per record: `(neighbor, pair id)` sorted by neighbor.
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl CandidateIndex {
    pub fn new(sets: &CandidateSets) -> Self {
        let mut adjacency = vec![Vec::new(); sets.num_records];
        for (p, v) in sets.candidates.iter().enumerate() {
            adjacency[v.i].push((v.j, p));
            adjacency[v.j].push((v.i, p));
        }
        for a in &mut adjacency {
            a.sort_unstable();
        }
        CandidateIndex { adjacency }
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn pair_id(&self, i: usize, j: usize) -> Option<usize> {
        let adj = &self.adjacency[i];
        adj.binary_search_by_key(&j, |&(n, _)| n)
            .ok()
            .map(|k| adj[k].1)
    }

    pub fn num_records(&self) -> usize {
        self.adjacency.len()
    }
}
