//! Pairwise mixture-model baseline: each candidate pair carries its own
//! match indicator `M_ij ~ Bernoulli(p)`, ignoring transitivity, and
//! partitions are recovered afterwards by transitive closure.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use crate::compare::CandidateSets;
use crate::error::Result;
use crate::unionfind::UnionFind;

use super::gibbs::McmcConfig;
use super::model::{draw_params, LinkageParams, LogRatioTable, StatusTallies, TruncationPoints};
use super::partition::PartitionLabeling;

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureDraw {
    /// `M_ij` for each candidate pair, in candidate order.
    pub indicators: Vec<bool>,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureChain {
    pub draws: Vec<MixtureDraw>,
    pub seed: u64,
    pub burnin: usize,
    pub thin: usize,
    pub iterations: usize,
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Draws every `M_ij` given `p` and the parameters.
pub fn update_indicators<R: Rng + ?Sized>(
    sets: &CandidateSets,
    params: &LinkageParams,
    p: f64,
    rng: &mut R,
) -> Vec<bool> {
    let ratios = LogRatioTable::new(params);
    let prior_logit = p.ln() - (-p).ln_1p();
    sets.candidates
        .iter()
        .map(|v| rng.random::<f64>() < logistic(prior_logit + ratios.pair(&v.levels)))
        .collect()
}

pub fn mixture_rl_sampler(
    sets: &CandidateSets,
    lambda: &TruncationPoints,
    config: &McmcConfig,
) -> Result<MixtureChain> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = sets.candidates.len();
    let mut indicators = vec![false; n];
    let mut p = 0.5;
    let mut draws = Vec::with_capacity(config.num_saved());
    for t in 1..=config.iterations {
        let tallies = StatusTallies::from_indicator(sets, |k| indicators[k]);
        let params = draw_params(&tallies, lambda, &mut rng);
        indicators = update_indicators(sets, &params, p, &mut rng);
        let linked = indicators.iter().filter(|&&m| m).count() as f64;
        p = Beta::new(1.0 + linked, 1.0 + n as f64 - linked)
            .expect("positive shapes")
            .sample(&mut rng)
            .clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
        if config.keeps(t) {
            draws.push(MixtureDraw {
                indicators: indicators.clone(),
                p,
            });
        }
    }
    Ok(MixtureChain {
        draws,
        seed: config.seed,
        burnin: config.burnin,
        thin: config.thin,
        iterations: config.iterations,
    })
}

/// Closes the `M = 1` edges transitively and counts open triplets: triples
/// where exactly two of the three pairwise indicators are 1.
pub fn transitive_closure(
    num_records: usize,
    pairs: &[(usize, usize)],
    indicators: &[bool],
) -> (PartitionLabeling, usize) {
    let mut uf = UnionFind::new(num_records);
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); num_records];
    let mut edges = HashSet::new();
    for (&(i, j), &m) in pairs.iter().zip(indicators) {
        if m {
            uf.union(i, j);
            adj[i].push(j);
            adj[j].push(i);
            edges.insert((i.min(j), i.max(j)));
        }
    }
    // each open triplet has exactly one vertex incident to both of its edges
    let mut open = 0usize;
    for nbrs in &adj {
        for a in 0..nbrs.len() {
            for b in (a + 1)..nbrs.len() {
                let (x, y) = (nbrs[a].min(nbrs[b]), nbrs[a].max(nbrs[b]));
                if !edges.contains(&(x, y)) {
                    open += 1;
                }
            }
        }
    }
    (PartitionLabeling::from_labels(&uf.min_labels()), open)
}

impl MixtureChain {
    /// Closed partitions and open-triplet counts for every saved draw.
    pub fn closures(&self, sets: &CandidateSets) -> Vec<(PartitionLabeling, usize)> {
        let pairs: Vec<(usize, usize)> = sets.candidates.iter().map(|v| (v.i, v.j)).collect();
        self.draws
            .iter()
            .map(|d| transitive_closure(sets.num_records, &pairs, &d.indicators))
            .collect()
    }
}
