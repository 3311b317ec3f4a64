//! Gibbs sampler over coreference partitions.
//!
//! Each iteration draws `(m, u)` given the partition, then sweeps the records
//! that have at least one candidate neighbor. A record may move to its own
//! singleton or join any cluster whose every member is a candidate partner.
//! The partition prior is flat over feasible partitions, so joining a
//! cluster `c` has weight `exp(Σ_{k∈c} [ln P₁(γ_jk) − ln P₀(γ_jk)])`
//! relative to staying alone.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::compare::CandidateSets;
use crate::error::{Error, Result};

use super::model::{draw_params, LinkageParams, LogRatioTable, StatusTallies, TruncationPoints};
use super::partition::{CandidateIndex, PartitionLabeling};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    /// Visit records in a fresh random order each sweep instead of index order.
    pub random_scan: bool,
}

impl McmcConfig {
    pub fn new(iterations: usize, burnin: usize, thin: usize, seed: u64) -> Self {
        McmcConfig {
            iterations,
            burnin,
            thin,
            seed,
            random_scan: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::Invalid("thin must be at least 1".into()));
        }
        if self.num_saved() == 0 {
            return Err(Error::Invalid(format!(
                "no draws saved with iterations={} burnin={} thin={}",
                self.iterations, self.burnin, self.thin
            )));
        }
        Ok(())
    }

    /// Iteration `t` (1-based) is kept when it is past burn-in and on the
    /// thinning grid.
    pub fn keeps(&self, t: usize) -> bool {
        t > self.burnin && (t - self.burnin) % self.thin == 0
    }

    pub fn num_saved(&self) -> usize {
        if self.thin == 0 {
            return 0;
        }
        self.iterations.saturating_sub(self.burnin) / self.thin
    }
}

/// Saved partition draws with the settings that produced them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkageChain {
    pub draws: Vec<PartitionLabeling>,
    pub seed: u64,
    pub burnin: usize,
    pub thin: usize,
    pub iterations: usize,
}

impl LinkageChain {
    /// Draw file: `#`-prefixed `key = value` header lines (seed, iterations,
    /// burnin, thin, records, lists), then one line per draw of `r`
    /// space-separated canonical labels.
    pub fn write(&self, path: &Path, membership: &[usize]) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let r = self.draws.first().map(|d| d.num_records()).unwrap_or(membership.len());
        let lists: Vec<String> = membership.iter().map(|m| (m + 1).to_string()).collect();
        let header = format!(
            "# linkmse partition draws\n# seed = {}\n# iterations = {}\n# burnin = {}\n# thin = {}\n# records = {}\n# lists = {}\n",
            self.seed,
            self.iterations,
            self.burnin,
            self.thin,
            r,
            lists.join(" ")
        );
        let io = |e| Error::io(path, e);
        w.write_all(header.as_bytes()).map_err(io)?;
        let mut line = String::new();
        for d in &self.draws {
            line.clear();
            for (k, l) in d.labels().iter().enumerate() {
                if k > 0 {
                    line.push(' ');
                }
                line.push_str(&l.to_string());
            }
            line.push('\n');
            w.write_all(line.as_bytes()).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    /// Reads a draw file; returns the chain and the 0-based list membership.
    pub fn read(path: &Path) -> Result<(Self, Vec<usize>)> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut chain = LinkageChain {
            draws: Vec::new(),
            seed: 0,
            burnin: 0,
            thin: 1,
            iterations: 0,
        };
        let mut membership = Vec::new();
        let bad = |what: &str| Error::Parse(format!("{}: bad {what}", path.display()));
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(h) = line.strip_prefix('#') {
                if let Some((k, v)) = h.split_once('=') {
                    let v = v.trim();
                    match k.trim() {
                        "seed" => chain.seed = v.parse().map_err(|_| bad("seed"))?,
                        "iterations" => chain.iterations = v.parse().map_err(|_| bad("iterations"))?,
                        "burnin" => chain.burnin = v.parse().map_err(|_| bad("burnin"))?,
                        "thin" => chain.thin = v.parse().map_err(|_| bad("thin"))?,
                        "lists" => {
                            membership = v
                                .split_whitespace()
                                .map(|s| s.parse::<usize>().map(|k| k.saturating_sub(1)))
                                .collect::<std::result::Result<_, _>>()
                                .map_err(|_| bad("lists"))?
                        }
                        _ => {}
                    }
                }
                continue;
            }
            let labels: Vec<usize> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad("label"))?;
            if !membership.is_empty() && labels.len() != membership.len() {
                return Err(bad("draw length"));
            }
            if labels.iter().any(|&l| l >= labels.len()) {
                return Err(bad("label range"));
            }
            chain.draws.push(PartitionLabeling::from_labels(&labels));
        }
        if chain.draws.is_empty() {
            return Err(Error::Invalid(format!("{}: no draws", path.display())));
        }
        Ok((chain, membership))
    }
}

/// Mutable partition state with cluster membership lists.
struct ClusterState {
    /// Cluster id of each record; ids are slots into `members`.
    label: Vec<usize>,
    members: Vec<Vec<usize>>,
    free: Vec<usize>,
}

impl ClusterState {
    fn from_partition(z: &PartitionLabeling) -> Self {
        let r = z.num_records();
        let mut members = vec![Vec::new(); r];
        for (i, &l) in z.labels().iter().enumerate() {
            members[l].push(i);
        }
        let free = (0..r).rev().filter(|&c| members[c].is_empty()).collect();
        ClusterState {
            label: z.labels().to_vec(),
            members,
            free,
        }
    }

    fn remove(&mut self, j: usize) {
        let c = self.label[j];
        let pos = self.members[c].iter().position(|&x| x == j).expect("member");
        self.members[c].swap_remove(pos);
        if self.members[c].is_empty() {
            self.free.push(c);
        }
    }

    fn insert(&mut self, j: usize, c: usize) {
        self.members[c].push(j);
        self.label[j] = c;
    }

    fn fresh(&mut self) -> usize {
        self.free.pop().expect("a free cluster slot always exists")
    }

    fn to_partition(&self) -> PartitionLabeling {
        PartitionLabeling::from_labels(&self.label)
    }
}

/// Sampler state for one chain.
pub struct PartitionSampler<'a> {
    sets: &'a CandidateSets,
    lambda: &'a TruncationPoints,
    index: CandidateIndex,
    state: ClusterState,
    /// Records with at least one candidate neighbor, in index order.
    active: Vec<usize>,
    scratch_sum: Vec<f64>,
    scratch_count: Vec<usize>,
    touched: Vec<usize>,
    pub params: LinkageParams,
}

impl<'a> PartitionSampler<'a> {
    /// Starts from the all-singleton partition.
    pub fn new(sets: &'a CandidateSets, lambda: &'a TruncationPoints) -> Result<Self> {
        Self::from_partition(sets, lambda, PartitionLabeling::singletons(sets.num_records))
    }

    pub fn from_partition(
        sets: &'a CandidateSets,
        lambda: &'a TruncationPoints,
        z: PartitionLabeling,
    ) -> Result<Self> {
        if lambda.lambda.len() != sets.num_fields()
            || lambda
                .lambda
                .iter()
                .zip(&sets.levels_per_field)
                .any(|(l, &n)| l.len() != n as usize)
        {
            return Err(Error::Invalid("truncation points do not match the comparison fields".into()));
        }
        let index = CandidateIndex::new(sets);
        if z.num_records() != sets.num_records || !z.is_feasible(&index) {
            return Err(Error::Invalid("initial partition is not feasible".into()));
        }
        let r = sets.num_records;
        let active = (0..r).filter(|&i| !index.neighbors(i).is_empty()).collect();
        let params = LinkageParams {
            m: lambda.lambda.iter().map(|l| l.iter().map(|&x| 0.5 * (1.0 + x)).collect()).collect(),
            u: lambda.lambda.iter().map(|l| vec![0.5; l.len()]).collect(),
        };
        Ok(PartitionSampler {
            sets,
            lambda,
            index,
            state: ClusterState::from_partition(&z),
            active,
            scratch_sum: vec![0.0; r],
            scratch_count: vec![0; r],
            touched: Vec::new(),
            params,
        })
    }

    pub fn partition(&self) -> PartitionLabeling {
        self.state.to_partition()
    }

    pub fn update_params<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let label = &self.state.label;
        let tallies = StatusTallies::from_indicator(self.sets, |p| {
            let v = &self.sets.candidates[p];
            label[v.i] == label[v.j]
        });
        self.params = draw_params(&tallies, self.lambda, rng);
    }

    /// One sweep of single-record moves under the current parameters.
    pub fn update_labels<R: Rng + ?Sized>(&mut self, random_scan: bool, rng: &mut R) {
        let ratios = LogRatioTable::new(&self.params);
        let pair_llr: Vec<f64> = self
            .sets
            .candidates
            .iter()
            .map(|v| ratios.pair(&v.levels))
            .collect();
        let mut order = self.active.clone();
        if random_scan {
            order.shuffle(rng);
        }
        let mut options: Vec<(usize, f64)> = Vec::new();
        for j in order {
            self.state.remove(j);
            self.touched.clear();
            for &(k, p) in self.index.neighbors(j) {
                let c = self.state.label[k];
                if self.scratch_count[c] == 0 {
                    self.touched.push(c);
                    self.scratch_sum[c] = 0.0;
                }
                self.scratch_count[c] += 1;
                self.scratch_sum[c] += pair_llr[p];
            }
            options.clear();
            // usize::MAX marks the singleton move
            options.push((usize::MAX, 0.0));
            for &c in &self.touched {
                if self.scratch_count[c] == self.state.members[c].len() {
                    options.push((c, self.scratch_sum[c]));
                }
            }
            for &c in &self.touched {
                self.scratch_count[c] = 0;
            }
            let target = pick_log_weighted(&options, rng);
            let c = if target == usize::MAX {
                self.state.fresh()
            } else {
                target
            };
            self.state.insert(j, c);
        }
    }
}

/// Samples an option with probability proportional to `exp(weight)`.
fn pick_log_weighted<R: Rng + ?Sized>(options: &[(usize, f64)], rng: &mut R) -> usize {
    if options.len() == 1 {
        return options[0].0;
    }
    let max = options
        .iter()
        .map(|o| o.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = options.iter().map(|o| (o.1 - max).exp()).sum();
    let mut u = rng.random::<f64>() * total;
    for &(id, w) in options {
        u -= (w - max).exp();
        if u < 0.0 {
            return id;
        }
    }
    options[options.len() - 1].0
}

/// One sweep of label updates from `z` under fixed `params`.
pub fn gibbs_update_labels<R: Rng + ?Sized>(
    z: &PartitionLabeling,
    params: &LinkageParams,
    sets: &CandidateSets,
    lambda: &TruncationPoints,
    rng: &mut R,
) -> Result<PartitionLabeling> {
    let mut s = PartitionSampler::from_partition(sets, lambda, z.clone())?;
    s.params = params.clone();
    s.update_labels(false, rng);
    Ok(s.partition())
}

/// Runs the chain from all singletons, alternating parameter and label
/// updates, and keeps draws after burn-in on the thinning grid.
pub fn run_linkage_sampler(
    sets: &CandidateSets,
    lambda: &TruncationPoints,
    config: &McmcConfig,
) -> Result<LinkageChain> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut sampler = PartitionSampler::new(sets, lambda)?;
    let mut draws = Vec::with_capacity(config.num_saved());
    for t in 1..=config.iterations {
        sampler.update_params(&mut rng);
        sampler.update_labels(config.random_scan, &mut rng);
        if config.keeps(t) {
            draws.push(sampler.partition());
        }
    }
    Ok(LinkageChain {
        draws,
        seed: config.seed,
        burnin: config.burnin,
        thin: config.thin,
        iterations: config.iterations,
    })
}
