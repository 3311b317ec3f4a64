//! Population size under decomposable graphical models with hyper-Dirichlet
//! priors on the cell probabilities, and Bayesian model averaging over the
//! non-saturated decomposable models.
//!
//! Node sets (cliques, separators) are bitmasks over lists, bit `k - 1` for
//! list `k`, matching [`ContingencyTable`] patterns.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::histories::ContingencyTable;
use crate::unionfind::UnionFind;

pub const DEFAULT_N_MAX: u64 = 30_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecomposableModel {
    pub k: usize,
    pub cliques: Vec<u32>,
    /// Non-empty separators of a junction forest, with multiplicity.
    pub separators: Vec<u32>,
    /// Connected components of the independence graph.
    pub q: usize,
}

fn mask_nodes(mask: u32) -> Vec<usize> {
    (0..32).filter(|b| mask >> b & 1 == 1).map(|b| b + 1).collect()
}

fn is_chordal(k: usize, adj: &[u32]) -> bool {
    // repeatedly eliminate a simplicial vertex
    let mut alive: u32 = (1 << k) - 1;
    while alive != 0 {
        let simplicial = (0..k).filter(|&v| alive >> v & 1 == 1).find(|&v| {
            let nb = adj[v] & alive & !(1 << v);
            (0..k)
                .filter(|&w| nb >> w & 1 == 1)
                .all(|w| nb & !(1 << w) & !adj[w] == 0)
        });
        match simplicial {
            Some(v) => alive &= !(1 << v),
            None => return false,
        }
    }
    true
}

impl DecomposableModel {
    /// Builds a model from its maximal cliques, deriving separators from a
    /// running-intersection ordering and checking chordality.
    pub fn from_cliques(k: usize, cliques: &[u32]) -> Result<Self> {
        if k < 1 || k > 16 {
            return Err(Error::UnsupportedK(k));
        }
        let all = (1u32 << k) - 1;
        let bad = |msg: &str| Err(Error::Invalid(format!("cliques {cliques:?}: {msg}")));
        if cliques.is_empty() || cliques.iter().any(|&c| c == 0 || c & !all != 0) {
            return bad("cliques must be non-empty subsets of the lists");
        }
        if cliques.iter().fold(0, |u, &c| u | c) != all {
            return bad("cliques do not cover every list");
        }
        for (a, &ca) in cliques.iter().enumerate() {
            for (b, &cb) in cliques.iter().enumerate() {
                if a != b && ca & cb == ca {
                    return bad("cliques must be maximal and distinct");
                }
            }
        }
        let mut adj = vec![0u32; k];
        for &c in cliques {
            for v in mask_nodes(c) {
                adj[v - 1] |= c;
            }
        }
        if !is_chordal(k, &adj) {
            return bad("independence graph is not chordal");
        }
        // every clique must be maximal in the graph too
        for &c in cliques {
            let common = mask_nodes(c).iter().fold(all, |m, &v| m & adj[v - 1]);
            if common != c {
                return bad("a listed clique is not maximal in its graph");
            }
        }
        // running-intersection ordering by greedy maximum overlap
        let mut order = vec![0usize];
        let mut covered = cliques[0];
        let mut separators = Vec::new();
        while order.len() < cliques.len() {
            let next = (0..cliques.len())
                .filter(|i| !order.contains(i))
                .max_by_key(|&i| ((cliques[i] & covered).count_ones(), std::cmp::Reverse(i)))
                .unwrap();
            let sep = cliques[next] & covered;
            if !order.iter().any(|&j| cliques[j] & sep == sep) {
                return bad("no running-intersection ordering");
            }
            if sep != 0 {
                separators.push(sep);
            }
            covered |= cliques[next];
            order.push(next);
        }
        let mut uf = UnionFind::new(k);
        for &c in cliques {
            let nodes = mask_nodes(c);
            for w in &nodes[1..] {
                uf.union(nodes[0] - 1, w - 1);
            }
        }
        let q = {
            let labels = uf.min_labels();
            (0..k).filter(|&v| labels[v] == v).count()
        };
        let mut sorted = cliques.to_vec();
        sorted.sort_by_key(|&c| mask_nodes(c));
        Ok(DecomposableModel {
            k,
            cliques: sorted,
            separators,
            q,
        })
    }

    /// Parses names like `[1,2][3]`.
    pub fn parse(name: &str, k: usize) -> Result<Self> {
        let s = name.trim();
        let mut cliques = Vec::new();
        let mut rest = s;
        while !rest.is_empty() {
            let body = rest
                .strip_prefix('[')
                .and_then(|r| r.split_once(']'))
                .ok_or_else(|| Error::Parse(format!("bad model name `{name}`")))?;
            let mut mask = 0u32;
            for tok in body.0.split(',') {
                let v: usize = tok
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad model name `{name}`")))?;
                if v < 1 || v > k {
                    return Err(Error::Parse(format!("model `{name}` names list {v} but K = {k}")));
                }
                mask |= 1 << (v - 1);
            }
            cliques.push(mask);
            rest = body.1.trim_start();
        }
        Self::from_cliques(k, &cliques)
    }

    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for DecomposableModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &c in &self.cliques {
            let nodes: Vec<String> = mask_nodes(c).iter().map(|v| v.to_string()).collect();
            write!(f, "[{}]", nodes.join(","))?;
        }
        Ok(())
    }
}

/// The non-saturated decomposable models for `K` lists.
pub fn enumerate_decomposable(k: usize) -> Result<Vec<DecomposableModel>> {
    let names: &[&str] = match k {
        2 => &["[1][2]"],
        3 => &[
            "[1][2][3]",
            "[1,2][3]",
            "[1,3][2]",
            "[1][2,3]",
            "[1,2][1,3]",
            "[1,2][2,3]",
            "[1,3][2,3]",
        ],
        _ => return Err(Error::UnsupportedK(k)),
    };
    names.iter().map(|n| DecomposableModel::parse(n, k)).collect()
}

/// Hyper-Dirichlet prior counts `α_h`, dense over all `2^K` patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorCounts {
    pub alpha: Vec<f64>,
}

impl PriorCounts {
    pub fn constant(k: usize, a: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::Invalid(format!("prior count must be positive, got {a}")));
        }
        Ok(PriorCounts {
            alpha: vec![a; 1 << k],
        })
    }
}

/// Sums of `cells` over the patterns that agree on `mask`.
fn marginal(cells: &[f64], mask: u32) -> Vec<(u32, f64)> {
    let mut out: Vec<(u32, f64)> = Vec::new();
    let mut idx = vec![usize::MAX; cells.len()];
    for (h, &x) in cells.iter().enumerate() {
        let a = h as u32 & mask;
        if idx[a as usize] == usize::MAX {
            idx[a as usize] = out.len();
            out.push((a, 0.0));
        }
        out[idx[a as usize]].1 += x;
    }
    out
}

/// `ln Ψ_m(α)` for dense cell values over `{0,1}^K`.
pub fn log_psi(model: &DecomposableModel, cells: &[f64]) -> f64 {
    let total: f64 = cells.iter().sum();
    let mut s = -(model.q as f64) * ln_gamma(total);
    for &c in &model.cliques {
        s += marginal(cells, c).iter().map(|&(_, x)| ln_gamma(x)).sum::<f64>();
    }
    for &sep in &model.separators {
        s -= marginal(cells, sep).iter().map(|&(_, x)| ln_gamma(x)).sum::<f64>();
    }
    s
}

fn check_dims(table: &ContingencyTable, model: &DecomposableModel, alpha: &PriorCounts) -> Result<()> {
    if table.k() != model.k || alpha.alpha.len() != 1 << model.k {
        return Err(Error::Invalid(format!(
            "table has {} lists, model {} lists, prior {} cells",
            table.k(),
            model.k,
            alpha.alpha.len()
        )));
    }
    Ok(())
}

/// `ln P(n | N, m)` with the cell probabilities integrated against the
/// hyper-Dirichlet prior.
pub fn log_prob_n_given_nm(
    table: &ContingencyTable,
    n: u64,
    model: &DecomposableModel,
    alpha: &PriorCounts,
) -> Result<f64> {
    check_dims(table, model, alpha)?;
    let n_obs = table.n_obs();
    if n < n_obs {
        return Err(Error::Invalid(format!("N = {n} is below the {n_obs} observed individuals")));
    }
    let mut counts = table.dense();
    counts[0] = n - n_obs;
    let mut s = ln_gamma(n as f64 + 1.0);
    s -= counts.iter().map(|&c| ln_gamma(c as f64 + 1.0)).sum::<f64>();
    let post: Vec<f64> = alpha.alpha.iter().zip(&counts).map(|(a, &c)| a + c as f64).collect();
    Ok(s + log_psi(model, &post) - log_psi(model, &alpha.alpha))
}

/// `ln P(n | N, m)` as `constant + Σ coef · lnΓ(offset + n₀)`, so a whole
/// grid over `N` costs a handful of log-gamma calls per point.
struct GridTerms {
    constant: f64,
    varying: Vec<(f64, f64)>,
}

impl GridTerms {
    fn new(table: &ContingencyTable, model: &DecomposableModel, alpha: &PriorCounts) -> Self {
        let counts = table.dense();
        let n_obs = table.n_obs() as f64;
        let post: Vec<f64> = alpha.alpha.iter().zip(&counts).map(|(a, &c)| a + c as f64).collect();
        let mut constant = -counts[1..].iter().map(|&c| ln_gamma(c as f64 + 1.0)).sum::<f64>()
            - log_psi(model, &alpha.alpha);
        let mut varying = vec![(1.0, n_obs + 1.0), (-1.0, 1.0)];
        let total: f64 = post.iter().sum();
        varying.push((-(model.q as f64), total));
        for (&mask, sign) in model
            .cliques
            .iter()
            .map(|c| (c, 1.0))
            .chain(model.separators.iter().map(|s| (s, -1.0)))
        {
            for (a, x) in marginal(&post, mask) {
                if a == 0 {
                    varying.push((sign, x));
                } else {
                    constant += sign * ln_gamma(x);
                }
            }
        }
        GridTerms { constant, varying }
    }

    fn eval(&self, n0: u64) -> f64 {
        let n0 = n0 as f64;
        self.constant
            + self
                .varying
                .iter()
                .map(|&(c, off)| c * ln_gamma(off + n0))
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SizePriorKind {
    /// `p(N) ∝ 1/N`
    Reciprocal,
    Uniform,
}

impl std::str::FromStr for SizePriorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reciprocal" => Ok(SizePriorKind::Reciprocal),
            "uniform" => Ok(SizePriorKind::Uniform),
            _ => Err(Error::Parse(format!("unknown size prior `{s}`"))),
        }
    }
}

/// Prior on `N`, truncated to `[n_obs, n_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SizePrior {
    pub kind: SizePriorKind,
    pub n_max: u64,
}

impl Default for SizePrior {
    fn default() -> Self {
        SizePrior {
            kind: SizePriorKind::Reciprocal,
            n_max: DEFAULT_N_MAX,
        }
    }
}

impl SizePrior {
    /// Unnormalized `ln p(N)`.
    pub fn ln_density(&self, n: u64) -> f64 {
        match self.kind {
            SizePriorKind::Reciprocal => -(n as f64).ln(),
            SizePriorKind::Uniform => 0.0,
        }
    }

    /// First grid point for a table with `n_obs` observed individuals.
    fn start(&self, n_obs: u64) -> u64 {
        match self.kind {
            SizePriorKind::Reciprocal => n_obs.max(1),
            SizePriorKind::Uniform => n_obs,
        }
    }
}

/// A posterior pmf for `N` on the grid `start, start + 1, …`.
#[derive(Debug, Clone, PartialEq)]
pub struct SizePosterior {
    pub start: u64,
    pub probs: Vec<f64>,
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

impl SizePosterior {
    /// Normalizes log weights; fails when all are `-inf`.
    pub fn from_log_weights(start: u64, logs: &[f64]) -> Result<(Self, f64)> {
        let z = log_sum_exp(logs);
        if !z.is_finite() {
            return Err(Error::ZeroMass);
        }
        let probs = logs.iter().map(|l| (l - z).exp()).collect();
        Ok((SizePosterior { start, probs }, z))
    }

    pub fn point_mass(n: u64) -> Self {
        SizePosterior {
            start: n,
            probs: vec![1.0],
        }
    }

    /// Empirical pmf of a set of draws.
    pub fn from_draws(draws: &[u64]) -> Result<Self> {
        let (&lo, &hi) = match (draws.iter().min(), draws.iter().max()) {
            (Some(lo), Some(hi)) => (lo, hi),
            _ => return Err(Error::ZeroMass),
        };
        let mut probs = vec![0.0; (hi - lo + 1) as usize];
        let w = 1.0 / draws.len() as f64;
        for &d in draws {
            probs[(d - lo) as usize] += w;
        }
        Ok(SizePosterior { start: lo, probs })
    }

    pub fn end(&self) -> u64 {
        self.start + self.probs.len() as u64 - 1
    }

    pub fn prob(&self, n: u64) -> f64 {
        if n < self.start {
            return 0.0;
        }
        self.probs.get((n - self.start) as usize).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.probs.iter().enumerate().map(move |(i, &p)| (self.start + i as u64, p))
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.iter().map(|(n, p)| (n as f64 - m).powi(2) * p).sum()
    }

    pub fn mode(&self) -> u64 {
        let mut best = (self.start, f64::NEG_INFINITY);
        for (n, p) in self.iter() {
            if p > best.1 {
                best = (n, p);
            }
        }
        best.0
    }

    /// Smallest `N` whose cumulative probability reaches `q`.
    pub fn quantile(&self, q: f64) -> u64 {
        let mut acc = 0.0;
        for (n, p) in self.iter() {
            acc += p;
            if acc >= q - 1e-12 {
                return n;
            }
        }
        self.end()
    }

    /// Equal-tailed credible interval.
    pub fn interval(&self, level: f64) -> (u64, u64) {
        let tail = 0.5 * (1.0 - level);
        (self.quantile(tail), self.quantile(1.0 - tail))
    }

    /// Mixture `Σ w_i p_i` on the union of the grids.
    pub fn mixture(parts: &[(&SizePosterior, f64)]) -> Result<Self> {
        let start = parts.iter().map(|p| p.0.start).min().ok_or(Error::ZeroMass)?;
        let end = parts.iter().map(|p| p.0.end()).max().unwrap();
        let mut probs = vec![0.0; (end - start + 1) as usize];
        for &(post, w) in parts {
            let off = (post.start - start) as usize;
            for (i, &p) in post.probs.iter().enumerate() {
                probs[off + i] += w * p;
            }
        }
        Ok(SizePosterior { start, probs })
    }
}

/// Log evidence `ln Σ_N P(n | N, m) p(N)` alongside `p(N | n, m)`.
pub fn posterior_n_given_m_with_evidence(
    table: &ContingencyTable,
    model: &DecomposableModel,
    alpha: &PriorCounts,
    prior: &SizePrior,
) -> Result<(SizePosterior, f64)> {
    check_dims(table, model, alpha)?;
    let n_obs = table.n_obs();
    if prior.n_max < n_obs {
        return Err(Error::Invalid(format!(
            "N_max = {} is below the {n_obs} observed individuals",
            prior.n_max
        )));
    }
    let start = prior.start(n_obs);
    if start > prior.n_max {
        return Err(Error::ZeroMass);
    }
    let terms = GridTerms::new(table, model, alpha);
    let logs: Vec<f64> = (start..=prior.n_max)
        .map(|n| terms.eval(n - n_obs) + prior.ln_density(n))
        .collect();
    // normalize the prior so evidences compare across models
    let prior_z = log_sum_exp(
        &(start..=prior.n_max)
            .map(|n| prior.ln_density(n))
            .collect::<Vec<_>>(),
    );
    let (post, z) = SizePosterior::from_log_weights(start, &logs)?;
    Ok((post, z - prior_z))
}

pub fn posterior_n_given_m(
    table: &ContingencyTable,
    model: &DecomposableModel,
    alpha: &PriorCounts,
    prior: &SizePrior,
) -> Result<SizePosterior> {
    posterior_n_given_m_with_evidence(table, model, alpha, prior).map(|r| r.0)
}

/// `p(m | n)` under a uniform prior over `models`.
pub fn model_posterior(
    table: &ContingencyTable,
    models: &[DecomposableModel],
    alpha: &PriorCounts,
    prior: &SizePrior,
) -> Result<Vec<f64>> {
    Ok(bma_posterior_over(table, models, alpha, prior)?.weights)
}

/// Model-averaged posterior with its per-model layers.
#[derive(Debug, Clone, PartialEq)]
pub struct BmaPosterior {
    pub models: Vec<String>,
    pub weights: Vec<f64>,
    pub log_evidence: Vec<f64>,
    pub per_model: Vec<SizePosterior>,
    pub mixture: SizePosterior,
}

pub fn bma_posterior_over(
    table: &ContingencyTable,
    models: &[DecomposableModel],
    alpha: &PriorCounts,
    prior: &SizePrior,
) -> Result<BmaPosterior> {
    if models.is_empty() {
        return Err(Error::Invalid("no models to average".into()));
    }
    let fits: Vec<(SizePosterior, f64)> = models
        .par_iter()
        .map(|m| posterior_n_given_m_with_evidence(table, m, alpha, prior))
        .collect::<Result<_>>()?;
    let log_evidence: Vec<f64> = fits.iter().map(|f| f.1).collect();
    let z = log_sum_exp(&log_evidence);
    let weights: Vec<f64> = log_evidence.iter().map(|e| (e - z).exp()).collect();
    let per_model: Vec<SizePosterior> = fits.into_iter().map(|f| f.0).collect();
    let mixture = SizePosterior::mixture(
        &per_model.iter().zip(&weights).map(|(p, &w)| (p, w)).collect::<Vec<_>>(),
    )?;
    Ok(BmaPosterior {
        models: models.iter().map(|m| m.name()).collect(),
        weights,
        log_evidence,
        per_model,
        mixture,
    })
}

/// Averages over every non-saturated decomposable model for the table's `K`.
pub fn bma_posterior(
    table: &ContingencyTable,
    alpha: &PriorCounts,
    prior: &SizePrior,
) -> Result<BmaPosterior> {
    bma_posterior_over(table, &enumerate_decomposable(table.k())?, alpha, prior)
}
