//! The comparison-vector likelihood and its parameters.
//!
//! For one field with `L` non-zero levels, coreferent pairs follow a
//! sequential ("continuation ratio") model: `m_l = P(level = l | level >= l)`
//! for `l < L`, so level `l` has probability `m_l ∏_{l'<l} (1 - m_l')` and
//! level `L` has probability `∏_{l'<L} (1 - m_l')`. Non-coreferent pairs use
//! the same form with `u_l`. Missing levels contribute nothing.

use std::path::Path;

use rand::Rng;
use rand_distr::{Beta, Distribution};
use statrs::function::beta::ln_beta;

use crate::compare::{CandidateSets, Level, LevelTallies};
use crate::error::{Error, Result};
use crate::kvconf::{parse_list, KvFile};
use crate::tbeta::{ln_upper_mass, sample_truncated_beta};

use super::partition::PartitionLabeling;

/// Prior truncation points `λ_fl`: `m_fl ~ Uniform[λ_fl, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationPoints {
    pub lambda: Vec<Vec<f64>>,
}

impl TruncationPoints {
    /// No truncation: `m_fl ~ Uniform(0, 1)`.
    pub fn flat(levels_per_field: &[u8]) -> Self {
        TruncationPoints {
            lambda: levels_per_field.iter().map(|&l| vec![0.0; l as usize]).collect(),
        }
    }

    pub fn new(lambda: Vec<Vec<f64>>, levels_per_field: &[u8]) -> Result<Self> {
        if lambda.len() != levels_per_field.len() {
            return Err(Error::Invalid(format!(
                "truncation points for {} fields, expected {}",
                lambda.len(),
                levels_per_field.len()
            )));
        }
        for (f, (row, &l)) in lambda.iter().zip(levels_per_field).enumerate() {
            if row.len() != l as usize {
                return Err(Error::Invalid(format!(
                    "field {f}: {} truncation points, expected {l}",
                    row.len()
                )));
            }
            if row.iter().any(|&x| !(0.0..1.0).contains(&x)) {
                return Err(Error::Invalid(format!("field {f}: truncation points must lie in [0, 1)")));
            }
        }
        Ok(TruncationPoints { lambda })
    }

    /// Priors file, one line per comparison field (Table-2 layout):
    ///
    /// ```text
    /// given = 0.95 0.99 0.99
    /// place = 0.80
    /// ```
    ///
    /// Fields that are not listed get no truncation.
    pub fn parse(text: &str, field_names: &[String], levels_per_field: &[u8]) -> Result<Self> {
        let kv = KvFile::parse(text)?;
        let mut lambda: Vec<Vec<f64>> =
            levels_per_field.iter().map(|&l| vec![0.0; l as usize]).collect();
        for section in &kv.sections {
            for (key, value) in &section.entries {
                let f = field_names
                    .iter()
                    .position(|n| n == key)
                    .ok_or_else(|| Error::Parse(format!("priors name unknown field `{key}`")))?;
                lambda[f] = parse_list(value)?;
            }
        }
        Self::new(lambda, levels_per_field)
    }

    pub fn read(path: &Path, field_names: &[String], levels_per_field: &[u8]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, field_names, levels_per_field)
    }
}

/// `m_fl` and `u_fl` for every field and level `l < L_f`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkageParams {
    pub m: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
}

/// `ln P(level)` for one field under conditional probabilities `probs`.
pub fn log_level_prob(level: u8, probs: &[f64]) -> f64 {
    let l = level as usize;
    let survive: f64 = probs[..l.min(probs.len())]
        .iter()
        .map(|&p| (-p).ln_1p())
        .sum();
    if l < probs.len() {
        survive + probs[l].ln()
    } else {
        survive
    }
}

fn log_lik(levels: &[Level], params: &[Vec<f64>]) -> f64 {
    levels
        .iter()
        .zip(params)
        .filter_map(|(l, p)| l.map(|l| log_level_prob(l, p)))
        .sum()
}

/// `ln P₁(γ)`: a comparison vector under the coreferent distribution.
pub fn log_lik_pair_coref(levels: &[Level], params: &LinkageParams) -> f64 {
    log_lik(levels, &params.m)
}

/// `ln P₀(γ)`: a comparison vector under the non-coreferent distribution.
pub fn log_lik_pair_noncoref(levels: &[Level], params: &LinkageParams) -> f64 {
    log_lik(levels, &params.u)
}

/// Tabulated `ln P₁(level) - ln P₀(level)` per field and level.
#[derive(Debug, Clone)]
pub struct LogRatioTable {
    table: Vec<Vec<f64>>,
}

impl LogRatioTable {
    pub fn new(params: &LinkageParams) -> Self {
        let table = params
            .m
            .iter()
            .zip(&params.u)
            .map(|(m, u)| {
                (0..=m.len() as u8)
                    .map(|l| log_level_prob(l, m) - log_level_prob(l, u))
                    .collect()
            })
            .collect();
        LogRatioTable { table }
    }

    pub fn pair(&self, levels: &[Level]) -> f64 {
        levels
            .iter()
            .zip(&self.table)
            .filter_map(|(l, t)| l.map(|l| t[l as usize]))
            .sum()
    }
}

/// Level tallies split by pair status under a given coreference pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatusTallies {
    pub coref: LevelTallies,
    pub noncoref: LevelTallies,
}

impl StatusTallies {
    /// Candidate pairs are split by `linked(pair id)`; fixed pairs are always
    /// non-coreferent.
    pub fn from_indicator(sets: &CandidateSets, linked: impl Fn(usize) -> bool) -> Self {
        let mut coref = LevelTallies::zeros(&sets.levels_per_field);
        let mut noncoref = sets.fixed.clone();
        for (p, v) in sets.candidates.iter().enumerate() {
            if linked(p) {
                coref.add(&v.levels);
            } else {
                noncoref.add(&v.levels);
            }
        }
        StatusTallies { coref, noncoref }
    }

    pub fn from_partition(sets: &CandidateSets, z: &PartitionLabeling) -> Self {
        Self::from_indicator(sets, |p| {
            let v = &sets.candidates[p];
            z.same_cluster(v.i, v.j)
        })
    }
}

/// `(a_l, b_l)`: counts at level `l` and strictly above it.
fn continuation_counts(counts: &[u64]) -> Vec<(f64, f64)> {
    let total: u64 = counts.iter().sum();
    let mut below = 0u64;
    (0..counts.len() - 1)
        .map(|l| {
            let at = counts[l];
            below += at;
            (at as f64, (total - below) as f64)
        })
        .collect()
}

/// Draws `m` from its truncated-Beta full conditional and `u` from its Beta
/// full conditional.
pub fn draw_params<R: Rng + ?Sized>(
    tallies: &StatusTallies,
    lambda: &TruncationPoints,
    rng: &mut R,
) -> LinkageParams {
    let m = tallies
        .coref
        .counts
        .iter()
        .zip(&lambda.lambda)
        .map(|(counts, lam)| {
            continuation_counts(counts)
                .into_iter()
                .zip(lam)
                .map(|((a, b), &l)| sample_truncated_beta(1.0 + a, 1.0 + b, l, rng))
                .collect()
        })
        .collect();
    let u = tallies
        .noncoref
        .counts
        .iter()
        .map(|counts| {
            continuation_counts(counts)
                .into_iter()
                .map(|(a, b)| {
                    let x: f64 = Beta::new(1.0 + a, 1.0 + b)
                        .expect("positive shapes")
                        .sample(rng);
                    x.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
                })
                .collect()
        })
        .collect();
    LinkageParams { m, u }
}

/// One parameter update given the current partition.
pub fn gibbs_update_params<R: Rng + ?Sized>(
    z: &PartitionLabeling,
    sets: &CandidateSets,
    lambda: &TruncationPoints,
    rng: &mut R,
) -> LinkageParams {
    draw_params(&StatusTallies::from_partition(sets, z), lambda, rng)
}

/// Log marginal likelihood of the comparison data with `m` and `u`
/// integrated against their priors.
pub fn log_marginal_likelihood(tallies: &StatusTallies, lambda: &TruncationPoints) -> f64 {
    let mut total = 0.0;
    for (counts, lam) in tallies.coref.counts.iter().zip(&lambda.lambda) {
        for ((a, b), &l) in continuation_counts(counts).into_iter().zip(lam) {
            // ∫_λ^1 m^a (1-m)^b dm / (1 - λ)
            total += ln_beta(a + 1.0, b + 1.0) + ln_upper_mass(a + 1.0, b + 1.0, l) - (-l).ln_1p();
        }
    }
    for counts in &tallies.noncoref.counts {
        for (a, b) in continuation_counts(counts) {
            total += ln_beta(a + 1.0, b + 1.0);
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn level_probabilities() {
        let m = [0.9, 0.8];
        assert!((log_level_prob(1, &m) - (0.1f64 * 0.8).ln()).abs() < 1e-15);
        assert!((log_level_prob(0, &m) - 0.9f64.ln()).abs() < 1e-15);
        assert!((log_level_prob(2, &m) - (0.1f64 * 0.2).ln()).abs() < 1e-15);
        let params = LinkageParams { m: vec![m.to_vec()], u: vec![vec![0.5, 0.5]] };
        assert_eq!(log_lik_pair_coref(&[None], &params), 0.0);
    }

    #[test]
    fn two_field_expansion() {
        let params = LinkageParams {
            m: vec![vec![0.9, 0.7, 0.6], vec![0.95]],
            u: vec![vec![0.1, 0.2, 0.3], vec![0.4]],
        };
        // term-by-term expansion of the product over fields and levels
        let expand = |g: &[u8], p: &[Vec<f64>]| -> f64 {
            let mut prod = 1.0;
            for (f, &gf) in g.iter().enumerate() {
                for (l, &pl) in p[f].iter().enumerate() {
                    if gf as usize == l {
                        prod *= pl;
                    } else if gf as usize > l {
                        prod *= 1.0 - pl;
                    }
                }
            }
            prod.ln()
        };
        for g0 in 0..=3u8 {
            for g1 in 0..=1u8 {
                let lv = [Some(g0), Some(g1)];
                assert!((log_lik_pair_coref(&lv, &params) - expand(&[g0, g1], &params.m)).abs() < 1e-12);
                assert!((log_lik_pair_noncoref(&lv, &params) - expand(&[g0, g1], &params.u)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn continuation_counts_example() {
        assert_eq!(continuation_counts(&[3, 2, 1, 4]), vec![(3.0, 7.0), (2.0, 5.0), (1.0, 4.0)]);
    }

    #[test]
    fn priors_file() {
        let names = vec!["given".to_string(), "place".to_string()];
        let t = TruncationPoints::parse("given = 0.95 0.99 0.99\nplace = 0.8\n", &names, &[3, 1]).unwrap();
        assert_eq!(t.lambda, vec![vec![0.95, 0.99, 0.99], vec![0.8]]);
        assert!(TruncationPoints::parse("given = 0.9\n", &names, &[3, 1]).is_err());
        assert!(TruncationPoints::parse("other = 0.9\n", &names, &[3, 1]).is_err());
        assert!(TruncationPoints::parse("place = 1.0\n", &names, &[3, 1]).is_err());
        let partial = TruncationPoints::parse("place = 0.5\n", &names, &[3, 1]).unwrap();
        assert_eq!(partial.lambda[0], vec![0.0; 3]);
    }

    proptest! {
        #[test]
        fn level_probs_sum_to_one(probs in proptest::collection::vec(0.001f64..0.999, 1..5)) {
            let total: f64 = (0..=probs.len() as u8).map(|l| log_level_prob(l, &probs).exp()).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
