//! Linkage-averaging: mixing the population-size posterior of each partition
//! draw into one posterior for `N`, with variance decompositions that
//! attribute the spread to linkage, model choice, and what remains.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::compare::CandidateSets;
use crate::error::{Error, Result};
use crate::histories::{capture_histories, ContingencyTable};
use crate::linkage::{exact_posterior_enumeration, PartitionLabeling, TruncationPoints};
use crate::mse_graphical::{
    bma_posterior, posterior_n_given_m, DecomposableModel, PriorCounts, SizePosterior, SizePrior,
};
use crate::mse_lcmcr::{run_lcmcr, LcmcrConfig};

/// Two-term split `Var(N) = Var_t[E(N|Z)] + E_t[Var(N|Z)]`, divisor `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decomposition {
    pub total: f64,
    pub linkage: f64,
    pub residual: f64,
    pub linkage_share: f64,
    pub residual_share: f64,
}

/// Three-term split adding the between-model term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelDecomposition {
    pub total: f64,
    pub linkage: f64,
    pub model: f64,
    pub residual: f64,
    pub linkage_share: f64,
    pub model_share: f64,
    pub residual_share: f64,
}

/// Per-model conditional layer of one draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelLayer {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AveragedPosterior {
    pub pooled: SizePosterior,
    pub cond_means: Vec<f64>,
    pub cond_vars: Vec<f64>,
    /// `E(N|Z,m)`, `Var(N|Z,m)`, `p(m|n(Z))` per draw, when models were
    /// averaged.
    pub layers: Option<Vec<Vec<ModelLayer>>>,
    pub decomposition: Decomposition,
    pub model_decomposition: Option<ModelDecomposition>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn share(part: f64, total: f64) -> f64 {
    if total > 0.0 {
        part / total
    } else {
        0.0
    }
}

pub fn variance_decomposition(cond_means: &[f64], cond_vars: &[f64]) -> Result<Decomposition> {
    if cond_means.is_empty() || cond_means.len() != cond_vars.len() {
        return Err(Error::Invalid("need matching, non-empty conditional moments".into()));
    }
    let mu = mean(cond_means);
    let linkage = cond_means.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / cond_means.len() as f64;
    let residual = mean(cond_vars);
    let total = linkage + residual;
    Ok(Decomposition {
        total,
        linkage,
        residual,
        linkage_share: share(linkage, total),
        residual_share: if total > 0.0 { residual / total } else { 1.0 },
    })
}

pub fn variance_decomposition_model(layers: &[Vec<ModelLayer>]) -> Result<ModelDecomposition> {
    if layers.is_empty() || layers.iter().any(|l| l.is_empty()) {
        return Err(Error::Invalid("need at least one model layer per draw".into()));
    }
    for l in layers {
        let w: f64 = l.iter().map(|x| x.weight).sum();
        if (w - 1.0).abs() > 1e-8 {
            return Err(Error::Invalid(format!("model weights sum to {w}, not 1")));
        }
    }
    let per_draw: Vec<(f64, f64, f64)> = layers
        .iter()
        .map(|l| {
            let e: f64 = l.iter().map(|x| x.weight * x.mean).sum();
            let between: f64 = l.iter().map(|x| x.weight * (x.mean - e).powi(2)).sum();
            let within: f64 = l.iter().map(|x| x.weight * x.variance).sum();
            (e, between, within)
        })
        .collect();
    let means: Vec<f64> = per_draw.iter().map(|x| x.0).collect();
    let mu = mean(&means);
    let linkage = means.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / means.len() as f64;
    let model = mean(&per_draw.iter().map(|x| x.1).collect::<Vec<_>>());
    let residual = mean(&per_draw.iter().map(|x| x.2).collect::<Vec<_>>());
    let total = linkage + model + residual;
    Ok(ModelDecomposition {
        total,
        linkage,
        model,
        residual,
        linkage_share: share(linkage, total),
        model_share: share(model, total),
        residual_share: if total > 0.0 { residual / total } else { 1.0 },
    })
}

/// `p_LA(N) = (1/d) Σ_t p(N | n(Z^(t)))`.
pub fn average_closed_form(posteriors: &[SizePosterior]) -> Result<AveragedPosterior> {
    if posteriors.is_empty() {
        return Err(Error::Invalid("no posteriors to average".into()));
    }
    let w = 1.0 / posteriors.len() as f64;
    let pooled = SizePosterior::mixture(&posteriors.iter().map(|p| (p, w)).collect::<Vec<_>>())?;
    let cond_means: Vec<f64> = posteriors.iter().map(|p| p.mean()).collect();
    let cond_vars: Vec<f64> = posteriors.iter().map(|p| p.variance()).collect();
    let decomposition = variance_decomposition(&cond_means, &cond_vars)?;
    Ok(AveragedPosterior {
        pooled,
        cond_means,
        cond_vars,
        layers: None,
        decomposition,
        model_decomposition: None,
    })
}

/// Pools draw sets, one per partition draw, each carrying weight `1/d`
/// whatever its size.
pub fn average_draws(draw_sets: &[Vec<u64>]) -> Result<AveragedPosterior> {
    if draw_sets.is_empty() || draw_sets.iter().any(|s| s.is_empty()) {
        return Err(Error::Invalid("every partition draw needs at least one N draw".into()));
    }
    let per: Vec<SizePosterior> = draw_sets
        .iter()
        .map(|s| SizePosterior::from_draws(s))
        .collect::<Result<_>>()?;
    average_closed_form(&per)
}

/// Closed-form averaging of model-averaged posteriors, keeping the model
/// layers for the three-term decomposition.
pub fn average_with_models(
    posteriors: &[SizePosterior],
    layers: Vec<Vec<ModelLayer>>,
) -> Result<AveragedPosterior> {
    let mut avg = average_closed_form(posteriors)?;
    avg.model_decomposition = Some(variance_decomposition_model(&layers)?);
    avg.layers = Some(layers);
    Ok(avg)
}

/// Population-size method applied to each partition draw's table.
#[derive(Debug, Clone, PartialEq)]
pub enum MseMethod {
    Bma { alpha: f64, prior: SizePrior },
    Model { model: DecomposableModel, alpha: f64, prior: SizePrior },
    Lcmcr(LcmcrConfig),
}

/// The size posterior of one table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableFit {
    pub posterior: SizePosterior,
    pub layers: Option<Vec<ModelLayer>>,
    pub model_names: Option<Vec<String>>,
    pub warnings: Vec<String>,
}

pub fn fit_table(table: &ContingencyTable, method: &MseMethod) -> Result<TableFit> {
    match method {
        MseMethod::Bma { alpha, prior } => {
            let a = PriorCounts::constant(table.k(), *alpha)?;
            let b = bma_posterior(table, &a, prior)?;
            let layers = b
                .per_model
                .iter()
                .zip(&b.weights)
                .map(|(p, &w)| ModelLayer {
                    weight: w,
                    mean: p.mean(),
                    variance: p.variance(),
                })
                .collect();
            Ok(TableFit {
                posterior: b.mixture,
                layers: Some(layers),
                model_names: Some(b.models),
                warnings: Vec::new(),
            })
        }
        MseMethod::Model { model, alpha, prior } => {
            let a = PriorCounts::constant(table.k(), *alpha)?;
            Ok(TableFit {
                posterior: posterior_n_given_m(table, model, &a, prior)?,
                layers: None,
                model_names: None,
                warnings: Vec::new(),
            })
        }
        MseMethod::Lcmcr(cfg) => {
            let run = run_lcmcr(table, cfg)?;
            Ok(TableFit {
                posterior: run.posterior,
                layers: None,
                model_names: None,
                warnings: run.warnings,
            })
        }
    }
}

/// Builds each draw's table (restricted to `lists`, 1-based), fits it once
/// per distinct table, and averages.
pub struct LinkageAverage {
    pub tables: Vec<ContingencyTable>,
    pub fits: Vec<TableFit>,
    pub averaged: AveragedPosterior,
}

/// The table of each draw, restricted to `lists` (1-based).
pub fn draw_tables(
    draws: &[PartitionLabeling],
    membership: &[usize],
    k: usize,
    lists: &[usize],
) -> Result<Vec<ContingencyTable>> {
    draws
        .iter()
        .map(|z| capture_histories(z, membership, k)?.marginalize(lists))
        .collect()
}

/// Fits each distinct table once, in parallel, and returns one fit per
/// input table.
pub fn fit_tables(tables: &[ContingencyTable], method: &MseMethod) -> Result<Vec<TableFit>> {
    let distinct: Vec<&ContingencyTable> = {
        let mut seen: BTreeMap<&ContingencyTable, ()> = BTreeMap::new();
        for t in tables {
            seen.insert(t, ());
        }
        seen.into_keys().collect()
    };
    let fitted: Vec<TableFit> = distinct
        .par_iter()
        .map(|t| fit_table(t, method))
        .collect::<Result<_>>()?;
    let by_table: BTreeMap<&ContingencyTable, &TableFit> = distinct.into_iter().zip(&fitted).collect();
    Ok(tables.iter().map(|t| by_table[t].clone()).collect())
}

/// Averages per-draw fits; model layers, when present on every fit, add the
/// three-term decomposition.
pub fn average_fits(fits: &[TableFit]) -> Result<AveragedPosterior> {
    let posteriors: Vec<SizePosterior> = fits.iter().map(|f| f.posterior.clone()).collect();
    match fits.iter().map(|f| f.layers.clone()).collect::<Option<Vec<_>>>() {
        Some(layers) if !layers.is_empty() => average_with_models(&posteriors, layers),
        _ => average_closed_form(&posteriors),
    }
}

pub fn linkage_average(
    draws: &[PartitionLabeling],
    membership: &[usize],
    k: usize,
    lists: &[usize],
    method: &MseMethod,
) -> Result<LinkageAverage> {
    let tables = draw_tables(draws, membership, k, lists)?;
    let fits = fit_tables(&tables, method)?;
    let averaged = average_fits(&fits)?;
    Ok(LinkageAverage {
        tables,
        fits,
        averaged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointCheck {
    pub p_la: SizePosterior,
    pub p_joint: SizePosterior,
    pub sup_distance: f64,
}

/// Compares linkage-averaging over the exact partition posterior with the
/// marginal of `N` under the joint model `p(N, Z | X)`.
pub fn joint_exact_check(
    sets: &CandidateSets,
    lambda: &TruncationPoints,
    membership: &[usize],
    k: usize,
    size_posterior: impl Fn(&ContingencyTable) -> Result<SizePosterior>,
) -> Result<JointCheck> {
    let post = exact_posterior_enumeration(sets, lambda)?;
    let conditionals: Vec<SizePosterior> = post
        .partitions
        .iter()
        .map(|z| size_posterior(&capture_histories(z, membership, k)?))
        .collect::<Result<_>>()?;

    let parts: Vec<(&SizePosterior, f64)> = conditionals.iter().zip(post.probs.iter().copied()).collect();
    let p_la = SizePosterior::mixture(&parts)?;

    // joint route: unnormalized L(Z|X) p(Z) p(N|n(Z)), summed over Z, then
    // normalized over N
    let logs: Vec<f64> = post
        .log_likelihood
        .iter()
        .zip(&post.log_prior)
        .map(|(l, p)| l + p)
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let start = conditionals.iter().map(|c| c.start).min().unwrap();
    let end = conditionals.iter().map(|c| c.end()).max().unwrap();
    let mut joint = vec![0.0; (end - start + 1) as usize];
    for (c, l) in conditionals.iter().zip(&logs) {
        let w = (l - max).exp();
        for (n, p) in c.iter() {
            joint[(n - start) as usize] += w * p;
        }
    }
    let z: f64 = joint.iter().sum();
    joint.iter_mut().for_each(|x| *x /= z);
    let p_joint = SizePosterior { start, probs: joint };
    let sup_distance = (start..=end)
        .map(|n| (p_la.prob(n) - p_joint.prob(n)).abs())
        .fold(0.0, f64::max);
    Ok(JointCheck {
        p_la,
        p_joint,
        sup_distance,
    })
}
