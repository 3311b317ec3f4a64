//! Latent-class capture-recapture with a truncated stick-breaking prior on
//! the class weights.
//!
//! Within class `s` the lists capture independently with probabilities
//! `θ_sk ~ Beta(1, 1)`. Class weights are `π_s = V_s ∏_{t<s} (1 - V_t)` with
//! `V_t ~ Beta(1, a)`, `V_S = 1` and `a ~ Gamma(0.25, 0.25)`. The sampler
//! augments the unobserved individuals: with `p(N) ∝ 1/N` the missed count
//! given everything else is negative binomial, drawn exactly as a
//! gamma-Poisson mixture.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Binomial, Distribution, Gamma, Poisson};

use crate::error::{Error, Result};
use crate::histories::ContingencyTable;
use crate::mse_graphical::{SizePosterior, SizePriorKind};

pub const DEFAULT_STRATA: usize = 10;

const GAMMA_SHAPE: f64 = 0.25;
const GAMMA_RATE: f64 = 0.25;
const CAP_TRIES: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct LcmcrConfig {
    pub strata: usize,
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub prior: SizePriorKind,
    /// Hard cap on `N`; `None` picks `10 · n_obs · max(1, 1/θ̂_min)` from
    /// the table.
    pub n_cap: Option<u64>,
    /// Holds `θ_1k` fixed (only with one stratum).
    pub fixed_theta: Option<Vec<f64>>,
}

impl LcmcrConfig {
    pub fn new(iterations: usize, burnin: usize, thin: usize, seed: u64) -> Self {
        LcmcrConfig {
            strata: DEFAULT_STRATA,
            iterations,
            burnin,
            thin,
            seed,
            prior: SizePriorKind::Reciprocal,
            n_cap: None,
            fixed_theta: None,
        }
    }

    fn keeps(&self, t: usize) -> bool {
        t > self.burnin && (t - self.burnin) % self.thin == 0
    }

    fn validate(&self, k: usize) -> Result<()> {
        if self.strata < 1 {
            return Err(Error::Invalid("need at least one stratum".into()));
        }
        if self.thin == 0 || self.iterations <= self.burnin {
            return Err(Error::Invalid(format!(
                "no draws saved with iterations={} burnin={} thin={}",
                self.iterations, self.burnin, self.thin
            )));
        }
        if let Some(th) = &self.fixed_theta {
            if self.strata != 1 || th.len() != k || th.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
                return Err(Error::Invalid(
                    "fixed capture probabilities need one stratum and one value in (0, 1) per list".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LcmcrState {
    /// `θ_sk`, one row per stratum.
    pub theta: Vec<Vec<f64>>,
    /// `ln V_t` and `ln(1 - V_t)`; kept in logs because `V_t` sits
    /// within rounding of 1 when `a_sb` is small.
    pub ln_v: Vec<f64>,
    pub ln_1mv: Vec<f64>,
    pub pi: Vec<f64>,
    pub a_sb: f64,
    pub n0: u64,
    /// Individuals per (pattern, stratum), the all-zero pattern holding the
    /// augmented ones.
    pub occupancy: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LcmcrRun {
    pub draws: Vec<u64>,
    pub posterior: SizePosterior,
    /// `a_sb` at each saved iteration.
    pub concentration: Vec<f64>,
    /// `Σ_s π_s` at each saved iteration.
    pub pi_sums: Vec<f64>,
    /// Mean share of individuals in the last stratum after burn-in.
    pub last_class_share: f64,
    pub n_cap: u64,
    pub cap_hits: usize,
    pub warnings: Vec<String>,
}

fn stick_weights(ln_v: &[f64], ln_1mv: &[f64]) -> Vec<f64> {
    let mut ln_rest = 0.0;
    ln_v.iter()
        .zip(ln_1mv)
        .map(|(&lv, &l1)| {
            let p = (lv + ln_rest).exp();
            ln_rest += l1;
            p
        })
        .collect()
}

/// `ln G` for `G ~ Gamma(shape, 1)`, boosting small shapes so the draw
/// never underflows.
fn ln_gamma_draw<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        return Gamma::new(shape, 1.0).expect("valid gamma").sample(rng).ln();
    }
    let g: f64 = Gamma::new(shape + 1.0, 1.0).expect("valid gamma").sample(rng);
    let u: f64 = rng.random::<f64>();
    g.ln() + (1.0 - u).ln() / shape
}

/// `(ln X, ln(1 - X))` for `X ~ Beta(a, b)`.
fn ln_beta_draw<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> (f64, f64) {
    let x = ln_gamma_draw(a, rng);
    let y = ln_gamma_draw(b, rng);
    let m = x.max(y);
    let ln_sum = m + ((x - m).exp() + (y - m).exp()).ln();
    (x - ln_sum, y - ln_sum)
}

fn beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    Beta::new(a, b).expect("positive shapes").sample(rng)
}

/// Splits `n` over categories with the given (unnormalized) weights.
fn multinomial<R: Rng + ?Sized>(n: u64, weights: &[f64], rng: &mut R) -> Vec<u64> {
    let mut out = vec![0; weights.len()];
    let mut left = n;
    let mut mass: f64 = weights.iter().sum();
    for (s, &w) in weights.iter().enumerate() {
        if left == 0 {
            break;
        }
        if s + 1 == weights.len() || mass <= 0.0 {
            out[s] = left;
            break;
        }
        let p = (w / mass).clamp(0.0, 1.0);
        let x = Binomial::new(left, p).expect("valid binomial").sample(rng);
        out[s] = x;
        left -= x;
        mass -= w;
    }
    out
}

struct Sampler<'a> {
    config: &'a LcmcrConfig,
    k: usize,
    /// Observed counts by pattern; entry 0 unused.
    counts: Vec<u64>,
    n_obs: u64,
    n_cap: u64,
    state: LcmcrState,
    cap_hits: usize,
}

impl<'a> Sampler<'a> {
    fn new<R: Rng + ?Sized>(k: usize, counts: Vec<u64>, config: &'a LcmcrConfig, n_cap: u64, rng: &mut R) -> Self {
        let s = config.strata;
        let theta = match &config.fixed_theta {
            Some(th) => vec![th.clone()],
            None => vec![vec![0.5; k]; s],
        };
        let a_sb = 1.0;
        let (mut ln_v, mut ln_1mv): (Vec<f64>, Vec<f64>) =
            (0..s).map(|_| ln_beta_draw(1.0, a_sb, rng)).unzip();
        ln_v[s - 1] = 0.0;
        ln_1mv[s - 1] = f64::NEG_INFINITY;
        let pi = stick_weights(&ln_v, &ln_1mv);
        let n_obs = counts.iter().sum();
        Sampler {
            config,
            k,
            counts,
            n_obs,
            n_cap,
            state: LcmcrState {
                theta,
                ln_v,
                ln_1mv,
                pi,
                a_sb,
                n0: 0,
                occupancy: vec![vec![0; s]; 1 << k],
            },
            cap_hits: 0,
        }
    }

    /// `π_s P(h | stratum s)` for every stratum.
    fn class_weights(&self, h: usize) -> Vec<f64> {
        self.state
            .pi
            .iter()
            .zip(&self.state.theta)
            .map(|(&p, th)| {
                p * th
                    .iter()
                    .enumerate()
                    .map(|(k, &t)| if h >> k & 1 == 1 { t } else { 1.0 - t })
                    .product::<f64>()
            })
            .collect()
    }

    fn update_n0<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let theta0: f64 = self.class_weights(0).iter().sum::<f64>().clamp(0.0, 1.0 - 1e-15);
        let r = match self.config.prior {
            SizePriorKind::Reciprocal => self.n_obs as f64,
            SizePriorKind::Uniform => self.n_obs as f64 + 1.0,
        };
        let limit = self.n_cap - self.n_obs;
        if r == 0.0 || theta0 <= 0.0 {
            self.state.n0 = 0;
            return;
        }
        // NegBin(r, 1 - θ₀) as Poisson(λ), λ ~ Gamma(r, θ₀ / (1 - θ₀))
        let gamma = Gamma::new(r, theta0 / (1.0 - theta0)).expect("valid gamma");
        for _ in 0..CAP_TRIES {
            let lambda: f64 = gamma.sample(rng);
            let n0 = if lambda <= 0.0 {
                0
            } else {
                Poisson::new(lambda).expect("valid poisson").sample(rng) as u64
            };
            if n0 <= limit {
                self.state.n0 = n0;
                return;
            }
        }
        self.cap_hits += 1;
        self.state.n0 = limit;
    }

    fn update_classes<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for h in 0..(1usize << self.k) {
            let n = if h == 0 { self.state.n0 } else { self.counts[h] };
            let w = self.class_weights(h);
            self.state.occupancy[h] = multinomial(n, &w, rng);
        }
    }

    fn update_theta<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if self.config.fixed_theta.is_some() {
            return;
        }
        for s in 0..self.config.strata {
            let size: u64 = self.state.occupancy.iter().map(|row| row[s]).sum();
            for k in 0..self.k {
                let caught: u64 = self
                    .state
                    .occupancy
                    .iter()
                    .enumerate()
                    .filter(|(h, _)| h >> k & 1 == 1)
                    .map(|(_, row)| row[s])
                    .sum();
                self.state.theta[s][k] = beta(1.0 + caught as f64, 1.0 + (size - caught) as f64, rng)
                    .clamp(1e-12, 1.0 - 1e-12);
            }
        }
    }

    fn update_sticks<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let s = self.config.strata;
        let sizes: Vec<u64> = (0..s)
            .map(|c| self.state.occupancy.iter().map(|row| row[c]).sum())
            .collect();
        let mut above: u64 = sizes.iter().sum();
        for t in 0..s - 1 {
            above -= sizes[t];
            let (lv, l1) = ln_beta_draw(1.0 + sizes[t] as f64, self.state.a_sb + above as f64, rng);
            self.state.ln_v[t] = lv;
            self.state.ln_1mv[t] = l1;
        }
        self.state.pi = stick_weights(&self.state.ln_v, &self.state.ln_1mv);
    }

    fn update_concentration<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let s = self.config.strata;
        if s == 1 {
            self.state.a_sb = Gamma::new(GAMMA_SHAPE, 1.0 / GAMMA_RATE).unwrap().sample(rng);
            return;
        }
        let log_rest: f64 = self.state.ln_1mv[..s - 1].iter().sum();
        let rate = GAMMA_RATE - log_rest;
        self.state.a_sb = Gamma::new(GAMMA_SHAPE + (s - 1) as f64, 1.0 / rate)
            .expect("valid gamma")
            .sample(rng)
            .max(1e-300);
    }
}

fn default_cap(table: &ContingencyTable) -> u64 {
    // crude per-list capture rate from pairwise overlaps
    let n_obs = table.n_obs().max(1);
    let dense = table.dense();
    let k = table.k();
    let mut theta_min: f64 = 1.0;
    for a in 0..k {
        let caught_a: u64 = dense.iter().enumerate().filter(|(h, _)| h >> a & 1 == 1).map(|x| x.1).sum();
        theta_min = theta_min.min(caught_a as f64 / n_obs as f64);
        for b in 0..k {
            if a == b {
                continue;
            }
            let caught_b: u64 = dense.iter().enumerate().filter(|(h, _)| h >> b & 1 == 1).map(|x| x.1).sum();
            let both: u64 = dense
                .iter()
                .enumerate()
                .filter(|(h, _)| h >> a & 1 == 1 && h >> b & 1 == 1)
                .map(|x| x.1)
                .sum();
            if caught_b > 0 {
                theta_min = theta_min.min(both.max(1) as f64 / caught_b as f64);
            }
        }
    }
    let factor = if theta_min > 0.0 { (1.0 / theta_min).max(1.0) } else { 1.0 };
    (10.0 * n_obs as f64 * factor).ceil() as u64
}

fn run(k: usize, counts: Vec<u64>, config: &LcmcrConfig, n_cap: u64) -> Result<LcmcrRun> {
    config.validate(k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut sampler = Sampler::new(k, counts, config, n_cap, &mut rng);
    let mut draws = Vec::new();
    let mut concentration = Vec::new();
    let mut pi_sums = Vec::new();
    let mut last_share = 0.0;
    let mut post_burn = 0usize;
    for t in 1..=config.iterations {
        sampler.update_n0(&mut rng);
        sampler.update_classes(&mut rng);
        sampler.update_theta(&mut rng);
        sampler.update_sticks(&mut rng);
        sampler.update_concentration(&mut rng);
        if t > config.burnin {
            let total = sampler.n_obs + sampler.state.n0;
            if total > 0 {
                let last: u64 = sampler.state.occupancy.iter().map(|row| row[config.strata - 1]).sum();
                last_share += last as f64 / total as f64;
            }
            post_burn += 1;
        }
        if config.keeps(t) {
            draws.push(sampler.n_obs + sampler.state.n0);
            concentration.push(sampler.state.a_sb);
            pi_sums.push(sampler.state.pi.iter().sum());
        }
    }
    let last_class_share = last_share / post_burn.max(1) as f64;
    let mut warnings = Vec::new();
    if config.strata > 1 && last_class_share > 0.01 {
        warnings.push(format!(
            "last stratum holds {:.1}% of individuals; consider more strata",
            100.0 * last_class_share
        ));
    }
    if sampler.cap_hits > 0 {
        warnings.push(format!(
            "population cap {n_cap} was hit in {} iterations",
            sampler.cap_hits
        ));
    }
    Ok(LcmcrRun {
        posterior: SizePosterior::from_draws(&draws)?,
        draws,
        concentration,
        pi_sums,
        last_class_share,
        n_cap,
        cap_hits: sampler.cap_hits,
        warnings,
    })
}

pub fn run_lcmcr(table: &ContingencyTable, config: &LcmcrConfig) -> Result<LcmcrRun> {
    if table.k() < 2 {
        return Err(Error::TooFewLists(table.k()));
    }
    if table.n_obs() == 0 {
        return Err(Error::Invalid("table has no observed individuals".into()));
    }
    let cap = config.n_cap.unwrap_or_else(|| default_cap(table));
    if cap < table.n_obs() {
        return Err(Error::Invalid(format!("cap {cap} is below the observed count")));
    }
    run(table.k(), table.dense(), config, cap)
}

/// Runs the sampler with no data, so every parameter explores its prior.
pub fn run_lcmcr_prior_only(k: usize, config: &LcmcrConfig) -> Result<LcmcrRun> {
    run(k, vec![0; 1 << k], config, 0)
}
