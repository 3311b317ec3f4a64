//! End-to-end runs: ingest, compare, link, diagnose, build per-draw tables,
//! fit the size model per draw, average, and record a manifest.
//!
//! A run is described by a plain-text config (grammar in [`crate::kvconf`]):
//!
//! ```text
//! seed = 42
//!
//! [input]
//! lists = list1.csv list2.csv list3.csv
//! schema = schema.txt
//! comparison = comparison.txt
//!
//! [priors]
//! given = 0.9 0.95 0.99
//! family = 0.9 0.95 0.99
//!
//! [linkage]
//! iterations = 2000
//! burnin = 500
//! thin = 5
//!
//! [mse]
//! lists = 1 2 3
//! model = bma
//! prior = reciprocal
//! nmax = 30000
//! alpha = 1
//!
//! [averaging]
//! draws = 100
//! ```
//!
//! Paths in `[input]` are relative to the config file. `[priors]` is
//! required, even if empty. `model` is `bma`, `lcmcr`, or a decomposable
//! model name such as `[1,2][3]`; `lcmcr` reads `strata`, `iterations`,
//! `burnin` and `thin` from `[mse]` as well. The run seed drives both the
//! linkage chain and the latent-class chains; `[linkage] seed` and
//! `[mse] seed` override it.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::averaging::{average_fits, draw_tables, fit_tables, AveragedPosterior, MseMethod, TableFit};
use crate::compare::{build_candidates, CandidateSets, SimilarityConfig};
use crate::diagnostics::{acf, candidate_pairs, geweke_z, partition_summaries, PartitionSummaries};
use crate::error::{Error, Result};
use crate::histories::{pattern_string, ContingencyTable};
use crate::ingest::{load_lists, FieldSchema};
use crate::kvconf::{parse_list, split_list, KvFile, Section};
use crate::linkage::{run_linkage_sampler, LinkageChain, McmcConfig, PartitionLabeling, TruncationPoints};
use crate::mse_graphical::{DecomposableModel, SizePosterior, SizePrior, SizePriorKind};
use crate::mse_lcmcr::{LcmcrConfig, DEFAULT_STRATA};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Which size model to fit to each draw's table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelChoice {
    Bma,
    Lcmcr,
    Named(String),
}

impl std::str::FromStr for ModelChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bma" => Ok(ModelChoice::Bma),
            "lcmcr" => Ok(ModelChoice::Lcmcr),
            _ if s.starts_with('[') => Ok(ModelChoice::Named(s.to_string())),
            _ => Err(Error::Parse(format!("unknown model `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseSettings {
    pub model: ModelChoice,
    pub prior: SizePrior,
    pub alpha: f64,
    pub strata: usize,
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
}

impl MseSettings {
    pub fn new(model: ModelChoice, seed: u64) -> Self {
        MseSettings {
            model,
            prior: SizePrior::default(),
            alpha: 1.0,
            strata: DEFAULT_STRATA,
            iterations: 10_000,
            burnin: 2_000,
            thin: 10,
            seed,
        }
    }

    /// Resolves the choice for tables over `k` lists.
    pub fn method(&self, k: usize) -> Result<MseMethod> {
        Ok(match &self.model {
            ModelChoice::Bma => MseMethod::Bma {
                alpha: self.alpha,
                prior: self.prior,
            },
            ModelChoice::Named(name) => MseMethod::Model {
                model: DecomposableModel::parse(name, k)?,
                alpha: self.alpha,
                prior: self.prior,
            },
            ModelChoice::Lcmcr => {
                let mut c = LcmcrConfig::new(self.iterations, self.burnin, self.thin, self.seed);
                c.strata = self.strata;
                c.prior = self.prior.kind;
                MseMethod::Lcmcr(c)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Directory that relative input paths resolve against.
    pub base_dir: PathBuf,
    pub lists: Vec<String>,
    pub schema: String,
    pub comparison: Option<String>,
    /// `(field, truncation points)` lines of the priors section.
    pub priors: Vec<(String, String)>,
    pub linkage: McmcConfig,
    /// 1-based lists used for estimation; `None` uses all.
    pub mse_lists: Option<Vec<usize>>,
    pub mse: MseSettings,
    /// Number of partition draws to average over, evenly spaced in the chain.
    pub draws: usize,
    pub geweke_a: f64,
    pub geweke_b: f64,
    pub max_lag: usize,
}

fn empty_section(name: &str) -> Section {
    Section {
        name: name.to_string(),
        entries: Vec::new(),
    }
}

impl PipelineConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let kv = KvFile::parse(text)?;
        let top = kv.section("").cloned().unwrap_or_else(|| empty_section(""));
        let input = kv.require_section("input")?;
        let priors = kv.require_section("priors")?;
        let linkage = kv.section("linkage").cloned().unwrap_or_else(|| empty_section("linkage"));
        let mse = kv.section("mse").cloned().unwrap_or_else(|| empty_section("mse"));
        let averaging = kv.section("averaging").cloned().unwrap_or_else(|| empty_section("averaging"));
        let diag = kv.section("diagnostics").cloned().unwrap_or_else(|| empty_section("diagnostics"));

        let seed: u64 = top
            .require("seed")?
            .parse()
            .map_err(|_| Error::Parse("bad seed".into()))?;
        let lists: Vec<String> = split_list(input.require("lists")?).map(str::to_string).collect();
        let link_cfg = McmcConfig::new(
            linkage.parse_or("iterations", 2_000)?,
            linkage.parse_or("burnin", 500)?,
            linkage.parse_or("thin", 5)?,
            linkage.parse_or("seed", seed)?,
        );
        let mse_lists = match mse.get("lists") {
            Some(v) => Some(parse_list::<usize>(v)?),
            None => None,
        };
        let mut settings = MseSettings::new(mse.parse_or("model", ModelChoice::Bma)?, mse.parse_or("seed", seed)?);
        settings.prior = SizePrior {
            kind: mse.parse_or("prior", SizePriorKind::Reciprocal)?,
            n_max: mse.parse_or("nmax", settings.prior.n_max)?,
        };
        settings.alpha = mse.parse_or("alpha", 1.0)?;
        settings.strata = mse.parse_or("strata", DEFAULT_STRATA)?;
        settings.iterations = mse.parse_or("iterations", settings.iterations)?;
        settings.burnin = mse.parse_or("burnin", settings.burnin)?;
        settings.thin = mse.parse_or("thin", settings.thin)?;

        let cfg = PipelineConfig {
            base_dir: base_dir.to_path_buf(),
            lists,
            schema: input.require("schema")?.to_string(),
            comparison: input.get("comparison").map(str::to_string),
            priors: priors.entries.clone(),
            linkage: link_cfg,
            mse_lists,
            mse: settings,
            draws: averaging.parse_or("draws", 100)?,
            geweke_a: diag.parse_or("frac_a", 0.1)?,
            geweke_b: diag.parse_or("frac_b", 0.5)?,
            max_lag: diag.parse_or("max_lag", 50)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lists.len() < 2 {
            return Err(Error::TooFewLists(self.lists.len()));
        }
        if self.draws == 0 {
            return Err(Error::Invalid("averaging needs at least one draw".into()));
        }
        self.linkage.validate()
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        self.base_dir.join(p)
    }

    /// Every input file with the name it was given under.
    pub fn inputs(&self) -> Vec<(String, PathBuf)> {
        let mut v: Vec<(String, PathBuf)> = self.lists.iter().map(|l| (l.clone(), self.resolve(l))).collect();
        v.push((self.schema.clone(), self.resolve(&self.schema)));
        if let Some(c) = &self.comparison {
            v.push((c.clone(), self.resolve(c)));
        }
        v
    }

    pub fn priors_text(&self) -> String {
        self.priors.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// `d` draws evenly spaced through the chain (all of them when `d` is at
/// least the chain length).
pub fn select_draws(draws: &[PartitionLabeling], d: usize) -> Vec<usize> {
    let n = draws.len();
    if d >= n {
        return (0..n).collect();
    }
    (0..d).map(|i| (i * n) / d + n / (2 * d)).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Invalid(e.to_string()))?;
    s.push('\n');
    write_text(path, &s)
}

/// `N,prob` rows over the posterior's support.
pub fn write_posterior_csv(path: &Path, post: &SizePosterior) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "N,prob").map_err(io)?;
    for (n, p) in post.iter() {
        writeln!(w, "{n},{p:e}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads an `N,prob` file; gaps in `N` get probability zero.
pub fn read_posterior_csv(path: &Path) -> Result<SizePosterior> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut rows: Vec<(u64, f64)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let bad = || Error::Parse(format!("{}: bad row {:?}", path.display(), rec));
        let n: u64 = rec.get(0).and_then(|v| v.trim().parse().ok()).ok_or_else(bad)?;
        let p: f64 = rec.get(1).and_then(|v| v.trim().parse().ok()).ok_or_else(bad)?;
        rows.push((n, p));
    }
    rows.sort_by_key(|r| r.0);
    let start = rows.first().map(|r| r.0).ok_or_else(|| Error::Parse(format!("{}: no rows", path.display())))?;
    let end = rows.last().map(|r| r.0).unwrap_or(start);
    let mut probs = vec![0.0; (end - start + 1) as usize];
    for (n, p) in rows {
        if !(p >= 0.0) {
            return Err(Error::Parse(format!("{}: negative probability at N={n}", path.display())));
        }
        probs[(n - start) as usize] += p;
    }
    let total: f64 = probs.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroMass);
    }
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(SizePosterior { start, probs })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorSummary {
    pub mean: f64,
    pub sd: f64,
    pub mode: u64,
    pub median: u64,
    pub interval_90: (u64, u64),
    pub interval_99: (u64, u64),
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_weights: Option<Vec<(String, f64)>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl PosteriorSummary {
    pub fn new(post: &SizePosterior) -> Self {
        PosteriorSummary {
            mean: post.mean(),
            sd: post.variance().sqrt(),
            mode: post.mode(),
            median: post.quantile(0.5),
            interval_90: post.interval(0.90),
            interval_99: post.interval(0.99),
            model_weights: None,
            warnings: Vec::new(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

/// Long-format plot data: series `pooled` and one `draw_<t>` per per-draw
/// posterior, with columns `series,N,density`.
pub fn emit_plot_data(path: &Path, pooled: &SizePosterior, per_draw: &[(String, &SizePosterior)]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "series,N,density").map_err(io)?;
    let mut series = |name: &str, post: &SizePosterior| -> Result<()> {
        for (n, p) in post.iter() {
            writeln!(w, "{name},{n},{p:e}").map_err(io)?;
        }
        Ok(())
    };
    series("pooled", pooled)?;
    for (name, post) in per_draw {
        series(name, post)?;
    }
    w.flush().map_err(io)
}

/// Per-draw scalars, Geweke Z per monitored scalar (`NA` when the chain is
/// degenerate), ACFs, and pair coreference probabilities.
pub fn write_diagnostics(
    dir: &Path,
    summaries: &PartitionSummaries,
    frac_a: f64,
    frac_b: f64,
    max_lag: usize,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    const SERIES: [&str; 4] = ["clusters", "size1", "size2", "size3plus"];

    let path = dir.join("summaries.csv");
    let mut w = create(&path)?;
    let io = |e| Error::io(&path, e);
    writeln!(w, "draw,clusters,size1,size2,size3plus").map_err(io)?;
    for (t, s) in summaries.draws.iter().enumerate() {
        writeln!(w, "{},{},{},{},{}", t + 1, s.clusters, s.size1, s.size2, s.size3plus).map_err(io)?;
    }
    w.flush().map_err(io)?;

    let mut geweke = String::from("series,z\n");
    let mut acfs = String::from("series,lag,acf\n");
    for name in SERIES {
        let x = summaries.series(name).expect("known series");
        match geweke_z(&x, frac_a, frac_b) {
            Ok(z) => geweke.push_str(&format!("{name},{z}\n")),
            Err(Error::DegenerateChain(_)) => geweke.push_str(&format!("{name},NA\n")),
            Err(e) => return Err(e),
        }
        let lag = max_lag.min(x.len().saturating_sub(1));
        match acf(&x, lag) {
            Ok(r) => {
                for (l, v) in r.iter().enumerate() {
                    acfs.push_str(&format!("{name},{},{v}\n", l + 1));
                }
            }
            Err(Error::DegenerateChain(_)) => {
                for l in 1..=lag {
                    acfs.push_str(&format!("{name},{l},NA\n"));
                }
            }
            Err(e) => return Err(e),
        }
    }
    write_text(&dir.join("geweke.csv"), &geweke)?;
    write_text(&dir.join("acf.csv"), &acfs)?;

    let mut pairs = String::from("i,j,prob\n");
    for ((i, j), p) in summaries.pairs.iter().zip(summaries.pair_probabilities()) {
        pairs.push_str(&format!("{i},{j},{p}\n"));
    }
    write_text(&dir.join("pairs.csv"), &pairs)
}

/// Per-draw tables in long form: `draw,pattern,count`.
pub fn write_tables_csv(path: &Path, draws: &[usize], tables: &[ContingencyTable]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "draw,pattern,count").map_err(io)?;
    for (t, table) in draws.iter().zip(tables) {
        for (h, n) in table.iter() {
            writeln!(w, "{},{},{n}", t + 1, pattern_string(h, table.k())).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Shares as percentages, with the absolute variance terms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub draws: usize,
    pub total_variance: f64,
    pub linkage_variance: f64,
    pub residual_variance: f64,
    pub linkage_percent: f64,
    pub residual_percent: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub with_models: Option<ModelReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReport {
    pub linkage_variance: f64,
    pub model_variance: f64,
    pub residual_variance: f64,
    pub linkage_percent: f64,
    pub model_percent: f64,
    pub residual_percent: f64,
}

impl DecompositionReport {
    pub fn new(avg: &AveragedPosterior) -> Self {
        let d = &avg.decomposition;
        DecompositionReport {
            draws: avg.cond_means.len(),
            total_variance: d.total,
            linkage_variance: d.linkage,
            residual_variance: d.residual,
            linkage_percent: 100.0 * d.linkage_share,
            residual_percent: 100.0 * d.residual_share,
            with_models: avg.model_decomposition.map(|m| ModelReport {
                linkage_variance: m.linkage,
                model_variance: m.model,
                residual_variance: m.residual,
                linkage_percent: 100.0 * m.linkage_share,
                model_percent: 100.0 * m.model_share,
                residual_percent: 100.0 * m.residual_share,
            }),
        }
    }
}

/// Writes the averaging outputs for draws `draws` (chain indices):
/// `pooled.csv`, `per_draw.csv`, `decomposition.json`, `summary.json` and
/// `plot_data.csv`.
pub fn write_average_outputs(
    dir: &Path,
    draws: &[usize],
    tables: &[ContingencyTable],
    fits: &[TableFit],
    avg: &AveragedPosterior,
) -> Result<()> {
    write_posterior_csv(&dir.join("pooled.csv"), &avg.pooled)?;

    let path = dir.join("per_draw.csv");
    let mut w = create(&path)?;
    let io = |e| Error::io(&path, e);
    writeln!(w, "draw,n_obs,mean,variance,lower90,upper90").map_err(io)?;
    for (i, ((t, table), fit)) in draws.iter().zip(tables).zip(fits).enumerate() {
        let (lo, hi) = fit.posterior.interval(0.90);
        writeln!(
            w,
            "{},{},{},{},{lo},{hi}",
            t + 1,
            table.n_obs(),
            avg.cond_means[i],
            avg.cond_vars[i]
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)?;

    write_json(&dir.join("decomposition.json"), &DecompositionReport::new(avg))?;

    let mut summary = PosteriorSummary::new(&avg.pooled);
    if let (Some(layers), Some(names)) = (&avg.layers, fits.first().and_then(|f| f.model_names.clone())) {
        let d = layers.len() as f64;
        summary.model_weights = Some(
            names
                .into_iter()
                .enumerate()
                .map(|(m, name)| (name, layers.iter().map(|l| l[m].weight).sum::<f64>() / d))
                .collect(),
        );
    }
    summary.warnings = fits
        .iter()
        .flat_map(|f| f.warnings.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    summary.write(&dir.join("summary.json"))?;

    let per: Vec<(String, &SizePosterior)> = draws
        .iter()
        .zip(fits)
        .map(|(t, f)| (format!("draw_{}", t + 1), &f.posterior))
        .collect();
    emit_plot_data(&dir.join("plot_data.csv"), &avg.pooled, &per)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub version: String,
    pub config_sha256: String,
    pub linkage_seed: u64,
    pub mse_seed: u64,
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    pub draws_averaged: usize,
    pub model: String,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
}

/// What a run produced, for callers that want more than the files.
#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub candidates: CandidateSets,
    pub chain: LinkageChain,
    pub selected: Vec<usize>,
    pub tables: Vec<ContingencyTable>,
    pub fits: Vec<TableFit>,
    pub averaged: AveragedPosterior,
    pub manifest: Manifest,
}

fn list_outputs(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            list_outputs(&p, out)?;
        } else if p.file_name().is_some_and(|n| n != "manifest.json") {
            out.push(p);
        }
    }
    Ok(())
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

/// Runs every stage into `out`, which is created if needed.
pub fn run_pipeline(config: &PipelineConfig, config_text: &str, out: &Path) -> Result<PipelineResult> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let (store, schema) = stage("ingest", {
        (|| {
            let schema = FieldSchema::read(&config.resolve(&config.schema))?;
            let paths: Vec<PathBuf> = config.lists.iter().map(|l| config.resolve(l)).collect();
            let store = load_lists(&paths, &schema)?;
            store.write_csv(&out.join("records.csv"))?;
            Ok((store, schema))
        })()
    })?;
    let membership = store.membership();
    let k = store.num_lists();

    let sets = stage("compare", {
        (|| {
            let sim = match &config.comparison {
                Some(c) => SimilarityConfig::read(&config.resolve(c), &schema)?,
                None => SimilarityConfig::defaults(&schema),
            };
            let sets = build_candidates(&store.records, &sim)?;
            sets.write_dir(&out.join("candidates"), &membership)?;
            Ok(sets)
        })()
    })?;

    let chain = stage("link", {
        (|| {
            let lambda = TruncationPoints::parse(&config.priors_text(), &sets.field_names, &sets.levels_per_field)?;
            let chain = run_linkage_sampler(&sets, &lambda, &config.linkage)?;
            chain.write(&out.join("chain.txt"), &membership)?;
            Ok(chain)
        })()
    })?;

    stage("diag", {
        (|| {
            let s = partition_summaries(&chain.draws, &candidate_pairs(&sets))?;
            write_diagnostics(&out.join("diag"), &s, config.geweke_a, config.geweke_b, config.max_lag)
        })()
    })?;

    let lists: Vec<usize> = config.mse_lists.clone().unwrap_or_else(|| (1..=k).collect());
    let selected = select_draws(&chain.draws, config.draws);
    let tables = stage("histories", {
        (|| {
            let draws: Vec<PartitionLabeling> = selected.iter().map(|&t| chain.draws[t].clone()).collect();
            let tables = draw_tables(&draws, &membership, k, &lists)?;
            write_tables_csv(&out.join("tables.csv"), &selected, &tables)?;
            Ok(tables)
        })()
    })?;

    let method = stage("mse", config.mse.method(lists.len()))?;
    let fits = stage("mse", fit_tables(&tables, &method))?;

    let averaged = stage("average", {
        (|| {
            let avg = average_fits(&fits)?;
            write_average_outputs(out, &selected, &tables, &fits, &avg)?;
            Ok(avg)
        })()
    })?;

    let manifest = stage("manifest", {
        (|| {
            let inputs = config
                .inputs()
                .into_iter()
                .map(|(name, p)| {
                    Ok(FileHash {
                        path: name,
                        sha256: sha256_file(&p)?,
                    })
                })
                .collect::<Result<_>>()?;
            let mut files = Vec::new();
            list_outputs(out, &mut files)?;
            let outputs = files
                .iter()
                .map(|p| {
                    let rel = p.strip_prefix(out).unwrap_or(p);
                    Ok(FileHash {
                        path: rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"),
                        sha256: sha256_file(p)?,
                    })
                })
                .collect::<Result<_>>()?;
            let m = Manifest {
                version: VERSION.to_string(),
                config_sha256: hex::encode(Sha256::digest(config_text.as_bytes())),
                linkage_seed: config.linkage.seed,
                mse_seed: config.mse.seed,
                iterations: config.linkage.iterations,
                burnin: config.linkage.burnin,
                thin: config.linkage.thin,
                draws_averaged: selected.len(),
                model: match &config.mse.model {
                    ModelChoice::Bma => "bma".into(),
                    ModelChoice::Lcmcr => "lcmcr".into(),
                    ModelChoice::Named(n) => n.clone(),
                },
                inputs,
                outputs,
            };
            write_json(&out.join("manifest.json"), &m)?;
            Ok(m)
        })()
    })?;

    Ok(PipelineResult {
        candidates: sets,
        chain,
        selected,
        tables,
        fits,
        averaged,
        manifest,
    })
}

/// Reads the config at `path` and runs it into `out`.
pub fn run_pipeline_file(path: &Path, out: &Path) -> Result<PipelineResult> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let config = PipelineConfig::parse(&text, base).map_err(|e| e.in_stage("config"))?;
    run_pipeline(&config, &text, out)
}
