use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use linkmse::averaging::{average_fits, draw_tables, fit_tables, fit_table, MseMethod};
use linkmse::compare::{build_candidates, CandidateSets, SimilarityConfig};
use linkmse::diagnostics::{candidate_pairs, partition_summaries};
use linkmse::histories::ContingencyTable;
use linkmse::ingest::{load_lists, FieldSchema, RecordStore};
use linkmse::linkage::{mixture_rl_sampler, run_linkage_sampler, LinkageChain, McmcConfig, PartitionLabeling, TruncationPoints};
use linkmse::mse_graphical::{SizePrior, SizePriorKind, DEFAULT_N_MAX};
use linkmse::mse_lcmcr::{run_lcmcr, LcmcrConfig, DEFAULT_STRATA};
use linkmse::pipeline::{
    emit_plot_data, read_posterior_csv, run_pipeline_file, select_draws, write_average_outputs, write_diagnostics,
    write_posterior_csv, write_tables_csv, ModelChoice, MseSettings, PosteriorSummary,
};
use linkmse::simulate::{generate, SimSpec};
use linkmse::{Error, Result};

#[derive(Parser)]
#[command(name = "linkmse", version, about = "Record linkage and population size estimation from overlapping lists")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and normalize list CSVs into one record store.
    Ingest {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long = "list", required = true)]
        lists: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the candidate comparison set.
    Compare {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        /// Comparison config; defaults by field kind when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample coreference partitions.
    Link {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        priors: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        iters: usize,
        #[arg(long, default_value_t = 1_000)]
        burnin: usize,
        #[arg(long, default_value_t = 5)]
        thin: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        random_scan: bool,
        /// `mixture` runs the pairwise mixture sampler and closes each draw.
        #[arg(long)]
        baseline: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convergence diagnostics for a partition chain.
    Diag {
        #[arg(long)]
        draws: PathBuf,
        /// Candidate directory, for pair coreference probabilities.
        #[arg(long)]
        candidates: Option<PathBuf>,
        #[arg(long, default_value_t = 0.1)]
        frac_a: f64,
        #[arg(long, default_value_t = 0.5)]
        frac_b: f64,
        #[arg(long, default_value_t = 50)]
        max_lag: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate synthetic lists with known truth.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Population size under a decomposable graphical model or their average.
    MseGraph {
        #[arg(long)]
        table: PathBuf,
        #[arg(long, conflicts_with = "bma")]
        model: Option<String>,
        #[arg(long)]
        bma: bool,
        #[command(flatten)]
        prior: PriorArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Population size under the latent-class model.
    MseLcmcr {
        #[arg(long)]
        table: PathBuf,
        #[command(flatten)]
        lcmcr: LcmcrArgs,
        #[arg(long, value_parser = parse_kind, default_value = "reciprocal")]
        prior: SizePriorKind,
        /// Upper bound on N; picked from the table when omitted.
        #[arg(long)]
        ncap: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Average the size posterior over partition draws.
    Average {
        #[arg(long)]
        draws: PathBuf,
        /// 1-based lists to estimate from, e.g. `1,2,3`.
        #[arg(long)]
        lists: Option<String>,
        /// `bma`, `lcmcr`, or a model name such as `[1,2][3]`.
        #[arg(long, default_value = "bma")]
        model: String,
        /// Number of draws to average, evenly spaced.
        #[arg(long, default_value_t = 100)]
        ndraws: usize,
        #[command(flatten)]
        prior: PriorArgs,
        #[command(flatten)]
        lcmcr: LcmcrArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage from a config file.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Long-format plot data from posterior CSVs.
    EmitPlots {
        #[arg(long)]
        pooled: PathBuf,
        #[arg(long = "per-draw")]
        per_draw: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct PriorArgs {
    #[arg(long, value_parser = parse_kind, default_value = "reciprocal")]
    prior: SizePriorKind,
    #[arg(long, default_value_t = DEFAULT_N_MAX)]
    nmax: u64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
}

impl PriorArgs {
    fn size_prior(&self) -> SizePrior {
        SizePrior {
            kind: self.prior,
            n_max: self.nmax,
        }
    }
}

#[derive(Args)]
struct LcmcrArgs {
    #[arg(long, default_value_t = DEFAULT_STRATA)]
    strata: usize,
    #[arg(long = "iters", default_value_t = 10_000)]
    iters: usize,
    #[arg(long = "burnin", default_value_t = 2_000)]
    burnin: usize,
    #[arg(long = "thin", default_value_t = 10)]
    thin: usize,
    #[arg(long = "seed", default_value_t = 1)]
    seed: u64,
}

fn parse_kind(s: &str) -> std::result::Result<SizePriorKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn with_ext(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

fn read_candidates(dir: &Path) -> Result<(CandidateSets, Vec<usize>)> {
    CandidateSets::read_dir(dir)
}

fn cmd_link(
    candidates: &Path,
    priors: Option<&Path>,
    cfg: McmcConfig,
    baseline: Option<&str>,
    out: &Path,
) -> Result<()> {
    let (sets, membership) = read_candidates(candidates)?;
    let lambda = match priors {
        Some(p) => TruncationPoints::read(p, &sets.field_names, &sets.levels_per_field)?,
        None => TruncationPoints::flat(&sets.levels_per_field),
    };
    match baseline {
        None => run_linkage_sampler(&sets, &lambda, &cfg)?.write(out, &membership),
        Some("mixture") => {
            let m = mixture_rl_sampler(&sets, &lambda, &cfg)?;
            let closed = m.closures(&sets);
            let mut triplets = String::from("draw,open_triplets,p\n");
            for (t, ((_, open), d)) in closed.iter().zip(&m.draws).enumerate() {
                triplets.push_str(&format!("{},{open},{}\n", t + 1, d.p));
            }
            let tp = with_ext(out, "triplets.csv");
            fs::write(&tp, triplets).map_err(|e| Error::io(&tp, e))?;
            LinkageChain {
                draws: closed.into_iter().map(|c| c.0).collect(),
                seed: cfg.seed,
                burnin: cfg.burnin,
                thin: cfg.thin,
                iterations: cfg.iterations,
            }
            .write(out, &membership)
        }
        Some(other) => Err(Error::Invalid(format!("unknown baseline `{other}`"))),
    }
}

fn cmd_mse_graph(table: &Path, model: Option<&str>, bma: bool, prior: &PriorArgs, out: &Path) -> Result<()> {
    let (t, _) = ContingencyTable::read_csv(table)?;
    let choice = match (model, bma) {
        (Some(m), _) => ModelChoice::Named(m.to_string()),
        _ => ModelChoice::Bma,
    };
    let mut settings = MseSettings::new(choice, 0);
    settings.prior = prior.size_prior();
    settings.alpha = prior.alpha;
    let fit = fit_table(&t, &settings.method(t.k())?)?;
    write_posterior_csv(out, &fit.posterior)?;
    let mut summary = PosteriorSummary::new(&fit.posterior);
    if let (Some(names), Some(layers)) = (fit.model_names, fit.layers) {
        summary.model_weights = Some(names.into_iter().zip(layers.iter().map(|l| l.weight)).collect());
    }
    summary.write(&with_ext(out, "json"))
}

fn cmd_mse_lcmcr(table: &Path, args: &LcmcrArgs, prior: SizePriorKind, ncap: Option<u64>, out: &Path) -> Result<()> {
    let (t, _) = ContingencyTable::read_csv(table)?;
    let mut cfg = LcmcrConfig::new(args.iters, args.burnin, args.thin, args.seed);
    cfg.strata = args.strata;
    cfg.prior = prior;
    cfg.n_cap = ncap;
    let run = run_lcmcr(&t, &cfg)?;
    let mut text = String::from("draw,N\n");
    for (i, n) in run.draws.iter().enumerate() {
        text.push_str(&format!("{},{n}\n", i + 1));
    }
    fs::write(out, text).map_err(|e| Error::io(out, e))?;
    let mut summary = PosteriorSummary::new(&run.posterior);
    summary.warnings = run.warnings.clone();
    for w in &run.warnings {
        eprintln!("linkmse: warning: {w}");
    }
    summary.write(&with_ext(out, "json"))
}

#[allow(clippy::too_many_arguments)]
fn cmd_average(
    draws: &Path,
    lists: Option<&str>,
    model: &str,
    ndraws: usize,
    prior: &PriorArgs,
    lcmcr: &LcmcrArgs,
    out: &Path,
) -> Result<()> {
    let (chain, membership) = LinkageChain::read(draws)?;
    let k = membership.iter().max().map_or(0, |m| m + 1);
    let lists: Vec<usize> = match lists {
        Some(v) => linkmse::kvconf::parse_list(v)?,
        None => (1..=k).collect(),
    };
    let mut settings = MseSettings::new(model.parse()?, lcmcr.seed);
    settings.prior = prior.size_prior();
    settings.alpha = prior.alpha;
    settings.strata = lcmcr.strata;
    settings.iterations = lcmcr.iters;
    settings.burnin = lcmcr.burnin;
    settings.thin = lcmcr.thin;
    let method: MseMethod = settings.method(lists.len())?;
    let selected = select_draws(&chain.draws, ndraws);
    let picked: Vec<PartitionLabeling> = selected.iter().map(|&t| chain.draws[t].clone()).collect();
    let tables = draw_tables(&picked, &membership, k, &lists)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_tables_csv(&out.join("tables.csv"), &selected, &tables)?;
    let fits = fit_tables(&tables, &method)?;
    let avg = average_fits(&fits)?;
    write_average_outputs(out, &selected, &tables, &fits, &avg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { schema, lists, out } => (|| {
            let schema = FieldSchema::read(&schema)?;
            load_lists(&lists, &schema)?.write_csv(&out)
        })()
        .map_err(|e| e.in_stage("ingest")),
        Command::Compare {
            records,
            schema,
            config,
            out,
        } => (|| {
            let schema = FieldSchema::read(&schema)?;
            let store = RecordStore::read_csv(&records, &schema)?;
            let sim = match config {
                Some(c) => SimilarityConfig::read(&c, &schema)?,
                None => SimilarityConfig::defaults(&schema),
            };
            build_candidates(&store.records, &sim)?.write_dir(&out, &store.membership())
        })()
        .map_err(|e| e.in_stage("compare")),
        Command::Link {
            candidates,
            priors,
            iters,
            burnin,
            thin,
            seed,
            random_scan,
            baseline,
            out,
        } => {
            let mut cfg = McmcConfig::new(iters, burnin, thin, seed);
            cfg.random_scan = random_scan;
            cmd_link(&candidates, priors.as_deref(), cfg, baseline.as_deref(), &out).map_err(|e| e.in_stage("link"))
        }
        Command::Diag {
            draws,
            candidates,
            frac_a,
            frac_b,
            max_lag,
            out,
        } => (|| {
            let (chain, _) = LinkageChain::read(&draws)?;
            let pairs = match candidates {
                Some(dir) => candidate_pairs(&read_candidates(&dir)?.0),
                None => Vec::new(),
            };
            write_diagnostics(&out, &partition_summaries(&chain.draws, &pairs)?, frac_a, frac_b, max_lag)
        })()
        .map_err(|e| e.in_stage("diag")),
        Command::Simulate { spec, seed, out } => (|| {
            let mut spec = SimSpec::read(&spec)?;
            if let Some(s) = seed {
                spec.seed = s;
            }
            generate(&spec)?.write(&out)
        })()
        .map_err(|e| e.in_stage("simulate")),
        Command::MseGraph {
            table,
            model,
            bma,
            prior,
            out,
        } => cmd_mse_graph(&table, model.as_deref(), bma, &prior, &out).map_err(|e| e.in_stage("mse-graph")),
        Command::MseLcmcr {
            table,
            lcmcr,
            prior,
            ncap,
            out,
        } => cmd_mse_lcmcr(&table, &lcmcr, prior, ncap, &out).map_err(|e| e.in_stage("mse-lcmcr")),
        Command::Average {
            draws,
            lists,
            model,
            ndraws,
            prior,
            lcmcr,
            out,
        } => cmd_average(&draws, lists.as_deref(), &model, ndraws, &prior, &lcmcr, &out)
            .map_err(|e| e.in_stage("average")),
        Command::Pipeline { config, out } => run_pipeline_file(&config, &out).map(|r| {
            for w in r.fits.iter().flat_map(|f| &f.warnings).collect::<std::collections::BTreeSet<_>>() {
                eprintln!("linkmse: warning: {w}");
            }
        }),
        Command::EmitPlots { pooled, per_draw, out } => (|| {
            let pooled = read_posterior_csv(&pooled)?;
            let per: Vec<_> = per_draw.iter().map(|p| read_posterior_csv(p)).collect::<Result<_>>()?;
            let named: Vec<(String, _)> = per.iter().enumerate().map(|(i, p)| (format!("draw_{}", i + 1), p)).collect();
            emit_plot_data(&out, &pooled, &named)
        })()
        .map_err(|e| e.in_stage("emit-plots")),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("linkmse: {e}");
            ExitCode::FAILURE
        }
    }
}
