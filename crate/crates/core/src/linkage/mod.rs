//! Bayesian record linkage over a candidate set of record pairs.

pub mod enumerate;
pub mod gibbs;
pub mod mixture;
pub mod model;
pub mod partition;

pub use enumerate::{exact_posterior_enumeration, feasible_partitions, PartitionPosterior};
pub use gibbs::{gibbs_update_labels, run_linkage_sampler, LinkageChain, McmcConfig, PartitionSampler};
pub use mixture::{mixture_rl_sampler, transitive_closure, MixtureChain, MixtureDraw};
pub use model::{
    gibbs_update_params, log_marginal_likelihood, LinkageParams, StatusTallies, TruncationPoints,
};
pub use partition::{log_partition_prior, CandidateIndex, PartitionLabeling};
