//! Bayesian record linkage and duplicate detection whose partition posterior
//! is propagated into capture-recapture population size estimation by
//! linkage-averaging.
//!
//! Stages, in pipeline order: [`ingest`] → [`compare`] → [`linkage`] →
//! [`histories`] → [`mse_graphical`] / [`mse_lcmcr`] → [`averaging`], with
//! [`diagnostics`] for chain checks and [`simulate`] for synthetic ground truth.

pub mod averaging;
pub mod compare;
pub mod diagnostics;
pub mod error;
pub mod histories;
pub mod ingest;
pub mod kvconf;
pub mod linkage;
pub mod mse_graphical;
pub mod mse_lcmcr;
pub mod pipeline;
pub mod simulate;
pub mod tbeta;
pub mod unionfind;

pub use error::{Error, Result};
