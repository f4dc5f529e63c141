//! Ecological inference of latent journal quality from institution-level
//! research-assessment profiles.
//!
//! Published assessment results report only aggregate outcome profiles per
//! institution, while the journals behind each submission are public. This
//! crate estimates per-journal success probabilities from those margins,
//! via a Poisson-binomial Bayesian model sampled with Hamiltonian Monte
//! Carlo and, independently, an EM algorithm over noncentral multivariate
//! hypergeometric imputations. On top of the fits it computes how much of
//! an aggregate outcome is attributable to publication venue: predicted
//! profiles, the index of dissimilarity, and the redistribution of
//! monetary reward.
//!
//! Start with the runnable programs in `examples/`; the `ecoref` binary
//! wraps the same pipeline as subcommands (`ingest`, `fit`, `cv`,
//! `report`).

pub mod cli;
pub mod em;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod numeric;
pub mod pbinom;
pub mod sampler;
pub mod seeds;
pub mod synthetic;
