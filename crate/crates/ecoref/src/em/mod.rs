//! Maximum-likelihood journal effects via expectation–maximization.
//!
//! The latent quantity is how many of each institution's successes came
//! from each journal. Given shared journal odds, its conditional law is a
//! noncentral multivariate hypergeometric; the E-step imputes its
//! expectation, the M-step refits the logistic journal-effects model, and
//! the loop repeats until the journal effects stop moving. The strength of
//! the pseudo-data regularization is chosen by cross-validation over held
//! out institutions.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

pub mod rasch;
pub mod urn;

pub use rasch::{fit_rasch, RaschFit};
pub use urn::{
    mvh_approx_expectation, mvh_exact_expectation, mvh_exact_expectation_with_limit,
    HypergeometricUrn, DEFAULT_ENUMERATION_LIMIT,
};

use crate::ingest::{CountsMatrix, InstitutionProfile};
use crate::model::TargetLevel;
use crate::seeds;

#[derive(Debug, Error)]
pub enum EmError {
    #[error("invalid urn: {reason}")]
    InvalidUrn { reason: String },
    #[error("support enumeration exceeds limit {limit}; use the approximation")]
    SupportTooLarge { limit: u128 },
    #[error("dimension mismatch: {reason}")]
    DimensionMismatch { reason: String },
    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: String },
    #[error(
        "imputed successes {successes} outside [0, {trials}] for {institution} / {column}"
    )]
    InvalidImputation {
        institution: String,
        column: String,
        successes: f64,
        trials: f64,
    },
    #[error("singular system in {context}")]
    Singular { context: String },
    #[error("no convergence after {iterations} iterations (gradient norm {grad_norm:.3e})")]
    NonConvergence { iterations: usize, grad_norm: f64 },
    #[error("parameter movement stopped decreasing for {window} iterations (oscillation)")]
    Oscillation { window: usize },
}

/// EM driver settings.
#[derive(Debug, Clone)]
pub struct EmConfig {
    /// Pseudo-articles per journal contributed by the pseudo-institution.
    pub pseudo_strength: f64,
    /// Convergence threshold on max |Δβ̂|.
    pub tol: f64,
    pub max_iters: usize,
    pub init_seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            pseudo_strength: 1.0,
            tol: 1e-6,
            max_iters: 500,
            init_seed: 0,
        }
    }
}

impl EmConfig {
    fn validate(&self) -> Result<(), EmError> {
        if !(self.pseudo_strength > 0.0) || !self.tol.is_finite() || self.tol <= 0.0 || self.max_iters == 0 {
            return Err(EmError::InvalidConfig {
                reason: "pseudo_strength, tol and max_iters must be positive".to_string(),
            });
        }
        Ok(())
    }
}

/// Result of one EM run.
#[derive(Debug, Clone)]
pub struct EmOutcome {
    pub fit: RaschFit,
    /// Final imputed fractional success counts, institutions × columns.
    pub imputed: Vec<f64>,
    pub iterations: usize,
    /// False when the iteration budget ran out before max |Δβ̂| < tol.
    pub converged: bool,
}

const OSCILLATION_WINDOW: usize = 50;

/// Runs the EM loop: initialize journal odds from logit-normal(0,1) draws,
/// impute expected per-journal successes with those shared odds, refit the
/// journal-effects model, update `ω_j = exp(μ̂ + β̂_j)`, repeat.
/// Deterministic given the seed.
pub fn em_run(
    counts: &CountsMatrix,
    profiles: &[InstitutionProfile],
    target: TargetLevel,
    config: &EmConfig,
) -> Result<EmOutcome, EmError> {
    config.validate()?;
    check_alignment(counts, profiles)?;
    let n_inst = counts.n_institutions();
    let n_cols = counts.n_columns();
    let targets: Vec<u32> = profiles.iter().map(|p| target.observed(p)).collect();

    let mut rng = ChaCha12Rng::seed_from_u64(config.init_seed);
    let mut omega: Vec<f64> = (0..n_cols)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            z.exp()
        })
        .collect();

    let mut imputed = vec![0.0; n_inst * n_cols];
    let mut prev_beta: Option<Vec<f64>> = None;
    let mut best_movement = f64::INFINITY;
    let mut stalled_for = 0usize;
    for iteration in 1..=config.max_iters {
        for i in 0..n_inst {
            let urn = HypergeometricUrn::new(counts.row(i).to_vec(), omega.clone(), targets[i])
                .map_err(|e| EmError::InvalidUrn {
                    reason: format!("institution {}: {e}", counts.institutions()[i]),
                })?;
            let expectation = mvh_approx_expectation(&urn);
            imputed[i * n_cols..(i + 1) * n_cols].copy_from_slice(&expectation);
        }

        let fit = fit_rasch(&imputed, counts, config.pseudo_strength)?;
        for (j, w) in omega.iter_mut().enumerate() {
            *w = fit.journal_logit(j).exp();
        }

        let movement = match &prev_beta {
            None => f64::INFINITY,
            Some(prev) => fit
                .beta_hat
                .iter()
                .zip(prev)
                .map(|(b, p)| (b - p).abs())
                .fold(0.0, f64::max),
        };
        prev_beta = Some(fit.beta_hat.clone());

        if movement < config.tol {
            return Ok(EmOutcome {
                fit,
                imputed,
                iterations: iteration,
                converged: true,
            });
        }
        if movement < best_movement {
            best_movement = movement;
            stalled_for = 0;
        } else {
            stalled_for += 1;
            if stalled_for >= OSCILLATION_WINDOW {
                return Err(EmError::Oscillation {
                    window: OSCILLATION_WINDOW,
                });
            }
        }
        if iteration == config.max_iters {
            return Ok(EmOutcome {
                fit,
                imputed,
                iterations: iteration,
                converged: false,
            });
        }
    }
    unreachable!("loop returns on its last iteration")
}

fn check_alignment(
    counts: &CountsMatrix,
    profiles: &[InstitutionProfile],
) -> Result<(), EmError> {
    if counts.n_institutions() != profiles.len() {
        return Err(EmError::DimensionMismatch {
            reason: format!(
                "{} profile rows for {} institutions",
                profiles.len(),
                counts.n_institutions()
            ),
        });
    }
    for (i, p) in profiles.iter().enumerate() {
        if counts.institutions()[i] != p.institution {
            return Err(EmError::DimensionMismatch {
                reason: format!(
                    "row {i}: counts has {} but profiles has {}",
                    counts.institutions()[i],
                    p.institution
                ),
            });
        }
        if p.y4 > p.y34 || p.y34 > counts.row_sum(i) {
            return Err(EmError::DimensionMismatch {
                reason: format!(
                    "{}: y4 {} <= y34 {} <= total {} violated",
                    p.institution,
                    p.y4,
                    p.y34,
                    counts.row_sum(i)
                ),
            });
        }
    }
    Ok(())
}

/// Cross-validation settings for choosing the pseudo-data strength.
#[derive(Debug, Clone)]
pub struct CvConfig {
    pub folds: usize,
    pub grid: Vec<f64>,
    pub seed: u64,
    pub em: EmConfig,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            grid: vec![0.5, 1.0, 2.0, 4.0],
            seed: 0,
            em: EmConfig::default(),
        }
    }
}

/// One held-out evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct CvRecord {
    pub pseudo_strength: f64,
    pub fold: usize,
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub best_pseudo_strength: f64,
    pub records: Vec<CvRecord>,
    /// Mean dissimilarity per regularization level, in grid order.
    pub mean_delta: Vec<(f64, f64)>,
    /// Held-out cells whose journal had no training articles and fell back
    /// to the reference column's probability.
    pub unseen_fallbacks: usize,
}

/// K-fold cross-validation over institutions: for each regularization
/// level, fit on the other folds, predict the held-out institutions'
/// success counts from the fitted journal probabilities, and score the
/// binary index of dissimilarity `Σ|y − ŷ| / Σ N`. Returns the level
/// minimizing the mean.
pub fn cross_validate(
    counts: &CountsMatrix,
    profiles: &[InstitutionProfile],
    target: TargetLevel,
    cv: &CvConfig,
) -> Result<CvOutcome, EmError> {
    check_alignment(counts, profiles)?;
    let n_inst = counts.n_institutions();
    if cv.folds < 2 || cv.folds > n_inst {
        return Err(EmError::InvalidConfig {
            reason: format!("{} folds for {n_inst} institutions", cv.folds),
        });
    }
    if cv.grid.is_empty() {
        return Err(EmError::InvalidConfig {
            reason: "empty regularization grid".to_string(),
        });
    }

    // Random fold assignment: shuffle institutions, deal round-robin.
    let mut order: Vec<usize> = (0..n_inst).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seeds::substream(cv.seed, seeds::CV, 0));
    order.shuffle(&mut rng);
    let mut fold_of = vec![0usize; n_inst];
    for (pos, &inst) in order.iter().enumerate() {
        fold_of[inst] = pos % cv.folds;
    }

    let reference = counts.reference_column();
    let mut records = Vec::new();
    let mut unseen_fallbacks = 0usize;
    for (g, &strength) in cv.grid.iter().enumerate() {
        for fold in 0..cv.folds {
            let train: Vec<usize> = (0..n_inst).filter(|i| fold_of[*i] != fold).collect();
            let test: Vec<usize> = (0..n_inst).filter(|i| fold_of[*i] == fold).collect();
            let train_counts = counts.select_institutions(&train);
            let train_profiles: Vec<InstitutionProfile> =
                train.iter().map(|&i| profiles[i].clone()).collect();
            let em_config = EmConfig {
                pseudo_strength: strength,
                init_seed: seeds::substream(
                    cv.seed,
                    seeds::CV,
                    1 + (g * cv.folds + fold) as u64,
                ),
                ..cv.em.clone()
            };
            let outcome = em_run(&train_counts, &train_profiles, target, &em_config)?;

            // Journals with no training articles fall back to the
            // reference column's fitted probability.
            let seen: Vec<bool> = (0..counts.n_columns())
                .map(|j| train_counts.column_sum(j) > 0)
                .collect();
            let mut abs_err = 0.0;
            let mut total = 0u64;
            for &i in &test {
                let mut yhat = 0.0;
                for j in 0..counts.n_columns() {
                    let x = counts.count(i, j);
                    if x == 0 {
                        continue;
                    }
                    let prob = if seen[j] {
                        outcome.fit.journal_prob(j)
                    } else {
                        unseen_fallbacks += 1;
                        outcome.fit.journal_prob(reference)
                    };
                    yhat += f64::from(x) * prob;
                }
                abs_err += (f64::from(target.observed(&profiles[i])) - yhat).abs();
                total += u64::from(counts.row_sum(i));
            }
            records.push(CvRecord {
                pseudo_strength: strength,
                fold,
                delta: abs_err / total.max(1) as f64,
            });
        }
    }

    let mean_delta: Vec<(f64, f64)> = cv
        .grid
        .iter()
        .map(|&s| {
            let folds: Vec<f64> = records
                .iter()
                .filter(|r| r.pseudo_strength == s)
                .map(|r| r.delta)
                .collect();
            (s, folds.iter().sum::<f64>() / folds.len() as f64)
        })
        .collect();
    let best_pseudo_strength = mean_delta
        .iter()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .map(|(s, _)| *s)
        .unwrap();

    Ok(CvOutcome {
        best_pseudo_strength,
        records,
        mean_delta,
        unseen_fallbacks,
    })
}
