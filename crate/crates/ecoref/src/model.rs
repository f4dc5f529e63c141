//! The Bayesian posterior over latent journal success probabilities.
//!
//! Each institution's count of top-rated outputs is Poisson-binomial: one
//! Bernoulli trial per submitted article, with success probability set by
//! the article's journal (and an institution-level environment covariate
//! on the logit scale). Journal probabilities share a Beta prior whose
//! mean and concentration carry their own hyperpriors, so the shrinkage
//! strength is learned from the data. The model is fitted once per target
//! level (top ratings, and the cumulative top-or-next level); the
//! probability of the middle level follows by subtraction.

use statrs::function::gamma::{digamma, ln_gamma};
use thiserror::Error;

use crate::ingest::{CountsMatrix, InstitutionProfile};
use crate::numeric::{log_sigmoid, logit, quantile_of, sigmoid};
use crate::pbinom::{self, BernoulliVector, PbinomError};
use crate::sampler::{run_chains, ChainConfig, LogDensity, PosteriorDraws, SamplerError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {reason}")]
    DimensionMismatch { reason: String },
    #[error("invalid state: {reason}")]
    InvalidState { reason: String },
    #[error("invalid data: {reason}")]
    InvalidData { reason: String },
    #[error(transparent)]
    Pbinom(#[from] PbinomError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// Which observed outcome the model is fitted against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetLevel {
    /// Success = a top (4*) rating.
    FourStar,
    /// Success = top rating or one below (3* or 4*).
    ThreePlus,
}

impl TargetLevel {
    pub fn observed(&self, profile: &InstitutionProfile) -> u32 {
        match self {
            Self::FourStar => profile.y4,
            Self::ThreePlus => profile.y34,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::FourStar => "4star",
            Self::ThreePlus => "3plus",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "4star" | "4" | "four" => Some(Self::FourStar),
            "3plus" | "34" | "three-plus" => Some(Self::ThreePlus),
            _ => None,
        }
    }
}

/// Hyperprior on the Beta concentration: Gamma(1/10, 1/20) (shape, rate),
/// i.e. mean 2 and variance 40.
const GAMMA_SHAPE: f64 = 0.1;
const GAMMA_RATE: f64 = 0.05;
/// Prior on the environment coefficient: Normal(0, 3²).
const ALPHA_SD: f64 = 3.0;

/// Model parameters on their natural scales.
#[derive(Debug, Clone)]
pub struct ModelState {
    /// Per-column logit success probabilities.
    pub theta: Vec<f64>,
    /// Beta prior mean, in (0, 1).
    pub mu: f64,
    /// Beta prior concentration, positive.
    pub gamma: f64,
    /// Environment covariate coefficient.
    pub alpha: f64,
}

impl ModelState {
    fn validate(&self, journals: usize) -> Result<(), ModelError> {
        if self.theta.len() != journals {
            return Err(ModelError::DimensionMismatch {
                reason: format!("{} theta entries for {journals} columns", self.theta.len()),
            });
        }
        if self.theta.iter().any(|t| !t.is_finite()) {
            return Err(ModelError::InvalidState {
                reason: "non-finite theta".to_string(),
            });
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(ModelError::InvalidState {
                reason: format!("mu {} outside (0,1)", self.mu),
            });
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(ModelError::InvalidState {
                reason: format!("gamma {} not positive", self.gamma),
            });
        }
        if !self.alpha.is_finite() {
            return Err(ModelError::InvalidState {
                reason: "non-finite alpha".to_string(),
            });
        }
        Ok(())
    }
}

/// Posterior density over one target level, bound to a dataset.
pub struct Posterior<'a> {
    counts: &'a CountsMatrix,
    profiles: &'a [InstitutionProfile],
    target: TargetLevel,
    y: Vec<u32>,
}

struct Eval {
    logp: f64,
    d_theta: Vec<f64>,
    d_mu: f64,
    d_gamma: f64,
    d_alpha: f64,
}

impl Eval {
    fn rejected(journals: usize) -> Self {
        Self {
            logp: f64::NEG_INFINITY,
            d_theta: vec![0.0; journals],
            d_mu: 0.0,
            d_gamma: 0.0,
            d_alpha: 0.0,
        }
    }
}

impl<'a> Posterior<'a> {
    pub fn new(
        counts: &'a CountsMatrix,
        profiles: &'a [InstitutionProfile],
        target: TargetLevel,
    ) -> Result<Self, ModelError> {
        if counts.n_institutions() != profiles.len() {
            return Err(ModelError::DimensionMismatch {
                reason: format!(
                    "{} profiles for {} institutions",
                    profiles.len(),
                    counts.n_institutions()
                ),
            });
        }
        let mut y = Vec::with_capacity(profiles.len());
        for (i, p) in profiles.iter().enumerate() {
            if counts.institutions()[i] != p.institution {
                return Err(ModelError::DimensionMismatch {
                    reason: format!(
                        "row {i}: counts has {}, profiles has {}",
                        counts.institutions()[i],
                        p.institution
                    ),
                });
            }
            let n = counts.row_sum(i);
            if p.y4 > p.y34 || p.y34 > n {
                return Err(ModelError::InvalidData {
                    reason: format!(
                        "{}: need y4 {} <= y34 {} <= total {}",
                        p.institution, p.y4, p.y34, n
                    ),
                });
            }
            y.push(target.observed(p));
        }
        Ok(Self {
            counts,
            profiles,
            target,
            y,
        })
    }

    pub fn target(&self) -> TargetLevel {
        self.target
    }

    pub fn n_columns(&self) -> usize {
        self.counts.n_columns()
    }

    /// Unconstrained dimension: one theta per column plus (mu, gamma,
    /// alpha).
    pub fn dim(&self) -> usize {
        self.n_columns() + 3
    }

    pub fn parameter_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .counts
            .columns()
            .iter()
            .map(|c| format!("theta[{}]", c.name))
            .collect();
        names.push("mu".to_string());
        names.push("gamma".to_string());
        names.push("alpha".to_string());
        names
    }

    /// Joint log density of data and parameters on the natural scale:
    /// Poisson-binomial likelihood, Beta prior on each journal probability
    /// (with the logit-transform Jacobian), and the hyperpriors.
    pub fn log_posterior(&self, state: &ModelState) -> Result<f64, ModelError> {
        state.validate(self.n_columns())?;
        Ok(self.eval(state, false).logp)
    }

    /// Gradient of the unconstrained-parameterization log density at
    /// `position`; see [`Posterior::position_from_state`] for the layout.
    pub fn grad_log_posterior(&self, position: &[f64]) -> Result<(f64, Vec<f64>), ModelError> {
        if position.len() != self.dim() {
            return Err(ModelError::DimensionMismatch {
                reason: format!("{} position entries for dim {}", position.len(), self.dim()),
            });
        }
        let mut grad = vec![0.0; self.dim()];
        let logp = self.log_density_gradient(position, &mut grad);
        Ok((logp, grad))
    }

    /// Position layout: `[theta_0..theta_J, logit(mu), ln(gamma), alpha]`.
    pub fn position_from_state(&self, state: &ModelState) -> Vec<f64> {
        let mut pos = state.theta.clone();
        pos.push(logit(state.mu));
        pos.push(state.gamma.ln());
        pos.push(state.alpha);
        pos
    }

    pub fn state_from_position(&self, position: &[f64]) -> ModelState {
        let j = self.n_columns();
        ModelState {
            theta: position[..j].to_vec(),
            mu: sigmoid(position[j]),
            gamma: position[j + 1].exp(),
            alpha: position[j + 2],
        }
    }

    fn eval(&self, state: &ModelState, with_grad: bool) -> Eval {
        let journals = self.n_columns();
        let mut out = Eval {
            logp: 0.0,
            d_theta: vec![0.0; journals],
            d_mu: 0.0,
            d_gamma: 0.0,
            d_alpha: 0.0,
        };

        // Likelihood: one Poisson-binomial term per institution, trials
        // expanded per article with probability sigmoid(theta_j + alpha e_i).
        for (i, profile) in self.profiles.iter().enumerate() {
            let envir = profile.envir;
            let mut probs = Vec::with_capacity(self.counts.row_sum(i) as usize);
            let mut groups: Vec<(usize, u32)> = Vec::new();
            for j in 0..journals {
                let x = self.counts.count(i, j);
                if x == 0 {
                    continue;
                }
                let p = sigmoid(state.theta[j] + state.alpha * envir);
                if p <= 0.0 || p >= 1.0 {
                    return Eval::rejected(journals);
                }
                probs.extend(std::iter::repeat(p).take(x as usize));
                groups.push((j, x));
            }
            if probs.is_empty() {
                continue;
            }
            let bv = BernoulliVector::new(probs).expect("probabilities validated");
            let table = pbinom::log_pmf_dp(&bv);
            let k = self.y[i] as usize;
            let lp = table.log_prob(k);
            if lp == f64::NEG_INFINITY {
                return Eval::rejected(journals);
            }
            out.logp += lp;
            if with_grad {
                let grad = match pbinom::grad_log_pmf_with_table(&bv, k, &table) {
                    Ok(g) => g,
                    Err(_) => return Eval::rejected(journals),
                };
                let mut t = 0usize;
                for &(j, x) in &groups {
                    // Repeated trials of one journal share the component.
                    let component = grad[t];
                    let weight = f64::from(x) * component;
                    out.d_theta[j] += weight;
                    out.d_alpha += envir * weight;
                    t += x as usize;
                }
            }
        }

        // Beta prior on each journal probability, folded with the
        // logit-transform Jacobian: a ln s(t) + b ln s(-t) - ln B(a, b).
        let a = state.gamma * state.mu;
        let b = state.gamma * (1.0 - state.mu);
        let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(state.gamma);
        let mut sum_lp = 0.0;
        let mut sum_lq = 0.0;
        for (j, &t) in state.theta.iter().enumerate() {
            let lp = log_sigmoid(t);
            let lq = log_sigmoid(-t);
            out.logp += a * lp + b * lq - ln_beta;
            sum_lp += lp;
            sum_lq += lq;
            if with_grad {
                out.d_theta[j] += state.gamma * (state.mu - sigmoid(t));
            }
        }

        // Hyperpriors: mu ~ Uniform(0,1) contributes nothing; gamma ~
        // Gamma(shape, rate); alpha ~ Normal(0, sd²).
        out.logp += GAMMA_SHAPE * GAMMA_RATE.ln() - ln_gamma(GAMMA_SHAPE)
            + (GAMMA_SHAPE - 1.0) * state.gamma.ln()
            - GAMMA_RATE * state.gamma;
        out.logp += -0.5 * (2.0 * std::f64::consts::PI * ALPHA_SD * ALPHA_SD).ln()
            - state.alpha * state.alpha / (2.0 * ALPHA_SD * ALPHA_SD);

        if with_grad {
            let j = state.theta.len() as f64;
            let d_ln_beta_da = digamma(a) - digamma(state.gamma);
            let d_ln_beta_db = digamma(b) - digamma(state.gamma);
            let da = sum_lp - j * d_ln_beta_da;
            let db = sum_lq - j * d_ln_beta_db;
            out.d_mu = state.gamma * (da - db);
            out.d_gamma = state.mu * da + (1.0 - state.mu) * db
                + (GAMMA_SHAPE - 1.0) / state.gamma
                - GAMMA_RATE;
            out.d_alpha += -state.alpha / (ALPHA_SD * ALPHA_SD);
        }
        out
    }
}

impl LogDensity for Posterior<'_> {
    fn dim(&self) -> usize {
        self.n_columns() + 3
    }

    /// Log density and gradient in the unconstrained parameterization
    /// (theta free, mu via logit, gamma via log), Jacobians included.
    fn log_density_gradient(&self, position: &[f64], grad: &mut [f64]) -> f64 {
        let j = self.n_columns();
        grad.iter_mut().for_each(|g| *g = 0.0);
        let m = position[j];
        let l = position[j + 1];
        let state = self.state_from_position(position);
        if !state.gamma.is_finite()
            || state.gamma == 0.0
            || state.mu == 0.0
            || state.mu == 1.0
            || state.theta.iter().any(|t| !t.is_finite())
            || !state.alpha.is_finite()
        {
            return f64::NEG_INFINITY;
        }
        let eval = self.eval(&state, true);
        if eval.logp == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let logp = eval.logp + log_sigmoid(m) + log_sigmoid(-m) + l;
        grad[..j].copy_from_slice(&eval.d_theta);
        grad[j] = eval.d_mu * state.mu * (1.0 - state.mu) + (1.0 - 2.0 * state.mu);
        grad[j + 1] = eval.d_gamma * state.gamma + 1.0;
        grad[j + 2] = eval.d_alpha;
        logp
    }
}

/// Per-journal posterior summary of a success probability.
#[derive(Debug, Clone)]
pub struct JournalSummary {
    pub column: String,
    pub article_count: u64,
    pub median: f64,
    pub lo50: f64,
    pub hi50: f64,
    pub lo95: f64,
    pub hi95: f64,
}

fn summarize_column(column: &str, article_count: u64, draws: &[f64]) -> JournalSummary {
    JournalSummary {
        column: column.to_string(),
        article_count,
        median: quantile_of(draws, 0.5),
        lo50: quantile_of(draws, 0.25),
        hi50: quantile_of(draws, 0.75),
        lo95: quantile_of(draws, 0.025),
        hi95: quantile_of(draws, 0.975),
    }
}

/// A fitted Hamiltonian Monte Carlo run for one target level.
pub struct HmcFit {
    pub draws: PosteriorDraws,
    /// Per-column success-probability draws (merged across chains).
    pub pi_draws: Vec<Vec<f64>>,
    pub summaries: Vec<JournalSummary>,
}

/// Samples the posterior for one target level.
///
/// Initial points are overdispersed but finite-density: theta from the
/// same logit-normal(0,1) family the EM initializer uses, mu uniform in
/// (0.2, 0.8), gamma from its prior truncated to (0.1, 10), alpha 0.
pub fn fit_hmc(
    counts: &CountsMatrix,
    profiles: &[InstitutionProfile],
    target: TargetLevel,
    config: &ChainConfig,
) -> Result<HmcFit, ModelError> {
    use rand::Rng;
    use rand_distr::{Distribution, Gamma as GammaDist, StandardNormal};

    let posterior = Posterior::new(counts, profiles, target)?;
    let journals = posterior.n_columns();
    let gamma_prior = GammaDist::new(GAMMA_SHAPE, 1.0 / GAMMA_RATE).expect("valid gamma");
    let init = move |rng: &mut rand_chacha::ChaCha12Rng| -> Vec<f64> {
        let mut pos = Vec::with_capacity(journals + 3);
        for _ in 0..journals {
            let z: f64 = rng.sample(StandardNormal);
            pos.push(z);
        }
        let mu: f64 = rng.gen_range(0.2..0.8);
        pos.push(logit(mu));
        let gamma = loop {
            let g = gamma_prior.sample(rng);
            if (0.1..10.0).contains(&g) {
                break g;
            }
        };
        pos.push(gamma.ln());
        pos.push(0.0);
        pos
    };

    let draws = run_chains(&posterior, init, config)?;
    let names = posterior.parameter_names();
    debug_assert_eq!(names.len(), draws.n_params());

    let mut pi_draws = Vec::with_capacity(journals);
    let mut summaries = Vec::with_capacity(journals);
    for j in 0..journals {
        let pi: Vec<f64> = draws.merged(j).iter().map(|&t| sigmoid(t)).collect();
        summaries.push(summarize_column(
            &counts.columns()[j].name,
            counts.column_sum(j),
            &pi,
        ));
        pi_draws.push(pi);
    }
    Ok(HmcFit {
        draws,
        pi_draws,
        summaries,
    })
}

/// Fraction of negative middle-level draws above which a journal is
/// flagged: the ordering of its two cumulative fits disagrees too often.
pub const NEGATIVE_MASS_FLAG_THRESHOLD: f64 = 0.10;

/// Middle-level (3*) probability summary derived from two independent
/// fits.
#[derive(Debug, Clone)]
pub struct ThreeStarReport {
    pub column: String,
    pub median: f64,
    pub lo50: f64,
    pub hi50: f64,
    pub lo95: f64,
    pub hi95: f64,
    pub frac_negative: f64,
    pub flagged: bool,
}

/// Drawwise `pi3 = pi34 - pi4` per journal.
///
/// The two fits are independent, so any pairing is exchangeable; draws are
/// paired in their natural order (thinned by stride when lengths differ)
/// to keep runs reproducible. Negative values are retained — they are
/// evidence, not noise — and journals with more than 10% negative mass are
/// flagged.
pub fn derive_three_star(
    names: &[String],
    pi4_draws: &[Vec<f64>],
    pi34_draws: &[Vec<f64>],
) -> Result<Vec<ThreeStarReport>, ModelError> {
    if names.len() != pi4_draws.len() || names.len() != pi34_draws.len() {
        return Err(ModelError::DimensionMismatch {
            reason: format!(
                "{} names, {} pi4 streams, {} pi34 streams",
                names.len(),
                pi4_draws.len(),
                pi34_draws.len()
            ),
        });
    }
    let mut reports = Vec::with_capacity(names.len());
    for ((name, d4), d34) in names.iter().zip(pi4_draws).zip(pi34_draws) {
        if d4.is_empty() || d34.is_empty() {
            return Err(ModelError::DimensionMismatch {
                reason: format!("empty draw stream for {name}"),
            });
        }
        let n = d4.len().min(d34.len());
        let take = |v: &[f64], k: usize| v[k * v.len() / n];
        let diffs: Vec<f64> = (0..n).map(|k| take(d34, k) - take(d4, k)).collect();
        let frac_negative =
            diffs.iter().filter(|&&d| d < 0.0).count() as f64 / diffs.len() as f64;
        let s = summarize_column(name, 0, &diffs);
        reports.push(ThreeStarReport {
            column: s.column,
            median: s.median,
            lo50: s.lo50,
            hi50: s.hi50,
            lo95: s.lo95,
            hi95: s.hi95,
            frac_negative,
            flagged: frac_negative > NEGATIVE_MASS_FLAG_THRESHOLD,
        });
    }
    Ok(reports)
}
