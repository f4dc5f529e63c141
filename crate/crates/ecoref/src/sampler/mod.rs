//! Gradient-based MCMC: multiple adaptive chains over any log density
//! that can evaluate itself and its gradient.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

mod diag;
mod nuts;

pub use diag::{summarize, ParamSummary};

use nuts::{find_reasonable_epsilon, transition, DualAverage, Phase};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid chain configuration: {reason}")]
    InvalidConfig { reason: String },
    #[error("no finite-density initial point after {attempts} jittered attempts")]
    InitializationFailed { attempts: usize },
    #[error("too few draws to summarize: {chains} chains x {iters} kept iterations")]
    TooFewDraws { chains: usize, iters: usize },
    #[error("io error writing {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

/// Sampler run settings.
#[derive(Debug, Clone)]
pub struct ChainConfig {
    pub chains: usize,
    pub warmup_iters: usize,
    pub sample_iters: usize,
    pub seed: u64,
    /// Dual-averaging target acceptance statistic.
    pub target_accept: f64,
    /// Trajectory doubling cap (2^depth leapfrog steps at most).
    pub max_leapfrog_depth: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            warmup_iters: 1000,
            sample_iters: 1000,
            seed: 0,
            target_accept: 0.8,
            max_leapfrog_depth: 10,
        }
    }
}

impl ChainConfig {
    fn validate(&self) -> Result<(), SamplerError> {
        if self.chains == 0
            || self.warmup_iters == 0
            || self.sample_iters == 0
            || self.max_leapfrog_depth == 0
        {
            return Err(SamplerError::InvalidConfig {
                reason: "chains, iteration counts and depth must be positive".to_string(),
            });
        }
        if !(0.0 < self.target_accept && self.target_accept < 1.0) {
            return Err(SamplerError::InvalidConfig {
                reason: format!("target_accept {} outside (0,1)", self.target_accept),
            });
        }
        Ok(())
    }
}

/// A target distribution: unnormalized log density with gradient.
///
/// Implementations must be safe to call from several chains at once.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;
    /// Writes the gradient into `grad` and returns the log density;
    /// `-inf` rejects the point.
    fn log_density_gradient(&self, position: &[f64], grad: &mut [f64]) -> f64;
}

/// Post-warmup draws, indexed (chain, iteration, parameter).
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    names: Vec<String>,
    chains: usize,
    iters: usize,
    params: usize,
    values: Vec<f64>,
    pub divergences: usize,
    /// Mean acceptance statistic over kept iterations, per chain.
    pub accept_stats: Vec<f64>,
    /// Adapted step size per chain.
    pub step_sizes: Vec<f64>,
}

impl PosteriorDraws {
    pub fn n_chains(&self) -> usize {
        self.chains
    }

    pub fn n_iters(&self) -> usize {
        self.iters
    }

    pub fn n_params(&self) -> usize {
        self.params
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rename_parameters(&mut self, names: Vec<String>) {
        assert_eq!(names.len(), self.params, "one name per parameter");
        self.names = names;
    }

    pub fn value(&self, chain: usize, iter: usize, param: usize) -> f64 {
        self.values[(chain * self.iters + iter) * self.params + param]
    }

    /// All kept draws of one parameter, chain-major order.
    pub fn merged(&self, param: usize) -> Vec<f64> {
        (0..self.chains)
            .flat_map(|c| (0..self.iters).map(move |t| self.value(c, t, param)))
            .collect()
    }

    /// Draws of one parameter split by chain.
    pub fn per_chain(&self, param: usize) -> Vec<Vec<f64>> {
        (0..self.chains)
            .map(|c| (0..self.iters).map(|t| self.value(c, t, param)).collect())
            .collect()
    }

    /// More than 1% divergent transitions marks the run unreliable.
    pub fn unreliable(&self) -> bool {
        self.divergences as f64 > 0.01 * (self.chains * self.iters) as f64
    }

    /// Tidy CSV of every kept draw: `chain,iteration,parameter,value`.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<(), SamplerError> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let io_err = |e: csv::Error| SamplerError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e),
        };
        writer
            .write_record(["chain", "iteration", "parameter", "value"])
            .map_err(io_err)?;
        for c in 0..self.chains {
            for t in 0..self.iters {
                for p in 0..self.params {
                    writer
                        .write_record([
                            c.to_string(),
                            t.to_string(),
                            self.names[p].clone(),
                            format!("{}", self.value(c, t, p)),
                        ])
                        .map_err(io_err)?;
                }
            }
        }
        let bytes = writer.into_inner().expect("in-memory writer");
        crate::ingest::io::write_atomic(path, &bytes).map_err(|e| SamplerError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e),
        })
    }
}

const INIT_ATTEMPTS: usize = 100;

struct ChainOutput {
    draws: Vec<f64>,
    divergences: usize,
    accept_mean: f64,
    step_size: f64,
}

/// Runs `config.chains` adaptive chains and returns the kept draws.
///
/// Warmup: dual-averaging step-size adaptation throughout; positions from
/// the second half of warmup estimate a diagonal metric, after which the
/// step size re-adapts briefly under the new metric. Chains differ only by
/// their seed stream, so a (seed, config, data) triple reproduces draws
/// bit for bit regardless of thread scheduling.
pub fn run_chains<T, I>(
    target: &T,
    init: I,
    config: &ChainConfig,
) -> Result<PosteriorDraws, SamplerError>
where
    T: LogDensity,
    I: Fn(&mut ChaCha12Rng) -> Vec<f64> + Sync,
{
    config.validate()?;
    let dim = target.dim();
    let mut outputs: Vec<Option<Result<ChainOutput, SamplerError>>> =
        (0..config.chains).map(|_| None).collect();

    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for chain in 0..config.chains {
            let init = &init;
            handles.push(scope.spawn(move || run_one_chain(target, init, config, chain)));
        }
        for (slot, handle) in outputs.iter_mut().zip(handles) {
            *slot = Some(handle.join().expect("chain thread panicked"));
        }
    });

    let mut values = Vec::with_capacity(config.chains * config.sample_iters * dim);
    let mut divergences = 0;
    let mut accept_stats = Vec::new();
    let mut step_sizes = Vec::new();
    for slot in outputs {
        let out = slot.expect("all chains collected")?;
        values.extend_from_slice(&out.draws);
        divergences += out.divergences;
        accept_stats.push(out.accept_mean);
        step_sizes.push(out.step_size);
    }
    debug_assert!(values.iter().all(|v| v.is_finite()));
    Ok(PosteriorDraws {
        names: (0..dim).map(|p| format!("param_{p}")).collect(),
        chains: config.chains,
        iters: config.sample_iters,
        params: dim,
        values,
        divergences,
        accept_stats,
        step_sizes,
    })
}

fn run_one_chain<T, I>(
    target: &T,
    init: &I,
    config: &ChainConfig,
    chain: usize,
) -> Result<ChainOutput, SamplerError>
where
    T: LogDensity,
    I: Fn(&mut ChaCha12Rng) -> Vec<f64>,
{
    let dim = target.dim();
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    rng.set_stream(chain as u64);

    let mut state = None;
    for _ in 0..INIT_ATTEMPTS {
        let q = init(&mut rng);
        assert_eq!(q.len(), dim, "initializer dimension mismatch");
        let mut grad = vec![0.0; dim];
        let logp = target.log_density_gradient(&q, &mut grad);
        if logp.is_finite() {
            state = Some(Phase {
                q,
                p: vec![0.0; dim],
                grad,
                logp,
            });
            break;
        }
    }
    let mut state = state.ok_or(SamplerError::InitializationFailed {
        attempts: INIT_ATTEMPTS,
    })?;

    let mut inv_metric = vec![1.0; dim];
    let eps0 = find_reasonable_epsilon(target, &state, &inv_metric, &mut rng);
    let mut adapter = DualAverage::new(eps0, config.target_accept);

    // Metric from the second half of warmup, minus a short tail where the
    // step size re-adapts under the new metric.
    let warmup = config.warmup_iters;
    let collect_start = warmup / 2;
    let collect_end = warmup
        .saturating_sub((warmup / 10).max(1))
        .max(collect_start);
    let mut collected: Vec<f64> = Vec::new();

    for t in 0..warmup {
        let step = transition(
            target,
            &state,
            adapter.current(),
            config.max_leapfrog_depth,
            &inv_metric,
            &mut rng,
        );
        state = step.state;
        adapter.update(step.accept_stat);
        if t >= collect_start && t < collect_end {
            collected.extend_from_slice(&state.q);
        }
        if t + 1 == collect_end {
            let n = collected.len() / dim;
            if n >= 10 {
                for d in 0..dim {
                    let series: Vec<f64> = (0..n).map(|s| collected[s * dim + d]).collect();
                    let var = crate::numeric::sample_variance(&series);
                    let nf = n as f64;
                    inv_metric[d] = (nf / (nf + 5.0)) * var + (5.0 / (nf + 5.0)) * 1e-3;
                }
                let eps = find_reasonable_epsilon(target, &state, &inv_metric, &mut rng);
                adapter = DualAverage::new(eps, config.target_accept);
            }
        }
    }

    let eps = adapter.adapted().clamp(1e-10, 1e7);
    let mut draws = Vec::with_capacity(config.sample_iters * dim);
    let mut divergences = 0usize;
    let mut accept_sum = 0.0;
    for _ in 0..config.sample_iters {
        let step = transition(
            target,
            &state,
            eps,
            config.max_leapfrog_depth,
            &inv_metric,
            &mut rng,
        );
        state = step.state;
        if step.divergent {
            divergences += 1;
        }
        accept_sum += step.accept_stat;
        draws.extend_from_slice(&state.q);
    }

    Ok(ChainOutput {
        draws,
        divergences,
        accept_mean: accept_sum / config.sample_iters as f64,
        step_size: eps,
    })
}
