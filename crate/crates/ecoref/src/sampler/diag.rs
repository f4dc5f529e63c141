//! Convergence diagnostics and posterior summaries: empirical quantiles,
//! rank-normalized split R-hat (bulk and folded), and bulk effective
//! sample size with Geyer's initial positive/monotone truncation.

use super::{PosteriorDraws, SamplerError};
use crate::numeric::{average_ranks, inverse_normal_cdf, mean, quantile_of, sample_variance};

/// Posterior summary of one parameter.
#[derive(Debug, Clone)]
pub struct ParamSummary {
    pub name: String,
    pub median: f64,
    pub lo50: f64,
    pub hi50: f64,
    pub lo95: f64,
    pub hi95: f64,
    /// None when the parameter is constant across all draws.
    pub split_rhat: Option<f64>,
    pub bulk_ess: Option<f64>,
}

/// Summarizes every parameter: central intervals by type-7 quantiles over
/// the merged draws, split R-hat and bulk ESS on rank-normalized split
/// chains. Needs at least 2 chains and 100 kept draws in total.
pub fn summarize(draws: &PosteriorDraws) -> Result<Vec<ParamSummary>, SamplerError> {
    let chains = draws.n_chains();
    let iters = draws.n_iters();
    if chains < 2 || chains * iters < 100 {
        return Err(SamplerError::TooFewDraws { chains, iters });
    }

    let mut out = Vec::with_capacity(draws.n_params());
    for p in 0..draws.n_params() {
        let merged = draws.merged(p);
        let constant = merged.iter().all(|&v| v == merged[0]);
        let (split_rhat, bulk_ess) = if constant {
            (None, None)
        } else {
            let splits = split_in_half(&draws.per_chain(p));
            let z = rank_normalize(&splits);
            let bulk = rhat_basic(&z);
            let folded = rhat_basic(&rank_normalize(&fold(&splits)));
            (Some(bulk.max(folded)), Some(ess_bulk(&z)))
        };
        out.push(ParamSummary {
            name: draws.names()[p].clone(),
            median: quantile_of(&merged, 0.5),
            lo50: quantile_of(&merged, 0.25),
            hi50: quantile_of(&merged, 0.75),
            lo95: quantile_of(&merged, 0.025),
            hi95: quantile_of(&merged, 0.975),
            split_rhat,
            bulk_ess,
        });
    }
    Ok(out)
}

/// Each chain becomes two half-chains; the middle draw is dropped when the
/// length is odd.
fn split_in_half(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(chains.len() * 2);
    for chain in chains {
        let half = chain.len() / 2;
        out.push(chain[..half].to_vec());
        out.push(chain[chain.len() - half..].to_vec());
    }
    out
}

/// Pooled average ranks mapped through the normal quantile function with
/// the (r - 3/8)/(S + 1/4) offset.
fn rank_normalize(seqs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let pooled: Vec<f64> = seqs.iter().flatten().copied().collect();
    let ranks = average_ranks(&pooled);
    let total = pooled.len() as f64;
    let mut iter = ranks.into_iter();
    seqs.iter()
        .map(|seq| {
            seq.iter()
                .map(|_| {
                    let r = iter.next().expect("rank per value");
                    inverse_normal_cdf((r - 0.375) / (total + 0.25))
                })
                .collect()
        })
        .collect()
}

/// Fold around the pooled median to expose tail differences.
fn fold(seqs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let pooled: Vec<f64> = seqs.iter().flatten().copied().collect();
    let med = quantile_of(&pooled, 0.5);
    seqs.iter()
        .map(|seq| seq.iter().map(|&v| (v - med).abs()).collect())
        .collect()
}

/// Classic potential scale reduction over equal-length sequences.
fn rhat_basic(seqs: &[Vec<f64>]) -> f64 {
    let n = seqs[0].len() as f64;
    let means: Vec<f64> = seqs.iter().map(|s| mean(s)).collect();
    let vars: Vec<f64> = seqs.iter().map(|s| sample_variance(s)).collect();
    let w = mean(&vars);
    let b_over_n = sample_variance(&means);
    let var_plus = (n - 1.0) / n * w + b_over_n;
    (var_plus / w).sqrt()
}

/// Bulk effective sample size from rank-normalized split chains.
fn ess_bulk(seqs: &[Vec<f64>]) -> f64 {
    let m = seqs.len();
    let n = seqs[0].len();
    let means: Vec<f64> = seqs.iter().map(|s| mean(s)).collect();
    let vars: Vec<f64> = seqs.iter().map(|s| sample_variance(s)).collect();
    let w = mean(&vars);
    let b_over_n = sample_variance(&means);
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b_over_n;

    // Mean autocovariance across sequences at each lag (biased, 1/n).
    let acov = |t: usize| -> f64 {
        let mut total = 0.0;
        for (s, seq) in seqs.iter().enumerate() {
            let mu = means[s];
            let mut c = 0.0;
            for i in 0..n - t {
                c += (seq[i] - mu) * (seq[i + t] - mu);
            }
            total += c / n as f64;
        }
        total / m as f64
    };

    let rho = |t: usize| 1.0 - (w - acov(t)) / var_plus;

    // Geyer initial positive + monotone sequence.
    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 0usize;
    while t + 1 < n {
        let pair = rho(t) + rho(t + 1);
        if pair <= 0.0 {
            break;
        }
        let capped = pair.min(prev_pair);
        tau += 2.0 * capped;
        prev_pair = capped;
        t += 2;
    }
    let total = (m * n) as f64;
    (total / tau.max(1e-8)).min(total * 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    fn fake_draws(chains: usize, iters: usize, gen: impl Fn(usize, usize) -> f64) -> PosteriorDraws {
        let mut values = Vec::new();
        for c in 0..chains {
            for t in 0..iters {
                values.push(gen(c, t));
            }
        }
        PosteriorDraws {
            names: vec!["x".to_string()],
            chains,
            iters,
            params: 1,
            values,
            divergences: 0,
            accept_stats: vec![1.0; chains],
            step_sizes: vec![0.1; chains],
        }
    }

    #[test]
    fn constant_parameter_reports_not_applicable() {
        let draws = fake_draws(2, 100, |_, _| 3.5);
        let s = &summarize(&draws).unwrap()[0];
        assert_eq!(s.median, 3.5);
        assert_eq!(s.lo95, s.hi95);
        assert!(s.split_rhat.is_none());
        assert!(s.bulk_ess.is_none());
    }

    #[test]
    fn iid_chains_mix_cleanly() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut values = Vec::new();
        for _ in 0..2 * 500 {
            let z: f64 = rng.sample(StandardNormal);
            values.push(z);
        }
        let draws = PosteriorDraws {
            names: vec!["x".to_string()],
            chains: 2,
            iters: 500,
            params: 1,
            values,
            divergences: 0,
            accept_stats: vec![1.0; 2],
            step_sizes: vec![0.1; 2],
        };
        let s = &summarize(&draws).unwrap()[0];
        assert!(s.split_rhat.unwrap() < 1.01, "rhat {:?}", s.split_rhat);
        let ess = s.bulk_ess.unwrap();
        assert!(ess > 500.0, "ess {ess}");
    }

    #[test]
    fn disjoint_chains_fail_rhat() {
        let draws = fake_draws(2, 100, |c, t| c as f64 * 10.0 + (t % 7) as f64 * 0.01);
        // Rank normalization bounds how far R-hat can blow up, but
        // disjoint chains still land far above the 1.01 mixing bar.
        let s = &summarize(&draws).unwrap()[0];
        assert!(s.split_rhat.unwrap() > 1.5);
    }

    #[test]
    fn quantiles_use_type7_interpolation() {
        // Values 1..=100 over two chains.
        let draws = fake_draws(2, 50, |c, t| (c * 50 + t + 1) as f64);
        let s = &summarize(&draws).unwrap()[0];
        assert_eq!(s.median, 50.5);
        assert!((s.lo95 - 3.475).abs() < 1e-12);
        assert!((s.hi95 - 97.525).abs() < 1e-12);
    }

    #[test]
    fn too_few_draws_is_an_error() {
        let draws = fake_draws(1, 300, |_, t| t as f64);
        assert!(matches!(
            summarize(&draws),
            Err(SamplerError::TooFewDraws { .. })
        ));
        let draws = fake_draws(2, 40, |_, t| t as f64);
        assert!(matches!(
            summarize(&draws),
            Err(SamplerError::TooFewDraws { .. })
        ));
    }
}
