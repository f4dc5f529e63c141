//! Poisson-binomial distribution: the law of the number of successes among
//! independent Bernoulli trials with heterogeneous probabilities.
//!
//! The probability table is built by iterative convolution on the log
//! scale, which stays exact down to astronomically small tail masses. A
//! separate implementation of the classic recursive formula serves as a
//! cross-check oracle, and [`grad_log_pmf`] exposes the gradient of the
//! log-mass needed by gradient-based samplers.

use std::collections::HashMap;

use dashu_float::{round::mode::Zero, FBig};
use thiserror::Error;

use crate::numeric::{log_add_exp, log_sum_exp};

type BigFloat = FBig<Zero, 2>;

#[derive(Debug, Error, PartialEq)]
pub enum PbinomError {
    #[error("probability vector must be non-empty")]
    Empty,
    #[error("probability out of range or not finite: {0}")]
    InvalidProbability(f64),
    #[error("success count {k} exceeds trial count {n}")]
    CountOutOfRange { k: usize, n: usize },
    #[error("recursion does not support sure trials (p = 1); condition on them first")]
    SureTrial,
    #[error("gradient undefined at degenerate probability {0}")]
    DegenerateProbability(f64),
    #[error("alternating-sign recursion lost all precision")]
    PrecisionLoss,
}

/// Success probabilities of independent, non-identical Bernoulli trials.
///
/// One entry per trial; repeats are meaningful (several articles in the
/// same journal are separate trials sharing a probability).
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliVector {
    probs: Vec<f64>,
}

impl BernoulliVector {
    pub fn new(probs: Vec<f64>) -> Result<Self, PbinomError> {
        if probs.is_empty() {
            return Err(PbinomError::Empty);
        }
        for &p in &probs {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(PbinomError::InvalidProbability(p));
            }
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Full log-PMF of the success count, indices 0..=n.
#[derive(Debug, Clone)]
pub struct LogPmfTable {
    log_probs: Vec<f64>,
}

impl LogPmfTable {
    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    /// log Pr(K = k); `-inf` outside the support.
    pub fn log_prob(&self, k: usize) -> f64 {
        self.log_probs.get(k).copied().unwrap_or(f64::NEG_INFINITY)
    }

    pub fn prob(&self, k: usize) -> f64 {
        self.log_prob(k).exp()
    }

    /// Trial count n (table holds n+1 entries).
    pub fn trials(&self) -> usize {
        self.log_probs.len() - 1
    }

    /// |logsumexp(table)|, a cheap self-consistency measure.
    pub fn normalization_error(&self) -> f64 {
        log_sum_exp(&self.log_probs).abs()
    }

    /// Mean and variance of the tabulated distribution.
    pub fn table_moments(&self) -> (f64, f64) {
        let mut mean = 0.0;
        let mut second = 0.0;
        for (k, lp) in self.log_probs.iter().enumerate() {
            let p = lp.exp();
            mean += k as f64 * p;
            second += (k as f64) * (k as f64) * p;
        }
        (mean, second - mean * mean)
    }
}

/// Exact log-PMF by iterative convolution in log space.
///
/// Degenerate trials are conditioned away instead of entering the
/// convolution: p = 0 trials are skipped and p = 1 trials shift the
/// support, so no `-inf` arithmetic ever feeds the recurrence. The
/// interior probabilities are convolved in sorted order, which makes the
/// table bitwise reproducible under permutation of the input.
pub fn log_pmf_dp(probs: &BernoulliVector) -> LogPmfTable {
    let n = probs.len();
    let mut sure = 0usize;
    let mut active: Vec<f64> = Vec::with_capacity(n);
    for &p in probs.probs() {
        if p == 1.0 {
            sure += 1;
        } else if p > 0.0 {
            active.push(p);
        }
    }
    active.sort_by(f64::total_cmp);

    let mut table = vec![0.0f64];
    for &p in &active {
        let lp = p.ln();
        let lq = (-p).ln_1p();
        let t = table.len();
        let mut next = vec![f64::NEG_INFINITY; t + 1];
        next[0] = table[0] + lq;
        for k in 1..t {
            next[k] = log_add_exp(table[k] + lq, table[k - 1] + lp);
        }
        next[t] = table[t - 1] + lp;
        table = next;
    }

    let mut log_probs = vec![f64::NEG_INFINITY; n + 1];
    for (k, v) in table.into_iter().enumerate() {
        log_probs[k + sure] = v.min(0.0);
    }
    LogPmfTable { log_probs }
}

/// log Pr(K = k) via the alternating recursion
/// Pr(K = k) = (1/k) Σ_{j=1..k} (-1)^{j-1} Pr(K = k-j) Σ_l (p_l/(1-p_l))^j,
/// base case Pr(K = 0) = Π (1 - p_l).
///
/// The alternating terms cancel catastrophically: their magnitudes grow
/// like (max odds)^k while the result is a probability, so neither double
/// precision nor log-space sign tracking survives past a few dozen trials.
/// The recursion therefore runs in arbitrary-precision arithmetic, with
/// the precision sized from a fast double-precision bound on the term
/// magnitudes. This is a cross-check oracle for [`log_pmf_dp`], not a
/// hot-path routine.
pub fn log_pmf_shah(probs: &BernoulliVector, k: usize) -> Result<f64, PbinomError> {
    let mut table = shah_recursion(probs, k)?;
    Ok(table.pop().expect("table has k+1 entries"))
}

/// Full Shah-recursion table (all k in one pass); used by sweep tests.
pub fn log_pmf_shah_table(probs: &BernoulliVector) -> Result<Vec<f64>, PbinomError> {
    shah_recursion(probs, probs.len())
}

/// Hard ceiling on working precision; inputs needing more (probabilities
/// within ~1e-300 of 0 or 1 at large n) are rejected rather than ground
/// through.
const SHAH_MAX_PRECISION_BITS: usize = 1 << 20;

fn shah_recursion(probs: &BernoulliVector, k_max: usize) -> Result<Vec<f64>, PbinomError> {
    let n = probs.len();
    if k_max > n {
        return Err(PbinomError::CountOutOfRange { k: k_max, n });
    }
    if probs.probs().iter().any(|&p| p == 1.0) {
        return Err(PbinomError::SureTrial);
    }

    // Precision sizing. Term magnitudes are bounded by n * (max odds)^k;
    // every achievable Pr(k) is bounded below by Π_{p>0} min(p, 1-p). The
    // working precision covers the span between those, plus slack for the
    // O(n²) accumulated operations.
    let lam_max = probs
        .probs()
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p.ln() - (-p).ln_1p())
        .fold(f64::NEG_INFINITY, f64::max);
    let mut max_term_bits = (n as f64).log2() + 1.0;
    if lam_max > 0.0 {
        max_term_bits += k_max as f64 * lam_max * std::f64::consts::LOG2_E;
    }
    let floor_bits: f64 = probs
        .probs()
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -(p.min(1.0 - p)).log2())
        .sum();
    let precision = (max_term_bits + floor_bits).ceil() as usize + 128;
    if precision > SHAH_MAX_PRECISION_BITS {
        return Err(PbinomError::PrecisionLoss);
    }
    // Anything smaller in magnitude than this is an exact zero that picked
    // up rounding noise; anything negative above it would be a real bug.
    let noise_floor_ln = -(floor_bits + 64.0) * std::f64::consts::LN_2;

    let one = BigFloat::ONE.with_precision(precision).value();
    let big = |x: f64| {
        BigFloat::try_from(x)
            .expect("validated finite probability")
            .with_precision(precision)
            .value()
    };
    let odds: Vec<BigFloat> = probs
        .probs()
        .iter()
        .map(|&p| {
            let bp = big(p);
            &bp / &(&one - &bp)
        })
        .collect();

    let mut prod = one.clone();
    for &p in probs.probs() {
        prod = &prod * &(&one - &big(p));
    }

    let mut rec: Vec<BigFloat> = Vec::with_capacity(k_max + 1);
    rec.push(prod);
    let mut pows = odds.clone();
    let mut power_sums: Vec<BigFloat> = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let mut t = BigFloat::ZERO;
        for pow in &pows {
            t += pow;
        }
        power_sums.push(t);
        let mut acc = BigFloat::ZERO;
        for j in 1..=k {
            let term = &rec[k - j] * &power_sums[j - 1];
            if j % 2 == 1 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        rec.push(&acc / &BigFloat::from(k as u64).with_precision(precision).value());
        for (pow, o) in pows.iter_mut().zip(&odds) {
            *pow = &*pow * o;
        }
    }

    rec.into_iter()
        .map(|v| {
            if v == BigFloat::ZERO {
                return Ok(f64::NEG_INFINITY);
            }
            let negative = v < BigFloat::ZERO;
            let log_mag = cheap_log_magnitude(if negative { -v } else { v });
            if log_mag <= noise_floor_ln {
                Ok(f64::NEG_INFINITY)
            } else if negative {
                Err(PbinomError::PrecisionLoss)
            } else {
                Ok(log_mag.min(0.0))
            }
        })
        .collect()
}

/// Natural log of a positive big float, to f64 accuracy. Dropping the
/// mantissa to 64 bits first keeps the log cheap regardless of working
/// precision; the exponent carries the magnitude.
fn cheap_log_magnitude(v: BigFloat) -> f64 {
    v.with_precision(64).value().ln().to_f64().value()
}

/// Closed-form moments: mean Σ p_j, variance Σ p_j (1 - p_j).
pub fn moments(probs: &BernoulliVector) -> (f64, f64) {
    let mean = probs.probs().iter().sum();
    let var = probs.probs().iter().map(|&p| p * (1.0 - p)).sum();
    (mean, var)
}

/// Gradient of log Pr(K = k) with respect to logit(p_j), one entry per
/// trial.
///
/// Uses ∂Pr(k)/∂p_j = Pr₋ⱼ(k-1) - Pr₋ⱼ(k), where Pr₋ⱼ is the distribution
/// with trial j removed. Leave-one-out tables come from deconvolving trial
/// j out of the full table, an O(n) linear recurrence; when subtractive
/// cancellation degrades a deconvolved table past a normalization check,
/// that trial falls back to a fresh O(n²) convolution. Trials sharing a
/// probability share one leave-one-out computation.
pub fn grad_log_pmf(probs: &BernoulliVector, k: usize) -> Result<Vec<f64>, PbinomError> {
    let table = log_pmf_dp(probs);
    grad_log_pmf_with_table(probs, k, &table)
}

/// [`grad_log_pmf`] for callers that already hold the full table (the
/// sampler evaluates density and gradient together).
pub fn grad_log_pmf_with_table(
    probs: &BernoulliVector,
    k: usize,
    table: &LogPmfTable,
) -> Result<Vec<f64>, PbinomError> {
    let n = probs.len();
    if k > n {
        return Err(PbinomError::CountOutOfRange { k, n });
    }
    for &p in probs.probs() {
        if p == 0.0 || p == 1.0 {
            return Err(PbinomError::DegenerateProbability(p));
        }
    }

    let log_pk = table.log_prob(k);
    let full: Vec<f64> = table.log_probs().iter().map(|lp| lp.exp()).collect();
    let pk = log_pk.exp();
    // Linear-space deconvolution carries an absolute error on the scale
    // of the table's largest entry, so entries far below the mode come
    // out with poor relative accuracy even though the table still
    // normalizes. Far-tail targets go straight to the log-space
    // recomputation.
    let log_pmax = table
        .log_probs()
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let tail_target = log_pk - log_pmax < DECONV_TAIL_LOG_RATIO;

    // Group trials by identical probability, preserving first-seen order.
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    let mut seen: HashMap<u64, usize> = HashMap::new();
    for (i, &p) in probs.probs().iter().enumerate() {
        match seen.get(&p.to_bits()) {
            Some(&g) => groups[g].1.push(i),
            None => {
                seen.insert(p.to_bits(), groups.len());
                groups.push((p, vec![i]));
            }
        }
    }

    let mut grad = vec![0.0; n];
    for (p, idxs) in groups {
        let fast = if tail_target {
            None
        } else {
            deconvolve(&full, p, pk)
        };
        let component = match fast {
            Some(loo) => {
                let pr_km1 = if k == 0 { 0.0 } else { loo[k - 1] };
                let pr_k = if k < n { loo[k] } else { 0.0 };
                p * (1.0 - p) * (pr_km1 - pr_k) / pk
            }
            None => {
                // Recompute the leave-one-out table from scratch, in log
                // space so the ratio against Pr(k) stays well scaled.
                let mut rest = probs.probs().to_vec();
                let pos = rest.iter().position(|&q| q == p).expect("member present");
                rest.swap_remove(pos);
                let loo = log_pmf_dp(&BernoulliVector::new(rest).expect("non-empty"));
                let r_km1 = if k == 0 {
                    0.0
                } else {
                    (loo.log_prob(k - 1) - log_pk).exp()
                };
                let r_k = if k < n {
                    (loo.log_prob(k) - log_pk).exp()
                } else {
                    0.0
                };
                p * (1.0 - p) * (r_km1 - r_k)
            }
        };
        for i in idxs {
            grad[i] = component;
        }
    }
    Ok(grad)
}

const DECONV_NORM_TOL: f64 = 1e-8;
/// Targets more than ~6 decades below the mode use the exact fallback.
const DECONV_TAIL_LOG_RATIO: f64 = -13.815_510_557_964_274;

/// Removes one trial with probability `p` from a linear-space PMF table.
///
/// Runs the recurrence from the low end when p ≤ 1/2 (divisor 1-p) and from
/// the high end otherwise (divisor p). Returns `None` when the result fails
/// the normalization check or leaves [0, 1], signalling the caller to
/// recompute.
fn deconvolve(full: &[f64], p: f64, pk: f64) -> Option<Vec<f64>> {
    if pk < 1e-280 {
        return None;
    }
    let n = full.len() - 1;
    let mut out = vec![0.0; n];
    if p <= 0.5 {
        let q = 1.0 - p;
        out[0] = full[0] / q;
        for k in 1..n {
            out[k] = (full[k] - out[k - 1] * p) / q;
        }
    } else {
        out[n - 1] = full[n] / p;
        for k in (0..n - 1).rev() {
            out[k] = (full[k + 1] - out[k + 1] * (1.0 - p)) / p;
        }
    }
    let sum: f64 = out.iter().sum();
    if (sum - 1.0).abs() > DECONV_NORM_TOL {
        return None;
    }
    if out.iter().any(|&v| !(-DECONV_NORM_TOL..=1.0 + DECONV_NORM_TOL).contains(&v)) {
        return None;
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::logit;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn bv(probs: &[f64]) -> BernoulliVector {
        BernoulliVector::new(probs.to_vec()).unwrap()
    }

    /// Brute-force PMF by enumerating all 2^n outcomes; independent of the
    /// convolution path.
    fn enumerate_pmf(probs: &[f64]) -> Vec<f64> {
        let n = probs.len();
        let mut pmf = vec![0.0; n + 1];
        for mask in 0u32..(1 << n) {
            let mut prob = 1.0;
            for (i, &p) in probs.iter().enumerate() {
                prob *= if mask >> i & 1 == 1 { p } else { 1.0 - p };
            }
            pmf[mask.count_ones() as usize] += prob;
        }
        pmf
    }

    #[test]
    fn single_fair_trial() {
        let table = log_pmf_dp(&bv(&[0.5]));
        assert_abs_diff_eq!(table.prob(0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(table.prob(1), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_all_zero() {
        let table = log_pmf_dp(&bv(&[0.0, 0.0, 0.0]));
        assert_eq!(table.prob(0), 1.0);
        for k in 1..=3 {
            assert_eq!(table.prob(k), 0.0);
        }
    }

    #[test]
    fn sure_trials_shift_support() {
        let table = log_pmf_dp(&bv(&[1.0, 1.0]));
        assert_eq!(table.prob(2), 1.0);
        assert_eq!(table.prob(0), 0.0);
        assert_eq!(table.prob(1), 0.0);

        let mixed = log_pmf_dp(&bv(&[1.0, 0.5, 0.0]));
        assert_abs_diff_eq!(mixed.prob(1), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(mixed.prob(2), 0.5, epsilon = 1e-15);
        assert_eq!(mixed.prob(0), 0.0);
        assert_eq!(mixed.prob(3), 0.0);
    }

    #[test]
    fn three_trial_table_matches_enumeration() {
        // Frozen from the enumeration oracle: 0.504 / 0.398 / 0.092 / 0.006.
        let table = log_pmf_dp(&bv(&[0.1, 0.2, 0.3]));
        assert_abs_diff_eq!(table.prob(0), 0.504, epsilon = 1e-14);
        assert_abs_diff_eq!(table.prob(1), 0.398, epsilon = 1e-14);
        assert_abs_diff_eq!(table.prob(2), 0.092, epsilon = 1e-14);
        assert_abs_diff_eq!(table.prob(3), 0.006, epsilon = 1e-14);
        let oracle = enumerate_pmf(&[0.1, 0.2, 0.3]);
        for k in 0..=3 {
            assert_abs_diff_eq!(table.prob(k), oracle[k], epsilon = 1e-15);
        }
    }

    #[test]
    fn shah_base_case_is_product() {
        let got = log_pmf_shah(&bv(&[0.3, 0.6]), 0).unwrap();
        assert_abs_diff_eq!(got, 0.28f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn shah_matches_enumeration() {
        let got = log_pmf_shah(&bv(&[0.1, 0.2, 0.3]), 2).unwrap();
        assert_abs_diff_eq!(got.exp(), 0.092, epsilon = 1e-14);
    }

    #[test]
    fn shah_matches_analytic_binomial() {
        // Binomial(200, 1/2): log C(200,100) - 200 log 2 via lgamma.
        let probs = vec![0.5; 200];
        let got = log_pmf_shah(&BernoulliVector::new(probs.clone()).unwrap(), 100).unwrap();
        let lchoose = statrs::function::gamma::ln_gamma(201.0)
            - 2.0 * statrs::function::gamma::ln_gamma(101.0);
        let analytic = lchoose - 200.0 * 2.0f64.ln();
        assert_abs_diff_eq!(got, analytic, epsilon = 1e-8);
        let dp = log_pmf_dp(&BernoulliVector::new(probs).unwrap());
        assert_abs_diff_eq!(got, dp.log_prob(100), epsilon = 1e-8);
    }

    #[test]
    fn shah_rejects_sure_trials() {
        assert_eq!(
            log_pmf_shah(&bv(&[1.0, 0.5]), 1).unwrap_err(),
            PbinomError::SureTrial
        );
    }

    #[test]
    fn moments_examples() {
        assert_eq!(moments(&bv(&[0.5, 0.5])), (1.0, 0.5));
        assert_eq!(moments(&bv(&[1.0, 1.0])), (2.0, 0.0));
        let (m, v) = moments(&bv(&[0.1, 0.2, 0.3]));
        assert_abs_diff_eq!(m, 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.46, epsilon = 1e-15);
    }

    #[test]
    fn table_moments_match_closed_form() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = rng.gen_range(1..=60);
            let probs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let v = bv(&probs);
            let (mean, var) = moments(&v);
            let (tm, tv) = log_pmf_dp(&v).table_moments();
            assert_abs_diff_eq!(mean, tm, epsilon = 1e-9);
            assert_abs_diff_eq!(var, tv, epsilon = 1e-9);
        }
    }

    /// Grouping trials by journal, the aggregated-multinomial covariance
    /// with weights w_j = x_j (its multinomial limit) reduces to
    /// Σ_j x_j π_j (1 - π_j), which must equal the Poisson-binomial
    /// variance of the expanded trial vector.
    #[test]
    fn variance_matches_multinomial_limit_on_grouped_inputs() {
        let journal_probs = [0.12, 0.5, 0.83];
        let counts = [4usize, 2, 7];
        let mut expanded = Vec::new();
        for (&p, &x) in journal_probs.iter().zip(&counts) {
            expanded.extend(std::iter::repeat(p).take(x));
        }
        let (_, var) = moments(&bv(&expanded));
        let w: Vec<f64> = counts.iter().map(|&x| x as f64).collect();
        let diag: f64 = journal_probs.iter().zip(&w).map(|(&p, &x)| p * x).sum();
        let quad: f64 = journal_probs
            .iter()
            .zip(&w)
            .map(|(&p, &x)| p * x * p)
            .sum();
        assert_abs_diff_eq!(var, diag - quad, epsilon = 1e-12);
    }

    #[test]
    fn gradient_single_trial_analytic() {
        let g = grad_log_pmf(&bv(&[0.8]), 1).unwrap();
        assert_abs_diff_eq!(g[0], 0.2, epsilon = 1e-12);
        let g0 = grad_log_pmf(&bv(&[0.8]), 0).unwrap();
        assert_abs_diff_eq!(g0[0], -0.8, epsilon = 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let probs = [0.1, 0.2, 0.3];
        let g = grad_log_pmf(&bv(&probs), 1).unwrap();
        let h = 1e-6;
        for j in 0..3 {
            let mut hi = probs.to_vec();
            let mut lo = probs.to_vec();
            hi[j] = crate::numeric::sigmoid(logit(probs[j]) + h);
            lo[j] = crate::numeric::sigmoid(logit(probs[j]) - h);
            let f_hi = log_pmf_dp(&bv(&hi)).log_prob(1);
            let f_lo = log_pmf_dp(&bv(&lo)).log_prob(1);
            let fd = (f_hi - f_lo) / (2.0 * h);
            assert!(
                ((g[j] - fd) / fd).abs() < 1e-6,
                "component {j}: {} vs {}",
                g[j],
                fd
            );
        }
    }

    #[test]
    fn gradient_equal_probs_share_component() {
        let g = grad_log_pmf(&bv(&[0.37, 0.9, 0.37]), 2).unwrap();
        assert_eq!(g[0], g[2]);
        assert_ne!(g[0], g[1]);
    }

    #[test]
    fn gradient_rejects_degenerate() {
        assert!(matches!(
            grad_log_pmf(&bv(&[0.5, 1.0]), 1),
            Err(PbinomError::DegenerateProbability(_))
        ));
        assert!(matches!(
            grad_log_pmf(&bv(&[0.0, 0.5]), 1),
            Err(PbinomError::DegenerateProbability(_))
        ));
    }

    #[test]
    fn gradient_survives_extreme_probs_via_fallback() {
        // Forces subtractive cancellation in the deconvolution path.
        let probs = [0.999_999, 1e-9, 0.5, 0.999_999];
        let v = bv(&probs);
        for k in 0..=4 {
            let g = grad_log_pmf(&v, k).unwrap();
            assert!(g.iter().all(|c| c.is_finite()), "k={k}: {g:?}");
        }
    }

    #[test]
    fn normalization_large_n() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let probs: Vec<f64> = (0..2000).map(|_| rng.gen_range(0.0..1.0)).collect();
        let table = log_pmf_dp(&BernoulliVector::new(probs).unwrap());
        assert!(table.normalization_error() < 1e-10);
        assert!(table.log_probs().iter().all(|&lp| lp <= 0.0));
    }

    #[test]
    fn permutation_invariance_bitwise() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let mut probs: Vec<f64> = (0..40).map(|_| rng.gen_range(0.0..1.0)).collect();
        let base = log_pmf_dp(&BernoulliVector::new(probs.clone()).unwrap());
        probs.shuffle(&mut rng);
        let shuffled = log_pmf_dp(&BernoulliVector::new(probs).unwrap());
        assert_eq!(base.log_probs(), shuffled.log_probs());
    }

    #[test]
    fn rejects_invalid_inputs() {
        assert_eq!(
            BernoulliVector::new(vec![]).unwrap_err(),
            PbinomError::Empty
        );
        assert!(matches!(
            BernoulliVector::new(vec![0.5, 1.2]),
            Err(PbinomError::InvalidProbability(_))
        ));
        assert!(matches!(
            BernoulliVector::new(vec![f64::NAN]),
            Err(PbinomError::InvalidProbability(_))
        ));
    }

    proptest::proptest! {
        #[test]
        fn pmf_normalizes(probs in proptest::collection::vec(0.0f64..=1.0, 1..200)) {
            let table = log_pmf_dp(&BernoulliVector::new(probs).unwrap());
            proptest::prop_assert!(table.normalization_error() < 1e-10);
        }

        #[test]
        fn dp_matches_enumeration(probs in proptest::collection::vec(0.0f64..=1.0, 1..10)) {
            let table = log_pmf_dp(&BernoulliVector::new(probs.clone()).unwrap());
            let oracle = enumerate_pmf(&probs);
            for (k, &truth) in oracle.iter().enumerate() {
                proptest::prop_assert!((table.prob(k) - truth).abs() < 1e-12);
            }
        }

        #[test]
        fn shah_agrees_with_dp(probs in proptest::collection::vec(0.001f64..0.99, 1..60)) {
            let v = BernoulliVector::new(probs).unwrap();
            let dp = log_pmf_dp(&v);
            let shah = log_pmf_shah_table(&v).unwrap();
            for k in 0..=v.len() {
                let d = (shah[k] - dp.log_prob(k)).abs();
                proptest::prop_assert!(d < 1e-8, "k={} diff={}", k, d);
            }
        }
    }
}
