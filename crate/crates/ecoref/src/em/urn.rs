//! Noncentral multivariate hypergeometric expectations.
//!
//! Balls of several colors sit in an urn with per-color weights; drawing n
//! without replacement, the expected color mix imputes latent per-journal
//! success counts. The exact expectation enumerates the support in log
//! space; the approximation solves the weighted-urn mean equation, which
//! is exact in the equal-weights case.

use super::EmError;
use statrs::function::gamma::ln_gamma;

/// Default ceiling on support enumeration for the exact expectation.
pub const DEFAULT_ENUMERATION_LIMIT: u128 = 2_000_000;

/// Urn specification: `m[j]` balls of color j with weight `omega[j]`,
/// drawing `n` balls.
#[derive(Debug, Clone, PartialEq)]
pub struct HypergeometricUrn {
    pub m: Vec<u32>,
    pub omega: Vec<f64>,
    pub n: u32,
}

impl HypergeometricUrn {
    pub fn new(m: Vec<u32>, omega: Vec<f64>, n: u32) -> Result<Self, EmError> {
        if m.len() != omega.len() || m.is_empty() {
            return Err(EmError::InvalidUrn {
                reason: format!("{} colors but {} weights", m.len(), omega.len()),
            });
        }
        if omega.iter().any(|&w| !w.is_finite() || w <= 0.0) {
            return Err(EmError::InvalidUrn {
                reason: "weights must be positive and finite".to_string(),
            });
        }
        let total: u64 = m.iter().map(|&x| u64::from(x)).sum();
        if u64::from(n) > total {
            return Err(EmError::InvalidUrn {
                reason: format!("cannot draw {n} from {total} balls"),
            });
        }
        Ok(Self { m, omega, n })
    }

    pub fn total_balls(&self) -> u64 {
        self.m.iter().map(|&x| u64::from(x)).sum()
    }

    /// Number of draw vectors in the support (compositions of n bounded
    /// by m), saturating at `cap`.
    pub fn support_size(&self, cap: u128) -> u128 {
        let n = self.n as usize;
        let mut ways = vec![0u128; n + 1];
        ways[0] = 1;
        for &mj in &self.m {
            let mut next = vec![0u128; n + 1];
            for t in 0..=n {
                if ways[t] == 0 {
                    continue;
                }
                let hi = (mj as usize).min(n - t);
                for y in 0..=hi {
                    next[t + y] = next[t + y].saturating_add(ways[t]).min(cap);
                }
            }
            ways = next;
        }
        ways[n]
    }
}

/// Exact expectation by support enumeration, with log-space weights
/// `Σ_j [ln C(m_j, y_j) + y_j ln ω_j]`.
pub fn mvh_exact_expectation(urn: &HypergeometricUrn) -> Result<Vec<f64>, EmError> {
    mvh_exact_expectation_with_limit(urn, DEFAULT_ENUMERATION_LIMIT)
}

pub fn mvh_exact_expectation_with_limit(
    urn: &HypergeometricUrn,
    limit: u128,
) -> Result<Vec<f64>, EmError> {
    let size = urn.support_size(limit);
    if size >= limit {
        return Err(EmError::SupportTooLarge { limit });
    }

    let d = urn.m.len();
    let log_omega: Vec<f64> = urn.omega.iter().map(|w| w.ln()).collect();
    // ln C(m_j, y) for y = 0..=m_j.
    let log_choose: Vec<Vec<f64>> = urn
        .m
        .iter()
        .map(|&mj| {
            (0..=mj)
                .map(|y| {
                    ln_gamma(f64::from(mj) + 1.0)
                        - ln_gamma(f64::from(y) + 1.0)
                        - ln_gamma(f64::from(mj - y) + 1.0)
                })
                .collect()
        })
        .collect();

    // Two passes over the support: the first finds the maximum log weight,
    // the second accumulates rescaled sums.
    let mut max_lw = f64::NEG_INFINITY;
    enumerate(urn, &log_choose, &log_omega, &mut |_, lw| {
        if lw > max_lw {
            max_lw = lw;
        }
    });
    let mut norm = 0.0f64;
    let mut sums = vec![0.0f64; d];
    enumerate(urn, &log_choose, &log_omega, &mut |y, lw| {
        let w = (lw - max_lw).exp();
        norm += w;
        for (s, &yj) in sums.iter_mut().zip(y) {
            *s += w * f64::from(yj);
        }
    });
    Ok(sums.into_iter().map(|s| s / norm).collect())
}

fn enumerate(
    urn: &HypergeometricUrn,
    log_choose: &[Vec<f64>],
    log_omega: &[f64],
    visit: &mut impl FnMut(&[u32], f64),
) {
    // Suffix capacities let the recursion prune infeasible branches.
    let d = urn.m.len();
    let mut suffix = vec![0u32; d + 1];
    for j in (0..d).rev() {
        suffix[j] = suffix[j + 1].saturating_add(urn.m[j]);
    }
    let mut y = vec![0u32; d];
    fn recurse(
        j: usize,
        remaining: u32,
        lw: f64,
        urn: &HypergeometricUrn,
        suffix: &[u32],
        log_choose: &[Vec<f64>],
        log_omega: &[f64],
        y: &mut Vec<u32>,
        visit: &mut impl FnMut(&[u32], f64),
    ) {
        if j == urn.m.len() {
            debug_assert_eq!(remaining, 0);
            visit(y, lw);
            return;
        }
        if j == urn.m.len() - 1 {
            // Last color is forced.
            if remaining <= urn.m[j] {
                y[j] = remaining;
                let lw2 = lw
                    + log_choose[j][remaining as usize]
                    + f64::from(remaining) * log_omega[j];
                recurse(j + 1, 0, lw2, urn, suffix, log_choose, log_omega, y, visit);
            }
            return;
        }
        let lo = remaining.saturating_sub(suffix[j + 1]);
        let hi = urn.m[j].min(remaining);
        for yj in lo..=hi {
            y[j] = yj;
            let lw2 = lw + log_choose[j][yj as usize] + f64::from(yj) * log_omega[j];
            recurse(
                j + 1,
                remaining - yj,
                lw2,
                urn,
                suffix,
                log_choose,
                log_omega,
                y,
                visit,
            );
        }
    }
    recurse(
        0, urn.n, 0.0, urn, &suffix, log_choose, log_omega, &mut y, visit,
    );
}

/// Approximate expectation: solve for r > 0 in
/// `Σ_j m_j ω_j r / (ω_j r + 1) = n` (strictly increasing in r), then
/// `μ_j = m_j ω_j r / (ω_j r + 1)`.
///
/// Boundary draws return directly (n = 0 gives zeros, n = Σm gives m);
/// with equal weights the solution reduces to the central mean m_j n / Σm.
pub fn mvh_approx_expectation(urn: &HypergeometricUrn) -> Vec<f64> {
    let d = urn.m.len();
    if urn.n == 0 {
        return vec![0.0; d];
    }
    if u64::from(urn.n) == urn.total_balls() {
        return urn.m.iter().map(|&m| f64::from(m)).collect();
    }

    let n = f64::from(urn.n);
    let fill = |r: f64| -> f64 {
        urn.m
            .iter()
            .zip(&urn.omega)
            .map(|(&m, &w)| {
                let wr = w * r;
                f64::from(m) * wr / (wr + 1.0)
            })
            .sum()
    };

    // Bracket the root, then bisect on log r.
    let mut lo = 1.0f64;
    let mut hi = 1.0f64;
    while fill(lo) > n {
        lo *= 0.5;
    }
    while fill(hi) < n {
        hi *= 2.0;
    }
    for _ in 0..200 {
        if hi - lo <= 1e-12 * lo.max(1e-300) {
            break;
        }
        let mid = (lo * hi).sqrt();
        if fill(mid) < n {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = (lo * hi).sqrt();
    urn.m
        .iter()
        .zip(&urn.omega)
        .map(|(&m, &w)| {
            let wr = w * r;
            f64::from(m) * wr / (wr + 1.0)
        })
        .collect()
}
