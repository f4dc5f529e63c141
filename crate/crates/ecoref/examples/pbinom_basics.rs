//! The Poisson-binomial distribution: exact tables, moments, the
//! cross-check recursion, and log-mass gradients.
//!
//! ```bash
//! cargo run -p ecoref --example pbinom_basics
//! ```

use ecoref::pbinom::{grad_log_pmf, log_pmf_dp, log_pmf_shah, moments, BernoulliVector};

fn main() {
    let probs = BernoulliVector::new(vec![0.1, 0.2, 0.3]).unwrap();
    let table = log_pmf_dp(&probs);

    println!("trial probabilities: {:?}", probs.probs());
    for k in 0..=probs.len() {
        println!("  Pr(K = {k}) = {:.6}", table.prob(k));
    }

    let (mean, var) = moments(&probs);
    println!("mean {mean:.3}, variance {var:.3}");
    let (tm, tv) = table.table_moments();
    println!("from the table: mean {tm:.3}, variance {tv:.3}");

    // The alternating recursion agrees with the convolution, here at k=2.
    let shah = log_pmf_shah(&probs, 2).unwrap();
    println!(
        "recursion check at k=2: {:.12} vs table {:.12}",
        shah.exp(),
        table.prob(2)
    );

    // Gradient of log Pr(K = 1) with respect to each trial's logit.
    let grad = grad_log_pmf(&probs, 1).unwrap();
    println!("d log Pr(K=1) / d logit(p_j) = {grad:?}");

    // Larger vectors stay exactly normalized.
    let many: Vec<f64> = (0..1500).map(|i| (i as f64 * 0.7).sin().abs()).collect();
    let big = log_pmf_dp(&BernoulliVector::new(many).unwrap());
    println!(
        "n = 1500: |logsumexp(table)| = {:.2e}",
        big.normalization_error()
    );
}
