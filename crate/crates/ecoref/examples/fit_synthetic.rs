//! End-to-end model check on data with known ground truth: estimate
//! journal probabilities with both the Bayesian sampler and the EM
//! algorithm, then compare the two against each other and the truth.
//!
//! ```bash
//! cargo run -p ecoref --example fit_synthetic
//! ```

use ecoref::em::{em_run, EmConfig};
use ecoref::model::{fit_hmc, TargetLevel};
use ecoref::numeric::{logit, pearson, spearman};
use ecoref::sampler::ChainConfig;
use ecoref::synthetic::{generate, SyntheticConfig};

fn main() {
    let data = generate(&SyntheticConfig {
        institutions: 25,
        journals: 10,
        articles_per_institution: 40,
        pi4_range: (0.1, 0.75),
        cumulative_gap: 1.5,
        preference_sd: 2.0,
        seed: 42,
    });
    let journals = 10usize;

    // Keep the demo quick: two chains, short warmup. The defaults in
    // ChainConfig are the production setting.
    let chain_cfg = ChainConfig {
        chains: 2,
        warmup_iters: 400,
        sample_iters: 400,
        seed: 7,
        ..ChainConfig::default()
    };
    println!("sampling the posterior ({} chains)...", chain_cfg.chains);
    let hmc = fit_hmc(&data.counts, &data.profiles, TargetLevel::FourStar, &chain_cfg).unwrap();

    let em = em_run(
        &data.counts,
        &data.profiles,
        TargetLevel::FourStar,
        &EmConfig::default(),
    )
    .unwrap();
    println!(
        "EM converged after {} iterations: {}",
        em.iterations, em.converged
    );

    println!(
        "\n{:<18} {:>7} {:>24} {:>8} {:>8}",
        "journal", "truth", "posterior median [95%]", "EM", "articles"
    );
    for j in 0..journals {
        let s = &hmc.summaries[j];
        println!(
            "{:<18} {:>7.3} {:>8.3} [{:>5.3}, {:>5.3}] {:>8.3} {:>8}",
            s.column,
            data.true_pi4[j],
            s.median,
            s.lo95,
            s.hi95,
            em.fit.journal_prob(j),
            s.article_count
        );
    }

    let medians: Vec<f64> = (0..journals).map(|j| hmc.summaries[j].median).collect();
    let em_logits: Vec<f64> = (0..journals).map(|j| em.fit.journal_logit(j)).collect();
    let hmc_logits: Vec<f64> = medians.iter().map(|&m| logit(m)).collect();
    println!(
        "\nspearman(median, truth) = {:.3}",
        spearman(&medians, &data.true_pi4[..journals])
    );
    println!(
        "pearson(EM logits, HMC median logits) = {:.3}",
        pearson(&em_logits, &hmc_logits)
    );
    println!("divergent transitions: {}", hmc.draws.divergences);
}
