use ecoref::em::{mvh_approx_expectation, mvh_exact_expectation, HypergeometricUrn};
use ecoref::model::{fit_hmc, TargetLevel};
use ecoref::numeric::spearman;
use ecoref::sampler::{summarize, ChainConfig};
use ecoref::synthetic::{generate, SyntheticConfig};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

fn main() {
    // Worst-case approximation error across weight spreads.
    for spread in [2.0f64, 1.5, 1.0] {
        let mut rng = ChaCha12Rng::seed_from_u64(303);
        let mut worst: f64 = 0.0;
        for _ in 0..2000 {
            let d = rng.gen_range(2..=4usize);
            let m: Vec<u32> = (0..d).map(|_| rng.gen_range(0..=6)).collect();
            let total: u32 = m.iter().sum();
            if total == 0 { continue; }
            let omega: Vec<f64> = (0..d).map(|_| rng.gen_range(-spread..spread).exp()).collect();
            let n = rng.gen_range(0..=total);
            if n == 0 { continue; }
            let urn = HypergeometricUrn::new(m, omega, n).unwrap();
            let exact = mvh_exact_expectation(&urn).unwrap();
            let approx = mvh_approx_expectation(&urn);
            for j in 0..d {
                worst = worst.max((exact[j] - approx[j]).abs() / f64::from(n));
            }
        }
        println!("spread {spread}: worst |exact-approx|/n over 2000 urns = {worst:.4}");
    }

    // Synthetic recovery fit quality.
    let data = generate(&SyntheticConfig {
        institutions: 30,
        journals: 12,
        articles_per_institution: 40,
        pi4_range: (0.05, 0.8),
        cumulative_gap: 1.5,
        preference_sd: 2.0,
        seed: 505,
    });
    let t0 = std::time::Instant::now();
    let fit = fit_hmc(&data.counts, &data.profiles, TargetLevel::FourStar,
        &ChainConfig { seed: 506, ..ChainConfig::default() }).unwrap();
    println!("fit took {:?}, divergences {}", t0.elapsed(), fit.draws.divergences);
    let mut covered = 0;
    for j in 0..12 {
        let s = &fit.summaries[j];
        let hit = s.lo95 <= data.true_pi4[j] && data.true_pi4[j] <= s.hi95;
        if hit { covered += 1; }
        println!("J{:02}: true {:.3} median {:.3} [{:.3},{:.3}] {} (n={})",
            j, data.true_pi4[j], s.median, s.lo95, s.hi95, if hit {"ok"} else {"MISS"}, s.article_count);
    }
    let medians: Vec<f64> = (0..12).map(|j| fit.summaries[j].median).collect();
    println!("coverage {covered}/12 spearman {:.4}", spearman(&medians, &data.true_pi4[..12]));
    let summaries = summarize(&fit.draws).unwrap();
    let max_rhat = summaries.iter().filter_map(|s| s.split_rhat).fold(0.0f64, f64::max);
    println!("max rhat {max_rhat:.4}");
}
