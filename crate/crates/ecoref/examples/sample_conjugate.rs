//! Sampler calibration against a closed-form posterior: a Beta(3,2) prior
//! with 10 successes of 20 has posterior Beta(13,12), so quantiles of the
//! draws must line up with the analytic inverse CDF.
//!
//! ```bash
//! cargo run -p ecoref --example sample_conjugate
//! ```

use ecoref::numeric::{log_sigmoid, quantile_of, sigmoid};
use ecoref::sampler::{run_chains, summarize, ChainConfig, LogDensity};
use rand::Rng;
use statrs::distribution::{Beta, ContinuousCDF};

/// Beta-binomial posterior on the logit scale (Jacobian included).
struct ConjugateTarget {
    a: f64,
    b: f64,
}

impl LogDensity for ConjugateTarget {
    fn dim(&self) -> usize {
        1
    }
    fn log_density_gradient(&self, position: &[f64], grad: &mut [f64]) -> f64 {
        let t = position[0];
        grad[0] = self.a * (1.0 - sigmoid(t)) - self.b * sigmoid(t);
        self.a * log_sigmoid(t) + self.b * log_sigmoid(-t)
    }
}

fn main() {
    let target = ConjugateTarget { a: 13.0, b: 12.0 };
    let config = ChainConfig {
        seed: 1,
        ..ChainConfig::default()
    };
    let draws = run_chains(&target, |rng| vec![rng.gen_range(-2.0..2.0)], &config).unwrap();

    let pi: Vec<f64> = draws.merged(0).into_iter().map(sigmoid).collect();
    let analytic = Beta::new(13.0, 12.0).unwrap();
    println!("{:>10} {:>10} {:>10}", "quantile", "sampled", "analytic");
    for q in [0.05, 0.25, 0.5, 0.75, 0.95] {
        println!(
            "{q:>10.2} {:>10.4} {:>10.4}",
            quantile_of(&pi, q),
            analytic.inverse_cdf(q)
        );
    }

    let summary = &summarize(&draws).unwrap()[0];
    println!(
        "\nsplit-Rhat {:.4}, bulk-ESS {:.0}, divergences {}",
        summary.split_rhat.unwrap(),
        summary.bulk_ess.unwrap(),
        draws.divergences
    );
}
