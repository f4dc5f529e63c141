//! Choosing the pseudo-data strength by cross-validation: institutions
//! are split into folds, the EM refits without each fold, and held-out
//! profiles score each regularization level.
//!
//! ```bash
//! cargo run -p ecoref --example cross_validate
//! ```

use ecoref::em::{cross_validate, CvConfig, EmConfig};
use ecoref::model::TargetLevel;
use ecoref::synthetic::{generate, SyntheticConfig};

fn main() {
    let data = generate(&SyntheticConfig {
        institutions: 24,
        journals: 8,
        articles_per_institution: 40,
        pi4_range: (0.15, 0.7),
        cumulative_gap: 1.5,
        preference_sd: 2.0,
        seed: 3,
    });

    let cv = CvConfig {
        folds: 6,
        grid: vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0],
        seed: 9,
        em: EmConfig::default(),
    };
    let outcome = cross_validate(&data.counts, &data.profiles, TargetLevel::FourStar, &cv).unwrap();

    println!("{:>16} {:>12}", "pseudo_strength", "mean delta");
    for (strength, mean) in &outcome.mean_delta {
        let marker = if *strength == outcome.best_pseudo_strength {
            "  <- chosen"
        } else {
            ""
        };
        println!("{strength:>16} {mean:>12.4}{marker}");
    }
    println!(
        "\n{} held-out cells fell back to the reference column",
        outcome.unseen_fallbacks
    );
}
