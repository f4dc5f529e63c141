//! The reporting metrics on their own: predictions from journal
//! probabilities, the index of dissimilarity, the redistribution of
//! monetary reward, per-output funding values, deterministic bounds for a
//! 2x2 table, and the probit-gap diagnostic.
//!
//! ```bash
//! cargo run -p ecoref --example indices
//! ```

use ecoref::ingest::InstitutionProfile;
use ecoref::metrics::{
    dissimilarity, ecological_bounds, funding_value, money_redistribution, predict, probit_gap,
    FundingConfig,
};
use ecoref::synthetic::counts_from_cells;

fn main() {
    // Two institutions, two named journals plus the pooled column.
    let counts = counts_from_cells(&["Alpha", "Beta"], &[vec![6, 2], vec![1, 7]], &[2, 2]);
    let profiles = vec![
        InstitutionProfile {
            institution: "inst-00".into(),
            total_outputs: 10,
            y4: 5,
            y34: 9,
            fte: 12.0,
            envir: 0.0,
        },
        InstitutionProfile {
            institution: "inst-01".into(),
            total_outputs: 10,
            y4: 2,
            y34: 7,
            fte: 8.0,
            envir: 0.0,
        },
    ];

    let pi4 = [0.62, 0.2, 0.3, 0.0, 0.0];
    let pi34 = [0.95, 0.7, 0.75, 0.0, 0.0];
    let predictions = predict(&counts, &pi4, &pi34).unwrap();
    for p in &predictions {
        println!(
            "{}: yhat4 {:.2}, yhat3 {:.2}",
            p.institution, p.yhat4, p.yhat3
        );
    }

    let funding = FundingConfig::default();
    println!(
        "dissimilarity        = {:.4}",
        dissimilarity(&profiles, &predictions).unwrap()
    );
    println!(
        "money redistribution = {:.4}",
        money_redistribution(&profiles, &predictions, &funding).unwrap()
    );

    // Worth of one output at each funded level, from a total award and
    // fractional output counts.
    let (x3, x4) = funding_value(5_328_295.0, 395.5104, 265.0912).unwrap();
    println!("funding per output: x3 = {x3:.2}, x4 = {x4:.2}");

    // A district 70% group-b with 40% aggregate turnout confines the
    // group-b rate to (14%, 57%) while saying nothing about group w.
    let bounds = ecological_bounds(0.7, 0.4).unwrap();
    println!(
        "bounds: beta_b in [{:.4}, {:.4}], beta_w in [{:.4}, {:.4}]",
        bounds.beta_b.0, bounds.beta_b.1, bounds.beta_w.0, bounds.beta_w.1
    );

    // Probit gap: does the distance between the two cumulative levels
    // shrink for stronger journals?
    let columns: Vec<String> = (0..6).map(|j| format!("J{j}")).collect();
    let pi4: Vec<f64> = (0..6).map(|j| 0.1 + 0.12 * j as f64).collect();
    let pi34: Vec<f64> = pi4.iter().map(|p| (p + 0.35).min(0.97)).collect();
    let gap = probit_gap(&columns, &pi4, &pi34).unwrap();
    println!(
        "probit gap: slope {:.3}, intercept {:.3} ({} journals)",
        gap.slope,
        gap.intercept,
        gap.entries.len()
    );
}
