//! Shared oracles and fixture builders for the integration suites. The
//! oracles deliberately avoid the library's own computational paths:
//! likelihoods come from bitmask enumeration and priors from statrs
//! density functions. Each test binary uses its own subset.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;

use ecoref::ingest::{ColumnKind, CountsMatrix, InstitutionProfile};
use ecoref::model::TargetLevel;
use ecoref::synthetic::SyntheticData;

/// Brute-force Poisson-binomial PMF over all 2^n outcomes.
pub fn enumerate_pmf(probs: &[f64]) -> Vec<f64> {
    let n = probs.len();
    assert!(n <= 20, "enumeration oracle is exponential");
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

/// Independent evaluation of the model's joint log density: enumeration
/// for each institution's likelihood, statrs densities for the priors,
/// an explicit logit Jacobian.
pub fn oracle_log_posterior(
    counts: &CountsMatrix,
    profiles: &[InstitutionProfile],
    target: TargetLevel,
    theta: &[f64],
    mu: f64,
    gamma: f64,
    alpha: f64,
) -> f64 {
    use statrs::distribution::{Beta, Continuous, Gamma, Normal};

    let sigmoid = |x: f64| 1.0 / (1.0 + (-x).exp());
    let mut logp = 0.0;
    for (i, profile) in profiles.iter().enumerate() {
        let mut trial_probs = Vec::new();
        for (j, &x) in counts.row(i).iter().enumerate() {
            for _ in 0..x {
                trial_probs.push(sigmoid(theta[j] + alpha * profile.envir));
            }
        }
        if trial_probs.is_empty() {
            continue;
        }
        let pmf = enumerate_pmf(&trial_probs);
        logp += pmf[target.observed(profile) as usize].ln();
    }

    let beta = Beta::new(gamma * mu, gamma * (1.0 - mu)).unwrap();
    for &t in theta {
        let pi = sigmoid(t);
        logp += beta.ln_pdf(pi) + (pi * (1.0 - pi)).ln();
    }
    // Uniform(0,1) on mu contributes zero.
    logp += Gamma::new(0.1, 0.05).unwrap().ln_pdf(gamma);
    logp += Normal::new(0.0, 3.0).unwrap().ln_pdf(alpha);
    logp
}

/// Writes a synthetic dataset as the raw CSV pair the ingest stage reads.
///
/// Named journals get one shared ISSN each so clustering reassembles them;
/// every pooled-column article gets a unique junk journal so it falls
/// under any threshold ≥ 2. Percentages are emitted at full precision, so
/// profile reconstruction recovers the original counts exactly.
pub fn write_raw_fixture(data: &SyntheticData, dir: &Path, threshold_proof: u32) {
    let counts = &data.counts;
    let mut submissions = String::from(
        "output_id,institution,uoa,output_type,doi,issn_list,isbn,volume_title\n",
    );
    let mut serial = 0usize;
    for (i, inst) in counts.institutions().iter().enumerate() {
        for (j, column) in counts.columns().iter().enumerate() {
            let x = counts.count(i, j);
            for copy in 0..x {
                serial += 1;
                match column.kind {
                    ColumnKind::NamedJournal => {
                        writeln!(
                            submissions,
                            "o{serial:05},{inst},demo,journal-article,,{:04}-000X,,{}",
                            1000 + j,
                            column.name
                        )
                        .unwrap();
                    }
                    ColumnKind::OtherJournals => {
                        // Unique junk venue per article keeps it unnamed.
                        writeln!(
                            submissions,
                            "o{serial:05},{inst},demo,journal-article,,,,Obscure Venue {i}-{j}-{copy}"
                        )
                        .unwrap();
                    }
                    ColumnKind::ConferenceProceedings => {
                        writeln!(submissions, "o{serial:05},{inst},demo,conference,,,,").unwrap();
                    }
                    ColumnKind::OtherOutputs => {
                        writeln!(submissions, "o{serial:05},{inst},demo,other,,,,").unwrap();
                    }
                }
            }
        }
        assert!(counts.row_sum(i) > 0, "fixture institutions must submit");
    }
    assert!(threshold_proof >= 2, "threshold must pool the junk venues");

    let mut results = String::from(
        "institution,uoa,fte,outputs_pct_4,outputs_pct_3,outputs_pct_2,outputs_pct_1,outputs_pct_u,envir_pct_4\n",
    );
    for (i, p) in data.profiles.iter().enumerate() {
        assert_eq!(&p.institution, &counts.institutions()[i]);
        let n = f64::from(p.total_outputs);
        let pct4 = f64::from(p.y4) / n * 100.0;
        let pct3 = f64::from(p.y34 - p.y4) / n * 100.0;
        let rest = 100.0 - pct4 - pct3;
        writeln!(
            results,
            "{},demo,{},{pct4},{pct3},{rest},0,0,{}",
            p.institution,
            p.fte,
            p.envir + 20.0
        )
        .unwrap();
    }

    std::fs::write(dir.join("submissions.csv"), submissions).unwrap();
    std::fs::write(dir.join("results.csv"), results).unwrap();
}
