//! Synthetic dataset generator with known ground truth.
//!
//! Real assessment data cannot ship with the crate, so calibration checks
//! and examples run on generated corpora: institutions with uneven journal
//! preferences, per-journal success probabilities spread over a known
//! range, and per-article outcomes drawn at those probabilities.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::ingest::{Column, ColumnKind, CountsMatrix, InstitutionProfile};
use crate::numeric::{logit, sigmoid};

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub institutions: usize,
    /// Probability-carrying columns: named journals plus the pooled
    /// "Other journals" reference column.
    pub journals: usize,
    pub articles_per_institution: u32,
    /// True top-level success probabilities are evenly spaced over this
    /// range across journals.
    pub pi4_range: (f64, f64),
    /// Logit gap between the top level and the cumulative level.
    pub cumulative_gap: f64,
    /// Log-scale spread of institutions' journal preferences; larger
    /// values concentrate each institution in fewer journals, which is
    /// what identifies journal effects from aggregate data.
    pub preference_sd: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            institutions: 30,
            journals: 12,
            articles_per_institution: 40,
            pi4_range: (0.05, 0.8),
            cumulative_gap: 1.5,
            preference_sd: 2.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub counts: CountsMatrix,
    pub profiles: Vec<InstitutionProfile>,
    /// True per-column success probabilities; the two non-journal pooled
    /// columns carry no articles and hold 0.
    pub true_pi4: Vec<f64>,
    pub true_pi34: Vec<f64>,
}

/// Builds a counts matrix from named-journal cells plus per-institution
/// counts for the pooled "Other journals" column; the conference and
/// other-outputs columns stay empty. Handy for small fixtures.
pub fn counts_from_cells(names: &[&str], cells: &[Vec<u32>], other: &[u32]) -> CountsMatrix {
    let institutions: Vec<String> = (0..cells.len()).map(|i| format!("inst-{i:02}")).collect();
    let mut columns: Vec<Column> = names
        .iter()
        .enumerate()
        .map(|(id, n)| Column {
            name: n.to_string(),
            kind: ColumnKind::NamedJournal,
            journal_id: Some(id),
        })
        .collect();
    columns.push(Column {
        name: crate::ingest::OTHER_JOURNALS.to_string(),
        kind: ColumnKind::OtherJournals,
        journal_id: None,
    });
    columns.push(Column {
        name: crate::ingest::CONFERENCE_PROCEEDINGS.to_string(),
        kind: ColumnKind::ConferenceProceedings,
        journal_id: None,
    });
    columns.push(Column {
        name: crate::ingest::OTHER_OUTPUTS.to_string(),
        kind: ColumnKind::OtherOutputs,
        journal_id: None,
    });
    let mut counts = Vec::new();
    for (i, row) in cells.iter().enumerate() {
        counts.extend_from_slice(row);
        counts.extend_from_slice(&[other[i], 0, 0]);
    }
    CountsMatrix::from_parts(institutions, columns, counts).expect("well-formed fixture")
}

pub fn generate(config: &SyntheticConfig) -> SyntheticData {
    assert!(config.journals >= 2, "need at least two journals");
    assert!(config.institutions >= 1);
    let (lo, hi) = config.pi4_range;
    assert!(0.0 < lo && lo <= hi && hi < 1.0, "pi4 range inside (0,1)");

    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let j_total = config.journals;
    let pi4: Vec<f64> = (0..j_total)
        .map(|j| {
            if j_total == 1 {
                lo
            } else {
                lo + (hi - lo) * j as f64 / (j_total - 1) as f64
            }
        })
        .collect();
    let pi34: Vec<f64> = pi4
        .iter()
        .map(|&p| sigmoid(logit(p) + config.cumulative_gap))
        .collect();

    let names: Vec<String> = (0..j_total - 1).map(|j| format!("J{j:02}")).collect();
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();

    let mut cells = Vec::new();
    let mut other = Vec::new();
    let mut y4s = Vec::new();
    let mut y34s = Vec::new();
    for _ in 0..config.institutions {
        // Log-normal preference weights give the uneven journal spread the
        // estimation needs.
        let weights: Vec<f64> = (0..j_total)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                (config.preference_sd * z).exp()
            })
            .collect();
        let total_weight: f64 = weights.iter().sum();
        let mut row = vec![0u32; j_total];
        for _ in 0..config.articles_per_institution {
            let mut u: f64 = rng.gen::<f64>() * total_weight;
            let mut j = 0;
            while j + 1 < j_total && u > weights[j] {
                u -= weights[j];
                j += 1;
            }
            row[j] += 1;
        }
        let mut y4 = 0u32;
        let mut y34 = 0u32;
        for (j, &x) in row.iter().enumerate() {
            for _ in 0..x {
                let u: f64 = rng.gen();
                if u < pi4[j] {
                    y4 += 1;
                    y34 += 1;
                } else if u < pi34[j] {
                    y34 += 1;
                }
            }
        }
        cells.push(row[..j_total - 1].to_vec());
        other.push(row[j_total - 1]);
        y4s.push(y4);
        y34s.push(y34);
    }

    let counts = counts_from_cells(&name_refs, &cells, &other);
    let profiles: Vec<InstitutionProfile> = counts
        .institutions()
        .iter()
        .enumerate()
        .map(|(i, name)| InstitutionProfile {
            institution: name.clone(),
            total_outputs: counts.row_sum(i),
            y4: y4s[i],
            y34: y34s[i],
            fte: f64::from(counts.row_sum(i)) / 4.0,
            envir: 0.0,
        })
        .collect();

    let mut true_pi4 = pi4;
    let mut true_pi34 = pi34;
    true_pi4.extend_from_slice(&[0.0, 0.0]);
    true_pi34.extend_from_slice(&[0.0, 0.0]);

    SyntheticData {
        counts,
        profiles,
        true_pi4,
        true_pi34,
    }
}
