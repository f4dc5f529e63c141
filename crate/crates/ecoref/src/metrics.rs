//! What the fitted journal probabilities imply: predicted institutional
//! profiles, the index of dissimilarity, the redistribution-of-monetary-
//! reward index, per-output funding values, deterministic ecological
//! bounds, the probit-gap diagnostic, and correlation against external
//! journal metrics.

use thiserror::Error;

use crate::ingest::{CountsMatrix, InstitutionProfile};
use crate::numeric::{inverse_normal_cdf, ols_line, pearson, spearman};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("dimension mismatch: {reason}")]
    DimensionMismatch { reason: String },
    #[error("probability {value} outside {bounds}")]
    InvalidProportion { value: f64, bounds: &'static str },
    #[error("one group is empty (X = {0}); bounds are undefined")]
    DegenerateGroup(f64),
    #[error("zero denominator: {context}")]
    ZeroDenominator { context: String },
    #[error("{fte} full-time-equivalent staff for {institution}; need a positive count")]
    InvalidFte { institution: String, fte: f64 },
    #[error("only {found} matched journals; need at least 3")]
    InsufficientMatches { found: usize },
    #[error("key {key} matches more than one journal")]
    AmbiguousKey { key: String },
    #[error("journal {column} matched by more than one external row")]
    DuplicateMatch { column: String },
}

/// Predicted outcome counts for one institution.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub institution: String,
    pub yhat4: f64,
    pub yhat34: f64,
    /// yhat34 - yhat4; negative when the input probability vectors violate
    /// the cumulative ordering. Flagged, never clamped.
    pub yhat3: f64,
    pub ordering_violated: bool,
}

/// Linear aggregation `ŷ_i = Σ_j n_ij π̂_j` for both levels.
pub fn predict(
    counts: &CountsMatrix,
    pi4: &[f64],
    pi34: &[f64],
) -> Result<Vec<Prediction>, MetricsError> {
    let j = counts.n_columns();
    if pi4.len() != j || pi34.len() != j {
        return Err(MetricsError::DimensionMismatch {
            reason: format!("{} columns, {} pi4, {} pi34", j, pi4.len(), pi34.len()),
        });
    }
    for &p in pi4.iter().chain(pi34) {
        if !(0.0..=1.0).contains(&p) {
            return Err(MetricsError::InvalidProportion {
                value: p,
                bounds: "[0,1]",
            });
        }
    }
    Ok((0..counts.n_institutions())
        .map(|i| {
            let mut yhat4 = 0.0;
            let mut yhat34 = 0.0;
            for (jj, &x) in counts.row(i).iter().enumerate() {
                yhat4 += f64::from(x) * pi4[jj];
                yhat34 += f64::from(x) * pi34[jj];
            }
            let yhat3 = yhat34 - yhat4;
            Prediction {
                institution: counts.institutions()[i].clone(),
                yhat4,
                yhat34,
                yhat3,
                ordering_violated: yhat3 < 0.0,
            }
        })
        .collect())
}

/// Index of dissimilarity:
/// `Δ = 1/(2N) Σ_i (|y⁴-ŷ⁴| + |y³-ŷ³| + |y⁴+y³-ŷ⁴-ŷ³|)` with
/// `y³ = y³⁴ - y⁴` and N the total submitted outputs.
pub fn dissimilarity(
    profiles: &[InstitutionProfile],
    predictions: &[Prediction],
) -> Result<f64, MetricsError> {
    check_pairing(profiles, predictions)?;
    let total: u64 = profiles.iter().map(|p| u64::from(p.total_outputs)).sum();
    if total == 0 {
        return Err(MetricsError::ZeroDenominator {
            context: "no submitted outputs".to_string(),
        });
    }
    let mut sum = 0.0;
    for (p, pred) in profiles.iter().zip(predictions) {
        let y4 = f64::from(p.y4);
        let y3 = f64::from(p.y34 - p.y4);
        sum += (y4 - pred.yhat4).abs()
            + (y3 - pred.yhat3).abs()
            + (y4 + y3 - pred.yhat4 - pred.yhat3).abs();
    }
    Ok(sum / (2.0 * total as f64))
}

/// Funding weights: a top-rated output is worth exactly four times the
/// next level, and nothing below attracts funding.
#[derive(Debug, Clone, Copy)]
pub struct FundingConfig {
    r3: f64,
}

impl FundingConfig {
    pub fn new(r3: f64) -> Result<Self, MetricsError> {
        if !(r3 > 0.0) || !r3.is_finite() {
            return Err(MetricsError::InvalidProportion {
                value: r3,
                bounds: "(0, inf)",
            });
        }
        Ok(Self { r3 })
    }

    pub fn r3(&self) -> f64 {
        self.r3
    }

    pub fn r4(&self) -> f64 {
        4.0 * self.r3
    }
}

impl Default for FundingConfig {
    fn default() -> Self {
        Self { r3: 1.0 }
    }
}

/// Fraction of total formula funding that would move between institutions
/// if predicted profiles replaced observed ones:
/// `Δ£ = ½ Σ m_i |r₄(p⁴-p̂⁴) + r₃(p³-p̂³)| / Σ m_i (r₄ p⁴ + r₃ p³)`,
/// proportions taken as counts over each institution's total outputs.
pub fn money_redistribution(
    profiles: &[InstitutionProfile],
    predictions: &[Prediction],
    funding: &FundingConfig,
) -> Result<f64, MetricsError> {
    check_pairing(profiles, predictions)?;
    let (r4, r3) = (funding.r4(), funding.r3());
    let mut moved = 0.0;
    let mut denom = 0.0;
    for (p, pred) in profiles.iter().zip(predictions) {
        if !(p.fte > 0.0) {
            return Err(MetricsError::InvalidFte {
                institution: p.institution.clone(),
                fte: p.fte,
            });
        }
        let n = f64::from(p.total_outputs);
        if n == 0.0 {
            continue;
        }
        let p4 = f64::from(p.y4) / n;
        let p3 = f64::from(p.y34 - p.y4) / n;
        let p4_hat = pred.yhat4 / n;
        let p3_hat = pred.yhat3 / n;
        moved += p.fte * (r4 * (p4 - p4_hat) + r3 * (p3 - p3_hat)).abs();
        denom += p.fte * (r4 * p4 + r3 * p3);
    }
    if denom <= 0.0 {
        return Err(MetricsError::ZeroDenominator {
            context: "no funded outputs anywhere".to_string(),
        });
    }
    Ok(0.5 * moved / denom)
}

fn check_pairing(
    profiles: &[InstitutionProfile],
    predictions: &[Prediction],
) -> Result<(), MetricsError> {
    if profiles.len() != predictions.len() {
        return Err(MetricsError::DimensionMismatch {
            reason: format!(
                "{} profiles, {} predictions",
                profiles.len(),
                predictions.len()
            ),
        });
    }
    for (p, pred) in profiles.iter().zip(predictions) {
        if p.institution != pred.institution {
            return Err(MetricsError::DimensionMismatch {
                reason: format!("profile {} against prediction {}", p.institution, pred.institution),
            });
        }
    }
    Ok(())
}

/// Monetary value per output at the two funded levels, from a total award
/// `F` and the (possibly fractional) output counts: `x₃ = F/(n₃ + 4n₄)`,
/// `x₄ = 4x₃`.
pub fn funding_value(total: f64, n3: f64, n4: f64) -> Result<(f64, f64), MetricsError> {
    let denom = n3 + 4.0 * n4;
    if !(denom > 0.0) {
        return Err(MetricsError::ZeroDenominator {
            context: format!("n3 + 4 n4 = {denom}"),
        });
    }
    let x3 = total / denom;
    Ok((x3, 4.0 * x3))
}

/// Deterministic bounds on the two unobserved cell proportions of a 2×2
/// table with known margins.
#[derive(Debug, Clone, PartialEq)]
pub struct EcologicalBounds {
    /// Interval for the first group's rate.
    pub beta_b: (f64, f64),
    /// Interval for the second group's rate.
    pub beta_w: (f64, f64),
}

/// Method of bounds: with group share X and aggregate rate T, the group
/// rates are confined to `[max(0,(T-(1-X))/X), min(1,T/X)]` and its
/// mirror image.
pub fn ecological_bounds(x: f64, t: f64) -> Result<EcologicalBounds, MetricsError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(MetricsError::InvalidProportion {
            value: t,
            bounds: "[0,1]",
        });
    }
    if !(x > 0.0 && x < 1.0) {
        return Err(MetricsError::DegenerateGroup(x));
    }
    let clamp = |v: f64| v.clamp(0.0, 1.0);
    Ok(EcologicalBounds {
        beta_b: (clamp((t - (1.0 - x)) / x), clamp(t / x)),
        beta_w: (clamp((t - x) / (1.0 - x)), clamp(t / (1.0 - x))),
    })
}

/// Per-journal cumulative probit difference and its trend.
#[derive(Debug, Clone)]
pub struct ProbitGap {
    /// (column, probit(pi4), gap) per included journal.
    pub entries: Vec<(String, f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    /// Journals at probability 0 or 1, excluded from the regression.
    pub excluded: Vec<String>,
    /// Journals whose gap is non-positive (cumulative ordering violated).
    pub ordering_violations: Vec<String>,
}

/// Computes `c_j = probit(π̂³⁴) - probit(π̂⁴)` per journal and regresses it
/// on `probit(π̂⁴)`. A proportional-odds world has slope zero; a negative
/// slope says stronger journals have a smaller gap.
pub fn probit_gap(
    columns: &[String],
    pi4_medians: &[f64],
    pi34_medians: &[f64],
) -> Result<ProbitGap, MetricsError> {
    if columns.len() != pi4_medians.len() || columns.len() != pi34_medians.len() {
        return Err(MetricsError::DimensionMismatch {
            reason: format!(
                "{} columns, {} pi4, {} pi34",
                columns.len(),
                pi4_medians.len(),
                pi34_medians.len()
            ),
        });
    }
    let mut entries = Vec::new();
    let mut excluded = Vec::new();
    let mut ordering_violations = Vec::new();
    for ((name, &p4), &p34) in columns.iter().zip(pi4_medians).zip(pi34_medians) {
        if !(p4 > 0.0 && p4 < 1.0 && p34 > 0.0 && p34 < 1.0) {
            excluded.push(name.clone());
            continue;
        }
        let probit4 = inverse_normal_cdf(p4);
        let gap = inverse_normal_cdf(p34) - probit4;
        if gap <= 0.0 {
            ordering_violations.push(name.clone());
        }
        entries.push((name.clone(), probit4, gap));
    }
    if entries.len() < 2 {
        return Err(MetricsError::InsufficientMatches {
            found: entries.len(),
        });
    }
    let xs: Vec<f64> = entries.iter().map(|e| e.1).collect();
    let ys: Vec<f64> = entries.iter().map(|e| e.2).collect();
    let (intercept, slope) = ols_line(&xs, &ys);
    Ok(ProbitGap {
        entries,
        slope,
        intercept,
        excluded,
        ordering_violations,
    })
}

/// One fitted journal offered for matching against an external score
/// table.
#[derive(Debug, Clone)]
pub struct JournalMetricInput {
    pub column: String,
    pub median_pi4: f64,
    /// ISSNs in any punctuation (normalized internally).
    pub issns: Vec<String>,
    /// Normalized title keys.
    pub title_keys: Vec<String>,
}

/// One row of the external metric table.
#[derive(Debug, Clone)]
pub struct ExternalScore {
    pub journal_key: String,
    pub issn: String,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct MetricCorrelation {
    pub matched: usize,
    pub pearson: f64,
    pub spearman: f64,
    /// OLS of median π̂⁴ on the (optionally log10) score.
    pub slope: f64,
    pub intercept: f64,
    pub unmatched: Vec<String>,
    /// (column, score, median) per matched journal.
    pub pairs: Vec<(String, f64, f64)>,
}

/// Joins fitted journals to an external score table (ISSN first, then
/// normalized title) and correlates the scores with the fitted medians.
/// Any key matching two journals is a hard error; fewer than three matches
/// is an error.
pub fn metric_correlation(
    journals: &[JournalMetricInput],
    scores: &[ExternalScore],
    log_transform: bool,
) -> Result<MetricCorrelation, MetricsError> {
    use std::collections::HashMap;
    let mut by_issn: HashMap<&str, Vec<usize>> = HashMap::new();
    let mut by_title: HashMap<&str, Vec<usize>> = HashMap::new();
    let normalized_issns: Vec<Vec<String>> = journals
        .iter()
        .map(|j| {
            j.issns
                .iter()
                .map(|s| crate::ingest::cluster::normalize_issn(s))
                .collect()
        })
        .collect();
    for (idx, journal) in journals.iter().enumerate() {
        for issn in &normalized_issns[idx] {
            by_issn.entry(issn.as_str()).or_default().push(idx);
        }
        for key in &journal.title_keys {
            by_title.entry(key.as_str()).or_default().push(idx);
        }
    }

    let mut pairs: Vec<(String, f64, f64)> = Vec::new();
    let mut matched_journals: HashMap<usize, String> = HashMap::new();
    let mut unmatched = Vec::new();
    for row in scores {
        let issn_key = crate::ingest::cluster::normalize_issn(&row.issn);
        let title_key = crate::ingest::normalize_title(&row.journal_key).ok();
        let candidates: Option<(&str, &Vec<usize>)> = if !issn_key.is_empty() {
            by_issn.get_key_value(issn_key.as_str()).map(|(k, v)| (*k, v))
        } else {
            None
        };
        let candidates = candidates.or_else(|| {
            title_key
                .as_deref()
                .and_then(|k| by_title.get_key_value(k).map(|(k, v)| (*k, v)))
        });
        match candidates {
            None => unmatched.push(row.journal_key.clone()),
            Some((key, idxs)) => {
                let unique: std::collections::BTreeSet<usize> = idxs.iter().copied().collect();
                if unique.len() > 1 {
                    return Err(MetricsError::AmbiguousKey {
                        key: key.to_string(),
                    });
                }
                let idx = *unique.iter().next().unwrap();
                if matched_journals
                    .insert(idx, row.journal_key.clone())
                    .is_some()
                {
                    return Err(MetricsError::DuplicateMatch {
                        column: journals[idx].column.clone(),
                    });
                }
                let score = if log_transform {
                    row.score.log10()
                } else {
                    row.score
                };
                pairs.push((journals[idx].column.clone(), score, journals[idx].median_pi4));
            }
        }
    }
    if pairs.len() < 3 {
        return Err(MetricsError::InsufficientMatches { found: pairs.len() });
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.2).collect();
    let (intercept, slope) = ols_line(&xs, &ys);
    Ok(MetricCorrelation {
        matched: pairs.len(),
        pearson: pearson(&xs, &ys),
        spearman: spearman(&xs, &ys),
        slope,
        intercept,
        unmatched,
        pairs,
    })
}

/// Drawwise indices: for each paired posterior draw, predict with that
/// draw's probability vectors and score Δ and Δ£. Streams of unequal
/// length are thinned by stride, as in the middle-level derivation.
pub fn indices_per_draw(
    counts: &CountsMatrix,
    profiles: &[InstitutionProfile],
    pi4_draws: &[Vec<f64>],
    pi34_draws: &[Vec<f64>],
    funding: &FundingConfig,
) -> Result<Vec<(f64, f64)>, MetricsError> {
    let j = counts.n_columns();
    if pi4_draws.len() != j || pi34_draws.len() != j {
        return Err(MetricsError::DimensionMismatch {
            reason: format!(
                "{} columns, {} pi4 streams, {} pi34 streams",
                j,
                pi4_draws.len(),
                pi34_draws.len()
            ),
        });
    }
    let d4 = pi4_draws.iter().map(|s| s.len()).min().unwrap_or(0);
    let d34 = pi34_draws.iter().map(|s| s.len()).min().unwrap_or(0);
    let n = d4.min(d34);
    if n == 0 {
        return Err(MetricsError::DimensionMismatch {
            reason: "empty draw stream".to_string(),
        });
    }
    let mut out = Vec::with_capacity(n);
    let mut pi4 = vec![0.0; j];
    let mut pi34 = vec![0.0; j];
    for k in 0..n {
        for jj in 0..j {
            pi4[jj] = pi4_draws[jj][k * pi4_draws[jj].len() / n];
            pi34[jj] = pi34_draws[jj][k * pi34_draws[jj].len() / n];
        }
        let preds = predict(counts, &pi4, &pi34)?;
        out.push((
            dissimilarity(profiles, &preds)?,
            money_redistribution(profiles, &preds, funding)?,
        ));
    }
    Ok(out)
}
