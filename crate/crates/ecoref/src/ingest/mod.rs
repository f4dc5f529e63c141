//! Turns raw submission and results files into model-ready data: a counts
//! matrix of articles per institution and journal, and per-institution
//! rating profiles.

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;

use thiserror::Error;

pub mod cluster;
pub mod io;
pub mod resolver;
pub mod titles;

pub use cluster::{cluster_journals, JournalCluster};
pub use resolver::{
    enrich_with_doi_metadata, DoiMetadata, EnrichmentReport, FileCachedResolver, HttpResolver,
    MetadataResolver, ResolverError, StaticResolver,
};
pub use titles::normalize_title;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("title {title:?} normalizes to nothing usable")]
    UnusableTitle { title: String },
    #[error("threshold must be at least 1")]
    InvalidThreshold,
    #[error("duplicate output id {output_id}")]
    DuplicateOutputId { output_id: String },
    #[error("journal article {output_id} carries no identifier (doi/issn/isbn/title)")]
    MissingIdentifier { output_id: String },
    #[error("unknown output type {value:?} (expected journal-article, conference or other)")]
    UnknownOutputType { value: String },
    #[error("duplicate institution {institution} in results")]
    DuplicateInstitution { institution: String },
    #[error(
        "institutions do not match: in results but not in submissions {missing_in_counts:?}; \
         in submissions but not in results {missing_in_results:?}"
    )]
    InstitutionMismatch {
        missing_in_counts: Vec<String>,
        missing_in_results: Vec<String>,
    },
    #[error("invalid counts matrix: {reason}")]
    InvalidCounts { reason: String },
    #[error("invalid profile for {institution}: {reason}")]
    InvalidProfile { institution: String, reason: String },
    #[error(transparent)]
    Resolver(#[from] ResolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputType {
    JournalArticle,
    Conference,
    Other,
}

impl OutputType {
    pub fn parse(value: &str) -> Result<Self, IngestError> {
        match value.trim().to_lowercase().as_str() {
            "journal-article" | "journal article" => Ok(Self::JournalArticle),
            "conference" | "conference-proceedings" => Ok(Self::Conference),
            "other" => Ok(Self::Other),
            _ => Err(IngestError::UnknownOutputType {
                value: value.to_string(),
            }),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::JournalArticle => "journal-article",
            Self::Conference => "conference",
            Self::Other => "other",
        }
    }
}

/// One submitted output, as read from the submissions file.
#[derive(Debug, Clone)]
pub struct RawOutput {
    pub output_id: String,
    pub institution: String,
    pub output_type: OutputType,
    pub doi: Option<String>,
    pub issns: Vec<String>,
    pub isbn: Option<String>,
    pub volume_title: Option<String>,
}

pub const OTHER_JOURNALS: &str = "Other journals";
pub const CONFERENCE_PROCEEDINGS: &str = "Conference proceedings";
pub const OTHER_OUTPUTS: &str = "Other outputs";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    NamedJournal,
    OtherJournals,
    ConferenceProceedings,
    OtherOutputs,
}

#[derive(Debug, Clone)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    /// Cluster id for named journals.
    pub journal_id: Option<usize>,
}

/// Per-institution, per-column submitted-output counts.
///
/// Columns are the named journals followed by the three pooled columns
/// ("Other journals", "Conference proceedings", "Other outputs"), always
/// present in that order; row sums equal each institution's total
/// submitted outputs.
#[derive(Debug, Clone)]
pub struct CountsMatrix {
    institutions: Vec<String>,
    columns: Vec<Column>,
    counts: Vec<u32>,
}

impl CountsMatrix {
    pub fn from_parts(
        institutions: Vec<String>,
        columns: Vec<Column>,
        counts: Vec<u32>,
    ) -> Result<Self, IngestError> {
        if counts.len() != institutions.len() * columns.len() {
            return Err(IngestError::InvalidCounts {
                reason: format!(
                    "{} counts for {} institutions x {} columns",
                    counts.len(),
                    institutions.len(),
                    columns.len()
                ),
            });
        }
        let tail: Vec<ColumnKind> = columns.iter().map(|c| c.kind).filter(|k| *k != ColumnKind::NamedJournal).collect();
        if tail
            != [
                ColumnKind::OtherJournals,
                ColumnKind::ConferenceProceedings,
                ColumnKind::OtherOutputs,
            ]
        {
            return Err(IngestError::InvalidCounts {
                reason: "expected exactly one of each pooled column, in order".to_string(),
            });
        }
        if columns
            .iter()
            .rev()
            .take(3)
            .any(|c| c.kind == ColumnKind::NamedJournal)
        {
            return Err(IngestError::InvalidCounts {
                reason: "pooled columns must come last".to_string(),
            });
        }
        Ok(Self {
            institutions,
            columns,
            counts,
        })
    }

    pub fn n_institutions(&self) -> usize {
        self.institutions.len()
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn institutions(&self) -> &[String] {
        &self.institutions
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn count(&self, institution: usize, column: usize) -> u32 {
        self.counts[institution * self.columns.len() + column]
    }

    pub fn row(&self, institution: usize) -> &[u32] {
        let j = self.columns.len();
        &self.counts[institution * j..(institution + 1) * j]
    }

    pub fn row_sum(&self, institution: usize) -> u32 {
        self.row(institution).iter().sum()
    }

    pub fn column_sum(&self, column: usize) -> u64 {
        (0..self.institutions.len())
            .map(|i| u64::from(self.count(i, column)))
            .sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    /// Index of the "Other journals" column, the model's reference column.
    pub fn reference_column(&self) -> usize {
        self.columns
            .iter()
            .position(|c| c.kind == ColumnKind::OtherJournals)
            .expect("pooled columns always present")
    }

    pub fn institution_index(&self, name: &str) -> Option<usize> {
        self.institutions.iter().position(|i| i == name)
    }

    /// New matrix keeping only the given institution rows (same columns).
    pub fn select_institutions(&self, keep: &[usize]) -> CountsMatrix {
        let j = self.columns.len();
        let mut counts = Vec::with_capacity(keep.len() * j);
        let mut institutions = Vec::with_capacity(keep.len());
        for &i in keep {
            institutions.push(self.institutions[i].clone());
            counts.extend_from_slice(self.row(i));
        }
        CountsMatrix {
            institutions,
            columns: self.columns.clone(),
            counts,
        }
    }
}

/// Observed outcome profile of one institution.
#[derive(Debug, Clone, PartialEq)]
pub struct InstitutionProfile {
    pub institution: String,
    pub total_outputs: u32,
    /// Outputs rated at the top level.
    pub y4: u32,
    /// Outputs rated at the top level or one below.
    pub y34: u32,
    /// Full-time-equivalent staff.
    pub fte: f64,
    /// Centred share of the environment profile at the top level.
    pub envir: f64,
}

/// One row of the published results file, percentages as published.
#[derive(Debug, Clone)]
pub struct ResultsRow {
    pub institution: String,
    pub fte: f64,
    pub pct4: f64,
    pub pct3: f64,
    pub pct2: f64,
    pub pct1: f64,
    pub pctu: f64,
    pub envir_pct4: f64,
}

/// Builds the counts matrix: clusters with at least `threshold` articles
/// become named columns, the rest pool into "Other journals", and
/// non-article outputs pool into their own columns. Row sums equal each
/// institution's total submitted outputs.
pub fn aggregate(
    clusters: &[JournalCluster],
    outputs: &[RawOutput],
    threshold: usize,
) -> Result<CountsMatrix, IngestError> {
    if threshold == 0 {
        return Err(IngestError::InvalidThreshold);
    }

    let institutions: Vec<String> = outputs
        .iter()
        .map(|o| o.institution.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let inst_index: HashMap<&str, usize> = institutions
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();

    let named: Vec<&JournalCluster> = clusters
        .iter()
        .filter(|c| c.article_count() >= threshold)
        .collect();
    let mut columns: Vec<Column> = named
        .iter()
        .map(|c| Column {
            name: c.display_title.clone(),
            kind: ColumnKind::NamedJournal,
            journal_id: Some(c.journal_id),
        })
        .collect();
    let other_journals = columns.len();
    columns.push(Column {
        name: OTHER_JOURNALS.to_string(),
        kind: ColumnKind::OtherJournals,
        journal_id: None,
    });
    let conference = columns.len();
    columns.push(Column {
        name: CONFERENCE_PROCEEDINGS.to_string(),
        kind: ColumnKind::ConferenceProceedings,
        journal_id: None,
    });
    let other_outputs = columns.len();
    columns.push(Column {
        name: OTHER_OUTPUTS.to_string(),
        kind: ColumnKind::OtherOutputs,
        journal_id: None,
    });

    let mut column_of_output: HashMap<&str, usize> = HashMap::new();
    for (col, cluster) in named.iter().enumerate() {
        for id in &cluster.member_output_ids {
            column_of_output.insert(id.as_str(), col);
        }
    }

    let mut counts = vec![0u32; institutions.len() * columns.len()];
    for output in outputs {
        let i = inst_index[output.institution.as_str()];
        let j = match output.output_type {
            OutputType::JournalArticle => column_of_output
                .get(output.output_id.as_str())
                .copied()
                .unwrap_or(other_journals),
            OutputType::Conference => conference,
            OutputType::Other => other_outputs,
        };
        counts[i * columns.len() + j] += 1;
    }

    CountsMatrix::from_parts(institutions, columns, counts)
}

/// Converts published percentage profiles into integer counts and centred
/// environment scores, in the row order of the counts matrix.
///
/// Percentages map to counts over the five rating categories by
/// round-half-to-even with a largest-remainder repair, so the category
/// counts always sum to the institution's total and 0 ≤ y4 ≤ y34 ≤ N.
pub fn build_profiles(
    rows: &[ResultsRow],
    counts: &CountsMatrix,
) -> Result<Vec<InstitutionProfile>, IngestError> {
    let mut by_institution: HashMap<&str, &ResultsRow> = HashMap::new();
    for row in rows {
        if by_institution.insert(row.institution.as_str(), row).is_some() {
            return Err(IngestError::DuplicateInstitution {
                institution: row.institution.clone(),
            });
        }
    }

    let in_counts: BTreeSet<&str> = counts.institutions().iter().map(String::as_str).collect();
    let in_results: BTreeSet<&str> = by_institution.keys().copied().collect();
    let missing_in_counts: Vec<String> = in_results
        .difference(&in_counts)
        .map(|s| s.to_string())
        .collect();
    let missing_in_results: Vec<String> = in_counts
        .difference(&in_results)
        .map(|s| s.to_string())
        .collect();
    if !missing_in_counts.is_empty() || !missing_in_results.is_empty() {
        return Err(IngestError::InstitutionMismatch {
            missing_in_counts,
            missing_in_results,
        });
    }

    let mut profiles = Vec::with_capacity(counts.n_institutions());
    for (i, institution) in counts.institutions().iter().enumerate() {
        let row = by_institution[institution.as_str()];
        if !row.fte.is_finite() || row.fte < 0.0 {
            return Err(IngestError::InvalidProfile {
                institution: institution.clone(),
                reason: format!("fte {} out of range", row.fte),
            });
        }
        let total = counts.row_sum(i);
        let cats = percentages_to_counts(
            total,
            &[row.pct4, row.pct3, row.pct2, row.pct1, row.pctu],
        );
        profiles.push(InstitutionProfile {
            institution: institution.clone(),
            total_outputs: total,
            y4: cats[0],
            y34: cats[0] + cats[1],
            fte: row.fte,
            envir: row.envir_pct4,
        });
    }

    let mean_envir =
        profiles.iter().map(|p| p.envir).sum::<f64>() / profiles.len().max(1) as f64;
    for p in &mut profiles {
        p.envir -= mean_envir;
    }
    Ok(profiles)
}

/// Round-half-to-even per category, then repair the sum to exactly `total`
/// by nudging the categories with the largest (for deficits) or smallest
/// (for surpluses) rounding remainders.
fn percentages_to_counts(total: u32, pcts: &[f64; 5]) -> [u32; 5] {
    let targets: Vec<f64> = pcts
        .iter()
        .map(|p| (total as f64) * p.max(0.0) / 100.0)
        .collect();
    let mut counts: Vec<i64> = targets
        .iter()
        .map(|t| (t.round_ties_even() as i64).clamp(0, i64::from(total)))
        .collect();
    let mut diff = i64::from(total) - counts.iter().sum::<i64>();
    while diff != 0 {
        if diff > 0 {
            let pick = (0..5)
                .max_by(|&a, &b| {
                    let ra = targets[a] - counts[a] as f64;
                    let rb = targets[b] - counts[b] as f64;
                    ra.partial_cmp(&rb).unwrap().then(b.cmp(&a))
                })
                .unwrap();
            counts[pick] += 1;
            diff -= 1;
        } else {
            let pick = (0..5)
                .filter(|&c| counts[c] > 0)
                .min_by(|&a, &b| {
                    let ra = targets[a] - counts[a] as f64;
                    let rb = targets[b] - counts[b] as f64;
                    ra.partial_cmp(&rb).unwrap().then(a.cmp(&b))
                })
                .unwrap();
            counts[pick] -= 1;
            diff += 1;
        }
    }
    [
        counts[0] as u32,
        counts[1] as u32,
        counts[2] as u32,
        counts[3] as u32,
        counts[4] as u32,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn output(id: &str, inst: &str, ty: OutputType, issn: Option<&str>, title: Option<&str>) -> RawOutput {
        RawOutput {
            output_id: id.to_string(),
            institution: inst.to_string(),
            output_type: ty,
            doi: None,
            issns: issn.into_iter().map(str::to_string).collect(),
            isbn: None,
            volume_title: title.map(str::to_string),
        }
    }

    fn small_corpus() -> Vec<RawOutput> {
        use OutputType::*;
        vec![
            output("o1", "uni-a", JournalArticle, Some("1-1"), Some("Alpha")),
            output("o2", "uni-a", JournalArticle, Some("1-1"), Some("Alpha")),
            output("o3", "uni-b", JournalArticle, Some("1-1"), Some("Alpha")),
            output("o4", "uni-b", JournalArticle, Some("2-2"), Some("Beta")),
            output("o5", "uni-b", Conference, None, None),
            output("o6", "uni-a", Other, None, None),
            output("o7", "uni-a", JournalArticle, Some("3-3"), Some("Gamma")),
        ]
    }

    #[test]
    fn aggregate_thresholds_and_conserves_mass() {
        let outputs = small_corpus();
        let clusters = cluster_journals(&outputs);
        let m = aggregate(&clusters, &outputs, 2).unwrap();
        // Alpha (3 articles) is named; Beta and Gamma pool into Other journals.
        let named: Vec<&str> = m
            .columns()
            .iter()
            .filter(|c| c.kind == ColumnKind::NamedJournal)
            .map(|c| c.name.as_str())
            .collect();
        assert_eq!(named, vec!["Alpha"]);
        assert_eq!(m.total(), outputs.len() as u64);
        assert_eq!(m.row_sum(0), 4); // uni-a
        assert_eq!(m.row_sum(1), 3); // uni-b
        assert_eq!(m.column_sum(m.reference_column()), 2);
    }

    #[test]
    fn aggregate_threshold_one_names_everything() {
        let outputs = small_corpus();
        let clusters = cluster_journals(&outputs);
        let m = aggregate(&clusters, &outputs, 1).unwrap();
        assert_eq!(m.column_sum(m.reference_column()), 0);
        let named = m
            .columns()
            .iter()
            .filter(|c| c.kind == ColumnKind::NamedJournal)
            .count();
        assert_eq!(named, 3);
    }

    #[test]
    fn aggregate_rejects_zero_threshold() {
        let outputs = small_corpus();
        let clusters = cluster_journals(&outputs);
        assert!(matches!(
            aggregate(&clusters, &outputs, 0),
            Err(IngestError::InvalidThreshold)
        ));
    }

    #[test]
    fn mass_conserved_for_any_threshold() {
        let outputs = small_corpus();
        let clusters = cluster_journals(&outputs);
        for threshold in 1..=5 {
            let m = aggregate(&clusters, &outputs, threshold).unwrap();
            assert_eq!(m.total(), outputs.len() as u64, "threshold {threshold}");
        }
    }

    fn results_row(inst: &str, pct4: f64, pct3: f64, envir: f64) -> ResultsRow {
        ResultsRow {
            institution: inst.to_string(),
            fte: 10.0,
            pct4,
            pct3,
            pct2: 100.0 - pct4 - pct3,
            pct1: 0.0,
            pctu: 0.0,
            envir_pct4: envir,
        }
    }

    fn matrix_with_totals(totals: &[(&str, u32)]) -> CountsMatrix {
        let institutions: Vec<String> = totals.iter().map(|(s, _)| s.to_string()).collect();
        let columns = vec![
            Column {
                name: OTHER_JOURNALS.to_string(),
                kind: ColumnKind::OtherJournals,
                journal_id: None,
            },
            Column {
                name: CONFERENCE_PROCEEDINGS.to_string(),
                kind: ColumnKind::ConferenceProceedings,
                journal_id: None,
            },
            Column {
                name: OTHER_OUTPUTS.to_string(),
                kind: ColumnKind::OtherOutputs,
                journal_id: None,
            },
        ];
        let mut counts = Vec::new();
        for (_, n) in totals {
            counts.extend_from_slice(&[*n, 0, 0]);
        }
        CountsMatrix::from_parts(institutions, columns, counts).unwrap()
    }

    #[test]
    fn profile_counts_follow_rounding_rule() {
        let m = matrix_with_totals(&[("a", 100), ("b", 7), ("c", 50)]);
        let rows = vec![
            results_row("a", 30.0, 50.0, 10.0),
            results_row("b", 33.3, 0.0, 20.0),
            results_row("c", 0.0, 0.0, 30.0),
        ];
        let profiles = build_profiles(&rows, &m).unwrap();
        assert_eq!(profiles[0].y4, 30);
        assert_eq!(profiles[0].y34, 80);
        // 7 * 0.333 = 2.331 rounds to 2.
        assert_eq!(profiles[1].y4, 2);
        // envir (10, 20, 30) centres to (-10, 0, 10).
        assert_eq!(profiles[0].envir, -10.0);
        assert_eq!(profiles[1].envir, 0.0);
        assert_eq!(profiles[2].envir, 10.0);
        let mean: f64 = profiles.iter().map(|p| p.envir).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-9);
    }

    #[test]
    fn profile_counts_always_ordered_and_bounded() {
        let m = matrix_with_totals(&[("a", 13)]);
        // Percentages that do not sum to 100 still give consistent counts.
        let rows = vec![ResultsRow {
            institution: "a".to_string(),
            fte: 1.0,
            pct4: 40.2,
            pct3: 40.2,
            pct2: 10.0,
            pct1: 5.0,
            pctu: 5.0,
            envir_pct4: 0.0,
        }];
        let p = &build_profiles(&rows, &m).unwrap()[0];
        assert!(p.y4 <= p.y34);
        assert!(p.y34 <= p.total_outputs);
    }

    #[test]
    fn mismatched_institutions_are_a_hard_error() {
        let m = matrix_with_totals(&[("a", 10)]);
        let rows = vec![results_row("b", 10.0, 10.0, 0.0)];
        let err = build_profiles(&rows, &m).unwrap_err();
        match err {
            IngestError::InstitutionMismatch {
                missing_in_counts,
                missing_in_results,
            } => {
                assert_eq!(missing_in_counts, vec!["b".to_string()]);
                assert_eq!(missing_in_results, vec!["a".to_string()]);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    proptest::proptest! {
        #[test]
        fn category_counts_sum_to_total(
            total in 0u32..500,
            pcts in proptest::array::uniform5(0.0f64..60.0)
        ) {
            let counts = percentages_to_counts(total, &pcts);
            proptest::prop_assert_eq!(counts.iter().sum::<u32>(), total);
        }
    }
}
