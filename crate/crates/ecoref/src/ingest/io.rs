//! CSV interfaces for the ingest pipeline: submissions and results
//! readers, and the counts-matrix / clustering-report / profile artifacts.
//!
//! All artifact writers go through a temp-file-and-rename so a crashed run
//! never leaves a half-written file behind.

use std::fs;
use std::path::{Path, PathBuf};

use super::cluster::JournalCluster;
use super::{
    Column, ColumnKind, CountsMatrix, IngestError, InstitutionProfile, OutputType, RawOutput,
    ResultsRow, CONFERENCE_PROCEEDINGS, OTHER_JOURNALS, OTHER_OUTPUTS,
};

fn io_err(path: &Path, source: std::io::Error) -> IngestError {
    IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `contents` to `path` atomically (temp file in the same
/// directory, then rename).
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), IngestError> {
    let tmp: PathBuf = path.with_extension(format!(
        "{}.tmp{}",
        path.extension().and_then(|e| e.to_str()).unwrap_or(""),
        std::process::id()
    ));
    fs::write(&tmp, contents).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))?;
    Ok(())
}

fn non_empty(field: &str) -> Option<String> {
    let t = field.trim();
    (!t.is_empty()).then(|| t.to_string())
}

/// Reads the submissions file. Expected header:
/// `output_id,institution,uoa,output_type,doi,issn_list,isbn,volume_title`
/// with `issn_list` semicolon-separated.
pub fn read_submissions(path: &Path) -> Result<Vec<RawOutput>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(IngestError::Csv)?;
    let mut outputs = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for record in reader.records() {
        let record = record?;
        let get = |i: usize| record.get(i).unwrap_or("");
        let output_id = get(0).to_string();
        if output_id.is_empty() {
            continue;
        }
        if !seen.insert(output_id.clone()) {
            return Err(IngestError::DuplicateOutputId { output_id });
        }
        let output_type = OutputType::parse(get(3))?;
        let issns: Vec<String> = get(5)
            .split(';')
            .filter_map(non_empty)
            .collect();
        let output = RawOutput {
            output_id,
            institution: get(1).to_string(),
            output_type,
            doi: non_empty(get(4)),
            issns,
            isbn: non_empty(get(6)),
            volume_title: non_empty(get(7)),
        };
        if output.output_type == OutputType::JournalArticle
            && output.doi.is_none()
            && output.issns.is_empty()
            && output.isbn.is_none()
            && output.volume_title.is_none()
        {
            return Err(IngestError::MissingIdentifier {
                output_id: output.output_id,
            });
        }
        outputs.push(output);
    }
    Ok(outputs)
}

/// Reads the published results file. Expected header:
/// `institution,uoa,fte,outputs_pct_4,outputs_pct_3,outputs_pct_2,outputs_pct_1,outputs_pct_u,envir_pct_4`.
pub fn read_results(path: &Path) -> Result<Vec<ResultsRow>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(IngestError::Csv)?;
    let mut rows = Vec::new();
    for record in reader.deserialize::<ResultsRecord>() {
        let r = record?;
        rows.push(ResultsRow {
            institution: r.institution,
            fte: r.fte,
            pct4: r.outputs_pct_4,
            pct3: r.outputs_pct_3,
            pct2: r.outputs_pct_2,
            pct1: r.outputs_pct_1,
            pctu: r.outputs_pct_u,
            envir_pct4: r.envir_pct_4,
        });
    }
    Ok(rows)
}

#[derive(serde::Deserialize)]
struct ResultsRecord {
    institution: String,
    #[allow(dead_code)]
    uoa: Option<String>,
    fte: f64,
    outputs_pct_4: f64,
    outputs_pct_3: f64,
    outputs_pct_2: f64,
    outputs_pct_1: f64,
    outputs_pct_u: f64,
    envir_pct_4: f64,
}

/// Counts matrix as CSV: first column `institution`, then one column per
/// journal column in matrix order.
pub fn write_counts(path: &Path, matrix: &CountsMatrix) -> Result<(), IngestError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["institution".to_string()];
    header.extend(matrix.columns().iter().map(|c| c.name.clone()));
    writer.write_record(&header)?;
    for (i, institution) in matrix.institutions().iter().enumerate() {
        let mut row = vec![institution.clone()];
        row.extend(matrix.row(i).iter().map(|c| c.to_string()));
        writer.write_record(&row)?;
    }
    let bytes = writer.into_inner().expect("in-memory writer");
    write_atomic(path, &bytes)
}

/// Reads a counts matrix back. Column kinds are recovered positionally:
/// the three pooled columns are always the last three.
pub fn read_counts(path: &Path) -> Result<CountsMatrix, IngestError> {
    let mut reader = csv::ReaderBuilder::new().from_path(path)?;
    let headers = reader.headers()?.clone();
    let names: Vec<&str> = headers.iter().skip(1).collect();
    if names.len() < 3 {
        return Err(IngestError::InvalidCounts {
            reason: "counts file has fewer than the three pooled columns".to_string(),
        });
    }
    let n = names.len();
    if names[n - 3] != OTHER_JOURNALS
        || names[n - 2] != CONFERENCE_PROCEEDINGS
        || names[n - 1] != OTHER_OUTPUTS
    {
        return Err(IngestError::InvalidCounts {
            reason: format!(
                "expected trailing pooled columns, found {:?}",
                &names[n.saturating_sub(3)..]
            ),
        });
    }
    let columns: Vec<Column> = names
        .iter()
        .enumerate()
        .map(|(idx, name)| {
            let kind = if idx == n - 3 {
                ColumnKind::OtherJournals
            } else if idx == n - 2 {
                ColumnKind::ConferenceProceedings
            } else if idx == n - 1 {
                ColumnKind::OtherOutputs
            } else {
                ColumnKind::NamedJournal
            };
            Column {
                name: name.to_string(),
                kind,
                journal_id: (kind == ColumnKind::NamedJournal).then_some(idx),
            }
        })
        .collect();

    let mut institutions = Vec::new();
    let mut counts = Vec::new();
    for record in reader.records() {
        let record = record?;
        institutions.push(record.get(0).unwrap_or("").to_string());
        for field in record.iter().skip(1) {
            let value: u32 = field.parse().map_err(|_| IngestError::InvalidCounts {
                reason: format!("non-integer count {field:?}"),
            })?;
            counts.push(value);
        }
    }
    CountsMatrix::from_parts(institutions, columns, counts)
}

/// Clustering report: `journal_id,display_title,article_count,identifier_keys`
/// with keys joined by `;`.
pub fn write_clustering_report(
    path: &Path,
    clusters: &[JournalCluster],
) -> Result<(), IngestError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["journal_id", "display_title", "article_count", "identifier_keys"])?;
    for c in clusters {
        writer.write_record([
            c.journal_id.to_string(),
            c.display_title.clone(),
            c.article_count().to_string(),
            c.identifier_keys
                .iter()
                .cloned()
                .collect::<Vec<_>>()
                .join(";"),
        ])?;
    }
    let bytes = writer.into_inner().expect("in-memory writer");
    write_atomic(path, &bytes)
}

pub fn write_profiles(path: &Path, profiles: &[InstitutionProfile]) -> Result<(), IngestError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["institution", "total_outputs", "y4", "y34", "fte", "envir"])?;
    for p in profiles {
        writer.write_record([
            p.institution.clone(),
            p.total_outputs.to_string(),
            p.y4.to_string(),
            p.y34.to_string(),
            format!("{}", p.fte),
            format!("{}", p.envir),
        ])?;
    }
    let bytes = writer.into_inner().expect("in-memory writer");
    write_atomic(path, &bytes)
}

pub fn read_profiles(path: &Path) -> Result<Vec<InstitutionProfile>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().from_path(path)?;
    let mut profiles = Vec::new();
    for record in reader.deserialize::<ProfileRecord>() {
        let r = record?;
        profiles.push(InstitutionProfile {
            institution: r.institution,
            total_outputs: r.total_outputs,
            y4: r.y4,
            y34: r.y34,
            fte: r.fte,
            envir: r.envir,
        });
    }
    Ok(profiles)
}

#[derive(serde::Deserialize)]
struct ProfileRecord {
    institution: String,
    total_outputs: u32,
    y4: u32,
    y34: u32,
    fte: f64,
    envir: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::cluster_journals;

    #[test]
    fn submissions_round_trip_through_reader() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("submissions.csv");
        fs::write(
            &path,
            "output_id,institution,uoa,output_type,doi,issn_list,isbn,volume_title\n\
             o1,uni-a,econ,journal-article,10.1/a,1234-5678;8765-4321,,The Journal\n\
             o2,uni-a,econ,conference,,,,\n\
             o3,uni-b,econ,journal-article,,,978-3-16,Book Series\n",
        )
        .unwrap();
        let outputs = read_submissions(&path).unwrap();
        assert_eq!(outputs.len(), 3);
        assert_eq!(outputs[0].issns.len(), 2);
        assert_eq!(outputs[0].doi.as_deref(), Some("10.1/a"));
        assert_eq!(outputs[1].output_type, OutputType::Conference);
        assert_eq!(outputs[2].isbn.as_deref(), Some("978-3-16"));
    }

    #[test]
    fn identifier_free_article_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("submissions.csv");
        fs::write(
            &path,
            "output_id,institution,uoa,output_type,doi,issn_list,isbn,volume_title\n\
             o1,uni-a,econ,journal-article,,,,\n",
        )
        .unwrap();
        assert!(matches!(
            read_submissions(&path),
            Err(IngestError::MissingIdentifier { .. })
        ));
    }

    #[test]
    fn counts_matrix_round_trip() {
        let outputs = vec![
            RawOutput {
                output_id: "o1".into(),
                institution: "uni-a".into(),
                output_type: OutputType::JournalArticle,
                doi: None,
                issns: vec!["1-1".into()],
                isbn: None,
                volume_title: Some("Alpha".into()),
            },
            RawOutput {
                output_id: "o2".into(),
                institution: "uni-b".into(),
                output_type: OutputType::Conference,
                doi: None,
                issns: vec![],
                isbn: None,
                volume_title: None,
            },
        ];
        let clusters = cluster_journals(&outputs);
        let matrix = aggregate_for_test(&clusters, &outputs);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("counts.csv");
        write_counts(&path, &matrix).unwrap();
        let back = read_counts(&path).unwrap();
        assert_eq!(back.institutions(), matrix.institutions());
        assert_eq!(back.n_columns(), matrix.n_columns());
        for i in 0..matrix.n_institutions() {
            assert_eq!(back.row(i), matrix.row(i));
        }
        assert_eq!(back.reference_column(), matrix.reference_column());
    }

    fn aggregate_for_test(
        clusters: &[JournalCluster],
        outputs: &[RawOutput],
    ) -> CountsMatrix {
        crate::ingest::aggregate(clusters, outputs, 1).unwrap()
    }

    #[test]
    fn profiles_round_trip() {
        let profiles = vec![InstitutionProfile {
            institution: "uni-a".into(),
            total_outputs: 12,
            y4: 3,
            y34: 9,
            fte: 4.5,
            envir: -2.25,
        }];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("profiles.csv");
        write_profiles(&path, &profiles).unwrap();
        let back = read_profiles(&path).unwrap();
        assert_eq!(back, profiles);
    }
}
