//! DOI metadata resolution with a file-backed cache.
//!
//! Hand-entered journal metadata in submissions files is unreliable; the
//! registry entry behind the DOI is not. Resolved metadata therefore
//! replaces the hand-entered title and ISSNs. Every live lookup goes
//! through an append-only cache file so repeated runs are reproducible
//! offline.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{OutputType, RawOutput};

#[derive(Debug, Error)]
pub enum ResolverError {
    #[error("transport failure for {doi}: {message}")]
    Transport { doi: String, message: String },
    #[error("malformed metadata for {doi}: {message}")]
    Malformed { doi: String, message: String },
    #[error("cache file {path}: {source}")]
    Cache {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Journal-level metadata attached to a DOI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoiMetadata {
    pub container_title: Option<String>,
    #[serde(default)]
    pub issns: Vec<String>,
}

/// Anything that can look up DOI metadata: an HTTP client, a cache, or a
/// test double.
pub trait MetadataResolver {
    /// `Ok(None)` means the DOI definitively has no record; errors mean
    /// the lookup could not be completed.
    fn lookup(&self, doi: &str) -> Result<Option<DoiMetadata>, ResolverError>;
}

/// In-memory resolver for tests and replays.
#[derive(Debug, Default)]
pub struct StaticResolver {
    entries: HashMap<String, DoiMetadata>,
}

impl StaticResolver {
    pub fn new(entries: impl IntoIterator<Item = (String, DoiMetadata)>) -> Self {
        Self {
            entries: entries.into_iter().collect(),
        }
    }
}

impl MetadataResolver for StaticResolver {
    fn lookup(&self, doi: &str) -> Result<Option<DoiMetadata>, ResolverError> {
        Ok(self.entries.get(doi).cloned())
    }
}

/// HTTP resolver: `GET {base_url}/{doi}` returning a JSON body
/// `{"container_title": ..., "issns": [...]}`; 404 means no record.
pub struct HttpResolver {
    base_url: String,
    agent: ureq::Agent,
}

impl HttpResolver {
    pub fn new(base_url: &str, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            agent: config.into(),
        }
    }
}

impl MetadataResolver for HttpResolver {
    fn lookup(&self, doi: &str) -> Result<Option<DoiMetadata>, ResolverError> {
        let url = format!("{}/{}", self.base_url, doi);
        let mut response = self
            .agent
            .get(&url)
            .call()
            .map_err(|e| ResolverError::Transport {
                doi: doi.to_string(),
                message: e.to_string(),
            })?;
        match response.status().as_u16() {
            200 => {
                let body = response.body_mut().read_to_string().map_err(|e| {
                    ResolverError::Transport {
                        doi: doi.to_string(),
                        message: e.to_string(),
                    }
                })?;
                let meta: DoiMetadata =
                    serde_json::from_str(&body).map_err(|e| ResolverError::Malformed {
                        doi: doi.to_string(),
                        message: e.to_string(),
                    })?;
                Ok(Some(meta))
            }
            404 => Ok(None),
            status => Err(ResolverError::Transport {
                doi: doi.to_string(),
                message: format!("unexpected status {status}"),
            }),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheRecord {
    doi: String,
    found: bool,
    #[serde(default)]
    container_title: Option<String>,
    #[serde(default)]
    issns: Vec<String>,
}

/// File-backed cache wrapping an optional live resolver.
///
/// The cache is a flat append-only file of JSON lines. With no inner
/// resolver it answers from the file alone (offline mode) and treats
/// anything uncached as unresolved.
pub struct FileCachedResolver<R> {
    path: PathBuf,
    state: Mutex<CacheState>,
    inner: Option<R>,
}

struct CacheState {
    map: HashMap<String, Option<DoiMetadata>>,
    file: Option<File>,
}

impl<R> FileCachedResolver<R> {
    pub fn open(path: &Path, inner: Option<R>) -> Result<Self, ResolverError> {
        let mut map = HashMap::new();
        if path.exists() {
            let file = File::open(path).map_err(|e| ResolverError::Cache {
                path: path.to_path_buf(),
                source: e,
            })?;
            for line in BufReader::new(file).lines() {
                let line = line.map_err(|e| ResolverError::Cache {
                    path: path.to_path_buf(),
                    source: e,
                })?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: CacheRecord =
                    serde_json::from_str(&line).map_err(|e| ResolverError::Malformed {
                        doi: "<cache>".to_string(),
                        message: format!("{}: {e}", path.display()),
                    })?;
                let value = record.found.then_some(DoiMetadata {
                    container_title: record.container_title,
                    issns: record.issns,
                });
                map.insert(record.doi, value);
            }
        }
        // The write handle is only needed when live lookups can add records.
        let file = if inner.is_some() {
            Some(
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(|e| ResolverError::Cache {
                        path: path.to_path_buf(),
                        source: e,
                    })?,
            )
        } else {
            None
        };
        Ok(Self {
            path: path.to_path_buf(),
            state: Mutex::new(CacheState { map, file }),
            inner,
        })
    }

    pub fn cached_len(&self) -> usize {
        self.state.lock().unwrap().map.len()
    }
}

impl<R: MetadataResolver> MetadataResolver for FileCachedResolver<R> {
    fn lookup(&self, doi: &str) -> Result<Option<DoiMetadata>, ResolverError> {
        if let Some(hit) = self.state.lock().unwrap().map.get(doi) {
            return Ok(hit.clone());
        }
        let Some(inner) = &self.inner else {
            return Ok(None);
        };
        let result = inner.lookup(doi)?;
        let mut state = self.state.lock().unwrap();
        if let Some(file) = &mut state.file {
            let record = CacheRecord {
                doi: doi.to_string(),
                found: result.is_some(),
                container_title: result.as_ref().and_then(|m| m.container_title.clone()),
                issns: result.as_ref().map(|m| m.issns.clone()).unwrap_or_default(),
            };
            let line = serde_json::to_string(&record).expect("cache record serializes");
            writeln!(file, "{line}").map_err(|e| ResolverError::Cache {
                path: self.path.clone(),
                source: e,
            })?;
        }
        state.map.insert(doi.to_string(), result.clone());
        Ok(result)
    }
}

const LOOKUP_ATTEMPTS: usize = 3;

/// Per-run outcome of metadata enrichment.
#[derive(Debug, Default)]
pub struct EnrichmentReport {
    pub resolved: usize,
    /// (output_id, doi, reason) rows left untouched.
    pub unresolved: Vec<(String, String, String)>,
}

/// Replaces hand-entered journal metadata with registry metadata for every
/// journal article that carries a DOI.
///
/// Resolved DOIs overwrite `volume_title` and `issns`; unresolved DOIs
/// (no record, or transport failure after bounded retries) keep the
/// original fields and are listed in the report. A failed lookup never
/// aborts the run.
pub fn enrich_with_doi_metadata(
    outputs: &mut [RawOutput],
    resolver: &dyn MetadataResolver,
) -> EnrichmentReport {
    let mut report = EnrichmentReport::default();
    for output in outputs.iter_mut() {
        if output.output_type != OutputType::JournalArticle {
            continue;
        }
        let Some(doi) = output.doi.clone() else {
            continue;
        };
        let mut outcome = None;
        for attempt in 1..=LOOKUP_ATTEMPTS {
            match resolver.lookup(&doi) {
                Ok(found) => {
                    outcome = Some(Ok(found));
                    break;
                }
                Err(e) if attempt == LOOKUP_ATTEMPTS => outcome = Some(Err(e)),
                Err(e) => {
                    log::debug!("lookup attempt {attempt} for {doi} failed: {e}");
                }
            }
        }
        match outcome.expect("loop always sets an outcome") {
            Ok(Some(meta)) => {
                if let Some(title) = meta.container_title {
                    output.volume_title = Some(title);
                }
                output.issns = meta.issns;
                report.resolved += 1;
            }
            Ok(None) => {
                report.unresolved.push((
                    output.output_id.clone(),
                    doi,
                    "no record".to_string(),
                ));
            }
            Err(e) => {
                report
                    .unresolved
                    .push((output.output_id.clone(), doi, e.to_string()));
            }
        }
    }
    report
}
