//! Pipeline orchestration behind the `ecoref` binary: a JSON run
//! configuration with flag overrides, and the `ingest`, `fit`, `cv` and
//! `report` stages, each writing plain CSV (and one text) artifacts into
//! the output directory. Every stage is deterministic given the same
//! inputs and seed; artifact files are written atomically.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::em::{self, CvConfig, EmConfig};
use crate::ingest::{
    self, cluster_journals, enrich_with_doi_metadata, io as ingest_io, FileCachedResolver,
    HttpResolver, IngestError,
};
use crate::metrics::{self, FundingConfig};
use crate::model::{self, TargetLevel};
use crate::sampler::{self, ChainConfig};
use crate::seeds;

/// Stage failure classified for the process exit code: 1 usage/config,
/// 2 data, 3 numerical.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<model::ModelError> for CliError {
    fn from(e: model::ModelError) -> Self {
        match e {
            model::ModelError::Sampler(s) => CliError::Numerical(s.to_string()),
            model::ModelError::Pbinom(p) => CliError::Numerical(p.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<em::EmError> for CliError {
    fn from(e: em::EmError) -> Self {
        match e {
            em::EmError::InvalidConfig { .. } => CliError::Usage(e.to_string()),
            em::EmError::DimensionMismatch { .. } | em::EmError::InvalidUrn { .. } => {
                CliError::Data(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<metrics::MetricsError> for CliError {
    fn from(e: metrics::MetricsError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<sampler::SamplerError> for CliError {
    fn from(e: sampler::SamplerError) -> Self {
        match e {
            sampler::SamplerError::InvalidConfig { .. }
            | sampler::SamplerError::TooFewDraws { .. } => CliError::Usage(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodSelection {
    Hmc,
    Em,
    Both,
}

impl MethodSelection {
    pub fn includes_hmc(&self) -> bool {
        matches!(self, Self::Hmc | Self::Both)
    }

    pub fn includes_em(&self) -> bool {
        matches!(self, Self::Em | Self::Both)
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "hmc" => Some(Self::Hmc),
            "em" => Some(Self::Em),
            "both" => Some(Self::Both),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetSelection {
    #[serde(rename = "4star")]
    FourStar,
    #[serde(rename = "3plus")]
    ThreePlus,
    #[serde(rename = "both")]
    Both,
}

impl TargetSelection {
    pub fn levels(&self) -> Vec<TargetLevel> {
        match self {
            Self::FourStar => vec![TargetLevel::FourStar],
            Self::ThreePlus => vec![TargetLevel::ThreePlus],
            Self::Both => vec![TargetLevel::FourStar, TargetLevel::ThreePlus],
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "4star" => Some(Self::FourStar),
            "3plus" => Some(Self::ThreePlus),
            "both" => Some(Self::Both),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSettings {
    pub chains: usize,
    pub warmup_iters: usize,
    pub sample_iters: usize,
    pub target_accept: f64,
    pub max_leapfrog_depth: usize,
}

impl Default for ChainSettings {
    fn default() -> Self {
        let d = ChainConfig::default();
        Self {
            chains: d.chains,
            warmup_iters: d.warmup_iters,
            sample_iters: d.sample_iters,
            target_accept: d.target_accept,
            max_leapfrog_depth: d.max_leapfrog_depth,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmSettings {
    pub pseudo_strength: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for EmSettings {
    fn default() -> Self {
        let d = EmConfig::default();
        Self {
            pseudo_strength: d.pseudo_strength,
            tol: d.tol,
            max_iters: d.max_iters,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSettings {
    pub folds: usize,
    pub grid: Vec<f64>,
}

impl Default for CvSettings {
    fn default() -> Self {
        let d = CvConfig::default();
        Self {
            folds: d.folds,
            grid: d.grid,
        }
    }
}

/// Full run configuration; a JSON file supplies it and command-line flags
/// override individual fields. One top-level seed drives every random
/// substream.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub submissions: Option<PathBuf>,
    pub results: Option<PathBuf>,
    pub metrics_csv: Option<PathBuf>,
    pub threshold: usize,
    pub target: TargetSelection,
    pub method: MethodSelection,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub resolver_url: Option<String>,
    pub resolver_cache: Option<PathBuf>,
    pub resolver_timeout_secs: u64,
    pub chains: ChainSettings,
    pub em: EmSettings,
    pub cv: CvSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            submissions: None,
            results: None,
            metrics_csv: None,
            threshold: 20,
            target: TargetSelection::Both,
            method: MethodSelection::Both,
            out_dir: PathBuf::from("out"),
            seed: 0,
            resolver_url: None,
            resolver_cache: None,
            resolver_timeout_secs: 30,
            chains: ChainSettings::default(),
            em: EmSettings::default(),
            cv: CvSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }

    fn chain_config(&self, target_index: u64) -> ChainConfig {
        ChainConfig {
            chains: self.chains.chains,
            warmup_iters: self.chains.warmup_iters,
            sample_iters: self.chains.sample_iters,
            seed: seeds::substream(self.seed, seeds::SAMPLER, target_index),
            target_accept: self.chains.target_accept,
            max_leapfrog_depth: self.chains.max_leapfrog_depth,
        }
    }

    fn em_config(&self, target_index: u64) -> EmConfig {
        EmConfig {
            pseudo_strength: self.em.pseudo_strength,
            tol: self.em.tol,
            max_iters: self.em.max_iters,
            init_seed: seeds::substream(self.seed, seeds::EM, target_index),
        }
    }

    fn cv_config(&self, target_index: u64) -> CvConfig {
        CvConfig {
            folds: self.cv.folds,
            grid: self.cv.grid.clone(),
            seed: seeds::substream(self.seed, seeds::CV, target_index),
            em: EmConfig {
                pseudo_strength: self.em.pseudo_strength,
                tol: self.em.tol,
                max_iters: self.em.max_iters,
                init_seed: 0,
            },
        }
    }
}

fn artifact(config: &RunConfig, name: &str) -> PathBuf {
    config.out_dir.join(name)
}

fn require_artifact(config: &RunConfig, name: &str) -> Result<PathBuf, CliError> {
    let path = artifact(config, name);
    if !path.exists() {
        return Err(CliError::Data(format!(
            "missing artifact {} (run the earlier stages first)",
            path.display()
        )));
    }
    Ok(path)
}

fn write_csv_atomic(path: &Path, build: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    build(&mut writer).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let bytes = writer.into_inner().expect("in-memory writer");
    ingest_io::write_atomic(path, &bytes).map_err(CliError::from)
}

/// Reads the raw files, optionally corrects metadata through the DOI
/// resolver, clusters outputs into journals, and writes the counts
/// matrix, clustering report and institution profiles.
pub fn cmd_ingest(config: &RunConfig) -> Result<(), CliError> {
    let submissions_path = config
        .submissions
        .as_ref()
        .ok_or_else(|| CliError::Usage("config needs a submissions path for ingest".into()))?;
    let results_path = config
        .results
        .as_ref()
        .ok_or_else(|| CliError::Usage("config needs a results path for ingest".into()))?;
    if !submissions_path.exists() {
        return Err(CliError::Data(format!(
            "submissions file not found: {}",
            submissions_path.display()
        )));
    }
    if !results_path.exists() {
        return Err(CliError::Data(format!(
            "results file not found: {}",
            results_path.display()
        )));
    }
    std::fs::create_dir_all(&config.out_dir)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", config.out_dir.display())))?;

    let mut outputs = ingest_io::read_submissions(submissions_path)?;
    let results = ingest_io::read_results(results_path)?;

    let timeout = Duration::from_secs(config.resolver_timeout_secs);
    match (&config.resolver_url, &config.resolver_cache) {
        (Some(url), cache) => {
            let cache_path = cache
                .clone()
                .unwrap_or_else(|| artifact(config, "doi-cache.jsonl"));
            let resolver = FileCachedResolver::open(
                &cache_path,
                Some(HttpResolver::new(url, timeout)),
            )
            .map_err(IngestError::from)?;
            let report = enrich_with_doi_metadata(&mut outputs, &resolver);
            write_enrichment_report(config, &report)?;
        }
        (None, Some(cache_path)) => {
            let resolver: FileCachedResolver<HttpResolver> =
                FileCachedResolver::open(cache_path, None).map_err(IngestError::from)?;
            let report = enrich_with_doi_metadata(&mut outputs, &resolver);
            write_enrichment_report(config, &report)?;
        }
        (None, None) => {
            log::info!("no resolver configured; using hand-entered metadata as-is");
        }
    }

    let clusters = cluster_journals(&outputs);
    let counts = ingest::aggregate(&clusters, &outputs, config.threshold)?;
    let profiles = ingest::build_profiles(&results, &counts)?;

    ingest_io::write_counts(&artifact(config, "counts.csv"), &counts)?;
    ingest_io::write_clustering_report(&artifact(config, "clustering_report.csv"), &clusters)?;
    ingest_io::write_profiles(&artifact(config, "profiles.csv"), &profiles)?;

    let named = counts
        .columns()
        .iter()
        .filter(|c| c.kind == ingest::ColumnKind::NamedJournal)
        .count();
    log::info!(
        "ingested {} outputs from {} institutions into {} journals ({} named at threshold {})",
        outputs.len(),
        counts.n_institutions(),
        clusters.len(),
        named,
        config.threshold
    );
    println!(
        "ingest: {} outputs, {} unique journals, {} named columns",
        outputs.len(),
        clusters.len(),
        named
    );
    Ok(())
}

fn write_enrichment_report(
    config: &RunConfig,
    report: &ingest::EnrichmentReport,
) -> Result<(), CliError> {
    write_csv_atomic(&artifact(config, "enrichment_report.csv"), |w| {
        w.write_record(["output_id", "doi", "status"])?;
        for (id, doi, reason) in &report.unresolved {
            w.write_record([id, doi, reason])?;
        }
        Ok(())
    })?;
    println!(
        "enrichment: {} resolved, {} unresolved",
        report.resolved,
        report.unresolved.len()
    );
    Ok(())
}

struct FittedLevel {
    target: TargetLevel,
    /// Per-column success-probability draws (HMC only).
    pi_draws: Option<Vec<Vec<f64>>>,
    /// Point probabilities used for predictions (posterior medians when
    /// HMC ran, EM point estimates otherwise).
    pi_point: Vec<f64>,
}

/// Fits the selected methods for each target level and writes the league
/// table, predictions, indices, probit-gap diagnostic and per-method
/// reports.
pub fn cmd_fit(config: &RunConfig) -> Result<(), CliError> {
    let counts = ingest_io::read_counts(&require_artifact(config, "counts.csv")?)?;
    let profiles = ingest_io::read_profiles(&require_artifact(config, "profiles.csv")?)?;

    let levels = config.target.levels();
    let mut fitted: Vec<FittedLevel> = Vec::new();
    let mut league_rows: Vec<(String, String, f64, f64, f64, f64, f64, u64)> = Vec::new();
    let mut diagnostics: Vec<(String, usize, usize, bool, f64)> = Vec::new();

    for level in &levels {
        let target_index = match level {
            TargetLevel::FourStar => 0u64,
            TargetLevel::ThreePlus => 1u64,
        };
        let label = level.label();
        let mut pi_draws = None;
        let mut pi_point: Option<Vec<f64>> = None;
        let mut hmc_median_logits: Option<Vec<f64>> = None;

        if config.method.includes_hmc() {
            let chain_cfg = config.chain_config(target_index);
            let mut fit = model::fit_hmc(&counts, &profiles, *level, &chain_cfg)?;
            let posterior = model::Posterior::new(&counts, &profiles, *level)?;
            fit.draws.rename_parameters(posterior.parameter_names());
            fit.draws.write_csv(&artifact(config, &format!("trace_{label}.csv")))?;

            let summaries = sampler::summarize(&fit.draws)?;
            write_csv_atomic(&artifact(config, &format!("summary_{label}.csv")), |w| {
                w.write_record([
                    "parameter", "median", "lo50", "hi50", "lo95", "hi95", "rhat", "bulk_ess",
                ])?;
                for s in &summaries {
                    w.write_record([
                        s.name.clone(),
                        format!("{}", s.median),
                        format!("{}", s.lo50),
                        format!("{}", s.hi50),
                        format!("{}", s.lo95),
                        format!("{}", s.hi95),
                        s.split_rhat.map(|v| v.to_string()).unwrap_or_default(),
                        s.bulk_ess.map(|v| v.to_string()).unwrap_or_default(),
                    ])?;
                }
                Ok(())
            })?;

            for s in &fit.summaries {
                league_rows.push((
                    s.column.clone(),
                    label.to_string(),
                    s.median,
                    s.lo50,
                    s.hi50,
                    s.lo95,
                    s.hi95,
                    s.article_count,
                ));
            }
            let total = fit.draws.n_chains() * fit.draws.n_iters();
            diagnostics.push((
                label.to_string(),
                fit.draws.divergences,
                total,
                fit.draws.unreliable(),
                crate::numeric::mean(&fit.draws.accept_stats),
            ));
            hmc_median_logits = Some(
                fit.summaries
                    .iter()
                    .map(|s| crate::numeric::logit(s.median.clamp(1e-12, 1.0 - 1e-12)))
                    .collect(),
            );
            pi_point = Some(fit.summaries.iter().map(|s| s.median).collect());
            pi_draws = Some(std::mem::take(&mut fit.pi_draws));
        }

        let mut em_logits: Option<Vec<f64>> = None;
        if config.method.includes_em() {
            let em_cfg = config.em_config(target_index);
            let outcome = em::em_run(&counts, &profiles, *level, &em_cfg)?;
            if !outcome.converged {
                log::warn!(
                    "EM for {label} stopped at the iteration cap ({} iterations)",
                    outcome.iterations
                );
            }
            write_csv_atomic(&artifact(config, &format!("em_fit_{label}.csv")), |w| {
                w.write_record(["journal", "beta", "pi"])?;
                for (j, col) in counts.columns().iter().enumerate() {
                    w.write_record([
                        col.name.clone(),
                        format!("{}", outcome.fit.beta_hat[j]),
                        format!("{}", outcome.fit.journal_prob(j)),
                    ])?;
                }
                Ok(())
            })?;
            let logits: Vec<f64> = (0..counts.n_columns())
                .map(|j| outcome.fit.journal_logit(j))
                .collect();
            if pi_point.is_none() {
                pi_point = Some(logits.iter().map(|&l| crate::numeric::sigmoid(l)).collect());
            }
            em_logits = Some(logits);
        }

        if let (Some(em_l), Some(hmc_l)) = (&em_logits, &hmc_median_logits) {
            write_csv_atomic(&artifact(config, &format!("em_vs_hmc_{label}.csv")), |w| {
                w.write_record(["journal", "em_logit", "hmc_median_logit"])?;
                for (j, col) in counts.columns().iter().enumerate() {
                    w.write_record([
                        col.name.clone(),
                        format!("{}", em_l[j]),
                        format!("{}", hmc_l[j]),
                    ])?;
                }
                Ok(())
            })?;
        }

        fitted.push(FittedLevel {
            target: *level,
            pi_draws,
            pi_point: pi_point.expect("at least one method selected"),
        });
    }

    if config.method.includes_hmc() {
        write_csv_atomic(&artifact(config, "hmc_diagnostics.csv"), |w| {
            w.write_record(["target", "divergences", "total_iterations", "unreliable", "mean_accept"])?;
            for (label, div, total, unreliable, accept) in &diagnostics {
                w.write_record([
                    label.clone(),
                    div.to_string(),
                    total.to_string(),
                    unreliable.to_string(),
                    format!("{accept}"),
                ])?;
            }
            Ok(())
        })?;
    }

    // Cross-level artifacts need both levels.
    let four = fitted.iter().find(|f| f.target == TargetLevel::FourStar);
    let three_plus = fitted.iter().find(|f| f.target == TargetLevel::ThreePlus);
    if let (Some(four), Some(three_plus)) = (four, three_plus) {
        let names: Vec<String> = counts.columns().iter().map(|c| c.name.clone()).collect();

        if let (Some(d4), Some(d34)) = (&four.pi_draws, &three_plus.pi_draws) {
            let reports = model::derive_three_star(&names, d4, d34)?;
            write_csv_atomic(&artifact(config, "three_star.csv"), |w| {
                w.write_record([
                    "journal", "median", "lo50", "hi50", "lo95", "hi95", "frac_negative", "flagged",
                ])?;
                for r in &reports {
                    w.write_record([
                        r.column.clone(),
                        format!("{}", r.median),
                        format!("{}", r.lo50),
                        format!("{}", r.hi50),
                        format!("{}", r.lo95),
                        format!("{}", r.hi95),
                        format!("{}", r.frac_negative),
                        r.flagged.to_string(),
                    ])?;
                }
                Ok(())
            })?;
            for r in &reports {
                let count = counts
                    .columns()
                    .iter()
                    .position(|c| c.name == r.column)
                    .map(|j| counts.column_sum(j))
                    .unwrap_or(0);
                league_rows.push((
                    r.column.clone(),
                    "3star".to_string(),
                    r.median,
                    r.lo50,
                    r.hi50,
                    r.lo95,
                    r.hi95,
                    count,
                ));
            }
        }

        let predictions = metrics::predict(&counts, &four.pi_point, &three_plus.pi_point)?;
        let funding = FundingConfig::default();
        write_csv_atomic(&artifact(config, "predictions.csv"), |w| {
            w.write_record([
                "institution",
                "fte",
                "y4",
                "yhat4",
                "y3",
                "yhat3",
                "funding_actual_units",
                "funding_predicted_units",
            ])?;
            for (p, pred) in profiles.iter().zip(&predictions) {
                let n = f64::from(p.total_outputs).max(1.0);
                let actual = p.fte
                    * (funding.r4() * f64::from(p.y4) / n
                        + funding.r3() * f64::from(p.y34 - p.y4) / n);
                let predicted = p.fte
                    * (funding.r4() * pred.yhat4 / n + funding.r3() * pred.yhat3 / n);
                w.write_record([
                    p.institution.clone(),
                    format!("{}", p.fte),
                    p.y4.to_string(),
                    format!("{}", pred.yhat4),
                    (p.y34 - p.y4).to_string(),
                    format!("{}", pred.yhat3),
                    format!("{actual}"),
                    format!("{predicted}"),
                ])?;
            }
            Ok(())
        })?;

        // Indices: one row per paired posterior draw when both HMC fits
        // exist, otherwise a single row from the point estimates.
        let rows: Vec<(f64, f64)> = match (&four.pi_draws, &three_plus.pi_draws) {
            (Some(d4), Some(d34)) => {
                metrics::indices_per_draw(&counts, &profiles, d4, d34, &funding)?
            }
            _ => {
                let delta = metrics::dissimilarity(&profiles, &predictions)?;
                let money = metrics::money_redistribution(&profiles, &predictions, &funding)?;
                vec![(delta, money)]
            }
        };
        write_csv_atomic(&artifact(config, "indices.csv"), |w| {
            w.write_record(["draw", "dissimilarity", "money_redistribution"])?;
            for (i, (delta, money)) in rows.iter().enumerate() {
                w.write_record([i.to_string(), format!("{delta}"), format!("{money}")])?;
            }
            Ok(())
        })?;

        let gap = metrics::probit_gap(&names, &four.pi_point, &three_plus.pi_point)?;
        write_csv_atomic(&artifact(config, "probit_gap.csv"), |w| {
            w.write_record(["journal", "probit_pi4", "gap"])?;
            for (name, probit4, g) in &gap.entries {
                w.write_record([name.clone(), format!("{probit4}"), format!("{g}")])?;
            }
            Ok(())
        })?;
        write_csv_atomic(&artifact(config, "probit_gap_line.csv"), |w| {
            w.write_record(["slope", "intercept", "excluded", "ordering_violations"])?;
            w.write_record([
                format!("{}", gap.slope),
                format!("{}", gap.intercept),
                gap.excluded.join(";"),
                gap.ordering_violations.join(";"),
            ])?;
            Ok(())
        })?;
        println!(
            "fit: probit-gap slope {:.4}; indices rows {}",
            gap.slope,
            rows.len()
        );
    } else {
        log::info!("single target level fitted; cross-level artifacts skipped");
    }

    if !league_rows.is_empty() {
        league_rows.sort_by(|a, b| a.1.cmp(&b.1).then(b.2.partial_cmp(&a.2).unwrap()));
        write_csv_atomic(&artifact(config, "league.csv"), |w| {
            w.write_record([
                "journal", "target", "median", "lo50", "hi50", "lo95", "hi95", "article_count",
            ])?;
            for (journal, target, median, lo50, hi50, lo95, hi95, count) in &league_rows {
                w.write_record([
                    journal.clone(),
                    target.clone(),
                    format!("{median}"),
                    format!("{lo50}"),
                    format!("{hi50}"),
                    format!("{lo95}"),
                    format!("{hi95}"),
                    count.to_string(),
                ])?;
            }
            Ok(())
        })?;
    }

    println!("fit: wrote artifacts to {}", config.out_dir.display());
    Ok(())
}

/// Cross-validates the pseudo-data strength for each target level and
/// writes the fold table plus the chosen value.
pub fn cmd_cv(config: &RunConfig) -> Result<(), CliError> {
    let counts = ingest_io::read_counts(&require_artifact(config, "counts.csv")?)?;
    let profiles = ingest_io::read_profiles(&require_artifact(config, "profiles.csv")?)?;

    for level in config.target.levels() {
        let target_index = match level {
            TargetLevel::FourStar => 0u64,
            TargetLevel::ThreePlus => 1u64,
        };
        let label = level.label();
        let cv_cfg = config.cv_config(target_index);
        let outcome = em::cross_validate(&counts, &profiles, level, &cv_cfg)?;

        write_csv_atomic(&artifact(config, &format!("cv_table_{label}.csv")), |w| {
            w.write_record(["pseudo_strength", "fold", "delta"])?;
            for r in &outcome.records {
                w.write_record([
                    format!("{}", r.pseudo_strength),
                    r.fold.to_string(),
                    format!("{}", r.delta),
                ])?;
            }
            Ok(())
        })?;
        write_csv_atomic(&artifact(config, &format!("cv_choice_{label}.csv")), |w| {
            w.write_record(["pseudo_strength", "mean_delta", "chosen"])?;
            for (s, mean) in &outcome.mean_delta {
                w.write_record([
                    format!("{s}"),
                    format!("{mean}"),
                    (*s == outcome.best_pseudo_strength).to_string(),
                ])?;
            }
            Ok(())
        })?;
        println!(
            "cv [{label}]: best pseudo_strength {} ({} unseen-journal fallbacks)",
            outcome.best_pseudo_strength, outcome.unseen_fallbacks
        );
    }
    Ok(())
}

/// Renders the human-readable summary from the fit artifacts, plus the
/// citation-metric correlation block when an external table is supplied.
pub fn cmd_report(config: &RunConfig) -> Result<(), CliError> {
    let league_path = require_artifact(config, "league.csv")?;
    let mut report = String::new();

    // League table, top level, ordered by median.
    let mut league: Vec<(String, String, f64, f64, f64, f64, f64, u64)> = Vec::new();
    let mut reader = csv::Reader::from_path(&league_path)
        .map_err(|e| CliError::Data(format!("{}: {e}", league_path.display())))?;
    for record in reader.records() {
        let r = record.map_err(|e| CliError::Data(e.to_string()))?;
        let field = |i: usize| r.get(i).unwrap_or("").to_string();
        let num = |i: usize| -> f64 { r.get(i).and_then(|v| v.parse().ok()).unwrap_or(f64::NAN) };
        league.push((
            field(0),
            field(1),
            num(2),
            num(3),
            num(4),
            num(5),
            num(6),
            r.get(7).and_then(|v| v.parse().ok()).unwrap_or(0),
        ));
    }

    writeln!(report, "League table (top-level success probability, by median)").unwrap();
    writeln!(report, "{:-<72}", "").unwrap();
    let mut four_star: Vec<_> = league.iter().filter(|r| r.1 == "4star").collect();
    four_star.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap());
    for row in &four_star {
        writeln!(
            report,
            "{:<44} {:>6.3} [{:>6.3}, {:>6.3}] n={}",
            truncate(&row.0, 44),
            row.2,
            row.5,
            row.6,
            row.7
        )
        .unwrap();
    }

    // Predictions.
    let pred_path = require_artifact(config, "predictions.csv")?;
    let mut reader = csv::Reader::from_path(&pred_path)
        .map_err(|e| CliError::Data(format!("{}: {e}", pred_path.display())))?;
    writeln!(report, "\nPredicted vs observed counts").unwrap();
    writeln!(report, "{:-<72}", "").unwrap();
    writeln!(
        report,
        "{:<32} {:>8} {:>8} {:>8} {:>8}",
        "institution", "y4", "yhat4", "y3", "yhat3"
    )
    .unwrap();
    for record in reader.records() {
        let r = record.map_err(|e| CliError::Data(e.to_string()))?;
        let g = |i: usize| r.get(i).unwrap_or("");
        let f = |i: usize| -> f64 { g(i).parse().unwrap_or(f64::NAN) };
        writeln!(
            report,
            "{:<32} {:>8} {:>8.2} {:>8} {:>8.2}",
            truncate(g(0), 32),
            g(2),
            f(3),
            g(4),
            f(5)
        )
        .unwrap();
    }

    // Indices.
    let idx_path = require_artifact(config, "indices.csv")?;
    let mut reader = csv::Reader::from_path(&idx_path)
        .map_err(|e| CliError::Data(format!("{}: {e}", idx_path.display())))?;
    let mut deltas = Vec::new();
    let mut moneys = Vec::new();
    for record in reader.records() {
        let r = record.map_err(|e| CliError::Data(e.to_string()))?;
        if let (Some(d), Some(m)) = (
            r.get(1).and_then(|v| v.parse::<f64>().ok()),
            r.get(2).and_then(|v| v.parse::<f64>().ok()),
        ) {
            deltas.push(d);
            moneys.push(m);
        }
    }
    if deltas.is_empty() {
        return Err(CliError::Data(format!("{} holds no rows", idx_path.display())));
    }
    let median_delta = crate::numeric::quantile_of(&deltas, 0.5);
    let median_money = crate::numeric::quantile_of(&moneys, 0.5);
    writeln!(report, "\nIndices over {} draws", deltas.len()).unwrap();
    writeln!(report, "{:-<72}", "").unwrap();
    writeln!(report, "median dissimilarity:        {median_delta:.4}").unwrap();
    writeln!(report, "median money redistribution: {median_money:.4}").unwrap();

    // Optional external-metric correlation.
    if let Some(metrics_path) = &config.metrics_csv {
        let corr = external_correlation(config, metrics_path)?;
        writeln!(report, "\nExternal metric correlation ({} matched)", corr.matched).unwrap();
        writeln!(report, "{:-<72}", "").unwrap();
        writeln!(report, "pearson:  {:+.4}", corr.pearson).unwrap();
        writeln!(report, "spearman: {:+.4}", corr.spearman).unwrap();
        writeln!(
            report,
            "fit: median_pi4 = {:.4} + {:.4} * score",
            corr.intercept, corr.slope
        )
        .unwrap();
        if !corr.unmatched.is_empty() {
            writeln!(report, "unmatched: {}", corr.unmatched.join("; ")).unwrap();
        }
        write_csv_atomic(&artifact(config, "correlation.csv"), |w| {
            w.write_record(["journal", "score", "median_pi4"])?;
            for (journal, score, median) in &corr.pairs {
                w.write_record([journal.clone(), format!("{score}"), format!("{median}")])?;
            }
            Ok(())
        })?;
    } else {
        writeln!(report, "\n(no external metrics file supplied; correlation block omitted)")
            .unwrap();
    }

    ingest_io::write_atomic(&artifact(config, "report.txt"), report.as_bytes())?;
    print!("{report}");
    Ok(())
}

fn truncate(s: &str, width: usize) -> String {
    if s.chars().count() <= width {
        s.to_string()
    } else {
        let cut: String = s.chars().take(width.saturating_sub(1)).collect();
        format!("{cut}…")
    }
}

fn external_correlation(
    config: &RunConfig,
    metrics_path: &Path,
) -> Result<metrics::MetricCorrelation, CliError> {
    if !metrics_path.exists() {
        return Err(CliError::Data(format!(
            "external metrics file not found: {}",
            metrics_path.display()
        )));
    }
    // Identifier keys come from the clustering report; medians from the
    // league table's top-level rows.
    let league_path = require_artifact(config, "league.csv")?;
    let cluster_path = require_artifact(config, "clustering_report.csv")?;

    let mut medians: std::collections::BTreeMap<String, f64> = std::collections::BTreeMap::new();
    let mut reader = csv::Reader::from_path(&league_path)
        .map_err(|e| CliError::Data(format!("{}: {e}", league_path.display())))?;
    for record in reader.records() {
        let r = record.map_err(|e| CliError::Data(e.to_string()))?;
        if r.get(1) == Some("4star") {
            if let (Some(name), Some(median)) =
                (r.get(0), r.get(2).and_then(|v| v.parse::<f64>().ok()))
            {
                medians.insert(name.to_string(), median);
            }
        }
    }

    let mut journals = Vec::new();
    let mut reader = csv::Reader::from_path(&cluster_path)
        .map_err(|e| CliError::Data(format!("{}: {e}", cluster_path.display())))?;
    for record in reader.records() {
        let r = record.map_err(|e| CliError::Data(e.to_string()))?;
        let title = r.get(1).unwrap_or("").to_string();
        let Some(&median_pi4) = medians.get(&title) else {
            continue; // below threshold; pooled into "Other journals"
        };
        let mut issns = Vec::new();
        let mut title_keys = Vec::new();
        for key in r.get(3).unwrap_or("").split(';') {
            if let Some(v) = key.strip_prefix("issn:") {
                issns.push(v.to_string());
            } else if let Some(v) = key.strip_prefix("title:") {
                title_keys.push(v.to_string());
            }
        }
        journals.push(metrics::JournalMetricInput {
            column: title,
            median_pi4,
            issns,
            title_keys,
        });
    }

    let mut scores = Vec::new();
    let mut reader = csv::Reader::from_path(metrics_path)
        .map_err(|e| CliError::Data(format!("{}: {e}", metrics_path.display())))?;
    for record in reader.records() {
        let r = record.map_err(|e| CliError::Data(e.to_string()))?;
        scores.push(metrics::ExternalScore {
            journal_key: r.get(0).unwrap_or("").to_string(),
            issn: r.get(1).unwrap_or("").to_string(),
            score: r
                .get(2)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| CliError::Data("external metrics: bad score".into()))?,
        });
    }

    Ok(metrics::metric_correlation(&journals, &scores, false)?)
}
