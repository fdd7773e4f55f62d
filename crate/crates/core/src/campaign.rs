//! The generate → run → check → report pipeline over a [`CampaignConfig`],
//! with the intermediate artifacts it leaves in `out_dir`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::{CampaignConfig, ConfigError};
use crate::mockbench::synthetic_overlay;
use crate::mr::{canonical_order, evaluate_pair, MrVerdict, Outcome};
use crate::ontology::{load_obo, Ontology, OntologyError};
use crate::predictions::{load_predictions, to_annotation_set, AnnotationSet, IngestWarning, Prediction, PredictionFormat};
use crate::report::{aggregate_with, anonymize, to_csv, to_json, to_markdown, ReportError, ReportMetadata, TestReport};
use crate::runner::{artifact_stem, distinct_records, execute_campaign, CampaignRun, RunResult, RunStatus, RunnerError, ToolAdapter};
use crate::sequence::{parse_fasta, write_fasta, ProteinRecord, SequenceError};
use crate::variants::{generate_pairs, load_variant_table, TestCasePair, VariantError};

pub const INPUTS_DIR: &str = "inputs";
pub const PAIRS_FILE: &str = "pairs.tsv";
pub const RUNS_FILE: &str = "runs.json";
pub const VERDICTS_FILE: &str = "verdicts.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_MD: &str = "report.md";

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Sequence { path: PathBuf, source: SequenceError },
    #[error(transparent)]
    Variant(#[from] VariantError),
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error(transparent)]
    Runner(#[from] RunnerError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CampaignError + '_ {
    move |source| CampaignError::Io { path: path.to_path_buf(), source }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CampaignError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CampaignError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_file(path, &text)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CampaignError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| CampaignError::Json { path: path.to_path_buf(), source })
}

pub fn load_canonicals(paths: &[PathBuf]) -> Result<Vec<ProteinRecord>, CampaignError> {
    let mut out = Vec::new();
    for path in paths {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        out.extend(parse_fasta(&text).map_err(|source| CampaignError::Sequence { path: path.clone(), source })?);
    }
    Ok(out)
}

/// Canonical records and the sorted test case pairs built from them.
pub fn load_pairs(config: &CampaignConfig) -> Result<(Vec<ProteinRecord>, Vec<TestCasePair>), CampaignError> {
    let canonicals = load_canonicals(&config.canonicals)?;
    let specs = load_variant_table(&config.variants)?;
    let pairs = generate_pairs(&canonicals, &specs)?;
    Ok((canonicals, pairs))
}

/// The configured ontology, with the synthetic mock terms merged in when enabled.
pub fn load_ontology(config: &CampaignConfig) -> Result<Ontology, CampaignError> {
    let mut onto = load_obo(&config.ontology)?;
    if config.synthetic_overlay {
        onto.merge(synthetic_overlay())?;
    }
    Ok(onto)
}

pub fn input_fasta_path(out_dir: &Path, record_id: &str) -> PathBuf {
    out_dir.join(INPUTS_DIR).join(format!("{}.fasta", artifact_stem(record_id)))
}

/// Writes one FASTA per distinct record plus the pair table. Returns the pairs.
pub fn generate(config: &CampaignConfig) -> Result<Vec<TestCasePair>, CampaignError> {
    let (_, pairs) = load_pairs(config)?;
    for record in distinct_records(&pairs)? {
        write_file(&input_fasta_path(&config.out_dir, &record.id), &write_fasta(std::slice::from_ref(&record)))?;
    }
    let mut table = String::from("pair_id\tprotein_id\tvariant_id\tcategory\tchange\tsource_fasta\tfollow_up_fasta\n");
    for p in &pairs {
        table.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            p.pair_id(),
            p.protein_id(),
            p.variant.variant_id,
            p.variant.category,
            p.variant.change_label(),
            Path::new(INPUTS_DIR).join(format!("{}.fasta", artifact_stem(&p.source.id))).display(),
            Path::new(INPUTS_DIR).join(format!("{}.fasta", artifact_stem(&p.follow_up.id))).display(),
        ));
    }
    write_file(&config.out_dir.join(PAIRS_FILE), &table)?;
    Ok(pairs)
}

/// Runs every tool on every distinct record and records the results in `runs.json`.
pub fn run(config: &CampaignConfig, pairs: &[TestCasePair], adapters: &[ToolAdapter]) -> Result<CampaignRun, CampaignError> {
    let campaign = execute_campaign(pairs, adapters, &config.run_options())?;
    let list: Vec<&RunResult> = campaign.results.values().collect();
    write_json(&config.out_dir.join(RUNS_FILE), &list)?;
    Ok(campaign)
}

pub fn load_runs(out_dir: &Path) -> Result<Vec<RunResult>, CampaignError> {
    read_json(&out_dir.join(RUNS_FILE))
}

/// Predictions for one record out of a single-record output file. Tools that
/// rename the query are tolerated when the file mentions exactly one protein.
pub fn predictions_for_record(preds: Vec<Prediction>, record_id: &str) -> Vec<Prediction> {
    if preds.iter().any(|p| p.protein_id == record_id) {
        return preds.into_iter().filter(|p| p.protein_id == record_id).collect();
    }
    let ids: BTreeSet<&str> = preds.iter().map(|p| p.protein_id.as_str()).collect();
    if ids.len() == 1 {
        return preds
            .into_iter()
            .map(|p| Prediction { protein_id: record_id.to_string(), ..p })
            .collect();
    }
    Vec::new()
}

/// Annotation set for a run result; `None` when the tool produced no usable output.
pub fn annotations_for(
    result: Option<&RunResult>,
    format: PredictionFormat,
    onto: &Ontology,
    threshold: f64,
) -> (Option<AnnotationSet>, Vec<IngestWarning>) {
    let Some(RunResult { record_id, status: RunStatus::Ok { prediction_path }, .. }) = result else {
        return (None, Vec::new());
    };
    let parsed = match load_predictions(prediction_path, format) {
        Ok(p) => p,
        Err(e) => {
            tracing::warn!("{}: {e}", prediction_path.display());
            return (None, Vec::new());
        }
    };
    let mut warnings = parsed.warnings;
    let preds = predictions_for_record(parsed.predictions, record_id);
    let (set, w) = to_annotation_set(&preds, onto, record_id, threshold);
    warnings.extend(w);
    (Some(set), warnings)
}

#[derive(Debug, Clone, Default)]
pub struct CheckOutput {
    pub verdicts: Vec<MrVerdict>,
    pub warnings: Vec<IngestWarning>,
}

impl CheckOutput {
    pub fn any_fail(&self) -> bool {
        self.verdicts.iter().any(|v| v.outcome == Outcome::Fail)
    }
}

/// Evaluates every pair for every configured tool and writes `verdicts.json`.
pub fn check(
    config: &CampaignConfig,
    pairs: &[TestCasePair],
    runs: &[RunResult],
    onto: &Ontology,
) -> Result<CheckOutput, CampaignError> {
    let by_key: BTreeMap<(&str, &str), &RunResult> =
        runs.iter().map(|r| ((r.tool_id.as_str(), r.record_id.as_str()), r)).collect();
    let mut out = CheckOutput::default();
    for tool in &config.tools {
        let mut cache: BTreeMap<&str, Option<AnnotationSet>> = BTreeMap::new();
        let mut annotations = |record_id: &'_ str, out: &mut CheckOutput| -> Option<AnnotationSet> {
            if let Some(hit) = cache.get(record_id) {
                return hit.clone();
            }
            let result = by_key.get(&(tool.id(), record_id)).copied();
            let (set, warnings) = annotations_for(result, tool.format(), onto, config.threshold);
            out.warnings.extend(warnings);
            if let Some(r) = result {
                cache.insert(r.record_id.as_str(), set.clone());
            }
            set
        };
        for pair in pairs {
            let src = annotations(&pair.source.id, &mut out);
            let fol = annotations(&pair.follow_up.id, &mut out);
            out.verdicts.extend(evaluate_pair(pair, tool.id(), src.as_ref(), fol.as_ref(), &config.namespaces));
        }
    }
    canonical_order(&mut out.verdicts);
    out.warnings.sort();
    out.warnings.dedup();
    write_json(&config.out_dir.join(VERDICTS_FILE), &out.verdicts)?;
    Ok(out)
}

pub fn load_verdicts(out_dir: &Path) -> Result<Vec<MrVerdict>, CampaignError> {
    read_json(&out_dir.join(VERDICTS_FILE))
}

pub fn report_metadata(config: &CampaignConfig, onto: &Ontology, timestamp: &str) -> ReportMetadata {
    ReportMetadata {
        ontology_checksum: onto.checksum().to_string(),
        ontology_version: onto.data_version().map(str::to_string),
        threshold: config.threshold,
        namespaces: config.namespaces.clone(),
        timestamp: timestamp.to_string(),
        tools: config.tool_ids(),
        ..ReportMetadata::default()
    }
}

/// Aggregates verdicts and writes `report.{json,csv,md}`.
pub fn report(
    config: &CampaignConfig,
    pairs: &[TestCasePair],
    verdicts: &[MrVerdict],
    metadata: ReportMetadata,
    anonymized: bool,
) -> Result<TestReport, CampaignError> {
    let mut report = aggregate_with(verdicts, pairs, metadata)?;
    if anonymized {
        report = anonymize(&report);
    }
    write_file(&config.out_dir.join(REPORT_JSON), &to_json(&report))?;
    write_file(&config.out_dir.join(REPORT_CSV), &to_csv(&report))?;
    write_file(&config.out_dir.join(REPORT_MD), &to_markdown(&report))?;
    Ok(report)
}
