//! Tool output ingestion: scored GO predictions and per-namespace term sets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ontology::{GoTermId, Namespace, Ontology};

#[derive(Debug, Error)]
pub enum PredictionError {
    #[error("line {line}: malformed GO term id {value:?}")]
    BadTerm { line: usize, value: String },
    #[error("line {line}: score {value:?} is not a number in [0, 1]")]
    BadScore { line: usize, value: String },
    #[error("line {line}: expected `protein_id<TAB>GO_term[<TAB>score]`")]
    BadLine { line: usize },
    #[error("manifest line {line}: expected `record_id<TAB>path`")]
    BadManifestLine { line: usize },
    #[error("manifest line {line}: duplicate record id {record_id}")]
    DuplicateManifestEntry { line: usize, record_id: String },
    #[error("unknown prediction format {0:?}")]
    UnknownFormat(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictionFormat {
    #[default]
    PlainTsv,
    CafaSubmission,
}

impl FromStr for PredictionFormat {
    type Err = PredictionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plain-tsv" | "tsv" => Ok(Self::PlainTsv),
            "cafa-submission" | "cafa" => Ok(Self::CafaSubmission),
            other => Err(PredictionError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub protein_id: String,
    pub term: GoTermId,
    pub score: f64,
}

/// Non-fatal findings while ingesting tool output.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum IngestWarning {
    DuplicatePrediction { protein_id: String, term: GoTermId },
    UnknownTerm { protein_id: String, term: GoTermId },
    ObsoleteTerm { protein_id: String, term: GoTermId },
}

impl fmt::Display for IngestWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DuplicatePrediction { protein_id, term } => {
                write!(f, "{protein_id}: duplicate prediction of {term}, kept the highest score")
            }
            Self::UnknownTerm { protein_id, term } => {
                write!(f, "{protein_id}: {term} is not in the ontology, dropped")
            }
            Self::ObsoleteTerm { protein_id, term } => {
                write!(f, "{protein_id}: {term} is obsolete, dropped")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedPredictions {
    /// Sorted by (protein_id, term); one entry per pair.
    pub predictions: Vec<Prediction>,
    pub warnings: Vec<IngestWarning>,
}

fn is_cafa_keyword(first: &str) -> bool {
    matches!(first, "AUTHOR" | "MODEL" | "KEYWORDS" | "ACCURACY" | "END")
}

/// Parses a prediction file. Duplicate (protein, term) rows keep the maximum score.
pub fn parse_predictions(text: &str, format: PredictionFormat) -> Result<ParsedPredictions, PredictionError> {
    let mut best: BTreeMap<(String, GoTermId), f64> = BTreeMap::new();
    let mut warnings = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = match format {
            PredictionFormat::PlainTsv => raw.split('\t').map(str::trim).collect(),
            PredictionFormat::CafaSubmission => {
                let fields: Vec<&str> = trimmed.split_whitespace().collect();
                if is_cafa_keyword(fields[0]) {
                    continue;
                }
                fields
            }
        };
        let (protein_id, term, score) = match fields.as_slice() {
            [p, t] => (*p, *t, None),
            [p, t, s] => (*p, *t, Some(*s)),
            _ => return Err(PredictionError::BadLine { line }),
        };
        if protein_id.is_empty() {
            return Err(PredictionError::BadLine { line });
        }
        let term: GoTermId = term
            .parse()
            .map_err(|_| PredictionError::BadTerm { line, value: term.to_string() })?;
        let score = match score {
            None => 1.0,
            Some(s) => s
                .parse::<f64>()
                .ok()
                .filter(|v| (0.0..=1.0).contains(v))
                .ok_or_else(|| PredictionError::BadScore { line, value: s.to_string() })?,
        };

        match best.entry((protein_id.to_string(), term)) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(score);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                warnings.push(IngestWarning::DuplicatePrediction { protein_id: protein_id.to_string(), term });
                if score > *o.get() {
                    o.insert(score);
                }
            }
        }
    }

    warnings.sort();
    warnings.dedup();
    Ok(ParsedPredictions {
        predictions: best
            .into_iter()
            .map(|((protein_id, term), score)| Prediction { protein_id, term, score })
            .collect(),
        warnings,
    })
}

pub fn load_predictions(path: &Path, format: PredictionFormat) -> Result<ParsedPredictions, PredictionError> {
    let text = fs::read_to_string(path).map_err(|source| PredictionError::Io { path: path.to_path_buf(), source })?;
    parse_predictions(&text, format)
}

/// Writes predictions as PlainTSV, sorted by (protein, term).
pub fn write_predictions(preds: &[Prediction]) -> String {
    let mut sorted: Vec<&Prediction> = preds.iter().collect();
    sorted.sort_by(|a, b| (&a.protein_id, a.term).cmp(&(&b.protein_id, b.term)));
    let mut out = String::new();
    for p in sorted {
        out.push_str(&format!("{}\t{}\t{}\n", p.protein_id, p.term, p.score));
    }
    out
}

/// A tool's retained GO terms for one protein, split by namespace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub protein_id: String,
    pub terms_by_namespace: BTreeMap<Namespace, BTreeSet<GoTermId>>,
}

impl AnnotationSet {
    pub fn empty(protein_id: impl Into<String>) -> Self {
        Self {
            protein_id: protein_id.into(),
            terms_by_namespace: Namespace::ALL.iter().map(|&ns| (ns, BTreeSet::new())).collect(),
        }
    }

    pub fn terms(&self, ns: Namespace) -> &BTreeSet<GoTermId> {
        static EMPTY: BTreeSet<GoTermId> = BTreeSet::new();
        self.terms_by_namespace.get(&ns).unwrap_or(&EMPTY)
    }

    pub fn all_terms(&self) -> BTreeSet<GoTermId> {
        self.terms_by_namespace.values().flatten().copied().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.terms_by_namespace.values().all(BTreeSet::is_empty)
    }

    /// Files a known term under its namespace.
    pub fn insert(&mut self, ns: Namespace, term: GoTermId) {
        self.terms_by_namespace.entry(ns).or_default().insert(term);
    }
}

/// Keeps the predictions for `protein_id` scoring at least `threshold`,
/// resolves alt ids, and files each term under its namespace. Unknown and
/// obsolete terms are dropped with a warning.
pub fn to_annotation_set(
    preds: &[Prediction],
    onto: &Ontology,
    protein_id: &str,
    threshold: f64,
) -> (AnnotationSet, Vec<IngestWarning>) {
    let mut set = AnnotationSet::empty(protein_id);
    let mut warnings = Vec::new();
    for p in preds.iter().filter(|p| p.protein_id == protein_id && p.score >= threshold) {
        match onto.term(p.term) {
            Err(_) => warnings.push(IngestWarning::UnknownTerm { protein_id: protein_id.to_string(), term: p.term }),
            Ok(t) if t.obsolete => {
                warnings.push(IngestWarning::ObsoleteTerm { protein_id: protein_id.to_string(), term: p.term })
            }
            Ok(t) => set.insert(t.namespace, t.id),
        }
    }
    warnings.sort();
    warnings.dedup();
    (set, warnings)
}

/// Parses a `record_id<TAB>path` manifest; relative paths resolve against `base_dir`.
pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<BTreeMap<String, PathBuf>, PredictionError> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let Some((record_id, path)) = raw.split_once('\t') else {
            return Err(PredictionError::BadManifestLine { line });
        };
        let (record_id, path) = (record_id.trim(), path.trim());
        if record_id.is_empty() || path.is_empty() || path.contains('\t') {
            return Err(PredictionError::BadManifestLine { line });
        }
        if out.insert(record_id.to_string(), base_dir.join(path)).is_some() {
            return Err(PredictionError::DuplicateManifestEntry { line, record_id: record_id.to_string() });
        }
    }
    Ok(out)
}

pub fn load_manifest(path: &Path) -> Result<BTreeMap<String, PathBuf>, PredictionError> {
    let text = fs::read_to_string(path).map_err(|source| PredictionError::Io { path: path.to_path_buf(), source })?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new(".")))
}
