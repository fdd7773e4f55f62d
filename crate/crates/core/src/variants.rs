//! Documented sequence variants and follow-up test case generation.
//!
//! A variant is either a single-residue substitution or a full isoform
//! sequence. Applying one to its canonical record yields the follow-up test
//! case; the canonical record itself is the source test case.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sequence::{parse_fasta, AminoAcidSequence, ProteinRecord, SequenceError};

/// Separator between canonical id and variant id in follow-up record ids.
pub const FOLLOW_UP_SEPARATOR: char = '|';

#[derive(Debug, Error)]
pub enum VariantError {
    #[error("variant {variant_id} targets {expected} but was applied to {found}")]
    ProteinMismatch { variant_id: String, expected: String, found: String },
    #[error("variant {variant_id}: position {position} is outside 1..={length}")]
    PositionOutOfRange { variant_id: String, position: usize, length: usize },
    #[error("variant {variant_id}: reference mismatch at position {position}, expected '{expected}' but found '{found}'")]
    ReferenceMismatch { variant_id: String, position: usize, expected: char, found: char },
    #[error("variant {0}: substitution must change the residue")]
    NoOpSubstitution(String),
    #[error("variant {0}: residue codes are not valid amino acids")]
    InvalidResidue(String),
    #[error("variant {0}: follow-up sequence is identical to the canonical")]
    UnchangedSequence(String),
    #[error("variant {0}: position must be >= 1")]
    ZeroPosition(String),
    #[error("specs reference unknown proteins: {}", .0.join(", "))]
    OrphanSpecs(Vec<String>),
    #[error("canonical id {0} appears more than once")]
    DuplicateCanonical(String),
    #[error("variant budget {budget} is smaller than the number of proteins ({proteins})")]
    BudgetTooSmall { budget: usize, proteins: usize },
    #[error("protein {0} has zero length")]
    ZeroLength(String),
    #[error("segment count {count} exceeds sequence length {length}")]
    TooManySegments { count: usize, length: usize },
    #[error("segment count must be positive")]
    ZeroSegments,
    #[error("candidate {0} is not a point substitution of this canonical")]
    InvalidCandidate(String),
    #[error("variant table line {line}: {message}")]
    Table { line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Sequence(#[from] SequenceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantCategory {
    Disease,
    Natural,
    Splice,
}

impl VariantCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Disease => "disease",
            Self::Natural => "natural",
            Self::Splice => "splice",
        }
    }
}

impl fmt::Display for VariantCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VariantCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "disease" => Ok(Self::Disease),
            "natural" => Ok(Self::Natural),
            "splice" => Ok(Self::Splice),
            other => Err(format!("unknown variant category {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum VariantKind {
    PointSubstitution { position: usize, ref_residue: char, alt_residue: char },
    FullSequence { isoform_id: String, sequence: AminoAcidSequence },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub variant_id: String,
    pub protein_id: String,
    pub kind: VariantKind,
    pub category: VariantCategory,
    pub publication_count: u32,
}

impl VariantSpec {
    pub fn point(
        variant_id: impl Into<String>,
        protein_id: impl Into<String>,
        position: usize,
        ref_residue: char,
        alt_residue: char,
        category: VariantCategory,
        publication_count: u32,
    ) -> Result<Self, VariantError> {
        let spec = Self {
            variant_id: variant_id.into(),
            protein_id: protein_id.into(),
            kind: VariantKind::PointSubstitution {
                position,
                ref_residue: ref_residue.to_ascii_uppercase(),
                alt_residue: alt_residue.to_ascii_uppercase(),
            },
            category,
            publication_count,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn isoform(
        variant_id: impl Into<String>,
        protein_id: impl Into<String>,
        isoform_id: impl Into<String>,
        sequence: AminoAcidSequence,
        publication_count: u32,
    ) -> Self {
        Self {
            variant_id: variant_id.into(),
            protein_id: protein_id.into(),
            kind: VariantKind::FullSequence { isoform_id: isoform_id.into(), sequence },
            category: VariantCategory::Splice,
            publication_count,
        }
    }

    pub fn validate(&self) -> Result<(), VariantError> {
        if let VariantKind::PointSubstitution { position, ref_residue, alt_residue } = self.kind {
            if position == 0 {
                return Err(VariantError::ZeroPosition(self.variant_id.clone()));
            }
            let valid = |c: char| c.is_ascii() && crate::sequence::Alphabet::Extended.accepts(c as u8);
            if !valid(ref_residue) || !valid(alt_residue) {
                return Err(VariantError::InvalidResidue(self.variant_id.clone()));
            }
            if ref_residue.eq_ignore_ascii_case(&alt_residue) {
                return Err(VariantError::NoOpSubstitution(self.variant_id.clone()));
            }
        }
        Ok(())
    }

    /// 1-based position for point substitutions.
    pub fn position(&self) -> Option<usize> {
        match self.kind {
            VariantKind::PointSubstitution { position, .. } => Some(position),
            VariantKind::FullSequence { .. } => None,
        }
    }

    /// Short change notation, e.g. `G47D` or `isoform O00206-2`.
    pub fn change_label(&self) -> String {
        match &self.kind {
            VariantKind::PointSubstitution { position, ref_residue, alt_residue } => {
                format!("{ref_residue}{position}{alt_residue}")
            }
            VariantKind::FullSequence { isoform_id, .. } => format!("isoform {isoform_id}"),
        }
    }

    /// The substitution that undoes this one. `None` for isoforms.
    pub fn inverse(&self) -> Option<Self> {
        match self.kind {
            VariantKind::PointSubstitution { position, ref_residue, alt_residue } => Some(Self {
                variant_id: format!("{}-inverse", self.variant_id),
                kind: VariantKind::PointSubstitution {
                    position,
                    ref_residue: alt_residue,
                    alt_residue: ref_residue,
                },
                ..self.clone()
            }),
            VariantKind::FullSequence { .. } => None,
        }
    }
}

/// Follow-up record id for a canonical/variant combination.
pub fn follow_up_id(canonical_id: &str, variant_id: &str) -> String {
    format!("{canonical_id}{FOLLOW_UP_SEPARATOR}{variant_id}")
}

/// Canonical id encoded in a record id: the part before the separator, or
/// the whole id for source records.
pub fn canonical_id_of(record_id: &str) -> &str {
    record_id
        .split_once(FOLLOW_UP_SEPARATOR)
        .map_or(record_id, |(canonical, _)| canonical)
}

/// A source/follow-up pair of test cases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCasePair {
    pub source: ProteinRecord,
    pub follow_up: ProteinRecord,
    pub variant: VariantSpec,
}

impl TestCasePair {
    /// Pairs are identified by their follow-up record id.
    pub fn pair_id(&self) -> &str {
        &self.follow_up.id
    }

    pub fn protein_id(&self) -> &str {
        &self.source.id
    }
}

/// Applies `spec` to `canonical`, producing the follow-up record.
pub fn apply_variant(canonical: &ProteinRecord, spec: &VariantSpec) -> Result<ProteinRecord, VariantError> {
    if spec.protein_id != canonical.id {
        return Err(VariantError::ProteinMismatch {
            variant_id: spec.variant_id.clone(),
            expected: spec.protein_id.clone(),
            found: canonical.id.clone(),
        });
    }
    spec.validate()?;

    let sequence = match &spec.kind {
        VariantKind::PointSubstitution { position, ref_residue, alt_residue } => {
            let length = canonical.sequence.len();
            let found = canonical.sequence.residue_at(*position).ok_or_else(|| {
                VariantError::PositionOutOfRange {
                    variant_id: spec.variant_id.clone(),
                    position: *position,
                    length,
                }
            })?;
            if !found.eq_ignore_ascii_case(ref_residue) {
                return Err(VariantError::ReferenceMismatch {
                    variant_id: spec.variant_id.clone(),
                    position: *position,
                    expected: *ref_residue,
                    found,
                });
            }
            canonical.sequence.with_residue(*position, *alt_residue as u8)
        }
        VariantKind::FullSequence { sequence, .. } => {
            if *sequence == canonical.sequence {
                return Err(VariantError::UnchangedSequence(spec.variant_id.clone()));
            }
            sequence.clone()
        }
    };

    Ok(ProteinRecord {
        id: follow_up_id(&canonical.id, &spec.variant_id),
        description: format!(
            "{} {} variant of {} ({})",
            spec.variant_id,
            spec.category,
            canonical.id,
            spec.change_label()
        ),
        sequence,
    })
}

/// Builds one source/follow-up pair per spec, ordered by (protein_id, variant_id).
pub fn generate_pairs(canonicals: &[ProteinRecord], specs: &[VariantSpec]) -> Result<Vec<TestCasePair>, VariantError> {
    let mut by_id: HashMap<&str, &ProteinRecord> = HashMap::new();
    for c in canonicals {
        if by_id.insert(c.id.as_str(), c).is_some() {
            return Err(VariantError::DuplicateCanonical(c.id.clone()));
        }
    }

    let orphans: Vec<String> = specs
        .iter()
        .filter(|s| !by_id.contains_key(s.protein_id.as_str()))
        .map(|s| format!("{} ({})", s.variant_id, s.protein_id))
        .collect();
    if !orphans.is_empty() {
        return Err(VariantError::OrphanSpecs(orphans));
    }

    let mut ordered: Vec<&VariantSpec> = specs.iter().collect();
    ordered.sort_by(|a, b| (&a.protein_id, &a.variant_id).cmp(&(&b.protein_id, &b.variant_id)));

    ordered
        .into_iter()
        .map(|spec| {
            let source = by_id[spec.protein_id.as_str()];
            Ok(TestCasePair {
                source: source.clone(),
                follow_up: apply_variant(source, spec)?,
                variant: spec.clone(),
            })
        })
        .collect()
}

/// Splits a variant budget across proteins in proportion to sequence length.
///
/// Every protein first receives one variant; the remaining budget is
/// apportioned by largest remainder over lengths, with equal remainders going
/// to the lexicographically smaller id.
pub fn allocate_variant_counts(
    proteins: &[(String, usize)],
    total_budget: usize,
) -> Result<BTreeMap<String, usize>, VariantError> {
    if total_budget < proteins.len() {
        return Err(VariantError::BudgetTooSmall { budget: total_budget, proteins: proteins.len() });
    }
    if let Some((id, _)) = proteins.iter().find(|(_, len)| *len == 0) {
        return Err(VariantError::ZeroLength(id.clone()));
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    if proteins.is_empty() {
        return Ok(counts);
    }

    let total_length: u128 = proteins.iter().map(|(_, l)| *l as u128).sum();
    let spare = (total_budget - proteins.len()) as u128;

    // quota_i = spare * len_i / total_length, kept as exact (floor, remainder numerator)
    let mut remainders: Vec<(u128, &str)> = Vec::with_capacity(proteins.len());
    let mut assigned = 0u128;
    for (id, len) in proteins {
        let numer = spare * *len as u128;
        let floor = numer / total_length;
        assigned += floor;
        *counts.entry(id.clone()).or_insert(0) += 1 + floor as usize;
        remainders.push((numer % total_length, id.as_str()));
    }

    remainders.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    for (_, id) in remainders.iter().take((spare - assigned) as usize) {
        *counts.get_mut(*id).expect("present") += 1;
    }
    Ok(counts)
}

/// Inclusive 1-based bounds of `count` near-equal contiguous segments over
/// `length` residues; the first `length % count` segments are one longer.
pub fn segment_bounds(length: usize, count: usize) -> Result<Vec<(usize, usize)>, VariantError> {
    if count == 0 {
        return Err(VariantError::ZeroSegments);
    }
    if count > length {
        return Err(VariantError::TooManySegments { count, length });
    }
    let base = length / count;
    let extra = length % count;
    let mut start = 1;
    Ok((0..count)
        .map(|i| {
            let size = base + usize::from(i < extra);
            let seg = (start, start + size - 1);
            start += size;
            seg
        })
        .collect())
}

/// Picks, from each of `count` equal segments of the canonical sequence, the
/// candidate with the most publications. Ties go to the lowest position, then
/// the smallest variant id. Empty segments contribute nothing.
pub fn select_variants(
    canonical: &ProteinRecord,
    candidates: &[VariantSpec],
    count: usize,
) -> Result<Vec<VariantSpec>, VariantError> {
    let length = canonical.sequence.len();
    let segments = segment_bounds(length, count)?;

    let mut best: Vec<Option<&VariantSpec>> = vec![None; segments.len()];
    for cand in candidates {
        let position = match cand.kind {
            VariantKind::PointSubstitution { position, .. } if cand.protein_id == canonical.id => position,
            _ => return Err(VariantError::InvalidCandidate(cand.variant_id.clone())),
        };
        if position == 0 || position > length {
            return Err(VariantError::PositionOutOfRange {
                variant_id: cand.variant_id.clone(),
                position,
                length,
            });
        }
        let seg = segments.partition_point(|&(_, end)| end < position);
        let slot = &mut best[seg];
        let better = match slot {
            None => true,
            Some(cur) => {
                let key = |s: &VariantSpec| (std::cmp::Reverse(s.publication_count), s.position(), s.variant_id.clone());
                key(cand) < key(cur)
            }
        };
        if better {
            *slot = Some(cand);
        }
    }

    Ok(best.into_iter().flatten().cloned().collect())
}

/// Parses the variant table (TSV with a header row). Isoform FASTA paths are
/// resolved against `base_dir`.
pub fn parse_variant_table(text: &str, base_dir: &Path) -> Result<Vec<VariantSpec>, VariantError> {
    const COLUMNS: [&str; 9] = [
        "variant_id",
        "protein_id",
        "kind",
        "position",
        "ref",
        "alt",
        "category",
        "publication_count",
        "isoform_fasta_path",
    ];

    let mut specs = Vec::new();
    let mut saw_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let table_err = |message: String| VariantError::Table { line, message };
        let mut fields: Vec<&str> = raw.split('\t').map(str::trim).collect();
        if !saw_header {
            if fields != COLUMNS {
                return Err(table_err(format!("expected header {:?}", COLUMNS.join("\t"))));
            }
            saw_header = true;
            continue;
        }
        // trailing blank columns may be trimmed by editors
        while fields.len() < COLUMNS.len() {
            fields.push("");
        }
        if fields.len() > COLUMNS.len() {
            return Err(table_err(format!("expected {} columns, found {}", COLUMNS.len(), fields.len())));
        }
        let [variant_id, protein_id, kind, position, ref_res, alt_res, category, pubs, iso_path] =
            <[&str; 9]>::try_from(fields).expect("length checked");

        if variant_id.is_empty() || protein_id.is_empty() {
            return Err(table_err("variant_id and protein_id are required".into()));
        }
        let category: VariantCategory = category.parse().map_err(table_err)?;
        let publication_count: u32 = if pubs.is_empty() {
            0
        } else {
            pubs.parse().map_err(|_| table_err(format!("bad publication_count {pubs:?}")))?
        };

        let spec = match kind {
            "point" => {
                let position: usize =
                    position.parse().map_err(|_| table_err(format!("bad position {position:?}")))?;
                let single = |s: &str, col: &str| -> Result<char, VariantError> {
                    let mut chars = s.chars();
                    match (chars.next(), chars.next()) {
                        (Some(c), None) => Ok(c),
                        _ => Err(table_err(format!("{col} must be a single residue, got {s:?}"))),
                    }
                };
                let mut spec = VariantSpec::point(
                    variant_id,
                    protein_id,
                    position,
                    single(ref_res, "ref")?,
                    single(alt_res, "alt")?,
                    category,
                    publication_count,
                )?;
                spec.category = category;
                spec
            }
            "isoform" => {
                if iso_path.is_empty() {
                    return Err(table_err("isoform rows need isoform_fasta_path".into()));
                }
                let path = base_dir.join(iso_path);
                let text = fs::read_to_string(&path).map_err(|source| VariantError::Io { path: path.clone(), source })?;
                let mut records = parse_fasta(&text)?;
                if records.len() != 1 {
                    return Err(table_err(format!("{} must hold exactly one record", path.display())));
                }
                let record = records.remove(0);
                VariantSpec {
                    variant_id: variant_id.to_string(),
                    protein_id: protein_id.to_string(),
                    kind: VariantKind::FullSequence { isoform_id: record.id, sequence: record.sequence },
                    category,
                    publication_count,
                }
            }
            other => return Err(table_err(format!("unknown kind {other:?} (expected point or isoform)"))),
        };
        specs.push(spec);
    }
    Ok(specs)
}

pub fn load_variant_table(path: &Path) -> Result<Vec<VariantSpec>, VariantError> {
    let text = fs::read_to_string(path).map_err(|source| VariantError::Io { path: path.to_path_buf(), source })?;
    parse_variant_table(&text, path.parent().unwrap_or(Path::new(".")))
}
