//! Deterministic mock predictors that exercise the whole pipeline.
//!
//! * `VariantBlind` returns the canonical protein's base annotations no matter
//!   what sequence it is given, so every pair fails.
//! * `VariantAware` adds, per namespace, one synthetic term derived from a
//!   hash of the sequence, so any sequence change changes the term set.
//! * `AncestorShift` swaps each base term for its nearest ancestor whenever
//!   the sequence differs from the canonical one.
//! * `Empty` predicts nothing.
//!
//! Synthetic terms live in a reserved id block that no GO release uses; see
//! [`synthetic_overlay`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ontology::{GoTermId, Namespace, Ontology, Relation, Term};
use crate::predictions::{to_annotation_set, AnnotationSet, IngestWarning, Prediction, PredictionFormat};
use crate::runner::{AdapterMode, ToolAdapter, INPUT_PLACEHOLDER, OUTPUT_PLACEHOLDER};
use crate::sequence::{AminoAcidSequence, ProteinRecord};
use crate::variants::canonical_id_of;

/// Synthetic ids per namespace: `GO:0999000..=GO:0999999` for MF and so on.
pub const SYNTHETIC_BLOCK_SIZE: u32 = 1000;

fn synthetic_base(ns: Namespace) -> u32 {
    match ns {
        Namespace::MolecularFunction => 999_000,
        Namespace::BiologicalProcess => 998_000,
        Namespace::CellularComponent => 997_000,
    }
}

pub fn is_synthetic(term: GoTermId) -> bool {
    (997_000..1_000_000).contains(&term.number())
}

#[derive(Debug, Error)]
pub enum MockError {
    #[error("unknown mock behavior {0:?}")]
    UnknownBehavior(String),
    #[error("no base annotations for canonical id {0}")]
    UnknownCanonical(String),
    #[error("{0:?} mock needs base annotations")]
    MissingBase(MockBehavior),
    #[error("ancestor-shift mock needs the canonical sequence of {0}")]
    MissingCanonical(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MockBehavior {
    VariantBlind,
    VariantAware,
    AncestorShift,
    Empty,
}

impl MockBehavior {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::VariantBlind => "variant-blind",
            Self::VariantAware => "variant-aware",
            Self::AncestorShift => "ancestor-shift",
            Self::Empty => "empty",
        }
    }
}

impl fmt::Display for MockBehavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MockBehavior {
    type Err = MockError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "variant-blind" => Ok(Self::VariantBlind),
            "variant-aware" => Ok(Self::VariantAware),
            "ancestor-shift" => Ok(Self::AncestorShift),
            "empty" => Ok(Self::Empty),
            other => Err(MockError::UnknownBehavior(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockSpec {
    pub behavior: MockBehavior,
    pub base_annotations: BTreeMap<String, AnnotationSet>,
    pub seed: u64,
    /// Canonical sequences, consulted by `AncestorShift`.
    pub canonical_sequences: BTreeMap<String, AminoAcidSequence>,
    /// Replacement term for each base term, consulted by `AncestorShift`.
    pub nearest_ancestor: BTreeMap<GoTermId, GoTermId>,
}

impl MockSpec {
    pub fn new(behavior: MockBehavior, base_annotations: BTreeMap<String, AnnotationSet>, seed: u64) -> Self {
        Self {
            behavior,
            base_annotations,
            seed,
            canonical_sequences: BTreeMap::new(),
            nearest_ancestor: BTreeMap::new(),
        }
    }

    /// Builds a spec from base predictions (one protein id per canonical),
    /// filing terms by namespace and precomputing nearest ancestors.
    pub fn from_predictions(
        behavior: MockBehavior,
        base: &[Prediction],
        onto: &Ontology,
        canonicals: &[ProteinRecord],
        seed: u64,
    ) -> Result<(Self, Vec<IngestWarning>), MockError> {
        let ids: BTreeSet<&str> = base.iter().map(|p| p.protein_id.as_str()).collect();
        let mut warnings = Vec::new();
        let mut base_annotations = BTreeMap::new();
        for id in ids {
            let (set, w) = to_annotation_set(base, onto, id, 0.0);
            warnings.extend(w);
            base_annotations.insert(id.to_string(), set);
        }
        let mut spec = Self::new(behavior, base_annotations, seed);
        spec.canonical_sequences = canonicals.iter().map(|r| (r.id.clone(), r.sequence.clone())).collect();
        if behavior == MockBehavior::AncestorShift {
            for term in spec.base_annotations.values().flat_map(AnnotationSet::all_terms) {
                spec.nearest_ancestor.insert(term, nearest_ancestor(onto, term));
            }
        }
        spec.validate()?;
        Ok((spec, warnings))
    }

    pub fn validate(&self) -> Result<(), MockError> {
        if self.behavior != MockBehavior::Empty && self.base_annotations.is_empty() {
            return Err(MockError::MissingBase(self.behavior));
        }
        Ok(())
    }
}

/// The is_a parent with the smallest id, else the smallest part_of parent,
/// else the term itself (roots have nowhere to go).
pub fn nearest_ancestor(onto: &Ontology, term: GoTermId) -> GoTermId {
    let Ok(parents) = onto.parents(term) else { return term };
    let smallest = |rel: Relation| parents.iter().filter(|(_, r)| *r == rel).map(|(p, _)| *p).min();
    smallest(Relation::IsA).or_else(|| smallest(Relation::PartOf)).unwrap_or(term)
}

/// Synthetic term for a sequence in one namespace.
pub fn hash_term(seed: u64, namespace: Namespace, sequence: &AminoAcidSequence) -> GoTermId {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(namespace.as_str().as_bytes());
    h.update(sequence.as_str().as_bytes());
    let digest = h.finalize();
    let n = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
    GoTermId::new(synthetic_base(namespace) + (n % u64::from(SYNTHETIC_BLOCK_SIZE)) as u32).expect("in range")
}

pub fn mock_predict(spec: &MockSpec, record: &ProteinRecord) -> Result<Vec<Prediction>, MockError> {
    if spec.behavior == MockBehavior::Empty {
        return Ok(Vec::new());
    }
    let canonical = canonical_id_of(&record.id);
    let base = spec
        .base_annotations
        .get(canonical)
        .ok_or_else(|| MockError::UnknownCanonical(canonical.to_string()))?;

    let mut terms: BTreeSet<GoTermId> = base.all_terms();
    match spec.behavior {
        MockBehavior::VariantBlind | MockBehavior::Empty => {}
        MockBehavior::VariantAware => {
            terms.extend(Namespace::ALL.iter().map(|&ns| hash_term(spec.seed, ns, &record.sequence)));
        }
        MockBehavior::AncestorShift => {
            let reference = spec
                .canonical_sequences
                .get(canonical)
                .ok_or_else(|| MockError::MissingCanonical(canonical.to_string()))?;
            if *reference != record.sequence {
                terms = terms
                    .into_iter()
                    .map(|t| spec.nearest_ancestor.get(&t).copied().unwrap_or(t))
                    .collect();
            }
        }
    }
    Ok(terms
        .into_iter()
        .map(|term| Prediction { protein_id: record.id.clone(), term, score: 1.0 })
        .collect())
}

/// Pairs of distinct sequences sharing a canonical id that hash to the same
/// synthetic term in some namespace. Must be empty for a usable seed.
pub fn hash_collisions(seed: u64, records: &[ProteinRecord]) -> Vec<(String, String, Namespace)> {
    let mut out = Vec::new();
    for (i, a) in records.iter().enumerate() {
        for b in &records[i + 1..] {
            if canonical_id_of(&a.id) != canonical_id_of(&b.id) || a.sequence == b.sequence {
                continue;
            }
            for ns in Namespace::ALL {
                if hash_term(seed, ns, &a.sequence) == hash_term(seed, ns, &b.sequence) {
                    out.push((a.id.clone(), b.id.clone(), ns));
                }
            }
        }
    }
    out
}

/// Ontology holding the reserved synthetic terms, to be merged into a campaign ontology.
pub fn synthetic_overlay() -> Ontology {
    let terms = Namespace::ALL.into_iter().flat_map(|ns| {
        (0..SYNTHETIC_BLOCK_SIZE).map(move |i| Term {
            id: GoTermId::new(synthetic_base(ns) + i).expect("in range"),
            name: format!("synthetic mock term {i} ({})", ns.short()),
            namespace: ns,
            obsolete: false,
            alt_ids: BTreeSet::new(),
        })
    });
    Ontology::from_parts(terms, []).expect("synthetic ids are unique")
}

/// Files the mock subprocess needs.
#[derive(Debug, Clone)]
pub struct MockLaunch<'a> {
    pub harness_exe: &'a Path,
    pub behavior: MockBehavior,
    pub base: Option<&'a Path>,
    pub ontology: &'a Path,
    pub canonicals: &'a [std::path::PathBuf],
    pub seed: u64,
    pub timeout: Duration,
}

/// A subprocess adapter that re-invokes the harness binary in mock mode.
pub fn mock_as_adapter(tool_id: &str, launch: &MockLaunch<'_>) -> ToolAdapter {
    let path = |p: &Path| p.to_string_lossy().into_owned();
    let mut argv = vec![
        path(launch.harness_exe),
        "mock-predict".to_string(),
        "--behavior".to_string(),
        launch.behavior.as_str().to_string(),
        "--seed".to_string(),
        launch.seed.to_string(),
        "--ontology".to_string(),
        path(launch.ontology),
    ];
    if let Some(base) = launch.base {
        argv.push("--base".into());
        argv.push(path(base));
    }
    for c in launch.canonicals {
        argv.push("--canonical".into());
        argv.push(path(c));
    }
    let mut template = shell_words::join(argv);
    template.push(' ');
    template.push_str(INPUT_PLACEHOLDER);
    template.push(' ');
    template.push_str(OUTPUT_PLACEHOLDER);
    ToolAdapter {
        tool_id: tool_id.to_string(),
        mode: AdapterMode::Subprocess {
            command_template: template,
            timeout: launch.timeout,
            working_dir: std::path::PathBuf::from("."),
        },
        prediction_format: PredictionFormat::PlainTsv,
        env_allowlist: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::parse_obo;
    use crate::variants::{apply_variant, VariantCategory, VariantSpec};

    fn toy() -> Ontology {
        parse_obo(
            "[Term]\nid: GO:0000001\nnamespace: molecular_function\n\
             [Term]\nid: GO:0000002\nnamespace: molecular_function\nis_a: GO:0000001\n\
             [Term]\nid: GO:0000010\nnamespace: biological_process\n\
             [Term]\nid: GO:0000011\nnamespace: biological_process\nrelationship: part_of GO:0000010\n",
        )
        .unwrap()
    }

    fn canonical() -> ProteinRecord {
        ProteinRecord::new("P1", "", AminoAcidSequence::new("ACDGHIKLMN").unwrap()).unwrap()
    }

    fn variant(pos: usize, r: char, a: char) -> ProteinRecord {
        let spec = VariantSpec::point(format!("V{pos}"), "P1", pos, r, a, VariantCategory::Disease, 0).unwrap();
        apply_variant(&canonical(), &spec).unwrap()
    }

    fn spec(behavior: MockBehavior) -> MockSpec {
        let go = |s: &str| s.parse().unwrap();
        let base = vec![
            Prediction { protein_id: "P1".into(), term: go("GO:0000002"), score: 1.0 },
            Prediction { protein_id: "P1".into(), term: go("GO:0000011"), score: 1.0 },
        ];
        MockSpec::from_predictions(behavior, &base, &toy(), &[canonical()], 7).unwrap().0
    }

    fn terms(p: &[Prediction]) -> BTreeSet<GoTermId> {
        p.iter().map(|p| p.term).collect()
    }

    #[test]
    fn blind_ignores_sequence() {
        let s = spec(MockBehavior::VariantBlind);
        let a = mock_predict(&s, &canonical()).unwrap();
        let b = mock_predict(&s, &variant(4, 'G', 'S')).unwrap();
        assert_eq!(terms(&a), terms(&b));
        assert_eq!(a.len(), 2);
    }

    #[test]
    fn aware_differs_in_hash_terms_only() {
        let s = spec(MockBehavior::VariantAware);
        let a = terms(&mock_predict(&s, &canonical()).unwrap());
        let b = terms(&mock_predict(&s, &variant(4, 'G', 'S')).unwrap());
        let diff: BTreeSet<_> = a.symmetric_difference(&b).copied().collect();
        assert!(!diff.is_empty());
        assert!(diff.iter().all(|t| is_synthetic(*t)));
        assert_eq!(a.len(), 5);
    }

    #[test]
    fn shift_moves_to_parents_on_change() {
        let s = spec(MockBehavior::AncestorShift);
        let a = terms(&mock_predict(&s, &canonical()).unwrap());
        let b = terms(&mock_predict(&s, &variant(1, 'A', 'G')).unwrap());
        let go = |s: &str| s.parse::<GoTermId>().unwrap();
        assert_eq!(a, BTreeSet::from([go("GO:0000002"), go("GO:0000011")]));
        assert_eq!(b, BTreeSet::from([go("GO:0000001"), go("GO:0000010")]));
    }

    #[test]
    fn empty_predicts_nothing() {
        let s = MockSpec::new(MockBehavior::Empty, BTreeMap::new(), 0);
        assert!(mock_predict(&s, &canonical()).unwrap().is_empty());
        assert!(mock_predict(&s, &variant(1, 'A', 'G')).unwrap().is_empty());
    }

    #[test]
    fn unknown_canonical() {
        let s = spec(MockBehavior::VariantBlind);
        let other = ProteinRecord::new("Q9|V", "", AminoAcidSequence::new("AC").unwrap()).unwrap();
        assert!(matches!(mock_predict(&s, &other), Err(MockError::UnknownCanonical(id)) if id == "Q9"));
    }

    #[test]
    fn base_required() {
        let s = MockSpec::new(MockBehavior::VariantBlind, BTreeMap::new(), 0);
        assert!(s.validate().is_err());
    }

    #[test]
    fn overlay_is_disjoint_from_real_ids() {
        let overlay = synthetic_overlay();
        assert_eq!(overlay.len(), 3 * SYNTHETIC_BLOCK_SIZE as usize);
        let t = hash_term(1, Namespace::BiologicalProcess, &canonical().sequence);
        assert_eq!(overlay.namespace_of(t).unwrap(), Namespace::BiologicalProcess);
        let mut onto = toy();
        onto.merge(overlay).unwrap();
    }

    #[test]
    fn adapter_template_round_trips() {
        let exe = Path::new("/opt/my tools/afpmt");
        let canon = vec![std::path::PathBuf::from("/data/P1.fasta")];
        let launch = MockLaunch {
            harness_exe: exe,
            behavior: MockBehavior::VariantAware,
            base: Some(Path::new("/data/base.tsv")),
            ontology: Path::new("/data/go.obo"),
            canonicals: &canon,
            seed: 3,
            timeout: Duration::from_secs(5),
        };
        let adapter = mock_as_adapter("aware", &launch);
        adapter.validate().unwrap();
        let AdapterMode::Subprocess { command_template, .. } = &adapter.mode else { panic!() };
        let argv = shell_words::split(command_template).unwrap();
        assert_eq!(argv[0], "/opt/my tools/afpmt");
        assert_eq!(argv[1], "mock-predict");
        assert!(argv.ends_with(&["{input_fasta}".to_string(), "{output_file}".to_string()]));
    }
}
