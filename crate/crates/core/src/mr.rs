//! Metamorphic relation checks over source/follow-up GO term sets.
//!
//! The shipped relation ("mr-variant-change") requires the predicted term set
//! to change between a canonical protein and a documented variant. Terms are
//! compared by identity only: an ancestor or descendant of a term is a
//! different term.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ontology::{GoTermId, Namespace, Ontology};
use crate::predictions::AnnotationSet;
use crate::variants::TestCasePair;

/// Name under which the variant-change relation is registered.
pub const VARIANT_CHANGE_MR: &str = "mr-variant-change";

pub const REASON_MISSING_OUTPUT: &str = "missing-output";
pub const REASON_EMPTY_BOTH: &str = "empty-both";

/// Namespaces evaluated unless configured otherwise.
pub const DEFAULT_NAMESPACES: [Namespace; 2] = [Namespace::MolecularFunction, Namespace::BiologicalProcess];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChangeOutcome {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "reason", rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive(String),
}

impl Outcome {
    pub fn inconclusive(reason: impl Into<String>) -> Self {
        let reason = reason.into();
        assert!(!reason.is_empty(), "inconclusive outcomes need a reason");
        Outcome::Inconclusive(reason)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::Inconclusive(_) => "inconclusive",
        }
    }

    pub fn reason(&self) -> Option<&str> {
        match self {
            Outcome::Inconclusive(r) => Some(r),
            _ => None,
        }
    }
}

impl From<ChangeOutcome> for Outcome {
    fn from(value: ChangeOutcome) -> Self {
        match value {
            ChangeOutcome::Pass => Outcome::Pass,
            ChangeOutcome::Fail => Outcome::Fail,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Inconclusive(r) => write!(f, "inconclusive ({r})"),
            other => f.write_str(other.label()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MrVerdict {
    pub pair_id: String,
    pub tool_id: String,
    pub namespace: Namespace,
    #[serde(flatten)]
    pub outcome: Outcome,
}

impl MrVerdict {
    pub fn key(&self) -> (&str, &str, Namespace) {
        (&self.pair_id, &self.tool_id, self.namespace)
    }
}

/// Sorts verdicts by (pair_id, tool_id, namespace).
pub fn canonical_order(verdicts: &mut [MrVerdict]) {
    verdicts.sort_by(|a, b| a.key().cmp(&b.key()));
}

/// Pass iff the two term sets differ as sets.
pub fn check_mr_change(source_terms: &BTreeSet<GoTermId>, follow_up_terms: &BTreeSet<GoTermId>) -> ChangeOutcome {
    if source_terms == follow_up_terms {
        ChangeOutcome::Fail
    } else {
        ChangeOutcome::Pass
    }
}

/// A relation between source and follow-up term sets of one namespace.
pub trait MetamorphicRelation: Send + Sync {
    fn name(&self) -> &str;
    fn check(&self, source: &BTreeSet<GoTermId>, follow_up: &BTreeSet<GoTermId>) -> ChangeOutcome;
}

pub struct VariantChange;

impl MetamorphicRelation for VariantChange {
    fn name(&self) -> &str {
        VARIANT_CHANGE_MR
    }

    fn check(&self, source: &BTreeSet<GoTermId>, follow_up: &BTreeSet<GoTermId>) -> ChangeOutcome {
        check_mr_change(source, follow_up)
    }
}

/// Relations by name.
pub struct RelationRegistry {
    relations: BTreeMap<String, Box<dyn MetamorphicRelation>>,
}

impl Default for RelationRegistry {
    fn default() -> Self {
        let mut reg = Self { relations: BTreeMap::new() };
        reg.register(Box::new(VariantChange));
        reg
    }
}

impl RelationRegistry {
    pub fn empty() -> Self {
        Self { relations: BTreeMap::new() }
    }

    /// Registers a relation, replacing any previous one with the same name.
    pub fn register(&mut self, relation: Box<dyn MetamorphicRelation>) {
        self.relations.insert(relation.name().to_string(), relation);
    }

    pub fn get(&self, name: &str) -> Option<&dyn MetamorphicRelation> {
        self.relations.get(name).map(Box::as_ref)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.relations.keys().map(String::as_str)
    }
}

/// Evaluates one pair for one tool with the variant-change relation.
///
/// `None` for either side means the tool produced no usable output for that
/// record, which makes every namespace inconclusive.
pub fn evaluate_pair(
    pair: &TestCasePair,
    tool_id: &str,
    source_annotations: Option<&AnnotationSet>,
    follow_up_annotations: Option<&AnnotationSet>,
    namespaces: &[Namespace],
) -> Vec<MrVerdict> {
    evaluate_pair_with(&VariantChange, pair, tool_id, source_annotations, follow_up_annotations, namespaces)
}

pub fn evaluate_pair_with(
    relation: &dyn MetamorphicRelation,
    pair: &TestCasePair,
    tool_id: &str,
    source_annotations: Option<&AnnotationSet>,
    follow_up_annotations: Option<&AnnotationSet>,
    namespaces: &[Namespace],
) -> Vec<MrVerdict> {
    let mut namespaces = namespaces.to_vec();
    namespaces.sort();
    namespaces.dedup();
    namespaces
        .into_iter()
        .map(|namespace| {
            let outcome = match (source_annotations, follow_up_annotations) {
                (Some(src), Some(fol)) => {
                    let (s, f) = (src.terms(namespace), fol.terms(namespace));
                    if s.is_empty() && f.is_empty() {
                        Outcome::inconclusive(REASON_EMPTY_BOTH)
                    } else {
                        relation.check(s, f).into()
                    }
                }
                _ => Outcome::inconclusive(REASON_MISSING_OUTPUT),
            };
            MrVerdict {
                pair_id: pair.pair_id().to_string(),
                tool_id: tool_id.to_string(),
                namespace,
                outcome,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HierarchyRelation {
    /// The added term is a descendant of the removed one.
    AddedIsDescendant,
    /// The added term is an ancestor of the removed one.
    AddedIsAncestor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchyNote {
    pub removed: GoTermId,
    pub added: GoTermId,
    pub relation: HierarchyRelation,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Difference {
    pub added: BTreeSet<GoTermId>,
    pub removed: BTreeSet<GoTermId>,
    pub hierarchical_note: Vec<HierarchyNote>,
    /// Terms missing from the ontology, left out of the note.
    pub unknown_terms: BTreeSet<GoTermId>,
}

/// Added/removed terms plus, for inspection only, the pairs of removed and
/// added terms that are related through ancestry. Never affects verdicts.
pub fn diagnostic_difference(
    source_terms: &BTreeSet<GoTermId>,
    follow_up_terms: &BTreeSet<GoTermId>,
    onto: &Ontology,
) -> Difference {
    let added: BTreeSet<GoTermId> = follow_up_terms.difference(source_terms).copied().collect();
    let removed: BTreeSet<GoTermId> = source_terms.difference(follow_up_terms).copied().collect();
    let mut unknown_terms = BTreeSet::new();
    let mut ancestors = BTreeMap::new();
    for &t in added.iter().chain(&removed) {
        match onto.ancestors(t) {
            Ok(a) => {
                ancestors.insert(t, a);
            }
            Err(_) => {
                unknown_terms.insert(t);
            }
        }
    }
    let resolve = |t: GoTermId| onto.resolve(t).unwrap_or(t);

    let mut notes = Vec::new();
    for &r in &removed {
        let Some(r_anc) = ancestors.get(&r) else { continue };
        for &a in &added {
            let Some(a_anc) = ancestors.get(&a) else { continue };
            if a_anc.contains(&resolve(r)) {
                notes.push(HierarchyNote { removed: r, added: a, relation: HierarchyRelation::AddedIsDescendant });
            } else if r_anc.contains(&resolve(a)) {
                notes.push(HierarchyNote { removed: r, added: a, relation: HierarchyRelation::AddedIsAncestor });
            }
        }
    }
    Difference { added, removed, hierarchical_note: notes, unknown_terms }
}
