//! Gene Ontology snapshot: OBO parsing, namespaces and ancestry.
//!
//! Only `is_a` and `relationship: part_of` edges are kept for ancestry, and
//! both are traversed the same way. Other relationship types are counted but
//! otherwise ignored. Obsolete terms stay in the term table (so predictions
//! naming them can be recognised) but are never traversed or returned as
//! ancestors.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("invalid GO term id {0:?}")]
    InvalidId(String),
    #[error("unknown GO term {0}")]
    UnknownTerm(GoTermId),
    #[error("unknown namespace {0:?}")]
    UnknownNamespace(String),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("duplicate term id {0}")]
    DuplicateTerm(GoTermId),
    #[error("alt_id {alt} of {term} collides with another term")]
    AltIdCollision { alt: GoTermId, term: GoTermId },
    #[error("{} dangling edge reference(s): {}", .0.len(), .0.iter().map(|(c, p)| format!("{c} -> {p}")).collect::<Vec<_>>().join(", "))]
    DanglingReferences(Vec<(GoTermId, GoTermId)>),
    #[error("cycle detected: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join(" -> "))]
    Cycle(Vec<GoTermId>),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// A `GO:NNNNNNN` identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct GoTermId(u32);

impl GoTermId {
    pub const MAX: u32 = 9_999_999;

    pub fn new(number: u32) -> Option<Self> {
        (number <= Self::MAX).then_some(Self(number))
    }

    pub fn number(self) -> u32 {
        self.0
    }
}

impl fmt::Display for GoTermId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GO:{:07}", self.0)
    }
}

impl FromStr for GoTermId {
    type Err = OntologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s
            .strip_prefix("GO:")
            .filter(|d| d.len() == 7 && d.bytes().all(|b| b.is_ascii_digit()))
            .ok_or_else(|| OntologyError::InvalidId(s.to_string()))?;
        Ok(Self(digits.parse().expect("seven ascii digits")))
    }
}

impl TryFrom<String> for GoTermId {
    type Error = OntologyError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<GoTermId> for String {
    fn from(value: GoTermId) -> Self {
        value.to_string()
    }
}

/// The three GO sub-ontologies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Namespace {
    MolecularFunction,
    BiologicalProcess,
    CellularComponent,
}

impl Namespace {
    pub const ALL: [Namespace; 3] = [
        Namespace::MolecularFunction,
        Namespace::BiologicalProcess,
        Namespace::CellularComponent,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::MolecularFunction => "molecular_function",
            Self::BiologicalProcess => "biological_process",
            Self::CellularComponent => "cellular_component",
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Self::MolecularFunction => "MF",
            Self::BiologicalProcess => "BP",
            Self::CellularComponent => "CC",
        }
    }
}

impl fmt::Display for Namespace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Namespace {
    type Err = OntologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "molecular_function" | "mf" | "f" => Ok(Self::MolecularFunction),
            "biological_process" | "bp" | "p" => Ok(Self::BiologicalProcess),
            "cellular_component" | "cc" | "c" => Ok(Self::CellularComponent),
            _ => Err(OntologyError::UnknownNamespace(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relation {
    IsA,
    PartOf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    pub id: GoTermId,
    pub name: String,
    pub namespace: Namespace,
    pub obsolete: bool,
    pub alt_ids: BTreeSet<GoTermId>,
}

/// An immutable, validated GO term DAG.
#[derive(Debug, Clone, Default)]
pub struct Ontology {
    terms: HashMap<GoTermId, Term>,
    parents: HashMap<GoTermId, Vec<(GoTermId, Relation)>>,
    alt_index: HashMap<GoTermId, GoTermId>,
    ignored_relationships: usize,
    data_version: Option<String>,
    checksum: String,
}

impl Ontology {
    /// Builds and validates an ontology from terms and `(child, parent, relation)` edges.
    pub fn from_parts(
        terms: impl IntoIterator<Item = Term>,
        edges: impl IntoIterator<Item = (GoTermId, GoTermId, Relation)>,
    ) -> Result<Self, OntologyError> {
        let mut onto = Ontology::default();
        for term in terms {
            onto.insert_term(term)?;
        }
        for (child, parent, rel) in edges {
            onto.parents.entry(child).or_default().push((parent, rel));
        }
        onto.finish()?;
        Ok(onto)
    }

    fn insert_term(&mut self, term: Term) -> Result<(), OntologyError> {
        if self.terms.contains_key(&term.id) || self.alt_index.contains_key(&term.id) {
            return Err(OntologyError::DuplicateTerm(term.id));
        }
        self.terms.insert(term.id, term);
        Ok(())
    }

    /// Indexes alt ids, checks edge endpoints and acyclicity.
    fn finish(&mut self) -> Result<(), OntologyError> {
        self.alt_index.clear();
        for term in self.terms.values() {
            for &alt in &term.alt_ids {
                if self.terms.contains_key(&alt) || self.alt_index.insert(alt, term.id).is_some() {
                    return Err(OntologyError::AltIdCollision { alt, term: term.id });
                }
            }
        }

        let mut dangling = Vec::new();
        for (child, ps) in &mut self.parents {
            ps.sort();
            ps.dedup();
            if !self.terms.contains_key(child) {
                dangling.extend(ps.iter().map(|(p, _)| (*child, *p)));
            }
            dangling.extend(ps.iter().filter(|(p, _)| !self.terms.contains_key(p)).map(|(p, _)| (*child, *p)));
        }
        if !dangling.is_empty() {
            dangling.sort();
            dangling.dedup();
            return Err(OntologyError::DanglingReferences(dangling));
        }

        if let Some(cycle) = self.find_cycle() {
            return Err(OntologyError::Cycle(cycle));
        }
        Ok(())
    }

    fn live_parents(&self, id: GoTermId) -> impl Iterator<Item = (GoTermId, Relation)> + '_ {
        self.parents
            .get(&id)
            .into_iter()
            .flatten()
            .copied()
            .filter(move |(p, _)| !self.terms[p].obsolete)
    }

    /// One cycle among non-obsolete terms, if any (first node repeated at the end).
    fn find_cycle(&self) -> Option<Vec<GoTermId>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Active,
            Done,
        }
        let mut marks: HashMap<GoTermId, Mark> = HashMap::with_capacity(self.terms.len());
        let mut roots: Vec<GoTermId> = self.terms.values().filter(|t| !t.obsolete).map(|t| t.id).collect();
        roots.sort();

        for root in roots {
            if marks.contains_key(&root) {
                continue;
            }
            // explicit stack of (node, remaining parents) to survive deep hierarchies
            let mut path: Vec<GoTermId> = vec![root];
            let mut stack: Vec<std::vec::IntoIter<GoTermId>> =
                vec![self.live_parents(root).map(|(p, _)| p).collect::<Vec<_>>().into_iter()];
            marks.insert(root, Mark::Active);
            while let Some(iter) = stack.last_mut() {
                match iter.next() {
                    Some(next) => match marks.get(&next) {
                        Some(Mark::Active) => {
                            let start = path.iter().position(|&n| n == next).expect("on path");
                            let mut cycle = path[start..].to_vec();
                            cycle.push(next);
                            return Some(cycle);
                        }
                        Some(Mark::Done) => {}
                        None => {
                            marks.insert(next, Mark::Active);
                            path.push(next);
                            stack.push(self.live_parents(next).map(|(p, _)| p).collect::<Vec<_>>().into_iter());
                        }
                    },
                    None => {
                        stack.pop();
                        let done = path.pop().expect("path tracks stack");
                        marks.insert(done, Mark::Done);
                    }
                }
            }
        }
        None
    }

    /// Adds terms from another ontology (e.g. a synthetic overlay). Ids must not collide.
    pub fn merge(&mut self, other: Ontology) -> Result<(), OntologyError> {
        for (id, term) in other.terms {
            if self.terms.contains_key(&id) || self.alt_index.contains_key(&id) {
                return Err(OntologyError::DuplicateTerm(id));
            }
            self.terms.insert(id, term);
        }
        for (child, ps) in other.parents {
            self.parents.entry(child).or_default().extend(ps);
        }
        self.finish()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.parents.values().map(Vec::len).sum()
    }

    /// Relationship lines of types other than part_of, which are not traversed.
    pub fn ignored_relationships(&self) -> usize {
        self.ignored_relationships
    }

    pub fn data_version(&self) -> Option<&str> {
        self.data_version.as_deref()
    }

    /// SHA-256 (hex) of the OBO text this ontology was parsed from.
    pub fn checksum(&self) -> &str {
        &self.checksum
    }

    pub fn terms(&self) -> impl Iterator<Item = &Term> {
        self.terms.values()
    }

    /// Maps an alt id to its primary id; primary ids map to themselves.
    pub fn resolve(&self, id: GoTermId) -> Option<GoTermId> {
        if self.terms.contains_key(&id) {
            Some(id)
        } else {
            self.alt_index.get(&id).copied()
        }
    }

    pub fn term(&self, id: GoTermId) -> Result<&Term, OntologyError> {
        self.resolve(id)
            .and_then(|p| self.terms.get(&p))
            .ok_or(OntologyError::UnknownTerm(id))
    }

    pub fn namespace_of(&self, id: GoTermId) -> Result<Namespace, OntologyError> {
        self.term(id).map(|t| t.namespace)
    }

    pub fn is_obsolete(&self, id: GoTermId) -> Result<bool, OntologyError> {
        self.term(id).map(|t| t.obsolete)
    }

    /// Direct, non-obsolete parents of a term.
    pub fn parents(&self, id: GoTermId) -> Result<Vec<(GoTermId, Relation)>, OntologyError> {
        let primary = self.term(id)?.id;
        Ok(self.live_parents(primary).collect())
    }

    /// All terms reachable through is_a/part_of edges, excluding `id` itself.
    pub fn ancestors(&self, id: GoTermId) -> Result<BTreeSet<GoTermId>, OntologyError> {
        let start = self.term(id)?.id;
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([start]);
        while let Some(node) = queue.pop_front() {
            for (p, _) in self.live_parents(node) {
                if seen.insert(p) {
                    queue.push_back(p);
                }
            }
        }
        seen.remove(&start);
        Ok(seen)
    }

    /// True-path closure: the input (alt ids resolved) plus every ancestor.
    pub fn propagate(&self, terms: &BTreeSet<GoTermId>) -> Result<BTreeSet<GoTermId>, OntologyError> {
        let mut out = BTreeSet::new();
        for &t in terms {
            let primary = self.term(t)?.id;
            if out.insert(primary) {
                out.extend(self.ancestors(primary)?);
            }
        }
        Ok(out)
    }

    pub fn is_ancestor(&self, ancestor: GoTermId, of: GoTermId) -> Result<bool, OntologyError> {
        let a = self.term(ancestor)?.id;
        Ok(self.ancestors(of)?.contains(&a))
    }
}

#[derive(Default)]
struct Stanza {
    line: usize,
    id: Option<GoTermId>,
    name: String,
    namespace: Option<Namespace>,
    obsolete: bool,
    alt_ids: BTreeSet<GoTermId>,
    parents: Vec<(GoTermId, Relation)>,
}

/// Strips trailing `! comment` and `{qualifier}` blocks from a tag value.
fn clean_value(value: &str) -> &str {
    let v = value.split_once(" !").map_or(value, |(v, _)| v);
    let v = v.split_once(" {").map_or(v, |(v, _)| v);
    v.trim()
}

/// Parses the `[Term]` stanzas of an OBO document.
pub fn parse_obo(text: &str) -> Result<Ontology, OntologyError> {
    let mut onto = Ontology {
        checksum: hex::encode(Sha256::digest(text.as_bytes())),
        ..Ontology::default()
    };
    let mut in_header = true;
    let mut current: Option<Stanza> = None;

    let flush = |onto: &mut Ontology, stanza: Option<Stanza>| -> Result<(), OntologyError> {
        let Some(s) = stanza else { return Ok(()) };
        let id = s.id.ok_or_else(|| OntologyError::Syntax { line: s.line, message: "[Term] without id".into() })?;
        let namespace = s.namespace.ok_or_else(|| OntologyError::Syntax {
            line: s.line,
            message: format!("term {id} has no namespace"),
        })?;
        onto.insert_term(Term { id, name: s.name, namespace, obsolete: s.obsolete, alt_ids: s.alt_ids })?;
        if !s.parents.is_empty() {
            onto.parents.entry(id).or_default().extend(s.parents);
        }
        Ok(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.starts_with('[') && line.ends_with(']') {
            in_header = false;
            flush(&mut onto, current.take())?;
            if line == "[Term]" {
                current = Some(Stanza { line: line_no, ..Stanza::default() });
            }
            continue;
        }
        let Some((tag, value)) = line.split_once(':') else { continue };
        let value = value.trim();
        if in_header {
            if tag == "data-version" {
                onto.data_version = Some(value.to_string());
            }
            continue;
        }
        let Some(stanza) = current.as_mut() else { continue };
        let syntax = |message: String| OntologyError::Syntax { line: line_no, message };
        let term_id = |v: &str| -> Result<GoTermId, OntologyError> {
            clean_value(v).parse().map_err(|_| syntax(format!("invalid GO id in {tag}: {v:?}")))
        };
        match tag {
            "id" => stanza.id = Some(term_id(value)?),
            "name" => stanza.name = value.to_string(),
            "namespace" => {
                stanza.namespace = Some(clean_value(value).parse().map_err(|_| syntax(format!("unknown namespace {value:?}")))?)
            }
            "is_obsolete" => stanza.obsolete = clean_value(value) == "true",
            "alt_id" => {
                stanza.alt_ids.insert(term_id(value)?);
            }
            "is_a" => stanza.parents.push((term_id(value)?, Relation::IsA)),
            "relationship" => {
                let value = clean_value(value);
                let (rel, target) = value.split_once(char::is_whitespace).unwrap_or((value, ""));
                if rel == "part_of" {
                    stanza.parents.push((term_id(target)?, Relation::PartOf));
                } else {
                    onto.ignored_relationships += 1;
                }
            }
            _ => {}
        }
    }
    flush(&mut onto, current.take())?;
    onto.finish()?;
    Ok(onto)
}

/// Reads an OBO file, transparently gunzipping `*.gz`.
pub fn load_obo(path: &Path) -> Result<Ontology, OntologyError> {
    let io_err = |source| OntologyError::Io { path: path.to_path_buf(), source };
    let bytes = fs::read(path).map_err(io_err)?;
    let text = if path.extension().is_some_and(|e| e == "gz") {
        let mut s = String::new();
        flate2::read::GzDecoder::new(bytes.as_slice()).read_to_string(&mut s).map_err(io_err)?;
        s
    } else {
        String::from_utf8(bytes)
            .map_err(|e| io_err(std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?
    };
    parse_obo(&text)
}

/// Counts of terms per namespace, handy for snapshot summaries.
pub fn namespace_histogram(onto: &Ontology) -> BTreeMap<Namespace, usize> {
    let mut out = BTreeMap::new();
    for t in onto.terms() {
        *out.entry(t.namespace).or_insert(0) += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(n: u32) -> GoTermId {
        GoTermId::new(n).unwrap()
    }

    const CHAIN: &str = "format-version: 1.2\ndata-version: test\n\n\
        [Term]\nid: GO:0000001\nname: a\nnamespace: biological_process\n\n\
        [Term]\nid: GO:0000002\nname: b\nnamespace: biological_process\nis_a: GO:0000001 ! a\n\n\
        [Term]\nid: GO:0000003\nname: c\nnamespace: biological_process\nalt_id: GO:0000033\nrelationship: part_of GO:0000002 ! b\nrelationship: regulates GO:0000001\n\n\
        [Term]\nid: GO:0000009\nname: old\nnamespace: molecular_function\nis_obsolete: true\n\n\
        [Typedef]\nid: part_of\nname: part of\nis_a: overlaps\n";

    #[test]
    fn id_format() {
        assert_eq!("GO:0050681".parse::<GoTermId>().unwrap().to_string(), "GO:0050681");
        for bad in ["GO:123", "GO:12345678", "go:0000001", "GO:00000a1", "0000001"] {
            assert!(bad.parse::<GoTermId>().is_err(), "{bad}");
        }
    }

    #[test]
    fn two_term_file() {
        let text = "[Term]\nid: GO:0000001\nname: r\nnamespace: molecular_function\n\n\
                    [Term]\nid: GO:0000002\nname: c\nnamespace: molecular_function\nis_a: GO:0000001\n";
        let onto = parse_obo(text).unwrap();
        assert_eq!(onto.len(), 2);
        assert_eq!(onto.edge_count(), 1);
        assert_eq!(onto.parents(id(2)).unwrap(), vec![(id(1), Relation::IsA)]);
    }

    #[test]
    fn chain_ancestry() {
        let onto = parse_obo(CHAIN).unwrap();
        assert_eq!(onto.data_version(), Some("test"));
        assert_eq!(onto.ancestors(id(3)).unwrap(), BTreeSet::from([id(1), id(2)]));
        assert!(onto.ancestors(id(1)).unwrap().is_empty());
        assert_eq!(onto.ancestors(id(33)).unwrap(), onto.ancestors(id(3)).unwrap());
        assert_eq!(onto.ignored_relationships(), 1);
        assert!(onto.is_obsolete(id(9)).unwrap());
        assert_eq!(
            onto.propagate(&BTreeSet::from([id(3)])).unwrap(),
            BTreeSet::from([id(1), id(2), id(3)])
        );
        assert_eq!(onto.propagate(&BTreeSet::from([id(1)])).unwrap(), BTreeSet::from([id(1)]));
        assert_eq!(onto.propagate(&BTreeSet::from([id(33)])).unwrap(), BTreeSet::from([id(3), id(2), id(1)]));
    }

    #[test]
    fn namespaces() {
        let onto = parse_obo(CHAIN).unwrap();
        assert_eq!(onto.namespace_of(id(2)).unwrap(), Namespace::BiologicalProcess);
        assert!(matches!(onto.namespace_of(id(77)), Err(OntologyError::UnknownTerm(_))));
        assert!(onto.ancestors(id(77)).is_err());
    }

    #[test]
    fn rejects_duplicates_dangling_and_cycles() {
        let dup = "[Term]\nid: GO:0000001\nnamespace: molecular_function\n[Term]\nid: GO:0000001\nnamespace: molecular_function\n";
        assert!(matches!(parse_obo(dup), Err(OntologyError::DuplicateTerm(_))));

        let dangling = "[Term]\nid: GO:0000001\nnamespace: molecular_function\nis_a: GO:0000005\nis_a: GO:0000006\n";
        match parse_obo(dangling) {
            Err(OntologyError::DanglingReferences(refs)) => assert_eq!(refs.len(), 2),
            other => panic!("{other:?}"),
        }

        let cyc = "[Term]\nid: GO:0000001\nnamespace: molecular_function\nis_a: GO:0000003\n\
                   [Term]\nid: GO:0000002\nnamespace: molecular_function\nis_a: GO:0000001\n\
                   [Term]\nid: GO:0000003\nnamespace: molecular_function\nrelationship: part_of GO:0000002\n";
        match parse_obo(cyc) {
            Err(OntologyError::Cycle(c)) => {
                assert_eq!(c.first(), c.last());
                assert_eq!(c.len(), 4);
            }
            other => panic!("{other:?}"),
        }

        let collide = "[Term]\nid: GO:0000001\nnamespace: molecular_function\nalt_id: GO:0000002\n\
                       [Term]\nid: GO:0000002\nnamespace: molecular_function\n";
        assert!(matches!(parse_obo(collide), Err(OntologyError::AltIdCollision { .. })));
    }

    #[test]
    fn obsolete_terms_not_traversed() {
        let text = "[Term]\nid: GO:0000001\nnamespace: molecular_function\n\
                    [Term]\nid: GO:0000002\nnamespace: molecular_function\nis_obsolete: true\n\
                    [Term]\nid: GO:0000003\nnamespace: molecular_function\nis_a: GO:0000002\nis_a: GO:0000001\n";
        let onto = parse_obo(text).unwrap();
        assert_eq!(onto.ancestors(id(3)).unwrap(), BTreeSet::from([id(1)]));
    }

    #[test]
    fn merge_rejects_collisions() {
        let mut a = parse_obo(CHAIN).unwrap();
        let b = parse_obo("[Term]\nid: GO:0999001\nnamespace: molecular_function\n").unwrap();
        a.merge(b.clone()).unwrap();
        assert_eq!(a.namespace_of(id(999_001)).unwrap(), Namespace::MolecularFunction);
        assert!(a.merge(b).is_err());
    }
}
