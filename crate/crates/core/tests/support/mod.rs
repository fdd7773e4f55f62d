//! Brute-force oracles and random instance generators shared by integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use afpmt_core::ontology::{GoTermId, Namespace, Ontology, Relation, Term};
use afpmt_core::sequence::{AminoAcidSequence, ProteinRecord};
use afpmt_core::variants::{VariantCategory, VariantSpec};
use rand::seq::SliceRandom;
use rand::Rng;

pub const RESIDUES: &[u8] = b"ACDEFGHIKLMNPQRSTVWY";

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn random_sequence(rng: &mut impl Rng, len: usize) -> AminoAcidSequence {
    let s: String = (0..len).map(|_| *RESIDUES.choose(rng).unwrap() as char).collect();
    AminoAcidSequence::new(&s).unwrap()
}

pub fn random_record(rng: &mut impl Rng, id: &str, len: usize) -> ProteinRecord {
    ProteinRecord::new(id, "", random_sequence(rng, len)).unwrap()
}

pub fn hamming(a: &str, b: &str) -> usize {
    a.bytes().zip(b.bytes()).filter(|(x, y)| x != y).count()
}

/// Largest-remainder allocation by exhaustive search.
///
/// Each protein gets at least one variant; the remaining `spare` is spread
/// over lengths. Over all vectors of non-negative extras summing to `spare`
/// it minimises the squared distance to the exact quotas
/// (scaled by the total length so everything stays integral). Among equally
/// close vectors it prefers the one that is lexicographically greatest in
/// id order, i.e. extra units go to smaller ids first.
pub fn allocation_oracle(proteins: &[(String, usize)], budget: usize) -> Option<BTreeMap<String, usize>> {
    if budget < proteins.len() || proteins.iter().any(|(_, l)| *l == 0) {
        return None;
    }
    let mut sorted: Vec<(String, usize)> = proteins.to_vec();
    sorted.sort();
    let n = sorted.len();
    if n == 0 {
        return Some(BTreeMap::new());
    }
    let spare = (budget - n) as i128;
    let total: i128 = sorted.iter().map(|(_, l)| *l as i128).sum();

    let mut best: Option<(i128, Vec<i128>)> = None;
    let mut current = vec![0i128; n];
    fn recurse(
        i: usize,
        left: i128,
        current: &mut Vec<i128>,
        sorted: &[(String, usize)],
        spare: i128,
        total: i128,
        best: &mut Option<(i128, Vec<i128>)>,
    ) {
        if i + 1 == current.len() {
            current[i] = left;
            let err: i128 = current
                .iter()
                .zip(sorted)
                .map(|(&c, (_, l))| {
                    let d = total * c - spare * *l as i128;
                    d * d
                })
                .sum();
            let better = match best {
                None => true,
                Some((e, v)) => err < *e || (err == *e && *current > *v),
            };
            if better {
                *best = Some((err, current.clone()));
            }
            return;
        }
        for c in 0..=left {
            current[i] = c;
            recurse(i + 1, left - c, current, sorted, spare, total, best);
        }
    }
    recurse(0, spare, &mut current, &sorted, spare, total, &mut best);
    let (_, extras) = best.expect("at least one composition");
    Some(sorted.into_iter().zip(extras).map(|((id, _), e)| (id, 1 + e as usize)).collect())
}

/// Segment index (0-based) of a 1-based position when `length` residues are
/// cut into `count` pieces with the first `length % count` one longer.
pub fn segment_of(position: usize, length: usize, count: usize) -> usize {
    let small = length / count;
    let big_segments = length % count;
    let big_span = big_segments * (small + 1);
    if position <= big_span {
        (position - 1) / (small + 1)
    } else {
        big_segments + (position - 1 - big_span) / small
    }
}

/// Per-segment scan of every candidate: most publications, then lowest
/// position, then smallest id.
pub fn segment_scan_oracle(length: usize, count: usize, candidates: &[VariantSpec]) -> Vec<VariantSpec> {
    let mut out = Vec::new();
    for seg in 0..count {
        let mut in_seg: Vec<&VariantSpec> = candidates
            .iter()
            .filter(|c| segment_of(c.position().unwrap(), length, count) == seg)
            .collect();
        in_seg.sort_by(|a, b| {
            b.publication_count
                .cmp(&a.publication_count)
                .then(a.position().cmp(&b.position()))
                .then(a.variant_id.cmp(&b.variant_id))
        });
        if let Some(best) = in_seg.first() {
            out.push((*best).clone());
        }
    }
    out
}

/// Random point-substitution candidates consistent with `canonical`.
pub fn random_candidates(rng: &mut impl Rng, canonical: &ProteinRecord, n: usize, max_pubs: u32) -> Vec<VariantSpec> {
    let len = canonical.sequence.len();
    (0..n)
        .map(|i| {
            let pos = rng.gen_range(1..=len);
            let r = canonical.sequence.residue_at(pos).unwrap();
            let alt = loop {
                let a = *RESIDUES.choose(rng).unwrap() as char;
                if a != r {
                    break a;
                }
            };
            VariantSpec::point(
                format!("V{:03}", (i * 37) % 1000),
                canonical.id.clone(),
                pos,
                r,
                alt,
                VariantCategory::Disease,
                rng.gen_range(0..=max_pubs),
            )
            .unwrap()
        })
        .collect()
}

/// A random DAG instance: terms, `(child, parent, relation)` edges by index, and obsolete flags.
#[derive(Debug, Clone)]
pub struct DagInstance {
    pub ids: Vec<GoTermId>,
    pub edges: Vec<(usize, usize, Relation)>,
    pub obsolete: Vec<bool>,
}

impl DagInstance {
    pub fn random(rng: &mut impl Rng, max_terms: usize) -> Self {
        let n = rng.gen_range(1..=max_terms);
        let mut numbers: BTreeSet<u32> = BTreeSet::new();
        while numbers.len() < n {
            numbers.insert(rng.gen_range(1..100_000));
        }
        let mut ids: Vec<GoTermId> = numbers.into_iter().map(|x| GoTermId::new(x).unwrap()).collect();
        ids.shuffle(rng);
        let density = rng.gen_range(0.02..0.3);
        let mut edges = Vec::new();
        for child in 1..n {
            for parent in 0..child {
                if rng.gen_bool(density) {
                    let rel = if rng.gen_bool(0.7) { Relation::IsA } else { Relation::PartOf };
                    edges.push((child, parent, rel));
                }
            }
        }
        let obsolete = (0..n).map(|_| rng.gen_bool(0.1)).collect();
        Self { ids, edges, obsolete }
    }

    pub fn ontology(&self) -> Ontology {
        let terms = self.ids.iter().zip(&self.obsolete).map(|(&id, &obsolete)| Term {
            id,
            name: format!("term {id}"),
            namespace: Namespace::BiologicalProcess,
            obsolete,
            alt_ids: BTreeSet::new(),
        });
        let edges = self.edges.iter().map(|&(c, p, r)| (self.ids[c], self.ids[p], r));
        Ontology::from_parts(terms, edges).unwrap()
    }

    /// Transitive closure by repeated boolean matrix relaxation (Warshall),
    /// following only edges into non-obsolete terms.
    pub fn closure(&self) -> Vec<BTreeSet<GoTermId>> {
        let n = self.ids.len();
        let mut reach = vec![vec![false; n]; n];
        for &(c, p, _) in &self.edges {
            if !self.obsolete[p] {
                reach[c][p] = true;
            }
        }
        for k in 0..n {
            for i in 0..n {
                if reach[i][k] {
                    let via = reach[k].clone();
                    for (r, v) in reach[i].iter_mut().zip(via) {
                        *r |= v;
                    }
                }
            }
        }
        (0..n)
            .map(|i| (0..n).filter(|&j| j != i && reach[i][j]).map(|j| self.ids[j]).collect())
            .collect()
    }
}
