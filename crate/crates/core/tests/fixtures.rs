mod support;

use std::collections::BTreeMap;
use std::time::Instant;

use afpmt_core::campaign::load_canonicals;
use afpmt_core::mockbench::{hash_collisions, MockBehavior, MockSpec};
use afpmt_core::ontology::{load_obo, namespace_histogram, GoTermId, Namespace};
use afpmt_core::predictions::{load_predictions, PredictionFormat};
use afpmt_core::runner::distinct_records;
use afpmt_core::variants::{generate_pairs, load_variant_table, VariantCategory, VariantKind};
use support::data_dir;

/// Recorded when the snapshot was pinned.
const PINNED_TERM_COUNT: usize = 47_347;
const PINNED_OBSOLETE_COUNT: usize = 2_334;
const PINNED_SHA256: &str = "310e574b929a73f7527934b67215fbdaf1dbf309b552960144c065497b3f6bc2";
const PINNED_VERSION: &str = "releases/2019-01-27";

fn fixture_pairs() -> Vec<afpmt_core::TestCasePair> {
    let d = data_dir();
    let canonicals = load_canonicals(&[
        d.join("proteins/P14679.fasta"),
        d.join("proteins/P31785.fasta"),
        d.join("proteins/O00206.fasta"),
    ])
    .unwrap();
    let specs = load_variant_table(&d.join("variants.tsv")).unwrap();
    generate_pairs(&canonicals, &specs).unwrap()
}

#[test]
fn bundled_pairs_match_the_variant_catalogue() {
    let pairs = fixture_pairs();
    assert_eq!(pairs.len(), 15);
    let mut per_protein: BTreeMap<&str, usize> = BTreeMap::new();
    for p in &pairs {
        *per_protein.entry(p.protein_id()).or_default() += 1;
    }
    assert_eq!(per_protein, BTreeMap::from([("O00206", 4), ("P14679", 7), ("P31785", 4)]));

    let splice = pairs.iter().filter(|p| p.variant.category == VariantCategory::Splice).count();
    let natural = pairs.iter().filter(|p| p.variant.category == VariantCategory::Natural).count();
    assert_eq!((splice, natural), (2, 2));

    // 3 canonicals + 15 follow-ups
    assert_eq!(distinct_records(&pairs).unwrap().len(), 18);
}

#[test]
fn reference_residues_match_the_canonical_fixtures() {
    let expected = [
        ("P14679", 47, 'G', 'D'),
        ("P14679", 81, 'P', 'L'),
        ("P14679", 217, 'R', 'Q'),
        ("P14679", 299, 'R', 'H'),
        ("P14679", 373, 'T', 'K'),
        ("P14679", 419, 'G', 'R'),
        ("P14679", 446, 'G', 'S'),
        ("P31785", 39, 'D', 'N'),
        ("P31785", 153, 'I', 'N'),
        ("P31785", 226, 'R', 'C'),
        ("P31785", 285, 'R', 'Q'),
    ];
    let pairs = fixture_pairs();
    for (protein, pos, r, a) in expected {
        let pair = pairs
            .iter()
            .find(|p| p.protein_id() == protein && p.variant.position() == Some(pos))
            .unwrap_or_else(|| panic!("{protein} {pos} missing"));
        assert_eq!(pair.source.sequence.residue_at(pos), Some(r), "{protein} {pos}");
        assert_eq!(pair.follow_up.sequence.residue_at(pos), Some(a), "{protein} {pos}");
    }
    let lengths: BTreeMap<&str, usize> = pairs.iter().map(|p| (p.protein_id(), p.source.sequence.len())).collect();
    assert_eq!(lengths, BTreeMap::from([("O00206", 839), ("P14679", 529), ("P31785", 369)]));
}

#[test]
fn isoforms_replace_the_whole_sequence() {
    let pairs = fixture_pairs();
    let iso2 = pairs.iter().find(|p| p.variant.variant_id == "O00206-2").unwrap();
    assert!(matches!(iso2.variant.kind, VariantKind::FullSequence { .. }));
    assert_eq!(iso2.follow_up.sequence.as_str(), &iso2.source.sequence.as_str()[40..]);
}

#[test]
fn pinned_go_snapshot() {
    let start = Instant::now();
    let onto = load_obo(&data_dir().join("go/go-2019-01-27.obo.gz")).unwrap();
    eprintln!("parsed pinned GO snapshot in {:?}", start.elapsed());
    assert_eq!(onto.len(), PINNED_TERM_COUNT);
    assert_eq!(onto.terms().filter(|t| t.obsolete).count(), PINNED_OBSOLETE_COUNT);
    assert_eq!(onto.checksum(), PINNED_SHA256);
    assert_eq!(onto.data_version(), Some(PINNED_VERSION));

    let go = |s: &str| s.parse::<GoTermId>().unwrap();
    assert_eq!(onto.namespace_of(go("GO:0003674")).unwrap(), Namespace::MolecularFunction);
    assert_eq!(onto.namespace_of(go("GO:0008150")).unwrap(), Namespace::BiologicalProcess);
    assert_eq!(onto.namespace_of(go("GO:0005575")).unwrap(), Namespace::CellularComponent);
    // tyrosinase activity sits under the molecular function root
    assert!(onto.is_ancestor(go("GO:0003674"), go("GO:0004503")).unwrap());
    let hist = namespace_histogram(&onto);
    assert_eq!(hist.values().sum::<usize>(), PINNED_TERM_COUNT);
}

#[test]
fn subset_is_closed_under_ancestry() {
    let onto = load_obo(&data_dir().join("go/go-subset.obo")).unwrap();
    assert_eq!(onto.len(), 667);
    let base = load_predictions(&data_dir().join("mock/base_annotations.tsv"), PredictionFormat::PlainTsv).unwrap();
    assert_eq!(base.predictions.len(), 154);
    for p in &base.predictions {
        assert!(!onto.is_obsolete(p.term).unwrap(), "{}", p.term);
    }
}

#[test]
fn default_mock_seed_is_collision_free_on_fixtures() {
    let records = distinct_records(&fixture_pairs()).unwrap();
    assert!(hash_collisions(0, &records).is_empty());
}

#[test]
fn ancestor_shift_moves_every_base_annotation_set() {
    let d = data_dir();
    let onto = load_obo(&d.join("go/go-subset.obo")).unwrap();
    let base = load_predictions(&d.join("mock/base_annotations.tsv"), PredictionFormat::PlainTsv).unwrap();
    let pairs = fixture_pairs();
    let canonicals: Vec<_> = distinct_records(&pairs).unwrap().into_iter().filter(|r| !r.id.contains('|')).collect();
    let (spec, warnings) =
        MockSpec::from_predictions(MockBehavior::AncestorShift, &base.predictions, &onto, &canonicals, 0).unwrap();
    assert!(warnings.is_empty());
    for (protein, set) in &spec.base_annotations {
        for ns in [Namespace::MolecularFunction, Namespace::BiologicalProcess] {
            let terms = set.terms(ns);
            assert!(!terms.is_empty(), "{protein} has no {ns:?} annotations");
            let shifted: std::collections::BTreeSet<_> = terms.iter().map(|t| spec.nearest_ancestor[t]).collect();
            assert_ne!(&shifted, terms, "{protein} {ns:?}");
        }
    }
}
