mod support;

use std::collections::BTreeSet;

use afpmt_core::ontology::{parse_obo, GoTermId, OntologyError};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use support::DagInstance;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ancestors_match_transitive_closure(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let dag = DagInstance::random(&mut rng, 50);
        let onto = dag.ontology();
        let closure = dag.closure();
        for (i, &id) in dag.ids.iter().enumerate() {
            prop_assert_eq!(&onto.ancestors(id).unwrap(), &closure[i], "term {}", id);
        }
    }

    #[test]
    fn propagate_is_extensive_and_idempotent(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let dag = DagInstance::random(&mut rng, 50);
        let onto = dag.ontology();
        let k = rng.gen_range(0..=dag.ids.len());
        let input: BTreeSet<GoTermId> = dag.ids.iter().copied().filter(|_| rng.gen_bool(0.3)).take(k).collect();
        let once = onto.propagate(&input).unwrap();
        prop_assert!(once.is_superset(&input));
        prop_assert_eq!(&onto.propagate(&once).unwrap(), &once);
        let expected: BTreeSet<GoTermId> = input
            .iter()
            .flat_map(|t| {
                let i = dag.ids.iter().position(|x| x == t).unwrap();
                dag.closure()[i].iter().copied().chain([*t]).collect::<Vec<_>>()
            })
            .collect();
        prop_assert_eq!(once, expected);
    }

    #[test]
    fn back_edges_are_cycles(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let dag = DagInstance::random(&mut rng, 20);
        let live_path = dag.edges.iter().find(|&&(c, p, _)| !dag.obsolete[c] && !dag.obsolete[p]);
        if let Some(&(c, p, _)) = live_path {
            let mut obo = String::new();
            for (i, id) in dag.ids.iter().enumerate() {
                obo.push_str(&format!("[Term]\nid: {id}\nnamespace: biological_process\n"));
                if dag.obsolete[i] {
                    obo.push_str("is_obsolete: true\n");
                }
                for &(_, pp, _) in dag.edges.iter().filter(|e| e.0 == i) {
                    obo.push_str(&format!("is_a: {}\n", dag.ids[pp]));
                }
                if i == p {
                    obo.push_str(&format!("is_a: {}\n", dag.ids[c]));
                }
            }
            prop_assert!(matches!(parse_obo(&obo), Err(OntologyError::Cycle(_))));
        }
    }
}

#[test]
fn alt_ids_resolve_to_primary_terms() {
    let onto = parse_obo(
        "[Term]\nid: GO:0000001\nnamespace: molecular_function\n\
         [Term]\nid: GO:0000002\nnamespace: molecular_function\nalt_id: GO:0000099\nis_a: GO:0000001\n",
    )
    .unwrap();
    let alt: GoTermId = "GO:0000099".parse().unwrap();
    let primary: GoTermId = "GO:0000002".parse().unwrap();
    assert_eq!(onto.ancestors(alt).unwrap(), onto.ancestors(primary).unwrap());
    assert_eq!(
        onto.propagate(&BTreeSet::from([alt])).unwrap(),
        onto.propagate(&BTreeSet::from([primary])).unwrap()
    );
}

#[test]
fn dangling_parent_is_reported() {
    let err = parse_obo("[Term]\nid: GO:0000002\nnamespace: molecular_function\nis_a: GO:0000001\n").unwrap_err();
    assert!(matches!(err, OntologyError::DanglingReferences(v) if v.len() == 1));
}
