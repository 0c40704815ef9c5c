mod common;

use std::collections::{BTreeMap, HashSet};

use common::fixture;
use montage_core::eval::tv_distance;
use montage_core::graph::{
    generate_collection, search, Clip, ConstraintSet, GenConfig, MemoryGraph, SlotKey,
};
use montage_core::vocab::ingest_annotation_vocab;
use montage_core::Error;
use proptest::prelude::*;

/// Linear scan written independently of `ConstraintSet::matches`.
fn scan<'g>(
    graph: &'g MemoryGraph,
    wanted: &[(SlotKey, String)],
    exclude: &HashSet<&str>,
) -> Vec<&'g Clip> {
    let mut out = Vec::new();
    for clip in &graph.clips {
        if exclude.contains(clip.id.as_str()) {
            continue;
        }
        let ok = wanted.iter().all(|(key, value)| match key {
            SlotKey::Activity => &clip.activity == value,
            SlotKey::Time => &clip.time == value,
            SlotKey::Location => &clip.location == value,
            SlotKey::Object => clip.objects.iter().any(|o| o == value),
            SlotKey::Participant => clip.participants.iter().any(|p| p == value),
            SlotKey::Attribute => clip.attributes.iter().any(|a| a == value),
        });
        if ok {
            out.push(clip);
        }
    }
    out
}

fn graph(seed: u64) -> MemoryGraph {
    generate_collection(&GenConfig::new(300, seed)).unwrap()
}

/// Constraints drawn from values that occur in the graph, so most queries hit something.
fn constraints_from(g: &MemoryGraph, picks: &[(usize, usize)]) -> Vec<(SlotKey, String)> {
    let mut out: Vec<(SlotKey, String)> = Vec::new();
    for &(clip, key) in picks {
        let clip = &g.clips[clip % g.clips.len()];
        let key = SlotKey::ALL[key % SlotKey::ALL.len()];
        if let Some(v) = clip.values(key).first() {
            let single = !key.is_multi() && out.iter().any(|(k, _)| *k == key);
            if !single {
                out.push((key, v.to_string()));
            }
        }
    }
    out
}

fn to_set(pairs: &[(SlotKey, String)]) -> ConstraintSet {
    let mut c = ConstraintSet::default();
    for (k, v) in pairs {
        c.insert(*k, v.clone());
    }
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn search_equals_linear_scan(
        seed in 0u64..4,
        picks in prop::collection::vec((any::<usize>(), any::<usize>()), 1..4),
        excluded in prop::collection::vec(any::<usize>(), 0..20),
    ) {
        let g = graph(seed);
        let wanted = constraints_from(&g, &picks);
        prop_assume!(!wanted.is_empty());
        let exclude: HashSet<&str> = excluded.iter().map(|i| g.clips[i % g.clips.len()].id.as_str()).collect();
        let got = search(&g, &to_set(&wanted), &exclude).unwrap();
        prop_assert_eq!(&got, &scan(&g, &wanted, &exclude));

        let positions: Vec<usize> = got.iter().map(|c| g.clips.iter().position(|x| x.id == c.id).unwrap()).collect();
        prop_assert!(positions.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(got.iter().all(|c| !exclude.contains(c.id.as_str())));
    }

    #[test]
    fn adding_a_constraint_never_widens(
        seed in 0u64..4,
        picks in prop::collection::vec((any::<usize>(), any::<usize>()), 2..5),
    ) {
        let g = graph(seed);
        let wanted = constraints_from(&g, &picks);
        prop_assume!(wanted.len() >= 2);
        let none = HashSet::new();
        let wide: HashSet<&str> = search(&g, &to_set(&wanted[..1]), &none).unwrap().iter().map(|c| c.id.as_str()).collect();
        let narrow = search(&g, &to_set(&wanted), &none).unwrap();
        prop_assert!(narrow.iter().all(|c| wide.contains(c.id.as_str())));
    }

    #[test]
    fn graphs_are_reproducible_and_valid(n in 1usize..120, seed in any::<u64>()) {
        let cfg = GenConfig::new(n, seed);
        let a = generate_collection(&cfg).unwrap();
        prop_assert_eq!(a.to_json(), generate_collection(&cfg).unwrap().to_json());
        prop_assert_eq!(a.clips.len(), n);
        a.validate().unwrap();
    }
}

#[test]
fn activity_marginal_tracks_configured_weights() {
    let cfg = GenConfig::new(500, 3);
    let g = generate_collection(&cfg).unwrap();
    let mut observed: BTreeMap<String, f64> = BTreeMap::new();
    for c in &g.clips {
        *observed.entry(c.activity.clone()).or_default() += 1.0 / g.clips.len() as f64;
    }
    let expected: BTreeMap<String, f64> = cfg
        .effective_activity_weights()
        .into_iter()
        .map(|w| (w.label, w.weight))
        .collect();
    assert!(tv_distance(&observed, &expected) <= 0.05);
}

#[test]
fn skiing_query_on_a_large_graph() {
    let g = generate_collection(&GenConfig::new(500, 1)).unwrap();
    let wanted = vec![(SlotKey::Activity, "skiing".to_string())];
    let got = search(&g, &to_set(&wanted), &HashSet::new()).unwrap();
    assert!(!got.is_empty());
    assert_eq!(got, scan(&g, &wanted, &HashSet::new()));
}

#[test]
fn out_of_vocabulary_constraint_is_an_error() {
    let g = graph(0);
    let wanted = vec![(SlotKey::Activity, "bobsleigh".to_string())];
    assert!(matches!(
        search(&g, &to_set(&wanted), &HashSet::new()),
        Err(Error::Validation(_))
    ));
}

#[test]
fn eighty_category_annotation_file() {
    let text = std::fs::read_to_string(fixture("coco_categories.json")).unwrap();
    let listed: serde_json::Value = serde_json::from_str(&text).unwrap();
    let names: Vec<&str> = listed["categories"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(names.len(), 80);

    let vocab = ingest_annotation_vocab(&text).unwrap();
    assert_eq!(vocab.objects.len(), 80);
    assert!(names.iter().all(|n| vocab.objects.iter().any(|o| o == n)));

    // Repeating every category must not change the result.
    let mut doubled = listed.clone();
    let cats = doubled["categories"].as_array_mut().unwrap();
    let copy = cats.clone();
    cats.extend(copy);
    let again = ingest_annotation_vocab(&doubled.to_string()).unwrap();
    assert_eq!(again.objects.len(), 80);

    let mut cfg = GenConfig::new(50, 2);
    cfg.vocabulary = vocab;
    generate_collection(&cfg).unwrap().validate().unwrap();
}

#[test]
fn ingestion_errors_carry_positions() {
    match ingest_annotation_vocab("{\n  \"categories\": [ {\"name\": 3} ]\n}") {
        Err(Error::Ingest { line, column, .. }) => assert_eq!((line, column > 0), (2, true)),
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        ingest_annotation_vocab(r#"{"categories": []}"#),
        Err(Error::Validation(_))
    ));
}
