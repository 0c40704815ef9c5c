mod common;

use std::collections::{BTreeSet, HashSet};

use common::{fixture, fixture_dialogs, fixture_graphs, small_corpus};
use montage_core::dialog::Dialog;
use montage_core::dst::{build_prompt, cumulative_state, DialogState, PromptConfig};
use montage_core::frame::{Frame, MentionType, SlotMap};
use montage_core::graph::{generate_collection, GenConfig, SlotKey};
use montage_core::lexicon::Lexicon;
use montage_core::nlu::{parse_utterance, resolve_mentions, Descriptor};
use montage_core::sim::{simulate_dialog, SimConfig};
use montage_core::story::{applicable_activities, StoryEngine};
use proptest::prelude::*;

fn check_dialog(d: &Dialog, graph: &montage_core::graph::MemoryGraph) -> Result<(), TestCaseError> {
    d.validate().unwrap();
    d.check_replay(&StoryEngine::default(), graph).unwrap();
    let mut seen: HashSet<&str> = HashSet::new();
    for t in &d.turns {
        if t.is_user() {
            prop_assert!(applicable_activities(&t.story_snapshot).contains(&t.frame.activity));
            for r in &t.frame.refs {
                prop_assert!(!r.clip_ids.is_empty());
                if matches!(
                    r.mention_type,
                    Some(MentionType::Ordinal | MentionType::DeviceContext)
                ) {
                    prop_assert_eq!(r.clip_ids.len(), 1);
                }
                for id in &r.clip_ids {
                    prop_assert!(
                        t.story_snapshot.index_of(id).is_some() || seen.contains(id.as_str())
                    );
                }
            }
        }
        seen.extend(t.mentioned_clips());
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn simulated_dialogs_are_consistent(graph_seed in 0u64..6, seed in any::<u64>()) {
        let cfg = SimConfig::default();
        let g = generate_collection(&GenConfig::new(cfg.clips_per_graph, graph_seed)).unwrap();
        let d = simulate_dialog(&g, &cfg, seed).unwrap();
        check_dialog(&d, &g)?;
        prop_assert_eq!(
            serde_json::to_string(&d).unwrap(),
            serde_json::to_string(&simulate_dialog(&g, &cfg, seed).unwrap()).unwrap()
        );
    }
}

#[test]
fn corpus_dialogs_are_consistent() {
    let c = small_corpus();
    for (d, g) in c.dialogs.iter().zip(&c.graphs) {
        assert_eq!(d.graph_id, g.graph_id);
        check_dialog(d, g).unwrap();
    }
}

#[test]
fn templates_invert_exactly() {
    let c = small_corpus();
    let lexicon = Lexicon::default();
    for t in c.dialogs.iter().flat_map(|d| d.user_turns()) {
        let parsed = parse_utterance(&t.template_utterance, &lexicon);
        let p = parsed
            .frame()
            .unwrap_or_else(|| panic!("unparseable: {}", t.template_utterance));
        assert_eq!(p.intent, t.frame.intent(), "{}", t.template_utterance);
        assert_eq!(p.slots, t.frame.slots, "{}", t.template_utterance);
    }
}

/// Resolution checked against direct reads of the snapshot and clip metadata.
#[test]
fn resolution_matches_brute_force() {
    let c = small_corpus();
    let lexicon = Lexicon::default();
    let mut checked = 0;
    for (d, g) in c.dialogs.iter().zip(&c.graphs) {
        for (i, t) in d.turns.iter().enumerate().filter(|(_, t)| t.is_user()) {
            let Some(p) = parse_utterance(&t.template_utterance, &lexicon)
                .frame()
                .cloned()
            else {
                continue;
            };
            let got = resolve_mentions(&p.spans, &d.turns[..i], &t.story_snapshot, g);
            let ids: Vec<String> = t
                .story_snapshot
                .entries
                .iter()
                .map(|e| e.clip_id.clone())
                .collect();
            for (span, resolved) in p.spans.iter().zip(&got) {
                let expected: Vec<String> = match &span.descriptor {
                    Descriptor::Word(w) if span.mention_type == MentionType::Adjectival => ids
                        .iter()
                        .filter(|id| {
                            let clip = g.clips.iter().find(|c| &&c.id == id).unwrap();
                            &clip.activity == w || clip.attributes.iter().any(|a| a == w)
                        })
                        .cloned()
                        .collect(),
                    Descriptor::Ordinal(k) => {
                        let n = ids.len() as i32;
                        let idx = if *k > 0 { k - 1 } else { n + k };
                        ids.get(idx as usize)
                            .filter(|_| idx >= 0)
                            .cloned()
                            .into_iter()
                            .collect()
                    }
                    _ => continue,
                };
                assert_eq!(resolved, &expected, "{}", t.template_utterance);
                checked += 1;
            }
            for ids in &got {
                for id in ids {
                    assert!(t.story_snapshot.index_of(id).is_some());
                }
            }
        }
    }
    assert!(checked > 50);
}

/// Per-key latest assignment among search turns, recomputed from scratch.
fn naive_state(frames: &[&Frame]) -> DialogState {
    let mut slots = SlotMap::new();
    for key in SlotKey::ALL {
        let latest = frames
            .iter()
            .rev()
            .filter(|f| f.activity.is_search())
            .find_map(|f| f.slots.get(key.as_str()));
        for v in latest.into_iter().flatten() {
            slots.insert(key.as_str(), v.clone());
        }
    }
    DialogState {
        slots,
        clip_ids: frames.last().map(|f| f.clip_id_set()).unwrap_or_default(),
        intent: frames.last().map(|f| f.intent()),
    }
}

#[test]
fn cumulative_state_matches_naive_recomputation() {
    for d in &small_corpus().dialogs {
        let mut frames: Vec<&Frame> = Vec::new();
        let mut prev = DialogState::default();
        for (i, t) in d.turns.iter().enumerate() {
            if t.is_user() {
                frames.push(&t.frame);
            }
            let state = cumulative_state(&d.turns[..=i]);
            assert_eq!(state, naive_state(&frames));
            if t.is_user() {
                let mut stepped = prev.clone();
                stepped.step(&t.frame);
                assert_eq!(state, stepped);
            }
            prev = state;
        }
    }
}

#[test]
fn golden_prompt() {
    let dialogs = fixture_dialogs();
    let graphs = fixture_graphs();
    let d = &dialogs[0];
    let t = &d.turns[4];
    assert_eq!((d.dialog_id.as_str(), t.turn_id), ("d0001", 5));
    let prompt = build_prompt(
        &d.turns[..=4],
        &t.story_snapshot,
        &graphs[0],
        &PromptConfig::default(),
    )
    .unwrap();
    let expected = std::fs::read_to_string(fixture("prompt_d0001_t5.txt")).unwrap();
    assert_eq!(prompt, expected.trim_end());
    assert_eq!(
        prompt,
        build_prompt(
            &d.turns[..=4],
            &t.story_snapshot,
            &graphs[0],
            &PromptConfig::default()
        )
        .unwrap()
    );
}

#[test]
fn fixture_gold_frames() {
    let dialogs = fixture_dialogs();
    let ids: BTreeSet<_> = dialogs[1].user_turns().nth(1).unwrap().frame.clip_id_set();
    assert_eq!(ids, ["c11", "c31"].iter().map(|s| s.to_string()).collect());
}
