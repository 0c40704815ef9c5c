#![allow(dead_code)]

use std::path::PathBuf;

use montage_core::dialog::{read_dialogs, read_graphs, Dialog};
use montage_core::frame::{Act, Activity, ClipRef, Frame, Intent, MentionType, Role};
use montage_core::graph::MemoryGraph;
use proptest::prelude::*;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn fixture_dialogs() -> Vec<Dialog> {
    read_dialogs(&fixture("dialogs.jsonl")).unwrap()
}

pub fn fixture_graphs() -> Vec<MemoryGraph> {
    read_graphs(&fixture("graphs.jsonl")).unwrap()
}

fn arb_intent() -> impl Strategy<Value = Intent> {
    (
        prop::sample::select(Act::ALL.to_vec()),
        prop::sample::select(Activity::ALL.to_vec()),
    )
        .prop_map(|(act, activity)| Intent { act, activity })
}

fn arb_ref() -> impl Strategy<Value = ClipRef> {
    (
        prop::collection::vec("[A-Za-z0-9_.-]{1,6}", 1..4),
        prop::sample::select(Role::ALL.to_vec()),
        prop::sample::select(MentionType::ALL.to_vec()),
    )
        .prop_map(|(ids, role, mt)| ClipRef::new(ids, role, mt, "that one"))
}

/// Any frame the codec can represent: valid keys, values without reserved
/// characters or edge whitespace, ids from the id alphabet.
pub fn arb_frame() -> impl Strategy<Value = Frame> {
    (
        arb_intent(),
        prop::collection::vec(
            (
                "[a-z0-9_]{1,10}",
                "[a-z0-9é]([a-z0-9 _.'/-]{0,12}[a-z0-9])?",
            ),
            0..6,
        ),
        prop::collection::vec(arb_ref(), 0..4),
    )
        .prop_map(|(intent, slots, refs)| {
            let mut f = Frame::new(intent);
            for (k, v) in slots {
                f.slots.insert(k, v);
            }
            f.refs = refs;
            f
        })
}

/// Gold predictions with the final user turn of the first `k` dialogs given
/// the wrong act. A final turn feeds no later state, so exactly `k` turns
/// lose joint credit.
pub fn perturb_final_turns(gold: &[Dialog], k: usize) -> Vec<montage_core::dst::PredictionRecord> {
    use montage_core::dst::{serialize_frame, PredictionRecord};
    assert!(k <= gold.len());
    let mut out = montage_core::eval::gold_predictions(gold);
    for d in &gold[..k] {
        let last = d.user_turns().last().expect("dialog has a user turn");
        let mut wrong = last.frame.clone();
        wrong.act = Act::Inform;
        let rec = out
            .iter_mut()
            .find(|p: &&mut PredictionRecord| {
                p.dialog_id == d.dialog_id && p.turn_id == last.turn_id
            })
            .unwrap();
        rec.linear_frame = serialize_frame(&wrong);
    }
    out
}

/// A small simulated corpus shared by the tests of one binary.
pub fn small_corpus() -> &'static montage_core::sim::Corpus {
    use montage_core::graph::GenConfig;
    use montage_core::sim::{simulate_corpus, SimConfig};
    static CORPUS: std::sync::OnceLock<montage_core::sim::Corpus> = std::sync::OnceLock::new();
    CORPUS.get_or_init(|| {
        let sim = SimConfig::default();
        simulate_corpus(40, &GenConfig::new(sim.clips_per_graph, 0), &sim, 5).unwrap()
    })
}
