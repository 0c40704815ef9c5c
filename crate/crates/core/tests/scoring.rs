mod common;

use common::{fixture, fixture_dialogs, perturb_final_turns, small_corpus};
use montage_core::dst::{read_predictions, serialize_frame, PredictionRecord};
use montage_core::eval::{gold_predictions, score, ScoreReport};
use montage_core::Error;
use proptest::prelude::*;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

fn check_prf_identity(r: &ScoreReport) {
    for p in [r.slot, r.coref] {
        for v in [p.precision, p.recall, p.f1] {
            assert!((0.0..=1.0).contains(&v));
        }
        if p.precision + p.recall > 0.0 {
            assert!(close(
                p.f1,
                2.0 * p.precision * p.recall / (p.precision + p.recall)
            ));
        }
    }
}

// Expected values counted by hand from the ten gold user turns and the
// prediction lines in the fixtures.
#[test]
fn hand_counted_fixture() {
    let gold = fixture_dialogs();
    let preds = read_predictions(&fixture("predictions.jsonl")).unwrap();
    let r = score(&gold, &preds).unwrap();

    assert_eq!(r.n_turns, 10);
    assert_eq!(r.n_predictions, 10);
    assert_eq!(r.n_unmatched, 1);
    assert_eq!(r.n_malformed, 1);
    assert_eq!(
        (r.slot.true_positives, r.slot.predicted, r.slot.gold),
        (5, 8, 8)
    );
    assert!(close(r.slot.f1, 0.625));
    assert_eq!(
        (r.coref.true_positives, r.coref.predicted, r.coref.gold),
        (5, 7, 7)
    );
    assert!(close(r.coref.precision, 5.0 / 7.0) && close(r.coref.f1, 5.0 / 7.0));
    assert!(close(r.intent_accuracy, 0.7));
    assert!(close(r.joint_accuracy, 0.3));
    check_prf_identity(&r);

    let share = &r.per_activity["SHARE_STORY"];
    assert_eq!(share.n_turns, 1);
    assert!(close(share.joint_accuracy, 1.0));
}

#[test]
fn perfect_predictions_score_one() {
    let gold = &small_corpus().dialogs;
    let r = score(gold, &gold_predictions(gold)).unwrap();
    assert_eq!(r.slot.f1, 1.0);
    assert_eq!(r.coref.f1, 1.0);
    assert_eq!(r.joint_accuracy, 1.0);
    assert_eq!(r.intent_accuracy, 1.0);
    assert_eq!((r.n_unmatched, r.n_malformed), (0, 0));
}

#[test]
fn k_of_n_perturbations() {
    let gold = &small_corpus().dialogs;
    let n = gold.iter().map(|d| d.user_turns().count()).sum::<usize>();
    for k in [0, 1, 5, 17, gold.len()] {
        let r = score(gold, &perturb_final_turns(gold, k)).unwrap();
        assert!(close(r.joint_accuracy, (n - k) as f64 / n as f64), "k={k}");
        assert!(close(r.intent_accuracy, (n - k) as f64 / n as f64), "k={k}");
    }
}

#[test]
fn missing_predictions_lower_recall_only() {
    let gold = &small_corpus().dialogs;
    let mut preds = gold_predictions(gold);
    preds.truncate(preds.len() / 2);
    let r = score(gold, &preds).unwrap();
    assert_eq!(r.slot.precision, 1.0);
    assert!(r.slot.recall < 1.0);
}

#[test]
fn duplicate_keys_are_rejected() {
    let gold = fixture_dialogs();
    let mut preds = gold_predictions(&gold);
    preds.push(preds[0].clone());
    assert!(matches!(score(&gold, &preds), Err(Error::Input(_))));
}

#[test]
fn malformed_frames_count_as_empty() {
    let gold = fixture_dialogs();
    let mut preds = gold_predictions(&gold);
    let t = gold[0].user_turns().next().unwrap();
    preds[0].linear_frame = serialize_frame(&t.frame).replace(']', ")");
    let r = score(&gold, &preds).unwrap();
    assert_eq!(r.n_malformed, 1);
    assert!(close(r.intent_accuracy, 0.9));
    assert_eq!(r.slot.predicted, r.slot.gold - t.frame.slots.len_pairs());
}

/// Gold predictions with per-turn damage chosen by `ops`.
fn damaged(ops: &[u8]) -> Vec<PredictionRecord> {
    let gold = &small_corpus().dialogs;
    let mut out = Vec::new();
    let turns = gold
        .iter()
        .flat_map(|d| d.user_turns().map(move |t| (d, t)));
    for ((d, t), op) in turns.zip(ops.iter().cycle()) {
        let mut f = t.frame.clone();
        match op % 6 {
            0 => {}
            1 => continue,
            2 => f.act = montage_core::frame::Act::Inform,
            3 => f.slots = Default::default(),
            4 => f.refs.clear(),
            _ => {
                out.push(PredictionRecord {
                    dialog_id: d.dialog_id.clone(),
                    turn_id: t.turn_id,
                    linear_frame: "REQUEST:".into(),
                });
                continue;
            }
        }
        out.push(PredictionRecord {
            dialog_id: d.dialog_id.clone(),
            turn_id: t.turn_id,
            linear_frame: serialize_frame(&f),
        });
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn shuffling_lines_changes_nothing(ops in prop::collection::vec(any::<u8>(), 1..64), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let gold = &small_corpus().dialogs;
        let preds = damaged(&ops);
        let mut shuffled = preds.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(score(gold, &preds).unwrap(), score(gold, &shuffled).unwrap());
    }

    #[test]
    fn joint_never_exceeds_intent(ops in prop::collection::vec(any::<u8>(), 1..64)) {
        let r = score(&small_corpus().dialogs, &damaged(&ops)).unwrap();
        prop_assert!(r.joint_accuracy <= r.intent_accuracy);
        for a in r.per_activity.values() {
            prop_assert!(a.joint_accuracy <= a.intent_accuracy);
        }
        check_prf_identity(&r);
    }
}
