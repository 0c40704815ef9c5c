use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::prf::{Prf, PrfCounts};
use crate::dialog::Dialog;
use crate::dst::{parse_frame, serialize_frame, DialogState, PredictionRecord};
use crate::error::{Error, Result};
use crate::frame::{Frame, SlotMap};
use crate::graph::SlotKey;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ActivityScores {
    pub n_turns: usize,
    pub intent_accuracy: f64,
    pub joint_accuracy: f64,
    pub slot: Prf,
    pub coref: Prf,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    /// Gold user turns scored.
    pub n_turns: usize,
    pub n_predictions: usize,
    /// Predictions whose key matches no gold user turn.
    pub n_unmatched: usize,
    /// Prediction lines whose linear frame failed to parse; scored as empty.
    pub n_malformed: usize,
    /// Per-turn slot key=value pairs.
    pub slot: Prf,
    /// Flat clip id sets per turn.
    pub coref: Prf,
    pub intent_accuracy: f64,
    /// Intent, cumulative slots and clip set all exact.
    pub joint_accuracy: f64,
    pub per_activity: BTreeMap<String, ActivityScores>,
}

#[derive(Default)]
struct Tally {
    turns: usize,
    intent_ok: usize,
    joint_ok: usize,
    slot: PrfCounts,
    coref: PrfCounts,
}

impl Tally {
    fn scores(&self) -> (f64, f64) {
        let acc = |n: usize| {
            if self.turns == 0 {
                0.0
            } else {
                n as f64 / self.turns as f64
            }
        };
        (acc(self.intent_ok), acc(self.joint_ok))
    }
}

fn slot_pairs(slots: &SlotMap) -> BTreeSet<String> {
    slots.pairs().map(|(k, v)| format!("{k}={v}")).collect()
}

/// Cumulative constraints plus the turn's own non-constraint slots.
fn joint_slots(state: &DialogState, frame: Option<&Frame>) -> SlotMap {
    let mut out = state.slots.clone();
    if let Some(f) = frame {
        for (k, v) in f.slots.pairs() {
            if k.parse::<SlotKey>().is_err() {
                out.insert(k, v);
            }
        }
    }
    out
}

/// Parsed predictions keyed by `(dialog_id, turn_id)`; `None` marks a malformed frame.
pub type PredictionIndex = HashMap<(String, u32), Option<Frame>>;

/// Parses prediction records into a keyed map. Duplicate keys are an input
/// error; unparseable frames map to `None` and are counted.
pub fn index_predictions(preds: &[PredictionRecord]) -> Result<(PredictionIndex, usize)> {
    let mut out = HashMap::with_capacity(preds.len());
    let mut malformed = 0;
    for p in preds {
        let frame = parse_frame(&p.linear_frame).ok();
        if frame.is_none() {
            malformed += 1;
        }
        if out
            .insert((p.dialog_id.clone(), p.turn_id), frame)
            .is_some()
        {
            return Err(Error::Input(format!(
                "duplicate prediction for dialog {} turn {}",
                p.dialog_id, p.turn_id
            )));
        }
    }
    Ok((out, malformed))
}

/// Scores linear-frame predictions against gold dialogs.
pub fn score(gold: &[Dialog], preds: &[PredictionRecord]) -> Result<ScoreReport> {
    let (index, n_malformed) = index_predictions(preds)?;
    let mut matched: BTreeSet<(&str, u32)> = BTreeSet::new();
    let mut all = Tally::default();
    let mut per: BTreeMap<String, Tally> = BTreeMap::new();

    for d in gold {
        let mut gold_state = DialogState::default();
        let mut pred_state = DialogState::default();
        for t in d.user_turns() {
            let key = (d.dialog_id.clone(), t.turn_id);
            let pred: Option<&Frame> = index.get(&key).and_then(Option::as_ref);
            if index.contains_key(&key) {
                matched.insert((d.dialog_id.as_str(), t.turn_id));
            }
            gold_state.step(&t.frame);
            match pred {
                Some(p) => pred_state.step(p),
                None => {
                    pred_state.intent = None;
                    pred_state.clip_ids.clear();
                }
            }

            let gold_slots = slot_pairs(&t.frame.slots);
            let pred_slots = pred.map(|p| slot_pairs(&p.slots)).unwrap_or_default();
            let gold_ids = t.frame.clip_id_set();
            let pred_ids = pred.map(Frame::clip_id_set).unwrap_or_default();
            let intent_ok = pred.is_some_and(|p| p.intent() == t.frame.intent());
            let joint_ok = intent_ok
                && joint_slots(&pred_state, pred) == joint_slots(&gold_state, Some(&t.frame))
                && pred_ids == gold_ids;

            let tally = per
                .entry(t.frame.activity.as_str().to_string())
                .or_default();
            for tl in [&mut all, tally] {
                tl.turns += 1;
                tl.intent_ok += intent_ok as usize;
                tl.joint_ok += joint_ok as usize;
                tl.slot.add_sets(&pred_slots, &gold_slots);
                if !(pred_ids.is_empty() && gold_ids.is_empty()) {
                    tl.coref.add_sets(&pred_ids, &gold_ids);
                }
            }
        }
    }

    let mut n_unmatched = 0;
    for ((dialog_id, turn_id), frame) in &index {
        if matched.contains(&(dialog_id.as_str(), *turn_id)) {
            continue;
        }
        n_unmatched += 1;
        if let Some(f) = frame {
            all.slot.add_sets(&slot_pairs(&f.slots), &BTreeSet::new());
            let ids = f.clip_id_set();
            if !ids.is_empty() {
                all.coref.add_sets(&ids, &BTreeSet::new());
            }
        }
    }

    let (intent_accuracy, joint_accuracy) = all.scores();
    Ok(ScoreReport {
        n_turns: all.turns,
        n_predictions: preds.len(),
        n_unmatched,
        n_malformed,
        slot: all.slot.prf(),
        coref: all.coref.prf(),
        intent_accuracy,
        joint_accuracy,
        per_activity: per
            .into_iter()
            .map(|(k, t)| {
                let (intent_accuracy, joint_accuracy) = t.scores();
                (
                    k,
                    ActivityScores {
                        n_turns: t.turns,
                        intent_accuracy,
                        joint_accuracy,
                        slot: t.slot.prf(),
                        coref: t.coref.prf(),
                    },
                )
            })
            .collect(),
    })
}

pub fn score_slots(gold: &[Dialog], preds: &[PredictionRecord]) -> Result<Prf> {
    Ok(score(gold, preds)?.slot)
}

pub fn score_coref(gold: &[Dialog], preds: &[PredictionRecord]) -> Result<Prf> {
    Ok(score(gold, preds)?.coref)
}

pub fn score_joint(gold: &[Dialog], preds: &[PredictionRecord]) -> Result<f64> {
    Ok(score(gold, preds)?.joint_accuracy)
}

/// Prediction records reproducing the gold user frames exactly.
pub fn gold_predictions(gold: &[Dialog]) -> Vec<PredictionRecord> {
    gold.iter()
        .flat_map(|d| {
            d.user_turns().map(|t| PredictionRecord {
                dialog_id: d.dialog_id.clone(),
                turn_id: t.turn_id,
                linear_frame: serialize_frame(&t.frame),
            })
        })
        .collect()
}
