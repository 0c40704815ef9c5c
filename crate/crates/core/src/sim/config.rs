use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::frame::{Activity, MentionType};
use crate::story::EngineConfig;

/// Row key for the first user move.
pub const START: &str = "START";

/// Dialog length in user turns: `min_user_turns` plus a geometric number of
/// extra turns, capped at `max_user_turns`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurnBudget {
    pub min_user_turns: usize,
    pub max_user_turns: usize,
    pub continue_prob: f64,
}

impl TurnBudget {
    /// Expected utterance count (two per user turn).
    pub fn mean_utterances(&self) -> f64 {
        let mut mean = 0.0;
        let mut p = 1.0;
        for n in self.min_user_turns..=self.max_user_turns {
            let stop = if n == self.max_user_turns {
                1.0
            } else {
                1.0 - self.continue_prob
            };
            mean += p * stop * n as f64;
            p *= self.continue_prob;
        }
        2.0 * mean
    }
}

impl Default for TurnBudget {
    fn default() -> Self {
        TurnBudget {
            min_user_turns: 4,
            max_user_turns: 16,
            continue_prob: 0.76,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Previous user activity (or `START`) to a distribution over the next.
    pub activity_transition: BTreeMap<String, BTreeMap<Activity, f64>>,
    pub target_turns: TurnBudget,
    /// Probability of 1, 2 and 3 constraint slots in a search request.
    pub slots_per_request: Vec<f64>,
    pub mention_type_weights: BTreeMap<MentionType, f64>,
    /// Relative weight of mentioning a clip last brought up k+1 utterances
    /// ago; the final entry covers every longer distance.
    pub coref_lookback_weights: Vec<f64>,
    /// Chance that a search request is deliberately over-constrained.
    pub no_results_rate: f64,
    /// Chance that a NO_RESULTS turn is followed by a REFINE_SEARCH.
    pub refine_after_no_results: f64,
    /// Chance that REPLACE_CLIPS names a reference clip instead of a query.
    pub replace_by_reference: f64,
    /// Chance that ADD_CLIPS carries an explicit position.
    pub add_with_position: f64,
    pub clips_per_graph: usize,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            activity_transition: uniform_transitions(0.5),
            target_turns: TurnBudget::default(),
            slots_per_request: vec![0.6, 0.3, 0.1],
            mention_type_weights: BTreeMap::from([
                (MentionType::Adjectival, 0.55),
                (MentionType::Ordinal, 0.25),
                (MentionType::DeviceContext, 0.1),
                (MentionType::Carryover, 0.1),
            ]),
            coref_lookback_weights: vec![0.0, 0.04, 0.16, 0.16, 0.16, 0.16, 0.16, 0.16],
            no_results_rate: 0.05,
            refine_after_no_results: 0.9,
            replace_by_reference: 0.5,
            add_with_position: 0.4,
            clips_per_graph: 100,
            engine: EngineConfig::default(),
            seed: 0,
        }
    }
}

/// Uniform rows over all activities with the self-transition scaled by
/// `damping`; the START row always opens with CREATE_STORY.
pub fn uniform_transitions(damping: f64) -> BTreeMap<String, BTreeMap<Activity, f64>> {
    let mut rows = BTreeMap::new();
    rows.insert(
        START.to_string(),
        BTreeMap::from([(Activity::CreateStory, 1.0)]),
    );
    for from in Activity::ALL {
        let total = Activity::ALL.len() as f64 - 1.0 + damping;
        let row = Activity::ALL
            .into_iter()
            .map(|to| (to, if to == from { damping } else { 1.0 } / total))
            .collect();
        rows.insert(from.as_str().to_string(), row);
    }
    rows
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: SimConfig = serde_json::from_str(text).map_err(|e| Error::Ingest {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let normalized = |field: &str, weights: &mut dyn Iterator<Item = f64>| -> Result<()> {
            let mut total = 0.0;
            for w in weights {
                if !(w.is_finite() && w >= 0.0) {
                    return Err(Error::config(
                        field,
                        "weights must be finite and non-negative",
                    ));
                }
                total += w;
            }
            if (total - 1.0).abs() > 1e-6 {
                return Err(Error::config(
                    field,
                    format!("weights sum to {total}, expected 1"),
                ));
            }
            Ok(())
        };
        if !self.activity_transition.contains_key(START) {
            return Err(Error::config("activity_transition", "missing START row"));
        }
        for (from, row) in &self.activity_transition {
            if from != START && from.parse::<Activity>().is_err() {
                return Err(Error::config(
                    "activity_transition",
                    format!("unknown row `{from}`"),
                ));
            }
            normalized(
                &format!("activity_transition.{from}"),
                &mut row.values().copied(),
            )?;
        }
        if self.activity_transition[START]
            .get(&Activity::CreateStory)
            .copied()
            != Some(1.0)
        {
            return Err(Error::config(
                "activity_transition.START",
                "dialogs must open with CREATE_STORY",
            ));
        }
        let b = &self.target_turns;
        if b.min_user_turns == 0 || b.max_user_turns < b.min_user_turns {
            return Err(Error::config(
                "target_turns",
                "need 1 <= min_user_turns <= max_user_turns",
            ));
        }
        for (field, p) in [
            ("target_turns.continue_prob", b.continue_prob),
            ("no_results_rate", self.no_results_rate),
            ("refine_after_no_results", self.refine_after_no_results),
            ("replace_by_reference", self.replace_by_reference),
            ("add_with_position", self.add_with_position),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(field, "must be a probability"));
            }
        }
        if self.slots_per_request.is_empty() || self.slots_per_request.len() > 3 {
            return Err(Error::config(
                "slots_per_request",
                "expected weights for 1 to 3 slots",
            ));
        }
        normalized(
            "slots_per_request",
            &mut self.slots_per_request.iter().copied(),
        )?;
        normalized(
            "mention_type_weights",
            &mut self.mention_type_weights.values().copied(),
        )?;
        if self.coref_lookback_weights.is_empty() {
            return Err(Error::config("coref_lookback_weights", "must not be empty"));
        }
        normalized(
            "coref_lookback_weights",
            &mut self.coref_lookback_weights.iter().copied(),
        )?;
        if self.clips_per_graph < 2 {
            return Err(Error::config("clips_per_graph", "must be at least 2"));
        }
        if self.engine.max_story_clips == 0 || self.engine.max_add_clips == 0 {
            return Err(Error::config("engine", "clip caps must be positive"));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
