use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dialog::{Dialog, Speaker};
use crate::frame::MentionType;

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return MeanStd::default();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        MeanStd {
            mean,
            std: var.sqrt(),
            n,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Histograms {
    pub words_user: BTreeMap<usize, usize>,
    pub words_assistant: BTreeMap<usize, usize>,
    /// Utterance length by 1-based turn id.
    pub words_by_turn: BTreeMap<u32, MeanStd>,
    /// User activity counts.
    pub user_activities: BTreeMap<String, usize>,
    pub candidates_per_mention: BTreeMap<usize, usize>,
    pub coref_distance: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub n_dialogs: usize,
    pub n_utterances: usize,
    pub words_user: MeanStd,
    pub words_assistant: MeanStd,
    pub utterances_per_dialog: MeanStd,
    pub clips_mentioned_per_dialog: MeanStd,
    pub clips_per_story: MeanStd,
    pub candidates_per_mention: MeanStd,
    pub coref_distance: MeanStd,
    pub mentions_by_type: BTreeMap<String, usize>,
    pub histograms: Histograms,
    pub definitions: BTreeMap<String, String>,
}

/// Corpus analytics over template utterances and gold annotations.
pub fn corpus_stats(dialogs: &[Dialog]) -> StatsReport {
    let mut words_user = Vec::new();
    let mut words_assistant = Vec::new();
    let mut per_dialog = Vec::new();
    let mut mentioned = Vec::new();
    let mut story_sizes = Vec::new();
    let mut candidates = Vec::new();
    let mut distances = Vec::new();
    let mut by_turn: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    let mut h = Histograms::default();
    let mut mentions_by_type: BTreeMap<String, usize> = BTreeMap::new();

    for d in dialogs {
        per_dialog.push(d.turns.len() as f64);
        let mut distinct: BTreeSet<&str> = BTreeSet::new();
        for (i, t) in d.turns.iter().enumerate() {
            let words = t.template_utterance.split_whitespace().count();
            by_turn.entry(t.turn_id).or_default().push(words as f64);
            match t.speaker {
                Speaker::User => {
                    words_user.push(words as f64);
                    *h.words_user.entry(words).or_default() += 1;
                    *h.user_activities
                        .entry(t.frame.activity.as_str().to_string())
                        .or_default() += 1;
                }
                Speaker::Assistant => {
                    words_assistant.push(words as f64);
                    *h.words_assistant.entry(words).or_default() += 1;
                    story_sizes.push(t.story_snapshot.len() as f64);
                }
            }
            if t.speaker != Speaker::User {
                continue;
            }
            let earlier = &d.turns[..i];
            for r in &t.frame.refs {
                let kind = r.mention_type.map_or("NONE", MentionType::as_str);
                *mentions_by_type.entry(kind.to_string()).or_default() += 1;
                let n_candidates = match r.mention_type {
                    Some(MentionType::Adjectival) => r.clip_ids.len(),
                    Some(MentionType::Carryover) => earlier
                        .iter()
                        .flat_map(|e| e.mentioned_clips())
                        .collect::<BTreeSet<_>>()
                        .len(),
                    _ => t.story_snapshot.len(),
                };
                candidates.push(n_candidates as f64);
                *h.candidates_per_mention.entry(n_candidates).or_default() += 1;
                for id in &r.clip_ids {
                    distinct.insert(id);
                    if let Some(j) = earlier
                        .iter()
                        .rposition(|e| e.mentioned_clips().contains(&id.as_str()))
                    {
                        let dist = i - j;
                        distances.push(dist as f64);
                        *h.coref_distance.entry(dist).or_default() += 1;
                    }
                }
            }
        }
        mentioned.push(distinct.len() as f64);
    }
    h.words_by_turn = by_turn
        .into_iter()
        .map(|(k, v)| (k, MeanStd::of(&v)))
        .collect();

    let definitions = BTreeMap::from([
        ("words".to_string(), "whitespace tokens of template utterances".to_string()),
        (
            "clips_per_story".to_string(),
            "story size after each assistant turn, averaged over assistant turns".to_string(),
        ),
        (
            "clips_mentioned_per_dialog".to_string(),
            "distinct clip ids in user-turn references per dialog".to_string(),
        ),
        (
            "candidates_per_mention".to_string(),
            "interpretation: ORDINAL/DEVICE_CONTEXT = story size, ADJECTIVAL = descriptor matches, CARRYOVER = distinct clips mentioned earlier"
                .to_string(),
        ),
        (
            "coref_distance".to_string(),
            "utterances back to the nearest earlier user reference or assistant addition of the clip; 1 = previous utterance"
                .to_string(),
        ),
    ]);

    StatsReport {
        n_dialogs: dialogs.len(),
        n_utterances: dialogs.iter().map(|d| d.turns.len()).sum(),
        words_user: MeanStd::of(&words_user),
        words_assistant: MeanStd::of(&words_assistant),
        utterances_per_dialog: MeanStd::of(&per_dialog),
        clips_mentioned_per_dialog: MeanStd::of(&mentioned),
        clips_per_story: MeanStd::of(&story_sizes),
        candidates_per_mention: MeanStd::of(&candidates),
        coref_distance: MeanStd::of(&distances),
        mentions_by_type,
        histograms: h,
        definitions,
    }
}

/// Long-format CSV (`histogram,bin,count`) of the count histograms.
pub fn histograms_csv(report: &StatsReport) -> String {
    let h = &report.histograms;
    let mut out = String::from("histogram,bin,count\n");
    let mut emit = |name: &str, rows: Vec<(String, usize)>| {
        for (bin, count) in rows {
            out.push_str(&format!("{name},{bin},{count}\n"));
        }
    };
    let num = |m: &BTreeMap<usize, usize>| m.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    emit("words_user", num(&h.words_user));
    emit("words_assistant", num(&h.words_assistant));
    emit(
        "user_activities",
        h.user_activities
            .iter()
            .map(|(k, v)| (k.clone(), *v))
            .collect(),
    );
    emit("candidates_per_mention", num(&h.candidates_per_mention));
    emit("coref_distance", num(&h.coref_distance));
    out
}
