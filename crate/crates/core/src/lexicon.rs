//! Shared surface-language resources: intent triggers, mention forms,
//! templates, and a slot gazetteer derived from a [`Vocabulary`].
//!
//! The template realizer and the rule-based parser both read from one
//! lexicon, which is what makes template utterances invertible.

use std::collections::{BTreeMap, BTreeSet};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Activity;
use crate::graph::SlotKey;
use crate::vocab::Vocabulary;

const DEFAULT_LEXICON: &str = include_str!("../data/lexicon.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    /// `ACT:ACTIVITY`, or `INFORM:*` for status-only assistant templates.
    pub intent: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<String>,
    pub text: String,
}

impl Template {
    /// Placeholder names appearing in the text, e.g. `{query}` → `query`.
    pub fn placeholders(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut rest = self.text.as_str();
        while let Some(start) = rest.find('{') {
            let Some(len) = rest[start..].find('}') else {
                break;
            };
            out.insert(rest[start + 1..start + len].to_string());
            rest = &rest[start + len + 1..];
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositionPhrases {
    pub first: Vec<String>,
    pub last: Vec<String>,
}

/// Serialized lexicon document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconData {
    pub triggers: BTreeMap<Activity, Vec<String>>,
    pub ordinals: BTreeMap<String, i32>,
    pub mention_heads: Vec<String>,
    pub device_mentions: Vec<String>,
    pub carryover_mentions: Vec<String>,
    pub reference_cues: Vec<String>,
    pub position_phrases: PositionPhrases,
    pub share_targets: Vec<String>,
    pub templates: Vec<Template>,
    #[serde(default)]
    pub clarifications: Vec<String>,
}

impl Default for LexiconData {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_LEXICON).expect("built-in lexicon is valid JSON")
    }
}

/// A lexicon bound to a vocabulary, with compiled mention patterns.
#[derive(Debug, Clone)]
pub struct Lexicon {
    pub data: LexiconData,
    /// `(label, key)` pairs, longest label first.
    pub gazetteer: Vec<(String, SlotKey)>,
    /// Attribute and activity labels usable as adjectival descriptors.
    pub descriptors: BTreeSet<String>,
    pub(crate) ordinal_re: Regex,
    pub(crate) adjectival_re: Regex,
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon::new(LexiconData::default(), &Vocabulary::default())
            .expect("built-in lexicon is valid")
    }
}

impl Lexicon {
    pub fn from_json(text: &str, vocab: &Vocabulary) -> Result<Self> {
        let data: LexiconData = serde_json::from_str(text).map_err(|e| Error::Ingest {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Lexicon::new(data, vocab)
    }

    pub fn for_vocabulary(vocab: &Vocabulary) -> Result<Self> {
        Lexicon::new(LexiconData::default(), vocab)
    }

    pub fn new(data: LexiconData, vocab: &Vocabulary) -> Result<Self> {
        validate_data(&data)?;
        let mut gazetteer: Vec<(String, SlotKey)> = Vec::new();
        let mut seen = BTreeSet::new();
        for key in SlotKey::ALL {
            for label in vocab.labels(key) {
                if seen.insert(label.clone()) {
                    gazetteer.push((label.clone(), key));
                }
            }
        }
        gazetteer.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));

        let descriptors: BTreeSet<String> = vocab
            .attributes
            .iter()
            .chain(vocab.activities.iter())
            .cloned()
            .collect();

        let heads = alternation(data.mention_heads.iter());
        let mut ordinal_words: Vec<&String> = data.ordinals.keys().collect();
        ordinal_words.sort_by_key(|w| std::cmp::Reverse(w.len()));
        let ordinal_re = Regex::new(&format!(
            r"\bthe ((?:{})|\d+(?:st|nd|rd|th)) (?:{heads})\b",
            alternation(ordinal_words.into_iter())
        ))
        .map_err(|e| Error::config("ordinals", e.to_string()))?;
        let adjectival_re = Regex::new(&format!(
            r"\bthe ({}) (?:{heads})\b",
            alternation(descriptors.iter())
        ))
        .map_err(|e| Error::config("descriptors", e.to_string()))?;

        Ok(Lexicon {
            data,
            gazetteer,
            descriptors,
            ordinal_re,
            adjectival_re,
        })
    }

    pub fn templates_for(&self, intent: &str) -> impl Iterator<Item = &Template> {
        let intent = intent.to_string();
        self.data
            .templates
            .iter()
            .filter(move |t| t.intent == intent)
    }

    pub fn triggers(&self, activity: Activity) -> &[String] {
        self.data
            .triggers
            .get(&activity)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Surface word for an ordinal index (1-based, negative from the end).
    pub fn ordinal_word(&self, k: i32) -> Option<&str> {
        self.data
            .ordinals
            .iter()
            .filter(|(_, v)| **v == k)
            .map(|(w, _)| w.as_str())
            // Prefer the longer form ("second to the last" over "second to last").
            .max_by_key(|w| w.len())
    }
}

/// Longest-first regex alternation of escaped phrases.
fn alternation<'a>(items: impl Iterator<Item = &'a String>) -> String {
    let mut v: Vec<&String> = items.collect();
    v.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    v.iter()
        .map(|s| regex::escape(s))
        .collect::<Vec<_>>()
        .join("|")
}

fn validate_data(data: &LexiconData) -> Result<()> {
    let mut owner: BTreeMap<&str, Activity> = BTreeMap::new();
    for (activity, phrases) in &data.triggers {
        if phrases.is_empty() {
            return Err(Error::config(
                "triggers",
                format!("{activity} has no trigger phrases"),
            ));
        }
        for p in phrases {
            if let Some(other) = owner.insert(p.as_str(), *activity) {
                if other != *activity {
                    return Err(Error::config(
                        "triggers",
                        format!("`{p}` triggers both {other} and {activity}"),
                    ));
                }
            }
        }
    }
    for activity in Activity::ALL {
        if !data.triggers.contains_key(&activity) {
            return Err(Error::config(
                "triggers",
                format!("{activity} has no trigger phrases"),
            ));
        }
    }
    for (name, list) in [
        ("mention_heads", &data.mention_heads),
        ("device_mentions", &data.device_mentions),
        ("carryover_mentions", &data.carryover_mentions),
        ("share_targets", &data.share_targets),
        ("position_phrases.first", &data.position_phrases.first),
        ("position_phrases.last", &data.position_phrases.last),
    ] {
        if list.is_empty() {
            return Err(Error::config(name, "list must not be empty"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_lexicon_loads() {
        let lex = Lexicon::default();
        assert_eq!(lex.ordinal_word(-2), Some("second to the last"));
        assert_eq!(lex.ordinal_word(3), Some("third"));
        assert!(lex.descriptors.contains("sunset") && lex.descriptors.contains("skiing"));
        assert!(lex
            .gazetteer
            .windows(2)
            .all(|w| w[0].0.len() >= w[1].0.len()));
    }

    #[test]
    fn every_request_activity_has_three_templates() {
        let lex = Lexicon::default();
        for a in Activity::ALL {
            let n = lex.templates_for(&format!("REQUEST:{a}")).count();
            assert!(n >= 3, "{a} has {n} templates");
            if a != Activity::CreateStory {
                continue;
            }
        }
    }

    #[test]
    fn overlapping_triggers_are_rejected() {
        let mut data = LexiconData::default();
        data.triggers
            .get_mut(&Activity::AddClips)
            .unwrap()
            .push("remove".into());
        match Lexicon::new(data, &Vocabulary::default()) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "triggers"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn placeholders_are_extracted() {
        let t = Template {
            intent: "REQUEST:ADD_CLIPS".into(),
            status: None,
            text: "Add {query} {position} now".into(),
        };
        assert_eq!(
            t.placeholders(),
            BTreeSet::from(["query".to_string(), "position".to_string()])
        );
    }
}
