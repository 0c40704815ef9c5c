//! Label vocabulary for the synthetic media collection.
//!
//! A [`Vocabulary`] is the closed set of labels a collection may use, plus
//! per-activity co-occurrence weights that make generated clips plausible
//! (surfboards at the beach, skis in the mountains).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SlotKey;

const DEFAULT_VOCABULARY: &str = include_str!("../data/vocabulary.json");

/// Tolerance for weighted lists summing to one.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Characters that would collide with the linear frame or prompt syntax.
const RESERVED_CHARS: &[char] = &[',', '[', ']', '<', '>', '=', ';', ':', '"'];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedLabel {
    pub label: String,
    pub weight: f64,
}

/// Co-occurrence lists for one activity. An empty list means "uniform over
/// the full vocabulary list".
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Cooccurrence {
    #[serde(default)]
    pub objects: Vec<WeightedLabel>,
    #[serde(default)]
    pub locations: Vec<WeightedLabel>,
    #[serde(default)]
    pub attributes: Vec<WeightedLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub activities: Vec<String>,
    pub locations: Vec<String>,
    pub objects: Vec<String>,
    pub participants: Vec<String>,
    pub times: Vec<String>,
    pub attributes: Vec<String>,
    #[serde(default)]
    pub cooccurrence: BTreeMap<String, Cooccurrence>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_VOCABULARY).expect("built-in vocabulary is valid JSON")
    }
}

impl Vocabulary {
    pub fn from_json(text: &str) -> Result<Self> {
        let vocab: Vocabulary = serde_json::from_str(text).map_err(|e| Error::Ingest {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        vocab.validate()?;
        Ok(vocab)
    }

    pub fn labels(&self, key: SlotKey) -> &[String] {
        match key {
            SlotKey::Activity => &self.activities,
            SlotKey::Time => &self.times,
            SlotKey::Location => &self.locations,
            SlotKey::Object => &self.objects,
            SlotKey::Participant => &self.participants,
            SlotKey::Attribute => &self.attributes,
        }
    }

    pub fn contains(&self, key: SlotKey, label: &str) -> bool {
        self.labels(key).iter().any(|l| l == label)
    }

    /// First category (in [`SlotKey::ALL`] order) that owns `label`.
    pub fn category_of(&self, label: &str) -> Option<SlotKey> {
        SlotKey::ALL.into_iter().find(|k| self.contains(*k, label))
    }

    /// Checks every documented invariant and names the first offending field.
    pub fn validate(&self) -> Result<()> {
        for key in SlotKey::ALL {
            let field = key.plural();
            let labels = self.labels(key);
            if labels.is_empty() {
                return Err(Error::config(field, "list must not be empty"));
            }
            let mut seen = BTreeSet::new();
            for label in labels {
                check_label(field, label)?;
                if !seen.insert(label.as_str()) {
                    return Err(Error::config(field, format!("duplicate label `{label}`")));
                }
            }
        }
        for (activity, row) in &self.cooccurrence {
            if !self.activities.contains(activity) {
                return Err(Error::config(
                    "cooccurrence",
                    format!("key `{activity}` is not a known activity"),
                ));
            }
            let lists = [
                ("objects", &row.objects, SlotKey::Object),
                ("locations", &row.locations, SlotKey::Location),
                ("attributes", &row.attributes, SlotKey::Attribute),
            ];
            for (name, list, key) in lists {
                let field = format!("cooccurrence.{activity}.{name}");
                if list.is_empty() {
                    continue;
                }
                let mut sum = 0.0;
                for w in list {
                    if !(w.weight > 0.0 && w.weight.is_finite()) {
                        return Err(Error::config(
                            &field,
                            format!("weight for `{}` must be positive", w.label),
                        ));
                    }
                    if !self.contains(key, &w.label) {
                        return Err(Error::config(
                            &field,
                            format!("`{}` is not in the vocabulary", w.label),
                        ));
                    }
                    sum += w.weight;
                }
                if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
                    return Err(Error::config(
                        &field,
                        format!("weights sum to {sum}, expected 1"),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn check_label(field: &str, label: &str) -> Result<()> {
    if label.is_empty() || label.trim() != label {
        return Err(Error::config(
            field,
            format!("label `{label}` is empty or padded"),
        ));
    }
    if label
        .chars()
        .any(|c| RESERVED_CHARS.contains(&c) || c.is_control() || c.is_uppercase())
    {
        return Err(Error::config(
            field,
            format!("label `{label}` must be lowercase and free of reserved characters"),
        ));
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct AnnotationDocument {
    categories: Vec<AnnotationCategory>,
}

#[derive(Debug, Deserialize)]
struct AnnotationCategory {
    name: String,
    #[serde(default)]
    supercategory: String,
}

/// Builds a vocabulary from an annotation category list.
///
/// Categories whose supercategory is `activity` become activities, all
/// others become objects. Times, locations, participants and attributes come
/// from the built-in vocabulary. Co-occurrence rows are kept only for
/// surviving activities, restricted to surviving labels and renormalized.
pub fn ingest_annotation_vocab(document: &str) -> Result<Vocabulary> {
    let doc: AnnotationDocument = serde_json::from_str(document).map_err(|e| Error::Ingest {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if doc.categories.is_empty() {
        return Err(Error::Validation(
            "annotation file has an empty category list".into(),
        ));
    }

    let mut activities = Vec::new();
    let mut objects = Vec::new();
    for cat in &doc.categories {
        let name = normalize_label(&cat.name);
        let bucket = if cat.supercategory.trim().eq_ignore_ascii_case("activity") {
            &mut activities
        } else {
            &mut objects
        };
        if !bucket.contains(&name) {
            bucket.push(name);
        }
    }

    let base = Vocabulary::default();
    let activities = if activities.is_empty() {
        base.activities.clone()
    } else {
        activities
    };
    let objects = if objects.is_empty() {
        base.objects.clone()
    } else {
        objects
    };

    let mut cooccurrence = BTreeMap::new();
    for (activity, row) in &base.cooccurrence {
        if !activities.contains(activity) {
            continue;
        }
        let row = Cooccurrence {
            objects: restrict(&row.objects, &objects),
            locations: row.locations.clone(),
            attributes: row.attributes.clone(),
        };
        cooccurrence.insert(activity.clone(), row);
    }

    let vocab = Vocabulary {
        activities,
        objects,
        cooccurrence,
        ..base
    };
    vocab.validate()?;
    Ok(vocab)
}

fn normalize_label(name: &str) -> String {
    let lowered = name.to_lowercase();
    let cleaned: String = lowered
        .chars()
        .map(|c| {
            if RESERVED_CHARS.contains(&c) || c.is_control() {
                ' '
            } else {
                c
            }
        })
        .collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn restrict(list: &[WeightedLabel], allowed: &[String]) -> Vec<WeightedLabel> {
    let kept: Vec<_> = list
        .iter()
        .filter(|w| allowed.contains(&w.label))
        .cloned()
        .collect();
    let total: f64 = kept.iter().map(|w| w.weight).sum();
    if kept.is_empty() || total <= 0.0 {
        return Vec::new();
    }
    let mut out: Vec<WeightedLabel> = kept
        .into_iter()
        .map(|w| WeightedLabel {
            weight: w.weight / total,
            ..w
        })
        .collect();
    // Push the rounding residue into the first entry so the list sums to one.
    let residue = 1.0 - out.iter().map(|w| w.weight).sum::<f64>();
    out[0].weight += residue;
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_vocabulary_is_valid_and_large_enough() {
        let v = Vocabulary::default();
        v.validate().unwrap();
        assert!(v.activities.len() >= 12);
        assert!(v.objects.len() >= 20);
        assert!(v.locations.len() >= 10);
        assert!(v.attributes.len() >= 8);
        assert!(v.times.contains(&"2014".to_string()) && v.times.contains(&"2023".to_string()));
    }

    #[test]
    fn default_categories_are_disjoint() {
        let v = Vocabulary::default();
        let mut seen = BTreeSet::new();
        for key in SlotKey::ALL {
            for label in v.labels(key) {
                assert!(
                    seen.insert(label.clone()),
                    "{label} appears in two categories"
                );
            }
        }
    }

    #[test]
    fn ingest_routes_supercategories() {
        let doc = r#"{"info": {"year": 2017}, "categories": [
            {"name": "dog", "supercategory": "animal", "id": 18},
            {"name": "frisbee", "supercategory": "sports"},
            {"name": "Frisbee", "supercategory": "sports"},
            {"name": "juggling", "supercategory": "activity"}
        ]}"#;
        let v = ingest_annotation_vocab(doc).unwrap();
        assert_eq!(v.objects, vec!["dog", "frisbee"]);
        assert_eq!(v.activities, vec!["juggling"]);
        assert!(v.cooccurrence.is_empty());
        assert_eq!(v.times, Vocabulary::default().times);
    }

    #[test]
    fn ingest_rejects_empty_and_malformed() {
        assert!(matches!(
            ingest_annotation_vocab(r#"{"categories": []}"#),
            Err(Error::Validation(_))
        ));
        match ingest_annotation_vocab("{\n  \"categories\": [\n    {\"name\": }\n]}") {
            Err(Error::Ingest { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            ingest_annotation_vocab(""),
            Err(Error::Ingest { .. })
        ));
    }

    #[test]
    fn ingest_keeps_cooccurrence_normalized() {
        let doc = r#"{"categories": [{"name": "skis", "supercategory": "sports"},
                                      {"name": "helmet", "supercategory": "sports"}]}"#;
        let v = ingest_annotation_vocab(doc).unwrap();
        let row = &v.cooccurrence["skiing"];
        assert_eq!(row.objects.len(), 2);
        let sum: f64 = row.objects.iter().map(|w| w.weight).sum();
        assert!((sum - 1.0).abs() < WEIGHT_SUM_TOLERANCE);
        assert!(v.cooccurrence["surfing"].objects.is_empty());
    }

    #[test]
    fn validation_names_offending_field() {
        let mut v = Vocabulary::default();
        v.locations.clear();
        match v.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "locations"),
            other => panic!("unexpected {other:?}"),
        }
        let mut v = Vocabulary::default();
        v.cooccurrence.get_mut("skiing").unwrap().objects[0].weight += 0.1;
        match v.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "cooccurrence.skiing.objects"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
