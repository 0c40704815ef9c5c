//! The synthetic media collection ("memory graph") and conjunctive search.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocab::{Vocabulary, WeightedLabel};

pub const MIN_DURATION_S: u32 = 3;
pub const MAX_DURATION_S: u32 = 120;

/// The six searchable metadata keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotKey {
    Activity,
    Time,
    Location,
    Object,
    Participant,
    Attribute,
}

impl SlotKey {
    pub const ALL: [SlotKey; 6] = [
        SlotKey::Activity,
        SlotKey::Time,
        SlotKey::Location,
        SlotKey::Object,
        SlotKey::Participant,
        SlotKey::Attribute,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SlotKey::Activity => "activity",
            SlotKey::Time => "time",
            SlotKey::Location => "location",
            SlotKey::Object => "object",
            SlotKey::Participant => "participant",
            SlotKey::Attribute => "attribute",
        }
    }

    /// Name of the matching list in [`Vocabulary`].
    pub fn plural(self) -> &'static str {
        match self {
            SlotKey::Activity => "activities",
            SlotKey::Time => "times",
            SlotKey::Location => "locations",
            SlotKey::Object => "objects",
            SlotKey::Participant => "participants",
            SlotKey::Attribute => "attributes",
        }
    }

    pub fn is_multi(self) -> bool {
        matches!(
            self,
            SlotKey::Object | SlotKey::Participant | SlotKey::Attribute
        )
    }
}

impl fmt::Display for SlotKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SlotKey {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        SlotKey::ALL.into_iter().find(|k| k.as_str() == s).ok_or(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clip {
    pub id: String,
    pub activity: String,
    pub time: String,
    pub location: String,
    pub objects: BTreeSet<String>,
    pub participants: BTreeSet<String>,
    pub attributes: BTreeSet<String>,
    pub duration_s: u32,
}

impl Clip {
    /// Labels this clip carries for `key`.
    pub fn values(&self, key: SlotKey) -> Vec<&str> {
        match key {
            SlotKey::Activity => vec![self.activity.as_str()],
            SlotKey::Time => vec![self.time.as_str()],
            SlotKey::Location => vec![self.location.as_str()],
            SlotKey::Object => self.objects.iter().map(String::as_str).collect(),
            SlotKey::Participant => self.participants.iter().map(String::as_str).collect(),
            SlotKey::Attribute => self.attributes.iter().map(String::as_str).collect(),
        }
    }

    pub fn has(&self, key: SlotKey, value: &str) -> bool {
        match key {
            SlotKey::Activity => self.activity == value,
            SlotKey::Time => self.time == value,
            SlotKey::Location => self.location == value,
            SlotKey::Object => self.objects.contains(value),
            SlotKey::Participant => self.participants.contains(value),
            SlotKey::Attribute => self.attributes.contains(value),
        }
    }

    /// Adjectival descriptor match: activity or attribute equals `descriptor`.
    pub fn described_by(&self, descriptor: &str) -> bool {
        self.activity == descriptor || self.attributes.contains(descriptor)
    }
}

/// A conjunction of metadata constraints.
///
/// Multi-valued keys require the clip to contain every requested value.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConstraintSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default, rename = "object", skip_serializing_if = "BTreeSet::is_empty")]
    pub objects: BTreeSet<String>,
    #[serde(
        default,
        rename = "participant",
        skip_serializing_if = "BTreeSet::is_empty"
    )]
    pub participants: BTreeSet<String>,
    #[serde(
        default,
        rename = "attribute",
        skip_serializing_if = "BTreeSet::is_empty"
    )]
    pub attributes: BTreeSet<String>,
}

impl ConstraintSet {
    pub fn is_empty(&self) -> bool {
        self.activity.is_none()
            && self.time.is_none()
            && self.location.is_none()
            && self.objects.is_empty()
            && self.participants.is_empty()
            && self.attributes.is_empty()
    }

    /// Number of key/value pairs.
    pub fn len(&self) -> usize {
        self.pairs().count()
    }

    pub fn insert(&mut self, key: SlotKey, value: impl Into<String>) {
        let value = value.into();
        match key {
            SlotKey::Activity => self.activity = Some(value),
            SlotKey::Time => self.time = Some(value),
            SlotKey::Location => self.location = Some(value),
            SlotKey::Object => {
                self.objects.insert(value);
            }
            SlotKey::Participant => {
                self.participants.insert(value);
            }
            SlotKey::Attribute => {
                self.attributes.insert(value);
            }
        }
    }

    pub fn remove(&mut self, key: SlotKey) {
        match key {
            SlotKey::Activity => self.activity = None,
            SlotKey::Time => self.time = None,
            SlotKey::Location => self.location = None,
            SlotKey::Object => self.objects.clear(),
            SlotKey::Participant => self.participants.clear(),
            SlotKey::Attribute => self.attributes.clear(),
        }
    }

    pub fn values(&self, key: SlotKey) -> Vec<&str> {
        match key {
            SlotKey::Activity => self.activity.as_deref().into_iter().collect(),
            SlotKey::Time => self.time.as_deref().into_iter().collect(),
            SlotKey::Location => self.location.as_deref().into_iter().collect(),
            SlotKey::Object => self.objects.iter().map(String::as_str).collect(),
            SlotKey::Participant => self.participants.iter().map(String::as_str).collect(),
            SlotKey::Attribute => self.attributes.iter().map(String::as_str).collect(),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = SlotKey> + '_ {
        SlotKey::ALL
            .into_iter()
            .filter(|k| !self.values(*k).is_empty())
    }

    /// All `(key, value)` pairs in key order.
    pub fn pairs(&self) -> impl Iterator<Item = (SlotKey, &str)> + '_ {
        SlotKey::ALL
            .into_iter()
            .flat_map(move |k| self.values(k).into_iter().map(move |v| (k, v)))
    }

    pub fn matches(&self, clip: &Clip) -> bool {
        self.pairs().all(|(k, v)| clip.has(k, v))
    }

    /// Keys present in `newer` replace the same keys here; others carry over.
    pub fn merged_with(&self, newer: &ConstraintSet) -> ConstraintSet {
        let mut out = self.clone();
        for key in newer.keys() {
            out.remove(key);
            for v in newer.values(key) {
                out.insert(key, v);
            }
        }
        out
    }

    pub fn validate(&self, vocab: &Vocabulary) -> Result<()> {
        for (k, v) in self.pairs() {
            if !vocab.contains(k, v) {
                return Err(Error::Validation(format!("`{v}` is not a known {k}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryGraph {
    pub graph_id: String,
    pub seed: u64,
    pub vocabulary: Vocabulary,
    pub clips: Vec<Clip>,
}

impl MemoryGraph {
    /// Looks a clip up by id. Ids are `c1..cN` in order, so this is O(1).
    pub fn clip(&self, id: &str) -> Option<&Clip> {
        let n: usize = id.strip_prefix('c')?.parse().ok()?;
        self.clips.get(n.checked_sub(1)?).filter(|c| c.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let graph: MemoryGraph = serde_json::from_str(text).map_err(|e| Error::Ingest {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        graph.validate()?;
        Ok(graph)
    }

    pub fn validate(&self) -> Result<()> {
        self.vocabulary.validate()?;
        if self.clips.is_empty() {
            return Err(Error::Validation("memory graph has no clips".into()));
        }
        for (i, clip) in self.clips.iter().enumerate() {
            let expected = clip_id(i);
            if clip.id != expected {
                return Err(Error::Validation(format!(
                    "clip {} should have id {expected}",
                    clip.id
                )));
            }
            validate_clip(clip, &self.vocabulary)?;
        }
        Ok(())
    }

    pub fn activity_count(&self) -> usize {
        self.clips
            .iter()
            .map(|c| c.activity.as_str())
            .collect::<HashSet<_>>()
            .len()
    }
}

pub fn clip_id(index: usize) -> String {
    format!("c{}", index + 1)
}

fn validate_clip(clip: &Clip, vocab: &Vocabulary) -> Result<()> {
    let bad = |what: &str| Error::Validation(format!("clip {}: {what}", clip.id));
    for key in SlotKey::ALL {
        for v in clip.values(key) {
            if !vocab.contains(key, v) {
                return Err(bad(&format!("`{v}` is not a known {key}")));
            }
        }
    }
    if !(1..=4).contains(&clip.objects.len()) {
        return Err(bad("must carry 1-4 objects"));
    }
    if clip.participants.len() > 3 || clip.attributes.len() > 3 {
        return Err(bad("at most 3 participants and 3 attributes"));
    }
    if !(MIN_DURATION_S..=MAX_DURATION_S).contains(&clip.duration_s) {
        return Err(bad("duration out of range"));
    }
    Ok(())
}

/// Parameters for [`generate_collection`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_clips: usize,
    #[serde(default)]
    pub vocabulary: Vocabulary,
    #[serde(default)]
    pub seed: u64,
    /// Optional id; defaults to `g<seed>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_id: Option<String>,
    /// Activity marginal. Uniform over the vocabulary when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub activity_weights: Vec<WeightedLabel>,
}

impl GenConfig {
    pub fn new(n_clips: usize, seed: u64) -> Self {
        GenConfig {
            n_clips,
            vocabulary: Vocabulary::default(),
            seed,
            graph_id: None,
            activity_weights: Vec::new(),
        }
    }

    /// The activity marginal actually used for generation.
    pub fn effective_activity_weights(&self) -> Vec<WeightedLabel> {
        if self.activity_weights.is_empty() {
            let n = self.vocabulary.activities.len() as f64;
            self.vocabulary
                .activities
                .iter()
                .map(|a| WeightedLabel {
                    label: a.clone(),
                    weight: 1.0 / n,
                })
                .collect()
        } else {
            self.activity_weights.clone()
        }
    }
}

/// Generates a collection deterministically from `config`.
///
/// Activities are drawn by systematic sampling against the configured
/// marginal, so empirical activity frequencies track the weights closely
/// even for small collections. Every other field is sampled independently
/// per clip from the activity's co-occurrence row.
pub fn generate_collection(config: &GenConfig) -> Result<MemoryGraph> {
    if config.n_clips == 0 {
        return Err(Error::config("n_clips", "must be at least 1"));
    }
    let vocab = &config.vocabulary;
    vocab.validate()?;
    let weights = config.effective_activity_weights();
    let mut total = 0.0;
    for w in &weights {
        if !vocab.activities.contains(&w.label) {
            return Err(Error::config(
                "activity_weights",
                format!("`{}` is not a known activity", w.label),
            ));
        }
        if !(w.weight > 0.0 && w.weight.is_finite()) {
            return Err(Error::config(
                "activity_weights",
                "weights must be positive",
            ));
        }
        total += w.weight;
    }
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::config(
            "activity_weights",
            format!("weights sum to {total}, expected 1"),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let activities = systematic_sample(&weights, config.n_clips, &mut rng);

    let clips = activities
        .into_iter()
        .enumerate()
        .map(|(i, activity)| sample_clip(i, activity, vocab, &mut rng))
        .collect();

    Ok(MemoryGraph {
        graph_id: config
            .graph_id
            .clone()
            .unwrap_or_else(|| format!("g{}", config.seed)),
        seed: config.seed,
        vocabulary: vocab.clone(),
        clips,
    })
}

fn systematic_sample(weights: &[WeightedLabel], n: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let total: f64 = weights.iter().map(|w| w.weight).sum();
    let offset: f64 = rng.gen();
    let mut out = Vec::with_capacity(n);
    let mut cumulative = 0.0;
    let mut idx = 0;
    for j in 0..n {
        let u = (offset + j as f64) / n as f64 * total;
        while idx + 1 < weights.len() && cumulative + weights[idx].weight <= u {
            cumulative += weights[idx].weight;
            idx += 1;
        }
        out.push(weights[idx].label.clone());
    }
    out.shuffle(rng);
    out
}

fn sample_clip(index: usize, activity: String, vocab: &Vocabulary, rng: &mut ChaCha8Rng) -> Clip {
    let row = vocab
        .cooccurrence
        .get(&activity)
        .cloned()
        .unwrap_or_default();
    let time = vocab.times.choose(rng).expect("non-empty").clone();
    let location = pick_weighted(&row.locations, &vocab.locations, 1, rng)
        .pop()
        .expect("one location");
    let n_objects = rng.gen_range(1..=4);
    let objects = pick_weighted(&row.objects, &vocab.objects, n_objects, rng);
    let n_attributes = rng.gen_range(0..=3);
    let attributes = pick_weighted(&row.attributes, &vocab.attributes, n_attributes, rng);
    let n_participants = rng.gen_range(0..=3.min(vocab.participants.len()));
    let participants = vocab
        .participants
        .choose_multiple(rng, n_participants)
        .cloned()
        .collect();
    // Skewed towards short clips.
    let u: f64 = rng.gen();
    let span = (MAX_DURATION_S - MIN_DURATION_S) as f64;
    let duration_s = MIN_DURATION_S + (u * u * span).round() as u32;

    Clip {
        id: clip_id(index),
        activity,
        time,
        location,
        objects: objects.into_iter().collect(),
        participants,
        attributes: attributes.into_iter().collect(),
        duration_s,
    }
}

/// Draws up to `k` distinct labels, weighted by `list` or uniformly from `fallback`.
fn pick_weighted(
    list: &[WeightedLabel],
    fallback: &[String],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<String> {
    let mut pool: Vec<(String, f64)> = if list.is_empty() {
        fallback.iter().map(|l| (l.clone(), 1.0)).collect()
    } else {
        list.iter().map(|w| (w.label.clone(), w.weight)).collect()
    };
    let mut out = Vec::with_capacity(k);
    while out.len() < k && !pool.is_empty() {
        let total: f64 = pool.iter().map(|(_, w)| w).sum();
        let mut u = rng.gen::<f64>() * total;
        let mut chosen = pool.len() - 1;
        for (i, (_, w)) in pool.iter().enumerate() {
            if u < *w {
                chosen = i;
                break;
            }
            u -= w;
        }
        out.push(pool.swap_remove(chosen).0);
    }
    out
}

/// Clips satisfying every constraint, minus `exclude`, in graph order.
pub fn search<'g>(
    graph: &'g MemoryGraph,
    constraints: &ConstraintSet,
    exclude: &HashSet<&str>,
) -> Result<Vec<&'g Clip>> {
    if constraints.is_empty() {
        return Err(Error::Validation(
            "search needs at least one constraint".into(),
        ));
    }
    constraints.validate(&graph.vocabulary)?;
    Ok(graph
        .clips
        .iter()
        .filter(|c| !exclude.contains(c.id.as_str()) && constraints.matches(c))
        .collect())
}
