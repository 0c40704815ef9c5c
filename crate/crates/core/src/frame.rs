//! Turn-level semantics shared by the engine, simulator, codec and NLU.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::de::{self, Deserializer};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Act {
    Request,
    Inform,
}

impl Act {
    pub const ALL: [Act; 2] = [Act::Request, Act::Inform];

    pub fn as_str(self) -> &'static str {
        match self {
            Act::Request => "REQUEST",
            Act::Inform => "INFORM",
        }
    }
}

/// The eight user activities. Declaration order is the fixed tie-break order
/// used by the NLU trigger matcher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Activity {
    CreateStory,
    AddClips,
    RemoveClips,
    ReplaceClips,
    ReorderClips,
    RefineSearch,
    ModifyDuration,
    ShareStory,
}

impl Activity {
    pub const ALL: [Activity; 8] = [
        Activity::CreateStory,
        Activity::AddClips,
        Activity::RemoveClips,
        Activity::ReplaceClips,
        Activity::ReorderClips,
        Activity::RefineSearch,
        Activity::ModifyDuration,
        Activity::ShareStory,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Activity::CreateStory => "CREATE_STORY",
            Activity::AddClips => "ADD_CLIPS",
            Activity::RemoveClips => "REMOVE_CLIPS",
            Activity::ReplaceClips => "REPLACE_CLIPS",
            Activity::ReorderClips => "REORDER_CLIPS",
            Activity::RefineSearch => "REFINE_SEARCH",
            Activity::ModifyDuration => "MODIFY_DURATION",
            Activity::ShareStory => "SHARE_STORY",
        }
    }

    /// Activities whose slots are search constraints.
    pub fn is_search(self) -> bool {
        matches!(
            self,
            Activity::CreateStory | Activity::AddClips | Activity::RefineSearch
        )
    }
}

macro_rules! str_enum_traits {
    ($ty:ty) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = ();

            fn from_str(s: &str) -> Result<Self, ()> {
                <$ty>::ALL.into_iter().find(|v| v.as_str() == s).ok_or(())
            }
        }
    };
}

str_enum_traits!(Act);
str_enum_traits!(Activity);
str_enum_traits!(Role);
str_enum_traits!(MentionType);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Intent {
    pub act: Act,
    pub activity: Activity,
}

impl Intent {
    pub fn request(activity: Activity) -> Self {
        Intent {
            act: Act::Request,
            activity,
        }
    }

    pub fn inform(activity: Activity) -> Self {
        Intent {
            act: Act::Inform,
            activity,
        }
    }
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.act, self.activity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Role {
    Target,
    Anchor,
    Reference,
    /// Role lost in the flat linear form.
    Unspecified,
}

impl Role {
    pub const ALL: [Role; 4] = [
        Role::Target,
        Role::Anchor,
        Role::Reference,
        Role::Unspecified,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Target => "TARGET",
            Role::Anchor => "ANCHOR",
            Role::Reference => "REFERENCE",
            Role::Unspecified => "UNSPECIFIED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MentionType {
    Adjectival,
    Ordinal,
    DeviceContext,
    Carryover,
}

impl MentionType {
    pub const ALL: [MentionType; 4] = [
        MentionType::Adjectival,
        MentionType::Ordinal,
        MentionType::DeviceContext,
        MentionType::Carryover,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MentionType::Adjectival => "ADJECTIVAL",
            MentionType::Ordinal => "ORDINAL",
            MentionType::DeviceContext => "DEVICE_CONTEXT",
            MentionType::Carryover => "CARRYOVER",
        }
    }
}

/// A clip mention and its gold (or predicted) resolution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipRef {
    pub clip_ids: Vec<String>,
    pub role: Role,
    #[serde(default)]
    pub mention_type: Option<MentionType>,
    #[serde(default)]
    pub mention_text: String,
}

impl ClipRef {
    pub fn new(
        clip_ids: Vec<String>,
        role: Role,
        mention_type: MentionType,
        text: impl Into<String>,
    ) -> Self {
        ClipRef {
            clip_ids,
            role,
            mention_type: Some(mention_type),
            mention_text: text.into(),
        }
    }
}

/// Slot key to a sorted, de-duplicated set of values.
///
/// Serialized as a JSON object whose values are a string for single-valued
/// keys and an array otherwise.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct SlotMap(BTreeMap<String, BTreeSet<String>>);

impl SlotMap {
    pub fn new() -> Self {
        SlotMap::default()
    }

    pub fn insert(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.0.entry(key.into()).or_default().insert(value.into());
    }

    /// Replaces all values for `key`.
    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) {
        let mut set = BTreeSet::new();
        set.insert(value.into());
        self.0.insert(key.into(), set);
    }

    pub fn get(&self, key: &str) -> Option<&BTreeSet<String>> {
        self.0.get(key)
    }

    /// The single value of `key`, if it has exactly one.
    pub fn single(&self, key: &str) -> Option<&str> {
        match self.0.get(key) {
            Some(set) if set.len() == 1 => set.iter().next().map(String::as_str),
            _ => None,
        }
    }

    pub fn remove(&mut self, key: &str) -> Option<BTreeSet<String>> {
        self.0.remove(key)
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    /// `(key, value)` pairs, keys sorted, values sorted within a key.
    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0
            .iter()
            .flat_map(|(k, vs)| vs.iter().map(move |v| (k.as_str(), v.as_str())))
    }

    pub fn len_pairs(&self) -> usize {
        self.0.values().map(BTreeSet::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BTreeSet<String>)> {
        self.0.iter()
    }

    /// Keys in `newer` replace the same keys here.
    pub fn merge_override(&mut self, newer: &SlotMap) {
        for (k, vs) in &newer.0 {
            self.0.insert(k.clone(), vs.clone());
        }
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for SlotMap {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        let mut map = SlotMap::new();
        for (k, v) in iter {
            map.insert(k, v);
        }
        map
    }
}

impl Serialize for SlotMap {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (k, vs) in &self.0 {
            if vs.len() == 1 {
                map.serialize_entry(k, vs.iter().next().expect("len 1"))?;
            } else {
                map.serialize_entry(k, vs)?;
            }
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for SlotMap {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum OneOrMany {
            One(String),
            Many(BTreeSet<String>),
        }
        let raw = BTreeMap::<String, OneOrMany>::deserialize(deserializer)?;
        let mut out = BTreeMap::new();
        for (k, v) in raw {
            let set = match v {
                OneOrMany::One(s) => BTreeSet::from([s]),
                OneOrMany::Many(set) => set,
            };
            if set.is_empty() {
                return Err(de::Error::custom(format!("slot `{k}` has no values")));
            }
            out.insert(k, set);
        }
        Ok(SlotMap(out))
    }
}

/// One turn's semantics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub act: Act,
    pub activity: Activity,
    #[serde(default)]
    pub slots: SlotMap,
    #[serde(default)]
    pub refs: Vec<ClipRef>,
}

impl Frame {
    pub fn new(intent: Intent) -> Self {
        Frame {
            act: intent.act,
            activity: intent.activity,
            slots: SlotMap::new(),
            refs: Vec::new(),
        }
    }

    pub fn intent(&self) -> Intent {
        Intent {
            act: self.act,
            activity: self.activity,
        }
    }

    /// Distinct clip ids across all refs, first occurrence order.
    pub fn flat_clip_ids(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.refs
            .iter()
            .flat_map(|r| r.clip_ids.iter())
            .filter(|id| seen.insert(id.as_str()))
            .cloned()
            .collect()
    }

    pub fn clip_id_set(&self) -> BTreeSet<String> {
        self.refs
            .iter()
            .flat_map(|r| r.clip_ids.iter().cloned())
            .collect()
    }
}
