//! Executable montage-editing semantics.
//!
//! [`StoryEngine::execute`] is a pure function from `(state, call, graph)`
//! to a new state plus an [`ExecutionResult`]. The simulator, the
//! interactive session and the replay checks all go through it.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{Act, Activity, ClipRef, Frame, Intent, MentionType, Role, SlotMap};
use crate::graph::{search, ConstraintSet, MemoryGraph, SlotKey};

pub const SLOT_POSITION: &str = "position";
pub const SLOT_DURATION_S: &str = "duration_s";
pub const SLOT_DURATION_CHANGE: &str = "duration_change";
pub const SLOT_SHARE_TO: &str = "share_to";
pub const SLOT_STATUS: &str = "status";
pub const SLOT_COUNT: &str = "count";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    First,
    Last,
    Before,
    After,
}

impl Position {
    pub const ALL: [Position; 4] = [
        Position::First,
        Position::Last,
        Position::Before,
        Position::After,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Position::First => "first",
            Position::Last => "last",
            Position::Before => "before",
            Position::After => "after",
        }
    }

    pub fn needs_anchor(self) -> bool {
        matches!(self, Position::Before | Position::After)
    }

    fn parse(s: &str) -> Option<Self> {
        Position::ALL.into_iter().find(|p| p.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DurationChange {
    Shorter,
    Longer,
}

impl DurationChange {
    pub fn as_str(self) -> &'static str {
        match self {
            DurationChange::Shorter => "shorter",
            DurationChange::Longer => "longer",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "shorter" => Some(DurationChange::Shorter),
            "longer" => Some(DurationChange::Longer),
            _ => None,
        }
    }
}

/// A fully typed API call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiCall {
    pub intent: Intent,
    #[serde(default, skip_serializing_if = "ConstraintSet::is_empty")]
    pub constraints: ConstraintSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Position>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_change: Option<DurationChange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub share_to: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub refs: Vec<ClipRef>,
}

impl ApiCall {
    pub fn new(activity: Activity) -> Self {
        ApiCall {
            intent: Intent::request(activity),
            constraints: ConstraintSet::default(),
            position: None,
            duration_s: None,
            duration_change: None,
            share_to: None,
            refs: Vec::new(),
        }
    }

    pub fn activity(&self) -> Activity {
        self.intent.activity
    }

    /// Clip ids of every ref with `role`, in ref order, de-duplicated.
    pub fn ids_with_role(&self, role: Role) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.refs
            .iter()
            .filter(|r| r.role == role)
            .flat_map(|r| r.clip_ids.iter().map(String::as_str))
            .filter(|id| seen.insert(*id))
            .collect()
    }

    pub fn to_frame(&self) -> Frame {
        let mut slots = SlotMap::new();
        for (k, v) in self.constraints.pairs() {
            slots.insert(k.as_str(), v);
        }
        if let Some(p) = self.position {
            slots.insert(SLOT_POSITION, p.as_str());
        }
        if let Some(d) = self.duration_s {
            slots.insert(SLOT_DURATION_S, d.to_string());
        }
        if let Some(c) = self.duration_change {
            slots.insert(SLOT_DURATION_CHANGE, c.as_str());
        }
        if let Some(s) = &self.share_to {
            slots.insert(SLOT_SHARE_TO, s.clone());
        }
        Frame {
            act: self.intent.act,
            activity: self.intent.activity,
            slots,
            refs: self.refs.clone(),
        }
    }

    /// Converts a user frame into a call and checks the activity schema.
    pub fn from_frame(frame: &Frame) -> Result<Self> {
        if frame.act != Act::Request {
            return Err(schema("API calls are built from REQUEST frames"));
        }
        let mut call = ApiCall::new(frame.activity);
        call.refs = frame.refs.clone();
        for (key, values) in frame.slots.iter() {
            let single = || -> Result<&str> {
                match values.len() {
                    1 => Ok(values.iter().next().expect("len 1").as_str()),
                    _ => Err(schema(&format!("slot `{key}` takes a single value"))),
                }
            };
            if let Ok(k) = key.parse::<SlotKey>() {
                if !k.is_multi() {
                    single()?;
                }
                for v in values {
                    call.constraints.insert(k, v.clone());
                }
                continue;
            }
            match key.as_str() {
                SLOT_POSITION => {
                    call.position =
                        Some(Position::parse(single()?).ok_or_else(|| schema("bad position"))?)
                }
                SLOT_DURATION_S => {
                    let d: u32 = single()?
                        .parse()
                        .map_err(|_| schema("duration_s must be an integer"))?;
                    call.duration_s = Some(d);
                }
                SLOT_DURATION_CHANGE => {
                    call.duration_change = Some(
                        DurationChange::parse(single()?)
                            .ok_or_else(|| schema("bad duration_change"))?,
                    )
                }
                SLOT_SHARE_TO => call.share_to = Some(single()?.to_string()),
                other => return Err(schema(&format!("unknown slot `{other}`"))),
            }
        }
        call.validate_schema()?;
        Ok(call)
    }

    /// Checks the per-activity argument schema.
    pub fn validate_schema(&self) -> Result<()> {
        use Activity::*;
        if self.intent.act != Act::Request {
            return Err(schema("calls must carry a REQUEST act"));
        }
        for r in &self.refs {
            if r.clip_ids.is_empty() {
                return Err(schema("clip reference without clip ids"));
            }
            if r.mention_type == Some(MentionType::Ordinal) && r.clip_ids.len() != 1 {
                return Err(schema("ordinal mentions resolve to exactly one clip"));
            }
            if r.role == Role::Unspecified {
                return Err(schema("clip references need a role"));
            }
        }
        let count = |role: Role| self.refs.iter().filter(|r| r.role == role).count();
        let (targets, anchors, references) = (
            count(Role::Target),
            count(Role::Anchor),
            count(Role::Reference),
        );
        let has_constraints = !self.constraints.is_empty();
        let has_controls = self.position.is_some()
            || self.duration_s.is_some()
            || self.duration_change.is_some()
            || self.share_to.is_some();
        let activity = self.activity();
        let ok = match activity {
            CreateStory | RefineSearch => has_constraints && self.refs.is_empty() && !has_controls,
            AddClips => {
                let anchor_ok = match self.position {
                    Some(p) if p.needs_anchor() => {
                        anchors == 1 && self.ids_with_role(Role::Anchor).len() == 1
                    }
                    _ => anchors == 0,
                };
                has_constraints
                    && anchor_ok
                    && targets == 0
                    && references == 0
                    && self.duration_s.is_none()
                    && self.duration_change.is_none()
                    && self.share_to.is_none()
            }
            RemoveClips => {
                targets >= 1 && anchors == 0 && references == 0 && !has_constraints && !has_controls
            }
            ReplaceClips => {
                targets >= 1
                    && anchors == 0
                    && references <= 1
                    && (has_constraints || references == 1)
                    && !has_controls
            }
            ReorderClips => {
                let anchor_ok = match self.position {
                    Some(p) if p.needs_anchor() => {
                        anchors == 1 && self.ids_with_role(Role::Anchor).len() == 1
                    }
                    Some(_) => anchors == 0,
                    None => false,
                };
                targets == 1
                    && self.ids_with_role(Role::Target).len() == 1
                    && anchor_ok
                    && references == 0
                    && !has_constraints
                    && self.duration_s.is_none()
                    && self.duration_change.is_none()
                    && self.share_to.is_none()
            }
            ModifyDuration => {
                targets >= 1
                    && anchors == 0
                    && references == 0
                    && !has_constraints
                    && (self.duration_s.is_some() != self.duration_change.is_some())
                    && self.duration_s.is_none_or(|d| d >= 1)
                    && self.position.is_none()
                    && self.share_to.is_none()
            }
            ShareStory => {
                self.share_to.is_some()
                    && self.refs.is_empty()
                    && !has_constraints
                    && self.position.is_none()
                    && self.duration_s.is_none()
                    && self.duration_change.is_none()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(schema(&format!(
                "arguments do not fit the {activity} schema"
            )))
        }
    }
}

fn schema(msg: &str) -> Error {
    Error::Validation(msg.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Entry {
    pub clip_id: String,
    pub effective_duration_s: u32,
}

/// The evolving montage plus UI state.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StoryState {
    pub entries: Vec<Entry>,
    pub viewer_index: Option<usize>,
    #[serde(default)]
    pub last_search: ConstraintSet,
    #[serde(default)]
    pub shared: bool,
}

impl StoryState {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.clip_id.as_str()).collect()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.clip_id == id)
    }

    pub fn viewer_clip(&self) -> Option<&str> {
        self.viewer_index
            .and_then(|i| self.entries.get(i))
            .map(|e| e.clip_id.as_str())
    }

    /// Checks id uniqueness, viewer validity and positive durations.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.clip_id.as_str()) {
                return Err(Error::Consistency(format!(
                    "clip {} appears twice in the story",
                    e.clip_id
                )));
            }
            if e.effective_duration_s < 1 {
                return Err(Error::Consistency(format!(
                    "clip {} has zero duration",
                    e.clip_id
                )));
            }
        }
        match self.viewer_index {
            Some(i) if i >= self.entries.len() => Err(Error::Consistency(format!(
                "viewer index {i} outside story of {}",
                self.entries.len()
            ))),
            None if !self.entries.is_empty() => {
                Err(Error::Consistency("non-empty story without viewer".into()))
            }
            _ => Ok(()),
        }
    }

    /// Orders `ids` by their position in this story; unknown ids go last in input order.
    pub fn sort_by_position(&self, ids: &mut [String]) {
        ids.sort_by_key(|id| self.index_of(id).unwrap_or(usize::MAX));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Ok,
    NoResults,
    InvalidRef,
}

impl Status {
    /// The lowercase form used in assistant frame slots.
    pub fn slot_value(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::NoResults => "no_results",
            Status::InvalidRef => "invalid_ref",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slot_value())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub status: Status,
    #[serde(default)]
    pub added: Vec<String>,
    #[serde(default)]
    pub removed: Vec<String>,
    #[serde(default)]
    pub message_slots: BTreeMap<String, String>,
}

impl ExecutionResult {
    fn status(status: Status) -> Self {
        ExecutionResult {
            status,
            added: Vec::new(),
            removed: Vec::new(),
            message_slots: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Cap on clips placed by CREATE_STORY and REFINE_SEARCH.
    pub max_story_clips: usize,
    /// Cap on clips inserted by one ADD_CLIPS.
    pub max_add_clips: usize,
    /// Relative step for shorter/longer duration edits.
    pub duration_step: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            max_story_clips: 8,
            max_add_clips: 3,
            duration_step: 0.25,
        }
    }
}

/// Activities whose preconditions hold in `state`.
pub fn applicable_activities(state: &StoryState) -> BTreeSet<Activity> {
    let mut out = BTreeSet::new();
    let n = state.entries.len();
    if n == 0 {
        out.insert(Activity::CreateStory);
    } else {
        out.extend([
            Activity::AddClips,
            Activity::RemoveClips,
            Activity::ReplaceClips,
            Activity::ModifyDuration,
            Activity::ShareStory,
        ]);
        if n >= 2 {
            out.insert(Activity::ReorderClips);
        }
    }
    if !state.last_search.is_empty() {
        out.insert(Activity::RefineSearch);
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StoryEngine {
    pub config: EngineConfig,
}

impl StoryEngine {
    pub fn new(config: EngineConfig) -> Self {
        StoryEngine { config }
    }

    /// Applies `call` to `state`. Schema violations and out-of-vocabulary
    /// values are errors; unresolvable references and empty searches are
    /// reported through [`ExecutionResult::status`] with the story untouched.
    pub fn execute(
        &self,
        state: &StoryState,
        call: &ApiCall,
        graph: &MemoryGraph,
    ) -> Result<(StoryState, ExecutionResult)> {
        call.validate_schema()?;
        call.constraints.validate(&graph.vocabulary)?;
        for id in call
            .ids_with_role(Role::Target)
            .into_iter()
            .chain(call.ids_with_role(Role::Anchor))
        {
            if state.index_of(id).is_none() {
                return Ok((state.clone(), ExecutionResult::status(Status::InvalidRef)));
            }
        }

        let mut next = state.clone();
        let mut result = ExecutionResult::status(Status::Ok);
        match call.activity() {
            Activity::CreateStory => {
                next.last_search = call.constraints.clone();
                let hits = search(graph, &call.constraints, &HashSet::new())?;
                if hits.is_empty() {
                    let mut unchanged = state.clone();
                    unchanged.last_search = call.constraints.clone();
                    return Ok((unchanged, ExecutionResult::status(Status::NoResults)));
                }
                next.entries = hits
                    .iter()
                    .take(self.config.max_story_clips)
                    .map(|c| entry(c.id.clone(), c.duration_s))
                    .collect();
                next.viewer_index = Some(0);
                next.shared = false;
                result.added = next.ids().iter().map(|s| s.to_string()).collect();
                result.removed = state.ids().iter().map(|s| s.to_string()).collect();
                let n = result.added.len();
                count_slot(&mut result, n);
            }
            Activity::RefineSearch => {
                let merged = state.last_search.merged_with(&call.constraints);
                let hits = search(graph, &merged, &HashSet::new())?;
                if hits.is_empty() {
                    let mut unchanged = state.clone();
                    unchanged.last_search = merged;
                    return Ok((unchanged, ExecutionResult::status(Status::NoResults)));
                }
                next.last_search = merged;
                next.entries = hits
                    .iter()
                    .take(self.config.max_story_clips)
                    .map(|c| entry(c.id.clone(), c.duration_s))
                    .collect();
                next.viewer_index = Some(0);
                let old: HashSet<&str> = state.ids().into_iter().collect();
                let new: HashSet<&str> = next.ids().into_iter().collect();
                result.added = next
                    .ids()
                    .into_iter()
                    .filter(|id| !old.contains(id))
                    .map(String::from)
                    .collect();
                result.removed = state
                    .ids()
                    .into_iter()
                    .filter(|id| !new.contains(id))
                    .map(String::from)
                    .collect();
                count_slot(&mut result, next.entries.len());
            }
            Activity::AddClips => {
                let exclude: HashSet<&str> = state.ids().into_iter().collect();
                let hits = search(graph, &call.constraints, &exclude)?;
                if hits.is_empty() {
                    return Ok((state.clone(), ExecutionResult::status(Status::NoResults)));
                }
                let at = self.insertion_index(state, call.position.unwrap_or(Position::Last), call);
                let new: Vec<Entry> = hits
                    .iter()
                    .take(self.config.max_add_clips)
                    .map(|c| entry(c.id.clone(), c.duration_s))
                    .collect();
                result.added = new.iter().map(|e| e.clip_id.clone()).collect();
                next.entries.splice(at..at, new);
                next.viewer_index = Some(at);
                let n = result.added.len();
                count_slot(&mut result, n);
            }
            Activity::RemoveClips => {
                let targets: HashSet<&str> = call.ids_with_role(Role::Target).into_iter().collect();
                next.entries
                    .retain(|e| !targets.contains(e.clip_id.as_str()));
                result.removed = state
                    .ids()
                    .into_iter()
                    .filter(|id| targets.contains(id))
                    .map(String::from)
                    .collect();
                next.viewer_index = clamp_viewer(state.viewer_index, next.entries.len());
                let n = result.removed.len();
                count_slot(&mut result, n);
            }
            Activity::ReplaceClips => {
                let targets: HashSet<&str> = call.ids_with_role(Role::Target).into_iter().collect();
                let query = match call.ids_with_role(Role::Reference).first() {
                    Some(reference) => match graph.clip(reference) {
                        Some(clip) => {
                            let mut q = ConstraintSet::default();
                            q.insert(SlotKey::Activity, clip.activity.clone());
                            for a in &clip.attributes {
                                q.insert(SlotKey::Attribute, a.clone());
                            }
                            q
                        }
                        None => {
                            return Ok((state.clone(), ExecutionResult::status(Status::InvalidRef)))
                        }
                    },
                    None => call.constraints.clone(),
                };
                let mut exclude: HashSet<&str> = state.ids().into_iter().collect();
                exclude.extend(call.ids_with_role(Role::Reference));
                let hits = search(graph, &query, &exclude)?;
                if hits.is_empty() {
                    return Ok((state.clone(), ExecutionResult::status(Status::NoResults)));
                }
                let at = state
                    .entries
                    .iter()
                    .position(|e| targets.contains(e.clip_id.as_str()))
                    .expect("targets resolved above");
                result.removed = state
                    .ids()
                    .into_iter()
                    .filter(|id| targets.contains(id))
                    .map(String::from)
                    .collect();
                next.entries
                    .retain(|e| !targets.contains(e.clip_id.as_str()));
                let new: Vec<Entry> = hits
                    .iter()
                    .take(targets.len())
                    .map(|c| entry(c.id.clone(), c.duration_s))
                    .collect();
                result.added = new.iter().map(|e| e.clip_id.clone()).collect();
                next.entries.splice(at..at, new);
                next.viewer_index = Some(at);
            }
            Activity::ReorderClips => {
                let target = call.ids_with_role(Role::Target)[0];
                let position = call.position.expect("schema checked");
                if call.ids_with_role(Role::Anchor).first() == Some(&target) {
                    return Ok((state.clone(), ExecutionResult::status(Status::InvalidRef)));
                }
                let from = state.index_of(target).expect("resolved above");
                let moved = next.entries.remove(from);
                let at = self.insertion_index(&next, position, call);
                next.entries.insert(at, moved);
                next.viewer_index = Some(at);
            }
            Activity::ModifyDuration => {
                let targets: HashSet<&str> = call.ids_with_role(Role::Target).into_iter().collect();
                for e in next
                    .entries
                    .iter_mut()
                    .filter(|e| targets.contains(e.clip_id.as_str()))
                {
                    e.effective_duration_s = match (call.duration_s, call.duration_change) {
                        (Some(d), _) => d.max(1),
                        (None, Some(change)) => self.step_duration(e.effective_duration_s, change),
                        (None, None) => unreachable!("schema checked"),
                    };
                }
                next.viewer_index = next
                    .entries
                    .iter()
                    .position(|e| targets.contains(e.clip_id.as_str()));
            }
            Activity::ShareStory => {
                next.shared = true;
            }
        }
        Ok((next, result))
    }

    /// Index at which to insert relative to `position`, using the call's anchor.
    fn insertion_index(&self, state: &StoryState, position: Position, call: &ApiCall) -> usize {
        let anchor = || {
            let id = call.ids_with_role(Role::Anchor)[0];
            state.index_of(id).expect("anchor resolved")
        };
        match position {
            Position::First => 0,
            Position::Last => state.entries.len(),
            Position::Before => anchor(),
            Position::After => anchor() + 1,
        }
    }

    pub fn step_duration(&self, current: u32, change: DurationChange) -> u32 {
        let delta = ((current as f64 * self.config.duration_step).round() as u32).max(1);
        match change {
            DurationChange::Shorter => current.saturating_sub(delta).max(1),
            DurationChange::Longer => current + delta,
        }
    }
}

fn entry(clip_id: String, duration: u32) -> Entry {
    Entry {
        clip_id,
        effective_duration_s: duration.max(1),
    }
}

fn count_slot(result: &mut ExecutionResult, n: usize) {
    result
        .message_slots
        .insert(SLOT_COUNT.into(), n.to_string());
}

fn clamp_viewer(old: Option<usize>, len: usize) -> Option<usize> {
    if len == 0 {
        None
    } else {
        Some(old.unwrap_or(0).min(len - 1))
    }
}

/// Executes with the default engine configuration.
pub fn execute(
    state: &StoryState,
    call: &ApiCall,
    graph: &MemoryGraph,
) -> Result<(StoryState, ExecutionResult)> {
    StoryEngine::default().execute(state, call, graph)
}

/// The assistant's INFORM frame mirroring the executed call.
pub fn assistant_frame(result: &ExecutionResult, call: &ApiCall) -> Frame {
    let mut frame = Frame::new(Intent::inform(call.activity()));
    frame.slots.insert(SLOT_STATUS, result.status.slot_value());
    if result.status == Status::Ok {
        for (k, v) in &result.message_slots {
            frame.slots.insert(k.clone(), v.clone());
        }
    }
    frame
}

/// Re-executes a call log from the empty story, returning every intermediate state.
pub fn replay<'a>(
    engine: &StoryEngine,
    calls: impl IntoIterator<Item = &'a ApiCall>,
    graph: &MemoryGraph,
) -> Result<Vec<StoryState>> {
    let mut state = StoryState::default();
    let mut out = Vec::new();
    for call in calls {
        state = engine.execute(&state, call, graph)?.0;
        out.push(state.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::three_clip_graph;
    use crate::graph::{generate_collection, GenConfig};

    fn target(ids: &[&str]) -> ClipRef {
        ClipRef::new(
            ids.iter().map(|s| s.to_string()).collect(),
            Role::Target,
            MentionType::Adjectival,
            "",
        )
    }

    fn with_role(id: &str, role: Role) -> ClipRef {
        ClipRef::new(vec![id.to_string()], role, MentionType::Ordinal, "")
    }

    fn story(ids: &[&str]) -> StoryState {
        StoryState {
            entries: ids.iter().map(|id| entry(id.to_string(), 10)).collect(),
            viewer_index: if ids.is_empty() { None } else { Some(0) },
            last_search: ConstraintSet::default(),
            shared: false,
        }
    }

    fn create(activity: &str, time: &str) -> ApiCall {
        let mut call = ApiCall::new(Activity::CreateStory);
        call.constraints.insert(SlotKey::Activity, activity);
        call.constraints.insert(SlotKey::Time, time);
        call
    }

    #[test]
    fn applicable_on_empty_and_small_stories() {
        assert_eq!(
            applicable_activities(&StoryState::default()),
            BTreeSet::from([Activity::CreateStory])
        );
        let mut one = story(&["c1"]);
        one.last_search.insert(SlotKey::Activity, "skiing");
        let acts = applicable_activities(&one);
        assert!(!acts.contains(&Activity::ReorderClips));
        assert!(acts.contains(&Activity::RemoveClips) && acts.contains(&Activity::RefineSearch));
    }

    #[test]
    fn applicable_on_five_entries_matches_guard_enumeration() {
        let mut five = story(&["c1", "c2", "c3", "c4", "c5"]);
        five.last_search.insert(SlotKey::Activity, "skiing");
        // Guards enumerated by hand: every edit activity, but not CREATE.
        let expected: BTreeSet<_> = Activity::ALL
            .into_iter()
            .filter(|a| *a != Activity::CreateStory)
            .collect();
        assert_eq!(applicable_activities(&five), expected);
    }

    #[test]
    fn create_story_from_task_example() {
        let g = three_clip_graph();
        let (s, r) = execute(&StoryState::default(), &create("skiing", "2018"), &g).unwrap();
        assert_eq!(s.ids(), ["c1"]);
        assert_eq!(r.status, Status::Ok);
        assert_eq!(s.viewer_index, Some(0));
        assert_eq!(s.last_search.activity.as_deref(), Some("skiing"));
    }

    #[test]
    fn create_with_no_results_keeps_story_but_records_search() {
        let g = three_clip_graph();
        let (s, r) = execute(&StoryState::default(), &create("surfing", "2017"), &g).unwrap();
        assert_eq!(r.status, Status::NoResults);
        assert!(s.entries.is_empty());
        assert_eq!(s.last_search, create("surfing", "2017").constraints);
    }

    #[test]
    fn reorder_to_first() {
        let g = three_clip_graph();
        let mut call = ApiCall::new(Activity::ReorderClips);
        call.refs.push(target(&["c3"]));
        call.position = Some(Position::First);
        let (s, r) = execute(&story(&["c1", "c2", "c3"]), &call, &g).unwrap();
        assert_eq!(r.status, Status::Ok);
        assert_eq!(s.ids(), ["c3", "c1", "c2"]);
        assert_eq!(s.viewer_index, Some(0));
    }

    #[test]
    fn reorder_relative_to_anchor() {
        let g = generate_collection(&GenConfig::new(10, 3)).unwrap();
        let mut call = ApiCall::new(Activity::ReorderClips);
        call.refs.push(target(&["c1"]));
        call.refs.push(with_role("c4", Role::Anchor));
        call.position = Some(Position::After);
        let (s, _) = execute(&story(&["c1", "c2", "c3", "c4", "c5"]), &call, &g).unwrap();
        assert_eq!(s.ids(), ["c2", "c3", "c4", "c1", "c5"]);
        call.position = Some(Position::Before);
        let (s, _) = execute(&story(&["c1", "c2", "c3", "c4", "c5"]), &call, &g).unwrap();
        assert_eq!(s.ids(), ["c2", "c3", "c1", "c4", "c5"]);
    }

    #[test]
    fn replace_with_reference_uses_first_similar_hit() {
        let g = generate_collection(&GenConfig::new(300, 9)).unwrap();
        let mut st = StoryState::default();
        // Pick a story of two clips whose reference query has hits elsewhere.
        let (a, b) = g
            .clips
            .iter()
            .flat_map(|a| g.clips.iter().map(move |b| (a, b)))
            .find(|(a, b)| {
                a.id != b.id
                    && g.clips.iter().any(|c| {
                        c.id != a.id
                            && c.id != b.id
                            && c.activity == b.activity
                            && b.attributes.is_subset(&c.attributes)
                    })
            })
            .unwrap();
        st.entries = vec![
            entry(a.id.clone(), a.duration_s),
            entry(b.id.clone(), b.duration_s),
        ];
        st.viewer_index = Some(1);
        let mut call = ApiCall::new(Activity::ReplaceClips);
        call.refs.push(target(&[&a.id]));
        call.refs.push(with_role(&b.id, Role::Reference));
        let (s, r) = execute(&st, &call, &g).unwrap();
        // Brute-force oracle: first clip in graph order with b's activity and all of b's attributes.
        let expected = g
            .clips
            .iter()
            .find(|c| {
                c.id != a.id
                    && c.id != b.id
                    && c.activity == b.activity
                    && b.attributes.iter().all(|x| c.attributes.contains(x))
            })
            .unwrap();
        assert_eq!(r.status, Status::Ok);
        assert_eq!(s.ids(), [expected.id.as_str(), b.id.as_str()]);
        assert_eq!(r.removed, vec![a.id.clone()]);
    }

    #[test]
    fn remove_and_invalid_refs() {
        let g = three_clip_graph();
        let mut call = ApiCall::new(Activity::RemoveClips);
        call.refs.push(target(&["c2"]));
        let mut st = story(&["c1", "c2", "c3"]);
        st.viewer_index = Some(2);
        let (s, r) = execute(&st, &call, &g).unwrap();
        assert_eq!(s.ids(), ["c1", "c3"]);
        assert_eq!(s.viewer_index, Some(1));
        assert_eq!(r.removed, ["c2"]);
        let (s2, r2) = execute(&s, &call, &g).unwrap();
        assert_eq!(r2.status, Status::InvalidRef);
        assert_eq!(s2, s);
    }

    #[test]
    fn remove_last_clip_clears_viewer() {
        let g = three_clip_graph();
        let mut call = ApiCall::new(Activity::RemoveClips);
        call.refs.push(target(&["c1"]));
        let (s, _) = execute(&story(&["c1"]), &call, &g).unwrap();
        assert!(s.entries.is_empty());
        assert_eq!(s.viewer_index, None);
        s.validate().unwrap();
    }

    #[test]
    fn add_excludes_existing_and_respects_position() {
        let g = three_clip_graph();
        let mut call = ApiCall::new(Activity::AddClips);
        call.constraints.insert(SlotKey::Attribute, "sunset");
        call.position = Some(Position::First);
        let (s, r) = execute(&story(&["c2"]), &call, &g).unwrap();
        assert_eq!(r.added, ["c3"]);
        assert_eq!(s.ids(), ["c3", "c2"]);
        let (_, r) = execute(&story(&["c2", "c3"]), &call, &g).unwrap();
        assert_eq!(r.status, Status::NoResults);
    }

    #[test]
    fn refine_overrides_and_carries_over() {
        let g = three_clip_graph();
        let (s, _) = execute(&StoryState::default(), &create("skiing", "2018"), &g).unwrap();
        let mut refine = ApiCall::new(Activity::RefineSearch);
        refine.constraints.insert(SlotKey::Time, "2017");
        let (s, r) = execute(&s, &refine, &g).unwrap();
        assert_eq!(r.status, Status::Ok);
        assert_eq!(s.ids(), ["c2"]);
        assert_eq!(s.last_search.activity.as_deref(), Some("skiing"));
        assert_eq!(s.last_search.time.as_deref(), Some("2017"));
    }

    #[test]
    fn duration_steps_and_floor() {
        let e = StoryEngine::default();
        assert_eq!(e.step_duration(20, DurationChange::Shorter), 15);
        assert_eq!(e.step_duration(20, DurationChange::Longer), 25);
        assert_eq!(e.step_duration(1, DurationChange::Shorter), 1);
        assert_eq!(e.step_duration(2, DurationChange::Shorter), 1);
        assert_eq!(e.step_duration(3, DurationChange::Longer), 4);
    }

    #[test]
    fn schema_violations_are_errors() {
        let g = three_clip_graph();
        let mut call = ApiCall::new(Activity::RemoveClips);
        assert!(execute(&story(&["c1"]), &call, &g).is_err());
        call = ApiCall::new(Activity::ReorderClips);
        call.refs.push(target(&["c1"]));
        assert!(call.validate_schema().is_err(), "reorder needs a position");
        call.position = Some(Position::Before);
        assert!(call.validate_schema().is_err(), "before needs an anchor");
        call = ApiCall::new(Activity::ModifyDuration);
        call.refs.push(target(&["c1"]));
        call.duration_s = Some(5);
        call.duration_change = Some(DurationChange::Longer);
        assert!(
            call.validate_schema().is_err(),
            "exactly one duration argument"
        );
    }

    #[test]
    fn assistant_frames_mirror_results() {
        let call = create("skiing", "2018");
        let mut r = ExecutionResult::status(Status::Ok);
        r.added = vec!["c1".into(), "c2".into(), "c3".into()];
        count_slot(&mut r, 3);
        let f = assistant_frame(&r, &call);
        assert_eq!(f.intent(), Intent::inform(Activity::CreateStory));
        assert_eq!(
            f.slots,
            SlotMap::from_iter([("status", "ok"), ("count", "3")])
        );
        assert!(f.refs.is_empty());

        let f = assistant_frame(&ExecutionResult::status(Status::NoResults), &call);
        assert_eq!(f.slots, SlotMap::from_iter([("status", "no_results")]));

        let mut remove = ApiCall::new(Activity::RemoveClips);
        remove.refs.push(target(&["c1", "c2"]));
        let (_, r) = execute(&story(&["c1", "c2", "c3"]), &remove, &three_clip_graph()).unwrap();
        let f = assistant_frame(&r, &remove);
        assert_eq!(
            f.to_owned().slots,
            SlotMap::from_iter([("status", "ok"), ("count", "2")])
        );
    }

    #[test]
    fn frame_round_trips_through_api_call() {
        let mut call = ApiCall::new(Activity::AddClips);
        call.constraints.insert(SlotKey::Object, "dog");
        call.constraints.insert(SlotKey::Object, "kite");
        call.position = Some(Position::After);
        call.refs.push(with_role("c2", Role::Anchor));
        let back = ApiCall::from_frame(&call.to_frame()).unwrap();
        assert_eq!(back, call);
    }
}
