//! Linearized frame codec, token-mode prompts and cumulative dialog state.
//!
//! Canonical linear form:
//!
//! ```text
//! ACT:ACTIVITY [ k1 = v1, k2 = v2 ] < clip: idA, idB >
//! ```
//!
//! Slot keys are sorted, multi-valued slots repeat their key, and clip ids
//! appear TARGET first, then ANCHOR, then REFERENCE. Roles do not survive
//! the flat `< clip: ... >` list, so parsing yields a single
//! [`Role::Unspecified`] reference.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialog::{Speaker, Turn};
use crate::error::{Error, Result};
use crate::frame::{Act, Activity, ClipRef, Frame, Intent, Role, SlotMap};
use crate::graph::{MemoryGraph, SlotKey};
use crate::story::StoryState;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("parse error at byte {offset}: expected {expected}, found {found}")]
    Syntax {
        offset: usize,
        expected: String,
        found: String,
    },
    #[error("unknown act `{token}` at byte {offset}")]
    UnknownAct { offset: usize, token: String },
    #[error("unknown activity `{token}` at byte {offset}")]
    UnknownActivity { offset: usize, token: String },
}

impl FrameError {
    pub fn offset(&self) -> usize {
        match self {
            FrameError::Syntax { offset, .. }
            | FrameError::UnknownAct { offset, .. }
            | FrameError::UnknownActivity { offset, .. } => *offset,
        }
    }

    pub fn is_vocabulary(&self) -> bool {
        !matches!(self, FrameError::Syntax { .. })
    }
}

const ROLE_ORDER: [Role; 4] = [
    Role::Target,
    Role::Anchor,
    Role::Reference,
    Role::Unspecified,
];

/// Clip ids in serialization order: grouped by role, each group ordered by
/// `snapshot` position when given (stored order otherwise), de-duplicated.
pub fn ordered_clip_ids(frame: &Frame, snapshot: Option<&StoryState>) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for role in ROLE_ORDER {
        let mut group: Vec<String> = frame
            .refs
            .iter()
            .filter(|r| r.role == role)
            .flat_map(|r| r.clip_ids.iter().cloned())
            .collect();
        if let Some(s) = snapshot {
            s.sort_by_position(&mut group);
        }
        for id in group {
            if seen.insert(id.clone()) {
                out.push(id);
            }
        }
    }
    out
}

pub fn serialize_frame(frame: &Frame) -> String {
    serialize_frame_with(frame, None)
}

/// Canonical linear form, ordering clip ids within a role by `snapshot`.
pub fn serialize_frame_with(frame: &Frame, snapshot: Option<&StoryState>) -> String {
    let mut out = format!("{}:{} [", frame.act, frame.activity);
    let pairs: Vec<String> = frame
        .slots
        .pairs()
        .map(|(k, v)| format!("{k} = {v}"))
        .collect();
    if pairs.is_empty() {
        out.push_str(" ]");
    } else {
        let _ = write!(out, " {} ]", pairs.join(", "));
    }
    let ids = ordered_clip_ids(frame, snapshot);
    if ids.is_empty() {
        out.push_str(" < >");
    } else {
        let _ = write!(out, " < clip: {} >", ids.join(", "));
    }
    out
}

/// What survives a trip through the linear form.
pub fn flatten_roles(frame: &Frame, snapshot: Option<&StoryState>) -> Frame {
    let ids = ordered_clip_ids(frame, snapshot);
    Frame {
        act: frame.act,
        activity: frame.activity,
        slots: frame.slots.clone(),
        refs: if ids.is_empty() {
            Vec::new()
        } else {
            vec![ClipRef {
                clip_ids: ids,
                role: Role::Unspecified,
                mention_type: None,
                mention_text: String::new(),
            }]
        },
    }
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.text.len() - trimmed.len();
    }

    fn found(&self) -> String {
        match self.rest().chars().next() {
            None => "end of input".into(),
            Some(c) => format!("`{c}`"),
        }
    }

    fn error(&self, expected: &str) -> FrameError {
        FrameError::Syntax {
            offset: self.pos,
            expected: expected.into(),
            found: self.found(),
        }
    }

    fn expect(&mut self, token: &str) -> Result<(), FrameError> {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            Ok(())
        } else {
            Err(self.error(&format!("`{token}`")))
        }
    }

    fn peek_is(&mut self, token: &str) -> bool {
        self.skip_ws();
        self.rest().starts_with(token)
    }

    /// Consumes a run of characters satisfying `pred`; returns `(start, text)`.
    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> (usize, &'a str) {
        let start = self.pos;
        let len = self
            .rest()
            .find(|c: char| !pred(c))
            .unwrap_or(self.rest().len());
        self.pos += len;
        (start, &self.text[start..self.pos])
    }
}

fn is_upper_token(c: char) -> bool {
    c.is_ascii_uppercase() || c == '_'
}

fn is_key_char(c: char) -> bool {
    c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_'
}

fn is_value_char(c: char) -> bool {
    !matches!(c, ',' | '[' | ']' | '<' | '>' | '=' | ';' | ':' | '"') && !c.is_control()
}

fn is_id_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.')
}

/// Parses the linear form. Accepts arbitrary whitespace between tokens.
pub fn parse_frame(text: &str) -> Result<Frame, FrameError> {
    let mut cur = Cursor { text, pos: 0 };
    cur.skip_ws();

    let (start, act_tok) = cur.take_while(is_upper_token);
    if act_tok.is_empty() {
        return Err(cur.error("dialog act"));
    }
    let act: Act = act_tok.parse().map_err(|_| FrameError::UnknownAct {
        offset: start,
        token: act_tok.into(),
    })?;
    if !cur.rest().starts_with(':') {
        return Err(cur.error("`:`"));
    }
    cur.pos += 1;
    let (start, activity_tok) = cur.take_while(is_upper_token);
    if activity_tok.is_empty() {
        return Err(cur.error("activity"));
    }
    let activity: Activity = activity_tok
        .parse()
        .map_err(|_| FrameError::UnknownActivity {
            offset: start,
            token: activity_tok.into(),
        })?;

    let mut frame = Frame::new(Intent { act, activity });

    cur.expect("[")?;
    if !cur.peek_is("]") {
        loop {
            cur.skip_ws();
            let (_, key) = cur.take_while(is_key_char);
            if key.is_empty() {
                return Err(cur.error("slot key"));
            }
            cur.expect("=")?;
            cur.skip_ws();
            let (_, raw) = cur.take_while(is_value_char);
            let value = raw.trim_end();
            if value.is_empty() {
                return Err(cur.error("slot value"));
            }
            frame.slots.insert(key, value);
            if cur.peek_is(",") {
                cur.pos += 1;
                continue;
            }
            break;
        }
    }
    cur.expect("]")?;

    cur.expect("<")?;
    if !cur.peek_is(">") {
        cur.expect("clip")?;
        cur.expect(":")?;
        let mut ids: Vec<String> = Vec::new();
        loop {
            cur.skip_ws();
            let (_, id) = cur.take_while(is_id_char);
            if id.is_empty() {
                return Err(cur.error("clip id"));
            }
            if !ids.iter().any(|x| x == id) {
                ids.push(id.to_string());
            }
            if cur.peek_is(",") {
                cur.pos += 1;
                continue;
            }
            break;
        }
        frame.refs.push(ClipRef {
            clip_ids: ids,
            role: Role::Unspecified,
            mention_type: None,
            mention_text: String::new(),
        });
    }
    cur.expect(">")?;
    cur.skip_ws();
    if !cur.rest().is_empty() {
        return Err(cur.error("end of input"));
    }
    Ok(frame)
}

/// Context representation mode. Only token mode builds prompts; `Embed`
/// exists so externally produced prediction files can declare it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextMode {
    #[default]
    Tokens,
    Embed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptConfig {
    pub history_turns: usize,
    pub include_context: bool,
    #[serde(default)]
    pub mode: ContextMode,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            history_turns: 6,
            include_context: true,
            mode: ContextMode::Tokens,
        }
    }
}

fn clip_tokens(graph: &MemoryGraph, id: &str, duration: u32) -> Result<String> {
    let clip = graph
        .clip(id)
        .ok_or_else(|| Error::Consistency(format!("snapshot references unknown clip {id}")))?;
    let mut pairs = vec![
        format!("activity = {}", clip.activity),
        format!("time = {}", clip.time),
        format!("location = {}", clip.location),
    ];
    for (name, values) in [
        ("objects", &clip.objects),
        ("participants", &clip.participants),
        ("attributes", &clip.attributes),
    ] {
        pairs.extend(values.iter().map(|v| format!("{name} = {v}")));
    }
    pairs.push(format!("duration = {duration}"));
    Ok(format!("clip {id} : {}", pairs.join(" , ")))
}

/// Token-mode prompt: story context followed by the last turns of history.
pub fn build_prompt(
    history: &[Turn],
    snapshot: &StoryState,
    graph: &MemoryGraph,
    cfg: &PromptConfig,
) -> Result<String> {
    if cfg.history_turns == 0 {
        return Err(Error::config("history_turns", "must be at least 1"));
    }
    if cfg.mode != ContextMode::Tokens {
        return Err(Error::config(
            "mode",
            "only token mode prompts can be built",
        ));
    }
    let last = history
        .last()
        .ok_or_else(|| Error::Validation("prompt history is empty".into()))?;
    if last.speaker != Speaker::User {
        return Err(Error::Validation(
            "the last history turn must be a user turn".into(),
        ));
    }

    let mut parts: Vec<String> = Vec::new();
    if cfg.include_context {
        parts.push("<context>".into());
        let mut segments = Vec::new();
        for e in &snapshot.entries {
            segments.push(clip_tokens(graph, &e.clip_id, e.effective_duration_s)?);
        }
        if !segments.is_empty() {
            parts.push(segments.join(" ; "));
        }
        let viewer = snapshot.viewer_clip().unwrap_or("none");
        parts.push(format!("; viewer = {viewer}"));
    }
    parts.push("<history>".into());
    let start = history.len().saturating_sub(cfg.history_turns);
    for t in &history[start..] {
        parts.push(format!("{}: {}", t.speaker.tag(), t.text()));
    }
    Ok(parts.join(" "))
}

/// Cumulative dialog state after a sequence of user frames.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogState {
    pub slots: SlotMap,
    pub clip_ids: BTreeSet<String>,
    pub intent: Option<Intent>,
}

impl DialogState {
    /// Folds one user frame into the state.
    pub fn step(&mut self, frame: &Frame) {
        if frame.activity.is_search() {
            let mut constraints = SlotMap::new();
            for (k, v) in frame.slots.pairs() {
                if k.parse::<SlotKey>().is_ok() {
                    constraints.insert(k, v);
                }
            }
            self.slots.merge_override(&constraints);
        }
        self.clip_ids = frame.clip_id_set();
        self.intent = Some(frame.intent());
    }

    pub fn fold<'a>(frames: impl IntoIterator<Item = &'a Frame>) -> DialogState {
        let mut state = DialogState::default();
        for f in frames {
            state.step(f);
        }
        state
    }
}

/// State after the user turns among `turns` (assistant turns are skipped).
pub fn cumulative_state(turns: &[Turn]) -> DialogState {
    DialogState::fold(turns.iter().filter(|t| t.is_user()).map(|t| &t.frame))
}

/// One line of an external model's prediction file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub dialog_id: String,
    pub turn_id: u32,
    pub linear_frame: String,
}

/// Parses one prediction line. The linear frame itself is not parsed here;
/// scoring counts unparseable frames as empty predictions.
pub fn parse_prediction_line(line: &str) -> Result<PredictionRecord, String> {
    serde_json::from_str(line).map_err(|e| e.to_string())
}

/// Parses a prediction JSONL document; blank lines are skipped.
pub fn parse_predictions(text: &str) -> Result<Vec<PredictionRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(index, line)| {
            parse_prediction_line(line).map_err(|message| Error::Record { index, message })
        })
        .collect()
}

pub fn read_predictions(path: &std::path::Path) -> Result<Vec<PredictionRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_predictions(&text)
}
