//! Annotated dialogs and their JSONL persistence.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{Act, Frame};
use crate::graph::MemoryGraph;
use crate::story::{ApiCall, ExecutionResult, StoryEngine, StoryState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Speaker {
    User,
    Assistant,
}

impl Speaker {
    pub fn tag(self) -> &'static str {
        match self {
            Speaker::User => "U",
            Speaker::Assistant => "A",
        }
    }
}

/// One utterance with its annotations.
///
/// For user turns `story_snapshot` is the story the user is looking at when
/// speaking; for assistant turns it is the story after execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub turn_id: u32,
    pub speaker: Speaker,
    pub template_utterance: String,
    #[serde(default)]
    pub paraphrase: String,
    pub frame: Frame,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_call: Option<ApiCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub execution_result: Option<ExecutionResult>,
    pub story_snapshot: StoryState,
}

impl Turn {
    /// The paraphrase when one was collected, else the template utterance.
    pub fn text(&self) -> &str {
        if self.paraphrase.trim().is_empty() {
            &self.template_utterance
        } else {
            &self.paraphrase
        }
    }

    pub fn is_user(&self) -> bool {
        self.speaker == Speaker::User
    }

    /// Clips this utterance brings up: gold refs for user turns, additions
    /// for assistant turns.
    pub fn mentioned_clips(&self) -> Vec<&str> {
        match self.speaker {
            Speaker::User => self
                .frame
                .refs
                .iter()
                .flat_map(|r| r.clip_ids.iter().map(String::as_str))
                .collect(),
            Speaker::Assistant => self
                .execution_result
                .as_ref()
                .map(|r| r.added.iter().map(String::as_str).collect())
                .unwrap_or_default(),
        }
    }
}

/// Index of the latest utterance in `history` mentioning each clip.
pub fn last_mentions(history: &[Turn]) -> HashMap<&str, usize> {
    let mut out = HashMap::new();
    for (i, t) in history.iter().enumerate() {
        for id in t.mentioned_clips() {
            out.insert(id, i);
        }
    }
    out
}

/// Story clips last mentioned at least two utterances before the next one,
/// most recent first; ties keep snapshot order.
pub fn carryover_candidates<'a>(history: &'a [Turn], snapshot: &'a StoryState) -> Vec<&'a str> {
    let last = last_mentions(history);
    let next = history.len();
    let mut out: Vec<(usize, usize, &str)> = snapshot
        .entries
        .iter()
        .enumerate()
        .filter_map(|(pos, e)| {
            let at = *last.get(e.clip_id.as_str())?;
            (next - at >= 2).then_some((at, pos, e.clip_id.as_str()))
        })
        .collect();
    out.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    out.into_iter().map(|(_, _, id)| id).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dialog {
    pub dialog_id: String,
    pub graph_id: String,
    pub turns: Vec<Turn>,
}

impl Dialog {
    pub fn user_turns(&self) -> impl Iterator<Item = &Turn> {
        self.turns.iter().filter(|t| t.is_user())
    }

    /// Structural checks: alternation, acts per speaker, call/result placement.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| {
            Err(Error::Validation(format!(
                "dialog {}: {msg}",
                self.dialog_id
            )))
        };
        if self.turns.is_empty() {
            return fail("no turns".into());
        }
        for (i, t) in self.turns.iter().enumerate() {
            let expected = if i % 2 == 0 {
                Speaker::User
            } else {
                Speaker::Assistant
            };
            if t.speaker != expected {
                return fail(format!(
                    "turn {} should be spoken by {expected:?}",
                    t.turn_id
                ));
            }
            if t.turn_id as usize != i + 1 {
                return fail(format!(
                    "turn ids must be 1..n, found {} at position {}",
                    t.turn_id,
                    i + 1
                ));
            }
            match t.speaker {
                Speaker::User => {
                    if t.frame.act != Act::Request || t.api_call.is_none() {
                        return fail(format!(
                            "user turn {} needs a REQUEST frame and an api_call",
                            t.turn_id
                        ));
                    }
                }
                Speaker::Assistant => {
                    if t.frame.act != Act::Inform || t.execution_result.is_none() {
                        return fail(format!(
                            "assistant turn {} needs an INFORM frame and an execution_result",
                            t.turn_id
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Re-executes the call log from the empty story and compares every snapshot.
    pub fn check_replay(&self, engine: &StoryEngine, graph: &MemoryGraph) -> Result<()> {
        let mut state = StoryState::default();
        for t in &self.turns {
            match t.speaker {
                Speaker::User => {
                    if t.story_snapshot != state {
                        return Err(Error::Consistency(format!(
                            "dialog {} turn {}: user snapshot differs from replay",
                            self.dialog_id, t.turn_id
                        )));
                    }
                    let call = t.api_call.as_ref().ok_or_else(|| {
                        Error::Consistency(format!(
                            "dialog {} turn {}: missing api_call",
                            self.dialog_id, t.turn_id
                        ))
                    })?;
                    state = engine.execute(&state, call, graph)?.0;
                }
                Speaker::Assistant => {
                    if t.story_snapshot != state {
                        return Err(Error::Consistency(format!(
                            "dialog {} turn {}: assistant snapshot differs from replay",
                            self.dialog_id, t.turn_id
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Parses one JSONL document of dialogs. `index` in errors is the 0-based record number.
pub fn parse_dialogs(text: &str) -> Result<Vec<Dialog>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(index, line)| {
            parse_dialog_line(line).map_err(|message| Error::Record { index, message })
        })
        .collect()
}

pub fn parse_dialog_line(line: &str) -> std::result::Result<Dialog, String> {
    let dialog: Dialog = serde_json::from_str(line).map_err(|e| e.to_string())?;
    dialog.validate().map_err(|e| e.to_string())?;
    Ok(dialog)
}

pub fn read_dialogs(path: &Path) -> Result<Vec<Dialog>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (index, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_dialog_line(&line).map_err(|message| Error::Record { index, message })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, &item).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_graphs(path: &Path) -> Result<Vec<MemoryGraph>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(index, line)| {
            MemoryGraph::from_json(line).map_err(|e| Error::Record {
                index,
                message: e.to_string(),
            })
        })
        .collect()
}
