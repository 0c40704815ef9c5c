//! Interactive sessions: text in, executed story out, with a replayable log.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dialog::{Speaker, Turn};
use crate::dst::serialize_frame;
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::graph::MemoryGraph;
use crate::lexicon::Lexicon;
use crate::nlg::realize;
use crate::nlu::{parse_utterance, resolve_mentions, MentionSpan, ParseOutcome};
use crate::sim::derive_seed;
use crate::story::{
    assistant_frame, replay, ApiCall, ExecutionResult, Status, StoryEngine, StoryState,
};

const FALLBACK_CLARIFICATION: &str = "Sorry, I did not understand that, could you rephrase it?";

/// Outcome of one message as seen by the client.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseStatus {
    Ok,
    NoResults,
    InvalidRef,
    Unparseable,
}

impl From<Status> for ResponseStatus {
    fn from(s: Status) -> Self {
        match s {
            Status::Ok => ResponseStatus::Ok,
            Status::NoResults => ResponseStatus::NoResults,
            Status::InvalidRef => ResponseStatus::InvalidRef,
        }
    }
}

/// Parser output kept for the turn inspector.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Annotations {
    pub normalized: String,
    pub spans: Vec<MentionSpan>,
    /// Clip ids per span, parallel to `spans`.
    pub resolved: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assistant_frame: Option<Frame>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssistantResponse {
    pub utterance: String,
    pub status: ResponseStatus,
    /// The user-side parse with resolved clips.
    pub frame: Option<Frame>,
    pub linear_frame: Option<String>,
    pub api_call: Option<ApiCall>,
    pub execution_result: Option<ExecutionResult>,
    pub story_snapshot: StoryState,
    pub annotations: Annotations,
}

/// One line of a session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Created {
        session_id: String,
        graph_id: String,
        created_at: u64,
        config_digest: String,
    },
    Message {
        text: String,
        response: Box<AssistantResponse>,
        /// The annotated turns appended to history; empty for clarifications.
        turns: Vec<Turn>,
    },
    Deleted,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub session_id: String,
    pub graph: Arc<MemoryGraph>,
    pub story: StoryState,
    pub history: Vec<Turn>,
    pub created_at: u64,
    pub config_digest: String,
    /// Messages handled so far, clarifications included; seeds response wording.
    pub n_messages: u64,
}

/// Digest of everything that shapes a session's behavior.
pub fn config_digest(engine: &StoryEngine, lexicon: &Lexicon) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(&engine.config).expect("engine config serializes"));
    h.update(serde_json::to_vec(&lexicon.data).expect("lexicon serializes"));
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl Session {
    pub fn new(
        session_id: impl Into<String>,
        graph: Arc<MemoryGraph>,
        created_at: u64,
        config_digest: String,
    ) -> Self {
        Session {
            session_id: session_id.into(),
            graph,
            story: StoryState::default(),
            history: Vec::new(),
            created_at,
            config_digest,
            n_messages: 0,
        }
    }

    pub fn created_event(&self) -> SessionEvent {
        SessionEvent::Created {
            session_id: self.session_id.clone(),
            graph_id: self.graph.graph_id.clone(),
            created_at: self.created_at,
            config_digest: self.config_digest.clone(),
        }
    }

    /// The executed API calls in order.
    pub fn api_calls(&self) -> impl Iterator<Item = &ApiCall> {
        self.history.iter().filter_map(|t| t.api_call.as_ref())
    }

    /// Re-executes the call log from the empty story.
    pub fn replay(&self, engine: &StoryEngine) -> Result<StoryState> {
        Ok(replay(engine, self.api_calls(), &self.graph)?
            .pop()
            .unwrap_or_default())
    }

    /// Runs one user message through parse, resolve, execute and realize.
    /// Returns the response and the log event to persist.
    pub fn handle_message(
        &mut self,
        text: &str,
        engine: &StoryEngine,
        lexicon: &Lexicon,
    ) -> Result<(AssistantResponse, SessionEvent)> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.n_messages, 0, &self.session_id));
        self.n_messages += 1;
        let normalized = crate::nlu::normalize(text);

        let partial = match parse_utterance(text, lexicon) {
            ParseOutcome::Parsed(p) => p,
            ParseOutcome::Unparseable { .. } => {
                return Ok(self.clarify(
                    text,
                    lexicon,
                    &mut rng,
                    Annotations {
                        normalized,
                        ..Default::default()
                    },
                ));
            }
        };
        let resolved = resolve_mentions(&partial.spans, &self.history, &self.story, &self.graph);
        let frame = partial.to_frame(&resolved);
        let mut annotations = Annotations {
            normalized,
            spans: partial.spans.clone(),
            resolved: resolved.clone(),
            assistant_frame: None,
        };

        let unresolved = resolved.iter().any(Vec::is_empty);
        let (call, next, result) = if unresolved {
            (None, self.story.clone(), invalid_ref())
        } else {
            let Ok(call) = ApiCall::from_frame(&frame) else {
                return Ok(self.clarify(text, lexicon, &mut rng, annotations));
            };
            match engine.execute(&self.story, &call, &self.graph) {
                Ok((next, result)) => (Some(call), next, result),
                Err(e) if e.is_validation() => {
                    return Ok(self.clarify(text, lexicon, &mut rng, annotations))
                }
                Err(e) => return Err(e),
            }
        };

        let reply_call = call.clone().unwrap_or_else(|| ApiCall::new(frame.activity));
        let reply = assistant_frame(&result, &reply_call);
        let utterance = realize(&reply, lexicon, &mut rng)?;
        annotations.assistant_frame = Some(reply.clone());

        let user_turn = Turn {
            turn_id: self.history.len() as u32 + 1,
            speaker: Speaker::User,
            template_utterance: text.to_string(),
            paraphrase: String::new(),
            frame: frame.clone(),
            api_call: call.clone(),
            execution_result: None,
            story_snapshot: self.story.clone(),
        };
        let assistant_turn = Turn {
            turn_id: self.history.len() as u32 + 2,
            speaker: Speaker::Assistant,
            template_utterance: utterance.clone(),
            paraphrase: String::new(),
            frame: reply,
            api_call: None,
            execution_result: Some(result.clone()),
            story_snapshot: next.clone(),
        };
        self.history.push(user_turn.clone());
        self.history.push(assistant_turn.clone());
        self.story = next;

        let response = AssistantResponse {
            utterance,
            status: result.status.into(),
            linear_frame: Some(serialize_frame(&frame)),
            frame: Some(frame),
            api_call: call,
            execution_result: Some(result),
            story_snapshot: self.story.clone(),
            annotations,
        };
        let event = SessionEvent::Message {
            text: text.to_string(),
            response: Box::new(response.clone()),
            turns: vec![user_turn, assistant_turn],
        };
        Ok((response, event))
    }

    fn clarify(
        &self,
        text: &str,
        lexicon: &Lexicon,
        rng: &mut ChaCha8Rng,
        annotations: Annotations,
    ) -> (AssistantResponse, SessionEvent) {
        let utterance = lexicon
            .data
            .clarifications
            .choose(rng)
            .cloned()
            .unwrap_or_else(|| FALLBACK_CLARIFICATION.to_string());
        let response = AssistantResponse {
            utterance,
            status: ResponseStatus::Unparseable,
            frame: None,
            linear_frame: None,
            api_call: None,
            execution_result: None,
            story_snapshot: self.story.clone(),
            annotations,
        };
        let event = SessionEvent::Message {
            text: text.to_string(),
            response: Box::new(response.clone()),
            turns: Vec::new(),
        };
        (response, event)
    }

    /// Rebuilds a session from its log and checks that replaying the
    /// recorded calls reproduces every recorded snapshot.
    pub fn restore(
        events: &[SessionEvent],
        graph: Arc<MemoryGraph>,
        engine: &StoryEngine,
    ) -> Result<Self> {
        let Some(SessionEvent::Created {
            session_id,
            graph_id,
            created_at,
            config_digest,
        }) = events.first()
        else {
            return Err(Error::Input(
                "session log must start with a created event".into(),
            ));
        };
        if *graph_id != graph.graph_id {
            return Err(Error::Input(format!(
                "session log refers to graph {graph_id}, got {}",
                graph.graph_id
            )));
        }
        let mut session = Session::new(
            session_id.clone(),
            graph,
            *created_at,
            config_digest.clone(),
        );
        for event in &events[1..] {
            match event {
                SessionEvent::Message { turns, .. } => {
                    session.n_messages += 1;
                    for t in turns {
                        let before = session.story.clone();
                        if let Some(call) = &t.api_call {
                            session.story = engine.execute(&session.story, call, &session.graph)?.0;
                        }
                        let expected = if t.speaker == Speaker::User {
                            &before
                        } else {
                            &session.story
                        };
                        if t.story_snapshot != *expected {
                            return Err(Error::Consistency(format!(
                                "session {} turn {}: logged snapshot differs from replay",
                                session.session_id, t.turn_id
                            )));
                        }
                        session.history.push(t.clone());
                    }
                }
                SessionEvent::Deleted => {
                    return Err(Error::Input(format!(
                        "session {} was deleted",
                        session.session_id
                    )));
                }
                SessionEvent::Created { .. } => {
                    return Err(Error::Input(
                        "duplicate created event in session log".into(),
                    ));
                }
            }
        }
        Ok(session)
    }
}

fn invalid_ref() -> ExecutionResult {
    ExecutionResult {
        status: Status::InvalidRef,
        added: Vec::new(),
        removed: Vec::new(),
        message_slots: Default::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Activity;
    use crate::graph::{generate_collection, GenConfig};

    fn fresh() -> (Session, StoryEngine, Lexicon) {
        let graph = Arc::new(generate_collection(&GenConfig::new(80, 3)).unwrap());
        let engine = StoryEngine::default();
        let lexicon = Lexicon::default();
        let digest = config_digest(&engine, &lexicon);
        (Session::new("s1", graph, 0, digest), engine, lexicon)
    }

    #[test]
    fn create_then_edit_follows_the_engine() {
        let (mut s, engine, lex) = fresh();
        let activity = s.graph.clips[0].activity.clone();
        let (r, _) = s
            .handle_message(
                &format!("Create a story of all {activity} trips"),
                &engine,
                &lex,
            )
            .unwrap();
        assert_eq!(r.status, ResponseStatus::Ok, "{}", r.utterance);
        assert_eq!(r.frame.as_ref().unwrap().activity, Activity::CreateStory);
        assert!(!r.story_snapshot.is_empty());
        assert!(r.story_snapshot.entries.iter().all(|e| s
            .graph
            .clip(&e.clip_id)
            .unwrap()
            .activity
            == activity));

        let n = r.story_snapshot.len();
        let (r, _) = s
            .handle_message("Remove the first clip", &engine, &lex)
            .unwrap();
        assert_eq!(r.status, ResponseStatus::Ok, "{}", r.utterance);
        assert_eq!(r.story_snapshot.len(), n - 1);
        assert_eq!(s.replay(&engine).unwrap(), s.story);
        assert_eq!(s.history.len(), 4);
    }

    #[test]
    fn gibberish_gets_a_clarification() {
        let (mut s, engine, lex) = fresh();
        let (r, event) = s.handle_message("blorp the wug", &engine, &lex).unwrap();
        assert_eq!(r.status, ResponseStatus::Unparseable);
        assert!(r.story_snapshot.is_empty());
        assert!(s.history.is_empty());
        assert!(matches!(event, SessionEvent::Message { turns, .. } if turns.is_empty()));
    }

    #[test]
    fn dangling_reference_is_an_apology() {
        let (mut s, engine, lex) = fresh();
        let (r, _) = s
            .handle_message("Remove the second clip", &engine, &lex)
            .unwrap();
        assert_eq!(r.status, ResponseStatus::InvalidRef);
        assert!(r.api_call.is_none());
        assert!(r.story_snapshot.is_empty());
    }

    #[test]
    fn restore_rebuilds_from_the_log() {
        let (mut s, engine, lex) = fresh();
        let activity = s.graph.clips[0].activity.clone();
        let mut log = vec![s.created_event()];
        for text in [
            format!("Create a story of all {activity} trips"),
            "blorp".to_string(),
            "Move the last clip to the front".to_string(),
            "Remove the first one".to_string(),
        ] {
            log.push(s.handle_message(&text, &engine, &lex).unwrap().1);
        }
        let back = Session::restore(&log, s.graph.clone(), &engine).unwrap();
        assert_eq!(back.story, s.story);
        assert_eq!(back.history, s.history);
        assert_eq!(back.n_messages, s.n_messages);
    }
}
