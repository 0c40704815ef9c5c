//! Agenda-based user simulation grounded on the story engine.

mod config;
mod corpus;

pub use config::{uniform_transitions, SimConfig, TurnBudget, START};
pub use corpus::{
    derive_seed, simulate_corpus, Corpus, Manifest, DIALOGS_FILE, GRAPHS_FILE, MANIFEST_FILE,
};

use std::collections::{BTreeSet, HashSet};

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::dialog::{carryover_candidates, last_mentions, Dialog, Speaker, Turn};
use crate::error::{Error, Result};
use crate::frame::{Activity, ClipRef, Frame, Intent, MentionType, Role};
use crate::graph::{search, Clip, ConstraintSet, MemoryGraph, SlotKey};
use crate::lexicon::Lexicon;
use crate::nlg::realize;
use crate::story::{
    applicable_activities, assistant_frame, ApiCall, DurationChange, ExecutionResult, Position,
    Status, StoryEngine, StoryState,
};

/// A planned user move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlannedMove {
    pub activity: Activity,
}

/// Goal stack plus the remaining user-turn budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Agenda {
    pub stack: Vec<PlannedMove>,
    pub remaining_turns: usize,
}

impl Agenda {
    pub fn new(user_turns: usize) -> Self {
        Agenda {
            stack: vec![PlannedMove {
                activity: Activity::CreateStory,
            }],
            remaining_turns: user_turns,
        }
    }

    /// Next activity: the stack top when applicable, else a draw from the
    /// transition row restricted to `allowed`.
    fn next_activity(
        &mut self,
        previous: Option<Activity>,
        allowed: &BTreeSet<Activity>,
        config: &SimConfig,
        rng: &mut ChaCha8Rng,
    ) -> Option<Activity> {
        while let Some(planned) = self.stack.pop() {
            if allowed.contains(&planned.activity) {
                return Some(planned.activity);
            }
        }
        let key = previous.map_or(START, |a| a.as_str());
        let row = config.activity_transition.get(key);
        let choices: Vec<Activity> = allowed.iter().copied().collect();
        if choices.is_empty() {
            return None;
        }
        let weights: Vec<f64> = choices
            .iter()
            .map(|a| row.and_then(|r| r.get(a)).copied().unwrap_or(0.0))
            .collect();
        match WeightedIndex::new(&weights) {
            Ok(dist) => Some(choices[dist.sample(rng)]),
            Err(_) => choices.choose(rng).copied(),
        }
    }
}

/// Simulator bound to a configuration and a lexicon.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub config: SimConfig,
    pub lexicon: Lexicon,
    pub engine: StoryEngine,
}

const MAX_ATTEMPTS: usize = 12;

/// Users return to clips they already talked about.
const REMENTION_BONUS: f64 = 3.0;

impl Simulator {
    pub fn new(config: SimConfig, lexicon: Lexicon) -> Result<Self> {
        config.validate()?;
        Ok(Simulator {
            engine: StoryEngine::new(config.engine),
            config,
            lexicon,
        })
    }

    /// Simulates one dialog; the same graph, config and seed give the same dialog.
    pub fn simulate_dialog(
        &self,
        graph: &MemoryGraph,
        dialog_id: &str,
        seed: u64,
    ) -> Result<Dialog> {
        let distinct: HashSet<&str> = graph.clips.iter().map(|c| c.activity.as_str()).collect();
        if distinct.len() < 2 {
            return Err(Error::Simulation(format!(
                "graph {} has {} distinct activities; generate a larger or more varied collection",
                graph.graph_id,
                distinct.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let budget = self.sample_budget(&mut rng);
        let mut agenda = Agenda::new(budget);
        let mut state = StoryState::default();
        let mut turns: Vec<Turn> = Vec::new();
        let mut previous: Option<Activity> = None;

        while agenda.remaining_turns > 0 {
            let mut allowed = applicable_activities(&state);
            let (frame, call, next, result) = loop {
                let activity = agenda
                    .next_activity(previous, &allowed, &self.config, &mut rng)
                    .ok_or_else(|| {
                        Error::Simulation(format!(
                            "no feasible user move in graph {}; generate a larger collection",
                            graph.graph_id
                        ))
                    })?;
                match self.sample_user_frame(activity, &state, &turns, graph, &mut rng)? {
                    Some(found) => break found,
                    None => {
                        allowed.remove(&activity);
                    }
                }
            };
            agenda.remaining_turns -= 1;
            if result.status == Status::NoResults
                && rng.gen_bool(self.config.refine_after_no_results)
            {
                agenda.stack.push(PlannedMove {
                    activity: Activity::RefineSearch,
                });
            }
            previous = Some(call.activity());

            let user_text = realize(&frame, &self.lexicon, &mut rng)?;
            turns.push(Turn {
                turn_id: turns.len() as u32 + 1,
                speaker: Speaker::User,
                template_utterance: user_text,
                paraphrase: String::new(),
                frame,
                api_call: Some(call.clone()),
                execution_result: None,
                story_snapshot: state.clone(),
            });
            let reply = assistant_frame(&result, &call);
            let reply_text = realize(&reply, &self.lexicon, &mut rng)?;
            turns.push(Turn {
                turn_id: turns.len() as u32 + 1,
                speaker: Speaker::Assistant,
                template_utterance: reply_text,
                paraphrase: String::new(),
                frame: reply,
                api_call: None,
                execution_result: Some(result),
                story_snapshot: next.clone(),
            });
            state = next;
        }
        Ok(Dialog {
            dialog_id: dialog_id.to_string(),
            graph_id: graph.graph_id.clone(),
            turns,
        })
    }

    fn sample_budget(&self, rng: &mut ChaCha8Rng) -> usize {
        let b = &self.config.target_turns;
        let mut n = b.min_user_turns;
        while n < b.max_user_turns && rng.gen_bool(b.continue_prob) {
            n += 1;
        }
        n
    }

    /// Samples a frame for `activity` and dry-runs it. Returns `None` when
    /// the activity cannot be realized in this state.
    pub fn sample_user_frame(
        &self,
        activity: Activity,
        state: &StoryState,
        history: &[Turn],
        graph: &MemoryGraph,
        rng: &mut ChaCha8Rng,
    ) -> Result<Option<(Frame, ApiCall, StoryState, ExecutionResult)>> {
        for _ in 0..MAX_ATTEMPTS {
            let Some((frame, want_empty)) = self.draft_frame(activity, state, history, graph, rng)
            else {
                continue;
            };
            let call = ApiCall::from_frame(&frame)?;
            let (next, result) = self.engine.execute(state, &call, graph)?;
            let expected = if want_empty {
                Status::NoResults
            } else {
                Status::Ok
            };
            if result.status == expected {
                return Ok(Some((frame, call, next, result)));
            }
        }
        Ok(None)
    }

    fn draft_frame(
        &self,
        activity: Activity,
        state: &StoryState,
        history: &[Turn],
        graph: &MemoryGraph,
        rng: &mut ChaCha8Rng,
    ) -> Option<(Frame, bool)> {
        let mut frame = Frame::new(Intent::request(activity));
        let story: HashSet<&str> = state.ids().into_iter().collect();
        let mut want_empty = false;
        let mut mentions = MentionSampler {
            sim: self,
            state,
            history,
            graph,
        };
        match activity {
            Activity::CreateStory | Activity::AddClips => {
                let pool: Vec<&Clip> = graph
                    .clips
                    .iter()
                    .filter(|c| !story.contains(c.id.as_str()))
                    .collect();
                let anchor = *pool.choose(rng)?;
                let mut query = self.query_from(anchor, &BTreeSet::new(), rng);
                if rng.gen_bool(self.config.no_results_rate) {
                    query = self.over_constrain(query, graph, &story, rng)?;
                    want_empty = true;
                }
                put_constraints(&mut frame, &query);
                if activity == Activity::AddClips && rng.gen_bool(self.config.add_with_position) {
                    let position = *Position::ALL.choose(rng)?;
                    frame.slots.insert("position", position.as_str());
                    if position.needs_anchor() {
                        frame
                            .refs
                            .push(mentions.sample(Role::Anchor, true, &[], rng)?);
                    }
                }
            }
            Activity::RefineSearch => {
                let last = &state.last_search;
                let anchor = graph.clips.choose(rng)?;
                let conflicts: BTreeSet<SlotKey> = last
                    .pairs()
                    .filter(|(k, v)| !anchor.has(*k, v))
                    .map(|(k, _)| k)
                    .collect();
                // A conflicting key can only be overridden with a value the anchor has.
                if conflicts.len() > 3 || conflicts.iter().any(|k| anchor.values(*k).is_empty()) {
                    return None;
                }
                let mut query = self.query_from(anchor, &conflicts, rng);
                if rng.gen_bool(self.config.no_results_rate) {
                    query = self.over_constrain(query, graph, &HashSet::new(), rng)?;
                    want_empty = true;
                }
                put_constraints(&mut frame, &query);
            }
            Activity::RemoveClips => {
                frame
                    .refs
                    .push(mentions.sample(Role::Target, false, &[], rng)?);
            }
            Activity::ReplaceClips => {
                let target = mentions.sample(Role::Target, false, &[], rng)?;
                if state.len() > target.clip_ids.len()
                    && rng.gen_bool(self.config.replace_by_reference)
                {
                    let reference =
                        mentions.sample(Role::Reference, true, &target.clip_ids, rng)?;
                    frame.refs.push(target);
                    frame.refs.push(reference);
                } else {
                    let mut exclude = story.clone();
                    exclude.extend(target.clip_ids.iter().map(String::as_str));
                    let pool: Vec<&Clip> = graph
                        .clips
                        .iter()
                        .filter(|c| !exclude.contains(c.id.as_str()))
                        .collect();
                    let anchor = *pool.choose(rng)?;
                    put_constraints(&mut frame, &self.query_from(anchor, &BTreeSet::new(), rng));
                    frame.refs.push(target);
                }
            }
            Activity::ReorderClips => {
                let target = mentions.sample(Role::Target, true, &[], rng)?;
                let position = *Position::ALL.choose(rng)?;
                frame.slots.insert("position", position.as_str());
                if position.needs_anchor() {
                    let anchor = mentions.sample(Role::Anchor, true, &target.clip_ids, rng)?;
                    frame.refs.push(target);
                    frame.refs.push(anchor);
                } else {
                    frame.refs.push(target);
                }
            }
            Activity::ModifyDuration => {
                frame
                    .refs
                    .push(mentions.sample(Role::Target, false, &[], rng)?);
                if rng.gen_bool(0.5) {
                    frame
                        .slots
                        .insert("duration_s", rng.gen_range(3..=20u32).to_string());
                } else {
                    let change = *[DurationChange::Shorter, DurationChange::Longer].choose(rng)?;
                    frame.slots.insert("duration_change", change.as_str());
                }
            }
            Activity::ShareStory => {
                let to = self.lexicon.data.share_targets.choose(rng)?;
                frame.slots.insert("share_to", to.clone());
            }
        }
        Some((frame, want_empty))
    }

    /// A query satisfied by `anchor`, containing every key in `required`
    /// plus random extra keys up to the sampled slot count.
    fn query_from(
        &self,
        anchor: &Clip,
        required: &BTreeSet<SlotKey>,
        rng: &mut ChaCha8Rng,
    ) -> ConstraintSet {
        let dist = WeightedIndex::new(&self.config.slots_per_request).expect("validated weights");
        let n = (dist.sample(rng) + 1).max(required.len());
        let mut keys: Vec<SlotKey> = required.iter().copied().collect();
        let mut pool: Vec<(SlotKey, f64)> = SlotKey::ALL
            .into_iter()
            .filter(|k| !required.contains(k) && !anchor.values(*k).is_empty())
            .map(|k| (k, key_weight(k)))
            .collect();
        while keys.len() < n && !pool.is_empty() {
            let dist = WeightedIndex::new(pool.iter().map(|(_, w)| *w)).expect("positive weights");
            keys.push(pool.swap_remove(dist.sample(rng)).0);
        }
        let mut query = ConstraintSet::default();
        for k in keys {
            let values = anchor.values(k);
            if let Some(v) = values.choose(rng) {
                query.insert(k, *v);
            }
        }
        query
    }

    /// Adds one constraint that leaves the query without hits.
    fn over_constrain(
        &self,
        query: ConstraintSet,
        graph: &MemoryGraph,
        exclude: &HashSet<&str>,
        rng: &mut ChaCha8Rng,
    ) -> Option<ConstraintSet> {
        let free: Vec<SlotKey> = SlotKey::ALL
            .into_iter()
            .filter(|k| query.values(*k).is_empty())
            .collect();
        for _ in 0..MAX_ATTEMPTS {
            let key = *free.choose(rng)?;
            let value = graph.vocabulary.labels(key).choose(rng)?;
            let mut q = query.clone();
            q.insert(key, value.clone());
            if search(graph, &q, exclude).ok()?.is_empty() {
                return Some(q);
            }
        }
        None
    }
}

fn key_weight(k: SlotKey) -> f64 {
    match k {
        SlotKey::Activity => 3.0,
        SlotKey::Time => 2.0,
        SlotKey::Location | SlotKey::Attribute => 1.5,
        SlotKey::Object | SlotKey::Participant => 1.0,
    }
}

fn put_constraints(frame: &mut Frame, query: &ConstraintSet) {
    for (k, v) in query.pairs() {
        frame.slots.insert(k.as_str(), v);
    }
}

struct MentionSampler<'a> {
    sim: &'a Simulator,
    state: &'a StoryState,
    history: &'a [Turn],
    graph: &'a MemoryGraph,
}

impl MentionSampler<'_> {
    /// A gold-labelled mention of story clips not in `exclude`. Mention types
    /// that cannot be realized fall back to ORDINAL.
    fn sample(
        &mut self,
        role: Role,
        unique: bool,
        exclude: &[String],
        rng: &mut ChaCha8Rng,
    ) -> Option<ClipRef> {
        let weights = &self.sim.config.mention_type_weights;
        let kinds: Vec<MentionType> = weights.keys().copied().collect();
        let dist = WeightedIndex::new(kinds.iter().map(|k| weights[k])).ok()?;
        let kind = kinds[dist.sample(rng)];
        let found = match kind {
            MentionType::Adjectival => self.adjectival(unique, exclude, rng),
            MentionType::DeviceContext => self.device(exclude, rng),
            MentionType::Carryover => self.carryover(exclude, rng),
            MentionType::Ordinal => None,
        };
        found
            .or_else(|| self.ordinal(exclude, rng))
            .map(|(ids, kind, text)| ClipRef::new(ids, role, kind, text))
    }

    fn eligible(&self, exclude: &[String]) -> Vec<(usize, &str)> {
        self.state
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (i, e.clip_id.as_str()))
            .filter(|(_, id)| !exclude.iter().any(|x| x == id))
            .collect()
    }

    /// Lookback weight of a clip last mentioned `distance` utterances ago.
    fn distance_weight(&self, distance: usize) -> f64 {
        let w = &self.sim.config.coref_lookback_weights;
        w[distance.clamp(1, w.len()) - 1]
    }

    /// Draws one of `candidates` weighted by how far back it was last mentioned.
    fn pick_by_distance<'c>(
        &self,
        candidates: &[(usize, &'c str)],
        rng: &mut ChaCha8Rng,
    ) -> Option<(usize, &'c str)> {
        let last = last_mentions(self.history);
        let named: HashSet<&str> = self
            .history
            .iter()
            .filter(|t| t.speaker == Speaker::User)
            .flat_map(Turn::mentioned_clips)
            .collect();
        let next = self.history.len();
        let weights: Vec<f64> = candidates
            .iter()
            .map(|(_, id)| {
                let w = last
                    .get(id)
                    .map_or(1.0, |at| self.distance_weight(next - at));
                if named.contains(id) {
                    w * REMENTION_BONUS
                } else {
                    w
                }
            })
            .collect();
        match WeightedIndex::new(&weights) {
            Ok(dist) => Some(candidates[dist.sample(rng)]),
            Err(_) => candidates.choose(rng).copied(),
        }
    }

    fn ordinal(
        &self,
        exclude: &[String],
        rng: &mut ChaCha8Rng,
    ) -> Option<(Vec<String>, MentionType, String)> {
        let (idx, id) = self.pick_by_distance(&self.eligible(exclude), rng)?;
        let n = self.state.len();
        let k = if idx + 1 == n && n > 1 && rng.gen_bool(0.5) {
            -1
        } else if idx + 2 == n && n > 2 && rng.gen_bool(0.3) {
            -2
        } else {
            idx as i32 + 1
        };
        let word = self
            .sim
            .lexicon
            .ordinal_word(k)
            .map(String::from)
            .unwrap_or_else(|| numeric_ordinal(k as u32));
        let head = if rng.gen_bool(0.5) { "clip" } else { "one" };
        Some((
            vec![id.to_string()],
            MentionType::Ordinal,
            format!("the {word} {head}"),
        ))
    }

    fn device(
        &self,
        exclude: &[String],
        rng: &mut ChaCha8Rng,
    ) -> Option<(Vec<String>, MentionType, String)> {
        let id = self.state.viewer_clip()?;
        if exclude.iter().any(|x| x == id) {
            return None;
        }
        let text = self.sim.lexicon.data.device_mentions.choose(rng)?;
        Some((
            vec![id.to_string()],
            MentionType::DeviceContext,
            text.clone(),
        ))
    }

    /// Describes a distance-weighted story clip by its activity or one of its
    /// attributes; gold is every story clip the descriptor fits.
    fn adjectival(
        &self,
        unique: bool,
        exclude: &[String],
        rng: &mut ChaCha8Rng,
    ) -> Option<(Vec<String>, MentionType, String)> {
        let mut pool = self.eligible(exclude);
        while !pool.is_empty() {
            let (_, id) = self.pick_by_distance(&pool, rng)?;
            pool.retain(|(_, other)| *other != id);
            let clip = self.graph.clip(id)?;
            let mut descriptors: Vec<&str> = vec![clip.activity.as_str()];
            descriptors.extend(clip.attributes.iter().map(String::as_str));
            let options: Vec<(&str, Vec<String>)> = descriptors
                .into_iter()
                .map(|descriptor| {
                    let gold: Vec<String> = self
                        .state
                        .entries
                        .iter()
                        .filter(|e| {
                            self.graph
                                .clip(&e.clip_id)
                                .is_some_and(|c| c.described_by(descriptor))
                        })
                        .map(|e| e.clip_id.clone())
                        .collect();
                    (descriptor, gold)
                })
                .filter(|(_, gold)| {
                    !(unique && gold.len() > 1) && !gold.iter().any(|g| exclude.contains(g))
                })
                .collect();
            // Narrower descriptions are the more natural way to point at a clip.
            let Ok(dist) = WeightedIndex::new(
                options
                    .iter()
                    .map(|(_, gold)| 1.0 / (gold.len() * gold.len()) as f64),
            ) else {
                continue;
            };
            let (descriptor, gold) = &options[dist.sample(rng)];
            let heads: [&str; 2] = if gold.len() > 1 {
                ["clips", "ones"]
            } else {
                ["clip", "one"]
            };
            let head = heads.choose(rng)?;
            return Some((
                gold.clone(),
                MentionType::Adjectival,
                format!("the {descriptor} {head}"),
            ));
        }
        None
    }

    /// A story clip last mentioned at least two utterances ago.
    fn carryover(
        &self,
        exclude: &[String],
        rng: &mut ChaCha8Rng,
    ) -> Option<(Vec<String>, MentionType, String)> {
        let candidates: Vec<(usize, &str)> = carryover_candidates(self.history, self.state)
            .into_iter()
            .filter(|id| !exclude.iter().any(|x| x == id))
            .enumerate()
            .collect();
        let (_, id) = self.pick_by_distance(&candidates, rng)?;
        let text = self.sim.lexicon.data.carryover_mentions.choose(rng)?;
        Some((vec![id.to_string()], MentionType::Carryover, text.clone()))
    }
}

fn numeric_ordinal(n: u32) -> String {
    let suffix = match (n % 10, n % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}

/// Convenience wrapper using the default lexicon for `graph`'s vocabulary.
pub fn simulate_dialog(graph: &MemoryGraph, config: &SimConfig, seed: u64) -> Result<Dialog> {
    let lexicon = Lexicon::for_vocabulary(&graph.vocabulary)?;
    Simulator::new(config.clone(), lexicon)?.simulate_dialog(graph, "d0001", seed)
}
