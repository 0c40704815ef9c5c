//! Rule-based understanding: template-grammar parsing of utterances and
//! heuristic clip-reference resolution.
//!
//! Everything here is deterministic. The parser is the inverse of the
//! template realizer in [`crate::nlg`] and shares its [`Lexicon`].

use std::collections::BTreeSet;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::dialog::{carryover_candidates, Turn};
use crate::frame::{Activity, ClipRef, Frame, Intent, MentionType, Role, SlotMap};
use crate::graph::MemoryGraph;
use crate::lexicon::Lexicon;
use crate::story::{
    StoryState, SLOT_DURATION_CHANGE, SLOT_DURATION_S, SLOT_POSITION, SLOT_SHARE_TO,
};

/// What a mention span was matched on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Descriptor {
    /// 1-based position, negative counting from the end.
    Ordinal(i32),
    /// Attribute or activity word.
    Word(String),
    /// Fixed cue phrase for device or carryover mentions.
    Cue(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionSpan {
    pub text: String,
    /// Byte offsets into the normalized utterance.
    pub start: usize,
    pub end: usize,
    pub mention_type: MentionType,
    pub descriptor: Descriptor,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialFrame {
    pub intent: Intent,
    pub slots: SlotMap,
    pub spans: Vec<MentionSpan>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum ParseOutcome {
    Parsed(PartialFrame),
    Unparseable { text: String },
}

impl ParseOutcome {
    pub fn frame(&self) -> Option<&PartialFrame> {
        match self {
            ParseOutcome::Parsed(f) => Some(f),
            ParseOutcome::Unparseable { .. } => None,
        }
    }
}

/// Lowercases and replaces everything except letters, digits and
/// apostrophes by single spaces.
pub fn normalize(text: &str) -> String {
    let mapped: String = text
        .chars()
        .map(|c| match c {
            '\u{2019}' => '\'',
            c if c.is_alphanumeric() || c == '\'' => c,
            _ => ' ',
        })
        .collect::<String>()
        .to_lowercase();
    mapped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses an utterance into intent, slots and unresolved mention spans.
pub fn parse_utterance(text: &str, lexicon: &Lexicon) -> ParseOutcome {
    let norm = normalize(text);
    let spans = find_mentions(&norm, lexicon);
    let masked = mask(&norm, &spans);

    let Some(activity) = match_intent(&masked, lexicon) else {
        return ParseOutcome::Unparseable {
            text: text.to_string(),
        };
    };

    let mut claimed = vec![false; masked.len()];
    let mut slots = SlotMap::new();

    if activity == Activity::ModifyDuration {
        let re = Regex::new(r"\b(\d+) seconds?\b").expect("static regex");
        if let Some(c) = re.captures(&masked) {
            let m = c.get(1).expect("group");
            slots.insert(
                SLOT_DURATION_S,
                m.as_str().trim_start_matches('0').to_string(),
            );
            claim(&mut claimed, m.start(), m.end());
        }
        for change in ["shorter", "longer"] {
            if let Some((s, e)) = find_word(&masked, change, &claimed) {
                slots.insert(SLOT_DURATION_CHANGE, change);
                claim(&mut claimed, s, e);
            }
        }
    }
    if matches!(activity, Activity::AddClips | Activity::ReorderClips) {
        if let Some(anchor) = spans.iter().find(|s| s.role == Role::Anchor) {
            let before = norm[..anchor.start].trim_end();
            let cue = if before.ends_with("before") {
                "before"
            } else {
                "after"
            };
            slots.insert(SLOT_POSITION, cue);
        } else {
            let phrases = &lexicon.data.position_phrases;
            for (value, list) in [("first", &phrases.first), ("last", &phrases.last)] {
                for p in list {
                    if let Some((s, e)) = find_word(&masked, &normalize(p), &claimed) {
                        slots.insert(SLOT_POSITION, value);
                        claim(&mut claimed, s, e);
                    }
                }
            }
        }
    }
    if activity == Activity::ShareStory {
        for target in &lexicon.data.share_targets {
            if let Some((s, e)) = find_word(&masked, target, &claimed) {
                slots.insert(SLOT_SHARE_TO, target.clone());
                claim(&mut claimed, s, e);
            }
        }
    }
    for (label, key) in &lexicon.gazetteer {
        let mut from = 0;
        while let Some((s, e)) = find_word_from(&masked, label, &claimed, from) {
            slots.insert(key.as_str(), label.clone());
            claim(&mut claimed, s, e);
            from = e;
        }
    }

    ParseOutcome::Parsed(PartialFrame {
        intent: Intent::request(activity),
        slots,
        spans,
    })
}

/// Intent by longest whole-word trigger; ties go to the earlier activity.
fn match_intent(masked: &str, lexicon: &Lexicon) -> Option<Activity> {
    let none = vec![false; masked.len()];
    let mut best: Option<(usize, Activity)> = None;
    for activity in Activity::ALL {
        for trigger in lexicon.triggers(activity) {
            let t = normalize(trigger);
            if find_word(masked, &t, &none).is_some() && best.is_none_or(|(len, _)| t.len() > len) {
                best = Some((t.len(), activity));
            }
        }
    }
    best.map(|(_, a)| a)
}

fn find_mentions(norm: &str, lexicon: &Lexicon) -> Vec<MentionSpan> {
    let mut found: Vec<(usize, usize, MentionType, Descriptor)> = Vec::new();
    let none = vec![false; norm.len()];
    for (list, kind) in [
        (&lexicon.data.device_mentions, MentionType::DeviceContext),
        (&lexicon.data.carryover_mentions, MentionType::Carryover),
    ] {
        let mut phrases: Vec<String> = list.iter().map(|p| normalize(p)).collect();
        phrases.sort_by_key(|p| std::cmp::Reverse(p.len()));
        for p in phrases {
            let mut from = 0;
            while let Some((s, e)) = find_word_from(norm, &p, &none, from) {
                found.push((s, e, kind, Descriptor::Cue(p.clone())));
                from = e;
            }
        }
    }
    for c in lexicon.ordinal_re.captures_iter(norm) {
        let whole = c.get(0).expect("match");
        let word = c.get(1).expect("group").as_str();
        let k = lexicon.data.ordinals.get(word).copied().or_else(|| {
            word.trim_end_matches(|ch: char| ch.is_alphabetic())
                .parse()
                .ok()
        });
        if let Some(k) = k {
            found.push((
                whole.start(),
                whole.end(),
                MentionType::Ordinal,
                Descriptor::Ordinal(k),
            ));
        }
    }
    for c in lexicon.adjectival_re.captures_iter(norm) {
        let whole = c.get(0).expect("match");
        let word = c.get(1).expect("group").as_str().to_string();
        found.push((
            whole.start(),
            whole.end(),
            MentionType::Adjectival,
            Descriptor::Word(word),
        ));
    }

    // Earlier-listed kinds win overlaps, then leftmost order.
    let mut kept: Vec<(usize, usize, MentionType, Descriptor)> = Vec::new();
    for f in found {
        if kept.iter().all(|k| f.1 <= k.0 || f.0 >= k.1) {
            kept.push(f);
        }
    }
    kept.sort_by_key(|k| k.0);
    kept.into_iter()
        .map(|(start, end, mention_type, descriptor)| MentionSpan {
            text: norm[start..end].to_string(),
            start,
            end,
            mention_type,
            role: role_before(&norm[..start], lexicon),
            descriptor,
        })
        .collect()
}

fn role_before(prefix: &str, lexicon: &Lexicon) -> Role {
    let prefix = prefix.trim_end();
    let ends_with_word = |w: &str| {
        prefix.ends_with(w) && {
            let rest = &prefix[..prefix.len() - w.len()];
            rest.is_empty() || rest.ends_with(' ')
        }
    };
    if lexicon
        .data
        .reference_cues
        .iter()
        .any(|c| ends_with_word(&normalize(c)))
    {
        Role::Reference
    } else if ends_with_word("before") || ends_with_word("after") {
        Role::Anchor
    } else {
        Role::Target
    }
}

fn mask(norm: &str, spans: &[MentionSpan]) -> String {
    let mut bytes = norm.as_bytes().to_vec();
    for s in spans {
        for b in &mut bytes[s.start..s.end] {
            *b = b'|';
        }
    }
    // Spans cover whole characters, so the result stays valid UTF-8.
    String::from_utf8(bytes).expect("masked spans align to characters")
}

fn claim(claimed: &mut [bool], start: usize, end: usize) {
    claimed[start..end].iter_mut().for_each(|c| *c = true);
}

fn find_word(text: &str, phrase: &str, claimed: &[bool]) -> Option<(usize, usize)> {
    find_word_from(text, phrase, claimed, 0)
}

/// First whole-word occurrence of `phrase` at or after `from` that does not
/// touch an already claimed byte.
fn find_word_from(
    text: &str,
    phrase: &str,
    claimed: &[bool],
    from: usize,
) -> Option<(usize, usize)> {
    if phrase.is_empty() {
        return None;
    }
    let mut at = from;
    while let Some(i) = text.get(at..)?.find(phrase) {
        let s = at + i;
        let e = s + phrase.len();
        let left = s == 0 || text.as_bytes()[s - 1] == b' ';
        let right = e == text.len() || text.as_bytes()[e] == b' ';
        if left && right && !claimed[s..e].iter().any(|c| *c) {
            return Some((s, e));
        }
        at = s + text[s..].chars().next().map_or(1, char::len_utf8);
    }
    None
}

/// Resolves each span to clip ids in snapshot order. Never fails; an
/// unresolvable span yields an empty set.
pub fn resolve_mentions(
    spans: &[MentionSpan],
    history: &[Turn],
    snapshot: &StoryState,
    graph: &MemoryGraph,
) -> Vec<Vec<String>> {
    spans
        .iter()
        .map(|span| match (&span.mention_type, &span.descriptor) {
            (MentionType::Ordinal, Descriptor::Ordinal(k)) => {
                let n = snapshot.len() as i64;
                let idx = if *k > 0 { *k as i64 - 1 } else { n + *k as i64 };
                if (0..n).contains(&idx) {
                    vec![snapshot.entries[idx as usize].clip_id.clone()]
                } else {
                    Vec::new()
                }
            }
            (MentionType::DeviceContext, _) => snapshot
                .viewer_clip()
                .map(String::from)
                .into_iter()
                .collect(),
            (MentionType::Adjectival, Descriptor::Word(d)) => snapshot
                .entries
                .iter()
                .filter(|e| graph.clip(&e.clip_id).is_some_and(|c| c.described_by(d)))
                .map(|e| e.clip_id.clone())
                .collect(),
            (MentionType::Carryover, _) => carryover_candidates(history, snapshot)
                .first()
                .map(|id| vec![id.to_string()])
                .unwrap_or_default(),
            _ => Vec::new(),
        })
        .collect()
}

impl PartialFrame {
    /// A full frame with `resolved` ids attached; empty resolutions are dropped.
    pub fn to_frame(&self, resolved: &[Vec<String>]) -> Frame {
        let mut frame = Frame::new(self.intent);
        frame.slots = self.slots.clone();
        for (span, ids) in self.spans.iter().zip(resolved) {
            if !ids.is_empty() {
                frame.refs.push(ClipRef::new(
                    ids.clone(),
                    span.role,
                    span.mention_type,
                    span.text.clone(),
                ));
            }
        }
        frame
    }
}

/// Parse plus resolution for one user utterance given the preceding turns.
pub fn understand(
    text: &str,
    history: &[Turn],
    snapshot: &StoryState,
    graph: &MemoryGraph,
    lexicon: &Lexicon,
) -> Option<Frame> {
    let partial = match parse_utterance(text, lexicon) {
        ParseOutcome::Parsed(p) => p,
        ParseOutcome::Unparseable { .. } => return None,
    };
    let resolved = resolve_mentions(&partial.spans, history, snapshot, graph);
    Some(partial.to_frame(&resolved))
}

/// The previous-turn baseline: whenever a mention is detected, predict the
/// clips of the nearest earlier utterance that brought any up.
pub fn previous_turn_clips(text: &str, history: &[Turn], lexicon: &Lexicon) -> BTreeSet<String> {
    let has_mention = parse_utterance(text, lexicon)
        .frame()
        .is_some_and(|f| !f.spans.is_empty());
    if !has_mention {
        return BTreeSet::new();
    }
    history
        .iter()
        .rev()
        .map(|t| t.mentioned_clips())
        .find(|ids| !ids.is_empty())
        .map(|ids| ids.into_iter().map(String::from).collect())
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::three_clip_graph;
    use crate::story::Entry;

    fn parsed(text: &str) -> PartialFrame {
        match parse_utterance(text, &Lexicon::default()) {
            ParseOutcome::Parsed(p) => p,
            other => panic!("unparseable: {other:?}"),
        }
    }

    fn story(ids: &[&str], viewer: usize) -> StoryState {
        StoryState {
            entries: ids
                .iter()
                .map(|id| Entry {
                    clip_id: id.to_string(),
                    effective_duration_s: 5,
                })
                .collect(),
            viewer_index: Some(viewer),
            ..Default::default()
        }
    }

    #[test]
    fn create_story_slots() {
        let p = parsed("Create a story of all skiing trips in 2018");
        assert_eq!(p.intent, Intent::request(Activity::CreateStory));
        let mut want = SlotMap::new();
        want.insert("activity", "skiing");
        want.insert("time", "2018");
        assert_eq!(p.slots, want);
        assert!(p.spans.is_empty());
    }

    #[test]
    fn replace_with_reference() {
        let p = parsed(
            "Remove the sunset clip and replace it with something similar to the second one.",
        );
        assert_eq!(p.intent.activity, Activity::ReplaceClips);
        assert_eq!(p.spans.len(), 2);
        assert_eq!(p.spans[0].text, "the sunset clip");
        assert_eq!(p.spans[0].mention_type, MentionType::Adjectival);
        assert_eq!(p.spans[0].descriptor, Descriptor::Word("sunset".into()));
        assert_eq!(p.spans[0].role, Role::Target);
        assert_eq!(p.spans[1].descriptor, Descriptor::Ordinal(2));
        assert_eq!(p.spans[1].role, Role::Reference);
        assert!(p.slots.is_empty(), "{:?}", p.slots);
    }

    #[test]
    fn gibberish_is_unparseable() {
        assert_eq!(
            parse_utterance("blorp the wug", &Lexicon::default()),
            ParseOutcome::Unparseable {
                text: "blorp the wug".into()
            }
        );
    }

    #[test]
    fn ordinal_forms() {
        let p = parsed("Move the second to the last one before the 13th clip");
        assert_eq!(p.spans[0].descriptor, Descriptor::Ordinal(-2));
        assert_eq!(p.spans[1].descriptor, Descriptor::Ordinal(13));
        assert_eq!(p.spans[1].role, Role::Anchor);
        assert_eq!(p.slots.single(SLOT_POSITION), Some("before"));
    }

    #[test]
    fn device_and_duration() {
        let p = parsed("Make the one I'm viewing 12 seconds long");
        assert_eq!(p.intent.activity, Activity::ModifyDuration);
        assert_eq!(p.spans[0].mention_type, MentionType::DeviceContext);
        assert_eq!(p.slots.single(SLOT_DURATION_S), Some("12"));
    }

    #[test]
    fn resolution_rules() {
        let graph = three_clip_graph();
        let snap = story(&["c3", "c1", "c2"], 1);
        let lex = Lexicon::default();
        let spans = parsed("Remove the second clip").spans;
        assert_eq!(
            resolve_mentions(&spans, &[], &snap, &graph),
            vec![vec!["c1".to_string()]]
        );
        let spans = parsed("Remove the last clip").spans;
        assert_eq!(
            resolve_mentions(&spans, &[], &snap, &graph),
            vec![vec!["c2".to_string()]]
        );
        let spans = parsed("Remove the current clip").spans;
        assert_eq!(
            resolve_mentions(&spans, &[], &snap, &graph),
            vec![vec!["c1".to_string()]]
        );
        let spans = parsed("Remove the sunset clips").spans;
        assert_eq!(
            resolve_mentions(&spans, &[], &snap, &graph),
            vec![vec!["c3".to_string(), "c2".to_string()]]
        );
        let spans = parsed("Remove the ninth clip").spans;
        assert_eq!(
            resolve_mentions(&spans, &[], &snap, &graph),
            vec![Vec::<String>::new()]
        );
        assert!(previous_turn_clips("Remove the ninth clip", &[], &lex).is_empty());
    }

    #[test]
    fn ordinal_from_the_end() {
        let graph = three_clip_graph();
        let snap = story(&["c3", "c1", "c5", "c2"], 0);
        let spans = parsed("Remove the second to the last one").spans;
        assert_eq!(
            resolve_mentions(&spans, &[], &snap, &graph),
            vec![vec!["c5".to_string()]]
        );
    }

    #[test]
    fn device_resolves_to_viewer() {
        let graph = three_clip_graph();
        let snap = story(&["c7", "c4"], 0);
        let spans = parsed("Please remove the clip on my screen").spans;
        assert_eq!(
            resolve_mentions(&spans, &[], &snap, &graph),
            vec![vec!["c7".to_string()]]
        );
    }

    #[test]
    fn normalize_strips_punctuation() {
        assert_eq!(normalize("Hey, could you  ADD it?"), "hey could you add it");
        assert_eq!(normalize("I\u{2019}m"), "i'm");
    }
}
