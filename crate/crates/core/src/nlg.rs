//! Template realization of frames into utterances.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::frame::{Act, Frame, Role};
use crate::graph::{ConstraintSet, SlotKey};
use crate::lexicon::{Lexicon, Template};
use crate::story::{
    SLOT_COUNT, SLOT_DURATION_CHANGE, SLOT_DURATION_S, SLOT_POSITION, SLOT_SHARE_TO, SLOT_STATUS,
};

/// Renders a user or assistant frame with a randomly chosen template.
pub fn realize(frame: &Frame, lexicon: &Lexicon, rng: &mut impl Rng) -> Result<String> {
    match frame.act {
        Act::Request => realize_request(frame, lexicon, rng),
        Act::Inform => realize_inform(frame, lexicon, rng),
    }
}

/// Noun phrase for a search query, e.g. `sunny skiing trips at the lake in 2018`.
pub fn query_phrase(constraints: &ConstraintSet) -> String {
    let mut words: Vec<String> = Vec::new();
    if !constraints.attributes.is_empty() {
        words.push(join_and(constraints.attributes.iter().cloned()));
    }
    match &constraints.activity {
        Some(a) => {
            words.push(a.clone());
            words.push("trips".into());
        }
        None => words.push("clips".into()),
    }
    if let Some(loc) = &constraints.location {
        words.push(format!("at the {loc}"));
    }
    if let Some(t) = &constraints.time {
        words.push(format!("in {t}"));
    }
    if !constraints.objects.is_empty() {
        words.push(format!(
            "featuring {}",
            join_and(constraints.objects.iter().map(|o| format!("the {o}")))
        ));
    }
    if !constraints.participants.is_empty() {
        words.push(format!(
            "with {}",
            join_and(constraints.participants.iter().map(|p| capitalize(p)))
        ));
    }
    words.join(" ")
}

fn realize_request(frame: &Frame, lexicon: &Lexicon, rng: &mut impl Rng) -> Result<String> {
    let mut constraints = ConstraintSet::default();
    for (k, v) in frame.slots.pairs() {
        if let Ok(key) = k.parse::<SlotKey>() {
            constraints.insert(key, v);
        }
    }
    let mention = |role: Role| {
        frame
            .refs
            .iter()
            .filter(|r| r.role == role)
            .map(|r| r.mention_text.clone())
            .collect::<Vec<_>>()
    };
    let targets = mention(Role::Target);
    let references = mention(Role::Reference);
    let anchors = mention(Role::Anchor);

    let mut fills: Vec<(&str, String)> = Vec::new();
    if !constraints.is_empty() {
        fills.push(("query", query_phrase(&constraints)));
    }
    if !targets.is_empty() {
        fills.push(("target", join_and(targets)));
    }
    if !references.is_empty() {
        fills.push(("reference", join_and(references)));
    }
    if let Some(p) = frame.slots.single(SLOT_POSITION) {
        let text = match p {
            "first" => lexicon.data.position_phrases.first.choose(rng).cloned(),
            "last" => lexicon.data.position_phrases.last.choose(rng).cloned(),
            "before" | "after" => anchors.first().map(|a| format!("{p} {a}")),
            _ => None,
        }
        .ok_or_else(|| Error::config("templates", format!("cannot realize position `{p}`")))?;
        fills.push(("position", text));
    }
    if let Some(c) = frame.slots.single(SLOT_DURATION_CHANGE) {
        fills.push(("change", c.to_string()));
    }
    if let Some(d) = frame.slots.single(SLOT_DURATION_S) {
        fills.push(("duration", d.to_string()));
    }
    if let Some(s) = frame.slots.single(SLOT_SHARE_TO) {
        fills.push(("share_to", s.to_string()));
    }

    let wanted: BTreeSet<String> = fills.iter().map(|(k, _)| k.to_string()).collect();
    let intent = frame.intent().to_string();
    let candidates: Vec<&Template> = lexicon
        .templates_for(&intent)
        .filter(|t| t.placeholders() == wanted)
        .collect();
    let template = candidates.choose(rng).ok_or_else(|| {
        Error::config(
            "templates",
            format!(
                "no {intent} template with placeholders {{{}}}",
                wanted.into_iter().collect::<Vec<_>>().join(", ")
            ),
        )
    })?;
    Ok(capitalize(&fill(&template.text, &fills)))
}

fn realize_inform(frame: &Frame, lexicon: &Lexicon, rng: &mut impl Rng) -> Result<String> {
    let status = frame.slots.single(SLOT_STATUS).unwrap_or("ok");
    let intent = frame.intent().to_string();
    let mut candidates: Vec<&Template> = lexicon
        .templates_for(&intent)
        .filter(|t| t.status.as_deref().unwrap_or("ok") == status)
        .collect();
    if candidates.is_empty() {
        candidates = lexicon
            .templates_for("INFORM:*")
            .filter(|t| t.status.as_deref() == Some(status))
            .collect();
    }
    let count = frame.slots.single(SLOT_COUNT);
    let has_count = count.is_some();
    candidates.retain(|t| has_count || !t.placeholders().contains("count"));
    let template = candidates.choose(rng).ok_or_else(|| {
        Error::config(
            "templates",
            format!("no {intent} template for status `{status}`"),
        )
    })?;
    let n = count.unwrap_or("0");
    let fills = [
        ("count", n.to_string()),
        ("clips", if n == "1" { "clip" } else { "clips" }.to_string()),
    ];
    Ok(fill(&template.text, &fills))
}

fn fill(text: &str, fills: &[(&str, String)]) -> String {
    let mut out = text.to_string();
    for (k, v) in fills {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

fn join_and(items: impl IntoIterator<Item = String>) -> String {
    let items: Vec<String> = items.into_iter().collect();
    match items.len() {
        0 => String::new(),
        1 => items[0].clone(),
        n => format!("{} and {}", items[..n - 1].join(", "), items[n - 1]),
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(first) => first.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{Activity, ClipRef, Intent, MentionType};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn create_story_query_matches_known_phrasing() {
        let mut frame = Frame::new(Intent::request(Activity::CreateStory));
        frame.slots.insert("activity", "skiing");
        frame.slots.insert("time", "2018");
        let lex = Lexicon::default();
        let mut seen = BTreeSet::new();
        for seed in 0..40 {
            seen.insert(realize(&frame, &lex, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap());
        }
        assert!(
            seen.contains("Create a story of all skiing trips in 2018"),
            "{seen:?}"
        );
    }

    #[test]
    fn remove_confirmation_is_filled() {
        let mut frame = Frame::new(Intent::inform(Activity::RemoveClips));
        frame.slots.insert("status", "ok");
        frame.slots.insert("count", "1");
        let lex = Lexicon::default();
        let mut seen = BTreeSet::new();
        for seed in 0..40 {
            seen.insert(realize(&frame, &lex, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap());
        }
        assert!(
            seen.contains("Done, I removed 1 clip from your story."),
            "{seen:?}"
        );
    }

    #[test]
    fn status_only_templates_cover_failures() {
        let mut frame = Frame::new(Intent::inform(Activity::ReorderClips));
        frame.slots.insert("status", "invalid_ref");
        let text = realize(
            &frame,
            &Lexicon::default(),
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
        assert!(!text.contains('{'));
    }

    #[test]
    fn missing_template_is_a_config_error() {
        let mut frame = Frame::new(Intent::request(Activity::ShareStory));
        frame.refs.push(ClipRef::new(
            vec!["c1".into()],
            Role::Target,
            MentionType::Ordinal,
            "the first clip",
        ));
        frame.slots.insert("share_to", "family");
        let err = realize(
            &frame,
            &Lexicon::default(),
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }

    #[test]
    fn query_phrase_lists_every_constraint() {
        let mut c = ConstraintSet::default();
        c.insert(SlotKey::Activity, "hiking");
        c.insert(SlotKey::Attribute, "sunny");
        c.insert(SlotKey::Attribute, "misty");
        c.insert(SlotKey::Participant, "alice");
        c.insert(SlotKey::Location, "lake");
        assert_eq!(
            query_phrase(&c),
            "misty and sunny hiking trips at the lake with Alice"
        );
    }
}
