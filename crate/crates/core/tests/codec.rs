mod common;

use common::arb_frame;
use montage_core::dst::{flatten_roles, parse_frame, serialize_frame, FrameError};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn parse_inverts_serialize(f in arb_frame()) {
        let text = serialize_frame(&f);
        prop_assert_eq!(parse_frame(&text).unwrap(), flatten_roles(&f, None));
    }

    #[test]
    fn canonical_form_is_a_fixed_point(f in arb_frame()) {
        let once = serialize_frame(&f);
        let twice = serialize_frame(&parse_frame(&once).unwrap());
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn flattening_is_idempotent(f in arb_frame()) {
        let flat = flatten_roles(&f, None);
        prop_assert_eq!(flatten_roles(&flat, None), flat);
    }

    #[test]
    fn extra_whitespace_between_tokens_is_ignored(f in arb_frame(), pad in "[ \t\n]{1,3}") {
        let canonical = serialize_frame(&f);
        // Values may hold internal spaces, so only pad around structural tokens.
        let padded: String = canonical
            .replace(" [ ", &format!("{pad}[{pad}"))
            .replace(" ] ", &format!("{pad}]{pad}"))
            .replace(" < ", &format!("{pad}<{pad}"))
            .replace(" >", &format!("{pad}>{pad}"));
        prop_assert_eq!(serialize_frame(&parse_frame(&padded).unwrap()), canonical);
    }

    #[test]
    fn parser_never_panics(text in "\\PC{0,80}") {
        let _ = parse_frame(&text);
    }
}

#[test]
fn example_from_the_format_description() {
    let f = parse_frame("REQUEST:ADD_CLIPS [ activity = skiing, time = 2018 ] < clip: c3, c7 >")
        .unwrap();
    assert_eq!(f.slots.single("activity"), Some("skiing"));
    assert_eq!(f.flat_clip_ids(), ["c3", "c7"]);
    assert_eq!(
        serialize_frame(&f),
        "REQUEST:ADD_CLIPS [ activity = skiing, time = 2018 ] < clip: c3, c7 >"
    );
}

#[test]
fn slot_keys_sort_and_repeat() {
    let f =
        parse_frame("INFORM:REFINE_SEARCH [ object = tree, activity = hiking, object = dog ] < >")
            .unwrap();
    assert_eq!(
        serialize_frame(&f),
        "INFORM:REFINE_SEARCH [ activity = hiking, object = dog, object = tree ] < >"
    );
}

#[test]
fn errors_point_at_the_offending_byte() {
    let cases = [
        ("REQUEST:ADD_CLIPS [ a = b < >", 26),
        ("REQUEST ADD_CLIPS [ ] < >", 7),
        ("REQUEST:ADD_CLIPS [ ] < clip: >", 30),
        ("REQUEST:ADD_CLIPS [ = b ] < >", 20),
        ("REQUEST:ADD_CLIPS [ ] < > tail", 26),
    ];
    for (text, offset) in cases {
        let err = parse_frame(text).unwrap_err();
        assert!(matches!(err, FrameError::Syntax { .. }), "{text}: {err}");
        assert_eq!(err.offset(), offset, "{text}: {err}");
    }
}

#[test]
fn unknown_labels_are_vocabulary_errors() {
    let err = parse_frame("ASK:ADD_CLIPS [ ] < >").unwrap_err();
    assert_eq!(
        err,
        FrameError::UnknownAct {
            offset: 0,
            token: "ASK".into()
        }
    );
    let err = parse_frame("REQUEST:DANCE [ ] < >").unwrap_err();
    assert!(err.is_vocabulary());
    assert_eq!(err.offset(), 8);
}
