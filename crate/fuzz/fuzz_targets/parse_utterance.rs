#![no_main]

use std::sync::OnceLock;

use libfuzzer_sys::fuzz_target;
use montage_core::lexicon::Lexicon;
use montage_core::nlu::parse_utterance;

static LEXICON: OnceLock<Lexicon> = OnceLock::new();

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let lexicon = LEXICON.get_or_init(Lexicon::default);
    if let Some(frame) = parse_utterance(&text, lexicon).frame() {
        for span in &frame.spans {
            assert!(span.start <= span.end);
        }
    }
});
