#![no_main]

use libfuzzer_sys::fuzz_target;
use montage_core::vocab::ingest_annotation_vocab;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(vocab) = ingest_annotation_vocab(&text) {
        vocab.validate().expect("ingested vocabulary validates");
    }
});
