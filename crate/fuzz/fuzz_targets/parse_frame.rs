#![no_main]

use libfuzzer_sys::fuzz_target;
use montage_core::dst::{parse_frame, serialize_frame};

// Anything that parses must re-parse from its canonical form to the same frame.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(frame) = parse_frame(text) {
        let canonical = serialize_frame(&frame);
        let again = parse_frame(&canonical).expect("canonical form parses");
        assert_eq!(again, frame);
        assert_eq!(serialize_frame(&again), canonical);
    }
});
