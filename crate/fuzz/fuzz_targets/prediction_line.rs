#![no_main]

use libfuzzer_sys::fuzz_target;
use montage_core::dst::{parse_prediction_line, parse_predictions};

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let _ = parse_prediction_line(&text);
    let _ = parse_predictions(&text);
});
