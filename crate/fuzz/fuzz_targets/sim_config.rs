#![no_main]

use libfuzzer_sys::fuzz_target;
use montage_core::sim::SimConfig;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(config) = SimConfig::from_json(&text) {
        config.validate().expect("parsed config validates");
    }
});
