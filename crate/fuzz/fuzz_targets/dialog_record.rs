#![no_main]

use libfuzzer_sys::fuzz_target;
use montage_core::dialog::parse_dialog_line;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(dialog) = parse_dialog_line(line) {
        let json = serde_json::to_string(&dialog).unwrap();
        assert_eq!(parse_dialog_line(&json).unwrap(), dialog);
    }
});
