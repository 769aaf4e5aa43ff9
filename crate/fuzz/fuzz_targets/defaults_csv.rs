#![no_main]

use libfuzzer_sys::fuzz_target;
use stefan_core::output::parse_defaults;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_defaults(text);
    }
});
