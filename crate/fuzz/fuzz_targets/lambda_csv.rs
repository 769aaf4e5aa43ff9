#![no_main]

use libfuzzer_sys::fuzz_target;
use stefan_core::output::parse_lambda;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok((names, drift)) = parse_lambda(text) {
            assert_eq!(names.len(), drift.values.len());
            assert!(drift.values.iter().all(|v| v.len() == drift.times.len()));
        }
    }
});
