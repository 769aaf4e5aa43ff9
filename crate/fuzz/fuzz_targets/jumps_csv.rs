#![no_main]

use libfuzzer_sys::fuzz_target;
use stefan_core::output::{attach_jump_measures, parse_jumps};

// Input: jumps.csv and jump_measures.csv separated by a NUL byte.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let (jumps_text, measures_text) = text.split_once('\0').unwrap_or((text, ""));
    if let Ok((names, mut jumps)) = parse_jumps(jumps_text) {
        let _ = attach_jump_measures(measures_text, &names, &mut jumps);
    }
});
