#![no_main]

use libfuzzer_sys::fuzz_target;
use stefan_core::config::{no_tables, parse_config};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // A config that parses must also validate into a runnable setup.
        if let Ok(exp) = parse_config(text, &no_tables) {
            assert!(exp.simulation.validate().is_ok());
        }
    }
});
