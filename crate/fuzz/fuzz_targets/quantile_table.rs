#![no_main]

use libfuzzer_sys::fuzz_target;
use stefan_core::InitialLaw;

fuzz_target!(|data: &[u8]| {
    let Some((&flag, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    if let Ok(law) = InitialLaw::parse_quantile_table(text, flag & 1 == 1) {
        for k in 0..=8 {
            let x = law.quantile(k as f64 / 8.0);
            assert!(x.is_finite());
        }
    }
});
