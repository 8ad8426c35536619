#![no_main]

use libfuzzer_sys::fuzz_target;
use ripplebalance::config::parse_sizes;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(sizes) = parse_sizes(text) {
        assert!(!sizes.is_empty());
        assert!(sizes.iter().all(|n| *n >= 1));
    }
});
