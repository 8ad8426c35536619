#![no_main]

use libfuzzer_sys::fuzz_target;
use ripplebalance::balance::{balance_energy_fast, balance_energy_naive, relative_deviation};
use ripplebalance::io::{matrix_csv, parse_matrix_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(w) = parse_matrix_csv(text) {
        let back = parse_matrix_csv(&matrix_csv(w.as_dense())).expect("emitted matrix parses");
        assert_eq!(back, w);
        if w.n() <= 24 {
            let (a, b) = (balance_energy_naive(&w), balance_energy_fast(&w));
            if a.is_finite() && b.is_finite() && a.abs() < 1e100 {
                assert!(relative_deviation(a, b) <= 1e-6, "{a} vs {b}");
            }
        }
    }
});
