//! Replays the checked-in fuzz corpora through the same checks the fuzz
//! targets make, so the seeds stay meaningful on a stable toolchain.

use std::fs;
use std::path::PathBuf;

use ripplebalance::balance::{balance_energy_fast, balance_energy_naive, relative_deviation};
use ripplebalance::config::{parse_sizes, ExperimentConfig};
use ripplebalance::io::{matrix_csv, parse_matrix_csv};

fn corpus(target: &str) -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut seeds: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            let text = fs::read_to_string(&path).unwrap();
            (path, text)
        })
        .collect();
    seeds.sort();
    assert!(!seeds.is_empty(), "no seeds for {target}");
    seeds
}

#[test]
fn matrix_seeds() {
    let mut parsed = 0;
    for (path, text) in corpus("parse_matrix_csv") {
        match parse_matrix_csv(&text) {
            Ok(w) => {
                parsed += 1;
                assert_eq!(parse_matrix_csv(&matrix_csv(w.as_dense())).unwrap(), w, "{}", path.display());
                let (a, b) = (balance_energy_naive(&w), balance_energy_fast(&w));
                if a.is_finite() && b.is_finite() && a.abs() < 1e100 {
                    assert!(relative_deviation(a, b) <= 1e-6, "{}", path.display());
                }
            }
            Err(e) => assert!(e.line >= 1, "{}", path.display()),
        }
    }
    assert!(parsed >= 3);
}

#[test]
fn config_seeds() {
    for (_, text) in corpus("parse_config") {
        if let Ok(cfg) = ExperimentConfig::parse(&text) {
            let _ = cfg.validate();
        }
    }
}

#[test]
fn sizes_seeds() {
    for (_, text) in corpus("parse_sizes") {
        if let Ok(sizes) = parse_sizes(&text) {
            assert!(!sizes.is_empty() && sizes.iter().all(|n| *n >= 1));
        }
    }
}
