//! CSV encoding shared by all experiment outputs.
//!
//! Numbers are written with Rust's `{:?}` formatting for `f64`: the
//! shortest decimal string that parses back to the same bits (`4.0`,
//! `0.1`, `1e-20`). Output bytes are therefore a pure function of the
//! values, which is what the determinism checks compare.

use std::fs;
use std::path::Path;
use thiserror::Error;

use crate::matrix::{DenseMatrix, MatrixError, SynapticMatrix};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

/// Parses a header-less square CSV matrix and validates it as a
/// [`SynapticMatrix`]. Blank lines are skipped; reported line numbers
/// refer to the original text.
pub fn parse_matrix_csv(text: &str) -> Result<SynapticMatrix, ParseError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut lines: Vec<usize> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (col, field) in raw.split(',').enumerate() {
            let field = field.trim();
            let v: f64 = field.parse().map_err(|_| ParseError {
                line,
                message: format!("column {}: '{field}' is not a number", col + 1),
            })?;
            if !v.is_finite() {
                return Err(ParseError {
                    line,
                    message: format!("column {}: value '{field}' is not finite", col + 1),
                });
            }
            row.push(v);
        }
        rows.push(row);
        lines.push(line);
    }
    if rows.is_empty() {
        return Err(ParseError {
            line: 1,
            message: MatrixError::Empty.to_string(),
        });
    }
    let n = rows.len();
    for (r, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(ParseError {
                line: lines[r],
                message: format!("expected {n} values (square matrix), found {}", row.len()),
            });
        }
    }
    SynapticMatrix::from_rows(&rows).map_err(|e| {
        let row = match e {
            MatrixError::NonFinite { i, .. }
            | MatrixError::NonzeroDiagonal { i, .. }
            | MatrixError::Asymmetric { j: i, .. } => i,
            MatrixError::RaggedRow { row, .. } => row,
            MatrixError::Empty | MatrixError::Shape { .. } => 0,
        };
        ParseError {
            line: lines[row],
            message: e.to_string(),
        }
    })
}

pub fn matrix_csv(m: &DenseMatrix) -> String {
    let mut out = String::with_capacity(m.n() * m.n() * 8);
    for row in m.rows().take(m.n()) {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

/// Two-column `iteration,energy` trace.
pub fn energy_trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("iteration,energy\n");
    for (i, e) in trace.iter().enumerate() {
        out.push_str(&format!("{i},{}\n", fmt_f64(*e)));
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, contents)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use proptest::prelude::*;

    #[test]
    fn parses_simple_matrix() {
        let w = parse_matrix_csv("0,1,1\n1,0,1\n1,1,0\n").unwrap();
        assert_eq!(w.n(), 3);
        assert_eq!(w.get(2, 0), 1.0);
    }

    #[test]
    fn whitespace_and_blank_lines() {
        let w = parse_matrix_csv("\n 0 , -0.5\n\n-0.5, 0 \n\n").unwrap();
        assert_eq!(w.get(0, 1), -0.5);
    }

    #[test]
    fn error_names_line() {
        let err = parse_matrix_csv("0,1\n1,x\n").unwrap_err();
        assert_eq!(err.line, 2);
        let err = parse_matrix_csv("0,1,2\n1,0,3\n2,3\n").unwrap_err();
        assert_eq!(err.line, 3);
        let err = parse_matrix_csv("0,1\n2,0\n").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.message.contains("symmetric"));
        let err = parse_matrix_csv("0,1\n1,5\n").unwrap_err();
        assert_eq!(err.line, 2);
        let err = parse_matrix_csv("0,inf\ninf,0\n").unwrap_err();
        assert_eq!(err.line, 1);
        assert_eq!(parse_matrix_csv("").unwrap_err().line, 1);
    }

    #[test]
    fn number_format_is_shortest_roundtrip() {
        assert_eq!(fmt_f64(4.0), "4.0");
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(-1e-20), "-1e-20");
    }

    #[test]
    fn energy_trace_format() {
        assert_eq!(energy_trace_csv(&[4.0, 3.5]), "iteration,energy\n0,4.0\n1,3.5\n");
    }

    proptest! {
        #[test]
        fn matrix_csv_roundtrips(n in 1usize..12, seed in any::<u64>()) {
            let w = SynapticMatrix::random_uniform(n, &mut rng_from_seed(seed));
            let back = parse_matrix_csv(&matrix_csv(w.as_dense())).unwrap();
            prop_assert_eq!(back, w);
        }

        #[test]
        fn parser_never_panics(s in "[0-9eE.,+\\- \\n]{0,64}") {
            let _ = parse_matrix_csv(&s);
        }
    }
}
