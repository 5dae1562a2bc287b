//! Deterministic rendering environments for both domains.
//!
//! Rendering is a pure function of environment state, computed with fixed
//! arithmetic rules so identical action sequences yield bit-identical
//! images on every platform. Each environment instance is confined to one
//! rollout worker; run independent instances in parallel freely.

pub mod paint;
pub mod scene;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("action component out of range: {0}")]
    Range(String),
    #[error("malformed action script line {line}: {msg}")]
    Script { line: usize, msg: String },
}

/// Canvas coordinate of the center of grid cell `g` when `grid` cells span
/// `canvas` pixels (requires `canvas % grid == 0`).
pub(crate) fn cell_center(g: u16, grid: u16, canvas: usize) -> f64 {
    let scale = canvas as f64 / grid as f64;
    g as f64 * scale + (scale - 1.0) / 2.0
}

/// Parses a line-per-action script: five whitespace-separated integers per
/// line, `#` comments and blank lines skipped. The meaning of the five
/// columns is domain-specific (see the env modules).
pub fn parse_script_lines(text: &str) -> Result<Vec<[u64; 5]>, EnvError> {
    let mut rows = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(EnvError::Script {
                line: lineno + 1,
                msg: format!("expected 5 integers, got {}", fields.len()),
            });
        }
        let mut row = [0u64; 5];
        for (i, f) in fields.iter().enumerate() {
            row[i] = f.parse().map_err(|_| EnvError::Script {
                line: lineno + 1,
                msg: format!("not an integer: {f:?}"),
            })?;
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_centers_land_between_pixels_for_even_scale() {
        assert_eq!(cell_center(0, 32, 64), 0.5);
        assert_eq!(cell_center(16, 32, 64), 32.5);
        assert_eq!(cell_center(31, 32, 64), 62.5);
        assert_eq!(cell_center(2, 8, 64), 19.5);
    }

    #[test]
    fn script_parse_skips_comments_and_rejects_junk() {
        let rows = parse_script_lines("# header\n1 2 3 4 5\n\n6 7 8 9 10\n").unwrap();
        assert_eq!(rows, vec![[1, 2, 3, 4, 5], [6, 7, 8, 9, 10]]);
        assert!(parse_script_lines("1 2 3").is_err());
        assert!(parse_script_lines("1 2 3 x 5").is_err());
    }
}
