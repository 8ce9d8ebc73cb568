//! Two-column CSV ingestion with header auto-detection.

use std::path::Path;

use betadiff::PairedSampleF64;

use crate::error::CliError;

/// Which file column holds `x` (the response) and which holds `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Columns {
    #[serde(rename = "x,y")]
    XY,
    #[serde(rename = "y,x")]
    YX,
}

impl std::str::FromStr for Columns {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.replace(' ', "").to_ascii_lowercase().as_str() {
            "x,y" => Ok(Columns::XY),
            "y,x" => Ok(Columns::YX),
            other => Err(format!("--columns must be 'x,y' or 'y,x', got '{other}'")),
        }
    }
}

fn parse_row(line: &str) -> Result<(f64, f64), String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 2 {
        return Err(format!("expected 2 fields, found {}", fields.len()));
    }
    let num = |f: &str| -> Result<f64, String> {
        let v: f64 = f.parse().map_err(|_| format!("'{f}' is not a number"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("'{f}' is not finite"))
        }
    };
    Ok((num(fields[0])?, num(fields[1])?))
}

/// Parses CSV text. A first row that is not numeric is taken as a header.
pub fn parse_csv(text: &str, columns: Columns) -> Result<PairedSampleF64, CliError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut lines: Vec<(usize, &str)> = text.lines().enumerate().map(|(i, l)| (i + 1, l)).collect();
    // A single trailing newline is not a blank row; `lines()` already drops it.
    if let Some(&(_, first)) = lines.first() {
        if !first.trim().is_empty() && parse_row(first).is_err() {
            let header_like = first.split(',').all(|f| f.trim().parse::<f64>().is_err());
            if header_like {
                lines.remove(0);
            }
        }
    }
    let mut pairs = Vec::with_capacity(lines.len());
    let mut bad = Vec::new();
    for (no, line) in lines {
        if line.trim().is_empty() {
            bad.push((no, "blank line".to_string()));
            continue;
        }
        match parse_row(line) {
            Ok((a, b)) => pairs.push(match columns {
                Columns::XY => (a, b),
                Columns::YX => (b, a),
            }),
            Err(e) => bad.push((no, e)),
        }
    }
    if !bad.is_empty() {
        return Err(CliError::Ingestion { message: format!("{} invalid line(s)", bad.len()), lines: bad });
    }
    if pairs.len() < 2 {
        return Err(CliError::Ingestion {
            message: format!("need at least 2 data rows, found {}", pairs.len()),
            lines: Vec::new(),
        });
    }
    PairedSampleF64::new(pairs).map_err(CliError::from)
}

pub fn ingest_csv(path: &Path, columns: Columns) -> Result<PairedSampleF64, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Ingestion {
        message: format!("cannot read {}: {e}", path.display()),
        lines: Vec::new(),
    })?;
    parse_csv(&text, columns)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_detected() {
        let s = parse_csv("x,y\n1,1\n2,2\n", Columns::XY).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.tie_count(), 0);
        let s = parse_csv("1,1\n2,2", Columns::XY).unwrap();
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn blank_and_nan_lines_are_named() {
        match parse_csv("x,y\n1,1\n\n2,NaN\n3,3\n", Columns::XY) {
            Err(CliError::Ingestion { lines, .. }) => {
                let nos: Vec<usize> = lines.iter().map(|(n, _)| *n).collect();
                assert_eq!(nos, vec![3, 4]);
            }
            other => panic!("expected ingestion error, got {other:?}"),
        }
    }

    #[test]
    fn columns_can_be_swapped() {
        let s = parse_csv("a,b\n1,10\n2,20\n", Columns::YX).unwrap();
        assert_eq!(s.x(), &[10.0, 20.0]);
        assert_eq!(s.y(), &[1.0, 2.0]);
    }

    #[test]
    fn too_few_rows_and_bad_width() {
        assert!(parse_csv("x,y\n1,1\n", Columns::XY).is_err());
        assert!(parse_csv("1,2,3\n4,5,6\n", Columns::XY).is_err());
        assert!(parse_csv("", Columns::XY).is_err());
    }

    #[test]
    fn partially_numeric_first_row_is_an_error() {
        assert!(matches!(parse_csv("1,abc\n1,1\n2,2\n", Columns::XY), Err(CliError::Ingestion { .. })));
    }
}
