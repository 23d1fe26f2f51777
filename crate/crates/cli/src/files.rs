//! Bank, signal and output file handling.
//!
//! Bank files come in two flavours. The text form has one filter per line
//! with `+` and `-` per tap; the structured form is `{"filters": [[1, -1, ...], ...]}`.
//! Anything whose first non-blank character is `{` is read as the latter.

use std::io::Write;
use std::path::Path;

use fbshare::{validate_bank, Error, FilterBank, SignalFrame};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BankDoc {
    filters: Vec<Vec<i64>>,
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Read {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn parse_bank(text: &str, origin: &str) -> Result<FilterBank, CliError> {
    if text.trim_start().starts_with('{') {
        let doc: BankDoc = serde_json::from_str(text).map_err(|e| CliError::Parse {
            path: origin.to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        return Ok(validate_bank(&doc.filters)?);
    }

    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let row = line
            .chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                // a digit is a coefficient, just not a legal one unless it is 1
                d if d.is_ascii_digit() => Ok(i64::from(d.to_digit(10).unwrap_or(0))),
                other => Err(CliError::Parse {
                    path: origin.to_string(),
                    line: n + 1,
                    message: format!("unexpected character {other:?}, expected '+' or '-'"),
                }),
            })
            .collect::<Result<Vec<i64>, _>>()?;
        rows.push(row);
    }
    Ok(validate_bank(&rows)?)
}

pub fn read_bank(path: &Path) -> Result<FilterBank, CliError> {
    parse_bank(&read_text(path)?, &path.display().to_string())
}

/// Canonical text form: one line per filter, newline terminated.
pub fn bank_to_text(bank: &FilterBank) -> String {
    let mut out = String::with_capacity(bank.filters() * (bank.taps() + 1));
    for row in bank.rows() {
        out.extend(row.iter().map(|&c| match c {
            1 => '+',
            -1 => '-',
            _ => '0',
        }));
        out.push('\n');
    }
    out
}

pub fn bank_to_json(bank: &FilterBank) -> String {
    let doc = BankDoc {
        filters: bank
            .rows()
            .map(|r| r.iter().map(|&c| i64::from(c)).collect())
            .collect(),
    };
    let mut s = serde_json::to_string(&doc).expect("bank document serializes");
    s.push('\n');
    s
}

/// One decimal integer per line; blank lines are skipped.
pub fn parse_signal(text: &str, origin: &str, sample_width: u32) -> Result<SignalFrame, CliError> {
    let mut samples = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        samples.push(line.parse::<i64>().map_err(|e| CliError::Parse {
            path: origin.to_string(),
            line: n + 1,
            message: format!("{line:?}: {e}"),
        })?);
    }
    Ok(SignalFrame::new(samples, sample_width)?)
}

pub fn read_signal(path: &Path, sample_width: u32) -> Result<SignalFrame, CliError> {
    parse_signal(&read_text(path)?, &path.display().to_string(), sample_width)
}

/// Writes `contents` to `path` via a temporary file in the same directory, or
/// to stdout when no path is given.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    let Some(path) = path else {
        let mut out = std::io::stdout().lock();
        return out
            .write_all(contents.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| write_failure(Path::new("<stdout>"), e));
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| write_failure(path, e))?;
    tmp.write_all(contents.as_bytes())
        .map_err(|e| write_failure(path, e))?;
    tmp.persist(path)
        .map_err(|e| write_failure(path, e.error))?;
    Ok(())
}

fn write_failure(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(Error::WriteFailure {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_and_json_agree() {
        let a = parse_bank("+-+\n--+\n", "a").unwrap();
        let b = parse_bank(r#"{"filters": [[1, -1, 1], [-1, -1, 1]]}"#, "b").unwrap();
        assert_eq!(a, b);
        assert_eq!(bank_to_text(&a), "+-+\n--+\n");
        assert_eq!(parse_bank(&bank_to_json(&a), "c").unwrap(), a);
    }

    #[test]
    fn bad_banks() {
        assert!(matches!(
            parse_bank("+0+\n", "x"),
            Err(CliError::Core(Error::NonUnitCoefficient {
                filter: 0,
                tap: 1,
                value: 0
            }))
        ));
        assert!(matches!(
            parse_bank(r#"{"filters": [[1, 2]]}"#, "x"),
            Err(CliError::Core(Error::NonUnitCoefficient { value: 2, .. }))
        ));
        assert!(matches!(
            parse_bank("+-\n+\n", "x"),
            Err(CliError::Core(Error::RaggedBank { .. }))
        ));
        assert!(matches!(
            parse_bank("", "x"),
            Err(CliError::Core(Error::EmptyBank))
        ));
        assert!(matches!(
            parse_bank("+x\n", "x"),
            Err(CliError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn signals() {
        let s = parse_signal("1\n\n-7\r\n 32767\n", "s", 16).unwrap();
        assert_eq!(s.samples(), &[1, -7, 32767]);
        assert!(matches!(
            parse_signal("40000\n", "s", 16),
            Err(CliError::Core(Error::SampleOutOfRange { .. }))
        ));
        assert!(matches!(
            parse_signal("1.5\n", "s", 16),
            Err(CliError::Parse { line: 1, .. })
        ));
    }
}
