use std::fmt::Write;

use tse_core::RawSeries;

use super::{check_values, FileFormat, IngestError};

fn number(field: &str) -> Option<f64> {
    let f = field.trim();
    if f.is_empty() {
        return None;
    }
    f.parse().ok()
}

fn decode_text(bytes: &[u8]) -> Result<&str, IngestError> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    std::str::from_utf8(bytes).map_err(|e| IngestError::ParseError {
        line: 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count(),
        message: "invalid UTF-8".into(),
    })
}

/// Parse a single numeric column from text.
///
/// `Txt`: one number per line; a line holding a delimiter is rejected as
/// ambiguous. `Csv`: comma separated; a header row is skipped when it fails to
/// parse in a column where the next row succeeds; the series is the single
/// column that parses on every data row. Trailing blank lines are ignored.
pub fn parse_numeric_file(bytes: &[u8], format: FileFormat) -> Result<RawSeries, IngestError> {
    let text = decode_text(bytes)?;
    let values = match format {
        FileFormat::Txt => parse_txt(text)?,
        FileFormat::Csv => parse_csv(text)?,
        FileFormat::Wav => return Err(IngestError::MalformedContainer("audio passed to the text parser".into())),
    };
    check_values_with_lines(values)
}

fn check_values_with_lines(values: Vec<(usize, f64)>) -> Result<RawSeries, IngestError> {
    if let Some(&(line, _)) = values.iter().find(|(_, v)| !v.is_finite()) {
        return Err(IngestError::NonFiniteValue { position: line });
    }
    check_values(values.into_iter().map(|(_, v)| v).collect())
}

fn parse_txt(text: &str) -> Result<Vec<(usize, f64)>, IngestError> {
    let lines: Vec<&str> = text.split('\n').map(|l| l.trim_end_matches('\r')).collect();
    let last = lines.iter().rposition(|l| !l.trim().is_empty()).map_or(0, |i| i + 1);
    let mut out = Vec::with_capacity(last);
    for (i, raw) in lines[..last].iter().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.contains([',', ';', '\t']) || l.contains(char::is_whitespace) {
            return Err(IngestError::MultiColumnAmbiguity);
        }
        let v = number(l).ok_or_else(|| IngestError::ParseError {
            line,
            message: if l.is_empty() { "blank line".into() } else { format!("`{l}` is not a number") },
        })?;
        out.push((line, v));
    }
    Ok(out)
}

fn parse_csv(text: &str) -> Result<Vec<(usize, f64)>, IngestError> {
    let mut reader =
        csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| IngestError::ParseError {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(rows.len() + 1, |p| p.line() as usize);
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    let width = rows.iter().map(|(_, r)| r.len()).max().unwrap_or(0);
    let cell = |row: &Vec<String>, j: usize| row.get(j).and_then(|f| number(f));

    let header = rows.len() >= 2 && (0..width).any(|j| cell(&rows[0].1, j).is_none() && cell(&rows[1].1, j).is_some());
    let data = &rows[usize::from(header)..];

    // first failing line per column, None when the whole column parses
    let failures: Vec<Option<usize>> =
        (0..width).map(|j| data.iter().find(|(_, r)| cell(r, j).is_none()).map(|(line, _)| *line)).collect();
    let numeric: Vec<usize> = (0..width).filter(|&j| failures[j].is_none()).collect();
    match numeric.as_slice() {
        [j] => Ok(data.iter().map(|(line, r)| (*line, cell(r, *j).expect("column parses"))).collect()),
        [] if data.is_empty() => Ok(Vec::new()),
        [] => {
            let line = failures.iter().flatten().copied().max().expect("some column failed");
            let (_, row) = data.iter().find(|(l, _)| *l == line).expect("line exists");
            let shown = row.join(",");
            Err(IngestError::ParseError { line, message: format!("`{shown}` has no numeric value") })
        }
        _ => Err(IngestError::MultiColumnAmbiguity),
    }
}

/// One value per line in shortest round-trip form.
pub fn write_txt(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 20);
    for v in values {
        writeln!(s, "{v}").expect("writing to a string");
    }
    s
}

/// Single-column CSV with a `value` header.
pub fn write_csv(values: &[f64]) -> String {
    format!("value\n{}", write_txt(values))
}
