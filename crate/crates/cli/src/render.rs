//! Table and CSV rendering of JSON documents.

use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum OutputFormat {
    #[default]
    Table,
    Csv,
}

/// A JSON scalar as a bare cell; strings lose their quotes, null is empty.
pub fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn render(headers: &[&str], rows: &[Vec<String>], format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(headers).expect("in-memory write");
            for r in rows {
                w.write_record(r).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
        }
        OutputFormat::Table => {
            let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
            for r in rows {
                for (w, c) in widths.iter_mut().zip(r) {
                    *w = (*w).max(c.chars().count());
                }
            }
            let line = |cells: &mut dyn Iterator<Item = &str>| {
                let padded: Vec<String> = cells.zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
                padded.join("  ").trim_end().to_string() + "\n"
            };
            let mut out = line(&mut headers.iter().copied());
            for r in rows {
                out += &line(&mut r.iter().map(String::as_str));
            }
            out
        }
    }
}

/// Rows of `docs`, one per element, taking `columns` as JSON pointers.
pub fn rows_of(docs: &[Value], columns: &[&str]) -> Vec<Vec<String>> {
    docs.iter().map(|d| columns.iter().map(|c| cell(d.pointer(c).unwrap_or(&Value::Null))).collect()).collect()
}
