//! Report values and their text, JSON and CSV renderings.

use serde_json::{Map, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

/// A command's output: JSON object with a `results` array, a human
/// rendering, the CSV column order, and whether every check passed.
pub struct Report {
    pub header: Map<String, Value>,
    pub results: Vec<Value>,
    pub columns: Vec<&'static str>,
    pub text: String,
    pub ok: bool,
}

impl Report {
    pub fn new(columns: &[&'static str]) -> Report {
        Report { header: Map::new(), results: Vec::new(), columns: columns.to_vec(), text: String::new(), ok: true }
    }

    pub fn set(&mut self, key: &str, v: impl Into<Value>) {
        self.header.insert(key.to_string(), v.into());
    }

    pub fn line(&mut self, s: impl AsRef<str>) {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
    }

    pub fn push(&mut self, v: Value) {
        self.results.push(v);
    }

    pub fn json(&self) -> Value {
        let mut m = self.header.clone();
        m.insert("results".into(), Value::Array(self.results.clone()));
        Value::Object(m)
    }

    pub fn emit(&self, format: Format) -> String {
        match format {
            Format::Text => self.text.clone(),
            Format::Json => format!("{}\n", self.json()),
            Format::Csv => {
                let mut s = self.columns.join(",");
                s.push('\n');
                for r in &self.results {
                    let row: Vec<String> = self.columns.iter().map(|c| csv_cell(r.get(*c).unwrap_or(&Value::Null))).collect();
                    s.push_str(&row.join(","));
                    s.push('\n');
                }
                s
            }
        }
    }
}

fn csv_cell(v: &Value) -> String {
    let raw = match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    if raw.contains([',', '"', '\n']) {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw
    }
}

pub fn pass_word(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn empty_report_is_minimal_json() {
        assert_eq!(Report::new(&[]).emit(Format::Json), "{\"results\":[]}\n");
    }

    #[test]
    fn csv_quotes_cells_with_commas() {
        let mut r = Report::new(&["z", "mu"]);
        r.push(json!({"z": "12", "mu": "v, v^-1"}));
        assert_eq!(r.emit(Format::Csv), "z,mu\n12,\"v, v^-1\"\n");
    }
}
