use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Bumped whenever columns or metadata keys change meaning.
pub const SCHEMA: &str = "cvpbt-table/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Column-major description, row-major data, and a metadata block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub schema: String,
    pub command: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub metadata: Map<String, Value>,
}

impl ResultTable {
    pub fn new(command: &str, columns: &[&str]) -> Self {
        let mut metadata = Map::new();
        metadata.insert("tool_version".into(), Value::from(env!("CARGO_PKG_VERSION")));
        ResultTable {
            schema: SCHEMA.into(),
            command: command.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            metadata,
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn meta(&mut self, key: &str, value: impl Into<Value>) {
        self.metadata.insert(key.into(), value.into());
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn write(&self, format: Format, out: &mut dyn Write) -> std::io::Result<()> {
        match format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut *out, self)?;
                writeln!(out)
            }
            Format::Csv => self.write_csv(out),
        }
    }

    /// '#'-prefixed metadata lines (key: JSON value), a header row, then 17 significant digits per value.
    pub fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(out, "# schema: {}", Value::from(self.schema.as_str()))?;
        writeln!(out, "# command: {}", Value::from(self.command.as_str()))?;
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}: {v}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|x| format!("{x:.16e}")))?;
        }
        w.flush()
    }

    pub fn to_string(&self, format: Format) -> String {
        let mut buf = Vec::new();
        self.write(format, &mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("tables are UTF-8")
    }

    pub fn read_csv(input: &mut dyn BufRead) -> Result<ResultTable, String> {
        let mut text = String::new();
        input.read_to_string(&mut text).map_err(|e| e.to_string())?;
        let mut schema = None;
        let mut command = None;
        let mut metadata = Map::new();
        let mut body = String::new();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix("# ") {
                let (k, v) = rest.split_once(": ").ok_or_else(|| format!("bad metadata line {line:?}"))?;
                let v: Value = serde_json::from_str(v).map_err(|e| format!("metadata {k}: {e}"))?;
                match k {
                    "schema" => schema = v.as_str().map(String::from),
                    "command" => command = v.as_str().map(String::from),
                    _ => {
                        metadata.insert(k.into(), v);
                    }
                }
            } else {
                body.push_str(line);
                body.push('\n');
            }
        }
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let columns: Vec<String> = r.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| e.to_string())?;
            rows.push(rec.iter().map(|s| s.parse::<f64>().map_err(|e| format!("{s:?}: {e}"))).collect::<Result<Vec<_>, _>>()?);
        }
        Ok(ResultTable {
            schema: schema.ok_or("missing schema line")?,
            command: command.ok_or("missing command line")?,
            columns,
            rows,
            metadata,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_json_round_trip_bits() {
        let mut t = ResultTable::new("demo", &["x", "y"]);
        t.push(vec![0.1, -1.0 / 3.0]);
        t.push(vec![f64::MIN_POSITIVE, 1e300]);
        t.push(vec![0.0, -0.0]);
        t.meta("tol", 1e-12);
        let csv = t.to_string(Format::Csv);
        let back = ResultTable::read_csv(&mut csv.as_bytes()).unwrap();
        let json: ResultTable = serde_json::from_str(&t.to_string(Format::Json)).unwrap();
        for other in [&back, &json] {
            assert_eq!(other.columns, t.columns);
            assert_eq!(other.metadata, t.metadata);
            for (a, b) in other.rows.iter().flatten().zip(t.rows.iter().flatten()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn csv_layout() {
        let mut t = ResultTable::new("demo", &["x"]);
        t.push(vec![0.5]);
        let s = t.to_string(Format::Csv);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# schema: \"cvpbt-table/1\"");
        assert_eq!(lines[lines.len() - 2], "x");
        assert_eq!(lines[lines.len() - 1], "5.0000000000000000e-1");
    }
}
