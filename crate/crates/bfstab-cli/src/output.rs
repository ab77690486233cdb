//! Tabular output. CSV carries a provenance comment line and a header row;
//! JSON carries the same rows as objects plus any extra payload.

use std::io::Write;

use serde_json::{json, Map, Value};

use crate::config::Format;

#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            // 17 significant digits; -0 printed as 0
            Cell::Num(x) => format!("{:.16e}", if *x == 0.0 { 0.0 } else { *x }),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) if x.is_finite() => json!(x),
            Cell::Num(x) => json!(x.to_string()),
            Cell::Int(i) => json!(i),
            Cell::Text(s) => json!(s),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub provenance: Vec<(String, String)>,
    /// JSON-only payload, for structures with no flat row form.
    pub extra: Option<(&'static str, Value)>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>, provenance: Vec<(String, String)>) -> Self {
        Table {
            columns,
            rows: vec![],
            provenance,
            extra: None,
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn provenance_line(&self) -> String {
        let kv: Vec<String> = self.provenance.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("# {}", kv.join(" "))
    }

    pub fn write(&self, format: Format, mut w: impl Write) -> std::io::Result<()> {
        match format {
            Format::Csv => {
                writeln!(w, "{}", self.provenance_line())?;
                let mut cw = csv::Writer::from_writer(&mut w);
                cw.write_record(&self.columns)?;
                for row in &self.rows {
                    cw.write_record(row.iter().map(Cell::csv))?;
                }
                cw.flush()?;
            }
            Format::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let obj: Map<String, Value> = self
                            .columns
                            .iter()
                            .zip(row)
                            .map(|(c, v)| (c.to_string(), v.json()))
                            .collect();
                        Value::Object(obj)
                    })
                    .collect();
                let prov: Map<String, Value> = self.provenance.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
                let mut doc = json!({ "provenance": prov, "columns": self.columns, "rows": rows });
                if let Some((key, value)) = &self.extra {
                    doc[*key] = value.clone();
                }
                serde_json::to_writer_pretty(&mut w, &doc)?;
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new(vec!["x", "flag"], vec![("command".into(), "test".into())]);
        t.push(vec![Cell::Num(0.1), Cell::Int(1)]);
        t.push(vec![Cell::Num(-0.25), Cell::Empty]);
        t.push(vec![Cell::Num(-0.0), Cell::Int(0)]);
        t
    }

    #[test]
    fn csv_layout() {
        let mut buf = vec![];
        sample().write(Format::Csv, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# command=test");
        assert_eq!(lines[1], "x,flag");
        assert_eq!(lines[2], "1.0000000000000001e-1,1");
        assert_eq!(lines[3], "-2.5000000000000000e-1,");
        assert_eq!(lines[4], "0.0000000000000000e0,0");
        assert_eq!(lines[2].parse::<f64>().ok(), None);
        assert_eq!(lines[2].split(',').next().unwrap().parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn json_mirrors_rows() {
        let mut buf = vec![];
        sample().write(Format::Json, &mut buf).unwrap();
        let v: Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["rows"][0]["x"], json!(0.1));
        assert_eq!(v["rows"][1]["flag"], Value::Null);
        assert_eq!(v["provenance"]["command"], json!("test"));
    }
}
