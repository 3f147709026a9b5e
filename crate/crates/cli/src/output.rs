//! CSV tables and the JSON result document.

use std::path::Path;

use serde_json::Value;

/// 17 significant digits, `.` as decimal separator.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

#[derive(Debug, Clone)]
pub struct Csv {
    pub name: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Csv { name: name.to_string(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn render(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("cells are UTF-8")
    }
}

fn flatten(prefix: &str, v: &Value, csv: &mut Csv) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, csv);
            }
        }
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), x, csv);
            }
        }
        Value::Number(n) if n.is_f64() => csv.row(vec![prefix.to_string(), num(n.as_f64().unwrap_or(f64::NAN))]),
        Value::Number(n) => csv.row(vec![prefix.to_string(), n.to_string()]),
        Value::Bool(b) => csv.row(vec![prefix.to_string(), b.to_string()]),
        Value::String(s) => csv.row(vec![prefix.to_string(), s.clone()]),
        Value::Null => csv.row(vec![prefix.to_string(), "null".into()]),
    }
}

/// Every summary value as one `key,value` row.
pub fn summary_csv(summary: &Value) -> Csv {
    let mut csv = Csv::new("summary.csv", &["key", "value"]);
    flatten("", summary, &mut csv);
    csv
}

/// Writes `report.json` and the CSV tables into `dir`, in order.
pub fn write_all(dir: &Path, report: &Value, csvs: &[Csv]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut json = serde_json::to_string_pretty(report).expect("report serializes");
    json.push('\n');
    std::fs::write(dir.join("report.json"), json)?;
    for c in csvs {
        std::fs::write(dir.join(&c.name), c.render())?;
    }
    Ok(())
}

/// One-line human summary for stderr.
pub fn status_line(command: &str, passed: bool, dir: &Path) -> String {
    format!("{command}: {} (results in {})", if passed { "pass" } else { "FAIL" }, dir.display())
}
