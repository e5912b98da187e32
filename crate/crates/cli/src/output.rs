//! Result tables (CSV) and the flat JSON metadata sidecar.

use serde_json::{Map, Value};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).map_err(|e| e.to_string())?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| e.to_string())?;
        }
        w.into_inner().map_err(|e| e.to_string())
    }
}

/// Cell formatting: shortest round-trip for floats, so output is reproducible.
pub trait Cell {
    fn cell(&self) -> String;
}

macro_rules! display_cell {
    ($($t:ty),*) => {$(impl Cell for $t { fn cell(&self) -> String { self.to_string() } })*};
}
display_cell!(usize, u64, u32, i64, bool, &str, String);

impl Cell for f64 {
    fn cell(&self) -> String {
        let a = self.abs();
        if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
            self.to_string()
        } else {
            format!("{self:e}")
        }
    }
}

impl<T: Cell> Cell for Option<T> {
    fn cell(&self) -> String {
        self.as_ref().map(Cell::cell).unwrap_or_default()
    }
}

#[macro_export]
macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$($crate::output::Cell::cell(&$x)),*] };
}

/// A finished experiment: the table plus scalar results for the sidecar.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub table: Table,
    pub results: Vec<(&'static str, Value)>,
}

pub fn json_f64(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub struct RunInfo<'a> {
    pub subcommand: &'a str,
    pub params: Value,
    pub threads: usize,
    pub wall_time_s: f64,
}

/// Flat metadata object: fixed keys, then `param.*` and `result.*`.
pub fn metadata(info: &RunInfo, outcome: &Outcome, table_file: &str) -> Value {
    let mut m = Map::new();
    m.insert("version".into(), Value::from(env!("CARGO_PKG_VERSION")));
    m.insert("subcommand".into(), Value::from(info.subcommand));
    let seed = info.params.get("seed").cloned().unwrap_or(Value::Null);
    m.insert("seed".into(), seed);
    m.insert("threads".into(), Value::from(info.threads));
    m.insert("wall_time_s".into(), json_f64(info.wall_time_s));
    let ts = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    m.insert("timestamp_unix".into(), Value::from(ts));
    m.insert("table".into(), Value::from(table_file));
    m.insert("rows".into(), Value::from(outcome.table.rows.len()));
    m.insert("columns".into(), Value::from(outcome.table.columns.join(",")));
    if let Value::Object(p) = &info.params {
        for (k, v) in p {
            m.insert(format!("param.{k}"), v.clone());
        }
    }
    for (k, v) in &outcome.results {
        m.insert(format!("result.{k}"), v.clone());
    }
    Value::Object(m)
}

pub fn write_outputs(dir: &Path, info: &RunInfo, outcome: &Outcome) -> Result<(PathBuf, PathBuf), String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("creating {}: {e}", dir.display()))?;
    let table_name = format!("{}.csv", info.subcommand);
    let table_path = dir.join(&table_name);
    let meta_path = dir.join(format!("{}.meta.json", info.subcommand));
    std::fs::write(&table_path, outcome.table.to_csv()?).map_err(|e| format!("writing {}: {e}", table_path.display()))?;
    let meta = serde_json::to_string_pretty(&metadata(info, outcome, &table_name)).map_err(|e| e.to_string())?;
    std::fs::write(&meta_path, meta + "\n").map_err(|e| format!("writing {}: {e}", meta_path.display()))?;
    Ok((table_path, meta_path))
}
