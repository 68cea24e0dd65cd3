use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

/// Seventeen significant digits in scientific form: round-trip safe, '.' decimal.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and a rename, or to standard output when no path is given.
pub fn write_atomic(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    let io = |e: std::io::Error| Error::Io(e.to_string());
    let Some(path) = path else {
        let mut out = std::io::stdout().lock();
        out.write_all(bytes).map_err(io)?;
        return out.flush().map_err(io);
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| Error::Io(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

/// Indented JSON that keeps scalar arrays, such as `[re, im]`, and matrix
/// rows on one line.
pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::Io(e.to_string()))?;
    Ok(compact(&v, 0))
}

fn is_scalar(v: &Value) -> bool {
    !v.is_array() && !v.is_object()
}

fn compact(v: &Value, indent: usize) -> String {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Array(a) if a.iter().all(is_scalar) => {
            format!("[{}]", a.iter().map(Value::to_string).collect::<Vec<_>>().join(", "))
        }
        Value::Array(a) if a.iter().all(|x| x.as_array().is_some_and(|r| r.iter().all(is_scalar))) => {
            format!("[{}]", a.iter().map(|x| compact(x, 0)).collect::<Vec<_>>().join(", "))
        }
        Value::Array(a) => {
            let items: Vec<String> = a.iter().map(|x| format!("{}{}", pad(indent + 1), compact(x, indent + 1))).collect();
            format!("[\n{}\n{}]", items.join(",\n"), pad(indent))
        }
        Value::Object(o) if o.is_empty() => "{}".into(),
        Value::Object(o) => {
            let items: Vec<String> =
                o.iter().map(|(k, x)| format!("{}{}: {}", pad(indent + 1), Value::from(k.as_str()), compact(x, indent + 1))).collect();
            format!("{{\n{}\n{}}}", items.join(",\n"), pad(indent))
        }
        scalar => scalar.to_string(),
    }
}

pub(crate) fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = to_json_pretty(value)?.into_bytes();
    v.push(b'\n');
    Ok(v)
}

/// A CSV table with a fixed header.
pub(crate) struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_floats(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&x| format_float(x)).collect());
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&self.header).map_err(err)?;
        for r in &self.rows {
            w.write_record(r).map_err(err)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 123456789.125, std::f64::consts::PI] {
            let s = format_float(x);
            assert!(!s.contains(','));
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(format_float(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn compact_json() {
        let v = serde_json::json!({"m": [[[1.0, 0.0], [0.5, -0.5]]], "e": [], "o": {}, "s": "x"});
        let s = to_json_pretty(&v).unwrap();
        assert_eq!(s, "{\n  \"m\": [\n    [[1.0, 0.0], [0.5, -0.5]]\n  ],\n  \"e\": [],\n  \"o\": {},\n  \"s\": \"x\"\n}");
        assert_eq!(serde_json::from_str::<Value>(&s).unwrap(), v);
    }

    #[test]
    fn table_layout() {
        let mut t = Table::new(&["a", "b"]);
        t.push_floats(&[1.0, 0.25]);
        t.push(vec!["x,y".into(), "z".into()]);
        let s = String::from_utf8(t.to_bytes().unwrap()).unwrap();
        assert_eq!(s, "a,b\n1.0000000000000000e0,2.5000000000000000e-1\n\"x,y\",z\n");
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.json");
        std::fs::write(&p, "old").unwrap();
        write_atomic(Some(&p), b"new").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "new");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        assert!(write_atomic(Some(&dir.path().join("missing/out.json")), b"x").is_err());
    }
}
