//! Output files. Everything a command writes goes through [`OutDir`], which
//! only accepts bare file names.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(&format!("creating {}", root.display()), e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        assert!(
            !name.is_empty() && !name.contains(['/', '\\']) && name != "..",
            "output names are bare file names"
        );
        let path = self.root.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&format!("writing {}", path.display()), e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io("serializing JSON", e))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::io("formatting CSV", e);
        w.write_record(header).map_err(io)?;
        for row in rows {
            w.write_record(row).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::io("formatting CSV", e))?;
        self.write(name, &bytes)
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}

/// Shortest round-trip decimal form; non-finite values become `NaN`, `inf`
/// or `-inf`.
pub fn num(v: f64) -> String {
    v.to_string()
}

/// Flatten a JSON value to `(dotted.path, value)` pairs, object keys sorted.
pub fn flatten(value: &Value) -> Vec<(String, String)> {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
        let key = |k: &str| {
            if prefix.is_empty() {
                k.to_string()
            } else {
                format!("{prefix}.{k}")
            }
        };
        match v {
            Value::Object(map) => map.iter().for_each(|(k, v)| walk(&key(k), v, out)),
            Value::Array(items) => items.iter().enumerate().for_each(|(i, v)| walk(&key(&i.to_string()), v, out)),
            Value::String(s) => out.push((prefix.to_string(), s.clone())),
            Value::Null => out.push((prefix.to_string(), String::new())),
            other => out.push((prefix.to_string(), other.to_string())),
        }
    }
    let mut out = Vec::new();
    walk("", value, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flatten_paths() {
        let v = serde_json::json!({"kind": "directed", "blocks": [{"a": 1.5}, {"a": null}]});
        assert_eq!(
            flatten(&v),
            vec![
                ("blocks.0.a".to_string(), "1.5".to_string()),
                ("blocks.1.a".to_string(), String::new()),
                ("kind".to_string(), "directed".to_string()),
            ]
        );
    }
}
