//! CSV files with `#`-prefixed metadata lines.
//!
//! Layout: `# schema: …`, `# engine: …`, `# config: <json>`, optional
//! `# job: <json>`, the CSV header and rows, then an optional
//! `# footer: <json>` once the table is complete. Readers that skip `#`
//! lines (`pandas.read_csv(comment="#")`) see a plain table.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::observables::ENGINE_VERSION;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TableMeta {
    pub schema: Option<String>,
    pub engine: Option<String>,
    pub config: Option<Value>,
    pub job: Option<Value>,
    pub footer: Option<Value>,
}

pub fn write_meta<W: Write>(w: &mut W, schema: &str, config: &Value, job: Option<&Value>) -> Result<()> {
    writeln!(w, "# schema: {schema}")?;
    writeln!(w, "# engine: {ENGINE_VERSION}")?;
    writeln!(w, "# config: {}", serde_json::to_string(config)?)?;
    if let Some(j) = job {
        writeln!(w, "# job: {}", serde_json::to_string(j)?)?;
    }
    Ok(())
}

pub fn write_footer<W: Write>(w: &mut W, footer: &Value) -> Result<()> {
    writeln!(w, "# footer: {}", serde_json::to_string(footer)?)?;
    Ok(())
}

/// Reads metadata and rows; rows that fail to parse (a line cut short by an
/// interrupted run) are dropped.
pub fn read_table<T: DeserializeOwned>(path: &Path) -> Result<(TableMeta, Vec<T>)> {
    let mut meta = TableMeta::default();
    let mut body = String::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        match line.strip_prefix("# ") {
            Some(rest) => {
                let (key, value) = rest.split_once(": ").unwrap_or((rest, ""));
                match key {
                    "schema" => meta.schema = Some(value.to_string()),
                    "engine" => meta.engine = Some(value.to_string()),
                    "config" => meta.config = serde_json::from_str(value).ok(),
                    "job" => meta.job = serde_json::from_str(value).ok(),
                    "footer" => meta.footer = serde_json::from_str(value).ok(),
                    _ => {}
                }
            }
            None if line.starts_with('#') => {}
            None => {
                body.push_str(&line);
                body.push('\n');
            }
        }
    }
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let rows = rdr.deserialize().filter_map(|r| r.ok()).collect();
    Ok((meta, rows))
}

/// Writes a complete table to a sibling temp file and renames it into place.
pub fn write_table_atomic<T: Serialize>(
    path: &Path,
    schema: &str,
    config: &Value,
    job: Option<&Value>,
    rows: &[T],
    footer: Option<&Value>,
) -> Result<()> {
    write_atomic(path, |f| {
        write_meta(f, schema, config, job)?;
        {
            let mut w = csv::Writer::from_writer(&mut *f);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        if let Some(ft) = footer {
            write_footer(f, ft)?;
        }
        Ok(())
    })
}

pub fn write_atomic(path: &Path, body: impl FnOnce(&mut File) -> Result<()>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let tmp = temp_sibling(path);
    let mut f = File::create(&tmp)?;
    let res = body(&mut f).and_then(|_| f.sync_all().map_err(Error::from));
    drop(f);
    if let Err(e) = res {
        let _ = fs::remove_file(&tmp);
        return Err(e);
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn temp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".partial");
    path.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Row {
        a: usize,
        b: f64,
    }

    #[test]
    fn metadata_roundtrip_and_truncated_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let cfg = serde_json::json!({"x": 1});
        let rows = vec![Row { a: 0, b: 0.5 }, Row { a: 1, b: f64::NAN }];
        write_table_atomic(&path, "s/1", &cfg, None, &rows, Some(&serde_json::json!({"done": true}))).unwrap();
        let (meta, back): (_, Vec<Row>) = read_table(&path).unwrap();
        assert_eq!(meta.schema.as_deref(), Some("s/1"));
        assert_eq!(meta.config, Some(cfg));
        assert_eq!(meta.footer.unwrap()["done"], true);
        assert_eq!(back[0], rows[0]);
        assert!(back[1].b.is_nan());

        let mut f = fs::OpenOptions::new().append(true).open(&path).unwrap();
        write!(f, "2,").unwrap();
        let (_, back): (_, Vec<Row>) = read_table(&path).unwrap();
        assert_eq!(back.len(), 2);
    }
}
