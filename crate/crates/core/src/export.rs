//! Shared CSV conventions: every row carries the config hash and the crate
//! version, and floats use a fixed format so reruns are byte-identical.

use std::io::Write;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunMeta {
    pub config_hash: String,
    pub version: String,
}

impl RunMeta {
    pub fn new(config_hash: impl Into<String>) -> Self {
        RunMeta { config_hash: config_hash.into(), version: env!("CARGO_PKG_VERSION").to_string() }
    }
}

impl Default for RunMeta {
    fn default() -> Self {
        RunMeta::new("none")
    }
}

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.12e}")
    }
}

/// Writes a table with the two metadata columns appended to every row.
pub fn write_table(w: impl Write, header: &[&str], rows: &[Vec<String>], meta: &RunMeta) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut head: Vec<&str> = header.to_vec();
    head.extend(["config_hash", "version"]);
    out.write_record(&head).map_err(csv_err)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Format(format!("row has {} fields, header {}", row.len(), header.len())));
        }
        let mut rec = row.clone();
        rec.push(meta.config_hash.clone());
        rec.push(meta.version.clone());
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_float_format() {
        assert_eq!(fmt_f64(0.5), "5.000000000000e-1");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }

    #[test]
    fn table_appends_metadata() {
        let mut buf = Vec::new();
        let rows = vec![vec!["1".to_string(), fmt_f64(2.0)]];
        write_table(&mut buf, &["a", "b"], &rows, &RunMeta::new("abc")).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, format!("a,b,config_hash,version\n1,2.000000000000e0,abc,{}\n", env!("CARGO_PKG_VERSION")));
    }

    #[test]
    fn ragged_rows_rejected() {
        let rows = vec![vec!["1".to_string()]];
        assert!(write_table(Vec::new(), &["a", "b"], &rows, &RunMeta::default()).is_err());
    }
}
