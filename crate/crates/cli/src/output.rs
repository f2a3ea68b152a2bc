//! Deterministic artifact writers: JSON with full-precision scientific
//! floats and stable (struct-ordered) keys, CSV with header rows.

use impspps_core::{Error, Result};
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter, Serializer};
use std::io::{self, Write};
use std::path::Path;

/// Pretty JSON whose floats are printed as full-precision scientific
/// notation. Non-finite values never reach the formatter: the serializer
/// itself writes them as null (so a sup-norm exponent p = ∞ appears as
/// null in the error tables).
struct SciFormatter<'a> {
    inner: PrettyFormatter<'a>,
}

impl Formatter for SciFormatter<'_> {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.17e}")
    }

    fn begin_array<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.inner.begin_array(writer)
    }

    fn end_array<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W>(&mut self, writer: &mut W, first: bool) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.inner.begin_object(writer)
    }

    fn end_object<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W>(&mut self, writer: &mut W, first: bool) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.inner.end_object_value(writer)
    }
}

/// Serializes `value` to `path` as pretty JSON with scientific floats.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = create(path)?;
    let mut writer = io::BufWriter::new(file);
    let formatter = SciFormatter {
        inner: PrettyFormatter::new(),
    };
    let mut ser = Serializer::with_formatter(&mut writer, formatter);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Config(format!("cannot serialize {}: {e}", path.display())))?;
    writer
        .write_all(b"\n")
        .and_then(|()| writer.flush())
        .map_err(|e| write_error(path, e))
}

/// Writes a CSV file: a header row, then rows of full-precision scientific
/// numbers.
pub fn write_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<()> {
    let file = create(path)?;
    let mut out = io::BufWriter::new(file);
    let mut body = || -> io::Result<()> {
        writeln!(out, "{header}")?;
        for row in rows {
            let mut first = true;
            for v in row {
                if !first {
                    write!(out, ",")?;
                }
                write!(out, "{v:.17e}")?;
                first = false;
            }
            writeln!(out)?;
        }
        out.flush()
    };
    body().map_err(|e| write_error(path, e))
}

/// Opens `path` for writing, creating parent directories as needed.
pub fn create(path: &Path) -> Result<std::fs::File> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| write_error(parent, e))?;
        }
    }
    std::fs::File::create(path).map_err(|e| write_error(path, e))
}

fn write_error(path: &Path, e: io::Error) -> Error {
    Error::Config(format!("cannot write {}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Serialize;

    #[derive(Serialize)]
    struct Sample {
        value: f64,
        edge: f64,
    }

    #[test]
    fn json_floats_are_scientific_and_parseable() {
        let dir = std::env::temp_dir().join("impspps-output-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("sample.json");
        write_json(
            &path,
            &Sample {
                value: 0.1,
                edge: f64::INFINITY,
            },
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("1.00000000000000006e-1"), "{text}");
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["value"].as_f64().unwrap(), 0.1);
        assert!(parsed["edge"].is_null());
    }
}
