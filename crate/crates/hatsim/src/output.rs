use crate::error::CliResult;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Nine significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.8e}")
}

/// Writes CSV files with `#` metadata lines into one directory.
pub struct CsvSink {
    dir: PathBuf,
    meta: Vec<String>,
}

impl CsvSink {
    pub fn new(dir: &Path, command: &str, sha256: &str) -> CliResult<Self> {
        std::fs::create_dir_all(dir)?;
        let meta = vec![
            format!("hatsim {}", env!("CARGO_PKG_VERSION")),
            format!("command: {command}"),
            format!("config_sha256: {sha256}"),
        ];
        Ok(CsvSink { dir: dir.to_path_buf(), meta })
    }

    /// Metadata added to every later file.
    pub fn note(&mut self, line: impl Into<String>) {
        self.meta.push(line.into());
    }

    pub fn write(&self, name: &str, header: &[&str], rows: &[Vec<String>], extra: &[String]) -> CliResult<PathBuf> {
        let mut buf = Vec::new();
        for m in self.meta.iter().chain(extra) {
            writeln!(buf, "# {m}")?;
        }
        {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut buf);
            w.write_record(header)?;
            for r in rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        let path = self.dir.join(name);
        std::fs::write(&path, buf)?;
        Ok(path)
    }
}
