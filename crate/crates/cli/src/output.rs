use crate::config::{config_error, CliError, CommandName, Format};
use crate::svg::Chart;
use serde::Serialize;
use serde_json::{json, Value};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

/// Where a run's artifacts go. Every file starts with the config hash.
pub struct Sink {
    pub dir: Option<PathBuf>,
    pub format: Format,
    pub plot: bool,
    pub hash: String,
    pub command: CommandName,
}

fn io_error(path: &Path, err: io::Error) -> CliError {
    config_error(format!("cannot write {}: {err}", path.display()))
}

impl Sink {
    /// Fails before any compute if the artifacts could not be written.
    pub fn prepare(&self) -> Result<(), CliError> {
        if self.plot && self.dir.is_none() {
            return Err(config_error("--plot needs --output-dir"));
        }
        if let Some(dir) = &self.dir {
            std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        }
        Ok(())
    }

    pub fn require_dir(&self) -> Result<&Path, CliError> {
        self.dir
            .as_deref()
            .ok_or_else(|| config_error(format!("`{}` writes several files and needs --output-dir", self.command)))
    }

    pub fn comment(&self) -> String {
        format!("halledge {} config_hash={}", self.command, self.hash)
    }

    pub fn csv_bytes(&self, body: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> Vec<u8> {
        let mut buf = format!("# {}\n", self.comment()).into_bytes();
        body(&mut buf).expect("writing to memory");
        buf
    }

    pub fn json_bytes(&self, mut value: Value) -> Vec<u8> {
        if let Value::Object(map) = &mut value {
            map.insert("config_hash".into(), Value::String(self.hash.clone()));
        }
        let mut text = serde_json::to_string_pretty(&value).expect("value serialises");
        text.push('\n');
        text.into_bytes()
    }

    pub fn write_file(&self, dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
        eprintln!("wrote {}", path.display());
        Ok(())
    }

    /// A table in the chosen format: into the output directory as
    /// `<stem>.<ext>`, or onto stdout without one.
    pub fn table<R: Serialize>(
        &self,
        stem: &str,
        rows: &[R],
        csv: impl FnOnce(&mut Vec<u8>, &[R]) -> io::Result<()>,
    ) -> Result<(), CliError> {
        let bytes = match self.format {
            Format::Csv => self.csv_bytes(|buf| csv(buf, rows)),
            Format::Json => self.json_bytes(json!({ "command": self.command, "rows": rows })),
        };
        match &self.dir {
            Some(dir) => self.write_file(dir, &format!("{stem}.{}", self.format.extension()), &bytes),
            None => io::stdout().write_all(&bytes).map_err(|e| config_error(format!("stdout: {e}"))),
        }
    }

    pub fn chart(&self, stem: &str, chart: &Chart) -> Result<(), CliError> {
        if !self.plot {
            return Ok(());
        }
        let dir = self.require_dir()?;
        self.write_file(dir, &format!("{stem}.svg"), chart.render(&self.comment()).as_bytes())
    }
}
